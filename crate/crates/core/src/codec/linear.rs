use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, Axis};

use crate::dsp::{AudioBuffer, Mdct};
use crate::error::{invalid, Error, Result};

/// Minimum corpus duration accepted by [`LinearCodecModel::fit`].
pub const MIN_FIT_SECONDS: f64 = 10.0;

/// Latent frames produced by the codec encoder, one row per token frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Latents {
    pub frames: Array2<f64>,
    /// Length of the encoded signal; the decoder trims its output to it.
    pub signal_len: usize,
}

impl Latents {
    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }
}

/// Linear analysis/synthesis codec operating on stacked MDCT frames.
///
/// Each token frame covers `T` samples, i.e. `T / W` consecutive MDCT frames
/// of `W` bins, flattened into a `D = T` dimensional vector. `analysis`
/// (K x D) projects that vector to the latent `e`, `synthesis` (D x K) maps
/// it back. After [`fit`](Self::fit), analysis rows are orthonormal and
/// `synthesis = analysis^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCodecModel {
    analysis: Array2<f64>,
    synthesis: Array2<f64>,
    half_window: usize,
    frame_samples: usize,
    sample_rate: u32,
}

impl LinearCodecModel {
    pub fn new(
        analysis: Array2<f64>,
        synthesis: Array2<f64>,
        half_window: usize,
        frame_samples: usize,
        sample_rate: u32,
    ) -> Result<Self> {
        Mdct::new(half_window)?;
        if frame_samples == 0 || frame_samples % half_window != 0 {
            return Err(Error::Config(format!(
                "token frame of {frame_samples} samples is not a multiple of W={half_window}"
            )));
        }
        if sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        let d = frame_samples;
        let k = analysis.nrows();
        if k == 0 || analysis.ncols() != d || synthesis.dim() != (d, k) {
            return Err(invalid(format!(
                "analysis {:?} / synthesis {:?} incompatible with D={d}",
                analysis.dim(),
                synthesis.dim()
            )));
        }
        if analysis.iter().chain(synthesis.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("non-finite codec matrix entry"));
        }
        Ok(Self {
            analysis,
            synthesis,
            half_window,
            frame_samples,
            sample_rate,
        })
    }

    /// Fits the codec to a corpus: analysis rows are the top-`latent_dim`
    /// eigenvectors of the (uncentred) second-moment matrix of stacked MDCT
    /// frames. No mean is removed, so the codec stays linear.
    pub fn fit(
        corpus: &[AudioBuffer],
        latent_dim: usize,
        half_window: usize,
        frame_samples: usize,
    ) -> Result<Self> {
        let Some(first) = corpus.first() else {
            return Err(Error::InsufficientData("empty codec training corpus".into()));
        };
        let sample_rate = first.sample_rate();
        if corpus.iter().any(|a| a.sample_rate() != sample_rate) {
            return Err(Error::Config("corpus mixes sample rates".into()));
        }
        let seconds: f64 = corpus.iter().map(AudioBuffer::duration_secs).sum();
        if seconds < MIN_FIT_SECONDS {
            return Err(Error::InsufficientData(format!(
                "codec fit needs >= {MIN_FIT_SECONDS} s of audio, got {seconds:.2} s"
            )));
        }
        let d = frame_samples;
        if latent_dim == 0 || latent_dim > d {
            return Err(Error::Config(format!(
                "latent dimension {latent_dim} must be in 1..={d}"
            )));
        }
        // Identity model used only for framing.
        let framer = Self::new(
            Array2::eye(d),
            Array2::eye(d),
            half_window,
            frame_samples,
            sample_rate,
        )?;
        let mut moment = Array2::<f64>::zeros((d, d));
        let mut count = 0usize;
        for audio in corpus {
            let stacked = framer.stack(audio)?;
            moment += &stacked.t().dot(&stacked);
            count += stacked.nrows();
        }
        moment /= count as f64;

        let sym = DMatrix::from_fn(d, d, |i, j| 0.5 * (moment[[i, j]] + moment[[j, i]]));
        let eig = SymmetricEigen::new(sym);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .total_cmp(&eig.eigenvalues[a])
                .then(a.cmp(&b))
        });
        let mut analysis = Array2::zeros((latent_dim, d));
        for (row, &idx) in order.iter().take(latent_dim).enumerate() {
            let v = eig.eigenvectors.column(idx);
            // Sign convention: largest-magnitude component positive.
            let pivot = (0..d).fold(0, |best, i| if v[i].abs() > v[best].abs() { i } else { best });
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            for i in 0..d {
                analysis[[row, i]] = sign * v[i];
            }
        }
        let synthesis = analysis.t().to_owned();
        Self::new(analysis, synthesis, half_window, frame_samples, sample_rate)
    }

    pub fn latent_dim(&self) -> usize {
        self.analysis.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.frame_samples
    }

    pub fn half_window(&self) -> usize {
        self.half_window
    }

    /// Samples per token frame (`T`).
    pub fn frame_samples(&self) -> usize {
        self.frame_samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn analysis(&self) -> &Array2<f64> {
        &self.analysis
    }

    pub fn synthesis(&self) -> &Array2<f64> {
        &self.synthesis
    }

    /// Number of token frames for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        len.div_ceil(self.frame_samples)
    }

    fn check_rate(&self, audio: &AudioBuffer) -> Result<()> {
        if audio.sample_rate() != self.sample_rate {
            return Err(Error::Config(format!(
                "audio at {} Hz but codec expects {} Hz",
                audio.sample_rate(),
                self.sample_rate
            )));
        }
        Ok(())
    }

    /// Stacked MDCT frames: one `D`-dimensional row per token frame.
    pub fn stack(&self, audio: &AudioBuffer) -> Result<Array2<f64>> {
        self.check_rate(audio)?;
        if audio.is_empty() {
            return Err(invalid("cannot encode empty audio"));
        }
        let frames = self.frame_count(audio.len());
        let mut padded = audio.samples().to_vec();
        padded.resize(frames * self.frame_samples, 0.0);
        let mdct = Mdct::new(self.half_window)?;
        let coeffs = mdct.forward_frames(&padded);
        let stacked = coeffs
            .into_shape_with_order((frames, self.frame_samples))
            .expect("MDCT rows are contiguous");
        Ok(stacked)
    }

    /// Encodes audio into one latent vector per `T` samples.
    pub fn encode(&self, audio: &AudioBuffer) -> Result<Latents> {
        let stacked = self.stack(audio)?;
        Ok(Latents {
            frames: stacked.dot(&self.analysis.t()),
            signal_len: audio.len(),
        })
    }

    /// Decodes latents back to audio trimmed to `latents.signal_len`.
    pub fn decode(&self, latents: &Latents) -> Result<AudioBuffer> {
        if latents.frames.ncols() != self.latent_dim() {
            return Err(invalid(format!(
                "latent dimension {} does not match codec K={}",
                latents.frames.ncols(),
                self.latent_dim()
            )));
        }
        if latents.is_empty() {
            return Err(invalid("no latent frames to decode"));
        }
        if latents.signal_len > latents.len() * self.frame_samples {
            return Err(invalid("signal length exceeds latent span"));
        }
        if latents.frames.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite latent value"));
        }
        let stacked = latents.frames.dot(&self.synthesis.t());
        let rows = latents.len() * self.frame_samples / self.half_window;
        let coeffs = stacked
            .into_shape_with_order((rows, self.half_window))
            .expect("stacked rows are contiguous");
        let mdct = Mdct::new(self.half_window)?;
        let mut samples = mdct.inverse_frames(&coeffs);
        samples.truncate(latents.signal_len);
        AudioBuffer::new(samples, self.sample_rate)
    }

    /// `||P^2 - P||_F` for the latent-space projection `P = S A`.
    pub fn projection_defect(&self) -> f64 {
        let p = self.synthesis.dot(&self.analysis);
        let p2 = p.dot(&p);
        (&p2 - &p).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Mean squared reconstruction error of the latent projection over the
    /// stacked frames of `corpus`.
    pub fn projection_mse(&self, corpus: &[AudioBuffer]) -> Result<f64> {
        let mut total = 0.0;
        let mut count = 0usize;
        for audio in corpus {
            let x = self.stack(audio)?;
            let recon = x.dot(&self.analysis.t()).dot(&self.synthesis.t());
            total += (&x - &recon).iter().map(|v| v * v).sum::<f64>();
            count += x.len_of(Axis(0)) * x.ncols();
        }
        Ok(total / count.max(1) as f64)
    }
}
