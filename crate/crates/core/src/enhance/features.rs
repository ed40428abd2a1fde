use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dsp::{AudioBuffer, Stft};
use crate::error::{Error, Result};

/// Frames per chunk when projecting features. Fixed so that results do not
/// depend on how chunks are distributed over workers.
pub(crate) const FEATURE_CHUNK: usize = 64;

/// STFT and downsampling settings of the spectral feature extractor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureConfig {
    pub frame_length: usize,
    pub frame_shift: usize,
    pub fft_size: usize,
    /// STFT frames merged into one feature frame (`R`).
    pub downsample: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            frame_length: crate::dsp::DEFAULT_FRAME_LENGTH,
            frame_shift: crate::dsp::DEFAULT_FRAME_SHIFT,
            fft_size: crate::dsp::DEFAULT_FFT_SIZE,
            downsample: 8,
        }
    }
}

impl FeatureConfig {
    /// Samples per feature frame, `w_s * R`.
    pub fn frame_samples(&self) -> usize {
        self.frame_shift * self.downsample
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Width of one stacked raw-feature row.
    pub fn raw_dim(&self) -> usize {
        2 * self.bins() * self.downsample
    }
}

/// Maps audio to one conditioning vector per token frame.
///
/// Each feature frame stacks `R` consecutive STFT frames. Per STFT frame the
/// raw row holds `ln(1 + amplitude)` for every bin followed by the wrapped
/// phase for every bin. The stacked row is projected to `C` dimensions and
/// passed through `tanh`.
#[derive(Debug, Clone)]
pub struct SpectralFeatureExtractor {
    config: FeatureConfig,
    sample_rate: u32,
    stft: Stft,
    /// C x raw_dim
    pub(crate) weights: Array2<f64>,
    pub(crate) bias: Array1<f64>,
}

impl PartialEq for SpectralFeatureExtractor {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.sample_rate == other.sample_rate
            && self.weights == other.weights
            && self.bias == other.bias
    }
}

impl SpectralFeatureExtractor {
    pub fn new(
        config: FeatureConfig,
        sample_rate: u32,
        weights: Array2<f64>,
        bias: Array1<f64>,
    ) -> Result<Self> {
        let stft = Stft::new(config.frame_length, config.frame_shift, config.fft_size)
            .map_err(|e| Error::Config(e.to_string()))?;
        if config.downsample == 0 {
            return Err(Error::Config("downsampling factor must be >= 1".into()));
        }
        if sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if weights.ncols() != config.raw_dim() || weights.nrows() != bias.len() || bias.is_empty() {
            return Err(Error::InvalidInput(format!(
                "extractor weights {:?} / bias {} do not match raw width {}",
                weights.dim(),
                bias.len(),
                config.raw_dim()
            )));
        }
        if weights.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite extractor parameter".into()));
        }
        Ok(Self {
            config,
            sample_rate,
            stft,
            weights: super::standard(weights),
            bias: super::standard(bias),
        })
    }

    /// Random projection scaled by `1 / sqrt(raw_dim)`, zero bias.
    pub fn random(config: FeatureConfig, sample_rate: u32, channels: usize, rng: &mut impl Rng) -> Result<Self> {
        let scale = 1.0 / (config.raw_dim() as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((channels, config.raw_dim()), || {
            scale * rng.sample::<f64, _>(StandardNormal)
        });
        Self::new(config, sample_rate, weights, Array1::zeros(channels))
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn channels(&self) -> usize {
        self.bias.len()
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    /// Number of feature frames for `len` samples; equals the codec's token
    /// frame count when both use the same `T`.
    pub fn frame_count(&self, len: usize) -> usize {
        len.div_ceil(self.config.frame_samples())
    }

    /// Stacked raw spectral rows, one per feature frame.
    pub fn raw_features(&self, audio: &AudioBuffer) -> Result<Array2<f64>> {
        if audio.sample_rate() != self.sample_rate {
            return Err(Error::Config(format!(
                "audio at {} Hz but extractor expects {} Hz",
                audio.sample_rate(),
                self.sample_rate
            )));
        }
        let frames = self.frame_count(audio.len());
        let mut padded = audio.samples().to_vec();
        padded.resize(frames * self.config.frame_samples(), 0.0);
        let spec = self.stft.analyze(&padded)?;
        let r = self.config.downsample;
        let bins = self.config.bins();
        let mut raw = Array2::zeros((frames, self.config.raw_dim()));
        for t in 0..frames {
            let mut row = raw.row_mut(t);
            for j in 0..r {
                let f = t * r + j;
                let base = j * 2 * bins;
                for k in 0..bins {
                    row[base + k] = spec.amplitude[[f, k]].ln_1p();
                    row[base + bins + k] = spec.phase[[f, k]];
                }
            }
        }
        Ok(raw)
    }

    /// `tanh(raw * W^T + b)` for a block of raw rows.
    pub fn project(&self, raw: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((raw.nrows(), self.channels()));
        for (chunk_in, mut chunk_out) in raw
            .axis_chunks_iter(Axis(0), FEATURE_CHUNK)
            .zip(out.axis_chunks_iter_mut(Axis(0), FEATURE_CHUNK))
        {
            chunk_out.assign(&self.project_chunk(chunk_in));
        }
        out
    }

    pub(crate) fn project_chunk(&self, raw: ArrayView2<f64>) -> Array2<f64> {
        let mut pre = raw.dot(&self.weights.t());
        pre += &self.bias;
        pre.mapv_inplace(f64::tanh);
        pre
    }

    /// Conditioning features: one `C`-dimensional row per token frame.
    pub fn extract(&self, audio: &AudioBuffer) -> Result<Array2<f64>> {
        Ok(self.project(self.raw_features(audio)?.view()))
    }

    /// Like [`extract`](Self::extract) with the projection spread over a
    /// rayon pool in fixed-size chunks.
    pub(crate) fn extract_in(&self, audio: &AudioBuffer, pool: Option<&rayon::ThreadPool>) -> Result<Array2<f64>> {
        let raw = self.raw_features(audio)?;
        let Some(pool) = pool else {
            return Ok(self.project(raw.view()));
        };
        use rayon::prelude::*;
        let views: Vec<ArrayView2<f64>> = raw.axis_chunks_iter(Axis(0), FEATURE_CHUNK).collect();
        let chunks: Vec<Array2<f64>> = pool.install(|| {
            views
                .into_par_iter()
                .map(|c| self.project_chunk(c))
                .collect()
        });
        let mut out = Array2::zeros((raw.nrows(), self.channels()));
        for (i, c) in chunks.into_iter().enumerate() {
            let start = i * FEATURE_CHUNK;
            out.slice_mut(s![start..start + c.nrows(), ..]).assign(&c);
        }
        Ok(out)
    }
}

/// Conditioning features for `y`.
pub fn extract_features(y: &AudioBuffer, extractor: &SpectralFeatureExtractor) -> Result<Array2<f64>> {
    extractor.extract(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_framing() {
        let c = FeatureConfig::default();
        assert_eq!(c.frame_samples(), 320);
        assert_eq!(c.raw_dim(), 2 * 513 * 8);
    }

    #[test]
    fn zero_audio_gives_tanh_of_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ex = SpectralFeatureExtractor::random(FeatureConfig::default(), 16000, 8, &mut rng).unwrap();
        ex.bias = Array1::from_vec(vec![0.1, -0.2, 0.3, 0.0, 1.0, -1.0, 2.0, 0.5]);
        let f = ex.extract(&AudioBuffer::zeros(16000, 16000).unwrap()).unwrap();
        assert_eq!(f.dim(), (50, 8));
        for row in f.outer_iter() {
            for (v, b) in row.iter().zip(ex.bias.iter()) {
                assert_eq!(*v, b.tanh());
            }
        }
    }

    #[test]
    fn rate_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ex = SpectralFeatureExtractor::random(FeatureConfig::default(), 16000, 8, &mut rng).unwrap();
        assert!(matches!(
            ex.extract(&AudioBuffer::zeros(8000, 8000).unwrap()),
            Err(Error::Config(_))
        ));
    }
}
