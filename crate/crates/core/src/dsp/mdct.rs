use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1, ArrayViewMut1};

use super::{window, AudioBuffer};
use crate::error::{invalid, Result};

/// Analysis window family used by an [`MdctSpectrum`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowId {
    /// Sine window on interior frames; the outer half of the first and last
    /// frame is rectangular so the transform stays orthogonal at the edges.
    Sine,
}

/// MDCT coefficients, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MdctSpectrum {
    pub coefficients: Array2<f64>,
    pub hop: usize,
    pub window: WindowId,
    /// Number of signal samples before tail padding; the inverse trims to it.
    pub signal_len: usize,
    pub sample_rate: u32,
}

impl MdctSpectrum {
    pub fn frames(&self) -> usize {
        self.coefficients.nrows()
    }
}

/// Lapped orthogonal MDCT with hop `W` and frame length `2W`.
///
/// Frame `f` owns samples `[fW, (f+1)W)` and its basis functions extend
/// `W/2` samples into each neighbour. The transform is computed by folding
/// the windowed frame into `W` samples and applying an orthonormal DCT-IV,
/// which makes the synthesis operator the exact transpose of the analysis
/// operator. A signal of `F * W` samples maps to `F` frames with no
/// redundancy.
#[derive(Debug, Clone)]
pub struct Mdct {
    half: usize,
    window: Vec<f64>,
    // Orthonormal DCT-IV matrix, symmetric and involutory.
    dct4: Array2<f64>,
}

impl Mdct {
    pub fn new(half_window: usize) -> Result<Self> {
        if half_window < 2 || half_window % 2 != 0 {
            return Err(invalid(format!(
                "MDCT half-window must be even and >= 2, got {half_window}"
            )));
        }
        let w = half_window;
        let scale = (2.0 / w as f64).sqrt();
        let dct4 = Array2::from_shape_fn((w, w), |(k, n)| {
            scale * (PI / w as f64 * (n as f64 + 0.5) * (k as f64 + 0.5)).cos()
        });
        Ok(Self {
            half: w,
            window: window::sine(w),
            dct4,
        })
    }

    pub fn half_window(&self) -> usize {
        self.half
    }

    fn window_at(&self, frame: usize, frames: usize, n: usize) -> f64 {
        let w = self.half;
        let q = w / 2;
        if frame == 0 && n < w {
            return if n < q { 0.0 } else { 1.0 };
        }
        if frame + 1 == frames && n >= w {
            return if n < w + q { 1.0 } else { 0.0 };
        }
        self.window[n]
    }

    /// Forward transform of a signal whose length is a multiple of `W`.
    pub fn forward_frames(&self, signal: &[f64]) -> Array2<f64> {
        let w = self.half;
        let q = w / 2;
        assert_eq!(signal.len() % w, 0, "signal length must be a multiple of W");
        let frames = signal.len() / w;
        let mut out = Array2::zeros((frames, w));
        let mut z = vec![0.0; 2 * w];
        let mut folded = vec![0.0; w];
        for f in 0..frames {
            let start = (f * w) as isize - q as isize;
            for (n, zn) in z.iter_mut().enumerate() {
                let idx = start + n as isize;
                *zn = if idx >= 0 && (idx as usize) < signal.len() {
                    self.window_at(f, frames, n) * signal[idx as usize]
                } else {
                    0.0
                };
            }
            for n in 0..q {
                folded[n] = -z[w + q - 1 - n] - z[w + q + n];
            }
            for n in q..w {
                folded[n] = z[n - q] - z[w + q - 1 - n];
            }
            dct4_apply(&self.dct4, ArrayView1::from(&folded[..]), out.row_mut(f));
        }
        out
    }

    /// Inverse transform; returns `frames * W` samples.
    pub fn inverse_frames(&self, coefficients: &Array2<f64>) -> Vec<f64> {
        let w = self.half;
        let q = w / 2;
        assert_eq!(coefficients.ncols(), w, "coefficient width must equal W");
        let frames = coefficients.nrows();
        let len = frames * w;
        let mut out = vec![0.0; len];
        let mut u = vec![0.0; w];
        for f in 0..frames {
            let row = coefficients.row(f);
            dct4_apply(&self.dct4, row, ArrayViewMut1::from(&mut u[..]));
            // Transpose of the folding step.
            for m in 0..2 * w {
                let v = if m < q {
                    u[m + q]
                } else if m < w + q {
                    -u[w + q - 1 - m]
                } else {
                    -u[m - w - q]
                };
                let idx = (f * w) as isize - q as isize + m as isize;
                if idx >= 0 && (idx as usize) < len {
                    out[idx as usize] += self.window_at(f, frames, m) * v;
                }
            }
        }
        out
    }
}

fn dct4_apply(dct4: &Array2<f64>, input: ArrayView1<f64>, mut out: ArrayViewMut1<f64>) {
    for (k, o) in out.iter_mut().enumerate() {
        *o = dct4.row(k).dot(&input);
    }
}

/// MDCT analysis of `audio` with half-window `half_window`.
///
/// The tail is zero-padded to a multiple of `W`, giving `ceil(len / W)`
/// frames.
pub fn mdct_forward(audio: &AudioBuffer, half_window: usize) -> Result<MdctSpectrum> {
    let mdct = Mdct::new(half_window)?;
    if audio.len() < 2 * half_window {
        return Err(invalid(format!(
            "audio of {} samples is shorter than one MDCT frame ({})",
            audio.len(),
            2 * half_window
        )));
    }
    let frames = audio.len().div_ceil(half_window);
    let mut padded = audio.samples().to_vec();
    padded.resize(frames * half_window, 0.0);
    Ok(MdctSpectrum {
        coefficients: mdct.forward_frames(&padded),
        hop: half_window,
        window: WindowId::Sine,
        signal_len: audio.len(),
        sample_rate: audio.sample_rate(),
    })
}

/// Overlap-add synthesis; the output is trimmed to `spectrum.signal_len`.
pub fn mdct_inverse(spectrum: &MdctSpectrum) -> Result<AudioBuffer> {
    let w = spectrum.hop;
    if spectrum.coefficients.ncols() != w || spectrum.frames() == 0 {
        return Err(invalid(format!(
            "spectrum shape {:?} does not match hop {w}",
            spectrum.coefficients.dim()
        )));
    }
    if spectrum.signal_len > spectrum.frames() * w {
        return Err(invalid("signal length exceeds spectrum span"));
    }
    if spectrum.coefficients.iter().any(|c| !c.is_finite()) {
        return Err(invalid("non-finite MDCT coefficient"));
    }
    let mdct = Mdct::new(w)?;
    let mut samples = mdct.inverse_frames(&spectrum.coefficients);
    samples.truncate(spectrum.signal_len);
    AudioBuffer::new(samples, spectrum.sample_rate)
}
