use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{window, AudioBuffer};
use crate::error::{invalid, Result};

/// Amplitude and phase spectra of a framed signal.
#[derive(Debug, Clone, PartialEq)]
pub struct StftFrames {
    /// frames x (fft_size / 2 + 1), non-negative.
    pub amplitude: Array2<f64>,
    /// Same shape as `amplitude`, radians in (-pi, pi].
    pub phase: Array2<f64>,
    pub frame_length: usize,
    pub frame_shift: usize,
    pub fft_size: usize,
}

impl StftFrames {
    pub fn frames(&self) -> usize {
        self.amplitude.nrows()
    }

    pub fn bins(&self) -> usize {
        self.amplitude.ncols()
    }
}

/// Reusable STFT analyser: periodic Hann window of `frame_length` samples,
/// centred inside an `fft_size` buffer, with reflective padding of
/// `frame_length / 2` on both sides of the signal.
#[derive(Clone)]
pub struct Stft {
    frame_length: usize,
    frame_shift: usize,
    fft_size: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft")
            .field("frame_length", &self.frame_length)
            .field("frame_shift", &self.frame_shift)
            .field("fft_size", &self.fft_size)
            .finish()
    }
}

impl Stft {
    pub fn new(frame_length: usize, frame_shift: usize, fft_size: usize) -> Result<Self> {
        if frame_length < 2 || frame_shift == 0 {
            return Err(invalid("frame length must be >= 2 and frame shift >= 1"));
        }
        if fft_size < frame_length {
            return Err(invalid(format!(
                "fft size {fft_size} smaller than frame length {frame_length}"
            )));
        }
        if frame_shift > frame_length {
            return Err(invalid(format!(
                "frame shift {frame_shift} exceeds frame length {frame_length}"
            )));
        }
        let fft = FftPlanner::new().plan_fft_forward(fft_size);
        Ok(Self {
            frame_length,
            frame_shift,
            fft_size,
            window: window::hann_periodic(frame_length),
            fft,
        })
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn frame_shift(&self) -> usize {
        self.frame_shift
    }

    pub fn frame_length(&self) -> usize {
        self.frame_length
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        let padded = len + 2 * (self.frame_length / 2);
        (padded - self.frame_length) / self.frame_shift + 1
    }

    fn reflect_pad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let pad = self.frame_length / 2;
        if x.len() < self.frame_length || x.len() <= pad {
            return Err(invalid(format!(
                "signal of {} samples shorter than frame length {}",
                x.len(),
                self.frame_length
            )));
        }
        let mut out = Vec::with_capacity(x.len() + 2 * pad);
        out.extend((1..=pad).rev().map(|i| x[i]));
        out.extend_from_slice(x);
        let n = x.len();
        out.extend((0..pad).map(|i| x[n - 2 - i]));
        Ok(out)
    }

    /// Computes amplitude and phase for every frame of `x`.
    pub fn analyze(&self, x: &[f64]) -> Result<StftFrames> {
        let padded = self.reflect_pad(x)?;
        let frames = (padded.len() - self.frame_length) / self.frame_shift + 1;
        let bins = self.bins();
        let mut amplitude = Array2::zeros((frames, bins));
        let mut phase = Array2::zeros((frames, bins));
        let offset = (self.fft_size - self.frame_length) / 2;
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_size];
        let mut scratch = vec![Complex::new(0.0, 0.0); self.fft.get_inplace_scratch_len()];
        for f in 0..frames {
            buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
            let start = f * self.frame_shift;
            for n in 0..self.frame_length {
                buf[offset + n] = Complex::new(padded[start + n] * self.window[n], 0.0);
            }
            self.fft.process_with_scratch(&mut buf, &mut scratch);
            for k in 0..bins {
                let c = buf[k];
                let a = c.norm();
                amplitude[[f, k]] = a;
                phase[[f, k]] = wrap_phase(a, c.im.atan2(c.re));
            }
        }
        Ok(StftFrames {
            amplitude,
            phase,
            frame_length: self.frame_length,
            frame_shift: self.frame_shift,
            fft_size: self.fft_size,
        })
    }
}

fn wrap_phase(amplitude: f64, angle: f64) -> f64 {
    if amplitude == 0.0 {
        0.0
    } else if angle <= -PI {
        PI
    } else {
        angle
    }
}

/// STFT amplitude and phase of `audio`.
///
/// Frame count is `floor((len + 2 * (frame_length / 2) - frame_length) /
/// frame_shift) + 1`. Silent bins carry phase zero.
pub fn stft_amp_phase(
    audio: &AudioBuffer,
    frame_length: usize,
    frame_shift: usize,
    fft_size: usize,
) -> Result<StftFrames> {
    Stft::new(frame_length, frame_shift, fft_size)?.analyze(audio.samples())
}
