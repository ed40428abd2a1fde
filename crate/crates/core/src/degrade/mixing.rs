use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::dsp::{resample, AudioBuffer};
use crate::error::{invalid, Error, Result};

/// SNRs used when building training pairs.
pub const TRAIN_SNR_GRID: [f64; 4] = [0.0, 5.0, 10.0, 15.0];
/// SNRs used when building test pairs.
pub const TEST_SNR_GRID: [f64; 4] = [2.5, 7.5, 12.5, 17.5];

/// The `len` noise samples that [`add_noise`] mixes for a given seed: a
/// window at a random offset, wrapping around when the noise is shorter
/// than the clean signal.
pub fn noise_segment(noise: &AudioBuffer, len: usize, seed: u64) -> Result<Vec<f64>> {
    let n = noise.len();
    if n == 0 {
        return Err(invalid("empty noise source"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = noise.samples();
    if n >= len {
        let off = rng.gen_range(0..=n - len);
        Ok(x[off..off + len].to_vec())
    } else {
        let off = rng.gen_range(0..n);
        Ok((0..len).map(|i| x[(off + i) % n]).collect())
    }
}

/// Mixes `noise` into `clean` at `snr_db`.
///
/// The mixed segment is scaled so that the ratio of the clean power to the
/// power of the scaled segment, both taken over the whole signal, equals
/// the target.
pub fn add_noise(clean: &AudioBuffer, noise: &AudioBuffer, snr_db: f64, seed: u64) -> Result<AudioBuffer> {
    if clean.sample_rate() != noise.sample_rate() {
        return Err(invalid(format!(
            "clean at {} Hz but noise at {} Hz",
            clean.sample_rate(),
            noise.sample_rate()
        )));
    }
    if !snr_db.is_finite() {
        return Err(invalid("SNR must be finite"));
    }
    let pc = clean.power();
    if pc == 0.0 {
        return Err(invalid("clean signal has zero power"));
    }
    let seg = noise_segment(noise, clean.len(), seed)?;
    let pn = seg.iter().map(|v| v * v).sum::<f64>() / seg.len() as f64;
    if pn == 0.0 {
        return Err(invalid("noise segment has zero power"));
    }
    let gain = (pc / (pn * 10f64.powf(snr_db / 10.0))).sqrt();
    let out = clean.samples().iter().zip(&seg).map(|(c, n)| c + gain * n).collect();
    AudioBuffer::new(out, clean.sample_rate())
}

/// A room impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct Rir {
    taps: Vec<f64>,
    sample_rate: u32,
}

impl Rir {
    pub fn new(taps: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if taps.is_empty() || sample_rate == 0 {
            return Err(invalid("RIR needs taps and a positive sample rate"));
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(invalid("non-finite RIR tap"));
        }
        if taps.iter().all(|&t| t == 0.0) {
            return Err(invalid("RIR has no non-zero tap"));
        }
        Ok(Self { taps, sample_rate })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }
}

// Responses with at most this many non-zero taps are applied directly.
const SPARSE_TAPS: usize = 32;

fn fft_convolve(x: &[f64], h: &[f64], len: usize) -> Vec<f64> {
    let n = (x.len() + h.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut a: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    a.resize(n, Complex::new(0.0, 0.0));
    let mut b: Vec<Complex<f64>> = h.iter().map(|&v| Complex::new(v, 0.0)).collect();
    b.resize(n, Complex::new(0.0, 0.0));
    fwd.process(&mut a);
    fwd.process(&mut b);
    a.iter_mut().zip(&b).for_each(|(p, q)| *p *= q);
    inv.process(&mut a);
    a.iter().take(len).map(|c| c.re / n as f64).collect()
}

/// Linear convolution with `rir`, truncated to the clean length and scaled
/// so the output peak equals the clean peak.
pub fn convolve_rir(clean: &AudioBuffer, rir: &Rir) -> Result<AudioBuffer> {
    if clean.sample_rate() != rir.sample_rate {
        return Err(invalid(format!(
            "clean at {} Hz but RIR at {} Hz",
            clean.sample_rate(),
            rir.sample_rate
        )));
    }
    let x = clean.samples();
    let len = x.len();
    if len == 0 {
        return Ok(clean.clone());
    }
    let nonzero: Vec<(usize, f64)> = rir.taps.iter().copied().enumerate().filter(|(_, t)| *t != 0.0).collect();
    let mut y = if nonzero.len() <= SPARSE_TAPS {
        let mut y = vec![0.0; len];
        for (k, t) in nonzero {
            for n in k..len {
                y[n] += t * x[n - k];
            }
        }
        y
    } else {
        fft_convolve(x, &rir.taps, len)
    };
    let target = clean.peak();
    let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if target == 0.0 {
        return AudioBuffer::zeros(len, clean.sample_rate());
    }
    if peak == 0.0 {
        return Err(Error::Degenerate("reverberant signal is silent".into()));
    }
    if peak != target {
        let g = target / peak;
        y.iter_mut().for_each(|v| *v *= g);
    }
    AudioBuffer::new(y, clean.sample_rate())
}

/// Resamples to `target_hz` and back, removing content above
/// `target_hz / 2` while keeping the original rate and length.
pub fn band_limit(audio: &AudioBuffer, target_hz: u32) -> Result<AudioBuffer> {
    if target_hz == 0 || target_hz >= audio.sample_rate() {
        return Err(invalid(format!(
            "band limit {target_hz} Hz must be positive and below the {} Hz sample rate",
            audio.sample_rate()
        )));
    }
    let down = resample(audio, target_hz)?;
    let up = resample(&down, audio.sample_rate())?;
    Ok(up.with_len(audio.len()))
}
