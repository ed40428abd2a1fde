use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::Rir;
use crate::dsp::AudioBuffer;
use crate::error::{invalid, Error, Result};

/// Noise sources, room responses and clean utterances, looked up by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Assets {
    noises: BTreeMap<String, AudioBuffer>,
    rirs: BTreeMap<String, Rir>,
    clean: Vec<AudioBuffer>,
}

impl Assets {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn noise(&self, id: &str) -> Result<&AudioBuffer> {
        self.noises
            .get(id)
            .ok_or_else(|| Error::Lookup(format!("no noise source {id:?}")))
    }

    pub fn rir(&self, id: &str) -> Result<&Rir> {
        self.rirs.get(id).ok_or_else(|| Error::Lookup(format!("no RIR {id:?}")))
    }

    pub fn clean(&self) -> &[AudioBuffer] {
        &self.clean
    }

    pub fn noise_ids(&self) -> impl Iterator<Item = &str> {
        self.noises.keys().map(String::as_str)
    }

    pub fn rir_ids(&self) -> impl Iterator<Item = &str> {
        self.rirs.keys().map(String::as_str)
    }

    /// Adds or replaces a noise source, e.g. one loaded from disk.
    pub fn insert_noise(&mut self, id: impl Into<String>, noise: AudioBuffer) {
        self.noises.insert(id.into(), noise);
    }

    pub fn insert_rir(&mut self, id: impl Into<String>, rir: Rir) {
        self.rirs.insert(id.into(), rir);
    }

    pub fn push_clean(&mut self, clean: AudioBuffer) {
        self.clean.push(clean);
    }
}

/// Sizes of the synthetic asset set.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetConfig {
    pub sample_rate: u32,
    pub clean_utterances: usize,
    pub clean_seconds: f64,
    pub noise_seconds: f64,
    /// One RIR per entry, named `rir_1`, `rir_2`, ...
    pub rt60s: Vec<f64>,
}

impl Default for AssetConfig {
    fn default() -> Self {
        Self {
            sample_rate: 16000,
            clean_utterances: 20,
            clean_seconds: 3.0,
            noise_seconds: 30.0,
            rt60s: vec![0.2, 0.3, 0.5, 0.7],
        }
    }
}

fn sub_seed(seed: u64, salt: u64) -> u64 {
    seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn samples_for(seconds: f64, rate: u32) -> Result<usize> {
    if !(seconds.is_finite() && seconds > 0.0) {
        return Err(invalid(format!("duration {seconds} must be positive")));
    }
    Ok((seconds * rate as f64).round() as usize)
}

fn scale_to_rms(mut x: Vec<f64>, rms: f64) -> Vec<f64> {
    let cur = (x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64).sqrt();
    if cur > 0.0 {
        x.iter_mut().for_each(|v| *v *= rms / cur);
    }
    x
}

/// Gaussian white noise at RMS 0.1.
pub fn white_noise(seconds: f64, sample_rate: u32, seed: u64) -> Result<AudioBuffer> {
    let n = samples_for(seconds, sample_rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    AudioBuffer::new(scale_to_rms(x, 0.1), sample_rate)
}

/// Noise with power falling 3 dB per octave, shaped in the frequency
/// domain, at RMS 0.1.
pub fn pink_noise(seconds: f64, sample_rate: u32, seed: u64) -> Result<AudioBuffer> {
    let len = samples_for(seconds, sample_rate)?;
    let n = len.next_power_of_two().max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(rng.sample::<f64, _>(StandardNormal), 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex::new(0.0, 0.0);
    for (k, c) in buf.iter_mut().enumerate().skip(1) {
        *c /= (k.min(n - k) as f64).sqrt();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let x = buf.iter().take(len).map(|c| c.re).collect();
    AudioBuffer::new(scale_to_rms(x, 0.1), sample_rate)
}

struct Syllable {
    start: usize,
    end: usize,
    formants: [f64; 3],
    gain: f64,
}

const FORMANT_WIDTH: [f64; 3] = [90.0, 120.0, 160.0];
const FORMANT_GAIN: [f64; 3] = [1.0, 0.6, 0.3];

fn harmonic_gain(f: f64, formants: &[f64; 3]) -> f64 {
    let tilt = 1.0 / (1.0 + f / 500.0);
    let peaks: f64 = (0..3)
        .map(|i| FORMANT_GAIN[i] * (-0.5 * ((f - formants[i]) / FORMANT_WIDTH[i]).powi(2)).exp())
        .sum();
    tilt * (peaks + 0.05)
}

/// Voiced, speech-like signal: a harmonic source following a slowly moving
/// pitch contour, shaped by per-syllable formants and a syllabic envelope,
/// over a faint aspiration noise floor. RMS 0.1.
pub fn speech_like(seconds: f64, sample_rate: u32, seed: u64) -> Result<AudioBuffer> {
    let n = samples_for(seconds, sample_rate)?;
    let sr = sample_rate as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = rng.gen_range(95.0..230.0);
    let (p1, p2) = (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI));

    let mut syllables = Vec::new();
    let mut t = (rng.gen_range(0.02..0.1) * sr) as usize;
    while t < n {
        let dur = (rng.gen_range(0.12..0.32) * sr) as usize;
        let formants = [
            rng.gen_range(300.0..850.0),
            rng.gen_range(900.0..2300.0),
            rng.gen_range(2400.0..3300.0),
        ];
        syllables.push(Syllable {
            start: t,
            end: (t + dur).min(n),
            formants,
            gain: rng.gen_range(0.5..1.0),
        });
        t += dur + (rng.gen_range(0.03..0.15) * sr) as usize;
    }

    const BLOCK: usize = 64;
    let nyquist_guard = 0.45 * sr;
    let mut out = vec![0.0; n];
    let mut phase = 0.0;
    let mut gains = Vec::new();
    for syl in &syllables {
        for start in (syl.start..syl.end).step_by(BLOCK) {
            let end = (start + BLOCK).min(syl.end);
            let tc = start as f64 / sr;
            let f0 = base
                * (1.0 + 0.08 * (2.0 * PI * 0.6 * tc + p1).sin() + 0.03 * (2.0 * PI * 2.3 * tc + p2).sin())
                * (1.0 - 0.1 * tc / seconds);
            let harmonics = (nyquist_guard / f0) as usize;
            gains.clear();
            gains.extend((1..=harmonics).map(|h| harmonic_gain(h as f64 * f0, &syl.formants)));
            for (i, o) in out.iter_mut().enumerate().take(end).skip(start) {
                let u = (i - syl.start) as f64 / (syl.end - syl.start) as f64;
                let env = syl.gain * (PI * u).sin().powi(2);
                let v: f64 = gains
                    .iter()
                    .enumerate()
                    .map(|(h, g)| g * ((h + 1) as f64 * phase).sin())
                    .sum();
                *o = env * v;
                phase += 2.0 * PI * f0 / sr;
            }
        }
    }
    let mut x = scale_to_rms(out, 0.1);
    for v in x.iter_mut() {
        *v += 1e-3 * rng.sample::<f64, _>(StandardNormal);
    }
    AudioBuffer::new(scale_to_rms(x, 0.1), sample_rate)
}

/// Several overlapping speech-like voices, at RMS 0.1.
pub fn babble_noise(seconds: f64, sample_rate: u32, seed: u64) -> Result<AudioBuffer> {
    const VOICES: u64 = 6;
    let n = samples_for(seconds, sample_rate)?;
    let mut sum = vec![0.0; n];
    for v in 0..VOICES {
        let voice = speech_like(seconds, sample_rate, sub_seed(seed, 100 + v))?;
        sum.iter_mut().zip(voice.samples()).for_each(|(s, x)| *s += x);
    }
    AudioBuffer::new(scale_to_rms(sum, 0.1), sample_rate)
}

/// Exponentially decaying Gaussian tail after a unit direct path. The
/// amplitude envelope `exp(-6.9078 t / rt60)` loses 60 dB of energy after
/// `rt60` seconds; the response is `2 * rt60` long.
pub fn synth_rir(rt60: f64, sample_rate: u32, seed: u64) -> Result<Rir> {
    let len = samples_for(2.0 * rt60, sample_rate)?.max(2);
    let sr = sample_rate as f64;
    let onset = (0.002 * sr) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taps = vec![0.0; len];
    taps[0] = 1.0;
    for (i, t) in taps.iter_mut().enumerate().skip(onset.max(1)) {
        let env = (-6.9078 * i as f64 / (sr * rt60)).exp();
        *t = 0.3 * env * rng.sample::<f64, _>(StandardNormal);
    }
    let peak = taps.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    taps.iter_mut().for_each(|t| *t /= peak);
    Rir::new(taps, sample_rate)
}

/// Seeded synthetic assets: `white`, `pink` and `babble` noise, one RIR per
/// configured RT60 and a set of clean speech-like utterances.
pub fn synth_assets_with(cfg: &AssetConfig, seed: u64) -> Result<Assets> {
    let sr = cfg.sample_rate;
    let mut a = Assets::new();
    a.insert_noise("white", white_noise(cfg.noise_seconds, sr, sub_seed(seed, 1))?);
    a.insert_noise("pink", pink_noise(cfg.noise_seconds, sr, sub_seed(seed, 2))?);
    a.insert_noise("babble", babble_noise(cfg.noise_seconds, sr, sub_seed(seed, 3))?);
    for (i, &rt) in cfg.rt60s.iter().enumerate() {
        a.insert_rir(format!("rir_{}", i + 1), synth_rir(rt, sr, sub_seed(seed, 10 + i as u64))?);
    }
    for u in 0..cfg.clean_utterances {
        a.push_clean(speech_like(cfg.clean_seconds, sr, sub_seed(seed, 1000 + u as u64))?);
    }
    Ok(a)
}

/// [`synth_assets_with`] under the default configuration.
pub fn synth_assets(seed: u64) -> Result<Assets> {
    synth_assets_with(&AssetConfig::default(), seed)
}
