use std::f64::consts::PI;

use ndarray::Array2;
use paragse::dsp::{
    mdct_forward, mdct_inverse, resample, stft_amp_phase, AudioBuffer, Mdct, MdctSpectrum, WindowId,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn white(len: usize, seed: u64) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AudioBuffer::new((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(), 16000).unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Textbook MDCT of one interior frame: direct sum over the 2W-sample
/// sine-windowed segment starting W/2 samples before the frame.
fn textbook_mdct_frame(x: &[f64], w: usize, frame: usize) -> Vec<f64> {
    let n2 = 2 * w;
    let start = frame * w - w / 2;
    let scale = (2.0 / w as f64).sqrt();
    (0..w)
        .map(|k| {
            (0..n2)
                .map(|n| {
                    let win = (PI * (n as f64 + 0.5) / n2 as f64).sin();
                    win * x[start + n]
                        * (PI / w as f64 * (n as f64 + 0.5 + w as f64 / 2.0) * (k as f64 + 0.5)).cos()
                })
                .sum::<f64>()
                * scale
        })
        .collect()
}

#[test]
fn mdct_matches_textbook_definition_on_interior_frames() {
    let a = white(16000, 7);
    let s = mdct_forward(&a, 40).unwrap();
    assert_eq!(s.coefficients.dim(), (400, 40));
    for f in [1usize, 2, 57, 200, 398] {
        let oracle = textbook_mdct_frame(a.samples(), 40, f);
        let got = s.coefficients.row(f).to_vec();
        assert!(max_abs_diff(&oracle, &got) < 1e-9, "frame {f}");
    }
}

#[test]
fn white_noise_round_trip() {
    let a = white(16000, 11);
    let s = mdct_forward(&a, 40).unwrap();
    assert_eq!(s.frames(), 400);
    let back = mdct_inverse(&s).unwrap();
    assert!(max_abs_diff(a.samples(), back.samples()) < 1e-6);
}

#[test]
fn chirp_round_trip() {
    let sr = 16000.0;
    let x: Vec<f64> = (0..24_123)
        .map(|n| {
            let t = n as f64 / sr;
            0.7 * (2.0 * PI * (100.0 * t + 1500.0 * t * t)).sin()
        })
        .collect();
    let a = AudioBuffer::new(x, 16000).unwrap();
    let back = mdct_inverse(&mdct_forward(&a, 40).unwrap()).unwrap();
    assert_eq!(back.len(), a.len());
    assert!(max_abs_diff(a.samples(), back.samples()) < 1e-6);
}

#[test]
fn forward_recovers_known_coefficients() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let coeffs = Array2::from_shape_fn((32, 40), |_| rng.gen_range(-1.0..1.0));
    let spec = MdctSpectrum {
        coefficients: coeffs.clone(),
        hop: 40,
        window: WindowId::Sine,
        signal_len: 32 * 40,
        sample_rate: 16000,
    };
    let audio = mdct_inverse(&spec).unwrap();
    let again = mdct_forward(&audio, 40).unwrap();
    let err = (&again.coefficients - &coeffs).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(err < 1e-9, "{err}");
}

#[test]
fn single_interior_impulse_synthesises_windowed_cosine() {
    let w = 40;
    let frames = 10;
    let f = 4;
    let mut coeffs = Array2::zeros((frames, w));
    coeffs[[f, 0]] = 1.0;
    let out = Mdct::new(w).unwrap().inverse_frames(&coeffs);
    let scale = (2.0 / w as f64).sqrt();
    let start = f * w - w / 2;
    let mut oracle = vec![0.0; frames * w];
    for n in 0..2 * w {
        let win = (PI * (n as f64 + 0.5) / (2 * w) as f64).sin();
        oracle[start + n] =
            scale * win * (PI / w as f64 * (n as f64 + 0.5 + w as f64 / 2.0) * 0.5).cos();
    }
    assert!(max_abs_diff(&out, &oracle) < 1e-9);
}

#[test]
fn hundred_random_round_trips() {
    for seed in 0..100 {
        let a = white(16000, 1000 + seed);
        let back = mdct_inverse(&mdct_forward(&a, 40).unwrap()).unwrap();
        assert!(max_abs_diff(a.samples(), back.samples()) < 1e-6, "seed {seed}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mdct_is_linear(seed_a in 0u64..1000, seed_b in 0u64..1000, alpha in -3.0f64..3.0, beta in -3.0f64..3.0, len in 80usize..3000) {
        let a = white(len, seed_a);
        let b = white(len, seed_b + 5000);
        let mix: Vec<f64> = a.samples().iter().zip(b.samples()).map(|(x, y)| alpha * x + beta * y).collect();
        let mix = AudioBuffer::new(mix, 16000).unwrap();
        let sa = mdct_forward(&a, 40).unwrap().coefficients;
        let sb = mdct_forward(&b, 40).unwrap().coefficients;
        let sm = mdct_forward(&mix, 40).unwrap().coefficients;
        let err = (&sm - &(sa * alpha + sb * beta)).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(err < 1e-9);
    }

    #[test]
    fn mdct_perfect_reconstruction_any_length(seed in 0u64..10_000, len in 4usize..5000, half in 1usize..32) {
        let w = 2 * half;
        let len = len.max(2 * w);
        let a = white(len, seed);
        let back = mdct_inverse(&mdct_forward(&a, w).unwrap()).unwrap();
        prop_assert!(max_abs_diff(a.samples(), back.samples()) < 1e-9);
    }

    #[test]
    fn resample_same_rate_identity(seed in 0u64..1000, len in 1usize..2000) {
        let a = white(len, seed);
        prop_assert_eq!(resample(&a, 16000).unwrap(), a);
    }
}

#[test]
fn stft_parseval_per_frame() {
    let a = white(4000, 21);
    let s = stft_amp_phase(&a, 320, 40, 1024).unwrap();
    // Interior frame f covers padded[f*40 .. f*40+320], i.e. x[f*40-160 ..].
    let hann: Vec<f64> = (0..320)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / 320.0).cos())
        .collect();
    for f in [10usize, 33, 80] {
        let start = f * 40 - 160;
        let time_energy: f64 = (0..320)
            .map(|n| (hann[n] * a.samples()[start + n]).powi(2))
            .sum();
        let row = s.amplitude.row(f);
        let mut spec_energy = row[0].powi(2) + row[512].powi(2);
        spec_energy += 2.0 * row.iter().skip(1).take(511).map(|v| v * v).sum::<f64>();
        let rel = (spec_energy / 1024.0 - time_energy).abs() / time_energy;
        assert!(rel < 1e-12, "frame {f}: {rel}");
    }
}

fn sine(freq: f64, len: usize, rate: u32) -> AudioBuffer {
    AudioBuffer::new(
        (0..len)
            .map(|n| 0.5 * (2.0 * PI * freq * n as f64 / rate as f64).sin())
            .collect(),
        rate,
    )
    .unwrap()
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

#[test]
fn resample_round_trip_preserves_passband() {
    let a = sine(2000.0, 16000, 16000);
    let down = resample(&a, 8000).unwrap();
    assert_eq!(down.len(), 8000);
    let up = resample(&down, 16000).unwrap();
    assert_eq!(up.len(), 16000);
    let (x, y) = (a.samples(), up.samples());
    let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
    let corr = dot / (x.iter().map(|v| v * v).sum::<f64>() * y.iter().map(|v| v * v).sum::<f64>()).sqrt();
    assert!(corr > 0.999, "{corr}");
}

#[test]
fn resample_round_trip_rejects_stopband() {
    let a = sine(6000.0, 16000, 16000);
    let up = resample(&resample(&a, 8000).unwrap(), 16000).unwrap();
    let ratio = rms(up.samples()) / rms(a.samples());
    assert!(ratio < 0.01, "{ratio}");
}
