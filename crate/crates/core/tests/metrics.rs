use std::f64::consts::PI;
use std::time::Duration;

use paragse::codec::TokenSequence;
use paragse::degrade::{add_noise, white_noise};
use paragse::dsp::AudioBuffer;
use paragse::metrics::*;
use paragse::Error;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SR: u32 = 16000;

fn noise(len: usize, amp: f64, seed: u64) -> AudioBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AudioBuffer::new((0..len).map(|_| amp * rng.gen_range(-1.0..1.0)).collect(), SR).unwrap()
}

/// Direct DFT of reflect-padded Hann frames, one bin at a time.
fn lsd_oracle(a: &[f64], b: &[f64]) -> f64 {
    const N: usize = 1024;
    const HOP: usize = 256;
    let pad = N / 2;
    let len = a.len() as isize;
    let at = |x: &[f64], j: isize| {
        let i = if j < 0 {
            -j
        } else if j >= len {
            2 * (len - 1) - j
        } else {
            j
        };
        x[i as usize]
    };
    let cos: Vec<f64> = (0..N).map(|i| (2.0 * PI * i as f64 / N as f64).cos()).collect();
    let sin: Vec<f64> = (0..N).map(|i| (2.0 * PI * i as f64 / N as f64).sin()).collect();
    let frames = (a.len() + 2 * pad - N) / HOP + 1;
    let mag = |x: &[f64], f: usize, k: usize| {
        let (mut re, mut im) = (0.0, 0.0);
        for n in 0..N {
            let v = at(x, (f * HOP + n) as isize - pad as isize) * (0.5 - 0.5 * cos[n]);
            re += v * cos[(k * n) % N];
            im -= v * sin[(k * n) % N];
        }
        (re * re + im * im).sqrt()
    };
    let mut total = 0.0;
    for f in 0..frames {
        let mut acc = 0.0;
        for k in 0..=N / 2 {
            let d = 20.0 * ((mag(a, f, k) + 1e-8) / (mag(b, f, k) + 1e-8)).log10();
            acc += d * d;
        }
        total += (acc / (N / 2 + 1) as f64).sqrt();
    }
    total / frames as f64
}

#[test]
fn lsd_matches_direct_dft_oracle() {
    for seed in 0..100 {
        let a = noise(2048, 0.8, 2 * seed);
        let b = noise(2048, 0.3, 2 * seed + 1);
        let got = lsd(&a, &b).unwrap();
        let want = lsd_oracle(a.samples(), b.samples());
        assert!((got - want).abs() < 1e-9, "{seed}: {got} vs {want}");
    }
}

#[test]
fn lsd_properties() {
    let a = noise(16000, 0.5, 1);
    let b = noise(16000, 0.5, 2);
    assert_eq!(lsd(&a, &a).unwrap(), 0.0);
    let d = lsd(&a, &b).unwrap();
    assert!(d > 0.0 && d.is_finite());
    assert_eq!(d, lsd(&b, &a).unwrap());
    let gained = lsd(&a, &a.scaled(2.0).unwrap()).unwrap();
    assert!((gained - 20.0 * 2f64.log10()).abs() < 1e-6, "{gained}");
    assert!(matches!(lsd(&a, &a.with_len(15000)), Err(Error::InvalidInput(_))));
    let other = AudioBuffer::new(a.samples().to_vec(), 8000).unwrap();
    assert!(matches!(lsd(&a, &other), Err(Error::InvalidInput(_))));
}

#[test]
fn snr_measurement() {
    let clean = noise(16000, 0.3, 3);
    let n = white_noise(2.0, SR, 4).unwrap();
    for snr in [0.0, 2.5, 10.0, 17.5] {
        let noisy = add_noise(&clean, &n, snr, 9).unwrap();
        assert!((measure_snr(&clean, &noisy).unwrap() - snr).abs() < 0.01);
        let (c3, n3) = (clean.scaled(3.0).unwrap(), noisy.scaled(3.0).unwrap());
        assert!((measure_snr(&c3, &n3).unwrap() - measure_snr(&clean, &noisy).unwrap()).abs() < 1e-9);
    }
    let doubled = clean.scaled(2.0).unwrap();
    assert!(measure_snr(&clean, &doubled).unwrap().abs() < 1e-12);
    assert!(matches!(measure_snr(&clean, &clean), Err(Error::Degenerate(_))));
    assert!(measure_snr(&clean, &clean.with_len(10)).is_err());
}

fn seq(tokens: Vec<u32>, groups: usize, m: usize) -> TokenSequence {
    TokenSequence::new(tokens, groups, m, 0).unwrap()
}

#[test]
fn accuracy_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a: Vec<u32> = (0..200).map(|_| rng.gen_range(1..=256)).collect();
    let mut b = a.clone();
    let acc = token_accuracy(&seq(a.clone(), 4, 256), &seq(b.clone(), 4, 256)).unwrap();
    assert_eq!(acc.overall, 1.0);
    assert_eq!(acc.per_branch, vec![1.0; 4]);
    b[7] = b[7] % 256 + 1;
    let acc = token_accuracy(&seq(a.clone(), 4, 256), &seq(b, 4, 256)).unwrap();
    assert_eq!(acc.overall, 199.0 / 200.0);
    assert_eq!(acc.per_branch[3], 49.0 / 50.0);
    assert_eq!(acc.frames, 50);
    assert!(token_accuracy(&seq(a.clone(), 4, 256), &seq(a.clone(), 2, 256)).is_err());
    assert!(token_accuracy(&seq(a[..196].to_vec(), 4, 256), &seq(a, 4, 256)).is_err());
    assert!(token_accuracy(&seq(vec![], 4, 256), &seq(vec![], 4, 256)).is_err());
}

#[test]
fn accuracy_at_chance_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 40_000;
    let a: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=256)).collect();
    let b: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=256)).collect();
    let acc = token_accuracy(&seq(a, 4, 256), &seq(b, 4, 256)).unwrap();
    let p = 1.0 / 256.0;
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!((acc.overall - p).abs() < 3.0 * sigma, "{}", acc.overall);
}

#[test]
fn accuracy_is_permutation_covariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a: Vec<u32> = (0..400).map(|_| rng.gen_range(1..=16)).collect();
    let b: Vec<u32> = (0..400).map(|_| rng.gen_range(1..=16)).collect();
    let mut perm: Vec<u32> = (1..=16).collect();
    perm.shuffle(&mut rng);
    let relabel = |x: &[u32]| x.iter().map(|&t| perm[t as usize - 1]).collect::<Vec<_>>();
    let base = token_accuracy(&seq(a.clone(), 4, 16), &seq(b.clone(), 4, 16)).unwrap();
    let moved = token_accuracy(&seq(relabel(&a), 4, 16), &seq(relabel(&b), 4, 16)).unwrap();
    assert_eq!(base, moved);
}

#[test]
fn rtf_of_sleep_stub() {
    let audio = AudioBuffer::zeros(10 * SR as usize, SR).unwrap();
    let stub = |a: &AudioBuffer| {
        std::thread::sleep(Duration::from_secs_f64(0.1 * a.duration_secs()));
        Ok(a.clone())
    };
    let r = bench_rtf("stub", stub, &audio, 1, 3).unwrap();
    assert!((r.rtf - 0.1).abs() <= 0.005, "{}", r.rtf);
    assert!((r.rtf * r.speedup_vs_realtime - 1.0).abs() < 1e-9);
    assert_eq!((r.runs, r.workers, r.pipeline.as_str()), (3, 1, "stub"));
    assert!(r.spread >= 0.0);
    assert!(r.to_text().contains("rtf=0.1"));
}

#[test]
fn rtf_preconditions_and_failures() {
    let long = AudioBuffer::zeros(10 * SR as usize, SR).unwrap();
    let short = AudioBuffer::zeros(SR as usize, SR).unwrap();
    let ok = |a: &AudioBuffer| Ok(a.clone());
    assert!(matches!(bench_rtf("x", ok, &long, 1, 2), Err(Error::InvalidInput(_))));
    assert!(matches!(bench_rtf("x", ok, &short, 1, 3), Err(Error::InvalidInput(_))));
    let mut calls = 0;
    let flaky = |a: &AudioBuffer| {
        calls += 1;
        if calls == 3 {
            Err(Error::Degenerate("boom".into()))
        } else {
            Ok(a.clone())
        }
    };
    match bench_rtf("x", flaky, &long, 1, 3) {
        Err(Error::Pipeline { run, source }) => {
            assert_eq!(run, 2);
            assert!(matches!(*source, Error::Degenerate(_)));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn eval_report_means() {
    let item = |i: usize| UtteranceEval {
        id: format!("u{i}"),
        lsd_degraded: 10.0 + i as f64,
        lsd_enhanced: 5.0 + 0.1 * i as f64,
        snr_degraded: i as f64,
        snr_enhanced: 2.0 * i as f64,
        accuracy: TokenAccuracy {
            per_branch: vec![0.1 * i as f64, 0.5],
            overall: 0.3,
            frames: 10,
        },
    };
    let items: Vec<_> = (0..4).map(item).collect();
    let r = EvalReport::aggregate(&items).unwrap();
    assert_eq!(r.utterances, 4);
    assert!((r.lsd_degraded - 11.5).abs() < 1e-12);
    assert!((r.lsd_enhanced - 5.15).abs() < 1e-12);
    assert!((r.branch_accuracy[0] - 0.15).abs() < 1e-12);
    assert!(r.to_text().contains("accuracy_branch_2=0.500000"));
    assert!(EvalReport::aggregate(&[]).is_err());
}
