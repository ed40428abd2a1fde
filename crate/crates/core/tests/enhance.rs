use std::sync::Arc;

use ndarray::{s, Array1, Array2, Axis};
use paragse::codec::{
    tokenize, train_codebooks_gvq, train_codebooks_rvq, CodebookTraining, CodecBundle, LinearCodecModel, Quantizer,
    RvqQuantizer,
};
use paragse::dsp::AudioBuffer;
use paragse::enhance::{
    branch_forward, enhance_parallel, enhance_serial, extract_features, fit_predictor, sample_token, softmax,
    train_enhancer, train_serial_enhancer, AnyEnhancer, ContextRows, EnhancerConfig, EnhancerModel, FeatureConfig,
    FrameBatch, FrameDataset, MlpClassifier, PredictionBranch, PredictionMode, PredictorConfig, SerialEnhancerModel,
    TokenPredictor,
};
use paragse::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Noise with a slowly varying colour so frames are not all alike.
fn signal(len: usize, seed: u64) -> AudioBuffer {
    let mut r = rng(seed);
    let mut prev = 0.0;
    let x = (0..len)
        .map(|n| {
            let a = 0.5 + 0.45 * (n as f64 / 2000.0).sin();
            let w: f64 = r.gen_range(-0.5..0.5);
            prev = a * prev + w;
            0.3 * prev
        })
        .collect();
    AudioBuffer::new(x, 16000).unwrap()
}

fn bundle(groups: usize, size: usize, seed: u64) -> CodecBundle {
    let corpus: Vec<AudioBuffer> = (0..10).map(|i| signal(16000, seed * 100 + i)).collect();
    let model = LinearCodecModel::fit(&corpus, 32, 40, 320).unwrap();
    let lat: Vec<Array2<f64>> = corpus.iter().map(|a| model.encode(a).unwrap().frames).collect();
    let views: Vec<_> = lat.iter().map(|l| l.view()).collect();
    let all = ndarray::concatenate(Axis(0), &views).unwrap();
    let cfg = CodebookTraining {
        iterations: 10,
        ..Default::default()
    };
    let gvq = train_codebooks_gvq(all.view(), groups, size, seed, &cfg).unwrap().quantizer;
    let rvq = train_codebooks_rvq(all.view(), groups, size, seed, &cfg).unwrap();
    CodecBundle::new(model, gvq, Some(rvq)).unwrap()
}

fn tiny_features() -> FeatureConfig {
    FeatureConfig {
        frame_length: 8,
        frame_shift: 4,
        fft_size: 8,
        downsample: 2,
    }
}

fn tiny_predictor(mode: PredictionMode, context: bool, seed: u64) -> TokenPredictor {
    let cfg = PredictorConfig {
        features: tiny_features(),
        channels: 8,
        hidden: 16,
        context,
    };
    let mut p = TokenPredictor::random(&cfg, mode, 3, 16, 16000, &mut rng(seed)).unwrap();
    // Non-zero biases so their gradients are exercised too.
    let mut params = p.parameters();
    let mut r = rng(seed + 1);
    params.iter_mut().for_each(|v| *v += 0.1 * r.sample::<f64, _>(StandardNormal));
    p.set_parameters(&params).unwrap();
    p
}

fn tiny_batch(p: &TokenPredictor, rows: usize, seed: u64) -> FrameBatch {
    let mut r = rng(seed);
    let dim = p.extractor().config().raw_dim();
    let n = p.branches().len();
    let m = p.codebook_size() as u32;
    let mut gauss = |shape: (usize, usize)| Array2::from_shape_simple_fn(shape, || r.sample::<f64, _>(StandardNormal));
    let raw = gauss((rows, dim));
    let context = p.context().then(|| ContextRows {
        prev: gauss((rows, dim)),
        next: gauss((rows, dim)),
        prev_mask: Array1::from_shape_fn(rows, |i| if i % 4 == 0 { 0.0 } else { 1.0 }),
        next_mask: Array1::from_shape_fn(rows, |i| if i % 5 == 1 { 0.0 } else { 1.0 }),
    });
    let mut r = rng(seed + 9);
    FrameBatch {
        raw,
        context,
        degraded: Array2::from_shape_simple_fn((rows, n), || r.gen_range(1..=m)),
        target: Array2::from_shape_simple_fn((rows, n), || r.gen_range(1..=m)),
    }
}

fn gradient_check(mode: PredictionMode, context: bool, seed: u64) {
    let p = tiny_predictor(mode, context, seed);
    let batch = tiny_batch(&p, 12, seed + 50);
    let (loss, grad) = p.loss_and_gradient(&batch).unwrap();
    assert!(loss.is_finite() && loss > 0.0);
    let theta = p.parameters();
    assert_eq!(grad.len(), theta.len());
    let h = 1e-5;
    let mut probe = p.clone();
    let mut worst: f64 = 0.0;
    for i in 0..theta.len() {
        let mut t = theta.clone();
        t[i] = theta[i] + h;
        probe.set_parameters(&t).unwrap();
        let up = probe.loss(&batch).unwrap();
        t[i] = theta[i] - h;
        probe.set_parameters(&t).unwrap();
        let down = probe.loss(&batch).unwrap();
        let numeric = (up - down) / (2.0 * h);
        let rel = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
        assert!(rel < 1e-4, "parameter {i}: analytic {} numeric {numeric}", grad[i]);
    }
    assert!(worst < 1e-4);
}

#[test]
fn gradient_matches_finite_differences_parallel() {
    gradient_check(PredictionMode::Parallel, false, 1);
}

#[test]
fn gradient_matches_finite_differences_serial() {
    gradient_check(PredictionMode::Serial, false, 2);
}

#[test]
fn gradient_matches_finite_differences_with_context() {
    gradient_check(PredictionMode::Parallel, true, 3);
    gradient_check(PredictionMode::Serial, true, 4);
}

#[test]
fn loss_is_sum_of_independent_branch_cross_entropies() {
    for (mode, seed) in [(PredictionMode::Parallel, 10), (PredictionMode::Serial, 11)] {
        let p = tiny_predictor(mode, false, seed);
        let batch = tiny_batch(&p, 20, seed);
        let total = p.loss(&batch).unwrap();
        let s = p.extractor().project(batch.raw.view());
        let mut oracle = 0.0;
        for (n, br) in p.branches().iter().enumerate() {
            let mut ce = 0.0;
            for r in 0..batch.len() {
                let prev: Vec<u32> = batch.target.slice(s![r, ..n]).to_vec();
                let prev = if mode == PredictionMode::Serial { prev } else { vec![] };
                let dist = br.distribution(batch.degraded[[r, n]], s.row(r), &prev).unwrap();
                ce -= dist[batch.target[[r, n]] as usize - 1].ln();
            }
            oracle += ce / batch.len() as f64;
        }
        assert!((total - oracle).abs() < 1e-12, "{total} vs {oracle}");
    }
}

#[test]
fn zero_classifier_gives_uniform_distribution() {
    let b = PredictionBranch::new(0, Array2::ones((256, 4)), None, MlpClassifier::zeros(8, 6, 256)).unwrap();
    let p = branch_forward(17, &[0.3, -0.1, 0.0, 2.0], &b).unwrap();
    assert!(p.iter().all(|&v| v == 1.0 / 256.0));
    assert_eq!(sample_token(&p).unwrap(), 1);
}

fn scan_argmax(p: &[f64]) -> u32 {
    let mut best = 0;
    for i in 1..p.len() {
        if p[i] > p[best] {
            best = i;
        }
    }
    best as u32 + 1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn softmax_is_a_distribution_and_shift_invariant(
        z in prop::collection::vec(-50.0f64..50.0, 1..300),
        c in -100.0f64..100.0,
    ) {
        let p = softmax(&z);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
        let q = softmax(&shifted);
        let diff = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-12, "{}", diff);
        prop_assert_eq!(sample_token(&p).unwrap(), sample_token(&q).unwrap());
    }

    #[test]
    fn sample_token_matches_linear_scan(p in prop::collection::vec(0.0f64..1.0, 1..300)) {
        prop_assert_eq!(sample_token(&p).unwrap(), scan_argmax(&p));
    }

    #[test]
    fn branch_output_is_a_distribution(seed in 0u64..10_000, token in 1u32..=16) {
        let p = tiny_predictor(PredictionMode::Parallel, false, seed);
        let mut r = rng(seed);
        let s: Vec<f64> = (0..8).map(|_| r.gen_range(-1.0..1.0)).collect();
        let d = branch_forward(token, &s, &p.branches()[0]).unwrap();
        prop_assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(d.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn uniform_and_one_hot_sampling() {
    assert_eq!(sample_token(&vec![1.0 / 256.0; 256]).unwrap(), 1);
    let mut p = vec![0.0; 256];
    p[41] = 1.0;
    assert_eq!(sample_token(&p).unwrap(), 42);
    assert!(matches!(sample_token(&[0.1, f64::INFINITY]), Err(Error::InvalidInput(_))));
}

fn default_predictor(codec: &CodecBundle, mode: PredictionMode, seed: u64) -> TokenPredictor {
    let m = codec.gvq.codebook_size();
    TokenPredictor::random(&PredictorConfig::default(), mode, 4, m, 16000, &mut rng(seed)).unwrap()
}

#[test]
fn feature_frames_align_with_token_frames() {
    let codec = bundle(4, 16, 1);
    let p = default_predictor(&codec, PredictionMode::Parallel, 5);
    for len in [640, 641, 959, 960, 12_345, 16_000, 16_001] {
        let a = signal(len, len as u64);
        let f = extract_features(&a, p.extractor()).unwrap();
        let t = tokenize(&a, &codec.model, &codec.gvq).unwrap();
        assert_eq!(f.nrows(), t.frames(), "length {len}");
        assert_eq!(f.ncols(), 64);
        assert!(f.iter().all(|v| v.is_finite() && v.abs() <= 1.0));
    }
    let one_second = extract_features(&signal(16_000, 3), p.extractor()).unwrap();
    assert_eq!(one_second.nrows(), 50);
}

#[test]
fn features_of_concatenation_match_on_interior_frames() {
    let p = default_predictor(&bundle(4, 16, 1), PredictionMode::Parallel, 6);
    let a = signal(320 * 20, 31);
    let b = signal(320 * 15, 32);
    let ab = a.concat(&b).unwrap();
    let fa = extract_features(&a, p.extractor()).unwrap();
    let fb = extract_features(&b, p.extractor()).unwrap();
    let fab = extract_features(&ab, p.extractor()).unwrap();
    assert_eq!(fab.nrows(), 35);
    // The STFT window reaches 160 samples (half a feature frame) past each
    // side, so one frame on each side of a boundary is affected.
    for t in 1..19 {
        let d = (&fab.row(t) - &fa.row(t)).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(d < 1e-9, "frame {t}: {d}");
    }
    for t in 1..14 {
        let d = (&fab.row(20 + t) - &fb.row(t)).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(d < 1e-9, "frame {}: {d}", 20 + t);
    }
}

#[test]
fn rate_mismatch_is_a_configuration_error() {
    let p = default_predictor(&bundle(4, 16, 1), PredictionMode::Parallel, 6);
    let a = AudioBuffer::new(vec![0.1; 8000], 8000).unwrap();
    assert!(matches!(extract_features(&a, p.extractor()), Err(Error::Config(_))));
}

#[test]
fn zero_audio_gives_constant_features() {
    let p = default_predictor(&bundle(4, 16, 1), PredictionMode::Parallel, 6);
    let f = extract_features(&AudioBuffer::zeros(3200, 16000).unwrap(), p.extractor()).unwrap();
    let expect = p.extractor().bias().mapv(f64::tanh);
    for row in f.outer_iter() {
        assert_eq!(row, expect);
    }
}

#[test]
fn parallel_tokens_do_not_depend_on_worker_count() {
    let codec = Arc::new(bundle(4, 16, 2));
    let model = EnhancerModel::new(default_predictor(&codec, PredictionMode::Parallel, 7), codec).unwrap();
    let y = signal(16000 * 3 + 123, 77);
    let (d1, c1) = model.enhance_tokens(&y, 1).unwrap();
    for w in [2, 3, 4, 8] {
        let (dw, cw) = model.enhance_tokens(&y, w).unwrap();
        assert_eq!(dw, d1);
        assert_eq!(cw, c1, "workers {w}");
    }
    let out = enhance_parallel(&y, &model, 4).unwrap();
    assert_eq!(out.len(), y.len());
    assert_eq!(out, enhance_parallel(&y, &model, 1).unwrap());
    assert!(matches!(model.enhance_tokens(&y, 0), Err(Error::Config(_))));
}

#[test]
fn one_second_in_one_second_out() {
    let codec = Arc::new(bundle(4, 16, 2));
    let model = EnhancerModel::new(default_predictor(&codec, PredictionMode::Parallel, 7), codec.clone()).unwrap();
    let y = signal(16000, 5);
    assert_eq!(enhance_parallel(&y, &model, 2).unwrap().len(), 16000);
    let serial = SerialEnhancerModel::new(default_predictor(&codec, PredictionMode::Serial, 7), codec).unwrap();
    assert_eq!(enhance_serial(&y, &serial).unwrap().len(), 16000);
}

#[test]
fn model_codec_mismatch_is_a_configuration_error() {
    let codec = Arc::new(bundle(4, 16, 2));
    let p3 = TokenPredictor::random(&PredictorConfig::default(), PredictionMode::Parallel, 3, 16, 16000, &mut rng(1)).unwrap();
    assert!(matches!(EnhancerModel::new(p3, codec.clone()), Err(Error::Config(_))));
    let p = default_predictor(&codec, PredictionMode::Parallel, 1);
    assert!(matches!(SerialEnhancerModel::new(p, codec.clone()), Err(Error::Config(_))));
    let no_rvq = Arc::new(CodecBundle::new(codec.model.clone(), codec.gvq.clone(), None).unwrap());
    let s = default_predictor(&codec, PredictionMode::Serial, 1);
    assert!(matches!(SerialEnhancerModel::new(s, no_rvq), Err(Error::Config(_))));
}

#[test]
fn single_stage_serial_equals_parallel() {
    let base = bundle(1, 16, 3);
    // One group and one residual stage over the same codebook give the same
    // tokens.
    let rvq = RvqQuantizer::new(base.gvq.codebooks().to_vec()).unwrap();
    let codec = Arc::new(CodecBundle::new(base.model.clone(), base.gvq.clone(), Some(rvq)).unwrap());
    let cfg = PredictorConfig::default();
    let par = TokenPredictor::random(&cfg, PredictionMode::Parallel, 1, 16, 16000, &mut rng(9)).unwrap();
    let b = &par.branches()[0];
    let c = cfg.channels;
    // Serial input is [v, prior, s]; the prior is zero for the first stage,
    // so its weight columns are arbitrary.
    let mut w1 = Array2::zeros((cfg.hidden, 3 * c));
    w1.slice_mut(s![.., ..c]).assign(&b.classifier.w1.slice(s![.., ..c]));
    w1.slice_mut(s![.., c..2 * c]).fill(0.37);
    w1.slice_mut(s![.., 2 * c..]).assign(&b.classifier.w1.slice(s![.., c..]));
    let classifier =
        MlpClassifier::new(w1, b.classifier.b1.clone(), b.classifier.w2.clone(), b.classifier.b2.clone()).unwrap();
    let branch = PredictionBranch::new(0, b.embedding.clone(), Some(Array2::ones((16, c))), classifier).unwrap();
    let ser = TokenPredictor::new(par.extractor().clone(), vec![branch], PredictionMode::Serial, false).unwrap();
    let pm = EnhancerModel::new(par, codec.clone()).unwrap();
    let sm = SerialEnhancerModel::new(ser, codec).unwrap();
    for seed in 0..3 {
        let y = signal(16000 * 2, 300 + seed);
        let (dp, tp) = pm.enhance_tokens(&y, 2).unwrap();
        let (ds, ts) = sm.enhance_tokens(&y).unwrap();
        assert_eq!(dp, ds);
        assert_eq!(tp, ts);
    }
}

#[test]
fn serial_stage_input_depends_on_earlier_predictions() {
    let codec = Arc::new(bundle(4, 16, 2));
    let model = SerialEnhancerModel::new(default_predictor(&codec, PredictionMode::Serial, 8), codec.clone()).unwrap();
    let y = signal(16000, 12);
    let (degraded, clean) = model.enhance_tokens(&y).unwrap();
    let p = model.predictor();
    let feats = p.conditioning(&extract_features(&y, p.extractor()).unwrap());
    for t in [0usize, 10, 49] {
        let d = degraded.frame(t);
        let first = clean.frame(t)[0];
        let other = first % 16 + 1;
        let a = p.stage_input(1, d[1], feats.row(t), &[first]).unwrap();
        let b = p.stage_input(1, d[1], feats.row(t), &[other]).unwrap();
        assert_ne!(a, b, "frame {t}");
        // Only the prior block moves.
        assert_eq!(a.slice(s![..64]), b.slice(s![..64]));
        assert_eq!(a.slice(s![128..]), b.slice(s![128..]));
    }
    // Parallel branches ignore earlier tokens entirely.
    let par = default_predictor(&codec, PredictionMode::Parallel, 8);
    let a = par.stage_input(1, 3, feats.row(0), &[1]).unwrap();
    let b = par.stage_input(1, 3, feats.row(0), &[2]).unwrap();
    assert_eq!(a, b);
}

fn identity_pairs(seconds: usize, seed: u64) -> Vec<(AudioBuffer, AudioBuffer)> {
    (0..seconds)
        .map(|i| {
            let a = signal(16000, seed + i as u64);
            (a.clone(), a)
        })
        .collect()
}

fn identity_config(seed: u64) -> EnhancerConfig {
    EnhancerConfig {
        epochs: 60,
        lr: 0.5,
        batch: 16,
        seed,
        ..Default::default()
    }
}

#[test]
fn identity_task_is_learned_in_parallel_mode() {
    let codec = Arc::new(bundle(4, 32, 4));
    let before = codec.checksum();
    let pairs = identity_pairs(4, 900);
    let (model, report) = train_enhancer(&pairs, codec.clone(), &identity_config(1)).unwrap();
    assert_eq!(report.codec_checksum, before);
    assert_eq!(model.codec().checksum(), before);
    assert_eq!(report.final_accuracy().len(), 4);
    for (n, acc) in report.final_accuracy().iter().enumerate() {
        assert!(*acc >= 0.99, "branch {n}: {acc}");
    }
    assert!(report.epoch_losses.iter().all(|l| l.is_finite() && *l >= 0.0));
    let (degraded, clean) = model.enhance_tokens(&pairs[0].0, 2).unwrap();
    let hits = degraded.as_slice().iter().zip(clean.as_slice()).filter(|(a, b)| a == b).count();
    assert!(hits as f64 >= 0.99 * degraded.as_slice().len() as f64);
}

#[test]
fn identity_task_is_learned_in_serial_mode() {
    let codec = Arc::new(bundle(4, 32, 4));
    let pairs = identity_pairs(4, 900);
    let (model, report) = train_serial_enhancer(&pairs, codec.clone(), &identity_config(2)).unwrap();
    for (n, acc) in report.final_accuracy().iter().enumerate() {
        assert!(*acc >= 0.99, "stage {n}: {acc}");
    }
    let (degraded, clean) = model.enhance_tokens(&pairs[1].0).unwrap();
    let hits = degraded.as_slice().iter().zip(clean.as_slice()).filter(|(a, b)| a == b).count();
    assert!(hits as f64 >= 0.99 * degraded.as_slice().len() as f64);
}

#[test]
fn overfitting_one_pair_decreases_loss_monotonically() {
    let codec = Arc::new(bundle(4, 32, 5));
    let clean = signal(16000, 41);
    let mut r = rng(42);
    let noisy: Vec<f64> = clean.samples().iter().map(|v| v + 0.05 * r.gen_range(-1.0..1.0)).collect();
    let pairs = vec![(AudioBuffer::new(noisy, 16000).unwrap(), clean)];
    let cfg = EnhancerConfig {
        epochs: 10,
        seed: 3,
        ..Default::default()
    };
    assert_eq!(cfg.lr, 1e-2);
    let (_, report) = train_enhancer(&pairs, codec, &cfg).unwrap();
    assert_eq!(report.epoch_losses.len(), 10);
    for w in report.epoch_losses.windows(2) {
        assert!(w[1] < w[0], "{:?}", report.epoch_losses);
    }
}

#[test]
fn training_is_deterministic() {
    let codec = Arc::new(bundle(4, 16, 6));
    let pairs = identity_pairs(2, 70);
    let cfg = EnhancerConfig {
        epochs: 2,
        seed: 11,
        ..Default::default()
    };
    let (a, ra) = train_enhancer(&pairs, codec.clone(), &cfg).unwrap();
    let (b, rb) = train_enhancer(&pairs, codec, &cfg).unwrap();
    assert_eq!(ra, rb);
    assert_eq!(a.to_bytes(), b.to_bytes());
}

#[test]
fn training_errors() {
    let codec = Arc::new(bundle(4, 16, 6));
    assert!(matches!(
        train_enhancer(&[], codec.clone(), &EnhancerConfig::default()),
        Err(Error::InsufficientData(_))
    ));
    let pairs = identity_pairs(1, 70);
    let cfg = EnhancerConfig {
        epochs: 3,
        lr: f64::MAX,
        ..Default::default()
    };
    match train_enhancer(&pairs, codec.clone(), &cfg) {
        Err(Error::Divergence { epoch, .. }) => assert_eq!(epoch, 1),
        Err(e) => panic!("expected divergence, got {e}"),
        Ok(_) => panic!("expected divergence"),
    }
    let no_rvq = Arc::new(CodecBundle::new(codec.model.clone(), codec.gvq.clone(), None).unwrap());
    assert!(matches!(
        train_serial_enhancer(&pairs, no_rvq, &EnhancerConfig::default()),
        Err(Error::Config(_))
    ));
}

#[test]
fn context_flag_trains_and_predicts() {
    let codec = Arc::new(bundle(4, 16, 7));
    let pairs = identity_pairs(2, 80);
    let mut cfg = EnhancerConfig {
        epochs: 2,
        ..Default::default()
    };
    cfg.predictor.context = true;
    let (model, report) = train_enhancer(&pairs, codec, &cfg).unwrap();
    assert!(model.predictor().context());
    assert_eq!(report.epoch_losses.len(), 2);
    let (_, a) = model.enhance_tokens(&pairs[0].0, 1).unwrap();
    let (_, b) = model.enhance_tokens(&pairs[0].0, 3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn enhancer_container_round_trip() {
    let codec = Arc::new(bundle(4, 16, 8));
    let par = EnhancerModel::new(default_predictor(&codec, PredictionMode::Parallel, 1), codec.clone()).unwrap();
    let bytes = par.to_bytes();
    assert_eq!(&bytes[..4], b"GVQC");
    let codec_len = codec.to_bytes().len();
    assert_eq!(&bytes[codec_len..codec_len + 4], b"PGSE");
    let back = EnhancerModel::from_bytes(&bytes).unwrap();
    assert_eq!(back, par);
    assert_eq!(back.to_bytes(), bytes);

    let ser = SerialEnhancerModel::new(default_predictor(&codec, PredictionMode::Serial, 2), codec.clone()).unwrap();
    match AnyEnhancer::from_bytes(&ser.to_bytes()).unwrap() {
        AnyEnhancer::Serial(m) => assert_eq!(m, ser),
        AnyEnhancer::Parallel(_) => panic!("mode lost"),
    }
    assert!(matches!(EnhancerModel::from_bytes(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(matches!(EnhancerModel::from_bytes(&extra), Err(Error::Format(_))));
    assert!(matches!(EnhancerModel::from_bytes(&codec.to_bytes()), Err(Error::Format(_))));
}

#[test]
fn fit_predictor_on_a_prepared_dataset() {
    let codec = bundle(4, 16, 9);
    let cfg = EnhancerConfig {
        epochs: 3,
        ..Default::default()
    };
    let init = TokenPredictor::random(&cfg.predictor, PredictionMode::Parallel, 4, 16, 16000, &mut rng(0)).unwrap();
    let pairs = identity_pairs(1, 5);
    let data = FrameDataset::from_pairs(&pairs, &codec, &codec.gvq, init.extractor()).unwrap();
    assert_eq!(data.len(), 50);
    assert_eq!(data.degraded(), data.clean());
    let (_, losses, acc) = fit_predictor(init, &data, &cfg).unwrap();
    assert_eq!(losses.len(), 3);
    assert_eq!(acc.len(), 3);
}
