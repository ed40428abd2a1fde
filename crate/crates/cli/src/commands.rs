use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::{concatenate, Array2, Axis};
use paragse::codec::{
    tokenize, train_codebooks_gvq, train_codebooks_rvq, CodebookTraining, CodecBundle, LinearCodecModel, Quantizer,
};
use paragse::degrade::{
    add_noise, apply_spec, speech_like, synth_assets_with, white_noise, AssetConfig, DegradationSpec, Stage,
    TEST_SNR_GRID, TRAIN_SNR_GRID,
};
use paragse::dsp::AudioBuffer;
use paragse::enhance::{
    enhance_parallel, enhance_serial, train_enhancer, train_serial_enhancer, AnyEnhancer, EnhancerConfig,
    PredictorConfig, TrainReport,
};
use paragse::metrics::{bench_rtf, hardware_note, lsd, measure_snr, token_accuracy, EvalReport, RtfReport, UtteranceEval};
use paragse::Error;

use crate::config::{Mode, RunConfig, Split, Task};
use crate::manifest::{Entry, Manifest};
use crate::wav::{quantize, read_wav, write_wav};
use crate::{file_checksum, CliError};

pub const SAMPLE_RATE: u32 = 16000;
const NOISE_SOURCES: [&str; 3] = ["white", "pink", "babble"];

fn mix(seed: u64, salt: u64) -> u64 {
    seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ salt.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Degradation for utterance `i` of the configured task.
pub fn utterance_spec(cfg: &RunConfig, i: usize) -> Result<DegradationSpec, CliError> {
    let k = &cfg.corpus;
    let seed = mix(cfg.seed, i as u64);
    if let Some(text) = &k.spec {
        let s: DegradationSpec = text.parse().map_err(|e| CliError::Config(format!("corpus.spec: {e}")))?;
        return Ok(DegradationSpec { seed, ..s });
    }
    let grid = match k.split {
        Split::Train => TRAIN_SNR_GRID,
        Split::Test => TEST_SNR_GRID,
    };
    let noise = Stage::Noise {
        source: NOISE_SOURCES[i % NOISE_SOURCES.len()].into(),
        snr_db: k.snr_db.unwrap_or(grid[i % grid.len()]),
    };
    let reverb = Stage::Reverb {
        rir: format!("rir_{}", i % k.rt60s.len() + 1),
    };
    let band = Stage::BandLimit {
        target_hz: k.bandlimit_hz,
    };
    let stages = match k.task {
        Task::Identity => vec![],
        Task::Denoise => vec![noise],
        Task::Dereverb => vec![reverb],
        Task::Bandwidth => vec![band],
        Task::Mixed => vec![reverb, noise, band],
    };
    Ok(DegradationSpec::new(stages, seed)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSummary {
    pub manifest: PathBuf,
    pub utterances: usize,
    pub seconds: f64,
}

/// Synthesizes clean utterances, degrades them and writes WAV pairs plus
/// `manifest.tsv` under `out`.
pub fn make_corpus(cfg: &RunConfig, out: &Path) -> Result<CorpusSummary, CliError> {
    let k = &cfg.corpus;
    let specs = (0..k.utterances)
        .map(|i| utterance_spec(cfg, i))
        .collect::<Result<Vec<_>, _>>()?;
    let split_salt = match k.split {
        Split::Train => 0,
        Split::Test => 1,
    };
    let assets = synth_assets_with(
        &AssetConfig {
            sample_rate: SAMPLE_RATE,
            clean_utterances: k.utterances,
            clean_seconds: k.seconds,
            noise_seconds: k.noise_seconds,
            rt60s: k.rt60s.clone(),
        },
        mix(cfg.seed, 0xC0_0000 + split_salt),
    )?;
    let pairs = assets
        .clean()
        .iter()
        .zip(&specs)
        .map(|(c, s)| apply_spec(c, s, &assets))
        .collect::<Result<Vec<_>, _>>()?;

    let mut manifest = Manifest::default();
    for dir in ["clean", "degraded"] {
        let d = out.join(dir);
        fs::create_dir_all(&d).map_err(|e| CliError::io(&d, e))?;
    }
    for (i, ((degraded, clean), spec)) in pairs.iter().zip(&specs).enumerate() {
        let name = format!("utt_{i:04}.wav");
        let entry = Entry {
            clean: Path::new("clean").join(&name),
            degraded: Path::new("degraded").join(&name),
            spec: spec.to_string(),
        };
        write_wav(&out.join(&entry.clean), clean)?;
        write_wav(&out.join(&entry.degraded), degraded)?;
        manifest.entries.push(entry);
    }
    let path = out.join("manifest.tsv");
    write_file(&path, manifest.to_text().as_bytes())?;
    Ok(CorpusSummary {
        manifest: path,
        utterances: k.utterances,
        seconds: k.utterances as f64 * k.seconds,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodecSummary {
    pub train_mse: f64,
    pub heldout_mse: f64,
    pub train_frames: usize,
    pub heldout_frames: usize,
    pub checksum: String,
}

impl CodecSummary {
    pub fn to_text(&self) -> String {
        format!(
            "train_frames={}\nheldout_frames={}\ntrain_mse={:.9}\nheldout_mse={:.9}\ncodec_checksum={}\n",
            self.train_frames, self.heldout_frames, self.train_mse, self.heldout_mse, self.checksum
        )
    }
}

fn stacked_latents(model: &LinearCodecModel, audio: &[AudioBuffer]) -> Result<Array2<f64>, CliError> {
    let lat = audio
        .iter()
        .map(|a| Ok(model.encode(a)?.frames))
        .collect::<Result<Vec<_>, CliError>>()?;
    let views: Vec<_> = lat.iter().map(|l| l.view()).collect();
    concatenate(Axis(0), &views).map_err(|e| CliError::Data(e.to_string()))
}

/// Mean over frames of the squared latent quantization error.
fn latent_mse(latents: &Array2<f64>, q: &dyn Quantizer) -> Result<f64, CliError> {
    let mut total = 0.0;
    for row in latents.outer_iter() {
        let e = row.to_vec();
        let (_, e_hat) = q.quantize(&e)?;
        total += e.iter().zip(&e_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total / latents.nrows().max(1) as f64)
}

fn read_clean(manifest: &Manifest) -> Result<Vec<AudioBuffer>, CliError> {
    manifest.entries.iter().map(|e| read_wav(&e.clean)).collect()
}

/// Fits the linear codec and its quantizers on the clean side of the
/// corpus. Every fifth utterance is held out for the reported MSE.
pub fn train_codec(cfg: &RunConfig, manifest: &Path, out: &Path) -> Result<CodecSummary, CliError> {
    let m = Manifest::load(manifest)?;
    if m.entries.len() < 2 {
        return Err(Error::InsufficientData("codec training needs at least two utterances".into()).into());
    }
    let clean = read_clean(&m)?;
    let n = clean.len();
    let held = |i: usize| if n >= 5 { i % 5 == 4 } else { i == n - 1 };
    let (mut train, mut test) = (vec![], vec![]);
    for (i, a) in clean.into_iter().enumerate() {
        if held(i) {
            test.push(a);
        } else {
            train.push(a);
        }
    }
    let c = &cfg.codec;
    let model = LinearCodecModel::fit(&train, c.latent_dim, c.half_window, 8 * c.half_window)?;
    let train_lat = stacked_latents(&model, &train)?;
    let test_lat = stacked_latents(&model, &test)?;
    let training = CodebookTraining {
        iterations: c.iterations,
        ..Default::default()
    };
    let gvq = train_codebooks_gvq(train_lat.view(), c.groups, c.codebook_size, cfg.seed, &training)?.quantizer;
    let rvq = if c.rvq {
        Some(train_codebooks_rvq(train_lat.view(), c.groups, c.codebook_size, cfg.seed, &training)?)
    } else {
        None
    };
    let summary = CodecSummary {
        train_mse: latent_mse(&train_lat, &gvq)?,
        heldout_mse: latent_mse(&test_lat, &gvq)?,
        train_frames: train_lat.nrows(),
        heldout_frames: test_lat.nrows(),
        checksum: String::new(),
    };
    let bundle = CodecBundle::new(model, gvq, rvq)?;
    write_file(out, &bundle.to_bytes())?;
    Ok(CodecSummary {
        checksum: bundle.checksum(),
        ..summary
    })
}

pub fn load_codec(path: &Path) -> Result<CodecBundle, CliError> {
    Ok(CodecBundle::from_bytes(&read_file(path)?)?)
}

pub fn load_enhancer(path: &Path) -> Result<AnyEnhancer, CliError> {
    Ok(AnyEnhancer::from_bytes(&read_file(path)?)?)
}

fn read_pairs(m: &Manifest) -> Result<Vec<(AudioBuffer, AudioBuffer)>, CliError> {
    m.entries
        .iter()
        .map(|e| Ok((read_wav(&e.degraded)?, read_wav(&e.clean)?)))
        .collect()
}

/// Per-epoch loss and per-branch accuracy as tab-separated text.
pub fn train_report_text(r: &TrainReport) -> String {
    let branches = r.final_accuracy().len();
    let mut s = format!(
        "# seed={} frames={} codec_checksum={}\nepoch\tloss",
        r.seed, r.frames, r.codec_checksum
    );
    for b in 1..=branches {
        let _ = write!(s, "\tacc_{b}");
    }
    s.push('\n');
    for (e, (loss, acc)) in r.epoch_losses.iter().zip(&r.branch_accuracy).enumerate() {
        let _ = write!(s, "{}\t{loss:.9}", e + 1);
        for a in acc {
            let _ = write!(s, "\t{a:.6}");
        }
        s.push('\n');
    }
    s
}

/// Trains the enhancer on the manifest's pairs against a frozen codec and
/// writes the model container to `out`.
pub fn train_enhancer_cmd(cfg: &RunConfig, manifest: &Path, codec: &Path, out: &Path) -> Result<TrainReport, CliError> {
    let bundle = load_codec(codec)?;
    let before = bundle.checksum();
    let pairs = read_pairs(&Manifest::load(manifest)?)?;
    let e = &cfg.enhancer;
    let ecfg = EnhancerConfig {
        predictor: PredictorConfig {
            channels: e.channels,
            hidden: e.hidden,
            context: e.context,
            ..Default::default()
        },
        epochs: e.epochs,
        lr: e.lr,
        batch: e.batch,
        seed: cfg.seed,
    };
    let codec = Arc::new(bundle);
    let (bytes, report) = match e.mode {
        Mode::Parallel => {
            let (m, r) = train_enhancer(&pairs, codec.clone(), &ecfg)?;
            (m.to_bytes(), r)
        }
        Mode::Serial => {
            let (m, r) = train_serial_enhancer(&pairs, codec.clone(), &ecfg)?;
            (m.to_bytes(), r)
        }
    };
    if codec.checksum() != before || report.codec_checksum != before {
        return Err(CliError::Data("codec changed during enhancer training".into()));
    }
    write_file(out, &bytes)?;
    Ok(report)
}

fn model_mode(m: &AnyEnhancer) -> Mode {
    match m {
        AnyEnhancer::Parallel(_) => Mode::Parallel,
        AnyEnhancer::Serial(_) => Mode::Serial,
    }
}

/// Loads an enhancer, checking it against an optional separate codec file
/// and an optional requested mode.
pub fn open_enhancer(model: &Path, codec: Option<&Path>, mode: Option<Mode>) -> Result<AnyEnhancer, CliError> {
    let m = load_enhancer(model)?;
    if let Some(c) = codec {
        let want = load_codec(c)?.checksum();
        if want != m.codec().checksum() {
            return Err(CliError::Config(format!(
                "{} was trained with a different codec than {}",
                model.display(),
                c.display()
            )));
        }
    }
    if let Some(mode) = mode {
        if mode != model_mode(&m) {
            return Err(CliError::Config(format!(
                "{} holds a {:?} enhancer, not {mode:?}",
                model.display(),
                model_mode(&m)
            )));
        }
    }
    Ok(m)
}

/// Degraded tokens, predicted clean tokens and the decoded waveform.
pub fn run_enhancer(
    m: &AnyEnhancer,
    audio: &AudioBuffer,
    workers: usize,
) -> Result<(paragse::codec::TokenSequence, paragse::codec::TokenSequence, AudioBuffer), CliError> {
    Ok(match m {
        AnyEnhancer::Parallel(p) => {
            let (d, c) = p.enhance_tokens(audio, workers)?;
            let y = p.decode(&c)?;
            (d, c, y)
        }
        AnyEnhancer::Serial(s) => {
            let (d, c) = s.enhance_tokens(audio)?;
            let y = s.decode(&c)?;
            (d, c, y)
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnhanceSummary {
    pub frames: usize,
    pub seconds: f64,
    pub output_checksum: String,
}

pub fn enhance_cmd(
    m: &AnyEnhancer,
    input: &Path,
    output: &Path,
    workers: usize,
    dump_tokens: Option<&Path>,
) -> Result<EnhanceSummary, CliError> {
    let audio = read_wav(input)?;
    let (_, tokens, y) = run_enhancer(m, &audio, workers)?;
    write_wav(output, &y)?;
    if let Some(p) = dump_tokens {
        write_file(p, tokens.to_text().as_bytes())?;
    }
    Ok(EnhanceSummary {
        frames: tokens.frames(),
        seconds: y.duration_secs(),
        output_checksum: file_checksum(output)?,
    })
}

fn quantizer(m: &AnyEnhancer) -> Result<&dyn Quantizer, CliError> {
    let codec = m.codec();
    Ok(match m {
        AnyEnhancer::Parallel(_) => &codec.gvq,
        AnyEnhancer::Serial(_) => codec
            .rvq
            .as_ref()
            .ok_or_else(|| CliError::Config("serial enhancer without residual quantizer".into()))?,
    })
}

fn snr_or_inf(clean: &AudioBuffer, test: &AudioBuffer) -> Result<f64, CliError> {
    match measure_snr(clean, test) {
        Err(Error::Degenerate(_)) => Ok(f64::INFINITY),
        other => Ok(other?),
    }
}

fn evaluate_entry(m: &AnyEnhancer, e: &Entry, workers: usize) -> Result<UtteranceEval, CliError> {
    let clean = read_wav(&e.clean)?;
    let degraded = read_wav(&e.degraded)?;
    let (_, predicted, enhanced) = run_enhancer(m, &degraded, workers)?;
    // Compare what a listener would get back from the written file.
    let enhanced = quantize(&enhanced)?;
    let target = tokenize(&clean, &m.codec().model, quantizer(m)?)?;
    Ok(UtteranceEval {
        id: e.clean.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
        lsd_degraded: lsd(&clean, &degraded)?,
        lsd_enhanced: lsd(&clean, &enhanced)?,
        snr_degraded: snr_or_inf(&clean, &degraded)?,
        snr_enhanced: snr_or_inf(&clean, &enhanced)?,
        accuracy: token_accuracy(&predicted, &target)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutcome {
    pub items: Vec<UtteranceEval>,
    pub report: EvalReport,
    pub failures: Vec<(String, String)>,
}

impl EvalOutcome {
    pub fn utterance_table(&self) -> String {
        let mut s = String::from("id\tlsd_degraded\tlsd_enhanced\tsnr_degraded_db\tsnr_enhanced_db\taccuracy\n");
        for u in &self.items {
            let _ = writeln!(
                s,
                "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                u.id, u.lsd_degraded, u.lsd_enhanced, u.snr_degraded, u.snr_enhanced, u.accuracy.overall
            );
        }
        s
    }

    pub fn summary(&self) -> String {
        let mut s = self.report.to_text();
        let _ = writeln!(s, "failures={}", self.failures.len());
        for (path, why) in &self.failures {
            let _ = writeln!(s, "failure={path}: {why}");
        }
        s
    }
}

/// Scores every manifest entry. Entries whose files cannot be read are
/// listed as failures and skipped.
pub fn eval_cmd(m: &AnyEnhancer, manifest: &Path, out: &Path, workers: usize) -> Result<EvalOutcome, CliError> {
    let man = Manifest::load(manifest)?;
    let mut items = vec![];
    let mut failures = vec![];
    for e in &man.entries {
        match evaluate_entry(m, e, workers) {
            Ok(u) => items.push(u),
            Err(err @ (CliError::Io { .. } | CliError::Wav { .. })) => {
                failures.push((e.degraded.display().to_string(), err.to_string()))
            }
            Err(err) => return Err(err),
        }
    }
    if items.is_empty() {
        return Err(CliError::Data(format!("no manifest entry could be evaluated ({} failures)", failures.len())));
    }
    let report = EvalReport::aggregate(&items)?;
    let outcome = EvalOutcome { items, report, failures };
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    write_file(&out.join("eval_utterances.tsv"), outcome.utterance_table().as_bytes())?;
    write_file(&out.join("eval_summary.txt"), outcome.summary().as_bytes())?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchOutcome {
    pub parallel: Vec<RtfReport>,
    pub serial: RtfReport,
}

impl BenchOutcome {
    pub fn table(&self) -> String {
        let mut s = format!("# {}\npipeline\tworkers\twall_seconds\trtf\tspeedup_vs_realtime\tspread\n", hardware_note());
        for r in self.parallel.iter().chain(std::iter::once(&self.serial)) {
            let _ = writeln!(
                s,
                "{}\t{}\t{:.6}\t{:.6}\t{:.3}\t{:.4}",
                r.pipeline, r.workers, r.wall_seconds, r.rtf, r.speedup_vs_realtime, r.spread
            );
        }
        for r in &self.parallel {
            let _ = writeln!(s, "# ratio_serial_over_parallel_w{}={:.4}", r.workers, self.serial.rtf / r.rtf);
        }
        s
    }
}

/// Benchmark input: a speech-like signal with white noise at 10 dB.
pub fn bench_audio(seconds: f64, seed: u64) -> Result<AudioBuffer, CliError> {
    let clean = speech_like(seconds, SAMPLE_RATE, mix(seed, 0xBE))?;
    let noise = white_noise(seconds.min(30.0), SAMPLE_RATE, mix(seed, 0xBF))?;
    Ok(add_noise(&clean, &noise, 10.0, seed)?)
}

/// RTF of the parallel model at each worker count and of the serial model,
/// all on the same audio.
pub fn bench_cmd(
    parallel: &AnyEnhancer,
    serial: &AnyEnhancer,
    audio: &AudioBuffer,
    workers: &[usize],
    repeats: usize,
) -> Result<BenchOutcome, CliError> {
    let (AnyEnhancer::Parallel(p), AnyEnhancer::Serial(s)) = (parallel, serial) else {
        return Err(CliError::Config("bench needs a parallel and a serial enhancer".into()));
    };
    if workers.is_empty() || workers.contains(&0) {
        return Err(CliError::Config("workers list must be non-empty and positive".into()));
    }
    let parallel = workers
        .iter()
        .map(|&w| bench_rtf("parallel", |a| enhance_parallel(a, p, w), audio, w, repeats))
        .collect::<Result<Vec<_>, _>>()?;
    let serial = bench_rtf("serial", |a| enhance_serial(a, s), audio, 1, repeats)?;
    Ok(BenchOutcome { parallel, serial })
}
