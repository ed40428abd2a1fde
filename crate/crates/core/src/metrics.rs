//! Objective evaluation: log-spectral distance, SNR, token accuracy and
//! real-time-factor benchmarking.
//!
//! LSD uses fixed analysis settings (Hann frames of 1024 samples, shift 256,
//! floor 1e-8 on magnitudes), so values are only comparable with other values
//! computed here.

use std::fmt::Write as _;
use std::time::Instant;

use crate::codec::TokenSequence;
use crate::dsp::{AudioBuffer, Stft};
use crate::error::{invalid, Error, Result};

pub const LSD_FRAME: usize = 1024;
pub const LSD_SHIFT: usize = 256;
pub const LSD_EPS: f64 = 1e-8;

fn check_pair(a: &AudioBuffer, b: &AudioBuffer) -> Result<()> {
    if a.len() != b.len() {
        return Err(invalid(format!("lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.sample_rate() != b.sample_rate() {
        return Err(invalid(format!(
            "sample rates differ: {} vs {}",
            a.sample_rate(),
            b.sample_rate()
        )));
    }
    Ok(())
}

/// Log-spectral distance in dB: per frame, the RMS over bins of
/// `20 log10((|R| + eps) / (|T| + eps))`, averaged over frames.
pub fn lsd(reference: &AudioBuffer, test: &AudioBuffer) -> Result<f64> {
    check_pair(reference, test)?;
    let stft = Stft::new(LSD_FRAME, LSD_SHIFT, LSD_FRAME)?;
    let r = stft.analyze(reference.samples())?.amplitude;
    let t = stft.analyze(test.samples())?.amplitude;
    let bins = r.ncols() as f64;
    let total: f64 = r
        .outer_iter()
        .zip(t.outer_iter())
        .map(|(fr, ft)| {
            let ms = fr
                .iter()
                .zip(ft.iter())
                .map(|(a, b)| (20.0 * ((a + LSD_EPS) / (b + LSD_EPS)).log10()).powi(2))
                .sum::<f64>()
                / bins;
            ms.sqrt()
        })
        .sum();
    Ok(total / r.nrows() as f64)
}

/// `10 log10(P_clean / P_residual)` with `residual = noisy - clean`.
pub fn measure_snr(clean: &AudioBuffer, noisy: &AudioBuffer) -> Result<f64> {
    check_pair(clean, noisy)?;
    let pr = clean
        .samples()
        .iter()
        .zip(noisy.samples())
        .map(|(c, n)| (n - c) * (n - c))
        .sum::<f64>();
    if pr == 0.0 {
        return Err(Error::Degenerate("residual has zero power".into()));
    }
    let pc = clean.samples().iter().map(|c| c * c).sum::<f64>();
    Ok(10.0 * (pc / pr).log10())
}

/// Fractions of matching tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenAccuracy {
    pub per_branch: Vec<f64>,
    pub overall: f64,
    pub frames: usize,
}

pub fn token_accuracy(predicted: &TokenSequence, target: &TokenSequence) -> Result<TokenAccuracy> {
    if predicted.groups() != target.groups() || predicted.frames() != target.frames() {
        return Err(invalid(format!(
            "token shapes differ: {}x{} vs {}x{}",
            predicted.frames(),
            predicted.groups(),
            target.frames(),
            target.groups()
        )));
    }
    let (frames, groups) = (target.frames(), target.groups());
    if frames == 0 {
        return Err(invalid("no tokens to compare"));
    }
    let mut hits = vec![0usize; groups];
    for (p, t) in predicted.iter_frames().zip(target.iter_frames()) {
        for (n, h) in hits.iter_mut().enumerate() {
            *h += usize::from(p[n] == t[n]);
        }
    }
    Ok(TokenAccuracy {
        per_branch: hits.iter().map(|&h| h as f64 / frames as f64).collect(),
        overall: hits.iter().sum::<usize>() as f64 / (frames * groups) as f64,
        frames,
    })
}

/// Wall-clock efficiency of one pipeline on one input.
#[derive(Debug, Clone, PartialEq)]
pub struct RtfReport {
    pub pipeline: String,
    /// Median over the timed runs.
    pub wall_seconds: f64,
    pub audio_seconds: f64,
    pub rtf: f64,
    pub speedup_vs_realtime: f64,
    pub hardware: String,
    pub workers: usize,
    pub runs: usize,
    /// (max - min) / median of the timed runs.
    pub spread: f64,
}

impl RtfReport {
    pub fn to_text(&self) -> String {
        format!(
            "pipeline={}\nworkers={}\nruns={}\nwall_seconds={:.6}\naudio_seconds={:.3}\nrtf={:.6}\nspeedup_vs_realtime={:.3}\nspread={:.4}\nhardware={}\n",
            self.pipeline,
            self.workers,
            self.runs,
            self.wall_seconds,
            self.audio_seconds,
            self.rtf,
            self.speedup_vs_realtime,
            self.spread,
            self.hardware
        )
    }
}

pub fn hardware_note() -> String {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!("{cores} logical cores, {}-{}", std::env::consts::ARCH, std::env::consts::OS)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Times `pipeline` on `audio`: one untimed warm-up, then the median of
/// `repeats` timed runs. Failures carry the run index (0 is the warm-up).
pub fn bench_rtf<F>(label: &str, mut pipeline: F, audio: &AudioBuffer, workers: usize, repeats: usize) -> Result<RtfReport>
where
    F: FnMut(&AudioBuffer) -> Result<AudioBuffer>,
{
    if repeats < 3 {
        return Err(invalid(format!("need at least 3 repeats, got {repeats}")));
    }
    let audio_seconds = audio.duration_secs();
    if audio_seconds < 10.0 {
        return Err(invalid(format!("need at least 10 s of audio, got {audio_seconds:.2} s")));
    }
    let wrap = |run: usize| move |e: Error| Error::Pipeline { run, source: Box::new(e) };
    pipeline(audio).map_err(wrap(0))?;
    let mut times = Vec::with_capacity(repeats);
    for run in 1..=repeats {
        let start = Instant::now();
        let out = pipeline(audio).map_err(wrap(run))?;
        times.push(start.elapsed().as_secs_f64());
        drop(out);
    }
    times.sort_by(f64::total_cmp);
    let wall = median(&times);
    if wall <= 0.0 {
        return Err(Error::Degenerate("pipeline finished below timer resolution".into()));
    }
    let rtf = wall / audio_seconds;
    Ok(RtfReport {
        pipeline: label.to_string(),
        wall_seconds: wall,
        audio_seconds,
        rtf,
        speedup_vs_realtime: 1.0 / rtf,
        hardware: hardware_note(),
        workers,
        runs: repeats,
        spread: (times[repeats - 1] - times[0]) / wall,
    })
}

/// Scores for one evaluated utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceEval {
    pub id: String,
    pub lsd_degraded: f64,
    pub lsd_enhanced: f64,
    pub snr_degraded: f64,
    pub snr_enhanced: f64,
    pub accuracy: TokenAccuracy,
}

/// Means of per-utterance scores.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub utterances: usize,
    pub lsd_degraded: f64,
    pub lsd_enhanced: f64,
    pub snr_degraded: f64,
    pub snr_enhanced: f64,
    pub branch_accuracy: Vec<f64>,
    pub overall_accuracy: f64,
}

impl EvalReport {
    pub fn aggregate(items: &[UtteranceEval]) -> Result<Self> {
        let first = items.first().ok_or_else(|| invalid("nothing to aggregate"))?;
        let groups = first.accuracy.per_branch.len();
        if items.iter().any(|u| u.accuracy.per_branch.len() != groups) {
            return Err(invalid("utterances disagree on branch count"));
        }
        let n = items.len() as f64;
        let mean = |f: &dyn Fn(&UtteranceEval) -> f64| items.iter().map(f).sum::<f64>() / n;
        Ok(Self {
            utterances: items.len(),
            lsd_degraded: mean(&|u| u.lsd_degraded),
            lsd_enhanced: mean(&|u| u.lsd_enhanced),
            snr_degraded: mean(&|u| u.snr_degraded),
            snr_enhanced: mean(&|u| u.snr_enhanced),
            branch_accuracy: (0..groups).map(|g| mean(&|u| u.accuracy.per_branch[g])).collect(),
            overall_accuracy: mean(&|u| u.accuracy.overall),
        })
    }

    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "utterances={}", self.utterances);
        let _ = writeln!(s, "lsd_degraded={:.6}", self.lsd_degraded);
        let _ = writeln!(s, "lsd_enhanced={:.6}", self.lsd_enhanced);
        let _ = writeln!(s, "snr_degraded_db={:.6}", self.snr_degraded);
        let _ = writeln!(s, "snr_enhanced_db={:.6}", self.snr_enhanced);
        for (i, a) in self.branch_accuracy.iter().enumerate() {
            let _ = writeln!(s, "accuracy_branch_{}={a:.6}", i + 1);
        }
        let _ = writeln!(s, "accuracy_overall={:.6}", self.overall_accuracy);
        s
    }
}
