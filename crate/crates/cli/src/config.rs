use std::path::Path;

use serde::Deserialize;
use toml::{Table, Value};

use paragse::degrade::DegradationSpec;

use crate::CliError;

/// Environment variable consulted when neither the config nor a flag sets
/// the seed.
pub const SEED_ENV: &str = "PARAGSE_SEED";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodecParams {
    pub groups: usize,
    pub codebook_size: usize,
    pub latent_dim: usize,
    pub half_window: usize,
    pub iterations: usize,
    /// Also train the residual quantizer used by the serial baseline.
    pub rvq: bool,
}

impl Default for CodecParams {
    fn default() -> Self {
        Self {
            groups: 4,
            codebook_size: 256,
            latent_dim: 32,
            half_window: 40,
            iterations: 50,
            rvq: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Parallel,
    Serial,
}

impl std::str::FromStr for Mode {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "parallel" => Ok(Self::Parallel),
            "serial" => Ok(Self::Serial),
            _ => Err(CliError::Config(format!("mode must be parallel or serial, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnhancerParams {
    pub channels: usize,
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub context: bool,
    pub mode: Mode,
}

impl Default for EnhancerParams {
    fn default() -> Self {
        Self {
            channels: 64,
            hidden: 128,
            lr: 0.1,
            epochs: 30,
            batch: 32,
            context: false,
            mode: Mode::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Identity,
    Denoise,
    Dereverb,
    Bandwidth,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusParams {
    pub task: Task,
    pub split: Split,
    pub utterances: usize,
    pub seconds: f64,
    pub noise_seconds: f64,
    /// Fixed SNR instead of the split's grid.
    pub snr_db: Option<f64>,
    /// Explicit degradation applied to every utterance instead of the task.
    pub spec: Option<String>,
    pub bandlimit_hz: u32,
    pub rt60s: Vec<f64>,
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self {
            task: Task::Denoise,
            split: Split::Train,
            utterances: 20,
            seconds: 3.0,
            noise_seconds: 30.0,
            snr_db: None,
            spec: None,
            bandlimit_hz: 8000,
            rt60s: vec![0.2, 0.3, 0.5, 0.7],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    #[serde(default = "one")]
    workers: usize,
    #[serde(default)]
    codec: CodecParams,
    #[serde(default)]
    enhancer: EnhancerParams,
    #[serde(default)]
    corpus: CorpusParams,
}

fn one() -> usize {
    1
}

/// Fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: usize,
    pub codec: CodecParams,
    pub enhancer: EnhancerParams,
    pub corpus: CorpusParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_table(Table::new(), None).expect("defaults are valid")
    }
}

fn parse_override(item: &str) -> Result<(Vec<String>, Value), CliError> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override {item:?} is not key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.iter().any(String::is_empty) {
        return Err(CliError::Config(format!("bad override key {key:?}")));
    }
    let raw = raw.trim();
    // Bare words that are not valid TOML values are taken as strings.
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((path, value))
}

fn apply_override(table: &mut Table, path: &[String], value: Value) -> Result<(), CliError> {
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut t = table;
    for p in parents {
        t = t
            .entry(p.clone())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("{p} is not a section")))?;
    }
    t.insert(last.clone(), value);
    Ok(())
}

impl RunConfig {
    /// Reads `path` (if any), applies `key=value` overrides and validates.
    /// The seed comes from `seed`, then the file, then the environment.
    pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                text.parse::<Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => Table::new(),
        };
        for o in overrides {
            let (k, v) = parse_override(o)?;
            apply_override(&mut table, &k, v)?;
        }
        let env_seed = match std::env::var(SEED_ENV) {
            Ok(s) => Some(
                s.trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("{SEED_ENV}={s:?} is not an unsigned integer")))?,
            ),
            Err(_) => None,
        };
        let mut cfg = Self::from_table(table, env_seed)?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }

    fn from_table(table: Table, env_seed: Option<u64>) -> Result<Self, CliError> {
        let raw: RawConfig = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        let cfg = Self {
            seed: raw.seed.or(env_seed).unwrap_or(0),
            workers: raw.workers,
            codec: raw.codec,
            enhancer: raw.enhancer,
            corpus: raw.corpus,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        let c = &self.codec;
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if c.groups == 0 || c.latent_dim == 0 || c.latent_dim % c.groups != 0 {
            return bad(format!("latent_dim {} must split into {} groups", c.latent_dim, c.groups));
        }
        if c.codebook_size == 0 {
            return bad("codebook_size must be positive".into());
        }
        if c.half_window == 0 || c.half_window % 2 != 0 {
            return bad(format!("half_window {} must be positive and even", c.half_window));
        }
        if c.latent_dim > 8 * c.half_window {
            return bad(format!("latent_dim {} exceeds the frame size {}", c.latent_dim, 8 * c.half_window));
        }
        let e = &self.enhancer;
        if e.channels == 0 || e.hidden == 0 || e.batch == 0 || e.epochs == 0 {
            return bad("channels, hidden, batch and epochs must be positive".into());
        }
        if !(e.lr.is_finite() && e.lr > 0.0) {
            return bad(format!("lr {} must be positive", e.lr));
        }
        let k = &self.corpus;
        if k.utterances == 0 {
            return bad("corpus needs at least one utterance".into());
        }
        if !(k.seconds.is_finite() && k.seconds > 0.0 && k.noise_seconds.is_finite() && k.noise_seconds > 0.0) {
            return bad("corpus durations must be positive".into());
        }
        if let Some(s) = k.snr_db {
            if !s.is_finite() {
                return bad("snr_db must be finite".into());
            }
        }
        if k.bandlimit_hz == 0 || k.bandlimit_hz >= 16000 {
            return bad(format!("bandlimit_hz {} must be in 1..16000", k.bandlimit_hz));
        }
        if k.rt60s.is_empty() || k.rt60s.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return bad("rt60s must be a non-empty list of positive times".into());
        }
        if let Some(s) = &k.spec {
            s.parse::<DegradationSpec>()
                .map_err(|e| CliError::Config(format!("corpus.spec: {e}")))?;
        }
        Ok(())
    }
}
