use std::fmt;
use std::str::FromStr;

use super::{add_noise, band_limit, convolve_rir, Assets};
use crate::dsp::AudioBuffer;
use crate::error::{invalid, Error, Result};

/// One degradation step.
#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Noise { source: String, snr_db: f64 },
    Reverb { rir: String },
    BandLimit { target_hz: u32 },
}

/// Ordered degradation recipe with its seed.
///
/// Text form: `seed(7);reverb(rir_2);noise(babble,7.5);bandlimit(8000)`.
/// The seed item is optional on input (default 0) and always written.
#[derive(Debug, Clone, PartialEq)]
pub struct DegradationSpec {
    pub stages: Vec<Stage>,
    pub seed: u64,
}

impl DegradationSpec {
    pub fn new(stages: Vec<Stage>, seed: u64) -> Result<Self> {
        for s in &stages {
            match s {
                Stage::Noise { source, snr_db } => {
                    if !snr_db.is_finite() {
                        return Err(invalid("SNR must be finite"));
                    }
                    check_id(source)?;
                }
                Stage::Reverb { rir } => check_id(rir)?,
                Stage::BandLimit { target_hz } => {
                    if *target_hz == 0 {
                        return Err(invalid("band limit must be positive"));
                    }
                }
            }
        }
        Ok(Self { stages, seed })
    }

    pub fn identity(seed: u64) -> Self {
        Self { stages: vec![], seed }
    }

    /// Seed of the random draws made by stage `index`.
    pub fn stage_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64 + 1)
    }

    /// Reverberation, then noise, then band-limiting.
    pub fn mixed(rir: &str, source: &str, snr_db: f64, target_hz: u32, seed: u64) -> Result<Self> {
        Self::new(
            vec![
                Stage::Reverb { rir: rir.into() },
                Stage::Noise {
                    source: source.into(),
                    snr_db,
                },
                Stage::BandLimit { target_hz },
            ],
            seed,
        )
    }
}

fn check_id(id: &str) -> Result<()> {
    let ok = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c));
    if ok {
        Ok(())
    } else {
        Err(invalid(format!("asset id {id:?} must be non-empty [A-Za-z0-9_.-]")))
    }
}

impl fmt::Display for DegradationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "seed({})", self.seed)?;
        for s in &self.stages {
            match s {
                Stage::Noise { source, snr_db } => write!(f, ";noise({source},{snr_db})")?,
                Stage::Reverb { rir } => write!(f, ";reverb({rir})")?,
                Stage::BandLimit { target_hz } => write!(f, ";bandlimit({target_hz})")?,
            }
        }
        Ok(())
    }
}

impl FromStr for DegradationSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut stages = Vec::new();
        let mut seed = None;
        for item in s.split(';').map(str::trim).filter(|i| !i.is_empty()) {
            let (name, rest) = item
                .split_once('(')
                .ok_or_else(|| invalid(format!("stage {item:?} lacks an argument list")))?;
            let args = rest
                .strip_suffix(')')
                .ok_or_else(|| invalid(format!("stage {item:?} lacks a closing parenthesis")))?;
            let args: Vec<&str> = args.split(',').map(str::trim).collect();
            let num = |v: &str| -> Result<f64> { v.parse().map_err(|_| invalid(format!("bad number {v:?} in {item:?}"))) };
            match (name.trim(), args.as_slice()) {
                ("seed", [v]) => {
                    if seed.is_some() {
                        return Err(invalid("seed given twice"));
                    }
                    seed = Some(v.parse().map_err(|_| invalid(format!("bad seed {v:?}")))?);
                }
                ("noise", [src, snr]) => stages.push(Stage::Noise {
                    source: src.to_string(),
                    snr_db: num(snr)?,
                }),
                ("reverb", [rir]) => stages.push(Stage::Reverb { rir: rir.to_string() }),
                ("bandlimit", [hz]) => stages.push(Stage::BandLimit {
                    target_hz: hz.parse().map_err(|_| invalid(format!("bad rate {hz:?}")))?,
                }),
                _ => return Err(invalid(format!("unknown stage {item:?}"))),
            }
        }
        Self::new(stages, seed.unwrap_or(0))
    }
}


/// Applies the stages of `spec` in order. Returns `(degraded, clean)`;
/// the clean reference is the dry input.
pub fn apply_spec(clean: &AudioBuffer, spec: &DegradationSpec, assets: &Assets) -> Result<(AudioBuffer, AudioBuffer)> {
    let mut y = clean.clone();
    for (i, s) in spec.stages.iter().enumerate() {
        y = match s {
            Stage::Noise { source, snr_db } => add_noise(&y, assets.noise(source)?, *snr_db, spec.stage_seed(i))?,
            Stage::Reverb { rir } => convolve_rir(&y, assets.rir(rir)?)?,
            Stage::BandLimit { target_hz } => band_limit(&y, *target_hz)?,
        };
    }
    debug_assert_eq!(y.len(), clean.len());
    Ok((y, clean.clone()))
}
