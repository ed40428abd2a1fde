//! Group-vector-quantized speech tokens and parallel clean-token prediction.
//!
//! The crate is organised bottom-up:
//!
//! * [`dsp`]: MDCT/IMDCT, STFT amplitude/phase analysis and resampling.
//! * [`codec`]: a linear analysis/synthesis codec with group (GVQ) and
//!   residual (RVQ) vector quantizers and their binary container.
//! * [`enhance`]: spectral feature extraction, the per-group prediction
//!   branches, the parallel and serial enhancement pipelines and training.
//! * [`degrade`]: noise, reverberation and band-limiting simulation plus
//!   synthetic assets.
//! * [`metrics`]: log-spectral distance, SNR, token accuracy and
//!   real-time-factor benchmarking.

pub mod codec;
pub mod degrade;
pub mod dsp;
pub mod enhance;
pub mod error;
pub mod metrics;

pub use error::{Error, Result};
