//! Deterministic signal-processing primitives.
//!
//! All arithmetic is double precision and every function is pure, so the
//! routines here can be called from any number of threads.

mod audio;
mod mdct;
mod resample;
mod stft;
pub(crate) mod window;

pub use audio::AudioBuffer;
pub use mdct::{mdct_forward, mdct_inverse, Mdct, MdctSpectrum, WindowId};
pub use resample::resample;
pub use stft::{stft_amp_phase, Stft, StftFrames};

/// Default MDCT half-window (hop) in samples.
pub const DEFAULT_HALF_WINDOW: usize = 40;
/// Default STFT frame length used by the spectral feature extractor.
pub const DEFAULT_FRAME_LENGTH: usize = 320;
/// Default STFT frame shift.
pub const DEFAULT_FRAME_SHIFT: usize = 40;
/// Default FFT size.
pub const DEFAULT_FFT_SIZE: usize = 1024;
