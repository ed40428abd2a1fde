//! Degradation simulation for building (degraded, clean) pairs.
//!
//! Additive noise at an exact SNR, reverberation by RIR convolution and
//! band-limiting by resampling, composed by a [`DegradationSpec`]. Synthetic
//! noise, room responses and speech-like utterances stand in for recorded
//! corpora; user recordings can be added to [`Assets`].

mod assets;
mod mixing;
mod spec;

pub use assets::{
    babble_noise, pink_noise, speech_like, synth_assets, synth_assets_with, synth_rir, white_noise, AssetConfig, Assets,
};
pub use mixing::{add_noise, band_limit, convolve_rir, noise_segment, Rir, TEST_SNR_GRID, TRAIN_SNR_GRID};
pub use spec::{apply_spec, DegradationSpec, Stage};
