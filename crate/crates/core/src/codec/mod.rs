//! Linear stand-in codec with group and residual vector quantization.
//!
//! Audio is cut into token frames of `T` samples. Each frame is analysed by
//! `T / W` MDCT frames, projected to a `K`-dimensional latent by
//! [`LinearCodecModel`], and quantized either by a [`GvqQuantizer`]
//! (independent tokens, one per group) or an [`RvqQuantizer`] (serially
//! dependent tokens, one per stage). Tokens are 1-based everywhere in the
//! public interface.

mod container;
mod gvq;
mod linear;
mod rvq;
mod tokens;
mod vq;

use ndarray::Array2;
use sha2::{Digest, Sha256};

pub use container::{CODEC_MAGIC, CODEC_VERSION};
pub(crate) use container::{ByteReader, ByteWriter};
pub use gvq::{gvq_dequantize, gvq_loss, gvq_quantize, train_codebooks_gvq, GvqQuantizer, GvqTraining};
pub use linear::{Latents, LinearCodecModel, MIN_FIT_SECONDS};
pub use rvq::{rvq_quantize, train_codebooks_rvq, RvqQuantizer};
pub use tokens::TokenSequence;
pub use vq::{quantization_mse, train_codebook, vq_quantize, Codebook, CodebookTraining, TrainedCodebook};

use crate::dsp::AudioBuffer;
use crate::error::{invalid, Result};

/// Default number of groups (`N`).
pub const DEFAULT_GROUPS: usize = 4;
/// Default codebook size (`M`).
pub const DEFAULT_CODEBOOK_SIZE: usize = 256;
/// Default latent dimension (`K`).
pub const DEFAULT_LATENT_DIM: usize = 32;
/// Default samples per token frame (`T`).
pub const DEFAULT_FRAME_SAMPLES: usize = 320;

/// Common interface of the group and residual quantizers.
pub trait Quantizer: Send + Sync {
    /// Tokens per frame (`N`).
    fn groups(&self) -> usize;
    /// Entries per codebook (`M`).
    fn codebook_size(&self) -> usize;
    /// Latent dimension (`K`).
    fn latent_dim(&self) -> usize;
    /// 1-based tokens and the quantized latent.
    fn quantize(&self, e: &[f64]) -> Result<(Vec<u32>, Vec<f64>)>;
    fn dequantize(&self, tokens: &[u32]) -> Result<Vec<f64>>;
}

fn check_compat(model: &LinearCodecModel, q: &dyn Quantizer) -> Result<()> {
    if model.latent_dim() != q.latent_dim() {
        return Err(crate::Error::Config(format!(
            "codec K={} but quantizer K={}",
            model.latent_dim(),
            q.latent_dim()
        )));
    }
    Ok(())
}

/// Quantizes every row of `latents`.
pub fn quantize_latents(latents: &Latents, q: &dyn Quantizer) -> Result<TokenSequence> {
    let mut tokens = Vec::with_capacity(latents.len() * q.groups());
    for row in latents.frames.outer_iter() {
        let e = row.to_vec();
        tokens.extend(q.quantize(&e)?.0);
    }
    TokenSequence::new(tokens, q.groups(), q.codebook_size(), latents.signal_len)
}

/// Looks every token frame up and stacks the quantized latents.
pub fn dequantize_tokens(tokens: &TokenSequence, q: &dyn Quantizer) -> Result<Latents> {
    if tokens.groups() != q.groups() {
        return Err(invalid(format!(
            "token sequence has {} groups, quantizer {}",
            tokens.groups(),
            q.groups()
        )));
    }
    let k = q.latent_dim();
    let mut frames = Array2::zeros((tokens.frames(), k));
    for (t, frame) in tokens.iter_frames().enumerate() {
        let v = q.dequantize(frame)?;
        frames.row_mut(t).assign(&ndarray::ArrayView1::from(&v[..]));
    }
    Ok(Latents {
        frames,
        signal_len: tokens.signal_len(),
    })
}

/// Encoder followed by per-frame quantization.
pub fn tokenize(audio: &AudioBuffer, model: &LinearCodecModel, q: &dyn Quantizer) -> Result<TokenSequence> {
    check_compat(model, q)?;
    quantize_latents(&model.encode(audio)?, q)
}

/// Dequantization followed by the decoder; output length equals the
/// tokenized audio's length.
pub fn detokenize(tokens: &TokenSequence, model: &LinearCodecModel, q: &dyn Quantizer) -> Result<AudioBuffer> {
    check_compat(model, q)?;
    model.decode(&dequantize_tokens(tokens, q)?)
}

/// A frozen codec: linear model, group quantizer and optional residual
/// quantizer for the serial baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct CodecBundle {
    pub model: LinearCodecModel,
    pub gvq: GvqQuantizer,
    pub rvq: Option<RvqQuantizer>,
}

impl CodecBundle {
    pub fn new(model: LinearCodecModel, gvq: GvqQuantizer, rvq: Option<RvqQuantizer>) -> Result<Self> {
        check_compat(&model, &gvq)?;
        if let Some(r) = &rvq {
            check_compat(&model, r)?;
        }
        Ok(Self { model, gvq, rvq })
    }

    /// SHA-256 of the serialized bundle, hex encoded.
    pub fn checksum(&self) -> String {
        hex_digest(&self.to_bytes())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
