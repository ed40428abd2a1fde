//! Enhancer section appended to a codec container.
//!
//! ```text
//! <GVQC codec container>
//! "PGSE"  u32 version  u32 C  u32 H  u32 N  u32 M  u8 mode  u8 context
//! u32 frame_length  u32 frame_shift  u32 fft_size  u32 R  u32 raw_dim
//! u32 sample_rate
//! f64[C*raw_dim] extractor weights   f64[C] extractor bias
//! per branch:
//!   f64[M*C] embedding   f64[M*C] prior embedding (serial only)
//!   f64[H*I] w1  f64[H] b1  f64[M*H] w2  f64[M] b2
//! ```
//!
//! `I` is `C` for the token embedding, plus `C` in serial mode, plus `C`
//! (or `3C` with context) for the features. All values little-endian.

use std::sync::Arc;

use ndarray::{Array1, Array2};

use super::branch::{MlpClassifier, PredictionBranch};
use super::features::{FeatureConfig, SpectralFeatureExtractor};
use super::model::{EnhancerModel, PredictionMode, SerialEnhancerModel, TokenPredictor};
use crate::codec::{ByteReader, ByteWriter, CodecBundle};
use crate::error::{Error, Result};

pub const ENHANCER_MAGIC: &[u8; 4] = b"PGSE";
pub const ENHANCER_VERSION: u32 = 1;

fn vector(r: &mut ByteReader<'_>, len: usize) -> Result<Array1<f64>> {
    Ok(r.matrix(1, len)?.into_shape_with_order(len).expect("single row"))
}

impl TokenPredictor {
    pub(crate) fn write_to(&self, w: &mut ByteWriter) {
        let ex = self.extractor();
        let cfg = ex.config();
        w.bytes(ENHANCER_MAGIC);
        w.u32(ENHANCER_VERSION as usize);
        w.u32(self.channels());
        w.u32(self.hidden());
        w.u32(self.branches().len());
        w.u32(self.codebook_size());
        w.u8(match self.mode() {
            PredictionMode::Parallel => 0,
            PredictionMode::Serial => 1,
        });
        w.u8(u8::from(self.context()));
        for v in [cfg.frame_length, cfg.frame_shift, cfg.fft_size, cfg.downsample, cfg.raw_dim()] {
            w.u32(v);
        }
        w.u32(ex.sample_rate() as usize);
        w.matrix(ex.weights());
        w.f64s(ex.bias());
        for b in self.branches() {
            w.matrix(&b.embedding);
            if let Some(p) = &b.prior_embedding {
                w.matrix(p);
            }
            w.matrix(&b.classifier.w1);
            w.f64s(&b.classifier.b1);
            w.matrix(&b.classifier.w2);
            w.f64s(&b.classifier.b2);
        }
    }

    pub(crate) fn read_from(r: &mut ByteReader<'_>) -> Result<Self> {
        r.magic(ENHANCER_MAGIC)?;
        let version = r.u32()?;
        if version != ENHANCER_VERSION as usize {
            return Err(Error::Format(format!("unsupported enhancer version {version}")));
        }
        let c = r.u32()?;
        let h = r.u32()?;
        let n = r.u32()?;
        let m = r.u32()?;
        let mode = match r.u8()? {
            0 => PredictionMode::Parallel,
            1 => PredictionMode::Serial,
            v => return Err(Error::Format(format!("unknown prediction mode {v}"))),
        };
        let context = match r.u8()? {
            0 => false,
            1 => true,
            v => return Err(Error::Format(format!("bad context flag {v}"))),
        };
        let cfg = FeatureConfig {
            frame_length: r.u32()?,
            frame_shift: r.u32()?,
            fft_size: r.u32()?,
            downsample: r.u32()?,
        };
        let raw_dim = r.u32()?;
        if raw_dim != cfg.raw_dim() {
            return Err(Error::Format(format!(
                "raw width {raw_dim} disagrees with the feature settings ({})",
                cfg.raw_dim()
            )));
        }
        let sample_rate = u32::try_from(r.u32()?).expect("read from u32");
        if [c, h, n, m].contains(&0) {
            return Err(Error::Format("zero dimension in enhancer header".into()));
        }
        let weights = r.matrix(c, raw_dim)?;
        let bias = vector(r, c)?;
        let extractor = SpectralFeatureExtractor::new(cfg, sample_rate, weights, bias).map_err(to_format)?;
        let serial = mode == PredictionMode::Serial;
        let input = c + if serial { c } else { 0 } + if context { 3 * c } else { c };
        let mut branches = Vec::with_capacity(n);
        for idx in 0..n {
            let embedding = r.matrix(m, c)?;
            let prior = if serial { Some(r.matrix(m, c)?) } else { None };
            let w1: Array2<f64> = r.matrix(h, input)?;
            let b1 = vector(r, h)?;
            let w2 = r.matrix(m, h)?;
            let b2 = vector(r, m)?;
            let classifier = MlpClassifier::new(w1, b1, w2, b2).map_err(to_format)?;
            branches.push(PredictionBranch::new(idx, embedding, prior, classifier).map_err(to_format)?);
        }
        TokenPredictor::new(extractor, branches, mode, context).map_err(to_format)
    }
}

fn to_format(e: Error) -> Error {
    Error::Format(e.to_string())
}

fn write_pair(codec: &CodecBundle, p: &TokenPredictor) -> Vec<u8> {
    let mut w = ByteWriter::default();
    codec.write_to(&mut w);
    p.write_to(&mut w);
    w.buf
}

fn read_pair(data: &[u8]) -> Result<(Arc<CodecBundle>, TokenPredictor)> {
    let mut r = ByteReader::new(data);
    let codec = CodecBundle::read_from(&mut r)?;
    let p = TokenPredictor::read_from(&mut r)?;
    if !r.remaining().is_empty() {
        return Err(Error::Format(format!(
            "{} trailing bytes after offset {}",
            r.remaining().len(),
            r.position()
        )));
    }
    Ok((Arc::new(codec), p))
}

impl EnhancerModel {
    /// Codec container followed by the enhancer section.
    pub fn to_bytes(&self) -> Vec<u8> {
        write_pair(self.codec(), self.predictor())
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let (codec, p) = read_pair(data)?;
        Self::new(p, codec)
    }
}

impl SerialEnhancerModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        write_pair(self.codec(), self.predictor())
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let (codec, p) = read_pair(data)?;
        Self::new(p, codec)
    }
}

/// Either kind of enhancer, as stored in a container.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyEnhancer {
    Parallel(EnhancerModel),
    Serial(SerialEnhancerModel),
}

impl AnyEnhancer {
    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let (codec, p) = read_pair(data)?;
        match p.mode() {
            PredictionMode::Parallel => Ok(Self::Parallel(EnhancerModel::new(p, codec)?)),
            PredictionMode::Serial => Ok(Self::Serial(SerialEnhancerModel::new(p, codec)?)),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Self::Parallel(m) => m.to_bytes(),
            Self::Serial(m) => m.to_bytes(),
        }
    }

    pub fn predictor(&self) -> &TokenPredictor {
        match self {
            Self::Parallel(m) => m.predictor(),
            Self::Serial(m) => m.predictor(),
        }
    }

    pub fn codec(&self) -> &Arc<CodecBundle> {
        match self {
            Self::Parallel(m) => m.codec(),
            Self::Serial(m) => m.codec(),
        }
    }
}
