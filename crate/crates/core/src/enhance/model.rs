use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::branch::{MlpClassifier, PredictionBranch};
use super::features::{FeatureConfig, SpectralFeatureExtractor, FEATURE_CHUNK};
use crate::codec::{CodecBundle, Latents, Quantizer, TokenSequence};
use crate::dsp::AudioBuffer;
use crate::error::{invalid, Error, Result};

/// How branches see each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionMode {
    /// Branches are independent and run concurrently.
    Parallel,
    /// Stage `n` also sees the clean tokens predicted by stages `1..n`.
    Serial,
}

/// Architecture of a [`TokenPredictor`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorConfig {
    pub features: FeatureConfig,
    /// Feature and embedding width (`C`).
    pub channels: usize,
    /// Hidden width of each branch classifier (`H`).
    pub hidden: usize,
    /// Feed the features of the neighbouring frames as well.
    pub context: bool,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            channels: 64,
            hidden: 128,
            context: false,
        }
    }
}

/// Feature extractor plus one prediction branch per token group or stage.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenPredictor {
    pub(crate) extractor: SpectralFeatureExtractor,
    pub(crate) branches: Vec<PredictionBranch>,
    mode: PredictionMode,
    context: bool,
}

fn cond_width(channels: usize, context: bool) -> usize {
    if context {
        3 * channels
    } else {
        channels
    }
}

impl TokenPredictor {
    pub fn new(
        extractor: SpectralFeatureExtractor,
        branches: Vec<PredictionBranch>,
        mode: PredictionMode,
        context: bool,
    ) -> Result<Self> {
        let Some(first) = branches.first() else {
            return Err(Error::Config("predictor needs at least one branch".into()));
        };
        let c = extractor.channels();
        let m = first.codebook_size();
        for (n, b) in branches.iter().enumerate() {
            if b.index != n {
                return Err(invalid(format!("branch at position {n} has index {}", b.index)));
            }
            if b.codebook_size() != m || b.channels() != c {
                return Err(Error::Config(format!(
                    "branch {n} has M={} C={}, expected M={m} C={c}",
                    b.codebook_size(),
                    b.channels()
                )));
            }
            if b.prior_embedding.is_some() != (mode == PredictionMode::Serial) {
                return Err(Error::Config(format!("branch {n} does not match {mode:?} mode")));
            }
            if b.cond_dim() != cond_width(c, context) {
                return Err(Error::Config(format!(
                    "branch {n} expects {} conditioning values, extractor provides {}",
                    b.cond_dim(),
                    cond_width(c, context)
                )));
            }
        }
        Ok(Self {
            extractor,
            branches,
            mode,
            context,
        })
    }

    /// Randomly initialised predictor: embeddings from a standard normal,
    /// weights with variance `1 / fan_in`, zero biases.
    pub fn random(
        cfg: &PredictorConfig,
        mode: PredictionMode,
        branches: usize,
        codebook_size: usize,
        sample_rate: u32,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if cfg.channels == 0 || cfg.hidden == 0 || branches == 0 || codebook_size == 0 {
            return Err(Error::Config("C, H, N and M must all be positive".into()));
        }
        let c = cfg.channels;
        let extractor = SpectralFeatureExtractor::random(cfg.features, sample_rate, c, rng)?;
        let serial = mode == PredictionMode::Serial;
        let input = c + if serial { c } else { 0 } + cond_width(c, cfg.context);
        let table = |rng: &mut _| {
            Array2::from_shape_simple_fn((codebook_size, c), || Rng::sample::<f64, _>(rng, StandardNormal))
        };
        let mut list = Vec::with_capacity(branches);
        for n in 0..branches {
            let embedding = table(rng);
            let prior = serial.then(|| table(rng));
            let classifier = MlpClassifier::random(input, cfg.hidden, codebook_size, rng);
            list.push(PredictionBranch::new(n, embedding, prior, classifier)?);
        }
        Self::new(extractor, list, mode, cfg.context)
    }

    pub fn extractor(&self) -> &SpectralFeatureExtractor {
        &self.extractor
    }

    pub fn branches(&self) -> &[PredictionBranch] {
        &self.branches
    }

    pub fn mode(&self) -> PredictionMode {
        self.mode
    }

    pub fn context(&self) -> bool {
        self.context
    }

    pub fn channels(&self) -> usize {
        self.extractor.channels()
    }

    pub fn hidden(&self) -> usize {
        self.branches[0].classifier.hidden_dim()
    }

    pub fn codebook_size(&self) -> usize {
        self.branches[0].codebook_size()
    }

    /// Per-frame conditioning rows from the feature matrix. With context the
    /// row is `[s(t-1), s(t), s(t+1)]`, zero beyond the signal edges.
    pub fn conditioning(&self, features: &Array2<f64>) -> Array2<f64> {
        if !self.context {
            return features.clone();
        }
        let (f, c) = features.dim();
        let mut out = Array2::zeros((f, 3 * c));
        if f > 1 {
            out.slice_mut(s![1.., ..c]).assign(&features.slice(s![..f - 1, ..]));
            out.slice_mut(s![..f - 1, 2 * c..]).assign(&features.slice(s![1.., ..]));
        }
        out.slice_mut(s![.., c..2 * c]).assign(features);
        out
    }

    /// Classifier input of `stage` for one frame. `previous` are the clean
    /// tokens already chosen by the earlier stages (ignored in parallel mode).
    pub fn stage_input(&self, stage: usize, token: u32, cond: ArrayView1<f64>, previous: &[u32]) -> Result<Array1<f64>> {
        let b = self
            .branches
            .get(stage)
            .ok_or_else(|| invalid(format!("no stage {stage}")))?;
        b.input(token, cond, previous)
    }

    fn check_tokens(&self, degraded: &TokenSequence, cond: &Array2<f64>) -> Result<()> {
        if degraded.groups() != self.branches.len() || degraded.codebook_size() != self.codebook_size() {
            return Err(Error::Config(format!(
                "token stream N={} M={} does not fit a predictor with N={} M={}",
                degraded.groups(),
                degraded.codebook_size(),
                self.branches.len(),
                self.codebook_size()
            )));
        }
        if degraded.frames() != cond.nrows() {
            return Err(invalid(format!(
                "{} token frames but {} feature frames",
                degraded.frames(),
                cond.nrows()
            )));
        }
        Ok(())
    }

    /// Every branch over every frame; work is split into (branch, chunk)
    /// jobs of fixed size and joined by index, so the result does not depend
    /// on the pool.
    pub(crate) fn predict_parallel(
        &self,
        degraded: &TokenSequence,
        cond: &Array2<f64>,
        pool: Option<&rayon::ThreadPool>,
    ) -> Result<TokenSequence> {
        if self.mode != PredictionMode::Parallel {
            return Err(Error::Config("serial predictor used in the parallel pipeline".into()));
        }
        self.check_tokens(degraded, cond)?;
        let frames = degraded.frames();
        let groups = self.branches.len();
        let columns: Vec<Vec<u32>> = (0..groups).map(|n| degraded.group(n)).collect();
        let chunks = frames.div_ceil(FEATURE_CHUNK);
        let job = |j: usize| -> Result<Vec<u32>> {
            let (n, k) = (j / chunks, j % chunks);
            let lo = k * FEATURE_CHUNK;
            let hi = (lo + FEATURE_CHUNK).min(frames);
            self.branches[n].predict(&columns[n][lo..hi], cond.slice(s![lo..hi, ..]), None)
        };
        let results: Vec<Result<Vec<u32>>> = match pool {
            Some(p) => p.install(|| (0..groups * chunks).into_par_iter().map(job).collect()),
            None => (0..groups * chunks).map(job).collect(),
        };
        let mut out = vec![0u32; frames * groups];
        for (j, r) in results.into_iter().enumerate() {
            let (n, k) = (j / chunks, j % chunks);
            for (i, t) in r?.into_iter().enumerate() {
                out[(k * FEATURE_CHUNK + i) * groups + n] = t;
            }
        }
        TokenSequence::new(out, groups, self.codebook_size(), degraded.signal_len())
    }

    /// Stages one after another, each seeing the earlier stages' output.
    pub(crate) fn predict_serial(&self, degraded: &TokenSequence, cond: &Array2<f64>) -> Result<TokenSequence> {
        if self.mode != PredictionMode::Serial {
            return Err(Error::Config("parallel predictor used in the serial pipeline".into()));
        }
        self.check_tokens(degraded, cond)?;
        let frames = degraded.frames();
        let stages = self.branches.len();
        let mut chosen = Array2::<u32>::zeros((frames, stages));
        for (n, branch) in self.branches.iter().enumerate() {
            let col = degraded.group(n);
            let prev = chosen.slice(s![.., ..n]).to_owned();
            let picked = branch.predict(&col, cond.view(), Some(prev.view()))?;
            chosen.column_mut(n).assign(&ArrayView1::from(&picked[..]));
        }
        TokenSequence::new(
            chosen.into_raw_vec_and_offset().0,
            stages,
            self.codebook_size(),
            degraded.signal_len(),
        )
    }
}

fn check_codec_fit(p: &TokenPredictor, codec: &CodecBundle, q: &dyn Quantizer) -> Result<()> {
    if p.branches.len() != q.groups() || p.codebook_size() != q.codebook_size() {
        return Err(Error::Config(format!(
            "predictor has N={} M={} but the codec quantizer has N={} M={}",
            p.branches.len(),
            p.codebook_size(),
            q.groups(),
            q.codebook_size()
        )));
    }
    if p.extractor.config().frame_samples() != codec.model.frame_samples() {
        return Err(Error::Config(format!(
            "feature frames of {} samples but codec frames of {}",
            p.extractor.config().frame_samples(),
            codec.model.frame_samples()
        )));
    }
    if p.extractor.sample_rate() != codec.model.sample_rate() {
        return Err(Error::Config("extractor and codec sample rates differ".into()));
    }
    Ok(())
}

fn build_pool(workers: usize) -> Result<Option<rayon::ThreadPool>> {
    match workers {
        0 => Err(Error::Config("workers must be >= 1".into())),
        1 => Ok(None),
        w => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map(Some)
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}"))),
    }
}

/// Feature extractor and parallel branches over a frozen GVQ codec.
#[derive(Debug, Clone, PartialEq)]
pub struct EnhancerModel {
    predictor: TokenPredictor,
    codec: Arc<CodecBundle>,
}

impl EnhancerModel {
    pub fn new(predictor: TokenPredictor, codec: Arc<CodecBundle>) -> Result<Self> {
        if predictor.mode != PredictionMode::Parallel {
            return Err(Error::Config("enhancer model needs a parallel predictor".into()));
        }
        check_codec_fit(&predictor, &codec, &codec.gvq)?;
        Ok(Self { predictor, codec })
    }

    pub fn predictor(&self) -> &TokenPredictor {
        &self.predictor
    }

    pub fn codec(&self) -> &Arc<CodecBundle> {
        &self.codec
    }

    /// GVQ tokens of `y`, quantizing (group, chunk) jobs on the pool.
    fn degraded_tokens(&self, y: &AudioBuffer, pool: Option<&rayon::ThreadPool>) -> Result<TokenSequence> {
        let latents: Latents = self.codec.model.encode(y)?;
        let gvq = &self.codec.gvq;
        let (frames, groups) = (latents.len(), gvq.groups());
        let d = gvq.group_dim();
        let chunks = frames.div_ceil(FEATURE_CHUNK);
        let job = |j: usize| -> Vec<u32> {
            let (n, k) = (j / chunks, j % chunks);
            let lo = k * FEATURE_CHUNK;
            let hi = (lo + FEATURE_CHUNK).min(frames);
            latents
                .frames
                .slice(s![lo..hi, n * d..(n + 1) * d])
                .axis_iter(Axis(0))
                .map(|e| gvq.quantize_group(n, e))
                .collect()
        };
        let results: Vec<Vec<u32>> = match pool {
            Some(p) => p.install(|| (0..groups * chunks).into_par_iter().map(job).collect()),
            None => (0..groups * chunks).map(job).collect(),
        };
        let mut out = vec![0u32; frames * groups];
        for (j, r) in results.into_iter().enumerate() {
            let (n, k) = (j / chunks, j % chunks);
            for (i, t) in r.into_iter().enumerate() {
                out[(k * FEATURE_CHUNK + i) * groups + n] = t;
            }
        }
        TokenSequence::new(out, groups, gvq.codebook_size(), latents.signal_len)
    }

    /// Degraded and predicted clean tokens for `y`.
    pub fn enhance_tokens(&self, y: &AudioBuffer, workers: usize) -> Result<(TokenSequence, TokenSequence)> {
        let pool = build_pool(workers)?;
        let degraded = self.degraded_tokens(y, pool.as_ref())?;
        let features = self.predictor.extractor.extract_in(y, pool.as_ref())?;
        let cond = self.predictor.conditioning(&features);
        let clean = self.predictor.predict_parallel(&degraded, &cond, pool.as_ref())?;
        Ok((degraded, clean))
    }

    pub fn decode(&self, tokens: &TokenSequence) -> Result<AudioBuffer> {
        crate::codec::detokenize(tokens, &self.codec.model, &self.codec.gvq)
    }
}

/// Feature extractor and serially dependent branches over a frozen RVQ
/// codec.
#[derive(Debug, Clone, PartialEq)]
pub struct SerialEnhancerModel {
    predictor: TokenPredictor,
    codec: Arc<CodecBundle>,
}

impl SerialEnhancerModel {
    pub fn new(predictor: TokenPredictor, codec: Arc<CodecBundle>) -> Result<Self> {
        if predictor.mode != PredictionMode::Serial {
            return Err(Error::Config("serial enhancer model needs a serial predictor".into()));
        }
        let rvq = codec
            .rvq
            .as_ref()
            .ok_or_else(|| Error::Config("codec has no residual quantizer".into()))?;
        check_codec_fit(&predictor, &codec, rvq)?;
        Ok(Self { predictor, codec })
    }

    pub fn predictor(&self) -> &TokenPredictor {
        &self.predictor
    }

    pub fn codec(&self) -> &Arc<CodecBundle> {
        &self.codec
    }

    fn rvq(&self) -> &crate::codec::RvqQuantizer {
        self.codec.rvq.as_ref().expect("checked at construction")
    }

    pub fn enhance_tokens(&self, y: &AudioBuffer) -> Result<(TokenSequence, TokenSequence)> {
        let degraded = crate::codec::tokenize(y, &self.codec.model, self.rvq())?;
        let features = self.predictor.extractor.extract(y)?;
        let cond = self.predictor.conditioning(&features);
        let clean = self.predictor.predict_serial(&degraded, &cond)?;
        Ok((degraded, clean))
    }

    pub fn decode(&self, tokens: &TokenSequence) -> Result<AudioBuffer> {
        crate::codec::detokenize(tokens, &self.codec.model, self.rvq())
    }
}

/// Parallel enhancement: GVQ tokens of `y`, conditioning features, all
/// branches (on `workers` threads when more than one), argmax, decoding.
pub fn enhance_parallel(y: &AudioBuffer, model: &EnhancerModel, workers: usize) -> Result<AudioBuffer> {
    let (_, clean) = model.enhance_tokens(y, workers)?;
    model.decode(&clean)
}

/// Serial enhancement over RVQ tokens; stage `n` waits for stages `1..n`.
pub fn enhance_serial(y: &AudioBuffer, model: &SerialEnhancerModel) -> Result<AudioBuffer> {
    let (_, clean) = model.enhance_tokens(y)?;
    model.decode(&clean)
}
