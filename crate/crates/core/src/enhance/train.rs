use std::sync::Arc;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::branch::softmax_rows;
use super::features::SpectralFeatureExtractor;
use super::model::{EnhancerModel, PredictionMode, PredictorConfig, SerialEnhancerModel, TokenPredictor};
use crate::codec::{tokenize, CodecBundle, Quantizer};
use crate::dsp::AudioBuffer;
use crate::error::{invalid, Error, Result};

/// Raw rows of the neighbouring frames; a zero mask marks a missing
/// neighbour at an utterance edge.
#[derive(Debug, Clone)]
pub struct ContextRows {
    pub prev: Array2<f64>,
    pub next: Array2<f64>,
    pub prev_mask: Array1<f64>,
    pub next_mask: Array1<f64>,
}

/// A block of training frames.
#[derive(Debug, Clone)]
pub struct FrameBatch {
    /// B x raw_dim stacked spectral rows.
    pub raw: Array2<f64>,
    pub context: Option<ContextRows>,
    /// B x N degraded tokens.
    pub degraded: Array2<u32>,
    /// B x N clean target tokens.
    pub target: Array2<u32>,
}

impl FrameBatch {
    pub fn len(&self) -> usize {
        self.raw.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.nrows() == 0
    }
}

/// Every token frame of a paired corpus: raw spectral rows of the degraded
/// audio, degraded tokens and clean target tokens.
#[derive(Debug, Clone)]
pub struct FrameDataset {
    raw: Array2<f64>,
    degraded: Array2<u32>,
    clean: Array2<u32>,
    prev: Vec<Option<usize>>,
    next: Vec<Option<usize>>,
}

impl FrameDataset {
    /// Builds the dataset from `(degraded, clean)` pairs.
    pub fn from_pairs(
        pairs: &[(AudioBuffer, AudioBuffer)],
        codec: &CodecBundle,
        quantizer: &dyn Quantizer,
        extractor: &SpectralFeatureExtractor,
    ) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::InsufficientData("no training pairs".into()));
        }
        let groups = quantizer.groups();
        let mut raws = Vec::new();
        let mut degraded = Vec::new();
        let mut clean = Vec::new();
        let mut prev = Vec::new();
        let mut next = Vec::new();
        for (i, (y, x)) in pairs.iter().enumerate() {
            if y.len() != x.len() || y.sample_rate() != x.sample_rate() {
                return Err(invalid(format!("pair {i}: degraded and clean audio differ in length or rate")));
            }
            let dy = tokenize(y, &codec.model, quantizer)?;
            let dx = tokenize(x, &codec.model, quantizer)?;
            let raw = extractor.raw_features(y)?;
            if raw.nrows() != dy.frames() {
                return Err(Error::Config(format!(
                    "pair {i}: {} feature frames but {} token frames",
                    raw.nrows(),
                    dy.frames()
                )));
            }
            let base = prev.len();
            let f = dy.frames();
            for t in 0..f {
                prev.push((t > 0).then(|| base + t - 1));
                next.push((t + 1 < f).then(|| base + t + 1));
            }
            degraded.extend_from_slice(dy.as_slice());
            clean.extend_from_slice(dx.as_slice());
            raws.push(raw);
        }
        let views: Vec<ArrayView2<f64>> = raws.iter().map(|r| r.view()).collect();
        let raw = ndarray::concatenate(Axis(0), &views).map_err(|e| invalid(e.to_string()))?;
        let frames = raw.nrows();
        Ok(Self {
            raw,
            degraded: Array2::from_shape_vec((frames, groups), degraded).expect("token count"),
            clean: Array2::from_shape_vec((frames, groups), clean).expect("token count"),
            prev,
            next,
        })
    }

    pub fn len(&self) -> usize {
        self.raw.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.nrows() == 0
    }

    pub fn degraded(&self) -> &Array2<u32> {
        &self.degraded
    }

    pub fn clean(&self) -> &Array2<u32> {
        &self.clean
    }

    /// Gathers the given frames into a batch.
    pub fn batch(&self, indices: &[usize], context: bool) -> FrameBatch {
        let raw = self.raw.select(Axis(0), indices);
        let context = context.then(|| {
            let dim = self.raw.ncols();
            let rows = |links: &[Option<usize>]| {
                let mut m = Array2::zeros((indices.len(), dim));
                let mut mask = Array1::zeros(indices.len());
                for (r, &i) in indices.iter().enumerate() {
                    if let Some(j) = links[i] {
                        m.row_mut(r).assign(&self.raw.row(j));
                        mask[r] = 1.0;
                    }
                }
                (m, mask)
            };
            let (prev, prev_mask) = rows(&self.prev);
            let (next, next_mask) = rows(&self.next);
            ContextRows {
                prev,
                next,
                prev_mask,
                next_mask,
            }
        });
        FrameBatch {
            raw,
            context,
            degraded: self.degraded.select(Axis(0), indices),
            target: self.clean.select(Axis(0), indices),
        }
    }
}

fn log_sum_exp(row: ndarray::ArrayView1<f64>) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|z| (z - max).exp()).sum::<f64>().ln()
}

impl TokenPredictor {
    fn arrays(&self) -> Vec<&[f64]> {
        let mut out = vec![
            self.extractor.weights.as_slice().expect("standard layout"),
            self.extractor.bias.as_slice().expect("standard layout"),
        ];
        for b in &self.branches {
            out.push(b.embedding.as_slice().expect("standard layout"));
            if let Some(p) = &b.prior_embedding {
                out.push(p.as_slice().expect("standard layout"));
            }
            let c = &b.classifier;
            out.push(c.w1.as_slice().expect("standard layout"));
            out.push(c.b1.as_slice().expect("standard layout"));
            out.push(c.w2.as_slice().expect("standard layout"));
            out.push(c.b2.as_slice().expect("standard layout"));
        }
        out
    }

    fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![
            self.extractor.weights.as_slice_mut().expect("standard layout"),
            self.extractor.bias.as_slice_mut().expect("standard layout"),
        ];
        for b in &mut self.branches {
            out.push(b.embedding.as_slice_mut().expect("standard layout"));
            if let Some(p) = &mut b.prior_embedding {
                out.push(p.as_slice_mut().expect("standard layout"));
            }
            let c = &mut b.classifier;
            out.push(c.w1.as_slice_mut().expect("standard layout"));
            out.push(c.b1.as_slice_mut().expect("standard layout"));
            out.push(c.w2.as_slice_mut().expect("standard layout"));
            out.push(c.b2.as_slice_mut().expect("standard layout"));
        }
        out
    }

    /// Number of trainable values.
    pub fn parameter_count(&self) -> usize {
        self.arrays().iter().map(|a| a.len()).sum()
    }

    /// All trainable values in a fixed order: extractor weights and bias,
    /// then per branch the embedding, prior embedding (serial), `w1`, `b1`,
    /// `w2`, `b2`.
    pub fn parameters(&self) -> Vec<f64> {
        self.arrays().concat()
    }

    /// Inverse of [`parameters`](Self::parameters).
    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(invalid(format!(
                "{} values for {} parameters",
                values.len(),
                self.parameter_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite parameter"));
        }
        let mut at = 0;
        for a in self.arrays_mut() {
            a.copy_from_slice(&values[at..at + a.len()]);
            at += a.len();
        }
        Ok(())
    }

    fn zeroed(&self) -> Self {
        let mut z = self.clone();
        for a in z.arrays_mut() {
            a.fill(0.0);
        }
        z
    }

    fn check_batch(&self, batch: &FrameBatch) -> Result<()> {
        let b = batch.len();
        let n = self.branches.len();
        if batch.raw.ncols() != self.extractor.config().raw_dim() {
            return Err(invalid(format!(
                "raw rows of width {}, extractor expects {}",
                batch.raw.ncols(),
                self.extractor.config().raw_dim()
            )));
        }
        if batch.degraded.dim() != (b, n) || batch.target.dim() != (b, n) {
            return Err(invalid("token matrices do not match the batch"));
        }
        let m = self.codebook_size() as u32;
        if batch.target.iter().chain(&batch.degraded).any(|&t| t == 0 || t > m) {
            return Err(invalid(format!("token outside 1..={m}")));
        }
        match (&batch.context, self.context()) {
            (Some(c), true) => {
                if c.prev.dim() != batch.raw.dim()
                    || c.next.dim() != batch.raw.dim()
                    || c.prev_mask.len() != b
                    || c.next_mask.len() != b
                {
                    return Err(invalid("context rows do not match the batch"));
                }
            }
            (None, false) => {}
            _ => return Err(invalid("batch context does not match the predictor")),
        }
        Ok(())
    }

    /// Features of the batch frames and, with context, of their neighbours.
    fn batch_features(&self, batch: &FrameBatch) -> (Array2<f64>, Option<(Array2<f64>, Array2<f64>)>, Array2<f64>) {
        let ex = &self.extractor;
        let s_cur = ex.project(batch.raw.view());
        let Some(ctx) = &batch.context else {
            let cond = s_cur.clone();
            return (s_cur, None, cond);
        };
        let sp = ex.project(ctx.prev.view());
        let sn = ex.project(ctx.next.view());
        let c = s_cur.ncols();
        let mut cond = Array2::zeros((batch.len(), 3 * c));
        cond.slice_mut(s![.., ..c]).assign(&(&sp * &ctx.prev_mask.view().insert_axis(Axis(1))));
        cond.slice_mut(s![.., c..2 * c]).assign(&s_cur);
        cond.slice_mut(s![.., 2 * c..]).assign(&(&sn * &ctx.next_mask.view().insert_axis(Axis(1))));
        (s_cur, Some((sp, sn)), cond)
    }

    /// Per-branch cross-entropies averaged over the batch; accumulates the
    /// gradient of their sum into `grad` when given. Serial branches see the
    /// target tokens of the earlier stages (teacher forcing).
    fn run(&self, batch: &FrameBatch, mut grad: Option<&mut TokenPredictor>) -> Result<Vec<f64>> {
        self.check_batch(batch)?;
        let b = batch.len();
        if b == 0 {
            return Err(Error::InsufficientData("empty batch".into()));
        }
        let c = self.channels();
        let serial = self.mode() == PredictionMode::Serial;
        let (s_cur, neighbours, cond) = self.batch_features(batch);
        let mut d_cond = Array2::<f64>::zeros(cond.dim());
        let mut losses = Vec::with_capacity(self.branches.len());
        for (n, br) in self.branches.iter().enumerate() {
            let tokens = batch.degraded.column(n).to_vec();
            let prev = serial.then(|| batch.target.slice(s![.., ..n]));
            let o = br.inputs(&tokens, cond.view(), prev)?;
            let (h, z) = br.classifier.forward(o.view());
            let targets: Vec<usize> = batch.target.column(n).iter().map(|&t| t as usize - 1).collect();
            let loss: f64 = z
                .outer_iter()
                .zip(&targets)
                .map(|(row, &t)| log_sum_exp(row) - row[t])
                .sum::<f64>()
                / b as f64;
            losses.push(loss);
            let Some(g) = grad.as_deref_mut() else {
                continue;
            };
            let mut dz = z;
            softmax_rows(&mut dz);
            for (r, &t) in targets.iter().enumerate() {
                dz[[r, t]] -= 1.0;
            }
            dz /= b as f64;
            let gb = &mut g.branches[n];
            let cl = &br.classifier;
            gb.classifier.w2 += &dz.t().dot(&h);
            gb.classifier.b2 += &dz.sum_axis(Axis(0));
            let mut da = dz.dot(&cl.w2);
            da *= &h.mapv(|v| 1.0 - v * v);
            gb.classifier.w1 += &da.t().dot(&o);
            gb.classifier.b1 += &da.sum_axis(Axis(0));
            let d_o = da.dot(&cl.w1);
            for (r, &t) in tokens.iter().enumerate() {
                let mut row = gb.embedding.row_mut(t as usize - 1);
                row += &d_o.slice(s![r, ..c]);
            }
            let mut at = c;
            if serial {
                at = 2 * c;
                if n > 0 {
                    let table = gb.prior_embedding.as_mut().expect("serial branch");
                    for r in 0..b {
                        let share = &d_o.slice(s![r, c..2 * c]) / n as f64;
                        for k in 0..n {
                            let mut row = table.row_mut(batch.target[[r, k]] as usize - 1);
                            row += &share;
                        }
                    }
                }
            }
            d_cond += &d_o.slice(s![.., at..]);
        }
        if let Some(g) = grad {
            let mut acc = |ds: Array2<f64>, s_act: &Array2<f64>, raw: &Array2<f64>| {
                let dpre = ds * &s_act.mapv(|v| 1.0 - v * v);
                g.extractor.weights += &dpre.t().dot(raw);
                g.extractor.bias += &dpre.sum_axis(Axis(0));
            };
            match (neighbours, &batch.context) {
                (Some((sp, sn)), Some(ctx)) => {
                    acc(d_cond.slice(s![.., c..2 * c]).to_owned(), &s_cur, &batch.raw);
                    let mp = ctx.prev_mask.view().insert_axis(Axis(1));
                    let mn = ctx.next_mask.view().insert_axis(Axis(1));
                    acc(&d_cond.slice(s![.., ..c]) * &mp, &sp, &ctx.prev);
                    acc(&d_cond.slice(s![.., 2 * c..]) * &mn, &sn, &ctx.next);
                }
                _ => acc(d_cond, &s_cur, &batch.raw),
            }
        }
        Ok(losses)
    }

    /// Cross-entropy of each branch, averaged over the batch.
    pub fn branch_losses(&self, batch: &FrameBatch) -> Result<Vec<f64>> {
        self.run(batch, None)
    }

    /// Training loss: the sum over branches of the mean cross-entropy.
    pub fn loss(&self, batch: &FrameBatch) -> Result<f64> {
        Ok(self.branch_losses(batch)?.iter().sum())
    }

    /// Loss and its gradient in [`parameters`](Self::parameters) order.
    pub fn loss_and_gradient(&self, batch: &FrameBatch) -> Result<(f64, Vec<f64>)> {
        let mut g = self.zeroed();
        let loss = self.run(batch, Some(&mut g))?.iter().sum();
        Ok((loss, g.parameters()))
    }

    fn sgd_step(&mut self, batch: &FrameBatch, lr: f64) -> Result<f64> {
        let mut g = self.zeroed();
        let loss: f64 = self.run(batch, Some(&mut g))?.iter().sum();
        if loss.is_finite() {
            for (p, d) in self.arrays_mut().into_iter().zip(g.arrays()) {
                p.iter_mut().zip(d).for_each(|(p, d)| *p -= lr * d);
            }
        }
        Ok(loss)
    }

    /// Predicted clean tokens for the batch with inference semantics: serial
    /// stages see their own earlier predictions.
    pub fn predict_batch(&self, batch: &FrameBatch) -> Result<Array2<u32>> {
        self.check_batch(batch)?;
        let (_, _, cond) = self.batch_features(batch);
        let n_br = self.branches.len();
        let mut chosen = Array2::<u32>::zeros((batch.len(), n_br));
        for (n, br) in self.branches.iter().enumerate() {
            let tokens = batch.degraded.column(n).to_vec();
            let prev = chosen.slice(s![.., ..n]).to_owned();
            let serial = self.mode() == PredictionMode::Serial;
            let picked = br.predict(&tokens, cond.view(), serial.then(|| prev.view()))?;
            chosen.column_mut(n).assign(&Array1::from(picked));
        }
        Ok(chosen)
    }

    /// Mean loss and per-branch accuracy over a whole dataset.
    pub fn evaluate(&self, data: &FrameDataset) -> Result<(f64, Vec<f64>)> {
        const CHUNK: usize = 256;
        let n_br = self.branches.len();
        let mut loss = 0.0;
        let mut hits = vec![0usize; n_br];
        let all: Vec<usize> = (0..data.len()).collect();
        for idx in all.chunks(CHUNK) {
            let batch = data.batch(idx, self.context());
            loss += self.loss(&batch)? * idx.len() as f64;
            let pred = self.predict_batch(&batch)?;
            for (p, t) in pred.outer_iter().zip(batch.target.outer_iter()) {
                for n in 0..n_br {
                    hits[n] += usize::from(p[n] == t[n]);
                }
            }
        }
        let frames = data.len().max(1) as f64;
        Ok((loss / frames, hits.into_iter().map(|h| h as f64 / frames).collect()))
    }
}

/// Training settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnhancerConfig {
    pub predictor: PredictorConfig,
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for EnhancerConfig {
    fn default() -> Self {
        Self {
            predictor: PredictorConfig::default(),
            epochs: 40,
            lr: 1e-2,
            batch: 32,
            seed: 0,
        }
    }
}

/// Training history.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Full-data loss after each epoch.
    pub epoch_losses: Vec<f64>,
    /// Per-branch token accuracy on the training data after each epoch.
    pub branch_accuracy: Vec<Vec<f64>>,
    pub epochs: usize,
    pub seed: u64,
    pub frames: usize,
    /// Codec checksum, identical before and after training.
    pub codec_checksum: String,
}

impl TrainReport {
    /// Per-branch accuracy after the last epoch (empty without epochs).
    pub fn final_accuracy(&self) -> &[f64] {
        self.branch_accuracy.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Shuffle stream kept apart from the initialisation stream.
const SHUFFLE_SALT: u64 = 0x5348_5546_464c_4531;

/// Mini-batch gradient descent on `data` starting from `predictor`.
pub fn fit_predictor(
    mut predictor: TokenPredictor,
    data: &FrameDataset,
    cfg: &EnhancerConfig,
) -> Result<(TokenPredictor, Vec<f64>, Vec<Vec<f64>>)> {
    if cfg.batch == 0 || !(cfg.lr.is_finite() && cfg.lr > 0.0) {
        return Err(Error::Config(format!(
            "batch {} and learning rate {} must be positive",
            cfg.batch, cfg.lr
        )));
    }
    if data.is_empty() {
        return Err(Error::InsufficientData("no training frames".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_SALT);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut accuracy = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        for idx in order.chunks(cfg.batch) {
            let batch = data.batch(idx, predictor.context());
            let l = predictor.sgd_step(&batch, cfg.lr)?;
            if !l.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    reason: format!("mini-batch loss {l}"),
                });
            }
        }
        let (l, acc) = predictor.evaluate(data)?;
        if !l.is_finite() {
            return Err(Error::Divergence {
                epoch,
                reason: format!("epoch loss {l}"),
            });
        }
        losses.push(l);
        accuracy.push(acc);
    }
    Ok((predictor, losses, accuracy))
}

fn train_mode(
    pairs: &[(AudioBuffer, AudioBuffer)],
    codec: &CodecBundle,
    mode: PredictionMode,
    cfg: &EnhancerConfig,
) -> Result<(TokenPredictor, TrainReport)> {
    if pairs.is_empty() {
        return Err(Error::InsufficientData("no training pairs".into()));
    }
    let quantizer: &dyn Quantizer = match mode {
        PredictionMode::Parallel => &codec.gvq,
        PredictionMode::Serial => codec
            .rvq
            .as_ref()
            .ok_or_else(|| Error::Config("serial training needs a residual quantizer".into()))?,
    };
    let checksum = codec.checksum();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = TokenPredictor::random(
        &cfg.predictor,
        mode,
        quantizer.groups(),
        quantizer.codebook_size(),
        codec.model.sample_rate(),
        &mut rng,
    )?;
    let data = FrameDataset::from_pairs(pairs, codec, quantizer, init.extractor())?;
    let (predictor, epoch_losses, branch_accuracy) = fit_predictor(init, &data, cfg)?;
    let after = codec.checksum();
    if after != checksum {
        return Err(Error::Degenerate("codec parameters changed during training".into()));
    }
    let report = TrainReport {
        epoch_losses,
        branch_accuracy,
        epochs: cfg.epochs,
        seed: cfg.seed,
        frames: data.len(),
        codec_checksum: checksum,
    };
    Ok((predictor, report))
}

/// Trains the parallel enhancer on `(degraded, clean)` pairs against the
/// frozen codec's GVQ tokens.
pub fn train_enhancer(
    pairs: &[(AudioBuffer, AudioBuffer)],
    codec: Arc<CodecBundle>,
    cfg: &EnhancerConfig,
) -> Result<(EnhancerModel, TrainReport)> {
    let (p, report) = train_mode(pairs, &codec, PredictionMode::Parallel, cfg)?;
    Ok((EnhancerModel::new(p, codec)?, report))
}

/// Trains the serial baseline against the frozen codec's RVQ tokens.
pub fn train_serial_enhancer(
    pairs: &[(AudioBuffer, AudioBuffer)],
    codec: Arc<CodecBundle>,
    cfg: &EnhancerConfig,
) -> Result<(SerialEnhancerModel, TrainReport)> {
    let (p, report) = train_mode(pairs, &codec, PredictionMode::Serial, cfg)?;
    Ok((SerialEnhancerModel::new(p, codec)?, report))
}
