use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};

/// Maps a fused input vector to unnormalised scores over the codebook.
///
/// Implemented by [`MlpClassifier`]; other backbones can plug in here.
pub trait Classifier: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    /// Logits for each input row.
    fn logits(&self, inputs: ArrayView2<f64>) -> Array2<f64>;
}

/// One hidden `tanh` layer followed by a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpClassifier {
    /// H x I
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// M x H
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl MlpClassifier {
    pub fn new(w1: Array2<f64>, b1: Array1<f64>, w2: Array2<f64>, b2: Array1<f64>) -> Result<Self> {
        if w1.nrows() != b1.len() || w2.ncols() != w1.nrows() || w2.nrows() != b2.len() {
            return Err(invalid(format!(
                "classifier shapes w1 {:?}, b1 {}, w2 {:?}, b2 {} are inconsistent",
                w1.dim(),
                b1.len(),
                w2.dim(),
                b2.len()
            )));
        }
        let all = w1.iter().chain(&b1).chain(&w2).chain(&b2);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite classifier parameter"));
        }
        Ok(Self {
            w1: super::standard(w1),
            b1: super::standard(b1),
            w2: super::standard(w2),
            b2: super::standard(b2),
        })
    }

    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            w1: Array2::zeros((hidden, input)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((output, hidden)),
            b2: Array1::zeros(output),
        }
    }

    /// Gaussian weights with variance `1 / fan_in`, zero biases.
    pub fn random(input: usize, hidden: usize, output: usize, rng: &mut impl Rng) -> Self {
        let s1 = 1.0 / (input as f64).sqrt();
        let s2 = 1.0 / (hidden as f64).sqrt();
        let w1 = Array2::from_shape_simple_fn((hidden, input), || s1 * rng.sample::<f64, _>(StandardNormal));
        let w2 = Array2::from_shape_simple_fn((output, hidden), || s2 * rng.sample::<f64, _>(StandardNormal));
        Self {
            w1,
            b1: Array1::zeros(hidden),
            w2,
            b2: Array1::zeros(output),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.nrows()
    }

    /// Hidden activations and logits.
    pub(crate) fn forward(&self, inputs: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
        let mut h = inputs.dot(&self.w1.t());
        h += &self.b1;
        h.mapv_inplace(f64::tanh);
        let mut z = h.dot(&self.w2.t());
        z += &self.b2;
        (h, z)
    }
}

impl Classifier for MlpClassifier {
    fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    fn output_dim(&self) -> usize {
        self.w2.nrows()
    }

    fn logits(&self, inputs: ArrayView2<f64>) -> Array2<f64> {
        self.forward(inputs).1
    }
}

/// Softmax with max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = e.iter().sum();
    e.into_iter().map(|v| v / sum).collect()
}

pub(crate) fn softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

/// Maximum-probability token, 1-based; ties go to the lowest index.
pub fn sample_token(probabilities: &[f64]) -> Result<u32> {
    if probabilities.is_empty() {
        return Err(invalid("empty distribution"));
    }
    let mut best = 0;
    for (m, &p) in probabilities.iter().enumerate() {
        if !p.is_finite() {
            return Err(invalid(format!("non-finite probability at index {}", m + 1)));
        }
        if p > probabilities[best] {
            best = m;
        }
    }
    Ok(best as u32 + 1)
}

/// Per-group clean-token predictor.
///
/// The classifier input is `[v, prior, cond]`: the embedding of the degraded
/// token, the mean-pooled prior embedding of the clean tokens already
/// predicted by earlier stages (serial mode only) and the conditioning
/// features of the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBranch {
    pub index: usize,
    /// M x C
    pub embedding: Array2<f64>,
    /// M x C, present in serial mode.
    pub prior_embedding: Option<Array2<f64>>,
    pub classifier: MlpClassifier,
}

impl PredictionBranch {
    pub fn new(
        index: usize,
        embedding: Array2<f64>,
        prior_embedding: Option<Array2<f64>>,
        classifier: MlpClassifier,
    ) -> Result<Self> {
        let (m, c) = embedding.dim();
        if m == 0 || c == 0 {
            return Err(invalid("empty embedding table"));
        }
        if let Some(p) = &prior_embedding {
            if p.dim() != (m, c) {
                return Err(invalid("prior embedding shape differs from embedding"));
            }
        }
        if classifier.output_dim() != m {
            return Err(invalid(format!(
                "classifier emits {} scores for a codebook of {m}",
                classifier.output_dim()
            )));
        }
        let tables = embedding.iter().chain(prior_embedding.iter().flatten());
        if tables.into_iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite embedding entry"));
        }
        let branch = Self {
            index,
            embedding: super::standard(embedding),
            prior_embedding: prior_embedding.map(super::standard),
            classifier: MlpClassifier::new(classifier.w1, classifier.b1, classifier.w2, classifier.b2)?,
        };
        if branch.classifier.input_dim() <= branch.fixed_width() {
            return Err(invalid("classifier input leaves no room for conditioning features"));
        }
        Ok(branch)
    }

    pub fn codebook_size(&self) -> usize {
        self.embedding.nrows()
    }

    pub fn channels(&self) -> usize {
        self.embedding.ncols()
    }

    /// Width of the conditioning part of the input.
    pub fn cond_dim(&self) -> usize {
        self.classifier.input_dim() - self.fixed_width()
    }

    fn fixed_width(&self) -> usize {
        let c = self.channels();
        if self.prior_embedding.is_some() {
            2 * c
        } else {
            c
        }
    }

    fn check_token(&self, token: u32) -> Result<usize> {
        let m = self.codebook_size();
        if token == 0 || token as usize > m {
            return Err(invalid(format!("token {token} outside 1..={m}")));
        }
        Ok(token as usize - 1)
    }

    /// Mean of the prior embeddings of `previous`, zero when empty.
    pub fn pooled_prior(&self, previous: &[u32]) -> Result<Array1<f64>> {
        let mut out = Array1::zeros(self.channels());
        let Some(table) = &self.prior_embedding else {
            return Ok(out);
        };
        for &t in previous {
            out += &table.row(self.check_token(t)?);
        }
        if !previous.is_empty() {
            out /= previous.len() as f64;
        }
        Ok(out)
    }

    /// Fused classifier input for one frame.
    pub fn input(&self, token: u32, cond: ArrayView1<f64>, previous: &[u32]) -> Result<Array1<f64>> {
        if cond.len() != self.cond_dim() {
            return Err(invalid(format!(
                "conditioning vector of {} values, branch expects {}",
                cond.len(),
                self.cond_dim()
            )));
        }
        let c = self.channels();
        let mut o = Array1::zeros(self.classifier.input_dim());
        o.slice_mut(s![..c]).assign(&self.embedding.row(self.check_token(token)?));
        let mut at = c;
        if self.prior_embedding.is_some() {
            o.slice_mut(s![c..2 * c]).assign(&self.pooled_prior(previous)?);
            at = 2 * c;
        }
        o.slice_mut(s![at..]).assign(&cond);
        Ok(o)
    }

    /// Clean-token distribution for one frame.
    pub fn distribution(&self, token: u32, cond: ArrayView1<f64>, previous: &[u32]) -> Result<Vec<f64>> {
        let o = self.input(token, cond, previous)?;
        let z = self.classifier.logits(o.view().insert_axis(ndarray::Axis(0)));
        Ok(softmax(z.row(0).as_slice().expect("contiguous logits")))
    }

    /// Fused inputs for a block of frames. `previous` holds one row of
    /// earlier-stage tokens per frame (zero columns for the first stage).
    pub(crate) fn inputs(
        &self,
        tokens: &[u32],
        cond: ArrayView2<f64>,
        previous: Option<ArrayView2<u32>>,
    ) -> Result<Array2<f64>> {
        let c = self.channels();
        let rows = tokens.len();
        let mut o = Array2::zeros((rows, self.classifier.input_dim()));
        let at = self.fixed_width();
        for (r, &t) in tokens.iter().enumerate() {
            o.slice_mut(s![r, ..c]).assign(&self.embedding.row(self.check_token(t)?));
            if self.prior_embedding.is_some() {
                let prev = previous.map(|p| p.row(r).to_vec()).unwrap_or_default();
                o.slice_mut(s![r, c..2 * c]).assign(&self.pooled_prior(&prev)?);
            }
        }
        o.slice_mut(s![.., at..]).assign(&cond);
        Ok(o)
    }

    /// Sampled clean tokens for a block of frames.
    pub(crate) fn predict(
        &self,
        tokens: &[u32],
        cond: ArrayView2<f64>,
        previous: Option<ArrayView2<u32>>,
    ) -> Result<Vec<u32>> {
        let o = self.inputs(tokens, cond, previous)?;
        let mut z = self.classifier.logits(o.view());
        softmax_rows(&mut z);
        z.rows()
            .into_iter()
            .map(|p| sample_token(p.as_slice().expect("contiguous row")))
            .collect()
    }
}

/// Distribution over clean tokens for the degraded token `token` and the
/// frame features `s` (parallel branch).
pub fn branch_forward(token: u32, s: &[f64], branch: &PredictionBranch) -> Result<Vec<f64>> {
    branch.distribution(token, ArrayView1::from(s), &[])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_classifier_is_uniform() {
        let b = PredictionBranch::new(0, Array2::ones((16, 4)), None, MlpClassifier::zeros(8, 5, 16)).unwrap();
        let p = branch_forward(3, &[0.5; 4], &b).unwrap();
        assert!(p.iter().all(|&v| v == 1.0 / 16.0));
        assert_eq!(sample_token(&p).unwrap(), 1);
    }

    #[test]
    fn out_of_range_token() {
        let b = PredictionBranch::new(0, Array2::ones((16, 4)), None, MlpClassifier::zeros(8, 5, 16)).unwrap();
        assert!(branch_forward(0, &[0.0; 4], &b).is_err());
        assert!(branch_forward(17, &[0.0; 4], &b).is_err());
        assert!(branch_forward(16, &[0.0; 4], &b).is_ok());
        assert!(branch_forward(1, &[0.0; 3], &b).is_err());
    }

    #[test]
    fn sample_token_basics() {
        let mut p = vec![0.0; 64];
        p[41] = 1.0;
        assert_eq!(sample_token(&p).unwrap(), 42);
        assert!(sample_token(&[0.5, f64::NAN]).is_err());
        assert!(sample_token(&[]).is_err());
    }

    #[test]
    fn softmax_handles_large_logits() {
        let p = softmax(&[1000.0, 1000.0, -1000.0]);
        assert_eq!(p, vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn first_serial_stage_sees_zero_prior() {
        let b = PredictionBranch::new(
            0,
            Array2::ones((4, 2)),
            Some(Array2::from_elem((4, 2), 3.0)),
            MlpClassifier::zeros(6, 3, 4),
        )
        .unwrap();
        let o = b.input(1, ArrayView1::from(&[7.0, 8.0]), &[]).unwrap();
        assert_eq!(o.to_vec(), vec![1.0, 1.0, 0.0, 0.0, 7.0, 8.0]);
        let o = b.input(1, ArrayView1::from(&[7.0, 8.0]), &[2, 3]).unwrap();
        assert_eq!(o.to_vec(), vec![1.0, 1.0, 3.0, 3.0, 7.0, 8.0]);
    }
}
