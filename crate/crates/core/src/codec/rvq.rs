use ndarray::{Array2, ArrayView1, ArrayView2};

use super::gvq::group_seed;
use super::vq::{train_codebook, Codebook, CodebookTraining};
use super::Quantizer;
use crate::error::{invalid, Result};

/// Residual vector quantizer: stage `n` quantizes what stages `1..n` left
/// over, so each token depends on every earlier one.
#[derive(Debug, Clone, PartialEq)]
pub struct RvqQuantizer {
    stages: Vec<Codebook>,
}

impl RvqQuantizer {
    pub fn new(stages: Vec<Codebook>) -> Result<Self> {
        let Some(first) = stages.first() else {
            return Err(invalid("RVQ needs at least one stage"));
        };
        let (m, dim) = (first.size(), first.dim());
        if stages.iter().any(|c| c.size() != m || c.dim() != dim) {
            return Err(invalid("RVQ stages must share size and dimension"));
        }
        Ok(Self { stages })
    }

    pub fn stages(&self) -> &[Codebook] {
        &self.stages
    }

    /// Norms of the residual entering each stage, followed by the final
    /// residual norm (N + 1 values).
    pub fn residual_norms(&self, e: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(e)?;
        let mut residual = e.to_vec();
        let mut norms = vec![norm(&residual)];
        for cb in &self.stages {
            let (idx, _) = cb.nearest(ArrayView1::from(&residual[..]));
            for (r, w) in residual.iter_mut().zip(cb.entries().row(idx)) {
                *r -= w;
            }
            norms.push(norm(&residual));
        }
        Ok(norms)
    }

    fn check_dim(&self, e: &[f64]) -> Result<()> {
        if e.len() != self.latent_dim() {
            return Err(invalid(format!(
                "latent of dimension {} does not match RVQ K={}",
                e.len(),
                self.latent_dim()
            )));
        }
        Ok(())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Quantizer for RvqQuantizer {
    fn groups(&self) -> usize {
        self.stages.len()
    }

    fn codebook_size(&self) -> usize {
        self.stages[0].size()
    }

    fn latent_dim(&self) -> usize {
        self.stages[0].dim()
    }

    fn quantize(&self, e: &[f64]) -> Result<(Vec<u32>, Vec<f64>)> {
        self.check_dim(e)?;
        let mut residual = e.to_vec();
        let mut quantized = vec![0.0; e.len()];
        let mut tokens = Vec::with_capacity(self.stages.len());
        for cb in &self.stages {
            let (idx, _) = cb.nearest(ArrayView1::from(&residual[..]));
            tokens.push(idx as u32 + 1);
            for ((r, q), w) in residual.iter_mut().zip(quantized.iter_mut()).zip(cb.entries().row(idx)) {
                *r -= w;
                *q += w;
            }
        }
        Ok((tokens, quantized))
    }

    fn dequantize(&self, tokens: &[u32]) -> Result<Vec<f64>> {
        if tokens.len() != self.stages.len() {
            return Err(invalid(format!(
                "{} tokens for {} RVQ stages",
                tokens.len(),
                self.stages.len()
            )));
        }
        let mut out = vec![0.0; self.latent_dim()];
        for (cb, &t) in self.stages.iter().zip(tokens) {
            for (o, w) in out.iter_mut().zip(cb.entry(t)?) {
                *o += w;
            }
        }
        Ok(out)
    }
}

/// Quantizes `e` stage by stage; `ê` is the sum of the selected codevectors.
pub fn rvq_quantize(e: &[f64], q: &RvqQuantizer) -> Result<(Vec<u32>, Vec<f64>)> {
    q.quantize(e)
}

/// Trains `stages` residual codebooks; each stage is fitted to the
/// residuals left by the already-trained stages.
pub fn train_codebooks_rvq(
    latents: ArrayView2<f64>,
    stages: usize,
    size: usize,
    seed: u64,
    cfg: &CodebookTraining,
) -> Result<RvqQuantizer> {
    if stages == 0 {
        return Err(crate::Error::Config("RVQ needs at least one stage".into()));
    }
    let mut residual: Array2<f64> = latents.to_owned();
    let mut books = Vec::with_capacity(stages);
    for n in 0..stages {
        let trained = train_codebook(residual.view(), size, group_seed(seed ^ 0x5256_5121, n), cfg)?;
        for mut row in residual.outer_iter_mut() {
            let (idx, _) = trained.codebook.nearest(row.view());
            row -= &trained.codebook.entries().row(idx);
        }
        books.push(trained.codebook);
    }
    RvqQuantizer::new(books)
}
