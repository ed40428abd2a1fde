use ndarray::{Array2, ArrayView1, ArrayView2};

use super::vq::{train_codebook, Codebook, CodebookTraining, TrainedCodebook};
use super::Quantizer;
use crate::error::{invalid, Error, Result};

/// Group vector quantizer: the latent is split into `N` contiguous groups
/// of `K / N` dimensions and each group is quantized by its own codebook.
/// Tokens of different groups are independent of each other.
#[derive(Debug, Clone, PartialEq)]
pub struct GvqQuantizer {
    codebooks: Vec<Codebook>,
    latent_dim: usize,
}

impl GvqQuantizer {
    pub fn new(codebooks: Vec<Codebook>) -> Result<Self> {
        let Some(first) = codebooks.first() else {
            return Err(invalid("GVQ needs at least one group"));
        };
        let (m, dim) = (first.size(), first.dim());
        if codebooks.iter().any(|c| c.size() != m || c.dim() != dim) {
            return Err(invalid("GVQ codebooks must share size and dimension"));
        }
        Ok(Self {
            latent_dim: dim * codebooks.len(),
            codebooks,
        })
    }

    pub fn codebooks(&self) -> &[Codebook] {
        &self.codebooks
    }

    pub fn group_dim(&self) -> usize {
        self.latent_dim / self.codebooks.len()
    }

    /// Splits `e` into its `N` group views.
    pub fn split<'a>(&self, e: &'a [f64]) -> Result<Vec<&'a [f64]>> {
        if e.len() != self.latent_dim {
            return Err(invalid(format!(
                "latent of dimension {} does not match GVQ K={}",
                e.len(),
                self.latent_dim
            )));
        }
        Ok(e.chunks(self.group_dim()).collect())
    }

    /// Quantizes a single group with its codebook; returns the 1-based token.
    pub fn quantize_group(&self, group: usize, e_n: ArrayView1<f64>) -> u32 {
        self.codebooks[group].nearest(e_n).0 as u32 + 1
    }
}

impl Quantizer for GvqQuantizer {
    fn groups(&self) -> usize {
        self.codebooks.len()
    }

    fn codebook_size(&self) -> usize {
        self.codebooks[0].size()
    }

    fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    fn quantize(&self, e: &[f64]) -> Result<(Vec<u32>, Vec<f64>)> {
        let groups = self.split(e)?;
        let mut tokens = Vec::with_capacity(groups.len());
        let mut quantized = Vec::with_capacity(self.latent_dim);
        for (cb, part) in self.codebooks.iter().zip(groups) {
            let (idx, _) = cb.nearest(ArrayView1::from(part));
            tokens.push(idx as u32 + 1);
            quantized.extend(cb.entries().row(idx).iter());
        }
        Ok((tokens, quantized))
    }

    fn dequantize(&self, tokens: &[u32]) -> Result<Vec<f64>> {
        if tokens.len() != self.codebooks.len() {
            return Err(invalid(format!(
                "{} tokens for {} groups",
                tokens.len(),
                self.codebooks.len()
            )));
        }
        let mut out = Vec::with_capacity(self.latent_dim);
        for (cb, &t) in self.codebooks.iter().zip(tokens) {
            out.extend(cb.entry(t)?.iter());
        }
        Ok(out)
    }
}

/// Quantizes one latent vector: tokens (1-based, one per group) and the
/// concatenated codevectors.
pub fn gvq_quantize(e: &[f64], q: &GvqQuantizer) -> Result<(Vec<u32>, Vec<f64>)> {
    q.quantize(e)
}

/// Concatenation of the codevectors selected by `tokens`.
pub fn gvq_dequantize(tokens: &[u32], q: &GvqQuantizer) -> Result<Vec<f64>> {
    q.dequantize(tokens)
}

/// Sum over groups of the batch-mean squared Euclidean distance between
/// each group's quantizer input and output.
///
/// `inputs[n]` and `outputs[n]` hold the batch for group `n`, one vector per
/// row.
pub fn gvq_loss(inputs: &[Array2<f64>], outputs: &[Array2<f64>]) -> Result<f64> {
    if inputs.len() != outputs.len() {
        return Err(invalid(format!(
            "{} input groups vs {} output groups",
            inputs.len(),
            outputs.len()
        )));
    }
    let mut loss = 0.0;
    for (x, y) in inputs.iter().zip(outputs) {
        if x.dim() != y.dim() {
            return Err(invalid(format!("group shapes {:?} vs {:?}", x.dim(), y.dim())));
        }
        if x.nrows() == 0 {
            return Err(invalid("empty batch"));
        }
        let sq: f64 = x.iter().zip(y.iter()).map(|(a, b)| (b - a) * (b - a)).sum();
        loss += sq / x.nrows() as f64;
    }
    Ok(loss)
}

/// Per-group training outcome.
#[derive(Debug, Clone)]
pub struct GvqTraining {
    pub quantizer: GvqQuantizer,
    pub groups: Vec<TrainedCodebook>,
}

/// Seed used for group `n` given the run seed.
pub(crate) fn group_seed(seed: u64, group: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(group as u64 + 1)
}

/// Trains `groups` independent codebooks of `size` entries on the latent
/// rows of `latents` (K columns).
pub fn train_codebooks_gvq(
    latents: ArrayView2<f64>,
    groups: usize,
    size: usize,
    seed: u64,
    cfg: &CodebookTraining,
) -> Result<GvqTraining> {
    let k = latents.ncols();
    if groups == 0 || k % groups != 0 {
        return Err(Error::Config(format!(
            "latent dimension {k} is not divisible into {groups} groups"
        )));
    }
    let dim = k / groups;
    let mut trained = Vec::with_capacity(groups);
    for n in 0..groups {
        let block = latents.slice(ndarray::s![.., n * dim..(n + 1) * dim]);
        trained.push(train_codebook(block, size, group_seed(seed, n), cfg)?);
    }
    let quantizer = GvqQuantizer::new(trained.iter().map(|t| t.codebook.clone()).collect())?;
    Ok(GvqTraining {
        quantizer,
        groups: trained,
    })
}
