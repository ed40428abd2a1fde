use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// A table of `M` codevectors of dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    entries: Array2<f64>,
}

impl Codebook {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(invalid("codebook needs at least one entry of positive dimension"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(invalid("non-finite codevector"));
        }
        Ok(Self { entries })
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn dim(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    /// Codevector for a 1-based token.
    pub fn entry(&self, token: u32) -> Result<ArrayView1<'_, f64>> {
        let m = self.size();
        if token == 0 || token as usize > m {
            return Err(invalid(format!("token {token} outside 1..={m}")));
        }
        Ok(self.entries.row(token as usize - 1))
    }

    /// Nearest entry to `v` as (0-based index, squared distance). Ties go to
    /// the lowest index.
    pub(crate) fn nearest(&self, v: ArrayView1<f64>) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (m, row) in self.entries.outer_iter().enumerate() {
            let d: f64 = row.iter().zip(v.iter()).map(|(w, x)| (x - w) * (x - w)).sum();
            if d < best.1 {
                best = (m, d);
            }
        }
        best
    }

    /// True when every pair of entries differs by more than `tol` in some
    /// coordinate.
    pub fn rows_distinct(&self, tol: f64) -> bool {
        let m = self.size();
        for i in 0..m {
            for j in i + 1..m {
                let same = self
                    .entries
                    .row(i)
                    .iter()
                    .zip(self.entries.row(j).iter())
                    .all(|(a, b)| (a - b).abs() <= tol);
                if same {
                    return false;
                }
            }
        }
        true
    }
}

/// Quantizes one vector against one codebook.
///
/// Returns the 1-based token of the nearest codevector (lowest index on
/// ties) and the codevector itself.
pub fn vq_quantize(vector: &[f64], codebook: &Codebook) -> Result<(u32, Vec<f64>)> {
    if vector.len() != codebook.dim() {
        return Err(invalid(format!(
            "vector of dimension {} does not match codebook dimension {}",
            vector.len(),
            codebook.dim()
        )));
    }
    let (idx, _) = codebook.nearest(ArrayView1::from(vector));
    Ok((idx as u32 + 1, codebook.entries.row(idx).to_vec()))
}

/// Settings for k-means++ initialisation followed by EMA centroid updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodebookTraining {
    pub iterations: usize,
    pub decay: f64,
    /// Consecutive empty iterations after which an entry is re-seeded.
    pub dead_after: usize,
}

impl Default for CodebookTraining {
    fn default() -> Self {
        Self {
            iterations: 50,
            decay: 0.99,
            dead_after: 3,
        }
    }
}

/// Result of training one codebook.
#[derive(Debug, Clone)]
pub struct TrainedCodebook {
    pub codebook: Codebook,
    /// Mean squared quantization error (per vector, summed over dimensions)
    /// before each iteration, plus the final value.
    pub mse_history: Vec<f64>,
    pub reseeded: usize,
}

fn count_distinct(data: ArrayView2<f64>) -> usize {
    let mut rows: Vec<Vec<f64>> = data.outer_iter().map(|r| r.to_vec()).collect();
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    rows.dedup();
    rows.len()
}

fn assign(codebook: &Array2<f64>, data: ArrayView2<f64>) -> (Vec<usize>, Vec<f64>) {
    let cb = Codebook {
        entries: codebook.clone(),
    };
    data.outer_iter().map(|row| cb.nearest(row)).unzip()
}

fn kmeans_plus_plus(data: ArrayView2<f64>, size: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = data.nrows();
    let mut centers = Array2::zeros((size, data.ncols()));
    let first = rng.gen_range(0..n);
    centers.row_mut(0).assign(&data.row(first));
    let sq = |a: ArrayView1<f64>, b: ArrayView1<f64>| -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
    };
    let mut dist: Vec<f64> = data.outer_iter().map(|r| sq(r, data.row(first))).collect();
    for c in 1..size {
        let pick = match WeightedIndex::new(&dist) {
            Ok(w) => w.sample(rng),
            // All remaining mass is zero: every point coincides with a centre.
            Err(_) => rng.gen_range(0..n),
        };
        centers.row_mut(c).assign(&data.row(pick));
        for (i, r) in data.outer_iter().enumerate() {
            let d = sq(r, data.row(pick));
            if d < dist[i] {
                dist[i] = d;
            }
        }
    }
    centers
}

/// Trains one codebook of `size` entries on the rows of `data`.
///
/// Entries start from k-means++ seeding. Each iteration assigns every vector
/// to its nearest entry and then moves each used entry towards the mean of
/// its vectors through exponential moving averages of counts and sums
/// (`decay`). An entry left empty for `dead_after` consecutive iterations is
/// re-seeded at the vector with the largest current error. Every step keeps
/// the training MSE non-increasing.
pub fn train_codebook(
    data: ArrayView2<f64>,
    size: usize,
    seed: u64,
    cfg: &CodebookTraining,
) -> Result<TrainedCodebook> {
    if size == 0 {
        return Err(Error::Config("codebook size must be >= 1".into()));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(invalid("non-finite training vector"));
    }
    if !(0.0..1.0).contains(&cfg.decay) {
        return Err(Error::Config(format!("EMA decay {} outside [0, 1)", cfg.decay)));
    }
    let distinct = count_distinct(data);
    if data.nrows() < size || distinct < size {
        return Err(Error::InsufficientData(format!(
            "{distinct} distinct vectors (of {}) for a codebook of {size}",
            data.nrows()
        )));
    }
    let dim = data.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_plus_plus(data, size, &mut rng);
    let mut ema_count = Array1::<f64>::zeros(size);
    let mut ema_sum = Array2::<f64>::zeros((size, dim));
    let mut empty_streak = vec![0usize; size];
    let mut history = Vec::with_capacity(cfg.iterations + 1);
    let mut reseeded = 0;
    let n = data.nrows() as f64;

    for _ in 0..cfg.iterations {
        let (labels, errors) = assign(&centers, data);
        history.push(errors.iter().sum::<f64>() / n);

        let mut counts = vec![0usize; size];
        let mut sums = Array2::<f64>::zeros((size, dim));
        for (row, &l) in data.outer_iter().zip(&labels) {
            counts[l] += 1;
            let mut s = sums.row_mut(l);
            s += &row;
        }
        for m in 0..size {
            if counts[m] == 0 {
                empty_streak[m] += 1;
                continue;
            }
            empty_streak[m] = 0;
            ema_count[m] = cfg.decay * ema_count[m] + (1.0 - cfg.decay) * counts[m] as f64;
            let mut s = ema_sum.row_mut(m);
            s *= cfg.decay;
            s.scaled_add(1.0 - cfg.decay, &sums.row(m));
            let c = &ema_sum.row(m) / ema_count[m];
            centers.row_mut(m).assign(&c);
        }

        if empty_streak.iter().any(|&s| s >= cfg.dead_after) {
            // Re-seed at the worst-served vectors under the updated entries.
            // Only entries that serve nobody after the update are replaced.
            let (labels, errs) = assign(&centers, data);
            let mut used = vec![false; size];
            labels.iter().for_each(|&l| used[l] = true);
            let dead: Vec<usize> = (0..size)
                .filter(|&m| empty_streak[m] >= cfg.dead_after && !used[m])
                .collect();
            let mut worst: Vec<usize> = (0..data.nrows()).collect();
            worst.sort_by(|&a, &b| errs[b].total_cmp(&errs[a]).then(a.cmp(&b)));
            for (&m, &i) in dead.iter().zip(&worst) {
                if errs[i] == 0.0 {
                    break;
                }
                centers.row_mut(m).assign(&data.row(i));
                ema_count[m] = 0.0;
                ema_sum.row_mut(m).fill(0.0);
                empty_streak[m] = 0;
                reseeded += 1;
            }
        }
    }
    let (_, errors) = assign(&centers, data);
    history.push(errors.iter().sum::<f64>() / n);
    Ok(TrainedCodebook {
        codebook: Codebook::new(centers)?,
        mse_history: history,
        reseeded,
    })
}

/// Mean squared quantization error of `data` against `codebook`.
pub fn quantization_mse(codebook: &Codebook, data: ArrayView2<f64>) -> f64 {
    let total: f64 = data.outer_iter().map(|r| codebook.nearest(r).1).sum();
    total / data.nrows().max(1) as f64
}
