//! Linear diff-hash training: projections from the smallest eigenvectors of
//! the weighted covariance difference of negative and positive pairs.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{referenced_indices, DescriptorSet, PairSet};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, SymMatrix};
use crate::threshold;
use crate::{BitStats, TrainStats};

/// Affine hash model: `bit_i(x) = (pᵢᵀx + aᵢ >= 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHashModel {
    pub m: usize,
    pub n: usize,
    pub alpha: f64,
    /// m×n projection matrix; row `i` belongs to hash dimension `i`.
    pub projection: Matrix,
    /// Per-dimension offsets, length m.
    pub thresholds: Vec<f64>,
}

impl LinearHashModel {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m > self.n {
            return Err(Error::invalid(format!(
                "linear model needs 1 <= m <= n, got m={}, n={}",
                self.m, self.n
            )));
        }
        if self.projection.rows() != self.m
            || self.projection.cols() != self.n
            || self.thresholds.len() != self.m
        {
            return Err(Error::invalid("linear model arrays disagree with m, n"));
        }
        if !self.projection.is_finite() || !self.thresholds.iter().all(|a| a.is_finite()) {
            return Err(Error::invalid("non-finite model parameter"));
        }
        if (0..self.m).any(|i| self.projection.row(i).iter().all(|&v| v == 0.0)) {
            return Err(Error::invalid("zero projection row"));
        }
        Ok(())
    }
}

/// Symmetrized second cross-moment over pairs:
/// `(1/|pairs|) Σ ½(x x'ᵀ + x' xᵀ)`.
pub fn build_sigma(pairs: &PairSet, data: &DescriptorSet) -> Result<SymMatrix> {
    build_sigma_about(pairs, data, None)
}

fn build_sigma_about(
    pairs: &PairSet,
    data: &DescriptorSet,
    mean: Option<&[f64]>,
) -> Result<SymMatrix> {
    if pairs.is_empty() {
        return Err(Error::invalid("empty pair set"));
    }
    let n = data.dim();
    let mut acc = vec![0.0f64; n * n];
    let mut x = vec![0.0f64; n];
    let mut y = vec![0.0f64; n];
    for &(i, j) in pairs.pairs() {
        if i >= data.count() || j >= data.count() {
            return Err(Error::invalid(format!(
                "pair ({i}, {j}) out of range for {} descriptors",
                data.count()
            )));
        }
        center_into(&mut x, data.row(i), mean);
        center_into(&mut y, data.row(j), mean);
        for a in 0..n {
            for b in a..n {
                acc[a * n + b] += 0.5 * (x[a] * y[b] + y[a] * x[b]);
            }
        }
    }
    let scale = 1.0 / pairs.len() as f64;
    let mut entries = vec![0.0f64; n * n];
    for a in 0..n {
        for b in a..n {
            let v = acc[a * n + b] * scale;
            entries[a * n + b] = v;
            entries[b * n + a] = v;
        }
    }
    SymMatrix::new(n, entries)
}

fn center_into(dst: &mut [f64], src: &[f32], mean: Option<&[f64]>) {
    match mean {
        Some(mu) => {
            for ((d, &s), m) in dst.iter_mut().zip(src).zip(mu) {
                *d = s as f64 - m;
            }
        }
        None => {
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = s as f64;
            }
        }
    }
}

/// Near-zero eigenvalues get no magnitude scaling; the row stays unit norm.
const EIGENVALUE_SCALE_CUTOFF: f64 = 1e-12;

/// Trains the linear diff-hash model.
///
/// Projections are the `m` smallest eigenvectors of
/// `Σ_neg - alpha·Σ_pos`, each scaled by `|λ|^(1/2)` (row scaling cannot
/// change the final bits since thresholds are re-optimized). With `center`
/// the cross-moments are taken about the mean of the referenced
/// descriptors; the thresholds absorb the shift so encoding still consumes
/// raw descriptors.
pub fn train_diff_hash(
    pos: &PairSet,
    neg: &PairSet,
    data: &DescriptorSet,
    m: usize,
    alpha: f64,
    center: bool,
) -> Result<(LinearHashModel, TrainStats)> {
    let n = data.dim();
    if m == 0 || m > n {
        return Err(Error::invalid(format!(
            "hash length must satisfy 1 <= m <= n for the linear model, got m={m}, n={n}"
        )));
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("both pair sets must be nonempty"));
    }
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::invalid("alpha must be finite and nonnegative"));
    }

    let referenced = referenced_indices(&[pos, neg]);
    let mean: Option<Vec<f64>> = center.then(|| {
        let mut mu = vec![0.0f64; n];
        for &r in &referenced {
            for (m, &v) in mu.iter_mut().zip(data.row(r)) {
                *m += v as f64;
            }
        }
        mu.iter_mut().for_each(|m| *m /= referenced.len() as f64);
        mu
    });

    let sigma_pos = build_sigma_about(pos, data, mean.as_deref())?;
    let sigma_neg = build_sigma_about(neg, data, mean.as_deref())?;
    let diff = sigma_neg.sub_scaled(&sigma_pos, alpha)?;
    let eig = linalg::sym_eig(&diff)?;

    let mut projection = Matrix::zeros(m, n);
    for k in 0..m {
        let lambda = eig.eigenvalues[k];
        let scale = if lambda.abs() > EIGENVALUE_SCALE_CUTOFF {
            lambda.abs().sqrt()
        } else {
            1.0
        };
        for i in 0..n {
            projection.set(k, i, scale * eig.vectors.get(i, k));
        }
    }

    // Project every referenced descriptor once, then pick per-pair values.
    let col_of: HashMap<usize, usize> = referenced
        .iter()
        .enumerate()
        .map(|(c, &r)| (r, c))
        .collect();
    let mut centered = vec![0.0f64; n];
    let mut proj = Matrix::zeros(m, referenced.len());
    for (c, &r) in referenced.iter().enumerate() {
        center_into(&mut centered, data.row(r), mean.as_deref());
        for k in 0..m {
            proj.set(k, c, linalg::dot(projection.row(k), &centered));
        }
    }

    let mut thresholds = Vec::with_capacity(m);
    let mut bits = Vec::with_capacity(m);
    for k in 0..m {
        let gather = |set: &PairSet| -> Vec<(f64, f64)> {
            set.pairs()
                .iter()
                .map(|&(i, j)| (proj.get(k, col_of[&i]), proj.get(k, col_of[&j])))
                .collect()
        };
        let curves = threshold::rate_curves(&gather(pos), &gather(neg))?;
        let best = threshold::optimal_index(&curves, alpha);
        let a = curves.candidates()[best];
        bits.push(BitStats {
            threshold: a,
            fnr: curves.fnr()[best],
            fpr: curves.fpr()[best],
        });
        // Fold the centering shift into the stored threshold so the model
        // applies to raw descriptors.
        let shift = mean
            .as_deref()
            .map_or(0.0, |mu| linalg::dot(projection.row(k), mu));
        thresholds.push(a - shift);
    }

    let model = LinearHashModel {
        m,
        n,
        alpha,
        projection,
        thresholds,
    };
    model.validate()?;
    let stats = TrainStats {
        eigenvalues: eig.eigenvalues[..m].to_vec(),
        bits,
    };
    Ok((model, stats))
}
