//! Kernel diff-hash training: projections live in the span of kernel
//! evaluations against `l` basis points, so the hash length is bounded by
//! `l` instead of the input dimensionality.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{referenced_indices, DescriptorSet, PairSet};
use crate::error::{Error, Result};
use crate::kernels::{self, KernelConfig, KernelSpec};
use crate::linalg::{self, Matrix, SymMatrix};
use crate::rng;
use crate::threshold;
use crate::{BitStats, TrainStats};

/// Kernelized hash model: `bit_i(x) = (βᵢᵀ κ(x) + aᵢ >= 0)` where
/// `κ(x) = (k(x₁,x) … k(x_l,x))` over the stored basis points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelHashModel {
    pub m: usize,
    pub l: usize,
    pub n: usize,
    pub alpha: f64,
    /// Basis-selection seed, kept for provenance.
    pub seed: u64,
    pub kernel: KernelSpec,
    /// l×n basis points.
    pub basis: Matrix,
    /// m×l coefficient matrix; row `i` belongs to hash dimension `i`.
    pub coefficients: Matrix,
    /// Per-dimension offsets, length m.
    pub thresholds: Vec<f64>,
}

impl KernelHashModel {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m > self.l {
            return Err(Error::invalid(format!(
                "kernel model needs 1 <= m <= l, got m={}, l={}",
                self.m, self.l
            )));
        }
        if self.basis.rows() != self.l
            || self.basis.cols() != self.n
            || self.coefficients.rows() != self.m
            || self.coefficients.cols() != self.l
            || self.thresholds.len() != self.m
        {
            return Err(Error::invalid("kernel model arrays disagree with m, n, l"));
        }
        if !self.basis.is_finite()
            || !self.coefficients.is_finite()
            || !self.thresholds.iter().all(|a| a.is_finite())
        {
            return Err(Error::invalid("non-finite model parameter"));
        }
        if (0..self.m).any(|i| self.coefficients.row(i).iter().all(|&v| v == 0.0)) {
            return Err(Error::invalid("zero coefficient row"));
        }
        self.kernel.validate()?;
        if let Some(d) = self.kernel.dim() {
            if d != self.n {
                return Err(Error::invalid("kernel metric dimension disagrees with n"));
            }
        }
        Ok(())
    }
}

/// Uniform sample of `l` basis points, without replacement, from the
/// descriptors referenced by the training pairs. Deterministic in the seed;
/// `l == |referenced|` returns the whole set in shuffled order.
pub fn select_basis(
    data: &DescriptorSet,
    referenced: &[usize],
    l: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    if l == 0 {
        return Err(Error::invalid("basis size l must be >= 1"));
    }
    if l > referenced.len() {
        return Err(Error::invalid(format!(
            "basis size {l} exceeds the {} distinct referenced descriptors",
            referenced.len()
        )));
    }
    if referenced.iter().any(|&i| i >= data.count()) {
        return Err(Error::invalid("referenced index out of range"));
    }
    let mut indices = referenced.to_vec();
    let mut rng = rng::seeded(seed);
    rng::shuffle_take(&mut indices, l, &mut rng);
    Ok(indices)
}

/// The l×l objective matrix: with `K_S` / `K'_S` the kernel matrices of the
/// first / second pair members against the basis,
/// `K = (1/|N|)·½(K_N K'_Nᵀ + K'_N K_Nᵀ) - (α/|P|)·½(K_P K'_Pᵀ + K'_P K_Pᵀ)`.
pub fn build_k(
    pos: &PairSet,
    neg: &PairSet,
    data: &DescriptorSet,
    basis: &Matrix,
    kernel: &KernelSpec,
    alpha: f64,
) -> Result<SymMatrix> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("both pair sets must be nonempty"));
    }
    let kappa = basis_kernel_rows(pos, neg, data, basis, kernel)?;
    build_k_from_rows(pos, neg, &kappa.0, &kappa.1, basis.rows(), alpha)
}

/// Kernel vectors `κ(x)` for every referenced descriptor, one per row, plus
/// the map from descriptor index to row.
fn basis_kernel_rows(
    pos: &PairSet,
    neg: &PairSet,
    data: &DescriptorSet,
    basis: &Matrix,
    kernel: &KernelSpec,
) -> Result<(Matrix, HashMap<usize, usize>)> {
    if basis.cols() != data.dim() {
        return Err(Error::invalid(format!(
            "basis dimension {} does not match descriptor dimension {}",
            basis.cols(),
            data.dim()
        )));
    }
    let referenced = referenced_indices(&[pos, neg]);
    if referenced.last().is_some_and(|&i| i >= data.count()) {
        return Err(Error::invalid("pair index out of range"));
    }
    let points = Matrix::from_rows(
        &referenced
            .iter()
            .map(|&i| data.row_f64(i))
            .collect::<Vec<_>>(),
    )?;
    // Row r is κ(point_r); kernel symmetry makes this the transpose of the
    // basis-by-points matrix.
    let kappa = kernels::kernel_matrix(kernel, &points, basis)?;
    let row_of = referenced
        .iter()
        .enumerate()
        .map(|(r, &i)| (i, r))
        .collect();
    Ok((kappa, row_of))
}

fn build_k_from_rows(
    pos: &PairSet,
    neg: &PairSet,
    kappa: &Matrix,
    row_of: &HashMap<usize, usize>,
    l: usize,
    alpha: f64,
) -> Result<SymMatrix> {
    let mut acc = vec![0.0f64; l * l];
    let mut accumulate = |pairs: &PairSet, weight: f64| {
        let w = weight / pairs.len() as f64;
        for &(i, j) in pairs.pairs() {
            let ki = kappa.row(row_of[&i]);
            let kj = kappa.row(row_of[&j]);
            for a in 0..l {
                let (kia, kja) = (ki[a], kj[a]);
                let row = &mut acc[a * l..(a + 1) * l];
                for b in a..l {
                    row[b] += w * 0.5 * (kia * kj[b] + kja * ki[b]);
                }
            }
        }
    };
    accumulate(neg, 1.0);
    accumulate(pos, -alpha);
    let mut entries = vec![0.0f64; l * l];
    for a in 0..l {
        for b in a..l {
            entries[a * l + b] = acc[a * l + b];
            entries[b * l + a] = acc[a * l + b];
        }
    }
    SymMatrix::new(l, entries)
}

/// Trains the kernel diff-hash model end to end: builds the kernel spec
/// (estimating the Mahalanobis metric from the referenced descriptors),
/// samples the basis, forms the l×l objective matrix, takes its `m`
/// smallest eigenvectors as coefficient rows at unit norm, and optimizes
/// one threshold per dimension.
#[allow(clippy::too_many_arguments)]
pub fn train_kdiff_hash(
    pos: &PairSet,
    neg: &PairSet,
    data: &DescriptorSet,
    m: usize,
    l: usize,
    alpha: f64,
    config: &KernelConfig,
    seed: u64,
) -> Result<(KernelHashModel, TrainStats)> {
    if m == 0 || m > l {
        return Err(Error::invalid(format!(
            "hash length must satisfy 1 <= m <= l, got m={m}, l={l}"
        )));
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("both pair sets must be nonempty"));
    }
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::invalid("alpha must be finite and nonnegative"));
    }

    let referenced = referenced_indices(&[pos, neg]);
    let sample = data.subset(&referenced)?;
    let kernel = KernelSpec::build(config, &sample)?;

    let basis_idx = select_basis(data, &referenced, l, seed)?;
    let basis = Matrix::from_rows(
        &basis_idx
            .iter()
            .map(|&i| data.row_f64(i))
            .collect::<Vec<_>>(),
    )?;

    let (kappa, row_of) = basis_kernel_rows(pos, neg, data, &basis, &kernel)?;
    let objective = build_k_from_rows(pos, neg, &kappa, &row_of, l, alpha)?;
    let eig = linalg::sym_eig(&objective)?;

    let mut coefficients = Matrix::zeros(m, l);
    for k in 0..m {
        for i in 0..l {
            coefficients.set(k, i, eig.vectors.get(i, k));
        }
    }

    // Projections of every referenced descriptor for the threshold search.
    let mut thresholds = Vec::with_capacity(m);
    let mut bits = Vec::with_capacity(m);
    let proj_row: Vec<Vec<f64>> = (0..m)
        .map(|k| {
            (0..kappa.rows())
                .map(|r| linalg::dot(coefficients.row(k), kappa.row(r)))
                .collect()
        })
        .collect();
    for projections in proj_row.iter().take(m) {
        let gather = |set: &PairSet| -> Vec<(f64, f64)> {
            set.pairs()
                .iter()
                .map(|&(i, j)| (projections[row_of[&i]], projections[row_of[&j]]))
                .collect()
        };
        let curves = threshold::rate_curves(&gather(pos), &gather(neg))?;
        let best = threshold::optimal_index(&curves, alpha);
        thresholds.push(curves.candidates()[best]);
        bits.push(BitStats {
            threshold: curves.candidates()[best],
            fnr: curves.fnr()[best],
            fpr: curves.fpr()[best],
        });
    }

    let model = KernelHashModel {
        m,
        l,
        n: data.dim(),
        alpha,
        seed,
        kernel,
        basis,
        coefficients,
        thresholds,
    };
    model.validate()?;
    let stats = TrainStats {
        eigenvalues: eig.eigenvalues[..m].to_vec(),
        bits,
    };
    Ok((model, stats))
}
