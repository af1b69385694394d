//! Dense symmetric linear algebra: Jacobi eigendecomposition, covariance
//! estimation, and spectral matrix functions.
//!
//! Everything here is self-contained, deterministic, and adequate for the
//! matrix sizes this crate works with (up to a few thousand rows).

use serde::{Deserialize, Serialize};

use crate::dataset::DescriptorSet;
use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row slices. All rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            if r.len() != ncols {
                return Err(Error::invalid("rows of unequal length"));
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: nrows,
            cols: ncols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "dimension mismatch");
        (0..self.rows)
            .map(|i| dot(self.row(i), v))
            .collect()
    }

    pub(crate) fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Symmetric d×d matrix. Construction symmetrizes as `(A + Aᵀ)/2` and
/// rejects non-finite entries, so `get(i, j) == get(j, i)` holds exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Builds from row-major entries of length `dim * dim`.
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("symmetric matrix dimension must be >= 1"));
        }
        if entries.len() != dim * dim {
            return Err(Error::invalid(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        if !entries.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("non-finite matrix entry"));
        }
        let mut sym = entries;
        for i in 0..dim {
            for j in (i + 1)..dim {
                let avg = 0.5 * (sym[i * dim + j] + sym[j * dim + i]);
                sym[i * dim + j] = avg;
                sym[j * dim + i] = avg;
            }
        }
        Ok(SymMatrix { dim, entries: sym })
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn data(&self) -> &[f64] {
        &self.entries
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// `self - alpha * other`, entrywise.
    pub fn sub_scaled(&self, other: &SymMatrix, alpha: f64) -> Result<SymMatrix> {
        if self.dim != other.dim {
            return Err(Error::invalid("symmetric matrix dimension mismatch"));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - alpha * b)
            .collect();
        SymMatrix::new(self.dim, entries)
    }

    /// Quadratic form `vᵀ A v`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        assert_eq!(v.len(), self.dim, "dimension mismatch");
        let mut sum = 0.0;
        for i in 0..self.dim {
            sum += v[i] * dot(&self.entries[i * self.dim..(i + 1) * self.dim], v);
        }
        sum
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim, "dimension mismatch");
        (0..self.dim)
            .map(|i| dot(&self.entries[i * self.dim..(i + 1) * self.dim], v))
            .collect()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.entries.len() != self.dim * self.dim {
            return Err(Error::invalid("inconsistent symmetric matrix shape"));
        }
        if !self.entries.iter().all(|x| x.is_finite()) {
            return Err(Error::invalid("non-finite matrix entry"));
        }
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                if self.get(i, j) != self.get(j, i) {
                    return Err(Error::invalid("matrix is not symmetric"));
                }
            }
        }
        Ok(())
    }
}

/// Result of [`sym_eig`]: eigenvalues ascending, eigenvector `k` in column
/// `k` of `vectors`, columns orthonormal.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub vectors: Matrix,
}

impl EigenDecomposition {
    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.vectors.column(k)
    }
}

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Deterministic: fixed sweep order; eigenvalues sorted ascending; each
/// eigenvector's largest-magnitude component (lowest index on ties) is made
/// nonnegative.
pub fn sym_eig(a: &SymMatrix) -> Result<EigenDecomposition> {
    a.validate()?;
    let n = a.dim();
    let tol = 1e-12 * a.frobenius_norm();

    let mut m = a.data().to_vec();
    let mut v = Matrix::identity(n);

    let mut sweeps = 0;
    while off_diagonal_norm(&m, n) > tol {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence(format!(
                "off-diagonal norm {:e} above tolerance {:e} after {MAX_SWEEPS} sweeps",
                off_diagonal_norm(&m, n),
                tol
            )));
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                rotate(&mut m, &mut v, n, p, q);
            }
        }
        sweeps += 1;
    }

    // Sort ascending; stable so equal eigenvalues keep sweep order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].partial_cmp(&m[j * n + j]).unwrap());

    let eigenvalues: Vec<f64> = order.iter().map(|&k| m[k * n + k]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<f64> = (0..n).map(|i| v.get(i, src)).collect();
        fix_sign(&mut col);
        for (i, &value) in col.iter().enumerate() {
            vectors.set(i, dst, value);
        }
    }

    Ok(EigenDecomposition {
        eigenvalues,
        vectors,
    })
}

/// One Jacobi rotation annihilating `m[p][q]`.
fn rotate(m: &mut [f64], v: &mut Matrix, n: usize, p: usize, q: usize) {
    let apq = m[p * n + q];
    if apq == 0.0 {
        return;
    }
    let app = m[p * n + p];
    let aqq = m[q * n + q];
    let tau = (aqq - app) / (2.0 * apq);
    let t = if tau.abs() > 1e150 {
        0.5 / tau
    } else if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        1.0 / (tau - (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    // A <- Gᵀ A G with G the plane rotation in (p, q).
    for k in 0..n {
        let akp = m[k * n + p];
        let akq = m[k * n + q];
        m[k * n + p] = c * akp - s * akq;
        m[k * n + q] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = m[p * n + k];
        let aqk = m[q * n + k];
        m[p * n + k] = c * apk - s * aqk;
        m[q * n + k] = s * apk + c * aqk;
    }
    m[p * n + q] = 0.0;
    m[q * n + p] = 0.0;

    // V <- V G accumulates the eigenvectors.
    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}

fn off_diagonal_norm(m: &[f64], n: usize) -> f64 {
    let mut sum = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                sum += m[p * n + q] * m[p * n + q];
            }
        }
    }
    sum.sqrt()
}

fn fix_sign(col: &mut [f64]) {
    let mut best = 0usize;
    let mut best_abs = col[0].abs();
    for (i, &x) in col.iter().enumerate().skip(1) {
        if x.abs() > best_abs {
            best = i;
            best_abs = x.abs();
        }
    }
    if col[best] < 0.0 {
        for x in col.iter_mut() {
            *x = -*x;
        }
    }
}

/// Sample covariance `(1/N) Σ (xᵢ-μ)(xᵢ-μ)ᵀ` plus `eps·(tr/n)·I`
/// regularization, so `eps` is dimensionless.
pub fn estimate_covariance(x: &DescriptorSet, eps: f64) -> Result<SymMatrix> {
    if x.count() < 2 {
        return Err(Error::invalid(format!(
            "covariance needs at least 2 descriptors, got {}",
            x.count()
        )));
    }
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::invalid("eps must be finite and nonnegative"));
    }
    let n = x.dim();
    let count = x.count();

    let mut mean = vec![0.0f64; n];
    for r in 0..count {
        for (m, &v) in mean.iter_mut().zip(x.row(r)) {
            *m += v as f64;
        }
    }
    for m in mean.iter_mut() {
        *m /= count as f64;
    }

    let mut cov = vec![0.0f64; n * n];
    let mut centered = vec![0.0f64; n];
    for r in 0..count {
        for (c, (&v, m)) in x.row(r).iter().zip(&mean).enumerate() {
            centered[c] = v as f64 - m;
        }
        for i in 0..n {
            let ci = centered[i];
            for j in i..n {
                cov[i * n + j] += ci * centered[j];
            }
        }
    }
    let scale = 1.0 / count as f64;
    for i in 0..n {
        for j in i..n {
            let v = cov[i * n + j] * scale;
            cov[i * n + j] = v;
            cov[j * n + i] = v;
        }
    }

    let trace: f64 = (0..n).map(|i| cov[i * n + i]).sum();
    let reg = eps * trace / n as f64;
    for i in 0..n {
        cov[i * n + i] += reg;
    }
    SymMatrix::new(n, cov)
}

/// `V·diag(max(λ, floor))^(-1/2)·Vᵀ`: inverse square root with eigenvalue
/// flooring, for building metric matrices from near-singular covariances.
pub fn inv_sqrt_psd(a: &SymMatrix, floor: f64) -> Result<SymMatrix> {
    spectral_map(a, floor, |lam| 1.0 / lam.sqrt())
}

/// `V·diag(max(λ, floor))^(-1)·Vᵀ`: floored inverse.
pub fn inv_psd(a: &SymMatrix, floor: f64) -> Result<SymMatrix> {
    spectral_map(a, floor, |lam| 1.0 / lam)
}

fn spectral_map(a: &SymMatrix, floor: f64, f: impl Fn(f64) -> f64) -> Result<SymMatrix> {
    if !floor.is_finite() || floor <= 0.0 {
        return Err(Error::invalid("eigenvalue floor must be finite and positive"));
    }
    let eig = sym_eig(a)?;
    let n = a.dim();
    let w: Vec<f64> = eig.eigenvalues.iter().map(|&l| f(l.max(floor))).collect();
    let mut out = vec![0.0f64; n * n];
    for i in 0..n {
        for j in i..n {
            let mut sum = 0.0;
            for (k, &wk) in w.iter().enumerate() {
                sum += wk * eig.vectors.get(i, k) * eig.vectors.get(j, k);
            }
            out[i * n + j] = sum;
            out[j * n + i] = sum;
        }
    }
    SymMatrix::new(n, out)
}
