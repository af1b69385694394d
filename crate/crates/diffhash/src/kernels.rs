//! Kernel evaluation and kernel matrix construction.

use serde::{Deserialize, Serialize};

use crate::dataset::DescriptorSet;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, SymMatrix};

/// Exponent of the covariance metric inside the Gaussian kernel: the
/// inverse square root (`half`, the default) or the plain inverse (`full`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExponentMode {
    #[default]
    Half,
    Full,
}

/// Kernel family selector, before the data-dependent metric is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Linear,
    GaussianMahalanobis,
}

/// Kernel configuration as supplied by a caller; [`KernelSpec::build`]
/// turns it into a self-contained spec.
#[derive(Debug, Clone, Copy)]
pub struct KernelConfig {
    pub kind: KernelKind,
    pub gamma: f64,
    pub exponent_mode: ExponentMode,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            kind: KernelKind::GaussianMahalanobis,
            gamma: 1.0,
            exponent_mode: ExponentMode::Half,
        }
    }
}

/// Fully materialized kernel: everything needed to evaluate `k(x, y)`,
/// including the Mahalanobis metric matrix for the Gaussian case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelSpec {
    Linear,
    GaussianMahalanobis {
        gamma: f64,
        exponent_mode: ExponentMode,
        metric: SymMatrix,
    },
}

/// Relative eigenvalue floor used when inverting near-singular covariances.
const METRIC_FLOOR_SCALE: f64 = 1e-10;

impl KernelSpec {
    /// Builds a spec, estimating the metric `Σ_X^(-1/2)` (or `Σ_X^(-1)`
    /// under [`ExponentMode::Full`]) from the sample for the Gaussian case.
    pub fn build(config: &KernelConfig, sample: &DescriptorSet) -> Result<KernelSpec> {
        if !config.gamma.is_finite() || config.gamma <= 0.0 {
            return Err(Error::invalid("gamma must be finite and positive"));
        }
        match config.kind {
            KernelKind::Linear => Ok(KernelSpec::Linear),
            KernelKind::GaussianMahalanobis => {
                let cov = linalg::estimate_covariance(sample, 0.0)?;
                let floor = (METRIC_FLOOR_SCALE * cov.trace() / cov.dim() as f64)
                    .max(f64::MIN_POSITIVE);
                let metric = match config.exponent_mode {
                    ExponentMode::Half => linalg::inv_sqrt_psd(&cov, floor)?,
                    ExponentMode::Full => linalg::inv_psd(&cov, floor)?,
                };
                Ok(KernelSpec::GaussianMahalanobis {
                    gamma: config.gamma,
                    exponent_mode: config.exponent_mode,
                    metric,
                })
            }
        }
    }

    /// Input dimension the spec is bound to, if any (the Gaussian metric
    /// fixes it; the linear kernel accepts any dimension).
    pub fn dim(&self) -> Option<usize> {
        match self {
            KernelSpec::Linear => None,
            KernelSpec::GaussianMahalanobis { metric, .. } => Some(metric.dim()),
        }
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        match self.dim() {
            Some(expect) if expect != d => Err(Error::invalid(format!(
                "kernel metric is {expect}-dimensional, input is {d}-dimensional"
            ))),
            _ => Ok(()),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if let KernelSpec::GaussianMahalanobis { gamma, metric, .. } = self {
            if !gamma.is_finite() || *gamma <= 0.0 {
                return Err(Error::invalid("gamma must be finite and positive"));
            }
            metric.validate()?;
        }
        Ok(())
    }
}

/// Evaluates the kernel: `xᵀy` for linear, `exp(-γ (x-y)ᵀ M (x-y))` for
/// Gaussian-Mahalanobis. Exactly symmetric in its arguments.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "kernel arguments of dimension {} and {}",
            x.len(),
            y.len()
        )));
    }
    spec.check_dim(x.len())?;
    let mut diff = vec![0.0; x.len()];
    Ok(eval_inner(spec, x, y, &mut diff))
}

fn eval_inner(spec: &KernelSpec, x: &[f64], y: &[f64], diff: &mut [f64]) -> f64 {
    match spec {
        KernelSpec::Linear => linalg::dot(x, y),
        KernelSpec::GaussianMahalanobis { gamma, metric, .. } => {
            for ((d, &a), &b) in diff.iter_mut().zip(x).zip(y) {
                *d = a - b;
            }
            // The metric is PSD by construction; clamp the rounding noise so
            // values stay in (0, 1].
            let quad = metric.quadratic_form(diff).max(0.0);
            (-gamma * quad).exp()
        }
    }
}

/// `l x |points|` matrix with entry `(i, j) = k(basisᵢ, pointⱼ)`.
pub fn kernel_matrix(spec: &KernelSpec, basis: &Matrix, points: &Matrix) -> Result<Matrix> {
    if basis.cols() != points.cols() {
        return Err(Error::invalid(format!(
            "basis dimension {} does not match point dimension {}",
            basis.cols(),
            points.cols()
        )));
    }
    spec.check_dim(basis.cols())?;
    let mut out = Matrix::zeros(basis.rows(), points.rows());
    let mut diff = vec![0.0; basis.cols()];
    for i in 0..basis.rows() {
        for j in 0..points.rows() {
            let v = eval_inner(spec, basis.row(i), points.row(j), &mut diff);
            out.set(i, j, v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn gaussian(dim: usize, gamma: f64) -> KernelSpec {
        KernelSpec::GaussianMahalanobis {
            gamma,
            exponent_mode: ExponentMode::Half,
            metric: SymMatrix::identity(dim),
        }
    }

    fn rand_points(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_rows(
            &(0..rows)
                .map(|_| (0..cols).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    #[test]
    fn gaussian_self_similarity_is_one() {
        let spec = gaussian(3, 2.5);
        let x = [0.4, -1.0, 2.0];
        assert_eq!(kernel_eval(&spec, &x, &x).unwrap(), 1.0);
    }

    #[test]
    fn linear_on_axes() {
        let e1 = [1.0, 0.0];
        let e2 = [0.0, 1.0];
        assert_eq!(kernel_eval(&KernelSpec::Linear, &e1, &e1).unwrap(), 1.0);
        assert_eq!(kernel_eval(&KernelSpec::Linear, &e1, &e2).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_unit_offset_hand_value() {
        // exp(-1) for gamma=1, identity metric, |x-y| = e1.
        let spec = gaussian(2, 1.0);
        let v = kernel_eval(&spec, &[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((v - 0.36787944117144233).abs() < 1e-15);
    }

    #[test]
    fn symmetry_is_exact() {
        let spec = gaussian(4, 0.7);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..4).map(|_| rng.gen_range(-3.0..3.0)).collect();
            assert_eq!(
                kernel_eval(&spec, &x, &y).unwrap().to_bits(),
                kernel_eval(&spec, &y, &x).unwrap().to_bits()
            );
            assert_eq!(
                kernel_eval(&KernelSpec::Linear, &x, &y).unwrap().to_bits(),
                kernel_eval(&KernelSpec::Linear, &y, &x).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn gaussian_values_in_unit_interval() {
        let spec = gaussian(3, 1.3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let v = kernel_eval(&spec, &x, &y).unwrap();
            assert!(v > 0.0 && v <= 1.0);
        }
    }

    #[test]
    fn matrix_on_shared_set_is_symmetric_with_unit_diagonal() {
        let pts = rand_points(8, 3, 9);
        let spec = gaussian(3, 1.0);
        let k = kernel_matrix(&spec, &pts, &pts).unwrap();
        for i in 0..8 {
            assert_eq!(k.get(i, i), 1.0);
            for j in 0..8 {
                assert_eq!(k.get(i, j).to_bits(), k.get(j, i).to_bits());
            }
        }
    }

    #[test]
    fn linear_matrix_with_identity_basis_transposes_points() {
        let basis = Matrix::identity(3);
        let pts = rand_points(5, 3, 4);
        let k = kernel_matrix(&KernelSpec::Linear, &basis, &pts).unwrap();
        for i in 0..3 {
            for j in 0..5 {
                assert_eq!(k.get(i, j), pts.get(j, i));
            }
        }
    }

    #[test]
    fn matrix_matches_entrywise_oracle() {
        let basis = rand_points(6, 4, 11);
        let pts = rand_points(9, 4, 12);
        for spec in [gaussian(4, 0.8), KernelSpec::Linear] {
            let k = kernel_matrix(&spec, &basis, &pts).unwrap();
            for i in 0..6 {
                for j in 0..9 {
                    let want = kernel_eval(&spec, basis.row(i), pts.row(j)).unwrap();
                    assert!((k.get(i, j) - want).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn gram_matrices_are_psd() {
        for seed in 0..20u64 {
            let pts = rand_points(20, 3, 100 + seed);
            for spec in [gaussian(3, 1.0), KernelSpec::Linear] {
                let k = kernel_matrix(&spec, &pts, &pts).unwrap();
                let sym = SymMatrix::new(20, k.data().to_vec()).unwrap();
                let eig = crate::linalg::sym_eig(&sym).unwrap();
                let min = eig.eigenvalues[0];
                assert!(
                    min >= -1e-8 * sym.trace(),
                    "seed {seed}: smallest eigenvalue {min}"
                );
            }
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(kernel_eval(&KernelSpec::Linear, &[1.0], &[1.0, 2.0]).is_err());
        let spec = gaussian(3, 1.0);
        assert!(kernel_eval(&spec, &[1.0, 2.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn exponent_modes_give_inverse_and_inverse_sqrt_metrics() {
        // Four axis points with zero mean: covariance diag(2, 0.5).
        let data = DescriptorSet::from_rows(vec![
            vec![2.0, 0.0],
            vec![-2.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ])
        .unwrap();
        let mk = |mode: ExponentMode| {
            let spec = KernelSpec::build(
                &KernelConfig {
                    kind: KernelKind::GaussianMahalanobis,
                    gamma: 1.0,
                    exponent_mode: mode,
                },
                &data,
            )
            .unwrap();
            let KernelSpec::GaussianMahalanobis { metric, .. } = spec else {
                panic!("expected gaussian")
            };
            metric
        };
        let half = mk(ExponentMode::Half);
        let full = mk(ExponentMode::Full);
        assert!((half.get(0, 0) - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((half.get(1, 1) - 2.0f64.sqrt()).abs() < 1e-12);
        assert!((full.get(0, 0) - 0.5).abs() < 1e-12);
        assert!((full.get(1, 1) - 2.0).abs() < 1e-12);
        assert!(half.get(0, 1).abs() < 1e-12 && full.get(0, 1).abs() < 1e-12);
    }

    #[test]
    fn build_from_data_floors_singular_directions() {
        // Data varying only along e1; the metric must stay finite.
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 0.0]).collect();
        let data = DescriptorSet::from_rows(rows).unwrap();
        let spec = KernelSpec::build(&KernelConfig::default(), &data).unwrap();
        let KernelSpec::GaussianMahalanobis { metric, .. } = &spec else {
            panic!("expected gaussian")
        };
        assert!(metric.data().iter().all(|v| v.is_finite()));
        let v = kernel_eval(&spec, &[1.0, 0.0], &[2.0, 0.0]).unwrap();
        assert!(v > 0.0 && v < 1.0);
    }
}
