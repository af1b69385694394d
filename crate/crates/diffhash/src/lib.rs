//! Similarity-sensitive binary hashing.
//!
//! Learns hash functions from labeled positive/negative descriptor pairs by
//! spectral analysis of covariance differences (the diff-hash family, in
//! its linear and kernelized forms), then encodes descriptors into packed
//! binary codes matched under Hamming distance and evaluated with ROC /
//! FNR-at-FPR reports.
//!
//! Pipeline overview:
//!
//! 1. [`dataset`] loads or synthesizes descriptors and labeled pairs.
//! 2. [`train_linear`] / [`train_kernel`] fit projections as the smallest
//!    eigenvectors of a weighted covariance difference, with per-dimension
//!    thresholds from [`threshold`].
//! 3. [`hashcodec`] applies a model, packs bits, and matches codes.
//! 4. [`eval`] counts ROC curves over Hamming distances.
//!
//! Everything is deterministic: all randomness flows from explicit `u64`
//! seeds through ChaCha8.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod hashcodec;
pub mod kernels;
pub mod linalg;
pub mod model;
mod rng;
pub mod threshold;
pub mod train_kernel;
pub mod train_linear;

pub use dataset::{
    gen_synthetic, load_descriptors, load_pairs, save_descriptors, save_pairs, split_pairs,
    DescriptorSet, PairLabel, PairSet, SynthConfig, SynthPreset,
};
pub use error::{Error, Result};
pub use eval::{auc, fnr_at_fpr, roc, OperatingPoint, RocCurve};
pub use hashcodec::{encode, encode_set, hamming, knn, project, BitHash};
pub use kernels::{kernel_eval, kernel_matrix, ExponentMode, KernelConfig, KernelKind, KernelSpec};
pub use linalg::{estimate_covariance, inv_sqrt_psd, sym_eig, EigenDecomposition, Matrix, SymMatrix};
pub use model::{load_model, save_model, HashModel, ModelFile, Provenance};
pub use threshold::{optimal_threshold, rate_curves, RateCurves};
pub use train_kernel::{build_k, select_basis, train_kdiff_hash, KernelHashModel};
pub use train_linear::{build_sigma, train_diff_hash, LinearHashModel};

use serde::Serialize;

/// Training summary shared by both trainers: the objective eigenvalues
/// behind the selected projections and the per-bit threshold search result.
#[derive(Debug, Clone, Serialize)]
pub struct TrainStats {
    /// Smallest `m` eigenvalues of the objective matrix, ascending.
    pub eigenvalues: Vec<f64>,
    pub bits: Vec<BitStats>,
}

/// Outcome of the threshold search for one hash dimension, measured on the
/// training pairs.
#[derive(Debug, Clone, Serialize)]
pub struct BitStats {
    pub threshold: f64,
    pub fnr: f64,
    pub fpr: f64,
}
