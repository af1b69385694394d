//! Shared data builders for the benchmark targets.

use diffhash::hashcodec::BitHash;
use diffhash::{dataset, DescriptorSet, PairSet, SynthConfig, SynthPreset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_codes(count: usize, m: usize, seed: u64) -> Vec<BitHash> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| BitHash::from_bits(&(0..m).map(|_| rng.gen_bool(0.5)).collect::<Vec<_>>()))
        .collect()
}

pub fn random_symmetric(dim: usize, seed: u64) -> diffhash::SymMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries: Vec<f64> = (0..dim * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    diffhash::SymMatrix::new(dim, entries).unwrap()
}

/// Rings data sized for training benchmarks.
pub fn rings_instance(points: usize, seed: u64) -> (DescriptorSet, PairSet, PairSet) {
    let cfg = SynthConfig {
        preset: SynthPreset::Rings,
        points,
        dim: 8,
        noise: 0.05,
        pos_pairs: points / 2,
        neg_pairs: points,
        seed,
    };
    dataset::gen_synthetic(&cfg).unwrap()
}
