//! Synthetic descriptor/pair generation for desk-scale experiments.

use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{DescriptorSet, PairLabel, PairSet};
use crate::error::{Error, Result};
use crate::rng;

/// Geometry of the generated data.
///
/// `GaussianClusters` is linearly separable in practice; `Rings` places
/// points on two concentric circles and is not, which is what makes it a
/// useful stress test for affine hash functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthPreset {
    GaussianClusters,
    Rings,
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub preset: SynthPreset,
    pub points: usize,
    pub dim: usize,
    pub noise: f64,
    pub pos_pairs: usize,
    pub neg_pairs: usize,
    pub seed: u64,
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.points < 4 {
            return Err(Error::invalid("points must be >= 4"));
        }
        if self.pos_pairs + self.neg_pairs < 2 {
            return Err(Error::invalid("pos-pairs + neg-pairs must be >= 2"));
        }
        if self.dim == 0 {
            return Err(Error::invalid("dim must be >= 1"));
        }
        if self.preset == SynthPreset::Rings && self.dim < 2 {
            return Err(Error::invalid("rings preset needs dim >= 2"));
        }
        if !self.noise.is_finite() || self.noise < 0.0 {
            return Err(Error::invalid("noise must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Generates descriptors plus positive/negative pair sets, deterministic in
/// the seed.
pub fn gen_synthetic(cfg: &SynthConfig) -> Result<(DescriptorSet, PairSet, PairSet)> {
    cfg.validate()?;
    let mut rng = rng::seeded(cfg.seed);
    match cfg.preset {
        SynthPreset::GaussianClusters => gaussian_clusters(cfg, &mut rng),
        SynthPreset::Rings => rings(cfg, &mut rng),
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// `points/2` latent centers, each emitted as two noisy copies. Rows `2c`
/// and `2c+1` are the copies of center `c`.
fn gaussian_clusters(
    cfg: &SynthConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(DescriptorSet, PairSet, PairSet)> {
    let centers = cfg.points / 2;
    let count = 2 * centers;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(count);
    for _ in 0..centers {
        let center: Vec<f64> = (0..cfg.dim).map(|_| normal(rng)).collect();
        for _ in 0..2 {
            rows.push(
                center
                    .iter()
                    .map(|&c| c + cfg.noise * normal(rng))
                    .collect(),
            );
        }
    }
    let data = DescriptorSet::from_rows(rows)?;

    let mut pos_candidates: Vec<(usize, usize)> =
        (0..centers).map(|c| (2 * c, 2 * c + 1)).collect();
    if cfg.pos_pairs > pos_candidates.len() {
        return Err(Error::invalid(format!(
            "{} positive pairs requested but only {} distinct same-center pairs exist",
            cfg.pos_pairs,
            pos_candidates.len()
        )));
    }
    rng::shuffle_take(&mut pos_candidates, cfg.pos_pairs, rng);

    let neg_available = count * (count - 1) / 2 - centers;
    let negatives = sample_cross_pairs(
        cfg.neg_pairs,
        neg_available,
        rng,
        |rng| {
            let a = rng.gen_range(0..count);
            let b = rng.gen_range(0..count);
            (a, b, a / 2 != b / 2)
        },
        || {
            let mut all = Vec::with_capacity(neg_available);
            for a in 0..count {
                for b in (a + 1)..count {
                    if a / 2 != b / 2 {
                        all.push((a, b));
                    }
                }
            }
            all
        },
    )?;

    Ok((
        data,
        PairSet::from_canonical(PairLabel::Positive, pos_candidates),
        PairSet::from_canonical(PairLabel::Negative, negatives),
    ))
}

const RING_RADII: [f64; 2] = [1.0, 3.0];
const RING_NEIGHBOR_ANGLE: f64 = 0.1;

/// Two concentric circles in the first two dimensions; the rest is noise.
/// Positives pair angular neighbors on one ring, negatives span rings.
fn rings(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<(DescriptorSet, PairSet, PairSet)> {
    let half = cfg.points / 2;
    let count = 2 * half;
    let tau = 2.0 * std::f64::consts::PI;

    let mut angles: Vec<Vec<f64>> = Vec::with_capacity(2);
    for _ in 0..2 {
        let mut a: Vec<f64> = (0..half).map(|_| rng.gen_range(0.0..tau)).collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        angles.push(a);
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(count);
    for (ring, ring_angles) in angles.iter().enumerate() {
        let r = RING_RADII[ring];
        for &theta in ring_angles {
            let mut row = Vec::with_capacity(cfg.dim);
            row.push(r * theta.cos());
            row.push(r * theta.sin());
            for _ in 2..cfg.dim {
                row.push(cfg.noise * normal(rng));
            }
            rows.push(row);
        }
    }
    let data = DescriptorSet::from_rows(rows)?;

    // Angular neighbors within each ring, including the wrap-around seam.
    let mut pos_candidates: Vec<(usize, usize)> = Vec::new();
    for (ring, ring_angles) in angles.iter().enumerate() {
        let offset = ring * half;
        for i in 0..half {
            for j in (i + 1)..half {
                let gap = ring_angles[j] - ring_angles[i];
                if gap.min(tau - gap) <= RING_NEIGHBOR_ANGLE {
                    pos_candidates.push((offset + i, offset + j));
                }
            }
        }
    }
    if cfg.pos_pairs > pos_candidates.len() {
        return Err(Error::invalid(format!(
            "{} positive pairs requested but only {} angular-neighbor pairs exist",
            cfg.pos_pairs,
            pos_candidates.len()
        )));
    }
    rng::shuffle_take(&mut pos_candidates, cfg.pos_pairs, rng);

    let neg_available = half * half;
    let negatives = sample_cross_pairs(
        cfg.neg_pairs,
        neg_available,
        rng,
        |rng| {
            let a = rng.gen_range(0..half);
            let b = half + rng.gen_range(0..half);
            (a, b, true)
        },
        || {
            let mut all = Vec::with_capacity(neg_available);
            for a in 0..half {
                for b in half..count {
                    all.push((a, b));
                }
            }
            all
        },
    )?;

    Ok((
        data,
        PairSet::from_canonical(PairLabel::Positive, pos_candidates),
        PairSet::from_canonical(PairLabel::Negative, negatives),
    ))
}

/// Draws `want` distinct canonical pairs. Uses rejection sampling while the
/// request is a small fraction of the candidate space, otherwise enumerates
/// and shuffles so termination never depends on luck.
fn sample_cross_pairs(
    want: usize,
    available: usize,
    rng: &mut ChaCha8Rng,
    mut draw: impl FnMut(&mut ChaCha8Rng) -> (usize, usize, bool),
    enumerate: impl FnOnce() -> Vec<(usize, usize)>,
) -> Result<Vec<(usize, usize)>> {
    if want > available {
        return Err(Error::invalid(format!(
            "{want} pairs requested but only {available} distinct combinations exist"
        )));
    }
    if want * 2 > available {
        let mut all = enumerate();
        rng::shuffle_take(&mut all, want, rng);
        return Ok(all);
    }
    let mut seen = HashSet::with_capacity(want);
    let mut out = Vec::with_capacity(want);
    while out.len() < want {
        let (a, b, ok) = draw(rng);
        if !ok {
            continue;
        }
        let canon = (a.min(b), a.max(b));
        if seen.insert(canon) {
            out.push(canon);
        }
    }
    Ok(out)
}
