//! ROC computation over Hamming distances, FNR at fixed FPR operating
//! points, AUC, and the raw-descriptor Euclidean baseline.
//!
//! Curves are exact counts per integer radius (or per real threshold for
//! the baseline); operating points use a conservative step rule with no
//! interpolation, since interpolated rates at integer radii are fictitious.

use serde::Serialize;

use crate::dataset::{DescriptorSet, PairSet};
use crate::error::{Error, Result};

/// ROC over Hamming radii 0..=m: a pair is accepted at radius `r` iff its
/// distance is `<= r`. Both rates are nondecreasing and reach 1 at `r = m`.
#[derive(Debug, Clone)]
pub struct RocCurve {
    m: usize,
    fpr: Vec<f64>,
    tpr: Vec<f64>,
}

impl RocCurve {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn radii(&self) -> impl Iterator<Item = u32> {
        0..=self.m as u32
    }

    /// Fraction of negative pairs with distance <= radius.
    pub fn fpr(&self) -> &[f64] {
        &self.fpr
    }

    /// Fraction of positive pairs with distance <= radius.
    pub fn tpr(&self) -> &[f64] {
        &self.tpr
    }
}

/// Exact per-radius counting over integer Hamming distances.
pub fn roc(dist_pos: &[u32], dist_neg: &[u32], m: usize) -> Result<RocCurve> {
    if dist_pos.is_empty() || dist_neg.is_empty() {
        return Err(Error::invalid("roc needs nonempty distance lists"));
    }
    let cumulative = |dists: &[u32]| -> Result<Vec<f64>> {
        let mut hist = vec![0usize; m + 1];
        for &d in dists {
            if d as usize > m {
                return Err(Error::invalid(format!("distance {d} exceeds m={m}")));
            }
            hist[d as usize] += 1;
        }
        let total = dists.len() as f64;
        let mut cum = 0usize;
        Ok(hist
            .into_iter()
            .map(|h| {
                cum += h;
                cum as f64 / total
            })
            .collect())
    };
    Ok(RocCurve {
        m,
        fpr: cumulative(dist_neg)?,
        tpr: cumulative(dist_pos)?,
    })
}

/// One FNR-at-FPR operating point. `radius` is `None` when even radius 0
/// overshoots the target, in which case nothing can be accepted and the
/// FNR is reported as 1.
#[derive(Debug, Clone, Serialize)]
pub struct OperatingPoint {
    pub target_fpr: f64,
    pub radius: Option<u32>,
    pub fnr: f64,
}

/// Largest radius whose FPR does not exceed the target (step rule, no
/// interpolation), and the FNR there.
pub fn operating_point(curve: &RocCurve, target: f64) -> OperatingPoint {
    let below = curve.fpr.partition_point(|&f| f <= target);
    if below == 0 {
        return OperatingPoint {
            target_fpr: target,
            radius: None,
            fnr: 1.0,
        };
    }
    let r = below - 1;
    OperatingPoint {
        target_fpr: target,
        radius: Some(r as u32),
        fnr: 1.0 - curve.tpr[r],
    }
}

/// The FNR at the operating point for `target`.
pub fn fnr_at_fpr(curve: &RocCurve, target: f64) -> f64 {
    operating_point(curve, target).fnr
}

/// Trapezoidal area under tpr-vs-fpr, anchored at the accept-nothing point
/// (0, 0); the curve itself ends at (1, 1).
pub fn auc(curve: &RocCurve) -> f64 {
    let mut area = 0.0;
    let mut prev = (0.0, 0.0);
    for (&x, &y) in curve.fpr.iter().zip(&curve.tpr) {
        area += (x - prev.0) * (y + prev.1) * 0.5;
        prev = (x, y);
    }
    area
}

/// ROC analogue over real-valued thresholds, used for the raw-descriptor
/// Euclidean baseline.
#[derive(Debug, Clone)]
pub struct RealRocCurve {
    thresholds: Vec<f64>,
    fpr: Vec<f64>,
    tpr: Vec<f64>,
}

impl RealRocCurve {
    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn fpr(&self) -> &[f64] {
        &self.fpr
    }

    pub fn tpr(&self) -> &[f64] {
        &self.tpr
    }
}

/// Euclidean distances between the members of each pair.
pub fn euclidean_pair_distances(data: &DescriptorSet, pairs: &PairSet) -> Result<Vec<f64>> {
    pairs
        .pairs()
        .iter()
        .map(|&(i, j)| {
            if i >= data.count() || j >= data.count() {
                return Err(Error::invalid(format!(
                    "pair ({i}, {j}) out of range for {} descriptors",
                    data.count()
                )));
            }
            let d = data
                .row(i)
                .iter()
                .zip(data.row(j))
                .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
                .sum::<f64>()
                .sqrt();
            Ok(d)
        })
        .collect()
}

/// Counting curve over the raw descriptors under Euclidean distance, with
/// candidate thresholds at the pooled distinct pair distances.
pub fn euclidean_baseline(
    data: &DescriptorSet,
    pos: &PairSet,
    neg: &PairSet,
) -> Result<RealRocCurve> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("baseline needs nonempty pair sets"));
    }
    let mut d_pos = euclidean_pair_distances(data, pos)?;
    let mut d_neg = euclidean_pair_distances(data, neg)?;
    let mut thresholds: Vec<f64> = d_pos.iter().chain(d_neg.iter()).copied().collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();
    d_pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d_neg.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let frac_below = |sorted: &[f64], t: f64| {
        sorted.partition_point(|&d| d <= t) as f64 / sorted.len() as f64
    };
    let fpr = thresholds.iter().map(|&t| frac_below(&d_neg, t)).collect();
    let tpr = thresholds.iter().map(|&t| frac_below(&d_pos, t)).collect();
    Ok(RealRocCurve {
        thresholds,
        fpr,
        tpr,
    })
}

/// Operating point on a real-threshold curve.
#[derive(Debug, Clone, Serialize)]
pub struct RealOperatingPoint {
    pub target_fpr: f64,
    pub threshold: Option<f64>,
    pub fnr: f64,
}

pub fn real_operating_point(curve: &RealRocCurve, target: f64) -> RealOperatingPoint {
    let below = curve.fpr.partition_point(|&f| f <= target);
    if below == 0 {
        return RealOperatingPoint {
            target_fpr: target,
            threshold: None,
            fnr: 1.0,
        };
    }
    RealOperatingPoint {
        target_fpr: target,
        threshold: Some(curve.thresholds[below - 1]),
        fnr: 1.0 - curve.tpr[below - 1],
    }
}

pub fn real_auc(curve: &RealRocCurve) -> f64 {
    let mut area = 0.0;
    let mut prev = (0.0, 0.0);
    for (&x, &y) in curve.fpr.iter().zip(&curve.tpr) {
        area += (x - prev.0) * (y + prev.1) * 0.5;
        prev = (x, y);
    }
    area
}

fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// CSV rendering: `radius,fpr,tpr,fnr`, rates at 9 significant digits.
pub fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("radius,fpr,tpr,fnr\n");
    for (r, (&f, &t)) in curve.fpr.iter().zip(&curve.tpr).enumerate() {
        out.push_str(&format!("{r},{},{},{}\n", sig9(f), sig9(t), sig9(1.0 - t)));
    }
    out
}

/// CSV rendering of the baseline curve: `threshold,fpr,tpr,fnr`.
pub fn real_roc_csv(curve: &RealRocCurve) -> String {
    let mut out = String::from("threshold,fpr,tpr,fnr\n");
    for (i, &t) in curve.thresholds.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            sig9(t),
            sig9(curve.fpr[i]),
            sig9(curve.tpr[i]),
            sig9(1.0 - curve.tpr[i])
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::PairLabel;
    use rand::{Rng, SeedableRng};

    #[test]
    fn perfectly_separated_curve() {
        let pos = vec![0u32; 20];
        let neg = vec![10u32; 30];
        let curve = roc(&pos, &neg, 10).unwrap();
        assert_eq!(curve.tpr()[0], 1.0);
        for r in 0..10 {
            assert_eq!(curve.fpr()[r], 0.0);
        }
        assert_eq!(curve.fpr()[10], 1.0);
        assert_eq!(auc(&curve), 1.0);
        assert_eq!(fnr_at_fpr(&curve, 0.001), 0.0);
    }

    #[test]
    fn identical_distributions_sit_on_the_diagonal() {
        let d: Vec<u32> = (0..=20).collect();
        let curve = roc(&d, &d, 20).unwrap();
        for r in 0..=20 {
            assert_eq!(curve.tpr()[r], curve.fpr()[r]);
        }
        let a = auc(&curve);
        assert!((a - 0.5).abs() <= 1.0 / 21.0, "auc {a}");
        assert!(fnr_at_fpr(&curve, 0.001) >= 0.999);
    }

    #[test]
    fn counting_matches_naive_double_loop() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let m = 32;
        let pos: Vec<u32> = (0..500).map(|_| rng.gen_range(0..=m as u32)).collect();
        let neg: Vec<u32> = (0..500).map(|_| rng.gen_range(0..=m as u32)).collect();
        let curve = roc(&pos, &neg, m).unwrap();
        for r in 0..=m as u32 {
            let tpr = pos.iter().filter(|&&d| d <= r).count() as f64 / pos.len() as f64;
            let fpr = neg.iter().filter(|&&d| d <= r).count() as f64 / neg.len() as f64;
            assert_eq!(curve.tpr()[r as usize], tpr);
            assert_eq!(curve.fpr()[r as usize], fpr);
        }
    }

    #[test]
    fn curve_is_monotone_and_ends_at_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let m = 16;
        let pos: Vec<u32> = (0..100).map(|_| rng.gen_range(0..=m as u32)).collect();
        let neg: Vec<u32> = (0..150).map(|_| rng.gen_range(0..=m as u32)).collect();
        let curve = roc(&pos, &neg, m).unwrap();
        for r in 1..=m {
            assert!(curve.tpr()[r] >= curve.tpr()[r - 1]);
            assert!(curve.fpr()[r] >= curve.fpr()[r - 1]);
        }
        assert_eq!(curve.tpr()[m], 1.0);
        assert_eq!(curve.fpr()[m], 1.0);
    }

    #[test]
    fn operating_point_matches_exhaustive_scan() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let m = 24;
            let pos: Vec<u32> = (0..80).map(|_| rng.gen_range(0..=m as u32)).collect();
            let neg: Vec<u32> = (0..80).map(|_| rng.gen_range(0..=m as u32)).collect();
            let curve = roc(&pos, &neg, m).unwrap();
            for target in [0.001, 0.01, 0.1, 0.5] {
                let got = operating_point(&curve, target);
                // Scan every radius from the top.
                let mut want_r = None;
                for r in (0..=m).rev() {
                    if curve.fpr()[r] <= target {
                        want_r = Some(r as u32);
                        break;
                    }
                }
                assert_eq!(got.radius, want_r, "trial {trial} target {target}");
                let want_fnr = want_r.map_or(1.0, |r| 1.0 - curve.tpr()[r as usize]);
                assert_eq!(got.fnr, want_fnr);
            }
        }
    }

    #[test]
    fn fnr_is_nonincreasing_in_target() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let m = 24;
        let pos: Vec<u32> = (0..60).map(|_| rng.gen_range(0..=m as u32)).collect();
        let neg: Vec<u32> = (0..60).map(|_| rng.gen_range(0..=m as u32)).collect();
        let curve = roc(&pos, &neg, m).unwrap();
        let mut last = f64::INFINITY;
        for target in [0.0001, 0.001, 0.01, 0.1, 0.3, 0.7] {
            let fnr = fnr_at_fpr(&curve, target);
            assert!(fnr <= last);
            last = fnr;
        }
    }

    #[test]
    fn auc_agrees_with_rank_statistic_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for trial in 0..10 {
            let m = 48;
            let pos: Vec<u32> = (0..200)
                .map(|_| rng.gen_range(0..=(m as u32) / 2))
                .collect();
            let neg: Vec<u32> = (0..200).map(|_| rng.gen_range(8..=m as u32)).collect();
            let curve = roc(&pos, &neg, m).unwrap();
            // Mann-Whitney: P(pos < neg) + 0.5 P(pos == neg).
            let mut stat = 0.0;
            for &p in &pos {
                for &n in &neg {
                    if p < n {
                        stat += 1.0;
                    } else if p == n {
                        stat += 0.5;
                    }
                }
            }
            stat /= (pos.len() * neg.len()) as f64;
            let a = auc(&curve);
            assert!(
                (a - stat).abs() <= 2.0 / (m as f64 + 1.0),
                "trial {trial}: {a} vs {stat}"
            );
        }
    }

    #[test]
    fn out_of_range_distance_rejected() {
        assert!(roc(&[5], &[1], 4).is_err());
    }

    #[test]
    fn chance_curve_gives_half_fnr_at_half_target() {
        let d: Vec<u32> = (0..=40).collect();
        let curve = roc(&d, &d, 40).unwrap();
        let fnr = fnr_at_fpr(&curve, 0.5);
        assert!((fnr - 0.5).abs() <= 1.0 / 41.0, "fnr {fnr}");
    }

    fn toy_data() -> (DescriptorSet, PairSet, PairSet) {
        let data = DescriptorSet::from_rows(vec![
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![3.0, 4.0],
            vec![6.0, 8.0],
        ])
        .unwrap();
        let pos = PairSet::new(PairLabel::Positive, vec![(0, 1), (2, 2)], 4, true).unwrap();
        let neg = PairSet::new(PairLabel::Negative, vec![(0, 2), (1, 3)], 4, false).unwrap();
        (data, pos, neg)
    }

    #[test]
    fn baseline_zero_noise_positives_accepted_at_zero() {
        let (data, pos, neg) = toy_data();
        let curve = euclidean_baseline(&data, &pos, &neg).unwrap();
        assert_eq!(curve.thresholds()[0], 0.0);
        assert_eq!(curve.tpr()[0], 1.0);
        assert_eq!(curve.fpr()[0], 0.0);
    }

    #[test]
    fn baseline_matches_naive_counting() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0f32..1.0) as f64).collect())
            .collect();
        let data = DescriptorSet::from_rows(rows).unwrap();
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            let i = rng.gen_range(0..40);
            let j = (i + 1 + rng.gen_range(0..39)) % 40;
            (i, j)
        };
        let pos_pairs: Vec<_> = (0..100).map(|_| draw(&mut rng)).collect();
        let neg_pairs: Vec<_> = (0..100).map(|_| draw(&mut rng)).collect();
        let pos = PairSet::new(PairLabel::Positive, pos_pairs, 40, false).unwrap();
        let neg = PairSet::new(PairLabel::Negative, neg_pairs, 40, false).unwrap();
        let curve = euclidean_baseline(&data, &pos, &neg).unwrap();
        let d_pos = euclidean_pair_distances(&data, &pos).unwrap();
        let d_neg = euclidean_pair_distances(&data, &neg).unwrap();
        for (i, &t) in curve.thresholds().iter().enumerate() {
            let tpr = d_pos.iter().filter(|&&d| d <= t).count() as f64 / d_pos.len() as f64;
            let fpr = d_neg.iter().filter(|&&d| d <= t).count() as f64 / d_neg.len() as f64;
            assert_eq!(curve.tpr()[i], tpr);
            assert_eq!(curve.fpr()[i], fpr);
        }
    }

    #[test]
    fn baseline_rates_invariant_under_descriptor_scaling() {
        let (data, pos, neg) = toy_data();
        let curve = euclidean_baseline(&data, &pos, &neg).unwrap();
        let scaled_rows: Vec<Vec<f64>> = (0..data.count())
            .map(|i| data.row(i).iter().map(|&v| 2.0 * v as f64).collect())
            .collect();
        let scaled = DescriptorSet::from_rows(scaled_rows).unwrap();
        let curve2 = euclidean_baseline(&scaled, &pos, &neg).unwrap();
        for (t, t2) in curve.thresholds().iter().zip(curve2.thresholds()) {
            assert_eq!(2.0 * t, *t2);
        }
        assert_eq!(curve.fpr(), curve2.fpr());
        assert_eq!(curve.tpr(), curve2.tpr());
    }

    #[test]
    fn csv_has_header_and_full_rows() {
        let curve = roc(&[0, 1], &[2, 2], 2).unwrap();
        let csv = roc_csv(&curve);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "radius,fpr,tpr,fnr");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,"));
        assert!(lines[3].starts_with("2,"));
    }
}
