//! Per-dimension threshold selection.
//!
//! A hash bit is `p(x) + a >= 0` (so `sign(0) := +1`). Sweeping `a`, the
//! false-negative and false-positive rates are piecewise constant and only
//! change where `a` crosses a negated projection value. The candidate grid
//! therefore consists of midpoints between consecutive negated projection
//! values, plus one candidate on each side, which makes the exhaustive
//! search exact over all reals.

use crate::error::{Error, Result};

/// FNR/FPR as step functions of the threshold, tabulated on the candidate
/// grid (ascending).
#[derive(Debug, Clone)]
pub struct RateCurves {
    candidates: Vec<f64>,
    fnr: Vec<f64>,
    fpr: Vec<f64>,
}

impl RateCurves {
    pub fn candidates(&self) -> &[f64] {
        &self.candidates
    }

    pub fn fnr(&self) -> &[f64] {
        &self.fnr
    }

    pub fn fpr(&self) -> &[f64] {
        &self.fpr
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

/// Tabulates FNR/FPR over the candidate grid for one hash dimension.
///
/// `proj_pos` and `proj_neg` hold the projections of both members of each
/// positive / negative training pair. A positive pair is a false negative
/// when its members land on opposite sides of the threshold; a negative
/// pair is a false positive when its members land on the same side.
pub fn rate_curves(proj_pos: &[(f64, f64)], proj_neg: &[(f64, f64)]) -> Result<RateCurves> {
    if proj_pos.is_empty() || proj_neg.is_empty() {
        return Err(Error::invalid("rate curves need nonempty projection lists"));
    }
    let mut breakpoints = Vec::with_capacity(2 * (proj_pos.len() + proj_neg.len()));
    for &(u, v) in proj_pos.iter().chain(proj_neg) {
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::invalid("non-finite projection value"));
        }
        breakpoints.push(-u);
        breakpoints.push(-v);
    }
    breakpoints.sort_by(|a, b| a.partial_cmp(b).unwrap());
    breakpoints.dedup();

    let mut candidates = Vec::with_capacity(breakpoints.len() + 1);
    candidates.push(breakpoints[0] - 1.0);
    for w in breakpoints.windows(2) {
        candidates.push(0.5 * (w[0] + w[1]));
    }
    candidates.push(breakpoints[breakpoints.len() - 1] + 1.0);

    // A pair with members u, v is split by the threshold iff
    // a ∈ [-max(u,v), -min(u,v)); count interval coverage per candidate.
    let split_counts = |pairs: &[(f64, f64)]| -> Vec<usize> {
        let mut starts: Vec<f64> = pairs.iter().map(|&(u, v)| -u.max(v)).collect();
        let mut ends: Vec<f64> = pairs.iter().map(|&(u, v)| -u.min(v)).collect();
        starts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ends.sort_by(|a, b| a.partial_cmp(b).unwrap());
        candidates
            .iter()
            .map(|&a| {
                let begun = starts.partition_point(|&s| s <= a);
                let done = ends.partition_point(|&e| e <= a);
                begun - done
            })
            .collect()
    };

    let fnr = split_counts(proj_pos)
        .into_iter()
        .map(|split| split as f64 / proj_pos.len() as f64)
        .collect();
    let fpr = split_counts(proj_neg)
        .into_iter()
        .map(|split| (proj_neg.len() - split) as f64 / proj_neg.len() as f64)
        .collect();

    Ok(RateCurves {
        candidates,
        fnr,
        fpr,
    })
}

/// Index of the candidate minimizing `alpha·FNR + FPR`. Ties go to the
/// candidate with the smallest magnitude, then to the smaller value.
pub fn optimal_index(curves: &RateCurves, alpha: f64) -> usize {
    assert!(!curves.is_empty(), "empty rate curves");
    let mut best = 0usize;
    let mut best_obj = alpha * curves.fnr[0] + curves.fpr[0];
    for i in 1..curves.len() {
        let obj = alpha * curves.fnr[i] + curves.fpr[i];
        let better = obj < best_obj
            || (obj == best_obj
                && (curves.candidates[i].abs() < curves.candidates[best].abs()
                    || (curves.candidates[i].abs() == curves.candidates[best].abs()
                        && curves.candidates[i] < curves.candidates[best])));
        if better {
            best = i;
            best_obj = obj;
        }
    }
    best
}

/// The optimal threshold value itself.
pub fn optimal_threshold(curves: &RateCurves, alpha: f64) -> f64 {
    curves.candidates[optimal_index(curves, alpha)]
}
