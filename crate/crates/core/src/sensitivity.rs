//! Sensitivity machinery for the top-k indicator: local sensitivity,
//! sensitivity at distance d, and the beta-smooth envelope with its
//! global-sensitivity shortcut.
//!
//! Local sensitivity is the largest symmetric window around the k/k+1
//! boundary whose count spread is at most one: with ranks `l <= k+1 <= j` and
//! `h_(l) - h_(j) <= 1`, the value is the best achievable
//! `min(k + 1 - l, j - (k + 1))`. Counts are integers here; float counts are
//! accepted upstream only at ingestion and are not a validated path for these
//! algorithms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::histogram::SortedView;

/// Local, at-distance, and smooth sensitivity of the top-k release for one
/// histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityProfile {
    pub k: usize,
    pub local: u64,
    /// `at_distance[d]` is the sensitivity at hamming distance `d`, for
    /// `d = 0..=d0-1`.
    pub at_distance: Vec<u64>,
    pub smooth: f64,
    pub beta: f64,
    pub d0: usize,
}

fn check_rank(k: usize, m: usize) -> Result<()> {
    if m < 2 || k < 1 || k > m - 1 {
        return Err(Error::RankOutOfRange {
            rank: k,
            lo: 1,
            hi: m.saturating_sub(1),
        });
    }
    Ok(())
}

/// Window-maximization over sorted counts: the largest `s` with
/// `c[k-s+1] - c[k+s+1] <= 1` (1-based ranks), capped by the domain edges.
fn window_local_sensitivity(counts: &[u64], k: usize) -> u64 {
    let m = counts.len();
    let cap = k.min(m.saturating_sub(k + 1));
    let mut best = 0;
    for s in 1..=cap {
        // 0-based: ranks k-s+1 and k+s+1 are counts[k-s] and counts[k+s].
        if counts[k - s] - counts[k + s] <= 1 {
            best = s;
        }
    }
    best as u64
}

/// Local sensitivity of the top-k indicator at this histogram.
///
/// Zero whenever the gap at k is at least 2, since one user moves each count
/// by at most one.
pub fn local_sensitivity(sv: &SortedView, k: usize) -> Result<u64> {
    check_rank(k, sv.m())?;
    Ok(window_local_sensitivity(sv.sorted_counts(), k))
}

/// Sensitivity at hamming distance `d`: the worst local sensitivity over
/// datasets `d` user-changes away.
///
/// `d = 0` is the local sensitivity itself. For `d >= 1` the worst case is
/// constructed directly: merge the k-th and (k+1)-th counts to their floor
/// average, pull the `k-1` counts above down by `d` (keeping them sorted),
/// push the counts up to rank `2k` up by `d` (likewise), then measure the
/// local sensitivity of the modified view. The view is padded with zero
/// counts when `m < 2k` so the spread has room to work.
pub fn sensitivity_at_distance(sv: &SortedView, k: usize, d: usize) -> Result<u64> {
    check_rank(k, sv.m())?;
    if d == 0 {
        return local_sensitivity(sv, k);
    }
    let mut v: Vec<u64> = sv.sorted_counts().to_vec();
    if v.len() < 2 * k {
        v.resize(2 * k, 0);
    }
    // One user change moves the gap by at most 2 (bounded replacement), so a
    // gap of 2d cannot be closed within distance d.
    if v[k - 1] - v[k] >= 2 * d as u64 {
        return Ok(0);
    }
    let d = d as u64;
    let merged = (v[k - 1] + v[k]) / 2;
    v[k - 1] = merged;
    v[k] = merged;
    for l in (1..k).rev() {
        // rank l, 0-based l-1; stays at least as large as the rank below it
        v[l - 1] = v[l].max(v[l - 1].saturating_sub(d));
    }
    for j in (k + 1)..=(2 * k) {
        // rank j, 0-based j-1; stays no larger than the rank above it
        v[j - 1] = v[j - 2].min(v[j - 1] + d);
    }
    Ok(window_local_sensitivity(&v, k))
}

/// Smooth-sensitivity upper envelope with shortcut horizon `d0`:
/// `max(k e^{-beta d0}, max_{d < d0} e^{-beta d} A^(d))`.
///
/// The first term bounds every tail term by the global sensitivity `k`, so
/// the result is an upper bound on the exact envelope for any `d0 >= 1`.
pub fn smooth_sensitivity(sv: &SortedView, k: usize, beta: f64, d0: usize) -> Result<f64> {
    check_rank(k, sv.m())?;
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::param(
            "beta",
            format!("must be positive, got {beta}"),
        ));
    }
    if d0 < 1 {
        return Err(Error::param("d0", "must be >= 1"));
    }
    let mut best = k as f64 * (-beta * d0 as f64).exp();
    for d in 0..d0 {
        let a = sensitivity_at_distance(sv, k, d)? as f64;
        best = best.max((-beta * d as f64).exp() * a);
    }
    Ok(best)
}

/// Full profile as exposed on the CLI.
pub fn profile(sv: &SortedView, k: usize, beta: f64, d0: usize) -> Result<SensitivityProfile> {
    let local = local_sensitivity(sv, k)?;
    let smooth = smooth_sensitivity(sv, k, beta, d0)?;
    let at_distance = (0..d0)
        .map(|d| sensitivity_at_distance(sv, k, d))
        .collect::<Result<Vec<_>>>()?;
    Ok(SensitivityProfile {
        k,
        local,
        at_distance,
        smooth,
        beta,
        d0,
    })
}
