//! Selection mechanisms: regularized large-gap choice of k, generalized
//! report-noisy-max, Gaussian and Laplace stability tests, stable top-k with
//! adaptive and fixed k, one-shot exponential-mechanism top-k, and the
//! teacher-vote labeling wrapper.
//!
//! Every mechanism is pure given its inputs and a [`NoiseSource`], and every
//! receipt carries the RDP curve the invocation consumed so callers can audit
//! the books. The refusal outcome is first-class: a failed stability test
//! returns [`SelectionOutcome::Bottom`], never an empty set.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::accountant::RdpCurve;
use crate::error::{Error, Result};
use crate::histogram::{Histogram, SelectionOutcome, SortedView};
use crate::noise::{NoiseKind, NoiseShape, NoiseSource, Recording};

/// Additive score adjustment for the large-gap selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    Zero,
    /// Pull the chosen rank toward `target`: r(j) = -weight * |j - target|.
    AbsDistance {
        target: usize,
        weight: f64,
    },
    /// Restrict the choice to ranks `1..=max_rank` (scores beyond are minus
    /// infinity), the unknown-domain trick that also shrinks the RNM overhead.
    DomainRestriction {
        max_rank: usize,
    },
}

impl Regularizer {
    fn validate(&self, m: usize) -> Result<()> {
        match *self {
            Regularizer::Zero => Ok(()),
            Regularizer::AbsDistance { weight, .. } => {
                if !weight.is_finite() || weight < 0.0 {
                    Err(Error::param(
                        "weight",
                        format!("must be >= 0, got {weight}"),
                    ))
                } else {
                    Ok(())
                }
            }
            Regularizer::DomainRestriction { max_rank } => {
                if max_rank < 1 || max_rank >= m {
                    Err(Error::param(
                        "max_rank",
                        format!("must be in [1, m), got {max_rank} for m = {m}"),
                    ))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// r(j) for a 1-based rank; `-inf` removes the rank from the domain.
    pub fn value(&self, j: usize) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::AbsDistance { target, weight } => {
                -weight * (j as f64 - target as f64).abs()
            }
            Regularizer::DomainRestriction { max_rank } => {
                if j <= max_rank {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

/// What a mechanism invocation produced and what it cost.
#[derive(Debug, Clone, Serialize)]
pub struct MechanismReceipt {
    pub outcome: SelectionOutcome,
    /// Rank released by the gap selection. For the fixed-k mechanism this is
    /// `None` when the stability core refused and a full fallback ran.
    pub chosen_k: Option<usize>,
    /// RDP curve consumed, failure mass included.
    pub curve: RdpCurve,
    /// Nominal pure-DP budget of any exponential-mechanism rounds, reported
    /// alongside the curve-based accounting.
    pub pure_dp_eps: Option<f64>,
    /// Standard noise draws used, populated by [`run_traced`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<f64>>,
}

/// Runs a mechanism under a recording wrapper and attaches the draw trace to
/// its receipt. Test support; production callers use the mechanisms directly.
pub fn run_traced<F>(src: &mut dyn NoiseSource, f: F) -> Result<MechanismReceipt>
where
    F: FnOnce(&mut dyn NoiseSource) -> Result<MechanismReceipt>,
{
    let mut rec = Recording::new(src);
    let mut receipt = f(&mut rec)?;
    receipt.trace = Some(rec.into_log());
    Ok(receipt)
}

/// Chooses the rank with the (approximately) largest regularized gap:
/// argmax over `j in [1, m-1]` of `gap(j) + r(j) + Gumbel(2/eps)`.
///
/// Returns the rank and the consumed curve (bounded-range RDP of the
/// exponential mechanism at `eps`; the selection is also pure eps-DP).
pub fn regularized_large_gap(
    sv: &SortedView,
    r: &Regularizer,
    eps: f64,
    src: &mut dyn NoiseSource,
) -> Result<(usize, RdpCurve)> {
    let m = sv.m();
    if m < 2 {
        return Err(Error::param(
            "m",
            "need at least 2 candidates to choose a rank",
        ));
    }
    r.validate(m)?;
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::param("eps", format!("must be positive, got {eps}")));
    }
    let scale = 2.0 / eps;
    let mut best: Option<(f64, usize)> = None;
    for j in 1..m {
        let reg = r.value(j);
        if reg == f64::NEG_INFINITY {
            continue;
        }
        let score = sv.gap(j)? as f64 + reg + scale * src.standard(NoiseShape::Gumbel);
        if best.is_none_or(|(b, _)| score > b) {
            best = Some((score, j));
        }
    }
    let (_, k) = best.ok_or(Error::EmptyDomain)?;
    Ok((k, RdpCurve::em_bounded_range(eps)?))
}

/// Report-noisy-max: argmax of `scores[i] + noise_i`, ties to the lowest
/// index. The consumed curve treats the scores as sensitivity-2 scalars and
/// adds the ln(m)/(alpha-1) selection overhead for Gaussian and Laplace
/// noise; Gumbel is the exponential mechanism and keeps its bounded-range
/// curve.
pub fn rnm_select(
    scores: &[f64],
    kind: NoiseKind,
    src: &mut dyn NoiseSource,
) -> Result<(usize, RdpCurve)> {
    if scores.is_empty() {
        return Err(Error::EmptyDomain);
    }
    kind.validate()?;
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (i, &s) in scores.iter().enumerate() {
        let noisy = s + kind.scale() * src.standard(kind.shape());
        if noisy > best.0 {
            best = (noisy, i);
        }
    }
    let m = scores.len();
    let curve = match kind {
        NoiseKind::Gaussian { sigma } => {
            RdpCurve::rnm_generic(&RdpCurve::gaussian(sigma, 2.0)?, m)?
        }
        NoiseKind::Laplace { scale } => {
            // Sensitivity-2 scalar under Lap(scale) is pure 2/scale-DP.
            RdpCurve::rnm_generic(&RdpCurve::pure_dp(2.0 / scale)?, m)?
        }
        NoiseKind::Gumbel { scale } => RdpCurve::em_bounded_range(2.0 / scale)?,
    };
    Ok((best.1, curve))
}

fn check_test_rank(k: usize, m: usize) -> Result<()> {
    if m < 2 || k < 1 || k > m - 1 {
        return Err(Error::RankOutOfRange {
            rank: k,
            lo: 1,
            hi: m.saturating_sub(1),
        });
    }
    Ok(())
}

fn check_delta_t(delta_t: f64) -> Result<()> {
    if delta_t.is_nan() || delta_t <= 0.0 || delta_t >= 1.0 {
        return Err(Error::param(
            "delta_t",
            format!("must be in (0,1), got {delta_t}"),
        ));
    }
    Ok(())
}

/// Gaussian stability test: releases the top-k indices exactly when a
/// high-probability lower bound of the gap clears the threshold.
///
/// `q_hat = max(1, q_k) + N(0, sigma^2) - sigma sqrt(2 ln(1/delta_t))`;
/// indices are released iff `q_hat > 1`. Consumes a sensitivity-1 Gaussian
/// curve with `delta_t` failure mass attached.
pub fn ptr_gaussian(
    sv: &SortedView,
    k: usize,
    sigma: f64,
    delta_t: f64,
    src: &mut dyn NoiseSource,
) -> Result<(SelectionOutcome, RdpCurve)> {
    check_test_rank(k, sv.m())?;
    check_delta_t(delta_t)?;
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::param(
            "sigma",
            format!("must be positive, got {sigma}"),
        ));
    }
    let q_k = sv.gap(k)? as f64;
    let q_hat = q_k.max(1.0) + sigma * src.standard(NoiseShape::Gaussian)
        - sigma * (2.0 * (1.0 / delta_t).ln()).sqrt();
    let outcome = if q_hat > 1.0 {
        sv.top_k_indices(k)?
    } else {
        SelectionOutcome::Bottom
    };
    let curve = RdpCurve::gaussian(sigma, 1.0)?.with_delta_t(delta_t)?;
    Ok((outcome, curve))
}

/// Laplace stability test, as printed: `q_hat = q_k + Lap(1/eps) -
/// ln(1/delta_t)/eps` with no clamp; indices released iff `q_hat > 1`.
/// Consumes an (eps, delta_t)-DP budget, carried as the pure-DP curve.
pub fn ptr_laplace(
    sv: &SortedView,
    k: usize,
    eps: f64,
    delta_t: f64,
    src: &mut dyn NoiseSource,
) -> Result<(SelectionOutcome, RdpCurve)> {
    check_test_rank(k, sv.m())?;
    check_delta_t(delta_t)?;
    if !eps.is_finite() || eps <= 0.0 {
        return Err(Error::param("eps", format!("must be positive, got {eps}")));
    }
    let q_k = sv.gap(k)? as f64;
    let q_hat = q_k + src.standard(NoiseShape::Laplace) / eps - (1.0 / delta_t).ln() / eps;
    let outcome = if q_hat > 1.0 {
        sv.top_k_indices(k)?
    } else {
        SelectionOutcome::Bottom
    };
    let curve = RdpCurve::pure_dp(eps)?.with_delta_t(delta_t)?;
    Ok((outcome, curve))
}

/// Stable top-k with a data-chosen k: pick the rank with the largest
/// regularized gap at `eps = 2 sqrt(rho)`, then run the Gaussian stability
/// test at `sigma = sqrt(1/rho)`. Total cost is `delta_t`-approximate
/// rho-zCDP, carried exactly as the composition of the two sub-curves.
pub fn stable_top_k_adaptive(
    h: &Histogram,
    r: &Regularizer,
    rho: f64,
    delta_t: f64,
    src: &mut dyn NoiseSource,
) -> Result<MechanismReceipt> {
    if !rho.is_finite() || rho <= 0.0 {
        return Err(Error::param("rho", format!("must be positive, got {rho}")));
    }
    check_delta_t(delta_t)?;
    let sv = h.sorted();
    let (k, em_curve) = regularized_large_gap(&sv, r, 2.0 * rho.sqrt(), src)?;
    let (outcome, gap_curve) = ptr_gaussian(&sv, k, (1.0 / rho).sqrt(), delta_t, src)?;
    Ok(MechanismReceipt {
        outcome,
        chosen_k: Some(k),
        curve: RdpCurve::compose(&[em_curve, gap_curve])?,
        pure_dp_eps: None,
        trace: None,
    })
}

/// One-shot exponential-mechanism top-k over an explicit candidate slice.
fn em_top_k_on(
    candidates: &[(usize, u64)],
    k: usize,
    eps_round: f64,
    src: &mut dyn NoiseSource,
) -> Result<(BTreeSet<usize>, RdpCurve)> {
    if k < 1 || k > candidates.len() {
        return Err(Error::RankOutOfRange {
            rank: k,
            lo: 1,
            hi: candidates.len(),
        });
    }
    if !eps_round.is_finite() || eps_round <= 0.0 {
        return Err(Error::param(
            "eps_round",
            format!("must be positive, got {eps_round}"),
        ));
    }
    let scale = 2.0 / eps_round;
    let mut noisy: Vec<(f64, usize)> = candidates
        .iter()
        .map(|&(id, c)| (c as f64 + scale * src.standard(NoiseShape::Gumbel), id))
        .collect();
    // Descending noisy count, ties (probability zero) to the lowest id.
    noisy.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let set: BTreeSet<usize> = noisy[..k].iter().map(|&(_, id)| id).collect();
    let curve = RdpCurve::em_bounded_range(eps_round)?.repeat(k as u32)?;
    Ok((set, curve))
}

/// One-shot Gumbel top-k: add Gumbel(2/eps_round) to every count and keep the
/// k largest noisy counts. Distributionally equal to k rounds of
/// exponential-mechanism peeling at `eps_round` each, and accounted as that
/// k-fold composition.
pub fn em_top_k_peel(
    h: &Histogram,
    k: usize,
    eps_round: f64,
    src: &mut dyn NoiseSource,
) -> Result<(BTreeSet<usize>, RdpCurve)> {
    let candidates: Vec<(usize, u64)> = h.counts().iter().copied().enumerate().collect();
    em_top_k_on(&candidates, k, eps_round, src)
}

/// Stable top-k that must return exactly `k` indices.
///
/// Half the budget goes to the adaptive core with regularizer
/// `-lambda |j - k|`; the other half covers the exponential-mechanism
/// fallback. With the core's released rank `kt`:
/// refusal falls back to a full top-k peel; `kt = k` returns the release;
/// `kt > k` peels k out of the released candidates; `kt < k` keeps the
/// release and peels the remainder from the unreleased candidates, so the
/// result always holds exactly `k` distinct indices. Each fallback round uses
/// `eps_round = sqrt(4 rho / rounds)`, making the composed bounded-range zCDP
/// of the fallback exactly rho/2 in every branch.
pub fn stable_top_k_fixed(
    h: &Histogram,
    k: usize,
    lambda: f64,
    rho: f64,
    delta_t: f64,
    src: &mut dyn NoiseSource,
) -> Result<MechanismReceipt> {
    let m = h.m();
    check_test_rank(k, m)?;
    let r = Regularizer::AbsDistance {
        target: k,
        weight: lambda,
    };
    let core = stable_top_k_adaptive(h, &r, rho / 2.0, delta_t, src)?;
    let eps_em_nominal = 2.0 * rho.sqrt();
    let eps_round = |rounds: usize| (4.0 * rho / rounds as f64).sqrt();

    let (indices, peel_curve, chosen_k) = match &core.outcome {
        SelectionOutcome::Bottom => {
            let (set, curve) = em_top_k_peel(h, k, eps_round(k), src)?;
            (set, Some(curve), None)
        }
        SelectionOutcome::Indices(released) => {
            let kt = released.len();
            if kt == k {
                (released.clone(), None, Some(kt))
            } else if kt > k {
                let pool: Vec<(usize, u64)> =
                    released.iter().map(|&id| (id, h.count(id))).collect();
                let (set, curve) = em_top_k_on(&pool, k, eps_round(k), src)?;
                (set, Some(curve), Some(kt))
            } else {
                // kt < k: released indices are kept; the remainder is peeled
                // from the candidates not already released, so the result
                // stays a set of k distinct ids.
                let pool: Vec<(usize, u64)> = (0..m)
                    .filter(|id| !released.contains(id))
                    .map(|id| (id, h.count(id)))
                    .collect();
                let (extra, curve) = em_top_k_on(&pool, k - kt, eps_round(k - kt), src)?;
                let mut set = released.clone();
                set.extend(extra);
                (set, Some(curve), Some(kt))
            }
        }
    };
    debug_assert_eq!(indices.len(), k);

    let curve = match &peel_curve {
        Some(p) => RdpCurve::compose(&[core.curve.clone(), p.clone()])?,
        None => core.curve.clone(),
    };
    Ok(MechanismReceipt {
        outcome: SelectionOutcome::Indices(indices),
        chosen_k,
        curve,
        pure_dp_eps: Some(eps_em_nominal),
        trace: None,
    })
}

/// Binary teacher votes: `teachers x classes`, entry true when a teacher
/// voted for that class.
#[derive(Debug, Clone)]
pub struct VoteMatrix {
    teachers: usize,
    classes: usize,
    bits: Vec<bool>,
}

impl VoteMatrix {
    pub fn new(rows: Vec<Vec<bool>>) -> Result<Self> {
        let teachers = rows.len();
        let classes = rows.first().map_or(0, |r| r.len());
        if classes < 2 {
            return Err(Error::param("classes", "need at least 2 classes"));
        }
        if rows.iter().any(|r| r.len() != classes) {
            return Err(Error::param(
                "rows",
                "all teacher rows must have equal length",
            ));
        }
        Ok(Self {
            teachers,
            classes,
            bits: rows.into_iter().flatten().collect(),
        })
    }

    pub fn teachers(&self) -> usize {
        self.teachers
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Per-class vote counts.
    pub fn counts(&self) -> Histogram {
        let mut counts = vec![0u64; self.classes];
        for row in self.bits.chunks(self.classes) {
            for (count, &bit) in counts.iter_mut().zip(row) {
                *count += bit as u64;
            }
        }
        Histogram::from_counts(counts).expect("classes >= 2")
    }
}

/// Accumulates the curves of a sequence of labeling queries.
#[derive(Debug, Clone)]
pub struct RdpLedger {
    total: RdpCurve,
    queries: u64,
}

impl RdpLedger {
    pub fn new() -> Self {
        Self {
            total: RdpCurve::zero(),
            queries: 0,
        }
    }

    pub fn total(&self) -> &RdpCurve {
        &self.total
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    fn charge(&mut self, curve: &RdpCurve) -> Result<()> {
        if self.total.delta_t() + curve.delta_t() >= 1.0 {
            return Err(Error::BudgetExhausted(format!(
                "ledger failure mass would reach {}",
                self.total.delta_t() + curve.delta_t()
            )));
        }
        self.total = RdpCurve::compose(&[self.total.clone(), curve.clone()])?;
        self.queries += 1;
        Ok(())
    }
}

impl Default for RdpLedger {
    fn default() -> Self {
        Self::new()
    }
}

/// Labels one example from an ensemble's binary votes: builds the per-class
/// vote histogram, runs the adaptive stable top-k, and charges the consumed
/// curve to the ledger. Refusal comes back as the empty label set.
pub fn pate_label(
    votes: &VoteMatrix,
    rho: f64,
    delta_t: f64,
    ledger: &mut RdpLedger,
    src: &mut dyn NoiseSource,
) -> Result<BTreeSet<usize>> {
    if ledger.total.delta_t() + delta_t >= 1.0 {
        return Err(Error::BudgetExhausted(
            "ledger failure mass would reach 1".into(),
        ));
    }
    let h = votes.counts();
    let receipt = stable_top_k_adaptive(&h, &Regularizer::Zero, rho, delta_t, src)?;
    ledger.charge(&receipt.curve)?;
    Ok(match receipt.outcome {
        SelectionOutcome::Bottom => BTreeSet::new(),
        SelectionOutcome::Indices(s) => s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{ForcedSource, RngStream};

    fn hist(counts: &[u64]) -> Histogram {
        Histogram::from_counts(counts.to_vec()).unwrap()
    }

    #[test]
    fn large_gap_noiseless_argmax() {
        // gaps [1, 9, 2] -> rank 2.
        let h = hist(&[13, 12, 3, 1]);
        let sv = h.sorted();
        let mut z = ForcedSource::zeros();
        let (k, _) = regularized_large_gap(&sv, &Regularizer::Zero, 1.0, &mut z).unwrap();
        assert_eq!(k, 2);
    }

    #[test]
    fn large_gap_abs_distance_regularizer() {
        // gaps [5, 5, 1]; with r(j) = -10|j-3| the scores are [-15, -5, 1].
        let h = hist(&[12, 7, 2, 1]);
        let sv = h.sorted();
        let r = Regularizer::AbsDistance {
            target: 3,
            weight: 10.0,
        };
        let mut z = ForcedSource::zeros();
        let (k, _) = regularized_large_gap(&sv, &r, 1.0, &mut z).unwrap();
        assert_eq!(k, 3);
    }

    #[test]
    fn large_gap_domain_restriction() {
        // Best gap sits at rank 4, but the domain stops at rank 2.
        let h = hist(&[9, 8, 7, 6, 0]);
        let sv = h.sorted();
        let r = Regularizer::DomainRestriction { max_rank: 2 };
        let mut z = ForcedSource::zeros();
        let (k, _) = regularized_large_gap(&sv, &r, 1.0, &mut z).unwrap();
        assert!(k <= 2);
        assert_eq!(k, 1); // gaps [1,1] tie, first wins under zero noise
    }

    #[test]
    fn large_gap_rejects_empty_domain_and_bad_params() {
        let h = hist(&[5, 4, 3]);
        let sv = h.sorted();
        let mut z = ForcedSource::zeros();
        assert!(matches!(
            regularized_large_gap(
                &sv,
                &Regularizer::DomainRestriction { max_rank: 3 },
                1.0,
                &mut z
            ),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(regularized_large_gap(&sv, &Regularizer::Zero, 0.0, &mut z).is_err());
        let single = hist(&[5]);
        assert!(regularized_large_gap(&single.sorted(), &Regularizer::Zero, 1.0, &mut z).is_err());
    }

    #[test]
    fn rnm_noiseless_and_tie_break() {
        let mut z = ForcedSource::zeros();
        let (i, _) = rnm_select(
            &[0.0, 10.0, 0.0],
            NoiseKind::Gaussian { sigma: 1.0 },
            &mut z,
        )
        .unwrap();
        assert_eq!(i, 1);
        let (i, _) = rnm_select(&[3.0, 3.0], NoiseKind::Laplace { scale: 1.0 }, &mut z).unwrap();
        assert_eq!(i, 0);
        let (i, curve) = rnm_select(&[7.0], NoiseKind::Gaussian { sigma: 2.0 }, &mut z).unwrap();
        assert_eq!(i, 0);
        // m = 1: no selection overhead.
        let base = RdpCurve::gaussian(2.0, 2.0).unwrap();
        assert_eq!(curve, base);
    }

    #[test]
    fn rnm_shift_invariance_under_fixed_trace() {
        let trace: Vec<f64> = (0..5).map(|i| (i as f64) * 0.37 - 1.0).collect();
        let scores = [0.3, 1.2, -0.5, 0.9, 0.0];
        let shifted: Vec<f64> = scores.iter().map(|s| s + 123.456).collect();
        for kind in [
            NoiseKind::Gaussian { sigma: 1.7 },
            NoiseKind::Laplace { scale: 0.8 },
            NoiseKind::Gumbel { scale: 2.0 },
        ] {
            let (a, _) = rnm_select(&scores, kind, &mut ForcedSource::new(trace.clone())).unwrap();
            let (b, _) = rnm_select(&shifted, kind, &mut ForcedSource::new(trace.clone())).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ptr_gaussian_noiseless_examples() {
        // q_k = 10, sigma = 2, delta_t = 0.01: q_hat = 10 - 2 sqrt(2 ln 100).
        let h = hist(&[20, 10, 0, 0]);
        let sv = h.sorted();
        let mut z = ForcedSource::zeros();
        let (out, curve) = ptr_gaussian(&sv, 2, 2.0, 0.01, &mut z).unwrap();
        assert_eq!(out, SelectionOutcome::Indices([0, 1].into()));
        assert!((curve.eps_at(2.0) - 2.0 / (2.0 * 4.0)).abs() < 1e-12);
        assert_eq!(curve.delta_t(), 0.01);

        // Zero gap clamps to 1 and fails the threshold under zero noise.
        let flat = hist(&[5, 5, 5]);
        let (out, _) = ptr_gaussian(&flat.sorted(), 1, 2.0, 0.01, &mut z).unwrap();
        assert_eq!(out, SelectionOutcome::Bottom);
    }

    #[test]
    fn ptr_gaussian_huge_gap_almost_always_releases() {
        let h = hist(&[1_000_000, 0, 0, 0]);
        let sv = h.sorted();
        let rng = RngStream::new(11);
        let trials = 2000;
        let mut released = 0;
        for i in 0..trials {
            let mut s = rng.fork(i);
            let (out, _) = ptr_gaussian(&sv, 1, 1.0, 0.05, &mut s).unwrap();
            if !out.is_bottom() {
                released += 1;
            }
        }
        assert!(released as f64 / trials as f64 > 0.999);
    }

    #[test]
    fn ptr_laplace_noiseless_examples() {
        // q_k = 10, eps = 1, delta_t = 0.01: q_hat = 10 - ln(100) = 5.39 > 1.
        let h = hist(&[12, 2]);
        let sv = h.sorted();
        let mut z = ForcedSource::zeros();
        let (out, _) = ptr_laplace(&sv, 1, 1.0, 0.01, &mut z).unwrap();
        assert_eq!(out, SelectionOutcome::Indices([0].into()));

        // q_k = 1 can never clear the threshold without noise: no clamp here.
        let h = hist(&[3, 2]);
        let (out, _) = ptr_laplace(&h.sorted(), 1, 1.0, 0.5, &mut z).unwrap();
        assert_eq!(out, SelectionOutcome::Bottom);
    }

    #[test]
    fn ptr_pass_is_monotone_in_the_gap_under_a_fixed_trace() {
        // With the noise draw pinned, growing the tested gap can flip a
        // refusal into a release but never the reverse.
        for &z in &[-0.83, 0.0, 1.7, -2.9] {
            let trace = vec![z];
            let mut released_before = false;
            for gap in 0..40u64 {
                let h = hist(&[10 + gap, 10, 1]);
                let (out, _) = ptr_gaussian(
                    &h.sorted(),
                    1,
                    2.0,
                    0.05,
                    &mut ForcedSource::new(trace.clone()),
                )
                .unwrap();
                let released = !out.is_bottom();
                assert!(released || !released_before, "gap {gap} z {z}");
                released_before = released;
            }
        }
    }

    #[test]
    fn ptr_rank_and_parameter_errors() {
        let h = hist(&[5, 4, 3]);
        let sv = h.sorted();
        let mut z = ForcedSource::zeros();
        assert!(ptr_gaussian(&sv, 0, 1.0, 0.1, &mut z).is_err());
        assert!(ptr_gaussian(&sv, 3, 1.0, 0.1, &mut z).is_err());
        assert!(ptr_gaussian(&sv, 1, 0.0, 0.1, &mut z).is_err());
        assert!(ptr_gaussian(&sv, 1, 1.0, 0.0, &mut z).is_err());
        assert!(ptr_laplace(&sv, 1, -1.0, 0.1, &mut z).is_err());
        assert!(ptr_laplace(&sv, 1, 1.0, 1.0, &mut z).is_err());
    }

    #[test]
    fn adaptive_receipt_curve_is_the_exact_composition() {
        let h = hist(&[100, 100, 100, 0, 0, 0]);
        let rho = 0.5;
        let delta_t = 1e-6;
        let mut rng = RngStream::new(3);
        let receipt =
            stable_top_k_adaptive(&h, &Regularizer::Zero, rho, delta_t, &mut rng).unwrap();
        let em = RdpCurve::em_bounded_range(2.0 * rho.sqrt()).unwrap();
        let gauss = RdpCurve::gaussian((1.0 / rho).sqrt(), 1.0)
            .unwrap()
            .with_delta_t(delta_t)
            .unwrap();
        let expect = RdpCurve::compose(&[em, gauss]).unwrap();
        assert_eq!(receipt.curve, expect);
        // ... and sits at or below the rho-zCDP line.
        for (&a, &e) in receipt
            .curve
            .orders()
            .iter()
            .zip(receipt.curve.eps_values())
        {
            assert!(e <= rho * a + 1e-12);
        }
    }

    #[test]
    fn adaptive_releases_heavy_bins_with_wide_gap() {
        // Three bins at 100 among 50: the gap dwarfs the stability threshold
        // so the exact heavy set comes back nearly always.
        let mut counts = vec![0u64; 50];
        counts[..3].fill(100);
        let h = hist(&counts);
        let rng = RngStream::new(19);
        let mut exact = 0;
        let trials = 1000;
        for i in 0..trials {
            let mut s = rng.fork(i);
            let receipt = stable_top_k_adaptive(&h, &Regularizer::Zero, 0.5, 1e-6, &mut s).unwrap();
            if receipt.outcome.indices() == Some(&BTreeSet::from([0, 1, 2])) {
                exact += 1;
            }
        }
        assert!(exact as f64 / trials as f64 >= 0.99, "exact = {exact}");
    }

    #[test]
    fn adaptive_all_equal_counts_bottoms_out() {
        let h = hist(&[7; 20]);
        let rng = RngStream::new(5);
        let mut bottoms = 0;
        let trials = 500;
        for i in 0..trials {
            let mut s = rng.fork(i);
            let receipt = stable_top_k_adaptive(&h, &Regularizer::Zero, 0.5, 1e-6, &mut s).unwrap();
            if receipt.outcome.is_bottom() {
                bottoms += 1;
            }
        }
        assert_eq!(bottoms, trials);
    }

    #[test]
    fn em_peel_noiseless_returns_true_top_k() {
        let h = hist(&[3, 2, 1, 0]);
        let mut z = ForcedSource::zeros();
        let (set, curve) = em_top_k_peel(&h, 2, 1.0, &mut z).unwrap();
        assert_eq!(set, [0, 1].into());
        let expect = RdpCurve::em_bounded_range(1.0).unwrap().repeat(2).unwrap();
        assert_eq!(curve, expect);

        let (all, _) = em_top_k_peel(&h, 4, 1.0, &mut ForcedSource::zeros()).unwrap();
        assert_eq!(all, [0, 1, 2, 3].into());
    }

    #[test]
    fn fixed_k_always_returns_exactly_k() {
        let h = hist(&[9, 9, 9, 9, 0, 0, 0, 0, 0, 0]);
        let rng = RngStream::new(17);
        for i in 0..300 {
            let mut s = rng.fork(i);
            let receipt = stable_top_k_fixed(&h, 3, 1.0, 0.5, 1e-6, &mut s).unwrap();
            let set = receipt.outcome.indices().expect("fixed-k never bottoms");
            assert_eq!(set.len(), 3);
            assert!(set.iter().all(|&id| id < 10));
        }
    }

    #[test]
    fn fixed_k_dominant_branch_finds_the_heavy_bins() {
        // Gap comfortably above the stability threshold: the chosen rank is k
        // and the release goes through untouched.
        let mut counts = vec![0u64; 20];
        counts[..3].fill(100);
        let h = hist(&counts);
        let rng = RngStream::new(23);
        let mut exact = 0;
        let trials = 1000;
        for i in 0..trials {
            let mut s = rng.fork(i);
            let receipt = stable_top_k_fixed(&h, 3, 1.0, 0.5, 1e-6, &mut s).unwrap();
            if receipt.outcome.indices().unwrap() == &BTreeSet::from([0, 1, 2]) {
                exact += 1;
            }
        }
        assert!(exact as f64 / trials as f64 >= 0.99, "exact = {exact}");
    }

    #[test]
    fn fixed_k_wider_plateau_keeps_result_inside_it() {
        // Four heavy bins but k = 3: the core releases the plateau of four
        // and the shrunk peel picks three of them.
        let mut counts = vec![0u64; 20];
        counts[..4].fill(100);
        let h = hist(&counts);
        let rng = RngStream::new(29);
        let mut inside = 0;
        let mut saw_kt_above_k = 0;
        let trials = 500;
        for i in 0..trials {
            let mut s = rng.fork(i);
            let receipt = stable_top_k_fixed(&h, 3, 1.0, 0.5, 1e-6, &mut s).unwrap();
            let set = receipt.outcome.indices().unwrap();
            assert_eq!(set.len(), 3);
            if set.iter().all(|&id| id < 4) {
                inside += 1;
            }
            if receipt.chosen_k == Some(4) {
                saw_kt_above_k += 1;
            }
        }
        assert!(inside as f64 / trials as f64 >= 0.95, "inside = {inside}");
        assert!(saw_kt_above_k as f64 / trials as f64 >= 0.9);
    }

    #[test]
    fn fixed_k_lambda_zero_matches_unregularized_gap_choice() {
        let h = hist(&[9, 9, 5, 0, 0]);
        let mut forced = ForcedSource::zeros();
        let receipt = stable_top_k_fixed(&h, 2, 0.0, 0.5, 0.5, &mut forced).unwrap();
        // With zero noise and no regularizer the gap argmax is rank 3
        // (gap 5), not the requested 2; the release passes at this delta_t
        // and the k-of-3 peel shrinks it.
        assert_eq!(receipt.chosen_k, Some(3));
        let set = receipt.outcome.indices().unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.iter().all(|&id| id < 3));
    }

    #[test]
    fn pate_unanimous_teachers_release_their_labels() {
        let teachers = 800;
        let classes = 10;
        let row: Vec<bool> = (0..classes).map(|c| c == 1 || c == 4).collect();
        let votes = VoteMatrix::new(vec![row; teachers]).unwrap();
        let mut ledger = RdpLedger::new();
        let rng = RngStream::new(31);
        let mut exact = 0;
        let trials = 300;
        for i in 0..trials {
            let mut s = rng.fork(i);
            let labels = pate_label(&votes, 0.5, 1e-6, &mut ledger, &mut s).unwrap();
            if labels == BTreeSet::from([1, 4]) {
                exact += 1;
            }
        }
        assert!(exact as f64 / trials as f64 >= 0.99);
        // Q queries compose to the Q-scaled per-query curve with Q * delta_t
        // failure mass (up to iterated-addition rounding).
        assert_eq!(ledger.queries(), trials);
        let per = crate::accountant::MechanismSpec::AdaptiveStableTopK
            .per_query_curve(0.5, 1e-6)
            .unwrap();
        let total = per.repeat(trials as u32).unwrap();
        for (a, b) in ledger.total().eps_values().iter().zip(total.eps_values()) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
        assert!((ledger.total().delta_t() - total.delta_t()).abs() < 1e-15);
    }

    #[test]
    fn pate_zero_votes_is_bottom() {
        let votes = VoteMatrix::new(vec![vec![false; 5]; 50]).unwrap();
        let mut ledger = RdpLedger::new();
        let mut rng = RngStream::new(37);
        let labels = pate_label(&votes, 0.5, 1e-6, &mut ledger, &mut rng).unwrap();
        assert!(labels.is_empty());
    }

    #[test]
    fn pate_refuses_when_failure_mass_saturates() {
        let votes = VoteMatrix::new(vec![vec![true, false]; 3]).unwrap();
        let mut ledger = RdpLedger::new();
        let mut rng = RngStream::new(41);
        pate_label(&votes, 0.5, 0.6, &mut ledger, &mut rng).unwrap();
        let err = pate_label(&votes, 0.5, 0.6, &mut ledger, &mut rng).unwrap_err();
        assert!(matches!(err, Error::BudgetExhausted(_)));
    }

    #[test]
    fn traced_run_captures_the_draws() {
        let h = hist(&[9, 9, 0, 0]);
        let mut rng = RngStream::new(43);
        let receipt = run_traced(&mut rng, |src| {
            stable_top_k_adaptive(&h, &Regularizer::Zero, 0.5, 1e-3, src)
        })
        .unwrap();
        // m - 1 Gumbel draws for the rank choice plus one Gaussian for the test.
        assert_eq!(receipt.trace.unwrap().len(), 4);
    }
}
