//! Renyi-DP curves, approximate-RDP composition, conversion to (eps, delta),
//! and noise calibration against a target budget.
//!
//! A curve is data, not a closure: `eps(alpha)` tabulated over a fixed order
//! grid together with the accumulated failure mass `delta_t` of the
//! high-probability events the guarantee is conditioned on. Keeping curves as
//! grids makes budget ledgers serializable and lets composition be plain
//! pointwise addition.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Target or achieved (eps, delta) differential-privacy budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpBudget {
    pub eps: f64,
    pub delta: f64,
}

impl DpBudget {
    pub fn new(eps: f64, delta: f64) -> Result<Self> {
        if !eps.is_finite() || eps < 0.0 {
            return Err(Error::param("eps", format!("must be >= 0, got {eps}")));
        }
        if delta.is_nan() || delta <= 0.0 || delta >= 1.0 {
            return Err(Error::param(
                "delta",
                format!("must be in (0,1), got {delta}"),
            ));
        }
        Ok(Self { eps, delta })
    }
}

/// Default order grid.
///
/// Fractional points below 2 cover the high-eps regime, integers 2..=64 the
/// mid range, and two log-spaced ladders keep the conversion optimum within
/// 1e-3 of the continuous minimum across the regimes the calibrator visits.
fn default_orders() -> &'static [f64] {
    static GRID: OnceLock<Vec<f64>> = OnceLock::new();
    GRID.get_or_init(|| {
        let mut g: Vec<f64> = Vec::with_capacity(1400);
        g.extend((1..100).map(|k| 1.0 + k as f64 / 100.0));
        g.extend((2..=64).map(|k| k as f64));
        let log_span = |lo: f64, hi: f64, n: usize| {
            let (a, b) = (lo.ln(), hi.ln());
            (0..=n).map(move |i| (a + (b - a) * i as f64 / n as f64).exp())
        };
        g.extend(log_span(64.0, 1e4, 400));
        g.extend(log_span(1.01, 1e4, 800));
        g.sort_by(|a, b| a.partial_cmp(b).unwrap());
        g.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        g
    })
}

/// ln(sinh(x)) computed without overflow: x - ln 2 + ln(1 - e^{-2x}).
fn ln_sinh(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    x - std::f64::consts::LN_2 + (-(-2.0 * x).exp()).ln_1p()
}

/// ln(sinh(a) - sinh(b)) for a > b >= 0, in log space.
///
/// sinh a - sinh b = (e^a / 2) (1 - e^{b-a} + e^{-a-b} - e^{-2a}).
fn ln_sinh_diff(a: f64, b: f64) -> f64 {
    debug_assert!(a > b && b >= 0.0);
    a - std::f64::consts::LN_2 + (-(b - a).exp() + (-a - b).exp() - (-2.0 * a).exp()).ln_1p()
}

/// eps(alpha) over an order grid plus attached failure mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdpCurve {
    orders: Vec<f64>,
    eps: Vec<f64>,
    delta_t: f64,
}

impl RdpCurve {
    fn from_fn(f: impl Fn(f64) -> f64, delta_t: f64) -> Self {
        let orders = default_orders().to_vec();
        let eps = orders.iter().map(|&a| f(a)).collect();
        Self {
            orders,
            eps,
            delta_t,
        }
    }

    /// The identically-zero curve (no privacy loss).
    pub fn zero() -> Self {
        Self::from_fn(|_| 0.0, 0.0)
    }

    /// Gaussian mechanism: eps(alpha) = alpha * sensitivity^2 / (2 sigma^2).
    pub fn gaussian(sigma: f64, sensitivity: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::param(
                "sigma",
                format!("must be positive, got {sigma}"),
            ));
        }
        if !sensitivity.is_finite() || sensitivity <= 0.0 {
            return Err(Error::param(
                "sensitivity",
                format!("must be positive, got {sensitivity}"),
            ));
        }
        let c = sensitivity * sensitivity / (2.0 * sigma * sigma);
        Ok(Self::from_fn(|a| a * c, 0.0))
    }

    /// rho-zCDP as a curve: eps(alpha) = rho * alpha.
    pub fn zcdp(rho: f64) -> Result<Self> {
        if !rho.is_finite() || rho < 0.0 {
            return Err(Error::param("rho", format!("must be >= 0, got {rho}")));
        }
        Ok(Self::from_fn(|a| rho * a, 0.0))
    }

    /// Bounded-range RDP of the exponential mechanism with parameter `eps`:
    /// the pointwise minimum of the zCDP branch `alpha eps^2 / 8` and the
    /// sinh branch, the latter evaluated in log space so large `alpha eps`
    /// cannot overflow.
    pub fn em_bounded_range(eps: f64) -> Result<Self> {
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Error::param("eps", format!("must be positive, got {eps}")));
        }
        // Clamped at zero: the sinh branch can round a hair negative when
        // alpha*eps is tiny, and an RDP bound is never negative.
        Ok(Self::from_fn(
            |a| {
                let zcdp_branch = a * eps * eps / 8.0;
                let sinh_branch =
                    (ln_sinh_diff(a * eps, (a - 1.0) * eps) - ln_sinh(eps)) / (a - 1.0);
                zcdp_branch.min(sinh_branch).max(0.0)
            },
            0.0,
        ))
    }

    /// Pure eps-DP as an RDP curve: min(eps, alpha eps^2 / 2).
    pub fn pure_dp(eps: f64) -> Result<Self> {
        if !eps.is_finite() || eps <= 0.0 {
            return Err(Error::param("eps", format!("must be positive, got {eps}")));
        }
        Ok(Self::from_fn(|a| eps.min(a * eps * eps / 2.0), 0.0))
    }

    /// Report-noisy-max overhead: add ln(m) / (alpha - 1) to a base noise
    /// curve, for a selection over `m` candidates. `m = 1` is the identity.
    pub fn rnm_generic(base: &RdpCurve, m: usize) -> Result<RdpCurve> {
        if m < 1 {
            return Err(Error::param("m", "must be >= 1"));
        }
        let ln_m = (m as f64).ln();
        let mut out = base.clone();
        for (e, &a) in out.eps.iter_mut().zip(out.orders.iter()) {
            *e += ln_m / (a - 1.0);
        }
        Ok(out)
    }

    /// Attach failure mass to a curve (approximate RDP).
    pub fn with_delta_t(mut self, delta_t: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&delta_t) {
            return Err(Error::param(
                "delta_t",
                format!("must be in [0,1), got {delta_t}"),
            ));
        }
        self.delta_t = delta_t;
        Ok(self)
    }

    pub fn orders(&self) -> &[f64] {
        &self.orders
    }

    pub fn eps_values(&self) -> &[f64] {
        &self.eps
    }

    pub fn delta_t(&self) -> f64 {
        self.delta_t
    }

    /// eps at an arbitrary order by linear interpolation in alpha;
    /// extrapolates with the boundary segment slope outside the grid.
    pub fn eps_at(&self, alpha: f64) -> f64 {
        let o = &self.orders;
        let n = o.len();
        if n == 1 {
            return self.eps[0];
        }
        let seg = match o.binary_search_by(|x| x.partial_cmp(&alpha).unwrap()) {
            Ok(i) => return self.eps[i],
            Err(0) => 0,
            Err(i) if i >= n => n - 2,
            Err(i) => i - 1,
        };
        let (a0, a1) = (o[seg], o[seg + 1]);
        let (e0, e1) = (self.eps[seg], self.eps[seg + 1]);
        e0 + (e1 - e0) * (alpha - a0) / (a1 - a0)
    }

    /// Pointwise-sum composition; failure masses add.
    pub fn compose(curves: &[RdpCurve]) -> Result<RdpCurve> {
        if curves.is_empty() {
            return Ok(RdpCurve::zero());
        }
        let delta_t: f64 = curves.iter().map(|c| c.delta_t).sum();
        if delta_t >= 1.0 {
            return Err(Error::BudgetExhausted(format!(
                "composed failure mass delta_t = {delta_t} >= 1"
            )));
        }
        let shared = curves.windows(2).all(|w| w[0].orders == w[1].orders);
        if shared {
            let orders = curves[0].orders.clone();
            let mut eps = vec![0.0; orders.len()];
            for c in curves {
                for (acc, e) in eps.iter_mut().zip(c.eps.iter()) {
                    *acc += e;
                }
            }
            return Ok(RdpCurve {
                orders,
                eps,
                delta_t,
            });
        }
        // Mismatched grids: resample everything onto the union grid.
        let mut orders: Vec<f64> = curves
            .iter()
            .flat_map(|c| c.orders.iter().copied())
            .collect();
        orders.sort_by(|a, b| a.partial_cmp(b).unwrap());
        orders.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let eps = orders
            .iter()
            .map(|&a| curves.iter().map(|c| c.eps_at(a)).sum())
            .collect();
        Ok(RdpCurve {
            orders,
            eps,
            delta_t,
        })
    }

    /// Repeat this curve `n` times under composition.
    pub fn repeat(&self, n: u32) -> Result<RdpCurve> {
        let delta_t = self.delta_t * n as f64;
        if delta_t >= 1.0 {
            return Err(Error::BudgetExhausted(format!(
                "composed failure mass delta_t = {delta_t} >= 1"
            )));
        }
        let mut out = self.clone();
        out.delta_t = delta_t;
        for e in out.eps.iter_mut() {
            *e *= n as f64;
        }
        Ok(out)
    }

    /// Convert to (eps, delta)-DP: minimize eps(alpha) + ln(1/delta)/(alpha-1)
    /// over the grid; the curve's failure mass is added to the output delta.
    pub fn to_dp(&self, delta: f64) -> Result<DpBudget> {
        if delta.is_nan() || delta <= 0.0 || delta >= 1.0 {
            return Err(Error::param(
                "delta",
                format!("must be in (0,1), got {delta}"),
            ));
        }
        if self.orders.is_empty() {
            return Err(Error::Internal("empty order grid".into()));
        }
        let penalty = (1.0 / delta).ln();
        let eps = self
            .orders
            .iter()
            .zip(self.eps.iter())
            .map(|(&a, &e)| e + penalty / (a - 1.0))
            .fold(f64::INFINITY, f64::min);
        DpBudget::new(eps.max(0.0), delta + self.delta_t)
    }
}

/// Standard zCDP conversion via the grid: optimal over eps(alpha) = rho*alpha.
///
/// The grid optimum agrees with the closed form rho + 2 sqrt(rho ln(1/delta))
/// to within grid resolution; `delta_t` is failure mass carried into the
/// output delta.
pub fn zcdp_to_dp(rho: f64, delta: f64, delta_t: f64) -> Result<DpBudget> {
    if !rho.is_finite() || rho <= 0.0 {
        return Err(Error::param("rho", format!("must be positive, got {rho}")));
    }
    let budget = RdpCurve::zcdp(rho)?.with_delta_t(delta_t)?.to_dp(delta)?;
    // The grid minimum can only sit above the continuous optimum. Tightness
    // (within 1e-3 for optima inside the grid span) is covered by tests.
    debug_assert!(budget.eps >= rho + 2.0 * (rho * (1.0 / delta).ln()).sqrt() - 1e-9);
    Ok(budget)
}

/// Mechanism families the calibrator knows how to parameterize by a single
/// per-query zCDP-scale knob `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MechanismSpec {
    /// Gap-based selection of k followed by a stability test; consumes
    /// em(2 sqrt(rho)) composed with gaussian(sigma = sqrt(1/rho)).
    AdaptiveStableTopK,
    /// Fixed-k variant: half the budget on the adaptive core, half reserved
    /// for the exponential-mechanism fallback rounds.
    FixedStableTopK,
    /// One-shot Gumbel top-k, accounted as `rounds` composed EM releases.
    EmPeel { rounds: u32 },
    /// Gaussian stability test alone: sigma = sqrt(1/(2 rho)).
    PtrGaussian,
    /// Laplace stability test alone: pure-DP eps = sqrt(2 rho).
    PtrLaplace,
}

impl MechanismSpec {
    /// Per-query consumed curve at budget knob `rho` with failure mass
    /// `delta_t` where the mechanism has one.
    pub fn per_query_curve(&self, rho: f64, delta_t: f64) -> Result<RdpCurve> {
        match *self {
            MechanismSpec::AdaptiveStableTopK => {
                let em = RdpCurve::em_bounded_range(2.0 * rho.sqrt())?;
                let gauss = RdpCurve::gaussian((1.0 / rho).sqrt(), 1.0)?.with_delta_t(delta_t)?;
                RdpCurve::compose(&[em, gauss])
            }
            MechanismSpec::FixedStableTopK => {
                let em = RdpCurve::em_bounded_range(2.0 * (rho / 2.0).sqrt())?;
                let gauss = RdpCurve::gaussian((2.0 / rho).sqrt(), 1.0)?.with_delta_t(delta_t)?;
                // Fallback EM rounds are split so their composed bounded-range
                // zCDP is exactly rho/2 whichever branch runs.
                let peel = RdpCurve::zcdp(rho / 2.0)?;
                RdpCurve::compose(&[em, gauss, peel])
            }
            MechanismSpec::EmPeel { rounds } => {
                if rounds == 0 {
                    return Err(Error::param("rounds", "must be >= 1"));
                }
                let eps_round = (8.0 * rho / rounds as f64).sqrt();
                RdpCurve::em_bounded_range(eps_round)?.repeat(rounds)
            }
            MechanismSpec::PtrGaussian => {
                RdpCurve::gaussian((1.0 / (2.0 * rho)).sqrt(), 1.0)?.with_delta_t(delta_t)
            }
            MechanismSpec::PtrLaplace => {
                RdpCurve::pure_dp((2.0 * rho).sqrt())?.with_delta_t(delta_t)
            }
        }
    }

    /// Derived noise parameters at budget knob `rho`.
    pub fn params(&self, rho: f64) -> CalibratedParams {
        match *self {
            MechanismSpec::AdaptiveStableTopK => CalibratedParams {
                rho,
                sigma: Some((1.0 / rho).sqrt()),
                eps_em: Some(2.0 * rho.sqrt()),
                eps_pure: None,
            },
            MechanismSpec::FixedStableTopK => CalibratedParams {
                rho,
                sigma: Some((2.0 / rho).sqrt()),
                eps_em: Some(2.0 * rho.sqrt()),
                eps_pure: None,
            },
            MechanismSpec::EmPeel { rounds } => CalibratedParams {
                rho,
                sigma: None,
                eps_em: Some((8.0 * rho / rounds.max(1) as f64).sqrt()),
                eps_pure: None,
            },
            MechanismSpec::PtrGaussian => CalibratedParams {
                rho,
                sigma: Some((1.0 / (2.0 * rho)).sqrt()),
                eps_em: None,
                eps_pure: None,
            },
            MechanismSpec::PtrLaplace => CalibratedParams {
                rho,
                sigma: None,
                eps_em: None,
                eps_pure: Some((2.0 * rho).sqrt()),
            },
        }
    }
}

/// Output of [`calibrate`]: the per-query budget knob plus the derived noise
/// parameters and the budget the composed mechanism actually converts to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibratedParams {
    /// Per-query zCDP-scale budget.
    pub rho: f64,
    /// Gaussian test noise, where the mechanism has one.
    pub sigma: Option<f64>,
    /// Exponential-mechanism parameter (per round for peeling).
    pub eps_em: Option<f64>,
    /// Pure-DP parameter, for the Laplace test.
    pub eps_pure: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub params: CalibratedParams,
    /// Converted budget of the full composition at the remaining delta.
    pub achieved: DpBudget,
}

const CALIBRATE_TOL: f64 = 1e-4;

/// Finds the per-query `rho` whose `queries`-fold composition converts to an
/// eps within `[target.eps - 1e-4, target.eps]` at delta
/// `target.delta - queries * delta_t`.
pub fn calibrate(
    target: DpBudget,
    delta_t: f64,
    queries: u32,
    mechanism: MechanismSpec,
) -> Result<Calibration> {
    if queries == 0 {
        return Err(Error::param("queries", "must be >= 1"));
    }
    if !(0.0..1.0).contains(&delta_t) {
        return Err(Error::param(
            "delta_t",
            format!("must be in [0,1), got {delta_t}"),
        ));
    }
    if target.eps.is_nan() || target.eps <= 0.0 {
        return Err(Error::Calibration("target eps must be positive".into()));
    }
    let remaining = target.delta - queries as f64 * delta_t;
    if remaining <= 0.0 {
        return Err(Error::Calibration(format!(
            "delta budget {} cannot cover {queries} queries at delta_t {delta_t}",
            target.delta
        )));
    }

    let converted = |rho: f64| -> Result<f64> {
        let per_query = mechanism.per_query_curve(rho, delta_t)?;
        Ok(per_query.repeat(queries)?.to_dp(remaining)?.eps)
    };

    // Converted eps is increasing in rho; bracket then bisect.
    let mut lo = 1e-15;
    let mut hi = 1.0;
    while converted(hi)? < target.eps {
        hi *= 4.0;
        if hi > 1e12 {
            return Err(Error::Calibration("target eps unreachable".into()));
        }
    }
    if converted(lo)? > target.eps {
        return Err(Error::Calibration(
            "target eps below the floor imposed by the delta split".into(),
        ));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if converted(mid)? > target.eps {
            hi = mid;
        } else {
            lo = mid;
        }
        let at_lo = converted(lo)?;
        if target.eps - at_lo <= CALIBRATE_TOL {
            break;
        }
    }
    let rho = lo;
    let eps = converted(rho)?;
    if eps > target.eps || target.eps - eps > CALIBRATE_TOL {
        return Err(Error::Calibration(format!(
            "search did not converge: achieved eps {eps} for target {}",
            target.eps
        )));
    }
    Ok(Calibration {
        params: mechanism.params(rho),
        achieved: DpBudget::new(eps, remaining + queries as f64 * delta_t)?,
    })
}
