//! Laws of order statistics: densities, sampling, and the Gamma-ratio
//! constant bounding their absolute moments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bounds::BoundReport;
use crate::distributions::{BetaLaw, ParentDistribution};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::{draw_map, mc_mean};
use crate::special::{incbeta_unchecked, inv_incbeta_unchecked, ln_gamma_unchecked};

/// Rule mapping a non-integer `n·p` to a rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    /// Nearest integer, ties upward.
    #[default]
    HalfUp,
    Floor,
    Ceil,
}

impl Rounding {
    /// Applies the rule, treating values within `1e-9` of an integer as that
    /// integer so that e.g. `1e5 * 0.3` maps to 30000 under every rule.
    pub fn apply(self, x: f64) -> f64 {
        let nearest = x.round();
        if (x - nearest).abs() <= 1e-9 * x.abs().max(1.0) {
            return nearest;
        }
        match self {
            Rounding::HalfUp => (x + 0.5).floor(),
            Rounding::Floor => x.floor(),
            Rounding::Ceil => x.ceil(),
        }
    }
}

/// Which order statistic is studied: rank `k` out of `n`, optionally derived
/// from a central fraction `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderStatSpec {
    pub n: u64,
    pub k: u64,
    /// The fraction the rank was derived from, if any.
    pub p: Option<f64>,
    pub rounding: Rounding,
}

impl OrderStatSpec {
    pub fn new(n: u64, k: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("sample size n must be at least 1"));
        }
        if k < 1 || k > n {
            return Err(Error::domain(format!("rank k={k} outside [1, {n}]")));
        }
        Ok(OrderStatSpec { n, k, p: None, rounding: Rounding::default() })
    }

    /// `k = round(n·p)` (ties upward), clamped to `[1, n]`.
    pub fn from_fraction(n: u64, p: f64) -> Result<Self> {
        Self::from_fraction_with(n, p, Rounding::HalfUp)
    }

    pub fn from_fraction_with(n: u64, p: f64, rounding: Rounding) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("sample size n must be at least 1"));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("fraction p must lie in (0, 1), got {p}")));
        }
        let k = rounding.apply(n as f64 * p).clamp(1.0, n as f64) as u64;
        Ok(OrderStatSpec { n, k, p: Some(p), rounding })
    }

    /// `k / n`.
    pub fn realized_fraction(&self) -> f64 {
        self.k as f64 / self.n as f64
    }

    /// The fraction the Gaussian approximation is centred at: the given `p`,
    /// or the mean `k/(n+1)` of `U_(k)` for a spec built from a rank.
    pub fn fraction(&self) -> f64 {
        self.p.unwrap_or(self.k as f64 / (self.n as f64 + 1.0))
    }

    /// Rank of the mirrored statistic, `n + 1 - k`, with fraction `1 - p`.
    pub fn mirrored(&self) -> Self {
        OrderStatSpec { k: self.n + 1 - self.k, p: self.p.map(|p| 1.0 - p), ..*self }
    }

    /// Law of `U_(k)`.
    pub fn beta_law(&self) -> BetaLaw {
        BetaLaw { alpha: self.k as f64, beta: (self.n + 1 - self.k) as f64 }
    }

    /// `log(n! / ((k-1)! (n-k)!))`.
    pub fn ln_normalizer(&self) -> f64 {
        ln_gamma_unchecked(self.n as f64 + 1.0)
            - ln_gamma_unchecked(self.k as f64)
            - ln_gamma_unchecked((self.n - self.k) as f64 + 1.0)
    }
}

/// Log density of `X_(k)`, `-∞` outside the support.
pub fn order_stat_log_pdf(parent: &ParentDistribution, spec: &OrderStatSpec, x: f64) -> f64 {
    if !parent.in_support(x) {
        return f64::NEG_INFINITY;
    }
    let lower = parent.cdf(x);
    let upper = parent.sf(x);
    let ln_lower = if lower < 0.5 { lower.ln() } else { (-upper).ln_1p() };
    let ln_upper = if upper < 0.5 { upper.ln() } else { (-lower).ln_1p() };
    let a = (spec.k - 1) as f64;
    let b = (spec.n - spec.k) as f64;
    let mut s = spec.ln_normalizer() + parent.log_pdf(x);
    if a > 0.0 {
        s += a * ln_lower;
    }
    if b > 0.0 {
        s += b * ln_upper;
    }
    s
}

/// Density of `X_(k)`: `c_k F(x)^{k-1} (1-F(x))^{n-k} f(x)`, assembled in
/// log-space.
pub fn order_stat_pdf(parent: &ParentDistribution, spec: &OrderStatSpec, x: f64) -> f64 {
    order_stat_log_pdf(parent, spec, x).exp()
}

/// Cdf of `X_(k)`: `I_{F(x)}(k, n + 1 - k)`.
pub fn order_stat_cdf(parent: &ParentDistribution, spec: &OrderStatSpec, x: f64) -> f64 {
    incbeta_unchecked(spec.k as f64, (spec.n + 1 - spec.k) as f64, parent.cdf(x))
}

/// `count` draws of `X_(k)`, each `F⁻¹(W)` for one Beta variate `W`.
pub fn sample_order_stat(
    parent: &ParentDistribution,
    spec: &OrderStatSpec,
    count: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    sample_order_stat_stream(parent, spec, count, seed, 0, Execution::default())
}

pub fn sample_order_stat_stream(
    parent: &ParentDistribution,
    spec: &OrderStatSpec,
    count: usize,
    seed: u64,
    stream_id: u64,
    exec: Execution,
) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    let (a, b) = (spec.k as f64, (spec.n + 1 - spec.k) as f64);
    let parent = *parent;
    Ok(draw_map(exec, seed, stream_id, count as u64, move |u| parent.quantile(inv_incbeta_unchecked(a, b, u))))
}

/// `C_{n,k,q,r}`, with `∞` outside its finiteness region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBoundConstant {
    pub n: u64,
    pub k: u64,
    pub q: f64,
    pub r: f64,
    #[serde(with = "crate::serde_ext::real")]
    pub value: f64,
}

impl MomentBoundConstant {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// `Γ(n+1) Γ(k-s) Γ(n-k-s+1) / (Γ(n-2s+1) Γ(k) Γ(n-k+1))` with `s = q/r`,
/// finite iff `k > s` and `n - k > s - 1`. It equals
/// `E[(U_(k)(1-U_(k)))^{-s}]`.
pub fn moment_bound_constant(n: u64, k: u64, q: f64, r: f64) -> MomentBoundConstant {
    let s = q / r;
    let (nf, kf) = (n as f64, k as f64);
    let value = if kf > s && nf - kf > s - 1.0 {
        (ln_gamma_unchecked(nf + 1.0) + ln_gamma_unchecked(kf - s) + ln_gamma_unchecked(nf - kf - s + 1.0)
            - ln_gamma_unchecked(nf - 2.0 * s + 1.0)
            - ln_gamma_unchecked(kf)
            - ln_gamma_unchecked(nf - kf + 1.0))
        .exp()
    } else {
        f64::INFINITY
    };
    MomentBoundConstant { n, k, q, r, value }
}

/// Default Monte Carlo sample count.
pub const DEFAULT_MC_COUNT: u64 = 100_000;

/// Monte Carlo check of `E|X_(k)|^q <= C_{n,k,q,r} (E|X|^r)^{q/r}`.
pub fn verify_moment_bound(
    parent: &ParentDistribution,
    spec: &OrderStatSpec,
    q: f64,
    r: f64,
    mc_count: u64,
    seed: u64,
) -> Result<BoundReport> {
    verify_moment_bound_with(parent, spec, q, r, mc_count, seed, Execution::default())
}

pub fn verify_moment_bound_with(
    parent: &ParentDistribution,
    spec: &OrderStatSpec,
    q: f64,
    r: f64,
    mc_count: u64,
    seed: u64,
    exec: Execution,
) -> Result<BoundReport> {
    if !(q > 0.0 && r > 0.0) {
        return Err(Error::domain(format!("moment orders must be positive, got q={q}, r={r}")));
    }
    if mc_count < 2 {
        return Err(Error::domain("at least two Monte Carlo draws are needed"));
    }
    let c = moment_bound_constant(spec.n, spec.k, q, r);
    let moment = parent.abs_moment(r);
    let analytic = c.value * moment.powf(q / r);
    let mut params = BTreeMap::new();
    params.insert("n".into(), spec.n as f64);
    params.insert("k".into(), spec.k as f64);
    params.insert("q".into(), q);
    params.insert("r".into(), r);
    params.insert("constant".into(), c.value);
    params.insert("parent_abs_moment".into(), moment);
    let (a, b) = (spec.k as f64, (spec.n + 1 - spec.k) as f64);
    let p = *parent;
    let est = mc_mean(exec, seed, spec.n, mc_count, move |u| p.quantile(inv_incbeta_unchecked(a, b, u)).abs().powf(q));
    let mut report = BoundReport::judge("moment_bound", analytic, est.mean, est.stderr, params);
    if moment.is_infinite() {
        report.notes.push(format!("E|X|^{r} is infinite for {parent}; the bound is vacuous"));
    } else if !c.is_finite() {
        report.notes.push(format!("k={} or n-k={} too small for q/r={}", spec.k, spec.n - spec.k, q / r));
    }
    Ok(report)
}

/// `(E|X|^r / min(u, 1-u))^{1/r}`, an upper bound on `|F⁻¹(u)|`.
pub fn quantile_envelope(parent: &ParentDistribution, r: f64, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::domain(format!("u must lie in (0, 1), got {u}")));
    }
    if !(r > 0.0) {
        return Err(Error::domain(format!("moment order must be positive, got {r}")));
    }
    let m = parent.abs_moment(r);
    if !m.is_finite() {
        return Err(Error::domain(format!("E|X|^{r} is infinite for {parent}")));
    }
    Ok((m / u.min(1.0 - u)).powf(1.0 / r))
}
