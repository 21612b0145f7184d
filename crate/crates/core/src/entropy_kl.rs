//! Entropy of uniform order statistics and the relative entropy between a
//! central order statistic and its Gaussian approximation.
//!
//! The relative entropy splits exactly into three terms:
//! * `k1 = ½ log(2πe p(1-p)/n) - h(U_(k))`, a uniform entropy gap;
//! * `k2 = E[(F⁻¹(U_(k)) - F⁻¹(p))²] / (2V) - ½`, a normalised quantile MSE gap;
//! * `k3 = E[log f(F⁻¹(U_(k)))] - log f(F⁻¹(p))`, a log-density gap.
//!
//! Expectations over `U_(k) ~ Beta(k, n+1-k)` are computed in u-space, so
//! unbounded supports and heavy tails become endpoint behaviour on (0, 1).

use serde::{Deserialize, Serialize};

use crate::distributions::ParentDistribution;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::order_stats::{OrderStatSpec, Rounding};
use crate::quad::{integrate_unit, Divergence, QuadConfig};
use crate::rng::mc_mean;
use crate::special::{digamma_unchecked, harmonic_unchecked, inv_incbeta_unchecked, t_sequence_reduced, EULER_GAMMA};

const TWO_PI_E: f64 = 2.0 * std::f64::consts::PI * std::f64::consts::E;

/// `h(U_(k)) = T_{k-1} + T_{n-k} - T_n - H_n` in nats.
pub fn uniform_order_stat_entropy_exact(n: u64, k: u64) -> Result<f64> {
    if n == 0 || k < 1 || k > n {
        return Err(Error::domain(format!("rank k={k} outside [1, {n}]")));
    }
    // the (1+γ) r parts of the three T terms cancel up to a constant
    Ok(t_sequence_reduced(k - 1) + t_sequence_reduced(n - k) - t_sequence_reduced(n) + (1.0 + EULER_GAMMA)
        - harmonic_unchecked(n))
}

/// `½ log(2πe p(1-p)/n) + (1/p + 1/(1-p) - 4)/(6n) + 1/(12n²)`.
///
/// Against the exact entropy at `k = np` this leaves a residual of
/// `-1/(2pn) + O(1/n²)`; see [`uniform_order_stat_entropy_rank_expansion`].
pub fn uniform_order_stat_entropy_expansion(n: u64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("fraction p must lie in (0, 1), got {p}")));
    }
    let nf = n as f64;
    if nf * p < 2.0 {
        return Err(Error::domain(format!("expansion needs n·p >= 2, got {}", nf * p)));
    }
    Ok(0.5 * (TWO_PI_E * p * (1.0 - p) / nf).ln()
        + (1.0 / p + 1.0 / (1.0 - p) - 4.0) / (6.0 * nf)
        + 1.0 / (12.0 * nf * nf))
}

/// Expansion in the actual Beta shape parameters, `a = k - 1`, `b = n - k`:
/// `½ log(2πe ab/n³) + (1/a + 1/b - 1/n)/6 - 1/(2n) + 1/(12n²)`, with an
/// `O(1/n³)` residual.
pub fn uniform_order_stat_entropy_rank_expansion(n: u64, k: u64) -> Result<f64> {
    if k < 2 || k + 1 > n {
        return Err(Error::domain(format!("rank expansion needs 2 <= k <= n-1, got k={k}, n={n}")));
    }
    let (a, b, nf) = ((k - 1) as f64, (n - k) as f64, n as f64);
    Ok(0.5 * (TWO_PI_E * a * b / (nf * nf * nf)).ln() + (1.0 / a + 1.0 / b - 1.0 / nf) / 6.0 - 0.5 / nf
        + 1.0 / (12.0 * nf * nf))
}

/// The Gaussian law `N(μ_p, V_{n,p})` that `X_(np)` approaches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianReference {
    pub mu_p: f64,
    pub v_np: f64,
    pub n: u64,
    pub p: f64,
    /// `log f(μ_p)`.
    pub log_density_at_mu: f64,
}

impl GaussianReference {
    pub fn new(parent: &ParentDistribution, n: u64, p: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("sample size n must be at least 1"));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("fraction p must lie in (0, 1), got {p}")));
        }
        let mu_p = parent.quantile_split(p, 1.0 - p);
        let log_f = parent.log_density_split(p, 1.0 - p);
        if !log_f.is_finite() || !mu_p.is_finite() {
            return Err(Error::Condition {
                condition: 2,
                detail: format!("f(F⁻¹({p})) must be positive and finite for {parent}, log value {log_f}"),
            });
        }
        let v_np = p * (1.0 - p) / (n as f64) * (-2.0 * log_f).exp();
        if !(v_np > 0.0 && v_np.is_finite()) {
            return Err(Error::Condition { condition: 2, detail: format!("reference variance {v_np} not usable") });
        }
        Ok(GaussianReference { mu_p, v_np, n, p, log_density_at_mu: log_f })
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let d = x - self.mu_p;
        -0.5 * (2.0 * std::f64::consts::PI * self.v_np).ln() - d * d / (2.0 * self.v_np)
    }
}

pub fn gaussian_reference(parent: &ParentDistribution, n: u64, p: f64) -> Result<GaussianReference> {
    GaussianReference::new(parent, n, p)
}

/// How expectations over `U_(k)` are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlConfig {
    /// Absolute quadrature tolerance per integral.
    pub tol: f64,
    pub method: Method,
    /// Monte Carlo sample count.
    pub mc_count: u64,
    pub seed: u64,
    pub rounding: Rounding,
    pub max_intervals: usize,
}

impl Default for KlConfig {
    fn default() -> Self {
        KlConfig {
            tol: 1e-9,
            method: Method::Quadrature,
            mc_count: 100_000,
            seed: 0,
            rounding: Rounding::HalfUp,
            max_intervals: QuadConfig::default().max_intervals,
        }
    }
}

impl KlConfig {
    pub fn with_tol(tol: f64) -> Self {
        KlConfig { tol, ..Default::default() }
    }

    fn quad(&self) -> QuadConfig {
        QuadConfig { abs_tol: self.tol, max_intervals: self.max_intervals, ..Default::default() }
    }
}

/// A term value with its numerical error: quadrature error estimate or Monte
/// Carlo standard error. Divergent terms carry `value = ∞` and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEstimate {
    #[serde(with = "crate::serde_ext::real")]
    pub value: f64,
    #[serde(with = "crate::serde_ext::real")]
    pub error: f64,
    pub divergence: Option<Divergence>,
}

impl TermEstimate {
    fn exact(value: f64) -> Self {
        TermEstimate { value, error: 0.0, divergence: None }
    }

    fn diverged(d: Divergence) -> Self {
        log::info!("divergent integral: {d}");
        TermEstimate { value: f64::INFINITY, error: f64::INFINITY, divergence: Some(d) }
    }

    pub fn is_divergent(&self) -> bool {
        self.divergence.is_some() || self.value.is_infinite()
    }
}

/// Log of the Beta(k, n+1-k) density at the point with tails `(u, t)`.
fn beta_log_weight(spec: &OrderStatSpec, ln_norm: f64, u: f64, t: f64) -> f64 {
    let a = (spec.k - 1) as f64;
    let b = (spec.n - spec.k) as f64;
    let mut s = -ln_norm;
    if a > 0.0 {
        s += a * u.ln();
    }
    if b > 0.0 {
        s += b * t.ln();
    }
    s
}

fn beta_centre_scale(spec: &OrderStatSpec) -> (f64, f64) {
    let law = spec.beta_law();
    (law.mean(), law.variance().sqrt())
}

/// `½ log(2πe p(1-p)/n) - h(U_(k))`; never touches the parent law.
pub fn k1_term(n: u64, p: f64) -> Result<f64> {
    k1_term_spec(&OrderStatSpec::from_fraction(n, p)?)
}

pub fn k1_term_spec(spec: &OrderStatSpec) -> Result<f64> {
    let p = spec.fraction();
    let h = uniform_order_stat_entropy_exact(spec.n, spec.k)?;
    Ok(0.5 * (TWO_PI_E * p * (1.0 - p) / spec.n as f64).ln() - h)
}

/// `E[(F⁻¹(U_(k)) - μ_p)²]/(2V) - ½`.
pub fn k2_term(parent: &ParentDistribution, n: u64, p: f64, cfg: &KlConfig) -> Result<TermEstimate> {
    k2_term_spec(parent, &OrderStatSpec::from_fraction_with(n, p, cfg.rounding)?, cfg)
}

pub fn k2_term_spec(parent: &ParentDistribution, spec: &OrderStatSpec, cfg: &KlConfig) -> Result<TermEstimate> {
    let g = GaussianReference::new(parent, spec.n, spec.fraction())?;
    let ln_2v = (2.0 * g.v_np).ln();
    match cfg.method {
        Method::Quadrature => {
            let ln_norm = spec.beta_law().ln_norm();
            let (c, s) = beta_centre_scale(spec);
            let res = integrate_unit(
                |u, t| {
                    let d = parent.quantile_split(u, t) - g.mu_p;
                    if d == 0.0 {
                        return 0.0;
                    }
                    (beta_log_weight(spec, ln_norm, u, t) + 2.0 * d.abs().ln() - ln_2v).exp()
                },
                c,
                s,
                &cfg.quad(),
            );
            Ok(match res {
                Ok(v) => TermEstimate { value: v.value - 0.5, error: v.abs_error, divergence: None },
                Err(d) => TermEstimate::diverged(d),
            })
        }
        Method::MonteCarlo => {
            let est = mc_beta(spec, cfg, 2, move |u, t| {
                let d = parent.quantile_split(u, t) - g.mu_p;
                d * d / (2.0 * g.v_np)
            });
            Ok(TermEstimate { value: est.0 - 0.5, error: est.1, divergence: None })
        }
    }
}

/// `E[log f(F⁻¹(U_(k)))] - log f(μ_p)`.
pub fn k3_term(parent: &ParentDistribution, n: u64, p: f64, cfg: &KlConfig) -> Result<TermEstimate> {
    k3_term_spec(parent, &OrderStatSpec::from_fraction_with(n, p, cfg.rounding)?, cfg)
}

pub fn k3_term_spec(parent: &ParentDistribution, spec: &OrderStatSpec, cfg: &KlConfig) -> Result<TermEstimate> {
    let g = GaussianReference::new(parent, spec.n, spec.fraction())?;
    if let ParentDistribution::Uniform { .. } = parent {
        return Ok(TermEstimate::exact(0.0));
    }
    match cfg.method {
        Method::Quadrature => {
            let ln_norm = spec.beta_law().ln_norm();
            let (c, s) = beta_centre_scale(spec);
            let res = integrate_unit(
                |u, t| {
                    let w = beta_log_weight(spec, ln_norm, u, t);
                    if w == f64::NEG_INFINITY {
                        return 0.0;
                    }
                    w.exp() * (parent.log_density_split(u, t) - g.log_density_at_mu)
                },
                c,
                s,
                &cfg.quad(),
            );
            Ok(match res {
                Ok(v) => TermEstimate { value: v.value, error: v.abs_error, divergence: None },
                Err(d) => TermEstimate::diverged(d),
            })
        }
        Method::MonteCarlo => {
            let est = mc_beta(spec, cfg, 3, move |u, t| parent.log_density_split(u, t) - g.log_density_at_mu);
            Ok(TermEstimate { value: est.0, error: est.1, divergence: None })
        }
    }
}

/// Monte Carlo mean and standard error of `g(W, 1 - W)` for `W ~ Beta(k, n+1-k)`.
fn mc_beta<G>(spec: &OrderStatSpec, cfg: &KlConfig, term: u64, g: G) -> (f64, f64)
where
    G: Fn(f64, f64) -> f64 + Sync + Send,
{
    let (a, b) = (spec.k as f64, (spec.n + 1 - spec.k) as f64);
    let est = mc_mean(Execution::default(), cfg.seed, spec.n * 4 + term, cfg.mc_count, move |v| {
        // draw the smaller tail directly so both tails stay accurate
        if v < 0.5 {
            let w = inv_incbeta_unchecked(a, b, v);
            g(w, 1.0 - w)
        } else {
            let t = inv_incbeta_unchecked(b, a, 1.0 - v);
            g(1.0 - t, t)
        }
    });
    (est.mean, est.stderr)
}

/// `K3` for the unbounded density `1/(x log²x)` in closed form:
/// `2(ψ(k) - ψ(n+1)) + n/(k-1) - 2 log p - 1/p`, finite for `k >= 2`.
pub fn k3_f2_closed_form(spec: &OrderStatSpec) -> Result<f64> {
    if spec.k < 2 {
        return Err(Error::domain("closed form needs k >= 2 (E[1/U_(1)] is infinite)"));
    }
    let p = spec.fraction();
    let (n, k) = (spec.n as f64, spec.k as f64);
    Ok(2.0 * (digamma_unchecked(k) - digamma_unchecked(n + 1.0)) + n / (k - 1.0) - 2.0 * p.ln() - 1.0 / p)
}

/// `D(X_(np) ‖ G_{n,p})` by a single quadrature in u-space.
pub fn kl_direct(parent: &ParentDistribution, n: u64, p: f64, tol: f64) -> Result<TermEstimate> {
    let cfg = KlConfig::with_tol(tol);
    kl_direct_spec(parent, &OrderStatSpec::from_fraction(n, p)?, &cfg)
}

pub fn kl_direct_spec(parent: &ParentDistribution, spec: &OrderStatSpec, cfg: &KlConfig) -> Result<TermEstimate> {
    let g = GaussianReference::new(parent, spec.n, spec.fraction())?;
    let ln_norm = spec.beta_law().ln_norm();
    let (c, s) = beta_centre_scale(spec);
    let half_ln_2piv = 0.5 * (2.0 * std::f64::consts::PI * g.v_np).ln();
    let ln_2v = (2.0 * g.v_np).ln();
    // f_X(x) = β(F(x)) f(x), so log(f_X/φ) at x = F⁻¹(u) is
    // log β(u) + log f(F⁻¹u) + ½ log(2πV) + (F⁻¹u - μ)²/(2V)
    let res = integrate_unit(
        |u, t| {
            let lw = beta_log_weight(spec, ln_norm, u, t);
            if lw == f64::NEG_INFINITY {
                return 0.0;
            }
            let w = lw.exp();
            let d = parent.quantile_split(u, t) - g.mu_p;
            let quad_part = if d == 0.0 { 0.0 } else { (lw + 2.0 * d.abs().ln() - ln_2v).exp() };
            w * (lw + parent.log_density_split(u, t) + half_ln_2piv) + quad_part
        },
        c,
        s,
        &cfg.quad(),
    );
    Ok(match res {
        Ok(v) => TermEstimate { value: v.value, error: v.abs_error, divergence: None },
        Err(d) => TermEstimate::diverged(d),
    })
}

/// The three terms, their sum, and the independent direct quadrature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlDecomposition {
    pub n: u64,
    pub p: f64,
    pub k: u64,
    pub k1: f64,
    pub k2: TermEstimate,
    pub k3: TermEstimate,
    #[serde(with = "crate::serde_ext::real")]
    pub total_decomposed: f64,
    pub total_direct: Option<TermEstimate>,
}

impl KlDecomposition {
    pub fn is_divergent(&self) -> bool {
        self.k2.is_divergent()
            || self.k3.is_divergent()
            || self.total_direct.as_ref().is_some_and(TermEstimate::is_divergent)
    }

    /// `|total_decomposed - total_direct|`, when both are finite.
    pub fn identity_gap(&self) -> Option<f64> {
        let d = self.total_direct.as_ref()?;
        (d.value.is_finite() && self.total_decomposed.is_finite()).then(|| (self.total_decomposed - d.value).abs())
    }

    /// Combined numerical error of the decomposed total.
    pub fn decomposed_error(&self) -> f64 {
        self.k2.error + self.k3.error
    }
}

pub fn kl_decompose(parent: &ParentDistribution, n: u64, p: f64, cfg: &KlConfig) -> Result<KlDecomposition> {
    kl_decompose_spec(parent, &OrderStatSpec::from_fraction_with(n, p, cfg.rounding)?, cfg, true)
}

/// Decomposition for an explicit `(n, k, p)`; `with_direct` toggles the
/// cross-check quadrature.
pub fn kl_decompose_spec(
    parent: &ParentDistribution,
    spec: &OrderStatSpec,
    cfg: &KlConfig,
    with_direct: bool,
) -> Result<KlDecomposition> {
    let k1 = k1_term_spec(spec)?;
    let k2 = k2_term_spec(parent, spec, cfg)?;
    let k3 = k3_term_spec(parent, spec, cfg)?;
    let total_decomposed =
        if k2.is_divergent() || k3.is_divergent() { f64::INFINITY } else { k1 + k2.value + k3.value };
    let total_direct = if with_direct { Some(kl_direct_spec(parent, spec, cfg)?) } else { None };
    Ok(KlDecomposition { n: spec.n, p: spec.fraction(), k: spec.k, k1, k2, k3, total_decomposed, total_direct })
}
