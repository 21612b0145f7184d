//! Scalar special functions: harmonic numbers, the `T_r = log(r!) - r H_r`
//! sequence, log-gamma, digamma, log-beta and the regularized incomplete beta
//! function together with its inverse.
//!
//! Everything is in natural-log units. None of the routines allocate after
//! the harmonic cache has been built.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `0.5 * ln(2π)`.
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Number of exactly summed harmonic numbers kept in memory.
pub const HARMONIC_CACHE_SIZE: usize = 100_000;

// Even Bernoulli numbers B_2 .. B_18.
const BERNOULLI_EVEN: [f64; 9] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
];

/// Below this argument log-gamma and digamma are shifted upward by recurrence
/// before the asymptotic series is applied.
const ASYMPTOTIC_THRESHOLD: f64 = 15.0;

/// Cached partial sums `H_1 ..= H_max`, built once with compensated summation.
#[derive(Debug)]
pub struct HarmonicCache {
    values: Vec<f64>,
}

impl HarmonicCache {
    fn build(max: usize) -> Self {
        let mut values = Vec::with_capacity(max);
        let mut sum = 0.0_f64;
        let mut comp = 0.0_f64;
        for r in 1..=max {
            let term = 1.0 / r as f64;
            let t = sum + term;
            if sum.abs() >= term.abs() {
                comp += (sum - t) + term;
            } else {
                comp += (term - t) + sum;
            }
            sum = t;
            values.push(sum + comp);
        }
        HarmonicCache { values }
    }

    /// The shared process-wide cache.
    pub fn global() -> &'static HarmonicCache {
        static CACHE: OnceLock<HarmonicCache> = OnceLock::new();
        CACHE.get_or_init(|| HarmonicCache::build(HARMONIC_CACHE_SIZE))
    }

    pub fn max(&self) -> usize {
        self.values.len()
    }

    /// `H_r` for `1 <= r <= max`, `None` otherwise.
    pub fn get(&self, r: u64) -> Option<f64> {
        if r == 0 {
            return None;
        }
        self.values.get((r - 1) as usize).copied()
    }
}

/// Harmonic number `H_r = sum_{k=1}^r 1/k`.
///
/// Exact (compensated) summation up to [`HARMONIC_CACHE_SIZE`], asymptotic
/// expansion through the `1/(120 r^4)` term beyond.
pub fn harmonic(r: u64) -> Result<f64> {
    if r == 0 {
        return Err(Error::domain("harmonic(r) requires r >= 1"));
    }
    Ok(harmonic_unchecked(r))
}

/// `H_r` with `H_0 = 0`.
pub(crate) fn harmonic_unchecked(r: u64) -> f64 {
    if r == 0 {
        return 0.0;
    }
    if let Some(h) = HarmonicCache::global().get(r) {
        return h;
    }
    let x = r as f64;
    let x2 = x * x;
    x.ln() + EULER_GAMMA + 0.5 / x - 1.0 / (12.0 * x2) + 1.0 / (120.0 * x2 * x2)
}

/// `T_r = log(r!) - r H_r`, via log-gamma.
pub fn t_sequence(r: u64) -> f64 {
    if r == 0 {
        return 0.0;
    }
    ln_gamma_unchecked(r as f64 + 1.0) - r as f64 * harmonic_unchecked(r)
}

/// `T_r + (1 + γ) r`.
///
/// The linear part of `T_r` cancels exactly inside the uniform order-statistic
/// entropy, so the entropy is assembled from this reduced sequence. For
/// `r >= 32` it is evaluated from the Bernoulli series
/// `½ log(2πr/e) + Σ_j B_{2j} / ((2j-1) r^{2j-1})`, which carries no
/// large-magnitude cancellation.
pub fn t_sequence_reduced(r: u64) -> f64 {
    if r < 32 {
        return t_sequence(r) + (1.0 + EULER_GAMMA) * r as f64;
    }
    let x = r as f64;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut tail = 0.0;
    let mut pow = inv;
    for (j, b) in BERNOULLI_EVEN.iter().take(6).enumerate() {
        let m = 2 * (j + 1) - 1;
        tail += b / m as f64 * pow;
        pow *= inv2;
    }
    0.5 * (2.0 * PI * x).ln() - 0.5 + tail
}

/// Stirling correction `μ(x) = ln Γ(x) - [(x - ½) ln x - x + ½ ln 2π]`,
/// valid for `x >= ASYMPTOTIC_THRESHOLD`.
fn stirling_correction(x: f64) -> f64 {
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut sum = 0.0;
    let mut pow = inv;
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let two_j = 2.0 * (j as f64 + 1.0);
        let term = b / (two_j * (two_j - 1.0)) * pow;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        pow *= inv2;
    }
    sum
}

/// Natural log of Γ(x) for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma_unchecked(x))
}

pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    if x >= ASYMPTOTIC_THRESHOLD {
        return (x - 0.5) * x.ln() - x + HALF_LN_2PI + stirling_correction(x);
    }
    // Shift up: ln Γ(x) = ln Γ(x + m) - ln(x (x+1) ... (x+m-1)).
    let mut shifted = x;
    let mut prod = 1.0_f64;
    let mut log_acc = 0.0_f64;
    while shifted < ASYMPTOTIC_THRESHOLD {
        prod *= shifted;
        if !(1e-250..=1e250).contains(&prod) {
            log_acc += prod.ln();
            prod = 1.0;
        }
        shifted += 1.0;
    }
    let big = (shifted - 0.5) * shifted.ln() - shifted + HALF_LN_2PI + stirling_correction(shifted);
    big - log_acc - prod.ln()
}

/// Digamma ψ(x) for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("digamma requires x > 0, got {x}")));
    }
    Ok(digamma_unchecked(x))
}

pub(crate) fn digamma_unchecked(x: f64) -> f64 {
    let mut shift = 0.0;
    let mut y = x;
    while y < ASYMPTOTIC_THRESHOLD {
        shift += 1.0 / y;
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut pow = inv2;
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let two_j = 2.0 * (j as f64 + 1.0);
        series += b / two_j * pow;
        pow *= inv2;
    }
    y.ln() - 0.5 * inv - series - shift
}

/// `ln B(a, b)`.
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(format!("log_beta requires a, b > 0, got ({a}, {b})")));
    }
    Ok(ln_beta_unchecked(a, b))
}

pub(crate) fn ln_beta_unchecked(a: f64, b: f64) -> f64 {
    ln_gamma_unchecked(a) + ln_gamma_unchecked(b) - ln_gamma_unchecked(a + b)
}

/// `ln[x^a (1-x)^b / B(a, b)]`, the front factor of the incomplete beta
/// continued fraction. For large parameters it is assembled around the mean
/// so that the `a ln x` and `ln B` magnitudes never meet.
fn ln_incbeta_front(a: f64, b: f64, x: f64) -> f64 {
    if a >= ASYMPTOTIC_THRESHOLD && b >= ASYMPTOTIC_THRESHOLD {
        let s = a + b;
        let x0 = a / s;
        let y0 = b / s;
        let dx = x - x0;
        let around_mean = a * (dx / x0).ln_1p() + b * (-dx / y0).ln_1p();
        let centre = 0.5 * (a.ln() + b.ln() - s.ln()) - HALF_LN_2PI - stirling_correction(a) - stirling_correction(b)
            + stirling_correction(s);
        around_mean + centre
    } else {
        a * x.ln() + b * (-x).ln_1p() - ln_beta_unchecked(a, b)
    }
}

/// Modified Lentz evaluation of the incomplete beta continued fraction.
fn incbeta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    let max_iter = 10_000 + (a.max(b).sqrt() * 20.0) as usize;
    for m in 1..=max_iter {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(format!("incomplete beta requires a, b > 0, got ({a}, {b})")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("incomplete beta requires x in [0,1], got {x}")));
    }
    Ok(incbeta_unchecked(a, b, x))
}

pub(crate) fn incbeta_unchecked(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    if x < (a + 1.0) / (a + b + 2.0) {
        (ln_incbeta_front(a, b, x)).exp() * incbeta_cf(a, b, x) / a
    } else {
        1.0 - incbeta_upper(a, b, x)
    }
}

/// `1 - I_x(a, b) = I_{1-x}(b, a)`, evaluated without forming the difference
/// when the upper tail is the small side.
pub(crate) fn incbeta_upper(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x >= 1.0 {
        return 0.0;
    }
    let y = 1.0 - x;
    if y < (b + 1.0) / (a + b + 2.0) {
        (ln_incbeta_front(b, a, y)).exp() * incbeta_cf(b, a, y) / b
    } else {
        1.0 - incbeta_unchecked_lower_cf(a, b, x)
    }
}

fn incbeta_unchecked_lower_cf(a: f64, b: f64, x: f64) -> f64 {
    (ln_incbeta_front(a, b, x)).exp() * incbeta_cf(a, b, x) / a
}

/// Log of the Beta(a, b) density at `x` in (0, 1).
pub(crate) fn ln_beta_density(a: f64, b: f64, x: f64, ln_norm: f64) -> f64 {
    let lo = if a == 1.0 { 0.0 } else { (a - 1.0) * x.ln() };
    let hi = if b == 1.0 { 0.0 } else { (b - 1.0) * (-x).ln_1p() };
    lo + hi - ln_norm
}

/// Inverse of `x -> I_x(a, b)`.
///
/// Safeguarded Newton iteration inside a shrinking bisection bracket, started
/// from the normal approximation to the Beta law.
pub fn inverse_regularized_incomplete_beta(a: f64, b: f64, prob: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::domain(format!("inverse incomplete beta requires a, b > 0, got ({a}, {b})")));
    }
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::domain(format!("inverse incomplete beta requires probability in [0,1], got {prob}")));
    }
    Ok(inv_incbeta_unchecked(a, b, prob))
}

pub(crate) fn inv_incbeta_unchecked(a: f64, b: f64, prob: f64) -> f64 {
    if prob <= 0.0 {
        return 0.0;
    }
    if prob >= 1.0 {
        return 1.0;
    }
    let ln_norm = ln_beta_unchecked(a, b);
    let s = a + b;
    let mean = a / s;
    let sd = (a * b / (s * s * (s + 1.0))).sqrt();
    let z = crate::distributions::std_normal_quantile(prob);
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    let mut x = (mean + sd * z).clamp(1e-3 * mean, 1.0 - 1e-3 * (1.0 - mean));
    if !(x > 0.0 && x < 1.0) {
        x = mean;
    }
    for _ in 0..200 {
        let f = incbeta_unchecked(a, b, x) - prob;
        if f == 0.0 {
            return x;
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dens = ln_beta_density(a, b, x, ln_norm).exp();
        let mut next = if dens > 0.0 && dens.is_finite() { x - f / dens } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - x).abs();
        x = next;
        if step <= 2.0 * f64::EPSILON * x.max(1e-300) || hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn brute_harmonic(r: u64) -> f64 {
        // summed smallest-first
        let mut s = 0.0;
        let mut c = 0.0;
        for k in (1..=r).rev() {
            let y = 1.0 / k as f64 - c;
            let t = s + y;
            c = (t - s) - y;
            s = t;
        }
        s
    }

    #[test]
    fn harmonic_small_values() {
        assert_eq!(harmonic(1).unwrap(), 1.0);
        assert_eq!(harmonic(2).unwrap(), 1.5);
        assert!(harmonic(0).is_err());
    }

    #[test]
    fn harmonic_series_fallback_matches_summation() {
        let h = harmonic(1_000_000).unwrap();
        assert!((h - brute_harmonic(1_000_000)).abs() < 1e-12);
        // mpmath: H_{10^6} = 14.392726722865723631381127493188587
        assert!((h - 14.392_726_722_865_724).abs() < 1e-12);
    }

    #[test]
    fn harmonic_cache_matches_direct_sum() {
        for r in (1..=10_000u64).step_by(37).chain([9_999, 10_000]) {
            assert!((harmonic(r).unwrap() - brute_harmonic(r)).abs() <= 1e-12, "r = {r}");
        }
        assert!((harmonic(100_000).unwrap() - 12.090_146_129_863_428).abs() < 1e-12);
    }

    #[test]
    fn t_sequence_values() {
        assert_eq!(t_sequence(0), 0.0);
        assert!((t_sequence(1) + 1.0).abs() < 1e-15);
        let r = 500.0_f64;
        let expansion = 0.5 * (2.0 * PI * r / std::f64::consts::E).ln() - (1.0 + EULER_GAMMA) * r + 1.0 / (6.0 * r)
            - 1.0 / (90.0 * r * r * r);
        assert!((t_sequence(500) - expansion).abs() < 1e-10);
        // mpmath: T_500 = -785.08125653510621709
        assert!((t_sequence(500) + 785.081_256_535_106_2).abs() < 1e-10);
    }

    #[test]
    fn t_sequence_recurrence() {
        for r in 1..=10_000u64 {
            let lhs = t_sequence(r);
            let rhs = t_sequence(r - 1) + (r as f64).ln() - r as f64 * harmonic_unchecked(r)
                + (r - 1) as f64 * harmonic_unchecked(r - 1);
            assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0), "r = {r}");
        }
    }

    #[test]
    fn reduced_t_sequence_agrees_with_log_gamma_route() {
        for r in [0u64, 1, 5, 31, 32, 33, 100, 1000, 40_000] {
            let direct = t_sequence(r) + (1.0 + EULER_GAMMA) * r as f64;
            let tol = 1e-15 * (r as f64 * 10.0).max(10.0);
            assert!((t_sequence_reduced(r) - direct).abs() < tol, "r = {r}");
        }
    }

    #[test]
    fn log_gamma_values() {
        assert_eq!(log_gamma(1.0).unwrap(), 0.0);
        assert!((log_gamma(0.5).unwrap() - 0.5 * PI.ln()).abs() < 1e-14);
        // mpmath: loggamma(171.5) = 709.14316303092824227
        assert_relative_eq!(log_gamma(171.5).unwrap(), 709.143_163_030_928_2, max_relative = 1e-13);
        assert_relative_eq!(log_gamma(10.0).unwrap(), 362_880f64.ln(), max_relative = 1e-14);
        assert_relative_eq!(log_gamma(3.7).unwrap(), 1.428_072_326_665_388_1, max_relative = 1e-13);
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.5).is_err());
    }

    #[test]
    fn log_gamma_agrees_with_statrs_on_grid() {
        let mut x = 1e-3;
        while x < 1e6 {
            let ours = log_gamma(x).unwrap();
            let theirs = statrs::function::gamma::ln_gamma(x);
            assert!((ours - theirs).abs() <= 1e-12 * theirs.abs().max(1.0), "x = {x}");
            x *= 1.37;
        }
    }

    #[test]
    fn digamma_values() {
        assert!((digamma(1.0).unwrap() + EULER_GAMMA).abs() < 1e-14);
        for k in 1..200u64 {
            let want = harmonic_unchecked(k - 1) - EULER_GAMMA;
            assert!((digamma(k as f64).unwrap() - want).abs() < 1e-12, "k = {k}");
        }
        // mpmath: digamma(1000.25) = 6.9075052894144282581
        assert!((digamma(1000.25).unwrap() - 6.907_505_289_414_428).abs() < 1e-12);
        assert!(digamma(0.0).is_err());
    }

    #[test]
    fn digamma_recurrence_on_log_grid() {
        let mut x = 1e-3;
        while x < 1e6 {
            let lhs = digamma(x + 1.0).unwrap() - digamma(x).unwrap() - 1.0 / x;
            assert!(lhs.abs() <= 1e-12 * (1.0 / x).max(1.0), "x = {x}, residual {lhs}");
            x *= 1.21;
        }
    }

    #[test]
    fn log_beta_values() {
        assert_eq!(log_beta(1.0, 1.0).unwrap(), 0.0);
        assert!((log_beta(2.0, 3.0).unwrap() - (1.0f64 / 12.0).ln()).abs() < 1e-14);
        // mpmath: -612.97527873903096597
        assert_relative_eq!(log_beta(300.0, 701.0).unwrap(), -612.975_278_739_031, max_relative = 1e-12);
        assert!(log_beta(0.0, 1.0).is_err());
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        assert!((regularized_incomplete_beta(1.0, 1.0, 0.3).unwrap() - 0.3).abs() < 1e-15);
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            assert!((regularized_incomplete_beta(2.0, 1.0, x).unwrap() - x * x).abs() < 1e-14);
        }
        assert_eq!(regularized_incomplete_beta(3.0, 4.0, 0.0).unwrap(), 0.0);
        assert_eq!(regularized_incomplete_beta(3.0, 4.0, 1.0).unwrap(), 1.0);
        assert!(regularized_incomplete_beta(3.0, 4.0, 1.1).is_err());
    }

    #[test]
    fn incomplete_beta_reference_values() {
        // mpmath betainc(..., regularized=True)
        let cases = [
            (50.0, 51.0, 0.5, 0.539_794_618_693_589_4),
            (5.0, 7.0, 0.3, 0.210_304_617_3),
            (0.5, 0.5, 0.999, 0.979_864_958_366_622_5),
            (300.0, 701.0, 0.31, 0.762_944_768_329_691_8),
        ];
        for (a, b, x, want) in cases {
            let got = regularized_incomplete_beta(a, b, x).unwrap();
            let tol = if want == 0.210_304_617_3 { 1e-10 } else { 1e-12 };
            assert!((got - want).abs() < tol, "I_{x}({a},{b}) = {got}, want {want}");
        }
    }

    #[test]
    fn incomplete_beta_monotone_in_x() {
        let mut prev = 0.0;
        for i in 1..1000 {
            let x = i as f64 / 1000.0;
            let v = regularized_incomplete_beta(30.0, 70.0, x).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn inverse_incomplete_beta_round_trip() {
        for &(a, b) in &[(1.0, 1.0), (2.0, 5.0), (50.0, 51.0), (0.5, 3.0), (3000.0, 7001.0), (1.0, 200.0)] {
            for &p in &[1e-10, 1e-4, 0.1, 0.5, 0.77, 0.999, 1.0 - 1e-9] {
                let x = inverse_regularized_incomplete_beta(a, b, p).unwrap();
                let back = regularized_incomplete_beta(a, b, x).unwrap();
                assert!((back - p).abs() <= 1e-12 + 1e-10 * p, "a={a} b={b} p={p} x={x} back={back}");
            }
        }
    }
}
