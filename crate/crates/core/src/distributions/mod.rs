//! Parent laws and the Beta law of uniform order statistics.

mod beta;
mod parent;

pub use beta::{beta_fourth_central_moment, beta_mean_var, beta_sample, BetaLaw};
pub use parent::{make_parent, quantile_clamp_events, ParentDistribution, QUANTILE_CLAMP};

use statrs::function::erf::erfc_inv;

/// Standard normal quantile `Φ⁻¹(u)`: inverse-erfc start plus one Halley
/// step against the tail that `u` lies in.
pub fn std_normal_quantile(u: f64) -> f64 {
    if u <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if u >= 1.0 {
        return f64::INFINITY;
    }
    if u > 0.5 {
        return -lower_normal_quantile(1.0 - u);
    }
    lower_normal_quantile(u)
}

/// `Φ⁻¹(1 - t)` without forming `1 - t`.
pub fn std_normal_upper_quantile(t: f64) -> f64 {
    -std_normal_quantile(t)
}

fn lower_normal_quantile(u: f64) -> f64 {
    let z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u);
    if !z.is_finite() {
        return z;
    }
    let dens = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if dens == 0.0 {
        return z;
    }
    let r = (std_normal_cdf(z) - u) / dens;
    z - r / (1.0 + 0.5 * z * r)
}

/// Standard normal cdf `Φ(z)`.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}
