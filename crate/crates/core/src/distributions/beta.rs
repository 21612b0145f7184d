use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::rng::draw_map;
use crate::special::{incbeta_unchecked, inv_incbeta_unchecked, ln_beta_density, ln_beta_unchecked};

/// `Beta(alpha, beta)`; `U_(k)` of a uniform sample of size `n` is
/// `Beta(k, n + 1 - k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaLaw {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaLaw {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(Error::domain(format!("Beta parameters must be positive and finite, got ({alpha}, {beta})")));
        }
        Ok(BetaLaw { alpha, beta })
    }

    /// Law of the `k`-th of `n` uniform order statistics.
    pub fn order_stat(n: u64, k: u64) -> Result<Self> {
        if k < 1 || k > n {
            return Err(Error::domain(format!("rank k={k} outside [1, {n}]")));
        }
        Ok(BetaLaw { alpha: k as f64, beta: (n + 1 - k) as f64 })
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    pub fn variance(&self) -> f64 {
        let s = self.alpha + self.beta;
        self.alpha * self.beta / (s * s * (s + 1.0))
    }

    pub fn mean_var(&self) -> (f64, f64) {
        (self.mean(), self.variance())
    }

    /// `E[(W - EW)^4]`.
    pub fn fourth_central_moment(&self) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        let s = a + b;
        3.0 * a * b * (a * b * (s - 6.0) + 2.0 * s * s) / (s.powi(4) * (s + 1.0) * (s + 2.0) * (s + 3.0))
    }

    pub fn ln_norm(&self) -> f64 {
        ln_beta_unchecked(self.alpha, self.beta)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0 && x < 1.0) {
            return f64::NEG_INFINITY;
        }
        ln_beta_density(self.alpha, self.beta, x, self.ln_norm())
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        incbeta_unchecked(self.alpha, self.beta, x.clamp(0.0, 1.0))
    }

    pub fn quantile(&self, u: f64) -> f64 {
        inv_incbeta_unchecked(self.alpha, self.beta, u)
    }

    /// Differential entropy in nats, by its digamma closed form.
    pub fn entropy(&self) -> f64 {
        use crate::special::digamma_unchecked as psi;
        let (a, b) = (self.alpha, self.beta);
        self.ln_norm() - (a - 1.0) * psi(a) - (b - 1.0) * psi(b) + (a + b - 2.0) * psi(a + b)
    }

    /// `count` variates by inversion, one uniform per variate.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Vec<f64>> {
        self.sample_stream(count, seed, 0, Execution::default())
    }

    pub fn sample_stream(&self, count: usize, seed: u64, stream_id: u64, exec: Execution) -> Result<Vec<f64>> {
        if count == 0 {
            return Err(Error::domain("sample count must be at least 1"));
        }
        let law = *self;
        Ok(draw_map(exec, seed, stream_id, count as u64, move |u| {
            law.quantile(u).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
        }))
    }
}

pub fn beta_mean_var(law: &BetaLaw) -> (f64, f64) {
    law.mean_var()
}

pub fn beta_fourth_central_moment(law: &BetaLaw) -> f64 {
    law.fourth_central_moment()
}

pub fn beta_sample(law: &BetaLaw, count: usize, seed: u64) -> Result<Vec<f64>> {
    law.sample(count, seed)
}
