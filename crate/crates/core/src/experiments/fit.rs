//! Least-squares slopes on log-log axes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A grid point left out of the fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub n: u64,
    #[serde(with = "crate::serde_ext::real")]
    pub value: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub n_grid: Vec<u64>,
    #[serde(with = "crate::serde_ext::real_vec")]
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Fraction of the grid, counted from the largest `n`, that was fitted.
    pub window_fraction: f64,
    pub fitted_n: Vec<u64>,
    pub excluded: Vec<Exclusion>,
}

impl RateFit {
    /// Value of the fitted power law at `n`.
    pub fn predict(&self, n: f64) -> f64 {
        (self.intercept + self.slope * n.ln()).exp()
    }
}

/// Fits `log value = intercept + slope · log n` over the top
/// `window_fraction` of the grid. Non-positive or non-finite values in the
/// window are excluded and listed.
pub fn fit_log_log(n_grid: &[u64], values: &[f64], window_fraction: f64) -> Result<RateFit> {
    if n_grid.len() != values.len() {
        return Err(Error::domain(format!("{} grid points but {} values", n_grid.len(), values.len())));
    }
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::domain(format!("window fraction must lie in (0, 1], got {window_fraction}")));
    }
    let len = n_grid.len();
    let take = ((len as f64 * window_fraction).ceil() as usize).min(len);
    let start = len - take;
    let mut xs = Vec::with_capacity(take);
    let mut ys = Vec::with_capacity(take);
    let mut fitted_n = Vec::with_capacity(take);
    let mut excluded = Vec::new();
    for (&n, &v) in n_grid[start..].iter().zip(&values[start..]) {
        let reason = if n == 0 {
            Some("n = 0 has no logarithm")
        } else if v.is_nan() {
            Some("value is NaN")
        } else if v.is_infinite() {
            Some("value is infinite")
        } else if v <= 0.0 {
            Some("value is not positive")
        } else {
            None
        };
        match reason {
            Some(r) => excluded.push(Exclusion { n, value: v, reason: r.into() }),
            None => {
                xs.push((n as f64).ln());
                ys.push(v.ln());
                fitted_n.push(n);
            }
        }
    }
    if xs.len() < 2 {
        return Err(Error::domain(format!(
            "need two usable points in the fit window, have {} ({} excluded)",
            xs.len(),
            excluded.len()
        )));
    }
    let m = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / m;
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("fit window has a single distinct n"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let syy: f64 = ys.iter().map(|y| (y - ybar).powi(2)).sum();
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - sse / syy).clamp(0.0, 1.0) };
    Ok(RateFit {
        n_grid: n_grid.to_vec(),
        values: values.to_vec(),
        slope,
        intercept,
        r_squared,
        window_fraction,
        fitted_n,
        excluded,
    })
}
