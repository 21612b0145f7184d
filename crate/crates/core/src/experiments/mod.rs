//! Batch experiments: KL rate sweeps over `n`, checks of the sufficient
//! conditions, and machine-readable reports.

pub mod fit;
mod report;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds::BoundReport;
use crate::distributions::ParentDistribution;
use crate::entropy_kl::{kl_decompose_spec, KlConfig, KlDecomposition};
use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::order_stats::OrderStatSpec;

pub use fit::{fit_log_log, Exclusion, RateFit};
pub use report::{read_csv, write_csv, write_plot_data, CsvRow, CSV_COLUMNS};

/// Bumped whenever a report or CSV column changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

/// Parses `LO:HI:POINTS` (linear) or `LO:HI:POINTSlog` (log-spaced). Points
/// are rounded to integers and deduplicated.
pub fn parse_n_grid(s: &str) -> Result<Vec<u64>> {
    let bad = |why: &str| Error::Parse(format!("n grid '{s}': {why} (expected LO:HI:POINTS[log])"));
    let parts: Vec<&str> = s.trim().split(':').collect();
    if parts.len() != 3 {
        return Err(bad("three ':'-separated fields needed"));
    }
    let lo: u64 = parts[0].trim().parse().map_err(|_| bad("LO is not an integer"))?;
    let hi: u64 = parts[1].trim().parse().map_err(|_| bad("HI is not an integer"))?;
    let (count, log) = match parts[2].trim().strip_suffix("log") {
        Some(c) => (c, true),
        None => (parts[2].trim(), false),
    };
    let points: usize = count.parse().map_err(|_| bad("POINTS is not an integer"))?;
    if lo == 0 || hi < lo {
        return Err(bad("need 1 <= LO <= HI"));
    }
    if points == 0 {
        return Err(bad("POINTS must be positive"));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo as f64, hi as f64);
    let mut grid: Vec<u64> = (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            let x = if log { (a.ln() + t * (b.ln() - a.ln())).exp() } else { a + t * (b - a) };
            (x.round() as u64).clamp(lo, hi)
        })
        .collect();
    grid.dedup();
    Ok(grid)
}

/// Smallest `d <= 10_000` with `d·p` an integer, if any.
pub fn fraction_denominator(p: f64) -> Option<u64> {
    (1..=10_000u64).find(|&d| {
        let x = d as f64 * p;
        (x - x.round()).abs() < 1e-9
    })
}

/// Moves each `n` to the nearest multiple of the denominator of `p`, so that
/// `n·p` is an integer and the rank needs no rounding. Duplicates created by
/// snapping are dropped. Grids are returned unchanged when `p` has no
/// denominator up to 10⁴.
///
/// Rounding matters: at `p = ½` the rounded rank alternates between the exact
/// median for odd `n`, where the relative entropy is `O(1/n²)`, and the lower
/// median for even `n`, where it is about `1/(2n)`.
pub fn integral_rank_grid(n_grid: &[u64], p: f64) -> Vec<u64> {
    let Some(d) = fraction_denominator(p) else {
        log::warn!("p = {p} has no small denominator; grid left as given");
        return n_grid.to_vec();
    };
    let mut out: Vec<u64> = n_grid.iter().map(|&n| (((n as f64) / d as f64).round() as u64).max(1) * d).collect();
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub kl: KlConfig,
    /// Also run the direct quadrature at every `n`.
    pub with_direct: bool,
    pub window_fraction: f64,
    /// Snap grid points with [`integral_rank_grid`] before evaluating.
    pub integral_rank: bool,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            kl: KlConfig::default(),
            with_direct: false,
            window_fraction: 0.5,
            integral_rank: true,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub experiment_id: String,
    pub parent: ParentDistribution,
    pub parent_spec: String,
    pub p: f64,
    /// The grid as requested, before any snapping.
    pub requested_n_grid: Vec<u64>,
    /// The grid actually evaluated.
    pub n_grid: Vec<u64>,
    pub records: Vec<KlDecomposition>,
    pub fit: Option<RateFit>,
    pub bound_reports: Vec<BoundReport>,
    /// Grid points where some term diverged.
    pub divergent_n: Vec<u64>,
    pub seed: u64,
    pub tolerance: f64,
    pub config: SweepConfig,
    /// Why the fit is absent, if it is.
    pub fit_error: Option<String>,
    /// Excluded from reproducibility comparisons.
    pub wall_time_s: f64,
}

impl ExperimentReport {
    pub fn is_divergent(&self) -> bool {
        !self.divergent_n.is_empty()
    }

    /// Decomposed KL totals in grid order.
    pub fn totals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.total_decomposed).collect()
    }
}

/// `kl_decompose` at every `n` of the grid plus a log-log fit of the totals
/// over the top of the grid. Divergent points are recorded and left out of
/// the fit; if every point diverges the fit is skipped.
pub fn rate_sweep(
    parent: &ParentDistribution,
    p: f64,
    requested: &[u64],
    config: &SweepConfig,
) -> Result<ExperimentReport> {
    if requested.is_empty() || requested.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("n grid must be non-empty and strictly increasing"));
    }
    if requested[0] < 10 {
        return Err(Error::domain(format!("n grid must start at 10 or more, got {}", requested[0])));
    }
    let snapped;
    let n_grid = if config.integral_rank {
        snapped = integral_rank_grid(requested, p);
        &snapped[..]
    } else {
        requested
    };
    let started = Instant::now();
    let results = map_slice(config.exec, n_grid, |&n| {
        let spec = OrderStatSpec::from_fraction_with(n, p, config.kl.rounding)?;
        kl_decompose_spec(parent, &spec, &config.kl, config.with_direct)
    });
    let records = results.into_iter().collect::<Result<Vec<_>>>()?;
    let divergent_n: Vec<u64> = records.iter().filter(|r| r.is_divergent()).map(|r| r.n).collect();
    for &n in &divergent_n {
        log::warn!("divergent KL term for {parent} at n = {n}");
    }
    let totals: Vec<f64> = records.iter().map(|r| r.total_decomposed).collect();
    let (fit, fit_error) = if divergent_n.len() == records.len() {
        (None, Some("every grid point diverged; no fit".to_string()))
    } else {
        match fit_log_log(n_grid, &totals, config.window_fraction) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        experiment_id: format!(
            "rate_sweep/{parent}/p={p}/n={}..{}x{}",
            n_grid[0],
            n_grid[n_grid.len() - 1],
            n_grid.len()
        ),
        parent: *parent,
        parent_spec: parent.to_string(),
        p,
        requested_n_grid: requested.to_vec(),
        n_grid: n_grid.to_vec(),
        records,
        fit,
        bound_reports: Vec::new(),
        divergent_n,
        seed: config.kl.seed,
        tolerance: config.kl.tol,
        config: *config,
        fit_error,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// Which of the three sufficient conditions hold for a parent at `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub parent: String,
    pub p: f64,
    pub m: f64,
    pub r: f64,
    /// `‖f‖_m < ∞`.
    pub condition1: bool,
    #[serde(with = "crate::serde_ext::real")]
    pub norm: f64,
    /// `f(F⁻¹(p)) > 0` and `f'∘F⁻¹` continuous near `p`.
    pub condition2: bool,
    #[serde(with = "crate::serde_ext::real")]
    pub density_at_quantile: f64,
    pub derivative_continuous: bool,
    /// `E|X|^r < ∞`.
    pub condition3: bool,
    #[serde(with = "crate::serde_ext::real")]
    pub abs_moment: f64,
    pub all_hold: bool,
}

/// Evaluates the three conditions; never fails, only reports.
pub fn condition_check(parent: &ParentDistribution, p: f64, m: f64, r: f64) -> ConditionReport {
    let norm = parent.norm(m).unwrap_or(f64::NAN);
    let condition1 = norm.is_finite();
    let valid_p = p > 0.0 && p < 1.0;
    let density = if valid_p { parent.density_at_quantile(p) } else { f64::NAN };
    let derivative_continuous = valid_p && derivative_probe(parent, p);
    let condition2 = density > 0.0 && density.is_finite() && derivative_continuous;
    let abs_moment = if r > 0.0 { parent.abs_moment(r) } else { f64::NAN };
    let condition3 = abs_moment.is_finite();
    ConditionReport {
        parent: parent.to_string(),
        p,
        m,
        r,
        condition1,
        norm,
        condition2,
        density_at_quantile: density,
        derivative_continuous,
        condition3,
        abs_moment,
        all_hold: condition1 && condition2 && condition3,
    }
}

/// `f'(F⁻¹(p ± h))` must stay finite and approach `f'(F⁻¹(p))` as `h`
/// shrinks from `1e-3` to `1e-7`.
fn derivative_probe(parent: &ParentDistribution, p: f64) -> bool {
    let at = |t: f64| parent.pdf_derivative(parent.quantile_split(t, 1.0 - t));
    let centre = at(p);
    if !centre.is_finite() {
        return false;
    }
    let tol = 1e-3 * (1.0 + centre.abs());
    let mut last = f64::INFINITY;
    for h in [1e-3, 1e-4, 1e-5, 1e-6, 1e-7] {
        if p - h <= 0.0 || p + h >= 1.0 {
            continue;
        }
        let gap = (at(p - h) - centre).abs().max((at(p + h) - centre).abs());
        if !gap.is_finite() {
            return false;
        }
        last = gap;
    }
    last <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::make_parent;

    #[test]
    fn grid_syntax() {
        assert_eq!(parse_n_grid("100:100000:4log").unwrap(), vec![100, 1000, 10_000, 100_000]);
        assert_eq!(parse_n_grid("10:20:3").unwrap(), vec![10, 15, 20]);
        assert_eq!(parse_n_grid("10:12:10log").unwrap(), vec![10, 11, 12]);
        assert_eq!(parse_n_grid("100:100000:12log").unwrap().len(), 12);
        for bad in ["", "1:2", "a:2:3", "10:5:3log", "0:5:2", "1:5:0", "1:5:xlog"] {
            assert!(matches!(parse_n_grid(bad), Err(Error::Parse(_))), "{bad}");
        }
    }

    #[test]
    fn snapping() {
        assert_eq!(fraction_denominator(0.5), Some(2));
        assert_eq!(fraction_denominator(0.3), Some(10));
        assert_eq!(fraction_denominator(std::f64::consts::FRAC_1_PI), None);
        assert_eq!(integral_rank_grid(&[100, 187, 351, 352], 0.5), vec![100, 188, 352]);
        assert_eq!(integral_rank_grid(&[11, 14, 26], 0.3), vec![10, 30]);
        let g = integral_rank_grid(&parse_n_grid("100:100000:12log").unwrap(), 0.5);
        assert!(g.iter().all(|n| n % 2 == 0) && g.len() == 12);
    }

    #[test]
    fn parity_zigzag_without_snapping() {
        // exact median (odd n) against lower median (even n)
        let u = make_parent("uniform", &[]).unwrap();
        let raw = SweepConfig { integral_rank: false, ..Default::default() };
        let rep = rate_sweep(&u, 0.5, &[1000, 1001], &raw).unwrap();
        let t = rep.totals();
        assert!(t[1] < t[0] / 100.0, "{t:?}");
        assert!((t[0] * 1000.0 - 0.5).abs() < 0.01);
    }

    #[test]
    fn sweep_on_gaussian() {
        let g = make_parent("gaussian", &[]).unwrap();
        let grid = parse_n_grid("100:10000:6log").unwrap();
        let rep = rate_sweep(&g, 0.5, &grid, &SweepConfig::default()).unwrap();
        assert!(!rep.is_divergent());
        let fit = rep.fit.unwrap();
        assert!((fit.slope + 1.0).abs() < 0.01, "{}", fit.slope);
        assert!(rep.n_grid.iter().all(|n| n % 2 == 0));
        assert_eq!(rep.records.len(), grid.len());
        assert!(rate_sweep(&g, 0.5, &[5, 10], &SweepConfig::default()).is_err());
        assert!(rate_sweep(&g, 0.5, &[100, 50], &SweepConfig::default()).is_err());
    }

    #[test]
    fn sweep_is_execution_invariant() {
        let e = make_parent("exponential", &[]).unwrap();
        let grid = [10u64, 30, 100, 300];
        let seq = SweepConfig { exec: Execution::Sequential, ..Default::default() };
        let a = rate_sweep(&e, 0.3, &grid, &seq).unwrap();
        let b = rate_sweep(&e, 0.3, &grid, &SweepConfig::default()).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.fit, b.fit);
    }

    #[test]
    fn f1_sweep_skips_fit() {
        let rep = rate_sweep(&ParentDistribution::F1, 0.5, &[100, 1000], &SweepConfig::default()).unwrap();
        assert_eq!(rep.divergent_n, vec![100, 1000]);
        assert!(rep.fit.is_none() && rep.fit_error.is_some());
        assert!(rep.records.iter().all(|r| r.k2.value.is_infinite()));
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("\"inf\""));
    }

    #[test]
    fn conditions() {
        let c = condition_check(&make_parent("cauchy", &[]).unwrap(), 0.5, 2.0, 0.5);
        assert!(c.condition1 && c.condition2 && c.condition3 && c.all_hold, "{c:?}");
        for r in [0.1, 0.5, 1.0, 2.0] {
            let c = condition_check(&ParentDistribution::F1, 0.5, 2.0, r);
            assert!(!c.condition3, "r={r}");
        }
        let c = condition_check(&ParentDistribution::F2, 0.5, 2.0, 1.0);
        assert!(!c.condition1 && c.condition2);
        let c = condition_check(&make_parent("gaussian", &[]).unwrap(), 0.5, f64::INFINITY, 2.0);
        assert!(c.all_hold);
        let c = condition_check(&make_parent("exponential", &[]).unwrap(), 0.3, 2.0, 1.0);
        assert!(c.all_hold);
    }
}
