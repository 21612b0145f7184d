//! CSV and plot-data writers for sweep reports.
//!
//! CSV columns, in order:
//! `schema_version, parent, p, n, k, k1, k2, k2_error, k3, k3_error, total,
//! direct, direct_error, divergent, fit_slope, fit_intercept, fit_r_squared`.
//! Non-finite numbers are written as `inf`, `-inf` or `nan`; absent values
//! (no direct quadrature, no fit) as empty cells.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::ExperimentReport;
use crate::error::Result;

pub const CSV_COLUMNS: [&str; 17] = [
    "schema_version",
    "parent",
    "p",
    "n",
    "k",
    "k1",
    "k2",
    "k2_error",
    "k3",
    "k3_error",
    "total",
    "direct",
    "direct_error",
    "divergent",
    "fit_slope",
    "fit_intercept",
    "fit_r_squared",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub schema_version: u32,
    pub parent: String,
    pub p: f64,
    pub n: u64,
    pub k: u64,
    #[serde(with = "crate::serde_ext::real")]
    pub k1: f64,
    #[serde(with = "crate::serde_ext::real")]
    pub k2: f64,
    #[serde(with = "crate::serde_ext::real")]
    pub k2_error: f64,
    #[serde(with = "crate::serde_ext::real")]
    pub k3: f64,
    #[serde(with = "crate::serde_ext::real")]
    pub k3_error: f64,
    #[serde(with = "crate::serde_ext::real")]
    pub total: f64,
    #[serde(with = "crate::serde_ext::real_opt")]
    pub direct: Option<f64>,
    #[serde(with = "crate::serde_ext::real_opt")]
    pub direct_error: Option<f64>,
    pub divergent: bool,
    #[serde(with = "crate::serde_ext::real_opt")]
    pub fit_slope: Option<f64>,
    #[serde(with = "crate::serde_ext::real_opt")]
    pub fit_intercept: Option<f64>,
    #[serde(with = "crate::serde_ext::real_opt")]
    pub fit_r_squared: Option<f64>,
}

fn rows(report: &ExperimentReport) -> Vec<CsvRow> {
    let fit = report.fit.as_ref();
    report
        .records
        .iter()
        .map(|r| CsvRow {
            schema_version: report.schema_version,
            parent: report.parent_spec.clone(),
            p: report.p,
            n: r.n,
            k: r.k,
            k1: r.k1,
            k2: r.k2.value,
            k2_error: r.k2.error,
            k3: r.k3.value,
            k3_error: r.k3.error,
            total: r.total_decomposed,
            direct: r.total_direct.as_ref().map(|d| d.value),
            direct_error: r.total_direct.as_ref().map(|d| d.error),
            divergent: r.is_divergent(),
            fit_slope: fit.map(|f| f.slope),
            fit_intercept: fit.map(|f| f.intercept),
            fit_r_squared: fit.map(|f| f.r_squared),
        })
        .collect()
}

/// One row per grid point, in grid order.
pub fn write_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let rows = rows(report);
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<Vec<CsvRow>, _>>()?)
}

/// Two whitespace-separated columns, `n` and the decomposed KL total, under
/// a `#` header line.
pub fn write_plot_data<W: Write>(report: &ExperimentReport, mut out: W) -> Result<()> {
    writeln!(out, "# n kl_total ({})", report.parent_spec)?;
    for r in &report.records {
        writeln!(out, "{} {}", r.n, crate::serde_ext::fmt_real(r.total_decomposed))?;
    }
    Ok(())
}
