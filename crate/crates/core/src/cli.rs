//! Command-line front end. [`cli_main`] parses arguments, runs one
//! subcommand and maps the outcome to an exit code.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bounds::{
    corollary1_check, default_epsilon, k3_bound, quantile_mse_bound, stirling_constant_check, stirling_sweep,
    sub_gaussian_mgf_check, verify_beta_tail, BoundReport, EpsilonWindow, STIRLING_N_GRID, STIRLING_P_GRID,
    STIRLING_Q_GRID,
};
use crate::distributions::ParentDistribution;
use crate::entropy_kl::{
    kl_decompose_spec, uniform_order_stat_entropy_exact, uniform_order_stat_entropy_expansion,
    uniform_order_stat_entropy_rank_expansion, KlConfig, Method,
};
use crate::error::{Error, Result};
use crate::exec::{with_jobs, Execution};
use crate::experiments::{condition_check, parse_n_grid, rate_sweep, write_csv, write_plot_data, SweepConfig};
use crate::order_stats::{sample_order_stat_stream, verify_moment_bound_with, OrderStatSpec, DEFAULT_MC_COUNT};

pub const EXIT_OK: i32 = 0;
pub const EXIT_BOUND_FAIL: i32 = 1;
pub const EXIT_DIVERGENT: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "ordstat", version, about = "Entropic CLT for central order statistics")]
struct Cli {
    /// Worker threads for grid evaluations and Monte Carlo (0 = all cores).
    #[arg(long, global = true, env = "ORDSTAT_JOBS")]
    jobs: Option<usize>,

    /// Run everything on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Differential entropy of the k-th of n uniform order statistics.
    Entropy {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: u64,
        /// Also print the asymptotic expansions, as JSON.
        #[arg(long)]
        expansion: bool,
    },
    /// KL decomposition of X_(np) against its Gaussian reference, as JSON.
    Kl {
        #[arg(long)]
        parent: ParentDistribution,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        p: f64,
        #[command(flatten)]
        kl: KlArgs,
        /// Skip the independent direct quadrature.
        #[arg(long)]
        no_direct: bool,
    },
    /// Sweep an n grid and fit the log-log decay rate of the KL total.
    RateFit {
        #[arg(long)]
        parent: ParentDistribution,
        #[arg(long)]
        p: f64,
        /// `LO:HI:POINTS` with an optional `log` suffix.
        #[arg(long)]
        n_grid: String,
        /// Per-n table as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Two-column `n total` file for plotting.
        #[arg(long)]
        plot_data: Option<PathBuf>,
        /// Evaluate the grid as given instead of snapping each n to an
        /// integral n·p.
        #[arg(long)]
        raw_grid: bool,
        /// Also run the direct quadrature at every n.
        #[arg(long)]
        direct: bool,
        /// Fraction of the grid, from the largest n, used for the fit.
        #[arg(long, default_value_t = 0.5)]
        window: f64,
        #[command(flatten)]
        kl: KlArgs,
    },
    /// Evaluate one of the analytic bounds against its empirical counterpart.
    BoundCheck(BoundArgs),
    /// Draws of X_(k) from n parent samples, one per line.
    Sample {
        #[arg(long)]
        parent: ParentDistribution,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: u64,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Which sufficient conditions for the entropic CLT hold, as JSON.
    Conditions {
        #[arg(long)]
        parent: ParentDistribution,
        #[arg(long)]
        p: f64,
        /// Norm order for the density condition.
        #[arg(long, default_value_t = 2.0)]
        m: f64,
        /// Absolute moment order.
        #[arg(long, default_value_t = 1.0)]
        r: f64,
    },
}

#[derive(Args, Debug)]
struct KlArgs {
    /// Absolute quadrature tolerance per integral.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = MethodArg::Quadrature)]
    method: MethodArg,
    #[arg(long, default_value_t = 100_000)]
    mc_count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl KlArgs {
    fn config(&self) -> KlConfig {
        let method = match self.method {
            MethodArg::Quadrature => Method::Quadrature,
            MethodArg::MonteCarlo => Method::MonteCarlo,
        };
        KlConfig { tol: self.tol, method, mc_count: self.mc_count, seed: self.seed, ..Default::default() }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum MethodArg {
    Quadrature,
    MonteCarlo,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Which {
    /// Beta tail probability outside the epsilon window.
    Tail,
    /// Quantile mean squared error.
    Mse,
    /// Bound on the K3 term.
    K3,
    /// Stirling-type moment constant; full sweep unless --n is given.
    Stirling,
    /// Boundedness of sqrt(n)·K2 over an n grid.
    Corollary1,
    /// Order-statistic absolute moment bound (Monte Carlo).
    Moment,
    /// Sub-Gaussian moment generating function of the Beta law.
    SubGaussian,
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[arg(long, value_enum)]
    which: Which,
    #[arg(long, default_value = "gaussian()")]
    parent: ParentDistribution,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    /// Half-width of the window around p; defaults to min(p, 1-p)/2.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Moment or Hölder order, depending on the bound.
    #[arg(long, default_value_t = 2.0)]
    q: f64,
    /// Parent absolute moment order.
    #[arg(long, default_value_t = 2.0)]
    r: f64,
    /// Grid for corollary1, `LO:HI:POINTS[log]`.
    #[arg(long, default_value = "100:100000:12log")]
    n_grid: String,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = DEFAULT_MC_COUNT)]
    mc_count: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// What a subcommand produced, before it is turned into an exit code.
enum Outcome {
    Ok,
    BoundFail,
    Divergent,
    ConditionFail,
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// exit code: 0 success, 1 bound failure, 2 divergence, 3 usage or
/// condition error.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let stdout = io::stdout();
    let result = with_jobs(cli.jobs, || run(cli.command, exec, &mut stdout.lock()));
    match result {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::BoundFail) => EXIT_BOUND_FAIL,
        Ok(Outcome::Divergent) => EXIT_DIVERGENT,
        Ok(Outcome::ConditionFail) => EXIT_USAGE,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn print_json<W: Write, T: Serialize>(out: &mut W, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct EntropyOutput {
    n: u64,
    k: u64,
    exact: f64,
    expansion: Option<f64>,
    rank_expansion: Option<f64>,
}

fn run<W: Write>(command: Command, exec: Execution, out: &mut W) -> Result<Outcome> {
    match command {
        Command::Entropy { n, k, expansion } => {
            let exact = uniform_order_stat_entropy_exact(n, k)?;
            if expansion {
                let p = k as f64 / n as f64;
                let row = EntropyOutput {
                    n,
                    k,
                    exact,
                    expansion: uniform_order_stat_entropy_expansion(n, p).ok(),
                    rank_expansion: uniform_order_stat_entropy_rank_expansion(n, k).ok(),
                };
                print_json(out, &row)?;
            } else {
                writeln!(out, "{exact:?}")?;
            }
            Ok(Outcome::Ok)
        }
        Command::Kl { parent, n, p, kl, no_direct } => {
            let spec = OrderStatSpec::from_fraction(n, p)?;
            let d = kl_decompose_spec(&parent, &spec, &kl.config(), !no_direct)?;
            print_json(out, &d)?;
            Ok(if d.is_divergent() { Outcome::Divergent } else { Outcome::Ok })
        }
        Command::RateFit { parent, p, n_grid, out: csv_path, plot_data, raw_grid, direct, window, kl } => {
            let grid = parse_n_grid(&n_grid)?;
            let cfg = SweepConfig {
                kl: kl.config(),
                with_direct: direct,
                window_fraction: window,
                integral_rank: !raw_grid,
                exec,
            };
            let report = rate_sweep(&parent, p, &grid, &cfg)?;
            if let Some(path) = csv_path {
                let mut f = create(&path)?;
                write_csv(&report, &mut f)?;
                f.flush()?;
            }
            if let Some(path) = plot_data {
                let mut f = create(&path)?;
                write_plot_data(&report, &mut f)?;
                f.flush()?;
            }
            print_json(out, &report)?;
            Ok(if report.is_divergent() { Outcome::Divergent } else { Outcome::Ok })
        }
        Command::BoundCheck(args) => {
            let reports = bound_check(&args, exec)?;
            print_json(out, &reports)?;
            Ok(if reports.iter().any(|r| r.divergent) {
                Outcome::Divergent
            } else if reports.iter().all(BoundReport::passed) {
                Outcome::Ok
            } else {
                Outcome::BoundFail
            })
        }
        Command::Sample { parent, n, k, count, seed } => {
            let spec = OrderStatSpec::new(n, k)?;
            let draws = sample_order_stat_stream(&parent, &spec, count, seed, 0, exec)?;
            for x in draws {
                writeln!(out, "{x:?}")?;
            }
            Ok(Outcome::Ok)
        }
        Command::Conditions { parent, p, m, r } => {
            let report = condition_check(&parent, p, m, r);
            print_json(out, &report)?;
            Ok(if report.all_hold { Outcome::Ok } else { Outcome::ConditionFail })
        }
    }
}

fn need_n(args: &BoundArgs) -> Result<u64> {
    args.n.ok_or_else(|| Error::Parse(format!("--which {:?} needs --n", args.which).to_lowercase()))
}

fn bound_check(args: &BoundArgs, exec: Execution) -> Result<Vec<BoundReport>> {
    let eps = args.epsilon.unwrap_or_else(|| default_epsilon(args.p));
    let p = args.p;
    let report = match args.which {
        Which::Tail => {
            let n = need_n(args)?;
            verify_beta_tail(n, p, &EpsilonWindow::concentration(n, p, eps)?, args.mc_count, args.seed, exec)?
        }
        Which::Mse => {
            let n = need_n(args)?;
            quantile_mse_bound(&args.parent, n, p, &EpsilonWindow::concentration(n, p, eps)?, args.r)?
        }
        Which::K3 => {
            let n = need_n(args)?;
            k3_bound(&args.parent, n, p, args.q, &EpsilonWindow::holder(n, p, args.q, eps)?)?
        }
        Which::Stirling => match args.n {
            Some(n) => {
                let np = n as f64 * p;
                stirling_constant_check(np, n as f64 + 1.0 - np, args.q)?
            }
            None => return stirling_sweep(&STIRLING_N_GRID, &STIRLING_Q_GRID, &STIRLING_P_GRID),
        },
        Which::Corollary1 => corollary1_check(&args.parent, p, args.r, &parse_n_grid(&args.n_grid)?)?,
        Which::Moment => {
            let spec = OrderStatSpec::from_fraction(need_n(args)?, p)?;
            verify_moment_bound_with(&args.parent, &spec, args.q, args.r, args.mc_count, args.seed, exec)?
        }
        Which::SubGaussian => sub_gaussian_mgf_check(need_n(args)?, p, args.lambda, args.mc_count, args.seed)?,
    };
    Ok(vec![report])
}
