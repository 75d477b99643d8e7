//! Command-line front end: simulation grids, tests on data files, power
//! curves and plots.

pub mod ingest;
pub mod plot;
pub mod report;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hdsphere::montecarlo::{
    figure1_spec, figure2_spec, figure3_spec, run_grid, ExperimentSpec, DEFAULT_ALPHA,
    FIGURE12_REPLICATES, FIGURE3_FULL_REPLICATES, FIGURE3_REPLICATES,
};
use hdsphere::power::{CurveKind, PowerCurve};
use hdsphere::sphere::{normalize_to_sphere, UnitVector};
use hdsphere::testing::{rayleigh_test_fixedp, rayleigh_test_highdim, specified_theta_test, sphericity_suite};
use thiserror::Error;

use crate::ingest::{ingest_csv, IngestOptions};
use crate::plot::{emit_plot, Layout};
use crate::report::{sim_rows, to_csv_string, write_csv, write_json, PowerRow, TestRecord};

/// Environment variable overriding the default output directory.
pub const OUT_ENV: &str = "HDSPHERE_OUT";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "hdsphere", version, about = "Tests of uniformity on high-dimensional spheres")]
pub struct Cli {
    /// Output directory [default: $HDSPHERE_OUT, then ./out]
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed for simulations
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on it)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the grid described by a JSON experiment file
    Simulate { spec: PathBuf },
    /// Reproduce one of the built-in grids
    Figure {
        #[arg(value_parser = clap::value_parser!(u8).range(1..=3))]
        which: u8,
        /// Replicates per cell
        #[arg(long)]
        replicates: Option<usize>,
        /// Use 10 000 replicates for figure 3
        #[arg(long, conflicts_with = "replicates")]
        full: bool,
        /// Skip the SVG
        #[arg(long)]
        no_plot: bool,
    },
    /// Test uniformity of the rows of a CSV file
    Test {
        data: PathBuf,
        #[command(flatten)]
        kind: TestKind,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Evaluate an asymptotic power curve
    Power {
        #[arg(long, value_enum)]
        curve: Curve,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        /// Comma-separated τ values
        #[arg(long, value_delimiter = ',', required = true)]
        tau_grid: Vec<f64>,
        /// Dimension for the fixed-p curve
        #[arg(long, required_if_eq("curve", "fixedp"))]
        p: Option<usize>,
    },
    /// Rayleigh-on-signs, John and sign tests of sphericity about the origin
    Sphericity {
        data: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        /// Reject files with missing cells instead of imputing
        #[arg(long)]
        no_impute: bool,
        /// Skip centering by the column means
        #[arg(long)]
        no_center: bool,
    },
}

#[derive(Debug, Args)]
#[group(multiple = false)]
pub struct TestKind {
    /// Specified-θ test; the file holds the p coordinates of θ
    #[arg(long)]
    theta: Option<PathBuf>,
    /// High-dimensional Rayleigh test (default)
    #[arg(long)]
    highdim: bool,
    /// Fixed-p Rayleigh test
    #[arg(long)]
    fixedp: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Curve {
    Specified,
    Highdim,
    Fixedp,
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let out = cli
        .out
        .clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(t) = cli.threads {
            if t == 0 {
                return Err(CliError::Usage("--threads must be at least 1".into()));
            }
            b = b.num_threads(t);
        }
        b.build().map_err(data)?
    };
    pool.install(|| dispatch(&cli, &out))
}

fn ensure_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Data(format!("cannot create {}: {e}", out.display())))
}

fn check_alpha(alpha: f64) -> Result<(), CliError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--alpha must lie in (0, 1), got {alpha}")))
    }
}

fn dispatch(cli: &Cli, out: &Path) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate { spec } => {
            let text = std::fs::read_to_string(spec)
                .map_err(|e| CliError::Data(format!("cannot read {}: {e}", spec.display())))?;
            let mut s: ExperimentSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::Data(format!("invalid experiment spec: {e}")))?;
            if let Some(seed) = cli.seed {
                s.master_seed = seed;
            }
            simulate(&s, out, "simulation", None)
        }
        Command::Figure {
            which,
            replicates,
            full,
            no_plot,
        } => {
            if *replicates == Some(0) {
                return Err(CliError::Usage("--replicates must be at least 1".into()));
            }
            let (mut s, layout) = match which {
                1 => (figure1_spec(replicates.unwrap_or(FIGURE12_REPLICATES)), Layout::RotSym),
                2 => (figure2_spec(replicates.unwrap_or(FIGURE12_REPLICATES)), Layout::RotSym),
                _ => {
                    let m = if *full {
                        FIGURE3_FULL_REPLICATES
                    } else {
                        replicates.unwrap_or(FIGURE3_REPLICATES)
                    };
                    (figure3_spec(m), Layout::Sphericity)
                }
            };
            if let Some(seed) = cli.seed {
                s.master_seed = seed;
            }
            let plot = if *no_plot { None } else { Some(layout) };
            simulate(&s, out, &format!("figure{which}"), plot)
        }
        Command::Test { data: path, kind, alpha } => {
            check_alpha(*alpha)?;
            let opts = IngestOptions {
                impute: false,
                center: false,
                project: true,
            };
            let rep = ingest_csv(path, opts).map_err(data)?;
            let sample = rep.sample.expect("projection requested");
            let outcome = if let Some(tp) = &kind.theta {
                let theta = read_theta(tp)?;
                if theta.dim() != rep.p {
                    return Err(CliError::Data(format!(
                        "theta has {} coordinates but the data has {} columns",
                        theta.dim(),
                        rep.p
                    )));
                }
                specified_theta_test(&sample, &theta, *alpha)
            } else if kind.fixedp {
                rayleigh_test_fixedp(&sample, *alpha)
            } else {
                rayleigh_test_highdim(&sample, *alpha)
            }
            .map_err(data)?;
            let rec = TestRecord::new(&outcome, rep.n, rep.p);
            ensure_dir(out)?;
            write_json(&out.join("test.json"), &rec).map_err(CliError::Data)?;
            write_csv(&out.join("test.csv"), std::slice::from_ref(&rec)).map_err(CliError::Data)?;
            println!("{}", serde_json::to_string_pretty(&rec).map_err(data)?);
            Ok(())
        }
        Command::Power {
            curve,
            alpha,
            tau_grid,
            p,
        } => {
            check_alpha(*alpha)?;
            let kind = match curve {
                Curve::Specified => CurveKind::Specified,
                Curve::Highdim => CurveKind::Highdim,
                Curve::Fixedp => CurveKind::Fixedp {
                    p: p.ok_or_else(|| CliError::Usage("--p is required for the fixedp curve".into()))?,
                },
            };
            let c = PowerCurve::evaluate(kind, *alpha, tau_grid).map_err(|e| CliError::Usage(e.to_string()))?;
            let rows: Vec<PowerRow> = c
                .taus
                .iter()
                .zip(&c.values)
                .map(|(&tau, &power)| PowerRow { tau, power })
                .collect();
            let name = match curve {
                Curve::Specified => "specified",
                Curve::Highdim => "highdim",
                Curve::Fixedp => "fixedp",
            };
            ensure_dir(out)?;
            write_csv(&out.join(format!("power_{name}.csv")), &rows).map_err(CliError::Data)?;
            write_json(&out.join(format!("power_{name}.json")), &c).map_err(CliError::Data)?;
            print!("{}", to_csv_string(&rows).map_err(CliError::Data)?);
            Ok(())
        }
        Command::Sphericity {
            data: path,
            alpha,
            no_impute,
            no_center,
        } => {
            check_alpha(*alpha)?;
            let opts = IngestOptions {
                impute: !no_impute,
                center: !no_center,
                project: true,
            };
            let rep = ingest_csv(path, opts).map_err(data)?;
            let outcomes = sphericity_suite(&rep.data, *alpha).map_err(data)?;
            let recs: Vec<TestRecord> = outcomes.iter().map(|o| TestRecord::new(o, rep.n, rep.p)).collect();
            ensure_dir(out)?;
            write_json(&out.join("sphericity.json"), &recs).map_err(CliError::Data)?;
            write_csv(&out.join("sphericity.csv"), &recs).map_err(CliError::Data)?;
            eprintln!(
                "{} rows, {} columns, {} missing cells imputed",
                rep.n, rep.p, rep.imputed
            );
            print!("{}", to_csv_string(&recs).map_err(CliError::Data)?);
            Ok(())
        }
    }
}

fn read_theta(path: &Path) -> Result<UnitVector, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    let coords = text
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Data(format!("theta: cannot parse {s:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    normalize_to_sphere(&coords).map_err(|e| CliError::Data(format!("theta: {e}")))
}

fn simulate(spec: &ExperimentSpec, out: &Path, stem: &str, plot: Option<Layout>) -> Result<(), CliError> {
    let rep = run_grid(spec);
    ensure_dir(out)?;
    let rows = sim_rows(&rep.results);
    write_csv(&out.join(format!("{stem}.csv")), &rows).map_err(CliError::Data)?;
    write_json(&out.join(format!("{stem}.json")), &rep.results).map_err(CliError::Data)?;
    for f in &rep.failures {
        eprintln!("cell {} ({}) failed: {}", f.index, f.cell_id, f.error);
    }
    if let Some(layout) = plot {
        if rep.failures.is_empty() {
            let alpha = spec.cells.first().map_or(DEFAULT_ALPHA, |c| c.alpha);
            let svg = emit_plot(&rep.results, layout, alpha).map_err(data)?;
            std::fs::write(out.join(format!("{stem}.svg")), svg).map_err(data)?;
        }
    }
    eprintln!(
        "{} cells, {} rows written to {}",
        rep.results.len(),
        rows.len(),
        out.join(format!("{stem}.csv")).display()
    );
    if rep.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{} of {} cells failed", rep.failures.len(), spec.cells.len())))
    }
}
