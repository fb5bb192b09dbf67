//! Command-line front end: parse input files, dispatch, emit JSON or CSV.
//!
//! Every successful run prints one JSON document (or a CSV table for
//! `profile --format csv`) to standard output and exits 0.  Every failure
//! prints a machine-readable error object to standard error and exits 2.
//! Output bytes never depend on `--jobs`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind as ClapErrorKind;
use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::audit::mc_delta;
use crate::calibrate::calibrate_b;
use crate::design::Design;
use crate::error::{Error, Result};
use crate::estimator::{pairs_from_json, Dataset};
use crate::gaussian_moments::conditional_moments;
use crate::laplace_profile::profile;
use crate::srs_binary::{delta_srs_b0, epsilon_srs_b0, epsilon_srs_b0_delta0, SrsBinaryConfig};

/// Version tag stamped into every emitted JSON document.
pub const SCHEMA_TAG: &str = "htdp/1";

/// Most points an epsilon grid may expand to.
const MAX_GRID_POINTS: usize = 1_000_000;

#[derive(Parser)]
#[command(
    name = "htdp",
    version,
    about = "Exact (eps, delta) privacy accounting for survey-sampling total estimators"
)]
struct Cli {
    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long, global = true, value_name = "K")]
    jobs: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact privacy profile over an epsilon grid.
    Profile(ProfileArgs),
    /// Smallest Laplace scale meeting a delta target at fixed epsilon.
    Calibrate(CalibrateArgs),
    /// Closed forms for simple random sampling on binary data, no noise.
    Srs(SrsArgs),
    /// Conditional moments of the estimator at one unit.
    Moments(MomentsArgs),
    /// Monte Carlo estimate of one delta value.
    Audit(AuditArgs),
}

#[derive(clap::Args)]
struct ProfileArgs {
    /// Sampling design file (JSON).
    #[arg(long, value_name = "FILE")]
    design: PathBuf,
    /// Adjacent-pair file (JSON, one pair or an array).
    #[arg(long, value_name = "FILE")]
    pairs: PathBuf,
    /// Laplace scale, 0 for the noiseless release.
    #[arg(long)]
    b: f64,
    /// Epsilon grid: "a:b:step" (from a, up to b inclusive) or one value.
    #[arg(long = "eps-grid", value_name = "GRID")]
    eps_grid: String,
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(clap::Args)]
struct CalibrateArgs {
    /// Sampling design file (JSON).
    #[arg(long, value_name = "FILE")]
    design: PathBuf,
    /// Adjacent-pair file (JSON, one pair or an array).
    #[arg(long, value_name = "FILE")]
    pairs: PathBuf,
    /// Epsilon the guarantee is stated at.
    #[arg(long)]
    eps: f64,
    /// Delta target in [0, 1).
    #[arg(long)]
    delta: f64,
}

#[derive(clap::Args)]
#[command(group(
    ArgGroup::new("ask").required(true).multiple(false).args(["query", "eps", "delta"])
))]
struct SrsArgs {
    /// Population size.
    #[arg(long = "N")]
    n_pop: u64,
    /// Sample size.
    #[arg(long)]
    n: u64,
    /// Smallest admissible population total.
    #[arg(long)]
    mt: u64,
    /// Largest admissible population total.
    #[arg(long = "Mt")]
    mt_max: u64,
    /// Named query; "eps0" asks for the largest epsilon holding at delta 0.
    #[arg(long, value_enum)]
    query: Option<SrsQuery>,
    /// Report delta at this epsilon.
    #[arg(long)]
    eps: Option<f64>,
    /// Report the largest epsilon holding at this delta.
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(clap::Args)]
struct MomentsArgs {
    /// Sampling design file (JSON).
    #[arg(long, value_name = "FILE")]
    design: PathBuf,
    /// Dataset file (JSON).
    #[arg(long, value_name = "FILE")]
    data: PathBuf,
    /// Unit to condition on.
    #[arg(long)]
    unit: usize,
    /// Return in-sample moments for both conditions when the unit is
    /// always selected, instead of failing.
    #[arg(long = "allow-census")]
    allow_census: bool,
}

#[derive(clap::Args)]
struct AuditArgs {
    /// Sampling design file (JSON).
    #[arg(long, value_name = "FILE")]
    design: PathBuf,
    /// Adjacent-pair file (JSON, one pair or an array).
    #[arg(long, value_name = "FILE")]
    pairs: PathBuf,
    /// Which pair of the file to audit.
    #[arg(long = "pair-index", default_value_t = 0)]
    pair_index: usize,
    /// Laplace scale, 0 for the noiseless release.
    #[arg(long)]
    b: f64,
    /// Epsilon to score the privacy-loss excess at.
    #[arg(long)]
    eps: f64,
    /// Monte Carlo trials (at least 10000).
    #[arg(long)]
    trials: u64,
    /// PRNG seed; fixed seed and trials reproduce the output exactly.
    #[arg(long)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SrsQuery {
    /// Largest epsilon at which delta is exactly zero.
    Eps0,
}

/// Parse and run one invocation; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e)
            if e.kind() == ClapErrorKind::DisplayHelp
                || e.kind() == ClapErrorKind::DisplayVersion =>
        {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            eprintln!("{}", usage_error_json(&e.to_string()));
            return 2;
        }
    };

    let outcome = match cli.jobs {
        Some(jobs) => match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(pool) => pool.install(|| dispatch(&cli.cmd)),
            Err(e) => {
                eprintln!("{}", usage_error_json(&format!("cannot build thread pool: {e}")));
                return 2;
            }
        },
        None => dispatch(&cli.cmd),
    };

    match outcome {
        Ok(text) => {
            println!("{text}");
            0
        }
        Err(e) => {
            eprintln!("{}", error_json(&e));
            2
        }
    }
}

fn dispatch(cmd: &Cmd) -> Result<String> {
    match cmd {
        Cmd::Profile(a) => run_profile(a),
        Cmd::Calibrate(a) => run_calibrate(a),
        Cmd::Srs(a) => run_srs(a),
        Cmd::Moments(a) => run_moments(a),
        Cmd::Audit(a) => run_audit(a),
    }
}

fn run_profile(a: &ProfileArgs) -> Result<String> {
    let d = load_design(&a.design)?;
    let pairs = pairs_from_json(&read_file(&a.pairs)?)?;
    let grid = parse_eps_grid(&a.eps_grid)?;
    let prof = profile(&d, &pairs, a.b, &grid)?;
    match a.format {
        Format::Csv => Ok(prof.to_csv().trim_end().to_owned()),
        Format::Json => {
            let v = serde_json::to_value(&prof).expect("profile serialization cannot fail");
            Ok(stamped(v))
        }
    }
}

fn run_calibrate(a: &CalibrateArgs) -> Result<String> {
    let d = load_design(&a.design)?;
    let pairs = pairs_from_json(&read_file(&a.pairs)?)?;
    let cal = calibrate_b(&d, &pairs, a.eps, a.delta)?;
    let v = serde_json::to_value(&cal).expect("calibration serialization cannot fail");
    Ok(stamped(v))
}

fn run_srs(a: &SrsArgs) -> Result<String> {
    let cfg = SrsBinaryConfig::new(a.n_pop, a.n, a.mt, a.mt_max)?;
    let v = if a.query.is_some() {
        json!({ "epsilon_at_delta0": json_f64(epsilon_srs_b0_delta0(&cfg)) })
    } else if let Some(eps) = a.eps {
        if !eps.is_finite() || eps < 0.0 {
            return Err(Error::InvalidEpsilon { eps });
        }
        json!({ "delta": delta_srs_b0(&cfg, eps) })
    } else {
        let delta = a.delta.expect("clap guarantees one of query/eps/delta");
        json!({ "epsilon": json_f64(epsilon_srs_b0(&cfg, delta)?) })
    };
    Ok(stamped(v))
}

fn run_moments(a: &MomentsArgs) -> Result<String> {
    let d = load_design(&a.design)?;
    let x = Dataset::from_json(&read_file(&a.data)?)?;
    let m = conditional_moments(&d, &x, a.unit, a.allow_census)?;
    let v = serde_json::to_value(m).expect("moments serialization cannot fail");
    Ok(stamped(v))
}

fn run_audit(a: &AuditArgs) -> Result<String> {
    let d = load_design(&a.design)?;
    let pairs = pairs_from_json(&read_file(&a.pairs)?)?;
    let pair = pairs.get(a.pair_index).ok_or_else(|| Error::BadGrid {
        detail: format!(
            "pair index {} out of range for a file of {} pairs",
            a.pair_index,
            pairs.len()
        ),
    })?;
    let est = mc_delta(&d, pair, a.b, a.eps, a.trials, a.seed)?;
    let v = serde_json::to_value(&est).expect("estimate serialization cannot fail");
    Ok(stamped(v))
}

fn read_file(path: &Path) -> Result<String> {
    Ok(std::fs::read_to_string(path)?)
}

fn load_design(path: &Path) -> Result<Design> {
    Design::from_json(&read_file(path)?)
}

/// Expand an epsilon grid argument: either one number or "a:b:step",
/// inclusive of a and of any point below b + step/2.
fn parse_eps_grid(text: &str) -> Result<Vec<f64>> {
    let bad = |detail: String| Error::BadGrid { detail };
    let parts: Vec<&str> = text.split(':').collect();
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| bad(format!("cannot parse '{text}' as a number or a:b:step")))?;
    match nums.as_slice() {
        [one] => Ok(vec![*one]),
        [a, b, step] => {
            if !a.is_finite() || !b.is_finite() || !step.is_finite() || *step <= 0.0 {
                return Err(bad("need finite a:b:step with step > 0".to_owned()));
            }
            if b < a {
                return Err(bad("empty grid: upper end below lower end".to_owned()));
            }
            let mut grid = Vec::new();
            for k in 0.. {
                let v = a + (k as f64) * step;
                if v >= b + 0.5 * step {
                    break;
                }
                if grid.len() >= MAX_GRID_POINTS {
                    return Err(bad(format!("grid exceeds {MAX_GRID_POINTS} points")));
                }
                grid.push(v);
            }
            Ok(grid)
        }
        _ => Err(bad("expected 'a:b:step' or a single number".to_owned())),
    }
}

/// Serialize a JSON object with the schema tag added.
fn stamped(mut v: Value) -> String {
    v.as_object_mut()
        .expect("all outputs are JSON objects")
        .insert("schema".to_owned(), Value::String(SCHEMA_TAG.to_owned()));
    v.to_string()
}

/// A number, with positive infinity spelled "inf" (JSON has no infinities).
fn json_f64(v: f64) -> Value {
    if v == f64::INFINITY {
        Value::String("inf".to_owned())
    } else {
        json!(v)
    }
}

fn error_json(e: &Error) -> String {
    json!({
        "schema": SCHEMA_TAG,
        "error": { "kind": e.kind(), "message": e.to_string() },
    })
    .to_string()
}

fn usage_error_json(message: &str) -> String {
    json!({
        "schema": SCHEMA_TAG,
        "error": { "kind": "usage", "message": message },
    })
    .to_string()
}
