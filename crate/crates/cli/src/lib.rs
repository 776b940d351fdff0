//! Command-line runner for the momentlab suites.
//!
//! Exit codes: 0 pass, 1 inequality violation, 2 usage error, 3 model or
//! method incompatibility, 4 numeric failure.

pub mod commands;
pub mod config;
pub mod output;

use clap::{Args, Parser, Subcommand};
use config::{experiment_section, parse_grid, resolve_model, ExperimentConfig};
use momentlab::LabError;
use output::OutDir;
use std::collections::BTreeMap;
use std::path::PathBuf;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INCOMPATIBLE: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "momentlab", version, about = "Moment and maximal inequality lab for stationary sequences")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check ≪-inequalities through their ratio sequence.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Theorem ids, comma separated.
        #[arg(long, value_delimiter = ',')]
        theorem: Vec<String>,
    },
    /// Randomized suites for the auxiliary lemmas.
    Lemmas {
        #[command(flatten)]
        common: Common,
        /// Scalar draws for the cross suite; the others scale from it.
        #[arg(long)]
        budget: Option<usize>,
        /// Comma-separated subset of cross, basic, covbeta, subadd.
        #[arg(long)]
        suites: Option<String>,
        /// Corrupt one subadditive array, to check that failures surface.
        #[arg(long)]
        inject_failure: bool,
    },
    /// Projective and mixing profiles as CSV and JSON.
    Profile {
        #[command(flatten)]
        common: Common,
        /// Run exact and Monte Carlo side by side with an agreement table.
        #[arg(long)]
        dual: bool,
    },
    /// Integrated L^p risk of kernel density estimators and its rate.
    Density {
        #[command(flatten)]
        common: Common,
        /// rectangular, triangular or quartic.
        #[arg(long)]
        kernel: Option<String>,
        /// Smoothness order in h_n = n^{-1/(2s+1)}.
        #[arg(long)]
        s: Option<u32>,
        /// Fixed bandwidth instead of the rate choice.
        #[arg(long)]
        h: Option<f64>,
        /// Also run i.i.d. draws from the same marginal.
        #[arg(long)]
        iid_baseline: bool,
    },
    /// Maximal Bernstein tail bound against empirical tails.
    Bernstein {
        #[command(flatten)]
        common: Common,
        /// x grid in units of sqrt(v² n), comma separated.
        #[arg(long)]
        z: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Preset name (coin, eigen, swap, mds, delta_nu, arch, linear, random,
    /// uniform for density) or a model config file.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Horizons: a..b (doubling), a,b,c, or one value.
    #[arg(long)]
    pub n: Option<String>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for JSON, CSV and metadata files.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Command tolerance: slope threshold (verify), relative slope error
    /// (density), standard-error slack (bernstein).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub mode: Option<String>,
    /// Experiment config file with [experiment] and [model] sections; flags
    /// override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Errors that end a run, with their exit code.
#[derive(Debug)]
pub enum Failure {
    Lab(LabError),
    Io(std::io::Error),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure::Lab(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Lab(e) => match e {
                LabError::Argument(_) | LabError::Domain(_) | LabError::Construction(_) => EXIT_USAGE,
                LabError::Unavailable(_) | LabError::Precondition(_) | LabError::Method(_) | LabError::Size { .. } => {
                    EXIT_INCOMPATIBLE
                }
                LabError::Numeric(_) | LabError::Dimension { .. } => EXIT_NUMERIC,
            },
            Failure::Io(_) => EXIT_USAGE,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Lab(e) => write!(f, "{e}"),
            Failure::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

struct Defaults {
    model: &'static str,
    n: &'static str,
    paths: usize,
    mode: &'static str,
}

fn defaults(command: &str) -> Defaults {
    match command {
        "verify" => Defaults { model: "coin", n: "4..1024", paths: 10_000, mode: "auto" },
        "profile" => Defaults { model: "eigen", n: "32", paths: 10_000, mode: "auto" },
        // Tapered so the marginal vanishes smoothly at ±1.
        "density" => Defaults { model: "[model]\nkind=delta_nu\ntaper=2\n", n: "256..8192", paths: 200, mode: "mc" },
        "bernstein" => Defaults { model: "eigen", n: "64..4096", paths: 100_000, mode: "mc" },
        _ => Defaults { model: "coin", n: "1", paths: 0, mode: "exact" },
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, LabError> {
    v.trim().parse().map_err(|_| LabError::Argument(format!("{key}: cannot parse '{v}'")))
}

/// Merge defaults, the config file and flags into one experiment config.
pub fn build_config(
    command: &str,
    common: &Common,
    theorems: Vec<String>,
    mut options: BTreeMap<String, String>,
) -> Result<ExperimentConfig, LabError> {
    let d = defaults(command);
    let (file, file_model) = match &common.config {
        Some(p) => experiment_section(&p.to_string_lossy())?,
        None => (BTreeMap::new(), None),
    };
    let get = |k: &str| file.get(k).map(String::as_str);
    let model = match (&common.model, get("model"), file_model) {
        (Some(m), _, _) => resolve_model(m)?,
        (None, Some(m), _) => resolve_model(m)?,
        (None, None, Some(text)) => text,
        (None, None, None) => d.model.to_string(),
    };
    let p = match (common.p, get("p")) {
        (Some(p), _) => p,
        (None, Some(v)) => parse_num("p", v)?,
        _ => 4.0,
    };
    let n_grid = parse_grid(common.n.as_deref().or(get("n")).unwrap_or(d.n))?;
    let paths = match (common.paths, get("paths")) {
        (Some(v), _) => v,
        (None, Some(v)) => parse_num("paths", v)?,
        _ => d.paths,
    };
    let seed = match (common.seed, get("seed")) {
        (Some(v), _) => v,
        (None, Some(v)) => parse_num("seed", v)?,
        _ => 1,
    };
    let tol = match (common.tol, get("tol")) {
        (Some(v), _) => Some(v),
        (None, Some(v)) => Some(parse_num("tol", v)?),
        _ => None,
    };
    let mode = common.mode.clone().or_else(|| get("mode").map(str::to_string)).unwrap_or_else(|| d.mode.to_string());
    let theorems = if theorems.is_empty() {
        get("theorem").map(|t| t.split(',').map(|s| s.trim().to_string()).collect()).unwrap_or_default()
    } else {
        theorems
    };
    // Remaining [experiment] keys become options unless a flag set them.
    for (k, v) in &file {
        if !["model", "p", "n", "paths", "seed", "tol", "mode", "theorem"].contains(&k.as_str()) {
            options.entry(k.clone()).or_insert_with(|| v.clone());
        }
    }
    if paths == 0 && command != "lemmas" {
        return Err(LabError::Argument("--paths must be ≥ 1".into()));
    }
    Ok(ExperimentConfig {
        command: command.to_string(),
        model,
        p,
        n_grid,
        paths,
        seed,
        theorems,
        mode,
        tol,
        options,
    })
}

/// Run a parsed command line; returns the exit code and prints the summary.
pub fn run(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(o) => {
            print!("{}", o.summary);
            if o.pass {
                EXIT_PASS
            } else {
                EXIT_VIOLATION
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<commands::Outcome, Failure> {
    let mut opts = BTreeMap::new();
    let mut set = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            opts.insert(k.to_string(), v);
        }
    };
    let (name, common, theorems) = match &cli.command {
        Command::Verify { common, theorem } => ("verify", common, theorem.clone()),
        Command::Lemmas { common, budget, suites, inject_failure } => {
            set("budget", budget.map(|b| b.to_string()));
            set("suites", suites.clone());
            set("inject_failure", inject_failure.then(|| "true".into()));
            ("lemmas", common, vec![])
        }
        Command::Profile { common, dual } => {
            set("dual", dual.then(|| "true".into()));
            ("profile", common, vec![])
        }
        Command::Density { common, kernel, s, h, iid_baseline } => {
            set("kernel", kernel.clone());
            set("s", s.map(|v| v.to_string()));
            set("h", h.map(|v| v.to_string()));
            set("iid_baseline", iid_baseline.then(|| "true".into()));
            ("density", common, vec![])
        }
        Command::Bernstein { common, z } => {
            set("z", z.clone());
            ("bernstein", common, vec![])
        }
    };
    let cfg = build_config(name, common, theorems, opts)?;
    let out = OutDir(common.out.clone());
    match name {
        "verify" => commands::verify(&cfg, &out),
        "lemmas" => commands::lemmas(&cfg, &out),
        "profile" => commands::profile(&cfg, &out),
        "density" => commands::density(&cfg, &out),
        _ => commands::bernstein(&cfg, &out),
    }
}
