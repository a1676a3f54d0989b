//! `kcsm`: experiment runner for kinetically constrained spin models.
//!
//! Every subcommand writes `results.csv` (or `results.json`) and
//! `manifest.json` into the output directory. Exit codes: 0 success,
//! 1 I/O failure, 2 invalid parameters, 3 solver non-convergence,
//! 4 resource cap exceeded.

mod commands;
mod output;
mod params;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use commands::{plan, Sub};
use output::{write_results, Format, Row, Value};
use params::{expand_grid, load_config, normalize_key, ParamMap, Reader};

/// Environment variable holding the default worker count.
const THREADS_ENV: &str = "KCSM_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] kcsm::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Model(e) => match e {
                kcsm::Error::NonConvergence { .. } => 3,
                kcsm::Error::ResourceCap { .. } => 4,
                _ => 2,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kcsm", version, about = "Thresholds, spectral gaps and dynamics of kinetically constrained spin models")]
struct Cli {
    /// Flat `key = value` config file (or a previous manifest.json); flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Result format: csv or json.
    #[arg(long, global = true)]
    format: Option<String>,
    /// Worker threads (default: $KCSM_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Parameters shared by the subcommands. Each subcommand reads the ones it
/// needs and ignores the rest.
#[derive(Debug, Args, Default, Clone)]
struct Params {
    /// Constraint family: ofa, fa or ne.
    #[arg(long)]
    family: Option<String>,
    /// Branching number of the tree.
    #[arg(long)]
    k: Option<String>,
    /// Facilitating parameter (empty children/neighbours needed).
    #[arg(long)]
    j: Option<String>,
    /// Density of occupied sites.
    #[arg(long)]
    p: Option<String>,
    /// Graph: rooted, unrooted or triangle.
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    depth: Option<String>,
    /// Triangle side (ne-pell: window side).
    #[arg(long)]
    side: Option<String>,
    /// Neighbours outside the graph: empty or filled.
    #[arg(long)]
    boundary: Option<String>,
    /// Number of recursion steps.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    /// Bootstrap steps for ne-pell.
    #[arg(long)]
    ell: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Estimator for vbound: exact or monte-carlo.
    #[arg(long)]
    estimator: Option<String>,
    #[arg(long = "t-max")]
    t_max: Option<String>,
    #[arg(long = "burn-in")]
    burn_in: Option<String>,
    /// Sampling interval of the simulation.
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    replicas: Option<String>,
    /// Initial condition: equilibrium, full or empty.
    #[arg(long)]
    init: Option<String>,
    /// Largest lag time of the autocorrelation fit.
    #[arg(long = "max-lag")]
    max_lag: Option<String>,
    /// Observable for the autocorrelation: root or density.
    #[arg(long)]
    observable: Option<String>,
    /// Initial conditions for frozen-probe.
    #[arg(long)]
    trials: Option<String>,
    /// Trajectories per initial condition for frozen-probe.
    #[arg(long)]
    inner: Option<String>,
    /// Restart limit of the iterative eigensolver.
    #[arg(long = "max-restarts")]
    max_restarts: Option<String>,
    /// Largest number of sites for exact 2^V computations.
    #[arg(long = "site-cap")]
    site_cap: Option<String>,
    /// Largest number of graph vertices.
    #[arg(long = "vertex-cap")]
    vertex_cap: Option<String>,
}

impl Params {
    fn to_map(&self) -> ParamMap {
        let pairs = [
            ("family", &self.family),
            ("k", &self.k),
            ("j", &self.j),
            ("p", &self.p),
            ("graph", &self.graph),
            ("depth", &self.depth),
            ("side", &self.side),
            ("boundary", &self.boundary),
            ("n", &self.n),
            ("tol", &self.tol),
            ("ell", &self.ell),
            ("samples", &self.samples),
            ("seed", &self.seed),
            ("estimator", &self.estimator),
            ("t-max", &self.t_max),
            ("burn-in", &self.burn_in),
            ("dt", &self.dt),
            ("replicas", &self.replicas),
            ("init", &self.init),
            ("max-lag", &self.max_lag),
            ("observable", &self.observable),
            ("trials", &self.trials),
            ("inner", &self.inner),
            ("max-restarts", &self.max_restarts),
            ("site-cap", &self.site_cap),
            ("vertex-cap", &self.vertex_cap),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Critical density p̃ of the threshold recursion, with p_inf at p̃.
    Threshold(Params),
    /// Iterates of the recursion p̄_m = g_p(p̄_{m-1}).
    Recursion(Params),
    /// Largest fixed point p_inf of g_p and its stability.
    FixedPoint(Params),
    /// Smallest ℓ with (ℓ+1) p̄_ℓ / p <= 1/4 (below p̃ only).
    EllZero(Params),
    /// Exact spectral gap of the generator on a finite graph.
    Gap(Params),
    /// Variational upper bound D(f)/Var(f) for the root event.
    Vbound(Params),
    /// Predicted per-level decay rate -ln g_p'(p_inf) (above p̃ only).
    Rate(Params),
    /// Glauber dynamics: densities and autocorrelation fit.
    Simulate(Params),
    /// Late-time memory of the root.
    FrozenProbe(Params),
    /// North-East bootstrap to its fixed point on a triangle.
    NeBootstrap(Params),
    /// Monte Carlo p_ℓ and the (ℓ+1)^2 δ condition for North-East.
    NePell(Params),
    /// Runs a subcommand over a grid: any parameter may be `a..b`,
    /// `a..b:step` or a comma list.
    Sweep {
        /// Subcommand to run at every grid point.
        #[arg(long)]
        sub: String,
        #[command(flatten)]
        params: Params,
    },
}

impl Command {
    fn split(&self) -> (&'static str, Option<Sub>, &Params) {
        match self {
            Command::Threshold(p) => ("threshold", Some(Sub::Threshold), p),
            Command::Recursion(p) => ("recursion", Some(Sub::Recursion), p),
            Command::FixedPoint(p) => ("fixed-point", Some(Sub::FixedPoint), p),
            Command::EllZero(p) => ("ell-zero", Some(Sub::EllZero), p),
            Command::Gap(p) => ("gap", Some(Sub::Gap), p),
            Command::Vbound(p) => ("vbound", Some(Sub::Vbound), p),
            Command::Rate(p) => ("rate", Some(Sub::Rate), p),
            Command::Simulate(p) => ("simulate", Some(Sub::Simulate), p),
            Command::FrozenProbe(p) => ("frozen-probe", Some(Sub::FrozenProbe), p),
            Command::NeBootstrap(p) => ("ne-bootstrap", Some(Sub::NeBootstrap), p),
            Command::NePell(p) => ("ne-pell", Some(Sub::NePell), p),
            Command::Sweep { params, .. } => ("sweep", None, params),
        }
    }
}

/// Keys of the config file that configure the run rather than a subcommand.
const RUN_KEYS: [&str; 4] = ["out", "format", "threads", "sub"];

struct Outcome {
    rows: Vec<Row>,
    config: serde_json::Value,
    seed: Option<String>,
}

fn run_single(sub: Sub, values: &ParamMap) -> Result<Outcome, CliError> {
    let mut reader = Reader::new(values);
    let job = plan(sub, &mut reader)?;
    let resolved = reader.into_resolved();
    let rows = job()?;
    Ok(Outcome {
        rows,
        seed: resolved.get("seed").cloned(),
        config: serde_json::to_value(&resolved).expect("string map"),
    })
}

fn run_sweep(sub: Sub, values: &ParamMap) -> Result<Outcome, CliError> {
    let grid = expand_grid(values)?;
    // validate every point before starting any work
    let mut jobs = Vec::with_capacity(grid.len());
    let mut resolved = Vec::with_capacity(grid.len());
    for point in &grid {
        let mut reader = Reader::new(point);
        jobs.push(plan(sub, &mut reader)?);
        resolved.push(reader.into_resolved());
    }
    let results: Vec<Result<Vec<Row>, CliError>> = jobs.into_par_iter().map(|job| job()).collect();
    let mut rows = Vec::new();
    for (index, result) in results.into_iter().enumerate() {
        for mut row in result? {
            row.prepend("grid_index", index);
            rows.push(row);
        }
    }
    let seeds: Vec<&String> = resolved.iter().filter_map(|r| r.get("seed")).collect();
    let seed = seeds.first().filter(|s| seeds.iter().all(|t| t == *s)).map(|s| (*s).clone());
    Ok(Outcome {
        rows,
        seed,
        config: serde_json::json!({
            "sub": sub.name(),
            "grid": values,
            "points": resolved,
        }),
    })
}

fn scalar_json(x: &Value) -> serde_json::Value {
    match x {
        Value::Int(v) => serde_json::json!(*v as i64),
        Value::Text(s) => serde_json::json!(s),
        _ => serde_json::Value::Null,
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let (name, sub, flags) = cli.command.split();
    let mut values = match &cli.config {
        Some(path) => load_config(path)?,
        None => ParamMap::new(),
    };
    let run_opts: ParamMap = RUN_KEYS
        .iter()
        .filter_map(|k| values.remove(*k).map(|v| (k.to_string(), v)))
        .collect();
    for (k, v) in flags.to_map() {
        values.insert(normalize_key(&k), v);
    }

    let format: Format = match cli.format.clone().or_else(|| run_opts.get("format").cloned()) {
        Some(f) => f.parse().map_err(CliError::Usage)?,
        None => Format::Csv,
    };
    let out = cli
        .out
        .clone()
        .or_else(|| run_opts.get("out").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("kcsm-out"));
    let threads = match cli.threads {
        Some(t) => Some(t),
        None => match run_opts.get("threads").cloned().or_else(|| std::env::var(THREADS_ENV).ok()) {
            Some(t) => Some(
                t.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Usage(format!("threads: expected a positive integer, got '{t}'")))?,
            ),
            None => None,
        },
    };
    if threads == Some(0) {
        return Err(CliError::Usage("threads must be at least 1".into()));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| CliError::Usage(e.to_string()))?;

    let outcome = pool.install(|| match (&cli.command, sub) {
        (Command::Sweep { sub: target, .. }, _) => {
            let target: Sub = target.parse().map_err(CliError::Usage)?;
            run_sweep(target, &values)
        }
        (_, Some(sub)) => run_single(sub, &values),
        _ => unreachable!("every non-sweep command names a subcommand"),
    })?;

    let results_path = write_results(&out, format, &outcome.rows)?;
    let provenance: Vec<serde_json::Value> = outcome
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            serde_json::json!({
                "row": i,
                "estimator": row.get("estimator").map_or(serde_json::Value::Null, scalar_json),
                "samples": row.get("samples").map_or(serde_json::Value::Null, scalar_json),
                "seed": row.get("seed").map_or(serde_json::Value::Null, scalar_json),
            })
        })
        .collect();
    let manifest = serde_json::json!({
        "tool": "kcsm",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": name,
        "config": outcome.config,
        "seed": outcome.seed,
        "format": match format { Format::Csv => "csv", Format::Json => "json" },
        "threads": pool.current_num_threads(),
        "results": results_path.file_name().and_then(|f| f.to_str()),
        "rows": outcome.rows.len(),
        "started_unix_seconds": started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        "wall_clock_seconds": clock.elapsed().as_secs_f64(),
        "provenance": provenance,
    });
    let mut text = serde_json::to_string_pretty(&manifest).expect("serialisable manifest");
    text.push('\n');
    std::fs::write(out.join("manifest.json"), text)?;
    println!("wrote {} row(s) to {}", outcome.rows.len(), results_path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kcsm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
