//! Subcommands. Each one reads and validates its parameters in `plan`,
//! which returns a job that does the work; sweeps plan every grid point
//! before running any of them.

use kcsm::northeast::{estimate_p_ell, ne_bootstrap};
use kcsm::sim::{autocorrelation, frozen_probe_with, simulate, InitialCondition, Observable, SimConfig};
use kcsm::spectral::{
    dirichlet_ratio, exact_gap_with, predicted_decay_rate, DirichletMode, EventA, LanczosOptions,
    DEFAULT_SITE_CAP,
};
use kcsm::threshold::{
    critical_density, critical_density_closed_form, ell_zero, eval_g_prime, iterate_recursion, largest_fixed_point,
};
use kcsm::{
    build_graph_with_cap, sample_config, seeded_stream, Boundary, Family, GraphKind, ModelSpec, SiteGraph, SpinConfig,
};

use crate::output::Row;
use crate::params::Reader;
use crate::CliError;

pub type Job = Box<dyn FnOnce() -> Result<Vec<Row>, CliError> + Send>;

/// Largest graph the CLI builds unless `--vertex-cap` says otherwise.
const DEFAULT_VERTEX_CAP: u128 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sub {
    Threshold,
    Recursion,
    FixedPoint,
    EllZero,
    Gap,
    Vbound,
    Rate,
    Simulate,
    FrozenProbe,
    NeBootstrap,
    NePell,
}

impl Sub {
    pub fn name(self) -> &'static str {
        match self {
            Sub::Threshold => "threshold",
            Sub::Recursion => "recursion",
            Sub::FixedPoint => "fixed-point",
            Sub::EllZero => "ell-zero",
            Sub::Gap => "gap",
            Sub::Vbound => "vbound",
            Sub::Rate => "rate",
            Sub::Simulate => "simulate",
            Sub::FrozenProbe => "frozen-probe",
            Sub::NeBootstrap => "ne-bootstrap",
            Sub::NePell => "ne-pell",
        }
    }

    pub const ALL: [Sub; 11] = [
        Sub::Threshold,
        Sub::Recursion,
        Sub::FixedPoint,
        Sub::EllZero,
        Sub::Gap,
        Sub::Vbound,
        Sub::Rate,
        Sub::Simulate,
        Sub::FrozenProbe,
        Sub::NeBootstrap,
        Sub::NePell,
    ];
}

impl std::str::FromStr for Sub {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Sub::ALL
            .into_iter()
            .find(|sub| sub.name() == s)
            .ok_or_else(|| format!("unknown subcommand '{s}'"))
    }
}

pub fn plan(sub: Sub, r: &mut Reader) -> Result<Job, CliError> {
    match sub {
        Sub::Threshold => threshold(r),
        Sub::Recursion => recursion(r),
        Sub::FixedPoint => fixed_point(r),
        Sub::EllZero => ell_zero_cmd(r),
        Sub::Gap => gap(r),
        Sub::Vbound => vbound(r),
        Sub::Rate => rate(r),
        Sub::Simulate => simulate_cmd(r),
        Sub::FrozenProbe => frozen(r),
        Sub::NeBootstrap => ne_bootstrap_cmd(r),
        Sub::NePell => ne_pell(r),
    }
}

fn kj(r: &mut Reader) -> Result<(usize, usize), CliError> {
    let k = r.or("k", 2usize)?;
    let j = r.or("j", 2usize.min(k))?;
    // cheap precondition check shared by every recursion operation
    ModelSpec::ofa(k, j, 0.5)?;
    Ok((k, j))
}

fn unit(r: &mut Reader, key: &str) -> Result<f64, CliError> {
    let p: f64 = r.required(key)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(kcsm::Error::InvalidParameter(format!("{key} = {p} outside [0, 1]")).into());
    }
    Ok(p)
}

fn exact(row: Row, seed: u64) -> Row {
    row.with("estimator", "exact").with("samples", None::<usize>).with("seed", seed)
}

fn monte_carlo(row: Row, samples: usize, seed: u64) -> Row {
    row.with("estimator", "monte-carlo").with("samples", samples).with("seed", seed)
}

fn threshold(r: &mut Reader) -> Result<Job, CliError> {
    let (k, j) = kj(r)?;
    let tol = r.or("tol", 1e-12)?;
    let seed = r.or("seed", 0u64)?;
    if !(tol > 0.0) {
        return Err(kcsm::Error::InvalidParameter("tol must be positive".into()).into());
    }
    Ok(Box::new(move || {
        let c = critical_density(k, j, tol)?;
        let closed = critical_density_closed_form(k, j)?;
        let row = Row::new()
            .with("k", k)
            .with("j", j)
            .with("p_c", c.p_c)
            .with("p_c_closed_form", closed)
            .with("bracket_width", c.bracket_width)
            .with("evaluations", c.evaluations)
            .with("p_inf_at_critical", c.p_inf_at_critical);
        Ok(vec![exact(row, seed)])
    }))
}

fn recursion(r: &mut Reader) -> Result<Job, CliError> {
    let (k, j) = kj(r)?;
    let p = unit(r, "p")?;
    let n: usize = r.required("n")?;
    let seed = r.or("seed", 0u64)?;
    Ok(Box::new(move || {
        let values = iterate_recursion(k, j, p, n)?;
        Ok(values
            .into_iter()
            .enumerate()
            .map(|(m, x)| {
                let row = Row::new().with("k", k).with("j", j).with("p", p).with("m", m).with("p_bar", x);
                exact(row, seed)
            })
            .collect())
    }))
}

fn fixed_point(r: &mut Reader) -> Result<Job, CliError> {
    let (k, j) = kj(r)?;
    let p = unit(r, "p")?;
    let tol = r.or("tol", 1e-14)?;
    let seed = r.or("seed", 0u64)?;
    Ok(Box::new(move || {
        let f = largest_fixed_point(k, j, p, tol)?;
        let row = Row::new()
            .with("k", k)
            .with("j", j)
            .with("p", p)
            .with("p_inf", f.p_inf)
            .with("derivative_at_fp", f.derivative_at_fp)
            .with("stable", f.stable)
            .with("iterations", f.iterations);
        Ok(vec![exact(row, seed)])
    }))
}

fn ell_zero_cmd(r: &mut Reader) -> Result<Job, CliError> {
    let (k, j) = kj(r)?;
    let p = unit(r, "p")?;
    let seed = r.or("seed", 0u64)?;
    let p_c = critical_density_closed_form(k, j)?;
    if p >= p_c {
        return Err(kcsm::Error::InvalidParameter(format!(
            "ell-zero needs p below the critical density {p_c:.12}; got p = {p}"
        ))
        .into());
    }
    Ok(Box::new(move || {
        let ell = ell_zero(k, j, p)?;
        let row = Row::new().with("k", k).with("j", j).with("p", p).with("p_c", p_c).with("ell_zero", ell);
        Ok(vec![exact(row, seed)])
    }))
}

fn rate(r: &mut Reader) -> Result<Job, CliError> {
    let (k, j) = kj(r)?;
    let p = unit(r, "p")?;
    let seed = r.or("seed", 0u64)?;
    let p_c = critical_density_closed_form(k, j)?;
    if p <= p_c || p >= 1.0 {
        return Err(kcsm::Error::InvalidParameter(format!(
            "rate needs the critical density {p_c:.12} < p < 1; got p = {p}"
        ))
        .into());
    }
    Ok(Box::new(move || {
        let decay = predicted_decay_rate(k, j, p)?;
        let fp = largest_fixed_point(k, j, p, 1e-14)?;
        let row = Row::new()
            .with("k", k)
            .with("j", j)
            .with("p", p)
            .with("p_c", p_c)
            .with("p_inf", fp.p_inf)
            .with("g_prime_at_p_inf", eval_g_prime(k, j, p, fp.p_inf)?)
            .with("decay_rate", decay);
        Ok(vec![exact(row, seed)])
    }))
}

struct Model {
    spec: ModelSpec,
    graph: SiteGraph,
    graph_name: &'static str,
    size: usize,
}

impl Model {
    fn columns(&self, row: Row) -> Row {
        let mut row = row.with("family", self.spec.family.name());
        if self.spec.family != Family::Ne {
            row = row.with("k", self.spec.k).with("j", self.spec.j);
        }
        row.with("p", self.spec.p)
            .with("graph", self.graph_name)
            .with("size", self.size)
            .with("vertices", self.graph.num_vertices())
    }
}

fn model(r: &mut Reader) -> Result<Model, CliError> {
    let family: Family = r.or("family", "ofa".to_string())?.parse()?;
    let p = unit(r, "p")?;
    let spec = if family == Family::Ne {
        ModelSpec::north_east(p)?
    } else {
        let (k, j) = kj(r)?;
        ModelSpec::new(family, k, j, p)?
    };
    let default_graph = if family == Family::Ne { "triangle" } else { "rooted" };
    let graph_name: String = r.or("graph", default_graph.to_string())?;
    let (kind, graph_name, size) = match graph_name.as_str() {
        "rooted" | "rooted-tree" => {
            let depth = r.required("depth")?;
            (GraphKind::RootedTree { depth }, "rooted", depth)
        }
        "unrooted" | "unrooted-tree" => {
            let depth = r.required("depth")?;
            (GraphKind::UnrootedTree { depth }, "unrooted", depth)
        }
        "triangle" => {
            let side = r.required("side")?;
            (GraphKind::Triangle { side }, "triangle", side)
        }
        other => {
            return Err(kcsm::Error::InvalidParameter(format!(
                "unknown graph '{other}' (expected rooted, unrooted or triangle)"
            ))
            .into())
        }
    };
    let cap = r.or("vertex-cap", DEFAULT_VERTEX_CAP)?;
    let graph = build_graph_with_cap(kind, spec.k, cap)?;
    spec.check_graph(&graph)?;
    Ok(Model {
        spec,
        graph,
        graph_name,
        size,
    })
}

fn site_cap(r: &mut Reader, m: &Model) -> Result<usize, CliError> {
    let cap = r.or("site-cap", DEFAULT_SITE_CAP)?;
    let v = m.graph.num_vertices();
    if v > cap {
        return Err(kcsm::Error::ResourceCap {
            what: "sites for an exact 2^V computation",
            requested: v as u128,
            cap: cap as u128,
        }
        .into());
    }
    Ok(cap)
}

fn gap(r: &mut Reader) -> Result<Job, CliError> {
    let m = model(r)?;
    let boundary: Boundary = r.or("boundary", "empty".to_string())?.parse()?;
    let cap = site_cap(r, &m)?;
    let defaults = LanczosOptions::default();
    let tol = r.or("tol", defaults.tol)?;
    let max_restarts = r.or("max-restarts", defaults.max_restarts)?;
    let seed = r.or("seed", 0u64)?;
    if !(tol > 0.0) || max_restarts == 0 {
        return Err(kcsm::Error::InvalidParameter("gap needs tol > 0 and max-restarts >= 1".into()).into());
    }
    let opts = LanczosOptions {
        tol,
        max_restarts,
        ..defaults
    };
    Ok(Box::new(move || {
        let s = exact_gap_with(&m.spec, &m.graph, boundary, cap, &opts)?;
        let row = m
            .columns(Row::new())
            .with("boundary", boundary.name())
            .with("num_states", s.num_states)
            .with("gap", s.gap)
            .with("ergodic", s.ergodic)
            .with("solver", s.solver.name())
            .with("residual", s.residual);
        Ok(vec![exact(row, seed)])
    }))
}

fn vbound(r: &mut Reader) -> Result<Job, CliError> {
    let m = model(r)?;
    let v = m.graph.num_vertices();
    let default_estimator = if v <= 16 { "exact" } else { "monte-carlo" };
    let estimator: String = r.or("estimator", default_estimator.to_string())?;
    let seed = r.or("seed", 0u64)?;
    let mode = match estimator.as_str() {
        "exact" => {
            site_cap(r, &m)?;
            DirichletMode::Exact
        }
        "monte-carlo" | "mc" => {
            let samples = r.or("samples", 100_000usize)?;
            DirichletMode::MonteCarlo { samples, seed }
        }
        other => {
            return Err(kcsm::Error::InvalidParameter(format!(
                "unknown estimator '{other}' (expected exact or monte-carlo)"
            ))
            .into())
        }
    };
    Ok(Box::new(move || {
        let spec = m.spec;
        let f = EventA::at_depth(spec, &m.graph);
        let d = dirichlet_ratio(&spec, &m.graph, &f, mode)?;
        let predicted = if spec.family == Family::Ofa {
            predicted_decay_rate(spec.k, spec.j, spec.p).ok()
        } else {
            None
        };
        let row = m
            .columns(Row::new())
            .with("mean", d.mean)
            .with("variance", d.variance)
            .with("variance_stderr", d.variance_stderr)
            .with("dirichlet", d.dirichlet)
            .with("dirichlet_stderr", d.dirichlet_stderr)
            .with("ratio", d.ratio)
            .with("ratio_stderr", d.ratio_stderr)
            .with("predicted_decay_rate", predicted);
        Ok(vec![match mode {
            DirichletMode::Exact => exact(row, seed),
            DirichletMode::MonteCarlo { samples, .. } => monte_carlo(row, samples, seed),
        }])
    }))
}

fn sim_config(r: &mut Reader) -> Result<SimConfig, CliError> {
    let d = SimConfig::default();
    let cfg = SimConfig {
        t_max: r.or("t-max", d.t_max)?,
        burn_in: r.or("burn-in", d.burn_in)?,
        sample_interval: r.or("dt", d.sample_interval)?,
        replicas: r.or("replicas", d.replicas)?,
        seed: r.or("seed", d.seed)?,
        boundary: r.or("boundary", "empty".to_string())?.parse()?,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn simulate_cmd(r: &mut Reader) -> Result<Job, CliError> {
    let m = model(r)?;
    let cfg = sim_config(r)?;
    let init = match r.or("init", "equilibrium".to_string())?.as_str() {
        "equilibrium" => InitialCondition::Equilibrium,
        "full" => InitialCondition::Fixed(SpinConfig::ones(m.graph.num_vertices())),
        "empty" => InitialCondition::Fixed(SpinConfig::zeros(m.graph.num_vertices())),
        other => {
            return Err(kcsm::Error::InvalidParameter(format!(
                "unknown init '{other}' (expected equilibrium, full or empty)"
            ))
            .into())
        }
    };
    let max_lag: Option<f64> = r.optional("max-lag")?;
    let observable: Observable = r.or("observable", "root".to_string())?.parse()?;
    if let Some(lag) = max_lag {
        let span = cfg.t_max - cfg.burn_in;
        if !(lag > 0.0) || span < 20.0 * lag {
            return Err(kcsm::Error::InvalidParameter(format!(
                "max-lag {lag} needs a sampled span of at least 20 x max-lag (have {span})"
            ))
            .into());
        }
    }
    Ok(Box::new(move || {
        let stats = simulate(&m.spec, &m.graph, &init, &cfg)?;
        let (density, density_se) = stats.mean_with_stderr(Observable::Density);
        let (root, root_se) = stats.mean_with_stderr(Observable::RootOccupancy);
        let ac = max_lag.map(|lag| autocorrelation(&stats, observable, lag)).transpose()?;
        let row = m
            .columns(Row::new())
            .with("boundary", cfg.boundary.name())
            .with("t_max", cfg.t_max)
            .with("burn_in", cfg.burn_in)
            .with("dt", cfg.sample_interval)
            .with("replicas", cfg.replicas)
            .with("density_mean", density)
            .with("density_stderr", density_se)
            .with("root_mean", root)
            .with("root_stderr", root_se)
            .with("events", stats.events.iter().sum::<u64>())
            .with("flips", stats.flips.iter().sum::<u64>())
            .with("observable", max_lag.map(|_| observable.name()))
            .with("decay_rate", ac.as_ref().map(|a| a.decay_rate))
            .with("decay_rate_stderr", ac.as_ref().map(|a| a.decay_rate_stderr))
            .with("tau_int", ac.as_ref().map(|a| a.tau_int))
            .with("tau_int_stderr", ac.as_ref().map(|a| a.tau_int_stderr))
            .with("fit_last_lag_time", ac.as_ref().map(|a| a.lag_times[a.fit_last_lag]));
        Ok(vec![monte_carlo(row, cfg.replicas, cfg.seed)])
    }))
}

fn frozen(r: &mut Reader) -> Result<Job, CliError> {
    let m = model(r)?;
    let cfg = sim_config(r)?;
    let trials = r.or("trials", 200usize)?;
    let inner = r.or("inner", kcsm::sim::DEFAULT_INNER_REPETITIONS)?;
    if trials < 2 || inner < 2 {
        return Err(kcsm::Error::InvalidParameter("frozen-probe needs trials >= 2 and inner >= 2".into()).into());
    }
    Ok(Box::new(move || {
        let f = frozen_probe_with(&m.spec, &m.graph, &cfg, trials, inner)?;
        let row = m
            .columns(Row::new())
            .with("boundary", cfg.boundary.name())
            .with("time", f.time)
            .with("inner", f.inner)
            .with("plateau", f.plateau)
            .with("stderr", f.stderr)
            .with("blocked_root_fraction", f.blocked_root_fraction);
        Ok(vec![monte_carlo(row, trials, cfg.seed)])
    }))
}

fn ne_bootstrap_cmd(r: &mut Reader) -> Result<Job, CliError> {
    let side: usize = r.required("side")?;
    let p = r.or("p", 1.0)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(kcsm::Error::InvalidParameter(format!("p = {p} outside [0, 1]")).into());
    }
    let boundary: Boundary = r.or("boundary", "empty".to_string())?.parse()?;
    let seed = r.or("seed", 0u64)?;
    let cap = r.or("vertex-cap", DEFAULT_VERTEX_CAP)?;
    let g = build_graph_with_cap(GraphKind::Triangle { side }, 0, cap)?;
    Ok(Box::new(move || {
        let mut rng = seeded_stream(seed, 0);
        let eta = sample_config(p, &g, &mut rng);
        let b = ne_bootstrap(&g, &eta, boundary)?;
        let root_emptied = b.root_occupied_trace.iter().position(|&occ| !occ);
        let row = Row::new()
            .with("side", side)
            .with("p", p)
            .with("boundary", boundary.name())
            .with("vertices", g.num_vertices())
            .with("initial_occupied", eta.count_occupied())
            .with("iterations", b.iterations_to_fixpoint)
            .with("final_occupied", b.final_config.count_occupied())
            .with("root_emptied_at_step", root_emptied);
        // a deterministic start needs no sampling
        Ok(vec![if p == 0.0 || p == 1.0 {
            exact(row, seed)
        } else {
            monte_carlo(row, 1, seed)
        }])
    }))
}

fn ne_pell(r: &mut Reader) -> Result<Job, CliError> {
    let p = unit(r, "p")?;
    let ell: usize = r.required("ell")?;
    let side = r.or("side", (2 * ell).max(1))?;
    let samples = r.or("samples", 10_000usize)?;
    let seed = r.or("seed", 0u64)?;
    if 2 * ell > side {
        return Err(kcsm::Error::InvalidParameter(format!(
            "window too small: ell = {ell} exceeds half the side {side}"
        ))
        .into());
    }
    if ell > 0 && samples < 2 {
        return Err(kcsm::Error::InvalidParameter("ne-pell needs at least 2 samples".into()).into());
    }
    Ok(Box::new(move || {
        let n = estimate_p_ell(p, ell, side, samples, seed)?;
        let row = Row::new()
            .with("p", n.p)
            .with("ell", n.ell)
            .with("side", n.lattice_side)
            .with("p_ell", n.p_ell)
            .with("p_ell_stderr", n.stderr)
            .with("delta", n.delta)
            .with("condition_value", n.condition_value)
            .with("condition_stderr", n.condition_stderr)
            .with("passes", n.passes);
        Ok(vec![if ell == 0 {
            exact(row, seed)
        } else {
            monte_carlo(row, samples, seed)
        }])
    }))
}

