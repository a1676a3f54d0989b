//! Late-time memory of the root: `E[(E[η_r(t) | η(0)] - p)^2]` over
//! equilibrium initial conditions.

use rayon::prelude::*;

use crate::bootstrap::event_a_with_boundary;
use crate::error::{invalid, Result};
use crate::graph::{sample_config, Boundary, ModelSpec, SiteGraph};
use crate::seeded_stream;

use super::{mean_and_stderr, Dynamics, SimConfig};

/// Default number of runs per initial condition.
pub const DEFAULT_INNER_REPETITIONS: usize = 32;

/// Offset separating the dynamics streams from the initial-condition streams.
const INNER_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, PartialEq)]
pub struct FrozenProbeReport {
    /// Estimate of `E[(E[η_r(t) | η(0)] - p)^2]` at `t = cfg.t_max`.
    pub plateau: f64,
    pub stderr: f64,
    pub trials: usize,
    pub inner: usize,
    pub time: f64,
    /// Fraction of initial conditions whose root never empties under the
    /// filled-boundary bootstrap map, i.e. belongs to a blocked cluster.
    pub blocked_root_fraction: f64,
}

pub fn frozen_probe(spec: &ModelSpec, g: &SiteGraph, cfg: &SimConfig, trials: usize) -> Result<FrozenProbeReport> {
    frozen_probe_with(spec, g, cfg, trials, DEFAULT_INNER_REPETITIONS)
}

/// For each of `trials` initial conditions drawn from Bernoulli(p), runs
/// `inner` independent trajectories to `cfg.t_max` and forms the unbiased
/// estimate `((Σ Y)^2 - Σ Y^2) / (R (R - 1))` of `(E[Y | η(0)])^2`, with
/// `Y = η_r(t) - p`. The plateau is the average over initial conditions.
pub fn frozen_probe_with(
    spec: &ModelSpec,
    g: &SiteGraph,
    cfg: &SimConfig,
    trials: usize,
    inner: usize,
) -> Result<FrozenProbeReport> {
    cfg.validate()?;
    spec.check_graph(g)?;
    if trials < 2 {
        return Err(invalid("frozen probe needs at least 2 trials"));
    }
    if inner < 2 {
        return Err(invalid("frozen probe needs at least 2 inner repetitions"));
    }
    let root = g.root();
    let depth = g.max_depth();
    let per_trial: Vec<(f64, bool)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeded_stream(cfg.seed, i as u64);
            let start = sample_config(spec.p, g, &mut rng);
            let blocked = event_a_with_boundary(spec, g, &start, depth + 1, Boundary::Filled);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for r in 0..inner {
                let stream = (i * inner + r) as u64;
                let dyn_rng = seeded_stream(cfg.seed ^ INNER_SEED_SALT, stream);
                let mut d = Dynamics::new(*spec, g, cfg.boundary, start.clone(), dyn_rng);
                d.advance_to(cfg.t_max);
                let y = f64::from(u8::from(d.state().get(root))) - spec.p;
                sum += y;
                sum_sq += y * y;
            }
            let r = inner as f64;
            ((sum * sum - sum_sq) / (r * (r - 1.0)), blocked)
        })
        .collect();
    let values: Vec<f64> = per_trial.iter().map(|v| v.0).collect();
    let (plateau, stderr) = mean_and_stderr(&values);
    let blocked = per_trial.iter().filter(|v| v.1).count() as f64 / trials as f64;
    Ok(FrozenProbeReport {
        plateau,
        stderr,
        trials,
        inner,
        time: cfg.t_max,
        blocked_root_fraction: blocked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, GraphKind};

    #[test]
    fn density_one_is_degenerate_zero() {
        let g = build_graph(GraphKind::RootedTree { depth: 2 }, 2).unwrap();
        let spec = ModelSpec::ofa(2, 2, 1.0).unwrap();
        let cfg = SimConfig {
            t_max: 5.0,
            ..SimConfig::default()
        };
        let r = frozen_probe_with(&spec, &g, &cfg, 10, 4).unwrap();
        assert_eq!(r.plateau, 0.0);
        assert_eq!(r.stderr, 0.0);
        assert_eq!(r.blocked_root_fraction, 1.0);
    }

    #[test]
    fn rejects_too_few_repetitions() {
        let g = build_graph(GraphKind::RootedTree { depth: 1 }, 2).unwrap();
        let spec = ModelSpec::ofa(2, 2, 0.5).unwrap();
        assert!(frozen_probe_with(&spec, &g, &SimConfig::default(), 10, 1).is_err());
        assert!(frozen_probe_with(&spec, &g, &SimConfig::default(), 1, 8).is_err());
    }
}
