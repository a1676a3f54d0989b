//! Continuous-time Glauber dynamics with kinetic constraints.
//!
//! Every site carries a rate-one Poisson clock. The clocks are merged into a
//! single clock of rate `V` and each ring picks a uniform site; if the site's
//! constraint holds its occupation is resampled from Bernoulli(p), otherwise
//! the ring is discarded. Observables are read on a fixed time grid.

mod autocorr;
mod frozen;

pub use autocorr::{autocorrelation, AutocorrelationReport, Observable};
pub use frozen::{frozen_probe, frozen_probe_with, FrozenProbeReport, DEFAULT_INNER_REPETITIONS};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::graph::{constraint_satisfied, sample_config, Boundary, ModelSpec, SiteGraph, SpinConfig};
use crate::seeded_stream;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub t_max: f64,
    pub burn_in: f64,
    pub sample_interval: f64,
    pub replicas: usize,
    pub seed: u64,
    /// Convention for neighbours outside the graph. [`Boundary::Empty`]
    /// leaves the boundary sites unconstrained.
    pub boundary: Boundary,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            t_max: 100.0,
            burn_in: 0.0,
            sample_interval: 1.0,
            replicas: 1,
            seed: 0,
            boundary: Boundary::Empty,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max.is_finite() && self.burn_in >= 0.0 && self.burn_in < self.t_max) {
            return Err(invalid(format!(
                "need 0 <= burn_in < t_max, got burn_in = {}, t_max = {}",
                self.burn_in, self.t_max
            )));
        }
        if !(self.sample_interval > 0.0) {
            return Err(invalid("sample_interval must be positive"));
        }
        if self.replicas == 0 {
            return Err(invalid("need at least one replica"));
        }
        Ok(())
    }

    /// Number of grid points `burn_in, burn_in + Δ, ..., <= t_max`.
    pub fn num_samples(&self) -> usize {
        ((self.t_max - self.burn_in) / self.sample_interval + 1e-9).floor() as usize + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// Fresh Bernoulli(p) sample per replica.
    Equilibrium,
    Fixed(SpinConfig),
}

/// One realisation of the dynamics.
pub struct Dynamics<'a> {
    spec: ModelSpec,
    g: &'a SiteGraph,
    boundary: Boundary,
    state: SpinConfig,
    time: f64,
    clock: Exp<f64>,
    rng: ChaCha8Rng,
    events: u64,
    flips: u64,
    flip_counts: Vec<u64>,
}

impl<'a> Dynamics<'a> {
    pub fn new(spec: ModelSpec, g: &'a SiteGraph, boundary: Boundary, state: SpinConfig, rng: ChaCha8Rng) -> Self {
        assert_eq!(state.len(), g.num_vertices(), "configuration length differs from the graph");
        let v = g.num_vertices();
        Dynamics {
            spec,
            g,
            boundary,
            state,
            time: 0.0,
            clock: Exp::new(v as f64).expect("positive rate"),
            rng,
            events: 0,
            flips: 0,
            flip_counts: vec![0; v],
        }
    }

    pub fn state(&self) -> &SpinConfig {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Clock rings so far (including discarded ones).
    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn flips(&self) -> u64 {
        self.flips
    }

    pub fn flip_counts(&self) -> &[u64] {
        &self.flip_counts
    }

    /// Processes one ring of the global clock. Returns the site whose
    /// occupation changed, if any.
    pub fn step(&mut self) -> Option<usize> {
        self.time += self.clock.sample(&mut self.rng);
        self.ring()
    }

    fn ring(&mut self) -> Option<usize> {
        self.events += 1;
        let x = self.rng.random_range(0..self.g.num_vertices());
        // draw the coin before the constraint test so the random stream does
        // not depend on the configuration
        let new = self.rng.random::<f64>() < self.spec.p;
        if !constraint_satisfied(&self.spec, self.g, &self.state, x, self.boundary) {
            return None;
        }
        if self.state.get(x) == new {
            return None;
        }
        self.state.set(x, new);
        self.flips += 1;
        self.flip_counts[x] += 1;
        Some(x)
    }

    /// Runs until time `t`. The ring that would overshoot `t` is dropped,
    /// which is exact by memorylessness.
    pub fn advance_to(&mut self, t: f64) {
        loop {
            let dt = self.clock.sample(&mut self.rng);
            if self.time + dt > t {
                self.time = t;
                return;
            }
            self.time += dt;
            self.ring();
        }
    }

    /// Runs exactly `n` rings.
    pub fn run_events(&mut self, n: u64) {
        for _ in 0..n {
            self.step();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryStats {
    pub p: f64,
    pub sample_interval: f64,
    /// Sampling times (shared by all replicas).
    pub times: Vec<f64>,
    /// Root occupation per replica and grid point.
    pub root: Vec<Vec<f64>>,
    /// Fraction of occupied sites per replica and grid point.
    pub density: Vec<Vec<f64>>,
    pub events: Vec<u64>,
    pub flips: Vec<u64>,
    /// Flips per site, summed over replicas.
    pub flip_counts: Vec<u64>,
}

impl TrajectoryStats {
    pub fn series(&self, observable: Observable) -> &[Vec<f64>] {
        match observable {
            Observable::RootOccupancy => &self.root,
            Observable::Density => &self.density,
        }
    }

    /// Time average of an observable and its standard error. The error comes
    /// from the spread of replica averages, or from 20 batch means when
    /// there is a single replica.
    pub fn mean_with_stderr(&self, observable: Observable) -> (f64, f64) {
        let series = self.series(observable);
        let groups: Vec<f64> = if series.len() >= 2 {
            series.iter().map(|s| mean(s)).collect()
        } else {
            let s = &series[0];
            let batches = 20.min(s.len());
            let size = s.len() / batches;
            (0..batches).map(|b| mean(&s[b * size..(b + 1) * size])).collect()
        };
        mean_and_stderr(&groups)
    }

    /// `(m - p)^2` averaged over replicas, where `m` is the root occupation
    /// averaged over the second half of a replica's run.
    pub fn root_deviation_plateau(&self) -> (f64, f64) {
        let values: Vec<f64> = self
            .root
            .iter()
            .map(|s| {
                let m = mean(&s[s.len() / 2..]);
                (m - self.p) * (m - self.p)
            })
            .collect();
        mean_and_stderr(&values)
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean and standard error of independent values.
pub(crate) fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, (var / xs.len() as f64).sqrt())
}

/// Runs `cfg.replicas` independent trajectories in parallel. Replica `r`
/// draws from stream `r` of `cfg.seed`, including its initial condition.
pub fn simulate(spec: &ModelSpec, g: &SiteGraph, init: &InitialCondition, cfg: &SimConfig) -> Result<TrajectoryStats> {
    cfg.validate()?;
    spec.check_graph(g)?;
    if let InitialCondition::Fixed(eta) = init {
        if eta.len() != g.num_vertices() {
            return Err(invalid(format!(
                "initial configuration has {} sites, graph has {}",
                eta.len(),
                g.num_vertices()
            )));
        }
    }
    let samples = cfg.num_samples();
    let times: Vec<f64> = (0..samples).map(|i| cfg.burn_in + i as f64 * cfg.sample_interval).collect();
    let root = g.root();
    let v = g.num_vertices() as f64;
    // per replica: root series, density series, events, flips, flips per site
    type Run = (Vec<f64>, Vec<f64>, u64, u64, Vec<u64>);
    let runs: Vec<Run> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = seeded_stream(cfg.seed, r as u64);
            let start = match init {
                InitialCondition::Equilibrium => sample_config(spec.p, g, &mut rng),
                InitialCondition::Fixed(eta) => eta.clone(),
            };
            let mut dynamics = Dynamics::new(*spec, g, cfg.boundary, start, rng);
            let mut root_series = Vec::with_capacity(samples);
            let mut density_series = Vec::with_capacity(samples);
            for &t in &times {
                dynamics.advance_to(t);
                root_series.push(f64::from(u8::from(dynamics.state().get(root))));
                density_series.push(dynamics.state().count_occupied() as f64 / v);
            }
            (
                root_series,
                density_series,
                dynamics.events(),
                dynamics.flips(),
                dynamics.flip_counts().to_vec(),
            )
        })
        .collect();
    let mut stats = TrajectoryStats {
        p: spec.p,
        sample_interval: cfg.sample_interval,
        times,
        root: Vec::with_capacity(cfg.replicas),
        density: Vec::with_capacity(cfg.replicas),
        events: Vec::with_capacity(cfg.replicas),
        flips: Vec::with_capacity(cfg.replicas),
        flip_counts: vec![0; g.num_vertices()],
    };
    for (root_series, density_series, events, flips, counts) in runs {
        stats.root.push(root_series);
        stats.density.push(density_series);
        stats.events.push(events);
        stats.flips.push(flips);
        for (acc, c) in stats.flip_counts.iter_mut().zip(counts) {
            *acc += c;
        }
    }
    Ok(stats)
}
