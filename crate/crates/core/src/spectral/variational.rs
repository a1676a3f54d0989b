//! Dirichlet form and variance of boolean test functions, and the predicted
//! per-level decay rate of the variational upper bound above the threshold.

use rayon::prelude::*;

use crate::bootstrap::{event_a, pivotal_sites};
use crate::error::{invalid, Error, Result};
use crate::graph::{constraint_satisfied, sample_config, Boundary, ModelSpec, SiteGraph, SpinConfig};
use crate::seeded_stream;
use crate::threshold::{critical_density, eval_g_prime, largest_fixed_point};

use super::generator::DEFAULT_SITE_CAP;

/// Samples per random stream in Monte Carlo mode.
const MC_BLOCK: usize = 4096;

/// A boolean function of configurations.
pub trait TestFunction: Sync {
    fn eval(&self, g: &SiteGraph, eta: &SpinConfig) -> bool;

    /// Sites `x` where `f(η with x = 1) != f(η with x = 0)`.
    fn sensitive_sites(&self, g: &SiteGraph, eta: &SpinConfig) -> Vec<usize> {
        (0..g.num_vertices())
            .filter(|&x| self.eval(g, &eta.with(x, true)) != self.eval(g, &eta.with(x, false)))
            .collect()
    }
}

impl<F> TestFunction for F
where
    F: Fn(&SpinConfig) -> bool + Sync,
{
    fn eval(&self, _g: &SiteGraph, eta: &SpinConfig) -> bool {
        self(eta)
    }
}

/// Indicator that the root is occupied after `steps` synchronous bootstrap
/// steps with filled boundary.
#[derive(Debug, Clone, Copy)]
pub struct EventA {
    pub spec: ModelSpec,
    pub steps: usize,
}

impl EventA {
    /// Event at `steps` equal to the depth of `g`.
    pub fn at_depth(spec: ModelSpec, g: &SiteGraph) -> Self {
        EventA {
            spec,
            steps: g.max_depth(),
        }
    }
}

impl TestFunction for EventA {
    fn eval(&self, g: &SiteGraph, eta: &SpinConfig) -> bool {
        event_a(&self.spec, g, eta, self.steps)
    }

    fn sensitive_sites(&self, g: &SiteGraph, eta: &SpinConfig) -> Vec<usize> {
        match pivotal_sites(&self.spec, g, eta, self.steps) {
            Ok(sites) => sites,
            Err(_) => (0..g.num_vertices())
                .filter(|&x| self.eval(g, &eta.with(x, true)) != self.eval(g, &eta.with(x, false)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirichletMode {
    /// Sum over all `2^V` configurations.
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

impl Estimator {
    pub fn name(&self) -> &'static str {
        match self {
            Estimator::Exact => "exact",
            Estimator::MonteCarlo { .. } => "monte-carlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirichletReport {
    /// `μ(f)`.
    pub mean: f64,
    pub variance: f64,
    pub dirichlet: f64,
    /// `dirichlet / variance`, an upper bound on the spectral gap.
    pub ratio: f64,
    /// Standard errors (zero in exact mode).
    pub variance_stderr: f64,
    pub dirichlet_stderr: f64,
    pub ratio_stderr: f64,
    /// Share of `dirichlet` coming from each depth level.
    pub dirichlet_by_depth: Vec<f64>,
    pub estimator: Estimator,
}

/// Per-configuration contributions: `f(η)` and `c_x(η) p(1-p)` summed over
/// sensitive sites, split by depth.
fn local_terms<F: TestFunction + ?Sized>(
    spec: &ModelSpec,
    g: &SiteGraph,
    f: &F,
    eta: &SpinConfig,
    by_depth: &mut [f64],
    weight: f64,
) -> (bool, f64) {
    let q = spec.p * (1.0 - spec.p);
    let mut d = 0.0;
    for x in f.sensitive_sites(g, eta) {
        if constraint_satisfied(spec, g, eta, x, Boundary::Empty) {
            d += q;
            by_depth[g.depth(x)] += weight * q;
        }
    }
    (f.eval(g, eta), d)
}

/// `Var(f)`, `D(f) = Σ_x μ(c_x p(1-p) (∇_x f)^2)` and their ratio under the
/// Bernoulli(p) measure, with the dynamics' constraints (unconstrained
/// boundary sites).
pub fn dirichlet_ratio<F: TestFunction + ?Sized>(
    spec: &ModelSpec,
    g: &SiteGraph,
    f: &F,
    mode: DirichletMode,
) -> Result<DirichletReport> {
    spec.check_graph(g)?;
    let levels = g.max_depth() + 1;
    match mode {
        DirichletMode::Exact => exact(spec, g, f, levels),
        DirichletMode::MonteCarlo { samples, seed } => monte_carlo(spec, g, f, levels, samples, seed),
    }
}

fn exact<F: TestFunction + ?Sized>(spec: &ModelSpec, g: &SiteGraph, f: &F, levels: usize) -> Result<DirichletReport> {
    let v = g.num_vertices();
    if v > DEFAULT_SITE_CAP {
        return Err(Error::ResourceCap {
            what: "exact Dirichlet form (sites)",
            requested: v as u128,
            cap: DEFAULT_SITE_CAP as u128,
        });
    }
    let n = 1u64 << v;
    let chunk = 1u64 << 10;
    let p = spec.p;
    // fixed chunking and an ordered final sum keep the result bitwise stable
    let partials: Vec<(f64, f64, Vec<f64>)> = (0..n.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut mean = 0.0;
            let mut dir = 0.0;
            let mut by_depth = vec![0.0; levels];
            for s in c * chunk..((c + 1) * chunk).min(n) {
                let eta = SpinConfig::from_bits(v, s);
                let ones = s.count_ones() as i32;
                let w = p.powi(ones) * (1.0 - p).powi(v as i32 - ones);
                if w == 0.0 {
                    continue;
                }
                let (fx, d) = local_terms(spec, g, f, &eta, &mut by_depth, w);
                if fx {
                    mean += w;
                }
                dir += w * d;
            }
            (mean, dir, by_depth)
        })
        .collect();
    let mut mean = 0.0;
    let mut dirichlet = 0.0;
    let mut by_depth = vec![0.0; levels];
    for (m, d, b) in partials {
        mean += m;
        dirichlet += d;
        for (acc, x) in by_depth.iter_mut().zip(b) {
            *acc += x;
        }
    }
    let variance = mean * (1.0 - mean);
    if variance <= 1e-15 {
        return Err(Error::Undefined(format!(
            "test function has zero variance (mean {mean}); the ratio is undefined"
        )));
    }
    Ok(DirichletReport {
        mean,
        variance,
        dirichlet,
        ratio: dirichlet / variance,
        variance_stderr: 0.0,
        dirichlet_stderr: 0.0,
        ratio_stderr: 0.0,
        dirichlet_by_depth: by_depth,
        estimator: Estimator::Exact,
    })
}

fn monte_carlo<F: TestFunction + ?Sized>(
    spec: &ModelSpec,
    g: &SiteGraph,
    f: &F,
    levels: usize,
    samples: usize,
    seed: u64,
) -> Result<DirichletReport> {
    if samples < 2 {
        return Err(invalid("Monte Carlo mode needs at least 2 samples"));
    }
    #[derive(Clone)]
    struct Acc {
        a: f64,
        d: f64,
        dd: f64,
        ad: f64,
        by_depth: Vec<f64>,
    }
    let blocks = samples.div_ceil(MC_BLOCK);
    let partials: Vec<Acc> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = seeded_stream(seed, b as u64);
            let mut acc = Acc {
                a: 0.0,
                d: 0.0,
                dd: 0.0,
                ad: 0.0,
                by_depth: vec![0.0; levels],
            };
            let count = MC_BLOCK.min(samples - b * MC_BLOCK);
            for _ in 0..count {
                let eta = sample_config(spec.p, g, &mut rng);
                let (fx, d) = local_terms(spec, g, f, &eta, &mut acc.by_depth, 1.0);
                let a = f64::from(u8::from(fx));
                acc.a += a;
                acc.d += d;
                acc.dd += d * d;
                acc.ad += a * d;
            }
            acc
        })
        .collect();
    let n = samples as f64;
    let mut tot = Acc {
        a: 0.0,
        d: 0.0,
        dd: 0.0,
        ad: 0.0,
        by_depth: vec![0.0; levels],
    };
    for acc in partials {
        tot.a += acc.a;
        tot.d += acc.d;
        tot.dd += acc.dd;
        tot.ad += acc.ad;
        for (x, y) in tot.by_depth.iter_mut().zip(acc.by_depth) {
            *x += y;
        }
    }
    let mean = tot.a / n;
    let dirichlet = tot.d / n;
    let variance = mean * (1.0 - mean);
    if variance <= 0.0 {
        return Err(Error::Undefined(format!(
            "test function constant on all {samples} samples; the ratio is undefined"
        )));
    }
    let var_d = (tot.dd / n - dirichlet * dirichlet) * n / (n - 1.0);
    let var_a = variance * n / (n - 1.0);
    let cov_ad = (tot.ad / n - mean * dirichlet) * n / (n - 1.0);
    // delta method for R = D / (m (1 - m))
    let dv = 1.0 - 2.0 * mean;
    let ratio = dirichlet / variance;
    let grad_d = 1.0 / variance;
    let grad_m = -dirichlet * dv / (variance * variance);
    let ratio_var = (grad_d * grad_d * var_d + grad_m * grad_m * var_a + 2.0 * grad_d * grad_m * cov_ad) / n;
    Ok(DirichletReport {
        mean,
        variance,
        dirichlet,
        ratio,
        variance_stderr: dv.abs() * (var_a / n).sqrt(),
        dirichlet_stderr: (var_d / n).sqrt(),
        ratio_stderr: ratio_var.max(0.0).sqrt(),
        dirichlet_by_depth: tot.by_depth.into_iter().map(|x| x / n).collect(),
        estimator: Estimator::MonteCarlo { samples, seed },
    })
}

/// `-ln g_p'(p_inf)`: the per-level decay rate of the variational upper
/// bound built from the root event. Defined above the critical density.
pub fn predicted_decay_rate(k: usize, j: usize, p: f64) -> Result<f64> {
    let pc = critical_density(k, j, 1e-12)?;
    if p <= pc.p_c + pc.bracket_width || p >= 1.0 {
        return Err(invalid(format!(
            "decay rate needs critical density {:.12} < p < 1; got p = {p}",
            pc.p_c
        )));
    }
    let fp = largest_fixed_point(k, j, p, 1e-14)?;
    let slope = eval_g_prime(k, j, p, fp.p_inf)?;
    if !(slope > 0.0) {
        return Err(Error::Undefined(format!("g_p'(p_inf) = {slope} at p = {p}")));
    }
    Ok(-slope.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, GraphKind};
    use crate::spectral::exact_gap;

    #[test]
    fn constant_function_is_flagged() {
        let g = build_graph(GraphKind::RootedTree { depth: 1 }, 2).unwrap();
        let spec = ModelSpec::ofa(2, 2, 0.5).unwrap();
        let constant = |_: &SpinConfig| true;
        assert!(matches!(
            dirichlet_ratio(&spec, &g, &constant, DirichletMode::Exact),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn single_site_indicator_has_ratio_one() {
        let g = build_graph(GraphKind::RootedTree { depth: 0 }, 2).unwrap();
        let spec = ModelSpec::ofa(2, 2, 0.3).unwrap();
        let f = |eta: &SpinConfig| eta.get(0);
        let r = dirichlet_ratio(&spec, &g, &f, DirichletMode::Exact).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-14);
    }

    #[test]
    fn event_a_ratio_bounds_gap_and_only_leaves_contribute() {
        for depth in 1..=3 {
            let g = build_graph(GraphKind::RootedTree { depth }, 2).unwrap();
            let spec = ModelSpec::ofa(2, 2, 0.7).unwrap();
            let f = EventA::at_depth(spec, &g);
            let r = dirichlet_ratio(&spec, &g, &f, DirichletMode::Exact).unwrap();
            let gap = exact_gap(&spec, &g).unwrap().gap;
            assert!(r.ratio >= gap - 1e-12);
            let internal: f64 = r.dirichlet_by_depth[..depth].iter().sum();
            assert_eq!(internal, 0.0);
            assert!(r.dirichlet_by_depth[depth] > 0.0);
        }
    }

    #[test]
    fn monte_carlo_matches_exact() {
        let g = build_graph(GraphKind::RootedTree { depth: 3 }, 2).unwrap();
        let spec = ModelSpec::ofa(2, 2, 0.7).unwrap();
        let f = EventA::at_depth(spec, &g);
        let exact = dirichlet_ratio(&spec, &g, &f, DirichletMode::Exact).unwrap();
        let mc = dirichlet_ratio(&spec, &g, &f, DirichletMode::MonteCarlo { samples: 200_000, seed: 3 }).unwrap();
        assert!((mc.ratio - exact.ratio).abs() < 4.0 * mc.ratio_stderr, "{} vs {} ± {}", mc.ratio, exact.ratio, mc.ratio_stderr);
        assert!((mc.mean - exact.mean).abs() < 4.0 * (exact.variance / 200_000.0).sqrt());
    }

    #[test]
    fn decay_rate_examples() {
        let r = predicted_decay_rate(2, 2, 0.7).unwrap();
        assert!((r + 0.6f64.ln()).abs() < 1e-10);
        assert!(predicted_decay_rate(2, 2, 0.5).is_err());
        assert!(predicted_decay_rate(2, 2, 0.3).is_err());
        assert!(predicted_decay_rate(3, 2, 0.95).unwrap() > 0.0);
        let near_one = predicted_decay_rate(2, 2, 0.99).unwrap();
        assert!(near_one > r);
    }
}
