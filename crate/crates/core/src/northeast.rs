//! North-East model on the triangle `{(a, b) : a, b >= 0, a + b <= L}`.
//!
//! A site may flip when its east `(a+1, b)` and north `(a, b+1)` neighbours
//! are both empty. The quantities here are the quadrants `C_x`, the
//! ℓ-step auxiliary constraint and the bulk probability `p_ℓ` that a site is
//! still occupied after `ℓ` synchronous bootstrap steps.

use rayon::prelude::*;

use crate::bootstrap::{aux_constraint, bootstrap_fixpoint, survival_times, BootstrapResult};
use crate::error::{invalid, Result};
use crate::graph::{build_graph, sample_config, Boundary, GraphKind, ModelSpec, SiteGraph, SpinConfig};
use crate::seeded_stream;
use crate::sim::{simulate, InitialCondition, SimConfig, TrajectoryStats};

/// Samples per random stream in [`estimate_p_ell`].
const BLOCK: usize = 1024;

fn require_triangle(g: &SiteGraph) -> Result<usize> {
    match g.kind() {
        GraphKind::Triangle { side } => Ok(side),
        _ => Err(invalid("North-East operations need a triangle graph")),
    }
}

fn ne_spec() -> ModelSpec {
    ModelSpec::north_east(0.5).expect("valid density")
}

/// `C_x`: sites `z` of the triangle with `z_1 >= x_1` and `z_2 >= x_2`,
/// sorted by id.
pub fn ne_quadrant(g: &SiteGraph, x: usize) -> Result<Vec<usize>> {
    let side = require_triangle(g)?;
    if x >= g.num_vertices() {
        return Err(invalid(format!("site {x} outside the triangle")));
    }
    let (a, b) = g.coords(x).expect("triangle site");
    let mut out = Vec::new();
    for za in a..=side {
        for zb in b..=side - za {
            out.push(g.site_at(za, zb).expect("inside"));
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// `Ĉ_x = C_x \ {x}`.
pub fn ne_quadrant_hat(g: &SiteGraph, x: usize) -> Result<Vec<usize>> {
    let mut c = ne_quadrant(g, x)?;
    c.retain(|&z| z != x);
    Ok(c)
}

/// Whether at most `ℓ` synchronous North-East bootstrap steps with empty
/// boundary empty `x` once `η_x` is set to 1.
pub fn ne_aux_constraint(g: &SiteGraph, eta: &SpinConfig, x: usize, ell: usize) -> Result<bool> {
    require_triangle(g)?;
    aux_constraint(&ne_spec(), g, eta, x, ell)
}

/// North-East bootstrap to its fixed point.
pub fn ne_bootstrap(g: &SiteGraph, eta: &SpinConfig, boundary: Boundary) -> Result<BootstrapResult> {
    require_triangle(g)?;
    Ok(bootstrap_fixpoint(&ne_spec(), g, eta, boundary))
}

/// North-East Glauber dynamics on the triangle.
pub fn ne_dynamics(p: f64, g: &SiteGraph, init: &InitialCondition, cfg: &SimConfig) -> Result<TrajectoryStats> {
    require_triangle(g)?;
    simulate(&ModelSpec::north_east(p)?, g, init, cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NEReport {
    pub ell: usize,
    pub p: f64,
    pub p_ell: f64,
    pub stderr: f64,
    /// `p_ell / p` (zero at `p = 0`).
    pub delta: f64,
    /// `(ℓ + 1)^2 δ`.
    pub condition_value: f64,
    pub condition_stderr: f64,
    /// `condition_value < 1/4`.
    pub passes: bool,
    pub samples: usize,
    pub seed: u64,
    pub lattice_side: usize,
}

/// Monte Carlo estimate of the probability that the origin of a window of
/// side `lattice_side` is occupied after `ℓ` synchronous North-East
/// bootstrap steps, sites outside the window counted as occupied.
///
/// After `ℓ` steps the origin only depends on sites with `a + b <= ℓ`, so
/// only that sub-triangle is sampled; the result has the law of the full
/// window for any `lattice_side >= ℓ`.
pub fn estimate_p_ell(p: f64, ell: usize, lattice_side: usize, samples: usize, seed: u64) -> Result<NEReport> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("density p = {p} outside [0, 1]")));
    }
    if 2 * ell > lattice_side {
        return Err(invalid(format!(
            "window too small: ℓ = {ell} exceeds half the lattice side {lattice_side}"
        )));
    }
    let finish = |p_ell: f64, stderr: f64| {
        let delta = if p > 0.0 { p_ell / p } else { 0.0 };
        let scale = ((ell + 1) * (ell + 1)) as f64;
        let condition_value = scale * delta;
        NEReport {
            ell,
            p,
            p_ell,
            stderr,
            delta,
            condition_value,
            condition_stderr: if p > 0.0 { scale * stderr / p } else { 0.0 },
            passes: condition_value < 0.25,
            samples,
            seed,
            lattice_side,
        }
    };
    if ell == 0 {
        return Ok(finish(p, 0.0));
    }
    if samples < 2 {
        return Err(invalid("estimate_p_ell needs at least 2 samples"));
    }
    let spec = ModelSpec::north_east(p)?;
    let g = build_graph(GraphKind::Triangle { side: ell }, 0)?;
    let origin = g.root();
    let hits: usize = (0..samples.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut rng = seeded_stream(seed, b as u64);
            let count = BLOCK.min(samples - b * BLOCK);
            (0..count)
                .filter(|_| {
                    let eta = sample_config(p, &g, &mut rng);
                    eta.get(origin)
                        && survival_times(&spec, &g, &eta, Boundary::Filled).expect("oriented")[origin] >= ell as i64
                })
                .count()
        })
        .sum();
    let m = hits as f64 / samples as f64;
    let stderr = (m * (1.0 - m) / (samples as f64 - 1.0)).sqrt();
    Ok(finish(m, stderr))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri(side: usize) -> SiteGraph {
        build_graph(GraphKind::Triangle { side }, 0).unwrap()
    }

    #[test]
    fn quadrant_examples() {
        let g = tri(2);
        assert_eq!(ne_quadrant(&g, 0).unwrap(), (0..6).collect::<Vec<_>>());
        let top = g.site_at(0, 2).unwrap();
        assert_eq!(ne_quadrant(&g, top).unwrap(), vec![top]);
        let x = g.site_at(1, 0).unwrap();
        let mut expect = vec![x, g.site_at(2, 0).unwrap(), g.site_at(1, 1).unwrap()];
        expect.sort();
        assert_eq!(ne_quadrant(&g, x).unwrap(), expect);
        assert_eq!(ne_quadrant_hat(&g, x).unwrap().len(), 2);
        let tree = build_graph(GraphKind::RootedTree { depth: 2 }, 2).unwrap();
        assert!(ne_quadrant(&tree, 0).is_err());
    }

    #[test]
    fn quadrant_double_counting() {
        let g = tri(7);
        let n = g.num_vertices();
        let mut contained = vec![0usize; n];
        let mut total = 0;
        for y in 0..n {
            let c = ne_quadrant(&g, y).unwrap();
            total += c.len();
            for x in c {
                contained[x] += 1;
            }
        }
        assert_eq!(total, contained.iter().sum::<usize>());
        // x lies in C_y for every y weakly south-west of x
        for x in 0..n {
            let (a, b) = g.coords(x).unwrap();
            assert_eq!(contained[x], (a + 1) * (b + 1));
        }
    }

    #[test]
    fn aux_constraint_examples() {
        let spec = ModelSpec::north_east(0.5).unwrap();
        let g = tri(6);
        let n = g.num_vertices();
        let full = SpinConfig::ones(n);
        for x in 0..n {
            let height = g.height(x);
            assert!(ne_aux_constraint(&g, &full, x, height + 1).unwrap());
            if height >= 1 {
                assert!(!ne_aux_constraint(&g, &full, x, height).unwrap());
            }
        }
        let mut rng = seeded_stream(4, 0);
        for _ in 0..200 {
            let eta = sample_config(0.5, &g, &mut rng);
            for x in 0..n {
                assert_eq!(
                    ne_aux_constraint(&g, &eta, x, 1).unwrap(),
                    crate::graph::constraint_satisfied(&spec, &g, &eta, x, Boundary::Empty)
                );
            }
        }
    }

    #[test]
    fn p_ell_trivial_cases() {
        let r = estimate_p_ell(0.37, 0, 10, 100, 1).unwrap();
        assert_eq!(r.p_ell, 0.37);
        let r = estimate_p_ell(1.0, 7, 20, 200, 1).unwrap();
        assert_eq!(r.p_ell, 1.0);
        assert!(estimate_p_ell(0.5, 11, 20, 100, 1).is_err());
    }

    #[test]
    fn p_ell_matches_full_window_simulation() {
        // sampling the whole window gives the same law
        let p = 0.6;
        let ell = 4;
        let side = 12;
        let spec = ModelSpec::north_east(p).unwrap();
        let g = tri(side);
        let mut rng = seeded_stream(99, 0);
        let n = 40_000;
        let mut hits = 0;
        for _ in 0..n {
            let eta = sample_config(p, &g, &mut rng);
            let mut cur = eta;
            for _ in 0..ell {
                cur = crate::bootstrap::bootstrap_step(&spec, &g, &cur, Boundary::Filled);
            }
            hits += usize::from(cur.get(0));
        }
        let direct = hits as f64 / n as f64;
        let r = estimate_p_ell(p, ell, side, n, 5).unwrap();
        let se = (r.stderr.powi(2) + direct * (1.0 - direct) / n as f64).sqrt();
        assert!((r.p_ell - direct).abs() < 4.0 * se, "{} vs {}", r.p_ell, direct);
    }
}
