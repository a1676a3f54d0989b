//! Matrix-free generator on the `2^V` configurations of a finite graph.
//!
//! States are `V`-bit words, bit `x` being the occupation of vertex `x`.
//! The operator stored here is `H = -L` in the basis weighted by `√π`, where
//! `π` is the Bernoulli(p) product measure:
//!
//! * `H[s][s] = Σ_x c_x(s) r_x(s)` with `r_x = 1 - p` on occupied and `p` on
//!   empty sites,
//! * `H[s][s ^ (1 << x)] = -c_x(s) √(p(1-p))`.
//!
//! `H` is symmetric positive semidefinite with `H √π = 0`.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::graph::{Boundary, Family, ModelSpec, SiteGraph};

/// Default cap on the number of sites of an enumerated state space.
pub const DEFAULT_SITE_CAP: usize = 24;

#[derive(Debug, Clone)]
pub struct Generator {
    sites: usize,
    p: f64,
    j: u32,
    /// Bits whose emptiness counts towards each site's constraint.
    watch: Vec<u64>,
    /// Absent neighbours counted as empty, per site.
    free_empties: Vec<u32>,
}

pub fn build_generator(spec: &ModelSpec, g: &SiteGraph) -> Result<Generator> {
    build_generator_with(spec, g, Boundary::Empty, DEFAULT_SITE_CAP)
}

pub fn build_generator_with(
    spec: &ModelSpec,
    g: &SiteGraph,
    boundary: Boundary,
    site_cap: usize,
) -> Result<Generator> {
    spec.check_graph(g)?;
    let sites = g.num_vertices();
    if sites > site_cap.min(40) {
        return Err(Error::ResourceCap {
            what: "generator state space (sites)",
            requested: sites as u128,
            cap: site_cap.min(40) as u128,
        });
    }
    if !(spec.p > 0.0 && spec.p < 1.0) {
        return Err(invalid(format!(
            "generator needs 0 < p < 1 for a positive stationary measure, got {}",
            spec.p
        )));
    }
    let mut watch = Vec::with_capacity(sites);
    let mut free_empties = Vec::with_capacity(sites);
    for x in 0..sites {
        let mut mask = 0u64;
        for &c in g.children(x) {
            mask |= 1 << c;
        }
        if spec.family == Family::Fa {
            if let Some(par) = g.parent(x) {
                mask |= 1 << par;
            }
        }
        watch.push(mask);
        free_empties.push(match boundary {
            Boundary::Empty => g.missing_children(x) as u32,
            Boundary::Filled => 0,
        });
    }
    Ok(Generator {
        sites,
        p: spec.p,
        j: spec.j as u32,
        watch,
        free_empties,
    })
}

impl Generator {
    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn num_states(&self) -> usize {
        1usize << self.sites
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Constraint of site `x` in state `s`.
    #[inline]
    pub fn constraint(&self, s: u64, x: usize) -> bool {
        (!s & self.watch[x]).count_ones() + self.free_empties[x] >= self.j
    }

    /// Bit mask of the sites whose constraint holds in state `s`.
    #[inline]
    pub fn flippable(&self, s: u64) -> u64 {
        let mut m = 0u64;
        for x in 0..self.sites {
            if self.constraint(s, x) {
                m |= 1 << x;
            }
        }
        m
    }

    /// Total exit rate of state `s`, the diagonal of `-L`.
    #[inline]
    pub fn exit_rate(&self, s: u64) -> f64 {
        let flippable = self.flippable(s);
        let occupied = (flippable & s).count_ones() as f64;
        let empty = (flippable & !s).count_ones() as f64;
        occupied * (1.0 - self.p) + empty * self.p
    }

    /// Off-diagonal magnitude `√(p(1-p))` of the symmetrized operator.
    pub fn hopping(&self) -> f64 {
        (self.p * (1.0 - self.p)).sqrt()
    }

    /// `y = H x` for the symmetrized `H = -L`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.num_states();
        assert_eq!(x.len(), n);
        assert_eq!(y.len(), n);
        let t = self.hopping();
        let row = |s: usize| -> f64 {
            let st = s as u64;
            let flippable = self.flippable(st);
            let occupied = (flippable & st).count_ones() as f64;
            let empty = (flippable & !st).count_ones() as f64;
            let mut acc = (occupied * (1.0 - self.p) + empty * self.p) * x[s];
            let mut m = flippable;
            let mut off = 0.0;
            while m != 0 {
                let b = m.trailing_zeros();
                off += x[s ^ (1usize << b)];
                m &= m - 1;
            }
            acc -= t * off;
            acc
        };
        if n >= 1 << 12 {
            y.par_chunks_mut(1 << 10).enumerate().for_each(|(ci, chunk)| {
                let base = ci << 10;
                for (i, out) in chunk.iter_mut().enumerate() {
                    *out = row(base + i);
                }
            });
        } else {
            for (s, out) in y.iter_mut().enumerate() {
                *out = row(s);
            }
        }
    }

    /// Dense `H` (row-major), for small state spaces.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.num_states();
        let t = self.hopping();
        let mut h = vec![0.0; n * n];
        for s in 0..n {
            let st = s as u64;
            h[s * n + s] = self.exit_rate(st);
            let mut m = self.flippable(st);
            while m != 0 {
                let b = m.trailing_zeros();
                h[s * n + (s ^ (1usize << b))] = -t;
                m &= m - 1;
            }
        }
        h
    }

    /// `-L` in the unweighted basis: `Q[s][s'] = rate(s → s')` off the
    /// diagonal and rows summing to zero.
    pub fn rate_matrix(&self) -> Vec<f64> {
        let n = self.num_states();
        let mut q = vec![0.0; n * n];
        for s in 0..n {
            let st = s as u64;
            let mut m = self.flippable(st);
            let mut total = 0.0;
            while m != 0 {
                let b = m.trailing_zeros();
                let rate = if st >> b & 1 == 1 { 1.0 - self.p } else { self.p };
                q[s * n + (s ^ (1usize << b))] = rate;
                total += rate;
                m &= m - 1;
            }
            q[s * n + s] = -total;
        }
        q
    }

    /// Stationary probability of state `s`.
    #[inline]
    pub fn stationary(&self, s: u64) -> f64 {
        let ones = s.count_ones() as i32;
        self.p.powi(ones) * (1.0 - self.p).powi(self.sites as i32 - ones)
    }

    /// `√π`, the unit-norm null vector of `H`.
    pub fn sqrt_stationary(&self) -> Vec<f64> {
        (0..self.num_states() as u64).map(|s| self.stationary(s).sqrt()).collect()
    }
}
