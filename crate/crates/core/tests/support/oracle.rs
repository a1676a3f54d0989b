//! Reference implementations used only by the tests. Nothing here calls into
//! the spectral module: the generator is rebuilt from the constraint
//! definitions and diagonalised with Householder reduction plus Sturm
//! bisection.

#![allow(dead_code)]

use kcsm::{Family, GraphKind, ModelSpec, SiteGraph};

/// Neighbours of `x` relevant to its constraint, and the number of absent
/// slots that count as empty (unconstrained boundary).
fn constraint_inputs(spec: &ModelSpec, g: &SiteGraph, x: usize) -> (Vec<usize>, usize) {
    match spec.family {
        Family::Ne => {
            let side = match g.kind() {
                GraphKind::Triangle { side } => side,
                _ => panic!("NE needs a triangle"),
            };
            let (a, b) = g.coords(x).unwrap();
            let mut inside = Vec::new();
            let mut outside = 0;
            for (za, zb) in [(a + 1, b), (a, b + 1)] {
                if za + zb <= side {
                    inside.push(g.site_at(za, zb).unwrap());
                } else {
                    outside += 1;
                }
            }
            (inside, outside)
        }
        Family::Ofa | Family::Fa => {
            let slots = match g.kind() {
                GraphKind::UnrootedTree { .. } if x == 0 => spec.k + 1,
                _ => spec.k,
            };
            let kids: Vec<usize> = g.children(x).iter().map(|&c| c as usize).collect();
            let missing = slots - kids.len();
            let mut inputs = kids;
            if spec.family == Family::Fa {
                if let Some(par) = g.parent(x) {
                    inputs.push(par);
                }
            }
            (inputs, missing)
        }
    }
}

/// Symmetrised `-L` as a dense row-major matrix, built state by state.
pub fn symmetric_generator(spec: &ModelSpec, g: &SiteGraph) -> Vec<f64> {
    let v = g.num_vertices();
    let n = 1usize << v;
    let p = spec.p;
    let inputs: Vec<(Vec<usize>, usize)> = (0..v).map(|x| constraint_inputs(spec, g, x)).collect();
    let pi = |s: usize| -> f64 {
        (0..v).map(|x| if s >> x & 1 == 1 { p } else { 1.0 - p }).product()
    };
    let mut q = vec![0.0; n * n];
    for s in 0..n {
        let mut out = 0.0;
        for x in 0..v {
            let (nb, free) = &inputs[x];
            let empties = nb.iter().filter(|&&y| s >> y & 1 == 0).count() + free;
            if empties < spec.j {
                continue;
            }
            let t = s ^ (1 << x);
            let rate = if s >> x & 1 == 1 { 1.0 - p } else { p };
            q[s * n + t] = -rate;
            out += rate;
        }
        q[s * n + s] = out;
    }
    // D^{1/2} Q D^{-1/2}
    let sq: Vec<f64> = (0..n).map(|s| pi(s).sqrt()).collect();
    for a in 0..n {
        for b in 0..n {
            if q[a * n + b] != 0.0 && a != b {
                q[a * n + b] *= sq[a] / sq[b];
            }
        }
    }
    q
}

/// Householder reduction of a symmetric matrix to tridiagonal form.
/// Returns (diagonal, sub-diagonal).
pub fn tridiagonalize(mut a: Vec<f64>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let idx = |i: usize, j: usize| i * n + j;
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let norm: f64 = ((k + 1)..n).map(|i| a[idx(i, k)] * a[idx(i, k)]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[idx(k + 1, k)] > 0.0 { -norm } else { norm };
        v.iter_mut().for_each(|x| *x = 0.0);
        v[k + 1] = a[idx(k + 1, k)] - alpha;
        for i in (k + 2)..n {
            v[i] = a[idx(i, k)];
        }
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // A <- H A H with H = I - 2 v v^T / (v^T v)
        for i in 0..n {
            w[i] = (k..n).map(|j| a[idx(i, j)] * v[j]).sum::<f64>() * 2.0 / vnorm2;
        }
        let c: f64 = (0..n).map(|i| v[i] * w[i]).sum::<f64>() / vnorm2;
        for i in 0..n {
            w[i] -= c * v[i];
        }
        for i in k..n {
            for j in k..n {
                a[idx(i, j)] -= v[i] * w[j] + w[i] * v[j];
            }
        }
    }
    let d = (0..n).map(|i| a[idx(i, i)]).collect();
    let e = (0..n.saturating_sub(1)).map(|i| a[idx(i + 1, i)]).collect();
    (d, e)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`.
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..d.len() {
        let off = if i == 0 { 0.0 } else { e[i - 1] * e[i - 1] };
        q = d[i] - x - if i == 0 { 0.0 } else { off / q };
        if q == 0.0 {
            q = -1e-300;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// `m`-th smallest eigenvalue (0-based) by bisection on the Sturm count.
pub fn tridiagonal_eigenvalue(d: &[f64], e: &[f64], m: usize) -> f64 {
    let bound = d
        .iter()
        .enumerate()
        .map(|(i, di)| {
            let left = if i > 0 { e[i - 1].abs() } else { 0.0 };
            let right = if i < e.len() { e[i].abs() } else { 0.0 };
            di.abs() + left + right
        })
        .fold(0.0, f64::max);
    let (mut lo, mut hi) = (-bound - 1.0, bound + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(d, e, mid) > m {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Lowest `count` eigenvalues of `-L` on `g`.
pub fn lowest_eigenvalues(spec: &ModelSpec, g: &SiteGraph, count: usize) -> Vec<f64> {
    let n = 1usize << g.num_vertices();
    let (d, e) = tridiagonalize(symmetric_generator(spec, g), n);
    (0..count.min(n)).map(|m| tridiagonal_eigenvalue(&d, &e, m)).collect()
}

/// Spectral gap from the oracle: the second-smallest eigenvalue.
pub fn oracle_gap(spec: &ModelSpec, g: &SiteGraph) -> f64 {
    lowest_eigenvalues(spec, g, 2)[1]
}

/// Literal synchronous bootstrap: repeatedly empties every occupied site
/// whose constraint holds, written against plain boolean vectors.
pub struct LiteralMap {
    inputs: Vec<(Vec<usize>, usize)>,
    j: usize,
    filled: bool,
}

impl LiteralMap {
    pub fn new(spec: &ModelSpec, g: &SiteGraph, filled: bool) -> Self {
        let inputs = (0..g.num_vertices()).map(|x| constraint_inputs(spec, g, x)).collect();
        LiteralMap { inputs, j: spec.j, filled }
    }

    pub fn step(&self, prev: &[bool], out: &mut Vec<bool>) {
        out.clear();
        out.extend(prev.iter().enumerate().map(|(x, &occ)| {
            if !occ {
                return false;
            }
            let (nb, free) = &self.inputs[x];
            let absent = if self.filled { 0 } else { *free };
            nb.iter().filter(|&&y| !prev[y]).count() + absent < self.j
        }));
    }
}

pub fn literal_bootstrap(spec: &ModelSpec, g: &SiteGraph, eta: &[bool], steps: usize, filled: bool) -> Vec<bool> {
    let map = LiteralMap::new(spec, g, filled);
    let mut cur = eta.to_vec();
    let mut next = Vec::with_capacity(cur.len());
    for _ in 0..steps {
        map.step(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    cur
}
