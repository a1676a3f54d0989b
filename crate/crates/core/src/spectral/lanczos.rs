//! Restarted Lanczos for the lowest eigenvalue of a symmetric operator on the
//! orthogonal complement of a known null vector.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::error::{Error, Result};
use crate::seeded_stream;

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    /// Krylov basis size before a restart.
    pub basis: usize,
    pub max_restarts: usize,
    /// Converged when `‖H u - θ u‖ <= tol * max(|θ|, floor)`.
    pub tol: f64,
    pub floor: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions {
            basis: 120,
            max_restarts: 400,
            tol: 1e-8,
            floor: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LanczosResult {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Lowest eigenpair of `apply` restricted to the complement of the unit
/// vector `null`. Full reorthogonalisation, explicit restarts from the
/// current Ritz vector; the start vector is a fixed pseudo-random stream, so
/// runs are reproducible.
pub fn lowest_deflated<F>(apply: F, n: usize, null: &[f64], opts: &LanczosOptions) -> Result<LanczosResult>
where
    F: Fn(&[f64], &mut [f64]),
{
    assert_eq!(null.len(), n);
    let deflate = |v: &mut [f64]| {
        let c = dot(null, v);
        axpy(-c, null, v);
    };
    if n <= 1 {
        return Err(Error::InvalidParameter("deflated space is empty".into()));
    }
    let mut rng = seeded_stream(0x5eed_1a2c, 0);
    let mut start: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    deflate(&mut start);
    normalize(&mut start);

    let m_max = opts.basis.clamp(2, n - 1);
    let mut iterations = 0;
    let mut last_residual = f64::INFINITY;
    let mut w = vec![0.0; n];
    for _restart in 0..opts.max_restarts.max(1) {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut best: Option<(f64, Vec<f64>, f64)> = None;
        for step in 0..m_max {
            apply(&basis[step], &mut w);
            iterations += 1;
            deflate(&mut w);
            let a = dot(&basis[step], &w);
            alpha.push(a);
            // two passes of classical Gram-Schmidt against the whole basis
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    axpy(-c, v, &mut w);
                }
                deflate(&mut w);
            }
            let b = dot(&w, &w).sqrt();
            let m = alpha.len();
            let check = m == m_max || b < 1e-13 * a.abs().max(1.0) || m.is_multiple_of(10);
            if check {
                let (theta, y) = lowest_of_tridiagonal(&alpha, &beta);
                let residual = b * y[m - 1].abs();
                let converged = residual <= opts.tol * theta.abs().max(opts.floor) || b < 1e-13 * a.abs().max(1.0);
                best = Some((theta, y, residual));
                if converged || m == m_max {
                    break;
                }
            }
            beta.push(b);
            let mut next = w.clone();
            next.iter_mut().for_each(|x| *x /= b);
            basis.push(next);
        }
        let (theta, y, residual) = best.expect("at least one Ritz check per cycle");
        let mut ritz = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            axpy(*yi, v, &mut ritz);
        }
        deflate(&mut ritz);
        normalize(&mut ritz);
        last_residual = residual;
        if residual <= opts.tol * theta.abs().max(opts.floor) || basis.len() < m_max {
            // recompute the residual on the assembled vector
            apply(&ritz, &mut w);
            deflate(&mut w);
            let value = dot(&ritz, &w);
            axpy(-value, &ritz, &mut w);
            let true_residual = dot(&w, &w).sqrt();
            if true_residual <= 10.0 * opts.tol * value.abs().max(opts.floor) {
                return Ok(LanczosResult {
                    value,
                    vector: ritz,
                    residual: true_residual,
                    iterations,
                });
            }
            last_residual = true_residual;
        }
        start = ritz;
    }
    Err(Error::NonConvergence {
        what: "Lanczos lowest eigenvalue",
        iterations,
        residual: last_residual,
    })
}

fn lowest_of_tridiagonal(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (idx, &theta) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    (theta, eig.eigenvectors.column(idx).iter().copied().collect())
}
