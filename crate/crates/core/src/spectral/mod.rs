//! Finite-volume spectral gaps, Dirichlet forms and the variational bound.

mod generator;
mod lanczos;
mod variational;

pub use generator::{build_generator, build_generator_with, Generator, DEFAULT_SITE_CAP};
pub use lanczos::{lowest_deflated, LanczosOptions, LanczosResult};
pub use variational::{
    dirichlet_ratio, predicted_decay_rate, DirichletMode, DirichletReport, Estimator, EventA,
    TestFunction,
};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::Result;
use crate::graph::{Boundary, ModelSpec, SiteGraph};

/// Largest state space solved by dense diagonalisation.
pub const DENSE_MAX_STATES: usize = 1 << 10;

/// Eigenvalues below this are treated as zero when deciding ergodicity.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Dense,
    Lanczos,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Dense => "dense",
            SolverKind::Lanczos => "lanczos",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpectrum {
    pub num_states: usize,
    /// Smallest nonzero eigenvalue of `-L`; zero when the chain is reducible.
    pub gap: f64,
    /// Lowest eigenvalues of `-L` in increasing order (all of them from the
    /// dense path, `[0, gap]` from the iterative one).
    pub low_eigenvalues: Option<Vec<f64>>,
    /// The zero eigenvalue is simple.
    pub ergodic: bool,
    pub solver: SolverKind,
    /// Final residual of the iterative solver.
    pub residual: Option<f64>,
}

/// Spectral gap of the generator with unconstrained boundary sites.
pub fn exact_gap(spec: &ModelSpec, g: &SiteGraph) -> Result<GeneratorSpectrum> {
    exact_gap_with(spec, g, Boundary::Empty, DEFAULT_SITE_CAP, &LanczosOptions::default())
}

pub fn exact_gap_with(
    spec: &ModelSpec,
    g: &SiteGraph,
    boundary: Boundary,
    site_cap: usize,
    opts: &LanczosOptions,
) -> Result<GeneratorSpectrum> {
    let h = build_generator_with(spec, g, boundary, site_cap)?;
    if h.num_states() <= DENSE_MAX_STATES {
        Ok(dense_spectrum(&h))
    } else {
        lanczos_spectrum(&h, opts)
    }
}

/// All eigenvalues of `H = -L` by dense symmetric diagonalisation.
pub fn dense_spectrum(h: &Generator) -> GeneratorSpectrum {
    let n = h.num_states();
    let m = DMatrix::from_row_slice(n, n, &h.to_dense());
    let mut values: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| a.total_cmp(b));
    let lambda1 = values.get(1).copied().unwrap_or(f64::INFINITY);
    let ergodic = lambda1 > ZERO_EIGENVALUE_TOL;
    let gap = if n == 1 {
        0.0
    } else if ergodic {
        lambda1
    } else {
        0.0
    };
    GeneratorSpectrum {
        num_states: n,
        gap,
        low_eigenvalues: Some(values.iter().map(|v| v.max(0.0)).collect()),
        ergodic: n == 1 || ergodic,
        solver: SolverKind::Dense,
        residual: None,
    }
}

/// Gap by restarted Lanczos on the complement of `√π`, whatever the size.
pub fn lanczos_spectrum(h: &Generator, opts: &LanczosOptions) -> Result<GeneratorSpectrum> {
    let n = h.num_states();
    let null = h.sqrt_stationary();
    let r = lowest_deflated(|x, y| h.apply(x, y), n, &null, opts)?;
    let ergodic = r.value > ZERO_EIGENVALUE_TOL;
    let gap = if ergodic { r.value } else { 0.0 };
    Ok(GeneratorSpectrum {
        num_states: n,
        gap,
        low_eigenvalues: Some(vec![0.0, gap]),
        ergodic,
        solver: SolverKind::Lanczos,
        residual: Some(r.residual),
    })
}
