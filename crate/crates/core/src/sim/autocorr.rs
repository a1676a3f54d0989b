//! Autocorrelation of sampled observables and relaxation-rate estimates.

use crate::error::{invalid, Error, Result};

use super::{mean, mean_and_stderr, TrajectoryStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    RootOccupancy,
    Density,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::RootOccupancy => "root",
            Observable::Density => "density",
        }
    }
}

impl std::str::FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "root" => Ok(Observable::RootOccupancy),
            "density" => Ok(Observable::Density),
            other => Err(invalid(format!("unknown observable '{other}' (expected root or density)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrelationReport {
    /// Lag times `τ Δ`.
    pub lag_times: Vec<f64>,
    /// Biased (`1/N`) autocovariance, averaged over replicas; entry 0 is the
    /// sample variance.
    pub autocovariance: Vec<f64>,
    pub rho: Vec<f64>,
    pub rho_stderr: Vec<f64>,
    /// Last lag index used by the exponential fit.
    pub fit_last_lag: usize,
    /// `-slope` of a least-squares line through `ln ρ` over the fit window.
    pub decay_rate: f64,
    pub decay_rate_stderr: f64,
    /// `Δ (1/2 + Σ ρ(τ))` over the fit window.
    pub tau_int: f64,
    pub tau_int_stderr: f64,
}

/// Per-lag autocovariance of one series about `m`, normalised by the
/// series length.
fn autocovariance(series: &[f64], m: f64, max_lag: usize) -> Vec<f64> {
    let n = series.len();
    let centred: Vec<f64> = series.iter().map(|x| x - m).collect();
    (0..=max_lag)
        .map(|tau| {
            if tau >= n {
                return 0.0;
            }
            centred[..n - tau].iter().zip(&centred[tau..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
        })
        .collect()
}

/// Least-squares slope of `y` against `x` with its standard error.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    if x.len() <= 2 {
        return (slope, f64::NAN);
    }
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    (slope, (sse / (n - 2.0) / sxx).sqrt())
}

/// Autocorrelation of `observable` up to lag time `max_lag_time`.
///
/// The series of every replica is centred on the pooled mean. Standard
/// errors of `ρ(τ)` come from the spread of per-replica estimates (Bartlett's
/// formula with a single replica). The exponential fit uses lags
/// `0..=τ_last`, where `τ_last` is the last lag before the first one whose
/// estimate falls below three standard errors.
pub fn autocorrelation(
    stats: &TrajectoryStats,
    observable: Observable,
    max_lag_time: f64,
) -> Result<AutocorrelationReport> {
    let series = stats.series(observable);
    let dt = stats.sample_interval;
    let span = stats.times.last().copied().unwrap_or(0.0) - stats.times.first().copied().unwrap_or(0.0);
    if !(max_lag_time > 0.0) {
        return Err(invalid("max lag must be positive"));
    }
    if span < 20.0 * max_lag_time {
        return Err(Error::InsufficientData(format!(
            "sampled span {span} is shorter than 20 x max lag {max_lag_time}"
        )));
    }
    let max_lag = (max_lag_time / dt).floor() as usize;
    if max_lag < 1 {
        return Err(invalid("max lag is shorter than the sampling interval"));
    }
    let pooled: Vec<f64> = series.iter().flatten().copied().collect();
    let m = mean(&pooled);
    let per_replica: Vec<Vec<f64>> = series.iter().map(|s| autocovariance(s, m, max_lag)).collect();
    let replicas = per_replica.len();
    let autocov: Vec<f64> = (0..=max_lag)
        .map(|tau| per_replica.iter().map(|c| c[tau]).sum::<f64>() / replicas as f64)
        .collect();
    if !(autocov[0] > 0.0) {
        return Err(Error::InsufficientData("observable has zero variance".into()));
    }
    let rho: Vec<f64> = autocov.iter().map(|c| c / autocov[0]).collect();
    let n = series[0].len() as f64;
    let rho_stderr: Vec<f64> = if replicas >= 2 {
        (0..=max_lag)
            .map(|tau| {
                let vals: Vec<f64> = per_replica
                    .iter()
                    .map(|c| if c[0] > 0.0 { c[tau] / c[0] } else { 0.0 })
                    .collect();
                mean_and_stderr(&vals).1
            })
            .collect()
    } else {
        // Bartlett: Var ρ(τ) ≈ (1 + 2 Σ_{u<τ} ρ(u)^2) / N
        let mut acc = 0.0;
        let mut out = vec![0.0; max_lag + 1];
        for tau in 1..=max_lag {
            out[tau] = ((1.0 + 2.0 * acc) / n).sqrt();
            acc += rho[tau] * rho[tau];
        }
        out
    };
    let mut last = 0;
    for tau in 1..=max_lag {
        if rho[tau] > 3.0 * rho_stderr[tau] && rho[tau] > 0.0 {
            last = tau;
        } else {
            break;
        }
    }
    if last < 1 {
        return Err(Error::InsufficientData(
            "autocorrelation at lag 1 is not significant; refine the sampling interval".into(),
        ));
    }
    let xs: Vec<f64> = (0..=last).map(|t| t as f64 * dt).collect();
    let ys: Vec<f64> = rho[..=last].iter().map(|r| r.ln()).collect();
    let (slope, slope_se) = linear_fit(&xs, &ys);
    let tau_int = dt * (0.5 + rho[1..=last].iter().sum::<f64>());
    let tau_int_stderr = if replicas >= 2 {
        let vals: Vec<f64> = per_replica
            .iter()
            .map(|c| dt * (0.5 + (1..=last).map(|t| c[t] / c[0]).sum::<f64>()))
            .collect();
        mean_and_stderr(&vals).1
    } else {
        // Madras-Sokal variance of the windowed estimator
        tau_int * (2.0 * (2.0 * last as f64 + 1.0) / n).sqrt()
    };
    Ok(AutocorrelationReport {
        lag_times: (0..=max_lag).map(|t| t as f64 * dt).collect(),
        autocovariance: autocov,
        rho,
        rho_stderr,
        fit_last_lag: last,
        decay_rate: -slope,
        decay_rate_stderr: slope_se,
        tau_int,
        tau_int_stderr,
    })
}
