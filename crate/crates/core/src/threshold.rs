//! Scalar analysis of the one-generation map
//! `g_p(x) = p * P(Bin(k, x) >= k - j + 1)`.
//!
//! `g_p(x)` is the probability that a vertex stays occupied for one more
//! synchronous bootstrap step when each child independently does with
//! probability `x`. Writing `T(x) = g_p(x) / p`, a nonzero fixed point exists
//! iff `p * T(x) >= x` somewhere in `(0, 1]`. `T(x)/x` is unimodal (strictly
//! decreasing from `k` when `j = k`), so the critical density is `1 / max T(x)/x`
//! and every question about fixed points reduces to locating that peak.

use crate::error::{invalid, Error, Result};

/// Cap on the recursion depth searched by [`ell_zero`].
pub const ELL_ZERO_CAP: usize = 10_000_000;

const EXACT_BINOMIAL_MAX: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointReport {
    /// Largest fixed point of `g_p` in `[0, 1]`.
    pub p_inf: f64,
    pub derivative_at_fp: f64,
    /// `derivative_at_fp < 1`.
    pub stable: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalDensityReport {
    pub p_c: f64,
    pub bracket_width: f64,
    pub evaluations: usize,
    /// Largest fixed point at the upper end of the final bracket. Zero for
    /// `j = k`; positive for `1 < j < k` where the transition is
    /// discontinuous.
    pub p_inf_at_critical: f64,
}

fn check_kj(k: usize, j: usize) -> Result<()> {
    if k == 0 {
        return Err(invalid("branching k must be at least 1"));
    }
    if j == 0 || j > k {
        return Err(invalid(format!("facilitating parameter j = {j} outside [1, k = {k}]")));
    }
    Ok(())
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(invalid(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

/// Binomial coefficient `C(n, r)` as a float; exact for `n <= 64`.
pub fn binomial(n: usize, r: usize) -> f64 {
    if r > n {
        return 0.0;
    }
    let r = r.min(n - r);
    if n <= EXACT_BINOMIAL_MAX {
        let mut c: u128 = 1;
        for i in 0..r {
            c = c * (n - i) as u128 / (i + 1) as u128;
        }
        c as f64
    } else {
        ln_binomial(n, r).exp()
    }
}

fn ln_binomial(n: usize, r: usize) -> f64 {
    let r = r.min(n - r);
    (0..r).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

/// `C(n, i) x^i (1-x)^(n-i)`, in log space when `n` is large.
fn binomial_term(n: usize, i: usize, x: f64) -> f64 {
    if n <= EXACT_BINOMIAL_MAX {
        binomial(n, i) * x.powi(i as i32) * (1.0 - x).powi((n - i) as i32)
    } else {
        if (x == 0.0 && i > 0) || (x == 1.0 && i < n) {
            return 0.0;
        }
        let mut log = ln_binomial(n, i);
        if i > 0 {
            log += i as f64 * x.ln();
        }
        if i < n {
            log += (n - i) as f64 * (1.0 - x).ln();
        }
        log.exp()
    }
}

/// `P(Bin(n, x) >= m)`.
fn upper_tail(n: usize, m: usize, x: f64) -> f64 {
    (m..=n).map(|i| binomial_term(n, i, x)).sum()
}

/// `T(x) = g_p(x) / p`.
fn tail(k: usize, j: usize, x: f64) -> f64 {
    upper_tail(k, k - j + 1, x)
}

/// `T'(x) = k C(k-1, k-j) x^(k-j) (1-x)^(j-1)`.
fn tail_prime(k: usize, j: usize, x: f64) -> f64 {
    k as f64 * binomial_term(k - 1, k - j, x)
}

pub fn eval_g(k: usize, j: usize, p: f64, x: f64) -> Result<f64> {
    check_kj(k, j)?;
    check_unit("p", p)?;
    check_unit("x", x)?;
    Ok(p * tail(k, j, x))
}

pub fn eval_g_prime(k: usize, j: usize, p: f64, x: f64) -> Result<f64> {
    check_kj(k, j)?;
    check_unit("p", p)?;
    check_unit("x", x)?;
    Ok(p * tail_prime(k, j, x))
}

/// `(p̄_0, ..., p̄_n)` with `p̄_0 = p` and `p̄_m = g_p(p̄_{m-1})`: the
/// probability that the root of a tree of depth at least `m` is still
/// occupied after `m` synchronous bootstrap steps.
pub fn iterate_recursion(k: usize, j: usize, p: f64, n: usize) -> Result<Vec<f64>> {
    check_kj(k, j)?;
    check_unit("p", p)?;
    let mut out = Vec::with_capacity(n + 1);
    let mut x = p;
    out.push(x);
    for _ in 0..n {
        x = p * tail(k, j, x);
        out.push(x);
    }
    Ok(out)
}

/// Probability that the centre of the unrooted tree (k + 1 neighbours) is
/// still occupied after `n` steps of the unoriented map:
/// `p * P(Bin(k+1, p̄_{n-1}) >= k - j + 2)`.
pub fn frozen_fraction_unrooted(k: usize, j: usize, p: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("frozen fraction needs n >= 1"));
    }
    let q = *iterate_recursion(k, j, p, n - 1)?.last().expect("non-empty");
    Ok(centre_occupied(k, j, p, q))
}

/// `n → ∞` limit of [`frozen_fraction_unrooted`], with `p_inf` in place of
/// `p̄_{n-1}`.
pub fn frozen_fraction_unrooted_limit(k: usize, j: usize, p: f64) -> Result<f64> {
    let fp = largest_fixed_point(k, j, p, 1e-14)?;
    Ok(centre_occupied(k, j, p, fp.p_inf))
}

fn centre_occupied(k: usize, j: usize, p: f64, q: f64) -> f64 {
    p * upper_tail(k + 1, k - j + 2, q)
}

/// Location and height of the peak of `T(x)/x` on `(0, 1]`, and whether the
/// supremum is attained (it is not for `j = k >= 2`, where it is the
/// `x → 0` limit `k`).
fn ratio_peak(k: usize, j: usize) -> (f64, f64, bool) {
    if j == 1 {
        // T(x) = x^k, ratio x^(k-1) peaks at x = 1
        return (1.0, 1.0, true);
    }
    if j == k {
        return (0.0, k as f64, false);
    }
    // x T'(x) - T(x) is positive before the peak and negative after it.
    let phi = |x: f64| x * tail_prime(k, j, x) - tail(k, j, x);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    (x, tail(k, j, x) / x, true)
}

fn has_nonzero_fixed_point(peak: (f64, f64, bool), p: f64) -> bool {
    let (_, m, attained) = peak;
    if attained {
        p * m >= 1.0
    } else {
        p * m > 1.0
    }
}

/// Largest fixed point of `g_p`, reached by iterating from `x = 1`.
///
/// The iterates decrease monotonically to the answer. Near the critical
/// density that convergence is algebraically slow, so after at most
/// `10^4` iterations the fixed point is polished by bisection on
/// `p T(x) - x` between the ratio peak and the last iterate.
pub fn largest_fixed_point(k: usize, j: usize, p: f64, tol: f64) -> Result<FixedPointReport> {
    check_kj(k, j)?;
    check_unit("p", p)?;
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let mut x = 1.0f64;
    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < 10_000 {
        let next = p * tail(k, j, x);
        iterations += 1;
        let done = (next - x).abs() < tol * x.max(1e-12);
        x = next;
        if done {
            converged = true;
            break;
        }
    }
    let peak = ratio_peak(k, j);
    let p_inf = if !has_nonzero_fixed_point(peak, p) {
        0.0
    } else if converged && x == p * tail(k, j, x) {
        x
    } else {
        polish(k, j, p, peak.0, x.max(peak.0), &mut iterations)
    };
    let derivative_at_fp = p * tail_prime(k, j, p_inf);
    Ok(FixedPointReport {
        p_inf,
        derivative_at_fp,
        stable: derivative_at_fp < 1.0,
        iterations,
    })
}

/// Largest root of `p T(x) = x` in `[lo, hi]`, where `p T(x) >= x` at `lo`
/// and `p T(x) <= x` at `hi`.
fn polish(k: usize, j: usize, p: f64, lo: f64, hi: f64, iterations: &mut usize) -> f64 {
    let above = |x: f64| p * tail(k, j, x) >= x;
    if above(hi) {
        return hi;
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        *iterations += 1;
        if above(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Critical density `p̃`: the supremum of densities at which `0` is the only
/// fixed point of `g_p`, located by bisection on `p` to width `tol`.
pub fn critical_density(k: usize, j: usize, tol: f64) -> Result<CriticalDensityReport> {
    check_kj(k, j)?;
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let peak = ratio_peak(k, j);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut evaluations = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        evaluations += 1;
        if has_nonzero_fixed_point(peak, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let p_inf_at_critical = largest_fixed_point(k, j, hi, 1e-14)?.p_inf;
    Ok(CriticalDensityReport {
        p_c: 0.5 * (lo + hi),
        bracket_width: hi - lo,
        evaluations,
        p_inf_at_critical,
    })
}

/// Smallest `ℓ >= 1` with `(ℓ + 1) p̄_ℓ / p <= 1/4`.
///
/// Only defined below the critical density, where `p̄_ℓ → 0`.
pub fn ell_zero(k: usize, j: usize, p: f64) -> Result<usize> {
    check_kj(k, j)?;
    check_unit("p", p)?;
    let peak = ratio_peak(k, j);
    if p * peak.1 >= 1.0 {
        let p_c = 1.0 / peak.1;
        return Err(invalid(format!(
            "ell_zero needs p < critical density {p_c:.12}; got p = {p}"
        )));
    }
    if p == 0.0 {
        return Ok(1);
    }
    let mut x = p;
    for ell in 1..=ELL_ZERO_CAP {
        x = p * tail(k, j, x);
        if (ell as f64 + 1.0) * x / p <= 0.25 {
            return Ok(ell);
        }
    }
    Err(Error::ResourceCap {
        what: "ell_zero recursion depth",
        requested: ELL_ZERO_CAP as u128 + 1,
        cap: ELL_ZERO_CAP as u128,
    })
}

/// Closed-form critical density `1 / max T(x)/x`, without bisection.
pub fn critical_density_closed_form(k: usize, j: usize) -> Result<f64> {
    check_kj(k, j)?;
    Ok(1.0 / ratio_peak(k, j).1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn g_endpoints_and_example() {
        for k in 1..=6 {
            for j in 1..=k {
                for p in [0.0, 0.3, 0.8, 1.0] {
                    assert_eq!(eval_g(k, j, p, 0.0).unwrap(), 0.0);
                    assert!((eval_g(k, j, p, 1.0).unwrap() - p).abs() < 1e-15);
                }
            }
        }
        assert!((eval_g(2, 2, 0.6, 0.5).unwrap() - 0.45).abs() < 1e-15);
        assert!(eval_g(2, 3, 0.5, 0.5).is_err());
        assert!(eval_g(2, 2, 0.5, 1.5).is_err());
    }

    #[test]
    fn g_prime_examples() {
        assert!((eval_g_prime(3, 3, 0.7, 0.0).unwrap() - 2.1).abs() < 1e-15);
        assert_eq!(eval_g_prime(3, 2, 0.7, 0.0).unwrap(), 0.0);
        assert!((eval_g_prime(2, 2, 0.6, 1.0 / 3.0).unwrap() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn recursion_examples() {
        let r = iterate_recursion(2, 2, 0.45, 1).unwrap();
        assert!((r[1] - 0.45 * (0.9 - 0.2025)).abs() < 1e-15);
        let r = iterate_recursion(2, 2, 0.6, 400).unwrap();
        assert!((r[400] - 1.0 / 3.0).abs() < 1e-12);
        let r = iterate_recursion(2, 2, 0.3, 60).unwrap();
        // geometric at rate at most 2p
        for m in 1..=60 {
            assert!(r[m] <= 0.3 * 0.6f64.powi(m as i32) + 1e-300);
        }
    }

    #[test]
    fn fixed_points() {
        let fp = largest_fixed_point(2, 2, 0.6, 1e-12).unwrap();
        assert!((fp.p_inf - 1.0 / 3.0).abs() < 1e-12);
        assert!((fp.derivative_at_fp - 0.8).abs() < 1e-10);
        assert!(fp.stable);
        assert_eq!(largest_fixed_point(2, 2, 0.4, 1e-12).unwrap().p_inf, 0.0);
        let at_crit = largest_fixed_point(2, 2, 0.5, 1e-12).unwrap();
        assert_eq!(at_crit.p_inf, 0.0);
        assert!(!at_crit.stable);
        let fp = largest_fixed_point(2, 2, 0.7, 1e-12).unwrap();
        assert!((fp.p_inf - 4.0 / 7.0).abs() < 1e-12);
        assert_eq!(largest_fixed_point(3, 1, 1.0, 1e-12).unwrap().p_inf, 1.0);
    }

    #[test]
    fn critical_densities() {
        for k in 2..=6 {
            let r = critical_density(k, k, 1e-12).unwrap();
            assert!((r.p_c - 1.0 / k as f64).abs() < 1e-11);
            assert!(r.bracket_width <= 1e-12);
            assert!(r.p_inf_at_critical < 1e-9);
        }
        let r = critical_density(3, 2, 1e-12).unwrap();
        assert!((r.p_c - 8.0 / 9.0).abs() < 1e-10);
        assert!((r.p_inf_at_critical - 0.75).abs() < 1e-5);
        assert!((critical_density(4, 1, 1e-12).unwrap().p_c - 1.0).abs() < 1e-11);
    }

    #[test]
    fn unrooted_frozen_fraction() {
        // q = 0 and q = 1
        assert_eq!(frozen_fraction_unrooted(2, 2, 0.0, 1).unwrap(), 0.0);
        assert!((frozen_fraction_unrooted(2, 2, 1.0, 3).unwrap() - 1.0).abs() < 1e-15);
        let p: f64 = 0.4;
        let direct = p * (3.0 * p * p * (1.0 - p) + p.powi(3));
        assert!((frozen_fraction_unrooted(2, 2, p, 1).unwrap() - direct).abs() < 1e-15);
        assert_eq!(frozen_fraction_unrooted_limit(2, 2, 0.45).unwrap(), 0.0);
        assert!(frozen_fraction_unrooted_limit(2, 2, 0.7).unwrap() > 0.0);
        assert!(frozen_fraction_unrooted(2, 2, 0.5, 0).is_err());
    }

    #[test]
    fn ell_zero_values() {
        assert_eq!(ell_zero(2, 2, 0.3).unwrap(), 6);
        assert_eq!(ell_zero(2, 2, 1e-6).unwrap(), 1);
        assert_eq!(ell_zero(2, 2, 0.0).unwrap(), 1);
        assert!(ell_zero(2, 2, 0.5).is_err());
        assert!(ell_zero(3, 2, 0.9).is_err());
        let grid: Vec<usize> = [0.3, 0.4, 0.45, 0.49].iter().map(|&p| ell_zero(2, 2, p).unwrap()).collect();
        assert!(grid.windows(2).all(|w| w[0] < w[1]), "{grid:?}");
    }

    #[test]
    fn large_k_uses_log_space() {
        let exact = binomial(64, 32);
        assert_eq!(exact, 1832624140942590534.0);
        let approx = binomial(70, 35);
        assert!((approx / 1.1218627781666285e20 - 1.0).abs() < 1e-12);
        let g = eval_g(80, 80, 0.5, 0.01).unwrap();
        assert!((g - 0.5 * (1.0 - 0.99f64.powi(80))).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn g_bounded_and_monotone(k in 1usize..8, jj in 0usize..8, p in 0.0f64..=1.0, x in 0.0f64..=1.0, dx in 0.0f64..0.5) {
            let j = 1 + jj % k;
            let g = eval_g(k, j, p, x).unwrap();
            prop_assert!((0.0..=p + 1e-15).contains(&g));
            let y = (x + dx).min(1.0);
            prop_assert!(eval_g(k, j, p, y).unwrap() >= g - 1e-15);
            let q = (p + dx).min(1.0);
            prop_assert!(eval_g(k, j, q, x).unwrap() >= g - 1e-15);
        }

        #[test]
        fn g_prime_matches_finite_differences(k in 1usize..8, jj in 0usize..8, p in 0.05f64..=1.0, x in 0.01f64..0.99) {
            let j = 1 + jj % k;
            let h = 1e-5;
            let fd = (eval_g(k, j, p, x + h).unwrap() - eval_g(k, j, p, x - h).unwrap()) / (2.0 * h);
            let d = eval_g_prime(k, j, p, x).unwrap();
            prop_assert!((fd - d).abs() <= 1e-6 * d.abs().max(1e-3), "fd {} d {}", fd, d);
        }

        #[test]
        fn supercritical_fixed_point_is_attracting(k in 2usize..6, jj in 0usize..6, t in 0.01f64..0.99) {
            let j = 1 + jj % k;
            let pc = critical_density(k, j, 1e-12).unwrap().p_c;
            prop_assume!(pc < 1.0 - 1e-9);
            let p = pc + t * (1.0 - pc);
            let fp = largest_fixed_point(k, j, p, 1e-13).unwrap();
            prop_assert!(fp.p_inf > 0.0 && fp.p_inf <= p);
            prop_assert!((eval_g(k, j, p, fp.p_inf).unwrap() - fp.p_inf).abs() < 1e-10);
            prop_assert!(fp.derivative_at_fp < 1.0);
        }
    }
}
