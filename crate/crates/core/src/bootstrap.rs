//! Synchronous bootstrap maps, the root event of the variational test
//! function, the auxiliary ℓ-step constraint and pivotality.
//!
//! For oriented families (OFA and NE) a site's fate only depends on the
//! cone below it, so the number of synchronous steps a site survives is
//! computed in one bottom-up pass ([`survival_times`]). The literal map
//! [`bootstrap_step`] is kept for every family and the two are cross-checked
//! in the tests.

use crate::error::{invalid, Result};
use crate::graph::{constraint_satisfied, Boundary, Family, ModelSpec, SiteGraph, SpinConfig};

/// Survival time of a site that is never emptied.
pub const NEVER: i64 = i64::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BootstrapResult {
    pub final_config: SpinConfig,
    /// Number of steps that changed the configuration.
    pub iterations_to_fixpoint: usize,
    /// Root occupation before any step (index 0) and after each step, up to
    /// and including the fixed point.
    pub root_occupied_trace: Vec<bool>,
}

/// One synchronous step: a site is empty afterwards iff it was empty or its
/// constraint held on the input configuration.
pub fn bootstrap_step(spec: &ModelSpec, g: &SiteGraph, eta: &SpinConfig, boundary: Boundary) -> SpinConfig {
    let mut out = eta.clone();
    for x in eta.occupied_sites() {
        if constraint_satisfied(spec, g, eta, x, boundary) {
            out.set(x, false);
        }
    }
    out
}

/// Iterates [`bootstrap_step`] until nothing changes.
pub fn bootstrap_fixpoint(
    spec: &ModelSpec,
    g: &SiteGraph,
    eta: &SpinConfig,
    boundary: Boundary,
) -> BootstrapResult {
    let root = g.root();
    let mut cur = eta.clone();
    let mut trace = vec![cur.get(root)];
    let mut iterations = 0;
    loop {
        let next = bootstrap_step(spec, g, &cur, boundary);
        if next == cur {
            break;
        }
        iterations += 1;
        trace.push(next.get(root));
        cur = next;
    }
    BootstrapResult {
        final_config: cur,
        iterations_to_fixpoint: iterations,
        root_occupied_trace: trace,
    }
}

/// Sites of the largest occupied set that the map never empties. Under the
/// dynamics with the same boundary convention these sites can never flip.
pub fn blocked_sites(spec: &ModelSpec, g: &SiteGraph, eta: &SpinConfig, boundary: Boundary) -> Vec<usize> {
    bootstrap_fixpoint(spec, g, eta, boundary)
        .final_config
        .occupied_sites()
        .collect()
}

fn require_oriented(spec: &ModelSpec) -> Result<usize> {
    if !spec.family.is_oriented() {
        return Err(invalid("this operation needs an oriented family (ofa or ne)"));
    }
    Ok(spec.k - spec.j + 1)
}

/// Number of occupied child slots an occupied site needs to stay occupied.
fn occupied_needed(spec: &ModelSpec) -> usize {
    spec.k - spec.j + 1
}

/// Last synchronous step at which each site is still occupied: `-1` for
/// empty sites, [`NEVER`] for sites the map never empties.
///
/// Site `x` is occupied after `t` steps iff `survival_times(..)[x] >= t`.
pub fn survival_times(spec: &ModelSpec, g: &SiteGraph, eta: &SpinConfig, boundary: Boundary) -> Result<Vec<i64>> {
    require_oriented(spec)?;
    Ok(survival_times_unchecked(spec, g, eta, boundary))
}

fn survival_times_unchecked(spec: &ModelSpec, g: &SiteGraph, eta: &SpinConfig, boundary: Boundary) -> Vec<i64> {
    let need = occupied_needed(spec);
    let absent = match boundary {
        Boundary::Empty => -1,
        Boundary::Filled => NEVER,
    };
    let n = g.num_vertices();
    let mut h = vec![-1i64; n];
    let mut slots: Vec<i64> = Vec::with_capacity(g.k() + 1);
    for x in (0..n).rev() {
        if !eta.get(x) {
            continue;
        }
        slots.clear();
        slots.extend(g.children(x).iter().map(|&c| h[c as usize]));
        slots.extend(std::iter::repeat_n(absent, g.missing_children(x)));
        h[x] = if need > slots.len() {
            0
        } else {
            let (_, nth, _) = slots.select_nth_unstable_by(need - 1, |a, b| b.cmp(a));
            nth.saturating_add(1)
        };
    }
    h
}

/// Root occupied after `n` synchronous steps with filled boundary.
pub fn event_a(spec: &ModelSpec, g: &SiteGraph, eta: &SpinConfig, n: usize) -> bool {
    event_a_with_boundary(spec, g, eta, n, Boundary::Filled)
}

/// [`event_a`] with an explicit boundary convention.
pub fn event_a_with_boundary(
    spec: &ModelSpec,
    g: &SiteGraph,
    eta: &SpinConfig,
    n: usize,
    boundary: Boundary,
) -> bool {
    let root = g.root();
    if !eta.get(root) {
        return false;
    }
    if spec.family.is_oriented() {
        return survival_times_unchecked(spec, g, eta, boundary)[root] >= n as i64;
    }
    let mut cur = eta.clone();
    for _ in 0..n {
        let next = bootstrap_step(spec, g, &cur, boundary);
        if !next.get(root) {
            return false;
        }
        if next == cur {
            break;
        }
        cur = next;
    }
    true
}

/// The auxiliary constraint `c_x^(ℓ)`: with `η_x` set to 1 and the sites
/// exactly `ℓ` levels below `x` held fixed, can at most `ℓ` synchronous
/// steps empty `x`? Identically true when the subtree (cone) below `x` is
/// shallower than `ℓ`. Defined for OFA and NE.
pub fn aux_constraint(spec: &ModelSpec, g: &SiteGraph, eta: &SpinConfig, x: usize, ell: usize) -> Result<bool> {
    let need = require_oriented(spec)?;
    if ell == 0 {
        return Err(invalid("aux_constraint needs ℓ >= 1"));
    }
    if g.height(x) < ell {
        return Ok(true);
    }
    // Survival times inside the cone; the frozen bottom level counts as never
    // emptying when occupied.
    let base = g.depth(x);
    let bottom = base + ell;
    let mut h = std::collections::HashMap::new();
    let mut cone = Vec::new();
    let mut frontier = vec![x];
    for _ in 0..ell {
        cone.extend_from_slice(&frontier);
        let mut next = Vec::new();
        for &v in &frontier {
            next.extend(g.children(v).iter().map(|&c| c as usize));
        }
        next.sort_unstable();
        next.dedup();
        frontier = next;
    }
    for &v in &frontier {
        debug_assert_eq!(g.depth(v), bottom);
        h.insert(v, if eta.get(v) { NEVER } else { -1 });
    }
    let mut slots = Vec::with_capacity(g.k() + 1);
    for &v in cone.iter().rev() {
        let occupied = v == x || eta.get(v);
        let value = if !occupied {
            -1
        } else {
            slots.clear();
            slots.extend(g.children(v).iter().map(|&c| h[&(c as usize)]));
            // absent slots only occur on the graph boundary, handled above
            slots.extend(std::iter::repeat_n(-1, g.missing_children(v)));
            if need > slots.len() {
                0
            } else {
                let (_, nth, _) = slots.select_nth_unstable_by(need - 1, |a: &i64, b: &i64| b.cmp(a));
                nth.saturating_add(1)
            }
        };
        h.insert(v, value);
    }
    Ok(h[&x] < ell as i64)
}

/// `x` is pivotal for the root event: [`event_a`] differs between `η_x = 1`
/// and `η_x = 0`. Decided by two evaluations.
pub fn is_pivotal(spec: &ModelSpec, g: &SiteGraph, eta: &SpinConfig, x: usize, n: usize) -> bool {
    event_a(spec, g, &eta.with(x, true), n) != event_a(spec, g, &eta.with(x, false), n)
}

/// All pivotal sites for the root event at `n` steps (filled boundary), in
/// one top-down pass. Oriented families only.
///
/// The event is a read-once threshold formula over the cone of the root, so
/// a site is pivotal iff every gate on its path to the root is sensitive to
/// the branch containing it.
pub fn pivotal_sites(spec: &ModelSpec, g: &SiteGraph, eta: &SpinConfig, n: usize) -> Result<Vec<usize>> {
    pivotal_sites_with_boundary(spec, g, eta, n, Boundary::Filled)
}

pub fn pivotal_sites_with_boundary(
    spec: &ModelSpec,
    g: &SiteGraph,
    eta: &SpinConfig,
    n: usize,
    boundary: Boundary,
) -> Result<Vec<usize>> {
    let need = require_oriented(spec)?;
    if matches!(spec.family, Family::Ne) {
        // Cones overlap on the lattice, the formula is not read-once there.
        return Ok((0..g.num_vertices()).filter(|&x| is_pivotal(spec, g, eta, x, n)).collect());
    }
    let h = survival_times_unchecked(spec, g, eta, boundary);
    let absent_ones = |x: usize| match boundary {
        Boundary::Empty => 0,
        Boundary::Filled => g.missing_children(x),
    };
    let n = n as i64;
    let mut out = Vec::new();
    let mut stack = vec![g.root()];
    while let Some(y) = stack.pop() {
        let t = n - g.depth(y) as i64;
        if t <= 0 {
            out.push(y);
            continue;
        }
        let ones = g.children(y).iter().filter(|&&c| h[c as usize] >= t - 1).count() + absent_ones(y);
        if ones >= need {
            out.push(y);
        }
        if !eta.get(y) {
            continue;
        }
        for &c in g.children(y) {
            let bit = usize::from(h[c as usize] >= t - 1);
            if ones - bit == need - 1 {
                stack.push(c as usize);
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_graph, GraphKind};
    use crate::seeded_stream;
    use crate::graph::sample_config;

    fn ofa22() -> ModelSpec {
        ModelSpec::ofa(2, 2, 0.5).unwrap()
    }

    fn tree(depth: usize) -> SiteGraph {
        build_graph(GraphKind::RootedTree { depth }, 2).unwrap()
    }

    #[test]
    fn step_examples() {
        let spec = ofa22();
        let g = tree(2);
        assert_eq!(bootstrap_step(&spec, &g, &SpinConfig::zeros(7), Boundary::Filled), SpinConfig::zeros(7));
        assert_eq!(bootstrap_step(&spec, &g, &SpinConfig::ones(7), Boundary::Filled), SpinConfig::ones(7));
        let mut eta = SpinConfig::ones(7);
        eta.set(1, false);
        eta.set(2, false);
        assert!(!bootstrap_step(&spec, &g, &eta, Boundary::Filled).get(0));
    }

    #[test]
    fn fixpoint_of_zero_takes_no_steps() {
        let r = bootstrap_fixpoint(&ofa22(), &tree(3), &SpinConfig::zeros(15), Boundary::Filled);
        assert_eq!(r.iterations_to_fixpoint, 0);
        assert_eq!(r.root_occupied_trace, vec![false]);
    }

    #[test]
    fn ne_full_triangle_peels_in_side_plus_one_steps() {
        let spec = ModelSpec::north_east(0.5).unwrap();
        for side in [0, 1, 2, 5, 10] {
            let g = build_graph(GraphKind::Triangle { side }, 0).unwrap();
            let n = g.num_vertices();
            let r = bootstrap_fixpoint(&spec, &g, &SpinConfig::ones(n), Boundary::Empty);
            assert_eq!(r.iterations_to_fixpoint, side + 1);
            assert_eq!(r.final_config, SpinConfig::zeros(n));
            // the origin is the last site to go
            assert_eq!(r.root_occupied_trace.iter().filter(|&&b| b).count(), side + 1);
        }
    }

    #[test]
    fn survival_times_match_literal_iteration() {
        let g = tree(3);
        for (k, j) in [(2, 1), (2, 2)] {
            let spec = ModelSpec::ofa(k, j, 0.5).unwrap();
            for bits in 0..(1u64 << 15) {
                let eta = SpinConfig::from_bits(15, bits);
                for boundary in [Boundary::Empty, Boundary::Filled] {
                    let h = survival_times(&spec, &g, &eta, boundary).unwrap();
                    let mut cur = eta.clone();
                    for t in 0..6i64 {
                        for x in 0..15 {
                            assert_eq!(cur.get(x), h[x] >= t, "bits {bits:b} t {t} x {x}");
                        }
                        cur = bootstrap_step(&spec, &g, &cur, boundary);
                    }
                }
            }
        }
    }

    #[test]
    fn ne_survival_times_match_literal_iteration() {
        let spec = ModelSpec::north_east(0.5).unwrap();
        let g = build_graph(GraphKind::Triangle { side: 8 }, 0).unwrap();
        let mut rng = seeded_stream(5, 0);
        for _ in 0..200 {
            let eta = sample_config(0.6, &g, &mut rng);
            for boundary in [Boundary::Empty, Boundary::Filled] {
                let h = survival_times(&spec, &g, &eta, boundary).unwrap();
                let mut cur = eta.clone();
                for t in 0..12i64 {
                    for x in 0..g.num_vertices() {
                        assert_eq!(cur.get(x), h[x] >= t);
                    }
                    cur = bootstrap_step(&spec, &g, &cur, boundary);
                }
            }
        }
    }

    #[test]
    fn event_a_depth_one_enumeration() {
        let spec = ofa22();
        let g = tree(1);
        // root=1, children (0,1)
        let eta = SpinConfig::from_bits(3, 0b101);
        assert!(event_a(&spec, &g, &eta, 1));
        assert!(!event_a(&spec, &g, &eta.with(2, false), 1));
        assert!(is_pivotal(&spec, &g, &eta, 2, 1));
        assert!(!event_a(&spec, &g, &SpinConfig::from_bits(3, 0b110), 1));
        assert!(event_a(&spec, &g, &SpinConfig::ones(3), 1));
        // exactly the configurations with the root and at least one child
        let count = (0..8u64)
            .filter(|&b| event_a(&spec, &g, &SpinConfig::from_bits(3, b), 1))
            .count();
        assert_eq!(count, 3);
    }

    #[test]
    fn fa_event_uses_literal_map() {
        let spec = ModelSpec::fa(2, 2, 0.5).unwrap();
        let g = tree(2);
        assert!(event_a(&spec, &g, &SpinConfig::ones(7), 2));
        let mut eta = SpinConfig::ones(7);
        eta.set(1, false);
        eta.set(2, false);
        assert!(!event_a(&spec, &g, &eta, 2));
    }

    #[test]
    fn aux_constraint_examples() {
        let spec = ofa22();
        let g = tree(3);
        // ℓ = 1 is the constraint itself
        for bits in 0..(1u64 << 15) {
            let eta = SpinConfig::from_bits(15, bits);
            for x in 0..15 {
                assert_eq!(
                    aux_constraint(&spec, &g, &eta, x, 1).unwrap(),
                    constraint_satisfied(&spec, &g, &eta, x, Boundary::Empty)
                );
            }
        }
        // shallow subtrees
        let full = SpinConfig::ones(15);
        assert!(aux_constraint(&spec, &g, &full, 7, 1).unwrap());
        assert!(!aux_constraint(&spec, &g, &full, 3, 1).unwrap());
        assert!(aux_constraint(&spec, &g, &full, 1, 3).unwrap());
        assert!(!aux_constraint(&spec, &g, &full, 0, 3).unwrap());
        // children occupied, grandchildren empty
        let mut eta = SpinConfig::zeros(15);
        eta.set(1, true);
        eta.set(2, true);
        assert!(aux_constraint(&spec, &g, &eta, 0, 2).unwrap());
        assert!(!aux_constraint(&spec, &g, &eta, 0, 1).unwrap());
        assert!(aux_constraint(&ModelSpec::fa(2, 2, 0.5).unwrap(), &g, &eta, 0, 1).is_err());
    }

    #[test]
    fn aux_constraint_is_monotone_in_ell() {
        let spec = ofa22();
        let g = tree(4);
        let mut rng = seeded_stream(9, 0);
        for _ in 0..500 {
            let eta = sample_config(0.6, &g, &mut rng);
            for x in [0usize, 1, 4] {
                let mut prev = false;
                for ell in 1..=5 {
                    let now = aux_constraint(&spec, &g, &eta, x, ell).unwrap();
                    assert!(now || !prev);
                    prev = now;
                }
            }
        }
    }

    #[test]
    fn fast_pivotal_sites_match_two_run_definition() {
        let g = tree(3);
        for (k, j) in [(2, 1), (2, 2)] {
            let spec = ModelSpec::ofa(k, j, 0.5).unwrap();
            for bits in 0..(1u64 << 15) {
                let eta = SpinConfig::from_bits(15, bits);
                for n in [1, 2, 3, 5] {
                    let fast = pivotal_sites(&spec, &g, &eta, n).unwrap();
                    let slow: Vec<usize> = (0..15).filter(|&x| is_pivotal(&spec, &g, &eta, x, n)).collect();
                    assert_eq!(fast, slow, "k {k} j {j} bits {bits:b} n {n}");
                }
            }
        }
    }

    #[test]
    fn unblocked_internal_sites_are_never_pivotal() {
        let spec = ofa22();
        let g = tree(3);
        for bits in 0..(1u64 << 15) {
            let eta = SpinConfig::from_bits(15, bits);
            for x in 0..7 {
                if constraint_satisfied(&spec, &g, &eta, x, Boundary::Filled) {
                    assert!(!is_pivotal(&spec, &g, &eta, x, 3));
                }
            }
        }
    }
}
