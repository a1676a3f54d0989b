//! Finite site graphs, packed spin configurations and the kinetic constraints.
//!
//! Three topologies are supported: the rooted k-ary tree of depth `L`, the
//! unrooted tree (a centre with `k + 1` branches, every other vertex with `k`
//! children) and the North-East triangle `{(a, b) : a, b >= 0, a + b <= L}`.
//! Vertex ids are contiguous and ordered by level (breadth-first for trees,
//! anti-diagonal `a + b` for the triangle), so iterating ids in reverse visits
//! every vertex after all of its children.

use rand::Rng;

use crate::error::{invalid, Error, Result};

/// Default cap on the number of vertices of a built graph.
pub const DEFAULT_VERTEX_CAP: u128 = 1 << 31;

const NONE: u32 = u32::MAX;

/// Constraint family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Fredrickson-Andersen: at least `j` empty neighbours.
    Fa,
    /// Oriented Fredrickson-Andersen: at least `j` empty children.
    Ofa,
    /// North-East: both the north and the east neighbour empty.
    Ne,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Fa => "fa",
            Family::Ofa => "ofa",
            Family::Ne => "ne",
        }
    }

    /// Oriented families only look at the children of a site.
    pub fn is_oriented(self) -> bool {
        !matches!(self, Family::Fa)
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fa" => Ok(Family::Fa),
            "ofa" => Ok(Family::Ofa),
            "ne" | "north-east" | "northeast" => Ok(Family::Ne),
            other => Err(invalid(format!("unknown family '{other}' (expected fa, ofa or ne)"))),
        }
    }
}

/// Constraint family, branching, facilitating parameter and density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub family: Family,
    pub k: usize,
    pub j: usize,
    pub p: f64,
}

impl ModelSpec {
    pub fn new(family: Family, k: usize, j: usize, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("density p = {p} outside [0, 1]")));
        }
        if family == Family::Ne {
            // N and E are the two "children"; both must be empty.
            return Ok(ModelSpec { family, k: 2, j: 2, p });
        }
        if k == 0 {
            return Err(invalid("branching k must be at least 1"));
        }
        if j == 0 || j > k {
            return Err(invalid(format!("facilitating parameter j = {j} outside [1, k = {k}]")));
        }
        Ok(ModelSpec { family, k, j, p })
    }

    pub fn fa(k: usize, j: usize, p: f64) -> Result<Self> {
        Self::new(Family::Fa, k, j, p)
    }

    pub fn ofa(k: usize, j: usize, p: f64) -> Result<Self> {
        Self::new(Family::Ofa, k, j, p)
    }

    pub fn north_east(p: f64) -> Result<Self> {
        Self::new(Family::Ne, 2, 2, p)
    }

    pub fn with_density(self, p: f64) -> Result<Self> {
        Self::new(self.family, self.k, self.j, p)
    }

    /// Checks that the family makes sense on `g` (trees for FA/OFA, the
    /// triangle for NE) and that the branching matches.
    pub fn check_graph(&self, g: &SiteGraph) -> Result<()> {
        match (self.family, g.kind()) {
            (Family::Ne, GraphKind::Triangle { .. }) => Ok(()),
            (Family::Ne, _) => Err(invalid("the North-East family needs a triangle graph")),
            (_, GraphKind::Triangle { .. }) => {
                Err(invalid("FA/OFA families need a tree graph, not a triangle"))
            }
            (Family::Ofa, GraphKind::UnrootedTree { .. }) => {
                Err(invalid("the oriented family needs a rooted tree"))
            }
            _ if g.k() != self.k => Err(invalid(format!(
                "graph branching {} differs from model branching {}",
                g.k(),
                self.k
            ))),
            _ => Ok(()),
        }
    }
}

/// How sites outside the finite graph are counted by a constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Boundary {
    /// Absent neighbours are empty. On trees this makes the leaves
    /// unconstrained, the finite-volume convention for the dynamics.
    #[default]
    Empty,
    /// Absent neighbours are occupied.
    Filled,
}

impl Boundary {
    pub fn name(self) -> &'static str {
        match self {
            Boundary::Empty => "empty",
            Boundary::Filled => "filled",
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "empty" => Ok(Boundary::Empty),
            "filled" => Ok(Boundary::Filled),
            other => Err(invalid(format!("unknown boundary '{other}' (expected empty or filled)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphKind {
    RootedTree { depth: usize },
    UnrootedTree { depth: usize },
    Triangle { side: usize },
}

/// Number of vertices `kind` would have, without building it.
pub fn vertex_count(kind: GraphKind, k: usize) -> u128 {
    // Geometric sums saturate instead of overflowing for absurd requests.
    let geometric = |levels: usize| -> u128 {
        // 1 + k + ... + k^(levels-1)
        let mut total: u128 = 0;
        let mut term: u128 = 1;
        for _ in 0..levels {
            total = total.saturating_add(term);
            term = term.saturating_mul(k as u128);
        }
        total
    };
    match kind {
        GraphKind::RootedTree { depth } => geometric(depth + 1),
        GraphKind::UnrootedTree { depth } => {
            if depth == 0 {
                1
            } else {
                1u128.saturating_add((k as u128 + 1).saturating_mul(geometric(depth)))
            }
        }
        GraphKind::Triangle { side } => {
            let s = side as u128;
            (s + 1) * (s + 2) / 2
        }
    }
}

/// A finite vertex set with its parent/children structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteGraph {
    kind: GraphKind,
    k: usize,
    parent: Vec<u32>,
    child_start: Vec<u32>,
    child_list: Vec<u32>,
    level: Vec<u32>,
    level_start: Vec<u32>,
}

pub fn build_graph(kind: GraphKind, k: usize) -> Result<SiteGraph> {
    build_graph_with_cap(kind, k, DEFAULT_VERTEX_CAP)
}

pub fn build_graph_with_cap(kind: GraphKind, k: usize, cap: u128) -> Result<SiteGraph> {
    let is_tree = !matches!(kind, GraphKind::Triangle { .. });
    if is_tree && k == 0 {
        return Err(invalid("trees need branching k >= 1"));
    }
    let count = vertex_count(kind, k);
    let cap = cap.min(u32::MAX as u128);
    if count > cap {
        return Err(Error::ResourceCap {
            what: "graph vertices",
            requested: count,
            cap,
        });
    }
    let g = match kind {
        GraphKind::RootedTree { depth } => build_tree(kind, k, depth, k, count as usize),
        GraphKind::UnrootedTree { depth } => build_tree(kind, k, depth, k + 1, count as usize),
        GraphKind::Triangle { side } => build_triangle(side),
    };
    debug_assert_eq!(g.num_vertices() as u128, count);
    Ok(g)
}

fn build_tree(kind: GraphKind, k: usize, depth: usize, root_children: usize, n: usize) -> SiteGraph {
    let mut parent = Vec::with_capacity(n);
    let mut level = Vec::with_capacity(n);
    let mut child_start = Vec::with_capacity(n + 1);
    let mut child_list = Vec::with_capacity(n.saturating_sub(1));
    parent.push(NONE);
    level.push(0u32);
    // Breadth-first: children of vertex x are appended in order, so the
    // children of consecutive vertices are consecutive ids.
    let mut next = 1u32;
    let mut x = 0usize;
    while x < parent.len() {
        child_start.push(child_list.len() as u32);
        let d = level[x] as usize;
        if d < depth {
            let nc = if x == 0 { root_children } else { k };
            for _ in 0..nc {
                child_list.push(next);
                parent.push(x as u32);
                level.push(d as u32 + 1);
                next += 1;
            }
        }
        x += 1;
    }
    child_start.push(child_list.len() as u32);
    let level_start = level_starts(&level, depth);
    SiteGraph {
        kind,
        k,
        parent,
        child_start,
        child_list,
        level,
        level_start,
    }
}

fn build_triangle(side: usize) -> SiteGraph {
    let n = (side + 1) * (side + 2) / 2;
    let mut child_start = Vec::with_capacity(n + 1);
    let mut child_list = Vec::with_capacity(2 * n);
    let mut level = Vec::with_capacity(n);
    for d in 0..=side {
        for b in 0..=d {
            let a = d - b;
            child_start.push(child_list.len() as u32);
            level.push(d as u32);
            if d < side {
                child_list.push(triangle_id(a + 1, b) as u32);
                child_list.push(triangle_id(a, b + 1) as u32);
            }
        }
    }
    child_start.push(child_list.len() as u32);
    let level_start = level_starts(&level, side);
    SiteGraph {
        kind: GraphKind::Triangle { side },
        k: 2,
        parent: vec![NONE; n],
        child_start,
        child_list,
        level,
        level_start,
    }
}

fn level_starts(level: &[u32], max_level: usize) -> Vec<u32> {
    let mut starts = vec![0u32; max_level + 2];
    for &l in level {
        starts[l as usize + 1] += 1;
    }
    for i in 1..starts.len() {
        starts[i] += starts[i - 1];
    }
    starts
}

#[inline]
fn triangle_id(a: usize, b: usize) -> usize {
    let d = a + b;
    d * (d + 1) / 2 + b
}

impl SiteGraph {
    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    /// Branching of trees (2 for the triangle: east and north).
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_vertices(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> usize {
        0
    }

    /// Depth `L` of a tree, or side `L` of the triangle.
    pub fn max_depth(&self) -> usize {
        match self.kind {
            GraphKind::RootedTree { depth } | GraphKind::UnrootedTree { depth } => depth,
            GraphKind::Triangle { side } => side,
        }
    }

    /// Children of `x`; for the triangle these are the east and north
    /// neighbours inside the triangle.
    #[inline]
    pub fn children(&self, x: usize) -> &[u32] {
        let lo = self.child_start[x] as usize;
        let hi = self.child_start[x + 1] as usize;
        &self.child_list[lo..hi]
    }

    /// Number of child slots `x` has in the infinite graph.
    #[inline]
    pub fn nominal_children(&self, x: usize) -> usize {
        match self.kind {
            GraphKind::UnrootedTree { .. } if x == 0 => self.k + 1,
            _ => self.k,
        }
    }

    /// Child slots of `x` that fall outside the finite graph.
    #[inline]
    pub fn missing_children(&self, x: usize) -> usize {
        self.nominal_children(x) - self.children(x).len()
    }

    #[inline]
    pub fn parent(&self, x: usize) -> Option<usize> {
        match self.parent[x] {
            NONE => None,
            v => Some(v as usize),
        }
    }

    /// All nearest neighbours inside the graph.
    pub fn neighbors(&self, x: usize) -> Vec<usize> {
        match self.kind {
            GraphKind::Triangle { .. } => {
                let (a, b) = self.coords(x).expect("triangle site");
                let mut out = Vec::with_capacity(4);
                if a > 0 {
                    out.push(triangle_id(a - 1, b));
                }
                if b > 0 {
                    out.push(triangle_id(a, b - 1));
                }
                out.extend(self.children(x).iter().map(|&c| c as usize));
                out
            }
            _ => self
                .parent(x)
                .into_iter()
                .chain(self.children(x).iter().map(|&c| c as usize))
                .collect(),
        }
    }

    /// Tree depth, or `a + b` on the triangle.
    #[inline]
    pub fn depth(&self, x: usize) -> usize {
        self.level[x] as usize
    }

    /// Vertex ids at a given level, as a contiguous range.
    pub fn level_range(&self, d: usize) -> std::ops::Range<usize> {
        if d > self.max_depth() {
            return 0..0;
        }
        self.level_start[d] as usize..self.level_start[d + 1] as usize
    }

    pub fn is_leaf(&self, x: usize) -> bool {
        self.children(x).is_empty()
    }

    /// Leaves of a tree, hypotenuse sites of the triangle.
    pub fn is_boundary(&self, x: usize) -> bool {
        self.level[x] as usize == self.max_depth()
    }

    /// Depth of the subtree (or cone) hanging from `x` inside the graph.
    pub fn height(&self, x: usize) -> usize {
        self.max_depth() - self.depth(x)
    }

    /// Lattice coordinates `(a, b)` of a triangle site.
    pub fn coords(&self, x: usize) -> Option<(usize, usize)> {
        match self.kind {
            GraphKind::Triangle { .. } => {
                let d = self.level[x] as usize;
                let b = x - d * (d + 1) / 2;
                Some((d - b, b))
            }
            _ => None,
        }
    }

    /// Triangle site at lattice coordinates `(a, b)`.
    pub fn site_at(&self, a: usize, b: usize) -> Option<usize> {
        match self.kind {
            GraphKind::Triangle { side } if a + b <= side => Some(triangle_id(a, b)),
            _ => None,
        }
    }

    /// True iff `y` lies in the subtree rooted at `x` (tree graphs).
    pub fn is_descendant(&self, y: usize, x: usize) -> bool {
        let mut cur = Some(y);
        while let Some(v) = cur {
            if v == x {
                return true;
            }
            if self.level[v] <= self.level[x] {
                return false;
            }
            cur = self.parent(v);
        }
        false
    }
}

/// Occupation variables packed one bit per vertex (1 = occupied).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    len: usize,
    words: Vec<u64>,
}

impl SpinConfig {
    pub fn zeros(len: usize) -> Self {
        SpinConfig {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut c = SpinConfig {
            len,
            words: vec![u64::MAX; len.div_ceil(64)],
        };
        c.clear_tail();
        c
    }

    /// Configuration whose site `x` is bit `x` of `bits` (`len <= 64`).
    pub fn from_bits(len: usize, bits: u64) -> Self {
        assert!(len <= 64, "from_bits needs at most 64 sites");
        let mut c = SpinConfig {
            len,
            words: if len == 0 { Vec::new() } else { vec![bits] },
        };
        c.clear_tail();
        c
    }

    pub fn from_bools(values: &[bool]) -> Self {
        let mut c = SpinConfig::zeros(values.len());
        for (x, &v) in values.iter().enumerate() {
            if v {
                c.set(x, true);
            }
        }
        c
    }

    /// Bit-packed state index (`len <= 64`).
    pub fn to_bits(&self) -> u64 {
        assert!(self.len <= 64, "to_bits needs at most 64 sites");
        self.words.first().copied().unwrap_or(0)
    }

    fn clear_tail(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, x: usize) -> bool {
        debug_assert!(x < self.len);
        (self.words[x >> 6] >> (x & 63)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, x: usize, value: bool) {
        debug_assert!(x < self.len);
        let mask = 1u64 << (x & 63);
        if value {
            self.words[x >> 6] |= mask;
        } else {
            self.words[x >> 6] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, x: usize) {
        self.words[x >> 6] ^= 1u64 << (x & 63);
    }

    /// Copy with site `x` set to `value`.
    pub fn with(&self, x: usize, value: bool) -> Self {
        let mut c = self.clone();
        c.set(x, value);
        c
    }

    pub fn count_occupied(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn density(&self) -> f64 {
        if self.len == 0 {
            0.0
        } else {
            self.count_occupied() as f64 / self.len as f64
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |x| self.get(x))
    }

    pub fn occupied_sites(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&x| self.get(x))
    }

    /// Sitewise `self <= other`.
    pub fn is_below(&self, other: &SpinConfig) -> bool {
        self.len == other.len
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| a & !b == 0)
    }
}

/// Number of empty child slots of `x`, absent slots counted per `boundary`.
#[inline]
pub(crate) fn empty_children(g: &SiteGraph, eta: &SpinConfig, x: usize, boundary: Boundary) -> usize {
    let present = g.children(x).iter().filter(|&&c| !eta.get(c as usize)).count();
    match boundary {
        Boundary::Empty => present + g.missing_children(x),
        Boundary::Filled => present,
    }
}

/// Kinetic constraint at `x`. Never reads `eta[x]` itself.
///
/// OFA counts empty children, FA counts empty neighbours (parent included)
/// and NE requires both north and east neighbours empty. Sites missing from
/// the finite graph count as empty or occupied according to `boundary`; with
/// [`Boundary::Empty`] tree leaves are always unconstrained.
#[inline]
pub fn constraint_satisfied(
    spec: &ModelSpec,
    g: &SiteGraph,
    eta: &SpinConfig,
    x: usize,
    boundary: Boundary,
) -> bool {
    let mut empty = empty_children(g, eta, x, boundary);
    if spec.family == Family::Fa {
        if let Some(par) = g.parent(x) {
            empty += usize::from(!eta.get(par));
        }
    }
    empty >= spec.j
}

/// Bernoulli(p) product sample over the vertices of `g`.
pub fn sample_config<R: Rng + ?Sized>(p: f64, g: &SiteGraph, rng: &mut R) -> SpinConfig {
    sample_bits(p, g.num_vertices(), rng)
}

pub(crate) fn sample_bits<R: Rng + ?Sized>(p: f64, n: usize, rng: &mut R) -> SpinConfig {
    let mut c = SpinConfig::zeros(n);
    if p >= 1.0 {
        return SpinConfig::ones(n);
    }
    if p > 0.0 {
        for x in 0..n {
            if rng.random::<f64>() < p {
                c.set(x, true);
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_stream;

    #[test]
    fn rooted_tree_sizes() {
        let g = build_graph(GraphKind::RootedTree { depth: 0 }, 2).unwrap();
        assert_eq!(g.num_vertices(), 1);
        assert!(g.children(0).is_empty());
        let g = build_graph(GraphKind::RootedTree { depth: 3 }, 2).unwrap();
        assert_eq!(g.num_vertices(), 15);
        assert_eq!(g.children(0), &[1, 2]);
        assert_eq!(g.children(1), &[3, 4]);
        assert_eq!(g.parent(6), Some(2));
        assert_eq!(g.level_range(3), 7..15);
        for k in 1..=4 {
            for depth in 0..=5 {
                let kind = GraphKind::RootedTree { depth };
                let g = build_graph(kind, k).unwrap();
                let expected = if k == 1 {
                    depth + 1
                } else {
                    (k.pow(depth as u32 + 1) - 1) / (k - 1)
                };
                assert_eq!(g.num_vertices(), expected);
                for x in 1..g.num_vertices() {
                    let par = g.parent(x).unwrap();
                    assert!(g.children(par).contains(&(x as u32)));
                    assert_eq!(g.depth(x), g.depth(par) + 1);
                }
                for x in 0..g.num_vertices() {
                    assert_eq!(g.is_leaf(x), g.depth(x) == depth);
                }
            }
        }
    }

    #[test]
    fn unrooted_tree_centre_has_k_plus_one_branches() {
        let g = build_graph(GraphKind::UnrootedTree { depth: 2 }, 2).unwrap();
        assert_eq!(g.num_vertices(), 10);
        assert_eq!(g.children(0).len(), 3);
        assert_eq!(g.nominal_children(0), 3);
        for x in 1..4 {
            assert_eq!(g.children(x).len(), 2);
            assert_eq!(g.neighbors(x).len(), 3);
        }
        assert_eq!(vertex_count(GraphKind::UnrootedTree { depth: 3 }, 3), 1 + 4 * 13);
    }

    #[test]
    fn triangle_side_two() {
        let g = build_graph(GraphKind::Triangle { side: 2 }, 0).unwrap();
        let coords: Vec<_> = (0..g.num_vertices()).map(|x| g.coords(x).unwrap()).collect();
        assert_eq!(coords, vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
        // east then north
        assert_eq!(g.children(0), &[1, 2]);
        assert_eq!(g.children(1), &[3, 4]);
        assert!(g.children(5).is_empty());
        assert_eq!(g.site_at(1, 1), Some(4));
        assert_eq!(g.site_at(2, 1), None);
        let mut n = g.neighbors(4);
        n.sort();
        assert_eq!(n, vec![1, 2]);
    }

    #[test]
    fn vertex_cap_is_enforced() {
        let err = build_graph(GraphKind::RootedTree { depth: 40 }, 2).unwrap_err();
        assert!(matches!(err, Error::ResourceCap { .. }));
        let err = build_graph_with_cap(GraphKind::RootedTree { depth: 3 }, 2, 14).unwrap_err();
        assert!(matches!(err, Error::ResourceCap { requested: 15, .. }));
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::ofa(2, 3, 0.5).is_err());
        assert!(ModelSpec::ofa(2, 0, 0.5).is_err());
        assert!(ModelSpec::fa(2, 2, 1.5).is_err());
        let ne = ModelSpec::north_east(0.4).unwrap();
        assert_eq!((ne.k, ne.j), (2, 2));
        let tri = build_graph(GraphKind::Triangle { side: 3 }, 0).unwrap();
        let tree = build_graph(GraphKind::RootedTree { depth: 2 }, 2).unwrap();
        assert!(ne.check_graph(&tri).is_ok());
        assert!(ne.check_graph(&tree).is_err());
        assert!(ModelSpec::ofa(2, 2, 0.3).unwrap().check_graph(&tri).is_err());
        assert!(ModelSpec::ofa(3, 2, 0.3).unwrap().check_graph(&tree).is_err());
    }

    #[test]
    fn ofa_constraint_examples() {
        let spec = ModelSpec::ofa(2, 2, 0.5).unwrap();
        let g = build_graph(GraphKind::RootedTree { depth: 1 }, 2).unwrap();
        let both_empty = SpinConfig::from_bits(3, 0b001);
        let one_empty = SpinConfig::from_bits(3, 0b101);
        assert!(constraint_satisfied(&spec, &g, &both_empty, 0, Boundary::Empty));
        assert!(!constraint_satisfied(&spec, &g, &one_empty, 0, Boundary::Empty));
        // leaves are unconstrained with the empty boundary
        let full = SpinConfig::ones(3);
        assert!(constraint_satisfied(&spec, &g, &full, 1, Boundary::Empty));
        assert!(!constraint_satisfied(&spec, &g, &full, 1, Boundary::Filled));
    }

    #[test]
    fn ne_constraint_boundary() {
        let spec = ModelSpec::north_east(0.5).unwrap();
        let g = build_graph(GraphKind::Triangle { side: 2 }, 0).unwrap();
        let full = SpinConfig::ones(6);
        assert!(constraint_satisfied(&spec, &g, &full, 5, Boundary::Empty));
        assert!(!constraint_satisfied(&spec, &g, &full, 5, Boundary::Filled));
        assert!(!constraint_satisfied(&spec, &g, &full, 0, Boundary::Empty));
        let mut eta = SpinConfig::zeros(6);
        eta.set(2, true); // north of the origin
        assert!(!constraint_satisfied(&spec, &g, &eta, 0, Boundary::Empty));
        assert!(constraint_satisfied(&spec, &g, &eta, 1, Boundary::Empty));
    }

    #[test]
    fn fa_constraint_counts_parent() {
        let spec = ModelSpec::fa(2, 2, 0.5).unwrap();
        let g = build_graph(GraphKind::UnrootedTree { depth: 2 }, 2).unwrap();
        // vertex 1: parent 0, children 4 and 5
        let mut eta = SpinConfig::ones(10);
        eta.set(0, false);
        assert!(!constraint_satisfied(&spec, &g, &eta, 1, Boundary::Empty));
        eta.set(4, false);
        assert!(constraint_satisfied(&spec, &g, &eta, 1, Boundary::Empty));
    }

    #[test]
    fn sampling_extremes_and_reproducibility() {
        let g = build_graph(GraphKind::RootedTree { depth: 3 }, 2).unwrap();
        let mut rng = seeded_stream(7, 0);
        assert_eq!(sample_config(0.0, &g, &mut rng), SpinConfig::zeros(15));
        assert_eq!(sample_config(1.0, &g, &mut rng), SpinConfig::ones(15));
        let a = sample_config(0.4, &g, &mut seeded_stream(11, 3));
        let b = sample_config(0.4, &g, &mut seeded_stream(11, 3));
        assert_eq!(a, b);
    }

    #[test]
    fn sampling_mean_concentrates() {
        let g = build_graph(GraphKind::RootedTree { depth: 3 }, 2).unwrap();
        let mut rng = seeded_stream(2024, 0);
        let n = 100_000;
        let mut counts = vec![0usize; 15];
        for _ in 0..n {
            let c = sample_config(0.5, &g, &mut rng);
            for x in c.occupied_sites() {
                counts[x] += 1;
            }
        }
        let tol = 3.0 * (0.25f64 / n as f64).sqrt();
        // per-site 3-sigma band, with room for the 15 comparisons
        for c in counts {
            assert!((c as f64 / n as f64 - 0.5).abs() < 1.5 * tol);
        }
    }

    #[test]
    fn spin_config_bits() {
        let mut c = SpinConfig::zeros(70);
        c.set(69, true);
        c.set(3, true);
        assert_eq!(c.count_occupied(), 2);
        c.flip(3);
        assert!(!c.get(3));
        assert_eq!(SpinConfig::ones(70).count_occupied(), 70);
        assert!(c.is_below(&SpinConfig::ones(70)));
        assert!(!SpinConfig::ones(70).is_below(&c));
        let s = SpinConfig::from_bits(5, 0b11111_11111);
        assert_eq!(s.to_bits(), 0b11111);
    }
}
