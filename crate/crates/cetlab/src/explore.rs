//! Exhaustive exploration of network tiers at small leaf counts: two
//! independent enumeration methods, move graphs, connectivity and diameter
//! reports, exact move distances, metric-axiom checks, and the cross-tier
//! reticulation-descent replay.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::canon::CanonicalCode;
use crate::graph::{LeafLabel, MixedGraph, VertexId};
use crate::moves::{
    apply_cet_minus, cet_minus_neighbors, cet_neighbors_rooted, cet_neighbors_semidirected,
    cet_plus_neighbors, is_cet1, Move,
};
use crate::network::{LevelClass, RootedNetwork, SemiDirectedNetwork};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExploreError {
    #[error("cap exceeded: {0}")]
    CapExceeded(String),
    #[error("targets are not connected under the requested moves")]
    Unreachable,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("enumeration methods disagree on {0}")]
    MethodsDisagree(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NetKind {
    Rooted,
    SemiDirected,
}

/// Class bound of a tier; a tier contains every network whose class is
/// within the bound (so an almost-level-1 tier includes the level-1 ones).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TierClass {
    Level1,
    AlmostLevel1,
    All,
}

impl TierClass {
    fn admits(self, class: LevelClass) -> bool {
        match self {
            TierClass::Level1 => class.within(LevelClass::Level1),
            TierClass::AlmostLevel1 => class.within(LevelClass::AlmostLevel1),
            TierClass::All => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tier {
    pub kind: NetKind,
    pub leaves: Vec<LeafLabel>,
    pub k: usize,
    pub class: TierClass,
}

impl Tier {
    pub fn new(
        kind: NetKind,
        mut leaves: Vec<LeafLabel>,
        k: usize,
        class: TierClass,
    ) -> Result<Self, ExploreError> {
        leaves.sort();
        leaves.dedup();
        let n = leaves.len();
        if n < 2 {
            return Err(ExploreError::Unsupported(
                "tiers need at least two leaves".into(),
            ));
        }
        if class != TierClass::All && k > n - 1 {
            return Err(ExploreError::CapExceeded(format!(
                "k = {k} exceeds the level-1 bound {}",
                n - 1
            )));
        }
        Ok(Tier {
            kind,
            leaves,
            k,
            class,
        })
    }

    pub fn describe(&self) -> String {
        format!(
            "{} n={} k={} class={:?}",
            match self.kind {
                NetKind::Rooted => "rooted",
                NetKind::SemiDirected => "semidirected",
            },
            self.leaves.len(),
            self.k,
            self.class
        )
    }
}

/// Enumeration and search caps; exceeding one aborts with `CapExceeded`
/// instead of thrashing.
#[derive(Debug, Clone, Copy)]
pub struct ExploreLimits {
    pub max_leaves: usize,
    pub max_k: usize,
    pub max_nodes: usize,
}

impl Default for ExploreLimits {
    fn default() -> Self {
        ExploreLimits {
            max_leaves: 5,
            max_k: 4,
            max_nodes: 2_000_000,
        }
    }
}

fn check_limits(t: &Tier, limits: &ExploreLimits) -> Result<(), ExploreError> {
    if t.leaves.len() > limits.max_leaves {
        return Err(ExploreError::CapExceeded(format!(
            "{} leaves exceeds the cap {}",
            t.leaves.len(),
            limits.max_leaves
        )));
    }
    if t.k > limits.max_k {
        return Err(ExploreError::CapExceeded(format!(
            "k = {} exceeds the cap {}",
            t.k, limits.max_k
        )));
    }
    Ok(())
}

/// Leaf set {x1..xn}.
pub fn default_leaves(n: usize) -> Vec<LeafLabel> {
    (1..=n)
        .map(|i| LeafLabel::new(&format!("x{i}")).unwrap())
        .collect()
}

// ---------------------------------------------------------------------------
// Trees
// ---------------------------------------------------------------------------

/// All unrooted binary trees on the leaf set, one per isomorphism class, by
/// stepwise leaf insertion.
pub fn unrooted_trees(leaves: &[LeafLabel]) -> Vec<SemiDirectedNetwork> {
    assert!(leaves.len() >= 2);
    let mut g0 = MixedGraph::new();
    let a = g0.add_leaf(leaves[0].clone());
    let b = g0.add_leaf(leaves[1].clone());
    g0.add_undirected(a, b);
    let mut graphs = vec![g0];
    for label in &leaves[2..] {
        let mut next = Vec::new();
        for g in &graphs {
            let edges: Vec<_> = g.edges().map(|(e, _)| e).collect();
            for e in edges {
                let mut h = g.clone();
                let (w, _, _) = h.subdivide_semi(e);
                let x = h.add_leaf(label.clone());
                h.add_undirected(w, x);
                next.push(h);
            }
        }
        graphs = next;
    }
    graphs
        .into_iter()
        .map(|g| SemiDirectedNetwork::validate(g).expect("tree insertion yields valid networks"))
        .collect()
}

// ---------------------------------------------------------------------------
// Method A: closure of reticulation insertions from the trees
// ---------------------------------------------------------------------------

type SemiTierMap = BTreeMap<CanonicalCode, SemiDirectedNetwork>;
type RootedTierMap = BTreeMap<CanonicalCode, RootedNetwork>;

static SEMI_CACHE: Lazy<Mutex<HashMap<String, Arc<SemiTierMap>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));
static ROOTED_CACHE: Lazy<Mutex<HashMap<String, Arc<RootedTierMap>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn tier_key(t: &Tier) -> String {
    let labels: Vec<&str> = t.leaves.iter().map(|l| l.as_str()).collect();
    format!("{:?}|{:?}|{}|{:?}", t.kind, labels, t.k, t.class)
}

/// Enumerates a semi-directed tier as the k-fold closure of reticulation
/// insertions from all unrooted trees, keeping intermediates inside the
/// tier class. Results are memoized per tier for the process lifetime.
pub fn enumerate_semi_tier(
    t: &Tier,
    limits: &ExploreLimits,
) -> Result<Arc<SemiTierMap>, ExploreError> {
    assert_eq!(t.kind, NetKind::SemiDirected);
    check_limits(t, limits)?;
    let key = tier_key(t);
    if let Some(hit) = SEMI_CACHE.lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let built = Arc::new(enumerate_semi_tier_uncached(t, limits)?);
    SEMI_CACHE
        .lock()
        .unwrap()
        .entry(key)
        .or_insert_with(|| built.clone());
    Ok(built)
}

fn enumerate_semi_tier_uncached(
    t: &Tier,
    limits: &ExploreLimits,
) -> Result<SemiTierMap, ExploreError> {
    let mut level: BTreeMap<CanonicalCode, SemiDirectedNetwork> = unrooted_trees(&t.leaves)
        .into_iter()
        .map(|n| (n.canonical_code().clone(), n))
        .collect();
    for _step in 0..t.k {
        let nets: Vec<&SemiDirectedNetwork> = level.values().collect();
        let found: Vec<(CanonicalCode, SemiDirectedNetwork)> = nets
            .par_iter()
            .flat_map_iter(|n| {
                cet_plus_neighbors(n)
                    .into_iter()
                    .filter(|(_, r)| t.class.admits(r.level_class()))
                    .map(|(_, r)| (r.canonical_code().clone(), r))
                    .collect::<Vec<_>>()
            })
            .collect();
        let mut next = BTreeMap::new();
        for (code, net) in found {
            next.entry(code).or_insert(net);
        }
        if next.len() > limits.max_nodes {
            return Err(ExploreError::CapExceeded(format!(
                "tier exceeds {} networks",
                limits.max_nodes
            )));
        }
        level = next;
    }
    Ok(level)
}

/// Rooted tiers come from the rooted partners of the matching semi-directed
/// tier, filtered by class.
pub fn enumerate_rooted_tier(
    t: &Tier,
    limits: &ExploreLimits,
) -> Result<Arc<RootedTierMap>, ExploreError> {
    assert_eq!(t.kind, NetKind::Rooted);
    let key = tier_key(t);
    if let Some(hit) = ROOTED_CACHE.lock().unwrap().get(&key) {
        return Ok(hit.clone());
    }
    let semi = Tier {
        kind: NetKind::SemiDirected,
        leaves: t.leaves.clone(),
        k: t.k,
        class: t.class,
    };
    let base = enumerate_semi_tier(&semi, limits)?;
    let nets: Vec<&SemiDirectedNetwork> = base.values().collect();
    let found: Vec<(CanonicalCode, RootedNetwork)> = nets
        .par_iter()
        .flat_map_iter(|n| {
            n.rooted_partners()
                .into_iter()
                .filter(|p| t.class.admits(p.level_class()))
                .map(|p| (p.canonical_code().clone(), p))
                .collect::<Vec<_>>()
        })
        .collect();
    let mut out = BTreeMap::new();
    for (code, net) in found {
        out.entry(code).or_insert(net);
    }
    let out = Arc::new(out);
    ROOTED_CACHE
        .lock()
        .unwrap()
        .entry(key)
        .or_insert_with(|| out.clone());
    Ok(out)
}

// ---------------------------------------------------------------------------
// Method B: direct construction from the counting identities
// ---------------------------------------------------------------------------

/// Enumerates a semi-directed tier independently of the move engine:
/// generates every connected multigraph with the degree profile implied by
/// the counting identities, assigns reticulation directions, validates, and
/// distributes leaf labels.
pub fn enumerate_semi_tier_direct(
    t: &Tier,
    limits: &ExploreLimits,
) -> Result<BTreeMap<CanonicalCode, SemiDirectedNetwork>, ExploreError> {
    assert_eq!(t.kind, NetKind::SemiDirected);
    check_limits(t, limits)?;
    let n = t.leaves.len();
    let k = t.k;
    let internal = n + 2 * k - 2;
    let mut out: BTreeMap<CanonicalCode, SemiDirectedNetwork> = BTreeMap::new();

    if internal == 0 {
        // Two leaves, no reticulation: the single-edge tree.
        let mut g = MixedGraph::new();
        let a = g.add_leaf(t.leaves[0].clone());
        let b = g.add_leaf(t.leaves[1].clone());
        g.add_undirected(a, b);
        let net = SemiDirectedNetwork::validate(g).expect("two-leaf tree");
        out.insert(net.canonical_code().clone(), net);
        return Ok(out);
    }

    let mut shapes = Vec::new();
    let mut gen = ShapeGen {
        internal,
        leaves: n,
        k,
        edges: Vec::new(),
        free: {
            let mut f = vec![3u8; internal];
            f.extend(std::iter::repeat(1u8).take(n));
            f
        },
        active: 1,
        loops: 0,
        pairs: 0,
        out: &mut shapes,
    };
    gen.run();

    for shape in &shapes {
        for directed in direction_assignments(shape, internal, k) {
            let rep = materialize(shape, &directed, internal, &t.leaves, None);
            let Ok(net) = SemiDirectedNetwork::validate(rep) else {
                continue;
            };
            if !t.class.admits(net.level_class()) {
                continue;
            }
            // Validity and class are label-independent; only the codes
            // change under leaf permutations.
            let perms = permutations(n);
            for perm in &perms {
                let g = materialize(shape, &directed, internal, &t.leaves, Some(perm));
                let relabeled = SemiDirectedNetwork::assume_valid(g);
                let code = relabeled.canonical_code().clone();
                out.entry(code).or_insert(relabeled);
                if out.len() > limits.max_nodes {
                    return Err(ExploreError::CapExceeded(format!(
                        "tier exceeds {} networks",
                        limits.max_nodes
                    )));
                }
            }
        }
    }
    Ok(out)
}

/// Underlying multigraph shapes: vertices 0..internal are degree 3 (a loop
/// uses two slots), the rest are degree-1 leaf stubs. New internal vertices
/// activate in index order and the smallest unfinished active vertex is
/// always extended, which makes every shape reachable while pruning most
/// relabelings.
struct ShapeGen<'a> {
    internal: usize,
    leaves: usize,
    k: usize,
    edges: Vec<(usize, usize)>,
    free: Vec<u8>,
    active: usize,
    loops: usize,
    pairs: usize,
    out: &'a mut Vec<Vec<(usize, usize)>>,
}

impl ShapeGen<'_> {
    fn run(&mut self) {
        let v = (0..self.active).find(|&v| self.free[v] > 0);
        let Some(v) = v else {
            if self.active == self.internal
                && self.free.iter().all(|&f| f == 0)
                && self.connected()
            {
                self.out.push(self.edges.clone());
            }
            return;
        };

        // Feasibility: leaf stubs can only attach to internal slots.
        let free_internal: usize = self.free[..self.internal].iter().map(|&f| f as usize).sum();
        let free_leaves: usize = self.free[self.internal..].iter().map(|&f| f as usize).sum();
        if free_internal < free_leaves {
            return;
        }

        // Loop on v; every loop and every parallel pair needs its own
        // reticulation, bounding both by k.
        if self.free[v] >= 2 && self.loops == 0 && self.loops + self.pairs < self.k {
            self.free[v] -= 2;
            self.loops += 1;
            self.edges.push((v, v));
            if !self.closed_fragment(v) {
                self.run();
            }
            self.edges.pop();
            self.loops -= 1;
            self.free[v] += 2;
        }
        // Other active internal vertices, at most two parallel edges.
        for u in 0..self.active {
            if u == v || self.free[u] == 0 {
                continue;
            }
            let pair = (v.min(u), v.max(u));
            let existing = self.edges.iter().filter(|&&e| e == pair).count();
            if existing >= 2 {
                continue;
            }
            if existing == 1 {
                if self.loops + self.pairs >= self.k {
                    continue;
                }
                self.pairs += 1;
                self.step(pair);
                self.pairs -= 1;
            } else {
                self.step(pair);
            }
        }
        // The next fresh internal vertex.
        if self.active < self.internal {
            let u = self.active;
            self.active += 1;
            self.step((v.min(u), v.max(u)));
            self.active -= 1;
        }
        // One representative leaf stub; labels are distributed afterwards.
        if let Some(leaf) = (self.internal..self.internal + self.leaves)
            .find(|&l| self.free[l] > 0)
        {
            self.step((v, leaf));
        }
    }

    fn step(&mut self, pair: (usize, usize)) {
        self.free[pair.0] -= 1;
        self.free[pair.1] -= 1;
        self.edges.push(pair);
        if !self.closed_fragment(pair.0) {
            self.run();
        }
        self.edges.pop();
        self.free[pair.0] += 1;
        self.free[pair.1] += 1;
    }

    /// True if the component of `v` has no free slots left while vertices
    /// outside it remain: such a fragment can never reconnect.
    fn closed_fragment(&self, v: usize) -> bool {
        let total = self.internal + self.leaves;
        let mut seen = vec![false; total];
        let mut stack = vec![v];
        seen[v] = true;
        let mut size = 1usize;
        let mut free = self.free[v] as usize;
        while let Some(x) = stack.pop() {
            for &(a, b) in &self.edges {
                for (s, t) in [(a, b), (b, a)] {
                    if s == x && !seen[t] {
                        seen[t] = true;
                        size += 1;
                        free += self.free[t] as usize;
                        stack.push(t);
                    }
                }
            }
        }
        free == 0 && size < total
    }

    fn connected(&self) -> bool {
        let total = self.internal + self.leaves;
        let mut seen = vec![false; total];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &(a, b) in &self.edges {
                for (x, y) in [(a, b), (b, a)] {
                    if x == v && !seen[y] {
                        seen[y] = true;
                        count += 1;
                        stack.push(y);
                    }
                }
            }
        }
        count == total
    }
}

/// All ways to choose reticulations and their two in-edges on a shape.
/// Returns, per assignment, the directed edge occurrences as
/// `(edge_index, head_vertex)`.
///
/// A reticulation's two in-edges are always the two edges some simple cycle
/// uses at that vertex (they share a block, and two edges of a block at one
/// vertex lie on a common cycle), and every cycle of a valid network has a
/// sink. So the assignments are exactly the edge-conflict-free choices of k
/// sink candidates that cover every cycle, which is a much smaller search
/// than picking reticulations freely.
fn direction_assignments(
    shape: &[(usize, usize)],
    internal: usize,
    k: usize,
) -> Vec<Vec<(usize, usize)>> {
    let loop_count = shape.iter().filter(|(a, b)| a == b).count();
    if loop_count > k || loop_count > 1 {
        return Vec::new();
    }
    let need = k - loop_count;

    // Cycle analysis on an unlabeled copy.
    let mut g = MixedGraph::new();
    let verts: Vec<VertexId> = (0..internal + shape.len()).map(|_| g.add_vertex()).collect();
    // Wasteful vertex count is fine; only indices below `internal + leaves`
    // occur in shapes.
    for &(a, b) in shape {
        if a == b {
            g.add_directed(verts[a], verts[a]);
        } else {
            g.add_undirected(verts[a], verts[b]);
        }
    }
    let cycles: Vec<crate::cycles::Cycle> = crate::cycles::simple_cycles(&g)
        .into_iter()
        .filter(|c| c.len() >= 2)
        .collect();
    if cycles.len() > 64 {
        // Far beyond anything a valid network can carry at this scale.
        return Vec::new();
    }

    #[derive(Clone, Copy)]
    struct Cand {
        v: usize,
        e1: usize,
        e2: usize,
        covers: u64,
    }
    let mut cands: Vec<Cand> = Vec::new();
    for (ci, c) in cycles.iter().enumerate() {
        for &vid in &c.vertices {
            let v = vid.0 as usize;
            let at: Vec<usize> = c
                .edges
                .iter()
                .map(|e| e.0 as usize)
                .filter(|&ei| shape[ei].0 == v || shape[ei].1 == v)
                .collect();
            if at.len() != 2 {
                continue;
            }
            let (e1, e2) = (at[0].min(at[1]), at[0].max(at[1]));
            match cands.iter_mut().find(|cd| cd.v == v && cd.e1 == e1 && cd.e2 == e2) {
                Some(cd) => cd.covers |= 1 << ci,
                None => cands.push(Cand {
                    v,
                    e1,
                    e2,
                    covers: 1 << ci,
                }),
            }
        }
    }
    let full: u64 = if cycles.is_empty() {
        0
    } else {
        (1u64 << cycles.len()) - 1
    };

    fn search(
        cands: &[Cand],
        full: u64,
        covered: u64,
        need: usize,
        chosen: &mut Vec<usize>,
        min_free: usize,
        out: &mut BTreeSet<Vec<usize>>,
    ) {
        if need == 0 {
            if covered == full {
                let mut sorted = chosen.clone();
                sorted.sort_unstable();
                out.insert(sorted);
            }
            return;
        }
        let conflict = |i: usize, chosen: &[usize]| {
            chosen.iter().any(|&j| {
                let (a, b) = (&cands[i], &cands[j]);
                a.v == b.v
                    || a.e1 == b.e1
                    || a.e1 == b.e2
                    || a.e2 == b.e1
                    || a.e2 == b.e2
            })
        };
        if covered != full {
            let first_uncovered = (0..64).find(|i| full & (1 << i) != 0 && covered & (1 << i) == 0);
            let Some(ci) = first_uncovered else { return };
            for i in 0..cands.len() {
                if cands[i].covers & (1 << ci) == 0 || conflict(i, chosen) {
                    continue;
                }
                chosen.push(i);
                search(cands, full, covered | cands[i].covers, need - 1, chosen, 0, out);
                chosen.pop();
            }
        } else {
            // All cycles covered; the remaining reticulations sit anywhere
            // conflict-free, enumerated in index order.
            for i in min_free..cands.len() {
                if conflict(i, chosen) {
                    continue;
                }
                chosen.push(i);
                search(cands, full, covered, need - 1, chosen, i + 1, out);
                chosen.pop();
            }
        }
    }

    let mut sets = BTreeSet::new();
    if need == 0 {
        // Without free reticulations every non-loop cycle stays sinkless.
        if full == 0 {
            sets.insert(Vec::new());
        }
    } else {
        let mut chosen = Vec::new();
        search(&cands, full, 0, need, &mut chosen, 0, &mut sets);
    }

    sets.into_iter()
        .map(|set| {
            set.into_iter()
                .flat_map(|i| {
                    let c = cands[i];
                    [(c.e1, c.v), (c.e2, c.v)]
                })
                .collect()
        })
        .collect()
}

fn materialize(
    shape: &[(usize, usize)],
    directed: &[(usize, usize)],
    internal: usize,
    leaves: &[LeafLabel],
    perm: Option<&[usize]>,
) -> MixedGraph {
    let mut g = MixedGraph::new();
    let verts: Vec<VertexId> = (0..internal).map(|_| g.add_vertex()).collect();
    let leaf_verts: Vec<VertexId> = (0..leaves.len())
        .map(|i| {
            let idx = perm.map(|p| p[i]).unwrap_or(i);
            g.add_leaf(leaves[idx].clone())
        })
        .collect();
    let vid = |i: usize| {
        if i < internal {
            verts[i]
        } else {
            leaf_verts[i - internal]
        }
    };
    for (i, &(a, b)) in shape.iter().enumerate() {
        if a == b {
            g.add_directed(vid(a), vid(a));
            continue;
        }
        match directed.iter().find(|(e, _)| *e == i) {
            Some(&(_, head)) => {
                let tail = if a == head { b } else { a };
                g.add_directed(vid(tail), vid(head));
            }
            None => {
                g.add_undirected(vid(a), vid(b));
            }
        }
    }
    g
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    permute(&mut cur, 0, &mut out);
    out
}

fn permute(cur: &mut Vec<usize>, at: usize, out: &mut Vec<Vec<usize>>) {
    if at == cur.len() {
        out.push(cur.clone());
        return;
    }
    for i in at..cur.len() {
        cur.swap(at, i);
        permute(cur, at + 1, out);
        cur.swap(at, i);
    }
}

/// Runs both enumeration methods and errors if they disagree.
pub fn enumerate_semi_tier_checked(
    t: &Tier,
    limits: &ExploreLimits,
) -> Result<Arc<SemiTierMap>, ExploreError> {
    let a = enumerate_semi_tier(t, limits)?;
    let b = enumerate_semi_tier_direct(t, limits)?;
    if a.keys().ne(b.keys()) {
        return Err(ExploreError::MethodsDisagree(format!(
            "{}: closure found {}, direct construction found {}",
            t.describe(),
            a.len(),
            b.len()
        )));
    }
    Ok(a)
}

// ---------------------------------------------------------------------------
// Space graphs
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MoveKind {
    Cet,
    Cet1,
    Extended,
}

/// Move graph over one tier (or over all reticulation counts for extended
/// moves): nodes are canonical codes, edges carry a witness move of the
/// stored representative.
pub struct SpaceGraph {
    pub tier: Tier,
    pub move_kind: MoveKind,
    pub nodes: Vec<CanonicalCode>,
    pub adjacency: BTreeMap<CanonicalCode, BTreeMap<CanonicalCode, Move>>,
    pub semi_reps: BTreeMap<CanonicalCode, SemiDirectedNetwork>,
    pub rooted_reps: BTreeMap<CanonicalCode, RootedNetwork>,
}

pub fn build_space_graph(
    t: &Tier,
    move_kind: MoveKind,
    limits: &ExploreLimits,
) -> Result<SpaceGraph, ExploreError> {
    match t.kind {
        NetKind::SemiDirected => build_semi_space_graph(t, move_kind, limits),
        NetKind::Rooted => build_rooted_space_graph(t, move_kind, limits),
    }
}

fn build_semi_space_graph(
    t: &Tier,
    move_kind: MoveKind,
    limits: &ExploreLimits,
) -> Result<SpaceGraph, ExploreError> {
    let mut reps: BTreeMap<CanonicalCode, SemiDirectedNetwork> = BTreeMap::new();
    match move_kind {
        MoveKind::Extended => {
            let n = t.leaves.len();
            for k in 0..=(n - 1).min(limits.max_k) {
                let tk = Tier {
                    k,
                    ..t.clone()
                };
                let tier_nets = enumerate_semi_tier(&tk, limits)?;
                reps.extend(tier_nets.iter().map(|(c, m)| (c.clone(), m.clone())));
            }
        }
        _ => {
            let tier_nets = enumerate_semi_tier(t, limits)?;
            reps.extend(tier_nets.iter().map(|(c, m)| (c.clone(), m.clone())));
        }
    }

    let codes: BTreeSet<CanonicalCode> = reps.keys().cloned().collect();
    let rows: Vec<(CanonicalCode, BTreeMap<CanonicalCode, Move>)> = reps
        .par_iter()
        .map(|(code, net)| {
            let mut row: BTreeMap<CanonicalCode, Move> = BTreeMap::new();
            let mut neighbors: Vec<(Move, SemiDirectedNetwork)> = Vec::new();
            match move_kind {
                MoveKind::Cet => neighbors.extend(cet_neighbors_semidirected(net)),
                MoveKind::Cet1 => neighbors.extend(
                    cet_neighbors_semidirected(net)
                        .into_iter()
                        .filter(|(m, _)| is_cet1(net, m).unwrap_or(false)),
                ),
                MoveKind::Extended => {
                    neighbors.extend(cet_neighbors_semidirected(net));
                    neighbors.extend(cet_plus_neighbors(net));
                    neighbors.extend(cet_minus_neighbors(net));
                }
            }
            for (mv, result) in neighbors {
                let rc = result.canonical_code().clone();
                if codes.contains(&rc) {
                    row.entry(rc).or_insert(mv);
                }
            }
            (code.clone(), row)
        })
        .collect();

    let adjacency: BTreeMap<_, _> = rows.into_iter().collect();
    Ok(SpaceGraph {
        tier: t.clone(),
        move_kind,
        nodes: reps.keys().cloned().collect(),
        adjacency,
        semi_reps: reps,
        rooted_reps: BTreeMap::new(),
    })
}

fn build_rooted_space_graph(
    t: &Tier,
    move_kind: MoveKind,
    limits: &ExploreLimits,
) -> Result<SpaceGraph, ExploreError> {
    if move_kind != MoveKind::Cet {
        return Err(ExploreError::Unsupported(
            "rooted space graphs support CET moves only".into(),
        ));
    }
    let reps: BTreeMap<CanonicalCode, RootedNetwork> = enumerate_rooted_tier(t, limits)?
        .iter()
        .map(|(c, m)| (c.clone(), m.clone()))
        .collect();
    let codes: BTreeSet<CanonicalCode> = reps.keys().cloned().collect();
    let rows: Vec<(CanonicalCode, BTreeMap<CanonicalCode, Move>)> = reps
        .par_iter()
        .map(|(code, net)| {
            let mut row: BTreeMap<CanonicalCode, Move> = BTreeMap::new();
            for (mv, result) in cet_neighbors_rooted(net) {
                let rc = result.canonical_code().clone();
                if codes.contains(&rc) {
                    row.entry(rc).or_insert(mv);
                }
            }
            (code.clone(), row)
        })
        .collect();
    let adjacency: BTreeMap<_, _> = rows.into_iter().collect();
    Ok(SpaceGraph {
        tier: t.clone(),
        move_kind,
        nodes: reps.keys().cloned().collect(),
        adjacency,
        semi_reps: BTreeMap::new(),
        rooted_reps: reps,
    })
}

impl SpaceGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(|r| r.len()).sum::<usize>() / 2
    }

    /// Adjacency is symmetric because every move is reversible; verified
    /// rather than forced.
    pub fn is_symmetric(&self) -> bool {
        self.adjacency.iter().all(|(a, row)| {
            row.keys()
                .all(|b| self.adjacency.get(b).map(|r| r.contains_key(a)).unwrap_or(false))
        })
    }

    /// Connected components as sorted code lists, themselves sorted by their
    /// smallest member.
    pub fn components(&self) -> Vec<Vec<CanonicalCode>> {
        let mut seen: BTreeSet<&CanonicalCode> = BTreeSet::new();
        let mut out = Vec::new();
        for start in &self.nodes {
            if seen.contains(start) {
                continue;
            }
            let mut comp = vec![start.clone()];
            seen.insert(start);
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                if let Some(row) = self.adjacency.get(v) {
                    for u in row.keys() {
                        if seen.insert(u) {
                            comp.push(u.clone());
                            queue.push_back(u);
                        }
                    }
                }
            }
            comp.sort();
            out.push(comp);
        }
        out.sort_by(|a, b| a[0].cmp(&b[0]));
        out
    }

    fn bfs_depths(&self, start: &CanonicalCode) -> HashMap<&CanonicalCode, usize> {
        let mut dist: HashMap<&CanonicalCode, usize> = HashMap::new();
        let (key, _) = self
            .adjacency
            .get_key_value(start)
            .expect("start node in graph");
        dist.insert(key, 0);
        let mut queue = VecDeque::from([key]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v];
            if let Some(row) = self.adjacency.get(v) {
                for (u, _) in row.iter() {
                    if !dist.contains_key(u) {
                        dist.insert(u, d + 1);
                        queue.push_back(u);
                    }
                }
            }
        }
        dist
    }

    /// Exact diameter by all-pairs breadth-first search; `None` when the
    /// graph is disconnected or empty.
    pub fn diameter(&self) -> Option<usize> {
        if self.nodes.is_empty() || self.components().len() != 1 {
            return None;
        }
        self.nodes
            .par_iter()
            .map(|s| self.bfs_depths(s).values().copied().max().unwrap_or(0))
            .max()
    }

    /// Distance between two member codes.
    pub fn distance(&self, a: &CanonicalCode, b: &CanonicalCode) -> Option<usize> {
        self.bfs_depths(a).get(b).copied()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConnectivityReport {
    pub tier: String,
    pub move_kind: MoveKind,
    pub node_count: usize,
    pub component_count: usize,
    pub diameter: Option<usize>,
    pub bound: Option<usize>,
    pub bound_satisfied: Option<bool>,
}

pub fn connectivity_report(g: &SpaceGraph) -> ConnectivityReport {
    let components = g.components();
    let diameter = g.diameter();
    let bound = match g.move_kind {
        MoveKind::Cet | MoveKind::Cet1 => Some(10 * g.tier.leaves.len() + 4 * g.tier.k),
        MoveKind::Extended => None,
    };
    let bound_satisfied = match (bound, diameter) {
        (Some(b), Some(d)) => Some(d <= b),
        _ => None,
    };
    ConnectivityReport {
        tier: g.tier.describe(),
        move_kind: g.move_kind,
        node_count: g.node_count(),
        component_count: components.len(),
        diameter,
        bound,
        bound_satisfied,
    }
}

// ---------------------------------------------------------------------------
// Distances in the implicit graph
// ---------------------------------------------------------------------------

/// Exact move distance by bidirectional breadth-first search over the
/// implicit move graph, with intermediates confined to `class_bound`.
pub fn move_distance(
    a: &SemiDirectedNetwork,
    b: &SemiDirectedNetwork,
    move_kind: MoveKind,
    class_bound: TierClass,
    limits: &ExploreLimits,
) -> Result<usize, ExploreError> {
    if a.leaf_set() != b.leaf_set() {
        return Err(ExploreError::Unsupported("leaf sets differ".into()));
    }
    if move_kind != MoveKind::Extended && a.reticulations().len() != b.reticulations().len() {
        return Err(ExploreError::Unreachable);
    }
    if !class_bound.admits(a.level_class()) || !class_bound.admits(b.level_class()) {
        return Err(ExploreError::Unsupported(
            "an endpoint lies outside the class bound".into(),
        ));
    }
    let max_k = a.leaves().len() - 1;

    let neighbors = |n: &SemiDirectedNetwork| -> Vec<SemiDirectedNetwork> {
        let mut out: Vec<SemiDirectedNetwork> = Vec::new();
        match move_kind {
            MoveKind::Cet => out.extend(cet_neighbors_semidirected(n).into_iter().map(|(_, r)| r)),
            MoveKind::Cet1 => out.extend(
                cet_neighbors_semidirected(n)
                    .into_iter()
                    .filter(|(m, _)| is_cet1(n, m).unwrap_or(false))
                    .map(|(_, r)| r),
            ),
            MoveKind::Extended => {
                out.extend(cet_neighbors_semidirected(n).into_iter().map(|(_, r)| r));
                out.extend(cet_plus_neighbors(n).into_iter().map(|(_, r)| r));
                out.extend(cet_minus_neighbors(n).into_iter().map(|(_, r)| r));
            }
        }
        out.retain(|r| class_bound.admits(r.level_class()) && r.reticulations().len() <= max_k);
        out
    };

    if a.canonical_code() == b.canonical_code() {
        return Ok(0);
    }
    let mut dist_a: HashMap<CanonicalCode, usize> =
        HashMap::from([(a.canonical_code().clone(), 0)]);
    let mut dist_b: HashMap<CanonicalCode, usize> =
        HashMap::from([(b.canonical_code().clone(), 0)]);
    let mut front_a: Vec<SemiDirectedNetwork> = vec![a.clone()];
    let mut front_b: Vec<SemiDirectedNetwork> = vec![b.clone()];
    let mut depth_a = 0usize;
    let mut depth_b = 0usize;

    loop {
        if front_a.is_empty() && front_b.is_empty() {
            return Err(ExploreError::Unreachable);
        }
        let expand_a = !front_a.is_empty() && (front_a.len() <= front_b.len() || front_b.is_empty());
        let (front, dist, other, depth) = if expand_a {
            depth_a += 1;
            (&mut front_a, &mut dist_a, &dist_b, depth_a)
        } else {
            depth_b += 1;
            (&mut front_b, &mut dist_b, &dist_a, depth_b)
        };
        let expansions: Vec<Vec<SemiDirectedNetwork>> = front
            .par_iter()
            .map(|n| neighbors(n))
            .collect();
        let mut next = Vec::new();
        for group in expansions {
            for r in group {
                let code = r.canonical_code().clone();
                if dist.contains_key(&code) {
                    continue;
                }
                if let Some(d_other) = other.get(&code) {
                    return Ok(depth + d_other);
                }
                dist.insert(code, depth);
                next.push(r);
            }
        }
        if dist_a.len() + dist_b.len() > limits.max_nodes {
            return Err(ExploreError::CapExceeded(
                "distance search exceeded the node cap".into(),
            ));
        }
        *front = next;
    }
}

// ---------------------------------------------------------------------------
// Metric axioms
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    pub class: TierClass,
    pub node_count: usize,
    pub pairs_checked: usize,
    pub triples_checked: usize,
    pub violations: Vec<String>,
}

/// Checks identity of indiscernibles, symmetry, and the triangle inequality
/// for the extended move distance over every pair and triple of networks on
/// the leaf set.
pub fn verify_metric_axioms(
    leaves: &[LeafLabel],
    class: TierClass,
    limits: &ExploreLimits,
) -> Result<MetricReport, ExploreError> {
    let tier = Tier::new(NetKind::SemiDirected, leaves.to_vec(), 0, class)?;
    let g = build_space_graph(&tier, MoveKind::Extended, limits)?;
    let n = g.nodes.len();
    let mut violations = Vec::new();

    // All-pairs distances via BFS from every node.
    let dists: Vec<Vec<Option<usize>>> = g
        .nodes
        .par_iter()
        .map(|s| {
            let d = g.bfs_depths(s);
            g.nodes.iter().map(|t| d.get(t).copied()).collect()
        })
        .collect();

    let mut pairs = 0usize;
    for i in 0..n {
        if dists[i][i] != Some(0) {
            violations.push(format!("d(a,a) != 0 at node {i}"));
        }
        for j in 0..n {
            if i == j {
                continue;
            }
            pairs += 1;
            match dists[i][j] {
                None => violations.push(format!("nodes {i},{j} are not connected")),
                Some(0) => violations.push(format!("distinct nodes {i},{j} at distance 0")),
                Some(d) => {
                    if dists[j][i] != Some(d) {
                        violations.push(format!("asymmetry between nodes {i},{j}"));
                    }
                }
            }
        }
    }
    let mut triples = 0usize;
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                let (Some(dij), Some(djl), Some(dil)) = (dists[i][j], dists[j][l], dists[i][l])
                else {
                    continue;
                };
                triples += 1;
                if dil > dij + djl {
                    violations.push(format!("triangle violation at nodes {i},{j},{l}"));
                }
            }
        }
    }
    Ok(MetricReport {
        class,
        node_count: n,
        pairs_checked: pairs,
        triples_checked: triples,
        violations,
    })
}

// ---------------------------------------------------------------------------
// Cross-tier descent
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct AcrossTiersReport {
    pub class: TierClass,
    pub networks_checked: usize,
    pub extended_components: usize,
    pub descent_failures: Vec<String>,
}

/// Replays the reticulation-descent argument: from every network of the
/// class, k reticulation deletions (in an order where no earlier target is
/// a descendant of a later one in a rooted partner) reach a tree, with every
/// intermediate staying in the class. Also checks that the extended move
/// graph over all reticulation counts is connected.
pub fn verify_across_tiers(
    leaves: &[LeafLabel],
    class: TierClass,
    limits: &ExploreLimits,
) -> Result<AcrossTiersReport, ExploreError> {
    let tier = Tier::new(NetKind::SemiDirected, leaves.to_vec(), 0, class)?;
    let g = build_space_graph(&tier, MoveKind::Extended, limits)?;
    let components = g.components().len();

    let failures: Vec<String> = g
        .semi_reps
        .par_iter()
        .filter_map(|(code, net)| {
            descend_to_tree(net, class).err().map(|e| {
                format!("descent failed from {}: {e}", code.short_hex())
            })
        })
        .collect();

    Ok(AcrossTiersReport {
        class,
        networks_checked: g.semi_reps.len(),
        extended_components: components,
        descent_failures: failures,
    })
}

/// Deletes the reticulations one by one in partner-descendant order,
/// verifying class membership after every step and that exactly k steps
/// reach a tree.
pub fn descend_to_tree(
    n: &SemiDirectedNetwork,
    class: TierClass,
) -> Result<Vec<SemiDirectedNetwork>, String> {
    let partners = n.rooted_partners();
    let partner = partners.first().ok_or("no rooted partner")?;
    let mut retics = n.reticulations();
    // Ancestors first: later targets are never ancestors of earlier ones.
    retics.sort_by_key(|&v| partner.depth(v));

    let k = retics.len();
    let mut cur = n.clone();
    let mut out = Vec::new();
    for (step, v) in retics.iter().enumerate() {
        let mut in_edges: Vec<_> = cur
            .graph()
            .edges()
            .filter(|(_, kind)| match kind {
                crate::graph::EdgeKind::Directed { head, .. } => head == v,
                _ => false,
            })
            .map(|(e, _)| e)
            .collect();
        in_edges.sort();
        let mut applied = None;
        for e in in_edges {
            if let Ok(outcome) = apply_cet_minus(&cur, &Move::CetMinus { ret_edge: e }) {
                applied = Some(outcome.network);
                break;
            }
        }
        let next = applied.ok_or_else(|| format!("no deletable in-edge at step {step}"))?;
        if !class.admits(next.level_class()) {
            return Err(format!("step {step} leaves the class"));
        }
        cur = next;
        out.push(cur.clone());
    }
    if out.len() != k {
        return Err("descent did not take exactly k steps".into());
    }
    if !cur.reticulations().is_empty() {
        return Err("descent did not reach a tree".into());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::testnets::*;

    fn semi_tier(n: usize, k: usize, class: TierClass) -> Tier {
        Tier::new(NetKind::SemiDirected, default_leaves(n), k, class).unwrap()
    }

    #[test]
    fn tree_counts_match_double_factorial() {
        // (2n-5)!! trees: 1, 3, 15 for n = 3, 4, 5.
        for (n, want) in [(3usize, 1usize), (4, 3), (5, 15)] {
            let trees = unrooted_trees(&default_leaves(n));
            let mut codes: Vec<_> = trees.iter().map(|t| t.canonical_code().clone()).collect();
            codes.sort();
            codes.dedup();
            assert_eq!(codes.len(), want, "n = {n}");
        }
    }

    #[test]
    fn both_methods_agree_on_small_tiers() {
        let limits = ExploreLimits::default();
        for n in 2..=3usize {
            for k in 0..n {
                for class in [TierClass::Level1, TierClass::AlmostLevel1, TierClass::All] {
                    let t = semi_tier(n, k, class);
                    enumerate_semi_tier_checked(&t, &limits).unwrap();
                }
            }
        }
    }

    #[test]
    fn two_leaf_one_reticulation_tier_sizes() {
        let limits = ExploreLimits::default();
        let level1 = enumerate_semi_tier(&semi_tier(2, 1, TierClass::Level1), &limits).unwrap();
        assert_eq!(level1.len(), 2);
        let almost =
            enumerate_semi_tier(&semi_tier(2, 1, TierClass::AlmostLevel1), &limits).unwrap();
        assert_eq!(almost.len(), 3);
        assert!(almost.contains_key(semi_loop().canonical_code()));
        assert!(level1.contains_key(semi_parallel_pair(false).canonical_code()));
        assert!(level1.contains_key(semi_parallel_pair(true).canonical_code()));
    }

    #[test]
    fn quartet_space_under_cet_is_k3() {
        let limits = ExploreLimits::default();
        let g = build_space_graph(&semi_tier(4, 0, TierClass::Level1), MoveKind::Cet, &limits)
            .unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 3);
        assert!(g.is_symmetric());
        let report = connectivity_report(&g);
        assert_eq!(report.component_count, 1);
        assert_eq!(report.diameter, Some(1));
    }

    #[test]
    fn saturated_two_leaf_tier_is_disconnected_under_cet() {
        let limits = ExploreLimits::default();
        let g = build_space_graph(&semi_tier(2, 1, TierClass::Level1), MoveKind::Cet, &limits)
            .unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.components().len(), 2);
        let almost = build_space_graph(
            &semi_tier(2, 1, TierClass::AlmostLevel1),
            MoveKind::Cet,
            &limits,
        )
        .unwrap();
        assert_eq!(almost.components().len(), 1);
    }

    #[test]
    fn distance_between_swapped_parallel_pairs_is_two() {
        let limits = ExploreLimits::default();
        let a = semi_parallel_pair(false);
        let b = semi_parallel_pair(true);
        assert_eq!(
            move_distance(&a, &b, MoveKind::Cet, TierClass::AlmostLevel1, &limits).unwrap(),
            2
        );
        assert_eq!(
            move_distance(&a, &b, MoveKind::Cet, TierClass::Level1, &limits),
            Err(ExploreError::Unreachable)
        );
        assert_eq!(
            move_distance(&a, &a, MoveKind::Cet, TierClass::Level1, &limits).unwrap(),
            0
        );
    }

    #[test]
    fn descent_reaches_a_tree_in_k_steps() {
        let nets = descend_to_tree(&semi_parallel_pair(false), TierClass::Level1).unwrap();
        assert_eq!(nets.len(), 1);
        assert!(nets[0].is_isomorphic(&semi_two_leaf_tree()));
        let nets = descend_to_tree(&semi_loop(), TierClass::All).unwrap();
        assert_eq!(nets.len(), 1);
    }

    #[test]
    fn metric_axioms_hold_for_two_leaves() {
        let limits = ExploreLimits::default();
        let report =
            verify_metric_axioms(&default_leaves(2), TierClass::All, &limits).unwrap();
        assert!(report.violations.is_empty(), "{:?}", report.violations);
        assert_eq!(report.node_count, 4);
    }

    #[test]
    fn across_tiers_three_leaves_connected() {
        let limits = ExploreLimits::default();
        let report =
            verify_across_tiers(&default_leaves(3), TierClass::Level1, &limits).unwrap();
        assert_eq!(report.extended_components, 1);
        assert!(report.descent_failures.is_empty(), "{:?}", report.descent_failures);
    }

    #[test]
    fn rooted_tier_enumeration_contains_partners() {
        let limits = ExploreLimits::default();
        let t = Tier::new(NetKind::Rooted, default_leaves(2), 1, TierClass::Level1).unwrap();
        let reps = enumerate_rooted_tier(&t, &limits).unwrap();
        assert!(reps.contains_key(rooted_triangle().canonical_code()));
        for net in reps.values() {
            assert_eq!(net.level_class(), LevelClass::Level1);
            assert_eq!(net.count_invariants().reticulations, 1);
        }
    }

    #[test]
    fn caps_are_enforced() {
        let limits = ExploreLimits {
            max_leaves: 3,
            ..Default::default()
        };
        let t = semi_tier(4, 0, TierClass::Level1);
        assert!(matches!(
            enumerate_semi_tier(&t, &limits),
            Err(ExploreError::CapExceeded(_))
        ));
    }
}
