//! Rooted and semi-directed binary phylogenetic networks: structural
//! validation, rooted/semi-directed conversion, partner enumeration, level
//! classification, cut edges, counting identities, and canonical codes.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use once_cell::sync::OnceCell;
use thiserror::Error;

use crate::canon::{canonical_form, CanonicalCode, LabelMode};
use crate::cycles::{bridges, simple_cycles, Cycle};
use crate::graph::{EdgeId, EdgeKind, LeafLabel, MixedGraph, VertexId};

pub const ROOTED_TAG: u8 = b'R';
pub const SEMI_TAG: u8 = b'S';

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ValidationError {
    #[error("directed cycle present")]
    NotAcyclic,
    #[error("root {0} does not have in-degree 0 and out-degree 1")]
    BadRootDegree(VertexId),
    #[error("vertex {0} violates the binary degree rules")]
    BadVertexDegree(VertexId),
    #[error("vertex {0} has out-degree zero but no leaf label")]
    UnlabeledLeaf(VertexId),
    #[error("leaf label {0} used more than once")]
    DuplicateLabel(LeafLabel),
    #[error("edge {0} is a loop, which rooted networks forbid")]
    HasLoop(EdgeId),
    #[error("edge {0} is undirected, which rooted networks forbid")]
    StrayUndirectedEdge(EdgeId),
    #[error("edge {0} is an undirected loop; loops must be directed")]
    UndirectedLoop(EdgeId),
    #[error("vertex {0} violates the leaf/internal degree rules")]
    BadDegree(VertexId),
    #[error("vertex {0} has directed in-degree other than 0 or 2")]
    BadReticulationInDegree(VertexId),
    #[error("edge {0} is directed out of a leaf")]
    StrayDirectedEdge(EdgeId),
    #[error("no rooted partner exists")]
    NoRootedPartner,
}

/// Tightest cycle-structure class of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LevelClass {
    Level1,
    AlmostLevel1,
    Neither,
}

impl LevelClass {
    /// Whether this class satisfies a bound (`Level1` networks are also
    /// almost level-1).
    pub fn within(self, bound: LevelClass) -> bool {
        match bound {
            LevelClass::Level1 => self == LevelClass::Level1,
            LevelClass::AlmostLevel1 => {
                matches!(self, LevelClass::Level1 | LevelClass::AlmostLevel1)
            }
            LevelClass::Neither => true,
        }
    }
}

impl std::fmt::Display for LevelClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LevelClass::Level1 => write!(f, "level-1"),
            LevelClass::AlmostLevel1 => write!(f, "almost-level-1"),
            LevelClass::Neither => write!(f, "neither"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountInvariants {
    pub vertices: usize,
    pub edges: usize,
    pub reticulations: usize,
    pub tree_vertices: usize,
    pub leaves: usize,
}

/// Validated rooted binary phylogenetic network.
#[derive(Debug, Clone)]
pub struct RootedNetwork {
    graph: MixedGraph,
    root: VertexId,
    code: OnceCell<CanonicalCode>,
    shape: OnceCell<CanonicalCode>,
    cycles: OnceCell<Vec<Cycle>>,
    class: OnceCell<LevelClass>,
}

/// Validated semi-directed binary phylogenetic network.
#[derive(Debug, Clone)]
pub struct SemiDirectedNetwork {
    graph: MixedGraph,
    code: OnceCell<CanonicalCode>,
    shape: OnceCell<CanonicalCode>,
    cycles: OnceCell<Vec<Cycle>>,
    class: OnceCell<LevelClass>,
}

fn check_labels_injective(g: &MixedGraph) -> Result<(), ValidationError> {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for (_, l) in g.labeled_vertices() {
        if !seen.insert(l.as_str()) {
            return Err(ValidationError::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

fn directed_acyclic(g: &MixedGraph) -> bool {
    let cap = g.vertices().map(|v| v.0 as usize + 1).max().unwrap_or(0);
    let mut indeg = vec![0usize; cap];
    for (_, k) in g.edges() {
        if let EdgeKind::Directed { head, .. } = k {
            indeg[head.0 as usize] += 1;
        }
    }
    let mut queue: VecDeque<VertexId> = g
        .vertices()
        .filter(|v| indeg[v.0 as usize] == 0)
        .collect();
    let mut seen = 0usize;
    let mut removed = vec![false; cap];
    while let Some(v) = queue.pop_front() {
        seen += 1;
        removed[v.0 as usize] = true;
        for (_, k) in g.edges() {
            if let EdgeKind::Directed { tail, head } = k {
                if tail == v && !removed[head.0 as usize] {
                    indeg[head.0 as usize] -= 1;
                    if indeg[head.0 as usize] == 0 {
                        queue.push_back(head);
                    }
                }
            }
        }
    }
    seen == g.vertex_count()
}

impl RootedNetwork {
    /// Validates the rooted-network invariants; reports the first violation
    /// in a fixed order (edge shape, degrees, labels, acyclicity).
    pub fn validate(graph: MixedGraph, root: VertexId) -> Result<Self, ValidationError> {
        let mut edge_ids: Vec<EdgeId> = graph.edges().map(|(e, _)| e).collect();
        edge_ids.sort();
        for &e in &edge_ids {
            let k = graph.edge(e);
            if !k.is_directed() {
                return Err(ValidationError::StrayUndirectedEdge(e));
            }
            if k.is_loop() {
                return Err(ValidationError::HasLoop(e));
            }
        }

        if !graph.has_vertex(root) {
            return Err(ValidationError::BadRootDegree(root));
        }
        if graph.directed_in_degree(root) != 0 || graph.directed_out_degree(root) != 1 {
            return Err(ValidationError::BadRootDegree(root));
        }

        let mut verts: Vec<VertexId> = graph.vertices().collect();
        verts.sort();
        for &v in &verts {
            if v == root {
                continue;
            }
            let (din, dout) = (graph.directed_in_degree(v), graph.directed_out_degree(v));
            match (din, dout) {
                (1, 0) => {
                    if graph.label(v).is_none() {
                        return Err(ValidationError::UnlabeledLeaf(v));
                    }
                }
                (1, 2) | (2, 1) => {
                    if graph.label(v).is_some() {
                        return Err(ValidationError::BadVertexDegree(v));
                    }
                }
                _ => return Err(ValidationError::BadVertexDegree(v)),
            }
        }
        if graph.label(root).is_some() {
            return Err(ValidationError::BadRootDegree(root));
        }

        check_labels_injective(&graph)?;

        if !directed_acyclic(&graph) {
            return Err(ValidationError::NotAcyclic);
        }

        Ok(RootedNetwork {
            graph,
            root,
            code: OnceCell::new(),
            shape: OnceCell::new(),
            cycles: OnceCell::new(),
            class: OnceCell::new(),
        })
    }

    pub fn graph(&self) -> &MixedGraph {
        &self.graph
    }

    pub fn root(&self) -> VertexId {
        self.root
    }

    /// The unique child of the root.
    pub fn root_child(&self) -> VertexId {
        self.graph
            .edges()
            .find_map(|(_, k)| match k {
                EdgeKind::Directed { tail, head } if tail == self.root => Some(head),
                _ => None,
            })
            .expect("validated root has one out-edge")
    }

    /// The edge incident with the root.
    pub fn root_edge(&self) -> EdgeId {
        self.graph
            .edges()
            .find_map(|(e, k)| match k {
                EdgeKind::Directed { tail, .. } if tail == self.root => Some(e),
                _ => None,
            })
            .expect("validated root has one out-edge")
    }

    pub fn is_reticulation(&self, v: VertexId) -> bool {
        self.graph.directed_in_degree(v) == 2
    }

    pub fn reticulations(&self) -> Vec<VertexId> {
        let mut out: Vec<VertexId> = self
            .graph
            .vertices()
            .filter(|&v| self.is_reticulation(v))
            .collect();
        out.sort();
        out
    }

    pub fn leaves(&self) -> Vec<(VertexId, LeafLabel)> {
        let mut out: Vec<(VertexId, LeafLabel)> = self
            .graph
            .labeled_vertices()
            .map(|(v, l)| (v, l.clone()))
            .collect();
        out.sort_by(|a, b| a.1.cmp(&b.1));
        out
    }

    pub fn leaf_set(&self) -> BTreeSet<LeafLabel> {
        self.leaves().into_iter().map(|(_, l)| l).collect()
    }

    pub fn count_invariants(&self) -> CountInvariants {
        let leaves = self.graph.labeled_vertices().count();
        let reticulations = self.reticulations().len();
        let tree_vertices = self
            .graph
            .vertices()
            .filter(|&v| {
                self.graph.directed_in_degree(v) == 1 && self.graph.directed_out_degree(v) == 2
            })
            .count();
        CountInvariants {
            vertices: self.graph.vertex_count(),
            edges: self.graph.edge_count(),
            reticulations,
            tree_vertices,
            leaves,
        }
    }

    pub fn underlying_cycles(&self) -> &[Cycle] {
        self.cycles.get_or_init(|| simple_cycles(&self.graph))
    }

    pub fn cut_edges(&self) -> Vec<EdgeId> {
        bridges(&self.graph)
    }

    pub fn level_class(&self) -> LevelClass {
        *self
            .class
            .get_or_init(|| classify_cycles(self.underlying_cycles(), false))
    }

    pub fn canonical_code(&self) -> &CanonicalCode {
        self.code
            .get_or_init(|| canonical_form(&self.graph, ROOTED_TAG, LabelMode::Respect, &[]).code)
    }

    /// Canonical code of the label-stripped structure.
    pub fn shape_code(&self) -> &CanonicalCode {
        self.shape
            .get_or_init(|| canonical_form(&self.graph, ROOTED_TAG, LabelMode::Ignore, &[]).code)
    }

    pub fn is_isomorphic(&self, other: &RootedNetwork) -> bool {
        self.canonical_code() == other.canonical_code()
    }

    /// Directed descendants of `v`, excluding `v` itself.
    pub fn descendants(&self, v: VertexId) -> HashSet<VertexId> {
        let mut out = HashSet::new();
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            for (_, k) in self.graph.edges() {
                if let EdgeKind::Directed { tail, head } = k {
                    if tail == u && !out.contains(&head) && head != v {
                        out.insert(head);
                        stack.push(head);
                    }
                }
            }
        }
        out
    }

    pub fn is_descendant(&self, candidate: VertexId, of: VertexId) -> bool {
        self.descendants(of).contains(&candidate)
    }

    /// Shortest directed distance from the root.
    pub fn depth(&self, v: VertexId) -> usize {
        let mut dist: HashMap<VertexId, usize> = HashMap::new();
        dist.insert(self.root, 0);
        let mut q = VecDeque::from([self.root]);
        while let Some(u) = q.pop_front() {
            if u == v {
                break;
            }
            for (_, k) in self.graph.edges() {
                if let EdgeKind::Directed { tail, head } = k {
                    if tail == u && !dist.contains_key(&head) {
                        dist.insert(head, dist[&u] + 1);
                        q.push_back(head);
                    }
                }
            }
        }
        dist[&v]
    }

    /// Canonical code of the sub-DAG hanging below `v` (inclusive), with `v`
    /// pinned. Deterministic tie-break key for cycle orderings.
    pub(crate) fn subtree_code(&self, v: VertexId) -> CanonicalCode {
        let mut keep = self.descendants(v);
        keep.insert(v);
        let mut g = MixedGraph::new();
        let mut map: HashMap<VertexId, VertexId> = HashMap::new();
        let mut sorted: Vec<VertexId> = keep.iter().copied().collect();
        sorted.sort();
        for u in sorted {
            let nu = g.add_vertex();
            if let Some(l) = self.graph.label(u) {
                g.set_label(nu, Some(l.clone()));
            }
            map.insert(u, nu);
        }
        for (_, k) in self.graph.edges() {
            if let EdgeKind::Directed { tail, head } = k {
                if keep.contains(&tail) && keep.contains(&head) {
                    g.add_directed(map[&tail], map[&head]);
                }
            }
        }
        canonical_form(&g, b'r', LabelMode::Respect, &[(map[&v], 0)]).code
    }

    /// Deletes the root, suppresses its child, and undirects all tree edges.
    ///
    /// Total on valid input with at least one reticulation or at least two
    /// leaves; the two-vertex network (one leaf, no reticulation) has no
    /// semi-directed counterpart and panics.
    pub fn deroot(&self) -> SemiDirectedNetwork {
        let retic: HashSet<VertexId> = self.reticulations().into_iter().collect();
        let t = self.root_child();
        assert!(
            self.graph.label(t).is_none(),
            "cannot deroot a network whose root child is a leaf"
        );
        let mut g = self.graph.clone();
        g.remove_vertex(self.root);
        let t_edges = g.incident_edges(t);
        assert_eq!(t_edges.len(), 2);
        let mut heads: Vec<VertexId> = Vec::new();
        for e in t_edges {
            match g.edge(e) {
                EdgeKind::Directed { tail, head } => {
                    assert_eq!(tail, t);
                    heads.push(head);
                }
                EdgeKind::Undirected { .. } => unreachable!("rooted networks are fully directed"),
            }
            g.remove_edge(e);
        }
        g.remove_vertex(t);
        let (a, b) = (heads[0], heads[1]);
        if a == b {
            g.add_directed(a, a);
        } else if retic.contains(&a) {
            assert!(!retic.contains(&b), "both merge endpoints are reticulations");
            g.add_directed(b, a);
        } else if retic.contains(&b) {
            g.add_directed(a, b);
        } else {
            g.add_undirected(a, b);
        }

        let directed: Vec<(EdgeId, VertexId, VertexId)> = g
            .edges()
            .filter_map(|(e, k)| match k {
                EdgeKind::Directed { tail, head } => Some((e, tail, head)),
                _ => None,
            })
            .collect();
        for (e, tail, head) in directed {
            if tail != head && !retic.contains(&head) {
                g.remove_edge(e);
                g.add_undirected(tail, head);
            }
        }

        SemiDirectedNetwork::validate(g).expect("deroot of a valid rooted network is valid")
    }
}

fn classify_cycles(cycles: &[Cycle], semi: bool) -> LevelClass {
    let mut seen: HashMap<VertexId, usize> = HashMap::new();
    for c in cycles {
        for &v in &c.vertices {
            *seen.entry(v).or_insert(0) += 1;
        }
    }
    if seen.values().any(|&n| n > 1) {
        return LevelClass::Neither;
    }
    let loops = cycles.iter().filter(|c| c.len() == 1).count();
    let twos = cycles.iter().filter(|c| c.len() == 2).count();
    if semi {
        // Structural rule for semi-directed networks; the definitional
        // partner-based classification lives on SemiDirectedNetwork.
        if loops == 0 && twos <= 1 {
            LevelClass::Level1
        } else if (loops == 0 && twos <= 2) || (loops == 1 && twos == 0) {
            LevelClass::AlmostLevel1
        } else {
            LevelClass::Neither
        }
    } else if loops == 0 && twos == 0 {
        LevelClass::Level1
    } else if loops == 0 && twos == 1 {
        LevelClass::AlmostLevel1
    } else {
        LevelClass::Neither
    }
}

/// Structural classification of a semi-directed graph's cycle system,
/// independent of partner enumeration. Used as a cross-check oracle.
pub fn classify_semi_structurally(n: &SemiDirectedNetwork) -> LevelClass {
    classify_cycles(n.underlying_cycles(), true)
}

impl SemiDirectedNetwork {
    /// Validates degree and direction rules, then requires a rooted partner.
    pub fn validate(graph: MixedGraph) -> Result<Self, ValidationError> {
        let mut edge_ids: Vec<EdgeId> = graph.edges().map(|(e, _)| e).collect();
        edge_ids.sort();
        for &e in &edge_ids {
            let k = graph.edge(e);
            if k.is_loop() && !k.is_directed() {
                return Err(ValidationError::UndirectedLoop(e));
            }
        }

        let mut verts: Vec<VertexId> = graph.vertices().collect();
        verts.sort();
        for &v in &verts {
            let deg = graph.degree(v);
            match graph.label(v) {
                Some(_) if deg != 1 => return Err(ValidationError::BadDegree(v)),
                None if deg != 3 => return Err(ValidationError::BadDegree(v)),
                _ => {}
            }
        }
        check_labels_injective(&graph)?;

        for &v in &verts {
            let din = graph.directed_in_degree(v);
            if din != 0 && din != 2 {
                return Err(ValidationError::BadReticulationInDegree(v));
            }
        }
        for &e in &edge_ids {
            if let EdgeKind::Directed { tail, head } = graph.edge(e) {
                if tail != head && graph.label(tail).is_some() {
                    return Err(ValidationError::StrayDirectedEdge(e));
                }
            }
        }

        // Every underlying cycle of a network with a rooted partner carries
        // a sink (both cycle edges directed into one vertex); checking that
        // first short-circuits the placement scan on most invalid graphs.
        if !every_cycle_has_sink(&graph) || !has_rooted_partner(&graph) {
            return Err(ValidationError::NoRootedPartner);
        }

        Ok(SemiDirectedNetwork {
            graph,
            code: OnceCell::new(),
            shape: OnceCell::new(),
            cycles: OnceCell::new(),
            class: OnceCell::new(),
        })
    }

    /// Wraps a graph known to satisfy the invariants (a leaf relabeling of
    /// an already validated network).
    pub(crate) fn assume_valid(graph: MixedGraph) -> Self {
        SemiDirectedNetwork {
            graph,
            code: OnceCell::new(),
            shape: OnceCell::new(),
            cycles: OnceCell::new(),
            class: OnceCell::new(),
        }
    }

    pub fn graph(&self) -> &MixedGraph {
        &self.graph
    }

    /// Reticulations: vertices with two incoming directed edges, a loop
    /// counting as both.
    pub fn is_reticulation(&self, v: VertexId) -> bool {
        self.graph.directed_in_degree(v) == 2
    }

    pub fn reticulations(&self) -> Vec<VertexId> {
        let mut out: Vec<VertexId> = self
            .graph
            .vertices()
            .filter(|&v| self.is_reticulation(v))
            .collect();
        out.sort();
        out
    }

    pub fn leaves(&self) -> Vec<(VertexId, LeafLabel)> {
        let mut out: Vec<(VertexId, LeafLabel)> = self
            .graph
            .labeled_vertices()
            .map(|(v, l)| (v, l.clone()))
            .collect();
        out.sort_by(|a, b| a.1.cmp(&b.1));
        out
    }

    pub fn leaf_set(&self) -> BTreeSet<LeafLabel> {
        self.leaves().into_iter().map(|(_, l)| l).collect()
    }

    pub fn count_invariants(&self) -> CountInvariants {
        let leaves = self.graph.labeled_vertices().count();
        let reticulations = self.reticulations().len();
        let tree_vertices = self
            .graph
            .vertices()
            .filter(|&v| self.graph.label(v).is_none() && !self.is_reticulation(v))
            .count();
        CountInvariants {
            vertices: self.graph.vertex_count(),
            edges: self.graph.edge_count(),
            reticulations,
            tree_vertices,
            leaves,
        }
    }

    pub fn underlying_cycles(&self) -> &[Cycle] {
        self.cycles.get_or_init(|| simple_cycles(&self.graph))
    }

    /// Bridges of the underlying multigraph. No reticulation edge is ever a
    /// bridge, which this asserts.
    pub fn cut_edges(&self) -> Vec<EdgeId> {
        let out = bridges(&self.graph);
        for &e in &out {
            assert!(
                !self.graph.edge(e).is_directed(),
                "cut edge {e} is a reticulation edge"
            );
        }
        out
    }

    pub fn canonical_code(&self) -> &CanonicalCode {
        self.code
            .get_or_init(|| canonical_form(&self.graph, SEMI_TAG, LabelMode::Respect, &[]).code)
    }

    pub fn shape_code(&self) -> &CanonicalCode {
        self.shape
            .get_or_init(|| canonical_form(&self.graph, SEMI_TAG, LabelMode::Ignore, &[]).code)
    }

    pub fn is_isomorphic(&self, other: &SemiDirectedNetwork) -> bool {
        self.canonical_code() == other.canonical_code()
    }

    /// Every validated root placement, without isomorphism deduplication.
    /// Vertex ids of the input are preserved in each partner, which is what
    /// the per-vertex cut-edge conditions on moves need.
    pub(crate) fn partners_raw(&self) -> Vec<RootedNetwork> {
        partner_candidates(&self.graph)
            .into_iter()
            .filter_map(|(g, r)| RootedNetwork::validate(g, r).ok())
            .collect()
    }

    /// All rooted partners, one representative per isomorphism class, in
    /// canonical-code order.
    pub fn rooted_partners(&self) -> Vec<RootedNetwork> {
        let mut by_code: BTreeMap<CanonicalCode, RootedNetwork> = BTreeMap::new();
        for cand in partner_candidates(&self.graph) {
            if let Ok(net) = RootedNetwork::validate(cand.0, cand.1) {
                by_code.entry(net.canonical_code().clone()).or_insert(net);
            }
        }
        by_code.into_values().collect()
    }

    /// Level-1 iff some rooted partner is level-1; almost level-1 iff some
    /// partner is almost level-1.
    pub fn level_class(&self) -> LevelClass {
        *self.class.get_or_init(|| {
            let mut best = LevelClass::Neither;
            for cand in partner_candidates(&self.graph) {
                if let Ok(net) = RootedNetwork::validate(cand.0, cand.1) {
                    match net.level_class() {
                        LevelClass::Level1 => return LevelClass::Level1,
                        LevelClass::AlmostLevel1 => best = LevelClass::AlmostLevel1,
                        LevelClass::Neither => {}
                    }
                }
            }
            best
        })
    }
}

/// Candidate rooted graphs from every root placement: the root edge
/// subdivides each edge in turn (the only placement tried for a graph with a
/// loop is above the loop), after which undirected edges are oriented by
/// constraint propagation.
fn partner_candidates(g: &MixedGraph) -> Vec<(MixedGraph, VertexId)> {
    let mut out = Vec::new();
    let loops: Vec<EdgeId> = g
        .edges()
        .filter(|(_, k)| k.is_loop())
        .map(|(e, _)| e)
        .collect();
    let hosts: Vec<EdgeId> = if loops.is_empty() {
        g.edges().map(|(e, _)| e).collect()
    } else {
        // Any placement that leaves a loop intact fails rooted validation.
        loops
    };
    for host in hosts {
        let mut cand = g.clone();
        let kind = cand.remove_edge(host);
        let t = cand.add_vertex();
        let (a, b) = kind.endpoints();
        cand.add_directed(t, a);
        cand.add_directed(t, b);
        let root = cand.add_vertex();
        cand.add_directed(root, t);
        for oriented in orient_away(&cand, root, t) {
            out.push((oriented, root));
        }
    }
    out
}

fn has_rooted_partner(g: &MixedGraph) -> bool {
    for (cand, root) in partner_candidates(g) {
        if RootedNetwork::validate(cand, root).is_ok() {
            return true;
        }
    }
    false
}

fn every_cycle_has_sink(g: &MixedGraph) -> bool {
    simple_cycles(g).iter().all(|c| {
        c.len() == 1
            || c.vertices.iter().any(|&v| {
                c.edges
                    .iter()
                    .filter(
                        |&&e| matches!(g.edge(e), EdgeKind::Directed { head, .. } if head == v),
                    )
                    .count()
                    == 2
            })
    })
}

/// Orients all undirected edges of a root-placement candidate so that every
/// vertex meets its required in/out degrees. Propagation is exact on valid
/// inputs; a branching fallback keeps the search total on arbitrary graphs.
fn orient_away(g: &MixedGraph, root: VertexId, root_child: VertexId) -> Vec<MixedGraph> {
    let vcap = g.vertices().map(|v| v.0 as usize + 1).max().unwrap_or(0);
    let ecap = g.edges().map(|(e, _)| e.0 as usize + 1).max().unwrap_or(0);

    // Required (in, out) per vertex slot; dead slots stay (0, 0).
    let mut req = vec![(0usize, 0usize); vcap];
    for v in g.vertices() {
        req[v.0 as usize] = if v == root {
            (0, 1)
        } else if v == root_child {
            (1, 2)
        } else if g.label(v).is_some() {
            (1, 0)
        } else if g.directed_in_degree(v) == 2 {
            (2, 1)
        } else {
            (1, 2)
        };
    }

    let mut fixed_in = vec![0usize; vcap];
    let mut fixed_out = vec![0usize; vcap];
    let mut undecided: Vec<EdgeId> = Vec::new();
    for (e, k) in g.edges() {
        match k {
            EdgeKind::Directed { tail, head } if tail == head => {
                fixed_in[head.0 as usize] += 2;
            }
            EdgeKind::Directed { tail, head } => {
                fixed_in[head.0 as usize] += 1;
                fixed_out[tail.0 as usize] += 1;
            }
            EdgeKind::Undirected { .. } => undecided.push(e),
        }
    }
    for v in g.vertices() {
        let i = v.0 as usize;
        if fixed_in[i] > req[i].0 || fixed_out[i] > req[i].1 {
            return Vec::new();
        }
    }

    struct Solver<'a> {
        g: &'a MixedGraph,
        req: Vec<(usize, usize)>,
        out: Vec<MixedGraph>,
    }

    impl Solver<'_> {
        fn solve(
            &mut self,
            mut fixed_in: Vec<usize>,
            mut fixed_out: Vec<usize>,
            mut decided: Vec<Option<(VertexId, VertexId)>>,
            mut undecided: Vec<EdgeId>,
        ) {
            loop {
                let mut progressed = false;
                let mut i = 0;
                while i < undecided.len() {
                    let e = undecided[i];
                    let (a, b) = self.g.edge(e).endpoints();
                    let (ai, bi) = (a.0 as usize, b.0 as usize);
                    // must point into a / into b, from slot saturation.
                    let into_a = fixed_out[ai] == self.req[ai].1 || fixed_in[bi] == self.req[bi].0;
                    let into_b = fixed_out[bi] == self.req[bi].1 || fixed_in[ai] == self.req[ai].0;
                    match (into_a, into_b) {
                        (true, true) => return,
                        (false, false) => {
                            i += 1;
                            continue;
                        }
                        _ => {}
                    }
                    let (tail, head) = if into_a { (b, a) } else { (a, b) };
                    let (ti, hi) = (tail.0 as usize, head.0 as usize);
                    fixed_in[hi] += 1;
                    fixed_out[ti] += 1;
                    if fixed_in[hi] > self.req[hi].0 || fixed_out[ti] > self.req[ti].1 {
                        return;
                    }
                    decided[e.0 as usize] = Some((tail, head));
                    undecided.swap_remove(i);
                    progressed = true;
                }
                if undecided.is_empty() {
                    let mut built = self.g.clone();
                    let todo: Vec<(EdgeId, (VertexId, VertexId))> = built
                        .edges()
                        .filter(|(_, k)| !k.is_directed())
                        .map(|(e, _)| (e, decided[e.0 as usize].expect("all edges decided")))
                        .collect();
                    for (e, (tail, head)) in todo {
                        built.remove_edge(e);
                        built.add_directed(tail, head);
                    }
                    self.out.push(built);
                    return;
                }
                if !progressed {
                    // Stuck: branch on the smallest undecided edge.
                    let e = *undecided.iter().min().unwrap();
                    let (a, b) = self.g.edge(e).endpoints();
                    for (tail, head) in [(a, b), (b, a)] {
                        let (ti, hi) = (tail.0 as usize, head.0 as usize);
                        if fixed_in[hi] + 1 > self.req[hi].0 || fixed_out[ti] + 1 > self.req[ti].1
                        {
                            continue;
                        }
                        let mut fi = fixed_in.clone();
                        let mut fo = fixed_out.clone();
                        fi[hi] += 1;
                        fo[ti] += 1;
                        let mut dec = decided.clone();
                        dec[e.0 as usize] = Some((tail, head));
                        let rest: Vec<EdgeId> =
                            undecided.iter().copied().filter(|&x| x != e).collect();
                        self.solve(fi, fo, dec, rest);
                    }
                    return;
                }
            }
        }
    }

    let mut solver = Solver {
        g,
        req,
        out: Vec::new(),
    };
    solver.solve(fixed_in, fixed_out, vec![None; ecap], undecided);
    solver.out
}

#[cfg(test)]
pub(crate) mod testnets {
    use super::*;

    pub fn lbl(s: &str) -> LeafLabel {
        LeafLabel::new(s).unwrap()
    }

    /// Rooted cherry on {x1, x2}.
    pub fn rooted_cherry() -> RootedNetwork {
        let mut g = MixedGraph::new();
        let root = g.add_vertex();
        let t = g.add_vertex();
        let x1 = g.add_leaf(lbl("x1"));
        let x2 = g.add_leaf(lbl("x2"));
        g.add_directed(root, t);
        g.add_directed(t, x1);
        g.add_directed(t, x2);
        RootedNetwork::validate(g, root).unwrap()
    }

    /// Rooted network on {x1, x2} whose root child is the source of a
    /// 3-cycle; one reticulation.
    pub fn rooted_triangle() -> RootedNetwork {
        let mut g = MixedGraph::new();
        let root = g.add_vertex();
        let t = g.add_vertex();
        let p = g.add_vertex();
        let r = g.add_vertex();
        let x1 = g.add_leaf(lbl("x1"));
        let x2 = g.add_leaf(lbl("x2"));
        g.add_directed(root, t);
        g.add_directed(t, p);
        g.add_directed(t, r);
        g.add_directed(p, r);
        g.add_directed(p, x1);
        g.add_directed(r, x2);
        RootedNetwork::validate(g, root).unwrap()
    }

    /// Semi-directed network on {x1, x2}: a parallel pair into r, pendant
    /// leaves on both sides. `swap` exchanges the leaf assignment.
    pub fn semi_parallel_pair(swap: bool) -> SemiDirectedNetwork {
        let mut g = MixedGraph::new();
        let p = g.add_vertex();
        let r = g.add_vertex();
        let (l1, l2) = if swap { ("x2", "x1") } else { ("x1", "x2") };
        let a = g.add_leaf(lbl(l1));
        let b = g.add_leaf(lbl(l2));
        g.add_directed(p, r);
        g.add_directed(p, r);
        g.add_undirected(p, a);
        g.add_undirected(r, b);
        SemiDirectedNetwork::validate(g).unwrap()
    }

    /// Semi-directed network on {x1, x2} with a single loop.
    pub fn semi_loop() -> SemiDirectedNetwork {
        let mut g = MixedGraph::new();
        let r = g.add_vertex();
        let s = g.add_vertex();
        let x1 = g.add_leaf(lbl("x1"));
        let x2 = g.add_leaf(lbl("x2"));
        g.add_directed(r, r);
        g.add_undirected(r, s);
        g.add_undirected(s, x1);
        g.add_undirected(s, x2);
        SemiDirectedNetwork::validate(g).unwrap()
    }

    /// Two-leaf semi-directed tree: a single undirected edge.
    pub fn semi_two_leaf_tree() -> SemiDirectedNetwork {
        let mut g = MixedGraph::new();
        let x1 = g.add_leaf(lbl("x1"));
        let x2 = g.add_leaf(lbl("x2"));
        g.add_undirected(x1, x2);
        SemiDirectedNetwork::validate(g).unwrap()
    }

    /// Unrooted quartet tree x1,x2 | x3,x4.
    pub fn semi_quartet() -> SemiDirectedNetwork {
        let mut g = MixedGraph::new();
        let a = g.add_vertex();
        let b = g.add_vertex();
        let x1 = g.add_leaf(lbl("x1"));
        let x2 = g.add_leaf(lbl("x2"));
        let x3 = g.add_leaf(lbl("x3"));
        let x4 = g.add_leaf(lbl("x4"));
        g.add_undirected(a, x1);
        g.add_undirected(a, x2);
        g.add_undirected(a, b);
        g.add_undirected(b, x3);
        g.add_undirected(b, x4);
        SemiDirectedNetwork::validate(g).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::testnets::*;
    use super::*;

    #[test]
    fn cherry_validates_with_no_reticulation() {
        let n = rooted_cherry();
        let c = n.count_invariants();
        assert_eq!(c.reticulations, 0);
        assert_eq!(c.vertices, 4);
        assert_eq!(c.edges, 3);
        assert_eq!(c.tree_vertices, 1);
        assert_eq!(n.level_class(), LevelClass::Level1);
    }

    #[test]
    fn triangle_partner_validates_with_one_reticulation() {
        let n = rooted_triangle();
        let c = n.count_invariants();
        assert_eq!(c.reticulations, 1);
        assert_eq!(c.vertices, 6);
        assert_eq!(c.edges, 6);
        assert_eq!(c.tree_vertices, 2);
        assert_eq!(n.level_class(), LevelClass::Level1);
    }

    #[test]
    fn root_out_degree_two_is_rejected() {
        let mut g = MixedGraph::new();
        let root = g.add_vertex();
        let x1 = g.add_leaf(lbl("x1"));
        let x2 = g.add_leaf(lbl("x2"));
        g.add_directed(root, x1);
        g.add_directed(root, x2);
        assert_eq!(
            RootedNetwork::validate(g, root).unwrap_err(),
            ValidationError::BadRootDegree(root)
        );
    }

    #[test]
    fn duplicate_labels_rejected() {
        let mut g = MixedGraph::new();
        let root = g.add_vertex();
        let t = g.add_vertex();
        let x1 = g.add_leaf(lbl("x1"));
        let x1b = g.add_leaf(lbl("x1"));
        g.add_directed(root, t);
        g.add_directed(t, x1);
        g.add_directed(t, x1b);
        assert_eq!(
            RootedNetwork::validate(g, root).unwrap_err(),
            ValidationError::DuplicateLabel(lbl("x1"))
        );
    }

    #[test]
    fn semi_parallel_pair_validates() {
        let n = semi_parallel_pair(false);
        assert_eq!(n.reticulations().len(), 1);
        let c = n.count_invariants();
        assert_eq!(c.vertices, 4);
        assert_eq!(c.edges, 4);
        assert_eq!(n.level_class(), LevelClass::Level1);
        let cycles = n.underlying_cycles();
        assert_eq!(cycles.len(), 1);
        assert_eq!(cycles[0].len(), 2);
        // Only the two pendant edges are bridges.
        assert_eq!(n.cut_edges().len(), 2);
    }

    #[test]
    fn deroot_of_triangle_is_parallel_pair() {
        let d = rooted_triangle().deroot();
        assert!(d.is_isomorphic(&semi_parallel_pair(false)) || d.is_isomorphic(&semi_parallel_pair(true)));
        assert_eq!(d.reticulations().len(), 1);
    }

    #[test]
    fn deroot_of_root_parallel_pair_has_loop() {
        let mut g = MixedGraph::new();
        let root = g.add_vertex();
        let t = g.add_vertex();
        let r = g.add_vertex();
        let s = g.add_vertex();
        let x1 = g.add_leaf(lbl("x1"));
        let x2 = g.add_leaf(lbl("x2"));
        g.add_directed(root, t);
        g.add_directed(t, r);
        g.add_directed(t, r);
        g.add_directed(r, s);
        g.add_directed(s, x1);
        g.add_directed(s, x2);
        let n = RootedNetwork::validate(g, root).unwrap();
        assert_eq!(n.level_class(), LevelClass::AlmostLevel1);
        let d = n.deroot();
        assert!(d.is_isomorphic(&semi_loop()));
    }

    #[test]
    fn loop_network_is_almost_level_one_with_unique_partner() {
        let n = semi_loop();
        assert_eq!(n.level_class(), LevelClass::AlmostLevel1);
        assert_eq!(n.rooted_partners().len(), 1);
    }

    #[test]
    fn three_leaf_star_deroot() {
        // Rooted caterpillar on three leaves deroots to the 3-leaf star.
        let mut g = MixedGraph::new();
        let root = g.add_vertex();
        let p3 = g.add_vertex();
        let p2 = g.add_vertex();
        let x1 = g.add_leaf(lbl("x1"));
        let x2 = g.add_leaf(lbl("x2"));
        let x3 = g.add_leaf(lbl("x3"));
        g.add_directed(root, p3);
        g.add_directed(p3, x3);
        g.add_directed(p3, p2);
        g.add_directed(p2, x1);
        g.add_directed(p2, x2);
        let n = RootedNetwork::validate(g, root).unwrap();
        let d = n.deroot();
        assert_eq!(d.count_invariants().vertices, 4);
        assert_eq!(d.cut_edges().len(), 3);
    }

    #[test]
    fn two_leaf_tree_has_one_partner() {
        let n = semi_two_leaf_tree();
        let ps = n.rooted_partners();
        assert_eq!(ps.len(), 1);
        assert!(ps[0].is_isomorphic(&rooted_cherry()));
    }

    #[test]
    fn parallel_pair_partners_contain_triangle() {
        let n = semi_parallel_pair(false);
        let ps = n.rooted_partners();
        assert!(ps.iter().any(|p| p.is_isomorphic(&rooted_triangle())));
        for p in &ps {
            assert!(p.deroot().is_isomorphic(&n));
        }
    }

    #[test]
    fn quartet_has_five_partners() {
        let n = semi_quartet();
        assert_eq!(n.rooted_partners().len(), 5);
    }

    #[test]
    fn head_to_head_four_cycle_has_no_partner() {
        let mut g = MixedGraph::new();
        let a = g.add_vertex();
        let b = g.add_vertex();
        let c = g.add_vertex();
        let d = g.add_vertex();
        let x1 = g.add_leaf(lbl("x1"));
        let x2 = g.add_leaf(lbl("x2"));
        let x3 = g.add_leaf(lbl("x3"));
        let x4 = g.add_leaf(lbl("x4"));
        g.add_directed(a, b);
        g.add_directed(c, b);
        g.add_directed(a, d);
        g.add_directed(c, d);
        g.add_undirected(a, x1);
        g.add_undirected(b, x3);
        g.add_undirected(c, x2);
        g.add_undirected(d, x4);
        assert_eq!(
            SemiDirectedNetwork::validate(g).unwrap_err(),
            ValidationError::NoRootedPartner
        );
    }

    #[test]
    fn undirected_loop_rejected() {
        let mut g = MixedGraph::new();
        let x1 = g.add_leaf(lbl("x1"));
        g.add_undirected(x1, x1);
        assert!(matches!(
            SemiDirectedNetwork::validate(g).unwrap_err(),
            ValidationError::UndirectedLoop(_)
        ));
    }

    #[test]
    fn leaf_swap_is_not_isomorphic() {
        let a = semi_parallel_pair(false);
        let b = semi_parallel_pair(true);
        assert!(!a.is_isomorphic(&b));
        assert_eq!(a.shape_code(), b.shape_code());
    }

    #[test]
    fn vertex_sharing_cycles_classify_as_neither() {
        // Two 3-cycles sharing their source: fails vertex-disjointness.
        let mut g = MixedGraph::new();
        let s = g.add_vertex();
        let p1 = g.add_vertex();
        let r1 = g.add_vertex();
        let p2 = g.add_vertex();
        let r2 = g.add_vertex();
        let x1 = g.add_leaf(lbl("x1"));
        let x2 = g.add_leaf(lbl("x2"));
        let x3 = g.add_leaf(lbl("x3"));
        // s sits on both cycles: degree 4, so this is not even a valid
        // semi-directed network; classify the raw cycle structure instead.
        g.add_undirected(s, p1);
        g.add_directed(s, r1);
        g.add_directed(p1, r1);
        g.add_undirected(s, p2);
        g.add_directed(s, r2);
        g.add_directed(p2, r2);
        g.add_undirected(r1, x1);
        g.add_undirected(r2, x2);
        g.add_undirected(p1, x3);
        let _ = (p2, x3);
        let cycles = crate::cycles::simple_cycles(&g);
        assert_eq!(super::classify_cycles(&cycles, true), LevelClass::Neither);
    }

    #[test]
    fn semi_degree_errors_reported() {
        let mut g = MixedGraph::new();
        let a = g.add_vertex();
        let x1 = g.add_leaf(lbl("x1"));
        g.add_undirected(a, x1);
        assert_eq!(
            SemiDirectedNetwork::validate(g).unwrap_err(),
            ValidationError::BadDegree(a)
        );
    }

    #[test]
    fn directed_edge_out_of_leaf_rejected() {
        let mut g = MixedGraph::new();
        let a = g.add_vertex();
        let c = g.add_vertex();
        let x1 = g.add_leaf(lbl("x1"));
        let x2 = g.add_leaf(lbl("x2"));
        let x3 = g.add_leaf(lbl("x3"));
        let x4 = g.add_leaf(lbl("x4"));
        g.add_directed(x3, a);
        g.add_directed(c, a);
        g.add_undirected(a, x1);
        g.add_undirected(c, x2);
        g.add_undirected(c, x4);
        let err = SemiDirectedNetwork::validate(g).unwrap_err();
        assert!(matches!(err, ValidationError::StrayDirectedEdge(_)));
    }
}
