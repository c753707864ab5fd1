//! Mixed multigraph storage: directed edges, undirected edges, parallel
//! edges, and directed loops, with the surgery primitives (subdivision,
//! suppression) that the rearrangement moves are built from.

use std::fmt;

use thiserror::Error;

/// Dense vertex handle. Stable within one graph value; never reused after
/// deletion within that value's lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

/// Dense edge handle with the same stability guarantee as [`VertexId`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeId(pub u32);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Leaf label: nonempty token over `[A-Za-z0-9_.-]`, unique within a network.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LeafLabel(String);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LabelError {
    #[error("leaf label must be nonempty")]
    Empty,
    #[error("leaf label {0:?} contains a character outside [A-Za-z0-9_.-]")]
    BadCharacter(String),
}

impl LeafLabel {
    pub fn new(name: &str) -> Result<Self, LabelError> {
        if name.is_empty() {
            return Err(LabelError::Empty);
        }
        if !name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'))
        {
            return Err(LabelError::BadCharacter(name.to_string()));
        }
        Ok(LeafLabel(name.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LeafLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Edge payload. Loops are stored as a single `Directed(v, v)` edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Directed { tail: VertexId, head: VertexId },
    Undirected { a: VertexId, b: VertexId },
}

impl EdgeKind {
    pub fn endpoints(&self) -> (VertexId, VertexId) {
        match *self {
            EdgeKind::Directed { tail, head } => (tail, head),
            EdgeKind::Undirected { a, b } => (a, b),
        }
    }

    pub fn is_directed(&self) -> bool {
        matches!(self, EdgeKind::Directed { .. })
    }

    pub fn is_loop(&self) -> bool {
        let (a, b) = self.endpoints();
        a == b
    }

    pub fn touches(&self, v: VertexId) -> bool {
        let (a, b) = self.endpoints();
        a == v || b == v
    }

    /// The endpoint that is not `v`. For a loop at `v`, returns `v` itself.
    pub fn other(&self, v: VertexId) -> VertexId {
        let (a, b) = self.endpoints();
        if a == v {
            b
        } else {
            debug_assert_eq!(b, v);
            a
        }
    }
}

#[derive(Debug, Clone)]
struct VertexSlot {
    label: Option<LeafLabel>,
}

/// Vertex/edge store supporting directed edges, undirected edges, parallel
/// edges, and directed loops. Labeled vertices are leaves; the kind-specific
/// degree and direction rules live in the validators, not here.
#[derive(Debug, Clone, Default)]
pub struct MixedGraph {
    verts: Vec<Option<VertexSlot>>,
    edges: Vec<Option<EdgeKind>>,
}

impl MixedGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_vertex(&mut self) -> VertexId {
        let id = VertexId(self.verts.len() as u32);
        self.verts.push(Some(VertexSlot { label: None }));
        id
    }

    pub fn add_leaf(&mut self, label: LeafLabel) -> VertexId {
        let id = self.add_vertex();
        self.verts[id.0 as usize].as_mut().unwrap().label = Some(label);
        id
    }

    pub fn set_label(&mut self, v: VertexId, label: Option<LeafLabel>) {
        self.verts[v.0 as usize].as_mut().unwrap().label = label;
    }

    pub fn add_directed(&mut self, tail: VertexId, head: VertexId) -> EdgeId {
        self.push_edge(EdgeKind::Directed { tail, head })
    }

    pub fn add_undirected(&mut self, a: VertexId, b: VertexId) -> EdgeId {
        self.push_edge(EdgeKind::Undirected { a, b })
    }

    fn push_edge(&mut self, kind: EdgeKind) -> EdgeId {
        let (a, b) = kind.endpoints();
        assert!(self.has_vertex(a) && self.has_vertex(b), "endpoint missing");
        let id = EdgeId(self.edges.len() as u32);
        self.edges.push(Some(kind));
        id
    }

    pub fn remove_edge(&mut self, e: EdgeId) -> EdgeKind {
        self.edges[e.0 as usize].take().expect("edge already removed")
    }

    /// Removes `v` together with every incident edge.
    pub fn remove_vertex(&mut self, v: VertexId) {
        assert!(self.has_vertex(v));
        for slot in self.edges.iter_mut() {
            if slot.map(|k| k.touches(v)).unwrap_or(false) {
                *slot = None;
            }
        }
        self.verts[v.0 as usize] = None;
    }

    pub fn has_vertex(&self, v: VertexId) -> bool {
        self.verts
            .get(v.0 as usize)
            .map(|s| s.is_some())
            .unwrap_or(false)
    }

    pub fn has_edge(&self, e: EdgeId) -> bool {
        self.edges
            .get(e.0 as usize)
            .map(|s| s.is_some())
            .unwrap_or(false)
    }

    pub fn edge(&self, e: EdgeId) -> EdgeKind {
        self.edges[e.0 as usize].expect("edge removed")
    }

    pub fn label(&self, v: VertexId) -> Option<&LeafLabel> {
        self.verts[v.0 as usize].as_ref().unwrap().label.as_ref()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.verts
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_some())
            .map(|(i, _)| VertexId(i as u32))
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeId, EdgeKind)> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.map(|k| (EdgeId(i as u32), k)))
    }

    pub fn vertex_count(&self) -> usize {
        self.verts.iter().filter(|s| s.is_some()).count()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().filter(|s| s.is_some()).count()
    }

    pub fn labeled_vertices(&self) -> impl Iterator<Item = (VertexId, &LeafLabel)> + '_ {
        self.verts.iter().enumerate().filter_map(|(i, s)| {
            s.as_ref()
                .and_then(|slot| slot.label.as_ref().map(|l| (VertexId(i as u32), l)))
        })
    }

    pub fn incident_edges(&self, v: VertexId) -> Vec<EdgeId> {
        self.edges()
            .filter(|(_, k)| k.touches(v))
            .map(|(e, _)| e)
            .collect()
    }

    /// Total degree; a loop contributes 2 to its vertex.
    pub fn degree(&self, v: VertexId) -> usize {
        self.edges()
            .map(|(_, k)| {
                let (a, b) = k.endpoints();
                (a == v) as usize + (b == v) as usize
            })
            .sum()
    }

    /// Directed in-degree; a loop contributes 2 (it counts as both of its
    /// vertex's incoming reticulation edges).
    pub fn directed_in_degree(&self, v: VertexId) -> usize {
        self.edges()
            .map(|(_, k)| match k {
                EdgeKind::Directed { tail, head } if tail == head && head == v => 2,
                EdgeKind::Directed { head, .. } if head == v => 1,
                _ => 0,
            })
            .sum()
    }

    pub fn directed_out_degree(&self, v: VertexId) -> usize {
        self.edges()
            .filter(|(_, k)| match k {
                EdgeKind::Directed { tail, head } => *tail == v && tail != head,
                _ => false,
            })
            .count()
    }

    pub fn undirected_degree(&self, v: VertexId) -> usize {
        self.edges()
            .filter(|(_, k)| !k.is_directed() && k.touches(v))
            .count()
    }

    pub fn find_leaf(&self, label: &LeafLabel) -> Option<VertexId> {
        self.labeled_vertices()
            .find(|(_, l)| *l == label)
            .map(|(v, _)| v)
    }

    /// Connected components of the underlying multigraph, ignoring edge
    /// directions. Loops do not affect connectivity.
    pub fn components(&self) -> Vec<Vec<VertexId>> {
        let mut seen: Vec<bool> = vec![false; self.verts.len()];
        let mut out = Vec::new();
        for start in self.vertices() {
            if seen[start.0 as usize] {
                continue;
            }
            let mut comp = Vec::new();
            let mut stack = vec![start];
            seen[start.0 as usize] = true;
            while let Some(v) = stack.pop() {
                comp.push(v);
                for (_, k) in self.edges() {
                    if k.touches(v) {
                        let u = k.other(v);
                        if !seen[u.0 as usize] {
                            seen[u.0 as usize] = true;
                            stack.push(u);
                        }
                    }
                }
            }
            comp.sort();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// Subdivides `e` with a fresh vertex in a directed-network context:
    /// both halves of a directed edge stay directed through the new vertex.
    pub fn subdivide_rooted(&mut self, e: EdgeId) -> (VertexId, EdgeId, EdgeId) {
        let kind = self.remove_edge(e);
        let w = self.add_vertex();
        match kind {
            EdgeKind::Directed { tail, head } => {
                assert_ne!(tail, head, "cannot subdivide a loop in a rooted network");
                let e1 = self.add_directed(tail, w);
                let e2 = self.add_directed(w, head);
                (w, e1, e2)
            }
            EdgeKind::Undirected { .. } => panic!("rooted networks have no undirected edges"),
        }
    }

    /// Subdivides `e` with a fresh vertex in a semi-directed context.
    ///
    /// An undirected edge splits into two undirected halves. A directed edge
    /// `(a, b)` splits into an undirected `{a, w}` and a directed `(w, b)`,
    /// keeping the head a reticulation. A loop `(v, v)` splits into two
    /// parallel edges both directed into `v`.
    ///
    /// Returns `(w, half_toward_first_endpoint, half_toward_second_endpoint)`
    /// where endpoint order matches `EdgeKind::endpoints` of the original.
    pub fn subdivide_semi(&mut self, e: EdgeId) -> (VertexId, EdgeId, EdgeId) {
        let kind = self.remove_edge(e);
        let w = self.add_vertex();
        match kind {
            EdgeKind::Directed { tail, head } if tail == head => {
                let e1 = self.add_directed(w, head);
                let e2 = self.add_directed(w, head);
                (w, e1, e2)
            }
            EdgeKind::Directed { tail, head } => {
                let e1 = self.add_undirected(tail, w);
                let e2 = self.add_directed(w, head);
                (w, e1, e2)
            }
            EdgeKind::Undirected { a, b } => {
                let e1 = self.add_undirected(a, w);
                let e2 = self.add_undirected(w, b);
                (w, e1, e2)
            }
        }
    }

    /// Suppresses a vertex with in-degree 1 and out-degree 1 in a rooted
    /// network, merging `(a, v), (v, b)` into `(a, b)`.
    pub fn suppress_rooted(&mut self, v: VertexId) -> EdgeId {
        let inc = self.incident_edges(v);
        assert_eq!(inc.len(), 2, "suppression needs exactly two incident edges");
        let mut tail = None;
        let mut head = None;
        for e in inc {
            match self.edge(e) {
                EdgeKind::Directed { tail: t, head: h } => {
                    if h == v {
                        tail = Some(t);
                    }
                    if t == v {
                        head = Some(h);
                    }
                }
                EdgeKind::Undirected { .. } => panic!("undirected edge in rooted suppression"),
            }
            self.remove_edge(e);
        }
        self.verts[v.0 as usize] = None;
        self.add_directed(tail.expect("no in-edge"), head.expect("no out-edge"))
    }

    /// Suppresses a degree-2 vertex in a semi-directed context.
    ///
    /// Neither incident edge may be directed into `v` (a reticulation is
    /// never suppressed). The merged edge is directed into an endpoint that
    /// one of the halves pointed into; if the two halves join the same
    /// vertex, the merge yields a directed loop there.
    pub fn suppress_semi(&mut self, v: VertexId) -> EdgeId {
        let inc = self.incident_edges(v);
        assert_eq!(inc.len(), 2, "suppression needs exactly two incident edges");
        let mut ends: Vec<(VertexId, bool)> = Vec::with_capacity(2);
        for e in &inc {
            match self.edge(*e) {
                EdgeKind::Directed { tail, head } => {
                    assert_ne!(head, v, "cannot suppress through a reticulation edge");
                    assert_eq!(tail, v);
                    ends.push((head, true));
                }
                EdgeKind::Undirected { a, b } => {
                    ends.push((if a == v { b } else { a }, false));
                }
            }
            self.remove_edge(*e);
        }
        self.verts[v.0 as usize] = None;
        let (x, x_head) = ends[0];
        let (y, y_head) = ends[1];
        if x == y {
            // Two parallel halves collapse into a loop, which is directed.
            self.add_directed(x, x)
        } else if x_head {
            assert!(!y_head, "merged edge cannot point into both endpoints");
            self.add_directed(y, x)
        } else if y_head {
            self.add_directed(x, y)
        } else {
            self.add_undirected(x, y)
        }
    }

    /// Re-indexes vertices and edges densely, dropping tombstones. Returns
    /// the rebuilt graph; handle stability is deliberately given up, so this
    /// is only used when constructing a fresh value.
    pub fn compacted(&self) -> MixedGraph {
        let mut g = MixedGraph::new();
        let mut map = vec![None; self.verts.len()];
        for v in self.vertices() {
            let nv = g.add_vertex();
            if let Some(l) = self.label(v) {
                g.set_label(nv, Some(l.clone()));
            }
            map[v.0 as usize] = Some(nv);
        }
        for (_, k) in self.edges() {
            let (a, b) = k.endpoints();
            let (na, nb) = (map[a.0 as usize].unwrap(), map[b.0 as usize].unwrap());
            match k {
                EdgeKind::Directed { .. } => g.add_directed(na, nb),
                EdgeKind::Undirected { .. } => g.add_undirected(na, nb),
            };
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_reject_bad_tokens() {
        assert!(LeafLabel::new("x1").is_ok());
        assert!(LeafLabel::new("a.b-c_d").is_ok());
        assert_eq!(LeafLabel::new(""), Err(LabelError::Empty));
        assert!(matches!(
            LeafLabel::new("x 1"),
            Err(LabelError::BadCharacter(_))
        ));
    }

    #[test]
    fn loop_counts_twice_in_degree() {
        let mut g = MixedGraph::new();
        let v = g.add_vertex();
        let u = g.add_vertex();
        g.add_directed(v, v);
        g.add_undirected(v, u);
        assert_eq!(g.degree(v), 3);
        assert_eq!(g.directed_in_degree(v), 2);
        assert_eq!(g.directed_out_degree(v), 0);
    }

    #[test]
    fn subdivide_semi_directed_edge_keeps_head_directed() {
        let mut g = MixedGraph::new();
        let a = g.add_vertex();
        let b = g.add_vertex();
        let e = g.add_directed(a, b);
        let (w, h1, h2) = g.subdivide_semi(e);
        assert_eq!(g.edge(h1), EdgeKind::Undirected { a, b: w });
        assert_eq!(g.edge(h2), EdgeKind::Directed { tail: w, head: b });
    }

    #[test]
    fn subdivide_semi_loop_gives_parallel_pair_into_vertex() {
        let mut g = MixedGraph::new();
        let v = g.add_vertex();
        let e = g.add_directed(v, v);
        let (w, h1, h2) = g.subdivide_semi(e);
        assert_eq!(g.edge(h1), EdgeKind::Directed { tail: w, head: v });
        assert_eq!(g.edge(h2), EdgeKind::Directed { tail: w, head: v });
        assert_eq!(g.directed_in_degree(v), 2);
    }

    #[test]
    fn suppress_semi_merges_parallel_halves_into_loop() {
        let mut g = MixedGraph::new();
        let v = g.add_vertex();
        let a = g.add_vertex();
        g.add_directed(v, a);
        g.add_directed(v, a);
        let merged = g.suppress_semi(v);
        assert_eq!(g.edge(merged), EdgeKind::Directed { tail: a, head: a });
    }

    #[test]
    fn suppress_semi_inherits_direction() {
        let mut g = MixedGraph::new();
        let a = g.add_vertex();
        let v = g.add_vertex();
        let b = g.add_vertex();
        g.add_undirected(a, v);
        g.add_directed(v, b);
        let merged = g.suppress_semi(v);
        assert_eq!(g.edge(merged), EdgeKind::Directed { tail: a, head: b });
    }
}
