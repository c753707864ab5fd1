//! Bridge finding and simple-cycle enumeration on the underlying multigraph.
//!
//! Loops are reported as 1-cycles and a pair of parallel edges as a single
//! 2-cycle. Longer cycles are enumerated by a depth-first search anchored at
//! the minimum vertex of each cycle, so every cycle is produced exactly once.

use crate::graph::{EdgeId, MixedGraph, VertexId};

/// A simple cycle of the underlying multigraph. `vertices` lists the cycle
/// vertices in traversal order (length 1 = loop, length 2 = parallel pair);
/// `edges` holds the edge ids in the same order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cycle {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<EdgeId>,
}

impl Cycle {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains_vertex(&self, v: VertexId) -> bool {
        self.vertices.contains(&v)
    }

    pub fn contains_edge(&self, e: EdgeId) -> bool {
        self.edges.contains(&e)
    }
}

/// All bridges of the underlying multigraph: edges whose deletion increases
/// the number of connected components. Parallel edges and loops are never
/// bridges.
pub fn bridges(g: &MixedGraph) -> Vec<EdgeId> {
    let n = g
        .vertices()
        .map(|v| v.0 as usize + 1)
        .max()
        .unwrap_or(0);
    let mut adj: Vec<Vec<(VertexId, EdgeId)>> = vec![Vec::new(); n];
    for (e, k) in g.edges() {
        if k.is_loop() {
            continue;
        }
        let (a, b) = k.endpoints();
        adj[a.0 as usize].push((b, e));
        adj[b.0 as usize].push((a, e));
    }

    let mut visit = vec![usize::MAX; n];
    let mut low = vec![usize::MAX; n];
    let mut clock = 0usize;
    let mut out = Vec::new();

    for start in g.vertices() {
        if visit[start.0 as usize] != usize::MAX {
            continue;
        }
        // Iterative DFS keeping the edge taken to reach each frame.
        let mut stack: Vec<(VertexId, Option<EdgeId>, usize)> = vec![(start, None, 0)];
        visit[start.0 as usize] = clock;
        low[start.0 as usize] = clock;
        clock += 1;
        while let Some(frame) = stack.len().checked_sub(1) {
            let (v, via, idx) = stack[frame];
            let vi = v.0 as usize;
            if idx < adj[vi].len() {
                stack[frame].2 += 1;
                let (u, e) = adj[vi][idx];
                if Some(e) == via {
                    continue;
                }
                let ui = u.0 as usize;
                if visit[ui] == usize::MAX {
                    visit[ui] = clock;
                    low[ui] = clock;
                    clock += 1;
                    stack.push((u, Some(e), 0));
                } else {
                    low[vi] = low[vi].min(visit[ui]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    let pi = p.0 as usize;
                    low[pi] = low[pi].min(low[vi]);
                    if low[vi] > visit[pi] {
                        out.push(via.expect("non-root frame has an entry edge"));
                    }
                }
            }
        }
    }
    out.sort();
    out
}

/// Brute-force bridge oracle: deletes each non-loop edge in turn and counts
/// components. Quadratic; used to cross-check `bridges`.
pub fn bridges_by_deletion(g: &MixedGraph) -> Vec<EdgeId> {
    let base = g.components().len();
    let mut out = Vec::new();
    for (e, k) in g.edges() {
        if k.is_loop() {
            continue;
        }
        let mut h = g.clone();
        h.remove_edge(e);
        if h.components().len() > base {
            out.push(e);
        }
    }
    out.sort();
    out
}

/// Every simple cycle of the underlying multigraph.
pub fn simple_cycles(g: &MixedGraph) -> Vec<Cycle> {
    let mut out = Vec::new();

    for (e, k) in g.edges() {
        if k.is_loop() {
            let (v, _) = k.endpoints();
            out.push(Cycle {
                vertices: vec![v],
                edges: vec![e],
            });
        }
    }

    // 2-cycles: one per unordered pair of parallel non-loop edges.
    let edges: Vec<(EdgeId, (VertexId, VertexId))> = g
        .edges()
        .filter(|(_, k)| !k.is_loop())
        .map(|(e, k)| {
            let (a, b) = k.endpoints();
            (e, (a.min(b), a.max(b)))
        })
        .collect();
    for i in 0..edges.len() {
        for j in (i + 1)..edges.len() {
            if edges[i].1 == edges[j].1 {
                let (a, b) = edges[i].1;
                out.push(Cycle {
                    vertices: vec![a, b],
                    edges: vec![edges[i].0, edges[j].0],
                });
            }
        }
    }

    // Longer cycles: DFS from each anchor vertex s, visiting only vertices
    // with id > s, so s is the minimum of every cycle it reports. The
    // direction is fixed by requiring the second vertex to have a smaller id
    // than the last one.
    let verts: Vec<VertexId> = g.vertices().collect();
    for &s in &verts {
        let mut path_v = vec![s];
        let mut path_e: Vec<EdgeId> = Vec::new();
        dfs_cycles(g, s, s, &mut path_v, &mut path_e, &mut out);
    }

    out.sort_by(|x, y| (x.len(), &x.vertices).cmp(&(y.len(), &y.vertices)));
    out
}

fn dfs_cycles(
    g: &MixedGraph,
    anchor: VertexId,
    v: VertexId,
    path_v: &mut Vec<VertexId>,
    path_e: &mut Vec<EdgeId>,
    out: &mut Vec<Cycle>,
) {
    for (e, k) in g.edges() {
        if k.is_loop() || !k.touches(v) || path_e.contains(&e) {
            continue;
        }
        let u = k.other(v);
        if u == anchor {
            if path_v.len() >= 3 && path_v[1] < *path_v.last().unwrap() {
                out.push(Cycle {
                    vertices: path_v.clone(),
                    edges: {
                        let mut es = path_e.clone();
                        es.push(e);
                        es
                    },
                });
            }
            continue;
        }
        if u < anchor || path_v.contains(&u) {
            continue;
        }
        path_v.push(u);
        path_e.push(e);
        dfs_cycles(g, anchor, u, path_v, path_e, out);
        path_v.pop();
        path_e.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph(n: usize) -> MixedGraph {
        let mut g = MixedGraph::new();
        let vs: Vec<VertexId> = (0..n).map(|_| g.add_vertex()).collect();
        for w in vs.windows(2) {
            g.add_undirected(w[0], w[1]);
        }
        g
    }

    #[test]
    fn every_tree_edge_is_a_bridge() {
        let g = path_graph(5);
        assert_eq!(bridges(&g).len(), 4);
        assert_eq!(bridges(&g), bridges_by_deletion(&g));
        assert!(simple_cycles(&g).is_empty());
    }

    #[test]
    fn parallel_pair_is_one_two_cycle_and_no_bridge() {
        let mut g = MixedGraph::new();
        let a = g.add_vertex();
        let b = g.add_vertex();
        let c = g.add_vertex();
        g.add_directed(a, b);
        g.add_directed(a, b);
        g.add_undirected(b, c);
        let cyc = simple_cycles(&g);
        assert_eq!(cyc.len(), 1);
        assert_eq!(cyc[0].len(), 2);
        let br = bridges(&g);
        assert_eq!(br.len(), 1);
        assert_eq!(br, bridges_by_deletion(&g));
    }

    #[test]
    fn loop_is_a_one_cycle() {
        let mut g = MixedGraph::new();
        let v = g.add_vertex();
        let u = g.add_vertex();
        g.add_directed(v, v);
        g.add_undirected(u, v);
        let cyc = simple_cycles(&g);
        assert_eq!(cyc.len(), 1);
        assert_eq!(cyc[0].len(), 1);
        assert_eq!(bridges(&g).len(), 1);
    }

    #[test]
    fn theta_graph_has_three_cycles() {
        // Two vertices joined by three internally disjoint paths of length 2.
        let mut g = MixedGraph::new();
        let a = g.add_vertex();
        let b = g.add_vertex();
        for _ in 0..3 {
            let m = g.add_vertex();
            g.add_undirected(a, m);
            g.add_undirected(m, b);
        }
        let cyc = simple_cycles(&g);
        assert_eq!(cyc.len(), 3);
        assert!(cyc.iter().all(|c| c.len() == 4));
        assert!(bridges(&g).is_empty());
    }

    #[test]
    fn triangle_reported_once() {
        let mut g = MixedGraph::new();
        let a = g.add_vertex();
        let b = g.add_vertex();
        let c = g.add_vertex();
        g.add_undirected(a, b);
        g.add_undirected(b, c);
        g.add_undirected(a, c);
        let cyc = simple_cycles(&g);
        assert_eq!(cyc.len(), 1);
        assert_eq!(cyc[0].len(), 3);
    }
}
