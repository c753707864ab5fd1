//! Leaf-label-respecting canonical forms for mixed multigraphs.
//!
//! The code is exact: iterative refinement seeded by leaf labels and degree
//! signatures, followed by full backtracking over the remaining cells. Two
//! graphs of the same kind receive equal codes iff a leaf-fixing isomorphism
//! exists. Graphs here are tiny (internal vertex count bounded by twice the
//! leaf count plus twice the reticulation count), so exactness is cheap.

use std::collections::HashMap;

use crate::graph::{EdgeId, EdgeKind, MixedGraph, VertexId};

/// Canonical byte string identifying an isomorphism class.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalCode(pub Vec<u8>);

impl CanonicalCode {
    /// Short hex fingerprint for display purposes.
    pub fn short_hex(&self) -> String {
        // FNV-1a, folded to 8 hex digits.
        let mut h: u64 = 0xcbf29ce484222325;
        for &b in &self.0 {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{:08x}", (h >> 32) as u32 ^ h as u32)
    }
}

const REL_OUT: u64 = 0;
const REL_IN: u64 = 1;
const REL_UND: u64 = 2;
const REL_LOOP: u64 = 3;

/// How leaves seed the initial coloring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    /// Leaves are fixed points: distinct labels get distinct colors and the
    /// label table is part of the code.
    Respect,
    /// Leaves share one color and the code drops the label table; two graphs
    /// compare equal iff they are isomorphic up to a leaf permutation.
    Ignore,
}

pub struct CanonicalForm {
    pub code: CanonicalCode,
    /// Canonical index per live vertex.
    pub labeling: HashMap<VertexId, u32>,
}

/// Computes the canonical form. `kind_tag` distinguishes network kinds
/// (rooted vs semi-directed) so their codes never collide. `seeds` pins
/// extra distinguished vertices (each seed value becomes its own color
/// class), used for codes of subgraphs anchored at a vertex.
pub fn canonical_form(
    g: &MixedGraph,
    kind_tag: u8,
    mode: LabelMode,
    seeds: &[(VertexId, u32)],
) -> CanonicalForm {
    let verts: Vec<VertexId> = g.vertices().collect();
    let nv = verts.len();
    let vpos: HashMap<VertexId, usize> = verts.iter().enumerate().map(|(i, &v)| (v, i)).collect();

    // Incidence as (relation, neighbor position) half-edges.
    let mut inc: Vec<Vec<(u64, usize)>> = vec![Vec::new(); nv];
    for (_, k) in g.edges() {
        let (a, b) = k.endpoints();
        let (pa, pb) = (vpos[&a], vpos[&b]);
        match k {
            EdgeKind::Directed { tail, head } if tail == head => {
                inc[pa].push((REL_LOOP, pa));
            }
            EdgeKind::Directed { .. } => {
                inc[pa].push((REL_OUT, pb));
                inc[pb].push((REL_IN, pa));
            }
            EdgeKind::Undirected { .. } => {
                inc[pa].push((REL_UND, pb));
                inc[pb].push((REL_UND, pa));
            }
        }
    }

    // Initial colors: labeled leaves by sorted label rank (or one shared
    // class), everything else in a single class, then seed overrides.
    let mut labels: Vec<(String, usize)> = verts
        .iter()
        .enumerate()
        .filter_map(|(i, &v)| g.label(v).map(|l| (l.as_str().to_string(), i)))
        .collect();
    labels.sort();
    let mut init: Vec<u64> = vec![u64::MAX; nv];
    for (rank, (_, i)) in labels.iter().enumerate() {
        init[*i] = match mode {
            LabelMode::Respect => rank as u64,
            LabelMode::Ignore => 0,
        };
    }
    let seed_base = nv as u64 + 1;
    for (v, s) in seeds {
        init[vpos[v]] = seed_base + *s as u64;
    }
    let colors = rank_dense(&init);

    let mut best: Option<(Vec<u8>, Vec<u32>)> = None;
    search(g, &verts, &vpos, &inc, colors, kind_tag, mode, &mut best);
    let (code, perm) = best.expect("search yields at least one labeling");

    let labeling = verts
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, perm[i]))
        .collect();
    CanonicalForm {
        code: CanonicalCode(code),
        labeling,
    }
}

fn rank_dense(keys: &[u64]) -> Vec<u32> {
    let mut sorted: Vec<u64> = keys.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(k).unwrap() as u32)
        .collect()
}

fn refine(inc: &[Vec<(u64, usize)>], mut colors: Vec<u32>) -> Vec<u32> {
    loop {
        let classes = colors.iter().max().map(|m| m + 1).unwrap_or(0);
        let mut sigs: Vec<(u32, Vec<u64>)> = Vec::with_capacity(colors.len());
        for (i, nbrs) in inc.iter().enumerate() {
            let mut s: Vec<u64> = nbrs
                .iter()
                .map(|&(rel, j)| rel << 32 | colors[j] as u64)
                .collect();
            s.sort_unstable();
            sigs.push((colors[i], s));
        }
        let mut uniq: Vec<&(u32, Vec<u64>)> = sigs.iter().collect();
        uniq.sort();
        uniq.dedup();
        let new: Vec<u32> = sigs
            .iter()
            .map(|s| uniq.binary_search(&s).unwrap() as u32)
            .collect();
        let new_classes = new.iter().max().map(|m| m + 1).unwrap_or(0);
        colors = new;
        if new_classes == classes {
            return colors;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn search(
    g: &MixedGraph,
    verts: &[VertexId],
    vpos: &HashMap<VertexId, usize>,
    inc: &[Vec<(u64, usize)>],
    colors: Vec<u32>,
    kind_tag: u8,
    mode: LabelMode,
    best: &mut Option<(Vec<u8>, Vec<u32>)>,
) {
    let colors = refine(inc, colors);
    let nv = colors.len();

    // First non-singleton cell in color order; its members are tried in turn.
    let mut cell: Option<(u32, Vec<usize>)> = None;
    let max_color = colors.iter().max().copied().unwrap_or(0);
    'outer: for c in 0..=max_color {
        let members: Vec<usize> = (0..nv).filter(|&i| colors[i] == c).collect();
        if members.len() > 1 {
            cell = Some((c, members));
            break 'outer;
        }
    }

    match cell {
        None => {
            let perm: Vec<u32> = colors.clone();
            let code = encode(g, verts, vpos, &perm, kind_tag, mode);
            if best.as_ref().map(|(b, _)| code < *b).unwrap_or(true) {
                *best = Some((code, perm));
            }
        }
        Some((_, members)) => {
            for &m in &members {
                // Individualize m ahead of its cellmates and re-refine.
                let keys: Vec<u64> = colors
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| (c as u64) << 1 | if i == m { 0 } else { 1 })
                    .collect();
                search(
                    g,
                    verts,
                    vpos,
                    inc,
                    rank_dense(&keys),
                    kind_tag,
                    mode,
                    best,
                );
            }
        }
    }
}

fn encode(
    g: &MixedGraph,
    verts: &[VertexId],
    vpos: &HashMap<VertexId, usize>,
    perm: &[u32],
    kind_tag: u8,
    mode: LabelMode,
) -> Vec<u8> {
    let mut out = vec![kind_tag];
    out.extend((verts.len() as u16).to_be_bytes());

    if mode == LabelMode::Respect {
        let mut table: Vec<(u32, &str)> = verts
            .iter()
            .filter_map(|&v| g.label(v).map(|l| (perm[vpos[&v]], l.as_str())))
            .collect();
        table.sort();
        out.extend((table.len() as u16).to_be_bytes());
        for (idx, name) in table {
            out.extend(idx.to_be_bytes());
            out.extend((name.len() as u16).to_be_bytes());
            out.extend(name.as_bytes());
        }
    }

    let mut records: Vec<[u8; 9]> = Vec::with_capacity(g.edge_count());
    for (_, k) in g.edges() {
        let (a, b) = k.endpoints();
        let (pa, pb) = (perm[vpos[&a]], perm[vpos[&b]]);
        let rec = match k {
            EdgeKind::Directed { tail, head } if tail == head => (2u8, pa, pa),
            EdgeKind::Directed { .. } => (0u8, pa, pb),
            EdgeKind::Undirected { .. } => (1u8, pa.min(pb), pa.max(pb)),
        };
        let mut bytes = [0u8; 9];
        bytes[0] = rec.0;
        bytes[1..5].copy_from_slice(&rec.1.to_be_bytes());
        bytes[5..9].copy_from_slice(&rec.2.to_be_bytes());
        records.push(bytes);
    }
    records.sort_unstable();
    out.extend((records.len() as u16).to_be_bytes());
    for r in records {
        out.extend(r);
    }
    out
}

/// Leaf-fixing isomorphism between two graphs of the same kind, as a vertex
/// map plus an edge map, or `None` if the canonical codes differ. Parallel
/// edges with equal endpoints and direction are matched in id order (any
/// matching of them is an isomorphism).
pub fn find_isomorphism(
    a: &MixedGraph,
    b: &MixedGraph,
    kind_tag: u8,
) -> Option<(HashMap<VertexId, VertexId>, HashMap<EdgeId, EdgeId>)> {
    let fa = canonical_form(a, kind_tag, LabelMode::Respect, &[]);
    let fb = canonical_form(b, kind_tag, LabelMode::Respect, &[]);
    if fa.code != fb.code {
        return None;
    }
    let mut by_canon: HashMap<u32, VertexId> = HashMap::new();
    for (v, c) in &fb.labeling {
        by_canon.insert(*c, *v);
    }
    let vmap: HashMap<VertexId, VertexId> = fa
        .labeling
        .iter()
        .map(|(v, c)| (*v, by_canon[c]))
        .collect();

    // Group edges on both sides by their canonical signature.
    let sig = |g: &MixedGraph,
               lab: &HashMap<VertexId, u32>| -> HashMap<(u8, u32, u32), Vec<EdgeId>> {
        let mut m: HashMap<(u8, u32, u32), Vec<EdgeId>> = HashMap::new();
        for (e, k) in g.edges() {
            let (x, y) = k.endpoints();
            let (px, py) = (lab[&x], lab[&y]);
            let key = match k {
                EdgeKind::Directed { tail, head } if tail == head => (2u8, px, px),
                EdgeKind::Directed { .. } => (0u8, px, py),
                EdgeKind::Undirected { .. } => (1u8, px.min(py), px.max(py)),
            };
            m.entry(key).or_default().push(e);
        }
        for v in m.values_mut() {
            v.sort();
        }
        m
    };
    let sa = sig(a, &fa.labeling);
    let sb = sig(b, &fb.labeling);
    let mut emap = HashMap::new();
    for (key, eas) in &sa {
        let ebs = sb.get(key)?;
        if eas.len() != ebs.len() {
            return None;
        }
        for (ea, eb) in eas.iter().zip(ebs) {
            emap.insert(*ea, *eb);
        }
    }
    Some((vmap, emap))
}

/// Brute-force leaf-fixing isomorphism test: tries every bijection between
/// internal vertices. Exponential; serves as the independent oracle for the
/// canonical code.
pub fn isomorphic_brute_force(a: &MixedGraph, b: &MixedGraph) -> bool {
    let leaves_a: Vec<(&str, VertexId)> = a
        .labeled_vertices()
        .map(|(v, l)| (l.as_str(), v))
        .collect();
    let leaves_b: HashMap<&str, VertexId> = b
        .labeled_vertices()
        .map(|(v, l)| (l.as_str(), v))
        .collect();
    if leaves_a.len() != leaves_b.len() || a.vertex_count() != b.vertex_count() {
        return false;
    }
    let mut base: HashMap<VertexId, VertexId> = HashMap::new();
    for (name, va) in &leaves_a {
        match leaves_b.get(name) {
            Some(vb) => {
                base.insert(*va, *vb);
            }
            None => return false,
        }
    }
    let internal_a: Vec<VertexId> = a.vertices().filter(|v| a.label(*v).is_none()).collect();
    let mut internal_b: Vec<VertexId> = b.vertices().filter(|v| b.label(*v).is_none()).collect();
    if internal_a.len() != internal_b.len() {
        return false;
    }
    permute_and_check(a, b, &internal_a, &mut internal_b, 0, &mut base)
}

fn permute_and_check(
    a: &MixedGraph,
    b: &MixedGraph,
    ia: &[VertexId],
    ib: &mut Vec<VertexId>,
    k: usize,
    map: &mut HashMap<VertexId, VertexId>,
) -> bool {
    if k == ia.len() {
        return edges_match(a, b, map);
    }
    for i in k..ib.len() {
        ib.swap(k, i);
        map.insert(ia[k], ib[k]);
        if permute_and_check(a, b, ia, ib, k + 1, map) {
            return true;
        }
        map.remove(&ia[k]);
        ib.swap(k, i);
    }
    false
}

fn edges_match(a: &MixedGraph, b: &MixedGraph, map: &HashMap<VertexId, VertexId>) -> bool {
    let key = |k: EdgeKind, m: Option<&HashMap<VertexId, VertexId>>| -> (u8, VertexId, VertexId) {
        let tr = |v: VertexId| m.map(|m| m[&v]).unwrap_or(v);
        match k {
            EdgeKind::Directed { tail, head } if tail == head => (2, tr(tail), tr(tail)),
            EdgeKind::Directed { tail, head } => (0, tr(tail), tr(head)),
            EdgeKind::Undirected { a, b } => {
                let (x, y) = (tr(a), tr(b));
                (1, x.min(y), x.max(y))
            }
        }
    };
    let mut ea: Vec<_> = a.edges().map(|(_, k)| key(k, Some(map))).collect();
    let mut eb: Vec<_> = b.edges().map(|(_, k)| key(k, None)).collect();
    ea.sort();
    eb.sort();
    ea == eb
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LeafLabel;

    fn cherry(order: bool) -> MixedGraph {
        // Same rooted cherry built with two different vertex id orders.
        let mut g = MixedGraph::new();
        if order {
            let root = g.add_vertex();
            let t = g.add_vertex();
            let x1 = g.add_leaf(LeafLabel::new("x1").unwrap());
            let x2 = g.add_leaf(LeafLabel::new("x2").unwrap());
            g.add_directed(root, t);
            g.add_directed(t, x1);
            g.add_directed(t, x2);
        } else {
            let x2 = g.add_leaf(LeafLabel::new("x2").unwrap());
            let t = g.add_vertex();
            let x1 = g.add_leaf(LeafLabel::new("x1").unwrap());
            let root = g.add_vertex();
            g.add_directed(t, x2);
            g.add_directed(root, t);
            g.add_directed(t, x1);
        }
        g
    }

    #[test]
    fn relabeling_invariance() {
        let a = cherry(true);
        let b = cherry(false);
        let ca = canonical_form(&a, b'R', LabelMode::Respect, &[]);
        let cb = canonical_form(&b, b'R', LabelMode::Respect, &[]);
        assert_eq!(ca.code, cb.code);
        assert!(find_isomorphism(&a, &b, b'R').is_some());
        assert!(isomorphic_brute_force(&a, &b));
    }

    #[test]
    fn leaf_swap_changes_code() {
        // Parallel pair into a reticulation, pendant leaves on both sides.
        let build = |swap: bool| {
            let mut g = MixedGraph::new();
            let p = g.add_vertex();
            let r = g.add_vertex();
            let (l1, l2) = if swap { ("x2", "x1") } else { ("x1", "x2") };
            let a = g.add_leaf(LeafLabel::new(l1).unwrap());
            let b = g.add_leaf(LeafLabel::new(l2).unwrap());
            g.add_directed(p, r);
            g.add_directed(p, r);
            g.add_undirected(p, a);
            g.add_undirected(r, b);
            g
        };
        let a = build(false);
        let b = build(true);
        let ca = canonical_form(&a, b'S', LabelMode::Respect, &[]);
        let cb = canonical_form(&b, b'S', LabelMode::Respect, &[]);
        assert_ne!(ca.code, cb.code);
        assert!(!isomorphic_brute_force(&a, &b));
        // Ignoring labels they are the same shape.
        let sa = canonical_form(&a, b'S', LabelMode::Ignore, &[]);
        let sb = canonical_form(&b, b'S', LabelMode::Ignore, &[]);
        assert_eq!(sa.code, sb.code);
    }

    #[test]
    fn direction_matters() {
        let mut a = MixedGraph::new();
        let u = a.add_vertex();
        let v = a.add_vertex();
        a.add_directed(u, v);
        let mut b = MixedGraph::new();
        let u2 = b.add_vertex();
        let v2 = b.add_vertex();
        b.add_undirected(u2, v2);
        let ca = canonical_form(&a, b'S', LabelMode::Respect, &[]);
        let cb = canonical_form(&b, b'S', LabelMode::Respect, &[]);
        assert_ne!(ca.code, cb.code);
    }
}
