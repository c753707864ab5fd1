//! Standard-form machinery: building the unique chain-of-3-cycles network
//! for a leaf order and reticulation count, transforming arbitrary rooted
//! level-1 networks into standard shape and then standard form by audited
//! CET sequences, and connecting pairs of networks through the standard
//! form, including the projection onto semi-directed networks.

use std::collections::HashSet;

use thiserror::Error;

use crate::canon::find_isomorphism;
use crate::graph::{EdgeId, EdgeKind, LeafLabel, MixedGraph, VertexId};
use crate::moves::{
    apply_cet_rooted, apply_cet_semidirected, cet_neighbors_semidirected, inverse_move_rooted,
    translate_move, Move, MoveSequence, SequenceKind, SequenceStep,
};
use crate::network::{LevelClass, RootedNetwork, SemiDirectedNetwork, ROOTED_TAG};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StandardFormError {
    #[error("bad standard-form parameters: {0}")]
    BadSpec(String),
    #[error("network is not level-1")]
    NotLevel1,
    #[error("network is not of standard shape")]
    NotStandardShape,
    #[error("incompatible inputs: {0}")]
    IncompatibleInputs(String),
    #[error("no level-1 rooted partner")]
    NoLevel1Partner,
    #[error("internal invariant failed: {0}")]
    Internal(String),
}

/// Leaf order and reticulation count of a standard-form network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StandardFormSpec {
    pub leaves: Vec<LeafLabel>,
    pub k: usize,
}

impl StandardFormSpec {
    pub fn new(leaves: Vec<LeafLabel>, k: usize) -> Result<Self, StandardFormError> {
        let n = leaves.len();
        if n == 0 {
            return Err(StandardFormError::BadSpec("leaf set is empty".into()));
        }
        let mut uniq: Vec<&LeafLabel> = leaves.iter().collect();
        uniq.sort();
        uniq.dedup();
        if uniq.len() != n {
            return Err(StandardFormError::BadSpec("duplicate leaf label".into()));
        }
        if k > n.saturating_sub(1) {
            return Err(StandardFormError::BadSpec(format!(
                "k = {k} exceeds the level-1 bound {} for {n} leaves",
                n - 1
            )));
        }
        Ok(StandardFormSpec { leaves, k })
    }
}

/// Builds the unique standard-form network: a chain of k 3-cycles with
/// pendant leaves x1..xk at their middle vertices, followed by the
/// caterpillar on the remaining leaves.
pub fn build_standard_form(spec: &StandardFormSpec) -> RootedNetwork {
    let n = spec.leaves.len();
    let k = spec.k;
    let mut g = MixedGraph::new();
    let root = g.add_vertex();
    let leaf_ids: Vec<VertexId> = spec.leaves.iter().map(|l| g.add_leaf(l.clone())).collect();

    // Chain of k 3-cycles; `below` is where the next structure attaches.
    let mut below = root;
    for x in leaf_ids.iter().take(k) {
        let u = g.add_vertex();
        let p = g.add_vertex();
        let v = g.add_vertex();
        g.add_directed(below, u);
        g.add_directed(u, p);
        g.add_directed(u, v);
        g.add_directed(p, v);
        g.add_directed(p, *x);
        below = v;
    }

    if n == k + 1 {
        g.add_directed(below, leaf_ids[n - 1]);
    } else {
        // Caterpillar on x_{k+1}..x_n, built top-down: parent of x_n first.
        let mut parents = Vec::new();
        for _ in (k + 1)..n {
            let p = g.add_vertex();
            g.add_directed(below, p);
            below = p;
            parents.push(p);
        }
        for (offset, p) in parents.iter().enumerate() {
            g.add_directed(*p, leaf_ids[n - 1 - offset]);
        }
        g.add_directed(*parents.last().unwrap(), leaf_ids[k]);
    }

    RootedNetwork::validate(g, root).expect("standard form construction is valid")
}

/// True iff some leaf permutation turns `n` into the standard form with the
/// same reticulation count, tested on label-stripped canonical codes.
pub fn is_standard_shape(n: &RootedNetwork) -> bool {
    let counts = n.count_invariants();
    let leaves: Vec<LeafLabel> = n.leaves().into_iter().map(|(_, l)| l).collect();
    let spec = match StandardFormSpec::new(leaves, counts.reticulations) {
        Ok(s) => s,
        Err(_) => return false,
    };
    let reference = build_standard_form(&spec);
    n.shape_code() == reference.shape_code()
}

// ---------------------------------------------------------------------------
// Cycle bookkeeping on evolving networks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct CycleInfo {
    vertices: Vec<VertexId>,
    edges: Vec<EdgeId>,
    source: VertexId,
    sink: VertexId,
}

fn cycle_infos(n: &RootedNetwork) -> Result<Vec<CycleInfo>, StandardFormError> {
    let g = n.graph();
    n.underlying_cycles()
        .iter()
        .map(|c| {
            let on_cycle_in = |v: VertexId| {
                c.edges
                    .iter()
                    .filter(|&&e| matches!(g.edge(e), EdgeKind::Directed { head, .. } if head == v))
                    .count()
            };
            let mut source = None;
            let mut sink = None;
            for &v in &c.vertices {
                match on_cycle_in(v) {
                    0 => source = Some(v),
                    2 => sink = Some(v),
                    _ => {}
                }
            }
            match (source, sink) {
                (Some(source), Some(sink)) => Ok(CycleInfo {
                    vertices: c.vertices.clone(),
                    edges: c.edges.clone(),
                    source,
                    sink,
                }),
                _ => Err(StandardFormError::Internal(
                    "cycle without unique source and sink".into(),
                )),
            }
        })
        .collect()
}

fn cycle_by_sink(n: &RootedNetwork, sink: VertexId) -> Result<CycleInfo, StandardFormError> {
    cycle_infos(n)?
        .into_iter()
        .find(|c| c.sink == sink)
        .ok_or_else(|| StandardFormError::Internal(format!("no cycle with sink {sink}")))
}

fn out_edges(g: &MixedGraph, v: VertexId) -> Vec<(EdgeId, VertexId)> {
    let mut out: Vec<(EdgeId, VertexId)> = g
        .edges()
        .filter_map(|(e, k)| match k {
            EdgeKind::Directed { tail, head } if tail == v => Some((e, head)),
            _ => None,
        })
        .collect();
    out.sort();
    out
}

fn in_edge(g: &MixedGraph, v: VertexId) -> Option<(EdgeId, VertexId)> {
    g.edges().find_map(|(e, k)| match k {
        EdgeKind::Directed { tail, head } if head == v => Some((e, tail)),
        _ => None,
    })
}

fn pendant_edge(g: &MixedGraph, leaf: VertexId) -> EdgeId {
    g.incident_edges(leaf)
        .into_iter()
        .next()
        .expect("leaf has one incident edge")
}

/// Vertices lying on any cycle.
fn cycle_vertices(cycles: &[CycleInfo]) -> HashSet<VertexId> {
    cycles
        .iter()
        .flat_map(|c| c.vertices.iter().copied())
        .collect()
}

/// The edge of a cycle joining its source and sink directly, if present
/// (always present on 2- and 3-cycles).
fn source_sink_edge(g: &MixedGraph, c: &CycleInfo) -> Option<EdgeId> {
    let mut hits: Vec<EdgeId> = c
        .edges
        .iter()
        .copied()
        .filter(|&e| {
            matches!(g.edge(e), EdgeKind::Directed { tail, head } if tail == c.source && head == c.sink)
        })
        .collect();
    hits.sort();
    hits.first().copied()
}

// ---------------------------------------------------------------------------
// Sequence builder
// ---------------------------------------------------------------------------

struct RootedBuilder {
    seq: MoveSequence,
    cur: RootedNetwork,
    bound: LevelClass,
}

impl RootedBuilder {
    fn new(start: &RootedNetwork, bound: LevelClass) -> Self {
        RootedBuilder {
            seq: MoveSequence {
                kind: SequenceKind::Rooted,
                start_code: start.canonical_code().clone(),
                class_bound: Some(bound),
                steps: Vec::new(),
            },
            cur: start.clone(),
            bound,
        }
    }

    fn push(&mut self, mv: Move) -> Result<(), StandardFormError> {
        let outcome = apply_cet_rooted(&self.cur, &mv)
            .map_err(|e| StandardFormError::Internal(format!("emitted move rejected: {e}")))?;
        if !outcome.network.level_class().within(self.bound) {
            return Err(StandardFormError::Internal(
                "intermediate violates the class bound".into(),
            ));
        }
        self.seq.steps.push(SequenceStep {
            mv,
            result_code: outcome.network.canonical_code().clone(),
            isomorphic_result: outcome.isomorphic_to_input,
        });
        self.cur = outcome.network;
        Ok(())
    }
}

fn class_bound_for(n_leaves: usize, k: usize) -> LevelClass {
    if k + 1 < n_leaves {
        LevelClass::Level1
    } else {
        LevelClass::AlmostLevel1
    }
}

// ---------------------------------------------------------------------------
// Standard shape (cycle shrinking, chaining, caterpillar)
// ---------------------------------------------------------------------------

/// Transforms a rooted level-1 network into one of standard shape by a CET
/// sequence of length at most 2|X| + 2k, keeping every intermediate level-1
/// when k <= |X|-2 and almost level-1 when k = |X|-1.
pub fn to_standard_shape(n: &RootedNetwork) -> Result<MoveSequence, StandardFormError> {
    if n.level_class() != LevelClass::Level1 {
        return Err(StandardFormError::NotLevel1);
    }
    let counts = n.count_invariants();
    let bound = class_bound_for(counts.leaves, counts.reticulations);
    let mut b = RootedBuilder::new(n, bound);
    if is_standard_shape(&b.cur) {
        return Ok(b.seq);
    }

    // Cycle processing order: sources that are descendants first, ties by
    // the canonical code of the subnetwork below the source.
    let order = cycle_order_descendants_first(&b.cur)?;

    // Shrink every cycle to a 3-cycle. Each step prunes the subtree hanging
    // off a middle cycle vertex and regrafts it on the root edge.
    for sink in &order {
        loop {
            let cyc = cycle_by_sink(&b.cur, *sink)?;
            if cyc.vertices.len() <= 3 {
                break;
            }
            let g = b.cur.graph();
            let mut middles: Vec<VertexId> = cyc
                .vertices
                .iter()
                .copied()
                .filter(|&v| v != cyc.source && v != cyc.sink)
                .collect();
            middles.sort();
            let s = middles[0];
            let (off_edge, _t_child) = out_edges(g, s)
                .into_iter()
                .find(|(e, _)| !cyc.edges.contains(e))
                .ok_or_else(|| StandardFormError::Internal("middle vertex has no off-cycle edge".into()))?;
            let kept_end = match g.edge(off_edge) {
                EdgeKind::Directed { head, .. } => head,
                _ => unreachable!(),
            };
            let mv = Move::Cet {
                cut_edge: off_edge,
                kept_end,
                recipient: b.cur.root_edge(),
            };
            b.push(mv)?;
        }
    }

    // Chain the 3-cycles at the root, prepending each unchained cycle.
    let chained: HashSet<VertexId> = top_chain(&b.cur)?.into_iter().collect();
    let order = cycle_order_ancestors_first(&b.cur)?;
    for sink in order {
        if chained.contains(&sink) {
            continue;
        }
        chain_in_cycle(&mut b, sink)?;
    }

    // Caterpillar below the last chain sink, then collect stray leaves.
    finish_shape(&mut b)?;

    if !is_standard_shape(&b.cur) {
        return Err(StandardFormError::Internal(
            "shape pipeline did not reach standard shape".into(),
        ));
    }
    Ok(b.seq)
}

fn cycle_order_descendants_first(n: &RootedNetwork) -> Result<Vec<VertexId>, StandardFormError> {
    let mut remaining = cycle_infos(n)?;
    let mut out = Vec::new();
    while !remaining.is_empty() {
        // Lowest cycles first: no other remaining source below this one.
        let mut candidates: Vec<usize> = (0..remaining.len())
            .filter(|&i| {
                let desc = n.descendants(remaining[i].source);
                remaining
                    .iter()
                    .enumerate()
                    .all(|(j, c)| j == i || !desc.contains(&c.source))
            })
            .collect();
        candidates.sort_by_key(|&i| n.subtree_code(remaining[i].source));
        let pick = candidates
            .first()
            .copied()
            .ok_or_else(|| StandardFormError::Internal("cycle order has no minimal element".into()))?;
        out.push(remaining.remove(pick).sink);
    }
    Ok(out)
}

fn cycle_order_ancestors_first(n: &RootedNetwork) -> Result<Vec<VertexId>, StandardFormError> {
    let mut order = cycle_order_descendants_first(n)?;
    order.reverse();
    Ok(order)
}

/// Sinks of the maximal chain hanging from the root: repeatedly descend
/// through non-cycle tree vertices; the chain extends while exactly one
/// cycle source is reachable that way.
fn top_chain(n: &RootedNetwork) -> Result<Vec<VertexId>, StandardFormError> {
    let cycles = cycle_infos(n)?;
    let on_cycle = cycle_vertices(&cycles);
    let g = n.graph();
    let mut chain = Vec::new();
    let mut cur = n.root();
    loop {
        let mut sources = Vec::new();
        let mut stack: Vec<VertexId> = out_edges(g, cur).into_iter().map(|(_, h)| h).collect();
        while let Some(v) = stack.pop() {
            if let Some(c) = cycles.iter().find(|c| c.source == v) {
                sources.push(c.clone());
                continue;
            }
            if on_cycle.contains(&v) || g.label(v).is_some() {
                continue;
            }
            stack.extend(out_edges(g, v).into_iter().map(|(_, h)| h));
        }
        if sources.len() != 1 {
            return Ok(chain);
        }
        let c = sources.pop().unwrap();
        chain.push(c.sink);
        cur = c.sink;
    }
}

/// Moves the cycle with the given sink to the top of the chain: up to three
/// CETs ending with the old root-side structure below the cycle's sink.
fn chain_in_cycle(b: &mut RootedBuilder, sink: VertexId) -> Result<(), StandardFormError> {
    let cyc = cycle_by_sink(&b.cur, sink)?;
    let g = b.cur.graph();
    let (mut into_source, mut parent) = in_edge(g, cyc.source)
        .ok_or_else(|| StandardFormError::Internal("cycle source has no in-edge".into()))?;
    if parent == b.cur.root() {
        return Err(StandardFormError::Internal(
            "unchained cycle hangs at the root".into(),
        ));
    }

    let cycles = cycle_infos(&b.cur)?;
    let on_cycle = cycle_vertices(&cycles);
    let parent_clean = !b.cur.is_reticulation(parent) && !on_cycle.contains(&parent);

    if !parent_clean {
        if let Some(t) = free_tree_vertex(&b.cur, &on_cycle) {
            // First CET: park one subtree of t on the edge into the source,
            // giving the source a plain tree-vertex parent.
            let g = b.cur.graph();
            let outs = out_edges(g, t);
            let desc_ok = |child: VertexId| !b.cur.descendants(child).contains(&cyc.source) && child != cyc.source;
            let (e_prime, c_child) = outs
                .iter()
                .copied()
                .find(|&(_, c)| desc_ok(c))
                .ok_or_else(|| StandardFormError::Internal("no prunable subtree at the free vertex".into()))?;
            b.push(Move::Cet {
                cut_edge: e_prime,
                kept_end: c_child,
                recipient: into_source,
            })?;
            let g = b.cur.graph();
            let (e2, p2) = in_edge(g, cyc.source)
                .ok_or_else(|| StandardFormError::Internal("source lost its in-edge".into()))?;
            into_source = e2;
            parent = p2;
        }
        // Otherwise k = |X|-1: deleting the edge into the source shortens
        // the cycle its parent sits on to a 2-cycle, which the almost
        // level-1 bound absorbs.
        let _ = parent;
    }

    // Second CET: move the cycle (and everything below it) onto the root edge.
    b.push(Move::Cet {
        cut_edge: into_source,
        kept_end: cyc.source,
        recipient: b.cur.root_edge(),
    })?;

    // Third CET: move the displaced old root-side subtree below the sink.
    let g = b.cur.graph();
    let t2 = b.cur.root_child();
    let (to_w, w) = out_edges(g, t2)
        .into_iter()
        .find(|&(_, h)| h != cyc.source)
        .ok_or_else(|| StandardFormError::Internal("root child lost a child".into()))?;
    let (sink_out, _) = out_edges(g, sink)
        .first()
        .copied()
        .ok_or_else(|| StandardFormError::Internal("sink has no out-edge".into()))?;
    b.push(Move::Cet {
        cut_edge: to_w,
        kept_end: w,
        recipient: sink_out,
    })?;
    Ok(())
}

fn free_tree_vertex(n: &RootedNetwork, on_cycle: &HashSet<VertexId>) -> Option<VertexId> {
    let g = n.graph();
    let mut frees: Vec<VertexId> = g
        .vertices()
        .filter(|&v| {
            v != n.root()
                && g.label(v).is_none()
                && !n.is_reticulation(v)
                && !on_cycle.contains(&v)
        })
        .collect();
    frees.sort_by_key(|&v| (n.depth(v), n.subtree_code(v)));
    frees.first().copied()
}

/// The sink of the last chain cycle (its descendants contain no other sink),
/// or the root when there is no reticulation.
fn last_sink(n: &RootedNetwork) -> Result<VertexId, StandardFormError> {
    let cycles = cycle_infos(n)?;
    if cycles.is_empty() {
        return Ok(n.root());
    }
    let sinks: Vec<VertexId> = cycles.iter().map(|c| c.sink).collect();
    sinks
        .iter()
        .copied()
        .find(|&v| {
            let desc = n.descendants(v);
            sinks.iter().all(|&s| s == v || !desc.contains(&s))
        })
        .ok_or_else(|| StandardFormError::Internal("no lowest sink".into()))
}

/// Leaves below `vk` in bottom-up caterpillar order once the subtree is a
/// caterpillar; `None` while it is not.
fn caterpillar_order(n: &RootedNetwork, vk: VertexId) -> Option<Vec<VertexId>> {
    let g = n.graph();
    let outs = out_edges(g, vk);
    let start = match outs.len() {
        1 => outs[0].1,
        _ if vk == n.root() => outs.first()?.1,
        _ => return None,
    };
    let mut spine_down: Vec<VertexId> = Vec::new();
    let mut cur = start;
    loop {
        if g.label(cur).is_some() {
            // Single-leaf subtree.
            if spine_down.is_empty() {
                return Some(vec![cur]);
            }
            return None;
        }
        let children = out_edges(g, cur);
        if children.len() != 2 {
            return None;
        }
        let leaf_children: Vec<VertexId> = children
            .iter()
            .map(|&(_, c)| c)
            .filter(|&c| g.label(c).is_some())
            .collect();
        match leaf_children.len() {
            2 => {
                // Bottom cherry.
                let mut seq = vec![leaf_children[0], leaf_children[1]];
                for v in spine_down.iter().rev() {
                    seq.push(*v);
                }
                return Some(seq);
            }
            1 => {
                spine_down.push(leaf_children[0]);
                cur = children
                    .iter()
                    .map(|&(_, c)| c)
                    .find(|&c| g.label(c).is_none())
                    .unwrap();
            }
            _ => return None,
        }
    }
}

/// Caterpillar-ifies the subtree below the last sink, then moves stray
/// leaves (those not on a cycle and not below the last sink) onto it; for
/// k = |X|-1 the final leaf subdivides the surviving 2-cycle instead.
fn finish_shape(b: &mut RootedBuilder) -> Result<(), StandardFormError> {
    let vk = last_sink(&b.cur)?;

    // Make the subtree below vk a caterpillar, stacking its leaves in label
    // order from the bottom.
    let subtree_leaves = |n: &RootedNetwork, vk: VertexId| -> Vec<(VertexId, LeafLabel)> {
        let desc = if vk == n.root() {
            let mut d = n.descendants(vk);
            d.insert(vk);
            d
        } else {
            n.descendants(vk)
        };
        let mut ls: Vec<(VertexId, LeafLabel)> = n
            .leaves()
            .into_iter()
            .filter(|(v, _)| desc.contains(v))
            .collect();
        ls.sort_by(|a, b| a.1.cmp(&b.1));
        ls
    };

    let ls = subtree_leaves(&b.cur, vk);
    if ls.len() >= 2 {
        for i in 1..ls.len() {
            let g = b.cur.graph();
            let y_prev = ls[i - 1].0;
            let y = ls[i].0;
            // Prefix root: the parent of the previous leaf caps the
            // caterpillar built so far.
            let (_, q_prev) = in_edge(g, y_prev).unwrap();
            let prefix_root = if i == 1 { y_prev } else { q_prev };
            let (q_edge, q) = in_edge(g, y).unwrap();
            if i == 1 && q == q_prev {
                // Bottom cherry already in place.
                continue;
            }
            if i >= 2 {
                // Already placed if y's sibling subtree is exactly the
                // prefix caterpillar.
                let sibling = out_edges(g, q)
                    .into_iter()
                    .map(|(_, c)| c)
                    .find(|&c| c != y);
                if sibling == Some(prefix_root) {
                    continue;
                }
            }
            let recipient = if i == 1 {
                pendant_edge(g, y_prev)
            } else {
                in_edge(g, prefix_root).unwrap().0
            };
            if q_edge == recipient {
                continue;
            }
            b.push(Move::Cet {
                cut_edge: q_edge,
                kept_end: y,
                recipient,
            })?;
        }
    }

    // Strays: leaves whose parent is neither on a cycle nor below vk.
    loop {
        let vk = last_sink(&b.cur)?;
        if vk == b.cur.root() {
            break;
        }
        let cycles = cycle_infos(&b.cur)?;
        let on_cycle = cycle_vertices(&cycles);
        let below: HashSet<VertexId> = b.cur.descendants(vk);
        let g = b.cur.graph();
        let stray = b
            .cur
            .leaves()
            .into_iter()
            .find(|(v, _)| {
                let (_, parent) = in_edge(g, *v).unwrap();
                !on_cycle.contains(&parent) && !below.contains(v)
            });
        let Some((x, _)) = stray else { break };
        let (pend, _) = in_edge(g, x).unwrap();
        let (vk_out, _) = out_edges(g, vk)
            .first()
            .copied()
            .ok_or_else(|| StandardFormError::Internal("last sink has no out-edge".into()))?;
        b.push(Move::Cet {
            cut_edge: pend,
            kept_end: x,
            recipient: vk_out,
        })?;
    }

    // k = |X|-1: one 2-cycle survives chaining; a leaf moves onto it.
    let cycles = cycle_infos(&b.cur)?;
    if let Some(two) = cycles.iter().find(|c| c.vertices.len() == 2) {
        let vk = last_sink(&b.cur)?;
        let ls = subtree_leaves(&b.cur, vk);
        let g = b.cur.graph();
        // Prefer a stray-like leaf adjacent to no cycle; otherwise take the
        // smallest-label leaf below vk.
        let x = ls
            .first()
            .map(|(v, _)| *v)
            .ok_or_else(|| StandardFormError::Internal("no leaf available for the 2-cycle".into()))?;
        let (pend, _) = in_edge(g, x).unwrap();
        let mut pair = two.edges.clone();
        pair.sort();
        b.push(Move::Cet {
            cut_edge: pend,
            kept_end: x,
            recipient: pair[0],
        })?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Standard form (leaf placement)
// ---------------------------------------------------------------------------

/// Chain cycles of a standard-shape network, top-down.
fn chain_cycles(n: &RootedNetwork) -> Result<Vec<CycleInfo>, StandardFormError> {
    let chain = top_chain(n)?;
    let all = cycle_infos(n)?;
    if chain.len() != all.len() {
        return Err(StandardFormError::NotStandardShape);
    }
    chain
        .into_iter()
        .map(|s| cycle_by_sink(n, s))
        .collect()
}

/// The middle (non-source, non-sink) vertex of a 3-cycle.
fn middle_vertex(c: &CycleInfo) -> Result<VertexId, StandardFormError> {
    c.vertices
        .iter()
        .copied()
        .find(|&v| v != c.source && v != c.sink)
        .ok_or_else(|| StandardFormError::Internal("3-cycle without middle vertex".into()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectPositionReport {
    pub leaf: LeafLabel,
    pub in_position: bool,
    /// The cycle middle vertex or caterpillar parent justifying the verdict.
    pub witness: Option<VertexId>,
}

/// Checks whether a leaf sits where the standard form expects it: leaf x_i
/// with i <= k adjacent to the middle of the i-th chain cycle; later leaves
/// reading off the caterpillar below the last sink in index order.
pub fn correct_position_report(
    n: &RootedNetwork,
    leaf: &LeafLabel,
) -> Result<CorrectPositionReport, StandardFormError> {
    let leaves = n.leaves();
    let i = leaves
        .iter()
        .position(|(_, l)| l == leaf)
        .ok_or_else(|| StandardFormError::IncompatibleInputs(format!("unknown leaf {leaf}")))?;
    let k = n.count_invariants().reticulations;
    let g = n.graph();
    let leaf_v = leaves[i].0;

    if i < k {
        let chain = chain_cycles(n)?;
        let mid = middle_vertex(&chain[i])?;
        let (_, parent) = in_edge(g, leaf_v).unwrap();
        return Ok(CorrectPositionReport {
            leaf: leaf.clone(),
            in_position: parent == mid,
            witness: Some(mid),
        });
    }

    let vk = last_sink(n)?;
    let Some(sigma) = caterpillar_order(n, vk) else {
        return Ok(CorrectPositionReport {
            leaf: leaf.clone(),
            in_position: false,
            witness: None,
        });
    };
    if !sigma.contains(&leaf_v) {
        return Ok(CorrectPositionReport {
            leaf: leaf.clone(),
            in_position: false,
            witness: None,
        });
    }
    // Filter sigma down to x_{k+1}..x_i and compare with the expected
    // prefix, allowing the bottom cherry to commute.
    let wanted: Vec<VertexId> = leaves[k..=i].iter().map(|(v, _)| *v).collect();
    let filtered: Vec<VertexId> = sigma
        .iter()
        .copied()
        .filter(|v| wanted.contains(v))
        .collect();
    let mut target = wanted.clone();
    let ok = if filtered == target {
        true
    } else if target.len() >= 2 {
        target.swap(0, 1);
        filtered == target
    } else {
        false
    };
    let witness = in_edge(g, leaf_v).map(|(_, p)| p);
    Ok(CorrectPositionReport {
        leaf: leaf.clone(),
        in_position: ok,
        witness,
    })
}

/// Transforms a standard-shape network into the standard form on its sorted
/// leaf order by at most 3|X| CETs, swapping leaves into their correct
/// positions in index order.
pub fn to_standard_form(n: &RootedNetwork) -> Result<MoveSequence, StandardFormError> {
    if !is_standard_shape(n) {
        return Err(StandardFormError::NotStandardShape);
    }
    let counts = n.count_invariants();
    let (nl, k) = (counts.leaves, counts.reticulations);
    let bound = class_bound_for(nl, k);
    let mut b = RootedBuilder::new(n, bound);
    let labels: Vec<LeafLabel> = n.leaves().into_iter().map(|(_, l)| l).collect();

    for i in 0..nl {
        let label = &labels[i];
        if correct_position_report(&b.cur, label)?.in_position {
            continue;
        }
        place_leaf(&mut b, i, &labels, k)?;
        if !correct_position_report(&b.cur, label)?.in_position {
            return Err(StandardFormError::Internal(format!(
                "leaf {label} still out of position"
            )));
        }
    }

    let target = build_standard_form(&StandardFormSpec::new(labels, k)?);
    if b.cur.canonical_code() != target.canonical_code() {
        return Err(StandardFormError::Internal(
            "placement pipeline did not reach the standard form".into(),
        ));
    }
    Ok(b.seq)
}

/// Recipient edge that inserts leaf index `i` directly above the already
/// placed caterpillar prefix.
fn t_insert_recipient(
    n: &RootedNetwork,
    i: usize,
    labels: &[LeafLabel],
    k: usize,
) -> Result<EdgeId, StandardFormError> {
    let g = n.graph();
    let vk = last_sink(n)?;
    let sigma = caterpillar_order(n, vk)
        .ok_or_else(|| StandardFormError::Internal("caterpillar expected below the last sink".into()))?;
    let prefix: Vec<VertexId> = labels[k..i]
        .iter()
        .map(|l| g.find_leaf(l).unwrap())
        .collect();
    if prefix.is_empty() {
        // First caterpillar leaf: any position works; use the bottom leaf.
        return Ok(pendant_edge(g, sigma[0]));
    }
    let top = sigma
        .iter()
        .copied()
        .filter(|v| prefix.contains(v))
        .last()
        .ok_or_else(|| StandardFormError::Internal("placed prefix missing from caterpillar".into()))?;
    let (_, parent) = in_edge(g, top).unwrap();
    Ok(in_edge(g, parent)
        .ok_or_else(|| StandardFormError::Internal("caterpillar parent has no in-edge".into()))?
        .0)
}

fn place_leaf(
    b: &mut RootedBuilder,
    i: usize,
    labels: &[LeafLabel],
    k: usize,
) -> Result<(), StandardFormError> {
    let nl = labels.len();
    let g = b.cur.graph();
    let x_i = g.find_leaf(&labels[i]).unwrap();
    let (_, parent) = in_edge(g, x_i).unwrap();
    let chain = chain_cycles(&b.cur)?;
    // Leaves either hang off a cycle middle or live in the caterpillar
    // below the last sink (whose child may itself be a leaf).
    let middles: Vec<VertexId> = chain
        .iter()
        .map(middle_vertex)
        .collect::<Result<_, _>>()?;
    let in_t = !middles.contains(&parent);

    let vk = last_sink(&b.cur)?;
    let t_leaf_count = b.cur.descendants(vk).iter().filter(|v| g.label(**v).is_some()).count();

    if in_t {
        if i >= k {
            // One CET repositions the leaf within the caterpillar.
            let recipient = t_insert_recipient(&b.cur, i, labels, k)?;
            let (pend, _) = in_edge(g, x_i).unwrap();
            b.push(Move::Cet {
                cut_edge: pend,
                kept_end: x_i,
                recipient,
            })?;
            return Ok(());
        }
        let target = &chain[i];
        if t_leaf_count >= 2 {
            // Swap x_i with the leaf on its cycle: into the cycle (making a
            // 4-cycle), then that leaf back to where x_i sat.
            let direct = source_sink_edge(g, target)
                .ok_or_else(|| StandardFormError::Internal("3-cycle lacks its chord".into()))?;
            let (pend, _) = in_edge(g, x_i).unwrap();
            let mid_old = middle_vertex(target)?;
            let x_j = out_edges(g, mid_old)
                .into_iter()
                .map(|(_, c)| c)
                .find(|&c| g.label(c).is_some())
                .ok_or_else(|| StandardFormError::Internal("cycle middle has no leaf".into()))?;
            let out1 = apply_step(b, pend, x_i, direct)?;
            let g = b.cur.graph();
            let (pend_j, _) = in_edge(g, x_j).unwrap();
            apply_step(b, pend_j, x_j, out1)?;
            return Ok(());
        }
        // Single caterpillar leaf (k = |X|-1): bring the cycle leaf over
        // first, creating a 2-cycle, then fill the cycle with x_i.
        let target = target.clone();
        let mid_old = middle_vertex(&target)?;
        let x_j = out_edges(g, mid_old)
            .into_iter()
            .map(|(_, c)| c)
            .find(|&c| g.label(c).is_some())
            .ok_or_else(|| StandardFormError::Internal("cycle middle has no leaf".into()))?;
        let (pend_j, _) = in_edge(g, x_j).unwrap();
        let (pend_i, _) = in_edge(g, x_i).unwrap();
        apply_step(b, pend_j, x_j, pend_i)?;
        let g = b.cur.graph();
        let two = cycle_by_sink(&b.cur, target.sink)?;
        let mut pair = two.edges.clone();
        pair.sort();
        let (pend_i2, _) = in_edge(g, x_i).unwrap();
        apply_step(b, pend_i2, x_i, pair[0])?;
        return Ok(());
    }

    // x_i hangs off a cycle C.
    let c_cur = chain
        .iter()
        .find(|c| middle_vertex(c).map(|m| m == parent).unwrap_or(false))
        .cloned()
        .ok_or_else(|| StandardFormError::Internal("leaf parent is not a cycle middle".into()))?;

    if i >= k {
        if k + 1 == nl && i == nl - 1 {
            return Err(StandardFormError::Internal(
                "last leaf of a saturated network cannot be misplaced".into(),
            ));
        }
        // Swap with a later caterpillar leaf: it enters C, x_i moves to the
        // caterpillar.
        let x_j = later_t_leaf(&b.cur, i, labels, k)?;
        let g = b.cur.graph();
        let direct = source_sink_edge(g, &c_cur)
            .ok_or_else(|| StandardFormError::Internal("3-cycle lacks its chord".into()))?;
        let (pend_j, _) = in_edge(g, x_j).unwrap();
        apply_step(b, pend_j, x_j, direct)?;
        let recipient = t_insert_recipient(&b.cur, i, labels, k)?;
        let g = b.cur.graph();
        let (pend_i, _) = in_edge(g, x_i).unwrap();
        apply_step(b, pend_i, x_i, recipient)?;
        return Ok(());
    }

    let target = chain[i].clone();
    if t_leaf_count >= 2 {
        // Three CETs: a caterpillar leaf guards C, x_i moves to its cycle,
        // the displaced cycle leaf takes the vacated caterpillar spot.
        let x_j = later_t_leaf(&b.cur, i, labels, k)?;
        let g = b.cur.graph();
        let direct_c = source_sink_edge(g, &c_cur).unwrap();
        let (pend_j, _) = in_edge(g, x_j).unwrap();
        let vacated = apply_step(b, pend_j, x_j, direct_c)?;
        let g = b.cur.graph();
        let direct_i = source_sink_edge(g, &cycle_by_sink(&b.cur, target.sink)?)
            .ok_or_else(|| StandardFormError::Internal("3-cycle lacks its chord".into()))?;
        let (pend_i, _) = in_edge(g, x_i).unwrap();
        apply_step(b, pend_i, x_i, direct_i)?;
        let g = b.cur.graph();
        // The displaced leaf still hangs off the 4-cycle that x_i entered.
        let four = cycle_by_sink(&b.cur, target.sink)?;
        let x_jp = four
            .vertices
            .iter()
            .filter_map(|&v| {
                out_edges(g, v)
                    .into_iter()
                    .map(|(_, c)| c)
                    .find(|&c| g.label(c).is_some() && c != x_i)
            })
            .next()
            .ok_or_else(|| StandardFormError::Internal("4-cycle has no displaced leaf".into()))?;
        let (pend_jp, _) = in_edge(g, x_jp).unwrap();
        apply_step(b, pend_jp, x_jp, vacated)?;
        return Ok(());
    }

    // k = |X|-1: move x_i straight to its cycle (leaving a 2-cycle behind),
    // then refill that 2-cycle with the displaced leaf.
    let g = b.cur.graph();
    let direct_i = source_sink_edge(g, &target).unwrap();
    let mid_t = middle_vertex(&target)?;
    let x_j = out_edges(g, mid_t)
        .into_iter()
        .map(|(_, c)| c)
        .find(|&c| g.label(c).is_some())
        .ok_or_else(|| StandardFormError::Internal("cycle middle has no leaf".into()))?;
    let (pend_i, _) = in_edge(g, x_i).unwrap();
    apply_step(b, pend_i, x_i, direct_i)?;
    let g = b.cur.graph();
    let two = cycle_by_sink(&b.cur, c_cur.sink)?;
    let mut pair = two.edges.clone();
    pair.sort();
    let (pend_j, _) = in_edge(g, x_j).unwrap();
    apply_step(b, pend_j, x_j, pair[0])?;
    Ok(())
}

/// Smallest later-indexed leaf currently in the caterpillar below the last
/// sink.
fn later_t_leaf(
    n: &RootedNetwork,
    i: usize,
    labels: &[LeafLabel],
    _k: usize,
) -> Result<VertexId, StandardFormError> {
    let g = n.graph();
    let vk = last_sink(n)?;
    let below = n.descendants(vk);
    labels
        .iter()
        .enumerate()
        .skip(i + 1)
        .map(|(_, l)| g.find_leaf(l).unwrap())
        .find(|v| below.contains(v))
        .ok_or_else(|| StandardFormError::Internal("no later caterpillar leaf available".into()))
}

/// Pushes one CET and returns the merged donor edge it produced.
fn apply_step(
    b: &mut RootedBuilder,
    cut_edge: EdgeId,
    kept_end: VertexId,
    recipient: EdgeId,
) -> Result<EdgeId, StandardFormError> {
    let mv = Move::Cet {
        cut_edge,
        kept_end,
        recipient,
    };
    let outcome = apply_cet_rooted(&b.cur, &mv)
        .map_err(|e| StandardFormError::Internal(format!("emitted move rejected: {e}")))?;
    if !outcome.network.level_class().within(b.bound) {
        return Err(StandardFormError::Internal(
            "intermediate violates the class bound".into(),
        ));
    }
    b.seq.steps.push(SequenceStep {
        mv,
        result_code: outcome.network.canonical_code().clone(),
        isomorphic_result: outcome.isomorphic_to_input,
    });
    let merged = outcome.merged_donor;
    b.cur = outcome.network;
    Ok(merged)
}

/// Shape then form: the full pipeline to the standard form.
pub fn to_standard(n: &RootedNetwork) -> Result<MoveSequence, StandardFormError> {
    let shape_seq = to_standard_shape(n)?;
    let mut cur = n.clone();
    for step in &shape_seq.steps {
        cur = apply_cet_rooted(&cur, &step.mv)
            .map_err(|e| StandardFormError::Internal(e.to_string()))?
            .network;
    }
    let form_seq = to_standard_form(&cur)?;
    let mut seq = shape_seq;
    seq.steps.extend(form_seq.steps);
    Ok(seq)
}

// ---------------------------------------------------------------------------
// Connecting pairs of networks
// ---------------------------------------------------------------------------

/// A CET sequence from `a` to (a network isomorphic to) `b`, routed through
/// the standard form; length at most 10|X| + 4k.
pub fn connect_rooted(a: &RootedNetwork, b: &RootedNetwork) -> Result<MoveSequence, StandardFormError> {
    if a.leaf_set() != b.leaf_set() {
        return Err(StandardFormError::IncompatibleInputs(
            "leaf sets differ".into(),
        ));
    }
    let (ka, kb) = (
        a.count_invariants().reticulations,
        b.count_invariants().reticulations,
    );
    if ka != kb {
        return Err(StandardFormError::IncompatibleInputs(
            "reticulation counts differ".into(),
        ));
    }
    if a.level_class() != LevelClass::Level1 || b.level_class() != LevelClass::Level1 {
        return Err(StandardFormError::NotLevel1);
    }
    let bound = class_bound_for(a.leaves().len(), ka);
    if a.canonical_code() == b.canonical_code() {
        return Ok(MoveSequence {
            kind: SequenceKind::Rooted,
            start_code: a.canonical_code().clone(),
            class_bound: Some(bound),
            steps: Vec::new(),
        });
    }

    let seq_a = to_standard(a)?;
    let seq_b = to_standard(b)?;

    // Materialize b's chain of intermediates to invert it.
    let mut b_chain = vec![b.clone()];
    for step in &seq_b.steps {
        let next = apply_cet_rooted(b_chain.last().unwrap(), &step.mv)
            .map_err(|e| StandardFormError::Internal(e.to_string()))?
            .network;
        b_chain.push(next);
    }

    let mut seq = seq_a;
    let mut cur = {
        let mut c = a.clone();
        for step in &seq.steps {
            c = apply_cet_rooted(&c, &step.mv)
                .map_err(|e| StandardFormError::Internal(e.to_string()))?
                .network;
        }
        c
    };

    for j in (0..seq_b.steps.len()).rev() {
        let pre = &b_chain[j];
        let post = &b_chain[j + 1];
        let inv = inverse_move_rooted(pre, &seq_b.steps[j].mv)
            .map_err(|e| StandardFormError::Internal(e.to_string()))?;
        let (vmap, emap) = find_isomorphism(post.graph(), cur.graph(), ROOTED_TAG)
            .ok_or_else(|| StandardFormError::Internal("sequence join lost isomorphism".into()))?;
        let translated = translate_move(&inv, &vmap, &emap);
        let outcome = apply_cet_rooted(&cur, &translated)
            .map_err(|e| StandardFormError::Internal(e.to_string()))?;
        seq.steps.push(SequenceStep {
            mv: translated,
            result_code: outcome.network.canonical_code().clone(),
            isomorphic_result: outcome.isomorphic_to_input,
        });
        cur = outcome.network;
    }

    if cur.canonical_code() != b.canonical_code() {
        return Err(StandardFormError::Internal(
            "connect endpoint mismatch".into(),
        ));
    }
    Ok(seq)
}

/// Connects two semi-directed level-1 networks by lifting a rooted
/// connecting sequence through level-1 partners: each rooted step projects
/// to at most one semi-directed CET, identity steps dropping out.
pub fn connect_semidirected(
    a: &SemiDirectedNetwork,
    b: &SemiDirectedNetwork,
) -> Result<MoveSequence, StandardFormError> {
    if a.leaf_set() != b.leaf_set() {
        return Err(StandardFormError::IncompatibleInputs(
            "leaf sets differ".into(),
        ));
    }
    let (ka, kb) = (a.reticulations().len(), b.reticulations().len());
    if ka != kb {
        return Err(StandardFormError::IncompatibleInputs(
            "reticulation counts differ".into(),
        ));
    }
    let bound = class_bound_for(a.leaves().len(), ka);
    if a.canonical_code() == b.canonical_code() {
        return Ok(MoveSequence {
            kind: SequenceKind::SemiDirected,
            start_code: a.canonical_code().clone(),
            class_bound: Some(bound),
            steps: Vec::new(),
        });
    }

    let level1_partner = |n: &SemiDirectedNetwork| {
        n.rooted_partners()
            .into_iter()
            .find(|p| p.level_class() == LevelClass::Level1)
            .ok_or(StandardFormError::NoLevel1Partner)
    };
    let pa = level1_partner(a)?;
    let pb = level1_partner(b)?;

    let rooted_seq = connect_rooted(&pa, &pb)?;
    let mut rooted_chain = vec![pa.clone()];
    for step in &rooted_seq.steps {
        let next = apply_cet_rooted(rooted_chain.last().unwrap(), &step.mv)
            .map_err(|e| StandardFormError::Internal(e.to_string()))?
            .network;
        rooted_chain.push(next);
    }

    let mut seq = MoveSequence {
        kind: SequenceKind::SemiDirected,
        start_code: a.canonical_code().clone(),
        class_bound: Some(bound),
        steps: Vec::new(),
    };
    let mut cur = a.clone();
    for rn in rooted_chain.iter().skip(1) {
        let target = rn.deroot();
        if target.canonical_code() == cur.canonical_code() {
            continue;
        }
        let found = cet_neighbors_semidirected(&cur)
            .into_iter()
            .find(|(_, r)| r.canonical_code() == target.canonical_code());
        let (mv, next) = found.ok_or_else(|| {
            StandardFormError::Internal("rooted step does not project to one CET".into())
        })?;
        seq.steps.push(SequenceStep {
            mv,
            result_code: next.canonical_code().clone(),
            isomorphic_result: false,
        });
        cur = next;
    }

    if cur.canonical_code() != b.canonical_code() {
        return Err(StandardFormError::Internal(
            "semi-directed connect endpoint mismatch".into(),
        ));
    }
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moves::{replay_rooted, replay_semidirected};
    use crate::network::testnets::*;

    fn labels(names: &[&str]) -> Vec<LeafLabel> {
        names.iter().map(|s| LeafLabel::new(s).unwrap()).collect()
    }

    fn spec(names: &[&str], k: usize) -> StandardFormSpec {
        StandardFormSpec::new(labels(names), k).unwrap()
    }

    #[test]
    fn standard_form_with_no_reticulations_is_a_caterpillar() {
        let n = build_standard_form(&spec(&["x1", "x2", "x3"], 0));
        let c = n.count_invariants();
        assert_eq!(c.reticulations, 0);
        assert_eq!(c.vertices, 6);
        assert_eq!(n.level_class(), LevelClass::Level1);
        assert!(is_standard_shape(&n));
    }

    #[test]
    fn saturated_standard_form_hangs_the_last_leaf_from_the_sink() {
        // n = k + 1: the final leaf is a child of the last sink.
        let n = build_standard_form(&spec(&["x1", "x2"], 1));
        let g = n.graph();
        let x2 = g.find_leaf(&LeafLabel::new("x2").unwrap()).unwrap();
        let (_, parent) = in_edge(g, x2).unwrap();
        assert!(n.is_reticulation(parent));
        assert!(n.is_isomorphic(&rooted_triangle()));
    }

    #[test]
    fn standard_form_counts_match() {
        let n = build_standard_form(&spec(&["x1", "x2", "x3", "x4"], 2));
        let c = n.count_invariants();
        assert_eq!(c.vertices, 12);
        assert_eq!(c.reticulations, 2);
        assert_eq!(
            n.underlying_cycles()
                .iter()
                .filter(|cy| cy.len() == 3)
                .count(),
            2
        );
        assert_eq!(n.level_class(), LevelClass::Level1);
        // Caterpillar on the last two leaves below the second sink.
        let sigma = caterpillar_order(&n, last_sink(&n).unwrap()).unwrap();
        assert_eq!(sigma.len(), 2);
    }

    #[test]
    fn shape_ignores_leaf_permutation() {
        let a = build_standard_form(&spec(&["x1", "x2", "x3", "x4"], 2));
        let b = build_standard_form(&spec(&["x3", "x1", "x4", "x2"], 2));
        assert!(is_standard_shape(&b));
        assert_eq!(a.shape_code(), b.shape_code());
        assert!(!a.is_isomorphic(&b));
    }

    /// A level-1 network with a 4-cycle, for exercising the shrink phase.
    fn four_cycle_network() -> RootedNetwork {
        let mut g = MixedGraph::new();
        let root = g.add_vertex();
        let u = g.add_vertex();
        let s1 = g.add_vertex();
        let s2 = g.add_vertex();
        let v = g.add_vertex();
        let x1 = g.add_leaf(LeafLabel::new("x1").unwrap());
        let x2 = g.add_leaf(LeafLabel::new("x2").unwrap());
        let x3 = g.add_leaf(LeafLabel::new("x3").unwrap());
        g.add_directed(root, u);
        g.add_directed(u, s1);
        g.add_directed(s1, s2);
        g.add_directed(s2, v);
        g.add_directed(u, v);
        g.add_directed(s1, x1);
        g.add_directed(s2, x2);
        g.add_directed(v, x3);
        RootedNetwork::validate(g, root).unwrap()
    }

    #[test]
    fn four_cycle_network_is_not_standard_shape() {
        assert!(!is_standard_shape(&four_cycle_network()));
    }

    #[test]
    fn shape_pipeline_shrinks_cycles_and_respects_the_bound() {
        let n = four_cycle_network();
        let seq = to_standard_shape(&n).unwrap();
        let counts = n.count_invariants();
        assert!(seq.len() <= 2 * counts.leaves + 2 * counts.reticulations);
        let nets = replay_rooted(&seq, &n).unwrap();
        let last = nets.last().unwrap();
        assert!(is_standard_shape(last));
        for m in nets.iter() {
            assert_eq!(m.count_invariants().reticulations, counts.reticulations);
        }
    }

    #[test]
    fn already_standard_shape_needs_no_moves() {
        let n = build_standard_form(&spec(&["x2", "x1", "x3"], 1));
        assert!(to_standard_shape(&n).unwrap().is_empty());
    }

    #[test]
    fn already_standard_form_needs_no_moves() {
        let n = build_standard_form(&spec(&["x1", "x2", "x3", "x4"], 2));
        assert!(to_standard_form(&n).unwrap().is_empty());
    }

    #[test]
    fn non_level1_input_is_rejected() {
        // Parallel pair straight below the root child.
        let mut g = MixedGraph::new();
        let root = g.add_vertex();
        let t = g.add_vertex();
        let r = g.add_vertex();
        let s = g.add_vertex();
        let x1 = g.add_leaf(LeafLabel::new("x1").unwrap());
        let x2 = g.add_leaf(LeafLabel::new("x2").unwrap());
        g.add_directed(root, t);
        g.add_directed(t, r);
        g.add_directed(t, r);
        g.add_directed(r, s);
        g.add_directed(s, x1);
        g.add_directed(s, x2);
        let n = RootedNetwork::validate(g, root).unwrap();
        assert_eq!(to_standard_shape(&n).unwrap_err(), StandardFormError::NotLevel1);
    }

    #[test]
    fn two_leaf_swap_costs_two_moves_through_almost_level_one() {
        let n = build_standard_form(&spec(&["x2", "x1"], 1));
        let seq = to_standard_form(&n).unwrap();
        assert_eq!(seq.len(), 2);
        let nets = replay_rooted(&seq, &n).unwrap();
        assert_eq!(nets[0].level_class(), LevelClass::AlmostLevel1);
        assert_eq!(nets[1].level_class(), LevelClass::Level1);
        let target = build_standard_form(&spec(&["x1", "x2"], 1));
        assert_eq!(nets[1].canonical_code(), target.canonical_code());
    }

    #[test]
    fn misplaced_cycle_leaves_swap_in_four_moves() {
        // Cycle leaves x2, x4 with x1, x3 below: fixing x1 swaps it with x2,
        // fixing x2 swaps it with x4.
        let n = build_standard_form(&spec(&["x2", "x4", "x1", "x3"], 2));
        let rep = correct_position_report(&n, &LeafLabel::new("x1").unwrap()).unwrap();
        assert!(!rep.in_position);
        let seq = to_standard_form(&n).unwrap();
        assert_eq!(seq.len(), 4);
        let nets = replay_rooted(&seq, &n).unwrap();
        let target = build_standard_form(&spec(&["x1", "x2", "x3", "x4"], 2));
        assert_eq!(nets.last().unwrap().canonical_code(), target.canonical_code());
        for m in &nets {
            assert_eq!(m.level_class(), LevelClass::Level1);
        }
    }

    #[test]
    fn every_leaf_of_the_standard_form_is_in_position() {
        let n = build_standard_form(&spec(&["x1", "x2", "x3", "x4", "x5"], 2));
        for (_, l) in n.leaves() {
            assert!(correct_position_report(&n, &l).unwrap().in_position);
        }
    }

    #[test]
    fn form_pipeline_respects_the_three_x_bound() {
        for perm in [
            ["x3", "x1", "x2", "x4"],
            ["x4", "x3", "x2", "x1"],
            ["x2", "x1", "x4", "x3"],
        ] {
            for k in 0..=2usize {
                let n = build_standard_form(&spec(&perm, k));
                let seq = to_standard_form(&n).unwrap();
                assert!(seq.len() <= 3 * 4, "bound violated for {perm:?} k={k}");
                let nets = replay_rooted(&seq, &n).unwrap();
                let target =
                    build_standard_form(&spec(&["x1", "x2", "x3", "x4"], k));
                let last = nets.last().map(|m| m.canonical_code().clone());
                assert_eq!(
                    last.unwrap_or_else(|| n.canonical_code().clone()),
                    *target.canonical_code()
                );
            }
        }
    }

    #[test]
    fn saturated_permutations_reach_standard_form() {
        for perm in [["x2", "x1", "x3"], ["x3", "x2", "x1"], ["x2", "x3", "x1"]] {
            let n = build_standard_form(&spec(&perm, 2));
            let seq = to_standard_form(&n).unwrap();
            assert!(seq.len() <= 9);
            let nets = replay_rooted(&seq, &n).unwrap();
            let target = build_standard_form(&spec(&["x1", "x2", "x3"], 2));
            let last = nets
                .last()
                .map(|m| m.canonical_code().clone())
                .unwrap_or_else(|| n.canonical_code().clone());
            assert_eq!(last, *target.canonical_code());
            for m in &nets {
                assert!(m.level_class().within(LevelClass::AlmostLevel1));
            }
        }
    }

    #[test]
    fn connect_rooted_identical_inputs_is_empty() {
        let n = rooted_triangle();
        assert!(connect_rooted(&n, &n).unwrap().is_empty());
    }

    #[test]
    fn connect_rooted_replays_to_the_target() {
        let a = build_standard_form(&spec(&["x1", "x2", "x3"], 1));
        let b = build_standard_form(&spec(&["x2", "x3", "x1"], 1));
        let seq = connect_rooted(&a, &b).unwrap();
        let counts = a.count_invariants();
        assert!(seq.len() <= 10 * counts.leaves + 4 * counts.reticulations);
        let nets = replay_rooted(&seq, &a).unwrap();
        assert_eq!(
            nets.last().unwrap().canonical_code(),
            b.canonical_code()
        );
    }

    #[test]
    fn connect_rooted_rejects_mismatched_inputs() {
        let a = rooted_cherry();
        let b = rooted_triangle();
        assert!(matches!(
            connect_rooted(&a, &b),
            Err(StandardFormError::IncompatibleInputs(_))
        ));
    }

    #[test]
    fn connect_semidirected_two_leaf_example() {
        let a = semi_parallel_pair(false);
        let b = semi_parallel_pair(true);
        let seq = connect_semidirected(&a, &b).unwrap();
        assert_eq!(seq.len(), 2);
        let nets = replay_semidirected(&seq, &a).unwrap();
        assert_eq!(nets.last().unwrap().canonical_code(), b.canonical_code());
        assert_eq!(nets[0].level_class(), LevelClass::AlmostLevel1);
        assert!(nets[0].is_isomorphic(&semi_loop()));
    }

    #[test]
    fn connect_semidirected_identical_inputs_is_empty() {
        let a = semi_quartet();
        assert!(connect_semidirected(&a, &a).unwrap().is_empty());
    }
}
