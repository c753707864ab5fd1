//! The rearrangement moves: cut edge transfer (CET) on rooted and
//! semi-directed networks, the reticulation-changing CET⁺ and CET⁻, the
//! local CET₁ restriction, and move sequences with per-step audit codes.
//!
//! A `Move` names edges and vertices of one concrete network value; moves
//! are syntactic, so two distinct moves may produce isomorphic results.
//! Deduplication happens at the space-graph level, not here.

use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::canon::{canonical_form, CanonicalCode, LabelMode};
use crate::graph::{EdgeId, EdgeKind, MixedGraph, VertexId};
use crate::network::{LevelClass, RootedNetwork, SemiDirectedNetwork, SEMI_TAG};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Move {
    /// Delete `cut_edge`, suppress the endpoint that is not `kept_end`,
    /// subdivide `recipient` in the retained component, and reattach.
    Cet {
        cut_edge: EdgeId,
        kept_end: VertexId,
        recipient: EdgeId,
    },
    CetPlus(CetPlusVariant),
    /// Delete the reticulation edge, undirect its sibling, and suppress the
    /// freed endpoints (loop case: delete the loop vertex and suppress its
    /// neighbor).
    CetMinus { ret_edge: EdgeId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CetPlusVariant {
    /// Subdivide `edge` with a new vertex, attach a fresh vertex carrying a
    /// directed loop.
    Loop { edge: EdgeId },
    /// Subdivide `first` with v, subdivide `second` with u, add the directed
    /// edge (u, v), and direct the flank of v on the chosen side into v.
    TwoEdge {
        first: EdgeId,
        second: SecondTarget,
        head: HeadSide,
    },
}

/// The edge receiving the second subdivision of a two-edge CET⁺: either an
/// edge of the original network or one of the two halves the first
/// subdivision just created, named by the endpoint of `first` it touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondTarget {
    Existing(EdgeId),
    HalfTowards(VertexId),
}

/// Which flank of the new reticulation is directed into it, by the stored
/// endpoint order of `first`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadSide {
    A,
    B,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MoveError {
    #[error("invalid move: {0}")]
    Invalid(String),
    #[error("precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("no path between donor and recipient")]
    NoPath,
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, MoveError> {
    Err(MoveError::Invalid(msg.into()))
}

/// Result of applying a CET, with the handles an inverse move needs.
#[derive(Debug, Clone)]
pub struct CetOutcome<N> {
    pub network: N,
    pub new_vertex: VertexId,
    /// The fresh edge joining the new vertex to the kept end.
    pub attach_edge: EdgeId,
    /// The edge produced by suppressing the freed endpoint.
    pub merged_donor: EdgeId,
    pub isomorphic_to_input: bool,
}

#[derive(Debug, Clone)]
pub struct CetMinusOutcome {
    pub network: SemiDirectedNetwork,
    /// A CET⁺ on the result that restores the input up to isomorphism.
    pub inverse: CetPlusVariant,
}

#[derive(Debug, Clone)]
pub struct CetPlusOutcome {
    pub network: SemiDirectedNetwork,
    /// Deleting this reticulation edge restores the input up to isomorphism.
    pub inverse_ret_edge: EdgeId,
}

/// Vertices reachable from `start` in the underlying graph without crossing
/// `banned`.
fn component_without(g: &MixedGraph, start: VertexId, banned: EdgeId) -> HashSet<VertexId> {
    let mut seen = HashSet::from([start]);
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        for (e, k) in g.edges() {
            if e == banned || !k.touches(v) {
                continue;
            }
            let u = k.other(v);
            if seen.insert(u) {
                stack.push(u);
            }
        }
    }
    seen
}

// ---------------------------------------------------------------------------
// Rooted CET
// ---------------------------------------------------------------------------

struct RootedCetCore {
    tail: VertexId,
    donors: [EdgeId; 2],
    kept: HashSet<VertexId>,
}

fn check_cet_rooted(n: &RootedNetwork, cut_edge: EdgeId, kept_end: VertexId) -> Result<RootedCetCore, MoveError> {
    let g = n.graph();
    if !g.has_edge(cut_edge) {
        return invalid("cut edge does not exist");
    }
    let (tail, head) = match g.edge(cut_edge) {
        EdgeKind::Directed { tail, head } => (tail, head),
        EdgeKind::Undirected { .. } => return invalid("rooted networks have no undirected edges"),
    };
    if head != kept_end {
        return invalid("the kept end of a rooted CET is the head of the cut edge");
    }
    if tail == n.root() || head == n.root() {
        return invalid("cut edge may not be incident with the root");
    }
    if n.is_reticulation(tail) {
        return invalid("suppressed end is a reticulation");
    }
    if !n.cut_edges().contains(&cut_edge) {
        return invalid("edge is not a cut edge");
    }
    let donors: Vec<EdgeId> = g
        .incident_edges(tail)
        .into_iter()
        .filter(|&e| e != cut_edge)
        .collect();
    if donors.len() != 2 {
        return invalid("suppressed end does not have exactly two donor edges");
    }
    let kept = component_without(g, n.root(), cut_edge);
    debug_assert!(!kept.contains(&head));
    Ok(RootedCetCore {
        tail,
        donors: [donors[0], donors[1]],
        kept,
    })
}

fn recipient_ok(g: &MixedGraph, core_kept: &HashSet<VertexId>, banned: &[EdgeId], f: EdgeId) -> Result<(), MoveError> {
    if !g.has_edge(f) {
        return invalid("recipient edge does not exist");
    }
    if banned.contains(&f) {
        return invalid("recipient coincides with the cut edge or a donor edge");
    }
    let (a, b) = g.edge(f).endpoints();
    if !core_kept.contains(&a) || !core_kept.contains(&b) {
        return invalid("recipient is not in the retained component");
    }
    Ok(())
}

fn surgery_cet_rooted(
    n: &RootedNetwork,
    core: &RootedCetCore,
    cut_edge: EdgeId,
    kept_end: VertexId,
    recipient: EdgeId,
) -> Result<CetOutcome<RootedNetwork>, MoveError> {
    let mut g = n.graph().clone();
    g.remove_edge(cut_edge);
    let merged_donor = g.suppress_rooted(core.tail);
    let (u_new, _, _) = g.subdivide_rooted(recipient);
    let attach_edge = g.add_directed(u_new, kept_end);
    let network = RootedNetwork::validate(g, n.root())
        .map_err(|e| MoveError::Invalid(format!("result not a rooted network: {e}")))?;
    let isomorphic_to_input = network.canonical_code() == n.canonical_code();
    Ok(CetOutcome {
        network,
        new_vertex: u_new,
        attach_edge,
        merged_donor,
        isomorphic_to_input,
    })
}

/// Applies a rooted CET. Accepts moves whose result is isomorphic to the
/// input (flagged on the outcome); enumeration filters those out.
pub fn apply_cet_rooted(n: &RootedNetwork, m: &Move) -> Result<CetOutcome<RootedNetwork>, MoveError> {
    let (cut_edge, kept_end, recipient) = match *m {
        Move::Cet {
            cut_edge,
            kept_end,
            recipient,
        } => (cut_edge, kept_end, recipient),
        _ => return invalid("not a CET"),
    };
    let core = check_cet_rooted(n, cut_edge, kept_end)?;
    recipient_ok(
        n.graph(),
        &core.kept,
        &[cut_edge, core.donors[0], core.donors[1]],
        recipient,
    )?;
    surgery_cet_rooted(n, &core, cut_edge, kept_end, recipient)
}

/// All rooted CETs of `n` together with their results, excluding moves whose
/// result is isomorphic to `n`, in deterministic order.
pub fn cet_neighbors_rooted(n: &RootedNetwork) -> Vec<(Move, RootedNetwork)> {
    let mut out = Vec::new();
    let g = n.graph();
    let mut cuts = n.cut_edges();
    cuts.sort();
    for cut_edge in cuts {
        let kept_end = match g.edge(cut_edge) {
            EdgeKind::Directed { head, .. } => head,
            EdgeKind::Undirected { .. } => continue,
        };
        let core = match check_cet_rooted(n, cut_edge, kept_end) {
            Ok(c) => c,
            Err(_) => continue,
        };
        let banned = [cut_edge, core.donors[0], core.donors[1]];
        let mut recipients: Vec<EdgeId> = g
            .edges()
            .map(|(e, _)| e)
            .filter(|&f| recipient_ok(g, &core.kept, &banned, f).is_ok())
            .collect();
        recipients.sort();
        for recipient in recipients {
            if let Ok(outcome) = surgery_cet_rooted(n, &core, cut_edge, kept_end, recipient) {
                if !outcome.isomorphic_to_input {
                    let mv = Move::Cet {
                        cut_edge,
                        kept_end,
                        recipient,
                    };
                    out.push((mv, outcome.network));
                }
            }
        }
    }
    out
}

pub fn valid_cets_rooted(n: &RootedNetwork) -> Vec<Move> {
    cet_neighbors_rooted(n).into_iter().map(|(m, _)| m).collect()
}

// ---------------------------------------------------------------------------
// Semi-directed CET
// ---------------------------------------------------------------------------

struct SemiCetCore {
    suppressed: VertexId,
    donors: [EdgeId; 2],
    kept: HashSet<VertexId>,
}

fn check_cet_semi(
    n: &SemiDirectedNetwork,
    cut_edge: EdgeId,
    kept_end: VertexId,
    partners: &[RootedNetwork],
) -> Result<SemiCetCore, MoveError> {
    let g = n.graph();
    if !g.has_edge(cut_edge) {
        return invalid("cut edge does not exist");
    }
    let k = g.edge(cut_edge);
    if k.is_directed() {
        return invalid("reticulation edges are never cut edges");
    }
    let (a, b) = k.endpoints();
    let suppressed = if kept_end == a {
        b
    } else if kept_end == b {
        a
    } else {
        return invalid("kept end is not an endpoint of the cut edge");
    };
    if g.label(suppressed).is_some() {
        return invalid("suppressed end is a leaf");
    }
    if n.is_reticulation(suppressed) {
        return invalid("suppressed end is a reticulation");
    }
    if !n.cut_edges().contains(&cut_edge) {
        return invalid("edge is not a cut edge");
    }

    // Some rooted partner must have the suppressed end as the parent of the
    // kept end, or carry the cut edge as the pair of root-child cut edges.
    let (u, v) = (suppressed, kept_end);
    let cond = partners.iter().any(|p| {
        let pg = p.graph();
        let parent_of = pg.edges().any(|(_, k)| matches!(k, EdgeKind::Directed { tail, head } if tail == u && head == v));
        if parent_of {
            return true;
        }
        let t = p.root_child();
        if t == u || t == v {
            return false;
        }
        let has = |x: VertexId, y: VertexId| {
            pg.edges()
                .find(|(_, k)| matches!(k, EdgeKind::Directed { tail, head } if *tail == x && *head == y))
                .map(|(e, _)| e)
        };
        match (has(t, u), has(t, v)) {
            (Some(tu), Some(tv)) => {
                let cuts = p.cut_edges();
                cuts.contains(&p.root_edge()) && cuts.contains(&tu) && cuts.contains(&tv)
            }
            _ => false,
        }
    });
    if !cond {
        return invalid("no rooted partner satisfies the cut-edge conditions");
    }

    let donors: Vec<EdgeId> = g
        .incident_edges(suppressed)
        .into_iter()
        .filter(|&e| e != cut_edge)
        .collect();
    if donors.len() != 2 {
        return invalid("suppressed end does not have exactly two donor edges");
    }
    let kept = component_without(g, suppressed, cut_edge);
    debug_assert!(!kept.contains(&kept_end));
    Ok(SemiCetCore {
        suppressed,
        donors: [donors[0], donors[1]],
        kept,
    })
}

fn surgery_cet_semi(
    n: &SemiDirectedNetwork,
    core: &SemiCetCore,
    cut_edge: EdgeId,
    kept_end: VertexId,
    recipient: EdgeId,
) -> Result<CetOutcome<SemiDirectedNetwork>, MoveError> {
    let mut g = n.graph().clone();
    g.remove_edge(cut_edge);
    let merged_donor = g.suppress_semi(core.suppressed);
    let (u_new, _, _) = g.subdivide_semi(recipient);
    let attach_edge = g.add_undirected(u_new, kept_end);
    let network = SemiDirectedNetwork::validate(g)
        .map_err(|e| MoveError::Invalid(format!("result not a semi-directed network: {e}")))?;
    let isomorphic_to_input = network.canonical_code() == n.canonical_code();
    Ok(CetOutcome {
        network,
        new_vertex: u_new,
        attach_edge,
        merged_donor,
        isomorphic_to_input,
    })
}

/// Applies a semi-directed CET, verifying the cut-edge and rooted-partner
/// conditions. Isomorphic results are accepted and flagged.
pub fn apply_cet_semidirected(
    n: &SemiDirectedNetwork,
    m: &Move,
) -> Result<CetOutcome<SemiDirectedNetwork>, MoveError> {
    let (cut_edge, kept_end, recipient) = match *m {
        Move::Cet {
            cut_edge,
            kept_end,
            recipient,
        } => (cut_edge, kept_end, recipient),
        _ => return invalid("not a CET"),
    };
    let partners = n.partners_raw();
    let core = check_cet_semi(n, cut_edge, kept_end, &partners)?;
    recipient_ok(
        n.graph(),
        &core.kept,
        &[cut_edge, core.donors[0], core.donors[1]],
        recipient,
    )?;
    surgery_cet_semi(n, &core, cut_edge, kept_end, recipient)
}

/// All semi-directed CETs of `n` with their results, excluding isomorphic
/// results, in deterministic order.
pub fn cet_neighbors_semidirected(n: &SemiDirectedNetwork) -> Vec<(Move, SemiDirectedNetwork)> {
    let mut out = Vec::new();
    let g = n.graph();
    let partners = n.partners_raw();
    let mut cuts = n.cut_edges();
    cuts.sort();
    for cut_edge in cuts {
        let (a, b) = g.edge(cut_edge).endpoints();
        let mut roles = [(a, b), (b, a)];
        roles.sort();
        for (kept_end, _) in roles {
            let core = match check_cet_semi(n, cut_edge, kept_end, &partners) {
                Ok(c) => c,
                Err(_) => continue,
            };
            let banned = [cut_edge, core.donors[0], core.donors[1]];
            let mut recipients: Vec<EdgeId> = g
                .edges()
                .map(|(e, _)| e)
                .filter(|&f| recipient_ok(g, &core.kept, &banned, f).is_ok())
                .collect();
            recipients.sort();
            for recipient in recipients {
                if let Ok(outcome) = surgery_cet_semi(n, &core, cut_edge, kept_end, recipient) {
                    if !outcome.isomorphic_to_input {
                        let mv = Move::Cet {
                            cut_edge,
                            kept_end,
                            recipient,
                        };
                        out.push((mv, outcome.network));
                    }
                }
            }
        }
    }
    out
}

pub fn valid_cets_semidirected(n: &SemiDirectedNetwork) -> Vec<Move> {
    cet_neighbors_semidirected(n)
        .into_iter()
        .map(|(m, _)| m)
        .collect()
}

// ---------------------------------------------------------------------------
// CET₁ and parallel-pair effects
// ---------------------------------------------------------------------------

/// True iff the recipient edge is incident with one of the two donor edges.
pub fn is_cet1(n: &SemiDirectedNetwork, m: &Move) -> Result<bool, MoveError> {
    let (cut_edge, kept_end, recipient) = match *m {
        Move::Cet {
            cut_edge,
            kept_end,
            recipient,
        } => (cut_edge, kept_end, recipient),
        _ => return invalid("not a CET"),
    };
    let g = n.graph();
    if !g.has_edge(cut_edge) || !g.has_edge(recipient) {
        return invalid("edge does not exist");
    }
    let suppressed = g.edge(cut_edge).other(kept_end);
    let far_ends: Vec<VertexId> = g
        .incident_edges(suppressed)
        .into_iter()
        .filter(|&e| e != cut_edge)
        .map(|e| g.edge(e).other(suppressed))
        .collect();
    let (p, q) = g.edge(recipient).endpoints();
    Ok(far_ends.contains(&p) || far_ends.contains(&q))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParallelEffect {
    None,
    /// Donor edges lie on a 3-cycle and the recipient on a 2-cycle: the CET
    /// moves the pair of parallel edges.
    RelocatesParallelPair,
    /// The loop/2-cycle exchange patterns.
    ExchangesLoopAndPairs,
}

pub fn cet_parallel_effect(n: &SemiDirectedNetwork, m: &Move) -> Result<ParallelEffect, MoveError> {
    let (cut_edge, kept_end, recipient) = match *m {
        Move::Cet {
            cut_edge,
            kept_end,
            recipient,
        } => (cut_edge, kept_end, recipient),
        _ => return invalid("not a CET"),
    };
    let g = n.graph();
    let suppressed = g.edge(cut_edge).other(kept_end);
    let donors: Vec<EdgeId> = g
        .incident_edges(suppressed)
        .into_iter()
        .filter(|&e| e != cut_edge)
        .collect();
    if donors.len() != 2 {
        return invalid("suppressed end does not have exactly two donor edges");
    }
    let cycles = n.underlying_cycles();
    let donors_on_3cycle = cycles
        .iter()
        .any(|c| c.len() == 3 && c.contains_edge(donors[0]) && c.contains_edge(donors[1]));
    let donors_form_2cycle = cycles
        .iter()
        .any(|c| c.len() == 2 && c.contains_edge(donors[0]) && c.contains_edge(donors[1]));
    let recipient_on_2cycle = cycles
        .iter()
        .any(|c| c.len() == 2 && c.contains_edge(recipient));
    let recipient_is_loop = g.edge(recipient).is_loop();

    if donors_on_3cycle && recipient_on_2cycle {
        Ok(ParallelEffect::RelocatesParallelPair)
    } else if (donors_on_3cycle && recipient_is_loop)
        || (donors_form_2cycle && recipient_on_2cycle)
    {
        Ok(ParallelEffect::ExchangesLoopAndPairs)
    } else {
        Ok(ParallelEffect::None)
    }
}

// ---------------------------------------------------------------------------
// CET⁻
// ---------------------------------------------------------------------------

pub fn apply_cet_minus(n: &SemiDirectedNetwork, m: &Move) -> Result<CetMinusOutcome, MoveError> {
    let ret_edge = match *m {
        Move::CetMinus { ret_edge } => ret_edge,
        _ => return invalid("not a CET-"),
    };
    let g0 = n.graph();
    if !g0.has_edge(ret_edge) {
        return invalid("reticulation edge does not exist");
    }
    let (tail, head) = match g0.edge(ret_edge) {
        EdgeKind::Directed { tail, head } => (tail, head),
        EdgeKind::Undirected { .. } => return invalid("edge is not a reticulation edge"),
    };

    let mut g = g0.clone();
    if tail == head {
        // Loop: delete the loop vertex, then suppress its freed neighbor.
        let u = tail;
        let neighbor_edge = g
            .incident_edges(u)
            .into_iter()
            .find(|&e| e != ret_edge)
            .ok_or_else(|| MoveError::Invalid("loop vertex has no neighbor".into()))?;
        let w = g.edge(neighbor_edge).other(u);
        if n.is_reticulation(w) {
            return invalid("loop neighbor is a reticulation");
        }
        g.remove_vertex(u);
        if g.label(w).is_some() {
            return invalid("loop neighbor is a leaf; the result degenerates");
        }
        let merged = g.suppress_semi(w);
        let network = SemiDirectedNetwork::validate(g)
            .map_err(|e| MoveError::Invalid(format!("result not a semi-directed network: {e}")))?;
        return Ok(CetMinusOutcome {
            network,
            inverse: CetPlusVariant::Loop { edge: merged },
        });
    }

    let (u, v) = (tail, head);
    if n.is_reticulation(u) {
        return invalid("tail of the reticulation edge is a reticulation");
    }
    // The sibling in-edge of the reticulation becomes undirected.
    let sibling = g
        .incident_edges(v)
        .into_iter()
        .find(|&e| {
            e != ret_edge
                && matches!(g.edge(e), EdgeKind::Directed { head, .. } if head == v)
        })
        .ok_or_else(|| MoveError::Invalid("head has no second in-edge".into()))?;
    let sib_tail = match g.edge(sibling) {
        EdgeKind::Directed { tail, .. } => tail,
        _ => unreachable!(),
    };
    g.remove_edge(sibling);
    let sib_und = g.add_undirected(sib_tail, v);
    g.remove_edge(ret_edge);

    if g.label(u).is_some() || g.label(v).is_some() {
        return invalid("a freed endpoint is a leaf; the result degenerates");
    }
    let u_donor_ends: Vec<VertexId> = g
        .incident_edges(u)
        .iter()
        .map(|&e| g.edge(e).other(u))
        .collect();
    let merged_u = g.suppress_semi(u);
    // v's in-side edge is the undirected sibling unless it was consumed by
    // u's suppression (they were mutually parallel).
    let (in_side, p_final) = if g.has_edge(sib_und) {
        (sib_und, g.edge(sib_und).other(v))
    } else {
        (merged_u, g.edge(merged_u).other(v))
    };
    let _ = in_side;
    let merged_v = g.suppress_semi(v);

    let second = if g.has_edge(merged_u) {
        SecondTarget::Existing(merged_u)
    } else {
        // merged_u joined u's far ends a and v; after v's suppression the
        // reconstruction subdivides merged_v on the a side.
        let a = u_donor_ends
            .iter()
            .copied()
            .find(|&x| x != v)
            .ok_or_else(|| MoveError::Invalid("degenerate donor configuration".into()))?;
        SecondTarget::HalfTowards(a)
    };
    let (ea, _eb) = g.edge(merged_v).endpoints();
    let head_side = if p_final == ea { HeadSide::A } else { HeadSide::B };

    let network = SemiDirectedNetwork::validate(g)
        .map_err(|e| MoveError::Invalid(format!("result not a semi-directed network: {e}")))?;
    Ok(CetMinusOutcome {
        network,
        inverse: CetPlusVariant::TwoEdge {
            first: merged_v,
            second,
            head: head_side,
        },
    })
}

pub fn cet_minus_neighbors(n: &SemiDirectedNetwork) -> Vec<(Move, SemiDirectedNetwork)> {
    let mut out = Vec::new();
    let mut edges: Vec<EdgeId> = n
        .graph()
        .edges()
        .filter(|(_, k)| k.is_directed())
        .map(|(e, _)| e)
        .collect();
    edges.sort();
    for ret_edge in edges {
        let mv = Move::CetMinus { ret_edge };
        if let Ok(outcome) = apply_cet_minus(n, &mv) {
            out.push((mv, outcome.network));
        }
    }
    out
}

pub fn valid_cet_minus(n: &SemiDirectedNetwork) -> Vec<Move> {
    cet_minus_neighbors(n).into_iter().map(|(m, _)| m).collect()
}

// ---------------------------------------------------------------------------
// CET⁺
// ---------------------------------------------------------------------------

pub fn apply_cet_plus(n: &SemiDirectedNetwork, m: &Move) -> Result<CetPlusOutcome, MoveError> {
    let variant = match m {
        Move::CetPlus(v) => v,
        _ => return invalid("not a CET+"),
    };
    let mut g = n.graph().clone();
    match *variant {
        CetPlusVariant::Loop { edge } => {
            if !g.has_edge(edge) {
                return invalid("edge does not exist");
            }
            let (v_new, _, _) = g.subdivide_semi(edge);
            let u_new = g.add_vertex();
            g.add_undirected(u_new, v_new);
            let loop_edge = g.add_directed(u_new, u_new);
            let network = SemiDirectedNetwork::validate(g).map_err(|e| {
                MoveError::Invalid(format!("result not a semi-directed network: {e}"))
            })?;
            Ok(CetPlusOutcome {
                network,
                inverse_ret_edge: loop_edge,
            })
        }
        CetPlusVariant::TwoEdge {
            first,
            second,
            head,
        } => {
            if !g.has_edge(first) {
                return invalid("first edge does not exist");
            }
            if let SecondTarget::Existing(e) = second {
                if e == first {
                    return invalid("second edge must differ from the first; use a half");
                }
                if !n.graph().has_edge(e) {
                    return invalid("second edge does not exist");
                }
            }
            let (end_a, end_b) = g.edge(first).endpoints();
            let (v_new, half_a, half_b) = g.subdivide_semi(first);
            let second_edge = match second {
                SecondTarget::Existing(e) => e,
                SecondTarget::HalfTowards(x) => {
                    if x == end_a {
                        half_a
                    } else if x == end_b {
                        half_b
                    } else {
                        return invalid("half marker is not an endpoint of the first edge");
                    }
                }
            };
            let (u_new, _, _) = g.subdivide_semi(second_edge);
            g.add_directed(u_new, v_new);

            // The flank of v on the requested side, after both subdivisions.
            let side_end = match head {
                HeadSide::A => end_a,
                HeadSide::B => end_b,
            };
            let flank = g
                .incident_edges(v_new)
                .into_iter()
                .filter(|&e| {
                    let k = g.edge(e);
                    !(k.is_directed()
                        && matches!(k, EdgeKind::Directed { tail, head } if tail == u_new && head == v_new))
                })
                .find(|&e| {
                    let other = g.edge(e).other(v_new);
                    // Directly the original endpoint, or the fresh vertex
                    // that took its place on this side.
                    other == side_end
                        || (matches!(second, SecondTarget::HalfTowards(x) if x == side_end)
                            && other == u_new)
                })
                .ok_or_else(|| MoveError::Invalid("no flank on the requested side".into()))?;
            match g.edge(flank) {
                EdgeKind::Undirected { .. } => {
                    let other = g.edge(flank).other(v_new);
                    g.remove_edge(flank);
                    g.add_directed(other, v_new);
                }
                EdgeKind::Directed { tail, head } => {
                    // Already directed out of v; redirecting strips the old
                    // head, which validation will almost surely reject.
                    if head == v_new {
                        return invalid("flank already directed into the new vertex");
                    }
                    g.remove_edge(flank);
                    let _ = tail;
                    g.add_directed(head, v_new);
                }
            }
            let added = g
                .edges()
                .find(|(_, k)| {
                    matches!(k, EdgeKind::Directed { tail, head } if *tail == u_new && *head == v_new)
                })
                .map(|(e, _)| e)
                .expect("the added edge survives");
            let network = SemiDirectedNetwork::validate(g).map_err(|e| {
                MoveError::Invalid(format!("result not a semi-directed network: {e}"))
            })?;
            Ok(CetPlusOutcome {
                network,
                inverse_ret_edge: added,
            })
        }
    }
}

pub fn cet_plus_neighbors(n: &SemiDirectedNetwork) -> Vec<(Move, SemiDirectedNetwork)> {
    let mut out = Vec::new();
    let g = n.graph();
    let mut edges: Vec<EdgeId> = g.edges().map(|(e, _)| e).collect();
    edges.sort();
    for &e in &edges {
        let mv = Move::CetPlus(CetPlusVariant::Loop { edge: e });
        if let Ok(outcome) = apply_cet_plus(n, &mv) {
            out.push((mv, outcome.network));
        }
    }
    for &first in &edges {
        let (a, b) = g.edge(first).endpoints();
        let mut seconds: Vec<SecondTarget> = edges
            .iter()
            .filter(|&&e| e != first)
            .map(|&e| SecondTarget::Existing(e))
            .collect();
        seconds.push(SecondTarget::HalfTowards(a));
        if b != a {
            seconds.push(SecondTarget::HalfTowards(b));
        }
        let heads: &[HeadSide] = if a == b {
            &[HeadSide::A]
        } else {
            &[HeadSide::A, HeadSide::B]
        };
        for second in seconds {
            for &head in heads {
                let mv = Move::CetPlus(CetPlusVariant::TwoEdge {
                    first,
                    second,
                    head,
                });
                if let Ok(outcome) = apply_cet_plus(n, &mv) {
                    out.push((mv, outcome.network));
                }
            }
        }
    }
    out
}

pub fn valid_cet_plus(n: &SemiDirectedNetwork) -> Vec<Move> {
    cet_plus_neighbors(n).into_iter().map(|(m, _)| m).collect()
}

// ---------------------------------------------------------------------------
// Inversion
// ---------------------------------------------------------------------------

/// The move that maps `apply(n, m)` back to `n` (up to isomorphism). The
/// returned move references edge ids of the value produced by re-applying
/// `m` to `n`, which `apply` reproduces deterministically.
pub fn inverse_move_rooted(n: &RootedNetwork, m: &Move) -> Result<Move, MoveError> {
    let outcome = apply_cet_rooted(n, m)?;
    let kept_end = match *m {
        Move::Cet { kept_end, .. } => kept_end,
        _ => unreachable!(),
    };
    Ok(Move::Cet {
        cut_edge: outcome.attach_edge,
        kept_end,
        recipient: outcome.merged_donor,
    })
}

pub fn inverse_move_semidirected(n: &SemiDirectedNetwork, m: &Move) -> Result<Move, MoveError> {
    match m {
        Move::Cet { kept_end, .. } => {
            let outcome = apply_cet_semidirected(n, m)?;
            Ok(Move::Cet {
                cut_edge: outcome.attach_edge,
                kept_end: *kept_end,
                recipient: outcome.merged_donor,
            })
        }
        Move::CetMinus { .. } => {
            let outcome = apply_cet_minus(n, m)?;
            Ok(Move::CetPlus(outcome.inverse))
        }
        Move::CetPlus(_) => {
            let outcome = apply_cet_plus(n, m)?;
            Ok(Move::CetMinus {
                ret_edge: outcome.inverse_ret_edge,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Move sequences
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    Rooted,
    SemiDirected,
}

#[derive(Debug, Clone)]
pub struct SequenceStep {
    pub mv: Move,
    pub result_code: CanonicalCode,
    pub isomorphic_result: bool,
}

/// An audited list of moves: every step records the canonical code of its
/// result so an independent replayer can verify the sequence without
/// trusting the generator.
#[derive(Debug, Clone)]
pub struct MoveSequence {
    pub kind: SequenceKind,
    pub start_code: CanonicalCode,
    /// Bound every intermediate (and endpoint) must satisfy.
    pub class_bound: Option<LevelClass>,
    pub steps: Vec<SequenceStep>,
}

impl MoveSequence {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn end_code(&self) -> &CanonicalCode {
        self.steps
            .last()
            .map(|s| &s.result_code)
            .unwrap_or(&self.start_code)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReplayError {
    #[error("start network does not match the recorded start code")]
    StartMismatch,
    #[error("step {0}: {1}")]
    Step(usize, MoveError),
    #[error("step {0}: result code differs from the recorded code")]
    CodeMismatch(usize),
    #[error("step {0}: intermediate violates the class bound")]
    ClassViolation(usize),
}

/// Replays a rooted sequence from its concrete start value, checking codes
/// and the class bound at every step.
pub fn replay_rooted(
    seq: &MoveSequence,
    start: &RootedNetwork,
) -> Result<Vec<RootedNetwork>, ReplayError> {
    if start.canonical_code() != &seq.start_code {
        return Err(ReplayError::StartMismatch);
    }
    check_class(seq, start.level_class(), usize::MAX)?;
    let mut cur = start.clone();
    let mut out = Vec::new();
    for (i, step) in seq.steps.iter().enumerate() {
        let outcome = apply_cet_rooted(&cur, &step.mv).map_err(|e| ReplayError::Step(i, e))?;
        if outcome.network.canonical_code() != &step.result_code {
            return Err(ReplayError::CodeMismatch(i));
        }
        check_class(seq, outcome.network.level_class(), i)?;
        cur = outcome.network.clone();
        out.push(outcome.network);
    }
    Ok(out)
}

pub fn replay_semidirected(
    seq: &MoveSequence,
    start: &SemiDirectedNetwork,
) -> Result<Vec<SemiDirectedNetwork>, ReplayError> {
    if start.canonical_code() != &seq.start_code {
        return Err(ReplayError::StartMismatch);
    }
    check_class(seq, start.level_class(), usize::MAX)?;
    let mut cur = start.clone();
    let mut out = Vec::new();
    for (i, step) in seq.steps.iter().enumerate() {
        let net = match step.mv {
            Move::Cet { .. } => {
                apply_cet_semidirected(&cur, &step.mv)
                    .map_err(|e| ReplayError::Step(i, e))?
                    .network
            }
            Move::CetMinus { .. } => {
                apply_cet_minus(&cur, &step.mv)
                    .map_err(|e| ReplayError::Step(i, e))?
                    .network
            }
            Move::CetPlus(_) => {
                apply_cet_plus(&cur, &step.mv)
                    .map_err(|e| ReplayError::Step(i, e))?
                    .network
            }
        };
        if net.canonical_code() != &step.result_code {
            return Err(ReplayError::CodeMismatch(i));
        }
        check_class(seq, net.level_class(), i)?;
        cur = net.clone();
        out.push(net);
    }
    Ok(out)
}

fn check_class(seq: &MoveSequence, class: LevelClass, step: usize) -> Result<(), ReplayError> {
    if let Some(bound) = seq.class_bound {
        if !class.within(bound) {
            return Err(ReplayError::ClassViolation(if step == usize::MAX {
                0
            } else {
                step
            }));
        }
    }
    Ok(())
}

/// Rewrites a move's vertex and edge ids through an isomorphism map, so a
/// sequence built on one value can be replayed on an isomorphic copy.
pub fn translate_move(
    m: &Move,
    vmap: &HashMap<VertexId, VertexId>,
    emap: &HashMap<EdgeId, EdgeId>,
) -> Move {
    match *m {
        Move::Cet {
            cut_edge,
            kept_end,
            recipient,
        } => Move::Cet {
            cut_edge: emap[&cut_edge],
            kept_end: vmap[&kept_end],
            recipient: emap[&recipient],
        },
        Move::CetMinus { ret_edge } => Move::CetMinus {
            ret_edge: emap[&ret_edge],
        },
        Move::CetPlus(CetPlusVariant::Loop { edge }) => Move::CetPlus(CetPlusVariant::Loop {
            edge: emap[&edge],
        }),
        Move::CetPlus(CetPlusVariant::TwoEdge {
            first,
            second,
            head,
        }) => Move::CetPlus(CetPlusVariant::TwoEdge {
            first: emap[&first],
            second: match second {
                SecondTarget::Existing(e) => SecondTarget::Existing(emap[&e]),
                SecondTarget::HalfTowards(v) => SecondTarget::HalfTowards(vmap[&v]),
            },
            head,
        }),
    }
}

// ---------------------------------------------------------------------------
// CET₁ decomposition
// ---------------------------------------------------------------------------

/// Realizes a single CET as a sequence of CET₁ moves along the shortest
/// undirected path from the suppressed end to the recipient, as long as the
/// move does not relocate a parallel pair or exchange a loop for pairs.
pub fn cet1_decompose(n: &SemiDirectedNetwork, m: &Move) -> Result<MoveSequence, MoveError> {
    let (cut_edge, kept_end, recipient) = match *m {
        Move::Cet {
            cut_edge,
            kept_end,
            recipient,
        } => (cut_edge, kept_end, recipient),
        _ => return invalid("not a CET"),
    };
    let leaves = n.leaves().len();
    let k = n.reticulations().len();
    let class = n.level_class();
    let bound = if k + 1 < leaves {
        if class != LevelClass::Level1 {
            return Err(MoveError::PreconditionViolated(
                "network must be level-1 when k <= |X|-2".into(),
            ));
        }
        LevelClass::Level1
    } else {
        if !class.within(LevelClass::AlmostLevel1) {
            return Err(MoveError::PreconditionViolated(
                "network must be almost level-1".into(),
            ));
        }
        LevelClass::AlmostLevel1
    };
    if cet_parallel_effect(n, m)? != ParallelEffect::None {
        return Err(MoveError::PreconditionViolated(
            "move relocates a parallel pair or exchanges a loop for pairs".into(),
        ));
    }

    let target = apply_cet_semidirected(n, m)?;
    let mut seq = MoveSequence {
        kind: SequenceKind::SemiDirected,
        start_code: n.canonical_code().clone(),
        class_bound: Some(bound),
        steps: Vec::new(),
    };

    if is_cet1(n, m)? {
        seq.steps.push(SequenceStep {
            mv: m.clone(),
            result_code: target.network.canonical_code().clone(),
            isomorphic_result: target.isomorphic_to_input,
        });
        return Ok(seq);
    }

    let g = n.graph();
    let suppressed = g.edge(cut_edge).other(kept_end);
    let canon = canonical_form(g, SEMI_TAG, LabelMode::Respect, &[]).labeling;

    // Shortest undirected path from the suppressed end to an endpoint of the
    // recipient, avoiding the cut edge; ties resolved by canonical order.
    let (rp, rq) = g.edge(recipient).endpoints();
    let mut dist: HashMap<VertexId, usize> = HashMap::from([(suppressed, 0)]);
    let mut parent: HashMap<VertexId, (VertexId, EdgeId)> = HashMap::new();
    let mut frontier = vec![suppressed];
    while !frontier.is_empty() {
        let mut next: Vec<VertexId> = Vec::new();
        frontier.sort_by_key(|v| canon[v]);
        for &v in &frontier {
            let mut nbrs: Vec<(EdgeId, VertexId)> = g
                .incident_edges(v)
                .into_iter()
                .filter(|&e| e != cut_edge && !g.edge(e).is_loop())
                .map(|e| (e, g.edge(e).other(v)))
                .collect();
            nbrs.sort_by_key(|&(e, u)| (canon[&u], e));
            for (e, u) in nbrs {
                if !dist.contains_key(&u) {
                    dist.insert(u, dist[&v] + 1);
                    parent.insert(u, (v, e));
                    next.push(u);
                }
            }
        }
        frontier = next;
    }
    let pick = |x: VertexId| dist.get(&x).map(|&d| (d, canon[&x], x));
    let goal = match (pick(rp), pick(rq)) {
        (Some(a), Some(b)) => {
            if rp == rq {
                a
            } else {
                a.min(b)
            }
        }
        (Some(a), None) => a,
        (None, Some(b)) => b,
        (None, None) => return Err(MoveError::NoPath),
    };
    let p_end = goal.2;

    // Path edges u0=suppressed .. ul=p_end, then the recipient itself.
    let mut path_edges: VecDeque<EdgeId> = VecDeque::new();
    let mut walk = p_end;
    while walk != suppressed {
        let (prev, e) = parent[&walk];
        path_edges.push_front(e);
        walk = prev;
    }
    path_edges.push_back(recipient);
    // The first path edge is a donor of the initial move; recipients are the
    // remaining edges in order.
    path_edges.pop_front();
    if path_edges.is_empty() {
        return Err(MoveError::NoPath);
    }

    let mut cur = n.clone();
    let mut cur_cut = cut_edge;
    for &step_recipient in path_edges.iter() {
        let mv = Move::Cet {
            cut_edge: cur_cut,
            kept_end,
            recipient: step_recipient,
        };
        if !is_cet1(&cur, &mv).unwrap_or(false) {
            return Err(MoveError::Invalid(
                "decomposition step is not a CET1".into(),
            ));
        }
        let outcome = apply_cet_semidirected(&cur, &mv)?;
        seq.steps.push(SequenceStep {
            mv,
            result_code: outcome.network.canonical_code().clone(),
            isomorphic_result: outcome.isomorphic_to_input,
        });
        if !outcome.network.level_class().within(bound) {
            return Err(MoveError::Invalid(
                "decomposition intermediate violates the class bound".into(),
            ));
        }
        cur = outcome.network;
        cur_cut = outcome.attach_edge;
    }

    if seq.end_code() != target.network.canonical_code() {
        return Err(MoveError::Invalid(
            "decomposition endpoint differs from the single-move result".into(),
        ));
    }
    Ok(seq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::LeafLabel;
    use crate::network::testnets::*;

    #[test]
    fn cherry_has_no_cets() {
        // Every application on the unique two-leaf rooted tree is isomorphic
        // to the input.
        assert!(valid_cets_rooted(&rooted_cherry()).is_empty());
    }

    fn rooted_caterpillar3() -> RootedNetwork {
        let mut g = MixedGraph::new();
        let root = g.add_vertex();
        let p3 = g.add_vertex();
        let p2 = g.add_vertex();
        let x1 = g.add_leaf(LeafLabel::new("x1").unwrap());
        let x2 = g.add_leaf(LeafLabel::new("x2").unwrap());
        let x3 = g.add_leaf(LeafLabel::new("x3").unwrap());
        g.add_directed(root, p3);
        g.add_directed(p3, x3);
        g.add_directed(p3, p2);
        g.add_directed(p2, x1);
        g.add_directed(p2, x2);
        RootedNetwork::validate(g, root).unwrap()
    }

    #[test]
    fn three_leaf_rooted_trees_mutually_reachable() {
        // Rooted CETs on trees are rooted SPR moves; the three rooted trees
        // on three leaves form one neighborhood.
        let n = rooted_caterpillar3();
        let mut codes: Vec<_> = cet_neighbors_rooted(&n)
            .into_iter()
            .map(|(_, r)| r.canonical_code().clone())
            .collect();
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), 2);
        assert!(!codes.contains(n.canonical_code()));
    }

    #[test]
    fn rooted_cet_is_reversible() {
        let n = rooted_caterpillar3();
        for (mv, result) in cet_neighbors_rooted(&n) {
            let inv = inverse_move_rooted(&n, &mv).unwrap();
            let back = apply_cet_rooted(&result, &inv).unwrap();
            assert!(back.network.is_isomorphic(&n));
        }
    }

    #[test]
    fn recipient_in_moved_component_rejected() {
        let n = rooted_caterpillar3();
        // Cut the edge into the cherry and try to regraft onto an edge that
        // travels with the cherry.
        let g = n.graph();
        let (cut_edge, head) = g
            .edges()
            .find_map(|(e, k)| match k {
                EdgeKind::Directed { tail, head }
                    if g.label(head).is_none() && tail != n.root() =>
                {
                    Some((e, head))
                }
                _ => None,
            })
            .unwrap();
        let inside = g
            .edges()
            .find(|(_, k)| matches!(k, EdgeKind::Directed { tail, .. } if *tail == head))
            .map(|(e, _)| e)
            .unwrap();
        let mv = Move::Cet {
            cut_edge,
            kept_end: head,
            recipient: inside,
        };
        assert!(matches!(
            apply_cet_rooted(&n, &mv),
            Err(MoveError::Invalid(_))
        ));
    }

    #[test]
    fn quartet_cets_reach_both_other_topologies() {
        let n = semi_quartet();
        let mut codes: Vec<_> = cet_neighbors_semidirected(&n)
            .into_iter()
            .map(|(_, r)| r.canonical_code().clone())
            .collect();
        codes.sort();
        codes.dedup();
        assert_eq!(codes.len(), 2, "both other quartet topologies reachable");
    }

    #[test]
    fn two_leaf_tree_has_no_cets() {
        assert!(valid_cets_semidirected(&semi_two_leaf_tree()).is_empty());
    }

    #[test]
    fn semi_cet_is_reversible() {
        let n = semi_quartet();
        for (mv, result) in cet_neighbors_semidirected(&n) {
            let inv = inverse_move_semidirected(&n, &mv).unwrap();
            let back = apply_cet_semidirected(&result, &inv).unwrap();
            assert!(back.network.is_isomorphic(&n));
        }
    }

    /// A loop in the component of the suppressed end pins every rooted
    /// partner there, so the roles of the cut edge cannot be interchanged.
    fn loop_sided_network() -> (SemiDirectedNetwork, EdgeId, VertexId, VertexId, EdgeId) {
        let mut g = MixedGraph::new();
        let z = g.add_vertex();
        let u = g.add_vertex();
        let v = g.add_vertex();
        let x1 = g.add_leaf(LeafLabel::new("x1").unwrap());
        let x2 = g.add_leaf(LeafLabel::new("x2").unwrap());
        let x3 = g.add_leaf(LeafLabel::new("x3").unwrap());
        let loop_edge = g.add_directed(z, z);
        g.add_undirected(z, u);
        g.add_undirected(u, x1);
        let cut = g.add_undirected(u, v);
        g.add_undirected(v, x2);
        g.add_undirected(v, x3);
        let n = SemiDirectedNetwork::validate(g).unwrap();
        (n, cut, u, v, loop_edge)
    }

    #[test]
    fn cut_edge_roles_cannot_always_be_interchanged() {
        let (n, cut, u, v, loop_edge) = loop_sided_network();
        let mv = Move::Cet {
            cut_edge: cut,
            kept_end: v,
            recipient: loop_edge,
        };
        let outcome = apply_cet_semidirected(&n, &mv).unwrap();
        // Subdividing the loop leaves a pair of parallel edges.
        assert_eq!(
            outcome
                .network
                .underlying_cycles()
                .iter()
                .filter(|c| c.len() == 2)
                .count(),
            1
        );
        assert!(outcome.network.underlying_cycles().iter().all(|c| c.len() != 1));

        // Keeping u instead: no rooted partner makes v a parent of u.
        let listed = valid_cets_semidirected(&n);
        assert!(listed
            .iter()
            .all(|m| !matches!(m, Move::Cet { cut_edge, kept_end, .. } if *cut_edge == cut && *kept_end == u)));
        assert!(listed
            .iter()
            .any(|m| matches!(m, Move::Cet { cut_edge, kept_end, .. } if *cut_edge == cut && *kept_end == v)));
    }

    #[test]
    fn cet_minus_on_parallel_pair_gives_two_leaf_tree() {
        let n = semi_parallel_pair(false);
        let moves = valid_cet_minus(&n);
        assert!(!moves.is_empty());
        for mv in &moves {
            let out = apply_cet_minus(&n, mv).unwrap();
            assert!(out.network.is_isomorphic(&semi_two_leaf_tree()));
        }
    }

    #[test]
    fn cet_minus_on_loop_network_gives_two_leaf_tree() {
        let n = semi_loop();
        let loop_edge = n
            .graph()
            .edges()
            .find(|(_, k)| k.is_loop())
            .map(|(e, _)| e)
            .unwrap();
        let out = apply_cet_minus(&n, &Move::CetMinus { ret_edge: loop_edge }).unwrap();
        assert!(out.network.is_isomorphic(&semi_two_leaf_tree()));
    }

    #[test]
    fn tree_has_no_cet_minus() {
        assert!(valid_cet_minus(&semi_quartet()).is_empty());
    }

    #[test]
    fn cet_plus_loop_variant_on_two_leaf_tree() {
        let n = semi_two_leaf_tree();
        let edge = n.graph().edges().next().unwrap().0;
        let out = apply_cet_plus(&n, &Move::CetPlus(CetPlusVariant::Loop { edge })).unwrap();
        assert!(out.network.is_isomorphic(&semi_loop()));
    }

    #[test]
    fn cet_plus_two_edge_on_two_leaf_tree_gives_parallel_pairs() {
        let n = semi_two_leaf_tree();
        let mut codes: Vec<_> = cet_plus_neighbors(&n)
            .into_iter()
            .filter(|(m, _)| matches!(m, Move::CetPlus(CetPlusVariant::TwoEdge { .. })))
            .map(|(_, r)| r.canonical_code().clone())
            .collect();
        codes.sort();
        codes.dedup();
        let expect: Vec<_> = {
            let mut v = vec![
                semi_parallel_pair(false).canonical_code().clone(),
                semi_parallel_pair(true).canonical_code().clone(),
            ];
            v.sort();
            v
        };
        assert_eq!(codes, expect);
    }

    #[test]
    fn second_loop_is_rejected() {
        let n = semi_loop();
        let pendant = n
            .graph()
            .edges()
            .find(|(_, k)| !k.is_directed())
            .map(|(e, _)| e)
            .unwrap();
        let mv = Move::CetPlus(CetPlusVariant::Loop { edge: pendant });
        assert!(apply_cet_plus(&n, &mv).is_err());
    }

    #[test]
    fn cet_plus_and_minus_are_mutually_inverse() {
        let n = semi_two_leaf_tree();
        for (mv, result) in cet_plus_neighbors(&n) {
            let inv = inverse_move_semidirected(&n, &mv).unwrap();
            let back = match inv {
                Move::CetMinus { .. } => apply_cet_minus(&result, &inv).unwrap().network,
                _ => panic!("inverse of CET+ must be a CET-"),
            };
            assert!(back.is_isomorphic(&n));
        }
        let pp = semi_parallel_pair(false);
        for (mv, result) in cet_minus_neighbors(&pp) {
            let inv = inverse_move_semidirected(&pp, &mv).unwrap();
            let back = apply_cet_plus(&result, &inv).unwrap().network;
            assert!(back.is_isomorphic(&pp));
        }
    }

    #[test]
    fn double_inverse_reproduces_the_original_result() {
        let n = semi_quartet();
        for (mv, result) in cet_neighbors_semidirected(&n) {
            let inv = inverse_move_semidirected(&n, &mv).unwrap();
            let inv_inv = inverse_move_semidirected(&result, &inv).unwrap();
            let replayed = apply_cet_semidirected(&result, &inv).unwrap();
            let forward_again = apply_cet_semidirected(&replayed.network, &inv_inv).unwrap();
            assert!(forward_again.network.is_isomorphic(&result));
        }
    }

    fn caterpillar6() -> SemiDirectedNetwork {
        let mut g = MixedGraph::new();
        let a = g.add_vertex();
        let b = g.add_vertex();
        let c = g.add_vertex();
        let d = g.add_vertex();
        let xs: Vec<_> = (1..=6)
            .map(|i| g.add_leaf(LeafLabel::new(&format!("x{i}")).unwrap()))
            .collect();
        g.add_undirected(a, xs[0]);
        g.add_undirected(a, xs[1]);
        g.add_undirected(a, b);
        g.add_undirected(b, xs[2]);
        g.add_undirected(b, c);
        g.add_undirected(c, xs[3]);
        g.add_undirected(c, d);
        g.add_undirected(d, xs[4]);
        g.add_undirected(d, xs[5]);
        SemiDirectedNetwork::validate(g).unwrap()
    }

    #[test]
    fn cet1_requires_recipient_incident_to_a_donor() {
        let n = caterpillar6();
        let g = n.graph();
        let find = |x: VertexId, y: VertexId| {
            g.edges()
                .find(|(_, k)| k.touches(x) && k.touches(y))
                .map(|(e, _)| e)
                .unwrap()
        };
        let (a, b, c, d) = (VertexId(0), VertexId(1), VertexId(2), VertexId(3));
        let x3 = g.find_leaf(&LeafLabel::new("x3").unwrap()).unwrap();
        let x5 = g.find_leaf(&LeafLabel::new("x5").unwrap()).unwrap();
        let x1 = g.find_leaf(&LeafLabel::new("x1").unwrap()).unwrap();
        let cut = find(b, x3);
        let near = Move::Cet {
            cut_edge: cut,
            kept_end: x3,
            recipient: find(c, d),
        };
        let far = Move::Cet {
            cut_edge: cut,
            kept_end: x3,
            recipient: find(d, x5),
        };
        let also_near = Move::Cet {
            cut_edge: cut,
            kept_end: x3,
            recipient: find(a, x1),
        };
        assert!(is_cet1(&n, &near).unwrap());
        assert!(is_cet1(&n, &also_near).unwrap());
        assert!(!is_cet1(&n, &far).unwrap());
    }

    #[test]
    fn every_cet_on_three_leaf_star_is_cet1() {
        let mut g = MixedGraph::new();
        let c = g.add_vertex();
        for i in 1..=3 {
            let x = g.add_leaf(LeafLabel::new(&format!("x{i}")).unwrap());
            g.add_undirected(c, x);
        }
        let n = SemiDirectedNetwork::validate(g).unwrap();
        for mv in valid_cets_semidirected(&n) {
            assert!(is_cet1(&n, &mv).unwrap());
        }
    }

    #[test]
    fn cet1_decomposition_walks_the_path() {
        let n = caterpillar6();
        let g = n.graph();
        let find = |x: VertexId, y: VertexId| {
            g.edges()
                .find(|(_, k)| k.touches(x) && k.touches(y))
                .map(|(e, _)| e)
                .unwrap()
        };
        let (b, d) = (VertexId(1), VertexId(3));
        let x3 = g.find_leaf(&LeafLabel::new("x3").unwrap()).unwrap();
        let x5 = g.find_leaf(&LeafLabel::new("x5").unwrap()).unwrap();
        let mv = Move::Cet {
            cut_edge: find(b, x3),
            kept_end: x3,
            recipient: find(d, x5),
        };
        let direct = apply_cet_semidirected(&n, &mv).unwrap();
        let seq = cet1_decompose(&n, &mv).unwrap();
        assert_eq!(seq.len(), 2);
        assert_eq!(seq.end_code(), direct.network.canonical_code());
        let nets = replay_semidirected(&seq, &n).unwrap();
        assert_eq!(nets.len(), 2);
    }

    #[test]
    fn cet1_decomposition_of_a_cet1_is_trivial() {
        let n = caterpillar6();
        for mv in valid_cets_semidirected(&n) {
            if is_cet1(&n, &mv).unwrap() {
                let seq = cet1_decompose(&n, &mv).unwrap();
                assert_eq!(seq.len(), 1);
                return;
            }
        }
        panic!("no CET1 found");
    }

    /// One 3-cycle, one parallel pair: a CET whose donors sit on the 3-cycle
    /// and whose recipient is a parallel edge relocates the pair.
    #[test]
    fn parallel_pair_relocation_is_classified() {
        let mut g = MixedGraph::new();
        let gv = g.add_vertex();
        let h = g.add_vertex();
        let r = g.add_vertex();
        let a = g.add_vertex();
        let p = g.add_vertex();
        let q = g.add_vertex();
        let x1 = g.add_leaf(LeafLabel::new("x1").unwrap());
        let x2 = g.add_leaf(LeafLabel::new("x2").unwrap());
        let x3 = g.add_leaf(LeafLabel::new("x3").unwrap());
        let x4 = g.add_leaf(LeafLabel::new("x4").unwrap());
        g.add_undirected(gv, h);
        g.add_directed(gv, r);
        g.add_directed(h, r);
        g.add_undirected(gv, a);
        let cut = g.add_undirected(h, x1);
        g.add_undirected(r, x2);
        g.add_undirected(a, p);
        g.add_undirected(a, x4);
        let par = g.add_directed(p, q);
        g.add_directed(p, q);
        g.add_undirected(q, x3);
        let n = SemiDirectedNetwork::validate(g).unwrap();
        // A single parallel pair still admits a level-1 partner: rooting on
        // a parallel edge opens the 2-cycle into a 3-cycle.
        assert_eq!(n.level_class(), LevelClass::Level1);

        let mv = Move::Cet {
            cut_edge: cut,
            kept_end: x1,
            recipient: par,
        };
        assert_eq!(
            cet_parallel_effect(&n, &mv).unwrap(),
            ParallelEffect::RelocatesParallelPair
        );
        assert!(matches!(
            cet1_decompose(&n, &mv),
            Err(MoveError::PreconditionViolated(_))
        ));

        // A recipient off the pair leaves the classification untouched.
        let pendant = n
            .graph()
            .edges()
            .find(|(_, k)| k.touches(x4) )
            .map(|(e, _)| e)
            .unwrap();
        let mv2 = Move::Cet {
            cut_edge: cut,
            kept_end: x1,
            recipient: pendant,
        };
        assert_eq!(cet_parallel_effect(&n, &mv2).unwrap(), ParallelEffect::None);
    }

    /// Two parallel pairs: donors forming one pair with the other pair as
    /// recipient exchanges pairs for a loop.
    #[test]
    fn loop_pair_exchange_is_classified() {
        let mut g = MixedGraph::new();
        let s = g.add_vertex();
        let w = g.add_vertex();
        let c = g.add_vertex();
        let p = g.add_vertex();
        let q = g.add_vertex();
        let x1 = g.add_leaf(LeafLabel::new("x1").unwrap());
        let x2 = g.add_leaf(LeafLabel::new("x2").unwrap());
        let x3 = g.add_leaf(LeafLabel::new("x3").unwrap());
        g.add_directed(s, w);
        g.add_directed(s, w);
        let cut = g.add_undirected(s, c);
        g.add_undirected(w, x1);
        g.add_undirected(c, x2);
        g.add_undirected(c, p);
        let par = g.add_directed(p, q);
        g.add_directed(p, q);
        g.add_undirected(q, x3);
        let n = SemiDirectedNetwork::validate(g).unwrap();
        assert_eq!(n.level_class(), LevelClass::AlmostLevel1);
        let mv = Move::Cet {
            cut_edge: cut,
            kept_end: c,
            recipient: par,
        };
        assert_eq!(
            cet_parallel_effect(&n, &mv).unwrap(),
            ParallelEffect::ExchangesLoopAndPairs
        );
    }

    /// Loop plus 3-cycle: donors on the 3-cycle with the loop as recipient
    /// exchanges the loop for pairs.
    #[test]
    fn loop_recipient_exchange_is_classified() {
        let mut g = MixedGraph::new();
        let z = g.add_vertex();
        let j = g.add_vertex();
        let gv = g.add_vertex();
        let h = g.add_vertex();
        let r = g.add_vertex();
        let x1 = g.add_leaf(LeafLabel::new("x1").unwrap());
        let x2 = g.add_leaf(LeafLabel::new("x2").unwrap());
        let x3 = g.add_leaf(LeafLabel::new("x3").unwrap());
        let lp = g.add_directed(z, z);
        g.add_undirected(z, j);
        g.add_undirected(j, x1);
        g.add_undirected(j, gv);
        g.add_undirected(gv, h);
        g.add_directed(gv, r);
        g.add_directed(h, r);
        let cut = g.add_undirected(h, x2);
        g.add_undirected(r, x3);
        let n = SemiDirectedNetwork::validate(g).unwrap();
        assert_eq!(n.level_class(), LevelClass::AlmostLevel1);
        let mv = Move::Cet {
            cut_edge: cut,
            kept_end: x2,
            recipient: lp,
        };
        assert_eq!(
            cet_parallel_effect(&n, &mv).unwrap(),
            ParallelEffect::ExchangesLoopAndPairs
        );
    }

    #[test]
    fn two_cet_route_between_swapped_parallel_pairs() {
        // The two leaf assignments of the parallel-pair network are joined
        // by a two-step route through the loop network.
        let a = semi_parallel_pair(false);
        let b = semi_parallel_pair(true);
        let mid: Vec<_> = cet_neighbors_semidirected(&a)
            .into_iter()
            .filter(|(_, r)| r.is_isomorphic(&semi_loop()))
            .collect();
        assert!(!mid.is_empty(), "loop network is one CET away");
        let (_, loopnet) = &mid[0];
        assert!(cet_neighbors_semidirected(loopnet)
            .into_iter()
            .any(|(_, r)| r.is_isomorphic(&b)));
        // But no single CET joins them directly.
        assert!(!cet_neighbors_semidirected(&a)
            .into_iter()
            .any(|(_, r)| r.is_isomorphic(&b)));
    }
}
