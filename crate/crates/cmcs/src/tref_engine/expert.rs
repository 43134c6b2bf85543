//! Expert-knowledge synthesis: for each anchor node, at most one incoming and
//! one outgoing synthetic trust edge derived from the propagative (min along a
//! path) and composable (max-or-min across paths, Bernoulli-selected) natures
//! of trust.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph_store::{Edge, TrustGraph, TrustLevel};

/// Whether the synthetic edge enters or leaves its anchor node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeDirection {
    IncomingToAnchor,
    OutgoingFromAnchor,
}

/// A synthesized trust edge. `rd` records the Bernoulli draw when the anchor
/// had more than one propagation path, so levels can be re-derived.
#[derive(Debug, Clone)]
pub struct ExpertEdge {
    pub src: usize,
    pub dst: usize,
    pub level: TrustLevel,
    pub direction: EdgeDirection,
    pub anchor: usize,
    pub rd: Option<f64>,
}

/// Bernoulli parameter for composing multiple propagation paths.
#[derive(Debug, Clone, Copy)]
pub struct BernoulliConfig {
    pub pr: f64,
    pub seed: u64,
}

/// Result of estimating the max-composition probability from training edges.
#[derive(Debug, Clone, Copy)]
pub struct PrEstimate {
    pub pr: f64,
    /// Number of (direct edge, >=2 two-hop paths) pairs that qualified.
    pub qualifying_pairs: usize,
}

/// Estimate Pr as the fraction of directly-labeled pairs whose level equals
/// the max over two-hop paths of the min-composed level, among pairs with at
/// least two such paths. Falls back to 0.5 when nothing qualifies.
pub fn estimate_pr(train: &[Edge], g: &TrustGraph) -> PrEstimate {
    let sub = g.edge_subgraph(train);
    let mut qualifying = 0usize;
    let mut matches = 0usize;
    for (a, c, direct) in sub.edges() {
        let mut path_levels: Vec<TrustLevel> = Vec::new();
        for &(b, lab) in sub.out_neighbors(a) {
            if b == c {
                continue;
            }
            if let Some(lbc) = sub.level(b, c) {
                path_levels.push(lab.min(lbc));
            }
        }
        if path_levels.len() >= 2 {
            qualifying += 1;
            let composed = path_levels.iter().copied().max().unwrap();
            if composed == direct {
                matches += 1;
            }
        }
    }
    if qualifying == 0 {
        eprintln!("warning: no qualifying pairs for Pr estimation, defaulting to 0.5");
        return PrEstimate {
            pr: 0.5,
            qualifying_pairs: 0,
        };
    }
    PrEstimate {
        pr: matches as f64 / qualifying as f64,
        qualifying_pairs: qualifying,
    }
}

fn mix_seed(seed: u64, id: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325 ^ seed.wrapping_mul(0x9e3779b97f4a7c15);
    for b in id.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Pick the lexicographically smallest (by node id) qualifying two-hop target
/// and compose its path levels. Returns None when no target qualifies.
fn compose_target(
    g: &TrustGraph,
    anchor: usize,
    incoming: bool,
    pr: f64,
    rng: &mut ChaCha8Rng,
) -> Option<(usize, TrustLevel, Option<f64>)> {
    let hop1: &[(usize, TrustLevel)] = if incoming {
        g.in_neighbors(anchor)
    } else {
        g.out_neighbors(anchor)
    };
    // Candidate targets two hops away with no direct edge in the expert
    // direction.
    let mut best: Option<usize> = None;
    for &(b, _) in hop1 {
        let hop2 = if incoming {
            g.in_neighbors(b)
        } else {
            g.out_neighbors(b)
        };
        for &(v, _) in hop2 {
            if v == anchor {
                continue;
            }
            let direct = if incoming {
                g.has_edge(v, anchor)
            } else {
                g.has_edge(anchor, v)
            };
            if direct {
                continue;
            }
            best = match best {
                None => Some(v),
                Some(cur) if g.id(v) < g.id(cur) => Some(v),
                other => other,
            };
        }
    }
    let target = best?;
    // Min-composition along every path anchor..target through a hop-1
    // neighbor.
    let mut path_levels: Vec<TrustLevel> = Vec::new();
    for &(b, l1) in hop1 {
        let l2 = if incoming {
            g.level(target, b)
        } else {
            g.level(b, target)
        };
        if let Some(l2) = l2 {
            path_levels.push(l1.min(l2));
        }
    }
    debug_assert!(!path_levels.is_empty());
    if hop1.len() == 1 {
        return Some((target, path_levels[0], None));
    }
    let rd: f64 = rng.gen();
    let level = if rd < pr {
        path_levels.iter().copied().max().unwrap()
    } else {
        path_levels.iter().copied().min().unwrap()
    };
    Some((target, level, Some(rd)))
}

/// Generate at most one incoming and one outgoing expert edge per node.
pub fn generate_expert_knowledge(g: &TrustGraph, cfg: &BernoulliConfig) -> Vec<ExpertEdge> {
    let mut out = Vec::new();
    for anchor in 0..g.node_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, g.id(anchor)));
        if let Some((v, level, rd)) = compose_target(g, anchor, true, cfg.pr, &mut rng) {
            out.push(ExpertEdge {
                src: v,
                dst: anchor,
                level,
                direction: EdgeDirection::IncomingToAnchor,
                anchor,
                rd,
            });
        }
        if let Some((v, level, rd)) = compose_target(g, anchor, false, cfg.pr, &mut rng) {
            out.push(ExpertEdge {
                src: anchor,
                dst: v,
                level,
                direction: EdgeDirection::OutgoingFromAnchor,
                anchor,
                rd,
            });
        }
    }
    out
}
