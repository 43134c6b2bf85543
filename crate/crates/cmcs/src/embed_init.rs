//! Initial node embeddings: biased random walks plus skip-gram training with
//! negative sampling, and a deterministic fallback initializer.
//!
//! Walks treat the trust graph as undirected; adjacency, not trust direction,
//! determines which nodes should embed near each other. Directed walks strand
//! sink nodes.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CmcsError, Result};
use crate::graph_store::TrustGraph;

/// Fixed-width vectors keyed by node id.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(|v| v.as_slice())
    }

    pub fn is_finite(&self) -> bool {
        self.vectors.values().all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Node2Vec walk and skip-gram hyperparameters. The embedding dimension is
/// fixed at 128 for full runs; everything else is configurable.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EmbedConfig {
    pub dim: usize,
    pub p: f64,
    pub q: f64,
    pub walk_len: usize,
    pub walks_per_node: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            dim: 128,
            p: 1.0,
            q: 1.0,
            walk_len: 40,
            walks_per_node: 10,
            window: 5,
            negatives: 5,
            epochs: 3,
            lr: 0.025,
            seed: 0,
        }
    }
}

fn mix_seed(seed: u64, id: &str) -> u64 {
    // FNV-1a over the id bytes folded into the run seed.
    let mut h: u64 = 0xcbf29ce484222325 ^ seed.wrapping_mul(0x9e3779b97f4a7c15);
    for b in id.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn undirected_adjacency(g: &TrustGraph) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); g.node_count()];
    for (s, d, _) in g.edges() {
        adj[s].push(d);
        adj[d].push(s);
    }
    for nbrs in &mut adj {
        nbrs.sort_unstable();
        nbrs.dedup();
    }
    adj
}

/// Generate `walks_per_node` biased random walks from every non-isolated node.
pub fn generate_walks(
    g: &TrustGraph,
    p: f64,
    q: f64,
    walk_len: usize,
    walks_per_node: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if g.node_count() == 0 {
        return Err(CmcsError::InvalidArgument("empty graph".into()));
    }
    if walk_len < 2 {
        return Err(CmcsError::InvalidArgument("walk_len must be >= 2".into()));
    }
    let adj = undirected_adjacency(g);
    let mut walks = Vec::new();
    for start in 0..g.node_count() {
        if adj[start].is_empty() {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, g.id(start)));
        for _ in 0..walks_per_node {
            let mut walk = vec![start];
            while walk.len() < walk_len {
                let cur = *walk.last().unwrap();
                let nbrs = &adj[cur];
                if nbrs.is_empty() {
                    break;
                }
                let next = if walk.len() == 1 {
                    nbrs[rng.gen_range(0..nbrs.len())]
                } else {
                    let prev = walk[walk.len() - 2];
                    let weights: Vec<f64> = nbrs
                        .iter()
                        .map(|&x| {
                            if x == prev {
                                1.0 / p
                            } else if adj[prev].binary_search(&x).is_ok() {
                                1.0
                            } else {
                                1.0 / q
                            }
                        })
                        .collect();
                    let dist = WeightedIndex::new(&weights)
                        .map_err(|e| CmcsError::Numerical(e.to_string()))?;
                    nbrs[dist.sample(&mut rng)]
                };
                walk.push(next);
            }
            walks.push(walk);
        }
    }
    Ok(walks)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Train skip-gram embeddings with negative sampling over the walk corpus.
/// Returns vectors for every node that appears in a walk; callers fill in the
/// rest via [`deterministic_init`].
pub fn train_skipgram(
    g: &TrustGraph,
    walks: &[Vec<usize>],
    cfg: &EmbedConfig,
) -> Result<EmbeddingTable> {
    if cfg.dim == 0 {
        return Err(CmcsError::InvalidArgument("dim must be >= 1".into()));
    }
    if walks.is_empty() {
        return Err(CmcsError::InvalidArgument("no walks".into()));
    }
    let n = g.node_count();
    let dim = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);

    let bound = 0.5 / dim as f64;
    let mut emb_in: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-bound..bound)).collect())
        .collect();
    let mut emb_out: Vec<Vec<f64>> = vec![vec![0.0; dim]; n];

    // Unigram^0.75 negative-sampling distribution over walk occurrences.
    let mut counts = vec![0f64; n];
    for w in walks {
        for &u in w {
            counts[u] += 1.0;
        }
    }
    let weights: Vec<f64> = counts.iter().map(|c| c.powf(0.75)).collect();
    let neg_dist = WeightedIndex::new(&weights).map_err(|e| CmcsError::Numerical(e.to_string()))?;

    let mut first_epoch_loss = f64::NAN;
    let mut last_epoch_loss = f64::NAN;
    for epoch in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        let mut loss_n = 0u64;
        for walk in walks {
            for (i, &center) in walk.iter().enumerate() {
                let lo = i.saturating_sub(cfg.window);
                let hi = (i + cfg.window + 1).min(walk.len());
                for j in lo..hi {
                    if j == i {
                        continue;
                    }
                    let context = walk[j];
                    // Positive pair plus sampled negatives, SGD on the
                    // binary logistic objective.
                    let mut grad_center = vec![0.0; dim];
                    {
                        let score =
                            dot(&emb_in[center], &emb_out[context]);
                        let pred = sigmoid(score);
                        loss_sum += -(pred.max(1e-12)).ln();
                        let gout = pred - 1.0;
                        for d in 0..dim {
                            grad_center[d] += gout * emb_out[context][d];
                            emb_out[context][d] -= cfg.lr * gout * emb_in[center][d];
                        }
                    }
                    for _ in 0..cfg.negatives {
                        let neg = neg_dist.sample(&mut rng);
                        if neg == context {
                            continue;
                        }
                        let score = dot(&emb_in[center], &emb_out[neg]);
                        let pred = sigmoid(score);
                        loss_sum += -((1.0 - pred).max(1e-12)).ln();
                        let gout = pred;
                        for d in 0..dim {
                            grad_center[d] += gout * emb_out[neg][d];
                            emb_out[neg][d] -= cfg.lr * gout * emb_in[center][d];
                        }
                    }
                    for d in 0..dim {
                        emb_in[center][d] -= cfg.lr * grad_center[d];
                    }
                    loss_n += 1;
                }
            }
        }
        let epoch_loss = loss_sum / loss_n.max(1) as f64;
        if !epoch_loss.is_finite() {
            return Err(CmcsError::Numerical(format!(
                "non-finite skip-gram loss at epoch {epoch}"
            )));
        }
        if epoch == 0 {
            first_epoch_loss = epoch_loss;
        }
        last_epoch_loss = epoch_loss;
    }
    if cfg.epochs > 1 && last_epoch_loss >= first_epoch_loss {
        // Not fatal, but worth surfacing during experiments.
        eprintln!(
            "warning: skip-gram loss did not improve ({first_epoch_loss:.4} -> {last_epoch_loss:.4})"
        );
    }

    let mut vectors = HashMap::new();
    for u in 0..n {
        if counts[u] > 0.0 {
            vectors.insert(g.id(u).to_string(), emb_in[u].clone());
        }
    }
    Ok(EmbeddingTable { dim, vectors })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Seeded uniform init in [-1/dim, 1/dim], reproducible per (node id, seed).
pub fn deterministic_init(g: &TrustGraph, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    if dim == 0 {
        return Err(CmcsError::InvalidArgument("dim must be >= 1".into()));
    }
    let bound = 1.0 / dim as f64;
    let mut vectors = HashMap::new();
    for u in 0..g.node_count() {
        let id = g.id(u);
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, id));
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-bound..bound)).collect();
        vectors.insert(id.to_string(), v);
    }
    Ok(EmbeddingTable { dim, vectors })
}

/// Full pipeline: walks, skip-gram, deterministic fill for isolated nodes.
pub fn node2vec_embeddings(g: &TrustGraph, cfg: &EmbedConfig) -> Result<EmbeddingTable> {
    let mut table = if cfg.epochs == 0 {
        EmbeddingTable {
            dim: cfg.dim,
            vectors: HashMap::new(),
        }
    } else {
        let walks = generate_walks(g, cfg.p, cfg.q, cfg.walk_len, cfg.walks_per_node, cfg.seed)?;
        train_skipgram(g, &walks, cfg)?
    };
    let fallback = deterministic_init(g, cfg.dim, cfg.seed)?;
    for (id, v) in fallback.vectors {
        table.vectors.entry(id).or_insert(v);
    }
    Ok(table)
}

const EMB_MAGIC: &[u8; 4] = b"CMEB";
const EMB_VERSION: u32 = 1;

/// Binary layout: magic "CMEB", version u32, dim u32, count u64, then per
/// record id-length u32, id bytes, dim little-endian f64 values.
pub fn save_embeddings<W: Write>(table: &EmbeddingTable, mut w: W) -> Result<()> {
    w.write_all(EMB_MAGIC)?;
    w.write_all(&EMB_VERSION.to_le_bytes())?;
    w.write_all(&(table.dim as u32).to_le_bytes())?;
    w.write_all(&(table.vectors.len() as u64).to_le_bytes())?;
    let mut ids: Vec<&String> = table.vectors.keys().collect();
    ids.sort();
    for id in ids {
        let bytes = id.as_bytes();
        w.write_all(&(bytes.len() as u32).to_le_bytes())?;
        w.write_all(bytes)?;
        for x in &table.vectors[id] {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_embeddings<R: Read>(mut r: R) -> Result<EmbeddingTable> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != EMB_MAGIC {
        return Err(CmcsError::InvalidArgument("bad embedding file magic".into()));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let version = u32::from_le_bytes(buf4);
    if version != EMB_VERSION {
        return Err(CmcsError::InvalidArgument(format!(
            "unsupported embedding file version {version}"
        )));
    }
    r.read_exact(&mut buf4)?;
    let dim = u32::from_le_bytes(buf4) as usize;
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8)?;
    let count = u64::from_le_bytes(buf8);
    let mut vectors = HashMap::new();
    for _ in 0..count {
        r.read_exact(&mut buf4)?;
        let len = u32::from_le_bytes(buf4) as usize;
        let mut id = vec![0u8; len];
        r.read_exact(&mut id)?;
        let id = String::from_utf8(id)
            .map_err(|e| CmcsError::InvalidArgument(format!("bad node id: {e}")))?;
        let mut v = Vec::with_capacity(dim);
        for _ in 0..dim {
            r.read_exact(&mut buf8)?;
            v.push(f64::from_le_bytes(buf8));
        }
        vectors.insert(id, v);
    }
    Ok(EmbeddingTable { dim, vectors })
}

/// CSV export: `node_id,v0,...,v{dim-1}`.
pub fn export_embeddings_csv<W: Write>(table: &EmbeddingTable, mut w: W) -> Result<()> {
    write!(w, "node_id")?;
    for d in 0..table.dim {
        write!(w, ",v{d}")?;
    }
    writeln!(w)?;
    let mut ids: Vec<&String> = table.vectors.keys().collect();
    ids.sort();
    for id in ids {
        write!(w, "{id}")?;
        for x in &table.vectors[id] {
            write!(w, ",{x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_store::parse_trust_graph;
    use std::io::Cursor;

    fn graph_from(text: &str) -> TrustGraph {
        parse_trust_graph(Cursor::new(text.as_bytes())).unwrap().0
    }

    #[test]
    fn path_graph_forced_alternation() {
        let g = graph_from("A\tB\tmaster\n");
        let walks = generate_walks(&g, 1.0, 1.0, 3, 1, 0).unwrap();
        let a = g.node("A").unwrap();
        let b = g.node("B").unwrap();
        let from_a: Vec<_> = walks.iter().filter(|w| w[0] == a).collect();
        assert_eq!(from_a.len(), 1);
        assert_eq!(from_a[0], &vec![a, b, a]);
    }

    #[test]
    fn walks_deterministic() {
        let g = graph_from("A\tB\tmaster\nB\tC\tobserver\nC\tA\tjourneyer\nC\tD\tmaster\n");
        let w1 = generate_walks(&g, 0.5, 2.0, 10, 4, 42).unwrap();
        let w2 = generate_walks(&g, 0.5, 2.0, 10, 4, 42).unwrap();
        assert_eq!(w1, w2);
    }

    #[test]
    fn star_graph_alternates_through_center() {
        let mut text = String::new();
        for i in 0..6 {
            text.push_str(&format!("hub\tleaf{i}\tmaster\n"));
        }
        let g = graph_from(&text);
        let hub = g.node("hub").unwrap();
        let walks = generate_walks(&g, 1.0, 1.0, 9, 2, 1).unwrap();
        for w in walks.iter().filter(|w| w[0] == hub) {
            for (k, &node) in w.iter().enumerate() {
                if k % 2 == 0 {
                    assert_eq!(node, hub);
                } else {
                    assert_ne!(node, hub);
                }
            }
        }
    }

    #[test]
    fn walk_steps_are_neighbors() {
        let g = graph_from("A\tB\tmaster\nB\tC\tobserver\nC\tA\tjourneyer\nC\tD\tmaster\n");
        let adj = undirected_adjacency(&g);
        for w in generate_walks(&g, 2.0, 0.5, 12, 3, 9).unwrap() {
            for pair in w.windows(2) {
                assert!(adj[pair[0]].binary_search(&pair[1]).is_ok());
            }
        }
    }

    #[test]
    fn walks_per_node_count() {
        let g = graph_from("A\tB\tmaster\nB\tC\tobserver\nD\tC\tmaster\n");
        let walks = generate_walks(&g, 1.0, 1.0, 5, 7, 0).unwrap();
        for u in 0..g.node_count() {
            assert_eq!(walks.iter().filter(|w| w[0] == u).count(), 7);
        }
    }

    #[test]
    fn deterministic_init_properties() {
        let g = graph_from("A\tB\tmaster\nB\tC\tobserver\n");
        let t1 = deterministic_init(&g, 4, 5).unwrap();
        let t2 = deterministic_init(&g, 4, 5).unwrap();
        assert_eq!(t1.vectors, t2.vectors);
        assert_eq!(t1.vectors.len(), 3);
        for v in t1.vectors.values() {
            assert_eq!(v.len(), 4);
            assert!(v.iter().all(|x| x.abs() <= 0.25));
        }
    }

    #[test]
    fn epochs_zero_returns_fallback_table() {
        let g = graph_from("A\tB\tmaster\n");
        let cfg = EmbedConfig {
            dim: 8,
            epochs: 0,
            ..Default::default()
        };
        let t = node2vec_embeddings(&g, &cfg).unwrap();
        let expect = deterministic_init(&g, 8, cfg.seed).unwrap();
        assert_eq!(t.vectors, expect.vectors);
    }

    fn cosine(a: &[f64], b: &[f64]) -> f64 {
        let na = dot(a, a).sqrt();
        let nb = dot(b, b).sqrt();
        dot(a, b) / (na * nb)
    }

    #[test]
    fn two_cliques_separate() {
        let mut text = String::new();
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    text.push_str(&format!("a{i}\ta{j}\tmaster\n"));
                    text.push_str(&format!("b{i}\tb{j}\tmaster\n"));
                }
            }
        }
        // One weak bridge keeps the vocabulary connected.
        text.push_str("a0\tb0\tobserver\n");
        let g = graph_from(&text);
        let cfg = EmbedConfig {
            dim: 16,
            epochs: 5,
            walk_len: 20,
            walks_per_node: 8,
            seed: 3,
            ..Default::default()
        };
        let table = node2vec_embeddings(&g, &cfg).unwrap();
        assert!(table.is_finite());
        let a: Vec<&[f64]> = (0..5).map(|i| table.get(&format!("a{i}")).unwrap()).collect();
        let b: Vec<&[f64]> = (0..5).map(|i| table.get(&format!("b{i}")).unwrap()).collect();
        let mut intra = Vec::new();
        let mut inter = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                if i < j {
                    intra.push(cosine(a[i], a[j]));
                    intra.push(cosine(b[i], b[j]));
                }
                inter.push(cosine(a[i], b[j]));
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(
            mean(&intra) > mean(&inter),
            "intra {} <= inter {}",
            mean(&intra),
            mean(&inter)
        );
    }

    #[test]
    fn embedding_file_roundtrip() {
        let g = graph_from("A\tB\tmaster\nB\tC\tobserver\n");
        let t = deterministic_init(&g, 6, 11).unwrap();
        let mut buf = Vec::new();
        save_embeddings(&t, &mut buf).unwrap();
        let t2 = load_embeddings(Cursor::new(&buf)).unwrap();
        assert_eq!(t.dim, t2.dim);
        assert_eq!(t.vectors, t2.vectors);
    }
}
