//! Reinforcement-convolution network: forward pass, evaluation head, loss,
//! and hand-rolled reverse-mode gradients.
//!
//! Active (outgoing) and passive (incoming) trust states flow through
//! separate channels. Per layer and channel, each node aggregates the mean of
//! neighbor messages, where a message is the neighbor's previous-layer state
//! concatenated with an edge-type embedding (an edge weight matrix times the
//! one-hot trust level). The aggregate passes through an affine map and ReLU.
//! The head applies a linear map plus softmax to concat(h_O[src], h_I[dst]).

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embed_init::EmbeddingTable;
use crate::error::{CmcsError, Result};
use crate::graph_store::{TrustGraph, TrustLevel};
use crate::tref_engine::ExpertEdge;

/// Per-layer trainable parameters for both channels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerParams {
    /// Edge-type embedding for outgoing edges, `edge_dim x 4`.
    pub w_edge_out: Array2<f64>,
    /// Edge-type embedding for incoming edges, `edge_dim x 4`.
    pub w_edge_in: Array2<f64>,
    /// Out-channel aggregation map, `dim x (prev_dim + edge_dim)`.
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
    /// In-channel aggregation map, `dim x (prev_dim + edge_dim)`.
    pub w_in: Array2<f64>,
    pub b_in: Array1<f64>,
}

/// All trainable parameters of the trust evaluation network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrefModel {
    pub input_dim: usize,
    pub edge_dim: usize,
    pub layer_dims: Vec<usize>,
    pub layers: Vec<LayerParams>,
    /// Head weights, `4 x 2 * last_dim`.
    pub w_fc: Array2<f64>,
}

impl TrefModel {
    /// Seeded uniform (Glorot-style) initialization.
    pub fn init(input_dim: usize, edge_dim: usize, layer_dims: &[usize], seed: u64) -> TrefModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut glorot = |rows: usize, cols: usize| -> Array2<f64> {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
        };
        let mut layers = Vec::new();
        let mut prev = input_dim;
        for &dim in layer_dims {
            layers.push(LayerParams {
                w_edge_out: glorot(edge_dim, 4),
                w_edge_in: glorot(edge_dim, 4),
                w_out: glorot(dim, prev + edge_dim),
                b_out: Array1::zeros(dim),
                w_in: glorot(dim, prev + edge_dim),
                b_in: Array1::zeros(dim),
            });
            prev = dim;
        }
        let last = *layer_dims.last().expect("at least one layer");
        TrefModel {
            input_dim,
            edge_dim,
            layer_dims: layer_dims.to_vec(),
            layers,
            w_fc: glorot(4, 2 * last),
        }
    }

    pub fn zeros_like(&self) -> TrefModel {
        let mut m = self.clone();
        m.for_each_tensor_mut(|t| t.fill(0.0));
        m
    }

    pub fn last_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    /// Visit every parameter tensor as a flat mutable slice, in a fixed order.
    pub fn for_each_slice_mut<F: FnMut(&mut [f64])>(&mut self, mut f: F) {
        for layer in &mut self.layers {
            f(layer.w_edge_out.as_slice_mut().unwrap());
            f(layer.w_edge_in.as_slice_mut().unwrap());
            f(layer.w_out.as_slice_mut().unwrap());
            f(layer.b_out.as_slice_mut().unwrap());
            f(layer.w_in.as_slice_mut().unwrap());
            f(layer.b_in.as_slice_mut().unwrap());
        }
        f(self.w_fc.as_slice_mut().unwrap());
    }

    fn for_each_tensor_mut<F: FnMut(&mut ArrayViewMutDyn)>(&mut self, mut f: F) {
        for layer in &mut self.layers {
            f(&mut layer.w_edge_out.view_mut().into_dyn());
            f(&mut layer.w_edge_in.view_mut().into_dyn());
            f(&mut layer.w_out.view_mut().into_dyn());
            f(&mut layer.b_out.view_mut().into_dyn());
            f(&mut layer.w_in.view_mut().into_dyn());
            f(&mut layer.b_in.view_mut().into_dyn());
        }
        f(&mut self.w_fc.view_mut().into_dyn());
    }

    /// Sum of squares over all parameters (the L2 term of the loss).
    pub fn l2_norm_sq(&mut self) -> f64 {
        let mut sum = 0.0;
        self.for_each_slice_mut(|s| sum += s.iter().map(|x| x * x).sum::<f64>());
        sum
    }

    pub fn all_finite(&mut self) -> bool {
        let mut ok = true;
        self.for_each_slice_mut(|s| ok &= s.iter().all(|x| x.is_finite()));
        ok
    }
}

type ArrayViewMutDyn<'a> = ndarray::ArrayViewMut<'a, f64, ndarray::IxDyn>;

/// Gradients mirror the model's parameter layout.
pub type TrefGradients = TrefModel;

/// The message-passing graph: base edges plus expert edges, indexed per node
/// and per direction, with per-node level counts for the edge-embedding part
/// of the mean aggregate.
#[derive(Debug, Clone)]
pub struct PropGraph {
    pub n: usize,
    /// out_edges[u] = trustees of u: (v, level) for edges u -> v.
    pub out_edges: Vec<Vec<(usize, TrustLevel)>>,
    /// in_edges[u] = trustors of u: (v, level) for edges v -> u.
    pub in_edges: Vec<Vec<(usize, TrustLevel)>>,
}

impl PropGraph {
    pub fn build(n: usize, base: &[(usize, usize, TrustLevel)], experts: &[ExpertEdge]) -> PropGraph {
        let mut seen = std::collections::HashSet::new();
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        let add = |s: usize, d: usize, l: TrustLevel,
                       out_edges: &mut Vec<Vec<(usize, TrustLevel)>>,
                       in_edges: &mut Vec<Vec<(usize, TrustLevel)>>,
                       seen: &mut std::collections::HashSet<(usize, usize)>| {
            if s != d && seen.insert((s, d)) {
                out_edges[s].push((d, l));
                in_edges[d].push((s, l));
            }
        };
        for &(s, d, l) in base {
            add(s, d, l, &mut out_edges, &mut in_edges, &mut seen);
        }
        for e in experts {
            add(e.src, e.dst, e.level, &mut out_edges, &mut in_edges, &mut seen);
        }
        PropGraph { n, out_edges, in_edges }
    }
}

/// Per-layer node states and the caches needed for backpropagation.
#[derive(Debug, Clone)]
pub struct TrustState {
    /// h_out[l] and h_in[l] are `n x dim_l`; layer 0 equals the input
    /// embeddings for both channels.
    pub h_out: Vec<Array2<f64>>,
    pub h_in: Vec<Array2<f64>>,
    agg_out: Vec<Array2<f64>>,
    agg_in: Vec<Array2<f64>>,
    mask_out: Vec<Option<Array2<f64>>>,
    mask_in: Vec<Option<Array2<f64>>>,
}

impl TrustState {
    pub fn final_out(&self) -> &Array2<f64> {
        self.h_out.last().unwrap()
    }

    pub fn final_in(&self) -> &Array2<f64> {
        self.h_in.last().unwrap()
    }
}

/// Arrange the embedding table as a matrix aligned with graph node indices.
pub fn embedding_matrix(g: &TrustGraph, emb: &EmbeddingTable) -> Result<Array2<f64>> {
    let mut x = Array2::zeros((g.node_count(), emb.dim));
    for u in 0..g.node_count() {
        let v = emb
            .get(g.id(u))
            .ok_or_else(|| CmcsError::UnknownNode(g.id(u).to_string()))?;
        if v.len() != emb.dim {
            return Err(CmcsError::InvalidArgument(format!(
                "embedding for {} has length {}, expected {}",
                g.id(u),
                v.len(),
                emb.dim
            )));
        }
        x.row_mut(u).assign(&Array1::from_vec(v.to_vec()));
    }
    Ok(x)
}

fn channel_forward(
    prop_edges: &[Vec<(usize, TrustLevel)>],
    h_prev: &Array2<f64>,
    w_edge: &Array2<f64>,
    w: &Array2<f64>,
    b: &Array1<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let n = prop_edges.len();
    let prev_dim = h_prev.ncols();
    let edge_dim = w_edge.nrows();
    let mut agg = Array2::zeros((n, prev_dim + edge_dim));
    for (u, nbrs) in prop_edges.iter().enumerate() {
        if nbrs.is_empty() {
            continue;
        }
        let inv = 1.0 / nbrs.len() as f64;
        let mut row = agg.row_mut(u);
        for &(v, level) in nbrs {
            let hv = h_prev.row(v);
            for d in 0..prev_dim {
                row[d] += hv[d] * inv;
            }
            let col = w_edge.column(level.index());
            for d in 0..edge_dim {
                row[prev_dim + d] += col[d] * inv;
            }
        }
    }
    let mut h = agg.dot(&w.t()) + b;
    h.mapv_inplace(|x| x.max(0.0));
    (h, agg)
}

/// Full-graph forward pass producing per-layer states for both channels.
pub fn forward_prop(prop: &PropGraph, x: &Array2<f64>, model: &TrefModel) -> Result<TrustState> {
    forward_prop_dropout(prop, x, model, 0.0, &mut ChaCha8Rng::seed_from_u64(0))
}

/// Forward pass with inverted dropout applied to each layer's activations.
/// With `dropout == 0` this is the plain deterministic forward.
pub fn forward_prop_dropout(
    prop: &PropGraph,
    x: &Array2<f64>,
    model: &TrefModel,
    dropout: f64,
    rng: &mut ChaCha8Rng,
) -> Result<TrustState> {
    let mut h_out = vec![x.clone()];
    let mut h_in = vec![x.clone()];
    let mut agg_out = Vec::new();
    let mut agg_in = Vec::new();
    let mut mask_out = Vec::new();
    let mut mask_in = Vec::new();
    let make_mask = |shape: (usize, usize), rng: &mut ChaCha8Rng| -> Option<Array2<f64>> {
        if dropout <= 0.0 {
            return None;
        }
        let keep = 1.0 - dropout;
        Some(Array2::from_shape_fn(shape, |_| {
            if rng.gen::<f64>() < dropout {
                0.0
            } else {
                1.0 / keep
            }
        }))
    };
    for (l, layer) in model.layers.iter().enumerate() {
        let (mut ho, ao) = channel_forward(
            &prop.out_edges,
            h_out.last().unwrap(),
            &layer.w_edge_out,
            &layer.w_out,
            &layer.b_out,
        );
        let mo = make_mask(ho.dim(), rng);
        if let Some(m) = &mo {
            ho *= m;
        }
        let (mut hi, ai) = channel_forward(
            &prop.in_edges,
            h_in.last().unwrap(),
            &layer.w_edge_in,
            &layer.w_in,
            &layer.b_in,
        );
        let mi = make_mask(hi.dim(), rng);
        if let Some(m) = &mi {
            hi *= m;
        }
        for (name, h) in [("out", &ho), ("in", &hi)] {
            if let Some(((u, _), _)) = h
                .indexed_iter()
                .find(|(_, v)| !v.is_finite())
                .map(|(idx, v)| (idx, v))
            {
                return Err(CmcsError::Numerical(format!(
                    "non-finite {name}-channel activation at layer {l}, node {u}"
                )));
            }
        }
        h_out.push(ho);
        h_in.push(hi);
        agg_out.push(ao);
        agg_in.push(ai);
        mask_out.push(mo);
        mask_in.push(mi);
    }
    Ok(TrustState { h_out, h_in, agg_out, agg_in, mask_out, mask_in })
}

/// Forward pass over a trust graph plus expert edges.
pub fn forward(
    g: &TrustGraph,
    experts: &[ExpertEdge],
    emb: &EmbeddingTable,
    model: &TrefModel,
) -> Result<TrustState> {
    let base = g.edges_sorted();
    let prop = PropGraph::build(g.node_count(), &base, experts);
    let x = embedding_matrix(g, emb)?;
    forward_prop(&prop, &x, model)
}

fn softmax4(logits: &[f64; 4]) -> [f64; 4] {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut e = [0.0; 4];
    let mut sum = 0.0;
    for i in 0..4 {
        e[i] = (logits[i] - m).exp();
        sum += e[i];
    }
    for v in &mut e {
        *v /= sum;
    }
    e
}

/// Head logits and softmax distribution for an ordered pair.
pub fn pair_distribution(state: &TrustState, model: &TrefModel, src: usize, dst: usize) -> [f64; 4] {
    pair_distribution_raw(state.final_out(), state.final_in(), model, src, dst)
}

/// Same head applied to pre-extracted final-layer channel states, e.g. from a
/// saved model file.
pub fn pair_distribution_raw(
    h_out: &Array2<f64>,
    h_in: &Array2<f64>,
    model: &TrefModel,
    src: usize,
    dst: usize,
) -> [f64; 4] {
    let d = model.last_dim();
    let hu = h_out.row(src);
    let hv = h_in.row(dst);
    let mut logits = [0.0; 4];
    for c in 0..4 {
        let wr = model.w_fc.row(c);
        let mut acc = 0.0;
        for k in 0..d {
            acc += wr[k] * hu[k] + wr[d + k] * hv[k];
        }
        logits[c] = acc;
    }
    softmax4(&logits)
}

/// Distribution plus argmax level for an ordered pair; ties break toward the
/// lower trust level.
pub fn predict_level(
    state: &TrustState,
    model: &TrefModel,
    src: usize,
    dst: usize,
) -> ([f64; 4], TrustLevel) {
    let dist = pair_distribution(state, model, src, dst);
    let mut best = 0;
    for c in 1..4 {
        if dist[c] > dist[best] {
            best = c;
        }
    }
    (dist, TrustLevel::from_index(best).unwrap())
}

/// Mean negative log-probability of the true levels plus L2 penalty.
/// Zero-probability true classes are clamped at 1e-12 before the log.
pub fn cross_entropy_loss(
    predictions: &[[f64; 4]],
    labels: &[TrustLevel],
    lambda: f64,
    model: &TrefModel,
) -> f64 {
    assert_eq!(predictions.len(), labels.len());
    let mut sum = 0.0;
    for (p, &y) in predictions.iter().zip(labels) {
        sum += -(p[y.index()].max(1e-12)).ln();
    }
    let ce = sum / predictions.len().max(1) as f64;
    let mut m = model.clone();
    ce + lambda * m.l2_norm_sq()
}

/// Loss and full parameter gradients for a batch of labeled ordered pairs.
/// Gradients flow from the head back through every convolution layer.
pub fn loss_and_gradients(
    prop: &PropGraph,
    state: &TrustState,
    model: &TrefModel,
    batch: &[(usize, usize, TrustLevel)],
    lambda: f64,
) -> (f64, TrefGradients) {
    let n = prop.n;
    let d = model.last_dim();
    let nl = model.layers.len();
    let mut grads = model.zeros_like();
    let inv_b = 1.0 / batch.len().max(1) as f64;

    let mut d_hout = Array2::<f64>::zeros((n, d));
    let mut d_hin = Array2::<f64>::zeros((n, d));
    let mut ce = 0.0;
    for &(u, v, y) in batch {
        let p = pair_distribution(state, model, u, v);
        ce += -(p[y.index()].max(1e-12)).ln() * inv_b;
        let hu = state.final_out().row(u);
        let hv = state.final_in().row(v);
        for c in 0..4 {
            let dl = (p[c] - if c == y.index() { 1.0 } else { 0.0 }) * inv_b;
            let mut wrow = grads.w_fc.row_mut(c);
            let mrow = model.w_fc.row(c);
            for k in 0..d {
                wrow[k] += dl * hu[k];
                wrow[d + k] += dl * hv[k];
                d_hout[[u, k]] += dl * mrow[k];
                d_hin[[v, k]] += dl * mrow[d + k];
            }
        }
    }

    // Backward through the stacked layers, channels independent.
    for l in (0..nl).rev() {
        let layer = &model.layers[l];
        let glayer = &mut grads.layers[l];
        d_hout = channel_backward(
            &prop.out_edges,
            &state.h_out[l + 1],
            &state.agg_out[l],
            state.mask_out[l].as_ref(),
            &layer.w_out,
            &mut glayer.w_out,
            &mut glayer.b_out,
            &mut glayer.w_edge_out,
            state.h_out[l].ncols(),
            &d_hout,
        );
        d_hin = channel_backward(
            &prop.in_edges,
            &state.h_in[l + 1],
            &state.agg_in[l],
            state.mask_in[l].as_ref(),
            &layer.w_in,
            &mut glayer.w_in,
            &mut glayer.b_in,
            &mut glayer.w_edge_in,
            state.h_in[l].ncols(),
            &d_hin,
        );
    }

    // L2 term and its gradient.
    let mut m = model.clone();
    let loss = ce + lambda * m.l2_norm_sq();
    if lambda > 0.0 {
        let mut theta: Vec<f64> = Vec::new();
        m.for_each_slice_mut(|s| theta.extend_from_slice(s));
        let mut i = 0;
        grads.for_each_slice_mut(|s| {
            for x in s.iter_mut() {
                *x += 2.0 * lambda * theta[i];
                i += 1;
            }
        });
    }
    (loss, grads)
}

#[allow(clippy::too_many_arguments)]
fn channel_backward(
    prop_edges: &[Vec<(usize, TrustLevel)>],
    h: &Array2<f64>,
    agg: &Array2<f64>,
    mask: Option<&Array2<f64>>,
    w: &Array2<f64>,
    gw: &mut Array2<f64>,
    gb: &mut Array1<f64>,
    gw_edge: &mut Array2<f64>,
    prev_dim: usize,
    d_h: &Array2<f64>,
) -> Array2<f64> {
    // ReLU gate: the forward stored post-activation (and post-dropout)
    // states, so h > 0 identifies exactly the surviving units.
    let mut d_pre = d_h.clone();
    if let Some(m) = mask {
        d_pre *= m;
    }
    d_pre.zip_mut_with(h, |g, &hv| {
        if hv <= 0.0 {
            *g = 0.0;
        }
    });
    *gw += &d_pre.t().dot(agg);
    *gb += &d_pre.sum_axis(Axis(0));
    let d_agg = d_pre.dot(w);
    let n = prop_edges.len();
    let mut d_h_prev = Array2::zeros((n, prev_dim));
    for (u, nbrs) in prop_edges.iter().enumerate() {
        if nbrs.is_empty() {
            continue;
        }
        let inv = 1.0 / nbrs.len() as f64;
        let drow = d_agg.row(u);
        for &(v, level) in nbrs {
            for k in 0..prev_dim {
                d_h_prev[[v, k]] += drow[k] * inv;
            }
            let mut col = gw_edge.column_mut(level.index());
            for k in 0..col.len() {
                col[k] += drow[prev_dim + k] * inv;
            }
        }
    }
    d_h_prev
}
