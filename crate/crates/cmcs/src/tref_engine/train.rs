//! Full-pipeline training with Adam, early stopping, and potential
//! trustworthiness inference.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embed_init::EmbeddingTable;
use crate::error::{CmcsError, Result};
use crate::graph_store::{Edge, EdgeSplit, TrustGraph, TrustLevel};
use crate::tref_engine::model::{
    embedding_matrix, forward_prop, forward_prop_dropout, loss_and_gradients, pair_distribution,
    predict_level, PropGraph, TrefModel, TrustState,
};
use crate::tref_engine::{generate_expert_knowledge, BernoulliConfig, ExpertEdge};

/// Training hyperparameters. Paper-fixed values are the defaults: lr 0.01,
/// dropout 0.0, L2 1e-5, three 64-dimensional layers.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub dropout: f64,
    pub l2: f64,
    pub epochs: usize,
    pub seed: u64,
    pub layer_dims: Vec<usize>,
    pub edge_dim: usize,
    pub batch_size: usize,
    /// Early stop after this many epochs without validation improvement.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            dropout: 0.0,
            l2: 1e-5,
            epochs: 300,
            seed: 0,
            layer_dims: vec![64, 64, 64],
            edge_dim: 16,
            batch_size: 1024,
            patience: Some(20),
        }
    }
}

/// Adam optimizer state over the model's flat parameter layout.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, n_params: usize) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut TrefModel, grads: &mut TrefModel) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut flat_grads: Vec<f64> = Vec::with_capacity(self.m.len());
        grads.for_each_slice_mut(|s| flat_grads.extend_from_slice(s));
        let mut i = 0;
        params.for_each_slice_mut(|s| {
            for x in s.iter_mut() {
                let g = flat_grads[i];
                self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = self.m[i] / bc1;
                let v_hat = self.v[i] / bc2;
                *x -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
                i += 1;
            }
        });
    }
}

/// Everything produced by a training run.
#[derive(Debug, Clone)]
pub struct TrainedTref {
    pub model: TrefModel,
    pub state: TrustState,
    pub experts: Vec<ExpertEdge>,
    pub prop: PropGraph,
    pub report: TrainReport,
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub val_losses: Vec<f64>,
    pub pr: f64,
    pub pr_qualifying_pairs: usize,
    pub expert_edges: usize,
    pub diverged: bool,
    pub stopped_early_at: Option<usize>,
}

fn param_count(model: &mut TrefModel) -> usize {
    let mut n = 0;
    model.for_each_slice_mut(|s| n += s.len());
    n
}

fn batch_ce(state: &TrustState, model: &TrefModel, pairs: &[Edge], lambda: f64) -> f64 {
    let preds: Vec<[f64; 4]> = pairs
        .iter()
        .map(|&(u, v, _)| pair_distribution(state, model, u, v))
        .collect();
    let labels: Vec<TrustLevel> = pairs.iter().map(|&(_, _, l)| l).collect();
    crate::tref_engine::cross_entropy_loss(&preds, &labels, lambda, model)
}

/// Train the evaluation network on the split's training edges. Message
/// passing uses the training subgraph (plus expert edges synthesized from it
/// when `use_expert` is set); test edges never participate, as labels or as
/// propagation structure.
pub fn train(
    g: &TrustGraph,
    split: &EdgeSplit,
    emb: &EmbeddingTable,
    cfg: &TrainConfig,
    use_expert: bool,
) -> Result<TrainedTref> {
    if split.train.is_empty() {
        return Err(CmcsError::InvalidArgument("empty training split".into()));
    }
    if cfg.lr <= 0.0 || cfg.l2 < 0.0 || !(0.0..1.0).contains(&cfg.dropout) {
        return Err(CmcsError::InvalidArgument(
            "lr must be > 0, l2 >= 0, dropout in [0,1)".into(),
        ));
    }

    let train_graph = g.edge_subgraph(&split.train);
    let mut report = TrainReport::default();
    let experts = if use_expert {
        let est = super::estimate_pr(&split.train, g);
        report.pr = est.pr;
        report.pr_qualifying_pairs = est.qualifying_pairs;
        generate_expert_knowledge(&train_graph, &BernoulliConfig { pr: est.pr, seed: cfg.seed })
    } else {
        Vec::new()
    };
    report.expert_edges = experts.len();

    let prop = PropGraph::build(g.node_count(), &split.train, &experts);
    let x = embedding_matrix(g, emb)?;
    let mut model = TrefModel::init(emb.dim, cfg.edge_dim, &cfg.layer_dims, cfg.seed);
    let mut adam = Adam::new(cfg.lr, param_count(&mut model));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7261696e);

    // Hold out a slice of training labels for early stopping.
    let mut labels: Vec<Edge> = split.train.clone();
    labels.shuffle(&mut rng);
    let n_val = if cfg.patience.is_some() {
        (labels.len() / 10).max(1).min(labels.len() - 1)
    } else {
        0
    };
    let val: Vec<Edge> = labels.split_off(labels.len() - n_val);

    let mut best: Option<(f64, TrefModel)> = None;
    let mut bad_epochs = 0usize;
    let mut checkpoint = model.clone();
    'training: for epoch in 0..cfg.epochs {
        labels.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for batch in labels.chunks(cfg.batch_size.max(1)) {
            let state = forward_prop_dropout(&prop, &x, &model, cfg.dropout, &mut rng)?;
            let (loss, mut grads) = loss_and_gradients(&prop, &state, &model, batch, cfg.l2);
            if !loss.is_finite() {
                model = checkpoint;
                report.diverged = true;
                break 'training;
            }
            adam.step(&mut model, &mut grads);
            loss_sum += loss * batch.len() as f64;
            seen += batch.len();
        }
        report.epoch_losses.push(loss_sum / seen.max(1) as f64);
        checkpoint = model.clone();

        if let Some(patience) = cfg.patience {
            let state = forward_prop(&prop, &x, &model)?;
            let val_loss = batch_ce(&state, &model, &val, cfg.l2);
            report.val_losses.push(val_loss);
            let improved = best.as_ref().map_or(true, |(b, _)| val_loss < *b);
            if improved {
                best = Some((val_loss, model.clone()));
                bad_epochs = 0;
            } else {
                bad_epochs += 1;
                if bad_epochs >= patience {
                    report.stopped_early_at = Some(epoch);
                    break;
                }
            }
        }
    }
    if let Some((_, m)) = best {
        if !report.diverged {
            model = m;
        }
    }
    let state = forward_prop(&prop, &x, &model)?;
    Ok(TrainedTref { model, state, experts, prop, report })
}

/// Evaluate potential trustworthiness for node pairs that have no direct edge
/// in the base graph. Pairs with an observed edge are rejected.
pub fn evaluate_pairs(
    model: &TrefModel,
    state: &TrustState,
    g: &TrustGraph,
    pairs: &[(usize, usize)],
) -> Result<Vec<((usize, usize), TrustLevel)>> {
    let mut out = Vec::with_capacity(pairs.len());
    for &(u, v) in pairs {
        if u >= g.node_count() || v >= g.node_count() {
            return Err(CmcsError::UnknownNode(format!("index {}", u.max(v))));
        }
        if g.has_edge(u, v) {
            return Err(CmcsError::InvalidArgument(format!(
                "pair ({}, {}) has a direct edge; use the observed level",
                g.id(u),
                g.id(v)
            )));
        }
        let (_, level) = predict_level(state, model, u, v);
        out.push(((u, v), level));
    }
    Ok(out)
}
