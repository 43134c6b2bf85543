//! Trust reinforcement evaluation: expert-knowledge synthesis, stacked
//! reinforcement-convolution layers over separate active/passive channels, a
//! softmax evaluation head, full-graph training with Adam, and the trust-value
//! and trust-benefit mappings consumed by recruitment.

mod expert;
mod model;
mod model_io;
mod train;

pub use expert::{estimate_pr, generate_expert_knowledge, BernoulliConfig, EdgeDirection, ExpertEdge, PrEstimate};
pub use model::{
    cross_entropy_loss, embedding_matrix, forward, forward_prop, loss_and_gradients,
    pair_distribution, predict_level, PropGraph, TrefGradients, TrefModel, TrustState,
};
pub use model_io::{SavedModel, MODEL_FORMAT_VERSION};
pub use train::{evaluate_pairs, train, Adam, TrainConfig, TrainReport, TrainedTref};

use crate::graph_store::TrustLevel;

/// Real-valued trust mapping {0.5, 1, 2, 3}.
pub fn trust_value(level: TrustLevel) -> f64 {
    level.trust_value()
}

/// Symmetric pairwise trust benefit: high when both directions trust strongly
/// and agree, damped exponentially by asymmetry.
pub fn trust_benefit(t_ij: f64, t_ji: f64) -> f64 {
    (t_ij + t_ji) * (-(t_ij - t_ji).abs()).exp()
}

/// Directional trustworthiness accuracy: exact for observed edges, the trained
/// model's test accuracy otherwise.
pub fn pair_auc(direct_edge: bool, model_accuracy: f64) -> f64 {
    if direct_edge {
        1.0
    } else {
        model_accuracy
    }
}
