//! On-disk representation of a trained trust evaluator: the model parameters,
//! the final-layer channel states for every node, the node-id order, and the
//! held-out accuracy. JSON with a version tag.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{CmcsError, Result};
use crate::graph_store::TrustLevel;

use super::model::{pair_distribution_raw, TrefModel};
use super::train::TrainedTref;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedModel {
    pub version: u32,
    pub model: TrefModel,
    pub node_ids: Vec<String>,
    pub final_out: Array2<f64>,
    pub final_in: Array2<f64>,
    /// Held-out accuracy of the trained evaluator, feeding pair AUCs.
    pub accuracy: f64,
}

impl SavedModel {
    pub fn from_trained(trained: &TrainedTref, node_ids: Vec<String>, accuracy: f64) -> SavedModel {
        SavedModel {
            version: MODEL_FORMAT_VERSION,
            model: trained.model.clone(),
            node_ids,
            final_out: trained.state.final_out().clone(),
            final_in: trained.state.final_in().clone(),
            accuracy,
        }
    }

    pub fn node_index(&self, id: &str) -> Result<usize> {
        self.node_ids
            .iter()
            .position(|n| n == id)
            .ok_or_else(|| CmcsError::UnknownNode(id.to_string()))
    }

    /// Distribution over trust levels for an ordered node-index pair.
    pub fn distribution(&self, src: usize, dst: usize) -> [f64; 4] {
        pair_distribution_raw(&self.final_out, &self.final_in, &self.model, src, dst)
    }

    /// Argmax level (ties toward the lower level) and its trust value.
    pub fn predict(&self, src: usize, dst: usize) -> (TrustLevel, f64, [f64; 4]) {
        let dist = self.distribution(src, dst);
        let mut best = 0;
        for c in 1..4 {
            if dist[c] > dist[best] {
                best = c;
            }
        }
        let level = TrustLevel::from_index(best).unwrap();
        (level, level.trust_value(), dist)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = BufWriter::new(File::create(path)?);
        serde_json::to_writer(f, self)
            .map_err(|e| CmcsError::InvalidArgument(format!("model serialization failed: {e}")))
    }

    pub fn load(path: &Path) -> Result<SavedModel> {
        let f = BufReader::new(File::open(path)?);
        let m: SavedModel = serde_json::from_reader(f)
            .map_err(|e| CmcsError::Parse { line: 0, msg: format!("bad model file: {e}") })?;
        if m.version != MODEL_FORMAT_VERSION {
            return Err(CmcsError::InvalidArgument(format!(
                "unsupported model format version {}",
                m.version
            )));
        }
        if m.final_out.nrows() != m.node_ids.len() || m.final_in.nrows() != m.node_ids.len() {
            return Err(CmcsError::InvalidArgument(
                "model state rows do not match the node-id list".into(),
            ));
        }
        Ok(m)
    }
}
