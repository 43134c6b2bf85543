//! Collaborative mobile crowdsourcing toolkit.
//!
//! The pipeline runs in four stages:
//! 1. [`graph_store`] loads directed social-trust graphs and check-in data.
//! 2. [`embed_init`] and [`tref_engine`] learn node embeddings and evaluate
//!    pairwise trustworthiness with a reinforcement-convolution network.
//! 3. [`benefits`] and [`region_partition`] turn trust, ability, and distance
//!    into per-task recruitment graphs scoped to clustered regions.
//! 4. [`recruit_tsr`], [`baselines`], and [`harness`] solve the team-selection
//!    problem with tabu search, compare against metaheuristic and greedy
//!    baselines, and reproduce the experiment sweeps.

pub mod baselines;
pub mod benefits;
pub mod embed_init;
pub mod error;
pub mod geo;
pub mod graph_store;
pub mod harness;
pub mod recruit_tsr;
pub mod region_partition;
pub mod tref_engine;

pub use error::CmcsError;
