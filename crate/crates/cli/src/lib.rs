//! Command-line front end for the ontonmf recommender: one config file
//! drives ingestion, taxonomy construction, cross-validated evaluation and
//! top-N recommendation.

pub mod commands;
pub mod config;

pub use commands::{cmd_evaluate, cmd_ingest, cmd_recommend, cmd_taxonomy, Dataset, HybridModel, Recommendation};
pub use config::RunConfig;
