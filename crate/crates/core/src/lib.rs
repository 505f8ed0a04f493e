//! Hybrid collaborative filtering over an item taxonomy.
//!
//! The pipeline ingests BookCrossing-style ratings ([`ingest`]), arranges the
//! books in a metadata concept tree ([`taxonomy`]), fills selected missing
//! ratings from semantically close items ([`densify`]) and factorizes the
//! result with masked NMF ([`nmf`]). [`evaluate`] compares that hybrid with
//! neighborhood CF ([`neighborhood`]), the semantic estimator on its own and
//! plain masked NMF under k-fold cross-validation.

pub mod densify;
pub mod error;
pub mod evaluate;
pub mod ingest;
pub mod matrix;
pub mod neighborhood;
pub mod nmf;
pub mod synthetic;
pub mod taxonomy;

pub use error::{Error, Result};
pub use matrix::{Entry, Provenance, RatingMatrix};
