//! Decision-theoretic and empirical tooling for imbalanced binary text
//! classification.
//!
//! The crate is organised around the pipeline it supports:
//!
//! - [`corpus`]: CSV ingestion, disjoint experiment splits and synthetic
//!   corpora with exact posterior oracles.
//! - [`vectorize`]: tokenizer, vocabulary and bag-of-words count matrices.
//! - [`theory`]: augmented priors, posterior remapping in both directions
//!   and loss-optimal decision rules.
//! - [`augment`]: random oversampling, ROSE, SMOTE / Borderline SMOTE, EDA
//!   and IOWA sentence generation.
//! - [`classify`]: random forest and L2-penalised logistic regression.
//! - [`metrics`]: confusion-based metrics, ROC/AUC, Brier score and
//!   validation threshold search.
//! - [`stats`]: parametric bootstrap test on percentage gains and
//!   functional boxplots for ROC ensembles.
//! - [`runner`]: the end-to-end experiment protocol and report emission.

pub mod augment;
pub mod classify;
pub mod corpus;
pub mod error;
pub mod metrics;
pub mod runner;
pub mod seeding;
pub mod stats;
pub mod theory;
pub mod vectorize;

pub use error::{Error, Result};
