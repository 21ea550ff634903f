//! # truthlens
//!
//! A laboratory for locating and evaluating linear truth directions in the
//! residual stream of language models.
//!
//! The crate is organised around the data flow of a probing study:
//!
//! - [`taskgen`] builds balanced true/false statement datasets (factual
//!   F0–F5 over a city knowledge base, arithmetic A1–A3) and renders them
//!   through prompt templates. Every label can be re-derived by an
//!   independent oracle.
//! - [`tensorio`] reads and writes the `ACTV` activation file format shared
//!   with the model-side extractor.
//! - [`probe`] trains mean-centred, bias-free logistic probes with full-batch
//!   Adam and scores activations with them.
//! - [`metrics`] holds AUROC, cosine similarity, the between/within variance
//!   ratio, the polarity decomposition and 2D projections.
//! - [`synthgen`] plants truth and polarity directions into synthetic
//!   activation stacks, so every analysis can be checked without a model.
//! - [`experiments`] runs layer sweeps, generalization grids, prompt transfer
//!   and polarity sweeps over an activation directory and writes CSV/SVG
//!   reports.
//!
//! Layer indices are 0-based positions of post-block residual outputs.

pub mod experiments;
pub mod linalg;
pub mod metrics;
pub mod probe;
pub mod synthgen;
pub mod taskgen;
pub mod tensorio;

pub use experiments::{ExperimentError, ExperimentPlan};
pub use metrics::{auroc, cosine, EvalMatrix, MetricsError};
pub use probe::{ProbeError, ProbeHyper, ProbeModel};
pub use synthgen::{SyntheticSpec, SyntheticStack};
pub use taskgen::{KnowledgeBase, LabeledStatement, PromptId, Split, TaskId, TaskgenError};
pub use tensorio::{ActivationBatch, TensorIoError};
