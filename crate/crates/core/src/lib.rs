//! Core library of a workbench for fine-grained patent novelty examination.
//!
//! A claim is examined against a single prior art document in three steps:
//! segmenting the claim into features, retrieving the passages that disclose
//! each feature, and deciding whether the claim as a whole is novel. The
//! modules here cover the data model for that protocol, the text primitives
//! the metrics are built on, the evaluation metrics themselves, dataset
//! hygiene operations, non-LLM baselines, and LLM examination workflows.

pub mod baselines;
pub mod claimtext;
pub mod config;
pub mod dataset;
pub mod metrics;
pub mod model;
pub mod textsim;
pub mod workflows;
