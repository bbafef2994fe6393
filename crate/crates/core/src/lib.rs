//! Random path Bayesian additive regression trees.
//!
//! Smooth regression with a sum of trees whose observations follow latent
//! random root-to-leaf paths, and a model-mixing variant that learns
//! input-dependent weights over a set of simulator outputs.

pub mod archive;
pub mod data;
pub mod mixing;
pub mod path;
pub mod projection;
pub mod sampler;
pub mod semivariogram;
pub mod stats;
pub mod tree;
