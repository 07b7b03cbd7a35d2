//! Shapley value explanations for black-box probabilistic classifiers.
//!
//! A classifier is wrapped as a [`PredictionOracle`]; together with a target
//! instance and a background dataset it induces a coalition game whose value
//! measures how much the prediction degrades when a set of features is
//! marginalized out. The game is explained exactly, by permutation sampling,
//! or by the graph-structured approximations that only enumerate coalitions
//! inside a feature's neighborhood (C-SVE) or its community (H-SVE).

pub mod data;
pub mod error;
pub mod eval;
pub mod explain;
pub mod feature_set;
pub mod fixtures;
pub mod game;
pub mod graph;
pub mod io;
pub mod keyed;
pub mod oracle;
pub mod validation;
pub mod value_fn;

pub use data::{compose, BackgroundDataset, Instance};
pub use error::{Error, OracleFailure, Result};
pub use explain::{
    c_sve, c_sve_all, explain, explain_with_stats, full_sve, h_sve, mc_shapley, single_feature,
    ExplainRequest, McEstimate, McMode, SveMethod, SveOptions,
};
pub use feature_set::FeatureSet;
pub use game::{Attribution, CoalitionGame, Method};
pub use graph::{BinaryAdjacency, CommunityPartition, FeatureGraph};
pub use oracle::PredictionOracle;
pub use value_fn::{as_game, GameConfig, MarginalSamples};
