//! Multi-level deep cascade gradient boosted trees.
//!
//! A cascade stacks boosting ensembles level by level: every tree of a level maps
//! an instance to the cross-entropy of the leaf it lands in, and the vector of
//! those entropies is the input of the next level. Parallel cascades with random
//! feature pools are joined by a final boosting model, optionally routing weakly
//! and strongly correlated raw features to different levels.

pub mod cascade;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod gbdt;
pub mod metrics;
pub mod persistence;
pub mod rng;

pub use cascade::{train_ldctree, CascadeModel, LevelSpec};
pub use data::Dataset;
pub use ensemble::{train_eldctree, train_feldctree, EnsembleConfig, EnsembleMode, EnsembleModel};
pub use error::{Error, Result};
pub use gbdt::{train_gbdt, GbdtConfig, GbdtModel};
pub use persistence::{load_model, save_model, AnyModel, ModelKind};
