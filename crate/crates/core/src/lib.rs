//! Score-based generative modelling and score-assisted binary classification.
//!
//! `no_std` with `alloc`. File formats, CSV and the command line live in the
//! companion `scoregen-cli` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod classify;
pub mod augment;
pub mod codec;
pub mod dataset;
pub mod density;
pub mod error;
pub mod eval;
pub mod gaussian;
pub mod langevin;
pub mod linalg;
pub mod mlp;
pub mod rng;
pub mod score_net;

pub use dataset::{Label, LabeledDataset, Standardization};
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use mlp::Mlp;
pub use rng::RngStream;
pub use score_net::{Objective, ScoreNet, SliceDistribution, TrainConfig};
pub use gaussian::{DgpSpec, GaussianModel};
pub use density::{DensityField, Grid, ScoreField};
pub use langevin::LangevinConfig;
pub use classify::{DecisionConfig, DecisionRule, LogisticModel, Priors};
pub use augment::{AugmentMethod, AugmentPlan};
pub use eval::{ConfusionMatrix, Metrics, SplitSpec};
