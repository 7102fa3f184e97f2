//! Model-agnostic detection of feature interactions learned by black-box
//! predictors, global aggregation of those interactions over data batches,
//! and their encoding as truncated cross features.
//!
//! The crate is `no_std` (it needs `alloc`). Everything that touches files,
//! processes or threads lives in the `glider` companion crate.
//!
//! Pipeline overview:
//!
//! 1. [`perturb`] samples a perturbation dataset around one instance and
//!    labels it with a [`blackbox::BlackBox`].
//! 2. [`neuralnet`] trains a small surrogate network on that dataset.
//! 3. [`detect`] reads interactions from the surrogate, either from the
//!    first-layer weights (NID) or from exact mixed partial derivatives
//!    (GradientNID), and picks how many to keep.
//! 4. [`global`] repeats detection over a batch and counts recurring
//!    interactions.
//! 5. [`crossing`] turns the winning interactions into truncated cross
//!    features for tabular data.
//!
//! [`bench`] reproduces the synthetic-function evaluation protocol.
#![no_std]
// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bench;
pub mod blackbox;
pub mod crossing;
pub mod detect;
pub mod global;
mod linalg;
mod matrix;
pub mod neuralnet;
pub mod perturb;
pub mod rng;

pub use blackbox::{BlackBox, FeatureKind, FeatureSchema, FieldSpec, FnModel, QueryError};
pub use detect::{
    Detector, Interaction, InteractionRanking, MadexConfig, MadexResult, PerturbationMode,
};
pub use global::GlobalSummary;
pub use matrix::Matrix;
pub use neuralnet::{Activation, NetConfig, SurrogateNet};
pub use perturb::{DataInstance, OffStatePolicy, PerturbationDataset};
