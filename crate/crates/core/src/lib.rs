//! A numerical laboratory for Wasserstein-2 projections, admissible
//! surrogate distances, robust Gaussian location estimation, sample-splitting
//! rate estimation and minimax gradient flows of the quadratic W2 game.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod admissible;
pub mod cli;
pub mod dynamics;
pub mod empirical;
pub mod error;
pub mod gauss;
pub mod matching;
pub mod optim;
pub mod rng;
pub mod robust;
pub mod stats;
pub mod w2_gan;

pub use error::{LabError, Result};
