//! Exploration in model-based reinforcement learning by planning on
//! randomized rewards.
//!
//! The crate simulates kernelized nonlinear regulators (KNR), fits their
//! dynamics by ridge regression, perturbs rewards with noise scaled to the
//! model's uncertainty, and plans on the fitted model. Run records expose
//! the quantities behind the theory (confidence radii, good events, the
//! elliptical potential, regret) so they can be checked empirically.

pub mod cli;
pub mod diagnostics;
pub mod driver;
pub mod env;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod planning;
pub mod randomization;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
