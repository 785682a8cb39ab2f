#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Simulation and numerical verification tools for a random walk driven by
//! an interchange (stirring) environment on `Z^d`.

pub mod environment;
pub mod error;
pub mod experiments;
pub mod heat_kernel;
pub mod interchange;
pub mod lattice;
pub mod simplex;
pub mod stats;
pub mod types;
pub mod walker;

pub use environment::{EnvironmentWindow, GoodVerdict};
pub use error::{Error, ErrorClass, Result};
pub use simplex::{MuDistribution, MuSpec, TransitionVector};
pub use types::{type_of, type_probabilities, TypeIndex, TypeProbabilities};
