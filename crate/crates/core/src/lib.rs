//! Robustness analysis for vehicle platoons coupled by k-nearest-neighbor
//! communication, where a subset of vehicles track an external reference.
//!
//! The grounded Laplacian of the follower block drives everything: its
//! spectrum gives H∞ norms and delay margins in closed form, and the delay
//! simulator checks those predictions on trajectories.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dde_sim;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod par;
pub mod robustness;
pub mod spectral;
pub mod topology;

pub use error::{Error, Result};
pub use robustness::{Dynamics, HinfValue, RobustnessReport};
pub use spectral::Spectrum;
pub use topology::{GroundedSystem, PlatoonTopology, ReferenceSet};

#[cfg(test)]
mod proptests;
