//! Proximal stochastic mirror descent for composite relatively weakly convex
//! problems, with a Bregman Moreau-envelope engine for measuring
//! stationarity and a harness for checking the `O(1/sqrt(N))` rate.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod objective;
pub mod regularizer;
pub mod smd;
pub mod stationarity;
pub mod vecops;

pub use error::{Error, Result};
pub use geometry::{Dgf, FeasibleSet, Geometry, NormKind};
pub use objective::{CompositeObjective, Loss, OracleMode};
pub use regularizer::Regularizer;
