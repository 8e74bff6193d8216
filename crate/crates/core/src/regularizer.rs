use serde::{Deserialize, Serialize};

use crate::vecops::norm1;

/// The convex, nonnegative part `r` of a composite objective.
///
/// The simplex indicator is not listed here: it is absorbed into the
/// feasible set of the geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Regularizer {
    #[default]
    Zero,
    L1 {
        lambda: f64,
    },
}

impl Regularizer {
    pub fn l1(lambda: f64) -> Self {
        assert!(lambda >= 0.0, "l1 weight must be nonnegative");
        Regularizer::L1 { lambda }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda } => lambda * norm1(x),
        }
    }

    pub fn l1_weight(&self) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda } => lambda,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.l1_weight() == 0.0
    }
}
