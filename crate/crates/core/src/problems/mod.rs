//! Shipped problem instances and synthetic data generators.

mod logistic;
mod onebit;
mod quadratic;

pub use logistic::{gen_l1_logistic, L1LogisticInstance, LogisticObjective};
pub use onebit::{gen_onebit_mc, OneBitMcInstance, OneBitMcObjective};
pub use quadratic::{MatrixQuadratic, QuadraticObjective};
