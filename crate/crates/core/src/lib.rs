//! Proximal Newton methods whose inner subproblems are solved by *weak*
//! proximal oracles.
//!
//! The crate implements an outer proximal Newton loop (with an optional cubic
//! regularization term) in which each second-order subproblem is handed to an
//! inner solver that only guarantees accuracy competitive with the global
//! optimum of the composite problem. When that optimum is sparse (vector
//! problems) or low-rank (matrix problems), the inner solvers get away with
//! Hessian products against sparse vectors and rank-`s` truncated SVDs instead
//! of dense products and full factorizations.
//!
//! Layout:
//! - [`linalg`]: structured point representations, top-k selection, truncated
//!   and full SVD kernels.
//! - [`model`]: smooth objectives, Hessian operators, and the frozen
//!   second-order model with its incremental gradient recurrence.
//! - [`sets`]: feasible-set descriptors (`l1` ball, simplex, nuclear ball,
//!   binary-vertex polytopes) with projection and LMO oracles.
//! - [`wpo`]: the first-order weak proximal oracles for sparse vectors and
//!   spectral sets.
//! - [`inner`]: inner solvers (convex-combination WPO loop, DICG, FISTA).
//! - [`newton`]: the outer loop with monotone acceptance and super-linear
//!   rate diagnostics.
//! - [`problems`]: shipped objectives and synthetic instance generators,
//!   including 1-bit matrix completion.
//! - [`bench`]: the experiment harness (trace CSV files + JSON manifest).
//! - [`checks`]: the self-contained verification suite behind `proxnewton
//!   check` and the acceptance tests.

pub mod bench;
pub mod checks;
pub mod error;
pub mod inner;
pub mod linalg;
pub mod model;
pub mod newton;
pub mod problems;
pub mod sets;
pub mod wpo;

pub use error::{Error, Result};
