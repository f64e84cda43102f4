//! Solvers for conjugate discrete-time algebraic Riccati equations
//!
//! ```text
//! X = H ± A^H conj(X) (I + G conj(X))^{-1} A
//! ```
//!
//! with `G`, `H` Hermitian positive definite. The equation is reduced to a
//! standard DARE whose coefficient triples obey a semigroup law; composing a
//! triple with itself `r - 1` times gives an iteration whose convergence has
//! order `r`.
//!
//! Module map:
//! - [`matcore`]: dense complex kernels and the conjugate Stein solver.
//! - [`model`]: problem type, the Riccati operator, reduction and residuals.
//! - [`solvers`]: fixed point, semigroup recursion and accelerated solver.
//! - [`analysis`]: solvability checks, closed-loop spectra, predictions.
//! - [`bench`]: experiment generators and ensemble statistics.

pub mod analysis;
pub mod bench;
pub mod error;
pub mod matcore;
pub mod model;
pub mod solvers;

pub use error::{CdareError, Result};
pub use matcore::CMatrix;
pub use model::{CdareProblem, DareTriple, ResidualPair, Sign};
pub use solvers::{SolveReport, SolverConfig};
