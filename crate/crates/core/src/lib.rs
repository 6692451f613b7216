//! Monte Carlo solver for the one-dimensional semilinear wave equation
//!
//! ```text
//! u_tt - u_xx = F(u),   u(x, 0) = phi(x),   u_t(x, 0) = psi(x)
//! ```
//!
//! with analytic `F(u) = sum_k a_k u^k`. The solution is represented as the
//! expectation of a product functional over a branching cascade of space-time
//! points, each spawning children uniformly in its backward light cone. A
//! deterministic Picard iteration on the integral form of the equation serves
//! as a reference.
//!
//! Module map:
//!
//! - [`expr`]: expression language for `phi` and `psi`
//! - [`series`]: the nonlinearity as a truncated power series
//! - [`dalembert`]: free-wave solution `v(x, t)` and quadrature
//! - [`branching`]: offspring law, weights `b_k`, horizon `T*`
//! - [`cascade`]: sampling and evaluating one cascade
//! - [`estimator`]: parallel, reproducible Monte Carlo estimates
//! - [`oracle`]: Picard reference solver on a grid
//! - [`cli`]: command-line front end

pub mod branching;
pub mod cascade;
pub mod cli;
pub mod dalembert;
pub mod estimator;
pub mod expr;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod series;

pub use branching::{BranchingLaw, ScanSpec};
pub use cascade::{Caps, CascadeSample, CascadeTree, SpaceTimePoint};
pub use dalembert::{InitialData, QuadratureSpec};
pub use estimator::{Estimate, RunPlan};
pub use expr::Expression;
pub use oracle::{Field, GridSpec};
pub use series::PowerSeries;
