//! Dense solvers: simplex LP, active-set constrained least squares, and the ellipsoid method.

pub mod ellipsoid;
pub mod lp;
pub mod qp;

pub use ellipsoid::{ellipsoid_find, ellipsoid_find_from, iteration_cap, EllipsoidOutcome, EllipsoidState, SeparationOracle, SeparationResult};
pub use lp::{solve_lp, Constraint, LinearProgram, LpOutcome, LpSolution, Relation, Sense};
pub use qp::{solve_constrained_ls, QpOutcome, QpSolution, QuadraticProgram};
