//! Contextual bandits over nonparametric indicator-basis policy classes: generalized policy
//! elimination with an ellipsoid-based exploration search, and epsilon-greedy with direct or
//! hinge-risk empirical risk minimization. All optimization is done by the dense solvers in
//! [`optim`].

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod context;
pub mod egreedy;
pub mod envsim;
pub mod error;
pub mod gpe;
pub mod grid;
pub mod optim;
pub mod oracles;
pub mod policy;
pub mod settings;
pub mod verify;

pub use basis::IndicatorBasisFunction;
pub use context::{Context, Observation};
pub use error::{Error, Result};
pub use grid::{minimal_grid, RectangularGrid};
pub use policy::{empirical_is_ratio, policy_prob, Policy, Regressor, RegressorKind};
pub use settings::NumericalSettings;
