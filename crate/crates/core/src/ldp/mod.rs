//! Rate functional of the small-noise large deviations and its minimization.
//!
//! The rate of a path `g` is the least control energy `½∫|ḣ|²` among controls
//! whose skeleton solution is `g` (infinite when there is none). For endpoint
//! events this becomes a terminal-constrained optimal control problem, solved
//! here by penalty continuation on top of an exact discrete adjoint of the
//! RK4 skeleton scheme. Linear models with additive noise have the
//! closed-form minimum-energy value given by the controllability Gramian,
//! which serves as the reference solution.

mod adjoint;
mod gramian;
mod optim;
mod rate;

pub use adjoint::{adjoint_gradient, EndpointObjective, GradientReport};
pub use gramian::{gramian_rate_ball, gramian_rate_linear, LinearModelSpec};
pub use optim::{lbfgs, LbfgsOptions, LbfgsReport};
pub use rate::{rate_endpoint, RateEstimate, RateOptions, RateStatus, StageSummary};

use crate::error::Result;
use crate::integrate::{solve_skeleton, ControlPath, Trajectory};
use crate::ops::ModelConfig;
use crate::real::Real;

/// `½ ∫₀ᵀ |ḣ(s)|² ds` for a piecewise-constant control.
pub fn control_cost<T: Real>(h: &ControlPath<T>) -> T {
    h.cost()
}

/// The skeleton map `h ↦ u^h`.
pub fn gamma0<T: Real>(h: &ControlPath<T>, config: &ModelConfig<T>, dt: T) -> Result<Trajectory<T>> {
    solve_skeleton(config, h, dt)
}
