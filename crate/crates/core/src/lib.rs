//! Spectral-Galerkin simulation of the stochastic incompressible second-grade
//! fluid on the periodic torus, together with tools for its small-noise large
//! deviations: the skeleton (controlled deterministic) equation, minimum-energy
//! rate functions computed by adjoint-based optimization, and Monte Carlo
//! estimators that check the rate function against simulated probabilities.
//!
//! The numerical core is generic over the scalar type through [`Real`]; the
//! aliases at the bottom of this file fix it to `f64` (and `f32` for the basic
//! field types). Reference computations that lean on dense linear algebra
//! (the controllability Gramian oracle) are `f64` only.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod basis;
pub mod checks;
pub mod error;
pub mod integrate;
pub mod io;
pub mod ldp;
pub mod mc;
pub mod ops;
pub mod real;

pub use basis::{BasisSpec, Channel, Mode, ModeKey, Norms, ScalarField, SpectralField};
pub use error::{Error, Result};
pub use integrate::{
    solve_skeleton, solve_spde, step_em, ControlPath, EulerMaruyama, NoiseDriver, Rk4, Stepper,
    Trajectory, TrajectoryMeta,
};
pub use ldp::{
    adjoint_gradient, control_cost, gamma0, gramian_rate_ball, gramian_rate_linear,
    rate_endpoint, EndpointObjective, LinearModelSpec, RateEstimate, RateOptions,
};
pub use mc::{
    condition_a_check, condition_b_check, ldp_sweep, moment_check, run_ensemble, BallEvent, EnsembleOptions,
    ProbEstimate, SweepReport, SweepRow,
};
pub use ops::{ahat, bhat, drift, fhat, ghat, Forcing, ForcingSpec, ModelConfig, Noise, TrilinearTensor};
pub use real::Real;

pub type Basis = BasisSpec<f64>;
pub type Field = SpectralField<f64>;
pub type Model = ModelConfig<f64>;
pub type Tensor = TrilinearTensor<f64>;
pub type Control = ControlPath<f64>;
pub type Path = Trajectory<f64>;

pub type Basis32 = BasisSpec<f32>;
pub type Field32 = SpectralField<f32>;
pub type Model32 = ModelConfig<f32>;
