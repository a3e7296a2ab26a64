use serde::{Deserialize, Serialize};

use super::adjoint::{adjoint_gradient, EndpointObjective};
use super::optim::{lbfgs, LbfgsOptions, Projector};
use crate::basis::SpectralField;
use crate::error::{Error, Result};
use crate::integrate::{solve_skeleton, ControlPath};
use crate::ops::ModelConfig;
use crate::real::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "")]
pub struct RateOptions<T: Real> {
    /// Number of piecewise-constant control cells `K`.
    pub control_steps: usize,
    /// RK4 steps per control cell.
    pub steps_per_cell: usize,
    /// Increasing penalty weights `μ` of the continuation.
    pub mu_schedule: Vec<T>,
    /// Endpoint tolerance relative to `max(1, ‖x‖_V)`.
    pub gap_tol: T,
    pub max_iter: usize,
    pub memory: usize,
    pub grad_tol: f64,
    /// Optional energy bound `N` restricting controls to `S_N`.
    pub n_bound: Option<T>,
    #[serde(skip)]
    pub initial: Option<ControlPath<T>>,
}

impl<T: Real> Default for RateOptions<T> {
    fn default() -> Self {
        RateOptions {
            control_steps: 64,
            steps_per_cell: 4,
            mu_schedule: (1..=8).map(|p| T::of(10f64.powi(p))).collect(),
            gap_tol: T::of(1e-3),
            max_iter: 400,
            memory: 10,
            grad_tol: 1e-10,
            n_bound: None,
            initial: None,
        }
    }
}

impl<T: Real> RateOptions<T> {
    pub fn dt(&self, horizon: T) -> T {
        horizon / T::of_usize(self.control_steps * self.steps_per_cell)
    }

    fn validate(&self) -> Result<()> {
        if self.control_steps == 0 {
            return Err(Error::config("control_steps", "must be at least 1"));
        }
        if self.steps_per_cell == 0 {
            return Err(Error::config("steps_per_cell", "must be at least 1"));
        }
        if self.mu_schedule.is_empty() || self.mu_schedule.iter().any(|&m| !(m > T::zero())) {
            return Err(Error::config("mu_schedule", "needs at least one positive weight"));
        }
        if !(self.gap_tol > T::zero()) {
            return Err(Error::config("gap_tol", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateStatus {
    Converged,
    NoFiniteRate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StageSummary<T: Real> {
    pub mu: T,
    pub cost: T,
    pub gap: T,
    pub iterations: usize,
    /// Penalized objective after each accepted step.
    pub objective_history: Vec<T>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RateEstimate<T: Real> {
    /// `½∫|ḣ|²` of the returned control.
    pub value: T,
    pub control: ControlPath<T>,
    pub endpoint: SpectralField<T>,
    /// `‖u^h(T) − x‖_V`.
    pub endpoint_gap: T,
    pub gap_tol: T,
    pub mu: T,
    pub iterations: usize,
    pub converged: bool,
    pub status: RateStatus,
    pub stages: Vec<StageSummary<T>>,
}

impl<T: Real> RateEstimate<T> {
    /// The rate, infinite when no control reached the target.
    pub fn rate(&self) -> T {
        match self.status {
            RateStatus::Converged => self.value,
            RateStatus::NoFiniteRate => T::infinity(),
        }
    }
}

/// Minimal control energy steering the skeleton from `u0` to `target` at
/// time `T`, by penalty continuation over `opts.mu_schedule`.
pub fn rate_endpoint<T: Real>(
    target: &SpectralField<T>,
    config: &ModelConfig<T>,
    opts: &RateOptions<T>,
) -> Result<RateEstimate<T>> {
    opts.validate()?;
    config.basis.check(target)?;
    let m = config.m();
    let k = opts.control_steps;
    let horizon = config.horizon;
    let dt = opts.dt(horizon);
    let tol = opts.gap_tol * config.basis.norm_v(target)?.max(T::one());
    let width = horizon / T::of_usize(k);

    let mut x: Vec<T> = match &opts.initial {
        Some(h) if h.cells() == k && h.m() == m => h.flatten(),
        Some(h) if h.m() == m && k.is_multiple_of(h.cells()) => h.refined(k / h.cells()).flatten(),
        Some(h) => {
            return Err(Error::DimensionMismatch {
                expected: k * m,
                found: h.cells() * h.m(),
            })
        }
        None => vec![T::zero(); k * m],
    };
    let bound = opts.n_bound;
    let project = move |v: &mut [T]| -> bool {
        let Some(n) = bound else { return false };
        let e = width * v.iter().map(|&a| a * a).sum::<T>();
        if e > n {
            let s = (n / e).sqrt();
            v.iter_mut().for_each(|a| *a *= s);
            true
        } else {
            false
        }
    };
    let lopts = LbfgsOptions {
        max_iter: opts.max_iter,
        memory: opts.memory,
        grad_tol: opts.grad_tol,
        ..LbfgsOptions::default()
    };

    let mut stages = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut mu = opts.mu_schedule[0];
    for &stage_mu in &opts.mu_schedule {
        mu = stage_mu;
        let objective = EndpointObjective {
            target: target.clone(),
            mu,
        };
        let f = |v: &[T]| -> Result<(T, Vec<T>)> {
            let h = ControlPath::from_flat(horizon, m, v, bound);
            let r = adjoint_gradient(&h, &objective, config, dt)?;
            Ok((r.value, r.gradient))
        };
        let proj: Option<Projector<T>> = if bound.is_some() { Some(&project) } else { None };
        let report = lbfgs(x, f, proj, &lopts)?;
        x = report.x;
        iterations += report.iterations;
        let h = ControlPath::from_flat(horizon, m, &x, bound);
        let traj = solve_skeleton(config, &h, dt)?;
        let gap = config.basis.norm_v(&traj.endpoint().sub(target))?;
        stages.push(StageSummary {
            mu,
            cost: h.cost(),
            gap,
            iterations: report.iterations,
            objective_history: report.history,
        });
        if gap <= tol {
            converged = true;
            break;
        }
    }

    let control = ControlPath::from_flat(horizon, m, &x, bound);
    let traj = solve_skeleton(config, &control, dt)?;
    let endpoint = traj.endpoint().clone();
    let endpoint_gap = config.basis.norm_v(&endpoint.sub(target))?;
    Ok(RateEstimate {
        value: control.cost(),
        control,
        endpoint,
        endpoint_gap,
        gap_tol: tol,
        mu,
        iterations,
        converged,
        status: if converged {
            RateStatus::Converged
        } else {
            RateStatus::NoFiniteRate
        },
        stages,
    })
}
