use crate::basis::SpectralField;
use crate::error::{check_dim, Error, Result};
use crate::integrate::{step_count, steps_per_cell, ControlPath, Rk4, Stepper};
use crate::ops::ModelConfig;
use crate::real::Real;

/// Terminal penalty `(μ/2) ‖u(T) − target‖_V²`.
#[derive(Clone, Debug)]
pub struct EndpointObjective<T: Real> {
    pub target: SpectralField<T>,
    pub mu: T,
}

#[derive(Clone, Debug)]
pub struct GradientReport<T: Real> {
    /// `cost + penalty`.
    pub value: T,
    pub cost: T,
    pub penalty: T,
    pub endpoint: SpectralField<T>,
    /// Gradient with respect to the flattened `ḣ` cells (row-major `K × m`).
    pub gradient: Vec<T>,
}

/// Value and exact gradient of `½∫|ḣ|² + (μ/2)‖Γ⁰(h)(T) − x‖_V²` for the
/// discrete RK4 skeleton with step `dt`.
///
/// The reverse sweep recomputes the four stages of every step from the
/// stored step states and pulls the cotangent back through each stage with
/// the drift's vector–Jacobian product.
pub fn adjoint_gradient<T: Real>(
    h: &ControlPath<T>,
    objective: &EndpointObjective<T>,
    config: &ModelConfig<T>,
    dt: T,
) -> Result<GradientReport<T>> {
    config.basis.check(&objective.target)?;
    check_dim(config.m(), h.m())?;
    let n_steps = step_count(config.horizon, dt)?;
    let per_cell = steps_per_cell(config, h, n_steps)?;
    let n = config.n();
    let m = config.m();

    let mut states = Vec::with_capacity(n_steps + 1);
    let mut u = config.u0.coeffs.clone();
    states.push(u.clone());
    let mut rk = Rk4::new();
    for s in 0..n_steps {
        let t = T::of_usize(s) * dt;
        rk.step(config, &mut u, t, dt, s, &h.hdot[s / per_cell]);
        states.push(u.clone());
    }

    let endpoint = SpectralField::from_vec(u);
    let nv = config.basis.norm_v(&endpoint)?;
    if !endpoint.is_finite() || !(nv <= config.ceiling) {
        return Err(Error::BlowUp {
            t: config.horizon.f64(),
            norm_v: nv.f64(),
        });
    }
    let diff = endpoint.sub(&objective.target);
    let half = T::of(0.5);
    let penalty = half * objective.mu * config.basis.inner_v(&diff, &diff)?;
    let cost = h.cost();

    let mut ubar: Vec<T> = config
        .basis
        .modes()
        .iter()
        .zip(&diff.coeffs)
        .map(|(md, &d)| objective.mu * md.w_v * d)
        .collect();
    let width = h.cell_width();
    let mut gradient: Vec<T> = h.flatten().into_iter().map(|v| v * width).collect();

    let six = T::of(6.0);
    let three = T::of(3.0);
    for s in (0..n_steps).rev() {
        let t = T::of_usize(s) * dt;
        let cell = s / per_cell;
        let hdot = &h.hdot[cell];
        let (ys, _) = Rk4::stages(config, &states[s], t, dt, hdot);
        let times = [t, t + half * dt, t + half * dt, t + dt];
        let mut kbar: [Vec<T>; 4] = [
            ubar.iter().map(|&v| v * dt / six).collect(),
            ubar.iter().map(|&v| v * dt / three).collect(),
            ubar.iter().map(|&v| v * dt / three).collect(),
            ubar.iter().map(|&v| v * dt / six).collect(),
        ];
        let back = [T::zero(), half * dt, half * dt, dt];
        for stage in (0..4).rev() {
            let (gy, gh) = config.drift_vjp(&ys[stage], times[stage], hdot, &kbar[stage]);
            for i in 0..n {
                ubar[i] += gy[i];
            }
            if stage > 0 {
                let c = back[stage];
                for i in 0..n {
                    let v = c * gy[i];
                    kbar[stage - 1][i] += v;
                }
            }
            for j in 0..m {
                gradient[cell * m + j] += gh[j];
            }
        }
    }

    Ok(GradientReport {
        value: cost + penalty,
        cost,
        penalty,
        endpoint,
        gradient,
    })
}
