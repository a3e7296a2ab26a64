//! Time stepping of the controlled stochastic equation and of the skeleton
//! equation on the Galerkin system.
//!
//! Both schemes implement [`Stepper`]: [`EulerMaruyama`] for the stochastic
//! paths and the classical four-stage [`Rk4`] for the deterministic skeleton.
//! Controls are piecewise constant on a uniform grid, and the integration
//! step must subdivide that grid.

use std::io::{Read, Write};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::normal::box_muller;
use crate::basis::SpectralField;
use crate::error::{check_dim, Error, Result};
use crate::ops::ModelConfig;
use crate::real::Real;

/// Piecewise-constant control derivative `ḣ` on `K` uniform cells of `[0, T]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ControlPath<T: Real> {
    pub horizon: T,
    /// `hdot[k][j]`: component `j` on cell `k`.
    pub hdot: Vec<Vec<T>>,
    /// Radius `N` of the ball `S_N = {∫|ḣ|² ≤ N}` the path must stay in.
    #[serde(default)]
    pub n_bound: Option<T>,
}

impl<T: Real> ControlPath<T> {
    pub fn zeros(cells: usize, m: usize, horizon: T) -> Self {
        ControlPath {
            horizon,
            hdot: vec![vec![T::zero(); m]; cells],
            n_bound: None,
        }
    }

    pub fn constant(cells: usize, value: &[T], horizon: T) -> Self {
        ControlPath {
            horizon,
            hdot: vec![value.to_vec(); cells],
            n_bound: None,
        }
    }

    pub fn new(horizon: T, hdot: Vec<Vec<T>>, n_bound: Option<T>) -> Result<Self> {
        let c = ControlPath {
            horizon,
            hdot,
            n_bound,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hdot.is_empty() {
            return Err(Error::config("control", "needs at least one cell"));
        }
        if !(self.horizon > T::zero()) {
            return Err(Error::config("control.horizon", "must be positive"));
        }
        let m = self.hdot[0].len();
        for row in &self.hdot {
            check_dim(m, row.len())?;
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::config("control", "entries must be finite"));
            }
        }
        if let Some(n) = self.n_bound {
            if self.energy() > n * (T::one() + T::of(1e-12)) {
                return Err(Error::config("control", "energy exceeds the S_N bound"));
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.hdot.len()
    }

    pub fn m(&self) -> usize {
        self.hdot.first().map_or(0, Vec::len)
    }

    pub fn cell_width(&self) -> T {
        self.horizon / T::of_usize(self.cells())
    }

    /// `∫₀ᵀ |ḣ|² ds`.
    pub fn energy(&self) -> T {
        let w = self.cell_width();
        self.hdot
            .iter()
            .map(|r| r.iter().map(|&v| v * v).sum::<T>())
            .sum::<T>()
            * w
    }

    /// `½ ∫₀ᵀ |ḣ|² ds`.
    pub fn cost(&self) -> T {
        T::of(0.5) * self.energy()
    }

    /// Cameron–Martin distance `(∫|ḣ₁ − ḣ₂|²)^{1/2}`.
    pub fn distance(&self, other: &ControlPath<T>) -> T {
        let w = self.cell_width();
        (self
            .hdot
            .iter()
            .zip(&other.hdot)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)))
            .sum::<T>()
            * w)
            .sqrt()
    }

    pub fn flatten(&self) -> Vec<T> {
        self.hdot.iter().flatten().copied().collect()
    }

    pub fn from_flat(horizon: T, m: usize, flat: &[T], n_bound: Option<T>) -> Self {
        ControlPath {
            horizon,
            hdot: flat.chunks(m.max(1)).map(<[T]>::to_vec).collect(),
            n_bound,
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        ControlPath {
            horizon: self.horizon,
            hdot: self
                .hdot
                .iter()
                .map(|r| r.iter().map(|&v| v * s).collect())
                .collect(),
            n_bound: self.n_bound,
        }
    }

    /// Radial projection onto `S_N` when a bound is set.
    pub fn project_to_ball(&mut self) {
        if let Some(n) = self.n_bound {
            let e = self.energy();
            if e > n {
                let s = (n / e).sqrt();
                self.hdot.iter_mut().flatten().for_each(|v| *v *= s);
            }
        }
    }

    /// Same path refined to `factor × K` cells.
    pub fn refined(&self, factor: usize) -> Self {
        ControlPath {
            horizon: self.horizon,
            hdot: self
                .hdot
                .iter()
                .flat_map(|r| std::iter::repeat_n(r.clone(), factor))
                .collect(),
            n_bound: self.n_bound,
        }
    }

    /// RFC-4180 CSV with columns `t, hdot_1, …, hdot_m` (`t` = cell start).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.m()).map(|j| format!("hdot_{j}")));
        wr.write_record(&header)?;
        let width = self.cell_width();
        for (k, row) in self.hdot.iter().enumerate() {
            let mut rec = vec![format!("{}", (T::of_usize(k) * width).f64())];
            rec.extend(row.iter().map(|v| format!("{}", v.f64())));
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, horizon: T) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut hdot = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let row = rec
                .iter()
                .skip(1)
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map(T::of)
                        .map_err(|e| Error::Format(format!("control csv: {e}")))
                })
                .collect::<Result<Vec<T>>>()?;
            hdot.push(row);
        }
        ControlPath::new(horizon, hdot, None)
    }
}

/// Reproducible Brownian increments keyed by `(seed, stream, step)`.
///
/// Backed by ChaCha8 with the stream set to the trajectory index. Each step
/// consumes exactly `⌈m/2⌉` Box–Muller pairs, so the generator word position
/// of step `k` is known and any step can be regenerated on its own.
#[derive(Clone, Debug)]
pub struct NoiseDriver {
    pub seed: u64,
    pub stream: u64,
    pub m: usize,
    base: ChaCha8Rng,
}

impl NoiseDriver {
    pub fn new(seed: u64, stream: u64, m: usize) -> Self {
        let mut base = ChaCha8Rng::seed_from_u64(seed);
        base.set_stream(stream);
        NoiseDriver {
            seed,
            stream,
            m,
            base,
        }
    }

    fn words_per_step(&self) -> u128 {
        (self.m.div_ceil(2) * 4) as u128
    }

    fn draw<T: Real>(rng: &mut ChaCha8Rng, m: usize, dt: T) -> Vec<T> {
        let s = dt.f64().sqrt();
        let mut out = Vec::with_capacity(m);
        while out.len() < m {
            let (a, b) = box_muller(rng.next_u64(), rng.next_u64());
            out.push(T::of(a * s));
            if out.len() < m {
                out.push(T::of(b * s));
            }
        }
        out
    }

    /// `ΔW` for step `step`, distributed `N(0, dt·I_m)`.
    pub fn increment<T: Real>(&self, step: usize, dt: T) -> Vec<T> {
        let mut rng = self.base.clone();
        rng.set_word_pos(step as u128 * self.words_per_step());
        Self::draw(&mut rng, self.m, dt)
    }

    /// Sequential view producing the same values as [`Self::increment`].
    pub fn sequence<T: Real>(&self, dt: T) -> impl FnMut(usize) -> Vec<T> {
        let mut rng = self.base.clone();
        let m = self.m;
        let wps = self.words_per_step();
        let mut next = 0usize;
        move |step| {
            if step != next {
                rng.set_word_pos(step as u128 * wps);
            }
            next = step + 1;
            Self::draw(&mut rng, m, dt)
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub eps: f64,
    pub seed: u64,
    pub stream: u64,
    pub dt: f64,
    pub config_hash: String,
    pub scheme: String,
}

/// Sampled solution path with running diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T: Real> {
    pub times: Vec<T>,
    pub states: Vec<SpectralField<T>>,
    pub meta: TrajectoryMeta,
    /// `sup_t ‖u‖_V` over every integration step.
    pub sup_v: T,
    /// `sup_t ‖u‖_W` over every integration step.
    pub sup_w: T,
    /// `∫₀ᵀ ‖u‖² ds` with the quadrature matching the scheme.
    pub dissipation: T,
}

impl<T: Real> Trajectory<T> {
    pub fn endpoint(&self) -> &SpectralField<T> {
        self.states.last().expect("trajectory has at least the initial state")
    }

    /// `sup_t ‖self(t) − other(t)‖_V` over shared sample instants.
    pub fn sup_distance_v(&self, other: &Trajectory<T>, model: &ModelConfig<T>) -> Result<T> {
        check_dim(self.states.len(), other.states.len())?;
        let mut sup = T::zero();
        for (a, b) in self.states.iter().zip(&other.states) {
            sup = sup.max(model.basis.norm_v(&a.sub(b))?);
        }
        Ok(sup)
    }

    /// CSV rows `t, norm_v, norm_w` for plotting.
    pub fn write_norms_csv<W: Write>(&self, model: &ModelConfig<T>, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "norm_v", "norm_w"])?;
        for (t, u) in self.times.iter().zip(&self.states) {
            wr.write_record([
                format!("{}", t.f64()),
                format!("{}", model.basis.norm_v(u)?.f64()),
                format!("{}", model.basis.norm_w(u)?.f64()),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// One-step scheme on the Galerkin system.
pub trait Stepper<T: Real> {
    fn name(&self) -> &'static str;

    /// Advance `u` from `t` to `t + dt` in place, with the control held at
    /// `hdot`. Returns the scheme's quadrature of `∫‖u‖² ds` over the step.
    fn step(&mut self, model: &ModelConfig<T>, u: &mut [T], t: T, dt: T, index: usize, hdot: &[T]) -> T;
}

fn grad_sq<T: Real>(model: &ModelConfig<T>, u: &[T]) -> T {
    model
        .basis
        .modes()
        .iter()
        .zip(u)
        .map(|(m, &a)| m.w_grad * a * a)
        .sum()
}

/// Euler–Maruyama: `u ← u + dt·drift(u,t,ḣ) + √ε Ĝ(u,t) ΔW`.
pub struct EulerMaruyama<F> {
    sqrt_eps: f64,
    increments: F,
}

impl<F> EulerMaruyama<F> {
    pub fn new(eps: f64, increments: F) -> Self {
        EulerMaruyama {
            sqrt_eps: eps.max(0.0).sqrt(),
            increments,
        }
    }
}

impl<T: Real, F: FnMut(usize) -> Vec<T>> Stepper<T> for EulerMaruyama<F> {
    fn name(&self) -> &'static str {
        "euler-maruyama"
    }

    fn step(&mut self, model: &ModelConfig<T>, u: &mut [T], t: T, dt: T, index: usize, hdot: &[T]) -> T {
        let n = u.len();
        let mut d = vec![T::zero(); n];
        model.drift_into(u, t, hdot, &mut d);
        let diss = grad_sq(model, u) * dt;
        let mut out = u.to_vec();
        for (o, &di) in out.iter_mut().zip(&d) {
            *o += dt * di;
        }
        if self.sqrt_eps > 0.0 {
            let dw = (self.increments)(index);
            model.add_noise(u, &dw, T::of(self.sqrt_eps), &mut out);
        }
        u.copy_from_slice(&out);
        diss
    }
}

/// Classical four-stage Runge–Kutta for the deterministic skeleton.
#[derive(Default)]
pub struct Rk4<T> {
    k: [Vec<T>; 4],
    y: Vec<T>,
}

impl<T: Real> Rk4<T> {
    pub fn new() -> Self {
        Rk4 {
            k: Default::default(),
            y: Vec::new(),
        }
    }

    /// The four stage inputs `y₁ … y₄` and slopes `k₁ … k₄` of one step.
    pub fn stages(model: &ModelConfig<T>, u: &[T], t: T, dt: T, hdot: &[T]) -> ([Vec<T>; 4], [Vec<T>; 4]) {
        let n = u.len();
        let half = T::of(0.5) * dt;
        let mut ys: [Vec<T>; 4] = Default::default();
        let mut ks: [Vec<T>; 4] = Default::default();
        let offsets = [T::zero(), half, half, dt];
        for s in 0..4 {
            let y: Vec<T> = if s == 0 {
                u.to_vec()
            } else {
                (0..n).map(|i| u[i] + offsets[s] * ks[s - 1][i]).collect()
            };
            let mut k = vec![T::zero(); n];
            model.drift_into(&y, t + offsets[s], hdot, &mut k);
            ys[s] = y;
            ks[s] = k;
        }
        (ys, ks)
    }
}

impl<T: Real> Stepper<T> for Rk4<T> {
    fn name(&self) -> &'static str {
        "rk4"
    }

    fn step(&mut self, model: &ModelConfig<T>, u: &mut [T], t: T, dt: T, _index: usize, hdot: &[T]) -> T {
        let n = u.len();
        let half = T::of(0.5) * dt;
        let six = T::of(6.0);
        let two = T::of(2.0);
        for k in self.k.iter_mut() {
            k.resize(n, T::zero());
        }
        self.y.resize(n, T::zero());
        let mut diss = T::zero();
        let weights = [T::one(), two, two, T::one()];
        let offsets = [T::zero(), half, half, dt];
        for s in 0..4 {
            if s == 0 {
                self.y.copy_from_slice(u);
            } else {
                let (prev, _) = self.k.split_at(s);
                for i in 0..n {
                    self.y[i] = u[i] + offsets[s] * prev[s - 1][i];
                }
            }
            diss += weights[s] * grad_sq(model, &self.y);
            let mut k = std::mem::take(&mut self.k[s]);
            model.drift_into(&self.y, t + offsets[s], hdot, &mut k);
            self.k[s] = k;
        }
        for i in 0..n {
            u[i] += dt / six * (self.k[0][i] + two * self.k[1][i] + two * self.k[2][i] + self.k[3][i]);
        }
        diss * dt / six
    }
}

/// Number of steps of size `dt` in `[0, horizon]`, requiring an exact fit.
pub fn step_count<T: Real>(horizon: T, dt: T) -> Result<usize> {
    if !(dt > T::zero()) {
        return Err(Error::Grid("dt must be positive".into()));
    }
    let r = (horizon / dt).f64();
    let n = r.round();
    if n < 1.0 || (r - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::Grid(format!("dt = {} does not divide T = {}", dt, horizon)));
    }
    Ok(n as usize)
}

/// Steps per control cell; the step must subdivide the control grid.
pub fn steps_per_cell<T: Real>(model: &ModelConfig<T>, control: &ControlPath<T>, n_steps: usize) -> Result<usize> {
    if (control.horizon - model.horizon).abs() > T::of(1e-12) * model.horizon {
        return Err(Error::Grid("control horizon differs from the model horizon".into()));
    }
    check_dim(model.m(), control.m())?;
    let k = control.cells();
    if !n_steps.is_multiple_of(k) {
        return Err(Error::Grid(format!(
            "dt must subdivide the control grid ({n_steps} steps over {k} cells)"
        )));
    }
    Ok(n_steps / k)
}

/// Integrate `model` from `u0` with `stepper`; saves every `save_stride`
/// steps (0 = endpoints only) and always the final state.
pub fn integrate<T: Real, S: Stepper<T>>(
    model: &ModelConfig<T>,
    stepper: &mut S,
    control: Option<&ControlPath<T>>,
    dt: T,
    save_stride: usize,
    meta: TrajectoryMeta,
) -> Result<Trajectory<T>> {
    let n_steps = step_count(model.horizon, dt)?;
    let per_cell = match control {
        Some(c) => steps_per_cell(model, c, n_steps)?,
        None => n_steps,
    };
    let zero_h = vec![T::zero(); model.m()];
    let mut u = model.u0.coeffs.clone();
    let v0 = model.basis.norm_v(&model.u0)?;
    let mut sup_v = v0;
    let mut sup_w = model.basis.norm_w(&model.u0)?;
    let mut dissipation = T::zero();
    let mut times = vec![T::zero()];
    let mut states = vec![model.u0.clone()];
    let ceiling = model.ceiling;
    for n in 0..n_steps {
        let t = T::of_usize(n) * dt;
        let hdot = match control {
            Some(c) => &c.hdot[n / per_cell],
            None => &zero_h,
        };
        dissipation += stepper.step(model, &mut u, t, dt, n, hdot);
        let field = SpectralField::from_vec(u);
        let nv = model.basis.norm_v(&field)?;
        let t1 = T::of_usize(n + 1) * dt;
        if !nv.is_finite() || nv > ceiling {
            return Err(Error::BlowUp {
                t: t1.f64(),
                norm_v: nv.f64(),
            });
        }
        sup_v = sup_v.max(nv);
        sup_w = sup_w.max(model.basis.norm_w(&field)?);
        let last = n + 1 == n_steps;
        if last || (save_stride > 0 && (n + 1).is_multiple_of(save_stride)) {
            times.push(t1);
            states.push(field.clone());
        }
        u = field.coeffs;
    }
    Ok(Trajectory {
        times,
        states,
        meta: TrajectoryMeta {
            scheme: stepper.name().to_string(),
            dt: dt.f64(),
            ..meta
        },
        sup_v,
        sup_w,
        dissipation,
    })
}

/// One Euler–Maruyama step with an explicit increment `dW`.
pub fn step_em<T: Real>(
    u: &SpectralField<T>,
    t: T,
    dt: T,
    dw: &[T],
    hdot: &[T],
    config: &ModelConfig<T>,
    eps: T,
) -> Result<SpectralField<T>> {
    if !(dt > T::zero()) {
        return Err(Error::Grid("dt must be positive".into()));
    }
    config.basis.check(u)?;
    check_dim(config.m(), dw.len())?;
    check_dim(config.m(), hdot.len())?;
    let mut v = u.coeffs.clone();
    let dw = dw.to_vec();
    let mut em = EulerMaruyama::new(eps.f64(), move |_| dw.clone());
    em.step(config, &mut v, t, dt, 0, hdot);
    let out = SpectralField::from_vec(v);
    let nv = config.basis.norm_v(&out)?;
    if !nv.is_finite() || nv > config.ceiling {
        return Err(Error::BlowUp {
            t: (t + dt).f64(),
            norm_v: nv.f64(),
        });
    }
    Ok(out)
}

/// Euler–Maruyama path of the controlled equation (uncontrolled when
/// `control` is `None`) driven by `driver`.
pub fn solve_spde<T: Real>(
    config: &ModelConfig<T>,
    eps: T,
    control: Option<&ControlPath<T>>,
    driver: &NoiseDriver,
    dt: T,
    save_stride: usize,
) -> Result<Trajectory<T>> {
    check_dim(config.m(), driver.m)?;
    if eps < T::zero() {
        return Err(Error::config("eps", "must be nonnegative"));
    }
    let mut em = EulerMaruyama::new(eps.f64(), driver.sequence(dt));
    integrate(
        config,
        &mut em,
        control,
        dt,
        save_stride,
        TrajectoryMeta {
            eps: eps.f64(),
            seed: driver.seed,
            stream: driver.stream,
            ..Default::default()
        },
    )
}

/// Euler–Maruyama path with caller-provided increments (e.g. summed fine
/// increments for synchronized refinement studies).
pub fn solve_spde_with<T: Real>(
    config: &ModelConfig<T>,
    eps: T,
    control: Option<&ControlPath<T>>,
    increments: impl FnMut(usize) -> Vec<T>,
    dt: T,
    save_stride: usize,
) -> Result<Trajectory<T>> {
    let mut em = EulerMaruyama::new(eps.f64(), increments);
    integrate(
        config,
        &mut em,
        control,
        dt,
        save_stride,
        TrajectoryMeta {
            eps: eps.f64(),
            ..Default::default()
        },
    )
}

/// Skeleton path `Γ⁰(∫ḣ)` by RK4, saved at every step.
pub fn solve_skeleton<T: Real>(config: &ModelConfig<T>, control: &ControlPath<T>, dt: T) -> Result<Trajectory<T>> {
    integrate(config, &mut Rk4::new(), Some(control), dt, 1, TrajectoryMeta::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_torus_basis;
    use crate::ops::{Forcing, ForcingSpec, Noise, TrilinearTensor};
    use std::sync::Arc;

    fn decay_model(noise: Noise<f64>) -> ModelConfig<f64> {
        let b = Arc::new(build_torus_basis::<f64>(2, 1.0).unwrap());
        let t = Arc::new(TrilinearTensor::assemble(&b));
        let u0 = SpectralField::unit(b.len(), 5);
        ModelConfig::new(1.5, b, Some(t), ForcingSpec::new(Forcing::None, noise), u0, 1.0).unwrap()
    }

    #[test]
    fn single_mode_em_step_is_pure_decay() {
        let c = decay_model(Noise::None { m: 1 });
        let i = 5;
        let ksq = c.basis.mode(i).key.k_sq() as f64;
        let dt = 0.01;
        let u1 = step_em(&c.u0, 0.0, dt, &[0.0], &[0.0], &c, 0.0).unwrap();
        let expected = 1.0 - dt * c.nu * ksq / (1.0 + ksq);
        assert!((u1.coeffs[i] - expected).abs() < 1e-15);
        assert!(u1.coeffs.iter().enumerate().all(|(j, &a)| j == i || a == 0.0));
    }

    #[test]
    fn zero_state_stays_zero() {
        let c = decay_model(Noise::Diagonal { sigma: vec![0.7], profiles: vec![] });
        let z = SpectralField::zeros(c.n());
        let u1 = step_em(&z, 0.0, 0.1, &[0.4], &[2.0], &c, 0.5).unwrap();
        assert!(u1.coeffs.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn zero_increment_equals_deterministic_step() {
        let c = decay_model(Noise::Diagonal { sigma: vec![0.7], profiles: vec![] });
        let mut u = c.u0.clone();
        u.coeffs[0] = 0.3;
        let a = step_em(&u, 0.0, 0.01, &[0.0], &[0.2], &c, 0.9).unwrap();
        let b = step_em(&u, 0.0, 0.01, &[0.0], &[0.2], &c, 0.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn driver_random_access_matches_sequence() {
        let d = NoiseDriver::new(17, 3, 3);
        let mut seq = d.sequence(0.01f64);
        for k in 0..20 {
            assert_eq!(seq(k), d.increment::<f64>(k, 0.01));
        }
        let other = NoiseDriver::new(17, 4, 3);
        assert_ne!(d.increment::<f64>(0, 0.01), other.increment::<f64>(0, 0.01));
    }

    #[test]
    fn increments_have_unit_variance_per_dt() {
        let d = NoiseDriver::new(5, 0, 2);
        let dt = 0.25;
        let n = 20_000;
        let mut s = [0.0f64; 2];
        let mut s2 = [0.0f64; 2];
        for k in 0..n {
            let w: Vec<f64> = d.increment(k, dt);
            for j in 0..2 {
                s[j] += w[j];
                s2[j] += w[j] * w[j];
            }
        }
        for j in 0..2 {
            let mean = s[j] / n as f64;
            let var = s2[j] / n as f64 - mean * mean;
            assert!(mean.abs() < 0.02);
            assert!((var / dt - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn grid_errors() {
        let c = decay_model(Noise::None { m: 1 });
        assert!(matches!(step_count(1.0, 0.3), Err(Error::Grid(_))));
        let ctl = ControlPath::<f64>::zeros(3, 1, 1.0);
        assert!(matches!(solve_skeleton(&c, &ctl, 0.25), Err(Error::Grid(_))));
        let ctl = ControlPath::<f64>::zeros(4, 2, 1.0);
        assert!(solve_skeleton(&c, &ctl, 0.25).is_err());
    }

    #[test]
    fn blow_up_is_detected() {
        let mut c = decay_model(Noise::None { m: 1 });
        c.forcing.forcing = Forcing::Linear { kappa: 400.0 };
        c.ceiling = 10.0;
        let r = solve_skeleton(&c, &ControlPath::<f64>::zeros(1, 1, 1.0), 0.01);
        assert!(matches!(r, Err(Error::BlowUp { .. })));
    }

    #[test]
    fn control_path_cost_and_projection() {
        let c = ControlPath::<f64>::constant(8, &[3.0], 2.0);
        assert!((c.cost() - 0.5 * 9.0 * 2.0).abs() < 1e-14);
        let doubled = c.scaled(2.0);
        assert!((doubled.cost() - 4.0 * c.cost()).abs() < 1e-12);
        let mut p = c.clone();
        p.n_bound = Some(1.0);
        assert!(p.validate().is_err());
        p.project_to_ball();
        assert!((p.energy() - 1.0).abs() < 1e-12);
        p.validate().unwrap();
        assert_eq!(c.refined(4).cells(), 32);
        assert!((c.refined(4).cost() - c.cost()).abs() < 1e-12);
    }

    #[test]
    fn control_csv_roundtrip() {
        let c = ControlPath::<f64>::new(1.0, vec![vec![0.1, -2.5], vec![3.25, 1e-7]], None).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,hdot_1,hdot_2\n"));
        let back = ControlPath::read_csv(&buf[..], 1.0).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn skeleton_with_zero_everything_stays_zero() {
        let mut c = decay_model(Noise::Diagonal { sigma: vec![1.0], profiles: vec![] });
        c.u0 = SpectralField::zeros(c.n());
        let tr = solve_skeleton(&c, &ControlPath::<f64>::zeros(4, 1, 1.0), 0.05).unwrap();
        assert_eq!(tr.times.len(), 21);
        assert!(tr.states.iter().all(|s| s.coeffs.iter().all(|&a| a == 0.0)));
    }

    #[test]
    fn same_seed_bit_identical() {
        let mut c = decay_model(Noise::Diagonal { sigma: vec![0.5], profiles: vec![] });
        c.u0.coeffs[0] = 0.4;
        let d = NoiseDriver::new(99, 7, 1);
        let a = solve_spde(&c, 0.3, None, &d, 0.01, 1).unwrap();
        let b = solve_spde(&c, 0.3, None, &d, 0.01, 1).unwrap();
        assert_eq!(a, b);
        let e = solve_spde(&c, 0.3, None, &NoiseDriver::new(99, 8, 1), 0.01, 1).unwrap();
        assert_ne!(a.endpoint(), e.endpoint());
    }
}
