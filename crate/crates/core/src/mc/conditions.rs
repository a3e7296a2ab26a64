use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::with_threads;
use crate::basis::normal::standard_normal;
use crate::error::{Error, Result};
use crate::integrate::{solve_skeleton, solve_spde, ControlPath, NoiseDriver, Trajectory};
use crate::ops::ModelConfig;
use crate::real::Real;

/// Random control with `∫|ξ|² = energy`, drawn from stream `stream`.
fn random_control<T: Real>(cells: usize, m: usize, horizon: T, energy: f64, seed: u64, stream: u64) -> ControlPath<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let raw: Vec<f64> = (0..cells * m).map(|_| standard_normal(&mut rng)).collect();
    let width = horizon.f64() / cells as f64;
    let e: f64 = raw.iter().map(|v| v * v).sum::<f64>() * width;
    let s = if e > 0.0 { (energy / e).sqrt() } else { 0.0 };
    let flat: Vec<T> = raw.iter().map(|v| T::of(v * s)).collect();
    ControlPath::from_flat(horizon, m, &flat, None)
}

fn ols_through_origin(x: &[f64], y: &[f64]) -> (f64, f64) {
    let c = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / x.iter().map(|a| a * a).sum::<f64>();
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - c * a).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else if ss_res == 0.0 { 1.0 } else { 0.0 };
    (c, r2)
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Clone, Debug)]
pub struct ConditionAOptions<T> {
    pub eps_list: Vec<T>,
    pub n_rep: usize,
    pub dt: T,
    pub seed: u64,
    pub threads: Option<usize>,
    /// `h^ε = h + √ε · perturbation · ξ` with `∫|ξ|² = 1`; zero keeps `h^ε = h`.
    pub perturbation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionARow {
    pub eps: f64,
    /// `E sup_t ‖u^{h^ε} − Γ⁰(h)‖_V`.
    pub discrepancy: f64,
    pub std_error: f64,
    /// Mean `‖h^ε − h‖_{H₀}`.
    pub control_term: f64,
    /// Mean `√ε (∫‖Ĝ(u)‖²_{HS,V} dt)^{1/2}` along the paths.
    pub noise_term: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionAReport {
    pub rows: Vec<ConditionARow>,
    /// Least-squares `C` in `discrepancy ≈ C √ε`.
    pub c_fit: f64,
    pub r_squared: f64,
    /// Discrepancy shrinks with every decrease of `ε`.
    pub decreasing: bool,
    /// `sup_t` distance between the zero-noise Euler–Maruyama path and the
    /// RK4 skeleton, the discretization floor of the comparison.
    pub scheme_offset: f64,
}

/// Distance between controlled stochastic paths with perturbed controls and
/// the skeleton of the unperturbed control, as `ε → 0`.
pub fn condition_a_check<T: Real>(
    config: &ModelConfig<T>,
    h: &ControlPath<T>,
    opts: &ConditionAOptions<T>,
) -> Result<ConditionAReport> {
    if opts.n_rep == 0 || opts.eps_list.is_empty() {
        return Err(Error::config("n_rep", "needs at least one repetition and one noise level"));
    }
    h.validate()?;
    let m = config.m();
    let reference = solve_spde(config, T::zero(), Some(h), &NoiseDriver::new(0, 0, m), opts.dt, 1)?;
    let rk = solve_skeleton(config, h, opts.dt)?;
    let scheme_offset = reference.sup_distance_v(&rk, config)?.f64();

    let mut rows = Vec::with_capacity(opts.eps_list.len());
    for &eps in &opts.eps_list {
        let root = eps.f64().sqrt();
        let samples: Vec<(f64, f64, f64)> = with_threads(opts.threads, || {
            (0..opts.n_rep)
                .into_par_iter()
                .map(|rep| {
                    let mut he = h.clone();
                    if opts.perturbation != 0.0 {
                        let xi: ControlPath<T> = random_control(h.cells(), m, h.horizon, 1.0, opts.seed ^ 0x5eed, rep as u64);
                        let amp = T::of(root * opts.perturbation);
                        for (row, xr) in he.hdot.iter_mut().zip(&xi.hdot) {
                            for (v, &x) in row.iter_mut().zip(xr) {
                                *v += amp * x;
                            }
                        }
                        he.project_to_ball();
                    }
                    let driver = NoiseDriver::new(opts.seed, rep as u64, m);
                    let tr = solve_spde(config, eps, Some(&he), &driver, opts.dt, 1)?;
                    let d = tr.sup_distance_v(&reference, config)?.f64();
                    Ok((d, he.distance(h).f64(), root * noise_energy(config, &tr)?))
                })
                .collect::<Result<Vec<_>>>()
        })??;
        let d: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let (mean, se) = mean_and_se(&d);
        let n = samples.len() as f64;
        rows.push(ConditionARow {
            eps: eps.f64(),
            discrepancy: mean,
            std_error: se,
            control_term: samples.iter().map(|s| s.1).sum::<f64>() / n,
            noise_term: samples.iter().map(|s| s.2).sum::<f64>() / n,
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.eps.sqrt()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.discrepancy).collect();
    let (c_fit, r_squared) = ols_through_origin(&x, &y);
    let decreasing = rows
        .windows(2)
        .all(|w| if w[1].eps < w[0].eps { w[1].discrepancy <= w[0].discrepancy } else { true });
    Ok(ConditionAReport {
        rows,
        c_fit,
        r_squared,
        decreasing,
        scheme_offset,
    })
}

/// `(∫ Σ_j ‖Ĝ_j(u(t))‖²_V dt)^{1/2}` with the left-point rule on saved states.
fn noise_energy<T: Real>(config: &ModelConfig<T>, tr: &Trajectory<T>) -> Result<f64> {
    let mut acc = 0.0;
    for (w, s) in tr.times.windows(2).zip(&tr.states) {
        let dt = (w[1] - w[0]).f64();
        for col in config.noise_columns(&s.coeffs) {
            acc += config.basis.norm_v(&col)?.f64().powi(2) * dt;
        }
    }
    Ok(acc.sqrt())
}

#[derive(Clone, Debug)]
pub struct ConditionBOptions<T> {
    /// Energy bound `N` of `S_N = {∫|ḣ|² ≤ N}`.
    pub n_bound: T,
    pub n_controls: usize,
    pub cells: usize,
    pub dt: T,
    pub seed: u64,
    /// Covering radii `diam · 2^{-k}` for `k = 0..=levels`.
    pub levels: usize,
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionBReport {
    pub n_controls: usize,
    /// `max d_img / d_ctl` over distinct pairs.
    pub lipschitz_max: f64,
    /// Least-squares slope of `d_img` against `d_ctl`.
    pub lipschitz_fit: f64,
    pub image_diameter: f64,
    pub control_diameter: f64,
    pub radii: Vec<f64>,
    /// Greedy covering numbers of the image set at `radii`.
    pub image_covering: Vec<usize>,
    /// Greedy covering numbers of the controls at the same relative radii.
    pub control_covering: Vec<usize>,
    /// Largest image distance between two identical controls.
    pub identical_gap: f64,
    /// The image set is covered at a quarter of its diameter by at most
    /// half as many balls as there are points.
    pub saturates: bool,
}

/// Greedy covering numbers of a finite metric space given by its distance
/// matrix, one per radius.
pub fn covering_numbers(dist: &[Vec<f64>], radii: &[f64]) -> Vec<usize> {
    let n = dist.len();
    radii
        .iter()
        .map(|&r| {
            let mut covered = vec![false; n];
            let mut count = 0;
            for i in 0..n {
                if covered[i] {
                    continue;
                }
                count += 1;
                for j in 0..n {
                    if dist[i][j] <= r {
                        covered[j] = true;
                    }
                }
            }
            count
        })
        .collect()
}

/// Continuity and compactness diagnostics of the skeleton map on `S_N`.
pub fn condition_b_check<T: Real>(config: &ModelConfig<T>, opts: &ConditionBOptions<T>) -> Result<ConditionBReport> {
    if opts.n_controls < 2 {
        return Err(Error::config("n_controls", "needs at least two controls"));
    }
    if !(opts.n_bound > T::zero()) {
        return Err(Error::config("N", "must be positive"));
    }
    let m = config.m();
    let nb = opts.n_bound.f64();
    let controls: Vec<ControlPath<T>> = (0..opts.n_controls)
        .map(|i| {
            if i == 0 {
                return ControlPath::zeros(opts.cells, m, config.horizon);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(u64::MAX - i as u64);
            let radius = crate::basis::normal::uniform_open(rand::RngCore::next_u64(&mut rng));
            let mut c = random_control(opts.cells, m, config.horizon, nb * radius, opts.seed, i as u64);
            c.n_bound = Some(opts.n_bound);
            c
        })
        .collect();
    let images: Vec<Trajectory<T>> = with_threads(opts.threads, || {
        controls
            .par_iter()
            .map(|c| solve_skeleton(config, c, opts.dt))
            .collect::<Result<Vec<_>>>()
    })??;
    let again = solve_skeleton(config, &controls[1], opts.dt)?;
    let identical_gap = again.sup_distance_v(&images[1], config)?.f64();

    let n = controls.len();
    let mut di = vec![vec![0.0; n]; n];
    let mut dc = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let a = images[i].sup_distance_v(&images[j], config)?.f64();
            let b = controls[i].distance(&controls[j]).f64();
            di[i][j] = a;
            di[j][i] = a;
            dc[i][j] = b;
            dc[j][i] = b;
        }
    }
    let mut lmax: f64 = 0.0;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            if dc[i][j] > 0.0 {
                lmax = lmax.max(di[i][j] / dc[i][j]);
            }
            sxy += di[i][j] * dc[i][j];
            sxx += dc[i][j] * dc[i][j];
        }
    }
    let diam = |d: &[Vec<f64>]| d.iter().flatten().cloned().fold(0.0, f64::max);
    let image_diameter = diam(&di);
    let control_diameter = diam(&dc);
    let scales: Vec<f64> = (0..=opts.levels).map(|k| 0.5f64.powi(k as i32)).collect();
    let radii: Vec<f64> = scales.iter().map(|s| s * image_diameter).collect();
    let cradii: Vec<f64> = scales.iter().map(|s| s * control_diameter).collect();
    let image_covering = covering_numbers(&di, &radii);
    let control_covering = covering_numbers(&dc, &cradii);
    let quarter = covering_numbers(&di, &[0.25 * image_diameter])[0];
    Ok(ConditionBReport {
        n_controls: n,
        lipschitz_max: lmax,
        lipschitz_fit: if sxx > 0.0 { sxy / sxx } else { 0.0 },
        image_diameter,
        control_diameter,
        radii,
        image_covering,
        control_covering,
        identical_gap,
        saturates: 2 * quarter <= n,
    })
}

#[derive(Clone, Debug)]
pub struct MomentOptions<T> {
    pub eps_list: Vec<T>,
    pub n: usize,
    pub dt: T,
    pub seed: u64,
    pub threads: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub eps: f64,
    /// `E sup_t ‖u^ε‖_W⁴`.
    pub moment: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub rows: Vec<MomentRow>,
    /// Largest over smallest moment across the noise levels.
    pub ratio: f64,
}

/// Empirical `E sup_t ‖u^ε‖_W⁴` for each noise level.
pub fn moment_check<T: Real>(config: &ModelConfig<T>, opts: &MomentOptions<T>) -> Result<MomentReport> {
    if opts.n == 0 || opts.eps_list.is_empty() {
        return Err(Error::config("n", "needs at least one path and one noise level"));
    }
    let m = config.m();
    let mut rows = Vec::new();
    for &eps in &opts.eps_list {
        let v: Vec<f64> = with_threads(opts.threads, || {
            (0..opts.n)
                .into_par_iter()
                .map(|i| {
                    let tr = solve_spde(config, eps, None, &NoiseDriver::new(opts.seed, i as u64, m), opts.dt, 0)?;
                    Ok(tr.sup_w.f64().powi(4))
                })
                .collect::<Result<Vec<_>>>()
        })??;
        let (moment, std_error) = mean_and_se(&v);
        rows.push(MomentRow {
            eps: eps.f64(),
            moment,
            std_error,
        });
    }
    let hi = rows.iter().map(|r| r.moment).fold(f64::MIN, f64::max);
    let lo = rows.iter().map(|r| r.moment).fold(f64::MAX, f64::min);
    Ok(MomentReport {
        rows,
        ratio: if lo > 0.0 { hi / lo } else { f64::INFINITY },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_of_line_points() {
        let pts = [0.0f64, 1.0, 2.0, 10.0];
        let d: Vec<Vec<f64>> = pts.iter().map(|a| pts.iter().map(|b| (a - b).abs()).collect()).collect();
        assert_eq!(covering_numbers(&d, &[100.0, 1.0, 0.5]), vec![1, 3, 4]);
    }

    #[test]
    fn fit_of_exact_root_law() {
        let x: Vec<f64> = [0.4f64, 0.2, 0.1, 0.05].iter().map(|e| e.sqrt()).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let (c, r2) = ols_through_origin(&x, &y);
        assert!((c - 3.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_control_energy() {
        let c: ControlPath<f64> = random_control(16, 2, 2.0, 0.7, 9, 4);
        assert!((c.energy() - 0.7).abs() < 1e-12);
    }
}
