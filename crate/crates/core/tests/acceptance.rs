//! End-to-end acceptance checks. Each test prints one `[PASS]`/`[FAIL]` line.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sgfluid::basis::{apply_inv_stokes, build_torus_basis};
use sgfluid::ldp::{adjoint_gradient, gramian_rate_ball, gramian_rate_linear, rate_endpoint};
use sgfluid::ldp::{EndpointObjective, LinearModelSpec, RateOptions};
use sgfluid::mc::{
    condition_a_check, condition_b_check, ldp_sweep, moment_check, BallEvent, ConditionAOptions, ConditionBOptions,
    EnsembleOptions, MomentOptions,
};
use sgfluid::{bhat, solve_skeleton, Control, Field, Forcing, ForcingSpec, Model, Noise, Tensor};

use common::{linear_first_shell, nonlinear, ou_rate, say};

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    say(&format!("[{}] criterion {id:>2} {name}: {detail}", if pass { "PASS" } else { "FAIL" }));
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

#[test]
fn c01_trilinear_antisymmetry() {
    let start = Instant::now();
    let b = build_torus_basis::<f64>(4, 1.0).unwrap();
    let t = Tensor::assemble(&b);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let u = b.smooth_random(&mut rng, 1.0);
        let v = b.smooth_random(&mut rng, 1.0);
        let w = b.smooth_random(&mut rng, 1.0);
        let buv = bhat(&u, &v, &t, &b).unwrap();
        let buw = bhat(&u, &w, &t, &b).unwrap();
        let self_term = b.inner_v(&buv, &v).unwrap();
        let anti = b.inner_v(&buv, &w).unwrap() + b.inner_v(&buw, &v).unwrap();
        worst = worst.max(self_term.abs()).max(anti.abs());
    }
    let el = start.elapsed();
    verdict(
        1,
        "trilinear antisymmetry",
        worst <= 1e-12 && el < Duration::from_secs(10),
        format!("max |residual| = {worst:.3e} over 1000 triples, {:.2}s", secs(el)),
    );
}

#[test]
fn c02_resolvent_duality() {
    let b = build_torus_basis::<f64>(4, 0.7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let f = b.white_random(&mut rng);
        let g = b.white_random(&mut rng);
        let v = apply_inv_stokes(&f, &b).unwrap();
        let lhs = b.inner_v(&v, &g).unwrap();
        let rhs = b.inner_l2(&f, &g).unwrap();
        worst = worst.max((lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE));
    }
    verdict(2, "resolvent duality", worst <= 1e-12, format!("max relative error = {worst:.3e} over 100 pairs"));
}

#[test]
fn c03_energy_identity() {
    let start = Instant::now();
    let b = Arc::new(build_torus_basis::<f64>(4, 1.0).unwrap());
    let t = Arc::new(Tensor::assemble(&b));
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let u0 = b.smooth_random(&mut rng, 1.0);
    let quiet = ForcingSpec::new(Forcing::None, Noise::None { m: 1 });
    let model = Model::new(1.0, b.clone(), Some(t), quiet, u0.clone(), 1.0).unwrap();
    let tr = solve_skeleton(&model, &Control::zeros(1, 1, 1.0), 1e-3).unwrap();
    let e0 = b.norm_v(&u0).unwrap().powi(2);
    let e1 = b.norm_v(tr.endpoint()).unwrap().powi(2);
    let resid = (e1 + 2.0 * model.nu * tr.dissipation - e0).abs() / e0;
    let el = start.elapsed();
    verdict(
        3,
        "energy identity",
        resid <= 1e-6 && el < Duration::from_secs(30),
        format!("relative residual = {resid:.3e}, {:.2}s", secs(el)),
    );
}

#[test]
fn c04_norm_sandwich() {
    let alpha = 0.6;
    let b = build_torus_basis::<f64>(4, alpha).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut ok = true;
    let (mut lo_margin, mut hi_margin) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..1000 {
        let u = b.white_random(&mut rng);
        let v2 = b.norm_v(&u).unwrap().powi(2);
        let g2 = b.inner_grad(&u, &u).unwrap();
        let lower = v2 / (1.0 + alpha);
        let upper = v2 / alpha;
        let slack = 1e-12 * v2;
        ok &= lower <= g2 + slack && g2 <= upper + slack;
        lo_margin = lo_margin.min((g2 - lower) / v2);
        hi_margin = hi_margin.min((upper - g2) / v2);
    }
    verdict(
        4,
        "norm sandwich",
        ok,
        format!("min relative margins: lower {lo_margin:.3e}, upper {hi_margin:.3e}"),
    );
}

#[test]
fn c05_adjoint_gradient() {
    let start = Instant::now();
    let model = nonlinear(2, 0.8, &[0.5, 0.3], 1.0, 505);
    let mut rng = ChaCha8Rng::seed_from_u64(506);
    let target = model.basis.smooth_random(&mut rng, 0.8);
    let k = 16;
    let dt = 1.0 / 128.0;
    let flat: Vec<f64> = (0..k * 2).map(|_| sgfluid_normal(&mut rng)).collect();
    let h = Control::from_flat(1.0, 2, &flat, None);
    let obj = EndpointObjective { target, mu: 10.0 };
    let g = adjoint_gradient(&h, &obj, &model, dt).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let d: Vec<f64> = (0..k * 2).map(|_| sgfluid_normal(&mut rng)).collect();
        let nd = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        let d: Vec<f64> = d.iter().map(|v| v / nd).collect();
        let tau = 1e-5;
        let shifted = |s: f64| {
            let x: Vec<f64> = flat.iter().zip(&d).map(|(a, b)| a + s * b).collect();
            adjoint_gradient(&Control::from_flat(1.0, 2, &x, None), &obj, &model, dt).unwrap().value
        };
        let fd = (shifted(tau) - shifted(-tau)) / (2.0 * tau);
        let ad: f64 = g.gradient.iter().zip(&d).map(|(a, b)| a * b).sum();
        worst = worst.max((fd - ad).abs() / ad.abs().max(1e-8));
    }
    let el = start.elapsed();
    verdict(
        5,
        "adjoint gradient",
        worst <= 1e-5 && el < Duration::from_secs(60),
        format!("max relative error = {worst:.3e} over 20 directions, {:.2}s", secs(el)),
    );
}

fn sgfluid_normal(rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[test]
fn c06_rate_oracles() {
    let start = Instant::now();
    let scalar = linear_first_shell(&[1.0]);
    let mut x = Field::zeros(scalar.n());
    x.coeffs[0] = 1.0;
    let est = rate_endpoint(&x, &scalar, &RateOptions::default()).unwrap();
    let oracle = ou_rate(1.0, 1.0, 1.0, 1.0);
    let err1 = (est.value - oracle).abs() / oracle;
    let el1 = start.elapsed();

    let start = Instant::now();
    let sig = [1.0, 0.6];
    let pair = linear_first_shell(&sig);
    let mut y = Field::zeros(pair.n());
    y.coeffs[0] = 0.8;
    y.coeffs[1] = -0.5;
    let est2 = rate_endpoint(&y, &pair, &RateOptions::default()).unwrap();
    let block = ou_rate(1.0, sig[0], 1.0, 0.8) + ou_rate(1.0, sig[1], 1.0, -0.5);
    let err2 = (est2.value - block).abs() / block;
    let gram = gramian_rate_linear(&LinearModelSpec::from_model(&pair).unwrap(), &y).unwrap();
    let el2 = start.elapsed();
    verdict(
        6,
        "rate oracles",
        est.converged
            && est2.converged
            && err1 <= 0.01
            && err2 <= 0.01
            && el1 < Duration::from_secs(60)
            && el2 < Duration::from_secs(60),
        format!(
            "scalar {:.6} vs {oracle:.6} (rel {err1:.2e}, {:.2}s); two-mode {:.6} vs block sum {block:.6} \
             (rel {err2:.2e}, Gramian {gram:.6}, {:.2}s)",
            est.value,
            secs(el1),
            est2.value,
            secs(el2)
        ),
    );
}

fn sweep_instance() -> (Model, BallEvent<f64>, f64) {
    let model = linear_first_shell(&[1.0, 1.0]);
    let mut x = Field::zeros(model.n());
    x.coeffs[0] = 0.72;
    let delta = 0.3;
    let i_ref = gramian_rate_ball(&LinearModelSpec::from_model(&model).unwrap(), &x, delta).unwrap();
    (model, BallEvent::new(x, delta).unwrap(), i_ref)
}

#[test]
fn c07_ldp_sweep() {
    let start = Instant::now();
    let (model, event, i_ref) = sweep_instance();
    let opts = EnsembleOptions { n: 100_000, dt: 0.01, seed: 7, threads: None };
    let report = ldp_sweep(&model, &[0.4, 0.2, 0.1, 0.05], &event, i_ref, &opts).unwrap();
    let el = start.elapsed();
    let ys: Vec<String> = report
        .rows
        .iter()
        .map(|r| match r.neg_eps_log_p {
            Some(y) => format!("{:.4}", y),
            None => "censored".into(),
        })
        .collect();
    let gap = report.final_gap.unwrap_or(f64::INFINITY);
    verdict(
        7,
        "LDP sweep",
        report.monotone && gap <= 0.25 && el < Duration::from_secs(600),
        format!(
            "-eps log p = [{}] vs I_ref = {i_ref:.4}; monotone = {}, final gap = {:.1}%, {:.1}s",
            ys.join(", "),
            report.monotone,
            100.0 * gap,
            secs(el)
        ),
    );
}

#[test]
fn c08_condition_a() {
    let model = nonlinear(2, 1.0, &[0.5], 1.0, 808);
    let mut h = Control::constant(16, &[0.5], 1.0);
    h.n_bound = Some(4.0);
    let opts = ConditionAOptions {
        eps_list: vec![0.4, 0.2, 0.1, 0.05],
        n_rep: 200,
        dt: 1.0 / 256.0,
        seed: 8,
        threads: None,
        perturbation: 1.0,
    };
    let r = condition_a_check(&model, &h, &opts).unwrap();
    let ds: Vec<String> = r.rows.iter().map(|row| format!("{:.4}", row.discrepancy)).collect();
    verdict(
        8,
        "condition (a)",
        r.r_squared >= 0.9,
        format!(
            "E sup discrepancy = [{}], C = {:.4}, R^2 = {:.4}",
            ds.join(", "),
            r.c_fit,
            r.r_squared
        ),
    );
}

#[test]
fn c09_condition_b() {
    let model = nonlinear(2, 1.0, &[0.5, 0.3], 1.0, 909);
    let opts = ConditionBOptions {
        n_bound: 1.0,
        n_controls: 50,
        cells: 16,
        dt: 1.0 / 128.0,
        seed: 9,
        levels: 6,
        threads: None,
    };
    let r = condition_b_check(&model, &opts).unwrap();
    verdict(
        9,
        "condition (b)",
        r.lipschitz_max.is_finite() && r.identical_gap == 0.0 && r.saturates,
        format!(
            "L_max = {:.4}, L_fit = {:.4}, image covering {:?} vs control covering {:?}",
            r.lipschitz_max, r.lipschitz_fit, r.image_covering, r.control_covering
        ),
    );
}

#[test]
fn c10_uniform_moments() {
    let model = nonlinear(2, 1.0, &[0.3], 1.0, 1010);
    let opts = MomentOptions {
        eps_list: vec![0.4, 0.2, 0.1, 0.05],
        n: 500,
        dt: 1.0 / 256.0,
        seed: 10,
        threads: None,
    };
    let r = moment_check(&model, &opts).unwrap();
    let ms: Vec<String> = r.rows.iter().map(|row| format!("{:.4}", row.moment)).collect();
    verdict(
        10,
        "uniform moments",
        r.ratio <= 2.0,
        format!("E sup ||u||_W^4 = [{}], max/min = {:.4}", ms.join(", "), r.ratio),
    );
}

#[test]
fn c11_thread_independence() {
    let (model, event, i_ref) = sweep_instance();
    let eps = [0.4, 0.2, 0.1, 0.05];
    let csv = |threads| {
        let opts = EnsembleOptions { n: 20_000, dt: 0.01, seed: 11, threads: Some(threads) };
        ldp_sweep(&model, &eps, &event, i_ref, &opts).unwrap().to_csv_string().unwrap()
    };
    let one = csv(1);
    let same = [2, 3, 8].iter().all(|&t| csv(t) == one);
    verdict(
        11,
        "reproducibility",
        same,
        format!("sweep CSV with 1, 2, 3, 8 threads identical = {same} ({} bytes)", one.len()),
    );
}
