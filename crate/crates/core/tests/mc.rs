//! Monte Carlo estimators against Gaussian and deterministic references.

mod common;

use sgfluid::ldp::RateOptions;
use sgfluid::mc::{ball_reference, ldp_sweep, run_ensemble, BallEvent, EnsembleOptions};
use sgfluid::{solve_skeleton, Control, Field};

use common::{linear_first_shell, nonlinear};

/// Terminal variance of Euler–Maruyama for `dX = −aX dt + √ε dW`.
fn em_variance(a: f64, eps: f64, dt: f64, steps: usize) -> f64 {
    let r = (1.0 - a * dt).powi(2);
    eps * dt * (1.0 - r.powi(steps as i32)) / (1.0 - r)
}

fn normal_cdf(x: f64) -> f64 {
    let n = 20_000;
    let lo = -12.0;
    if x <= lo {
        return 0.0;
    }
    let h = (x - lo) / n as f64;
    let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(lo) + f(x);
    for i in 1..n {
        s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn scalar_probability_matches_gaussian_law() {
    let model = linear_first_shell(&[1.0]);
    let eps = 0.2;
    let dt = 0.01;
    let var = em_variance(1.0, eps, dt, 100);
    let mut x = Field::zeros(model.n());
    x.coeffs[0] = 0.4;
    let delta = 0.2;
    // ‖y‖_V = √2 |y₀| on the first shell.
    let r = delta / 2f64.sqrt();
    let sd = var.sqrt();
    let p = normal_cdf((0.4 + r) / sd) - normal_cdf((0.4 - r) / sd);
    let ev = BallEvent::new(x, delta).unwrap();
    let n = 40_000;
    let est = run_ensemble(&model, eps, &ev, &EnsembleOptions { n, dt, seed: 12, threads: None }).unwrap();
    let tol = 4.0 * (p * (1.0 - p) / n as f64).sqrt();
    assert!((est.p_hat - p).abs() < tol, "p_hat {} vs {p} ± {tol}", est.p_hat);
    assert!(est.lo <= p && p <= est.hi);
}

#[test]
fn ball_around_noise_free_endpoint_fills_up() {
    let model = nonlinear(2, 1.0, &[0.4], 1.0, 4);
    let free = solve_skeleton(&model, &Control::zeros(1, 1, 1.0), 1.0 / 128.0).unwrap();
    let ev = BallEvent::new(free.endpoint().clone(), 0.05).unwrap();
    let p: Vec<f64> = [0.1, 0.01, 0.001]
        .iter()
        .map(|&e| {
            run_ensemble(&model, e, &ev, &EnsembleOptions { n: 400, dt: 1.0 / 128.0, seed: 2, threads: None })
                .unwrap()
                .p_hat
        })
        .collect();
    assert!(p[0] <= p[1] && p[1] <= p[2], "{p:?}");
    assert!(p[2] > 0.99, "{p:?}");
}

#[test]
fn whole_space_event_has_zero_rate() {
    let model = linear_first_shell(&[1.0, 1.0]);
    let ev = BallEvent::new(Field::zeros(model.n()), 1e6).unwrap();
    let opts = EnsembleOptions { n: 200, dt: 0.01, seed: 1, threads: None };
    let report = ldp_sweep(&model, &[0.4, 0.2], &ev, 0.0, &opts).unwrap();
    for r in &report.rows {
        assert_eq!(r.p_hat, 1.0);
        assert_eq!(r.neg_eps_log_p, Some(0.0));
    }
    let reference = ball_reference(&model, &ev, &RateOptions::default()).unwrap();
    assert_eq!(reference.value, 0.0);
}

#[test]
fn same_seed_same_counts() {
    let model = linear_first_shell(&[1.0, 1.0]);
    let mut x = Field::zeros(model.n());
    x.coeffs[0] = 0.5;
    let ev = BallEvent::new(x, 0.3).unwrap();
    let run = |seed, threads| {
        run_ensemble(&model, 0.2, &ev, &EnsembleOptions { n: 5000, dt: 0.01, seed, threads: Some(threads) }).unwrap()
    };
    let a = run(3, 1);
    assert_eq!(a, run(3, 6));
    assert_ne!(a.n_hits, run(4, 2).n_hits);
}

#[test]
fn nonlinear_reference_carries_a_caveat() {
    let model = nonlinear(2, 1.0, &[0.5], 0.5, 6);
    let mut far = model.u0.clone();
    far.scale(2.0);
    let ev = BallEvent::new(far, 0.05).unwrap();
    let opts = RateOptions { max_iter: 100, ..RateOptions::default() };
    let r = ball_reference(&model, &ev, &opts).unwrap();
    assert_eq!(r.method, "rate_endpoint_nearest_point");
    assert!(r.caveat.is_some());
    assert!(r.value > 0.0);
}
