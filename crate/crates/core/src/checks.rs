//! Self-checks of a configured model: structural identities of the discrete
//! operators and consistency of the adjoint gradient.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{apply_inv_stokes, SpectralField};
use crate::error::Result;
use crate::integrate::{solve_skeleton, ControlPath};
use crate::ldp::{adjoint_gradient, EndpointObjective};
use crate::ops::{bhat, Forcing, ForcingSpec, ModelConfig, Noise};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed residual.
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    pub results: Vec<InvariantResult>,
    pub all_passed: bool,
}

impl InvariantReport {
    /// Fixed-width pass/fail table.
    pub fn table(&self) -> String {
        let mut s = format!("{:<28} {:<6} {:>12} {:>10}\n", "invariant", "status", "value", "tolerance");
        for r in &self.results {
            s += &format!(
                "{:<28} {:<6} {:>12.3e} {:>10.1e}\n",
                r.name,
                if r.passed { "PASS" } else { "FAIL" },
                r.value,
                r.tolerance
            );
        }
        s
    }
}

fn result(name: &str, value: f64, tolerance: f64, detail: String) -> InvariantResult {
    InvariantResult {
        name: name.into(),
        passed: value <= tolerance,
        value,
        tolerance,
        detail,
    }
}

/// Runs every invariant on `model`, drawing random fields from `seed`.
pub fn run_invariants(model: &ModelConfig<f64>, seed: u64) -> Result<InvariantReport> {
    let b = &model.basis;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::new();

    let mut worst: f64 = 0.0;
    if let Some(t) = &model.tensor {
        for _ in 0..200 {
            let u = b.smooth_random(&mut rng, 1.0);
            let v = b.smooth_random(&mut rng, 1.0);
            let w = b.smooth_random(&mut rng, 1.0);
            let buv = bhat(&u, &v, t, b)?;
            let buw = bhat(&u, &w, t, b)?;
            worst = worst
                .max(b.inner_v(&buv, &v)?.abs())
                .max((b.inner_v(&buv, &w)? + b.inner_v(&buw, &v)?).abs());
        }
    }
    results.push(result(
        "trilinear_antisymmetry",
        worst,
        1e-12,
        if model.tensor.is_some() {
            "max |<B(u,v),v>|, |<B(u,v),w> + <B(u,w),v>| over 200 triples".into()
        } else {
            "no bilinear term".into()
        },
    ));

    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let f = b.white_random(&mut rng);
        let g = b.white_random(&mut rng);
        let v = apply_inv_stokes(&f, b)?;
        let rhs = b.inner_l2(&f, &g)?;
        worst = worst.max((b.inner_v(&v, &g)? - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE));
    }
    results.push(result("resolvent_duality", worst, 1e-12, "relative error over 100 pairs".into()));

    let quiet = model.with_forcing(ForcingSpec::new(Forcing::None, Noise::None { m: 1 }))?;
    let quiet = quiet.with_u0(b.smooth_random(&mut rng, 1.0))?;
    let dt = quiet.horizon / 1000.0;
    let tr = solve_skeleton(&quiet, &ControlPath::zeros(1, 1, quiet.horizon), dt)?;
    let e0 = b.norm_v(&quiet.u0)?.powi(2);
    let e1 = b.norm_v(tr.endpoint())?.powi(2);
    let resid = (e1 + 2.0 * quiet.nu * tr.dissipation - e0).abs() / e0;
    results.push(result(
        "energy_identity",
        resid,
        1e-6,
        format!("RK4 with dt = {dt:e}, F = G = 0"),
    ));

    let alpha = b.alpha();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let u = b.white_random(&mut rng);
        let v2 = b.norm_v(&u)?.powi(2);
        let g2 = b.inner_grad(&u, &u)?;
        let low = (v2 / (1.0 + alpha) - g2) / v2;
        let high = (g2 - v2 / alpha) / v2;
        worst = worst.max(low).max(high);
    }
    results.push(result(
        "norm_sandwich",
        worst.max(0.0),
        1e-12,
        "largest relative violation of |u|_V^2/(1+a) <= ||u||^2 <= |u|_V^2/a".into(),
    ));

    let m = model.m();
    let cells = 8;
    let dt = model.horizon / 64.0;
    let flat: Vec<f64> = (0..cells * m).map(|_| crate::basis::normal::standard_normal(&mut rng)).collect();
    let h = ControlPath::from_flat(model.horizon, m, &flat, None);
    let obj = EndpointObjective {
        target: b.smooth_random(&mut rng, 0.5),
        mu: 10.0,
    };
    let g = adjoint_gradient(&h, &obj, model, dt)?;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let d = SpectralField::from_vec(
            (0..flat.len())
                .map(|_| crate::basis::normal::standard_normal(&mut rng))
                .collect(),
        );
        let nd = d.dot(&d).sqrt();
        let tau = 1e-5;
        let at = |s: f64| -> Result<f64> {
            let x: Vec<f64> = flat.iter().zip(&d.coeffs).map(|(a, e)| a + s * e / nd).collect();
            Ok(adjoint_gradient(&ControlPath::from_flat(model.horizon, m, &x, None), &obj, model, dt)?.value)
        };
        let fd = (at(tau)? - at(-tau)?) / (2.0 * tau);
        let ad: f64 = g.gradient.iter().zip(&d.coeffs).map(|(a, e)| a * e / nd).sum();
        worst = worst.max((fd - ad).abs() / ad.abs().max(1e-8));
    }
    results.push(result(
        "adjoint_gradient",
        worst,
        1e-5,
        "relative error against central differences in 5 directions".into(),
    ));

    let noise0 = model.noise_columns(&vec![0.0; model.n()]);
    let mut g0: f64 = 0.0;
    for c in &noise0 {
        g0 = g0.max(b.norm_v(c)?);
    }
    results.push(result(
        "noise_vanishes_at_zero",
        g0,
        0.0,
        "max |G_j(0)|_V; additive noise violates this hypothesis".into(),
    ));

    let all_passed = results.iter().all(|r| r.passed);
    Ok(InvariantReport { results, all_passed })
}
