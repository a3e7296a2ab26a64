#![allow(dead_code)]

use std::io::Write;
use std::sync::Arc;

use sgfluid::basis::build_torus_basis;
use sgfluid::{Field, Forcing, ForcingSpec, Model, Noise, Tensor};

/// Linear model on the first shell (`|k| = 1`, four modes) with `α = 1` and
/// `ν = 2`, so every mode decays at rate `a = ν|k|²/(1+α|k|²) = 1`. Column `j`
/// of the additive noise is `2 σ_j e_j`, whose resolvent image is `σ_j e_j`.
pub fn linear_first_shell(sigmas: &[f64]) -> Model {
    let b = Arc::new(build_torus_basis::<f64>(1, 1.0).unwrap());
    let cols = sigmas
        .iter()
        .enumerate()
        .map(|(j, s)| {
            let mut c = Field::zeros(b.len());
            c.coeffs[j] = 2.0 * s;
            c
        })
        .collect();
    let forcing = ForcingSpec::new(Forcing::None, Noise::Additive { columns: cols });
    Model::new(2.0, b.clone(), None, forcing, Field::zeros(b.len()), 1.0).unwrap()
}

/// Scalar Ornstein–Uhlenbeck oracle: `I(x) = a x² / (σ²(1 − e^{−2aT}))`.
pub fn ou_rate(a: f64, sigma: f64, t: f64, x: f64) -> f64 {
    a * x * x / (sigma * sigma * (1.0 - (-2.0 * a * t).exp()))
}

/// Nonlinear model with the full trilinear term and multiplicative noise.
pub fn nonlinear(cutoff: u32, nu: f64, sigma: &[f64], u0_amp: f64, seed: u64) -> Model {
    use rand::SeedableRng;
    let b = Arc::new(build_torus_basis::<f64>(cutoff, 1.0).unwrap());
    let t = Arc::new(Tensor::assemble(&b));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let u0 = b.smooth_random(&mut rng, u0_amp);
    let forcing = ForcingSpec::new(
        Forcing::Linear { kappa: 0.1 },
        Noise::Diagonal { sigma: sigma.to_vec(), profiles: vec![] },
    );
    Model::new(nu, b, Some(t), forcing, u0, 1.0).unwrap()
}

/// Writes a line straight to the terminal, bypassing test output capture.
pub fn say(line: &str) {
    let mut e = std::io::stderr().lock();
    let _ = writeln!(e, "{line}");
}
