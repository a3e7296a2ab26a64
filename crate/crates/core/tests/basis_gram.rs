//! Gram matrices of the basis assembled by quadrature, and the generalized
//! eigenvalue problems they define.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use sgfluid::basis::build_torus_basis;
use sgfluid::{Basis, Channel, ModeKey};

const C: f64 = 0.225_079_079_039_276_5;

fn sample(key: &ModeKey, x: (f64, f64)) -> ([f64; 2], [[f64; 2]; 2]) {
    let (k1, k2) = (key.k[0] as f64, key.k[1] as f64);
    let norm = (key.k_sq() as f64).sqrt();
    let th = k1 * x.0 + k2 * x.1;
    let (s, ds) = match key.channel {
        Channel::Cos => (th.cos(), -th.sin()),
        Channel::Sin => (th.sin(), th.cos()),
    };
    let dir = [-C * k2 / norm, C * k1 / norm];
    let v = [dir[0] * s, dir[1] * s];
    let grad = [[dir[0] * k1 * ds, dir[0] * k2 * ds], [dir[1] * k1 * ds, dir[1] * k2 * ds]];
    (v, grad)
}

fn grams(b: &Basis, n: usize) -> (DMatrix<f64>, DMatrix<f64>, f64) {
    let m = b.len();
    let h = 2.0 * PI / n as f64;
    let mut mass = DMatrix::zeros(m, m);
    let mut stiff = DMatrix::zeros(m, m);
    let mut div: f64 = 0.0;
    for p in 0..n * n {
        let x = ((p / n) as f64 * h, (p % n) as f64 * h);
        let s: Vec<_> = b.modes().iter().map(|md| sample(&md.key, x)).collect();
        for (i, (vi, gi)) in s.iter().enumerate() {
            div = div.max((gi[0][0] + gi[1][1]).abs());
            for (j, (vj, gj)) in s.iter().enumerate() {
                mass[(i, j)] += (vi[0] * vj[0] + vi[1] * vj[1]) * h * h;
                stiff[(i, j)] += (0..2).flat_map(|r| (0..2).map(move |c| (r, c))).map(|(r, c)| gi[r][c] * gj[r][c]).sum::<f64>() * h * h;
            }
        }
    }
    (mass, stiff, div)
}

fn generalized(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Vec<f64> {
    let l = m.clone().cholesky().unwrap().l();
    let li = l.clone().try_inverse().unwrap();
    let s = &li * a * li.transpose();
    let mut ev: Vec<f64> = SymmetricEigen::new((&s + s.transpose()) * 0.5).eigenvalues.iter().cloned().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[test]
fn mass_matrix_is_identity_and_fields_are_solenoidal() {
    let b = build_torus_basis::<f64>(3, 1.0).unwrap();
    let (mass, _, div) = grams(&b, 16);
    assert!((mass - DMatrix::identity(b.len(), b.len())).abs().max() < 1e-13);
    assert!(div < 1e-13);
}

#[test]
fn eigenvalues_match_mode_weights() {
    let alpha = 0.45;
    let b = build_torus_basis::<f64>(3, alpha).unwrap();
    let (mass, stiff, _) = grams(&b, 16);
    let mut grad: Vec<f64> = b.modes().iter().map(|m| m.w_grad / m.w_l2).collect();
    let mut v: Vec<f64> = b.modes().iter().map(|m| m.w_v / m.w_l2).collect();
    grad.sort_by(f64::total_cmp);
    v.sort_by(f64::total_cmp);
    let eg = generalized(&stiff, &mass);
    let ev = generalized(&(&mass + &stiff * alpha), &mass);
    for (a, b) in eg.iter().zip(&grad) {
        assert!((a - b).abs() < 1e-11, "{a} vs {b}");
    }
    for (a, b) in ev.iter().zip(&v) {
        assert!((a - b).abs() < 1e-11, "{a} vs {b}");
    }
    // Eigenvalues of the V-Stokes operator A relative to the V product.
    let mut lam: Vec<f64> = b.modes().iter().map(|m| m.w_grad / m.w_v).collect();
    lam.sort_by(f64::total_cmp);
    let ea = generalized(&stiff, &(&mass + &stiff * alpha));
    for (a, b) in ea.iter().zip(&lam) {
        assert!((a - b).abs() < 1e-11, "{a} vs {b}");
    }
}
