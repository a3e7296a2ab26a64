use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::basis::SpectralField;
use crate::error::{Error, Result};
use crate::ops::{Forcing, ModelConfig, Noise};

/// A linear time-invariant Gaussian system `du = A u dt + C dW` in mode
/// coordinates, with `V` weights for the event geometry.
#[derive(Clone, Debug)]
pub struct LinearModelSpec {
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub horizon: f64,
    pub u0: DVector<f64>,
    pub weights: DVector<f64>,
}

impl LinearModelSpec {
    /// Linear view of a model without the bilinear term, with time-independent
    /// forcing and state-independent noise.
    pub fn from_model(model: &ModelConfig<f64>) -> Result<Self> {
        if model.tensor.is_some() {
            return Err(Error::Unsupported("the Gramian reference needs a model without the bilinear term".into()));
        }
        if matches!(model.forcing.forcing, Forcing::Modulated { .. }) {
            return Err(Error::Unsupported("the Gramian reference needs time-independent forcing".into()));
        }
        if matches!(model.forcing.noise, Noise::Diagonal { .. }) {
            return Err(Error::Unsupported("the Gramian reference needs additive noise".into()));
        }
        let n = model.n();
        let a = DMatrix::from_diagonal(&DVector::from_vec(model.linear_diagonal(0.0)));
        let cols = model.noise_columns(&vec![0.0; n]);
        let mut c = DMatrix::zeros(n, cols.len());
        for (j, col) in cols.iter().enumerate() {
            c.set_column(j, &DVector::from_column_slice(&col.coeffs));
        }
        Ok(LinearModelSpec {
            a,
            c,
            horizon: model.horizon,
            u0: DVector::from_column_slice(&model.u0.coeffs),
            weights: DVector::from_iterator(n, model.basis.modes().iter().map(|m| m.w_v)),
        })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn transition(&self, t: f64) -> DMatrix<f64> {
        (&self.a * t).exp()
    }

    /// `∫₀ᵀ e^{As} C Cᵀ e^{Aᵀs} ds` by composite Simpson on `intervals`
    /// (rounded up to even) subintervals.
    pub fn gramian_with(&self, intervals: usize) -> DMatrix<f64> {
        let n = intervals.max(2).div_ceil(2) * 2;
        let h = self.horizon / n as f64;
        let step = self.transition(h);
        let cc = &self.c * self.c.transpose();
        let mut e = DMatrix::identity(self.n(), self.n());
        let mut g = DMatrix::zeros(self.n(), self.n());
        for k in 0..=n {
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            g += (&e * &cc * e.transpose()) * w;
            e = &step * e;
        }
        g * (h / 3.0)
    }

    pub fn gramian(&self) -> DMatrix<f64> {
        self.gramian_with(4000)
    }

    /// Free endpoint `e^{AT} u0`.
    pub fn drift_endpoint(&self) -> DVector<f64> {
        self.transition(self.horizon) * &self.u0
    }

    fn reachable(&self) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.gramian());
        let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let keep: Vec<usize> = (0..self.n()).filter(|&i| eig.eigenvalues[i] > 1e-12 * top.max(1e-300)).collect();
        let u = DMatrix::from_fn(self.n(), keep.len(), |r, c| eig.eigenvectors[(r, keep[c])]);
        let lam = DVector::from_iterator(keep.len(), keep.iter().map(|&i| eig.eigenvalues[i]));
        (u, lam, eig.eigenvectors)
    }
}

/// Minimum control energy `½ rᵀ Q_T⁺ r` with `r = x − e^{AT}u0`, or `+∞`
/// when `r` leaves the range of the Gramian.
pub fn gramian_rate_linear(spec: &LinearModelSpec, x: &SpectralField<f64>) -> Result<f64> {
    if x.len() != spec.n() {
        return Err(Error::DimensionMismatch {
            expected: spec.n(),
            found: x.len(),
        });
    }
    let r = DVector::from_column_slice(&x.coeffs) - spec.drift_endpoint();
    let rn = r.norm();
    if rn == 0.0 {
        return Ok(0.0);
    }
    let (u, lam, _) = spec.reachable();
    let z = u.transpose() * &r;
    let outside = (rn * rn - z.norm_squared()).max(0.0).sqrt();
    if outside > 1e-8 * rn {
        return Ok(f64::INFINITY);
    }
    Ok(0.5 * z.iter().zip(lam.iter()).map(|(zi, li)| zi * zi / li).sum::<f64>())
}

/// `inf { I(y) : ‖y − x‖_V ≤ δ }` for the linear Gaussian rate.
///
/// Points of the reachable affine set are written `d + U z`; the constrained
/// quadratic program is solved through its Lagrange multiplier by bisection.
pub fn gramian_rate_ball(spec: &LinearModelSpec, x: &SpectralField<f64>, delta: f64) -> Result<f64> {
    if x.len() != spec.n() {
        return Err(Error::DimensionMismatch {
            expected: spec.n(),
            found: x.len(),
        });
    }
    if !(delta >= 0.0) {
        return Err(Error::config("delta", "must be non-negative"));
    }
    let w = DMatrix::from_diagonal(&spec.weights);
    let b = DVector::from_column_slice(&x.coeffs) - spec.drift_endpoint();
    let dist = |v: &DVector<f64>| (v.transpose() * &w * v)[(0, 0)].max(0.0).sqrt();
    if dist(&b) <= delta {
        return Ok(0.0);
    }
    let (u, lam, _) = spec.reachable();
    if lam.is_empty() {
        return Ok(f64::INFINITY);
    }
    let uwu = u.transpose() * &w * &u;
    let uwb = u.transpose() * &w * &b;
    let inv_lam = DMatrix::from_diagonal(&lam.map(|l| 1.0 / l));
    let solve = |mu: f64| -> Option<DVector<f64>> {
        let m = &inv_lam + &uwu * mu;
        m.cholesky().map(|c| c.solve(&(&uwb * mu)))
    };
    let gap = |z: &DVector<f64>| dist(&(&u * z - &b));
    let energy = |z: &DVector<f64>| 0.5 * z.iter().zip(lam.iter()).map(|(zi, li)| zi * zi / li).sum::<f64>();

    let best = uwu
        .clone()
        .pseudo_inverse(1e-14)
        .map_err(|e| Error::Unsupported(e.to_string()))?
        * &uwb;
    if gap(&best) > delta * (1.0 + 1e-9) {
        return Ok(f64::INFINITY);
    }
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match solve(10f64.powf(mid)) {
            Some(z) if gap(&z) > delta => lo = mid,
            _ => hi = mid,
        }
    }
    let z = solve(10f64.powf(hi)).unwrap_or(best);
    Ok(energy(&z))
}
