//! Divergence-free real Fourier basis on the periodic torus `[0, 2π]²`.
//!
//! Every mode is a stream-function field
//!
//! ```text
//! e_(k,cos)(x) = c · k⊥/|k| · cos(k·x),   e_(k,sin)(x) = c · k⊥/|k| · sin(k·x)
//! k⊥ = (-k₂, k₁),  c = 1/(π√2)
//! ```
//!
//! with `k` restricted to the half-plane `k₁ > 0 ∨ (k₁ = 0 ∧ k₂ > 0)`, so that
//! each mode is divergence free and has unit L² norm. Modes are mutually
//! orthogonal in L², H¹₀, V and W, which makes every operator of the model
//! diagonal except the curl-cross nonlinearity. Coefficient vectors are
//! expressed in this L²-orthonormal basis; all norms go through the per-mode
//! weights stored on [`Mode`], so a basis with a different normalization only
//! needs different weights.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use normal::standard_normal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Cos,
    Sin,
}

impl Channel {
    pub fn other(self) -> Self {
        match self {
            Channel::Cos => Channel::Sin,
            Channel::Sin => Channel::Cos,
        }
    }
}

/// Wavevector plus real channel; `(0, 0)` is excluded (zero-mean fields).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeKey {
    pub k: [i32; 2],
    pub channel: Channel,
}

impl ModeKey {
    pub fn new(k1: i32, k2: i32, channel: Channel) -> Self {
        ModeKey {
            k: [k1, k2],
            channel,
        }
    }

    pub fn k_sq(&self) -> i64 {
        let [a, b] = self.k;
        (a as i64) * (a as i64) + (b as i64) * (b as i64)
    }

    /// Representative of `±k` in the half-plane used by the basis.
    pub fn canonical_k(k: [i32; 2]) -> [i32; 2] {
        if k[0] > 0 || (k[0] == 0 && k[1] > 0) {
            k
        } else {
            [-k[0], -k[1]]
        }
    }
}

impl fmt::Display for ModeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ch = match self.channel {
            Channel::Cos => "cos",
            Channel::Sin => "sin",
        };
        write!(f, "({},{}){}", self.k[0], self.k[1], ch)
    }
}

/// One basis element with its norm weights.
///
/// For a coefficient vector `a`, `|u|² = Σ w_l2 a²`, `‖u‖² = Σ w_grad a²`,
/// `‖u‖_V² = Σ w_v a²` and `|curl(u − αΔu)|² = Σ w_curlx a²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Mode<T: Real> {
    pub key: ModeKey,
    pub w_l2: T,
    pub w_grad: T,
    pub w_v: T,
    pub w_curlx: T,
    pub lambda: T,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
struct BasisDoc<T: Real> {
    alpha: T,
    cutoff: u32,
    modes: Vec<Mode<T>>,
}

/// Mode catalogue of the truncated space `W_M = span(e_1, …, e_M)`.
///
/// Immutable after construction; share it behind an `Arc` across threads.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "", from = "BasisDoc<T>", into = "BasisDoc<T>")]
pub struct BasisSpec<T: Real> {
    alpha: T,
    cutoff: u32,
    modes: Vec<Mode<T>>,
    index: HashMap<ModeKey, usize>,
    partner: Vec<usize>,
}

impl<T: Real> From<BasisDoc<T>> for BasisSpec<T> {
    fn from(doc: BasisDoc<T>) -> Self {
        BasisSpec::from_modes(doc.alpha, doc.cutoff, doc.modes)
    }
}

impl<T: Real> From<BasisSpec<T>> for BasisDoc<T> {
    fn from(b: BasisSpec<T>) -> Self {
        BasisDoc {
            alpha: b.alpha,
            cutoff: b.cutoff,
            modes: b.modes,
        }
    }
}

impl<T: Real> PartialEq for BasisSpec<T> {
    fn eq(&self, other: &Self) -> bool {
        self.alpha == other.alpha && self.cutoff == other.cutoff && self.modes == other.modes
    }
}

/// Normalization constant of a unit-L² real mode on `[0, 2π]²`.
pub fn mode_normalization() -> f64 {
    1.0 / (std::f64::consts::PI * std::f64::consts::SQRT_2)
}

/// Build the torus basis with all channels `1 ≤ |k|² ≤ cutoff²`, sorted by
/// eigenvalue and then lexicographically by `(k₁, k₂, channel)`.
pub fn build_torus_basis<T: Real>(cutoff: u32, alpha: T) -> Result<BasisSpec<T>> {
    if cutoff < 1 {
        return Err(Error::config("cutoff", "must be at least 1"));
    }
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(Error::config("alpha", "must be a positive finite number"));
    }
    let c = cutoff as i32;
    let c_sq = (cutoff as i64) * (cutoff as i64);
    let mut keys = Vec::new();
    for k1 in 0..=c {
        for k2 in -c..=c {
            if k1 == 0 && k2 <= 0 {
                continue;
            }
            let ksq = (k1 as i64) * (k1 as i64) + (k2 as i64) * (k2 as i64);
            if ksq > c_sq {
                continue;
            }
            keys.push(ModeKey::new(k1, k2, Channel::Cos));
            keys.push(ModeKey::new(k1, k2, Channel::Sin));
        }
    }
    // λ is increasing in |k|² for α > 0, so sorting by |k|² sorts by λ.
    keys.sort_by_key(|key| (key.k_sq(), key.k[0], key.k[1], key.channel));

    let modes = keys
        .into_iter()
        .map(|key| {
            let ksq = T::of(key.k_sq() as f64);
            let w_l2 = T::one();
            let w_grad = ksq;
            let w_v = T::one() + alpha * ksq;
            let w_curlx = ksq * w_v * w_v;
            let lambda = (w_v + w_curlx) / w_v;
            Mode {
                key,
                w_l2,
                w_grad,
                w_v,
                w_curlx,
                lambda,
            }
        })
        .collect();
    Ok(BasisSpec::from_modes(alpha, cutoff, modes))
}

impl<T: Real> BasisSpec<T> {
    fn from_modes(alpha: T, cutoff: u32, modes: Vec<Mode<T>>) -> Self {
        let index: HashMap<ModeKey, usize> =
            modes.iter().enumerate().map(|(i, m)| (m.key, i)).collect();
        let partner = modes
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let other = ModeKey {
                    k: m.key.k,
                    channel: m.key.channel.other(),
                };
                index.get(&other).copied().unwrap_or(i)
            })
            .collect();
        BasisSpec {
            alpha,
            cutoff,
            modes,
            index,
            partner,
        }
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[Mode<T>] {
        &self.modes
    }

    pub fn mode(&self, i: usize) -> &Mode<T> {
        &self.modes[i]
    }

    pub fn index_of(&self, key: &ModeKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Index of the mode with the same wavevector and the other channel.
    pub fn partner(&self, i: usize) -> usize {
        self.partner[i]
    }

    pub fn lambdas(&self) -> impl Iterator<Item = T> + '_ {
        self.modes.iter().map(|m| m.lambda)
    }

    pub fn check(&self, u: &SpectralField<T>) -> Result<()> {
        check_dim(self.len(), u.len())
    }

    fn weighted_inner(&self, u: &SpectralField<T>, v: &SpectralField<T>, w: impl Fn(&Mode<T>) -> T) -> Result<T> {
        self.check(u)?;
        self.check(v)?;
        Ok(self
            .modes
            .iter()
            .zip(u.coeffs.iter().zip(&v.coeffs))
            .map(|(m, (&a, &b))| w(m) * a * b)
            .sum())
    }

    /// L² inner product `(u, v)`.
    pub fn inner_l2(&self, u: &SpectralField<T>, v: &SpectralField<T>) -> Result<T> {
        self.weighted_inner(u, v, |m| m.w_l2)
    }

    /// Dirichlet form `((u, v)) = ∫ ∇u · ∇v`.
    pub fn inner_grad(&self, u: &SpectralField<T>, v: &SpectralField<T>) -> Result<T> {
        self.weighted_inner(u, v, |m| m.w_grad)
    }

    /// `(u, v)_V = (u, v) + α((u, v))`; also the duality pairing `⟨u, v⟩`.
    pub fn inner_v(&self, u: &SpectralField<T>, v: &SpectralField<T>) -> Result<T> {
        self.weighted_inner(u, v, |m| m.w_v)
    }

    /// `(u, v)_W = (u, v)_V + (curl(u − αΔu), curl(v − αΔv))`.
    pub fn inner_w(&self, u: &SpectralField<T>, v: &SpectralField<T>) -> Result<T> {
        self.weighted_inner(u, v, |m| m.w_v + m.w_curlx)
    }

    pub fn norm_v(&self, u: &SpectralField<T>) -> Result<T> {
        Ok(self.inner_v(u, u)?.sqrt())
    }

    pub fn norm_w(&self, u: &SpectralField<T>) -> Result<T> {
        Ok(self.inner_w(u, u)?.sqrt())
    }

    /// Norm of `f` in `W*` for the pairing `⟨f, w⟩ = (f, w)_V`:
    /// `sup_w (f, w)_V / ‖w‖_W = (Σ w_v f² / λ)^{1/2}` on the truncated span.
    pub fn norm_wstar(&self, f: &SpectralField<T>) -> Result<T> {
        self.check(f)?;
        Ok(self
            .modes
            .iter()
            .zip(&f.coeffs)
            .map(|(m, &a)| m.w_v * a * a / m.lambda)
            .sum::<T>()
            .sqrt())
    }

    /// Map a field onto another torus basis by wavevector; modes missing
    /// from `target` are dropped, new ones are zero.
    pub fn embed(&self, u: &SpectralField<T>, target: &BasisSpec<T>) -> Result<SpectralField<T>> {
        self.check(u)?;
        let mut out = SpectralField::zeros(target.len());
        for (m, &a) in self.modes.iter().zip(&u.coeffs) {
            if let Some(j) = target.index_of(&m.key) {
                out.coeffs[j] = a;
            }
        }
        Ok(out)
    }

    /// Random field with coefficients `N(0,1)/λ_i`, rescaled to `‖u‖_V = amplitude`.
    pub fn smooth_random<R: Rng + ?Sized>(&self, rng: &mut R, amplitude: T) -> SpectralField<T> {
        let mut u = SpectralField::from_vec(
            self.modes
                .iter()
                .map(|m| T::of(standard_normal(rng)) / m.lambda)
                .collect(),
        );
        let n = self.norm_v(&u).expect("dimension matches");
        if n > T::zero() {
            u.scale(amplitude / n);
        }
        u
    }

    /// Random field with i.i.d. `N(0,1)` coefficients.
    pub fn white_random<R: Rng + ?Sized>(&self, rng: &mut R) -> SpectralField<T> {
        SpectralField::from_vec((0..self.len()).map(|_| T::of(standard_normal(rng))).collect())
    }
}

/// The values `(|u|, ‖u‖, ‖u‖_V, ‖u‖_*, ‖u‖_W)` with `‖u‖_* = |curl(u − αΔu)|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Norms<T: Real> {
    pub l2: T,
    pub grad: T,
    pub v: T,
    pub curlx: T,
    pub w: T,
}

pub fn norms<T: Real>(u: &SpectralField<T>, basis: &BasisSpec<T>) -> Result<Norms<T>> {
    basis.check(u)?;
    let (mut l2, mut grad, mut v, mut curlx) = (T::zero(), T::zero(), T::zero(), T::zero());
    for (m, &a) in basis.modes.iter().zip(&u.coeffs) {
        let a2 = a * a;
        l2 += m.w_l2 * a2;
        grad += m.w_grad * a2;
        v += m.w_v * a2;
        curlx += m.w_curlx * a2;
    }
    Ok(Norms {
        l2: l2.sqrt(),
        grad: grad.sqrt(),
        v: v.sqrt(),
        curlx: curlx.sqrt(),
        w: (v + curlx).sqrt(),
    })
}

/// Solve the generalized Stokes problem `v − αΔv + ∇q = f`, `div v = 0`.
///
/// Mode-wise `v_i = f_i · w_l2_i / w_v_i`, so `(v, g)_V = (f, g)` for every `g`.
pub fn apply_inv_stokes<T: Real>(f: &SpectralField<T>, basis: &BasisSpec<T>) -> Result<SpectralField<T>> {
    basis.check(f)?;
    Ok(SpectralField::from_vec(
        basis
            .modes
            .iter()
            .zip(&f.coeffs)
            .map(|(m, &a)| a * m.w_l2 / m.w_v)
            .collect(),
    ))
}

/// Scalar field on the torus in the real basis `c·cos(k·x)`, `c·sin(k·x)`;
/// entry `i` multiplies the scalar mode with the same key as basis mode `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ScalarField<T: Real> {
    pub coeffs: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn l2_norm(&self) -> T {
        self.coeffs.iter().map(|&a| a * a).sum::<T>().sqrt()
    }
}

/// Coefficients of the scalar vorticity-like field `curl(u − αΔu)`.
///
/// `curl e_(k,cos) = −|k| c sin(k·x)` and `curl e_(k,sin) = |k| c cos(k·x)`, and
/// `(1 − αΔ)` multiplies by `1 + α|k|²`, so the magnitude per mode is `√w_curlx`.
pub fn curl_excess<T: Real>(u: &SpectralField<T>, basis: &BasisSpec<T>) -> Result<ScalarField<T>> {
    basis.check(u)?;
    let mut out = vec![T::zero(); basis.len()];
    for (i, (m, &a)) in basis.modes.iter().zip(&u.coeffs).enumerate() {
        let mag = m.w_curlx.sqrt();
        let j = basis.partner(i);
        match m.key.channel {
            Channel::Cos => out[j] -= mag * a,
            Channel::Sin => out[j] += mag * a,
        }
    }
    Ok(ScalarField { coeffs: out })
}

/// Coefficient vector of a divergence-free field in a [`BasisSpec`].
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SpectralField<T: Real> {
    pub coeffs: Vec<T>,
}

impl<T: Real> SpectralField<T> {
    pub fn zeros(n: usize) -> Self {
        SpectralField {
            coeffs: vec![T::zero(); n],
        }
    }

    pub fn from_vec(coeffs: Vec<T>) -> Self {
        SpectralField { coeffs }
    }

    /// Unit coefficient on mode `i`.
    pub fn unit(n: usize, i: usize) -> Self {
        let mut u = Self::zeros(n);
        u.coeffs[i] = T::one();
        u
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|a| a.is_finite())
    }

    pub fn scale(&mut self, s: T) {
        self.coeffs.iter_mut().for_each(|a| *a *= s);
    }

    pub fn scaled(&self, s: T) -> Self {
        SpectralField::from_vec(self.coeffs.iter().map(|&a| a * s).collect())
    }

    /// `self += s · x`.
    pub fn axpy(&mut self, s: T, x: &SpectralField<T>) {
        debug_assert_eq!(self.len(), x.len());
        self.coeffs
            .iter_mut()
            .zip(&x.coeffs)
            .for_each(|(a, &b)| *a += s * b);
    }

    pub fn sub(&self, other: &SpectralField<T>) -> Self {
        SpectralField::from_vec(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| a - b)
                .collect(),
        )
    }

    pub fn add(&self, other: &SpectralField<T>) -> Self {
        SpectralField::from_vec(
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| a + b)
                .collect(),
        )
    }

    /// Euclidean coefficient dot product.
    pub fn dot(&self, other: &SpectralField<T>) -> T {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    pub fn cast<U: Real>(&self) -> SpectralField<U> {
        SpectralField::from_vec(self.coeffs.iter().map(|a| U::of(a.f64())).collect())
    }
}

/// Box–Muller normal draw from two uniforms; used wherever a fixed number
/// of generator words per sample matters.
pub(crate) mod normal {
    use rand::Rng;

    pub fn uniform_open(x: u64) -> f64 {
        ((x >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn box_muller(a: u64, b: u64) -> (f64, f64) {
        let u1 = uniform_open(a);
        let u2 = uniform_open(b);
        let r = (-2.0 * u1.ln()).sqrt();
        let th = std::f64::consts::TAU * u2;
        (r * th.cos(), r * th.sin())
    }

    pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
        box_muller(rng.next_u64(), rng.next_u64()).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigenvalue_of_first_shell() {
        let b = build_torus_basis::<f64>(1, 1.0).unwrap();
        assert_eq!(b.len(), 4);
        for m in b.modes() {
            assert_eq!(m.key.k_sq(), 1);
            assert!((m.lambda - 3.0).abs() < 1e-15);
        }
        let keys: Vec<_> = b.modes().iter().map(|m| m.key).collect();
        assert_eq!(
            keys,
            vec![
                ModeKey::new(0, 1, Channel::Cos),
                ModeKey::new(0, 1, Channel::Sin),
                ModeKey::new(1, 0, Channel::Cos),
                ModeKey::new(1, 0, Channel::Sin),
            ]
        );
    }

    #[test]
    fn small_alpha_limit() {
        let b = build_torus_basis::<f64>(3, 1e-12).unwrap();
        for m in b.modes() {
            let ksq = m.key.k_sq() as f64;
            assert!((m.lambda - (1.0 + ksq)).abs() < 1e-9);
        }
    }

    #[test]
    fn eigenvalues_nondecreasing_and_count() {
        let b = build_torus_basis::<f64>(4, 0.5).unwrap();
        assert_eq!(b.len(), 48);
        let l: Vec<f64> = b.lambdas().collect();
        assert!(l.windows(2).all(|w| w[0] <= w[1]));
        for (i, m) in b.modes().iter().enumerate() {
            assert_eq!(b.index_of(&m.key), Some(i));
            let p = b.partner(i);
            assert_ne!(p, i);
            assert_eq!(b.mode(p).key.k, m.key.k);
        }
    }

    #[test]
    fn invalid_parameters() {
        assert!(matches!(build_torus_basis::<f64>(0, 1.0), Err(Error::Config { field, .. }) if field == "cutoff"));
        assert!(matches!(build_torus_basis::<f64>(2, 0.0), Err(Error::Config { field, .. }) if field == "alpha"));
        assert!(build_torus_basis(2, f64::NAN).is_err());
    }

    #[test]
    fn unit_mode_norms() {
        let b = build_torus_basis::<f64>(2, 1.0).unwrap();
        let i = b.index_of(&ModeKey::new(1, 0, Channel::Cos)).unwrap();
        let u = SpectralField::unit(b.len(), i);
        let n = norms(&u, &b).unwrap();
        assert!((n.l2.powi(2) - 1.0).abs() < 1e-15);
        assert!((n.grad.powi(2) - 1.0).abs() < 1e-15);
        assert!((n.v.powi(2) - 2.0).abs() < 1e-15);
        assert!((n.curlx.powi(2) - 4.0).abs() < 1e-15);
        assert!((n.w.powi(2) - 6.0).abs() < 1e-14);
        let z = norms(&SpectralField::zeros(b.len()), &b).unwrap();
        assert_eq!(z.w, 0.0);
    }

    #[test]
    fn inverse_stokes_halves_first_shell() {
        let b = build_torus_basis::<f64>(2, 1.0).unwrap();
        let f = SpectralField::unit(b.len(), 0);
        let v = apply_inv_stokes(&f, &b).unwrap();
        assert_eq!(v.coeffs[0], 0.5);
        assert!(v.coeffs[1..].iter().all(|&a| a == 0.0));
        let z = apply_inv_stokes(&SpectralField::zeros(b.len()), &b).unwrap();
        assert!(z.coeffs.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let b = build_torus_basis::<f64>(1, 1.0).unwrap();
        let u = SpectralField::<f64>::zeros(3);
        assert!(matches!(
            norms(&u, &b),
            Err(Error::DimensionMismatch { expected: 4, found: 3 })
        ));
        assert!(apply_inv_stokes(&u, &b).is_err());
        assert!(curl_excess(&u, &b).is_err());
    }

    #[test]
    fn curl_excess_matches_norm() {
        let b = build_torus_basis::<f64>(3, 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let u = b.white_random(&mut rng);
            let w = curl_excess(&u, &b).unwrap();
            let n = norms(&u, &b).unwrap();
            assert!((w.l2_norm() - n.curlx).abs() <= 1e-12 * n.curlx);
        }
        let i = b.index_of(&ModeKey::new(1, 1, Channel::Cos)).unwrap();
        let w = curl_excess(&SpectralField::unit(b.len(), i), &b).unwrap();
        let expected = 2f64.sqrt() * (1.0 + 0.7 * 2.0);
        assert!((w.coeffs[b.partner(i)] + expected).abs() < 1e-14);
    }

    #[test]
    fn serde_roundtrip_rebuilds_index() {
        let b = build_torus_basis::<f64>(2, 0.3).unwrap();
        let s = serde_json::to_string(&b).unwrap();
        let back: BasisSpec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, b);
        assert_eq!(back.index_of(&b.mode(5).key), Some(5));
        assert_eq!(back.partner(5), b.partner(5));
    }

    #[test]
    fn embed_preserves_shared_modes() {
        let small = build_torus_basis::<f64>(1, 1.0).unwrap();
        let big = build_torus_basis::<f64>(3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = small.white_random(&mut rng);
        let up = small.embed(&u, &big).unwrap();
        let back = big.embed(&up, &small).unwrap();
        assert_eq!(back, u);
        assert!((small.norm_v(&u).unwrap() - big.norm_v(&up).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn smooth_random_has_requested_amplitude() {
        let b = build_torus_basis::<f64>(3, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = b.smooth_random(&mut rng, 0.25);
        assert!((b.norm_v(&u).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn single_precision_basis() {
        let b = build_torus_basis::<f32>(2, 1.0).unwrap();
        let u = SpectralField::<f32>::unit(b.len(), 0);
        let n = norms(&u, &b).unwrap();
        assert!((n.v * n.v - 2.0).abs() < 1e-6);
    }
}
