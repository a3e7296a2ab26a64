//! Galerkin-projected operators of the second-grade fluid.
//!
//! On the truncated span the abstract equation reads
//!
//! ```text
//! du + νÂu dt + B̂(u,u) dt = F̂(u,t) dt + √ε Ĝ(u,t) dW + Ĝ(u,t) ḣ dt
//! ```
//!
//! with `Â = (I+αA)⁻¹A`, `B̂(u,v) = (I+αA)⁻¹(curl(u − αΔu) × v)` and the
//! resolvent applied to the forcing and noise fields. Everything is diagonal in
//! the torus basis except `B̂`, which is stored as the sparse trilinear form
//! `T[i][j][l] = (curl(e_j − αΔe_j) × e_l, e_i)`.
//!
//! # Tensor cache layout
//!
//! [`TrilinearTensor::load_or_assemble`] stores a JSON document
//! `trilinear_c{cutoff}_a{alpha bits, hex}.json`:
//!
//! ```text
//! { "format": "sgfluid-trilinear", "version": 1, "alpha": f64, "cutoff": u32,
//!   "n_modes": usize, "entries": [[i, j, l, value], ...] }
//! ```
//!
//! Indices refer to the mode order of the basis built from `(cutoff, alpha)`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{mode_normalization, BasisSpec, Channel, ModeKey, SpectralField};
use crate::error::{check_dim, Error, Result};
use crate::real::Real;

const PAR_THRESHOLD: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TensorEntry<T> {
    pub j: u32,
    pub l: u32,
    pub value: T,
}

/// Sparse `T[i][j][l]`, stored row-wise by the output index `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrilinearTensor<T: Real> {
    alpha: T,
    cutoff: u32,
    rows: Vec<Vec<TensorEntry<T>>>,
}

/// Expansion of a real trig factor as `a·e^{iθ} + b·e^{−iθ}`.
fn exp_pair(f: Trig) -> [Complex64; 2] {
    let h = 0.5;
    match f {
        Trig::Cos => [Complex64::new(h, 0.0), Complex64::new(h, 0.0)],
        Trig::Sin => [Complex64::new(0.0, -h), Complex64::new(0.0, h)],
        Trig::NegSin => [Complex64::new(0.0, h), Complex64::new(0.0, -h)],
    }
}

#[derive(Clone, Copy, Debug)]
enum Trig {
    Cos,
    Sin,
    NegSin,
}

/// `(1/4π²) ∫ f₁(k₁·x) f₂(k₂·x) f₃(k₃·x) dx` over the torus.
fn triple_mean(f: [Trig; 3], k: [[i32; 2]; 3]) -> f64 {
    let pairs = f.map(exp_pair);
    let mut acc = Complex64::new(0.0, 0.0);
    for s in 0..8u32 {
        let sign = |b: u32| if s & (1 << b) == 0 { 1 } else { -1 };
        let (s1, s2, s3) = (sign(0), sign(1), sign(2));
        let closes = (0..2).all(|d| s1 * k[0][d] + s2 * k[1][d] + s3 * k[2][d] == 0);
        if closes {
            let pick = |p: &[Complex64; 2], sg: i32| if sg > 0 { p[0] } else { p[1] };
            acc += pick(&pairs[0], s1) * pick(&pairs[1], s2) * pick(&pairs[2], s3);
        }
    }
    acc.re
}

fn trig_of(channel: Channel) -> Trig {
    match channel {
        Channel::Cos => Trig::Cos,
        Channel::Sin => Trig::Sin,
    }
}

/// Scalar factor of `curl e` relative to `|k|·c`: cos → −sin, sin → cos.
fn curl_trig(channel: Channel) -> Trig {
    match channel {
        Channel::Cos => Trig::NegSin,
        Channel::Sin => Trig::Cos,
    }
}

/// Analytic `(curl(e_j − αΔe_j) × e_l, e_i)` for torus modes.
///
/// Uses `curl q × v = (−q v₂, q v₁)`, so the integrand is `q_j (e_l × e_i)`
/// with the 2D cross product, and `k_l⊥ × k_i⊥ = k_l × k_i`.
fn entry_value<T: Real>(basis: &BasisSpec<T>, i: usize, j: usize, l: usize) -> f64 {
    let (mi, mj, ml) = (basis.mode(i), basis.mode(j), basis.mode(l));
    let (ki, kj, kl) = (mi.key.k, mj.key.k, ml.key.k);
    let cross = (kl[0] as i64 * ki[1] as i64 - kl[1] as i64 * ki[0] as i64) as f64;
    if cross == 0.0 {
        return 0.0;
    }
    let s = triple_mean(
        [curl_trig(mj.key.channel), trig_of(ml.key.channel), trig_of(mi.key.channel)],
        [kj, kl, ki],
    );
    if s == 0.0 {
        return 0.0;
    }
    let alpha = basis.alpha().f64();
    let nj = (mj.key.k_sq() as f64).sqrt();
    let pref = (1.0 + alpha * mj.key.k_sq() as f64) * nj;
    let norms = (ml.key.k_sq() as f64).sqrt() * (mi.key.k_sq() as f64).sqrt();
    let c = mode_normalization();
    let area = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
    let amp = (mi.w_l2.f64() * mj.w_l2.f64() * ml.w_l2.f64()).sqrt();
    pref * (cross / norms) * (c * c * c * area) * s * amp
}

#[derive(Serialize, Deserialize)]
struct TensorDoc {
    format: String,
    version: u32,
    alpha: f64,
    cutoff: u32,
    n_modes: usize,
    entries: Vec<(u32, u32, u32, f64)>,
}

const TENSOR_FORMAT: &str = "sgfluid-trilinear";
const TENSOR_VERSION: u32 = 1;

impl<T: Real> TrilinearTensor<T> {
    /// Assemble all nonzero entries. For each pair `(j, l)` only the
    /// wavevectors `±(k_j ± k_l)` can close the triad, so assembly is
    /// `O(M²)` lookups.
    pub fn assemble(basis: &BasisSpec<T>) -> Self {
        let n = basis.len();
        let mut by_k: HashMap<[i32; 2], Vec<usize>> = HashMap::new();
        for (i, m) in basis.modes().iter().enumerate() {
            by_k.entry(m.key.k).or_default().push(i);
        }
        let mut rows: Vec<Vec<TensorEntry<T>>> = vec![Vec::new(); n];
        for j in 0..n {
            let kj = basis.mode(j).key.k;
            for l in 0..n {
                let kl = basis.mode(l).key.k;
                let mut cands = [
                    ModeKey::canonical_k([kj[0] + kl[0], kj[1] + kl[1]]),
                    ModeKey::canonical_k([kj[0] - kl[0], kj[1] - kl[1]]),
                ];
                if cands[0] == cands[1] {
                    cands[1] = [0, 0];
                }
                for kc in cands {
                    if kc == [0, 0] {
                        continue;
                    }
                    if let Some(idx) = by_k.get(&kc) {
                        for &i in idx {
                            let v = entry_value(basis, i, j, l);
                            if v != 0.0 {
                                rows[i].push(TensorEntry {
                                    j: j as u32,
                                    l: l as u32,
                                    value: T::of(v),
                                });
                            }
                        }
                    }
                }
            }
        }
        TrilinearTensor {
            alpha: basis.alpha(),
            cutoff: basis.cutoff(),
            rows,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The same entries in another scalar type.
    pub fn cast<U: Real>(&self) -> TrilinearTensor<U> {
        TrilinearTensor {
            alpha: U::of(self.alpha.f64()),
            cutoff: self.cutoff,
            rows: self
                .rows
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|e| TensorEntry {
                            j: e.j,
                            l: e.l,
                            value: U::of(e.value.f64()),
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn row(&self, i: usize) -> &[TensorEntry<T>] {
        &self.rows[i]
    }

    /// Entry lookup (linear scan of row `i`); zero when absent.
    pub fn get(&self, i: usize, j: usize, l: usize) -> T {
        self.rows[i]
            .iter()
            .find(|e| e.j as usize == j && e.l as usize == l)
            .map(|e| e.value)
            .unwrap_or_else(T::zero)
    }

    /// `c_i = Σ_{j,l} T[i][j][l] u_j v_l`, the L² projection of
    /// `curl(u − αΔu) × v` onto mode `i`.
    pub fn contract(&self, u: &[T], v: &[T]) -> Vec<T> {
        let row = |r: &Vec<TensorEntry<T>>| {
            r.iter()
                .map(|e| e.value * u[e.j as usize] * v[e.l as usize])
                .sum::<T>()
        };
        if self.rows.len() >= PAR_THRESHOLD {
            self.rows.par_iter().map(row).collect()
        } else {
            self.rows.iter().map(row).collect()
        }
    }

    pub fn cache_path(dir: &Path, cutoff: u32, alpha: T) -> PathBuf {
        dir.join(format!(
            "trilinear_c{}_a{:016x}.json",
            cutoff,
            alpha.f64().to_bits()
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut entries = Vec::with_capacity(self.nnz());
        for (i, r) in self.rows.iter().enumerate() {
            for e in r {
                entries.push((i as u32, e.j, e.l, e.value.f64()));
            }
        }
        let doc = TensorDoc {
            format: TENSOR_FORMAT.into(),
            version: TENSOR_VERSION,
            alpha: self.alpha.f64(),
            cutoff: self.cutoff,
            n_modes: self.rows.len(),
            entries,
        };
        fs::write(path, serde_json::to_vec(&doc)?)?;
        Ok(())
    }

    pub fn load(path: &Path, basis: &BasisSpec<T>) -> Result<Self> {
        let doc: TensorDoc = serde_json::from_slice(&fs::read(path)?)?;
        if doc.format != TENSOR_FORMAT {
            return Err(Error::Format(format!("not a trilinear cache: `{}`", doc.format)));
        }
        if doc.version != TENSOR_VERSION {
            return Err(Error::Version {
                found: doc.version,
                expected: TENSOR_VERSION,
            });
        }
        if doc.cutoff != basis.cutoff()
            || doc.alpha.to_bits() != basis.alpha().f64().to_bits()
            || doc.n_modes != basis.len()
        {
            return Err(Error::Format("cache does not match the basis".into()));
        }
        let mut rows = vec![Vec::new(); doc.n_modes];
        for (i, j, l, v) in doc.entries {
            let i = i as usize;
            if i >= doc.n_modes || j as usize >= doc.n_modes || l as usize >= doc.n_modes {
                return Err(Error::Format("entry index out of range".into()));
            }
            rows[i].push(TensorEntry { j, l, value: T::of(v) });
        }
        Ok(TrilinearTensor {
            alpha: basis.alpha(),
            cutoff: basis.cutoff(),
            rows,
        })
    }

    /// Read the cached tensor for this basis, or assemble and write it.
    pub fn load_or_assemble(basis: &BasisSpec<T>, dir: &Path) -> Result<Self> {
        let path = Self::cache_path(dir, basis.cutoff(), basis.alpha());
        if path.exists() {
            if let Ok(t) = Self::load(&path, basis) {
                return Ok(t);
            }
        }
        let t = Self::assemble(basis);
        fs::create_dir_all(dir)?;
        t.save(&path)?;
        Ok(t)
    }
}

/// Deterministic forcing `F(u, t)`; every family has `F(0, t) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", bound = "")]
pub enum Forcing<T: Real> {
    None,
    /// `F(u,t) = κ u`.
    Linear { kappa: T },
    /// `F(u,t) = κ sin(ω t) u`.
    Modulated { kappa: T, omega: T },
}

impl<T: Real> Forcing<T> {
    pub const FAMILIES: &'static [&'static str] = &["none", "linear", "modulated"];

    /// Scalar `s` with `F(u,t) = s·u`.
    pub fn gain(&self, t: T) -> T {
        match *self {
            Forcing::None => T::zero(),
            Forcing::Linear { kappa } => kappa,
            Forcing::Modulated { kappa, omega } => kappa * (omega * t).sin(),
        }
    }

    /// Lipschitz constant of `F(·,t)` in the V norm, uniform in `t`.
    pub fn lipschitz(&self) -> T {
        match *self {
            Forcing::None => T::zero(),
            Forcing::Linear { kappa } | Forcing::Modulated { kappa, .. } => kappa.abs(),
        }
    }
}

/// Noise coefficient `G(u, t)`, an `m`-tuple of fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", bound = "")]
pub enum Noise<T: Real> {
    /// `G ≡ 0` with `m` Brownian components.
    None { m: usize },
    /// Column `j` is `σ_j D_j u` with `D_j` diagonal in the mode basis;
    /// an empty `profiles` list means `D_j = I` for every column.
    Diagonal {
        sigma: Vec<T>,
        #[serde(default)]
        profiles: Vec<Vec<T>>,
    },
    /// State-independent columns `G_j(u,t) = c_j`. These violate `G(0,t) = 0`
    /// and exist for the Gaussian reference instances.
    Additive { columns: Vec<SpectralField<T>> },
}

impl<T: Real> Noise<T> {
    pub const FAMILIES: &'static [&'static str] = &["none", "diagonal", "additive"];

    pub fn dim(&self) -> usize {
        match self {
            Noise::None { m } => *m,
            Noise::Diagonal { sigma, .. } => sigma.len(),
            Noise::Additive { columns } => columns.len(),
        }
    }

    fn profile(&self, j: usize, i: usize) -> T {
        match self {
            Noise::Diagonal { profiles, .. } if !profiles.is_empty() => profiles[j][i],
            _ => T::one(),
        }
    }

    /// Lipschitz constant of `G(·,t)` into `V^{⊗m}`.
    pub fn lipschitz(&self) -> T {
        match self {
            Noise::None { .. } | Noise::Additive { .. } => T::zero(),
            Noise::Diagonal { sigma, profiles } => sigma
                .iter()
                .enumerate()
                .map(|(j, &s)| {
                    let dmax = if profiles.is_empty() {
                        T::one()
                    } else {
                        profiles[j].iter().fold(T::zero(), |a, &d| a.max(d.abs()))
                    };
                    (s * dmax).powi(2)
                })
                .sum::<T>()
                .sqrt(),
        }
    }

    /// Whether `G(0, t) = 0`.
    pub fn vanishes_at_zero(&self) -> bool {
        match self {
            Noise::Additive { columns } => columns.iter().all(|c| c.coeffs.iter().all(|a| a.is_zero())),
            _ => true,
        }
    }
}

/// The pair `(F, G)` defining the right-hand side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ForcingSpec<T: Real> {
    pub forcing: Forcing<T>,
    pub noise: Noise<T>,
}

impl<T: Real> ForcingSpec<T> {
    pub fn new(forcing: Forcing<T>, noise: Noise<T>) -> Self {
        ForcingSpec { forcing, noise }
    }

    pub fn m(&self) -> usize {
        self.noise.dim()
    }

    pub fn validate(&self, n_modes: usize) -> Result<()> {
        match &self.noise {
            Noise::Diagonal { sigma, profiles } => {
                if sigma.is_empty() {
                    return Err(Error::config("noise.sigma", "needs at least one column"));
                }
                if !profiles.is_empty() {
                    if profiles.len() != sigma.len() {
                        return Err(Error::config("noise.profiles", "one profile per sigma entry"));
                    }
                    for p in profiles {
                        check_dim(n_modes, p.len())?;
                    }
                }
                if sigma.iter().any(|s| !s.is_finite()) {
                    return Err(Error::config("noise.sigma", "entries must be finite"));
                }
            }
            Noise::Additive { columns } => {
                for c in columns {
                    check_dim(n_modes, c.len())?;
                }
            }
            Noise::None { .. } => {}
        }
        match self.forcing {
            Forcing::Linear { kappa } if !kappa.is_finite() => Err(Error::config("kappa", "must be finite")),
            Forcing::Modulated { kappa, omega } if !(kappa.is_finite() && omega.is_finite()) => {
                Err(Error::config("kappa", "kappa and omega must be finite"))
            }
            _ => Ok(()),
        }
    }
}

/// Physical model on a truncated basis.
///
/// `tensor = None` switches the nonlinearity off (linear reference models).
#[derive(Clone, Debug)]
pub struct ModelConfig<T: Real> {
    pub nu: T,
    pub basis: Arc<BasisSpec<T>>,
    pub tensor: Option<Arc<TrilinearTensor<T>>>,
    pub forcing: ForcingSpec<T>,
    pub u0: SpectralField<T>,
    pub horizon: T,
    /// Abort threshold for `‖u‖_V` (default `1e6`).
    pub ceiling: T,
    resolvent: Vec<T>,
    stokes: Vec<T>,
    inv_wv: Vec<T>,
}

impl<T: Real> ModelConfig<T> {
    pub fn new(
        nu: T,
        basis: Arc<BasisSpec<T>>,
        tensor: Option<Arc<TrilinearTensor<T>>>,
        forcing: ForcingSpec<T>,
        u0: SpectralField<T>,
        horizon: T,
    ) -> Result<Self> {
        if !(nu > T::zero()) || !nu.is_finite() {
            return Err(Error::config("nu", "must be a positive finite number"));
        }
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::config("T", "horizon must be positive and finite"));
        }
        basis.check(&u0)?;
        if !u0.is_finite() {
            return Err(Error::config("u0", "coefficients must be finite"));
        }
        if let Some(t) = &tensor {
            check_dim(basis.len(), t.len())?;
        }
        forcing.validate(basis.len())?;
        let resolvent = basis.modes().iter().map(|m| m.w_l2 / m.w_v).collect();
        let stokes = basis.modes().iter().map(|m| m.w_grad / m.w_v).collect();
        let inv_wv = basis.modes().iter().map(|m| T::one() / m.w_v).collect();
        Ok(ModelConfig {
            nu,
            basis,
            tensor,
            forcing,
            u0,
            horizon,
            ceiling: T::of(1e6),
            resolvent,
            stokes,
            inv_wv,
        })
    }

    pub fn alpha(&self) -> T {
        self.basis.alpha()
    }

    pub fn n(&self) -> usize {
        self.basis.len()
    }

    pub fn m(&self) -> usize {
        self.forcing.m()
    }

    pub fn with_u0(&self, u0: SpectralField<T>) -> Result<Self> {
        let mut c = self.clone();
        self.basis.check(&u0)?;
        c.u0 = u0;
        Ok(c)
    }

    pub fn with_forcing(&self, forcing: ForcingSpec<T>) -> Result<Self> {
        forcing.validate(self.n())?;
        let mut c = self.clone();
        c.forcing = forcing;
        Ok(c)
    }

    pub fn without_tensor(&self) -> Self {
        let mut c = self.clone();
        c.tensor = None;
        c
    }

    /// `B̂(u, v)` coefficients written into `out`.
    fn bhat_into(&self, u: &[T], v: &[T], out: &mut [T]) {
        match &self.tensor {
            Some(t) => {
                let c = t.contract(u, v);
                for ((o, ci), s) in out.iter_mut().zip(c).zip(&self.inv_wv) {
                    *o = ci * *s;
                }
            }
            None => out.iter_mut().for_each(|o| *o = T::zero()),
        }
    }

    /// Column `j` of `Ĝ(u, t)` at mode `i`.
    #[inline]
    fn ghat_entry(&self, j: usize, i: usize, u: &[T]) -> T {
        match &self.forcing.noise {
            Noise::None { .. } => T::zero(),
            Noise::Diagonal { sigma, .. } => {
                sigma[j] * self.forcing.noise.profile(j, i) * u[i] * self.resolvent[i]
            }
            Noise::Additive { columns } => columns[j].coeffs[i] * self.resolvent[i],
        }
    }

    /// `out = −νÂu − B̂(u,u) + F̂(u,t) + Ĝ(u,t)·ḣ`.
    pub(crate) fn drift_into(&self, u: &[T], t: T, hdot: &[T], out: &mut [T]) {
        self.bhat_into(u, u, out);
        let gain = self.forcing.forcing.gain(t);
        let m = self.m();
        for i in 0..u.len() {
            let mut g = T::zero();
            for (j, &h) in hdot.iter().enumerate().take(m) {
                g += self.ghat_entry(j, i, u) * h;
            }
            out[i] = -self.nu * self.stokes[i] * u[i] - out[i] + gain * self.resolvent[i] * u[i] + g;
        }
    }

    /// `Σ_j Ĝ_j(u,t) dW_j` added into `out` with weight `scale`.
    pub(crate) fn add_noise(&self, u: &[T], dw: &[T], scale: T, out: &mut [T]) {
        if let Noise::None { .. } = self.forcing.noise {
            return;
        }
        for i in 0..u.len() {
            let mut g = T::zero();
            for (j, &w) in dw.iter().enumerate() {
                g += self.ghat_entry(j, i, u) * w;
            }
            out[i] += scale * g;
        }
    }

    /// Vector–Jacobian product of the drift: given a cotangent `cot`,
    /// returns `(J_uᵀ cot, J_ḣᵀ cot)`.
    pub fn drift_vjp(&self, u: &[T], t: T, hdot: &[T], cot: &[T]) -> (Vec<T>, Vec<T>) {
        let n = u.len();
        let m = self.m();
        let gain = self.forcing.forcing.gain(t);
        let mut gu: Vec<T> = (0..n)
            .map(|i| cot[i] * (-self.nu * self.stokes[i] + gain * self.resolvent[i]))
            .collect();
        if let Some(tensor) = &self.tensor {
            // ∂/∂u of −B̂(u,u): both slots.
            for i in 0..n {
                let w = cot[i] * self.inv_wv[i];
                if w.is_zero() {
                    continue;
                }
                for e in tensor.row(i) {
                    let (j, l) = (e.j as usize, e.l as usize);
                    gu[j] -= w * e.value * u[l];
                    gu[l] -= w * e.value * u[j];
                }
            }
        }
        let mut gh = vec![T::zero(); m];
        match &self.forcing.noise {
            Noise::None { .. } => {}
            Noise::Diagonal { sigma, .. } => {
                for j in 0..m {
                    let mut acc = T::zero();
                    for i in 0..n {
                        let d = sigma[j] * self.forcing.noise.profile(j, i) * self.resolvent[i];
                        acc += d * u[i] * cot[i];
                        gu[i] += d * hdot[j] * cot[i];
                    }
                    gh[j] = acc;
                }
            }
            Noise::Additive { columns } => {
                for j in 0..m {
                    gh[j] = (0..n)
                        .map(|i| columns[j].coeffs[i] * self.resolvent[i] * cot[i])
                        .sum();
                }
            }
        }
        (gu, gh)
    }

    /// Per-mode diagonal of `−νÂ + F̂'` when the forcing is time independent.
    pub fn linear_diagonal(&self, t: T) -> Vec<T> {
        let gain = self.forcing.forcing.gain(t);
        (0..self.n())
            .map(|i| -self.nu * self.stokes[i] + gain * self.resolvent[i])
            .collect()
    }

    /// Resolved noise columns `Ĝ_j` at state `u`.
    pub fn noise_columns(&self, u: &[T]) -> Vec<SpectralField<T>> {
        (0..self.m())
            .map(|j| SpectralField::from_vec((0..u.len()).map(|i| self.ghat_entry(j, i, u)).collect()))
            .collect()
    }
}

pub fn ahat<T: Real>(u: &SpectralField<T>, basis: &BasisSpec<T>) -> Result<SpectralField<T>> {
    basis.check(u)?;
    Ok(SpectralField::from_vec(
        basis
            .modes()
            .iter()
            .zip(&u.coeffs)
            .map(|(m, &a)| a * m.w_grad / m.w_v)
            .collect(),
    ))
}

pub fn bhat<T: Real>(
    u: &SpectralField<T>,
    v: &SpectralField<T>,
    tensor: &TrilinearTensor<T>,
    basis: &BasisSpec<T>,
) -> Result<SpectralField<T>> {
    basis.check(u)?;
    basis.check(v)?;
    check_dim(basis.len(), tensor.len())?;
    let c = tensor.contract(&u.coeffs, &v.coeffs);
    Ok(SpectralField::from_vec(
        c.into_iter()
            .zip(basis.modes())
            .map(|(ci, m)| ci / m.w_v)
            .collect(),
    ))
}

pub fn fhat<T: Real>(
    u: &SpectralField<T>,
    t: T,
    forcing: &ForcingSpec<T>,
    basis: &BasisSpec<T>,
) -> Result<SpectralField<T>> {
    basis.check(u)?;
    let g = forcing.forcing.gain(t);
    Ok(SpectralField::from_vec(
        basis
            .modes()
            .iter()
            .zip(&u.coeffs)
            .map(|(m, &a)| g * a * m.w_l2 / m.w_v)
            .collect(),
    ))
}

pub fn ghat<T: Real>(
    u: &SpectralField<T>,
    _t: T,
    forcing: &ForcingSpec<T>,
    basis: &BasisSpec<T>,
) -> Result<Vec<SpectralField<T>>> {
    basis.check(u)?;
    forcing.validate(basis.len())?;
    let r: Vec<T> = basis.modes().iter().map(|m| m.w_l2 / m.w_v).collect();
    let cols = (0..forcing.m())
        .map(|j| {
            SpectralField::from_vec(
                (0..basis.len())
                    .map(|i| match &forcing.noise {
                        Noise::None { .. } => T::zero(),
                        Noise::Diagonal { sigma, .. } => {
                            sigma[j] * forcing.noise.profile(j, i) * u.coeffs[i] * r[i]
                        }
                        Noise::Additive { columns } => columns[j].coeffs[i] * r[i],
                    })
                    .collect(),
            )
        })
        .collect();
    Ok(cols)
}

/// Integrand of the controlled equation without the Brownian term.
pub fn drift<T: Real>(
    u: &SpectralField<T>,
    t: T,
    hdot: &[T],
    config: &ModelConfig<T>,
) -> Result<SpectralField<T>> {
    config.basis.check(u)?;
    check_dim(config.m(), hdot.len())?;
    let mut out = vec![T::zero(); u.len()];
    config.drift_into(&u.coeffs, t, hdot, &mut out);
    Ok(SpectralField::from_vec(out))
}
