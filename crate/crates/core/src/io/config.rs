use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::{build_torus_basis, SpectralField};
use crate::error::{Error, Result};
use crate::integrate::ControlPath;
use crate::ldp::RateOptions;
use crate::mc::BallEvent;
use crate::ops::{Forcing, ForcingSpec, ModelConfig, Noise, TrilinearTensor};

/// Initial state: `"zero"`, an explicit coefficient list, or a smooth random
/// field of the given `V`-norm drawn from the master seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialState {
    Named(String),
    Coeffs(Vec<f64>),
    Random { amplitude: f64 },
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::Random { amplitude: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlSpec {
    pub cells: usize,
    /// Constant `ḣ` value per noise component.
    pub constant: Option<Vec<f64>>,
    /// CSV file with columns `t, hdot_1, …`.
    pub path: Option<String>,
    /// Energy bound `N` of the admissible set `S_N`.
    pub n_bound: Option<f64>,
}

impl Default for ControlSpec {
    fn default() -> Self {
        ControlSpec {
            cells: 64,
            constant: None,
            path: None,
            n_bound: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub center: Vec<f64>,
    pub delta: f64,
}

/// Target document: a bare coefficient list or `{"coeffs": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetSpec {
    Coeffs(Vec<f64>),
    Object { coeffs: Vec<f64> },
}

impl TargetSpec {
    pub fn coeffs(&self) -> &[f64] {
        match self {
            TargetSpec::Coeffs(c) | TargetSpec::Object { coeffs: c } => c,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(parse_error)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionsSpec {
    pub n_rep: usize,
    pub perturbation: f64,
    pub n_controls: usize,
    pub n_bound: f64,
    pub levels: usize,
    pub moment_paths: usize,
}

impl Default for ConditionsSpec {
    fn default() -> Self {
        ConditionsSpec {
            n_rep: 200,
            perturbation: 1.0,
            n_controls: 50,
            n_bound: 1.0,
            levels: 6,
            moment_paths: 500,
        }
    }
}

fn default_forcing() -> String {
    "none".into()
}

fn default_omega() -> f64 {
    1.0
}

fn default_noise() -> String {
    "diagonal".into()
}
fn default_sigma() -> Vec<f64> {
    vec![0.5]
}
fn default_true() -> bool {
    true
}
fn default_eps() -> f64 {
    0.1
}
fn default_eps_list() -> Vec<f64> {
    vec![0.4, 0.2, 0.1, 0.05]
}
fn default_n() -> usize {
    1000
}
fn default_dt() -> f64 {
    1.0 / 256.0
}
fn default_stride() -> usize {
    1
}
fn default_ceiling() -> f64 {
    1e6
}

/// A complete experiment description. Only `nu`, `alpha`, `cutoff` and `T`
/// are required; every other field has a default that is written back when
/// the configuration is echoed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub nu: f64,
    pub alpha: f64,
    pub cutoff: u32,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default = "default_forcing")]
    pub forcing: String,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default = "default_noise")]
    pub noise: String,
    #[serde(default = "default_sigma")]
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub profiles: Vec<Vec<f64>>,
    #[serde(default)]
    pub columns: Vec<Vec<f64>>,
    /// Brownian dimension for `noise = "none"`.
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default = "default_true")]
    pub tensor: bool,
    #[serde(default)]
    pub tensor_cache: Option<String>,
    #[serde(default)]
    pub u0: InitialState,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_stride")]
    pub save_stride: usize,
    #[serde(default = "default_ceiling")]
    pub ceiling: f64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub control: ControlSpec,
    #[serde(default)]
    pub event: Option<EventSpec>,
    #[serde(default)]
    pub rate: RateOptions<f64>,
    #[serde(default)]
    pub conditions: ConditionsSpec,
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be a positive finite number, got {v}")))
    }
}

/// Reads, fills defaults and validates an experiment configuration.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_json_str(&text)
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(parse_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        positive("nu", self.nu)?;
        positive("alpha", self.alpha)?;
        positive("T", self.horizon)?;
        positive("dt", self.dt)?;
        positive("ceiling", self.ceiling)?;
        if self.cutoff < 1 {
            return Err(Error::config("cutoff", "must be at least 1"));
        }
        if !Forcing::<f64>::FAMILIES.contains(&self.forcing.as_str()) {
            return Err(Error::UnknownFamily {
                kind: "forcing",
                name: self.forcing.clone(),
                supported: Forcing::<f64>::FAMILIES.join(", "),
            });
        }
        if !Noise::<f64>::FAMILIES.contains(&self.noise.as_str()) {
            return Err(Error::UnknownFamily {
                kind: "noise",
                name: self.noise.clone(),
                supported: Noise::<f64>::FAMILIES.join(", "),
            });
        }
        if !self.kappa.is_finite() {
            return Err(Error::config("kappa", "must be finite"));
        }
        if !self.omega.is_finite() {
            return Err(Error::config("omega", "must be finite"));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::config("eps", "must be nonnegative"));
        }
        if self.n == 0 {
            return Err(Error::config("n", "must be at least 1"));
        }
        if self.control.cells == 0 {
            return Err(Error::config("control.cells", "must be at least 1"));
        }
        if let Some(e) = &self.event {
            positive("event.delta", e.delta)?;
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads", "must be at least 1"));
        }
        if let InitialState::Named(name) = &self.u0 {
            if name != "zero" {
                return Err(Error::config("u0", format!("unknown initial state `{name}`; use \"zero\", a coefficient list or {{\"amplitude\": a}}")));
            }
        }
        Ok(())
    }

    /// The resolved document with every default filled in.
    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical (key-sorted, compact) resolved document,
    /// leaving out `threads` and `tensor_cache`, which do not change results.
    pub fn hash(&self) -> String {
        let mut v = self.to_value();
        if let Some(map) = v.as_object_mut() {
            map.remove("threads");
            map.remove("tensor_cache");
        }
        let canonical = serde_json::to_string(&v).expect("configuration serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn forcing_spec(&self, n_modes: usize) -> Result<ForcingSpec<f64>> {
        let forcing = match self.forcing.as_str() {
            "none" => Forcing::None,
            "linear" => Forcing::Linear { kappa: self.kappa },
            _ => Forcing::Modulated {
                kappa: self.kappa,
                omega: self.omega,
            },
        };
        let noise = match self.noise.as_str() {
            "none" => Noise::None {
                m: self.m.unwrap_or(1),
            },
            "diagonal" => Noise::Diagonal {
                sigma: self.sigma.clone(),
                profiles: self.profiles.clone(),
            },
            _ => {
                if self.columns.is_empty() {
                    return Err(Error::config("columns", "additive noise needs at least one column"));
                }
                let mut cols = Vec::with_capacity(self.columns.len());
                for c in &self.columns {
                    if c.len() != n_modes {
                        return Err(Error::config(
                            "columns",
                            format!("each column needs {n_modes} coefficients, got {}", c.len()),
                        ));
                    }
                    cols.push(SpectralField::from_vec(c.clone()));
                }
                Noise::Additive { columns: cols }
            }
        };
        let spec = ForcingSpec::new(forcing, noise);
        spec.validate(n_modes)?;
        Ok(spec)
    }

    pub fn build_model(&self) -> Result<ModelConfig<f64>> {
        let basis = Arc::new(build_torus_basis(self.cutoff, self.alpha)?);
        let tensor = if self.tensor {
            Some(Arc::new(match &self.tensor_cache {
                Some(dir) => TrilinearTensor::load_or_assemble(&basis, Path::new(dir))?,
                None => TrilinearTensor::assemble(&basis),
            }))
        } else {
            None
        };
        let n = basis.len();
        let u0 = match &self.u0 {
            InitialState::Named(_) => SpectralField::zeros(n),
            InitialState::Coeffs(c) => {
                if c.len() != n {
                    return Err(Error::config("u0", format!("expected {n} coefficients, got {}", c.len())));
                }
                SpectralField::from_vec(c.clone())
            }
            InitialState::Random { amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(u64::MAX);
                basis.smooth_random(&mut rng, *amplitude)
            }
        };
        let forcing = self.forcing_spec(n)?;
        let mut model = ModelConfig::new(self.nu, basis, tensor, forcing, u0, self.horizon)?;
        model.ceiling = self.ceiling;
        Ok(model)
    }

    /// Control from the `control` section; zero when nothing is given.
    pub fn build_control(&self, m: usize, base: &Path) -> Result<ControlPath<f64>> {
        let mut c = if let Some(p) = &self.control.path {
            let file = std::fs::File::open(base.join(p))?;
            ControlPath::read_csv(file, self.horizon)?
        } else if let Some(v) = &self.control.constant {
            ControlPath::constant(self.control.cells, v, self.horizon)
        } else {
            ControlPath::zeros(self.control.cells, m, self.horizon)
        };
        if c.m() != m {
            return Err(Error::config("control", format!("control has {} components, noise has {m}", c.m())));
        }
        c.n_bound = self.control.n_bound;
        c.validate()?;
        Ok(c)
    }

    pub fn build_event(&self, n_modes: usize) -> Result<BallEvent<f64>> {
        let e = self
            .event
            .as_ref()
            .ok_or_else(|| Error::config("event", "this command needs an `event` section with `center` and `delta`"))?;
        if e.center.len() != n_modes {
            return Err(Error::config(
                "event.center",
                format!("expected {n_modes} coefficients, got {}", e.center.len()),
            ));
        }
        BallEvent::new(SpectralField::from_vec(e.center.clone()), e.delta)
    }
}
