//! Monte Carlo estimation of small-noise probabilities and empirical checks
//! of the weak-convergence conditions behind the large deviation principle.
//!
//! Sample path `i` of every ensemble is driven by generator stream `i` of the
//! master seed, and results are aggregated as integer counts, so estimates do
//! not depend on the number of worker threads.

mod conditions;

pub use conditions::{
    condition_a_check, condition_b_check, covering_numbers, moment_check, ConditionAOptions, ConditionAReport,
    ConditionARow, ConditionBOptions, ConditionBReport, MomentOptions, MomentReport, MomentRow,
};

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::SpectralField;
use crate::error::{Error, Result};
use crate::integrate::{solve_skeleton, solve_spde, ControlPath, NoiseDriver};
use crate::ldp::{gramian_rate_ball, rate_endpoint, LinearModelSpec, RateOptions};
use crate::ops::ModelConfig;
use crate::real::Real;

/// Closed `V`-ball `{u : ‖u(T) − center‖_V ≤ radius}` at the terminal time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BallEvent<T: Real> {
    pub center: SpectralField<T>,
    pub radius: T,
}

impl<T: Real> BallEvent<T> {
    pub fn new(center: SpectralField<T>, radius: T) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(Error::config("delta", "event radius must be positive"));
        }
        Ok(BallEvent { center, radius })
    }

    pub fn contains(&self, config: &ModelConfig<T>, u: &SpectralField<T>) -> Result<bool> {
        Ok(config.basis.norm_v(&u.sub(&self.center))? <= self.radius)
    }

    fn describe(&self) -> EventDescriptor {
        EventDescriptor {
            center: self.center.coeffs.iter().map(|v| v.f64()).collect(),
            radius: self.radius.f64(),
            norm: "V".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventDescriptor {
    pub center: Vec<f64>,
    pub radius: f64,
    pub norm: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbEstimate {
    pub eps: f64,
    pub n_samples: u64,
    pub n_hits: u64,
    /// Paths stopped at the blow-up ceiling; counted as misses.
    pub n_blowups: u64,
    pub p_hat: f64,
    /// 95% Wilson score interval.
    pub lo: f64,
    pub hi: f64,
    pub event: EventDescriptor,
}

impl ProbEstimate {
    pub fn censored(&self) -> bool {
        self.n_hits == 0
    }
}

/// Wilson score interval for `hits` successes in `n` trials.
pub fn wilson_interval(hits: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((center - half).clamp(0.0, 1.0).min(p), (center + half).clamp(0.0, 1.0).max(p))
}

#[derive(Clone, Debug)]
pub struct EnsembleOptions<T> {
    pub n: usize,
    pub dt: T,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

/// Runs `f` on a dedicated pool of `threads` workers, or inline.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::config("threads", "must be at least 1")),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map(|p| p.install(f))
            .map_err(|e| Error::Unsupported(e.to_string())),
    }
}

/// Plain Monte Carlo estimate of `P(‖u^ε(T) − x‖_V ≤ δ)` for the
/// uncontrolled equation.
pub fn run_ensemble<T: Real>(
    config: &ModelConfig<T>,
    eps: T,
    event: &BallEvent<T>,
    opts: &EnsembleOptions<T>,
) -> Result<ProbEstimate> {
    if opts.n == 0 {
        return Err(Error::config("n", "must be at least 1"));
    }
    if !(event.radius > T::zero()) {
        return Err(Error::config("delta", "event radius must be positive"));
    }
    config.basis.check(&event.center)?;
    let m = config.m();
    let (hits, blowups) = with_threads(opts.threads, || {
        (0..opts.n)
            .into_par_iter()
            .map(|i| {
                let driver = NoiseDriver::new(opts.seed, i as u64, m);
                match solve_spde(config, eps, None, &driver, opts.dt, 0) {
                    Ok(tr) => Ok((event.contains(config, tr.endpoint())? as u64, 0u64)),
                    Err(Error::BlowUp { .. }) => Ok((0, 1)),
                    Err(e) => Err(e),
                }
            })
            .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))
    })??;
    let n = opts.n as u64;
    let (lo, hi) = wilson_interval(hits, n, 1.959963984540054);
    Ok(ProbEstimate {
        eps: eps.f64(),
        n_samples: n,
        n_hits: hits,
        n_blowups: blowups,
        p_hat: hits as f64 / n as f64,
        lo,
        hi,
        event: event.describe(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub n: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub lo: f64,
    pub hi: f64,
    /// `−ε log p̂`; absent for censored rows.
    pub neg_eps_log_p: Option<f64>,
    /// `−ε log hi`, a lower confidence bound for `−ε log p`.
    pub neg_eps_log_hi: f64,
    /// `−ε log lo`; absent when `lo = 0`.
    pub neg_eps_log_lo: Option<f64>,
    #[serde(rename = "I_ref")]
    pub i_ref: f64,
    pub censored: bool,
}

impl SweepRow {
    fn from_estimate(p: &ProbEstimate, i_ref: f64) -> Self {
        let tr = |q: f64| (q > 0.0).then(|| -p.eps * q.ln());
        SweepRow {
            eps: p.eps,
            n: p.n_samples,
            hits: p.n_hits,
            p_hat: p.p_hat,
            lo: p.lo,
            hi: p.hi,
            neg_eps_log_p: tr(p.p_hat),
            neg_eps_log_hi: tr(p.hi).unwrap_or(f64::INFINITY),
            neg_eps_log_lo: tr(p.lo),
            i_ref,
            censored: p.censored(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Every uncensored row is at least as close to `I_ref` as its predecessor.
    pub monotone: bool,
    /// Fraction of consecutive uncensored pairs that move toward `I_ref`.
    pub trend: f64,
    /// `|−ε log p̂ − I_ref| / I_ref` at the smallest uncensored `ε`.
    pub final_gap: Option<f64>,
}

impl SweepReport {
    fn from_rows(rows: Vec<SweepRow>) -> Self {
        let live: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.neg_eps_log_p.map(|y| (y, r.i_ref)))
            .collect();
        let steps: Vec<bool> = live
            .windows(2)
            .map(|w| (w[1].0 - w[1].1).abs() <= (w[0].0 - w[0].1).abs())
            .collect();
        let trend = if steps.is_empty() {
            0.0
        } else {
            steps.iter().filter(|&&s| s).count() as f64 / steps.len() as f64
        };
        let final_gap = rows
            .last()
            .and_then(|r| r.neg_eps_log_p.map(|y| (y - r.i_ref).abs() / r.i_ref.abs().max(f64::MIN_POSITIVE)));
        SweepReport {
            monotone: !steps.is_empty() && steps.iter().all(|&s| s),
            trend,
            final_gap,
            rows,
        }
    }

    /// RFC-4180 table `eps,n,hits,p_hat,lo,hi,neg_eps_log_p,I_ref`; the
    /// `neg_eps_log_p` cell is empty for censored rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["eps", "n", "hits", "p_hat", "lo", "hi", "neg_eps_log_p", "I_ref"])?;
        for r in &self.rows {
            out.write_record([
                r.eps.to_string(),
                r.n.to_string(),
                r.hits.to_string(),
                r.p_hat.to_string(),
                r.lo.to_string(),
                r.hi.to_string(),
                r.neg_eps_log_p.map(|v| v.to_string()).unwrap_or_default(),
                r.i_ref.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
    }
}

/// `−ε log p̂` against `i_ref` for a decreasing list of noise levels.
pub fn ldp_sweep<T: Real>(
    config: &ModelConfig<T>,
    eps_list: &[T],
    event: &BallEvent<T>,
    i_ref: f64,
    opts: &EnsembleOptions<T>,
) -> Result<SweepReport> {
    if eps_list.is_empty() {
        return Err(Error::config("eps", "needs at least one noise level"));
    }
    if eps_list.iter().any(|&e| !(e > T::zero())) || eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::config("eps", "noise levels must be positive and strictly decreasing"));
    }
    let rows = eps_list
        .iter()
        .map(|&eps| run_ensemble(config, eps, event, opts).map(|p| SweepRow::from_estimate(&p, i_ref)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport::from_rows(rows))
}

/// Reference value of `inf {I(y) : ‖y − x‖_V ≤ δ}` for a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRate {
    pub value: f64,
    pub method: String,
    pub converged: bool,
    pub caveat: Option<String>,
}

/// Exact ball infimum for linear Gaussian models; otherwise the optimized
/// rate of the ball point nearest to the noise-free endpoint, which only
/// bounds the infimum from above.
pub fn ball_reference(config: &ModelConfig<f64>, event: &BallEvent<f64>, opts: &RateOptions<f64>) -> Result<ReferenceRate> {
    if let Ok(spec) = LinearModelSpec::from_model(config) {
        return Ok(ReferenceRate {
            value: gramian_rate_ball(&spec, &event.center, event.radius)?,
            method: "gramian_ball".into(),
            converged: true,
            caveat: None,
        });
    }
    let free = solve_skeleton(config, &ControlPath::zeros(1, config.m(), config.horizon), opts.dt(config.horizon))?;
    let off = free.endpoint().sub(&event.center);
    let dist = config.basis.norm_v(&off)?;
    if dist <= event.radius {
        return Ok(ReferenceRate {
            value: 0.0,
            method: "noise_free_endpoint_in_ball".into(),
            converged: true,
            caveat: None,
        });
    }
    let mut y = event.center.clone();
    y.axpy(event.radius / dist, &off);
    let est = rate_endpoint(&y, config, opts)?;
    Ok(ReferenceRate {
        value: est.rate(),
        method: "rate_endpoint_nearest_point".into(),
        converged: est.converged,
        caveat: Some("nonlinear model: rate at the ball point nearest the noise-free endpoint, an upper bound on the ball infimum".into()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_torus_basis;
    use crate::ops::{Forcing, ForcingSpec, Noise};
    use std::sync::Arc;

    fn quiet(u0: SpectralField<f64>) -> ModelConfig<f64> {
        let b = Arc::new(build_torus_basis::<f64>(1, 1.0).unwrap());
        ModelConfig::new(1.0, b, None, ForcingSpec::new(Forcing::None, Noise::None { m: 1 }), u0, 1.0).unwrap()
    }

    #[test]
    fn zero_system_always_hits() {
        let c = quiet(SpectralField::zeros(4));
        let ev = BallEvent::new(SpectralField::zeros(4), 0.1).unwrap();
        let opts = EnsembleOptions { n: 50, dt: 0.05, seed: 3, threads: Some(2) };
        let p = run_ensemble(&c, 0.3, &ev, &opts).unwrap();
        assert_eq!(p.p_hat, 1.0);
        assert!(p.lo <= 1.0 && p.hi == 1.0);
    }

    #[test]
    fn wilson_contains_estimate() {
        for (k, n) in [(0u64, 10u64), (1, 10), (5, 10), (10, 10), (3, 100000)] {
            let (lo, hi) = wilson_interval(k, n, 1.96);
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi && (0.0..=1.0).contains(&lo) && hi <= 1.0);
        }
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
    }

    #[test]
    fn censored_rows_have_no_log() {
        let c = quiet(SpectralField::zeros(4));
        let far = SpectralField::from_vec(vec![5.0, 0.0, 0.0, 0.0]);
        let ev = BallEvent::new(far, 0.1).unwrap();
        let opts = EnsembleOptions { n: 20, dt: 0.1, seed: 1, threads: None };
        let r = ldp_sweep(&c, &[0.2, 0.1], &ev, 1.0, &opts).unwrap();
        assert!(r.rows.iter().all(|row| row.censored && row.neg_eps_log_p.is_none()));
        assert!(r.final_gap.is_none());
        let csv = r.to_csv_string().unwrap();
        assert!(csv.starts_with("eps,n,hits,p_hat,lo,hi,neg_eps_log_p,I_ref\n"));
        assert!(csv.lines().nth(1).unwrap().contains(",,1"));
    }

    #[test]
    fn sweep_rejects_increasing_eps() {
        let c = quiet(SpectralField::zeros(4));
        let ev = BallEvent::new(SpectralField::zeros(4), 0.1).unwrap();
        let opts = EnsembleOptions { n: 2, dt: 0.1, seed: 1, threads: None };
        assert!(ldp_sweep(&c, &[0.1, 0.2], &ev, 1.0, &opts).is_err());
        assert!(BallEvent::new(SpectralField::<f64>::zeros(4), 0.0).is_err());
    }
}
