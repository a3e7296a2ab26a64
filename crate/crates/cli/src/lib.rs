//! Command-line front end: parses arguments, resolves the experiment
//! configuration, runs one pipeline and writes its artifacts and manifest.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use sgfluid::checks::run_invariants;
use sgfluid::integrate::{solve_skeleton, solve_spde, NoiseDriver};
use sgfluid::io::{parse_config, write_snapshot, ExperimentConfig, RunManifest, TargetSpec};
use sgfluid::ldp::rate_endpoint;
use sgfluid::mc::{
    ball_reference, condition_a_check, condition_b_check, ldp_sweep, moment_check, BallEvent, ConditionAOptions,
    ConditionBOptions, EnsembleOptions, MomentOptions,
};
use sgfluid::{Error, Field, Model, Result};

#[derive(Parser, Debug)]
#[command(name = "sgfluid", version, about = "Stochastic second-grade fluid experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory for artifacts and the run manifest.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for ensembles.
    #[arg(long)]
    threads: Option<usize>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One Euler–Maruyama path of the stochastic equation.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: Option<f64>,
    },
    /// The controlled deterministic skeleton for the configured control.
    Skeleton {
        #[command(flatten)]
        common: Common,
    },
    /// Minimal control energy reaching a target endpoint.
    Rate {
        #[command(flatten)]
        common: Common,
        /// Target coefficients (JSON list or {"coeffs": [...]}).
        #[arg(long)]
        target: PathBuf,
    },
    /// Monte Carlo sweep of -eps log p against the reference rate.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated decreasing noise levels.
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        /// Event center, replacing `event.center`.
        #[arg(long)]
        target: Option<PathBuf>,
    },
    /// Structural identities of the discretized model.
    CheckInvariants {
        #[command(flatten)]
        common: Common,
    },
    /// Empirical checks of the convergence, compactness and moment conditions.
    CheckConditions {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: Option<String>,
        #[arg(long)]
        n: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Skeleton { .. } => "skeleton",
            Command::Rate { .. } => "rate",
            Command::Sweep { .. } => "sweep",
            Command::CheckInvariants { .. } => "check-invariants",
            Command::CheckConditions { .. } => "check-conditions",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Simulate { common, .. }
            | Command::Skeleton { common }
            | Command::Rate { common, .. }
            | Command::Sweep { common, .. }
            | Command::CheckInvariants { common }
            | Command::CheckConditions { common, .. } => common,
        }
    }
}

/// Exit status for a failed check (as opposed to an error).
pub const EXIT_CHECK_FAILED: i32 = 1;
/// Exit status for usage, configuration and runtime errors.
pub const EXIT_ERROR: i32 = 2;

/// Runs the command line `argv` (program name first), writing human output
/// to `out` and machine-readable error documents to `err`.
pub fn run_command<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let doc = json!({"error": {"kind": "usage", "message": e.to_string()}});
            let _ = writeln!(err, "{doc}");
            return EXIT_ERROR;
        }
    };
    match dispatch(&cli.command, &argv[1..], out) {
        Ok(code) => code,
        Err(e) => {
            let doc = json!({"error": {"kind": e.kind(), "message": e.to_string(), "command": cli.command.name()}});
            let _ = writeln!(err, "{doc}");
            EXIT_ERROR
        }
    }
}

fn parse_list(field: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|e| Error::config(field, format!("`{p}`: {e}")))
        })
        .collect()
}

/// Configuration with command-line overrides applied (flags > file > defaults)
/// and relative input paths resolved against the configuration's directory.
fn resolve(cmd: &Command) -> Result<ExperimentConfig> {
    let c = cmd.common();
    let mut cfg = parse_config(&c.config)?;
    let base = c.config.parent().unwrap_or(Path::new("."));
    let absolute = |p: &str| -> String {
        let p = Path::new(p);
        if p.is_absolute() {
            p.display().to_string()
        } else {
            base.join(p).display().to_string()
        }
    };
    cfg.control.path = cfg.control.path.as_deref().map(absolute);
    cfg.tensor_cache = cfg.tensor_cache.as_deref().map(absolute);
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if c.threads.is_some() {
        cfg.threads = c.threads;
    }
    match cmd {
        Command::Simulate { eps: Some(e), .. } => cfg.eps = *e,
        Command::Sweep { eps, n, .. } | Command::CheckConditions { eps, n, .. } => {
            if let Some(s) = eps {
                cfg.eps_list = parse_list("eps", s)?;
            }
            if let Some(n) = n {
                cfg.n = *n;
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Run {
    dir: PathBuf,
    manifest: RunManifest,
}

impl Run {
    fn start(cmd: &Command, args: &[String], cfg: &ExperimentConfig, model: &Model) -> Result<Self> {
        let dir = cmd.common().out.clone();
        std::fs::create_dir_all(&dir)?;
        Ok(Run {
            manifest: RunManifest::new(cmd.name(), args, cfg, model.n()),
            dir,
        })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.flush()?;
        Ok(())
    }

    fn finish(mut self, written: &[&str]) -> Result<()> {
        for name in written {
            self.manifest.record(&self.dir, name)?;
        }
        let path = self.dir.join("manifest.json");
        self.manifest.write(&path)
    }
}

fn load_target(path: &Path, n: usize, field: &str) -> Result<(Field, serde_json::Value)> {
    let t = TargetSpec::load(path)?;
    if t.coeffs().len() != n {
        return Err(Error::config(
            field,
            format!("target has {} coefficients, the basis has {n}", t.coeffs().len()),
        ));
    }
    Ok((Field::from_vec(t.coeffs().to_vec()), json!(t.coeffs())))
}

fn dispatch(cmd: &Command, args: &[String], out: &mut dyn Write) -> Result<i32> {
    let cfg = resolve(cmd)?;
    let model = cfg.build_model()?;
    let mut run = Run::start(cmd, args, &cfg, &model)?;
    let threads = cfg.threads;
    match cmd {
        Command::Simulate { .. } => {
            let driver = NoiseDriver::new(cfg.seed, 0, model.m());
            let control = if cfg.control.constant.is_some() || cfg.control.path.is_some() {
                Some(cfg.build_control(model.m(), Path::new(""))?)
            } else {
                None
            };
            let mut tr = solve_spde(&model, cfg.eps, control.as_ref(), &driver, cfg.dt, cfg.save_stride)?;
            tr.meta.config_hash = run.manifest.config_hash.clone();
            write_snapshot(&tr, run.create("trajectory.sgfs")?)?;
            tr.write_norms_csv(&model, run.create("norms.csv")?)?;
            let summary = json!({
                "command": "simulate",
                "eps": cfg.eps,
                "seed": cfg.seed,
                "sup_v": tr.sup_v,
                "sup_w": tr.sup_w,
                "dissipation": tr.dissipation,
                "endpoint_norm_v": model.basis.norm_v(tr.endpoint())?,
            });
            run.json("summary.json", &summary)?;
            writeln!(out, "{summary}")?;
            run.finish(&["trajectory.sgfs", "norms.csv", "summary.json"])?;
            Ok(0)
        }
        Command::Skeleton { .. } => {
            let control = cfg.build_control(model.m(), Path::new(""))?;
            let mut tr = solve_skeleton(&model, &control, cfg.dt)?;
            tr.meta.config_hash = run.manifest.config_hash.clone();
            write_snapshot(&tr, run.create("skeleton.sgfs")?)?;
            tr.write_norms_csv(&model, run.create("norms.csv")?)?;
            let summary = json!({
                "command": "skeleton",
                "control_cost": control.cost(),
                "sup_v": tr.sup_v,
                "sup_w": tr.sup_w,
                "dissipation": tr.dissipation,
                "endpoint": tr.endpoint().coeffs,
            });
            run.json("summary.json", &summary)?;
            writeln!(out, "{summary}")?;
            run.finish(&["skeleton.sgfs", "norms.csv", "summary.json"])?;
            Ok(0)
        }
        Command::Rate { target, .. } => {
            let (x, doc) = load_target(target, model.n(), "target")?;
            run.manifest.inputs.insert("target".into(), doc);
            let est = rate_endpoint(&x, &model, &cfg.rate)?;
            run.json("rate_estimate.json", &serde_json::to_value(&est)?)?;
            let mut w = run.create("control.csv")?;
            est.control.write_csv(&mut w)?;
            drop(w);
            writeln!(
                out,
                "{}",
                json!({
                    "command": "rate",
                    "value": est.value,
                    "status": est.status,
                    "endpoint_gap": est.endpoint_gap,
                    "iterations": est.iterations,
                })
            )?;
            run.finish(&["rate_estimate.json", "control.csv"])?;
            Ok(0)
        }
        Command::Sweep { target, .. } => {
            let event = match target {
                Some(p) => {
                    let (x, doc) = load_target(p, model.n(), "target")?;
                    run.manifest.inputs.insert("target".into(), doc);
                    let delta = cfg
                        .event
                        .as_ref()
                        .map(|e| e.delta)
                        .ok_or_else(|| Error::config("event.delta", "sweep needs an event radius"))?;
                    BallEvent::new(x, delta)?
                }
                None => cfg.build_event(model.n())?,
            };
            let reference = ball_reference(&model, &event, &cfg.rate)?;
            let opts = EnsembleOptions {
                n: cfg.n,
                dt: cfg.dt,
                seed: cfg.seed,
                threads,
            };
            let report = ldp_sweep(&model, &cfg.eps_list, &event, reference.value, &opts)?;
            let mut w = run.create("sweep.csv")?;
            report.write_csv(&mut w)?;
            drop(w);
            run.json("sweep_report.json", &json!({"reference": reference, "report": report}))?;
            writeln!(
                out,
                "{}",
                json!({
                    "command": "sweep",
                    "I_ref": reference.value,
                    "reference_method": reference.method,
                    "monotone": report.monotone,
                    "final_gap": report.final_gap,
                })
            )?;
            run.finish(&["sweep.csv", "sweep_report.json"])?;
            Ok(0)
        }
        Command::CheckInvariants { .. } => {
            let report = run_invariants(&model, cfg.seed)?;
            write!(out, "{}", report.table())?;
            run.json("invariants.json", &serde_json::to_value(&report)?)?;
            run.finish(&["invariants.json"])?;
            Ok(if report.all_passed { 0 } else { EXIT_CHECK_FAILED })
        }
        Command::CheckConditions { .. } => {
            let cs = &cfg.conditions;
            let mut h = cfg.build_control(model.m(), Path::new(""))?;
            if h.n_bound.is_none() {
                h.n_bound = Some(cs.n_bound.max(h.energy()));
            }
            let a = condition_a_check(
                &model,
                &h,
                &ConditionAOptions {
                    eps_list: cfg.eps_list.clone(),
                    n_rep: cs.n_rep,
                    dt: cfg.dt,
                    seed: cfg.seed,
                    threads,
                    perturbation: cs.perturbation,
                },
            )?;
            let b = condition_b_check(
                &model,
                &ConditionBOptions {
                    n_bound: cs.n_bound,
                    n_controls: cs.n_controls,
                    cells: cfg.control.cells,
                    dt: cfg.dt,
                    seed: cfg.seed,
                    levels: cs.levels,
                    threads,
                },
            )?;
            let m = moment_check(
                &model,
                &MomentOptions {
                    eps_list: cfg.eps_list.clone(),
                    n: cs.moment_paths,
                    dt: cfg.dt,
                    seed: cfg.seed,
                    threads,
                },
            )?;
            let pass_a = a.r_squared >= 0.9;
            let pass_b = b.lipschitz_max.is_finite() && b.saturates;
            let pass_m = m.ratio <= 2.0;
            let status = |p: bool| if p { "PASS" } else { "FAIL" };
            writeln!(out, "{:<14} {:<6} detail", "condition", "status")?;
            writeln!(out, "{:<14} {:<6} R^2 = {:.4}, C = {:.4}", "a", status(pass_a), a.r_squared, a.c_fit)?;
            writeln!(
                out,
                "{:<14} {:<6} L = {:.4}, covering = {:?}",
                "b",
                status(pass_b),
                b.lipschitz_max,
                b.image_covering
            )?;
            writeln!(out, "{:<14} {:<6} max/min = {:.4}", "moments", status(pass_m), m.ratio)?;
            run.json(
                "conditions.json",
                &json!({"condition_a": a, "condition_b": b, "moments": m, "passed": pass_a && pass_b && pass_m}),
            )?;
            run.finish(&["conditions.json"])?;
            Ok(if pass_a && pass_b && pass_m { 0 } else { EXIT_CHECK_FAILED })
        }
    }
}
