//! The five subcommands. Each returns the files it wrote and a text summary.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use huygens_core::classify::{detect_regime, ClassifyTolerances, SyncRegimeReport};
use huygens_core::dynamics::{integrate, IntegrateOptions, Model, ModelKind, ModelParams, Trajectory};
use huygens_core::params::{regime_thresholds, sigma_tilde, PoincareParams, ThresholdReport};
use huygens_core::poincare::{closed_form_regimes, PoincareEngine, PoincareSolution, Regime, RegimePrediction, Seed};
use huygens_core::Error as CoreError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{CommandKind, Grid, RunConfig, DEFAULT_SAMPLE_INTERVAL};
use crate::error::{CliError, CliResult};
use crate::figures::{self, FigureId, FigurePreset};
use crate::io::{self, TrajectoryMeta};
use crate::svg;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

pub fn run(cfg: &RunConfig, input: Option<&Path>) -> CliResult<Outcome> {
    match cfg.command {
        CommandKind::Simulate => cmd_simulate(cfg),
        CommandKind::Predict => cmd_predict(cfg),
        CommandKind::Analyze => {
            cmd_analyze(cfg, input.ok_or_else(|| CliError::config("analyze needs an input trajectory CSV"))?)
        }
        CommandKind::Sweep => cmd_sweep(cfg),
        CommandKind::Reproduce => cmd_reproduce(cfg),
    }
}

/// Integrates `params` under `model` from `x0` over `[0, t_end]`.
pub fn simulate(
    model: ModelKind,
    params: ModelParams,
    n: usize,
    x0: &[f64],
    t_end: f64,
    tol: f64,
    sample_interval: f64,
) -> CliResult<Trajectory> {
    let model = Model::new(model, params, n)?;
    Ok(integrate(&model, x0, t_end, &IntegrateOptions { tol, sample_interval })?)
}

fn write_trajectory(
    dir: &Path,
    stem: &str,
    traj: &Trajectory,
    meta: &TrajectoryMeta,
    files: &mut Vec<PathBuf>,
) -> CliResult<PathBuf> {
    let csv = dir.join(format!("{stem}.csv"));
    io::write_atomic(&csv, &io::trajectory_csv(traj))?;
    let json = io::sidecar_path(&csv);
    io::write_json(&json, meta)?;
    files.push(csv.clone());
    files.push(json);
    Ok(csv)
}

pub fn cmd_simulate(cfg: &RunConfig) -> CliResult<Outcome> {
    let params = cfg.params.ok_or_else(|| CliError::config("simulate needs parameters"))?;
    let t_end = cfg.t_end.ok_or_else(|| CliError::config("simulate needs t_end"))?;
    let traj = simulate(cfg.model, params, cfg.n, &cfg.initial_conditions, t_end, cfg.tol, cfg.sample_interval)?;
    let meta = TrajectoryMeta::new(&traj, &cfg.initial_conditions, t_end, cfg.tol, cfg.sample_interval);
    let mut out = Outcome::default();
    write_trajectory(&cfg.output_dir, "trajectory", &traj, &meta, &mut out.files)?;
    out.summary = format!("{} samples of model {} up to t = {t_end}\n", traj.len(), cfg.model.name());
    Ok(out)
}

/// Closed form and engine side by side for one regime.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictEntry {
    pub regime: Regime,
    pub closed_form: Option<RegimePrediction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form_error: Option<String>,
    pub engine: Option<PoincareSolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub engine_error: Option<String>,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictReport {
    pub model: ModelKind,
    pub params: PoincareParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<ThresholdReport>,
    pub regimes: Vec<PredictEntry>,
    /// True when every regime agrees.
    pub agreement: bool,
}

/// Relative tolerance for the agreement flag.
pub const AGREEMENT_TOL: f64 = 1e-6;

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= AGREEMENT_TOL * x.abs().max(y.abs()).max(1.0)
}

fn agrees(cf: Option<&RegimePrediction>, engine: Option<&PoincareSolution>) -> bool {
    match (cf, engine) {
        (Some(c), None) => !c.exists,
        (Some(c), Some(s)) => {
            c.exists
                && c.amplitude.is_some_and(|a| close(a, s.amplitude))
                && c.delta1.is_some_and(|d| close(d, s.delta1))
                && c.stable.is_none_or(|st| st == s.stable)
        }
        (None, _) => false,
    }
}

/// Why the engine produced no solution for a regime.
#[derive(Debug, Clone, PartialEq)]
pub enum EngineMiss {
    /// The solver found nothing for this regime; read as non-existence.
    Absent(String),
    /// The engine could not be applied (degeneracy, resonance, ...).
    Failed(String),
}

impl EngineMiss {
    pub fn message(&self) -> &str {
        match self {
            EngineMiss::Absent(m) | EngineMiss::Failed(m) => m,
        }
    }
}

/// Solves the amplitude equations for one regime, seeded at `(|γ|, 0 or π)`.
/// A solution that lands on a different regime counts as absent.
pub fn engine_solution(engine: &PoincareEngine, gamma: f64, regime: Regime) -> Result<PoincareSolution, EngineMiss> {
    let phi0 = if regime == Regime::AntiPhase { PI } else { 0.0 };
    match engine.solve(Seed { r0: gamma.abs(), phi0 }) {
        Ok(sol) if sol.regime == regime => Ok(sol),
        Ok(sol) => Err(EngineMiss::Absent(format!("solver converged to the {} regime", sol.regime.name()))),
        Err(e @ (CoreError::NoSolution { .. } | CoreError::TrivialSolution)) => Err(EngineMiss::Absent(e.to_string())),
        Err(e) => Err(EngineMiss::Failed(e.to_string())),
    }
}

pub fn predict(model: ModelKind, params: &PoincareParams) -> CliResult<PredictReport> {
    params.validate()?;
    let closed = closed_form_regimes(params, model);
    let engine = PoincareEngine::for_model(model, params);
    let mut regimes = Vec::new();
    for (k, regime) in [Regime::InPhase, Regime::AntiPhase].into_iter().enumerate() {
        let (cf, cf_err) = match &closed {
            Ok(list) => (list.get(k).cloned(), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let (sol, err) = match &engine {
            Ok(eng) => match engine_solution(eng, params.gamma, regime) {
                Ok(s) => (Some(s), None),
                Err(e) => (None, Some(e.message().to_string())),
            },
            Err(e) => (None, Some(e.to_string())),
        };
        let agree = agrees(cf.as_ref(), sol.as_ref());
        regimes.push(PredictEntry {
            regime,
            closed_form: cf,
            closed_form_error: cf_err,
            engine: sol,
            engine_error: err,
            agree,
        });
    }
    let thresholds = if model == ModelKind::ThreeDof { regime_thresholds(params).ok() } else { None };
    Ok(PredictReport { model, params: *params, thresholds, agreement: regimes.iter().all(|r| r.agree), regimes })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.8}"))
}

pub fn cmd_predict(cfg: &RunConfig) -> CliResult<Outcome> {
    let p = match cfg.params {
        Some(ModelParams::Poincare(p)) => p,
        _ => return Err(CliError::config("predict needs small-parameter (poincare) parameters")),
    };
    let report = predict(cfg.model, &p)?;
    let path = cfg.output_dir.join("predict.json");
    io::write_json(&path, &report)?;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<11} {:>7} {:>12} {:>12} {:>12} {:>12} {:>7}",
        "regime", "exists", "amp(cf)", "amp(eng)", "d1(cf)", "d1(eng)", "agree"
    );
    for e in &report.regimes {
        let cf = e.closed_form.as_ref();
        let _ = writeln!(
            s,
            "{:<11} {:>7} {:>12} {:>12} {:>12} {:>12} {:>7}",
            e.regime.name(),
            cf.map_or("-", |c| if c.exists { "yes" } else { "no" }),
            opt(cf.and_then(|c| c.amplitude)),
            opt(e.engine.as_ref().map(|x| x.amplitude)),
            opt(cf.and_then(|c| c.delta1)),
            opt(e.engine.as_ref().map(|x| x.delta1)),
            if e.agree { "yes" } else { "no" }
        );
    }
    Ok(Outcome { files: vec![path], summary: s })
}

pub fn format_report(r: &SyncRegimeReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<18} {}", "regime", r.regime.name());
    let _ = writeln!(s, "{:<18} {}", "beats", if r.beats { "yes" } else { "no" });
    match r.settle_time {
        Some(t) => {
            let _ = writeln!(s, "{:<18} {t:.4} ({:.1} cycles)", "settle_time", t / (2.0 * PI));
        }
        None => {
            let _ = writeln!(s, "{:<18} -", "settle_time");
        }
    }
    let amps: Vec<String> = r.asymptotic_amplitude.iter().map(|a| format!("{a:.6}")).collect();
    let _ = writeln!(s, "{:<18} {}", "amplitude", amps.join(" "));
    match (r.measured_period, r.period_std_error) {
        (Some(p), Some(e)) => {
            let _ = writeln!(s, "{:<18} {p:.8} +- {e:.1e}", "measured_period");
        }
        _ => {
            let _ = writeln!(s, "{:<18} -", "measured_period");
        }
    }
    let _ = writeln!(s, "{:<18} {:.6}", "phase_difference", r.phase_difference_final);
    let _ = writeln!(s, "{:<18} {:.4}", "beat_depth", r.beat_depth);
    s
}

pub fn cmd_analyze(cfg: &RunConfig, input: &Path) -> CliResult<Outcome> {
    let (traj, _) = io::read_trajectory(input)?;
    let report = detect_regime(&traj, &ClassifyTolerances::default())?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectory");
    let path = cfg.output_dir.join(format!("{stem}_report.json"));
    io::write_json(&path, &report)?;
    Ok(Outcome { files: vec![path], summary: format_report(&report) })
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub value: f64,
    pub mu: f64,
    pub a: f64,
    pub sigma: f64,
    pub omega: f64,
    pub gamma: f64,
    pub kappa: Option<f64>,
    pub sigma_tilde: Option<f64>,
    pub in_phase_exists: bool,
    pub in_phase_stable: Option<bool>,
    pub in_phase_amplitude: Option<f64>,
    pub anti_phase_exists: bool,
    pub anti_phase_stable: Option<bool>,
    pub anti_phase_amplitude: Option<f64>,
    pub simulated_regime: Option<String>,
    pub error: Option<String>,
}

/// Options for the optional simulation at each sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSimulation {
    pub initial_conditions: Vec<f64>,
    pub t_end: f64,
    pub tol: f64,
}

/// Pendulum angles used for sweep simulations when none are configured.
pub const SWEEP_DEFAULT_THETA: (f64, f64) = (0.25, 0.3);
/// Default sweep simulation length in nominal cycles.
pub const SWEEP_DEFAULT_CYCLES: f64 = 1000.0;

pub fn sweep_point(
    model: ModelKind,
    base: &PoincareParams,
    grid: &Grid,
    index: usize,
    value: f64,
    sim: Option<&SweepSimulation>,
) -> SweepRow {
    let mut p = *base;
    grid.axis.set(&mut p, value);
    let mut row = SweepRow {
        index,
        value,
        mu: p.mu,
        a: p.a,
        sigma: p.sigma,
        omega: p.omega,
        gamma: p.gamma,
        kappa: p.kappa,
        sigma_tilde: if model == ModelKind::ThreeDof { sigma_tilde(&p).ok() } else { None },
        in_phase_exists: false,
        in_phase_stable: None,
        in_phase_amplitude: None,
        anti_phase_exists: false,
        anti_phase_stable: None,
        anti_phase_amplitude: None,
        simulated_regime: None,
        error: None,
    };
    let mut errors = Vec::new();
    match PoincareEngine::for_model(model, &p) {
        Ok(engine) => {
            for regime in [Regime::InPhase, Regime::AntiPhase] {
                let (exists, stable, amp) = match regime {
                    Regime::InPhase => {
                        (&mut row.in_phase_exists, &mut row.in_phase_stable, &mut row.in_phase_amplitude)
                    }
                    _ => (&mut row.anti_phase_exists, &mut row.anti_phase_stable, &mut row.anti_phase_amplitude),
                };
                match engine_solution(&engine, p.gamma, regime) {
                    Ok(s) => {
                        *exists = true;
                        *stable = Some(s.stable);
                        *amp = Some(s.amplitude);
                    }
                    Err(EngineMiss::Absent(_)) => {}
                    Err(EngineMiss::Failed(e)) => errors.push(format!("{}: {e}", regime.name())),
                }
            }
        }
        Err(e) => errors.push(e.to_string()),
    }
    if let Some(sim) = sim {
        let run = simulate(
            model,
            ModelParams::Poincare(p),
            2,
            &sim.initial_conditions,
            sim.t_end,
            sim.tol,
            DEFAULT_SAMPLE_INTERVAL,
        )
        .and_then(|tr| Ok(detect_regime(&tr, &ClassifyTolerances::default())?));
        match run {
            Ok(r) => row.simulated_regime = Some(r.regime.name().to_string()),
            Err(e) => errors.push(format!("simulation: {e}")),
        }
    }
    if !errors.is_empty() {
        row.error = Some(errors.join("; "));
    }
    row
}

/// Evaluates every grid point on a pool of `workers` threads (all cores when
/// `None`). Rows come back in grid order whatever the pool size.
pub fn sweep(
    model: ModelKind,
    base: &PoincareParams,
    grid: &Grid,
    sim: Option<&SweepSimulation>,
    workers: Option<usize>,
) -> CliResult<Vec<SweepRow>> {
    let values = grid.values();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build().map_err(|e| CliError::config(format!("worker pool: {e}")))?;
    Ok(pool
        .install(|| values.par_iter().enumerate().map(|(i, &v)| sweep_point(model, base, grid, i, v, sim)).collect()))
}

pub const SWEEP_COLUMNS: [&str; 17] = [
    "index",
    "value",
    "mu",
    "a",
    "sigma",
    "omega",
    "gamma",
    "kappa",
    "sigma_tilde",
    "in_phase_exists",
    "in_phase_stable",
    "in_phase_amplitude",
    "anti_phase_exists",
    "anti_phase_stable",
    "anti_phase_amplitude",
    "simulated_regime",
    "error",
];

pub fn sweep_csv(axis: &str, rows: &[SweepRow]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> =
        SWEEP_COLUMNS.iter().map(|c| if *c == "value" { format!("grid_{axis}") } else { c.to_string() }).collect();
    w.write_record(&header).expect("in-memory write");
    let f = |v: f64| format!("{v:.16e}");
    let of = |v: Option<f64>| v.map(f).unwrap_or_default();
    let ob = |v: Option<bool>| v.map(|b| b.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.index.to_string(),
            f(r.value),
            f(r.mu),
            f(r.a),
            f(r.sigma),
            f(r.omega),
            f(r.gamma),
            of(r.kappa),
            of(r.sigma_tilde),
            r.in_phase_exists.to_string(),
            ob(r.in_phase_stable),
            of(r.in_phase_amplitude),
            r.anti_phase_exists.to_string(),
            ob(r.anti_phase_stable),
            of(r.anti_phase_amplitude),
            r.simulated_regime.clone().unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn cmd_sweep(cfg: &RunConfig) -> CliResult<Outcome> {
    let grid = cfg.grid.ok_or_else(|| CliError::config("sweep needs --grid"))?;
    let base = match cfg.params {
        Some(ModelParams::Poincare(p)) => p,
        _ => return Err(CliError::config("sweep needs a small-parameter model (small-sigma, three-dof or two-mass)")),
    };
    let sim = cfg.simulate.then(|| {
        let mut x0 = cfg.initial_conditions.clone();
        if x0.iter().all(|&v| v == 0.0) {
            x0[0] = SWEEP_DEFAULT_THETA.0;
            x0[2] = SWEEP_DEFAULT_THETA.1;
        }
        SweepSimulation {
            initial_conditions: x0,
            t_end: cfg.t_end.unwrap_or(2.0 * PI * SWEEP_DEFAULT_CYCLES),
            tol: cfg.tol,
        }
    });
    let rows = sweep(cfg.model, &base, &grid, sim.as_ref(), cfg.workers)?;
    let path = cfg.output_dir.join("sweep.csv");
    io::write_atomic(&path, &sweep_csv(grid.axis.name(), &rows))?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    Ok(Outcome {
        files: vec![path],
        summary: format!("{} grid points over {}, {failed} with errors\n", rows.len(), grid.axis.name()),
    })
}

/// Trajectory and classification of one figure experiment.
pub struct FigureRun {
    pub preset: &'static FigurePreset,
    pub trajectory: Trajectory,
    pub report: SyncRegimeReport,
    pub initial_conditions: Vec<f64>,
    pub t_end: f64,
}

pub fn run_figure(id: FigureId, tol: f64, t_end: Option<f64>) -> CliResult<FigureRun> {
    let preset = figures::preset(id);
    let n = preset.params.pendulums().unwrap_or(2);
    let params = preset.params.resolve(preset.model, n)?;
    let mut x0 = vec![0.0; preset.model.state_len(n)];
    x0[0] = preset.theta1_0;
    x0[2] = preset.theta2_0;
    let t_end = t_end.unwrap_or(2.0 * PI * preset.cycles);
    let trajectory = simulate(preset.model, params, n, &x0, t_end, tol, DEFAULT_SAMPLE_INTERVAL)?;
    let report = detect_regime(&trajectory, &ClassifyTolerances::default())?;
    Ok(FigureRun { preset, trajectory, report, initial_conditions: x0, t_end })
}

pub fn cmd_reproduce(cfg: &RunConfig) -> CliResult<Outcome> {
    let id = cfg.figure_id.ok_or_else(|| CliError::config("reproduce needs --figure"))?;
    let run = run_figure(id, cfg.tol, cfg.t_end)?;
    let mut out = Outcome::default();
    let meta =
        TrajectoryMeta::new(&run.trajectory, &run.initial_conditions, run.t_end, cfg.tol, DEFAULT_SAMPLE_INTERVAL);
    let stem = id.name();
    write_trajectory(&cfg.output_dir, stem, &run.trajectory, &meta, &mut out.files)?;
    let report_path = cfg.output_dir.join(format!("{stem}_report.json"));
    io::write_json(&report_path, &run.report)?;
    let svg_path = cfg.output_dir.join(format!("{stem}.svg"));
    io::write_atomic(&svg_path, svg::render(&run.trajectory, run.preset.panel, &run.preset.title).as_bytes())?;
    out.files.push(report_path);
    out.files.push(svg_path);
    out.summary = format!("{}: {}\n{}", stem, run.preset.title, format_report(&run.report));
    Ok(out)
}
