//! The two-step design run and the validation simulations, plus the
//! artifact-driven entry points used by the command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, SimulationConfig};
use crate::dynamics::{joint_inertia, link_kinetic_energy, minimal_point, MassParams, MinimalFrame};
use crate::error::{Error, Result};
use crate::mechanism::MechanismModel;
use crate::optimize::{bounds_for_table, fit_spring_sequence, optimize_mass, rms, GaConfig, GenerationStats, MassProblem, SpringFitResult};
use crate::reference::{check_symmetry, ReferenceTrajectory, Trajectory};
use crate::report::{read_csv_columns, read_json, sha256_hex, ManifestEntry, OutputDir};
use crate::sim::{energy_audit, simulate_closed_loop, ClosedLoopOptions, ClosedLoopTrajectory, Fault, InputLaw};
use crate::spring::{SpringBounds, SpringFn, SpringParams, TabulatedSpring};
use crate::zerodyn::{
    center_indicator, ideal_spring_curve, orbit_deviation, sigma_table, simulate_zero_dynamics, slice_terms, CenterReport, OrbitDeviation,
    SigmaSample, ZeroDynOptions, ZeroDynTrajectory, TABLE_MERGE_TOL,
};

/// Pipeline stage, used to tag failures with an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Reference,
    Mass,
    Spring,
    Simulation,
    Output,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Reference => 3,
            Stage::Mass => 4,
            Stage::Spring => 5,
            Stage::Simulation => 6,
            Stage::Output => 7,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Reference => "reference",
            Stage::Mass => "mass",
            Stage::Spring => "spring",
            Stage::Simulation => "simulation",
            Stage::Output => "output",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{stage} stage: {error}")]
pub struct StageError {
    pub stage: Stage,
    pub error: Error,
}

impl StageError {
    /// Tag `error` with `stage`; I/O and configuration errors keep their own stage.
    pub fn new(stage: Stage, error: Error) -> Self {
        let stage = match error {
            Error::Io(_) => Stage::Output,
            Error::Config(_) => Stage::Config,
            _ => stage,
        };
        Self { stage, error }
    }

    pub fn exit_code(&self) -> i32 {
        self.stage.exit_code()
    }
}

trait StageResult<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> StageResult<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError::new(stage, error))
    }
}

pub type StageOutcome<T> = std::result::Result<T, StageError>;

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunOptions {
    pub fn workers(&self) -> usize {
        self.workers.unwrap_or_else(default_workers).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub x_min: f64,
    pub x_max: f64,
    pub stroke: f64,
    pub period: f64,
    pub height: f64,
    pub peak_velocity: f64,
    pub samples: usize,
}

impl ReferenceSummary {
    fn of(r: &ReferenceTrajectory, samples: usize) -> Self {
        Self {
            x_min: r.x_min(),
            x_max: r.x_max(),
            stroke: r.stroke(),
            period: r.period(),
            height: r.height(),
            peak_velocity: r.peak_velocity(),
            samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassSummary {
    pub pm: MassParams,
    /// N m
    pub rms: f64,
    pub baseline_rms: f64,
    /// `1 - rms / baseline_rms`.
    pub reduction: f64,
    pub center: CenterReport,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpringSummary {
    pub n: usize,
    /// `[k0, theta0, (k_i+, theta_i+, k_i-, theta_i-)...]`.
    pub params: Vec<f64>,
    pub mse: f64,
    pub restart_mse: Vec<f64>,
    pub bounds: SpringBounds,
}

impl SpringSummary {
    fn of(fit: &SpringFitResult, bounds: &SpringBounds) -> Self {
        Self {
            n: fit.n,
            params: fit.params.to_flat(),
            mse: fit.mse,
            restart_mse: fit.restart_mse.clone(),
            bounds: *bounds,
        }
    }

    pub fn spring(&self) -> Result<SpringParams> {
        SpringParams::from_flat(&self.params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroDynMetrics {
    /// Relative to the stroke; absent when the run failed.
    pub deviation: Option<OrbitDeviation>,
    /// s
    pub period: Option<f64>,
    pub fault: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopMetrics {
    /// Relative to the stroke.
    pub deviation: OrbitDeviation,
    /// `max |y - height|` (m).
    pub height_drift: f64,
    /// Max finite-difference `|ydd|` (m/s^2).
    pub max_yddot: f64,
    /// Max power-balance residual (J).
    pub energy_residual: f64,
    /// `|E(0)|` (J).
    pub energy_scale: f64,
    /// RMS of the logged input over the first period (N m).
    pub u_rms: f64,
    pub fault: Option<Fault>,
    pub stabilized: bool,
    /// Simulated time (s).
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpringValidation {
    /// `sigma*` or `n=<pairs>`.
    pub spring: String,
    pub zero_dynamics: ZeroDynMetrics,
    pub closed_loop: ClosedLoopMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Validation {
    pub ideal: SpringValidation,
    pub fitted: Vec<SpringValidation>,
    /// `|u_rms - rms| / rms` for the ideal spring against the optimizer's value.
    pub rms_mismatch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    /// SHA-256 of the configuration file as read.
    pub config_sha256: String,
    /// Parsed configuration with the effective seed.
    pub config: PipelineConfig,
    pub reference: ReferenceSummary,
    pub mass: MassSummary,
    pub springs: Vec<SpringSummary>,
    pub validation: Validation,
    pub manifest: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stages: Vec<(String, f64)>,
    pub total: f64,
    pub workers: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub timing: Timing,
    pub out_dir: PathBuf,
}

struct Clock {
    start: Instant,
    last: Instant,
    timing: Timing,
}

impl Clock {
    fn new(workers: usize) -> Self {
        let now = Instant::now();
        Self {
            start: now,
            last: now,
            timing: Timing {
                workers,
                ..Timing::default()
            },
        }
    }

    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        let secs = (now - self.last).as_secs_f64();
        log::info!("{stage}: {secs:.2} s");
        self.timing.stages.push((stage.to_string(), secs));
        self.last = now;
    }

    fn finish(mut self) -> Timing {
        self.timing.total = self.start.elapsed().as_secs_f64();
        self.timing
    }
}

const TRAJECTORY_COLUMNS: [&str; 8] = ["t", "x", "xdot", "y", "ydot", "u", "E_kin", "E_pot"];

fn write_closed_loop(out: &mut OutputDir, name: &str, what: &str, tr: &ClosedLoopTrajectory) -> Result<()> {
    let rows = tr.samples.iter().map(|s| [s.t, s.x, s.xdot, s.y, s.ydot, s.u, s.e_kin, s.e_pot]);
    out.csv(name, &format!("closed-loop run, {what}"), &TRAJECTORY_COLUMNS, rows)
}

fn write_zero_dynamics(out: &mut OutputDir, name: &str, what: &str, tr: &ZeroDynTrajectory) -> Result<()> {
    let rows = (0..tr.len()).map(|k| [tr.t[k], tr.x[k], tr.xdot[k]]);
    out.csv(name, &format!("zero-dynamics run, {what}"), &["t", "x", "xdot"], rows)
}

fn write_telemetry(out: &mut OutputDir, name: &str, what: &str, telemetry: &[GenerationStats]) -> Result<()> {
    let rows = telemetry.iter().map(|g| [g.restart as f64, g.generation as f64, g.best, g.mean]);
    out.csv(name, &format!("GA telemetry, {what}"), &["restart", "generation", "best", "mean"], rows)
}

fn write_fit(out: &mut OutputDir, fit: &SpringFitResult, table: &[(f64, f64)]) -> Result<()> {
    let rows = table.iter().zip(&fit.residuals).map(|((t, s), r)| [*t, *s, s + r, *r]);
    out.csv(
        &format!("spring_n{}.csv", fit.n),
        &format!("fitted characteristic with {} pairs against sigma*", fit.n),
        &["theta", "sigma", "fitted", "residual"],
        rows,
    )
}

fn closed_loop_metrics(model: &MechanismModel, reference: &ReferenceTrajectory, sim: &SimulationConfig, tr: &ClosedLoopTrajectory) -> Result<ClosedLoopMetrics> {
    let stroke = reference.stroke();
    let height = reference.height();
    let t = tr.column(|s| s.t);
    let deviation = orbit_deviation(reference, &t, &tr.column(|s| s.x), &tr.column(|s| s.xdot)).relative_to(stroke);
    let height_drift = tr.samples.iter().map(|s| (s.y - height).abs()).fold(0.0, f64::max);
    let max_yddot = tr
        .samples
        .windows(3)
        .map(|w| ((w[2].ydot - w[0].ydot) / (w[2].t - w[0].t)).abs())
        .fold(0.0, f64::max);
    let period = reference.period();
    let first: Vec<f64> = tr.samples.iter().filter(|s| s.t < period - 0.5 * sim.dt).map(|s| s.u).collect();
    let e0 = tr.samples.first().map(|s| s.e_kin + s.e_pot).unwrap_or(0.0);
    Ok(ClosedLoopMetrics {
        deviation,
        height_drift,
        max_yddot,
        energy_residual: energy_audit(tr, model)?,
        energy_scale: e0.abs(),
        u_rms: rms(&first),
        fault: tr.fault.clone(),
        stabilized: tr.stabilized,
        duration: tr.samples.last().map(|s| s.t).unwrap_or(0.0),
    })
}

/// Zero-dynamics and closed-loop runs from `(r_x(0), rdot_x(0))` with one spring.
pub fn validate_spring(
    model: &MechanismModel,
    pm: &MassParams,
    reference: &ReferenceTrajectory,
    spring: &dyn SpringFn,
    sim: &SimulationConfig,
) -> Result<(ZeroDynMetrics, Option<ZeroDynTrajectory>, ClosedLoopMetrics, ClosedLoopTrajectory)> {
    let start = reference.at(0.0);
    let height = reference.height();
    let zd_opts = ZeroDynOptions {
        window: Some((sim.window[0], sim.window[1])),
        ..ZeroDynOptions::new(sim.dt, sim.horizon)
    };
    let (zd, zd_traj) = match simulate_zero_dynamics(model, pm, spring, height, start.x, start.xdot, &zd_opts) {
        Ok(tr) => {
            let d = orbit_deviation(reference, &tr.t, &tr.x, &tr.xdot).relative_to(reference.stroke());
            (
                ZeroDynMetrics {
                    deviation: Some(d),
                    period: tr.period,
                    fault: None,
                },
                Some(tr),
            )
        }
        Err(e) => (
            ZeroDynMetrics {
                deviation: None,
                period: None,
                fault: Some(e.to_string()),
            },
            None,
        ),
    };
    let cl_opts = ClosedLoopOptions {
        law: InputLaw::Linearizing { kp: sim.kp, kd: sim.kd },
        window: Some((sim.window[0], sim.window[1], height - 0.05, height + 0.05)),
        ..ClosedLoopOptions::new(sim.dt, sim.horizon, height)
    };
    let cl_traj = simulate_closed_loop(model, pm, spring, [start.x, start.xdot, height, 0.0], &cl_opts)?;
    let cl = closed_loop_metrics(model, reference, sim, &cl_traj)?;
    Ok((zd, zd_traj, cl, cl_traj))
}

/// Validation runs for the ideal spring and every fitted spring. Trajectories
/// are written to `out` when given.
#[allow(clippy::too_many_arguments)]
pub fn validate_design(
    model: &MechanismModel,
    pm: &MassParams,
    reference: &ReferenceTrajectory,
    ideal: &TabulatedSpring,
    fits: &[SpringParams],
    sim: &SimulationConfig,
    optimizer_rms: f64,
    mut out: Option<&mut OutputDir>,
) -> Result<Validation> {
    let mut run = |label: String, file: &str, spring: &dyn SpringFn| -> Result<SpringValidation> {
        let (zd, zd_traj, cl, cl_traj) = validate_spring(model, pm, reference, spring, sim)?;
        if let Some(out) = out.as_deref_mut() {
            if let Some(tr) = &zd_traj {
                write_zero_dynamics(out, &format!("zd_{file}.csv"), &label, tr)?;
            }
            write_closed_loop(out, &format!("cl_{file}.csv"), &label, &cl_traj)?;
        }
        log::info!("validated {label}: zero dynamics {:?}, closed loop {:?}", zd.deviation, cl.deviation);
        Ok(SpringValidation {
            spring: label,
            zero_dynamics: zd,
            closed_loop: cl,
        })
    };
    let ideal_v = run("sigma*".into(), "sigma", ideal)?;
    let mut fitted = Vec::with_capacity(fits.len());
    for p in fits {
        fitted.push(run(format!("n={}", p.n()), &format!("n{}", p.n()), p)?);
    }
    let rms_mismatch = (ideal_v.closed_loop.u_rms - optimizer_rms).abs() / optimizer_rms;
    Ok(Validation {
        ideal: ideal_v,
        fitted,
        rms_mismatch,
    })
}

/// Load a configuration file and run the whole pipeline.
pub fn run_pipeline(path: &Path, opts: &RunOptions) -> StageOutcome<RunOutcome> {
    let (cfg, text) = PipelineConfig::load(path).at(Stage::Config)?;
    run_config(cfg, &text, opts)
}

/// Run the pipeline on a parsed configuration; `text` is the source hashed into the report.
pub fn run_config(mut cfg: PipelineConfig, text: &str, opts: &RunOptions) -> StageOutcome<RunOutcome> {
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let out_dir = opts.out.clone().unwrap_or_else(|| cfg.out_dir());
    cfg.out = None;
    let workers = opts.workers();
    let mut clock = Clock::new(workers);
    let model = cfg.mechanism.model().at(Stage::Config)?;
    let mut out = OutputDir::create(&out_dir).at(Stage::Output)?;

    let reference = cfg.reference.build().at(Stage::Reference)?;
    let n = cfg.reference.samples;
    let problem = MassProblem::new(&model, &reference, n).at(Stage::Reference)?;
    out.csv(
        "reference.csv",
        "reference samples",
        &["t", "x", "xdot", "xddot"],
        problem.samples.iter().map(|s| [s.t, s.x, s.xdot, s.xddot]),
    )
    .at(Stage::Output)?;
    clock.lap("reference");

    let mass = optimize_mass(&problem, &cfg.mass_bounds, &cfg.mass_ga(), workers).at(Stage::Mass)?;
    let baseline = problem.evaluate_direct(&MassParams::default()).at(Stage::Mass)?;
    let optimized = problem.evaluate_direct(&mass.pm).at(Stage::Mass)?;
    log::info!(
        "mass design {:?}: rms {:.6} vs baseline {:.6} ({:.1}% lower)",
        mass.pm,
        mass.rms,
        mass.baseline_rms,
        100.0 * mass.reduction()
    );
    let nu_rows = problem
        .samples
        .iter()
        .zip(baseline.nu.iter().zip(&optimized.nu))
        .map(|(s, (b, o))| [s.t, s.x, s.xdot, *b, *o]);
    out.csv("nu.csv", "linearizing torque along the reference", &["t", "x", "xdot", "nu_baseline", "nu_optimized"], nu_rows)
        .at(Stage::Output)?;
    write_sigma_curve(&mut out, &mass.sigma).at(Stage::Output)?;
    write_telemetry(&mut out, "mass_telemetry.csv", "mass distribution", &mass.telemetry).at(Stage::Output)?;
    clock.lap("mass");

    let table = sigma_table(&mass.sigma).at(Stage::Mass)?;
    let knots: Vec<(f64, f64)> = table.knots().collect();
    out.csv("sigma_table.csv", "sigma* sorted by theta", &["theta", "sigma"], knots.iter().map(|k| [k.0, k.1]))
        .at(Stage::Output)?;
    let bounds = bounds_for_table(&knots, cfg.spring.k_max).at(Stage::Spring)?;
    let fits = fit_spring_sequence(&knots, &cfg.spring.n, &bounds, &cfg.spring_ga(), workers).at(Stage::Spring)?;
    for fit in &fits {
        log::info!("n = {}: mse {:.3e}", fit.n, fit.mse);
        write_fit(&mut out, fit, &knots).at(Stage::Output)?;
        write_telemetry(&mut out, &format!("spring_n{}_telemetry.csv", fit.n), &format!("spring fit n = {}", fit.n), &fit.telemetry)
            .at(Stage::Output)?;
    }
    clock.lap("spring");

    let params: Vec<SpringParams> = fits.iter().map(|f| f.params.clone()).collect();
    let validation = validate_design(&model, &mass.pm, &reference, &table, &params, &cfg.simulation, mass.rms, Some(&mut out)).at(Stage::Simulation)?;
    clock.lap("simulation");

    let echo = toml::to_string(&cfg).map_err(|e| Error::Io(e.to_string())).at(Stage::Output)?;
    out.text("config.toml", "configuration echo with the effective seed", &echo).at(Stage::Output)?;
    let mut report = RunReport {
        seed: cfg.seed,
        config_sha256: sha256_hex(text.as_bytes()),
        config: cfg,
        reference: ReferenceSummary::of(&reference, n),
        mass: MassSummary {
            pm: mass.pm,
            rms: mass.rms,
            baseline_rms: mass.baseline_rms,
            reduction: mass.reduction(),
            center: mass.center,
            evaluations: mass.evaluations,
        },
        springs: fits.iter().map(|f| SpringSummary::of(f, &bounds)).collect(),
        validation,
        manifest: Vec::new(),
    };
    report.manifest = out.manifest().to_vec();
    report.manifest.push(ManifestEntry {
        file: "report.json".into(),
        description: "run report".into(),
        columns: Vec::new(),
    });
    report.manifest.push(ManifestEntry {
        file: "timing.json".into(),
        description: "wall-clock seconds per stage".into(),
        columns: Vec::new(),
    });
    out.json("report.json", "run report", &report).at(Stage::Output)?;
    let timing = clock.finish();
    out.json("timing.json", "wall-clock seconds per stage", &timing).at(Stage::Output)?;
    Ok(RunOutcome { report, timing, out_dir })
}

fn write_sigma_curve(out: &mut OutputDir, curve: &[SigmaSample]) -> Result<()> {
    out.csv(
        "sigma.csv",
        "ideal spring at the reference samples, in sample order",
        &["x", "theta", "sigma", "gamma_hat", "zeta_s", "zeta_u"],
        curve.iter().map(|s| [s.x, s.theta, s.sigma, s.gamma_hat, s.zeta_s, s.zeta_u]),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub report_sha256: String,
    pub validation: Validation,
}

/// Rerun the validation simulations for the design stored in a run report.
pub fn simulate_report(report_path: &Path, opts: &RunOptions) -> StageOutcome<(SimulateReport, PathBuf)> {
    let text = std::fs::read_to_string(report_path)
        .map_err(|e| Error::Io(format!("{}: {e}", report_path.display())))
        .at(Stage::Output)?;
    let report: RunReport = read_json(report_path).at(Stage::Output)?;
    let cfg = report.config.clone();
    cfg.validate().at(Stage::Config)?;
    let model = cfg.mechanism.model().at(Stage::Config)?;
    let reference = cfg.reference.build().at(Stage::Reference)?;
    let n = cfg.reference.samples;
    let maps = reference.phase_maps(n).at(Stage::Reference)?;
    let xs: Vec<f64> = reference.sample(n).iter().map(|s| s.x).collect();
    let curve = ideal_spring_curve(&model, &report.mass.pm, &maps, reference.height(), &xs).at(Stage::Mass)?;
    let table = sigma_table(&curve).at(Stage::Mass)?;
    let fits = report.springs.iter().map(|s| s.spring()).collect::<Result<Vec<_>>>().at(Stage::Spring)?;
    let out_dir = opts
        .out
        .clone()
        .unwrap_or_else(|| report_path.parent().unwrap_or(Path::new(".")).join("simulate"));
    let mut out = OutputDir::create(&out_dir).at(Stage::Output)?;
    let validation = validate_design(&model, &report.mass.pm, &reference, &table, &fits, &cfg.simulation, report.mass.rms, Some(&mut out))
        .at(Stage::Simulation)?;
    let sim = SimulateReport {
        report_sha256: sha256_hex(text.as_bytes()),
        validation,
    };
    out.json("simulate.json", "validation metrics", &sim).at(Stage::Output)?;
    Ok((sim, out_dir))
}

/// Read `(theta, sigma)` from a CSV with those column names.
pub fn read_sigma_table(path: &Path) -> Result<Vec<(f64, f64)>> {
    let cols = read_csv_columns(path, &["theta", "sigma"])?;
    let pts: Vec<(f64, f64)> = cols[0].iter().copied().zip(cols[1].iter().copied()).collect();
    let table = TabulatedSpring::from_unsorted(&pts, TABLE_MERGE_TOL)?;
    Ok(table.knots().collect())
}

/// Step two on its own: fit every `n` to a tabulated characteristic.
pub fn fit_spring_table(
    table_path: &Path,
    ns: &[usize],
    k_max: f64,
    ga: &GaConfig,
    workers: usize,
    out: Option<&Path>,
) -> StageOutcome<Vec<SpringSummary>> {
    let knots = read_sigma_table(table_path).at(Stage::Spring)?;
    ga.validate().at(Stage::Config)?;
    let bounds = bounds_for_table(&knots, k_max).at(Stage::Spring)?;
    let fits = fit_spring_sequence(&knots, ns, &bounds, ga, workers).at(Stage::Spring)?;
    let summaries: Vec<SpringSummary> = fits.iter().map(|f| SpringSummary::of(f, &bounds)).collect();
    if let Some(dir) = out {
        let mut out = OutputDir::create(dir).at(Stage::Output)?;
        for fit in &fits {
            write_fit(&mut out, fit, &knots).at(Stage::Output)?;
        }
        out.json("fit.json", "spring fits", &summaries).at(Stage::Output)?;
    }
    Ok(summaries)
}

/// One invariant evaluated by [`check_config`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckItem {
    fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }

    fn at_least(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            pass: value >= tolerance,
        }
    }
}

fn box_corners(cfg: &PipelineConfig) -> Vec<MassParams> {
    let (lo, hi) = (cfg.mass_bounds.lower(), cfg.mass_bounds.upper());
    (0..16)
        .map(|bits: usize| {
            let v: Vec<f64> = (0..4).map(|i| if bits >> i & 1 == 1 { hi[i] } else { lo[i] }).collect();
            MassParams::from_slice(&v)
        })
        .collect()
}

/// Invariant suite over the model and reference of a configuration.
pub fn check_config(cfg: &PipelineConfig) -> StageOutcome<Vec<CheckItem>> {
    let model = cfg.mechanism.model().at(Stage::Config)?;
    let reference = cfg.reference.build().at(Stage::Reference)?;
    let samples = reference.sample(cfg.reference.samples);
    let height = reference.height();
    let mut items = Vec::new();

    let sym = check_symmetry(&reference, 1e-9);
    items.push(CheckItem::at_most(
        "reference time-reversal symmetry",
        sym.position_violation.max(sym.velocity_violation),
        1e-9,
    ));
    let window = cfg.simulation.window;
    items.push(CheckItem::at_least(
        "simulation window covers the reference",
        (reference.x_min() - window[0]).min(window[1] - reference.x_max()),
        0.0,
    ));

    let mut q = model.configuration(&Vector2::new(samples[0].x, height)).at(Stage::Reference)?;
    let q_start = q;
    let mut round_trip: f64 = 0.0;
    let mut jac_err: f64 = 0.0;
    let mut ke_err: f64 = 0.0;
    let mut gamma_err: f64 = 0.0;
    let mut min_gain = f64::INFINITY;
    let mut min_alpha = f64::INFINITY;
    let probe = SpringParams::linear(1.0, model.spring_angle(&q));
    let pm_mid = MassParams::from_slice(
        &cfg.mass_bounds
            .lower()
            .iter()
            .zip(cfg.mass_bounds.upper())
            .map(|(a, b)| 0.5 * (a + b))
            .collect::<Vec<_>>(),
    );
    for (i, s) in samples.iter().enumerate() {
        let chi = Vector2::new(s.x, height);
        q = model.solve_configuration(&chi, &q).at(Stage::Reference)?;
        round_trip = round_trip.max((model.direct_kinematics(&q) - chi).norm());
        if i % 25 != 0 {
            continue;
        }
        let jac = model.coordinate_jacobian(&q).at(Stage::Reference)?;
        let h = 1e-6;
        for (c, e) in [Vector2::new(h, 0.0), Vector2::new(0.0, h)].iter().enumerate() {
            let qp = model.solve_configuration(&(chi + e), &q).at(Stage::Reference)?;
            let qm = model.solve_configuration(&(chi - e), &q).at(Stage::Reference)?;
            let fd = (qp.0 - qm.0) / (2.0 * h);
            jac_err = jac_err.max((fd - jac.column(c)).norm() / jac.column(c).norm());
        }
        let chidot = Vector2::new(s.xdot, 0.3);
        let point = minimal_point(&model, &pm_mid, &probe, &chi, &chidot).at(Stage::Reference)?;
        let qd: Vector4<f64> = point.frame.jacobian * chidot;
        let oracle = link_kinetic_energy(&model, &pm_mid, &point.frame.q, &qd);
        ke_err = ke_err.max((point.kinetic_energy() - oracle).abs() / oracle);
        let joint = 0.5 * qd.dot(&(joint_inertia(&model, &pm_mid, &point.frame.q) * qd));
        ke_err = ke_err.max((joint - oracle).abs() / oracle);
        let terms = slice_terms(&model, &pm_mid, height, s.x).at(Stage::Reference)?;
        let frame = MinimalFrame::build(&model, &pm_mid, &chi).at(Stage::Reference)?;
        let g = frame.potential_gradient(probe.torque(frame.theta));
        let direct = frame.b.y * g.x - frame.b.x * g.y;
        let split = terms.with_spring(&probe).gamma;
        gamma_err = gamma_err.max((direct - split).abs() / direct.abs().max(1e-12));
        min_gain = min_gain.min(point.decomposition().g_y.abs());
        min_alpha = min_alpha.min(terms.alpha.abs());
    }
    let q_end = model.solve_configuration(&Vector2::new(reference.at(reference.period()).x, height), &q).at(Stage::Reference)?;
    items.push(CheckItem::at_most("forward/inverse kinematics round trip (m)", round_trip, 1e-9));
    items.push(CheckItem::at_most("configuration returns after one period (rad)", (q_end.0 - q_start.0).amax(), 1e-8));
    items.push(CheckItem::at_most("coordinate Jacobian vs finite differences (rel)", jac_err, 1e-6));
    items.push(CheckItem::at_most("kinetic-energy projection identity (rel)", ke_err, 1e-10));
    items.push(CheckItem::at_most("gamma split identity (rel)", gamma_err, 1e-10));
    items.push(CheckItem::at_least("input gain |g_y| along the reference", min_gain, crate::dynamics::INPUT_GAIN_EPS));
    items.push(CheckItem::at_least("|alpha| along the reference", min_alpha, crate::zerodyn::ALPHA_EPS));

    let mut min_det = f64::INFINITY;
    for pm in box_corners(cfg) {
        for s in samples.iter().step_by(50) {
            let f = MinimalFrame::build(&model, &pm, &Vector2::new(s.x, height)).at(Stage::Reference)?;
            min_det = min_det.min(f.m.determinant().min(f.m[(0, 0)]));
        }
    }
    items.push(CheckItem::at_least("inertia positive definite over the mass box", min_det, f64::MIN_POSITIVE));

    let maps = reference.phase_maps(cfg.reference.samples).at(Stage::Reference)?;
    let omega = center_indicator(&model, &MassParams::default(), &maps, height, &samples)
        .map(|c| c.omega_s)
        .unwrap_or(f64::NEG_INFINITY);
    items.push(CheckItem::at_least("zero-mass design has a center (Omega_s)", omega, f64::MIN_POSITIVE));
    Ok(items)
}
