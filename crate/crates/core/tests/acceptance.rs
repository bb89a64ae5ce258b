//! Acceptance criteria for the full design workflow. Prints one PASS/FAIL
//! line per criterion and exits non-zero if any fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use zdshape::config::PipelineConfig;
use zdshape::pipeline::{check_config, run_config, RunOptions, RunOutcome};
use zdshape::reference::Trajectory;
use zdshape::zerodyn::{
    center_from_ratios, ideal_spring_curve, orbit_deviation, sigma_table, simulate_zero_dynamics, ZeroDynOptions,
};

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.toml"))
}

fn run(name: &str, out: &Path, workers: usize) -> RunOutcome {
    let (cfg, text) = PipelineConfig::load(&bundled(name)).expect("bundled config loads");
    let opts = RunOptions {
        seed: None,
        workers: Some(workers),
        out: Some(out.to_path_buf()),
    };
    run_config(cfg, &text, &opts).unwrap_or_else(|e| panic!("{name}: {e}"))
}

struct Verdicts(Vec<bool>);

impl Verdicts {
    fn report(&mut self, id: usize, pass: bool, detail: String) {
        println!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.0.push(pass);
    }
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn stage_seconds(o: &RunOutcome, stage: &str) -> f64 {
    o.timing.stages.iter().find(|(s, _)| s == stage).map(|(_, t)| *t).unwrap_or(f64::NAN)
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temp dir");
    let mut v = Verdicts(Vec::new());

    let first = run("paper-first-reference", &tmp.path().join("first"), 1);
    let second = run("paper-second-reference", &tmp.path().join("second"), 1);

    // 1: sigma* with N = 1000 reproduces the reference through the zero dynamics
    {
        let cfg = &first.report.config;
        let start = Instant::now();
        let model = cfg.mechanism.model().unwrap();
        let reference = cfg.reference.build().unwrap();
        let n = 1000;
        let maps = reference.phase_maps(n).unwrap();
        let xs: Vec<f64> = reference.sample(n).iter().map(|s| s.x).collect();
        let pm = first.report.mass.pm;
        let table = sigma_table(&ideal_spring_curve(&model, &pm, &maps, reference.height(), &xs).unwrap()).unwrap();
        let sim = &cfg.simulation;
        let opts = ZeroDynOptions {
            window: Some((sim.window[0], sim.window[1])),
            ..ZeroDynOptions::new(sim.dt, reference.period())
        };
        let s0 = reference.at(0.0);
        let tr = simulate_zero_dynamics(&model, &pm, &table, reference.height(), s0.x, s0.xdot, &opts).unwrap();
        let d = orbit_deviation(&reference, &tr.t, &tr.x, &tr.xdot).relative_to(reference.stroke());
        let secs = start.elapsed().as_secs_f64();
        v.report(
            1,
            d.pointwise < 1e-3 && secs < 10.0,
            format!("sigma* round trip max |x - r_x| = {:.3e} of stroke (limit 1e-3), orbital {:.3e}, {secs:.2} s (limit 10 s)", d.pointwise, d.orbital),
        );
    }

    // 2: mass optimization lowers the torque RMS by at least 10 % on both references
    {
        let mut pass = true;
        let mut parts = Vec::new();
        for (name, o) in [("cosine", &first), ("s-curve", &second)] {
            let m = &o.report.mass;
            pass &= m.rms < m.baseline_rms && m.reduction >= 0.10;
            let secs = stage_seconds(o, "mass");
            pass &= secs < 600.0;
            parts.push(format!("{name} rms {:.6} vs {:.6} ({:.1}% lower, {secs:.1} s)", m.rms, m.baseline_rms, 100.0 * m.reduction));
        }
        v.report(2, pass, parts.join("; "));
    }

    // 3: more sub-spring pairs never fit worse and never track worse
    {
        let r = &first.report;
        let mse: Vec<f64> = r.springs.iter().map(|s| s.mse).collect();
        let orbital: Vec<f64> = r
            .validation
            .fitted
            .iter()
            .map(|f| f.zero_dynamics.deviation.map(|d| d.orbital).unwrap_or(f64::INFINITY))
            .collect();
        let ns: Vec<usize> = r.springs.iter().map(|s| s.n).collect();
        let pass = ns == [1, 2, 3]
            && mse.windows(2).all(|w| w[1] <= w[0])
            && orbital.windows(2).all(|w| w[1] <= w[0])
            && stage_seconds(&first, "spring") < 600.0;
        v.report(
            3,
            pass,
            format!("n = {ns:?}: mse [{}], zero-dynamics orbital deviation [{}] of stroke", sci(&mse), sci(&orbital)),
        );
    }

    // 4: returned designs are centers; the linear stub has Omega_s = 1
    {
        let xs: Vec<f64> = (0..101).map(|k| 0.001 * k as f64).collect();
        let x0 = 0.0503;
        let ratios: Vec<f64> = xs.iter().map(|x| x - x0).collect();
        let stub = center_from_ratios(&xs, &ratios).map(|c| c.omega_s).unwrap_or(f64::NAN);
        let (w1, w2) = (first.report.mass.center.omega_s, second.report.mass.center.omega_s);
        v.report(
            4,
            w1 > 0.0 && w2 > 0.0 && (stub - 1.0).abs() < 1e-12,
            format!("Omega_s = {w1:.3}, {w2:.3}; stub Omega_s = {stub}"),
        );
    }

    // 5: zero dynamics are time-reversal symmetric from a turning point
    {
        let cfg = &first.report.config;
        let model = cfg.mechanism.model().unwrap();
        let reference = cfg.reference.build().unwrap();
        let n = cfg.reference.samples;
        let maps = reference.phase_maps(n).unwrap();
        let xs: Vec<f64> = reference.sample(n).iter().map(|s| s.x).collect();
        let pm = first.report.mass.pm;
        let table = sigma_table(&ideal_spring_curve(&model, &pm, &maps, reference.height(), &xs).unwrap()).unwrap();
        let s0 = reference.at(0.0);
        let dt = cfg.simulation.dt;
        let horizon = 0.5 * reference.period();
        let fwd = simulate_zero_dynamics(&model, &pm, &table, reference.height(), s0.x, 0.0, &ZeroDynOptions::new(dt, horizon)).unwrap();
        let bwd = simulate_zero_dynamics(&model, &pm, &table, reference.height(), s0.x, 0.0, &ZeroDynOptions::new(-dt, horizon)).unwrap();
        let k = fwd.len().min(bwd.len());
        let worst = (0..k)
            .map(|i| (fwd.x[i] - bwd.x[i]).abs().max((fwd.xdot[i] + bwd.xdot[i]).abs()))
            .fold(0.0, f64::max);
        v.report(
            5,
            worst < 1e-7 && k > 1000,
            format!("forward/backward mirror error {worst:.3e} over {k} steps (limit 1e-7)"),
        );
    }

    // 6: oracle identities and closed-loop invariants
    {
        let start = Instant::now();
        let mut pass = true;
        let mut parts = Vec::new();
        for o in [&first, &second] {
            let items = check_config(&o.report.config).expect("check suite runs");
            for i in items.iter().filter(|i| !i.pass) {
                parts.push(format!("{} = {:.3e}", i.name, i.value));
            }
            pass &= items.iter().all(|i| i.pass);
            let period = o.report.config.reference.period;
            for s in std::iter::once(&o.report.validation.ideal).chain(&o.report.validation.fitted) {
                let cl = &s.closed_loop;
                let periods = (cl.duration / period).max(1.0);
                let energy_ok = cl.energy_residual <= 1e-5 * cl.energy_scale * periods;
                let ok = cl.fault.is_none() && cl.max_yddot < 1e-6 && energy_ok;
                if !ok {
                    parts.push(format!("{}: max |ydd| {:.3e}, energy residual {:.3e} J", s.spring, cl.max_yddot, cl.energy_residual));
                }
                pass &= ok;
            }
        }
        let secs = start.elapsed().as_secs_f64();
        pass &= secs < 60.0;
        let ideal = &first.report.validation.ideal.closed_loop;
        parts.insert(
            0,
            format!(
                "kinematic/energy/gamma identities hold; cosine sigma* max |ydd| {:.2e}, energy residual {:.2e} of {:.3} J; {secs:.1} s",
                ideal.max_yddot, ideal.energy_residual, ideal.energy_scale
            ),
        );
        v.report(6, pass, parts.join("; "));
    }

    // 7: worker count does not change any output
    {
        let workers = zdshape::pipeline::default_workers().max(2);
        let again = run("paper-first-reference", &tmp.path().join("again"), workers);
        let mut differing = Vec::new();
        for e in first.report.manifest.iter().filter(|e| e.file != "timing.json") {
            let a = fs::read(first.out_dir.join(&e.file)).unwrap_or_default();
            let b = fs::read(again.out_dir.join(&e.file)).unwrap_or_default();
            if a.is_empty() || a != b {
                differing.push(e.file.clone());
            }
        }
        v.report(
            7,
            differing.is_empty(),
            format!("1 vs {workers} workers: {} files compared, differing {differing:?}", first.report.manifest.len() - 1),
        );
    }

    if v.0.iter().all(|p| *p) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
