//! Full two-coordinate simulation under the linearizing torque, with the
//! ideal spring, and its energy bookkeeping.

use zdshape::dynamics::MassParams;
use zdshape::mechanism::MechanismModel;
use zdshape::optimize::rms;
use zdshape::reference::make_cosine_reference;
use zdshape::sim::{energy_audit, simulate_closed_loop, ClosedLoopOptions};
use zdshape::zerodyn::{ideal_spring_curve, orbit_deviation, sigma_table};

fn main() -> zdshape::Result<()> {
    let model = MechanismModel::table_one();
    let pm = MassParams::new(0.1, 0.1, -0.05, 0.05);
    let r = make_cosine_reference(0.03, &[0.05, 0.008], 0.5, 0.15)?;
    let maps = r.phase_maps(1000)?;
    let xs: Vec<f64> = r.sample(1000).iter().map(|s| s.x).collect();
    let sigma = sigma_table(&ideal_spring_curve(&model, &pm, &maps, 0.15, &xs)?)?;

    let start = r.at(0.0);
    let opts = ClosedLoopOptions::new(5e-5, 0.5, 0.15);
    let tr = simulate_closed_loop(&model, &pm, &sigma, [start.x, start.xdot, 0.15, 0.0], &opts)?;
    if let Some(f) = &tr.fault {
        println!("stopped early: {f:?}");
    }

    let drift = tr.samples.iter().map(|s| (s.y - 0.15).abs()).fold(0.0, f64::max);
    let e0 = tr.samples[0].e_kin + tr.samples[0].e_pot;
    let d = orbit_deviation(&r, &tr.column(|s| s.t), &tr.column(|s| s.x), &tr.column(|s| s.xdot)).relative_to(r.stroke());
    println!("{} steps, height drift {drift:.2e} m", tr.samples.len() - 1);
    println!("energy balance residual {:.2e} J of {e0:.4} J", energy_audit(&tr, &model)?);
    println!("input rms {:.5} N m", rms(&tr.column(|s| s.u)[..tr.samples.len() - 1]));
    println!("orbit deviation {:.2e} of stroke", d.orbital);

    println!("t,x,u");
    for s in tr.samples.iter().step_by(1000) {
        println!("{:.3},{:.5},{:.5}", s.t, s.x, s.u);
    }
    Ok(())
}
