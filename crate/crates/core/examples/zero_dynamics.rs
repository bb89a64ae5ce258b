//! Ideal spring for the zero-mass design, and the zero dynamics it produces.

use zdshape::dynamics::MassParams;
use zdshape::mechanism::MechanismModel;
use zdshape::reference::make_cosine_reference;
use zdshape::zerodyn::{
    center_indicator, ideal_spring_curve, orbit_deviation, sigma_table, simulate_zero_dynamics, ZeroDynOptions,
};

fn main() -> zdshape::Result<()> {
    let model = MechanismModel::table_one();
    let pm = MassParams::default();
    let r = make_cosine_reference(0.03, &[0.05, 0.008], 0.5, 0.15)?;
    let samples = r.sample(1000);
    let maps = r.phase_maps(1000)?;

    let xs: Vec<f64> = samples.iter().map(|s| s.x).collect();
    let curve = ideal_spring_curve(&model, &pm, &maps, 0.15, &xs)?;
    let sigma = sigma_table(&curve)?;
    let (lo, hi) = sigma.range();
    println!("sigma* tabulated on {} knots over theta in [{lo:.4}, {hi:.4}] rad", sigma.len());

    let center = center_indicator(&model, &pm, &maps, 0.15, &samples)?;
    println!("equilibrium x0 = {:.5} m, Omega_s = {:.2}", center.x0, center.omega_s);

    let start = r.at(0.0);
    let opts = ZeroDynOptions {
        window: Some((-0.035, 0.11)),
        check_convergence: true,
        ..ZeroDynOptions::new(5e-5, 0.75)
    };
    let traj = simulate_zero_dynamics(&model, &pm, &sigma, 0.15, start.x, start.xdot, &opts)?;
    let d = orbit_deviation(&r, &traj.t, &traj.x, &traj.xdot).relative_to(r.stroke());
    println!(
        "period {:?} s, step-halving difference {:?}, deviation {:.2e} (orbit) {:.2e} (pointwise) of stroke",
        traj.period, traj.convergence, d.orbital, d.pointwise
    );
    Ok(())
}
