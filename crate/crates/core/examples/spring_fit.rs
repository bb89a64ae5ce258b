//! Fit one to three sub-spring pairs to the ideal characteristic of a fixed design.

use zdshape::dynamics::MassParams;
use zdshape::mechanism::MechanismModel;
use zdshape::optimize::{bounds_for_table, fit_spring_sequence, GaConfig};
use zdshape::reference::make_cosine_reference;
use zdshape::zerodyn::{ideal_spring_curve, orbit_deviation, sigma_table, simulate_zero_dynamics, ZeroDynOptions};

fn main() -> zdshape::Result<()> {
    let model = MechanismModel::table_one();
    let pm = MassParams::new(0.1, 0.1, -0.05, 0.05);
    let r = make_cosine_reference(0.03, &[0.05, 0.008], 0.5, 0.15)?;
    let maps = r.phase_maps(1000)?;
    let xs: Vec<f64> = r.sample(1000).iter().map(|s| s.x).collect();
    let table: Vec<(f64, f64)> = sigma_table(&ideal_spring_curve(&model, &pm, &maps, 0.15, &xs)?)?.knots().collect();

    let bounds = bounds_for_table(&table, 10.0)?;
    let cfg = GaConfig {
        generations: 150,
        restarts: 2,
        seed: 11,
        ..GaConfig::default()
    };
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let fits = fit_spring_sequence(&table, &[0, 1, 2, 3], &bounds, &cfg, workers)?;

    let start = r.at(0.0);
    let opts = ZeroDynOptions {
        window: Some((-0.035, 0.11)),
        ..ZeroDynOptions::new(5e-5, 0.75)
    };
    for fit in &fits {
        let dev = simulate_zero_dynamics(&model, &pm, &fit.params, 0.15, start.x, start.xdot, &opts)
            .map(|t| orbit_deviation(&r, &t.t, &t.x, &t.xdot).relative_to(r.stroke()).orbital);
        println!("n = {}: mse {:.3e}, breakpoints {:?}, orbit deviation {:?}", fit.n, fit.mse, fit.params.breakpoints(), dev);
    }
    Ok(())
}
