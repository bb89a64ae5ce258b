//! Mass-distribution search on a reduced budget. Pass `full` for the default budget.

use zdshape::dynamics::{MassBounds, MassParams};
use zdshape::mechanism::MechanismModel;
use zdshape::optimize::{optimize_mass, GaConfig, MassProblem};
use zdshape::reference::make_cosine_reference;

fn main() -> zdshape::Result<()> {
    let full = std::env::args().any(|a| a == "full");
    let model = MechanismModel::table_one();
    let r = make_cosine_reference(0.03, &[0.05, 0.008], 0.5, 0.15)?;
    let problem = MassProblem::new(&model, &r, if full { 1000 } else { 250 })?;

    let corner = problem.evaluate(&MassParams::new(0.1, 0.1, -0.05, 0.05))?;
    println!("one box corner: rms {:.5} N m, centered {}", corner.rms, corner.is_feasible());

    let cfg = if full {
        GaConfig::default()
    } else {
        GaConfig {
            population: 60,
            generations: 40,
            restarts: 2,
            ..GaConfig::default()
        }
    };
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let result = optimize_mass(&problem, &MassBounds::default(), &cfg.with_seed(3), workers)?;
    println!(
        "best {:?}\nrms {:.5} N m vs {:.5} N m at zero added mass ({:.1}% lower), Omega_s {:.1}, {} evaluations",
        result.pm,
        result.rms,
        result.baseline_rms,
        100.0 * result.reduction(),
        result.center.omega_s,
        result.evaluations
    );
    let last = result.telemetry.last().expect("telemetry");
    println!("final generation mean {:.5}", last.mean);
    Ok(())
}
