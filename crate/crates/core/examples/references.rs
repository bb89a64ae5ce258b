//! The two reference families, their symmetry and the position-indexed maps.

use zdshape::reference::{check_symmetry, make_cosine_reference, make_scurve_reference, Trajectory};

fn main() -> zdshape::Result<()> {
    let cosine = make_cosine_reference(0.03, &[0.05, 0.008], 0.5, 0.15)?;
    let scurve = make_scurve_reference(-0.01, 0.09, 0.3, 0.5, 0.15)?;

    for (name, r) in [("cosine", &cosine), ("s-curve", &scurve)] {
        let sym = check_symmetry(r, 1e-9);
        println!(
            "{name}: x in [{:.4}, {:.4}] m, peak speed {:.3} m/s, turns at {:?} s, symmetric {}",
            r.x_min(),
            r.x_max(),
            r.peak_velocity(),
            r.turning_times(),
            sym.ok
        );
        let maps = r.phase_maps(500)?;
        println!("  {:>8} {:>10} {:>10}", "x", "rho_d", "rho_dd");
        for k in 0..=4 {
            let x = r.x_min() + r.stroke() * k as f64 / 4.0;
            println!("  {x:8.4} {:10.5} {:10.4}", maps.rho_d(x)?, maps.rho_dd(x)?);
        }
    }

    println!("t,x_cosine,x_scurve");
    for s in cosine.sample(10).iter().zip(scurve.sample(10)) {
        println!("{:.3},{:.5},{:.5}", s.0.t, s.0.x, s.1.x);
    }
    Ok(())
}
