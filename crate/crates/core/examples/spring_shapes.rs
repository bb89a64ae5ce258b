//! Piecewise-linear characteristics built from sub-spring pairs, and the
//! interpolated table used for arbitrary characteristics.

use zdshape::spring::{SpringFn, SpringParams, SubSpringPair, TabulatedSpring};

fn main() -> zdshape::Result<()> {
    let linear = SpringParams::linear(0.8, 1.6);
    let shaped = SpringParams {
        pairs: vec![
            SubSpringPair {
                k_pos: 2.0,
                theta_pos: 1.8,
                k_neg: 1.5,
                theta_neg: 1.4,
            },
            SubSpringPair {
                k_pos: -0.5,
                theta_pos: 1.9,
                k_neg: 0.0,
                theta_neg: 1.2,
            },
        ],
        ..linear.clone()
    };
    println!("breakpoints {:?}, flat form {:?}", shaped.breakpoints(), shaped.to_flat());

    let knots: Vec<(f64, f64)> = (0..=8).map(|i| 1.2 + 0.1 * i as f64).map(|t| (t, (t - 1.6).powi(3) * 5.0)).collect();
    let table = TabulatedSpring::new(&knots)?;

    println!("{:>6} {:>9} {:>9} {:>9} {:>9}", "theta", "linear", "shaped", "table", "V_table");
    for i in 0..=16 {
        let t = 1.2 + 0.05 * i as f64;
        println!(
            "{t:6.3} {:9.4} {:9.4} {:9.4} {:9.5}",
            linear.torque(t),
            shaped.torque(t),
            table.torque(t),
            table.potential(t)
        );
    }
    Ok(())
}
