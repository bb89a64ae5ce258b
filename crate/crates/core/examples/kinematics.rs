//! Loop closure along a reference sweep: joint angles, round trip, Jacobian.

use nalgebra::Vector2;
use zdshape::mechanism::MechanismModel;
use zdshape::reference::make_cosine_reference;

fn main() -> zdshape::Result<()> {
    let model = MechanismModel::table_one();
    let reference = make_cosine_reference(0.03, &[0.05, 0.008], 0.5, 0.15)?;

    let mut q = model.configuration(&Vector2::new(reference.x_max(), 0.15))?;
    let mut worst: f64 = 0.0;
    println!("{:>8} {:>9} {:>9} {:>9} {:>9} {:>9}", "x", "q1", "q2", "q3", "q4", "theta");
    for (i, s) in reference.sample(200).iter().enumerate() {
        let chi = Vector2::new(s.x, 0.15);
        // warm start from the previous sample keeps the branch
        q = model.solve_configuration(&chi, &q)?;
        worst = worst.max((model.direct_kinematics(&q) - chi).norm());
        if i % 25 == 0 {
            let a = q.0;
            println!(
                "{:8.4} {:9.4} {:9.4} {:9.4} {:9.4} {:9.4}",
                s.x,
                a[0],
                a[1],
                a[2],
                a[3],
                model.spring_angle(&q)
            );
        }
    }
    println!("worst round-trip error {worst:.2e} m");

    let jac = model.coordinate_jacobian(&q)?;
    println!("dq/dchi at x = {:.4}:\n{jac:.4}", model.direct_kinematics(&q).x);
    Ok(())
}
