//! Workspace-coordinate dynamics at one state: inertia, input map, and the
//! split of the accelerations into drift and input terms.

use nalgebra::Vector2;
use zdshape::dynamics::{joint_inertia, link_kinetic_energy, minimal_point, MassParams};
use zdshape::mechanism::MechanismModel;
use zdshape::spring::SpringParams;

fn main() -> zdshape::Result<()> {
    let model = MechanismModel::table_one();
    let pm = MassParams::new(0.1, 0.1, -0.05, 0.05);
    let spring = SpringParams::linear(1.0, 1.6);
    let chi = Vector2::new(0.04, 0.15);
    let chidot = Vector2::new(0.5, 0.0);

    let p = minimal_point(&model, &pm, &spring, &chi, &chidot)?;
    println!("M(chi) =\n{:.6}", p.m());
    println!("B = dq1/dchi = {:.4}", p.b().transpose());
    println!("spring angle {:.4} rad, torque {:.4} N m", p.frame.theta, p.spring_torque);

    let d = p.decomposition();
    println!("xdd = {:.4} + {:.4} u", d.f_x, d.g_x);
    println!("ydd = {:.4} + {:.4} u", d.f_y, d.g_y);
    let u = d.linearizing_torque()?;
    println!("u = {u:.6} N m holds ydd = 0 (check: {:.2e})", p.acceleration(u).y);

    let qd = p.frame.jacobian * chidot;
    let joint = 0.5 * qd.dot(&(joint_inertia(&model, &pm, &p.frame.q) * qd));
    let links = link_kinetic_energy(&model, &pm, &p.frame.q, &qd);
    println!("kinetic energy {:.9} (workspace) {joint:.9} (joints) {links:.9} (links)", p.kinetic_energy());
    Ok(())
}
