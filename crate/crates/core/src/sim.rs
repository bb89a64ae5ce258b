//! Closed-loop simulation of the minimal-form dynamics in workspace
//! coordinates, and an energy audit of the result.

use nalgebra::{Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::dynamics::{gravity_potential, MassParams, MinimalFormPoint, MinimalFrame};
use crate::error::{Error, Result};
use crate::mechanism::{JointConfig, MechanismModel};
use crate::spring::SpringFn;

/// Input applied at the actuated joint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum InputLaw {
    /// `u = -f_y/g_y + v/g_y` with `v = -kp (y - y_ref) - kd ydot`.
    Linearizing { kp: f64, kd: f64 },
    /// Free motion.
    Zero,
    Constant(f64),
}

impl InputLaw {
    /// Pure linearizing torque, no height correction.
    pub fn exact() -> Self {
        InputLaw::Linearizing { kp: 0.0, kd: 0.0 }
    }

    /// Nonzero height-correction gains.
    pub fn is_stabilized(&self) -> bool {
        matches!(self, InputLaw::Linearizing { kp, kd } if *kp != 0.0 || *kd != 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopOptions {
    pub dt: f64,
    pub horizon: f64,
    pub law: InputLaw,
    /// Height held by the linearizing law.
    pub y_ref: f64,
    /// `(x_lo, x_hi, y_lo, y_hi)`; leaving it ends the run with a fault.
    pub window: Option<(f64, f64, f64, f64)>,
}

impl ClosedLoopOptions {
    pub fn new(dt: f64, horizon: f64, y_ref: f64) -> Self {
        Self {
            dt,
            horizon,
            law: InputLaw::exact(),
            y_ref,
            window: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedLoopSample {
    pub t: f64,
    pub x: f64,
    pub xdot: f64,
    pub y: f64,
    pub ydot: f64,
    pub u: f64,
    pub e_kin: f64,
    /// Gravity plus spring potential.
    pub e_pot: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fault {
    pub t: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedLoopTrajectory {
    pub samples: Vec<ClosedLoopSample>,
    /// Set when the run ended early.
    pub fault: Option<Fault>,
    /// Height correction was active.
    pub stabilized: bool,
}

impl ClosedLoopTrajectory {
    pub fn column(&self, f: impl Fn(&ClosedLoopSample) -> f64) -> Vec<f64> {
        self.samples.iter().map(f).collect()
    }
}

/// Linearizing torque `-f_y / g_y` at a joint state on the closed chain.
pub fn linearizing_input(
    model: &MechanismModel,
    pm: &MassParams,
    spring: &dyn SpringFn,
    q: &JointConfig,
    qdot: &Vector4<f64>,
) -> Result<f64> {
    let chi = model.direct_kinematics(q);
    let chidot = model.point_jacobian(q, 1, model.lengths[1]) * qdot;
    let frame = MinimalFrame::build_from(model, pm, &chi, q)?;
    MinimalFormPoint::from_frame(frame, spring, &chidot)?
        .decomposition()
        .linearizing_torque()
}

struct Plant<'a> {
    model: &'a MechanismModel,
    pm: &'a MassParams,
    spring: &'a dyn SpringFn,
    opts: &'a ClosedLoopOptions,
}

/// State `(x, xdot, y, ydot)`.
type State = Vector4<f64>;

struct Evaluated {
    deriv: State,
    u: f64,
    point: MinimalFormPoint,
}

impl Plant<'_> {
    fn evaluate(&self, s: &State, guess: &JointConfig) -> Result<Evaluated> {
        let chi = Vector2::new(s[0], s[2]);
        let q = self.model.solve_configuration(&chi, guess)?;
        let frame = MinimalFrame::build_from(self.model, self.pm, &chi, &q)?;
        let point = MinimalFormPoint::from_frame(frame, self.spring, &Vector2::new(s[1], s[3]))?;
        let dec = point.decomposition();
        let u = match self.opts.law {
            InputLaw::Linearizing { kp, kd } => {
                let v = -kp * (s[2] - self.opts.y_ref) - kd * s[3];
                dec.linearizing_torque()? + v / dec.g_y
            }
            InputLaw::Zero => 0.0,
            InputLaw::Constant(u) => u,
        };
        let deriv = State::new(s[1], dec.f_x + dec.g_x * u, s[3], dec.f_y + dec.g_y * u);
        Ok(Evaluated { deriv, u, point })
    }

    fn sample(&self, t: f64, s: &State, e: &Evaluated) -> ClosedLoopSample {
        let q = &e.point.frame.q;
        ClosedLoopSample {
            t,
            x: s[0],
            xdot: s[1],
            y: s[2],
            ydot: s[3],
            u: e.u,
            e_kin: e.point.kinetic_energy(),
            e_pot: gravity_potential(self.model, self.pm, q) + self.spring.potential(e.point.frame.theta),
        }
    }

    fn step(&self, s: &State, k1: &State, q: &JointConfig, h: f64) -> Result<State> {
        let k2 = self.evaluate(&(s + 0.5 * h * k1), q)?.deriv;
        let k3 = self.evaluate(&(s + 0.5 * h * k2), q)?.deriv;
        let k4 = self.evaluate(&(s + h * k3), q)?.deriv;
        Ok(s + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
    }
}

/// RK4 integration from `(x0, xdot0, y0, ydot0)`. Failures after the first
/// step truncate the trajectory and are recorded as a fault.
pub fn simulate_closed_loop(
    model: &MechanismModel,
    pm: &MassParams,
    spring: &dyn SpringFn,
    init: [f64; 4],
    opts: &ClosedLoopOptions,
) -> Result<ClosedLoopTrajectory> {
    if !(opts.dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    let plant = Plant { model, pm, spring, opts };
    let mut state = State::from(init);
    let q0 = model.configuration(&Vector2::new(init[0], init[2]))?;
    let mut current = plant.evaluate(&state, &q0)?;
    let steps = (opts.horizon / opts.dt).round() as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push(plant.sample(0.0, &state, &current));
    let mut fault = None;
    for k in 1..=steps {
        let t = k as f64 * opts.dt;
        let q = current.point.frame.q;
        let next = plant
            .step(&state, &current.deriv, &q, opts.dt)
            .and_then(|s| {
                if let Some((xl, xh, yl, yh)) = opts.window {
                    if !(s[0] >= xl && s[0] <= xh && s[2] >= yl && s[2] <= yh) {
                        return Err(Error::Escape { t, x: s[0] });
                    }
                }
                Ok(s)
            })
            .and_then(|s| plant.evaluate(&s, &q).map(|e| (s, e)));
        match next {
            Ok((s, e)) => {
                state = s;
                current = e;
                samples.push(plant.sample(t, &state, &current));
            }
            Err(err) => {
                fault = Some(Fault { t, message: err.to_string() });
                break;
            }
        }
    }
    Ok(ClosedLoopTrajectory {
        samples,
        fault,
        stabilized: opts.law.is_stabilized(),
    })
}

/// Max over the trajectory of `|E(t) - E(0) - W(t)|`, `W` the trapezoidal
/// integral of the input power `u dq1/dt`.
pub fn energy_audit(traj: &ClosedLoopTrajectory, model: &MechanismModel) -> Result<f64> {
    let s = &traj.samples;
    if s.is_empty() {
        return Ok(0.0);
    }
    let mut guess = model.configuration(&Vector2::new(s[0].x, s[0].y))?;
    let mut power = Vec::with_capacity(s.len());
    for p in s {
        let chi = Vector2::new(p.x, p.y);
        guess = model.solve_configuration(&chi, &guess)?;
        let b = model.coordinate_jacobian(&guess)?.row(0).transpose();
        power.push(p.u * b.dot(&Vector2::new(p.xdot, p.ydot)));
    }
    let e0 = s[0].e_kin + s[0].e_pot;
    let mut work = 0.0;
    let mut worst: f64 = 0.0;
    for k in 1..s.len() {
        work += 0.5 * (power[k] + power[k - 1]) * (s[k].t - s[k - 1].t);
        worst = worst.max((s[k].e_kin + s[k].e_pot - e0 - work).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spring::{SpringParams, ZeroSpring};
    use crate::zerodyn::residual_torque;

    fn model() -> MechanismModel {
        MechanismModel::table_one()
    }

    #[test]
    fn joint_state_input_matches_slice_torque() {
        let model = model();
        let pm = MassParams::new(0.04, 0.06, -0.01, 0.02);
        let s = SpringParams::linear(0.7, 1.6);
        let q = model.configuration(&Vector2::new(0.05, 0.15)).unwrap();
        let jac = model.coordinate_jacobian(&q).unwrap();
        let qdot = jac * Vector2::new(0.6, 0.0);
        let u = linearizing_input(&model, &pm, &s, &q, &qdot).unwrap();
        let r = residual_torque(&model, &pm, &s, 0.15, 0.05, 0.6).unwrap();
        assert!((u - r).abs() < 1e-10);
    }

    #[test]
    fn vanishing_gravity_needs_no_torque_at_rest() {
        let model = MechanismModel {
            gravity: 0.0,
            ..model()
        };
        let q = model.configuration(&Vector2::new(0.03, 0.16)).unwrap();
        let u = linearizing_input(&model, &MassParams::default(), &ZeroSpring, &q, &Vector4::zeros()).unwrap();
        assert!(u.abs() < 1e-14);
    }

    #[test]
    fn exact_law_holds_height() {
        let model = model();
        let pm = MassParams::default();
        let s = SpringParams::linear(0.5, 1.5);
        let opts = ClosedLoopOptions::new(1e-4, 0.1, 0.15);
        let tr = simulate_closed_loop(&model, &pm, &s, [0.05, 0.3, 0.15, 0.0], &opts).unwrap();
        assert!(tr.fault.is_none());
        assert!(!tr.stabilized);
        let drift = tr.samples.iter().map(|p| (p.y - 0.15).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-9, "{drift}");
    }

    #[test]
    fn free_swing_conserves_energy() {
        let model = model();
        let pm = MassParams::new(0.02, 0.02, 0.0, 0.0);
        let s = SpringParams::linear(0.5, 1.5);
        let mut opts = ClosedLoopOptions::new(1e-4, 0.1, 0.15);
        opts.law = InputLaw::Zero;
        opts.window = Some((-0.03, 0.11, 0.05, 0.25));
        let tr = simulate_closed_loop(&model, &pm, &s, [0.04, 0.0, 0.15, 0.0], &opts).unwrap();
        let e0 = tr.samples[0].e_kin + tr.samples[0].e_pot;
        let res = energy_audit(&tr, &model).unwrap();
        assert!(res < 1e-5 * e0.abs(), "{res} {e0} {:?}", tr.fault);
    }

    #[test]
    fn constant_input_does_work() {
        let model = model();
        let pm = MassParams::default();
        let mut opts = ClosedLoopOptions::new(1e-4, 0.05, 0.15);
        opts.law = InputLaw::Constant(0.05);
        let tr = simulate_closed_loop(&model, &pm, &SpringParams::linear(0.5, 1.5), [0.04, 0.0, 0.15, 0.0], &opts).unwrap();
        let e0 = tr.samples[0].e_kin + tr.samples[0].e_pot;
        assert!(energy_audit(&tr, &model).unwrap() < 1e-6 * e0.abs());
    }
}
