//! Euler-Lagrange quantities with added masses and their projection onto the
//! workspace coordinates `chi = (x, y)`.

use nalgebra::{Matrix2, Matrix2x4, Matrix4, Matrix4x2, RowVector2, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{unit_prime, JointConfig, MechanismModel, WorkspacePoint};
use crate::spring::SpringFn;

/// Added point masses on links `L3`, `L4` and their offsets from the link
/// centres, positive towards the proximal joint.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MassParams {
    pub m_a3: f64,
    pub m_a4: f64,
    pub delta3: f64,
    pub delta4: f64,
}

impl MassParams {
    pub fn new(m_a3: f64, m_a4: f64, delta3: f64, delta4: f64) -> Self {
        Self { m_a3, m_a4, delta3, delta4 }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.m_a3, self.m_a4, self.delta3, self.delta4]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    fn added(&self, k: usize) -> (f64, f64) {
        match k {
            0 => (self.m_a3, self.delta3),
            _ => (self.m_a4, self.delta4),
        }
    }
}

/// Box bounds on [`MassParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassBounds {
    /// `[min, max]` for both added masses (kg).
    pub added_mass: [f64; 2],
    /// `[min, max]` for both offsets (m).
    pub offset: [f64; 2],
}

impl Default for MassBounds {
    fn default() -> Self {
        Self {
            added_mass: [0.0, 0.1],
            offset: [-0.05, 0.05],
        }
    }
}

impl MassBounds {
    pub fn lower(&self) -> [f64; 4] {
        [self.added_mass[0], self.added_mass[0], self.offset[0], self.offset[0]]
    }

    pub fn upper(&self) -> [f64; 4] {
        [self.added_mass[1], self.added_mass[1], self.offset[1], self.offset[1]]
    }

    pub fn contains(&self, p: &MassParams) -> bool {
        let (lo, hi) = (self.lower(), self.upper());
        p.to_array().iter().enumerate().all(|(i, v)| *v >= lo[i] && *v <= hi[i])
    }

    pub fn validate(&self) -> Result<()> {
        if self.added_mass[0] < 0.0 || self.added_mass[0] > self.added_mass[1] {
            return Err(Error::InvalidParameter("added-mass bounds must satisfy 0 <= lo <= hi".into()));
        }
        if self.offset[0] > self.offset[1] {
            return Err(Error::InvalidParameter("offset bounds must satisfy lo <= hi".into()));
        }
        Ok(())
    }
}

/// Links carrying the added masses (zero-based).
const ADDED_LINKS: [usize; 2] = [2, 3];

fn added_lever(model: &MechanismModel, k: usize, delta: f64) -> f64 {
    model.lengths[ADDED_LINKS[k]] / 2.0 - delta
}

/// Joint-space inertia matrix `M_q(p_m, q)`.
pub fn joint_inertia(model: &MechanismModel, pm: &MassParams, q: &JointConfig) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    for i in 0..4 {
        let jc = model.point_jacobian(q, i, model.lengths[i] / 2.0);
        m += model.masses[i] * jc.transpose() * jc;
        m[(i, i)] += model.inertias[i];
    }
    for k in 0..2 {
        let (mass, delta) = pm.added(k);
        let ja = model.point_jacobian(q, ADDED_LINKS[k], added_lever(model, k, delta));
        m += mass * ja.transpose() * ja;
    }
    m
}

fn height_of(model: &MechanismModel, q: &JointConfig, link: usize, offset: f64) -> f64 {
    model.joint_position(q, link).y + offset * q.angle(link).sin()
}

/// Gravity potential `U_g` (J), zero datum at `y = 0`.
pub fn gravity_potential(model: &MechanismModel, pm: &MassParams, q: &JointConfig) -> f64 {
    let mut weighted = 0.0;
    for i in 0..4 {
        weighted += model.masses[i] * height_of(model, q, i, model.lengths[i] / 2.0);
    }
    for k in 0..2 {
        let (mass, delta) = pm.added(k);
        weighted += mass * height_of(model, q, ADDED_LINKS[k], added_lever(model, k, delta));
    }
    model.gravity * weighted
}

/// `dU_g/dq`.
pub fn joint_gravity_grad(model: &MechanismModel, pm: &MassParams, q: &JointConfig) -> Vector4<f64> {
    let mut grad = Vector4::zeros();
    for i in 0..4 {
        let jc = model.point_jacobian(q, i, model.lengths[i] / 2.0);
        grad += model.masses[i] * jc.row(1).transpose();
    }
    for k in 0..2 {
        let (mass, delta) = pm.added(k);
        let ja = model.point_jacobian(q, ADDED_LINKS[k], added_lever(model, k, delta));
        grad += mass * ja.row(1).transpose();
    }
    model.gravity * grad
}

/// Spring-independent, velocity-independent minimal-form data at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimalFrame {
    pub chi: WorkspacePoint,
    pub q: JointConfig,
    /// `dq/dchi`.
    pub jacobian: Matrix4x2<f64>,
    pub m: Matrix2<f64>,
    pub dm_dx: Matrix2<f64>,
    pub dm_dy: Matrix2<f64>,
    /// `(dq1/dx, dq1/dy)`.
    pub b: Vector2<f64>,
    /// `(dq4/dx, dq4/dy)`.
    pub dq4: Vector2<f64>,
    /// `(dU_g/dx, dU_g/dy)`.
    pub dug: Vector2<f64>,
    /// Spring deflection at `chi`.
    pub theta: f64,
}

/// Probe step for the workspace derivatives of `M`.
pub fn probe_step(model: &MechanismModel) -> f64 {
    1e-6 * model.length_scale()
}

fn projected_inertia(model: &MechanismModel, pm: &MassParams, chi: &WorkspacePoint, guess: &JointConfig) -> Result<Matrix2<f64>> {
    let q = model.solve_configuration(chi, guess)?;
    let jac = model.coordinate_jacobian(&q)?;
    Ok(jac.transpose() * joint_inertia(model, pm, &q) * jac)
}

impl MinimalFrame {
    /// Assemble the frame at `chi` on the configured branch.
    pub fn build(model: &MechanismModel, pm: &MassParams, chi: &WorkspacePoint) -> Result<Self> {
        let q = model.configuration(chi)?;
        Self::build_from(model, pm, chi, &q)
    }

    /// Assemble the frame at `chi` given a closed configuration `q` there.
    pub fn build_from(model: &MechanismModel, pm: &MassParams, chi: &WorkspacePoint, q: &JointConfig) -> Result<Self> {
        let jacobian = model.coordinate_jacobian(q)?;
        let m = jacobian.transpose() * joint_inertia(model, pm, q) * jacobian;
        let h = probe_step(model);
        let ex = Vector2::new(h, 0.0);
        let ey = Vector2::new(0.0, h);
        let dm_dx = (projected_inertia(model, pm, &(chi + ex), q)? - projected_inertia(model, pm, &(chi - ex), q)?) / (2.0 * h);
        let dm_dy = (projected_inertia(model, pm, &(chi + ey), q)? - projected_inertia(model, pm, &(chi - ey), q)?) / (2.0 * h);
        let dug = jacobian.transpose() * joint_gravity_grad(model, pm, q);
        Ok(Self {
            chi: *chi,
            q: *q,
            b: jacobian.row(0).transpose(),
            dq4: jacobian.row(3).transpose(),
            jacobian,
            m,
            dm_dx,
            dm_dy,
            dug,
            theta: model.spring_angle(q),
        })
    }

    pub fn check_positive_definite(&self) -> Result<()> {
        if self.m[(0, 0)] > 0.0 && self.m.determinant() > 0.0 {
            Ok(())
        } else {
            Err(Error::NotPositiveDefinite)
        }
    }

    /// Coriolis/centrifugal torques `C(chi, chidot) chidot`.
    pub fn coriolis(&self, chidot: &Vector2<f64>) -> Vector2<f64> {
        let (xd, yd) = (chidot.x, chidot.y);
        let (mx, my) = (&self.dm_dx, &self.dm_dy);
        let c1 = 0.5 * mx[(0, 0)] * xd * xd + my[(0, 0)] * xd * yd + (my[(0, 1)] - 0.5 * mx[(1, 1)]) * yd * yd;
        let c2 = (mx[(0, 1)] - 0.5 * my[(0, 0)]) * xd * xd + mx[(1, 1)] * xd * yd + 0.5 * my[(1, 1)] * yd * yd;
        Vector2::new(c1, c2)
    }

    /// Potential gradient `G` for a given spring torque.
    pub fn potential_gradient(&self, spring_torque: f64) -> Vector2<f64> {
        spring_torque * self.dq4 + self.dug
    }
}

/// Minimal-form data `(M, C chidot, G, B)` at a state.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimalFormPoint {
    pub frame: MinimalFrame,
    pub chidot: Vector2<f64>,
    /// `(C1, C2)`.
    pub c: Vector2<f64>,
    /// `(G1, G2)`.
    pub g: Vector2<f64>,
    pub spring_torque: f64,
}

impl MinimalFormPoint {
    pub fn from_frame(frame: MinimalFrame, spring: &dyn SpringFn, chidot: &Vector2<f64>) -> Result<Self> {
        frame.check_positive_definite()?;
        let spring_torque = spring.torque(frame.theta);
        Ok(Self {
            c: frame.coriolis(chidot),
            g: frame.potential_gradient(spring_torque),
            chidot: *chidot,
            spring_torque,
            frame,
        })
    }

    pub fn m(&self) -> &Matrix2<f64> {
        &self.frame.m
    }

    pub fn b(&self) -> &Vector2<f64> {
        &self.frame.b
    }

    /// Drift and input-gain terms of `xdd = f_x + g_x u`, `ydd = f_y + g_y u`.
    pub fn decomposition(&self) -> AccelDecomposition {
        let m = &self.frame.m;
        let b = &self.frame.b;
        let (m11, m12, m22) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
        let det = m11 * m22 - m12 * m12;
        let (k1, k2) = (self.c.x + self.g.x, self.c.y + self.g.y);
        AccelDecomposition {
            f_x: (-m22 * k1 + m12 * k2) / det,
            g_x: (m22 * b.x - m12 * b.y) / det,
            f_y: (m12 * k1 - m11 * k2) / det,
            g_y: -(m12 * b.x - m11 * b.y) / det,
        }
    }

    /// Solve `M chidd = B u - C chidot - G` directly.
    pub fn acceleration(&self, u: f64) -> Vector2<f64> {
        let rhs = self.frame.b * u - self.c - self.g;
        self.frame.m.lu().solve(&rhs).unwrap_or_else(|| Vector2::repeat(f64::NAN))
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.chidot.dot(&(self.frame.m * self.chidot))
    }
}

/// Double-integrator decomposition of the minimal form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AccelDecomposition {
    pub f_x: f64,
    pub f_y: f64,
    pub g_x: f64,
    pub g_y: f64,
}

/// Threshold below which `g_y` is treated as vanishing.
pub const INPUT_GAIN_EPS: f64 = 1e-9;

impl AccelDecomposition {
    pub fn check_input_gain(&self) -> Result<()> {
        if self.g_y.abs() < INPUT_GAIN_EPS || !self.g_y.is_finite() {
            Err(Error::ZeroInputGain { value: self.g_y })
        } else {
            Ok(())
        }
    }

    /// Torque cancelling the vertical drift, `-f_y / g_y`.
    pub fn linearizing_torque(&self) -> Result<f64> {
        self.check_input_gain()?;
        Ok(-self.f_y / self.g_y)
    }
}

/// Minimal-form data at `(chi, chidot)` on the configured branch.
pub fn minimal_point(
    model: &MechanismModel,
    pm: &MassParams,
    spring: &dyn SpringFn,
    chi: &WorkspacePoint,
    chidot: &Vector2<f64>,
) -> Result<MinimalFormPoint> {
    let frame = MinimalFrame::build(model, pm, chi)?;
    MinimalFormPoint::from_frame(frame, spring, chidot)
}

/// `f_x, g_x, f_y, g_y` at `(chi, chidot)`; fails if `g_y` vanishes.
pub fn accel_decomposition(
    model: &MechanismModel,
    pm: &MassParams,
    spring: &dyn SpringFn,
    chi: &WorkspacePoint,
    chidot: &Vector2<f64>,
) -> Result<AccelDecomposition> {
    let dec = minimal_point(model, pm, spring, chi, chidot)?.decomposition();
    dec.check_input_gain()?;
    Ok(dec)
}

/// `M(chi)` as an explicit function of the added-mass parameters:
/// `base + sum_k m_k (c0_k + a_k c1_k + a_k^2 c2_k)` with lever `a_k = l/2 - delta_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InertiaTerms {
    base: Matrix2<f64>,
    added: [[Matrix2<f64>; 3]; 2],
}

/// `dU_g/dchi` as `base + sum_k m_k (c0_k + a_k c1_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravityTerms {
    base: Vector2<f64>,
    added: [[Vector2<f64>; 2]; 2],
}

impl InertiaTerms {
    fn build(model: &MechanismModel, q: &JointConfig, jac: &Matrix4x2<f64>) -> Self {
        let base = jac.transpose() * joint_inertia(model, &MassParams::default(), q) * jac;
        let mut added = [[Matrix2::zeros(); 3]; 2];
        for (k, &link) in ADDED_LINKS.iter().enumerate() {
            let (p, r) = lever_jacobians(model, q, jac, link);
            added[k] = [p.transpose() * p, p.transpose() * r + r.transpose() * p, r.transpose() * r];
        }
        Self { base, added }
    }

    pub fn eval(&self, model: &MechanismModel, pm: &MassParams) -> Matrix2<f64> {
        let mut m = self.base;
        for k in 0..2 {
            let (mass, delta) = pm.added(k);
            let a = added_lever(model, k, delta);
            m += mass * (self.added[k][0] + a * self.added[k][1] + a * a * self.added[k][2]);
        }
        m
    }

    fn central_difference(plus: &Self, minus: &Self, h: f64) -> Self {
        let s = 1.0 / (2.0 * h);
        let mut added = [[Matrix2::zeros(); 3]; 2];
        for k in 0..2 {
            for j in 0..3 {
                added[k][j] = (plus.added[k][j] - minus.added[k][j]) * s;
            }
        }
        Self {
            base: (plus.base - minus.base) * s,
            added,
        }
    }
}

/// Workspace Jacobians of the proximal joint of `link` and of its unit direction.
fn lever_jacobians(model: &MechanismModel, q: &JointConfig, jac: &Matrix4x2<f64>, link: usize) -> (Matrix2<f64>, Matrix2<f64>) {
    let joint: Matrix2x4<f64> = model.point_jacobian(q, link, 0.0);
    let p = joint * jac;
    let dir = unit_prime(q.angle(link));
    let row: RowVector2<f64> = jac.row(link).into_owned();
    (p, dir * row)
}

impl GravityTerms {
    fn build(model: &MechanismModel, q: &JointConfig, jac: &Matrix4x2<f64>) -> Self {
        let base = jac.transpose() * joint_gravity_grad(model, &MassParams::default(), q);
        let mut added = [[Vector2::zeros(); 2]; 2];
        for (k, &link) in ADDED_LINKS.iter().enumerate() {
            let (p, r) = lever_jacobians(model, q, jac, link);
            added[k] = [model.gravity * p.row(1).transpose(), model.gravity * r.row(1).transpose()];
        }
        Self { base, added }
    }

    pub fn eval(&self, model: &MechanismModel, pm: &MassParams) -> Vector2<f64> {
        let mut g = self.base;
        for k in 0..2 {
            let (mass, delta) = pm.added(k);
            let a = added_lever(model, k, delta);
            g += mass * (self.added[k][0] + a * self.added[k][1]);
        }
        g
    }
}

/// Kinematic data at one workspace point from which [`MinimalFrame`]s for any
/// mass distribution are evaluated without re-solving the loop closure.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimalTemplate {
    chi: WorkspacePoint,
    q: JointConfig,
    jacobian: Matrix4x2<f64>,
    m: InertiaTerms,
    dm_dx: InertiaTerms,
    dm_dy: InertiaTerms,
    dug: GravityTerms,
}

impl MinimalTemplate {
    pub fn build(model: &MechanismModel, chi: &WorkspacePoint) -> Result<Self> {
        let q = model.configuration(chi)?;
        let jacobian = model.coordinate_jacobian(&q)?;
        let h = probe_step(model);
        let probe = |offset: Vector2<f64>| -> Result<InertiaTerms> {
            let p = model.solve_configuration(&(chi + offset), &q)?;
            let j = model.coordinate_jacobian(&p)?;
            Ok(InertiaTerms::build(model, &p, &j))
        };
        let dm_dx = InertiaTerms::central_difference(&probe(Vector2::new(h, 0.0))?, &probe(Vector2::new(-h, 0.0))?, h);
        let dm_dy = InertiaTerms::central_difference(&probe(Vector2::new(0.0, h))?, &probe(Vector2::new(0.0, -h))?, h);
        Ok(Self {
            chi: *chi,
            q,
            m: InertiaTerms::build(model, &q, &jacobian),
            dug: GravityTerms::build(model, &q, &jacobian),
            jacobian,
            dm_dx,
            dm_dy,
        })
    }

    pub fn frame(&self, model: &MechanismModel, pm: &MassParams) -> MinimalFrame {
        MinimalFrame {
            chi: self.chi,
            q: self.q,
            jacobian: self.jacobian,
            m: self.m.eval(model, pm),
            dm_dx: self.dm_dx.eval(model, pm),
            dm_dy: self.dm_dy.eval(model, pm),
            b: self.jacobian.row(0).transpose(),
            dq4: self.jacobian.row(3).transpose(),
            dug: self.dug.eval(model, pm),
            theta: model.spring_angle(&self.q),
        }
    }
}

/// Kinetic energy summed link by link from point velocities and spins.
pub fn link_kinetic_energy(model: &MechanismModel, pm: &MassParams, q: &JointConfig, qd: &Vector4<f64>) -> f64 {
    let point_velocity = |link: usize, offset: f64| -> Vector2<f64> {
        let mut v = Vector2::zeros();
        for k in 0..link {
            v += model.lengths[k] * qd[k] * Vector2::new(-q.angle(k).sin(), q.angle(k).cos());
        }
        v + offset * qd[link] * Vector2::new(-q.angle(link).sin(), q.angle(link).cos())
    };
    let mut e = 0.0;
    for i in 0..4 {
        let v = point_velocity(i, model.lengths[i] / 2.0);
        e += 0.5 * model.masses[i] * v.norm_squared() + 0.5 * model.inertias[i] * qd[i] * qd[i];
    }
    let added = [(pm.m_a3, pm.delta3, 2), (pm.m_a4, pm.delta4, 3)];
    for (mass, delta, link) in added {
        let v = point_velocity(link, model.lengths[link] / 2.0 - delta);
        e += 0.5 * mass * v.norm_squared();
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spring::{SpringParams, ZeroSpring};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn model() -> MechanismModel {
        MechanismModel::table_one()
    }

    fn chi() -> WorkspacePoint {
        Vector2::new(0.04, 0.15)
    }

    #[test]
    fn zero_added_mass_ignores_offsets() {
        let model = model();
        let q = model.configuration(&chi()).unwrap();
        let a = joint_inertia(&model, &MassParams::new(0.0, 0.0, 0.03, -0.02), &q);
        let b = joint_inertia(&model, &MassParams::default(), &q);
        assert_eq!(a, b);
    }

    #[test]
    fn crank_diagonal_lower_bound() {
        let model = model();
        let q = model.configuration(&chi()).unwrap();
        let m = joint_inertia(&model, &MassParams::new(0.1, 0.1, 0.05, -0.05), &q);
        let bound = model.inertias[0] + model.masses[0] * (model.lengths[0] / 2.0).powi(2);
        assert!(m[(0, 0)] >= bound - 1e-18);
    }

    #[test]
    fn gravity_gradient_vanishes_without_gravity() {
        let mut model = model();
        model.gravity = 0.0;
        let q = model.configuration(&chi()).unwrap();
        assert_eq!(joint_gravity_grad(&model, &MassParams::new(0.1, 0.05, 0.01, 0.02), &q), Vector4::zeros());
    }

    #[test]
    fn gravity_gradient_matches_finite_differences() {
        let model = model();
        let pm = MassParams::new(0.07, 0.03, -0.02, 0.04);
        let q = JointConfig::new(1.2, -0.3, -2.7, -1.4);
        let grad = joint_gravity_grad(&model, &pm, &q);
        let h = 1e-6;
        for i in 0..4 {
            let mut p = q;
            let mut m = q;
            p.0[i] += h;
            m.0[i] -= h;
            let fd = (gravity_potential(&model, &pm, &p) - gravity_potential(&model, &pm, &m)) / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-8 * grad.norm(), "component {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn gravity_gradient_horizontal_links() {
        // With every link along +e_x, the torque arm of each mass about a
        // joint angle q_k is its distance beyond joint J_k.
        let model = model();
        let pm = MassParams::new(0.05, 0.08, 0.01, -0.02);
        let grad = joint_gravity_grad(&model, &pm, &JointConfig::zeros());
        let l = model.lengths;
        let mut point_masses: Vec<(usize, f64, f64)> = (0..4).map(|i| (i, l[i] / 2.0, model.masses[i])).collect();
        point_masses.push((2, l[2] / 2.0 - pm.delta3, pm.m_a3));
        point_masses.push((3, l[3] / 2.0 - pm.delta4, pm.m_a4));
        for k in 0..4 {
            let mut arm_sum = 0.0;
            for &(link, offset, mass) in &point_masses {
                if link == k {
                    arm_sum += mass * offset;
                } else if link > k {
                    arm_sum += mass * l[k];
                }
            }
            assert_relative_eq!(grad[k], model.gravity * arm_sum, max_relative = 1e-12);
        }
    }

    #[test]
    fn template_matches_direct_assembly() {
        let model = model();
        let template = MinimalTemplate::build(&model, &chi()).unwrap();
        for pm in [MassParams::default(), MassParams::new(0.1, 0.062, -0.05, 0.022), MassParams::new(0.03, 0.09, 0.04, -0.05)] {
            let direct = MinimalFrame::build(&model, &pm, &chi()).unwrap();
            let fast = template.frame(&model, &pm);
            assert_relative_eq!(fast.m, direct.m, max_relative = 1e-12);
            assert_relative_eq!(fast.dug, direct.dug, max_relative = 1e-12);
            assert!((fast.dm_dx - direct.dm_dx).norm() < 1e-7 * direct.dm_dx.norm());
            assert!((fast.dm_dy - direct.dm_dy).norm() < 1e-7 * direct.dm_dy.norm());
        }
    }

    #[test]
    fn inertia_derivatives_are_step_converged() {
        // Richardson self-check against a half-step recomputation.
        let model = model();
        let pm = MassParams::new(0.1, 0.062, -0.05, 0.022);
        let c = chi();
        let q = model.configuration(&c).unwrap();
        let frame = MinimalFrame::build(&model, &pm, &c).unwrap();
        let h = probe_step(&model) / 2.0;
        for (axis, reference) in [(0, frame.dm_dx), (1, frame.dm_dy)] {
            let mut e = Vector2::zeros();
            e[axis] = h;
            let half = (projected_inertia(&model, &pm, &(c + e), &q).unwrap() - projected_inertia(&model, &pm, &(c - e), &q).unwrap()) / (2.0 * h);
            assert!((half - reference).norm() <= 1e-6 * reference.norm(), "axis {axis}");
        }
    }

    #[test]
    fn input_distribution_is_first_jacobian_row() {
        let model = model();
        let p = minimal_point(&model, &MassParams::default(), &ZeroSpring, &chi(), &Vector2::new(0.3, -0.1)).unwrap();
        let q = model.configuration(&chi()).unwrap();
        let jac = model.coordinate_jacobian(&q).unwrap();
        assert_eq!(p.frame.b.x, jac[(0, 0)]);
        assert_eq!(p.frame.b.y, jac[(0, 1)]);
    }

    #[test]
    fn statics_decomposition() {
        let model = model();
        let spring = SpringParams::linear(0.4, 1.5);
        let p = minimal_point(&model, &MassParams::new(0.05, 0.05, 0.0, 0.0), &spring, &chi(), &Vector2::zeros()).unwrap();
        let dec = p.decomposition();
        let expected = -p.frame.m.lu().solve(&p.g).unwrap();
        assert_relative_eq!(dec.f_x, expected.x, max_relative = 1e-12);
        assert_relative_eq!(dec.f_y, expected.y, max_relative = 1e-12);
    }

    #[test]
    fn decomposition_reconstructs_linear_solve() {
        let model = model();
        let spring = SpringParams::linear(1.0, 1.4);
        let p = minimal_point(&model, &MassParams::new(0.08, 0.02, 0.01, -0.03), &spring, &Vector2::new(0.07, 0.14), &Vector2::new(0.5, 0.2)).unwrap();
        let dec = p.decomposition();
        for u in [-0.7, 0.0, 0.13, 2.5] {
            let acc = p.acceleration(u);
            assert!((acc.x - (dec.f_x + dec.g_x * u)).abs() < 1e-9);
            assert!((acc.y - (dec.f_y + dec.g_y * u)).abs() < 1e-9);
        }
    }

    #[test]
    fn vanishing_gain_is_rejected() {
        let dec = AccelDecomposition { f_x: 0.0, f_y: 1.0, g_x: 1.0, g_y: 1e-12 };
        assert!(matches!(dec.linearizing_torque(), Err(Error::ZeroInputGain { .. })));
    }

    #[test]
    fn mass_bounds_validation() {
        assert!(MassBounds::default().validate().is_ok());
        let bad = MassBounds { added_mass: [0.1, 0.0], offset: [-0.03, 0.03] };
        assert!(bad.validate().is_err());
        let bad = MassBounds { added_mass: [0.0, 0.1], offset: [0.03, -0.03] };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn kinetic_energy_matches_link_sum(
            q in prop::array::uniform4(-3.0f64..3.0),
            qd in prop::array::uniform4(-5.0f64..5.0),
            m3 in 0.0f64..0.1, m4 in 0.0f64..0.1, d3 in -0.05f64..0.05, d4 in -0.05f64..0.05,
        ) {
            let model = model();
            let pm = MassParams::new(m3, m4, d3, d4);
            let q = JointConfig::new(q[0], q[1], q[2], q[3]);
            let qd = Vector4::from(qd);
            let m = joint_inertia(&model, &pm, &q);
            let e = 0.5 * qd.dot(&(m * qd));
            let oracle = link_kinetic_energy(&model, &pm, &q, &qd);
            prop_assert!((e - oracle).abs() <= 1e-12 * oracle.abs().max(1e-12));
            prop_assert!((m - m.transpose()).norm() <= 1e-14 * m.norm());
        }

        #[test]
        fn kinetic_energy_projection(
            x in 0.0f64..0.08, y in 0.13f64..0.17, xd in -1.0f64..1.0, yd in -1.0f64..1.0,
            m3 in 0.0f64..0.1, m4 in 0.0f64..0.1, d3 in -0.05f64..0.05, d4 in -0.05f64..0.05,
        ) {
            let model = model();
            let pm = MassParams::new(m3, m4, d3, d4);
            let chi = Vector2::new(x, y);
            let chidot = Vector2::new(xd, yd);
            let point = minimal_point(&model, &pm, &ZeroSpring, &chi, &chidot).unwrap();
            let qd = point.frame.jacobian * chidot;
            let joint = 0.5 * qd.dot(&(joint_inertia(&model, &pm, &point.frame.q) * qd));
            prop_assert!((point.kinetic_energy() - joint).abs() <= 1e-10 * joint.abs().max(1e-300));
        }
    }
}
