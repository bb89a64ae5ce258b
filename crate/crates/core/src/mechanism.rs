//! Planar kinematics of the five-joint closed chain.
//!
//! The chain is `J1 -L1-> J2 -L2-> J3 -L3-> J4 -L4-> J5`, with `J1` fixed at
//! [`MechanismModel::base`], `J5` pinned at [`MechanismModel::anchor`] and the
//! end-effector at `J3`. Joint coordinates are absolute link angles measured
//! counterclockwise from `+e_x`.

use nalgebra::{Matrix2x4, Matrix4, Matrix4x2, Vector2, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// End-effector position `(x, y)` in metres.
pub type WorkspacePoint = Vector2<f64>;

/// Absolute link angles `q = (q1, q2, q3, q4)` in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointConfig(pub Vector4<f64>);

impl JointConfig {
    pub fn new(q1: f64, q2: f64, q3: f64, q4: f64) -> Self {
        Self(Vector4::new(q1, q2, q3, q4))
    }

    pub fn zeros() -> Self {
        Self(Vector4::zeros())
    }

    #[inline]
    pub fn angle(&self, link: usize) -> f64 {
        self.0[link]
    }
}

/// Turning direction from one link of a dyad to the next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Turn {
    Clockwise,
    CounterClockwise,
}

/// Assembly mode of the two dyads `L1-L2` and `L3-L4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub crank_dyad: Turn,
    pub spring_dyad: Turn,
}

impl Default for Branch {
    /// `q2, q3, q4` all negative with `q3 < q4`.
    fn default() -> Self {
        Self {
            crank_dyad: Turn::Clockwise,
            spring_dyad: Turn::CounterClockwise,
        }
    }
}

/// Geometry and inertia of the four links plus base and anchor placement.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismModel {
    /// Link lengths `l1..l4` (m).
    pub lengths: [f64; 4],
    /// Link masses `m1..m4` (kg).
    pub masses: [f64; 4],
    /// Link inertias about their centroids (kg m^2).
    pub inertias: [f64; 4],
    /// Position of joint `J1` (m).
    pub base: Vector2<f64>,
    /// Position of joint `J5`, where the torsional spring sits (m).
    pub anchor: Vector2<f64>,
    /// Gravitational acceleration along `-e_y` (m/s^2).
    pub gravity: f64,
    pub branch: Branch,
}

const NEWTON_MAX_ITERATIONS: usize = 50;
const NEWTON_TOLERANCE: f64 = 1e-12;

#[inline]
pub(crate) fn unit(a: f64) -> Vector2<f64> {
    Vector2::new(a.cos(), a.sin())
}

#[inline]
pub(crate) fn unit_prime(a: f64) -> Vector2<f64> {
    Vector2::new(-a.sin(), a.cos())
}

fn cross(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    a.x * b.y - a.y * b.x
}

impl Default for MechanismModel {
    fn default() -> Self {
        Self::table_one()
    }
}

impl MechanismModel {
    /// Link data of the reference prototype, `J1` at `(-0.19, 0.15)` and
    /// `J5` at the origin.
    pub fn table_one() -> Self {
        Self {
            lengths: [0.080, 0.235, 0.052, 0.135],
            masses: [0.071, 0.195, 0.049, 0.115],
            inertias: [0.747e-4, 10.413e-4, 0.345e-4, 2.430e-4],
            base: Vector2::new(-0.19, 0.15),
            anchor: Vector2::new(0.0, 0.0),
            gravity: 9.81,
            branch: Branch::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..4 {
            if !(self.lengths[i] > 0.0) {
                return Err(Error::InvalidParameter(format!("l{} must be positive", i + 1)));
            }
            if !(self.masses[i] > 0.0) {
                return Err(Error::InvalidParameter(format!("m{} must be positive", i + 1)));
            }
            if !(self.inertias[i] >= 0.0) {
                return Err(Error::InvalidParameter(format!("J{} must be non-negative", i + 1)));
            }
        }
        if !self.gravity.is_finite() {
            return Err(Error::InvalidParameter("gravity must be finite".into()));
        }
        Ok(())
    }

    /// Sum of the link lengths, used to scale tolerances and probe steps.
    pub fn length_scale(&self) -> f64 {
        self.lengths.iter().sum()
    }

    /// Position of joint `J{index+1}` for `index` in `0..=4` obtained by walking the chain.
    pub fn joint_position(&self, q: &JointConfig, index: usize) -> Vector2<f64> {
        (0..index).fold(self.base, |p, k| p + self.lengths[k] * unit(q.angle(k)))
    }

    /// Velocity Jacobian of the point `J_link + offset * u(q_link)`.
    pub fn point_jacobian(&self, q: &JointConfig, link: usize, offset: f64) -> Matrix2x4<f64> {
        let mut jac = Matrix2x4::zeros();
        for k in 0..link {
            jac.set_column(k, &(self.lengths[k] * unit_prime(q.angle(k))));
        }
        jac.set_column(link, &(offset * unit_prime(q.angle(link))));
        jac
    }

    /// End-effector position `h(q)`: the location of joint `J3`.
    pub fn direct_kinematics(&self, q: &JointConfig) -> WorkspacePoint {
        self.base + self.lengths[0] * unit(q.angle(0)) + self.lengths[1] * unit(q.angle(1))
    }

    /// Loop-closure residual `phi(q)`, zero iff the chain closes at `J5`.
    pub fn loop_residual(&self, q: &JointConfig) -> Vector2<f64> {
        self.joint_position(q, 4) - self.anchor
    }

    /// Stacked Jacobian `d(h; phi)/dq`.
    pub fn constraint_jacobian(&self, q: &JointConfig) -> Matrix4<f64> {
        let mut a = Matrix4::zeros();
        for k in 0..4 {
            let col = self.lengths[k] * unit_prime(q.angle(k));
            if k < 2 {
                a[(0, k)] = col.x;
                a[(1, k)] = col.y;
            }
            a[(2, k)] = col.x;
            a[(3, k)] = col.y;
        }
        a
    }

    fn closure_residual(&self, chi: &WorkspacePoint, q: &JointConfig) -> Vector4<f64> {
        let h = self.direct_kinematics(q) - chi;
        let phi = self.loop_residual(q);
        Vector4::new(h.x, h.y, phi.x, phi.y)
    }

    /// Closed-form assembly on the configured branch by two circle intersections.
    pub fn initial_guess(&self, chi: &WorkspacePoint) -> Result<JointConfig> {
        let [l1, l2, l3, l4] = self.lengths;
        let j2 = circle_intersection(&self.base, l1, chi, l2, self.branch.crank_dyad)
            .ok_or(Error::Unreachable { x: chi.x, y: chi.y })?;
        let j4 = circle_intersection(chi, l3, &self.anchor, l4, self.branch.spring_dyad)
            .ok_or(Error::Unreachable { x: chi.x, y: chi.y })?;
        let angle = |from: &Vector2<f64>, to: &Vector2<f64>| (to.y - from.y).atan2(to.x - from.x);
        Ok(JointConfig::new(
            angle(&self.base, &j2),
            angle(&j2, chi),
            angle(chi, &j4),
            angle(&j4, &self.anchor),
        ))
    }

    /// Damped Newton solve of `h(q) = chi`, `phi(q) = 0` starting from `guess`.
    pub fn solve_configuration(&self, chi: &WorkspacePoint, guess: &JointConfig) -> Result<JointConfig> {
        let tol = NEWTON_TOLERANCE * self.length_scale();
        let mut q = *guess;
        let mut residual = self.closure_residual(chi, &q);
        let mut norm = residual.norm();
        let mut converged_at = None;
        for iteration in 0..NEWTON_MAX_ITERATIONS {
            if !norm.is_finite() {
                break;
            }
            if norm < tol {
                if converged_at.is_some() {
                    return Ok(q);
                }
                converged_at = Some(iteration);
            }
            let jac = self.constraint_jacobian(&q);
            let step = solve4(&jac, &residual).ok_or(Error::SingularJacobian)?;
            let mut damping = 1.0;
            let mut accepted = false;
            for _ in 0..20 {
                let trial = JointConfig(q.0 - damping * step);
                let trial_residual = self.closure_residual(chi, &trial);
                let trial_norm = trial_residual.norm();
                if trial_norm < norm || (converged_at.is_some() && trial_norm <= norm) {
                    q = trial;
                    residual = trial_residual;
                    norm = trial_norm;
                    accepted = true;
                    break;
                }
                damping *= 0.5;
            }
            if !accepted {
                // no further decrease: at the round-off floor if already converged
                if converged_at.is_some() {
                    return Ok(q);
                }
                break;
            }
        }
        if norm < tol {
            return Ok(q);
        }
        Err(Error::NonConvergence {
            iterations: NEWTON_MAX_ITERATIONS,
            residual: norm,
        })
    }

    /// Closed configuration on the configured branch: closed-form guess refined by Newton.
    pub fn configuration(&self, chi: &WorkspacePoint) -> Result<JointConfig> {
        let guess = self.initial_guess(chi)?;
        self.solve_configuration(chi, &guess)
    }

    /// `dq/dchi` on the constraint manifold, solving `(dh/dq; dphi/dq) J = (I; 0)`.
    pub fn coordinate_jacobian(&self, q: &JointConfig) -> Result<Matrix4x2<f64>> {
        let a = self.constraint_jacobian(q);
        let lu = a.lu();
        if !lu.is_invertible() || lu.determinant().abs() < SINGULAR_DET * self.length_scale().powi(4) {
            return Err(Error::SingularJacobian);
        }
        let mut rhs = Matrix4x2::zeros();
        rhs[(0, 0)] = 1.0;
        rhs[(1, 1)] = 1.0;
        lu.solve(&rhs).ok_or(Error::SingularJacobian)
    }

    /// Spring deflection `theta = q4 + pi`.
    pub fn spring_angle(&self, q: &JointConfig) -> f64 {
        q.angle(3) + std::f64::consts::PI
    }

    /// Spring deflection as a function of the workspace coordinates.
    pub fn eta(&self, chi: &WorkspacePoint, guess: &JointConfig) -> Result<f64> {
        let q = self.solve_configuration(chi, guess)?;
        Ok(self.spring_angle(&q))
    }
}

const SINGULAR_DET: f64 = 1e-14;

fn solve4(a: &Matrix4<f64>, b: &Vector4<f64>) -> Option<Vector4<f64>> {
    let lu = a.lu();
    if !lu.is_invertible() {
        return None;
    }
    lu.solve(b)
}

/// Intersection of circle `(c0, r0)` with circle `(c1, r1)`; `turn` selects
/// the sign of `(p - c0) x (c1 - p)`.
fn circle_intersection(
    c0: &Vector2<f64>,
    r0: f64,
    c1: &Vector2<f64>,
    r1: f64,
    turn: Turn,
) -> Option<Vector2<f64>> {
    let d = c1 - c0;
    let dist = d.norm();
    if dist <= 0.0 || dist > r0 + r1 || dist < (r0 - r1).abs() {
        return None;
    }
    let along = (r0 * r0 - r1 * r1 + dist * dist) / (2.0 * dist);
    let height = (r0 * r0 - along * along).max(0.0).sqrt();
    let dir = d / dist;
    let normal = Vector2::new(-dir.y, dir.x);
    // cross((p - c0), (c1 - p)) = -side * height * dist
    let side = match turn {
        Turn::Clockwise => 1.0,
        Turn::CounterClockwise => -1.0,
    };
    let p = c0 + along * dir + side * height * normal;
    debug_assert!(height == 0.0 || cross(&(p - c0), &(c1 - p)).signum() == -side);
    Some(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn mid_point() -> WorkspacePoint {
        Vector2::new(0.04, 0.15)
    }

    #[test]
    fn collinear_chain_reaches_l1_plus_l2() {
        let model = MechanismModel::table_one();
        let chi = model.direct_kinematics(&JointConfig::zeros());
        assert_abs_diff_eq!(chi.x, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(chi.y, 0.15, epsilon = 1e-15);
    }

    #[test]
    fn orthogonal_first_link() {
        let model = MechanismModel::table_one();
        let chi = model.direct_kinematics(&JointConfig::new(FRAC_PI_2, 0.0, 0.3, -0.2));
        assert_abs_diff_eq!(chi.x, 0.045, epsilon = 1e-15);
        assert_abs_diff_eq!(chi.y, 0.23, epsilon = 1e-15);
    }

    #[test]
    fn residual_of_straight_chain() {
        let model = MechanismModel::table_one();
        let phi = model.loop_residual(&JointConfig::zeros());
        assert_abs_diff_eq!(phi.x, 0.312, epsilon = 1e-15);
        assert_abs_diff_eq!(phi.y, 0.15, epsilon = 1e-15);
    }

    #[test]
    fn residual_is_first_order_in_perturbation() {
        let model = MechanismModel::table_one();
        let q = model.configuration(&mid_point()).unwrap();
        for link in 0..4 {
            for eps in [1e-3, 1e-4, 1e-5] {
                let mut p = q;
                p.0[link] += eps;
                let r = model.loop_residual(&p).norm();
                let expected = model.lengths[link] * eps;
                // |phi| = 2 l sin(eps/2)
                assert!((r - expected).abs() < expected * eps, "link {link} eps {eps}: {r}");
            }
        }
    }

    #[test]
    fn default_branch_signs() {
        let model = MechanismModel::table_one();
        let q = model.configuration(&mid_point()).unwrap();
        assert!(q.angle(0) > 0.0);
        for link in 1..4 {
            assert!(q.angle(link) < 0.0 && q.angle(link) > -PI);
        }
        assert!(q.angle(2) < q.angle(3));
    }

    #[test]
    fn closed_configuration_is_a_fixed_point() {
        let model = MechanismModel::table_one();
        let q = model.configuration(&mid_point()).unwrap();
        let chi = model.direct_kinematics(&q);
        let again = model.solve_configuration(&chi, &q).unwrap();
        assert_abs_diff_eq!((again.0 - q.0).norm(), 0.0, epsilon = 1e-14);
        assert!(model.loop_residual(&again).norm() < 1e-10);
    }

    #[test]
    fn unreachable_point_fails() {
        let model = MechanismModel::table_one();
        let guess = model.configuration(&mid_point()).unwrap();
        let err = model.solve_configuration(&Vector2::new(10.0, 0.15), &guess).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }), "{err:?}");
        assert!(model.initial_guess(&Vector2::new(10.0, 0.15)).is_err());
    }

    #[test]
    fn jacobian_defining_identities() {
        let model = MechanismModel::table_one();
        let q = model.configuration(&mid_point()).unwrap();
        let jac = model.coordinate_jacobian(&q).unwrap();
        let product = model.constraint_jacobian(&q) * jac;
        assert_abs_diff_eq!(product.fixed_view::<2, 2>(0, 0).into_owned(), nalgebra::Matrix2::identity(), epsilon = 1e-12);
        assert_abs_diff_eq!(product.fixed_view::<2, 2>(2, 0).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let model = MechanismModel::table_one();
        let chi = mid_point();
        let q = model.configuration(&chi).unwrap();
        let jac = model.coordinate_jacobian(&q).unwrap();
        let delta = 1e-7;
        for axis in 0..2 {
            let mut e = Vector2::zeros();
            e[axis] = delta;
            let plus = model.solve_configuration(&(chi + e), &q).unwrap();
            let minus = model.solve_configuration(&(chi - e), &q).unwrap();
            let fd = (plus.0 - minus.0) / (2.0 * delta);
            let col = jac.column(axis).into_owned();
            assert!((fd - col).norm() < 1e-6 * jac.norm(), "axis {axis}: {}", (fd - col).norm());
        }
    }

    #[test]
    fn spring_angle_offsets() {
        let model = MechanismModel::table_one();
        assert_abs_diff_eq!(model.spring_angle(&JointConfig::new(0.0, 0.0, 0.0, -PI)), 0.0);
        assert_abs_diff_eq!(model.spring_angle(&JointConfig::new(0.0, 0.0, 0.0, -FRAC_PI_2)), FRAC_PI_2);
        let chi = mid_point();
        let q = model.configuration(&chi).unwrap();
        assert_abs_diff_eq!(model.eta(&chi, &q).unwrap(), model.spring_angle(&q), epsilon = 1e-12);
    }

    #[test]
    fn validation_rejects_bad_links() {
        let mut model = MechanismModel::table_one();
        model.lengths[1] = 0.0;
        assert!(model.validate().is_err());
        let mut model = MechanismModel::table_one();
        model.inertias[2] = -1.0;
        assert!(model.validate().is_err());
        assert!(MechanismModel::table_one().validate().is_ok());
    }
}
