//! Zero dynamics on the slice `y = const`: the coefficients of
//! `alpha xdd + beta xd^2 + gamma = 0`, inversion of a reference into the
//! ideal spring characteristic, the linearizing torque along the reference,
//! the center test and integration of the reduced dynamics.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::dynamics::{MassParams, MinimalFormPoint, MinimalFrame};
use crate::error::{Error, Result};
use crate::mechanism::MechanismModel;
use crate::reference::{PhaseMaps, RefSample, ReferenceTrajectory, Trajectory};
use crate::spring::{SpringFn, TabulatedSpring};

/// `|alpha|` below this is treated as leaving the valid window.
pub const ALPHA_EPS: f64 = 1e-12;
/// `|zeta_S|` below this means the spring cannot act on the zero dynamics.
pub const ZETA_EPS: f64 = 1e-12;

/// Zero-dynamics coefficients at one `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroDynCoeffs {
    pub x: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Gain of the spring torque in `gamma`.
    pub zeta_s: f64,
    /// Gravity part of `gamma`.
    pub zeta_u: f64,
    /// Spring deflection at `x`.
    pub theta: f64,
}

/// The spring-independent part of [`ZeroDynCoeffs`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SliceTerms {
    pub x: f64,
    pub alpha: f64,
    pub beta: f64,
    pub zeta_s: f64,
    pub zeta_u: f64,
    pub theta: f64,
}

impl SliceTerms {
    pub fn from_frame(frame: &MinimalFrame) -> Self {
        let m = &frame.m;
        let (b1, b2) = (frame.b.x, frame.b.y);
        let (mx, my) = (&frame.dm_dx, &frame.dm_dy);
        Self {
            x: frame.chi.x,
            alpha: m[(0, 0)] * b2 - m[(0, 1)] * b1,
            beta: -b1 * (mx[(0, 1)] - 0.5 * my[(0, 0)]) + 0.5 * b2 * mx[(0, 0)],
            zeta_s: b2 * frame.dq4.x - b1 * frame.dq4.y,
            zeta_u: b2 * frame.dug.x - b1 * frame.dug.y,
            theta: frame.theta,
        }
    }

    pub fn check_alpha(&self) -> Result<()> {
        if self.alpha.abs() < ALPHA_EPS || !self.alpha.is_finite() {
            Err(Error::AlphaVanishes { x: self.x })
        } else {
            Ok(())
        }
    }

    pub fn with_spring(&self, spring: &dyn SpringFn) -> ZeroDynCoeffs {
        ZeroDynCoeffs {
            x: self.x,
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.zeta_s * spring.torque(self.theta) + self.zeta_u,
            zeta_s: self.zeta_s,
            zeta_u: self.zeta_u,
            theta: self.theta,
        }
    }

    /// `-alpha rho_dd - beta rho_d`.
    pub fn ideal_gamma(&self, maps: &PhaseMaps) -> Result<f64> {
        Ok(-self.alpha * maps.rho_dd(self.x)? - self.beta * maps.rho_d(self.x)?)
    }

    /// Spring torque that realizes `gamma_hat` at this point.
    pub fn sigma(&self, gamma_hat: f64) -> Result<f64> {
        if self.zeta_s.abs() < ZETA_EPS || !self.zeta_s.is_finite() {
            return Err(Error::ZetaSVanishes { x: self.x });
        }
        Ok((gamma_hat - self.zeta_u) / self.zeta_s)
    }
}

/// Minimal-form frame at `(x, height)`, checked positive definite.
pub fn slice_frame(model: &MechanismModel, pm: &MassParams, height: f64, x: f64) -> Result<MinimalFrame> {
    let frame = MinimalFrame::build(model, pm, &Vector2::new(x, height))?;
    frame.check_positive_definite()?;
    Ok(frame)
}

pub fn slice_terms(model: &MechanismModel, pm: &MassParams, height: f64, x: f64) -> Result<SliceTerms> {
    let terms = SliceTerms::from_frame(&slice_frame(model, pm, height, x)?);
    terms.check_alpha()?;
    Ok(terms)
}

/// `alpha, beta, gamma` and the split `gamma = zeta_S S + zeta_U` at `(x, height)`.
pub fn abc(model: &MechanismModel, pm: &MassParams, spring: &dyn SpringFn, height: f64, x: f64) -> Result<ZeroDynCoeffs> {
    Ok(slice_terms(model, pm, height, x)?.with_spring(spring))
}

pub fn ideal_gamma(model: &MechanismModel, pm: &MassParams, maps: &PhaseMaps, height: f64, x: f64) -> Result<f64> {
    maps.rho_d(x)?;
    slice_terms(model, pm, height, x)?.ideal_gamma(maps)
}

/// One point of the ideal spring characteristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaSample {
    pub x: f64,
    pub theta: f64,
    pub sigma: f64,
    pub gamma_hat: f64,
    pub zeta_s: f64,
    pub zeta_u: f64,
}

impl SigmaSample {
    pub fn from_terms(terms: &SliceTerms, maps: &PhaseMaps) -> Result<Self> {
        let gamma_hat = terms.ideal_gamma(maps)?;
        Ok(Self {
            x: terms.x,
            theta: terms.theta,
            sigma: terms.sigma(gamma_hat)?,
            gamma_hat,
            zeta_s: terms.zeta_s,
            zeta_u: terms.zeta_u,
        })
    }
}

/// Ideal spring torque `sigma` paired with `theta = eta(x, height)` at each grid point, in grid order.
pub fn ideal_spring_curve(model: &MechanismModel, pm: &MassParams, maps: &PhaseMaps, height: f64, xs: &[f64]) -> Result<Vec<SigmaSample>> {
    xs.iter()
        .map(|&x| {
            maps.rho_d(x)?;
            SigmaSample::from_terms(&slice_terms(model, pm, height, x)?, maps)
        })
        .collect()
}

/// Abscissae closer than this are merged when tabulating.
pub const TABLE_MERGE_TOL: f64 = 1e-9;

/// Interpolating spring through the curve, sorted by `theta` with coincident knots merged.
pub fn sigma_table(curve: &[SigmaSample]) -> Result<TabulatedSpring> {
    let pts: Vec<(f64, f64)> = curve.iter().map(|s| (s.theta, s.sigma)).collect();
    TabulatedSpring::from_unsorted(&pts, TABLE_MERGE_TOL)
}

/// Linearizing torque on the slice at `(x, xdot)` with spring torque `sigma`
/// already known at this point.
pub fn nu_from_frame(frame: &MinimalFrame, xdot: f64, sigma: f64) -> Result<f64> {
    let c = frame.coriolis(&Vector2::new(xdot, 0.0));
    let g = frame.potential_gradient(sigma);
    let m = &frame.m;
    let (b1, b2) = (frame.b.x, frame.b.y);
    let den = m[(0, 1)] * b1 - m[(0, 0)] * b2;
    if den.abs() < ALPHA_EPS || !den.is_finite() {
        return Err(Error::ZeroInputGain { value: den });
    }
    Ok((m[(0, 1)] * (c.x + g.x) - m[(0, 0)] * (c.y + g.y)) / den)
}

/// `nu` at a reference sample with the spring replaced by the ideal `sigma` at that sample.
pub fn nu_on_reference(model: &MechanismModel, pm: &MassParams, maps: &PhaseMaps, height: f64, sample: &RefSample) -> Result<f64> {
    maps.rho_d(sample.x)?;
    let frame = slice_frame(model, pm, height, sample.x)?;
    let point = SigmaSample::from_terms(&SliceTerms::from_frame(&frame), maps)?;
    nu_from_frame(&frame, sample.xdot, point.sigma)
}

/// `-f_y / g_y` on the slice at `(x, xdot)` with the given spring.
pub fn residual_torque(model: &MechanismModel, pm: &MassParams, spring: &dyn SpringFn, height: f64, x: f64, xdot: f64) -> Result<f64> {
    let frame = slice_frame(model, pm, height, x)?;
    MinimalFormPoint::from_frame(frame, spring, &Vector2::new(xdot, 0.0))?
        .decomposition()
        .linearizing_torque()
}

/// Equilibrium of the ideal zero dynamics and the discrete center test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterReport {
    /// Secant root of `gamma_hat / alpha` within the bracket.
    pub x0: f64,
    pub omega_s: f64,
    pub x1: f64,
    pub x2: f64,
    /// Sample index of `x1`.
    pub index: usize,
}

impl CenterReport {
    pub fn is_center(&self) -> bool {
        self.omega_s > 0.0
    }
}

/// Center test from sampled `gamma_hat / alpha`, scanning adjacent pairs in sample order.
///
/// The pair `(N-1, 0)` closes the scan for periodic sample sets.
pub fn center_from_ratios(xs: &[f64], ratios: &[f64]) -> Result<CenterReport> {
    let n = xs.len().min(ratios.len());
    for i in 0..n {
        let j = (i + 1) % n;
        if j == i {
            break;
        }
        let (r1, r2) = (ratios[i], ratios[j]);
        if r1 * r2 < 0.0 && xs[j] != xs[i] {
            let omega_s = (r2 - r1) / (xs[j] - xs[i]);
            return Ok(CenterReport {
                x0: xs[i] - r1 / omega_s,
                omega_s,
                x1: xs[i],
                x2: xs[j],
                index: i,
            });
        }
    }
    Err(Error::NoEquilibrium)
}

/// Center test over reference samples.
pub fn center_indicator(model: &MechanismModel, pm: &MassParams, maps: &PhaseMaps, height: f64, samples: &[RefSample]) -> Result<CenterReport> {
    let mut xs = Vec::with_capacity(samples.len());
    let mut ratios = Vec::with_capacity(samples.len());
    for s in samples {
        let terms = slice_terms(model, pm, height, s.x)?;
        xs.push(s.x);
        ratios.push(terms.ideal_gamma(maps)? / terms.alpha);
    }
    center_from_ratios(&xs, &ratios)
}

/// Source of `(alpha, beta, gamma)` along `x`.
pub trait CoefficientField {
    fn coefficients(&self, x: f64) -> Result<(f64, f64, f64)>;

    /// `xdd` of the zero dynamics.
    fn acceleration(&self, x: f64, xdot: f64) -> Result<f64> {
        let (a, b, g) = self.coefficients(x)?;
        if a.abs() < ALPHA_EPS || !a.is_finite() {
            return Err(Error::AlphaVanishes { x });
        }
        Ok(-(b * xdot * xdot + g) / a)
    }
}

/// Zero dynamics of the mechanism with a given mass distribution and spring.
pub struct ZeroDynamics<'a> {
    pub model: &'a MechanismModel,
    pub pm: &'a MassParams,
    pub spring: &'a dyn SpringFn,
    pub height: f64,
}

impl CoefficientField for ZeroDynamics<'_> {
    fn coefficients(&self, x: f64) -> Result<(f64, f64, f64)> {
        let c = abc(self.model, self.pm, self.spring, self.height, x)?;
        Ok((c.alpha, c.beta, c.gamma))
    }
}

/// Integration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroDynOptions {
    /// Step (s); negative integrates backward in time.
    pub dt: f64,
    pub horizon: f64,
    /// Escape window for `x`.
    pub window: Option<(f64, f64)>,
    /// Tolerance on `x` for the return to the section.
    pub period_tol: f64,
    /// Repeat with `dt / 2` and report the end-state difference.
    pub check_convergence: bool,
}

impl ZeroDynOptions {
    pub fn new(dt: f64, horizon: f64) -> Self {
        Self {
            dt,
            horizon,
            window: None,
            period_tol: 1e-6,
            check_convergence: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroDynTrajectory {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub xdot: Vec<f64>,
    /// First return time to the section `xdot = 0`, same crossing direction.
    pub period: Option<f64>,
    /// `max(|dx|, |dxdot|)` between end states at `dt` and `dt / 2`.
    pub convergence: Option<f64>,
}

impl ZeroDynTrajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

fn rk4_step<F: CoefficientField + ?Sized>(field: &F, x: f64, v: f64, h: f64) -> Result<(f64, f64)> {
    let a1 = field.acceleration(x, v)?;
    let (x2, v2) = (x + 0.5 * h * v, v + 0.5 * h * a1);
    let a2 = field.acceleration(x2, v2)?;
    let (x3, v3) = (x + 0.5 * h * v2, v + 0.5 * h * a2);
    let a3 = field.acceleration(x3, v3)?;
    let (x4, v4) = (x + h * v3, v + h * a3);
    let a4 = field.acceleration(x4, v4)?;
    Ok((x + h / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4), v + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)))
}

fn integrate<F: CoefficientField + ?Sized>(field: &F, x0: f64, v0: f64, opts: &ZeroDynOptions) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if opts.dt == 0.0 || !opts.dt.is_finite() {
        return Err(Error::InvalidParameter("dt must be nonzero".into()));
    }
    let steps = (opts.horizon.abs() / opts.dt.abs()).round() as usize;
    let mut t = Vec::with_capacity(steps + 1);
    let mut xs = Vec::with_capacity(steps + 1);
    let mut vs = Vec::with_capacity(steps + 1);
    let (mut x, mut v) = (x0, v0);
    t.push(0.0);
    xs.push(x);
    vs.push(v);
    for k in 1..=steps {
        (x, v) = rk4_step(field, x, v, opts.dt)?;
        let tk = k as f64 * opts.dt;
        if let Some((lo, hi)) = opts.window {
            if !(x >= lo && x <= hi) {
                return Err(Error::Escape { t: tk, x });
            }
        }
        if !x.is_finite() || !v.is_finite() {
            return Err(Error::Escape { t: tk, x });
        }
        t.push(tk);
        xs.push(x);
        vs.push(v);
    }
    Ok((t, xs, vs))
}

/// A crossing of `xdot = 0`: time, position and direction (`+1` for a minimum of `x`).
fn section_crossings(t: &[f64], x: &[f64], v: &[f64]) -> Vec<(f64, f64, i8)> {
    let mut out = Vec::new();
    for k in 0..t.len().saturating_sub(1) {
        let (v0, v1) = (v[k], v[k + 1]);
        if v0 < 0.0 && v1 >= 0.0 || v0 > 0.0 && v1 <= 0.0 {
            let s = v0 / (v0 - v1);
            let h = t[k + 1] - t[k];
            // cubic Hermite for x on the step
            let (h00, h10, h01, h11) = (
                2.0 * s.powi(3) - 3.0 * s * s + 1.0,
                s.powi(3) - 2.0 * s * s + s,
                -2.0 * s.powi(3) + 3.0 * s * s,
                s.powi(3) - s * s,
            );
            let xc = h00 * x[k] + h10 * h * v0 + h01 * x[k + 1] + h11 * h * v1;
            out.push((t[k] + s * h, xc, if v0 < 0.0 { 1 } else { -1 }));
        }
    }
    out
}

fn detect_period<F: CoefficientField + ?Sized>(field: &F, t: &[f64], x: &[f64], v: &[f64], tol: f64) -> Option<f64> {
    let crossings = section_crossings(t, x, v);
    let (t_ref, x_ref, dir) = if v[0] == 0.0 {
        let a = field.acceleration(x[0], 0.0).ok()?;
        if a == 0.0 {
            return None;
        }
        (0.0, x[0], if a > 0.0 { 1 } else { -1 })
    } else {
        *crossings.first()?
    };
    crossings
        .iter()
        .find(|c| c.0 > t_ref && c.2 == dir && (c.1 - x_ref).abs() < tol)
        .map(|c| (c.0 - t_ref).abs())
}

/// RK4 integration of `alpha xdd + beta xd^2 + gamma = 0` from `(x0, xdot0)`.
pub fn simulate_field<F: CoefficientField + ?Sized>(field: &F, x0: f64, xdot0: f64, opts: &ZeroDynOptions) -> Result<ZeroDynTrajectory> {
    let (t, x, v) = integrate(field, x0, xdot0, opts)?;
    let convergence = if opts.check_convergence {
        let fine = ZeroDynOptions { dt: opts.dt / 2.0, ..*opts };
        let (_, xf, vf) = integrate(field, x0, xdot0, &fine)?;
        let (xe, ve) = (x[x.len() - 1], v[v.len() - 1]);
        Some((xe - xf[xf.len() - 1]).abs().max((ve - vf[vf.len() - 1]).abs()))
    } else {
        None
    };
    // time runs backward when dt < 0; detect on the absolute clock
    let tabs: Vec<f64> = t.iter().map(|s| s.abs()).collect();
    let vdir: Vec<f64> = if opts.dt < 0.0 { v.iter().map(|s| -s).collect() } else { v.clone() };
    let period = detect_period(field, &tabs, &x, &vdir, opts.period_tol);
    Ok(ZeroDynTrajectory {
        t,
        x,
        xdot: v,
        period,
        convergence,
    })
}

/// Zero-dynamics simulation of the mechanism with the given spring.
#[allow(clippy::too_many_arguments)]
pub fn simulate_zero_dynamics(
    model: &MechanismModel,
    pm: &MassParams,
    spring: &dyn SpringFn,
    height: f64,
    x0: f64,
    xdot0: f64,
    opts: &ZeroDynOptions,
) -> Result<ZeroDynTrajectory> {
    let field = ZeroDynamics { model, pm, spring, height };
    simulate_field(&field, x0, xdot0, opts)
}

/// Distance of a simulated `(x, xdot)` trajectory from the reference orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitDeviation {
    /// Hausdorff distance between the simulated and reference orbits in the
    /// `(x, xdot T / 2 pi)` plane (m).
    pub orbital: f64,
    /// Max `|x(t) - r_x(t)|` over the first reference period (m).
    pub pointwise: f64,
}

impl OrbitDeviation {
    pub fn relative_to(&self, stroke: f64) -> Self {
        Self {
            orbital: self.orbital / stroke,
            pointwise: self.pointwise / stroke,
        }
    }
}

/// Max over `points` of the distance to the closed-or-open polyline `path`.
fn one_sided(points: &[(f64, f64)], path: &[(f64, f64)]) -> f64 {
    let mut worst: f64 = 0.0;
    for &p in points {
        let mut best = f64::INFINITY;
        if path.len() == 1 {
            best = segment_distance_sq(p, path[0], path[0]);
        }
        for w in path.windows(2) {
            best = best.min(segment_distance_sq(p, w[0], w[1]));
        }
        worst = worst.max(best);
    }
    worst.sqrt()
}

/// Deviation of the trajectory `(t, x, xdot)` from the reference.
pub fn orbit_deviation(reference: &ReferenceTrajectory, t: &[f64], x: &[f64], xdot: &[f64]) -> OrbitDeviation {
    let period = reference.period();
    let scale = period / (2.0 * std::f64::consts::PI);
    let m = 2000;
    let orbit: Vec<(f64, f64)> = (0..=m)
        .map(|j| {
            let s = j as f64 * period / m as f64;
            (reference.position(s), reference.velocity(s) * scale)
        })
        .collect();
    let sim: Vec<(f64, f64)> = x.iter().zip(xdot).map(|(p, v)| (*p, v * scale)).collect();
    let pointwise = t
        .iter()
        .zip(x)
        .filter(|(s, _)| s.abs() <= period * (1.0 + 1e-12))
        .map(|(s, p)| (p - reference.position(*s)).abs())
        .fold(0.0, f64::max);
    let orbital = if sim.is_empty() {
        f64::INFINITY
    } else {
        one_sided(&sim, &orbit).max(one_sided(&orbit, &sim))
    };
    OrbitDeviation { orbital, pointwise }
}

fn segment_distance_sq(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len = dx * dx + dy * dy;
    let s = if len > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (ex, ey) = (a.0 + s * dx - p.0, a.1 + s * dy - p.1);
    ex * ex + ey * ey
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference::make_cosine_reference;
    use crate::spring::{SpringParams, ZeroSpring};
    use approx::assert_abs_diff_eq;

    fn model() -> MechanismModel {
        MechanismModel::table_one()
    }

    const Y: f64 = 0.15;

    struct Harmonic;
    impl CoefficientField for Harmonic {
        fn coefficients(&self, x: f64) -> Result<(f64, f64, f64)> {
            Ok((1.0, 0.0, x))
        }
    }

    #[test]
    fn harmonic_oscillator_double() {
        let opts = ZeroDynOptions::new(1e-3, 20.0 * std::f64::consts::PI);
        let tr = simulate_field(&Harmonic, 1.0, 0.0, &opts).unwrap();
        let period = tr.period.unwrap();
        assert_abs_diff_eq!(period, 2.0 * std::f64::consts::PI, epsilon = 1e-6);
        let e0 = 0.5;
        let drift = tr
            .x
            .iter()
            .zip(&tr.xdot)
            .map(|(x, v)| (0.5 * v * v + 0.5 * x * x - e0).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-8, "{drift}");
    }

    #[test]
    fn split_identity_for_two_springs() {
        let model = model();
        let pm = MassParams::new(0.05, 0.02, -0.01, 0.02);
        let s1 = SpringParams::linear(1.5, 0.4);
        let s2 = SpringParams::linear(-0.3, 2.0);
        for x in [0.0, 0.04, 0.08] {
            let frame = slice_frame(&model, &pm, Y, x).unwrap();
            for s in [&s1 as &dyn SpringFn, &s2] {
                let c = abc(&model, &pm, s, Y, x).unwrap();
                // direct formula from the potential gradient
                let g = frame.potential_gradient(s.torque(frame.theta));
                let direct = -frame.b.x * g.y + frame.b.y * g.x;
                assert!((c.gamma - direct).abs() < 1e-10 * (1.0 + direct.abs()));
                assert!((c.gamma - (c.zeta_s * s.torque(c.theta) + c.zeta_u)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn no_spring_no_gravity_gamma_vanishes() {
        let model = MechanismModel {
            gravity: 0.0,
            ..model()
        };
        let c = abc(&model, &MassParams::default(), &ZeroSpring, Y, 0.03).unwrap();
        assert_eq!(c.gamma, 0.0);
    }

    #[test]
    fn acceleration_field_even_in_velocity() {
        let model = model();
        let pm = MassParams::default();
        let s = SpringParams::linear(0.5, 1.5);
        let f = ZeroDynamics {
            model: &model,
            pm: &pm,
            spring: &s,
            height: Y,
        };
        for (x, v) in [(0.01, 0.3), (0.05, -1.7), (0.07, 1e-3)] {
            assert_eq!(f.acceleration(x, v).unwrap().to_bits(), f.acceleration(x, -v).unwrap().to_bits());
        }
    }

    #[test]
    fn endpoint_and_reconstruction_identities() {
        let model = model();
        let pm = MassParams::new(0.03, 0.01, 0.0, 0.01);
        let r = make_cosine_reference(0.03, &[0.05, 0.012], 0.5, Y).unwrap();
        let maps = r.phase_maps(200).unwrap();
        let lo = r.x_min();
        let t = slice_terms(&model, &pm, Y, lo).unwrap();
        assert_eq!(t.ideal_gamma(&maps).unwrap(), -t.alpha * maps.rho_dd(lo).unwrap());
        let xs: Vec<f64> = maps.knots().to_vec();
        let curve = ideal_spring_curve(&model, &pm, &maps, Y, &xs).unwrap();
        for s in &curve {
            assert!((s.zeta_s * s.sigma + s.zeta_u - s.gamma_hat).abs() < 1e-12);
        }
        assert_eq!(ideal_spring_curve(&model, &pm, &maps, Y, &[0.03]).unwrap().len(), 1);
        assert!(ideal_gamma(&model, &pm, &maps, Y, r.x_max() + 0.01).is_err());
    }

    #[test]
    fn nu_matches_residual_torque_with_tabulated_sigma() {
        let model = model();
        let pm = MassParams::new(0.02, 0.04, 0.01, -0.02);
        let r = make_cosine_reference(0.03, &[0.05, 0.012], 0.5, Y).unwrap();
        let maps = r.phase_maps(100).unwrap();
        let samples = r.sample(100);
        let xs: Vec<f64> = samples.iter().map(|s| s.x).collect();
        let table = sigma_table(&ideal_spring_curve(&model, &pm, &maps, Y, &xs).unwrap()).unwrap();
        for s in samples.iter().step_by(7) {
            let nu = nu_on_reference(&model, &pm, &maps, Y, s).unwrap();
            let u = residual_torque(&model, &pm, &table, Y, s.x, s.xdot).unwrap();
            assert!((nu - u).abs() < 1e-9, "{nu} {u}");
        }
    }

    #[test]
    fn residual_torque_even_in_velocity() {
        let model = model();
        let pm = MassParams::default();
        let s = SpringParams::linear(0.2, 1.6);
        let a = residual_torque(&model, &pm, &s, Y, 0.05, 0.8).unwrap();
        let b = residual_torque(&model, &pm, &s, Y, 0.05, -0.8).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn center_stub_cases() {
        let xs: Vec<f64> = (0..21).map(|i| i as f64 * 0.01).collect();
        let up: Vec<f64> = xs.iter().map(|x| x - 0.1 + 0.005).collect();
        let c = center_from_ratios(&xs, &up).unwrap();
        assert_abs_diff_eq!(c.omega_s, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.x0, 0.095, epsilon = 1e-12);
        let down: Vec<f64> = up.iter().map(|r| -r).collect();
        assert_abs_diff_eq!(center_from_ratios(&xs, &down).unwrap().omega_s, -1.0, epsilon = 1e-12);
        let flat: Vec<f64> = xs.iter().map(|x| x + 1.0).collect();
        assert_eq!(center_from_ratios(&xs, &flat).unwrap_err(), Error::NoEquilibrium);
    }

    #[test]
    fn center_sign_is_mass_scale_invariant() {
        let base = model();
        let r = make_cosine_reference(0.03, &[0.05, 0.012], 0.5, Y).unwrap();
        let maps = r.phase_maps(200).unwrap();
        let samples = r.sample(200);
        let pm = MassParams::new(0.05, 0.02, 0.0, 0.0);
        let c = center_indicator(&base, &pm, &maps, Y, &samples).unwrap();
        assert!(c.is_center());
        let k = 3.7;
        let scaled = MechanismModel {
            masses: base.masses.map(|m| m * k),
            inertias: base.inertias.map(|j| j * k),
            ..base.clone()
        };
        let pm_k = MassParams::new(pm.m_a3 * k, pm.m_a4 * k, 0.0, 0.0);
        let ck = center_indicator(&scaled, &pm_k, &maps, Y, &samples).unwrap();
        assert_eq!(c.omega_s.signum(), ck.omega_s.signum());
    }

    #[test]
    fn time_reversal_mirror() {
        let model = model();
        let pm = MassParams::default();
        let r = make_cosine_reference(0.03, &[0.05, 0.012], 0.5, Y).unwrap();
        let maps = r.phase_maps(200).unwrap();
        let xs: Vec<f64> = maps.knots().to_vec();
        let table = sigma_table(&ideal_spring_curve(&model, &pm, &maps, Y, &xs).unwrap()).unwrap();
        let fwd = simulate_zero_dynamics(&model, &pm, &table, Y, r.x_min(), 0.0, &ZeroDynOptions::new(1e-4, 0.1)).unwrap();
        let bwd = simulate_zero_dynamics(&model, &pm, &table, Y, r.x_min(), 0.0, &ZeroDynOptions::new(-1e-4, 0.1)).unwrap();
        let worst = fwd.x.iter().zip(&bwd.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-7);
    }

    #[test]
    fn escape_is_reported() {
        let opts = ZeroDynOptions {
            window: Some((-0.5, 0.5)),
            ..ZeroDynOptions::new(1e-3, 10.0)
        };
        assert!(matches!(simulate_field(&Harmonic, 1.0, 0.0, &opts), Err(Error::Escape { .. })));
    }

    #[test]
    fn orbit_deviation_of_reference_itself() {
        let r = make_cosine_reference(0.03, &[0.05, 0.012], 0.5, Y).unwrap();
        let mut s = r.sample(500);
        s.push(r.at(0.5));
        let t: Vec<f64> = s.iter().map(|p| p.t).collect();
        let x: Vec<f64> = s.iter().map(|p| p.x).collect();
        let v: Vec<f64> = s.iter().map(|p| p.xdot).collect();
        let d = orbit_deviation(&r, &t, &x, &v);
        assert!(d.pointwise == 0.0 && d.orbital < 1e-4, "{d:?}");
        let shifted: Vec<f64> = x.iter().map(|p| p + 1e-3).collect();
        let d = orbit_deviation(&r, &t, &shifted, &v);
        assert_abs_diff_eq!(d.pointwise, 1e-3, epsilon = 1e-12);
        // polyline chord error on top of the shift
        assert!(d.orbital <= 1e-3 + 1e-4, "{d:?}");
        // half an orbit is far from the whole one
        let d = orbit_deviation(&r, &t[..250], &x[..250], &v[..250]);
        assert!(d.orbital > 0.05, "{d:?}");
    }
}
