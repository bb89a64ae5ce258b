//! Periodic horizontal references with time-reversal symmetry about each
//! velocity zero, their sampling, and the phase maps `x -> rdot^2`, `x -> rddot`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

/// A scalar periodic trajectory.
pub trait Trajectory {
    fn period(&self) -> f64;
    fn position(&self, t: f64) -> f64;
    fn velocity(&self, t: f64) -> f64;

    /// Times in `[0, T)` where the velocity vanishes.
    fn turning_times(&self) -> Vec<f64> {
        let period = self.period();
        let steps = 4000;
        let dt = period / steps as f64;
        let mut out = Vec::new();
        for j in 0..steps {
            let (a, b) = (j as f64 * dt, (j + 1) as f64 * dt);
            let (va, vb) = (self.velocity(a), self.velocity(b));
            if va == 0.0 {
                out.push(a);
            } else if va * vb < 0.0 {
                let (mut lo, mut hi, mut vlo) = (a, b, va);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    let vm = self.velocity(mid);
                    if vm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if vm * vlo < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        vlo = vm;
                    }
                }
                out.push(0.5 * (lo + hi));
            }
        }
        out
    }
}

/// One sample `(t, r_x, rdot_x, rddot_x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefSample {
    pub t: f64,
    pub x: f64,
    pub xdot: f64,
    pub xddot: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    /// `c0 + sum_k c_k cos(2 pi k t / T)`.
    Cosine { c0: f64, coefficients: Vec<f64> },
    /// Jerk-limited trapezoidal velocity wave.
    Trapezoid(TrapezoidWave),
}

/// Piecewise constant-jerk description of one period.
#[derive(Debug, Clone, PartialEq)]
pub struct TrapezoidWave {
    starts: Vec<f64>,
    jerks: Vec<f64>,
    /// `(position, velocity, acceleration)` at each segment start.
    states: Vec<(f64, f64, f64)>,
    pub peak_velocity: f64,
    pub peak_acceleration: f64,
}

impl TrapezoidWave {
    fn eval(&self, t: f64) -> (f64, f64, f64) {
        let i = self.starts.partition_point(|&s| s <= t).saturating_sub(1);
        let tau = t - self.starts[i];
        let (p, v, a) = self.states[i];
        let j = self.jerks[i];
        (
            p + v * tau + 0.5 * a * tau * tau + j * tau * tau * tau / 6.0,
            v + a * tau + 0.5 * j * tau * tau,
            a + j * tau,
        )
    }
}

/// A `T_r`-periodic horizontal reference at constant height.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    period: f64,
    height: f64,
    profile: Profile,
    x_min: f64,
    x_max: f64,
    turns: [f64; 2],
}

fn check_period(period: f64, height: f64) -> Result<()> {
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::InvalidParameter(format!("period must be positive, got {period}")));
    }
    if !height.is_finite() {
        return Err(Error::InvalidParameter("height must be finite".into()));
    }
    Ok(())
}

/// Even truncated cosine series; symmetric about `t = 0` and `t = T/2` by construction.
pub fn make_cosine_reference(c0: f64, coefficients: &[f64], period: f64, height: f64) -> Result<ReferenceTrajectory> {
    check_period(period, height)?;
    let reference = ReferenceTrajectory::assemble(
        period,
        height,
        Profile::Cosine {
            c0,
            coefficients: coefficients.to_vec(),
        },
        [0.0, period / 2.0],
    );
    // the velocity must keep one strict sign on each open half period
    let grid = 4096;
    for half in 0..2 {
        let start = half as f64 * period / 2.0;
        let values: Vec<f64> = (1..grid).map(|j| reference.velocity(start + j as f64 * period / (2.0 * grid as f64))).collect();
        let peak = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if peak == 0.0 {
            return Err(Error::ExtraVelocityZeros);
        }
        let sign = values[0].signum();
        if values.iter().any(|v| v.signum() != sign || v.abs() < 1e-9 * peak) {
            return Err(Error::ExtraVelocityZeros);
        }
    }
    Ok(reference)
}

/// Default fraction of each velocity ramp spent at non-zero jerk.
pub const DEFAULT_SMOOTHING: f64 = 0.5;

/// Trapezoidal velocity wave between `x_min` and `x_max` with jerk-limited corners.
///
/// `cruise_fraction` is the share of the period spent at constant speed.
pub fn make_scurve_reference(x_min: f64, x_max: f64, cruise_fraction: f64, period: f64, height: f64) -> Result<ReferenceTrajectory> {
    make_scurve_reference_with(x_min, x_max, cruise_fraction, DEFAULT_SMOOTHING, period, height)
}

/// As [`make_scurve_reference`], with `smoothing` the fraction of each
/// velocity ramp spent at non-zero jerk (`1` gives triangular acceleration pulses).
pub fn make_scurve_reference_with(
    x_min: f64,
    x_max: f64,
    cruise_fraction: f64,
    smoothing: f64,
    period: f64,
    height: f64,
) -> Result<ReferenceTrajectory> {
    check_period(period, height)?;
    if !(x_min < x_max) {
        return Err(Error::InvalidParameter(format!("x_min ({x_min}) must be below x_max ({x_max})")));
    }
    if !(cruise_fraction > 0.0 && cruise_fraction < 1.0) {
        return Err(Error::InfeasibleTiming(format!("cruise fraction {cruise_fraction} outside (0, 1)")));
    }
    if !(smoothing > 0.0 && smoothing <= 1.0) {
        return Err(Error::InfeasibleTiming(format!("smoothing {smoothing} outside (0, 1]")));
    }
    let ramp = (1.0 - cruise_fraction) * period / 2.0;
    let cruise = cruise_fraction * period / 2.0;
    let jerk_time = smoothing * ramp / 2.0;
    let hold = ramp - 2.0 * jerk_time;
    // unit peak acceleration, starting mid-ramp at the lower turning point
    let j = 1.0 / jerk_time;
    let segments = [
        (hold / 2.0, 0.0),
        (jerk_time, -j),
        (cruise, 0.0),
        (jerk_time, -j),
        (hold, 0.0),
        (jerk_time, j),
        (cruise, 0.0),
        (jerk_time, j),
        (hold / 2.0, 0.0),
    ];
    let build = |scale: f64, origin: f64| -> TrapezoidWave {
        let mut starts = Vec::new();
        let mut jerks = Vec::new();
        let mut states = Vec::new();
        let (mut t, mut p, mut v, mut a) = (0.0, origin, 0.0, scale);
        for &(duration, jerk) in &segments {
            if duration <= 0.0 {
                continue;
            }
            let jerk = jerk * scale;
            starts.push(t);
            jerks.push(jerk);
            states.push((p, v, a));
            let d = duration;
            p += v * d + 0.5 * a * d * d + jerk * d * d * d / 6.0;
            v += a * d + 0.5 * jerk * d * d;
            a += jerk * d;
            t += d;
        }
        TrapezoidWave {
            starts,
            jerks,
            states,
            peak_velocity: scale * (ramp - jerk_time) / 2.0,
            peak_acceleration: scale,
        }
    };
    let unit = build(1.0, 0.0);
    let unit_stroke = unit.eval(period / 2.0).0;
    if !(unit_stroke > 0.0) {
        return Err(Error::InfeasibleTiming("degenerate velocity profile".into()));
    }
    let wave = build((x_max - x_min) / unit_stroke, x_min);
    Ok(ReferenceTrajectory::assemble(period, height, Profile::Trapezoid(wave), [0.0, period / 2.0]))
}

impl ReferenceTrajectory {
    fn assemble(period: f64, height: f64, profile: Profile, turns: [f64; 2]) -> Self {
        let mut r = Self {
            period,
            height,
            profile,
            x_min: 0.0,
            x_max: 0.0,
            turns,
        };
        let a = r.position(turns[0]);
        let b = r.position(turns[1]);
        r.x_min = a.min(b);
        r.x_max = a.max(b);
        r
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn stroke(&self) -> f64 {
        self.x_max - self.x_min
    }

    fn wrap(&self, t: f64) -> f64 {
        t.rem_euclid(self.period)
    }

    pub fn acceleration(&self, t: f64) -> f64 {
        match &self.profile {
            Profile::Cosine { coefficients, .. } => {
                let w = 2.0 * PI / self.period;
                -coefficients
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let kw = (k + 1) as f64 * w;
                        c * kw * kw * (kw * t).cos()
                    })
                    .sum::<f64>()
            }
            Profile::Trapezoid(wave) => wave.eval(self.wrap(t)).2,
        }
    }

    /// Peak speed of the profile.
    pub fn peak_velocity(&self) -> f64 {
        match &self.profile {
            Profile::Trapezoid(wave) => wave.peak_velocity.abs(),
            Profile::Cosine { .. } => (0..4096)
                .map(|j| self.velocity(j as f64 * self.period / 4096.0).abs())
                .fold(0.0, f64::max),
        }
    }

    pub fn at(&self, t: f64) -> RefSample {
        RefSample {
            t,
            x: self.position(t),
            xdot: self.velocity(t),
            xddot: self.acceleration(t),
        }
    }

    /// `n` samples over one period at `t_i = i T / n`, endpoint excluded.
    pub fn sample(&self, n: usize) -> Vec<RefSample> {
        let ts = self.period / n as f64;
        (0..n).map(|i| self.at(i as f64 * ts)).collect()
    }

    /// Phase maps from the half period between the two turning points.
    pub fn phase_maps(&self, resolution: usize) -> Result<PhaseMaps> {
        let [t0, t1] = self.turns;
        let resolution = resolution.max(2);
        let ts = self.period / resolution as f64;
        let mut times: Vec<f64> = (0..).map(|j| t0 + j as f64 * ts).take_while(|t| *t < t1 - 0.5 * ts).collect();
        times.push(t1);
        let mut knots: Vec<(f64, f64, f64)> = times
            .iter()
            .map(|&t| {
                let v = self.velocity(t);
                (self.position(t), v * v, self.acceleration(t))
            })
            .collect();
        let last = knots.len() - 1;
        knots[0].1 = 0.0;
        knots[last].1 = 0.0;
        if knots[last].0 < knots[0].0 {
            knots.reverse();
        }
        if knots.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::NonMonotoneHalfPeriod);
        }
        Ok(PhaseMaps {
            x: knots.iter().map(|k| k.0).collect(),
            rho_d: knots.iter().map(|k| k.1).collect(),
            rho_dd: knots.iter().map(|k| k.2).collect(),
        })
    }
}

impl Trajectory for ReferenceTrajectory {
    fn period(&self) -> f64 {
        self.period
    }

    fn position(&self, t: f64) -> f64 {
        match &self.profile {
            Profile::Cosine { c0, coefficients } => {
                let w = 2.0 * PI / self.period;
                c0 + coefficients
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * ((k + 1) as f64 * w * t).cos())
                    .sum::<f64>()
            }
            Profile::Trapezoid(wave) => wave.eval(self.wrap(t)).0,
        }
    }

    fn velocity(&self, t: f64) -> f64 {
        match &self.profile {
            Profile::Cosine { coefficients, .. } => {
                let w = 2.0 * PI / self.period;
                -coefficients
                    .iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let kw = (k + 1) as f64 * w;
                        c * kw * (kw * t).sin()
                    })
                    .sum::<f64>()
            }
            Profile::Trapezoid(wave) => wave.eval(self.wrap(t)).1,
        }
    }

    fn turning_times(&self) -> Vec<f64> {
        self.turns.to_vec()
    }
}

/// Outcome of a time-reversal symmetry check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub ok: bool,
    /// Worst `|r(t0 + t) - r(t0 - t)|` (m).
    pub position_violation: f64,
    /// Worst `|rdot(t0 + t) + rdot(t0 - t)|` (m/s).
    pub velocity_violation: f64,
}

/// Check mirror symmetry of position and anti-symmetry of velocity about every velocity zero.
pub fn check_symmetry<T: Trajectory + ?Sized>(traj: &T, tol: f64) -> SymmetryReport {
    let period = traj.period();
    let grid = 1000;
    let mut pos: f64 = 0.0;
    let mut vel: f64 = 0.0;
    for t0 in traj.turning_times() {
        for j in 1..=grid {
            let t = j as f64 * period / (2.0 * grid as f64);
            pos = pos.max((traj.position(t0 + t) - traj.position(t0 - t)).abs());
            vel = vel.max((traj.velocity(t0 + t) + traj.velocity(t0 - t)).abs());
        }
    }
    SymmetryReport {
        ok: pos < tol && vel < tol,
        position_violation: pos,
        velocity_violation: vel,
    }
}

/// `rho_d(x) = rdot^2` and `rho_dd(x) = rddot` as linear interpolants over the reference window.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMaps {
    x: Vec<f64>,
    rho_d: Vec<f64>,
    rho_dd: Vec<f64>,
}

/// Slack on the window bounds when evaluating the phase maps.
const WINDOW_SLACK: f64 = 1e-12;

impl PhaseMaps {
    pub fn window(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    fn locate(&self, x: f64) -> Result<(usize, f64)> {
        let (lo, hi) = self.window();
        if x < lo - WINDOW_SLACK || x > hi + WINDOW_SLACK {
            return Err(Error::OutsideWindow { x, lo, hi });
        }
        let x = x.clamp(lo, hi);
        let i = self.x.partition_point(|&k| k <= x).saturating_sub(1).min(self.x.len() - 2);
        let w = (x - self.x[i]) / (self.x[i + 1] - self.x[i]);
        Ok((i, w))
    }

    pub fn rho_d(&self, x: f64) -> Result<f64> {
        let (i, w) = self.locate(x)?;
        Ok(self.rho_d[i] + w * (self.rho_d[i + 1] - self.rho_d[i]))
    }

    pub fn rho_dd(&self, x: f64) -> Result<f64> {
        let (i, w) = self.locate(x)?;
        Ok(self.rho_dd[i] + w * (self.rho_dd[i + 1] - self.rho_dd[i]))
    }
}
