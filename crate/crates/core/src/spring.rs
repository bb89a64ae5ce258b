//! Torsional spring characteristics: the parametric piecewise-linear model and
//! tabulated characteristics.

use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A scalar torque-angle characteristic `theta -> tau_s`.
pub trait SpringFn: Send + Sync {
    /// Spring torque (N m) at deflection `theta` (rad).
    fn torque(&self, theta: f64) -> f64;
    /// Elastic potential (J), with an arbitrary but fixed datum.
    fn potential(&self, theta: f64) -> f64;
}

/// No spring.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroSpring;

impl SpringFn for ZeroSpring {
    fn torque(&self, _theta: f64) -> f64 {
        0.0
    }
    fn potential(&self, _theta: f64) -> f64 {
        0.0
    }
}

impl<S: SpringFn + ?Sized> SpringFn for &S {
    fn torque(&self, theta: f64) -> f64 {
        (**self).torque(theta)
    }
    fn potential(&self, theta: f64) -> f64 {
        (**self).potential(theta)
    }
}

/// A positive/negative sub-spring pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubSpringPair {
    /// Slope of the branch active for `theta >= theta_pos`.
    pub k_pos: f64,
    pub theta_pos: f64,
    /// Slope of the branch active for `theta <= theta_neg`.
    pub k_neg: f64,
    pub theta_neg: f64,
}

/// Baseline linear spring plus `n` sub-spring pairs.
///
/// Flat layout (`d = 2 + 4n`): `k0, theta0, k+_1, theta+_1, k-_1, theta-_1, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpringParams {
    pub k0: f64,
    pub theta0: f64,
    pub pairs: Vec<SubSpringPair>,
}

impl SpringParams {
    pub fn linear(k0: f64, theta0: f64) -> Self {
        Self { k0, theta0, pairs: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    pub fn dimension(n: usize) -> usize {
        2 + 4 * n
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(Self::dimension(self.n()));
        v.push(self.k0);
        v.push(self.theta0);
        for p in &self.pairs {
            v.extend_from_slice(&[p.k_pos, p.theta_pos, p.k_neg, p.theta_neg]);
        }
        v
    }

    pub fn from_flat(v: &[f64]) -> Result<Self> {
        if v.len() < 2 || !(v.len() - 2).is_multiple_of(4) {
            return Err(Error::InvalidParameter(format!("spring vector length {} is not 2 + 4n", v.len())));
        }
        let pairs = v[2..]
            .chunks_exact(4)
            .map(|c| SubSpringPair {
                k_pos: c[0],
                theta_pos: c[1],
                k_neg: c[2],
                theta_neg: c[3],
            })
            .collect();
        Ok(Self { k0: v[0], theta0: v[1], pairs })
    }

    /// Same characteristic with `extra` inert pairs appended (zero slopes).
    pub fn padded(&self, extra: usize, threshold: f64) -> Self {
        let mut out = self.clone();
        out.pairs.extend((0..extra).map(|_| SubSpringPair {
            k_pos: 0.0,
            theta_pos: threshold,
            k_neg: 0.0,
            theta_neg: threshold,
        }));
        out
    }

    /// Upper bound on the local slope magnitude.
    pub fn slope_bound(&self) -> f64 {
        self.k0.abs() + self.pairs.iter().map(|p| p.k_pos.abs() + p.k_neg.abs()).sum::<f64>()
    }

    /// Thresholds of the pairs with non-zero slope.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for p in &self.pairs {
            if p.k_pos != 0.0 {
                out.push(p.theta_pos);
            }
            if p.k_neg != 0.0 {
                out.push(p.theta_neg);
            }
        }
        out
    }
}

/// Evaluate `S(p_s, theta)`.
pub fn eval_spring(p: &SpringParams, theta: f64) -> f64 {
    let mut torque = p.k0 * (theta - p.theta0);
    for pair in &p.pairs {
        if theta >= pair.theta_pos {
            torque += pair.k_pos * (theta - pair.theta_pos);
        }
        if theta <= pair.theta_neg {
            torque += pair.k_neg * (theta - pair.theta_neg);
        }
    }
    torque
}

impl SpringFn for SpringParams {
    fn torque(&self, theta: f64) -> f64 {
        eval_spring(self, theta)
    }

    fn potential(&self, theta: f64) -> f64 {
        let mut e = 0.5 * self.k0 * (theta - self.theta0).powi(2);
        for pair in &self.pairs {
            if theta >= pair.theta_pos {
                e += 0.5 * pair.k_pos * (theta - pair.theta_pos).powi(2);
            }
            if theta <= pair.theta_neg {
                e += 0.5 * pair.k_neg * (theta - pair.theta_neg).powi(2);
            }
        }
        e
    }
}

/// Admissible box for spring parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpringBounds {
    /// Maximum slope magnitude (N m/rad).
    pub k_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl SpringBounds {
    pub fn lower(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0, self.theta_min];
        for _ in 0..n {
            v.extend_from_slice(&[-self.k_max, self.theta_min, -self.k_max, self.theta_min]);
        }
        v
    }

    pub fn upper(&self, n: usize) -> Vec<f64> {
        let mut v = vec![self.k_max, self.theta_max];
        for _ in 0..n {
            v.extend_from_slice(&[self.k_max, self.theta_max, self.k_max, self.theta_max]);
        }
        v
    }
}

/// Report every bound violated by `p`.
pub fn validate_params(p: &SpringParams, bounds: &SpringBounds) -> std::result::Result<(), Vec<String>> {
    let mut violations = Vec::new();
    if p.k0 < 0.0 {
        violations.push(format!("k0 < 0 ({})", p.k0));
    }
    if p.k0 > bounds.k_max {
        violations.push(format!("k0 > k_max ({} > {})", p.k0, bounds.k_max));
    }
    let mut theta = |name: String, value: f64| {
        if value < bounds.theta_min {
            violations.push(format!("{name} < theta_min ({value} < {})", bounds.theta_min));
        }
        if value > bounds.theta_max {
            violations.push(format!("{name} > theta_max ({value} > {})", bounds.theta_max));
        }
    };
    theta("theta0".into(), p.theta0);
    for (j, pair) in p.pairs.iter().enumerate() {
        theta(format!("theta+_{}", j + 1), pair.theta_pos);
        theta(format!("theta-_{}", j + 1), pair.theta_neg);
    }
    for (j, pair) in p.pairs.iter().enumerate() {
        for (name, k) in [("k+", pair.k_pos), ("k-", pair.k_neg)] {
            if k.abs() > bounds.k_max {
                violations.push(format!("|{name}_{}| > k_max ({k})", j + 1));
            }
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Linear interpolant through `(theta, torque)` knots with constant hold
/// outside the knot range.
#[derive(Debug)]
pub struct TabulatedSpring {
    theta: Vec<f64>,
    torque: Vec<f64>,
    /// Integral of the interpolant from the first knot.
    cumulative: Vec<f64>,
    warned: AtomicBool,
}

impl Clone for TabulatedSpring {
    fn clone(&self) -> Self {
        Self {
            theta: self.theta.clone(),
            torque: self.torque.clone(),
            cumulative: self.cumulative.clone(),
            warned: AtomicBool::new(self.warned.load(Ordering::Relaxed)),
        }
    }
}

impl PartialEq for TabulatedSpring {
    fn eq(&self, other: &Self) -> bool {
        self.theta == other.theta && self.torque == other.torque
    }
}

/// Build the interpolating characteristic from strictly increasing samples.
pub fn tabulate_ideal(samples: &[(f64, f64)]) -> Result<TabulatedSpring> {
    TabulatedSpring::new(samples)
}

impl TabulatedSpring {
    pub fn new(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyTable);
        }
        for (index, w) in samples.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(Error::NonMonotoneAbscissa { index: index + 1 });
            }
        }
        let theta: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let torque: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let mut cumulative = Vec::with_capacity(theta.len());
        cumulative.push(0.0);
        for i in 1..theta.len() {
            let area = 0.5 * (torque[i] + torque[i - 1]) * (theta[i] - theta[i - 1]);
            cumulative.push(cumulative[i - 1] + area);
        }
        Ok(Self {
            theta,
            torque,
            cumulative,
            warned: AtomicBool::new(false),
        })
    }

    /// Sort arbitrary samples and average those whose abscissae agree within `merge_tol`.
    pub fn from_unsorted(samples: &[(f64, f64)], merge_tol: f64) -> Result<Self> {
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64, usize)> = Vec::with_capacity(sorted.len());
        for (t, v) in sorted {
            match merged.last_mut() {
                Some(last) if (t - last.0 / last.2 as f64).abs() <= merge_tol => {
                    last.0 += t;
                    last.1 += v;
                    last.2 += 1;
                }
                _ => merged.push((t, v, 1)),
            }
        }
        let knots: Vec<(f64, f64)> = merged.into_iter().map(|(t, v, c)| (t / c as f64, v / c as f64)).collect();
        Self::new(&knots)
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.theta.iter().copied().zip(self.torque.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.theta[0], self.theta[self.theta.len() - 1])
    }

    /// Warns once per table; excursions within a small fraction of the range
    /// (integrator stages overshooting a turn) stay silent.
    fn warn_outside(&self, theta: f64) {
        let (lo, hi) = self.range();
        let slack = 1e-4 * (hi - lo);
        if (theta < lo - slack || theta > hi + slack) && !self.warned.swap(true, Ordering::Relaxed) {
            log::warn!("spring table queried at {theta:.6} rad outside [{lo:.6}, {hi:.6}]; holding end value");
        }
    }

    /// Index `i` with `theta[i] <= t < theta[i + 1]`.
    fn segment(&self, t: f64) -> usize {
        let idx = self.theta.partition_point(|&k| k <= t);
        idx.saturating_sub(1).min(self.theta.len().saturating_sub(2))
    }
}

impl SpringFn for TabulatedSpring {
    fn torque(&self, theta: f64) -> f64 {
        let n = self.theta.len();
        if theta <= self.theta[0] {
            if theta < self.theta[0] {
                self.warn_outside(theta);
            }
            return self.torque[0];
        }
        if theta >= self.theta[n - 1] {
            if theta > self.theta[n - 1] {
                self.warn_outside(theta);
            }
            return self.torque[n - 1];
        }
        let i = self.segment(theta);
        let w = (theta - self.theta[i]) / (self.theta[i + 1] - self.theta[i]);
        self.torque[i] + w * (self.torque[i + 1] - self.torque[i])
    }

    fn potential(&self, theta: f64) -> f64 {
        let n = self.theta.len();
        if theta <= self.theta[0] {
            return self.torque[0] * (theta - self.theta[0]);
        }
        if theta >= self.theta[n - 1] {
            return self.cumulative[n - 1] + self.torque[n - 1] * (theta - self.theta[n - 1]);
        }
        let i = self.segment(theta);
        let dt = theta - self.theta[i];
        let mid = self.torque(theta);
        self.cumulative[i] + 0.5 * (self.torque[i] + mid) * dt
    }
}
