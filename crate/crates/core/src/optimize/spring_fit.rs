//! Least-squares fit of the piecewise-linear spring to a tabulated characteristic.

use serde::Serialize;

use super::ga::{ga_minimize, GaConfig, GenerationStats};
use crate::error::{Error, Result};
use crate::spring::{eval_spring, SpringBounds, SpringParams};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpringFitResult {
    pub n: usize,
    pub params: SpringParams,
    /// `(1/N) sum (S(theta_i) - sigma_i)^2`.
    pub mse: f64,
    /// `S(theta_i) - sigma_i` in table order.
    pub residuals: Vec<f64>,
    /// Best mismatch of each GA restart (empty for the closed-form `n = 0` fit).
    pub restart_mse: Vec<f64>,
    pub telemetry: Vec<GenerationStats>,
}

/// Mean-square mismatch of `p` against the table.
pub fn mismatch(p: &SpringParams, table: &[(f64, f64)]) -> f64 {
    table.iter().map(|(t, s)| (eval_spring(p, *t) - s).powi(2)).sum::<f64>() / table.len() as f64
}

/// Box derived from the table's `theta` range.
pub fn bounds_for_table(table: &[(f64, f64)], k_max: f64) -> Result<SpringBounds> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let lo = table.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = table.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(SpringBounds {
        k_max,
        theta_min: lo,
        theta_max: hi,
    })
}

fn finish(params: SpringParams, table: &[(f64, f64)], restart_mse: Vec<f64>, telemetry: Vec<GenerationStats>) -> SpringFitResult {
    let residuals: Vec<f64> = table.iter().map(|(t, s)| eval_spring(&params, *t) - s).collect();
    SpringFitResult {
        n: params.n(),
        mse: residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64,
        params,
        residuals,
        restart_mse,
        telemetry,
    }
}

/// Unconstrained linear least squares `sigma ~ k0 (theta - theta0)`, if it lies in the box.
fn linear_fit(table: &[(f64, f64)], bounds: &SpringBounds) -> Option<SpringParams> {
    let n = table.len() as f64;
    let mt = table.iter().map(|p| p.0).sum::<f64>() / n;
    let ms = table.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = table.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sts: f64 = table.iter().map(|p| (p.0 - mt) * (p.1 - ms)).sum();
    if stt <= 0.0 {
        return None;
    }
    let k0 = sts / stt;
    if !(k0 > 0.0 && k0 <= bounds.k_max) {
        return None;
    }
    let theta0 = mt - ms / k0;
    (theta0 >= bounds.theta_min && theta0 <= bounds.theta_max).then(|| SpringParams::linear(k0, theta0))
}

/// Best spring with `n` pairs. `warm` candidates (any pair count up to `n`)
/// are padded with inert pairs and seeded into every restart.
pub fn optimize_spring(
    table: &[(f64, f64)],
    n: usize,
    bounds: &SpringBounds,
    cfg: &GaConfig,
    warm: &[SpringParams],
    workers: usize,
) -> Result<SpringFitResult> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    if n == 0 {
        if let Some(p) = linear_fit(table, bounds) {
            return Ok(finish(p, table, Vec::new(), Vec::new()));
        }
    }
    let seeds: Vec<Vec<f64>> = warm
        .iter()
        .filter(|p| p.n() <= n)
        .map(|p| p.padded(n - p.n(), bounds.theta_max).to_flat())
        .collect();
    let fitness = |v: &[f64]| match SpringParams::from_flat(v) {
        Ok(p) => mismatch(&p, table),
        Err(_) => f64::INFINITY,
    };
    let r = ga_minimize(fitness, &bounds.lower(n), &bounds.upper(n), cfg, &seeds, workers)?;
    let params = SpringParams::from_flat(&r.best)?;
    Ok(finish(params, table, r.restart_values, r.telemetry))
}

/// Fit every requested `n` in increasing order, warm-starting each from all smaller fits.
pub fn fit_spring_sequence(table: &[(f64, f64)], ns: &[usize], bounds: &SpringBounds, cfg: &GaConfig, workers: usize) -> Result<Vec<SpringFitResult>> {
    let mut order: Vec<usize> = ns.to_vec();
    order.sort_unstable();
    order.dedup();
    let mut warm = vec![optimize_spring(table, 0, bounds, &cfg.with_seed(derive_seed(cfg.seed, 0)), &[], workers)?.params];
    let mut out = Vec::with_capacity(order.len());
    for n in order {
        let fit = if n == 0 {
            finish(warm[0].clone(), table, Vec::new(), Vec::new())
        } else {
            optimize_spring(table, n, bounds, &cfg.with_seed(derive_seed(cfg.seed, n)), &warm, workers)?
        };
        warm.push(fit.params.clone());
        out.push(fit);
    }
    Ok(out)
}

/// Per-`n` GA seed.
pub fn derive_seed(seed: u64, n: usize) -> u64 {
    seed.wrapping_add((n as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spring::SubSpringPair;

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn linear_table_recovered_exactly() {
        let truth = SpringParams::linear(0.8, 1.4);
        let table: Vec<(f64, f64)> = grid(1.2, 2.0, 200).into_iter().map(|t| (t, eval_spring(&truth, t))).collect();
        let b = bounds_for_table(&table, 10.0).unwrap();
        let fit = optimize_spring(&table, 0, &b, &GaConfig::default(), &[], 1).unwrap();
        assert!((fit.params.k0 - 0.8).abs() < 1e-8);
        assert!((fit.params.theta0 - 1.4).abs() < 1e-8);
        assert!(fit.mse < 1e-20);
    }

    #[test]
    fn nested_fits_never_get_worse() {
        let truth = SpringParams {
            k0: 0.3,
            theta0: 1.5,
            pairs: vec![SubSpringPair {
                k_pos: 1.2,
                theta_pos: 1.8,
                k_neg: -0.4,
                theta_neg: 1.35,
            }],
        };
        let table: Vec<(f64, f64)> = grid(1.2, 2.0, 300)
            .into_iter()
            .map(|t| (t, eval_spring(&truth, t) + 0.01 * (7.0 * t).sin()))
            .collect();
        let b = bounds_for_table(&table, 10.0).unwrap();
        let cfg = GaConfig {
            population: 40,
            generations: 40,
            restarts: 2,
            seed: 9,
            ..GaConfig::default()
        };
        let fits = fit_spring_sequence(&table, &[1, 2, 3], &b, &cfg, 1).unwrap();
        assert_eq!(fits.iter().map(|f| f.n).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(fits.windows(2).all(|w| w[1].mse <= w[0].mse));
        for f in &fits {
            assert!(crate::spring::validate_params(&f.params, &b).is_ok());
        }
    }
}
