//! Genetic search and the two design problems built on it.

pub mod ga;
pub mod mass;
pub mod spring_fit;

pub use ga::{ga_minimize, GaConfig, GaResult, GenerationStats};
pub use mass::{optimize_mass, MassEvaluation, MassOptResult, MassProblem};
pub use spring_fit::{bounds_for_table, fit_spring_sequence, mismatch, optimize_spring, SpringFitResult};

/// `sqrt(mean(v^2))`; zero for an empty slice.
pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::rms;

    #[test]
    fn rms_cases() {
        assert_eq!(rms(&[-0.7; 5]), 0.7);
        assert_eq!(rms(&[-1.0, 1.0]), 1.0);
        let n = 10_000;
        let s: Vec<f64> = (0..n).map(|i| 2.0 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin()).collect();
        assert!((rms(&s) - 2.0 / 2f64.sqrt()).abs() < 1e-3);
    }
}
