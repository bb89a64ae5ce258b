use thiserror::Error;

/// Errors raised by the kinematic, dynamic and design routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:.3e} m)")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("constraint Jacobian is singular (kinematic singularity)")]
    SingularJacobian,
    #[error("workspace point ({x:.6}, {y:.6}) is not reachable on the selected branch")]
    Unreachable { x: f64, y: f64 },
    #[error("minimal-form inertia matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("input gain g_y vanishes ({value:.3e})")]
    ZeroInputGain { value: f64 },
    #[error("zero-dynamics coefficient alpha vanishes at x = {x:.6}")]
    AlphaVanishes { x: f64 },
    #[error("spring gain zeta_S vanishes at x = {x:.6}")]
    ZetaSVanishes { x: f64 },
    #[error("no sign change of gamma_hat/alpha along the samples")]
    NoEquilibrium,
    #[error("state left the admissible window at t = {t:.6} s (x = {x:.6})")]
    Escape { t: f64, x: f64 },
    #[error("spring table is empty")]
    EmptyTable,
    #[error("spring table abscissa is not strictly increasing at index {index}")]
    NonMonotoneAbscissa { index: usize },
    #[error("reference velocity has extra zeros within a half period")]
    ExtraVelocityZeros,
    #[error("infeasible timing: {0}")]
    InfeasibleTiming(String),
    #[error("reference position is not monotone on the forward half period")]
    NonMonotoneHalfPeriod,
    #[error("x = {x:.6} lies outside the reference window [{lo:.6}, {hi:.6}]")]
    OutsideWindow { x: f64, lo: f64, hi: f64 },
    #[error("no feasible (centered) mass distribution found")]
    InfeasibleProblem,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
