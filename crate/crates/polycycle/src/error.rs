use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Malformed input: bad ranges, inconsistent sizes, violated preconditions.
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("search space too large: n = {n} exceeds {max}")]
    SearchSpace { n: usize, max: usize },

    #[error("not a saddle at ({x}, {y}): Jacobian determinant {det:.3e} >= 0")]
    NotASaddle { x: f64, y: f64, det: f64 },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("degree cap {cap} reached with grid error {error:.3e} above {bound:.3e}")]
    DegreeCap { cap: usize, error: f64, bound: f64 },

    #[error("step size underflow at t = {t} near ({x}, {y})")]
    StepUnderflow { t: f64, x: f64, y: f64 },

    #[error("maximum number of steps ({0}) exceeded")]
    MaxSteps(usize),

    #[error("near-singular passage: speed below {speed:.1e} for longer than {budget} time units near ({x}, {y})")]
    Stagnation {
        speed: f64,
        budget: f64,
        x: f64,
        y: f64,
    },

    #[error("no crossing of the target section before t = {t}")]
    NoCrossing { t: f64 },

    #[error("orbit left the working region at ({x}, {y})")]
    Escaped { x: f64, y: f64 },

    #[error("domain error at nesting level {level}: base {base:.3e} is negative")]
    Domain { level: usize, base: f64 },

    #[error("ratio {ratio} at saddle {saddle} is too close to 1 for the bypass map")]
    RatioNearOne { saddle: usize, ratio: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True for errors caused by the caller's input rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(self, Error::Invalid(_) | Error::SearchSpace { .. })
    }
}
