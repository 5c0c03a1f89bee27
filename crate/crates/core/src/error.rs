use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("glue polynomial on the {side} branch is not monotone (min slope {min_slope:.3e})")]
    GlueNotMonotone { side: &'static str, min_slope: f64 },

    #[error("expansion condition fails: estimated lambda {lambda:.6} <= 1")]
    A2Violation { lambda: f64 },

    #[error("axioms fail: {0}")]
    AxiomFailure(String),

    #[error("orbit hit the discontinuity at step {step}")]
    HitDiscontinuity { step: u64 },

    #[error("orbit underflowed onto a fixed point at step {step}")]
    Underflow { step: u64 },

    #[error("point lies on a partition boundary at step {step}")]
    BoundaryHit { step: u64 },

    #[error("point {x} is outside the base interval ({lo}, 0)")]
    OutsideBase { x: f64, lo: f64 },

    #[error("fewer than {needed} checkpoints ({got})")]
    TooFewCheckpoints { needed: usize, got: usize },

    #[error("power iteration did not converge after {iterations} steps (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("partition coverage {coverage:.6} below required {required:.6}")]
    InsufficientCoverage { coverage: f64, required: f64 },

    #[error("tail too thin: survival at t_max is {survival:.3e}, need at least {required:.3e}")]
    InsufficientTail { survival: f64, required: f64 },

    #[error("no admissible slope found after {halvings} halvings")]
    SearchExhausted { halvings: u32 },

    #[error("target accuracy not reached; best distance {best:.3e}")]
    NotAchieved { best: f64 },

    #[error("maps are not comparable: {0}")]
    NotComparable(String),
}
