use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("{routine} did not converge after {iterations} iterations")]
    NoConvergence {
        routine: &'static str,
        iterations: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported objective: p = {p} with {outputs} outputs (p > 2 requires a single output)")]
    UnsupportedObjective { p: u32, outputs: usize },

    /// A step produced non-finite weights. `loss` is the loss at the point
    /// the step started from, NaN when the rule never evaluates it.
    #[error("update diverged (loss before the step: {loss:e})")]
    Diverged { loss: f64 },

    #[error(
        "newton solve did not reach the tolerance after {iterations} iterations (gradient norm {grad_norm:e}, loss {loss:e})"
    )]
    NewtonStalled {
        iterations: usize,
        grad_norm: f64,
        loss: f64,
    },
}
