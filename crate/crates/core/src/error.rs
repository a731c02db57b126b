use alloc::boxed::Box;
use alloc::string::String;

use crate::cone::SolveStatus;
use crate::precoder::{Phase, ScaTrace};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("expansion point has a non-positive beta at beam {beam}, user {user}")]
    ZeroExpansionBeta { beam: usize, user: usize },

    #[error("channel is degenerate: {0}")]
    DegenerateChannel(String),

    #[error("malformed cone program: {0}")]
    MalformedProgram(String),

    #[error(
        "infeasible problem: feasibility-restoration phase left max slack {max_slack:.3e} \
         after {iterations} iterations"
    )]
    InfeasibleProblem {
        iterations: usize,
        max_slack: f64,
        trace: Box<ScaTrace>,
    },

    #[error("cone solver returned {status:?} during {phase} phase at iteration {iteration}")]
    Solver {
        phase: Phase,
        status: SolveStatus,
        iteration: usize,
        trace: Box<ScaTrace>,
    },

    #[error("Charnes-Cooper scaling must be positive, got {0:e}")]
    NonPositiveScaling(f64),
}
