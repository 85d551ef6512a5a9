use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("closest point iteration did not converge for target {target:?} after {iterations} iterations")]
    NonConvergence { target: [f64; 3], iterations: usize },

    #[error("root refinement failed on grid line (axis {axis}, {i}, {j}) near coordinate {coord}")]
    RootRefinementFailure {
        axis: usize,
        i: i64,
        j: i64,
        coord: f64,
    },

    #[error("no normal component reaches the cutoff cos(theta) for n = {0:?}")]
    AllComponentsBelowCutoff([f64; 3]),

    #[error("extrapolation system is singular (amplification {amplification:e})")]
    SingularSystem { amplification: f64 },

    #[error("relation {name} violated at lambda = {lambda}: ratio {ratio}, expected {expected}")]
    RelationViolated {
        name: String,
        lambda: f64,
        ratio: f64,
        expected: f64,
    },

    #[error("determinant not positive at x = {x}: {det:e}")]
    PositivityViolated { x: f64, det: f64 },

    #[error("point {0:?} is outside the valid region of the test case")]
    OutOfRegion([f64; 3]),

    #[error("target selection is empty")]
    EmptySelection,

    #[error("invalid extrapolation plan: {0}")]
    InvalidPlan(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 for configuration problems, 2 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidPlan(_) | Error::Io(_) | Error::Csv(_) => 1,
            _ => 2,
        }
    }
}
