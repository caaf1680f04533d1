use thiserror::Error;

/// Error classes surfaced by the core library.
///
/// Structural errors (a cube outside its grid, mismatched grids) indicate a
/// caller bug; degenerate-weight and parameter errors indicate bad inputs;
/// numeric errors indicate a solver that failed to converge inside its budget.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cube ({level},{index}) does not fit a depth-{depth} grid")]
    CubeOutsideGrid { level: u32, index: usize, depth: u32 },

    #[error("grid mismatch: depth {0} vs depth {1}")]
    GridMismatch(u32, u32),

    #[error("degenerate weight: {0}")]
    DegenerateWeight(String),

    #[error("parameter `{name}` violates `{constraint}`")]
    Parameter { name: &'static str, constraint: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub fn parameter(name: &'static str, constraint: impl Into<String>) -> Self {
        Error::Parameter { name, constraint: constraint.into() }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
