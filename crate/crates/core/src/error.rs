use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("grid must have 1 to 3 axes, got {0}")]
    AxisCount(usize),
    #[error("{dims} dims but {extents} extents")]
    ExtentCount { dims: usize, extents: usize },
    #[error("axis {axis}: dim {dim} must be even and at least 4")]
    BadDim { axis: usize, dim: usize },
    #[error("axis {axis}: extent {extent} must be positive and finite")]
    BadExtent { axis: usize, extent: f64 },
    #[error("expected {expected} values, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },
    #[error("multiplier is not invertible: symbol {value:e} at mode {mode:?}")]
    NotInvertible { mode: Vec<i64>, value: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("model `{model}` requires parameter `{param}`")]
    MissingParam { model: String, param: &'static str },
    #[error("parameter `{param}` = {value} is invalid: {reason}")]
    BadParam {
        param: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("nonlinear term index {index} out of range ({count} terms)")]
    TermIndex { index: usize, count: usize },
    #[error("a model carries 1 or 2 nonlinear terms, got {0}")]
    TermCount(usize),
    #[error("mobility symbol is negative ({value:e}) at spectral position {position}")]
    NegativeMobility { position: usize, value: f64 },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("time step dt = {dt} leaves the linear operator singular: {source}")]
    SingularOperator { dt: f64, source: SpectralError },
    #[error("dt must be positive and finite, got {0}")]
    BadTimeStep(f64),
    #[error("zero-factor Newton solve did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },
    #[error("SAV denominator E1 + C = {0} is not positive")]
    SavDenominator(f64),
    #[error("{scheme} requires {required} nonlinear terms, model has {found}")]
    TermMismatch {
        scheme: &'static str,
        required: usize,
        found: usize,
    },
    #[error("{0}")]
    Factor(String),
    #[error("relaxation parameter {0} outside [0, 1]")]
    LambdaRange(f64),
    #[error("non-finite state after step {step}")]
    NonFiniteState { step: usize },
    #[error("scheme needs history that the state does not carry: {0}")]
    MissingHistory(&'static str),
    #[error("dense oracle limited to {limit} nodes, grid has {nodes}")]
    GridTooLarge { nodes: usize, limit: usize },
    #[error("convergence study: {0}")]
    Study(String),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("snapshot format error: {0}")]
    Snapshot(String),
    #[error("assertion failed at step {step}: {inequality} (lhs {lhs:e}, rhs {rhs:e})")]
    Assertion {
        step: usize,
        inequality: String,
        lhs: f64,
        rhs: f64,
    },
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Model(_) | HarnessError::Spectral(_) => 2,
            HarnessError::Assertion { .. } => 3,
            HarnessError::Io { .. } | HarnessError::Snapshot(_) | HarnessError::Csv(_) => 4,
            HarnessError::Scheme(SchemeError::SingularOperator { .. })
            | HarnessError::Scheme(SchemeError::BadTimeStep(_))
            | HarnessError::Scheme(SchemeError::TermMismatch { .. })
            | HarnessError::Scheme(SchemeError::Factor(_))
            | HarnessError::Scheme(SchemeError::Study(_)) => 2,
            HarnessError::Scheme(_) => 1,
        }
    }
}
