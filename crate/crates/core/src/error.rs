use thiserror::Error;

pub type Result<T> = std::result::Result<T, CprError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CprError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix is not skew-Hermitian (relative symmetric part {defect:.3e})")]
    NotSkewHermitian { defect: f64 },

    #[error("matrix is not unitary (||u*u - I||_F = {defect:.3e})")]
    NotUnitary { defect: f64 },

    #[error("matrix is not positive definite (min eigenvalue {min_eigenvalue:.3e}, floor {floor:.3e})")]
    Positivity { min_eigenvalue: f64, floor: f64 },

    #[error("matrix is not invertible (smallest singular value {min_singular:.3e}, largest {max_singular:.3e})")]
    Invertibility { min_singular: f64, max_singular: f64 },

    #[error("Hermitian eigensolver failed on a {dim}x{dim} input (||X||_F = {frobenius:.3e})")]
    Eigensolver { dim: usize, frobenius: f64 },

    #[error("solver stalled at level {level} after {iterations} iterations (residual {last:.3e})", last = residual_history.last().copied().unwrap_or(f64::NAN))]
    SolverStall {
        level: usize,
        iterations: usize,
        residual_history: Vec<f64>,
    },

    #[error("numerical conditioning failure: {0}")]
    Conditioning(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("invalid expectation chain: {0}")]
    InvalidChain(String),

    #[error("index out of range: {0}")]
    Index(String),

    #[error("eigenvalue gap {gap:.3e} below required {required:.3e}")]
    Gap { gap: f64, required: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("oracle inconclusive: residual {residual:.3e} above 1e-8")]
    OracleInconclusive { residual: f64 },

    #[error("document error: {0}")]
    Document(String),
}

impl CprError {
    /// Attaches a chain level to solver diagnostics.
    pub(crate) fn at_level(self, level: usize) -> Self {
        match self {
            CprError::SolverStall {
                iterations,
                residual_history,
                ..
            } => CprError::SolverStall {
                level,
                iterations,
                residual_history,
            },
            other => other,
        }
    }
}
