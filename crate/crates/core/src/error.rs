use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("non-finite entries in {0}")]
    NonFinite(String),
    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not normal (defect {0:e})")]
    NotNormal(f64),
    #[error("matrix is not unitary (defect {0:e})")]
    NotUnitary(f64),
    #[error("family does not commute (‖[Bi,Bj]‖ = {0:e})")]
    NotCommuting(f64),
    #[error("matrix is not an orthogonal projection (defect {0:e})")]
    NotProjection(f64),
    #[error("parts do not form a resolution of the identity (defect {0:e})")]
    NotResolution(f64),
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("precondition not met, test not applicable: {0}")]
    NotApplicable(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("quadrature did not converge: {0}")]
    Divergent(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error("stage {stage} failed: {detail}")]
    Stage { stage: String, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn stage(stage: &str, detail: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            detail: detail.into(),
        }
    }
}
