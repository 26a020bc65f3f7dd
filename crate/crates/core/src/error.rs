use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    /// Evaluation point outside the physical extent on a non-periodic axis.
    #[error("domain error: {0}")]
    Domain(String),
    /// Scale or sampling too coarse for the requested operation.
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("unknown scenario `{0}`")]
    Registry(String),
    #[error("classification error: {0}")]
    Classification(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
    /// Wraps an error with the experiment stage that produced it.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<LabError>,
    },
}

impl LabError {
    pub fn in_stage(self, stage: impl Into<String>) -> Self {
        LabError::Stage { stage: stage.into(), source: Box::new(self) }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}
