use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum PourError {
    #[error("ambient dimension {ambient_dim} below class_count - 1 = {required}")]
    DimensionTooSmall { ambient_dim: usize, required: usize },

    #[error("direction has norm below 1e-12, cannot build a projector")]
    ZeroDirection,

    #[error("projecting a 2-class frame collapses all retained mass to the origin")]
    DegenerateFrame,

    #[error("index {index} out of range for {count} classes")]
    ClassOutOfRange { index: usize, count: usize },

    #[error("no rows labeled class {class_id}")]
    EmptyClass { class_id: usize },

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("degenerate input: centered Gram has Frobenius norm below 1e-12")]
    DegenerateCka,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("insufficient data: fold {fold} of {folds} would be empty")]
    EmptyFold { fold: usize, folds: usize },

    #[error("zero column {index} in classifier head")]
    ZeroColumn { index: usize },

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("empty forget set")]
    EmptyForgetSet,

    #[error("gaussian kernel bandwidth must be positive, got {0}")]
    InvalidBandwidth(f64),

    #[error("update clip must be positive, got {0}")]
    InvalidClip(f64),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("config parse error: {0}")]
    ConfigParse(#[from] serde_json::Error),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<PourError>,
    },
}

impl PourError {
    /// Tag an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> PourError {
        PourError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code for the CLI: 2 config/validation, 3 numerical, 4 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            PourError::Io(_) => 4,
            PourError::Checkpoint(_) => 4,
            PourError::NonFiniteLoss { .. } => 3,
            PourError::DegenerateCka => 3,
            PourError::Stage { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, PourError>;
