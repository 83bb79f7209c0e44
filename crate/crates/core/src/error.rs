use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, HrpError>;

#[derive(Debug, thiserror::Error)]
pub enum HrpError {
    /// Invalid arguments or configuration; maps to CLI exit code 2.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke a shape or domain contract.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    Divergence {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("malformed input in {path}: {detail}")]
    Parse { path: PathBuf, detail: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("oracle check failed: {0}")]
    OracleFailure(String),
}

impl HrpError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        HrpError::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code for this error: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            HrpError::Config(_) => 2,
            _ => 1,
        }
    }
}
