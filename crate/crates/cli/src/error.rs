use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error("{stage}: {source}")]
    Compute {
        stage: String,
        #[source]
        source: zalms::Error,
    },
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 1,
            CliError::Compute { .. } | CliError::Io { .. } => 2,
            CliError::Verification(_) => 3,
        }
    }

    pub(crate) fn compute(stage: impl Into<String>) -> impl FnOnce(zalms::Error) -> CliError {
        let stage = stage.into();
        move |source| CliError::Compute { stage, source }
    }
}
