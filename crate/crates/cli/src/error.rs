use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, malformed or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A computation failed; `scenario` identifies which run.
    #[error("run failed in {scenario}: {source}")]
    Run {
        scenario: String,
        #[source]
        source: mrcm::Error,
    },

    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run { .. } | CliError::Output { .. } => 1,
        }
    }
}
