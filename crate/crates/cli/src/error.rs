use serde::Serialize;

use assimlab_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),

    #[error("snapshot lacks {missing} of {planned} planned queries (first: {first}); rerun collect or pass --allow-partial")]
    IncompleteSnapshot {
        missing: usize,
        planned: usize,
        first: String,
    },

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::IncompleteSnapshot { .. } => "incomplete_snapshot",
            CliError::Usage(_) => "usage",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// Machine-readable error document printed on failure.
    pub fn document(&self, command: &str) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: String,
            command: &'a str,
            exit_code: i32,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            error: Body<'a>,
        }
        serde_json::to_string(&Doc {
            error: Body {
                kind: self.kind(),
                message: self.to_string(),
                command,
                exit_code: self.exit_code(),
            },
        })
        .expect("error document serializes")
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
