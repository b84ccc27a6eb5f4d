use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration, unresolvable names, or unusable inputs.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("path does not exist: {}", .0.display())]
    MissingPath(PathBuf),

    /// A non-finite value showed up during training.
    #[error("training error: {0}")]
    Training(String),

    /// A non-finite activation showed up during a forward pass.
    #[error("inference error at layer {layer}, step {step}: {message}")]
    Inference { layer: usize, step: usize, message: String },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("malformed {what}: {message}")]
    Format { what: &'static str, message: String },

    #[error("i/o error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(what: &'static str, message: impl Into<String>) -> Self {
        Error::Format {
            what,
            message: message.into(),
        }
    }

    /// Whether the failure is a configuration problem (as opposed to a
    /// failure while running the pipeline).
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::MissingPath(_))
    }

    /// Process exit code: 2 for configuration errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        if self.is_config() {
            2
        } else {
            1
        }
    }
}
