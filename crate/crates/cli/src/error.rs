use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Failures that end a run. Fits that fail to converge are not errors; they
/// are reported inside the result payload.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: line {line}: {reason}", path.display())]
    Parse { path: PathBuf, line: u64, reason: String },

    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Self::Io { .. } => ExitCode::from(1),
            Self::Parse { .. } | Self::Invalid(_) => ExitCode::from(2),
        }
    }
}

impl From<tlsres::Error> for CliError {
    fn from(e: tlsres::Error) -> Self {
        Self::Invalid(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Collects every offending option before failing, so one run reports all
/// of them.
#[derive(Default)]
pub struct Checks(Vec<String>);

impl Checks {
    pub fn require(&mut self, ok: bool, key: &str, what: &str) -> &mut Self {
        if !ok {
            self.0.push(format!("--{} {}", key.replace('_', "-"), what));
        }
        self
    }

    pub fn positive(&mut self, key: &str, v: f64) -> &mut Self {
        self.require(v.is_finite() && v > 0.0, key, "must be positive")
    }

    pub fn non_negative(&mut self, key: &str, v: f64) -> &mut Self {
        self.require(v.is_finite() && v >= 0.0, key, "must be non-negative")
    }

    pub fn finish(&mut self) -> CliResult<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(CliError::Invalid(std::mem::take(&mut self.0).join("; ")))
        }
    }
}
