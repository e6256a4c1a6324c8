use std::fmt;

/// Broad class of a [`SimError`], used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorCategory {
    /// An invalid parameter or an inconsistent combination of parameters.
    Config,
    /// A computation produced a non-finite value or a degenerate quantity.
    Numeric,
    /// Two inputs disagree in shape (frame rows, image sizes, waveform lengths).
    Dimension,
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorCategory::Config => "config",
            ErrorCategory::Numeric => "numeric",
            ErrorCategory::Dimension => "dimension",
        })
    }
}

/// The single error type returned by every fallible operation in this crate.
///
/// `path` names the offending parameter (`carrier.sample_rate`,
/// `channel.taps[1].delay`, ...) when one can be identified.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{category} error{}: {message}", path.as_deref().map(|p| format!(" at `{p}`")).unwrap_or_default())]
pub struct SimError {
    pub category: ErrorCategory,
    pub message: String,
    pub path: Option<String>,
}

impl SimError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        SimError {
            category: ErrorCategory::Config,
            message: message.into(),
            path: Some(path.into()),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        SimError {
            category: ErrorCategory::Numeric,
            message: message.into(),
            path: None,
        }
    }

    pub fn dimension(message: impl Into<String>) -> Self {
        SimError {
            category: ErrorCategory::Dimension,
            message: message.into(),
            path: None,
        }
    }

    /// Prefixes the parameter path, e.g. `carrier` + `f` -> `carrier.f`.
    pub fn within(mut self, prefix: &str) -> Self {
        self.path = Some(match self.path {
            Some(p) => format!("{prefix}.{p}"),
            None => prefix.to_owned(),
        });
        self
    }
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;

/// Fails with a numeric error when any sample is NaN or infinite.
pub(crate) fn ensure_finite(samples: &[f64], what: &str) -> Result<()> {
    match samples.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(SimError::numeric(format!(
            "non-finite value in {what} at index {i}"
        ))),
        None => Ok(()),
    }
}
