//! Error channel of the command-line tool.
//!
//! Every failure is classified into one of three kinds that map onto the
//! process exit code, and is printed to stderr as `error[<kind>]: <message>`
//! so scripts can match on the prefix:
//!
//! * `usage` (exit 1) — bad flags, unreadable configuration, missing inputs;
//! * `data` (exit 2) — inputs that exist but fail validation or parsing;
//! * `divergence` (exit 3) — training aborted on a non-finite loss.

use std::fmt;
use std::path::Path;

use causecat_core::{CorpusError, DiscourseError, EncoderError, MetricsError, TrainError};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Divergence(String),
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure::Usage(message.into())
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure::Data(message.into())
    }

    /// Exit code of the process when this failure reaches `main`.
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Divergence(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Data(_) => "data",
            Failure::Divergence(_) => "divergence",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Divergence(m) => m,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.kind(), self.message())
    }
}

impl From<CorpusError> for Failure {
    fn from(err: CorpusError) -> Self {
        Failure::Data(err.to_string())
    }
}

impl From<EncoderError> for Failure {
    fn from(err: EncoderError) -> Self {
        Failure::Data(err.to_string())
    }
}

impl From<DiscourseError> for Failure {
    fn from(err: DiscourseError) -> Self {
        Failure::Data(err.to_string())
    }
}

impl From<MetricsError> for Failure {
    fn from(err: MetricsError) -> Self {
        Failure::Data(err.to_string())
    }
}

impl From<TrainError> for Failure {
    fn from(err: TrainError) -> Self {
        match err {
            TrainError::DivergedLoss { .. } => Failure::Divergence(err.to_string()),
            other => Failure::Data(other.to_string()),
        }
    }
}

/// I/O failure while producing an output file (classified as a data error).
pub fn io_failure(action: &str, path: &Path, err: std::io::Error) -> Failure {
    Failure::Data(format!("cannot {action} {}: {err}", path.display()))
}

/// Usage failure for an input path that does not exist.
pub fn missing_input(role: &str, path: &Path) -> Failure {
    Failure::Usage(format!("{role} not found: {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_map_to_exit_codes_and_prefixes() {
        let usage = Failure::usage("missing corpus");
        let data = Failure::data("bad row");
        let diverged = Failure::Divergence("loss went non-finite".into());
        assert_eq!(usage.exit_code(), 1);
        assert_eq!(data.exit_code(), 2);
        assert_eq!(diverged.exit_code(), 3);
        assert_eq!(usage.to_string(), "error[usage]: missing corpus");
        assert_eq!(data.to_string(), "error[data]: bad row");
        assert!(diverged.to_string().starts_with("error[divergence]: "));
    }

    #[test]
    fn diverged_loss_is_the_only_divergence_kind() {
        let diverged: Failure = TrainError::DivergedLoss {
            epoch: 1,
            step: 3,
            loss: f64::NAN,
        }
        .into();
        assert_eq!(diverged.exit_code(), 3);
        let empty: Failure = TrainError::EmptyCorpus.into();
        assert_eq!(empty.exit_code(), 2);
    }
}
