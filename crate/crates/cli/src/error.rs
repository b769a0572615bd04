use serde::Serialize;

/// Error category reported in the machine-readable error line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Usage,
    Io,
    Parse,
    Numerical,
    Domain,
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Usage, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Io, message: message.into() }
    }

    /// 2 for usage errors, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.kind == ErrorKind::Usage {
            2
        } else {
            1
        }
    }

    /// `{"error":{"kind":…,"message":…}}` on one line.
    pub fn json_line(&self) -> String {
        serde_json::json!({ "error": { "kind": self.kind, "message": self.message } }).to_string()
    }
}

impl From<sdeonet::Error> for CliError {
    fn from(e: sdeonet::Error) -> Self {
        use sdeonet::Error as E;
        let kind = match &e {
            E::Usage(_) => ErrorKind::Usage,
            E::Domain(_) => ErrorKind::Domain,
            E::Parse(_) | E::Csv(_) => ErrorKind::Parse,
            E::Io(_) => ErrorKind::Io,
            E::NonFiniteState { .. } | E::NonFiniteCoefficient { .. } | E::NonFiniteLoss { .. } => ErrorKind::Numerical,
        };
        CliError { kind, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError { kind: ErrorKind::Parse, message: e.to_string() }
    }
}
