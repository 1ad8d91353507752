use std::fmt;

use scanmask::Error;

/// Failure classes reported through the process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Failure {
    Config,
    Data,
    Numerical,
}

impl Failure {
    pub fn code(self) -> u8 {
        match self {
            Failure::Config => 2,
            Failure::Data => 3,
            Failure::Numerical => 4,
        }
    }
}

/// Error raised by the driver itself, tagged with its class.
#[derive(Debug)]
pub struct Tagged {
    pub kind: Failure,
    pub message: String,
}

impl fmt::Display for Tagged {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Tagged {}

pub fn config(message: impl Into<String>) -> anyhow::Error {
    Tagged { kind: Failure::Config, message: message.into() }.into()
}

pub fn data(message: impl Into<String>) -> anyhow::Error {
    Tagged { kind: Failure::Data, message: message.into() }.into()
}

fn classify_core(e: &Error) -> Failure {
    match e {
        Error::InvalidInput(_) | Error::Infeasible(_) => Failure::Config,
        Error::Dimension(_) | Error::Corrupt { .. } | Error::Io { .. } | Error::Json { .. } => Failure::Data,
        Error::Numerical(_) | Error::UndefinedMetric(_) => Failure::Numerical,
    }
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(t) = cause.downcast_ref::<Tagged>() {
            return t.kind.code();
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return classify_core(e).code();
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<serde_json::Error>().is_some() {
            return Failure::Data.code();
        }
    }
    1
}
