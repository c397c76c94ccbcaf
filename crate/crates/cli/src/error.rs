use std::path::Path;

use thiserror::Error;
use wfsm_core::control::ControlError;
use wfsm_core::losses::LossError;
use wfsm_core::magnetics::{DesignError, MapError, SolveError};
use wfsm_core::materials::MaterialError;
use wfsm_core::optimize::OptimizeError;
use wfsm_core::powertrain::CycleError;

/// Process exit status for each failure class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Io = 1,
    Config = 2,
    Validation = 3,
    Divergence = 4,
    InfeasibleCycle = 5,
}

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Kind::Config, message)
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(Kind::Io, format!("{}: {e}", path.display()))
    }

    /// Prefixes the message with where it came from.
    pub fn context(mut self, what: impl std::fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<MaterialError> for CliError {
    fn from(e: MaterialError) -> Self {
        let kind = match e {
            MaterialError::Parse(_) => Kind::Config,
            _ => Kind::Validation,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        let kind = match e {
            DesignError::Parse(_) => Kind::Config,
            _ => Kind::Validation,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<MapError> for CliError {
    fn from(e: MapError) -> Self {
        match e {
            MapError::Design(d) => d.into(),
            MapError::Point {
                source: SolveError::Divergence { .. },
                ..
            } => CliError::new(Kind::Divergence, e.to_string()),
            _ => CliError::new(Kind::Validation, e.to_string()),
        }
    }
}

impl From<LossError> for CliError {
    fn from(e: LossError) -> Self {
        match e {
            LossError::Map(m) => m.into(),
            LossError::Parse(_) => CliError::config(e.to_string()),
            _ => CliError::new(Kind::Validation, e.to_string()),
        }
    }
}

impl From<ControlError> for CliError {
    fn from(e: ControlError) -> Self {
        match e {
            ControlError::Map(m) => m.into(),
            _ => CliError::new(Kind::Validation, e.to_string()),
        }
    }
}

impl From<CycleError> for CliError {
    fn from(e: CycleError) -> Self {
        match e {
            CycleError::Clipped { .. } | CycleError::Control(ControlError::Infeasible { .. }) => {
                CliError::new(Kind::InfeasibleCycle, e.to_string())
            }
            CycleError::Control(c) => c.into(),
            _ => CliError::new(Kind::Validation, e.to_string()),
        }
    }
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        let kind = match e {
            OptimizeError::Config(_) => Kind::Config,
            OptimizeError::AllInfeasible => Kind::Validation,
        };
        CliError::new(kind, e.to_string())
    }
}
