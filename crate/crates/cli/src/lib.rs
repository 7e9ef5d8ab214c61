//! Library side of the `gridseg` command: input loading, scenario runs and
//! report assembly. The binary only parses arguments and maps exit codes.

pub mod commands;
pub mod config;
pub mod geojson;
pub mod report;
pub mod schemas;

use std::fmt;

/// An error with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_INFEASIBLE_DISPATCH: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_DEFENSE_INFEASIBLE: i32 = 5;
pub const EXIT_SEGMENTATION_MISMATCH: i32 = 6;

impl CliError {
    pub fn parse(message: String) -> Self {
        CliError {
            code: EXIT_PARSE,
            message,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<gridseg::Error> for CliError {
    fn from(e: gridseg::Error) -> Self {
        use gridseg::Error as E;
        let code = match &e {
            E::InvalidGrid(_) | E::InvalidFleet(_) | E::Parse(_) | E::Io(_) => EXIT_PARSE,
            E::InfeasibleDispatch(_) => EXIT_INFEASIBLE_DISPATCH,
            E::SolverFailure(_)
            | E::BackendUnavailable(_)
            | E::MalformedModel(_)
            | E::ReplayMismatch(_)
            | E::BigMBinding { .. }
            | E::MalformedColumn(_)
            | E::UnbalancedInjections { .. } => EXIT_SOLVER,
            E::SegmentationMismatch(_) => EXIT_SEGMENTATION_MISMATCH,
            _ => EXIT_OTHER,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            code: EXIT_OTHER,
            message: e.to_string(),
        }
    }
}
