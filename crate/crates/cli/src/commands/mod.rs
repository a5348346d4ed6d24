pub mod discretize;
pub mod experiment;
pub mod fit;
pub mod toy;

use std::path::Path;

use clap::ValueEnum;
use riskcal::{CalibrationMode, CsvOptions, Estimator};

/// A command failure with its exit code: 2 for usage and configuration
/// problems, 1 for runtime failures.
pub struct Failure {
    pub message: String,
    pub usage: bool,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            message: message.into(),
            usage: true,
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.usage {
            2
        } else {
            1
        }
    }
}

impl From<riskcal::Error> for Failure {
    fn from(error: riskcal::Error) -> Self {
        Failure {
            message: error.to_string(),
            usage: error.is_usage(),
        }
    }
}

pub type CommandResult = Result<(), Failure>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Ml,
    Map,
}

impl From<EstimatorArg> for Estimator {
    fn from(value: EstimatorArg) -> Self {
        match value {
            EstimatorArg::Ml => Estimator::Ml,
            EstimatorArg::Map => Estimator::Map,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Best,
    Strict,
}

impl From<ModeArg> for CalibrationMode {
    fn from(value: ModeArg) -> Self {
        match value {
            ModeArg::Best => CalibrationMode::BestTracking,
            ModeArg::Strict => CalibrationMode::StrictStop,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HeaderArg {
    Auto,
    Yes,
    No,
}

impl HeaderArg {
    pub fn as_option(self) -> Option<bool> {
        match self {
            HeaderArg::Auto => None,
            HeaderArg::Yes => Some(true),
            HeaderArg::No => Some(false),
        }
    }
}

pub fn csv_options(header: HeaderArg, force_continuous: bool) -> CsvOptions {
    CsvOptions {
        header: header.as_option(),
        force_continuous,
        ..CsvOptions::default()
    }
}

/// Output-path problems are treated as usage errors.
pub fn write_output(path: &Path, content: &str) -> CommandResult {
    std::fs::write(path, content)
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))
}

pub fn create_dir(path: &Path) -> CommandResult {
    std::fs::create_dir_all(path)
        .map_err(|e| Failure::usage(format!("cannot create {}: {e}", path.display())))
}

/// Prints the resolved configuration and stores it next to the outputs so
/// a run can be reproduced exactly.
pub fn announce_and_store_config(
    config_json: &serde_json::Value,
    destination: &Path,
) -> CommandResult {
    let pretty = serde_json::to_string_pretty(config_json).expect("config serializes");
    println!("resolved config: {pretty}");
    write_output(destination, &(pretty + "\n"))
}
