//! Command-line front end: scenario files in, CSV and TOML reports out.

pub mod expr;
pub mod output;
pub mod run;
pub mod scenario;
pub mod verify;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

use crate::error::Error;
use expr::ExprError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("invalid expression: {0}")]
    Expression(#[from] ExprError),
    #[error(transparent)]
    Model(Error),
    #[error("strict mode: {0}")]
    Strict(String),
    #[error("stereotype violation: {0}")]
    Stereotype(Error),
    #[error("verification failed: {0}")]
    VerifyFailed(String),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => 1,
            CliError::Scenario(_) | CliError::Expression(_) | CliError::Model(_) => 2,
            CliError::Strict(_) => 3,
            CliError::Stereotype(_) => 4,
            CliError::VerifyFailed(_) => 5,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::CaseSwitch { .. } | Error::StepHalving { .. } => CliError::Strict(e.to_string()),
            Error::InvalidStereotype { .. } => CliError::Stereotype(e),
            other => CliError::Model(other),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "parity-dynamics", version, about = "Simulate and analyze parity-constrained selection under influence dynamics")]
pub struct Cli {
    /// Treat case switches and failed step-halving checks as errors.
    #[arg(long, global = true)]
    pub strict: bool,
    /// Directory for output files.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Seed for randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Grid resolution for gradient fields, overriding the scenario.
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one or more scenarios and write their trajectories.
    Simulate {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Contraction constants, equilibria and limit checks for a scenario.
    Analyze { scenario: PathBuf },
    /// Cumulative utility of every policy mode on one scenario.
    Compare { scenario: PathBuf },
    /// Continuous-time gradient field of a scenario's mode.
    Field { scenario: PathBuf },
    /// Randomized self-checks of the solvers and the expression parser.
    Verify {
        #[arg(long, default_value_t = 10_000)]
        instances: usize,
    },
}

/// Executes a parsed command line and returns a human-readable summary.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    if !matches!(cli.command, Command::Verify { .. }) {
        std::fs::create_dir_all(&cli.out).map_err(|e| CliError::io(&cli.out, e))?;
    }
    match &cli.command {
        Command::Simulate { scenarios } => run::simulate(cli, scenarios),
        Command::Analyze { scenario } => run::analyze(cli, scenario),
        Command::Compare { scenario } => run::compare(cli, scenario),
        Command::Field { scenario } => run::field(cli, scenario),
        Command::Verify { instances } => run::verify(cli.seed, *instances),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct_per_class() {
        let io = CliError::io(Path::new("x"), std::io::Error::other("boom"));
        let strict: CliError = Error::StepHalving {
            difference: 1.0,
            tolerance: 1e-6,
        }
        .into();
        let model: CliError = Error::InvalidProfile(2.0).into();
        assert_eq!(io.exit_code(), 1);
        assert_eq!(model.exit_code(), 2);
        assert_eq!(strict.exit_code(), 3);
        assert_eq!(CliError::VerifyFailed(String::new()).exit_code(), 5);
    }

    #[test]
    fn command_line_parses() {
        let cli = Cli::try_parse_from(["parity-dynamics", "--strict", "simulate", "a.toml", "b.toml", "--out", "o"]).unwrap();
        assert!(cli.strict);
        assert_eq!(cli.out, PathBuf::from("o"));
        assert!(matches!(cli.command, Command::Simulate { ref scenarios } if scenarios.len() == 2));
        assert!(Cli::try_parse_from(["parity-dynamics", "simulate"]).is_err());
    }
}
