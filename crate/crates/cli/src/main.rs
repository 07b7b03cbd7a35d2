//! `graphsve` command-line front end.

mod commands;
mod config;
mod inputs;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "graphsve",
    version,
    about = "Shapley value explanations over feature graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Explain one or more instances and write attributions.
    Explain(RunConfig),
    /// Build a weighted feature graph and its binary adjacency.
    Graph(RunConfig),
    /// Detect feature communities by greedy modularity.
    Communities(RunConfig),
    /// Corrupt top-ranked features and measure the prediction drop.
    Corrupt(RunConfig),
    /// Run the built-in property checks.
    Validate(RunConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Input,
    Computation,
    Validation,
    Oracle,
    Io,
}

impl ErrorClass {
    fn exit_code(self) -> u8 {
        match self {
            ErrorClass::Computation | ErrorClass::Validation => 1,
            ErrorClass::Usage | ErrorClass::Input | ErrorClass::Io => 2,
            ErrorClass::Oracle => 3,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Usage => "usage",
            ErrorClass::Input => "input",
            ErrorClass::Computation => "computation",
            ErrorClass::Validation => "validation",
            ErrorClass::Oracle => "oracle",
            ErrorClass::Io => "io",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub class: ErrorClass,
    pub message: String,
}

impl CliError {
    pub fn new(class: ErrorClass, message: impl Into<String>) -> Self {
        Self {
            class,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(ErrorClass::Usage, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(ErrorClass::Computation, message)
    }

    pub fn from_io(e: std::io::Error) -> Self {
        Self::new(ErrorClass::Io, e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // One line so callers can parse it.
        let msg = self.message.replace('\n', " ");
        write!(f, "error[{}]: {msg}", self.class.as_str())
    }
}

impl From<graphsve::Error> for CliError {
    fn from(e: graphsve::Error) -> Self {
        use graphsve::Error as E;
        let class = match &e {
            E::Oracle(_) => ErrorClass::Oracle,
            E::MissingStructure(_) => ErrorClass::Usage,
            E::Parse { .. }
            | E::SizeMismatch { .. }
            | E::IndexOutOfRange { .. }
            | E::InvalidArgument(_)
            | E::InvalidPartition(_)
            | E::MethodMismatch(..)
            | E::IncompleteAttribution(_) => ErrorClass::Input,
            E::Io(_) => ErrorClass::Io,
            _ => ErrorClass::Computation,
        };
        Self::new(class, e.to_string())
    }
}

type Handler = fn(RunConfig) -> Result<(), CliError>;

fn run(command: Command) -> Result<(), CliError> {
    let (cfg, f): (RunConfig, Handler) = match command {
        Command::Explain(c) => (c, commands::explain),
        Command::Graph(c) => (c, commands::graph),
        Command::Communities(c) => (c, commands::communities),
        Command::Corrupt(c) => (c, commands::corrupt),
        Command::Validate(c) => (c, commands::validate),
    };
    let cfg = cfg.with_file()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::internal(e.to_string()))?;
    pool.install(|| f(cfg))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.class.exit_code())
        }
    }
}
