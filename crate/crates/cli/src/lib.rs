//! Driver for the mixinglab experiments: flag and config parsing, dispatch
//! to the core library, CSV/JSON emission and exit-code mapping.

pub mod commands;
pub mod config;
pub mod rows;

pub use config::{Command, ExperimentConfig, Format, Params};

use std::io::Write;

/// Exit codes of the `mixinglab` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const INVARIANT: i32 = 2;
    pub const BUDGET: i32 = 3;
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    /// `--help` or `--version` text.
    #[error("{0}")]
    Help(String),
    #[error("{0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invariant failure: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Help(_) => exit::OK,
            Self::Usage(_) | Self::Config(_) => exit::CONFIG,
            Self::Invariant(_) => exit::INVARIANT,
        }
    }
}

impl From<mixinglab::Error> for CliError {
    fn from(e: mixinglab::Error) -> Self {
        use mixinglab::Error as E;
        match e {
            E::Invariant(_) | E::EmptyConditioning(_) => Self::Invariant(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Ok,
    /// Step budget exhausted before the experiment's target was reached.
    BudgetExhausted,
    /// Output was produced but a precondition or internal check failed.
    Invariant(String),
}

/// The rendered result of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub bytes: Vec<u8>,
    pub status: Status,
    /// Human-readable notes for stderr.
    pub notes: Vec<String>,
}

impl Output {
    pub fn ok(bytes: Vec<u8>) -> Self {
        Self {
            bytes,
            status: Status::Ok,
            notes: Vec::new(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Ok => exit::OK,
            Status::BudgetExhausted => exit::BUDGET,
            Status::Invariant(_) => exit::INVARIANT,
        }
    }
}

/// Runs the experiment and writes its output to `--out` or `stdout`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let result = ExperimentConfig::from_args(args).and_then(|cfg| {
        let out = commands::execute(&cfg)?;
        match &cfg.out {
            Some(path) => std::fs::write(path, &out.bytes)
                .map_err(|e| CliError::Config(format!("out {}: {e}", path.display())))?,
            None => stdout.write_all(&out.bytes).map_err(|e| CliError::Config(format!("stdout: {e}")))?,
        }
        Ok(out)
    });
    match result {
        Ok(out) => {
            for note in &out.notes {
                let _ = writeln!(stderr, "{note}");
            }
            if let Status::Invariant(msg) = &out.status {
                let _ = writeln!(stderr, "mixinglab: invariant failure: {msg}");
            }
            out.exit_code()
        }
        Err(CliError::Help(text)) => {
            let _ = write!(stdout, "{text}");
            exit::OK
        }
        Err(e) => {
            let _ = writeln!(stderr, "mixinglab: {e}");
            e.exit_code()
        }
    }
}
