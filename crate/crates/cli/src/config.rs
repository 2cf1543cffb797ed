//! Command-line flags, TOML config files and their resolution into one
//! validated experiment configuration.

use crate::CliError;
use clap::{Args, Parser, Subcommand, ValueEnum};
use mixinglab::params::{c_from_k, k_from_c};
use mixinglab::scan::ScanMethod;
use mixinglab::coupling::SecondStart;
use mixinglab::{KRounding, Palette, TreeShape};
use serde::Deserialize;
use std::path::PathBuf;

pub const WORKERS_ENV: &str = "MIXINGLAB_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "mixinglab", version, about = "Glauber dynamics experiments on colorings of complete trees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,
    #[command(flatten)]
    pub params: Params,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Exhaustive spectral analysis of a small instance (JSON report).
    Exact,
    /// Epoch coalescence of the maximal coupling on the star.
    Couple,
    /// Per-height freeze frequencies and critical-leaf statistics.
    Freeze,
    /// Conductance estimate for the frozen-root set.
    Conductance,
    /// One-step weighted-distance contraction above the threshold.
    Contraction,
    /// Growth of mixing estimates across heights.
    Scan,
    /// Run the chain and print the final state.
    Sample,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::Couple => "couple",
            Self::Freeze => "freeze",
            Self::Conductance => "conductance",
            Self::Contraction => "contraction",
            Self::Scan => "scan",
            Self::Sample => "sample",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoundingArg {
    Nearest,
    Ceil,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecondArg {
    Independent,
    LeafNeighbor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    ConductanceLower,
    CouplingUpper,
}

/// Every setting, from flags or from a config file. Flags win.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Experiment name (config files only; the subcommand takes precedence).
    #[arg(skip)]
    pub experiment: Option<Command>,
    /// TOML config file with the same keys as the long flags.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Branching factor.
    #[arg(long, global = true)]
    pub b: Option<usize>,
    /// Tree height.
    #[arg(long = "H", global = true)]
    #[serde(rename = "H")]
    pub height: Option<usize>,
    /// Number of colors (exclusive with --C).
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Color density C with k = C b / ln b (exclusive with --k).
    #[arg(long = "C", global = true)]
    #[serde(rename = "C")]
    pub c: Option<f64>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    /// Step budget (sample: chain steps; scan and mixing estimates: per-replica budget).
    #[arg(long, global = true)]
    pub steps: Option<u64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to $MIXINGLAB_WORKERS, then 1.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Re-run with a second derived seed and require overlapping intervals.
    #[arg(long, global = true)]
    #[serde(default)]
    pub check: bool,
    /// Rounding of C b / ln b (couple and contraction default to ceil, others to nearest).
    #[arg(long, global = true, value_enum)]
    pub k_rounding: Option<RoundingArg>,
    /// couple: maximum number of epochs per replica.
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// couple: epoch length (default ceil(20 b ln b)).
    #[arg(long, global = true)]
    pub epoch_length: Option<usize>,
    /// couple: coupling-time mixing estimate on the default grid instead of epochs.
    #[arg(long, global = true)]
    #[serde(default)]
    pub mixing_estimate: bool,
    /// scan: heights to evaluate, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub heights: Option<Vec<usize>>,
    /// scan: estimation method (default by C).
    #[arg(long, global = true, value_enum)]
    pub method: Option<MethodArg>,
    /// exact: fixed color of a virtual parent of the root.
    #[arg(long, global = true)]
    pub boundary: Option<u8>,
    /// exact: log-Sobolev restart agreement tolerance.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// conductance: compare against full enumeration.
    #[arg(long, global = true)]
    #[serde(default)]
    pub exact_compare: bool,
    /// contraction: how the second start coloring is drawn.
    #[arg(long, global = true, value_enum)]
    pub second: Option<SecondArg>,
    /// contraction: override the |A(r)| conditioning level.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Suggest the replica count from the Chernoff bound for this half-width.
    #[arg(long, global = true)]
    pub target_half_width: Option<f64>,
    /// sample: start from a serialized state.
    #[arg(long, global = true)]
    pub load_state: Option<PathBuf>,
    /// sample: write the final state here.
    #[arg(long, global = true)]
    pub dump_state: Option<PathBuf>,
}

macro_rules! prefer {
    ($cli:expr, $file:expr, $($field:ident),*) => {
        $( if $cli.$field.is_none() { $cli.$field = $file.$field.clone(); } )*
    };
}

impl Params {
    /// Fills unset fields from `file`.
    pub fn merged_with(mut self, file: Params) -> Self {
        prefer!(
            self, file, experiment, b, height, k, c, replicas, steps, seed, workers, out, format, k_rounding,
            epochs, epoch_length, heights, method, boundary, tolerance, second, threshold, target_half_width,
            load_state, dump_state
        );
        self.check |= file.check;
        self.mixing_estimate |= file.mixing_estimate;
        self.exact_compare |= file.exact_compare;
        self
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config file: {}", e.message())))
    }
}

/// A validated configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: Command,
    pub shape: TreeShape,
    pub palette: Palette,
    /// C as supplied, or derived from k (absent when b = 1).
    pub c: Option<f64>,
    pub c_supplied: bool,
    pub replicas: usize,
    pub steps: Option<u64>,
    pub seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub check: bool,
    pub epochs: usize,
    pub epoch_length: Option<usize>,
    pub mixing_estimate: bool,
    pub heights: Vec<usize>,
    pub rounding: KRounding,
    pub method: Option<ScanMethod>,
    pub boundary: Option<u8>,
    pub tolerance: f64,
    pub exact_compare: bool,
    pub second: SecondStart,
    pub threshold: Option<f64>,
    pub load_state: Option<PathBuf>,
    pub dump_state: Option<PathBuf>,
}

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_REPLICAS: usize = 10_000;
pub const DEFAULT_EPOCHS: usize = 200;

fn workers_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("{WORKERS_ENV}: expected a worker count, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

impl ExperimentConfig {
    pub fn resolve(command: Option<Command>, params: Params) -> Result<Self, CliError> {
        let command = command
            .or(params.experiment)
            .ok_or_else(|| CliError::Config("no experiment: give a subcommand or `experiment` in the config".into()))?;
        let b = params.b.ok_or_else(|| CliError::Config("missing key: b".into()))?;
        let height = match command {
            Command::Couple if !params.mixing_estimate => params.height.unwrap_or(1),
            Command::Contraction => params.height.unwrap_or(1),
            Command::Scan => params.height.unwrap_or(1),
            _ => params.height.ok_or_else(|| CliError::Config("missing key: H".into()))?,
        };
        let shape = TreeShape::new(b, height).map_err(|e| CliError::Config(format!("b, H: {e}")))?;
        let rounding = match params.k_rounding {
            Some(RoundingArg::Nearest) => KRounding::Nearest,
            Some(RoundingArg::Ceil) => KRounding::Ceil,
            None if matches!(command, Command::Couple | Command::Contraction) => KRounding::Ceil,
            None => KRounding::Nearest,
        };
        let (k, c, c_supplied) = match (params.k, params.c) {
            (Some(_), Some(_)) => return Err(CliError::Config("supply exactly one of k and C".into())),
            (None, None) => return Err(CliError::Config("missing key: one of k or C".into())),
            (Some(k), None) => (k, (b >= 2).then(|| c_from_k(k, b)), false),
            (None, Some(c)) => (k_from_c(c, b, rounding).map_err(|e| CliError::Config(format!("C: {e}")))?, Some(c), true),
        };
        let palette = Palette::new(k).map_err(|e| CliError::Config(format!("k: {e}")))?;
        let workers = match params.workers {
            Some(w) => w,
            None => workers_from_env()?.unwrap_or(1),
        }
        .max(1);
        let p_guess = 0.5;
        let replicas = match (params.replicas, params.target_half_width) {
            (Some(r), _) => r,
            (None, Some(h)) => mixinglab::stats::chernoff_replicas(p_guess, h, mixinglab::stats::DEFAULT_CONFIDENCE),
            (None, None) => DEFAULT_REPLICAS,
        };
        if replicas == 0 {
            return Err(CliError::Config("replicas: must be positive".into()));
        }
        let heights = match (command, params.heights) {
            (Command::Scan, Some(h)) => h,
            (Command::Scan, None) => vec![1, 2, 3],
            (_, h) => h.unwrap_or_default(),
        };
        Ok(Self {
            command,
            shape,
            palette,
            c,
            c_supplied,
            replicas,
            steps: params.steps,
            seed: params.seed.unwrap_or(DEFAULT_SEED),
            workers,
            out: params.out,
            format: params.format.unwrap_or(match command {
                Command::Exact => Format::Json,
                _ => Format::Csv,
            }),
            check: params.check,
            epochs: params.epochs.unwrap_or(DEFAULT_EPOCHS),
            epoch_length: params.epoch_length,
            mixing_estimate: params.mixing_estimate,
            heights,
            rounding,
            method: params.method.map(|m| match m {
                MethodArg::ConductanceLower => ScanMethod::ConductanceLower,
                MethodArg::CouplingUpper => ScanMethod::CouplingUpper,
            }),
            boundary: params.boundary,
            tolerance: params.tolerance.unwrap_or(1e-3),
            exact_compare: params.exact_compare,
            second: match params.second {
                Some(SecondArg::LeafNeighbor) => SecondStart::LeafNeighbor,
                _ => SecondStart::Independent,
            },
            threshold: params.threshold,
            load_state: params.load_state,
            dump_state: params.dump_state,
        })
    }

    /// Parses flags (and the config file they name) into a configuration.
    pub fn from_args<I, T>(args: I) -> Result<Self, CliError>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => CliError::Help(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        })?;
        let params = match &cli.params.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
                let file = Params::from_toml(&text)?;
                cli.params.clone().merged_with(file)
            }
            None => cli.params.clone(),
        };
        Self::resolve(cli.command, params)
    }
}
