use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use stance_core::baselines::Setting;
use stance_core::chain::ChainMode;

#[derive(Debug, Parser)]
#[command(name = "stance", version, about = "Chain-of-stance benchmark harness for SemEval-2016 stance detection")]
pub struct Cli {
    /// More log output on stderr (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check dataset files against the published per-target statistics.
    Validate(ValidateArgs),
    /// Run the benchmark and write a run directory.
    Run(Box<RunArgs>),
    /// Combine finished run directories into one comparison document.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Directory holding train and test files (train.tsv/test.tsv or the
    /// official SemEval file names).
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Train file; repeatable. Overrides discovery in --data-dir.
    #[arg(long)]
    pub train: Vec<PathBuf>,
    /// Test file; repeatable. Overrides discovery in --data-dir.
    #[arg(long)]
    pub test: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Cos,
    Direct,
    /// CoS and direct in one invocation, plus the ablation table.
    Both,
}

impl ModeArg {
    pub fn modes(self) -> Vec<ChainMode> {
        match self {
            ModeArg::Cos => vec![ChainMode::Cos],
            ModeArg::Direct => vec![ChainMode::Direct],
            ModeArg::Both => vec![ChainMode::Cos, ChainMode::Direct],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SettingArg {
    ZeroShot,
    FewShot,
}

impl From<SettingArg> for Setting {
    fn from(s: SettingArg) -> Self {
        match s {
            SettingArg::ZeroShot => Setting::ZeroShot,
            SettingArg::FewShot => Setting::FewShot,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// TOML run configuration. Flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum)]
    pub setting: Option<SettingArg>,
    /// Exemplars per target; few-shot only (default 4).
    #[arg(long)]
    pub shots: Option<usize>,
    /// Comma-separated target codes (HC, FM, LA, A, CC). Default: all five.
    #[arg(long, value_delimiter = ',')]
    pub targets: Option<Vec<String>>,
    /// Backend config file (TOML).
    #[arg(long)]
    pub backend: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated seeds, one run each.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Output run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Prompt template file replacing the built-in templates.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Seeded subsample of at most N test records per target.
    #[arg(long)]
    pub limit_per_target: Option<usize>,
    /// Examples processed concurrently.
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Response cache directory (default: <out>/cache).
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub no_cache: bool,
    /// Classify mispredictions with the backend and write errors.tsv.
    #[arg(long)]
    pub audit: bool,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub retry_limit: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directories, or directories containing run directories.
    #[arg(required = true, num_args = 1..)]
    pub runs: Vec<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
