//! Run configuration: flags override the config file, which overrides the
//! built-in defaults. The resolved view is what the manifest records.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use stance_core::baselines::Setting;
use stance_core::chain::{ChainConfig, ChainMode};
use stance_core::Target;

use crate::args::{ModeArg, RunArgs};
use crate::data::DataFiles;
use crate::CliError;

pub const DEFAULT_SEEDS: [u64; 3] = [1, 2, 3];
pub const DEFAULT_FEW_SHOT: usize = 4;
const DEFAULT_CONCURRENCY: usize = 8;

/// Config file contents. Every key is optional; relative paths are taken
/// relative to the file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub mode: Option<ModeArg>,
    pub setting: Option<Setting>,
    pub shots: Option<usize>,
    pub targets: Option<Vec<Target>>,
    pub seeds: Option<Vec<u64>>,
    pub backend: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
    pub train: Option<Vec<PathBuf>>,
    pub test: Option<Vec<PathBuf>>,
    pub templates: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub no_cache: Option<bool>,
    pub limit_per_target: Option<usize>,
    pub concurrency: Option<usize>,
    pub audit: Option<bool>,
    pub temperature: Option<f64>,
    pub max_tokens_per_step: Option<u32>,
    pub step4_max_tokens: Option<u32>,
    pub retry_limit: Option<u32>,
    pub retry_backoff_ms: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<FileConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: FileConfig = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut cfg.backend, &mut cfg.data_dir, &mut cfg.templates, &mut cfg.out, &mut cfg.cache_dir]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        for list in [&mut cfg.train, &mut cfg.test].into_iter().flatten() {
            list.iter_mut().for_each(fix);
        }
        Ok(cfg)
    }
}

/// Fully resolved run configuration. Written to the run directory as
/// `config.toml`, which `run --config` accepts as is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub mode: ModeArg,
    pub setting: Setting,
    pub shots: usize,
    pub targets: Vec<Target>,
    pub seeds: Vec<u64>,
    pub backend: PathBuf,
    pub train: Vec<PathBuf>,
    pub test: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<PathBuf>,
    pub out: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    pub no_cache: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit_per_target: Option<usize>,
    pub concurrency: usize,
    pub audit: bool,
    pub temperature: f64,
    pub max_tokens_per_step: u32,
    pub step4_max_tokens: u32,
    pub retry_limit: u32,
    pub retry_backoff_ms: u64,
}

fn parse_targets(raw: &[String]) -> Result<Vec<Target>, CliError> {
    let mut out = Vec::new();
    for r in raw {
        let t: Target = r.trim().parse().map_err(|_| CliError::Usage(format!("unknown target `{r}`")))?;
        if !out.contains(&t) {
            out.push(t);
        }
    }
    Ok(out)
}

impl RunSettings {
    pub fn resolve(args: &RunArgs) -> Result<RunSettings, CliError> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let base = ChainConfig::default();

        let setting = args.setting.map(Setting::from).or(file.setting).unwrap_or(Setting::ZeroShot);
        let explicit_shots = args.shots.or(file.shots);
        let shots = match (setting, explicit_shots) {
            (Setting::ZeroShot, Some(n)) if n > 0 => {
                return Err(CliError::Usage(format!("--shots {n} requires --setting few-shot")));
            }
            (Setting::ZeroShot, _) => 0,
            (Setting::FewShot, Some(0)) => {
                return Err(CliError::Usage("few-shot setting needs at least one shot".into()));
            }
            (Setting::FewShot, n) => n.unwrap_or(DEFAULT_FEW_SHOT),
        };

        let mut targets = match &args.targets {
            Some(raw) => parse_targets(raw)?,
            None => file.targets.clone().unwrap_or_else(|| Target::ALL.to_vec()),
        };
        if targets.is_empty() {
            return Err(CliError::Usage("no targets selected".into()));
        }
        targets.sort();
        targets.dedup();

        let seeds = args.seeds.clone().or(file.seeds.clone()).unwrap_or_else(|| DEFAULT_SEEDS.to_vec());
        if seeds.is_empty() {
            return Err(CliError::Usage("no seeds given".into()));
        }

        let backend = args
            .backend
            .clone()
            .or(file.backend.clone())
            .ok_or_else(|| CliError::Usage("no backend config: pass --backend".into()))?;

        let data_dir = args.data.data_dir.clone().or(file.data_dir.clone());
        let train = if args.data.train.is_empty() { file.train.clone().unwrap_or_default() } else { args.data.train.clone() };
        let test = if args.data.test.is_empty() { file.test.clone().unwrap_or_default() } else { args.data.test.clone() };
        let files = DataFiles::resolve(data_dir.as_deref(), &train, &test)?;

        let concurrency = args.concurrency.or(file.concurrency).unwrap_or(DEFAULT_CONCURRENCY);
        if concurrency == 0 {
            return Err(CliError::Usage("--concurrency must be positive".into()));
        }
        let temperature = args.temperature.or(file.temperature).unwrap_or(base.temperature);
        if temperature.is_nan() || temperature < 0.0 {
            return Err(CliError::Usage(format!("invalid temperature {temperature}")));
        }
        let limit_per_target = args.limit_per_target.or(file.limit_per_target);
        if limit_per_target == Some(0) {
            return Err(CliError::Usage("--limit-per-target must be positive".into()));
        }

        Ok(RunSettings {
            mode: args.mode.or(file.mode).unwrap_or(ModeArg::Cos),
            setting,
            shots,
            targets,
            seeds,
            backend,
            train: files.train,
            test: files.test,
            templates: args.templates.clone().or(file.templates.clone()),
            out: args.out.clone().or(file.out.clone()).unwrap_or_else(|| PathBuf::from("stance-run")),
            cache_dir: args.cache_dir.clone().or(file.cache_dir.clone()),
            no_cache: args.no_cache || file.no_cache.unwrap_or(false),
            limit_per_target,
            concurrency,
            audit: args.audit || file.audit.unwrap_or(false),
            temperature,
            max_tokens_per_step: file.max_tokens_per_step.unwrap_or(base.max_tokens_per_step),
            step4_max_tokens: file.step4_max_tokens.unwrap_or(base.step4_max_tokens),
            retry_limit: args.retry_limit.or(file.retry_limit).unwrap_or(base.retry_limit),
            retry_backoff_ms: file.retry_backoff_ms.unwrap_or(base.retry_backoff_ms),
        })
    }

    pub fn data_files(&self) -> DataFiles {
        DataFiles { train: self.train.clone(), test: self.test.clone() }
    }

    pub fn chain_config(&self, mode: ChainMode, seed: u64) -> ChainConfig {
        ChainConfig {
            mode,
            shots: self.shots,
            temperature: self.temperature,
            max_tokens_per_step: self.max_tokens_per_step,
            step4_max_tokens: self.step4_max_tokens,
            seed,
            retry_limit: self.retry_limit,
            retry_backoff_ms: self.retry_backoff_ms,
        }
    }

    /// Cache location; `None` when caching is off.
    pub fn cache_path(&self) -> Option<PathBuf> {
        if self.no_cache {
            None
        } else {
            Some(self.cache_dir.clone().unwrap_or_else(|| self.out.join("cache")))
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("settings serialize to TOML")
    }
}
