use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Serialize;
use stance_core::audit::{audit_errors, AuditConfig, AuditReport};
use stance_core::backend::{BackendConfig, Completer, ResponseCache};
use stance_core::baselines::{compare_to_baselines, ComparisonRow, ComparisonTable, Setting, ABLATION};
use stance_core::chain::{ChainEngine, ChainMode, ChainResult, ExampleOutcome, TraceRecord};
use stance_core::dataset::{sample_few_shot, subsample_per_target};
use stance_core::digest::json_digest;
use stance_core::metrics::METRICS_VERSION;
use stance_core::prompting::{FewShotExemplar, TemplateSet};
use stance_core::report::{ablation_table, RunReport, ScoreTables, SeedRun};
use stance_core::{Target, TweetRecord};

use crate::args::RunArgs;
use crate::data::Dataset;
use crate::manifest::{now, RunManifest, RunStatus, PARTIAL_MARKER};
use crate::settings::RunSettings;
use crate::CliError;

/// Seed of the test subsample drawn by `--limit-per-target`. Fixed so
/// every seed and condition sees the same examples.
const SUBSAMPLE_SEED: u64 = 0;

pub fn cmd_run(args: &RunArgs, command_line: Vec<String>) -> Result<(), CliError> {
    let settings = RunSettings::resolve(args)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .context("starting async runtime")?;
    runtime.block_on(execute(&settings, command_line))
}

/// Inputs shared by every condition of one invocation.
struct Inputs {
    backend: BackendConfig,
    backend_digest: String,
    templates: TemplateSet,
    dataset: Dataset,
    dataset_digest: String,
    test: Vec<TweetRecord>,
}

fn load_inputs(settings: &RunSettings) -> anyhow::Result<Inputs> {
    let backend = BackendConfig::load(&settings.backend)?;
    let backend_digest = backend.digest()?;
    let templates = match &settings.templates {
        Some(p) => TemplateSet::load(p)?,
        None => TemplateSet::default_set(),
    };
    let dataset = Dataset::load(&settings.data_files())?;
    let dataset_digest = dataset.digest();
    let selected: Vec<TweetRecord> =
        dataset.test.iter().filter(|r| settings.targets.contains(&r.target)).cloned().collect();
    let test = match settings.limit_per_target {
        Some(n) => subsample_per_target(&selected, n, SUBSAMPLE_SEED),
        None => selected,
    };
    if test.is_empty() {
        return Err(anyhow!("no test records for the selected targets"));
    }
    Ok(Inputs { backend, backend_digest, templates, dataset, dataset_digest, test })
}

fn mode_dir(mode: ChainMode) -> &'static str {
    match mode {
        ChainMode::Cos => "cos",
        ChainMode::Direct => "direct",
    }
}

async fn execute(settings: &RunSettings, command_line: Vec<String>) -> Result<(), CliError> {
    let inputs = load_inputs(settings)?;
    std::fs::create_dir_all(&settings.out).with_context(|| settings.out.display().to_string())?;
    let cache = match settings.cache_path() {
        Some(dir) => Some(ResponseCache::open(&dir).map_err(|e| anyhow!("{}: {e}", dir.display()))?),
        None => None,
    };
    let completer = Completer::from_config(inputs.backend.clone(), cache).map_err(anyhow::Error::from)?;

    let modes = settings.mode.modes();
    let mut reports = Vec::new();
    for mode in &modes {
        let dir = if modes.len() > 1 { settings.out.join(mode_dir(*mode)) } else { settings.out.clone() };
        let report = run_condition(settings, &inputs, &completer, *mode, &dir, &command_line).await?;
        reports.push(report);
    }
    if let [cos, direct] = reports.as_slice() {
        write_ablation(&settings.out, cos, direct)?;
    }
    for r in &reports {
        let s = &r.scores;
        let avg = s.mean.aggregate.map(stance_core::metrics::format_2dp).unwrap_or_else(|| "-".into());
        println!("{} ({}, {} shots): Avg F_avg {avg} over {} seed(s)", s.label, s.setting, s.shots, s.runs.len());
    }
    println!("results in {}", settings.out.display());
    Ok(())
}

/// Digest of everything that determines the score tables. Output and cache
/// paths are left out so reruns elsewhere give identical tables.
fn config_digest(settings: &RunSettings, inputs: &Inputs, mode: ChainMode) -> String {
    #[derive(Serialize)]
    struct Identity<'a> {
        metrics_version: &'a str,
        mode: ChainMode,
        setting: Setting,
        shots: usize,
        targets: &'a [Target],
        seeds: &'a [u64],
        limit_per_target: Option<usize>,
        temperature: f64,
        max_tokens_per_step: u32,
        step4_max_tokens: u32,
        retry_limit: u32,
        backend_digest: &'a str,
        template_digest: &'a str,
        dataset_digest: &'a str,
    }
    json_digest(&Identity {
        metrics_version: METRICS_VERSION,
        mode,
        setting: settings.setting,
        shots: settings.shots,
        targets: &settings.targets,
        seeds: &settings.seeds,
        limit_per_target: settings.limit_per_target,
        temperature: settings.temperature,
        max_tokens_per_step: settings.max_tokens_per_step,
        step4_max_tokens: settings.step4_max_tokens,
        retry_limit: settings.retry_limit,
        backend_digest: &inputs.backend_digest,
        template_digest: inputs.templates.digest(),
        dataset_digest: &inputs.dataset_digest,
    })
}

fn file_safe(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' }).collect()
}

struct Writer {
    dir: PathBuf,
    artifacts: Vec<PathBuf>,
}

impl Writer {
    fn write(&mut self, rel: impl AsRef<Path>, contents: &str) -> anyhow::Result<()> {
        let rel = rel.as_ref();
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).with_context(|| parent.display().to_string())?;
        }
        std::fs::write(&path, contents).with_context(|| path.display().to_string())?;
        self.artifacts.push(rel.to_path_buf());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: impl AsRef<Path>, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, &text)
    }
}

fn exemplars_for(
    settings: &RunSettings,
    inputs: &Inputs,
    seed: u64,
) -> anyhow::Result<BTreeMap<Target, Vec<FewShotExemplar>>> {
    let mut out = BTreeMap::new();
    for t in &settings.targets {
        let ex = if settings.shots == 0 {
            Vec::new()
        } else {
            sample_few_shot(&inputs.dataset.train, *t, settings.shots, seed)?
        };
        out.insert(*t, ex);
    }
    Ok(out)
}

async fn run_condition(
    settings: &RunSettings,
    inputs: &Inputs,
    completer: &Completer,
    mode: ChainMode,
    dir: &Path,
    command_line: &[String],
) -> Result<RunReport, CliError> {
    std::fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
    let _ = std::fs::remove_file(dir.join(PARTIAL_MARKER));
    let digest = config_digest(settings, inputs, mode);
    let calls_before = (completer.backend_calls(), completer.cache_hits());
    let mut manifest = RunManifest {
        command_line: command_line.to_vec(),
        config: settings.clone(),
        mode,
        backend: inputs.backend.clone(),
        backend_digest: inputs.backend_digest.clone(),
        template_digest: inputs.templates.digest().to_string(),
        dataset_digest: inputs.dataset_digest.clone(),
        data_files: inputs.dataset.files.clone(),
        config_digest: digest.clone(),
        seeds: settings.seeds.clone(),
        started_at: now(),
        finished_at: None,
        status: RunStatus::Running,
        backend_calls: 0,
        cache_hits: 0,
        audit_calls: 0,
        artifacts: Vec::new(),
    };
    manifest.write(dir)?;
    let mut w = Writer { dir: dir.to_path_buf(), artifacts: Vec::new() };
    w.write("config.toml", &settings.to_toml())?;

    let engine_label = mode.report_label();
    let mut runs = Vec::new();
    let mut mispredicted: Vec<ChainResult> = Vec::new();
    for &seed in &settings.seeds {
        tracing::info!(condition = engine_label, seed, examples = inputs.test.len(), "starting run");
        let exemplars = exemplars_for(settings, inputs, seed)?;
        let items: Vec<(TweetRecord, Vec<FewShotExemplar>)> =
            inputs.test.iter().map(|r| (r.clone(), exemplars[&r.target].clone())).collect();
        let engine = ChainEngine::new(completer, &inputs.templates, settings.chain_config(mode, seed));
        let results = engine.run_batch(items, settings.concurrency).await;

        let seed_dir = PathBuf::from("runs").join(format!("seed-{seed}"));
        let mut outcomes: Vec<ExampleOutcome> = Vec::with_capacity(results.len());
        let mut failures = Vec::new();
        for (record, result) in inputs.test.iter().zip(results) {
            match result {
                Ok(outcome) => {
                    let trace = TraceRecord::new(&outcome, mode, &digest);
                    w.json(seed_dir.join("traces").join(format!("{}.json", file_safe(&record.id))), &trace)?;
                    outcomes.push(outcome);
                }
                Err(e) => failures.push(format!("seed {seed} {}: {e}", record.id)),
            }
        }
        if !failures.is_empty() {
            let mut marker = format!(
                "{} of {} examples failed in the backend; completed traces are kept and cached responses make a rerun resume.\n",
                failures.len(),
                inputs.test.len()
            );
            for f in &failures {
                marker.push_str(f);
                marker.push('\n');
            }
            w.write(PARTIAL_MARKER, &marker)?;
            let calls = (completer.backend_calls() - calls_before.0, completer.cache_hits() - calls_before.1);
            finish_manifest(&mut manifest, &w, calls, 0, RunStatus::Partial, dir)?;
            return Err(CliError::Failure(anyhow!(
                "{} backend failure(s) in {} run, seed {seed}; partial results in {} (first: {})",
                failures.len(),
                engine_label,
                dir.display(),
                failures[0]
            )));
        }
        let run = SeedRun::from_outcomes(seed, &outcomes);
        w.json(seed_dir.join("scores.json"), &run)?;
        for o in outcomes {
            if let ExampleOutcome::Scored(r) = o {
                if r.predicted != r.state.tweet().gold {
                    mispredicted.push(r);
                }
            }
        }
        runs.push(run);
    }

    let scores = ScoreTables::new(
        mode,
        settings.setting,
        settings.shots,
        settings.targets.clone(),
        digest,
        inputs.dataset_digest.clone(),
        runs,
    );
    w.write("scores.json", &scores.to_json())?;
    let chain_calls = (completer.backend_calls(), completer.cache_hits());

    let errors = if settings.audit {
        let config = AuditConfig {
            seed: settings.seeds.first().copied(),
            retry_limit: settings.retry_limit,
            retry_backoff_ms: settings.retry_backoff_ms,
            concurrency: settings.concurrency,
            ..AuditConfig::default()
        };
        let AuditReport { histogram, items } =
            audit_errors(&mispredicted, completer, &config).await.map_err(anyhow::Error::from)?;
        w.write("errors.tsv", &histogram.to_tsv())?;
        w.json("audit.json", &items)?;
        Some(histogram)
    } else {
        None
    };

    let comparison = compare_to_baselines(engine_label, &scores.mean.per_target, scores.mean.aggregate, settings.setting);
    let report = RunReport {
        scores,
        backend: format!("{:?} {}", inputs.backend.kind, inputs.backend.model).to_lowercase(),
        backend_digest: inputs.backend_digest.clone(),
        template_digest: inputs.templates.digest().to_string(),
        started_at: manifest.started_at.clone(),
        finished_at: now(),
        errors,
        comparison,
    };
    w.json("report.json", &report)?;
    w.write("report.md", &report.to_markdown())?;
    let calls = (chain_calls.0 - calls_before.0, chain_calls.1 - calls_before.1);
    let audit_calls = completer.backend_calls() - chain_calls.0;
    finish_manifest(&mut manifest, &w, calls, audit_calls, RunStatus::Complete, dir)?;
    Ok(report)
}

fn finish_manifest(
    manifest: &mut RunManifest,
    w: &Writer,
    (backend_calls, cache_hits): (u64, u64),
    audit_calls: u64,
    status: RunStatus,
    dir: &Path,
) -> anyhow::Result<()> {
    manifest.finished_at = Some(now());
    manifest.status = status;
    manifest.backend_calls = backend_calls;
    manifest.cache_hits = cache_hits;
    manifest.audit_calls = audit_calls;
    manifest.artifacts = w.artifacts.clone();
    manifest.write(dir)
}

fn write_ablation(out: &Path, cos: &RunReport, direct: &RunReport) -> anyhow::Result<()> {
    let table = ablation_table(&cos.scores, &direct.scores);
    let published = ComparisonTable {
        title: "Published ablation (zero-shot)".into(),
        rows: ABLATION.iter().map(ComparisonRow::published).collect(),
    };
    let mut md = String::from("# CoS vs. w/o CoS\n\n");
    md.push_str("Per-condition details are in `cos/report.md` and `direct/report.md`.\n\n");
    md.push_str(&table.to_markdown());
    md.push('\n');
    md.push_str(&published.to_markdown());
    std::fs::write(out.join("report.md"), md).with_context(|| out.display().to_string())?;
    let mut json = serde_json::to_string_pretty(&table)?;
    json.push('\n');
    std::fs::write(out.join("ablation.json"), json).with_context(|| out.display().to_string())?;
    Ok(())
}
