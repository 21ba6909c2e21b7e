use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use stance_core::baselines::{published, ComparisonRow, ComparisonTable, Setting, ABLATION};
use stance_core::chain::ChainMode;
use stance_core::metrics::format_2dp;
use stance_core::report::{ablation_table, RunReport};

use crate::args::ReportArgs;
use crate::CliError;

const REPORT_FILE: &str = "report.json";

/// Run directories under `dir`: the directory itself when it holds a
/// report, else its immediate children that do.
fn find_runs(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if dir.join(REPORT_FILE).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut found = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| dir.display().to_string())? {
        let path = entry?.path();
        if path.join(REPORT_FILE).is_file() {
            found.push(path);
        }
    }
    found.sort();
    Ok(found)
}

fn load(dir: &Path) -> anyhow::Result<RunReport> {
    let path = dir.join(REPORT_FILE);
    let text = std::fs::read_to_string(&path).with_context(|| path.display().to_string())?;
    serde_json::from_str(&text).with_context(|| path.display().to_string())
}

pub fn cmd_report(args: &ReportArgs) -> Result<(), CliError> {
    let mut runs: Vec<(PathBuf, RunReport)> = Vec::new();
    for dir in &args.runs {
        if !dir.is_dir() {
            return Err(CliError::Usage(format!("{} is not a directory", dir.display())));
        }
        let found = find_runs(dir)?;
        if found.is_empty() {
            return Err(CliError::Usage(format!("{} holds no finished run (no {REPORT_FILE})", dir.display())));
        }
        for d in found {
            let report = load(&d)?;
            runs.push((d, report));
        }
    }
    let doc = combine(&runs)?;
    match &args.out {
        Some(path) => std::fs::write(path, doc).with_context(|| path.display().to_string())?,
        None => print!("{doc}"),
    }
    Ok(())
}

/// Merged document over compatible runs.
pub fn combine(runs: &[(PathBuf, RunReport)]) -> Result<String, CliError> {
    let Some((first_dir, first)) = runs.first() else {
        return Err(CliError::Usage("no runs given".into()));
    };
    for (dir, r) in &runs[1..] {
        if r.scores.metrics_version != first.scores.metrics_version {
            return Err(CliError::IncompatibleRuns(format!(
                "metrics version {} in {} vs {} in {}",
                r.scores.metrics_version,
                dir.display(),
                first.scores.metrics_version,
                first_dir.display()
            )));
        }
        if r.scores.dataset_digest != first.scores.dataset_digest {
            return Err(CliError::IncompatibleRuns(format!(
                "{} and {} were run on different datasets",
                dir.display(),
                first_dir.display()
            )));
        }
    }

    let mut out = String::from("# Stance detection results\n\n");
    out.push_str("| Run | Condition | Setting | Shots | Seeds | Avg | Unscoreable |\n|---|---|---|---|---|---|---|\n");
    for (dir, r) in runs {
        let s = &r.scores;
        let seeds: Vec<String> = s.runs.iter().map(|x| x.seed.to_string()).collect();
        let unscoreable: u64 = s.runs.iter().map(|x| x.unscoreable).sum();
        let examples: u64 = s.runs.iter().map(|x| x.examples).sum();
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {unscoreable}/{examples} |",
            dir.display(),
            s.label,
            s.setting,
            s.shots,
            seeds.join(","),
            s.mean.aggregate.map(format_2dp).unwrap_or_else(|| "-".into())
        );
    }

    for setting in [Setting::ZeroShot, Setting::FewShot] {
        let of_setting: Vec<_> = runs.iter().filter(|(_, r)| r.scores.setting == setting).collect();
        if of_setting.is_empty() {
            continue;
        }
        let mut table = ComparisonTable {
            title: format!("Comparison with published {setting} results"),
            rows: published(setting).iter().map(ComparisonRow::published).collect(),
        };
        for (dir, r) in &of_setting {
            let name = format!("{} (measured, {})", r.scores.label, dir.display());
            table.rows.push(ComparisonRow::measured(name, &r.scores.mean.per_target, r.scores.mean.aggregate));
        }
        out.push('\n');
        out.push_str(&table.to_markdown());

        let mut any_ablation = false;
        for (_, cos) in of_setting.iter().filter(|(_, r)| r.scores.mode == ChainMode::Cos) {
            let partner = of_setting.iter().find(|(_, r)| {
                r.scores.mode == ChainMode::Direct
                    && r.scores.shots == cos.scores.shots
                    && r.scores.targets == cos.scores.targets
            });
            if let Some((_, direct)) = partner {
                out.push('\n');
                out.push_str(&ablation_table(&cos.scores, &direct.scores).to_markdown());
                any_ablation = true;
            }
        }
        if any_ablation && setting == Setting::ZeroShot {
            let published = ComparisonTable {
                title: "Published ablation (zero-shot)".into(),
                rows: ABLATION.iter().map(ComparisonRow::published).collect(),
            };
            out.push('\n');
            out.push_str(&published.to_markdown());
        }
    }

    let audited: Vec<_> = runs.iter().filter(|(_, r)| r.errors.is_some()).collect();
    if !audited.is_empty() {
        out.push_str("\n## Error categories (model-audited)\n\n");
        for (dir, r) in audited {
            let _ = writeln!(out, "### {}\n", dir.display());
            out.push_str("```\n");
            out.push_str(&r.errors.as_ref().expect("filtered").to_tsv());
            out.push_str("```\n");
        }
    }
    Ok(out)
}
