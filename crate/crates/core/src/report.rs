//! Run-level scoring and report documents.
//!
//! [`ScoreTables`] holds only numbers derived from the traces and the
//! configuration digests, so re-running a scripted configuration reproduces
//! it byte for byte. [`RunReport`] adds timestamps, the audit histogram and
//! the published comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::audit::{ErrorCategory, ErrorHistogram};
use crate::baselines::{ComparisonTable, Setting};
use crate::chain::{ChainMode, ExampleOutcome};
use crate::domain::Target;
use crate::metrics::{aggregate_targets, format_2dp, mean_of_runs, ConfusionMatrix, RunMean, TargetScore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub per_target: BTreeMap<Target, TargetScore>,
    /// Mean of the five per-target F_avg values; `None` for target subsets.
    pub aggregate: Option<f64>,
    pub examples: u64,
    pub unscoreable: u64,
    pub fallbacks: u64,
}

impl SeedRun {
    /// Scores outcomes of the given targets. Targets with no outcomes are
    /// left out.
    pub fn from_outcomes(seed: u64, outcomes: &[ExampleOutcome]) -> Self {
        let mut matrices: BTreeMap<Target, ConfusionMatrix> = BTreeMap::new();
        let mut fallbacks = 0;
        for o in outcomes {
            let record = o.record();
            matrices.entry(record.target).or_default().add(record.gold, o.predicted());
            if let ExampleOutcome::Scored(r) = o {
                fallbacks += u64::from(r.fallback_used);
            }
        }
        let per_target: BTreeMap<Target, TargetScore> =
            matrices.into_iter().map(|(t, cm)| (t, TargetScore::from_confusion(t, cm))).collect();
        let unscoreable = per_target.values().map(|s| s.confusion.unscoreable_total()).sum();
        let aggregate = aggregate_targets(&f_avg_map(&per_target)).ok();
        SeedRun { seed, per_target, aggregate, examples: outcomes.len() as u64, unscoreable, fallbacks }
    }

    pub fn f_avgs(&self) -> BTreeMap<Target, f64> {
        f_avg_map(&self.per_target)
    }

    pub fn unscoreable_rate(&self) -> f64 {
        if self.examples == 0 {
            0.0
        } else {
            self.unscoreable as f64 / self.examples as f64
        }
    }
}

fn f_avg_map(scores: &BTreeMap<Target, TargetScore>) -> BTreeMap<Target, f64> {
    scores.iter().map(|(t, s)| (*t, s.f_avg)).collect()
}

/// Machine-readable score tables of one configuration across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTables {
    pub metrics_version: String,
    pub label: String,
    pub mode: ChainMode,
    pub setting: Setting,
    pub shots: usize,
    pub targets: Vec<Target>,
    pub config_digest: String,
    pub dataset_digest: String,
    pub runs: Vec<SeedRun>,
    pub mean: RunMean,
}

impl ScoreTables {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mode: ChainMode,
        setting: Setting,
        shots: usize,
        targets: Vec<Target>,
        config_digest: String,
        dataset_digest: String,
        runs: Vec<SeedRun>,
    ) -> Self {
        let f: Vec<_> = runs.iter().map(SeedRun::f_avgs).collect();
        let mean = mean_of_runs(&f).unwrap_or(RunMean { per_target: BTreeMap::new(), aggregate: None });
        ScoreTables {
            metrics_version: crate::metrics::METRICS_VERSION.to_string(),
            label: mode.report_label().to_string(),
            mode,
            setting,
            shots,
            targets,
            config_digest,
            dataset_digest,
            runs,
            mean,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }

    /// F_avg table in the published layout: one row per seed plus the mean.
    pub fn to_markdown(&self) -> String {
        let cell = |v: Option<f64>| v.map(format_2dp).unwrap_or_else(|| "-".into());
        let mut out = String::from("| Run | HC | FM | LA | A | CC | Avg | Unscoreable | Fallbacks |\n");
        out.push_str("|---|---|---|---|---|---|---|---|---|\n");
        for r in &self.runs {
            let f = r.f_avgs();
            let _ = write!(out, "| {} seed {} |", self.label, r.seed);
            for t in Target::ALL {
                let _ = write!(out, " {} |", cell(f.get(&t).copied()));
            }
            let _ = writeln!(out, " {} | {}/{} | {} |", cell(r.aggregate), r.unscoreable, r.examples, r.fallbacks);
        }
        let _ = write!(out, "| {} mean of {} |", self.label, self.runs.len());
        for t in Target::ALL {
            let _ = write!(out, " {} |", cell(self.mean.per_target.get(&t).copied()));
        }
        let unscoreable: u64 = self.runs.iter().map(|r| r.unscoreable).sum();
        let examples: u64 = self.runs.iter().map(|r| r.examples).sum();
        let fallbacks: u64 = self.runs.iter().map(|r| r.fallbacks).sum();
        let _ = writeln!(out, " {} | {unscoreable}/{examples} | {fallbacks} |", cell(self.mean.aggregate));
        out
    }

    fn per_class_markdown(&self) -> String {
        let mut out = String::from("| Run | Target | F_favor | F_against | F_none | F_avg | Unscoreable |\n");
        out.push_str("|---|---|---|---|---|---|---|\n");
        for r in &self.runs {
            for (t, s) in &r.per_target {
                let _ = writeln!(
                    out,
                    "| seed {} | {t} | {} | {} | {} | {} | {} |",
                    r.seed,
                    format_2dp(s.f_favor),
                    format_2dp(s.f_against),
                    format_2dp(s.f_none),
                    format_2dp(s.f_avg),
                    s.confusion.unscoreable_total()
                );
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scores: ScoreTables,
    pub backend: String,
    pub backend_digest: String,
    pub template_digest: String,
    pub started_at: String,
    pub finished_at: String,
    /// Model-audited error categories of mispredictions, when requested.
    pub errors: Option<ErrorHistogram>,
    pub comparison: ComparisonTable,
}

impl RunReport {
    pub fn to_markdown(&self) -> String {
        let s = &self.scores;
        let mut out = format!("# Stance detection run: {} ({}, {} shots)\n\n", s.label, s.setting, s.shots);
        let _ = writeln!(out, "- backend: {} (digest `{}`)", self.backend, short(&self.backend_digest));
        let _ = writeln!(out, "- config digest: `{}`", short(&s.config_digest));
        let _ = writeln!(out, "- dataset digest: `{}`", short(&s.dataset_digest));
        let _ = writeln!(out, "- templates digest: `{}`", short(&self.template_digest));
        let seeds: Vec<String> = s.runs.iter().map(|r| r.seed.to_string()).collect();
        let _ = writeln!(out, "- seeds: {}", seeds.join(", "));
        let _ = writeln!(out, "- started {} / finished {}\n", self.started_at, self.finished_at);
        out.push_str("## F_avg (percent)\n\n");
        out.push_str(&s.to_markdown());
        out.push_str("\n## Per-class F1\n\n");
        out.push_str(&s.per_class_markdown());
        out.push('\n');
        out.push_str(&self.comparison.to_markdown());
        if let Some(h) = &self.errors {
            out.push_str("\n## Error categories (model-audited)\n\n| Category | Count |\n|---|---|\n");
            for c in ErrorCategory::ALL {
                let _ = writeln!(out, "| {} | {} |", c.title(), h.counts.get(&c).copied().unwrap_or(0));
            }
            let _ = writeln!(out, "| Uncategorized | {} |", h.uncategorized);
            let _ = writeln!(out, "| Audit failed | {} |", h.failed);
        }
        out
    }
}

fn short(digest: &str) -> &str {
    &digest[..digest.len().min(12)]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub cells: [Option<f64>; 5],
    pub avg: Option<f64>,
}

/// CoS vs. direct, with per-target deltas (CoS minus direct).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub setting: Setting,
    pub rows: Vec<AblationRow>,
}

fn cells_of(mean: &RunMean) -> [Option<f64>; 5] {
    let mut cells = [None; 5];
    for (i, t) in Target::ALL.into_iter().enumerate() {
        cells[i] = mean.per_target.get(&t).copied();
    }
    cells
}

pub fn ablation_table(cos: &ScoreTables, direct: &ScoreTables) -> AblationTable {
    let a = cells_of(&cos.mean);
    let b = cells_of(&direct.mean);
    let mut delta = [None; 5];
    for i in 0..5 {
        delta[i] = a[i].zip(b[i]).map(|(x, y)| x - y);
    }
    let avg_delta = cos.mean.aggregate.zip(direct.mean.aggregate).map(|(x, y)| x - y);
    AblationTable {
        setting: cos.setting,
        rows: vec![
            AblationRow { name: cos.label.clone(), cells: a, avg: cos.mean.aggregate },
            AblationRow { name: direct.label.clone(), cells: b, avg: direct.mean.aggregate },
            AblationRow { name: "Δ (CoS − w/o CoS)".into(), cells: delta, avg: avg_delta },
        ],
    }
}

impl AblationTable {
    pub fn to_markdown(&self) -> String {
        let cell = |v: Option<f64>| v.map(format_2dp).unwrap_or_else(|| "-".into());
        let mut out = format!("### Ablation ({})\n\n| Model | HC | FM | LA | A | CC | Avg |\n|---|---|---|---|---|---|---|\n", self.setting);
        for r in &self.rows {
            let _ = write!(out, "| {} |", r.name);
            for c in r.cells {
                let _ = write!(out, " {} |", cell(c));
            }
            let _ = writeln!(out, " {} |", cell(r.avg));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{ChainResult, UnscoreableExample};
    use crate::domain::{ChainState, Split, StanceLabel, TweetRecord};

    fn outcome(id: usize, target: Target, gold: StanceLabel, predicted: Option<StanceLabel>) -> ExampleOutcome {
        let state = ChainState::new(TweetRecord { id: id.to_string(), target, text: "x".into(), gold, split: Split::Test });
        match predicted {
            Some(p) => ExampleOutcome::Scored(ChainResult { state, predicted: p, fallback_used: false, steps: vec![] }),
            None => ExampleOutcome::Unscoreable(UnscoreableExample { state, steps: vec![], reason: "r".into() }),
        }
    }

    fn perfect_run(seed: u64) -> SeedRun {
        let mut outcomes = Vec::new();
        for (i, t) in Target::ALL.into_iter().enumerate() {
            outcomes.push(outcome(i * 2, t, StanceLabel::Favor, Some(StanceLabel::Favor)));
            outcomes.push(outcome(i * 2 + 1, t, StanceLabel::Against, Some(StanceLabel::Against)));
        }
        SeedRun::from_outcomes(seed, &outcomes)
    }

    #[test]
    fn cross_target_average_is_mean_of_five() {
        let mut outcomes = Vec::new();
        for (i, t) in Target::ALL.into_iter().enumerate() {
            outcomes.push(outcome(i * 3, t, StanceLabel::Favor, Some(StanceLabel::Favor)));
            outcomes.push(outcome(i * 3 + 1, t, StanceLabel::Against, Some(StanceLabel::Against)));
            let p = if i % 2 == 0 { Some(StanceLabel::Favor) } else { None };
            outcomes.push(outcome(i * 3 + 2, t, StanceLabel::Against, p));
        }
        let run = SeedRun::from_outcomes(1, &outcomes);
        let mean: f64 = run.per_target.values().map(|s| s.f_avg).sum::<f64>() / 5.0;
        assert!((run.aggregate.unwrap() - mean).abs() < 1e-12);
        assert_eq!(run.unscoreable, 2);
        assert_eq!(run.examples, 15);
    }

    #[test]
    fn subset_has_no_aggregate() {
        let run = SeedRun::from_outcomes(1, &[outcome(1, Target::Atheism, StanceLabel::None, Some(StanceLabel::None))]);
        assert_eq!(run.aggregate, None);
        assert_eq!(run.per_target.len(), 1);
    }

    #[test]
    fn ablation_deltas() {
        let cos = ScoreTables::new(ChainMode::Cos, Setting::ZeroShot, 0, Target::ALL.to_vec(), "c".into(), "d".into(), vec![perfect_run(1)]);
        let mut bad = Vec::new();
        for (i, t) in Target::ALL.into_iter().enumerate() {
            bad.push(outcome(i, t, StanceLabel::Favor, Some(StanceLabel::Against)));
        }
        let direct = ScoreTables::new(ChainMode::Direct, Setting::ZeroShot, 0, Target::ALL.to_vec(), "c".into(), "d".into(), vec![SeedRun::from_outcomes(1, &bad)]);
        assert_eq!(direct.label, "w/o CoS");
        let t = ablation_table(&cos, &direct);
        assert_eq!(t.rows[2].cells[0], Some(100.0));
        assert_eq!(t.rows[2].avg, Some(100.0));
        assert!(t.to_markdown().contains("| w/o CoS | 0.00 |"));
    }

    #[test]
    fn score_tables_markdown_layout() {
        let tables = ScoreTables::new(ChainMode::Cos, Setting::ZeroShot, 0, Target::ALL.to_vec(), "c".into(), "d".into(), vec![perfect_run(7), perfect_run(8)]);
        let md = tables.to_markdown();
        assert!(md.contains("| CoS seed 7 | 100.00 | 100.00 | 100.00 | 100.00 | 100.00 | 100.00 | 0/10 | 0 |"));
        assert!(md.contains("| CoS mean of 2 |"));
    }
}
