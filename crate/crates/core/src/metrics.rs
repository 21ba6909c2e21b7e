//! Confusion matrices, per-class F1 and the benchmark's F_avg, which
//! averages the FAVOR and AGAINST F1 scores and ignores NONE.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{StanceLabel, Target};

/// Bumped whenever scoring semantics change; reports from different
/// versions are not merged.
pub const METRICS_VERSION: &str = "1";

/// 3x3 counts indexed `[gold][predicted]` in `StanceLabel::ALL` order, plus
/// unscoreable examples by gold label.
///
/// Unscoreable examples are treated as predictions of no class: a false
/// negative for their gold label and a false positive nowhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
    pub unscoreable: [u64; 3],
}

impl ConfusionMatrix {
    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (StanceLabel, Option<StanceLabel>)>,
    {
        let mut cm = ConfusionMatrix::default();
        for (gold, predicted) in pairs {
            cm.add(gold, predicted);
        }
        cm
    }

    pub fn add(&mut self, gold: StanceLabel, predicted: Option<StanceLabel>) {
        match predicted {
            Some(p) => self.counts[gold.index()][p.index()] += 1,
            None => self.unscoreable[gold.index()] += 1,
        }
    }

    pub fn get(&self, gold: StanceLabel, predicted: StanceLabel) -> u64 {
        self.counts[gold.index()][predicted.index()]
    }

    pub fn true_positives(&self, label: StanceLabel) -> u64 {
        self.get(label, label)
    }

    pub fn false_positives(&self, label: StanceLabel) -> u64 {
        let c = label.index();
        (0..3).filter(|g| *g != c).map(|g| self.counts[g][c]).sum()
    }

    pub fn false_negatives(&self, label: StanceLabel) -> u64 {
        let g = label.index();
        let missed: u64 = (0..3).filter(|p| *p != g).map(|p| self.counts[g][p]).sum();
        missed + self.unscoreable[g]
    }

    pub fn scored(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn unscoreable_total(&self) -> u64 {
        self.unscoreable.iter().sum()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for g in 0..3 {
            for p in 0..3 {
                self.counts[g][p] += other.counts[g][p];
            }
            self.unscoreable[g] += other.unscoreable[g];
        }
    }
}

/// F1 for one class as a fraction in [0, 1]. Zero whenever precision or
/// recall is undefined or both are zero.
pub fn f1_for_class(cm: &ConfusionMatrix, label: StanceLabel) -> f64 {
    let tp = cm.true_positives(label) as f64;
    let fp = cm.false_positives(label) as f64;
    let fn_ = cm.false_negatives(label) as f64;
    if tp + fp == 0.0 || tp + fn_ == 0.0 {
        return 0.0;
    }
    let precision = tp / (tp + fp);
    let recall = tp / (tp + fn_);
    if precision + recall == 0.0 {
        return 0.0;
    }
    2.0 * precision * recall / (precision + recall)
}

pub fn f_avg(f_favor: f64, f_against: f64) -> f64 {
    (f_favor + f_against) / 2.0
}

/// Scores of one target, in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScore {
    pub target: Target,
    pub f_favor: f64,
    pub f_against: f64,
    pub f_none: f64,
    pub f_avg: f64,
    pub confusion: ConfusionMatrix,
}

impl TargetScore {
    pub fn from_confusion(target: Target, cm: ConfusionMatrix) -> Self {
        let f_favor = 100.0 * f1_for_class(&cm, StanceLabel::Favor);
        let f_against = 100.0 * f1_for_class(&cm, StanceLabel::Against);
        let f_none = 100.0 * f1_for_class(&cm, StanceLabel::None);
        TargetScore { target, f_favor, f_against, f_none, f_avg: f_avg(f_favor, f_against), confusion: cm }
    }
}

/// Half-up rounding to two decimals for presentation. The small bias
/// absorbs binary representation error in values such as 70.665.
pub fn round_half_up_2(x: f64) -> f64 {
    let scaled = x * 100.0;
    let bias = 1e-9 * scaled.abs().max(1.0);
    (scaled + bias + 0.5).floor() / 100.0
}

/// Two-decimal string with half-up rounding.
pub fn format_2dp(x: f64) -> String {
    format!("{:.2}", round_half_up_2(x))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AggregateError {
    #[error("missing score for target {0}")]
    MissingTarget(Target),
    #[error("no runs to average")]
    NoRuns,
}

/// Unweighted mean of the five per-target F_avg values (macro over
/// targets). Extra keys are impossible since the map is keyed by target.
pub fn aggregate_targets(per_target: &BTreeMap<Target, f64>) -> Result<f64, AggregateError> {
    let mut sum = 0.0;
    for t in Target::ALL {
        sum += per_target.get(&t).ok_or(AggregateError::MissingTarget(t))?;
    }
    Ok(sum / Target::ALL.len() as f64)
}

/// Sum in ascending order so the result does not depend on input order.
fn order_independent_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMean {
    pub per_target: BTreeMap<Target, f64>,
    /// `None` unless every target is present.
    pub aggregate: Option<f64>,
}

/// Elementwise mean of per-target F_avg across runs, then the target
/// aggregate. A target missing from any run is left out of the mean.
pub fn mean_of_runs(runs: &[BTreeMap<Target, f64>]) -> Result<RunMean, AggregateError> {
    if runs.is_empty() {
        return Err(AggregateError::NoRuns);
    }
    let mut per_target = BTreeMap::new();
    for t in Target::ALL {
        let mut values: Vec<f64> = runs.iter().filter_map(|r| r.get(&t).copied()).collect();
        if values.len() == runs.len() {
            per_target.insert(t, order_independent_mean(&mut values));
        }
    }
    let aggregate = aggregate_targets(&per_target).ok();
    Ok(RunMean { per_target, aggregate })
}
