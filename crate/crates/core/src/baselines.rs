//! Published comparison numbers, embedded as static data. Cells marked "-"
//! in the source tables are `None` and are never imputed.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::Target;
use crate::metrics::format_2dp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    ZeroShot,
    FewShot,
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::ZeroShot => "zero-shot",
            Setting::FewShot => "few-shot",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowGroup {
    Baseline,
    ChainOfStance,
    WithoutChain,
}

/// One published table row: HC, FM, LA, A, CC cells and the printed average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PublishedRow {
    pub name: &'static str,
    pub group: RowGroup,
    pub cells: [Option<f64>; 5],
    pub avg: Option<f64>,
}

impl PublishedRow {
    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(Option::is_some) && self.avg.is_some()
    }

    pub fn per_target(&self) -> BTreeMap<Target, f64> {
        Target::ALL
            .into_iter()
            .zip(self.cells)
            .filter_map(|(t, c)| c.map(|v| (t, v)))
            .collect()
    }
}

const fn row(name: &'static str, group: RowGroup, c: [f64; 5], avg: f64) -> PublishedRow {
    PublishedRow {
        name,
        group,
        cells: [Some(c[0]), Some(c[1]), Some(c[2]), Some(c[3]), Some(c[4])],
        avg: Some(avg),
    }
}

const fn partial(name: &'static str, c: [f64; 3]) -> PublishedRow {
    PublishedRow {
        name,
        group: RowGroup::Baseline,
        cells: [Some(c[0]), Some(c[1]), Some(c[2]), None, None],
        avg: None,
    }
}

use RowGroup::{Baseline as B, ChainOfStance as C, WithoutChain as W};

/// Zero-shot results.
pub const ZERO_SHOT: [PublishedRow; 11] = [
    row("JointCL", B, [54.80, 53.80, 49.50, 54.50, 39.70], 50.46),
    row("TATA", B, [65.40, 66.90, 62.90, 52.10, 41.60], 57.78),
    partial("KASD-LLaMA2", [77.70, 65.57, 57.07]),
    row("KASD-ChatGPT", B, [80.32, 70.41, 62.71, 63.95, 55.83], 66.64),
    row("COLA", B, [81.70, 63.40, 71.00, 70.80, 65.50], 70.48),
    row("LLaMA2-MB-Cal", B, [75.47, 73.25, 67.76, 64.83, 58.23], 67.91),
    row("GPT3.5-MB-Cal", B, [78.50, 74.99, 66.08, 66.87, 67.22], 70.73),
    row("Mistral (CoS)", C, [86.18, 74.93, 72.89, 77.52, 70.61], 76.43),
    row("Qwen1.5 (CoS)", C, [78.57, 72.26, 70.23, 73.70, 63.19], 71.59),
    row("LLaMA2 (CoS)", C, [77.45, 70.08, 74.10, 76.11, 70.85], 73.72),
    row("LLaMA3 (CoS)", C, [82.90, 73.51, 71.39, 73.84, 79.36], 76.20),
];

/// Few-shot results (4 shots).
pub const FEW_SHOT: [PublishedRow; 10] = [
    partial("KEprompt", [77.10, 68.30, 70.30]),
    partial("KASD-LLaMA2", [77.89, 67.29, 52.00]),
    row("KASD-ChatGPT", B, [80.92, 70.37, 63.26, 61.92, 62.72], 67.84),
    row("CoSD", B, [76.35, 68.96, 77.29, 81.02, 68.33], 74.39),
    row("LLaMA2-MB-Cal", B, [82.19, 75.74, 73.50, 69.57, 76.96], 75.59),
    row("GPT3.5-MB-Cal", B, [83.03, 75.57, 69.98, 75.19, 84.55], 77.67),
    row("Mistral (CoS)", C, [87.04, 77.33, 77.47, 78.14, 79.24], 79.84),
    row("Qwen1.5 (CoS)", C, [82.11, 72.98, 76.11, 79.35, 74.41], 76.99),
    row("LLaMA2 (CoS)", C, [83.68, 73.87, 73.50, 73.62, 69.72], 74.88),
    row("LLaMA3 (CoS)", C, [85.95, 73.69, 72.34, 74.43, 78.86], 77.05),
];

/// Ablation: each model with and without the chain, zero-shot.
pub const ABLATION: [PublishedRow; 8] = [
    row("Mistral-CoS", C, [86.18, 74.93, 72.89, 77.52, 70.61], 76.43),
    row("Mistral w/o CoS", W, [79.80, 70.41, 71.08, 74.39, 57.63], 70.66),
    row("Qwen-CoS", C, [78.57, 72.26, 70.23, 73.70, 63.19], 71.59),
    row("Qwen w/o CoS", W, [74.87, 68.70, 56.58, 67.02, 50.55], 63.54),
    row("LLaMA2-CoS", C, [77.45, 70.08, 74.10, 76.11, 70.85], 73.72),
    row("LLaMA2 w/o CoS", W, [70.94, 63.69, 59.36, 52.56, 43.65], 58.04),
    row("LLaMA3-CoS", C, [82.90, 73.51, 71.39, 73.84, 79.36], 76.20),
    row("LLaMA3 w/o CoS", W, [78.52, 70.00, 67.86, 67.87, 65.49], 69.95),
];

pub fn published(setting: Setting) -> &'static [PublishedRow] {
    match setting {
        Setting::ZeroShot => &ZERO_SHOT,
        Setting::FewShot => &FEW_SHOT,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowSource {
    Published,
    Measured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub source: RowSource,
    pub group: Option<RowGroup>,
    /// HC, FM, LA, A, CC; `None` for cells absent in the source.
    pub cells: [Option<f64>; 5],
    pub avg: Option<f64>,
}

impl ComparisonRow {
    pub fn published(r: &PublishedRow) -> Self {
        ComparisonRow { name: r.name.to_string(), source: RowSource::Published, group: Some(r.group), cells: r.cells, avg: r.avg }
    }

    pub fn measured(name: impl Into<String>, per_target: &BTreeMap<Target, f64>, avg: Option<f64>) -> Self {
        let mut cells = [None; 5];
        for (i, t) in Target::ALL.into_iter().enumerate() {
            cells[i] = per_target.get(&t).copied();
        }
        ComparisonRow { name: name.into(), source: RowSource::Measured, group: None, cells, avg }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub title: String,
    pub rows: Vec<ComparisonRow>,
}

/// Published rows for `setting` followed by the measured row.
pub fn compare_to_baselines(
    measured_name: &str,
    per_target: &BTreeMap<Target, f64>,
    avg: Option<f64>,
    setting: Setting,
) -> ComparisonTable {
    let mut rows: Vec<ComparisonRow> = published(setting).iter().map(ComparisonRow::published).collect();
    rows.push(ComparisonRow::measured(format!("{measured_name} (measured)"), per_target, avg));
    ComparisonTable { title: format!("Comparison with published {setting} results"), rows }
}

impl ComparisonTable {
    pub fn row(&self, name: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Markdown table; absent cells print as `-`.
    pub fn to_markdown(&self) -> String {
        let cell = |v: Option<f64>| v.map(format_2dp).unwrap_or_else(|| "-".into());
        let mut out = format!("### {}\n\n| | HC | FM | LA | A | CC | Avg |\n|---|---|---|---|---|---|---|\n", self.title);
        for r in &self.rows {
            out.push_str(&format!("| {} |", r.name));
            for c in r.cells {
                out.push_str(&format!(" {} |", cell(c)));
            }
            out.push_str(&format!(" {} |\n", cell(r.avg)));
        }
        out
    }
}
