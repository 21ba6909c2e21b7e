//! SemEval-2016 Task 6 data: header-driven TSV loading, statistics checks
//! against the published per-target counts, and few-shot sampling.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{Split, StanceLabel, Target, TweetRecord};
use crate::prompting::FewShotExemplar;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    FileNotFound { path: String, source: std::io::Error },
    #[error("{path}: header lacks column `{column}`")]
    MissingColumn { path: String, column: &'static str },
    #[error("{path}: row {row}: {reason}")]
    MalformedRow { path: String, row: usize, reason: String },
    #[error("{path}: row {row}: unknown target `{target}`")]
    UnknownTarget { path: String, row: usize, target: String },
    #[error("{path}: row {row}: unknown stance label `{label}`")]
    UnknownLabel { path: String, row: usize, label: String },
    #[error("record {id}: text contains a tab or newline and cannot be written as TSV")]
    Unserializable { id: String },
    #[error("{target}: asked for {requested} exemplars, only {available} train records")]
    InsufficientData { target: Target, requested: usize, available: usize },
}

/// Parses TSV text with `ID`, `Target`, `Tweet` and `Stance` header columns
/// in any order. Extra columns are ignored.
pub fn parse_semeval(text: &str, split: Split, path: &str) -> Result<Vec<TweetRecord>, DatasetError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(DatasetError::MissingColumn { path: path.into(), column: "ID" });
    };
    let header: Vec<&str> = header.trim_start_matches('\u{feff}').split('\t').map(str::trim).collect();
    let column = |name: &'static str| {
        header
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or(DatasetError::MissingColumn { path: path.into(), column: name })
    };
    let (id_col, target_col, tweet_col, stance_col) =
        (column("ID")?, column("Target")?, column("Tweet")?, column("Stance")?);
    let needed = id_col.max(target_col).max(tweet_col).max(stance_col) + 1;

    let mut records = Vec::new();
    for (line_no, line) in lines {
        let row = line_no + 1;
        let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        if fields.len() < needed {
            return Err(DatasetError::MalformedRow {
                path: path.into(),
                row,
                reason: format!("expected at least {needed} fields, found {}", fields.len()),
            });
        }
        let target_raw = fields[target_col].trim();
        let target = Target::from_full_name(target_raw)
            .or_else(|| Target::from_code(target_raw))
            .ok_or_else(|| DatasetError::UnknownTarget { path: path.into(), row, target: target_raw.into() })?;
        let label_raw = fields[stance_col].trim();
        let gold = label_raw
            .parse::<StanceLabel>()
            .map_err(|_| DatasetError::UnknownLabel { path: path.into(), row, label: label_raw.into() })?;
        let text = fields[tweet_col].trim().to_string();
        if text.is_empty() {
            return Err(DatasetError::MalformedRow { path: path.into(), row, reason: "empty tweet".into() });
        }
        records.push(TweetRecord { id: fields[id_col].trim().to_string(), target, text, gold, split });
    }
    Ok(records)
}

/// Loads one split from disk. Invalid UTF-8 is replaced rather than
/// rejected, since some distributed copies of the data are not clean UTF-8.
pub fn load_semeval(path: &Path, split: Split) -> Result<Vec<TweetRecord>, DatasetError> {
    let bytes = std::fs::read(path)
        .map_err(|source| DatasetError::FileNotFound { path: path.display().to_string(), source })?;
    let text = String::from_utf8_lossy(&bytes);
    parse_semeval(&text, split, &path.display().to_string())
}

/// Canonical TSV form: `ID`, `Target` (full name), `Tweet`, `Stance`.
pub fn write_semeval(records: &[TweetRecord]) -> Result<String, DatasetError> {
    let mut out = String::from("ID\tTarget\tTweet\tStance\n");
    for r in records {
        if r.text.contains(['\t', '\n', '\r']) || r.id.contains(['\t', '\n', '\r']) {
            return Err(DatasetError::Unserializable { id: r.id.clone() });
        }
        out.push_str(&format!("{}\t{}\t{}\t{}\n", r.id, r.target.full_name(), r.text, r.gold));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TargetStats {
    pub train: usize,
    pub test: usize,
    pub against: usize,
    pub favor: usize,
    pub none: usize,
}

/// Per-target counts. Label counts cover train and test together.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub per_target: BTreeMap<Target, TargetStats>,
    pub total: usize,
}

/// Published per-target statistics: train, test, AGAINST, FAVOR, NONE.
pub const TABLE1: [(Target, TargetStats); 5] = [
    (Target::HillaryClinton, TargetStats { train: 689, test: 295, against: 565, favor: 163, none: 256 }),
    (Target::FeministMovement, TargetStats { train: 664, test: 285, against: 511, favor: 268, none: 170 }),
    (Target::LegalizationOfAbortion, TargetStats { train: 653, test: 280, against: 544, favor: 167, none: 222 }),
    (Target::Atheism, TargetStats { train: 513, test: 220, against: 464, favor: 124, none: 145 }),
    (Target::ClimateChange, TargetStats { train: 395, test: 169, against: 335, favor: 26, none: 203 }),
];

pub const TABLE1_TOTAL: usize = 4163;

pub fn table1_stats() -> DatasetStats {
    DatasetStats { per_target: TABLE1.into_iter().collect(), total: TABLE1_TOTAL }
}

impl DatasetStats {
    pub fn compute(records: &[TweetRecord]) -> Self {
        let mut per_target: BTreeMap<Target, TargetStats> =
            Target::ALL.into_iter().map(|t| (t, TargetStats::default())).collect();
        for r in records {
            let s = per_target.get_mut(&r.target).expect("all targets present");
            match r.split {
                Split::Train => s.train += 1,
                Split::Test => s.test += 1,
            }
            match r.gold {
                StanceLabel::Against => s.against += 1,
                StanceLabel::Favor => s.favor += 1,
                StanceLabel::None => s.none += 1,
            }
        }
        DatasetStats { per_target, total: records.len() }
    }

    pub fn test_total(&self) -> usize {
        self.per_target.values().map(|s| s.test).sum()
    }

    pub fn train_total(&self) -> usize {
        self.per_target.values().map(|s| s.train).sum()
    }
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "target\ttrain\ttest\tAGAINST\tFAVOR\tNONE")?;
        for (t, s) in &self.per_target {
            writeln!(f, "{t}\t{}\t{}\t{}\t{}\t{}", s.train, s.test, s.against, s.favor, s.none)?;
        }
        write!(f, "total {}", self.total)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatMismatch {
    pub field: String,
    pub expected: usize,
    pub actual: usize,
}

impl fmt::Display for StatMismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: expected {}, found {}", self.field, self.expected, self.actual)
    }
}

/// Compares computed statistics with the published table. Returns the
/// statistics on an exact match, otherwise every differing field.
pub fn validate_stats(records: &[TweetRecord]) -> Result<DatasetStats, (DatasetStats, Vec<StatMismatch>)> {
    let stats = DatasetStats::compute(records);
    let mut mismatches = Vec::new();
    for (target, expected) in TABLE1 {
        let actual = stats.per_target[&target];
        let fields = [
            ("train", expected.train, actual.train),
            ("test", expected.test, actual.test),
            ("AGAINST", expected.against, actual.against),
            ("FAVOR", expected.favor, actual.favor),
            ("NONE", expected.none, actual.none),
        ];
        for (name, e, a) in fields {
            if e != a {
                mismatches.push(StatMismatch { field: format!("{target}.{name}"), expected: e, actual: a });
            }
        }
    }
    if stats.total != TABLE1_TOTAL {
        mismatches.push(StatMismatch { field: "total".into(), expected: TABLE1_TOTAL, actual: stats.total });
    }
    if mismatches.is_empty() {
        Ok(stats)
    } else {
        Err((stats, mismatches))
    }
}

/// Largest-remainder (Hamilton) apportionment of `k` seats over label
/// counts. Remainder ties go AGAINST, FAVOR, NONE. Returned in
/// `StanceLabel::ALL` order (favor, against, none).
pub fn largest_remainder_allocation(counts: [usize; 3], k: usize) -> [usize; 3] {
    let total: usize = counts.iter().sum();
    if total == 0 || k == 0 {
        return [0; 3];
    }
    // Quotas k*n/N in exact integer arithmetic: floor and remainder numerator.
    let mut seats = [0usize; 3];
    let mut remainders = [0usize; 3];
    for i in 0..3 {
        seats[i] = k * counts[i] / total;
        remainders[i] = k * counts[i] % total;
    }
    let mut left = k - seats.iter().sum::<usize>();
    let mut order: Vec<usize> = StanceLabel::TIE_BREAK_ORDER.iter().map(|l| l.index()).collect();
    // Stable sort keeps the tie-break order among equal remainders.
    order.sort_by(|a, b| remainders[*b].cmp(&remainders[*a]));
    for i in order {
        if left == 0 {
            break;
        }
        seats[i] += 1;
        left -= 1;
    }
    seats
}

/// Draws `k` train-split exemplars for `target`, stratified by label with
/// largest-remainder allocation, then uniformly within each label. Test
/// records in `records` are ignored. Deterministic in `(records, target, k,
/// seed)`; the result is in dataset order.
pub fn sample_few_shot(
    records: &[TweetRecord],
    target: Target,
    k: usize,
    seed: u64,
) -> Result<Vec<FewShotExemplar>, DatasetError> {
    let pool: Vec<(usize, &TweetRecord)> = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.split == Split::Train && r.target == target)
        .collect();
    if k > pool.len() {
        return Err(DatasetError::InsufficientData { target, requested: k, available: pool.len() });
    }
    if k == 0 {
        return Ok(Vec::new());
    }

    let mut by_label: [Vec<usize>; 3] = Default::default();
    for (idx, r) in &pool {
        by_label[r.gold.index()].push(*idx);
    }
    let counts = [by_label[0].len(), by_label[1].len(), by_label[2].len()];
    let seats = largest_remainder_allocation(counts, k);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(k);
    for label in StanceLabel::TIE_BREAK_ORDER {
        let i = label.index();
        let mut candidates = by_label[i].clone();
        candidates.shuffle(&mut rng);
        chosen.extend(candidates.into_iter().take(seats[i]));
    }
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| FewShotExemplar::new(records[i].clone())).collect())
}

/// Keeps at most `n` records per target, chosen uniformly with a seeded
/// shuffle. The result is in dataset order.
pub fn subsample_per_target(records: &[TweetRecord], n: usize, seed: u64) -> Vec<TweetRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::new();
    for target in Target::ALL {
        let mut idx: Vec<usize> = (0..records.len()).filter(|i| records[*i].target == target).collect();
        if idx.len() > n {
            idx.shuffle(&mut rng);
            idx.truncate(n);
        }
        keep.extend(idx);
    }
    keep.sort_unstable();
    keep.into_iter().map(|i| records[i].clone()).collect()
}
