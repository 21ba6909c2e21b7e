//! Model-audited error taxonomy: each misprediction is shown to the backend
//! with its chain trace and the four error categories, and the reply is
//! parsed into a single category.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::LazyLock;
use std::time::Duration;

use futures::stream::{self, StreamExt};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{Completer, RetryPolicy};
use crate::chain::ChainResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorCategory {
    ContextualMisinterpretation,
    SentimentAnalysisError,
    InsufficientLogicalReasoning,
    DomainKnowledgeLimitation,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 4] = [
        ErrorCategory::ContextualMisinterpretation,
        ErrorCategory::SentimentAnalysisError,
        ErrorCategory::InsufficientLogicalReasoning,
        ErrorCategory::DomainKnowledgeLimitation,
    ];

    pub fn number(self) -> usize {
        match self {
            ErrorCategory::ContextualMisinterpretation => 1,
            ErrorCategory::SentimentAnalysisError => 2,
            ErrorCategory::InsufficientLogicalReasoning => 3,
            ErrorCategory::DomainKnowledgeLimitation => 4,
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            ErrorCategory::ContextualMisinterpretation => "Contextual Misinterpretation",
            ErrorCategory::SentimentAnalysisError => "Sentiment Analysis Errors",
            ErrorCategory::InsufficientLogicalReasoning => "Insufficient Logical Reasoning",
            ErrorCategory::DomainKnowledgeLimitation => "Domain-Specific Knowledge Limitations",
        }
    }

    pub fn definition(self) -> &'static str {
        match self {
            ErrorCategory::ContextualMisinterpretation => "The model may fail to accurately capture key background information or contextual cues within the text, leading to a misinterpretation of the overall meaning. This includes, but is not limited to, misunderstandings of cultural or historical context, misuse of specific terms or slang, and so forth.",
            ErrorCategory::SentimentAnalysisError => "Even with a correct understanding of the text content, the model might misinterpret the sentiment or tone expressed by the author, thereby affecting stance determination. This is particularly relevant for handling complex emotions like sarcasm or irony.",
            ErrorCategory::InsufficientLogicalReasoning => "When the task requires logical reasoning to ensure stance consistency and validity, the model might make incorrect judgments due to a lack of deep understanding or reasoning capabilities.",
            ErrorCategory::DomainKnowledgeLimitation => "For specialized domains or specific topics, the model might struggle to accurately determine stances due to insufficient domain knowledge.",
        }
    }

    fn from_number(n: usize) -> Option<Self> {
        ErrorCategory::ALL.into_iter().find(|c| c.number() == n)
    }
}

impl fmt::Display for ErrorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

static NUMBERED: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\(\s*([1-4])\s*\)").expect("valid regex"));
static LEADING_DIGIT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*([1-4])\b").expect("valid regex"));
static NAMED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)contextual misinterpretation|sentiment analysis|insufficient logical reasoning|domain[- ]specific knowledge")
        .expect("valid regex")
});

/// A single category from an audit reply, or `None` when the reply names
/// zero or several distinct categories.
pub fn parse_category(raw: &str) -> Option<ErrorCategory> {
    let mut found: Vec<ErrorCategory> = Vec::new();
    let mut push = |c: ErrorCategory| {
        if !found.contains(&c) {
            found.push(c);
        }
    };
    for cap in NUMBERED.captures_iter(raw) {
        push(ErrorCategory::from_number(cap[1].parse().expect("digit")).expect("1-4"));
    }
    for m in NAMED.find_iter(raw) {
        let lower = m.as_str().to_ascii_lowercase();
        let c = if lower.starts_with("contextual") {
            ErrorCategory::ContextualMisinterpretation
        } else if lower.starts_with("sentiment") {
            ErrorCategory::SentimentAnalysisError
        } else if lower.starts_with("insufficient") {
            ErrorCategory::InsufficientLogicalReasoning
        } else {
            ErrorCategory::DomainKnowledgeLimitation
        };
        push(c);
    }
    if found.is_empty() {
        if let Some(cap) = LEADING_DIGIT.captures(raw) {
            return ErrorCategory::from_number(cap[1].parse().expect("digit"));
        }
    }
    match found.as_slice() {
        [only] => Some(*only),
        _ => None,
    }
}

pub const AUDIT_SYSTEM_TEXT: &str = "You are an experienced stance detection expert reviewing a model's mistakes.";

/// Audit prompt: the tweet, gold and predicted labels, the chain trace and
/// the category definitions.
pub fn render_audit_prompt(result: &ChainResult) -> String {
    let tweet = result.state.tweet();
    let mut out = format!(
        "A stance detection model made a wrong prediction.\n\nText: {}\nTarget: {}\nCorrect stance: {}\nPredicted stance: {}\n",
        tweet.text,
        tweet.target.full_name(),
        tweet.gold,
        result.predicted
    );
    if !result.state.transcripts().is_empty() {
        out.push_str("\nModel reasoning trace:\n");
        for t in result.state.transcripts() {
            out.push_str(&format!("[{}] {}\n", t.step, t.completion.trim()));
        }
    }
    out.push_str("\nClassify the cause of this misprediction into one of these error categories:\n");
    for c in ErrorCategory::ALL {
        out.push_str(&format!("({}) {}: {}\n", c.number(), c.title(), c.definition()));
    }
    out.push_str("\nAnswer with the number of the single best-fitting category in parentheses, for example (1).");
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: Option<u64>,
    pub retry_limit: u32,
    pub retry_backoff_ms: u64,
    pub concurrency: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig { temperature: 0.0, max_tokens: 64, seed: None, retry_limit: 3, retry_backoff_ms: 500, concurrency: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum AuditVerdict {
    Categorized { category: ErrorCategory, reply: String },
    Uncategorized { reply: String },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditItem {
    pub id: String,
    pub verdict: AuditVerdict,
}

/// Counts per category plus the unparseable and failed buckets.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ErrorHistogram {
    pub counts: BTreeMap<ErrorCategory, u64>,
    pub uncategorized: u64,
    pub failed: u64,
}

impl ErrorHistogram {
    pub fn zeroed() -> Self {
        ErrorHistogram { counts: ErrorCategory::ALL.into_iter().map(|c| (c, 0)).collect(), uncategorized: 0, failed: 0 }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum::<u64>() + self.uncategorized + self.failed
    }

    pub fn add(&mut self, verdict: &AuditVerdict) {
        match verdict {
            AuditVerdict::Categorized { category, .. } => *self.counts.entry(*category).or_default() += 1,
            AuditVerdict::Uncategorized { .. } => self.uncategorized += 1,
            AuditVerdict::Failed { .. } => self.failed += 1,
        }
    }

    pub fn merge(&mut self, other: &ErrorHistogram) {
        for (c, n) in &other.counts {
            *self.counts.entry(*c).or_default() += n;
        }
        self.uncategorized += other.uncategorized;
        self.failed += other.failed;
    }

    /// Tab-separated `category, count, share` rows, ready for plotting.
    pub fn to_tsv(&self) -> String {
        let total = self.total();
        let share = |n: u64| if total == 0 { 0.0 } else { n as f64 / total as f64 };
        let mut out = String::from("category\tcount\tshare\n");
        for c in ErrorCategory::ALL {
            let n = self.counts.get(&c).copied().unwrap_or(0);
            out.push_str(&format!("{}\t{n}\t{:.4}\n", c.title(), share(n)));
        }
        out.push_str(&format!("UNCATEGORIZED\t{}\t{:.4}\n", self.uncategorized, share(self.uncategorized)));
        out.push_str(&format!("FAILED\t{}\t{:.4}\n", self.failed, share(self.failed)));
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub histogram: ErrorHistogram,
    pub items: Vec<AuditItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuditError {
    #[error("example {0} was predicted correctly and cannot be audited")]
    NotAMisprediction(String),
}

/// Audits each misprediction with one completion. A backend failure on one
/// item is recorded against that item and does not stop the batch.
pub async fn audit_errors(
    mispredictions: &[ChainResult],
    completer: &Completer,
    config: &AuditConfig,
) -> Result<AuditReport, AuditError> {
    if let Some(r) = mispredictions.iter().find(|r| r.predicted == r.state.tweet().gold) {
        return Err(AuditError::NotAMisprediction(r.state.tweet().id.clone()));
    }
    let policy = RetryPolicy::new(config.retry_limit, Duration::from_millis(config.retry_backoff_ms));
    let items: Vec<AuditItem> = stream::iter(mispredictions)
        .map(|result| async move {
            let request = completer.request(
                AUDIT_SYSTEM_TEXT,
                &render_audit_prompt(result),
                config.temperature,
                config.max_tokens,
                config.seed,
            );
            let (response, _) = policy.run(|| completer.complete(&request)).await;
            let verdict = match response {
                Ok(r) => match parse_category(&r.text) {
                    Some(category) => AuditVerdict::Categorized { category, reply: r.text },
                    None => AuditVerdict::Uncategorized { reply: r.text },
                },
                Err(e) => AuditVerdict::Failed { error: e.to_string() },
            };
            AuditItem { id: result.state.tweet().id.clone(), verdict }
        })
        .buffered(config.concurrency.max(1))
        .collect()
        .await;
    let mut histogram = ErrorHistogram::zeroed();
    for item in &items {
        histogram.add(&item.verdict);
    }
    Ok(AuditReport { histogram, items })
}
