//! Offline replay backend driven by an ordered list of matcher/response
//! entries. The first matching entry answers; nothing matching is an error.

use std::path::Path;

use async_trait::async_trait;
use serde::Deserialize;

use super::{word_count, BackendError, CompletionBackend, CompletionRequest, CompletionResponse};
use crate::digest::sha256_hex;

/// Digest a `digest` matcher is compared against.
pub fn prompt_digest(system_text: &str, user_text: &str) -> String {
    let mut bytes = Vec::with_capacity(system_text.len() + user_text.len() + 1);
    bytes.extend_from_slice(system_text.as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(user_text.as_bytes());
    sha256_hex(&bytes)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Matcher {
    /// Exact prompt, by [`prompt_digest`].
    Digest(String),
    /// Every listed substring occurs in the system or user text.
    Contains(Vec<String>),
}

impl Matcher {
    fn matches(&self, request: &CompletionRequest, digest: &str) -> bool {
        match self {
            Matcher::Digest(d) => d.eq_ignore_ascii_case(digest),
            Matcher::Contains(parts) => parts
                .iter()
                .all(|p| request.user_text.contains(p.as_str()) || request.system_text.contains(p.as_str())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptEntry {
    pub matcher: Matcher,
    pub response: String,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    #[serde(default)]
    contains: Option<OneOrMany>,
    #[serde(default)]
    digest: Option<String>,
    response: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScript {
    #[serde(default)]
    entry: Vec<RawEntry>,
}

pub struct ScriptedBackend {
    entries: Vec<ScriptEntry>,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        ScriptedBackend { entries }
    }

    pub fn from_file(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BackendError::ScriptParse(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, BackendError> {
        let raw: RawScript = toml::from_str(text).map_err(|e| BackendError::ScriptParse(e.to_string()))?;
        let mut entries = Vec::with_capacity(raw.entry.len());
        for (n, e) in raw.entry.into_iter().enumerate() {
            let matcher = match (e.contains, e.digest) {
                (Some(OneOrMany::One(s)), None) => Matcher::Contains(vec![s]),
                (Some(OneOrMany::Many(v)), None) if !v.is_empty() => Matcher::Contains(v),
                (None, Some(d)) => Matcher::Digest(d),
                _ => {
                    return Err(BackendError::ScriptParse(format!(
                        "entry {}: needs exactly one non-empty `contains` or `digest`",
                        n + 1
                    )))
                }
            };
            entries.push(ScriptEntry { matcher, response: e.response });
        }
        Ok(ScriptedBackend { entries })
    }

    pub fn entries(&self) -> &[ScriptEntry] {
        &self.entries
    }
}

#[async_trait]
impl CompletionBackend for ScriptedBackend {
    async fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, BackendError> {
        let digest = prompt_digest(&request.system_text, &request.user_text);
        let entry = self
            .entries
            .iter()
            .find(|e| e.matcher.matches(request, &digest))
            .ok_or_else(|| {
                let excerpt: String = request.user_text.chars().rev().take(120).collect::<Vec<_>>().into_iter().rev().collect();
                BackendError::ScriptExhausted(format!("digest {digest}, prompt ends `{excerpt}`"))
            })?;
        Ok(CompletionResponse {
            text: entry.response.clone(),
            prompt_tokens: word_count(&request.system_text) + word_count(&request.user_text),
            completion_tokens: word_count(&entry.response),
            latency_ms: 0,
            cache_hit: false,
        })
    }
}
