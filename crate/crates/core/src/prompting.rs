//! Prompt templates for the six chain steps and the direct condition, plus
//! rendering against a [`ChainState`] with optional few-shot exemplars.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_hex;
use crate::domain::{ChainState, TweetRecord};

/// Shipped default template file.
pub const DEFAULT_TEMPLATES: &str = include_str!("../templates/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TemplateId {
    #[serde(rename = "1")]
    Step1,
    #[serde(rename = "2")]
    Step2,
    #[serde(rename = "3")]
    Step3,
    #[serde(rename = "4")]
    Step4,
    #[serde(rename = "5")]
    Step5,
    #[serde(rename = "6")]
    Step6,
    #[serde(rename = "direct")]
    Direct,
}

impl TemplateId {
    pub const CHAIN: [TemplateId; 6] = [
        TemplateId::Step1,
        TemplateId::Step2,
        TemplateId::Step3,
        TemplateId::Step4,
        TemplateId::Step5,
        TemplateId::Step6,
    ];

    pub fn step_number(self) -> Option<usize> {
        match self {
            TemplateId::Step1 => Some(1),
            TemplateId::Step2 => Some(2),
            TemplateId::Step3 => Some(3),
            TemplateId::Step4 => Some(4),
            TemplateId::Step5 => Some(5),
            TemplateId::Step6 => Some(6),
            TemplateId::Direct => None,
        }
    }

    /// Placeholders this template may reference: the tweet and target, plus
    /// outputs of strictly earlier steps.
    pub fn allowed_placeholders(self) -> &'static [Placeholder] {
        use Placeholder::*;
        const ORDER: [Placeholder; 7] = [Text, Target, Context, Viewpoint, Emotion, Distribution, Logic];
        match self.step_number() {
            Some(k) => &ORDER[..k + 1],
            None => &ORDER[..2],
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step_number() {
            Some(k) => write!(f, "step {k}"),
            None => f.write_str("direct"),
        }
    }
}

/// Named slots in a template body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Placeholder {
    Text,
    Target,
    Context,
    Viewpoint,
    Emotion,
    Distribution,
    Logic,
}

impl Placeholder {
    fn from_name(name: &str) -> Option<Placeholder> {
        Some(match name {
            "S" => Placeholder::Text,
            "t" => Placeholder::Target,
            "i" => Placeholder::Context,
            "v" => Placeholder::Viewpoint,
            "e" => Placeholder::Emotion,
            "a" => Placeholder::Distribution,
            "l" => Placeholder::Logic,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Placeholder::Text => "S",
            Placeholder::Target => "t",
            Placeholder::Context => "i",
            Placeholder::Viewpoint => "v",
            Placeholder::Emotion => "e",
            Placeholder::Distribution => "a",
            Placeholder::Logic => "l",
        }
    }

    fn value(self, state: &ChainState) -> Option<String> {
        match self {
            Placeholder::Text => Some(state.tweet().text.clone()),
            Placeholder::Target => Some(state.tweet().target.full_name().to_string()),
            Placeholder::Context => state.context_info().map(str::to_string),
            Placeholder::Viewpoint => state.viewpoint().map(str::to_string),
            Placeholder::Emotion => state.emotion().map(str::to_string),
            Placeholder::Distribution => state.distribution().map(|d| d.to_prompt_lines()),
            Placeholder::Logic => state.logic_check().map(str::to_string),
        }
    }
}

/// Splits a body into literal text and `{name}` placeholder segments in a
/// single pass, so substituted values are never rescanned.
enum Segment<'a> {
    Literal(&'a str),
    Slot(Placeholder),
}

fn segments(body: &str) -> Vec<Segment<'_>> {
    let mut out = Vec::new();
    let mut rest = body;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let slot = after
            .find('}')
            .and_then(|close| Placeholder::from_name(&after[..close]).map(|p| (p, close)));
        match slot {
            Some((p, close)) => {
                out.push(Segment::Literal(&rest[..open]));
                out.push(Segment::Slot(p));
                rest = &after[close + 1..];
            }
            None => {
                out.push(Segment::Literal(&rest[..=open]));
                rest = after;
            }
        }
    }
    out.push(Segment::Literal(rest));
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub step: TemplateId,
    pub body: String,
    pub format_suffix: String,
}

impl PromptTemplate {
    pub fn placeholders(&self) -> Vec<Placeholder> {
        segments(&self.body)
            .into_iter()
            .filter_map(|s| match s {
                Segment::Slot(p) => Some(p),
                Segment::Literal(_) => None,
            })
            .collect()
    }
}

/// A labeled train-split record shown before the query in few-shot mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExemplar {
    pub record: TweetRecord,
    /// Optional pre-rendered demonstration; must end in `Stance: <gold>`.
    pub worked_trace: Option<String>,
}

impl FewShotExemplar {
    pub fn new(record: TweetRecord) -> Self {
        FewShotExemplar { record, worked_trace: None }
    }

    fn render(&self, index: usize) -> String {
        match &self.worked_trace {
            Some(trace) => format!("Example {index}\n{}", trace.trim_end()),
            None => format!(
                "Example {index}\nText: {}\nTarget: {}\nStance: {}",
                self.record.text,
                self.record.target.full_name(),
                self.record.gold
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub step_id: TemplateId,
    pub system_text: String,
    pub user_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("{step} references `{{{placeholder}}}` but the chain state has no value for it")]
    MissingField { step: TemplateId, placeholder: &'static str },
    #[error("{step} may not reference `{{{placeholder}}}`")]
    ForbiddenPlaceholder { step: TemplateId, placeholder: &'static str },
    #[error("template file is missing {0}")]
    MissingTemplate(TemplateId),
    #[error("template {0} defined twice")]
    DuplicateTemplate(TemplateId),
    #[error("direct prompts take a state holding only the tweet")]
    StateNotFresh,
    #[error("cannot parse template file: {0}")]
    Parse(String),
    #[error("cannot read template file: {0}")]
    Io(String),
}

#[derive(Deserialize)]
struct TemplateFile {
    version: String,
    system_text: String,
    reask_prefix: String,
    template: Vec<PromptTemplate>,
}

/// The full set of seven templates plus shared preamble text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub version: String,
    pub system_text: String,
    pub reask_prefix: String,
    templates: BTreeMap<TemplateId, PromptTemplate>,
    digest: String,
}

impl TemplateSet {
    pub fn default_set() -> Self {
        Self::from_toml(DEFAULT_TEMPLATES).expect("shipped templates are valid")
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PromptError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, PromptError> {
        let file: TemplateFile = toml::from_str(text).map_err(|e| PromptError::Parse(e.to_string()))?;
        let mut templates = BTreeMap::new();
        for t in file.template {
            for p in t.placeholders() {
                if !t.step.allowed_placeholders().contains(&p) {
                    return Err(PromptError::ForbiddenPlaceholder { step: t.step, placeholder: p.name() });
                }
            }
            let step = t.step;
            if templates.insert(step, t).is_some() {
                return Err(PromptError::DuplicateTemplate(step));
            }
        }
        for id in TemplateId::CHAIN.into_iter().chain([TemplateId::Direct]) {
            if !templates.contains_key(&id) {
                return Err(PromptError::MissingTemplate(id));
            }
        }
        Ok(TemplateSet {
            version: file.version,
            system_text: file.system_text,
            reask_prefix: file.reask_prefix,
            templates,
            digest: sha256_hex(text.as_bytes()),
        })
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        &self.templates[&id]
    }

    /// Digest of the template file text the set was parsed from.
    pub fn digest(&self) -> &str {
        &self.digest
    }

    pub fn render_step(
        &self,
        id: TemplateId,
        state: &ChainState,
        exemplars: &[FewShotExemplar],
    ) -> Result<RenderedPrompt, PromptError> {
        render_step(&self.system_text, self.get(id), state, exemplars)
    }

    pub fn render_direct(
        &self,
        state: &ChainState,
        exemplars: &[FewShotExemplar],
    ) -> Result<RenderedPrompt, PromptError> {
        if state.completed_steps() != 0 {
            return Err(PromptError::StateNotFresh);
        }
        self.render_step(TemplateId::Direct, state, exemplars)
    }

    /// The same prompt with a format reminder appended, used for the single
    /// re-ask after an unparseable step-4 or step-6 reply.
    pub fn reask(&self, prompt: &RenderedPrompt) -> RenderedPrompt {
        let suffix = &self.get(prompt.step_id).format_suffix;
        RenderedPrompt {
            step_id: prompt.step_id,
            system_text: prompt.system_text.clone(),
            user_text: format!("{}\n\n{}\n{}", prompt.user_text, self.reask_prefix, suffix.trim()),
        }
    }
}

/// Substitutes state fields into `template` and prepends exemplars.
pub fn render_step(
    system_text: &str,
    template: &PromptTemplate,
    state: &ChainState,
    exemplars: &[FewShotExemplar],
) -> Result<RenderedPrompt, PromptError> {
    let mut body = String::with_capacity(template.body.len() * 2);
    for seg in segments(&template.body) {
        match seg {
            Segment::Literal(s) => body.push_str(s),
            Segment::Slot(p) => {
                let value = p.value(state).ok_or(PromptError::MissingField {
                    step: template.step,
                    placeholder: p.name(),
                })?;
                body.push_str(&value);
            }
        }
    }

    let mut user_text = String::new();
    if !exemplars.is_empty() {
        user_text.push_str("Here are some labeled examples.\n\n");
        for (n, ex) in exemplars.iter().enumerate() {
            user_text.push_str(&ex.render(n + 1));
            user_text.push_str("\n\n");
        }
        user_text.push_str("Now the text to analyze.\n\n");
    }
    user_text.push_str(body.trim());
    let suffix = template.format_suffix.trim();
    if !suffix.is_empty() {
        user_text.push_str("\n\n");
        user_text.push_str(suffix);
    }
    Ok(RenderedPrompt {
        step_id: template.step,
        system_text: system_text.to_string(),
        user_text,
    })
}
