//! Shared vocabulary: labels, targets, records, the step-4 distribution and
//! the per-example chain state.

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompting::{RenderedPrompt, TemplateId};

/// The three-way stance label space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum StanceLabel {
    Favor,
    Against,
    None,
}

impl StanceLabel {
    pub const ALL: [StanceLabel; 3] = [StanceLabel::Favor, StanceLabel::Against, StanceLabel::None];

    /// Fixed tie-break order used whenever two labels score equally.
    pub const TIE_BREAK_ORDER: [StanceLabel; 3] =
        [StanceLabel::Against, StanceLabel::Favor, StanceLabel::None];

    pub fn as_str(self) -> &'static str {
        match self {
            StanceLabel::Favor => "FAVOR",
            StanceLabel::Against => "AGAINST",
            StanceLabel::None => "NONE",
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            StanceLabel::Favor => 0,
            StanceLabel::Against => 1,
            StanceLabel::None => 2,
        }
    }
}

impl fmt::Display for StanceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StanceLabel {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "FAVOR" => Ok(StanceLabel::Favor),
            "AGAINST" => Ok(StanceLabel::Against),
            "NONE" => Ok(StanceLabel::None),
            _ => Err(LabelError::NoLabelFound),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("no stance label found in completion")]
    NoLabelFound,
    #[error("completion mentions several distinct labels ({0:?}) without a `Stance:` line")]
    AmbiguousLabel(Vec<StanceLabel>),
}

/// The five SemEval-2016 Task 6 targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Target {
    #[serde(rename = "HC")]
    HillaryClinton,
    #[serde(rename = "FM")]
    FeministMovement,
    #[serde(rename = "LA")]
    LegalizationOfAbortion,
    #[serde(rename = "A")]
    Atheism,
    #[serde(rename = "CC")]
    ClimateChange,
}

impl Target {
    /// Table order: HC, FM, LA, A, CC.
    pub const ALL: [Target; 5] = [
        Target::HillaryClinton,
        Target::FeministMovement,
        Target::LegalizationOfAbortion,
        Target::Atheism,
        Target::ClimateChange,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Target::HillaryClinton => "HC",
            Target::FeministMovement => "FM",
            Target::LegalizationOfAbortion => "LA",
            Target::Atheism => "A",
            Target::ClimateChange => "CC",
        }
    }

    pub fn full_name(self) -> &'static str {
        match self {
            Target::HillaryClinton => "Hillary Clinton",
            Target::FeministMovement => "Feminist Movement",
            Target::LegalizationOfAbortion => "Legalization of Abortion",
            Target::Atheism => "Atheism",
            Target::ClimateChange => "Climate Change is a Real Concern",
        }
    }

    pub fn from_code(code: &str) -> Option<Target> {
        Target::ALL.into_iter().find(|t| t.code().eq_ignore_ascii_case(code.trim()))
    }

    pub fn from_full_name(name: &str) -> Option<Target> {
        Target::ALL
            .into_iter()
            .find(|t| t.full_name().eq_ignore_ascii_case(name.trim()))
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Target {
    type Err = String;

    /// Accepts either the short code or the full name.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Target::from_code(s)
            .or_else(|| Target::from_full_name(s))
            .ok_or_else(|| format!("unknown target `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One benchmark instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub target: Target,
    pub text: String,
    pub gold: StanceLabel,
    pub split: Split,
}

/// Probability set over the three labels produced by step 4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StanceDistribution {
    pub p_favor: f64,
    pub p_against: f64,
    pub p_none: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("degenerate distribution weights {0:?}")]
pub struct DegenerateDistribution(pub [f64; 3]);

impl StanceDistribution {
    pub fn get(&self, label: StanceLabel) -> f64 {
        match label {
            StanceLabel::Favor => self.p_favor,
            StanceLabel::Against => self.p_against,
            StanceLabel::None => self.p_none,
        }
    }

    /// Three-line text form used both in the step-4 format instruction and
    /// when folding the distribution into later prompts.
    pub fn to_prompt_lines(&self) -> String {
        format!(
            "favor: {}\nagainst: {}\nnone: {}",
            self.p_favor, self.p_against, self.p_none
        )
    }
}

/// Rescales `[favor, against, none]` weights so they sum to one.
pub fn normalize_distribution(weights: [f64; 3]) -> Result<StanceDistribution, DegenerateDistribution> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(DegenerateDistribution(weights));
    }
    let sum: f64 = weights.iter().sum();
    if sum <= 0.0 || !sum.is_finite() {
        return Err(DegenerateDistribution(weights));
    }
    Ok(StanceDistribution {
        p_favor: weights[0] / sum,
        p_against: weights[1] / sum,
        p_none: weights[2] / sum,
    })
}

/// Most probable label; ties go AGAINST, then FAVOR, then NONE.
pub fn argmax_label(d: &StanceDistribution) -> StanceLabel {
    let mut best = StanceLabel::TIE_BREAK_ORDER[0];
    for label in &StanceLabel::TIE_BREAK_ORDER[1..] {
        if d.get(*label) > d.get(best) {
            best = *label;
        }
    }
    best
}

static STANCE_LINE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\bstance\W{0,3}:[\s*_`]*(favor|against|none)\b").expect("valid regex")
});
static LABEL_TOKEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(favor|against|none)\b").expect("valid regex"));

/// Extracts a stance label from free completion text.
///
/// A `Stance: <LABEL>` declaration wins (the last one if there are several);
/// otherwise the completion must mention exactly one distinct label token.
pub fn parse_stance_label(raw: &str) -> Result<StanceLabel, LabelError> {
    if let Some(cap) = STANCE_LINE.captures_iter(raw).last() {
        return cap[1].parse();
    }
    let mut found: Vec<StanceLabel> = Vec::new();
    for m in LABEL_TOKEN.find_iter(raw) {
        let label: StanceLabel = m.as_str().parse()?;
        if !found.contains(&label) {
            found.push(label);
        }
    }
    match found.len() {
        0 => Err(LabelError::NoLabelFound),
        1 => Ok(found[0]),
        _ => Err(LabelError::AmbiguousLabel(found)),
    }
}

/// One (rendered prompt, raw completion) exchange of a chain step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTranscript {
    pub step: TemplateId,
    pub prompt: RenderedPrompt,
    pub completion: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("step {attempted} recorded out of order: {completed} step(s) completed")]
    OutOfOrder { attempted: TemplateId, completed: usize },
    #[error("invalid chain state: {0}")]
    Invalid(String),
}

/// The accumulating per-example trace: tweet, the five intermediate
/// assertions, the final label and every step transcript.
///
/// Fields can only be filled in step order; see the `record_*` methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChainStateRepr")]
pub struct ChainState {
    tweet: TweetRecord,
    context_info: Option<String>,
    viewpoint: Option<String>,
    emotion: Option<String>,
    distribution: Option<StanceDistribution>,
    logic_check: Option<String>,
    #[serde(rename = "final")]
    final_label: Option<StanceLabel>,
    transcripts: Vec<StepTranscript>,
}

#[derive(Deserialize)]
struct ChainStateRepr {
    tweet: TweetRecord,
    context_info: Option<String>,
    viewpoint: Option<String>,
    emotion: Option<String>,
    distribution: Option<StanceDistribution>,
    logic_check: Option<String>,
    #[serde(rename = "final")]
    final_label: Option<StanceLabel>,
    transcripts: Vec<StepTranscript>,
}

impl TryFrom<ChainStateRepr> for ChainState {
    type Error = StateError;

    fn try_from(r: ChainStateRepr) -> Result<Self, Self::Error> {
        let transcript_total = r.transcripts.len();
        let mut state = ChainState::new(r.tweet);
        let mut transcripts = r.transcripts.into_iter();
        let mut next = |step: TemplateId| {
            transcripts
                .next()
                .filter(|t| t.step == step)
                .ok_or_else(|| StateError::Invalid(format!("missing transcript for {step}")))
        };
        let chain_started = r.context_info.is_some()
            || r.viewpoint.is_some()
            || r.emotion.is_some()
            || r.distribution.is_some()
            || r.logic_check.is_some();
        if !chain_started {
            // Either a fresh state or a direct-mode state.
            if let Some(label) = r.final_label {
                state.record_direct(Some(label), next(TemplateId::Direct)?)?;
            } else if let Ok(t) = next(TemplateId::Direct) {
                state.record_direct(None, t)?;
            }
        } else {
            let mut gap = false;
            macro_rules! replay {
                ($field:expr, $step:expr, $method:ident) => {
                    match $field {
                        Some(_) if gap => {
                            return Err(StateError::Invalid(format!("{} recorded after a missing step", $step)))
                        }
                        Some(value) => state.$method(value, next($step)?)?,
                        None => gap = true,
                    }
                };
            }
            replay!(r.context_info, TemplateId::Step1, record_context_info);
            replay!(r.viewpoint, TemplateId::Step2, record_viewpoint);
            replay!(r.emotion, TemplateId::Step3, record_emotion);
            replay!(r.distribution, TemplateId::Step4, record_distribution);
            replay!(r.logic_check, TemplateId::Step5, record_logic_check);
            if !gap {
                if let Ok(t) = next(TemplateId::Step6) {
                    state.record_final(r.final_label, t)?;
                }
            }
            if state.final_label != r.final_label {
                return Err(StateError::Invalid("final label without a step 6 transcript".into()));
            }
        }
        if state.transcripts.len() != transcript_total {
            return Err(StateError::Invalid("transcripts do not match recorded steps".into()));
        }
        Ok(state)
    }
}

impl ChainState {
    pub fn new(tweet: TweetRecord) -> Self {
        ChainState {
            tweet,
            context_info: None,
            viewpoint: None,
            emotion: None,
            distribution: None,
            logic_check: None,
            final_label: None,
            transcripts: Vec::new(),
        }
    }

    pub fn tweet(&self) -> &TweetRecord {
        &self.tweet
    }
    pub fn context_info(&self) -> Option<&str> {
        self.context_info.as_deref()
    }
    pub fn viewpoint(&self) -> Option<&str> {
        self.viewpoint.as_deref()
    }
    pub fn emotion(&self) -> Option<&str> {
        self.emotion.as_deref()
    }
    pub fn distribution(&self) -> Option<&StanceDistribution> {
        self.distribution.as_ref()
    }
    pub fn logic_check(&self) -> Option<&str> {
        self.logic_check.as_deref()
    }
    pub fn final_label(&self) -> Option<StanceLabel> {
        self.final_label
    }
    pub fn transcripts(&self) -> &[StepTranscript] {
        &self.transcripts
    }

    /// Number of chain steps (or the single direct step) completed so far.
    pub fn completed_steps(&self) -> usize {
        self.transcripts.len()
    }

    /// True once all six chain steps have run and produced every field.
    pub fn is_fully_populated(&self) -> bool {
        self.transcripts.len() == 6
            && self.logic_check.is_some()
            && self.final_label.is_some()
    }

    fn expect_step(&self, step: TemplateId) -> Result<(), StateError> {
        let expected = match step {
            TemplateId::Direct => 0,
            other => other.step_number().expect("chain step") - 1,
        };
        let in_direct_mode = self
            .transcripts
            .first()
            .is_some_and(|t| t.step == TemplateId::Direct);
        if self.transcripts.len() != expected || in_direct_mode {
            return Err(StateError::OutOfOrder { attempted: step, completed: self.transcripts.len() });
        }
        Ok(())
    }

    fn push(&mut self, step: TemplateId, transcript: StepTranscript) -> Result<(), StateError> {
        if transcript.step != step {
            return Err(StateError::Invalid(format!(
                "transcript for {} recorded as {step}",
                transcript.step
            )));
        }
        self.transcripts.push(transcript);
        Ok(())
    }

    pub fn record_context_info(&mut self, text: String, t: StepTranscript) -> Result<(), StateError> {
        self.expect_step(TemplateId::Step1)?;
        self.push(TemplateId::Step1, t)?;
        self.context_info = Some(text);
        Ok(())
    }

    pub fn record_viewpoint(&mut self, text: String, t: StepTranscript) -> Result<(), StateError> {
        self.expect_step(TemplateId::Step2)?;
        self.push(TemplateId::Step2, t)?;
        self.viewpoint = Some(text);
        Ok(())
    }

    pub fn record_emotion(&mut self, text: String, t: StepTranscript) -> Result<(), StateError> {
        self.expect_step(TemplateId::Step3)?;
        self.push(TemplateId::Step3, t)?;
        self.emotion = Some(text);
        Ok(())
    }

    pub fn record_distribution(
        &mut self,
        d: StanceDistribution,
        t: StepTranscript,
    ) -> Result<(), StateError> {
        self.expect_step(TemplateId::Step4)?;
        self.push(TemplateId::Step4, t)?;
        self.distribution = Some(d);
        Ok(())
    }

    pub fn record_logic_check(&mut self, text: String, t: StepTranscript) -> Result<(), StateError> {
        self.expect_step(TemplateId::Step5)?;
        self.push(TemplateId::Step5, t)?;
        self.logic_check = Some(text);
        Ok(())
    }

    /// Records step 6. `label` is `None` when the decision was unparseable.
    pub fn record_final(
        &mut self,
        label: Option<StanceLabel>,
        t: StepTranscript,
    ) -> Result<(), StateError> {
        self.expect_step(TemplateId::Step6)?;
        self.push(TemplateId::Step6, t)?;
        self.final_label = label;
        Ok(())
    }

    /// Records the single exchange of the direct (no-chain) condition.
    pub fn record_direct(
        &mut self,
        label: Option<StanceLabel>,
        t: StepTranscript,
    ) -> Result<(), StateError> {
        self.expect_step(TemplateId::Direct)?;
        self.push(TemplateId::Direct, t)?;
        self.final_label = label;
        Ok(())
    }
}
