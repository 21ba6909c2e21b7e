//! The six-step chain engine and the single-prompt direct condition.
//!
//! Each step is a fresh completion request carrying the accumulated
//! assertions as text. Step 4 and step 6 get one re-ask with a format
//! reminder when their reply cannot be parsed; after that step 4 gives up
//! (the example becomes unscoreable) and step 6 falls back to the argmax of
//! the step-4 distribution.

use std::sync::LazyLock;
use std::time::Duration;

use futures::stream::{self, StreamExt};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{BackendError, Completer, CompletionResponse, RetryPolicy};
use crate::domain::{
    argmax_label, normalize_distribution, parse_stance_label, ChainState, LabelError, StanceDistribution,
    StanceLabel, StateError, StepTranscript, TweetRecord,
};
use crate::prompting::{FewShotExemplar, PromptError, RenderedPrompt, TemplateId, TemplateSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainMode {
    Cos,
    Direct,
}

impl ChainMode {
    /// Label used in reports: the direct condition is the "w/o CoS" ablation.
    pub fn report_label(self) -> &'static str {
        match self {
            ChainMode::Cos => "CoS",
            ChainMode::Direct => "w/o CoS",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub mode: ChainMode,
    pub shots: usize,
    pub temperature: f64,
    pub max_tokens_per_step: u32,
    pub step4_max_tokens: u32,
    pub seed: u64,
    pub retry_limit: u32,
    pub retry_backoff_ms: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            mode: ChainMode::Cos,
            shots: 0,
            temperature: 0.0,
            max_tokens_per_step: 512,
            step4_max_tokens: 128,
            seed: 0,
            retry_limit: 3,
            retry_backoff_ms: 500,
        }
    }
}

impl ChainConfig {
    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy::new(self.retry_limit, Duration::from_millis(self.retry_backoff_ms))
    }

    fn max_tokens(&self, step: TemplateId) -> u32 {
        if step == TemplateId::Step4 {
            self.step4_max_tokens
        } else {
            self.max_tokens_per_step
        }
    }
}

/// Cost and retry bookkeeping for one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: TemplateId,
    /// Attempts across retries, summed over the original ask and any re-ask.
    pub attempts: u32,
    pub reasked: bool,
    /// The unparseable reply that triggered the re-ask.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejected_completion: Option<String>,
    pub latency_ms: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl StepMetrics {
    fn new(step: TemplateId) -> Self {
        StepMetrics {
            step,
            attempts: 0,
            reasked: false,
            rejected_completion: None,
            latency_ms: 0,
            prompt_tokens: 0,
            completion_tokens: 0,
        }
    }

    fn absorb(&mut self, response: &CompletionResponse, attempts: u32) {
        self.attempts += attempts;
        self.latency_ms += response.latency_ms;
        self.prompt_tokens += response.prompt_tokens;
        self.completion_tokens += response.completion_tokens;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainResult {
    pub state: ChainState,
    pub predicted: StanceLabel,
    pub fallback_used: bool,
    pub steps: Vec<StepMetrics>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("{step}: backend failed after {attempts} attempt(s): {source}")]
    Backend { step: TemplateId, attempts: u32, source: BackendError },
    #[error("{0}: backend returned an empty completion")]
    EmptyCompletion(TemplateId),
    #[error("step 4: no stance distribution in reply `{0}`")]
    DistributionParseFailure(String),
    #[error("direct: {0}")]
    Label(#[from] LabelError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// An example whose prediction could not be obtained. Penalized in scoring,
/// never silently dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnscoreableExample {
    pub state: ChainState,
    pub steps: Vec<StepMetrics>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum ExampleOutcome {
    Scored(ChainResult),
    Unscoreable(UnscoreableExample),
}

impl ExampleOutcome {
    pub fn record(&self) -> &TweetRecord {
        match self {
            ExampleOutcome::Scored(r) => r.state.tweet(),
            ExampleOutcome::Unscoreable(u) => u.state.tweet(),
        }
    }

    pub fn predicted(&self) -> Option<StanceLabel> {
        match self {
            ExampleOutcome::Scored(r) => Some(r.predicted),
            ExampleOutcome::Unscoreable(_) => None,
        }
    }
}

/// Self-contained per-example trace document written into a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub id: String,
    pub config_digest: String,
    pub mode: ChainMode,
    pub gold: StanceLabel,
    pub predicted: Option<StanceLabel>,
    pub fallback_used: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unscoreable_reason: Option<String>,
    pub state: ChainState,
    pub steps: Vec<StepMetrics>,
}

impl TraceRecord {
    pub fn new(outcome: &ExampleOutcome, mode: ChainMode, config_digest: &str) -> Self {
        let (state, steps, fallback_used, reason) = match outcome {
            ExampleOutcome::Scored(r) => (&r.state, &r.steps, r.fallback_used, None),
            ExampleOutcome::Unscoreable(u) => (&u.state, &u.steps, false, Some(u.reason.clone())),
        };
        TraceRecord {
            id: state.tweet().id.clone(),
            config_digest: config_digest.to_string(),
            mode,
            gold: state.tweet().gold,
            predicted: outcome.predicted(),
            fallback_used,
            unscoreable_reason: reason,
            state: state.clone(),
            steps: steps.clone(),
        }
    }

    pub fn outcome(&self) -> ExampleOutcome {
        match (&self.predicted, &self.unscoreable_reason) {
            (Some(p), None) => ExampleOutcome::Scored(ChainResult {
                state: self.state.clone(),
                predicted: *p,
                fallback_used: self.fallback_used,
                steps: self.steps.clone(),
            }),
            (_, reason) => ExampleOutcome::Unscoreable(UnscoreableExample {
                state: self.state.clone(),
                steps: self.steps.clone(),
                reason: reason.clone().unwrap_or_default(),
            }),
        }
    }
}

static STEP4_NUMBER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(favor|against|none)\b\)?\s*(?:[:=\-]|\bis\b)?\s*\(?\s*(\d+(?:\.\d+)?|\.\d+)\s*(%)?")
        .expect("valid regex")
});

/// Pulls one number per label out of a step-4 reply and normalizes them.
/// The last number given for a label wins. Returns `None` unless all three
/// labels have a number and the weights are not all zero.
pub fn parse_step4_output(raw: &str) -> Option<StanceDistribution> {
    let mut weights: [Option<f64>; 3] = [None; 3];
    for cap in STEP4_NUMBER.captures_iter(raw) {
        let label: StanceLabel = cap[1].parse().ok()?;
        let value: f64 = cap[2].parse().ok()?;
        weights[label.index()] = Some(value);
    }
    let [Some(f), Some(a), Some(n)] = weights else {
        return None;
    };
    normalize_distribution([f, a, n]).ok()
}

pub struct ChainEngine<'a> {
    completer: &'a Completer,
    templates: &'a TemplateSet,
    config: ChainConfig,
}

impl<'a> ChainEngine<'a> {
    pub fn new(completer: &'a Completer, templates: &'a TemplateSet, config: ChainConfig) -> Self {
        ChainEngine { completer, templates, config }
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    async fn exchange(
        &self,
        prompt: &RenderedPrompt,
        metrics: &mut StepMetrics,
    ) -> Result<CompletionResponse, ChainError> {
        let request = self.completer.request(
            &prompt.system_text,
            &prompt.user_text,
            self.config.temperature,
            self.config.max_tokens(prompt.step_id),
            Some(self.config.seed),
        );
        let (result, attempts) = self
            .config
            .retry_policy()
            .run(|| self.completer.complete(&request))
            .await;
        match result {
            Ok(response) => {
                metrics.absorb(&response, attempts);
                Ok(response)
            }
            Err(source) => {
                metrics.attempts += attempts;
                Err(ChainError::Backend { step: prompt.step_id, attempts: metrics.attempts, source })
            }
        }
    }

    /// Shared body of the four free-text steps.
    async fn free_text_step(
        &self,
        step: TemplateId,
        state: &mut ChainState,
    ) -> Result<StepMetrics, ChainError> {
        let prompt = self.templates.render_step(step, state, &[])?;
        let mut metrics = StepMetrics::new(step);
        let response = self.exchange(&prompt, &mut metrics).await?;
        let text = response.text.trim().to_string();
        if text.is_empty() {
            return Err(ChainError::EmptyCompletion(step));
        }
        let transcript = StepTranscript { step, prompt, completion: response.text };
        match step {
            TemplateId::Step1 => state.record_context_info(text, transcript)?,
            TemplateId::Step2 => state.record_viewpoint(text, transcript)?,
            TemplateId::Step3 => state.record_emotion(text, transcript)?,
            TemplateId::Step5 => state.record_logic_check(text, transcript)?,
            _ => unreachable!("not a free-text step"),
        }
        Ok(metrics)
    }

    /// Contextual information of the tweet.
    pub async fn run_step1(&self, state: &mut ChainState) -> Result<StepMetrics, ChainError> {
        self.free_text_step(TemplateId::Step1, state).await
    }

    /// Core viewpoints and intentions.
    pub async fn run_step2(&self, state: &mut ChainState) -> Result<StepMetrics, ChainError> {
        self.free_text_step(TemplateId::Step2, state).await
    }

    /// Emotional attitude.
    pub async fn run_step3(&self, state: &mut ChainState) -> Result<StepMetrics, ChainError> {
        self.free_text_step(TemplateId::Step3, state).await
    }

    /// Stance probability set.
    pub async fn run_step4(&self, state: &mut ChainState) -> Result<StepMetrics, ChainError> {
        let mut prompt = self.templates.render_step(TemplateId::Step4, state, &[])?;
        let mut metrics = StepMetrics::new(TemplateId::Step4);
        let mut response = self.exchange(&prompt, &mut metrics).await?;
        let mut parsed = parse_step4_output(&response.text);
        if parsed.is_none() {
            tracing::debug!(id = %state.tweet().id, "step 4 reply unparseable, re-asking");
            metrics.reasked = true;
            metrics.rejected_completion = Some(response.text);
            prompt = self.templates.reask(&prompt);
            response = self.exchange(&prompt, &mut metrics).await?;
            parsed = parse_step4_output(&response.text);
        }
        let Some(distribution) = parsed else {
            return Err(ChainError::DistributionParseFailure(response.text));
        };
        let transcript = StepTranscript { step: TemplateId::Step4, prompt, completion: response.text };
        state.record_distribution(distribution, transcript)?;
        Ok(metrics)
    }

    /// Logical consistency check.
    pub async fn run_step5(&self, state: &mut ChainState) -> Result<StepMetrics, ChainError> {
        self.free_text_step(TemplateId::Step5, state).await
    }

    /// Final decision. An unparseable reply leaves `final` unset; the caller
    /// falls back to the distribution.
    pub async fn run_step6(
        &self,
        state: &mut ChainState,
        exemplars: &[FewShotExemplar],
    ) -> Result<StepMetrics, ChainError> {
        let mut prompt = self.templates.render_step(TemplateId::Step6, state, exemplars)?;
        let mut metrics = StepMetrics::new(TemplateId::Step6);
        let mut response = self.exchange(&prompt, &mut metrics).await?;
        let mut label = parse_stance_label(&response.text);
        if label.is_err() {
            tracing::debug!(id = %state.tweet().id, "step 6 reply unparseable, re-asking");
            metrics.reasked = true;
            metrics.rejected_completion = Some(response.text);
            prompt = self.templates.reask(&prompt);
            response = self.exchange(&prompt, &mut metrics).await?;
            label = parse_stance_label(&response.text);
        }
        let transcript = StepTranscript { step: TemplateId::Step6, prompt, completion: response.text };
        state.record_final(label.ok(), transcript)?;
        Ok(metrics)
    }

    async fn drive_chain(
        &self,
        state: &mut ChainState,
        steps: &mut Vec<StepMetrics>,
        exemplars: &[FewShotExemplar],
    ) -> Result<(StanceLabel, bool), ChainError> {
        steps.push(self.run_step1(state).await?);
        steps.push(self.run_step2(state).await?);
        steps.push(self.run_step3(state).await?);
        steps.push(self.run_step4(state).await?);
        steps.push(self.run_step5(state).await?);
        steps.push(self.run_step6(state, exemplars).await?);
        Ok(match state.final_label() {
            Some(label) => (label, false),
            None => {
                let d = state.distribution().expect("step 4 completed");
                (argmax_label(d), true)
            }
        })
    }

    /// Runs steps 1 through 6 for one record. In few-shot mode the exemplars
    /// are shown at the decision step only.
    pub async fn run_chain(
        &self,
        record: TweetRecord,
        exemplars: &[FewShotExemplar],
    ) -> Result<ChainResult, ChainError> {
        let mut state = ChainState::new(record);
        let mut steps = Vec::with_capacity(6);
        let (predicted, fallback_used) = self.drive_chain(&mut state, &mut steps, exemplars).await?;
        Ok(ChainResult { state, predicted, fallback_used, steps })
    }

    async fn drive_direct(
        &self,
        state: &mut ChainState,
        steps: &mut Vec<StepMetrics>,
        exemplars: &[FewShotExemplar],
    ) -> Result<StanceLabel, ChainError> {
        let prompt = self.templates.render_direct(state, exemplars)?;
        let mut metrics = StepMetrics::new(TemplateId::Direct);
        let result = self.exchange(&prompt, &mut metrics).await;
        steps.push(metrics);
        let response = result?;
        let label = parse_stance_label(&response.text);
        let transcript = StepTranscript { step: TemplateId::Direct, prompt, completion: response.text };
        state.record_direct(label.as_ref().ok().copied(), transcript)?;
        Ok(label?)
    }

    /// Single direct stance question, no intermediate steps.
    pub async fn run_direct(
        &self,
        record: TweetRecord,
        exemplars: &[FewShotExemplar],
    ) -> Result<ChainResult, ChainError> {
        let mut state = ChainState::new(record);
        let mut steps = Vec::with_capacity(1);
        let predicted = self.drive_direct(&mut state, &mut steps, exemplars).await?;
        Ok(ChainResult { state, predicted, fallback_used: false, steps })
    }

    /// Runs one record in the configured mode. Only backend failures are
    /// errors; every other failure yields an unscoreable outcome that keeps
    /// the partial trace.
    pub async fn run_example(
        &self,
        record: TweetRecord,
        exemplars: &[FewShotExemplar],
    ) -> Result<ExampleOutcome, ChainError> {
        let mut state = ChainState::new(record);
        let mut steps = Vec::new();
        let result = match self.config.mode {
            ChainMode::Cos => self.drive_chain(&mut state, &mut steps, exemplars).await,
            ChainMode::Direct => self.drive_direct(&mut state, &mut steps, exemplars).await.map(|l| (l, false)),
        };
        match result {
            Ok((predicted, fallback_used)) => {
                Ok(ExampleOutcome::Scored(ChainResult { state, predicted, fallback_used, steps }))
            }
            Err(e @ ChainError::Backend { .. }) => Err(e),
            Err(e) => Ok(ExampleOutcome::Unscoreable(UnscoreableExample { state, steps, reason: e.to_string() })),
        }
    }

    /// Runs many records with at most `concurrency` chains in flight.
    /// Results keep input order.
    pub async fn run_batch(
        &self,
        items: Vec<(TweetRecord, Vec<FewShotExemplar>)>,
        concurrency: usize,
    ) -> Vec<Result<ExampleOutcome, ChainError>> {
        stream::iter(items)
            .map(|(record, exemplars)| async move { self.run_example(record, &exemplars).await })
            .buffered(concurrency.max(1))
            .collect()
            .await
    }
}
