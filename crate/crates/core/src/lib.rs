//! Chain-of-stance stance detection: prompting pipeline, completion
//! backends, SemEval-2016 Task 6 data handling and evaluation.

pub mod audit;
pub mod backend;
pub mod baselines;
pub mod chain;
pub mod dataset;
pub mod digest;
pub mod domain;
pub mod metrics;
pub mod prompting;
pub mod report;

pub use domain::{
    argmax_label, normalize_distribution, parse_stance_label, ChainState, LabelError, Split,
    StanceDistribution, StanceLabel, StepTranscript, Target, TweetRecord,
};
