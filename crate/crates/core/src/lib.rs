//! Synergy degree modelling of coded collaborative-discourse corpora.
//!
//! The pipeline runs from utterance files to a group-by-week metric panel
//! ([`corpus`]), through min-max standardization, CRITIC weighting, subsystem order
//! parameters and synergy degrees ([`sdm`]). [`stats`] holds the inference used to
//! compare measurements, [`evalkit`] scores automatic coders against human labels and
//! [`coder`] produces those automatic labels from a chat-completion model.

pub mod analysis;
pub mod codebook;
pub mod coder;
pub mod corpus;
pub mod evalkit;
pub mod sdm;
pub mod stats;
pub mod synthetic;

pub use codebook::{Code, Codebook, CodebookEntry, Level, Subsystem, TASK_CODES};
pub use corpus::{
    aggregate_metrics, parse_group_profiles, parse_utterances, validate_corpus, AggregateOptions,
    CodeSource, GroupProfile, MetricPanel, Normalization, Observation, Utterance, ValidationReport,
};
pub use sdm::{
    run_model, run_model_lenient, SdmOptions, SdmRun, SignConvention, StandardizationScope, SynergyOptions,
    WeekLinking,
};
pub use stats::{Method, TestResult};
