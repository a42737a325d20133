//! Dual-cued-recall memory testing for chat language models.
//!
//! The crate is organised around the life of an experiment:
//!
//! - [`lexicon`] parses a CMU-format pronouncing dictionary and answers rhyme queries.
//! - [`stimuli`] loads and validates the to-be-remembered words with their cues and
//!   counterbalances them over the four experimental conditions.
//! - [`subjects`] provides chat sessions: a remote chat-completions endpoint, a simulated
//!   latent-trace subject, and a transcript replayer.
//! - [`protocol`] builds prompts, drives batched sessions and scores the answers.
//! - [`analysis`] tabulates trial records into data matrices and reduces them to trace
//!   matrices of gross, common and reduced cue valences.
//! - [`cli`] wires everything into the `tulving` command.

pub mod analysis;
pub mod cli;
pub mod digest;
pub mod exec;
pub mod lexicon;
pub mod protocol;
pub mod stimuli;
pub mod subjects;

pub use analysis::{
    gross_valences, reduce, reduce_by_encoding, render_report, tabulate, CellFrequencies, DataMatrix, EncodingTraces,
    Report, SignatureTable, TraceMatrix,
};
pub use exec::Execution;
pub use lexicon::{Lexicon, Pronunciation};
pub use protocol::{
    build_encoding_prompt, build_probe_prompt, run_experiment, score_response, PromptTemplates, RunConfig, RunManifest,
    RunOutput, TrialRecord,
};
pub use stimuli::{
    assign_conditions, load_stimulus_set, validate_stimuli, ConditionAssignment, ConditionSignature, CueType,
    ProbeOrder, StimulusSet, TargetItem,
};
pub use subjects::{ChatSession, LatentTraceParams, SessionError, Transcript};
