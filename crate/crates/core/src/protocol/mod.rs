//! Session orchestration: prompts, batched chats, scoring and trial records.

mod scoring;
mod templates;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use scoring::score_response;
pub use templates::{PromptTemplates, TemplateError};

use crate::digest::{derive_seed, json_digest};
use crate::exec::Execution;
use crate::stimuli::{
    assign_conditions, ConditionAssignment, ConditionSignature, CueType, StimulusError, StimulusSet, TargetItem,
};
use crate::subjects::{SessionKey, SubjectFactory, Transcript};

/// Share of failed batches above which a run is aborted.
pub const MAX_INVALID_BATCH_FRACTION: f64 = 0.2;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("repetitions must be at least 1")]
    NoRepetitions,
    #[error("batch size {batch_size} must be positive and divide the item count {items}")]
    BatchSize { batch_size: usize, items: usize },
    #[error(transparent)]
    Stimuli(#[from] StimulusError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("run aborted: {invalid} of {total} batches failed")]
    Aborted { invalid: usize, total: usize, output: Box<RunOutput> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub cue_type: CueType,
    pub cue: String,
    pub hit: bool,
    pub raw_response: String,
}

/// Outcome of both probes for one item in one repetition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub run_id: String,
    pub repetition: usize,
    pub batch_index: usize,
    pub item_index: usize,
    pub item: TargetItem,
    pub signature: ConditionSignature,
    pub first: ProbeOutcome,
    pub second: ProbeOutcome,
    pub transcript_ref: String,
    /// False when the batch session failed; such records are excluded from analysis.
    #[serde(default = "yes")]
    pub valid: bool,
}

fn yes() -> bool {
    true
}

impl TrialRecord {
    /// Parses JSON Lines, skipping blank lines. Errors carry the 1-based line number.
    pub fn parse_jsonl(text: &str) -> Result<Vec<TrialRecord>, String> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
            .collect()
    }

    pub fn to_jsonl(records: &[TrialRecord]) -> String {
        let mut out = String::new();
        for r in records {
            out.push_str(&serde_json::to_string(r).expect("trial record serializes"));
            out.push('\n');
        }
        out
    }
}

/// How each repetition's condition assignment is obtained.
#[derive(Debug, Clone)]
pub enum AssignmentSource {
    /// `assign_conditions` with a rotation seed derived from the run seed and repetition.
    Rotating,
    Fixed(ConditionAssignment),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub repetitions: usize,
    pub seed: u64,
    /// Items per chat session.
    pub batch_size: usize,
    pub execution: Execution,
    pub assignment: AssignmentSource,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            repetitions: 25,
            seed: 0,
            batch_size: 4,
            execution: Execution::Parallel,
            assignment: AssignmentSource::Rotating,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvalidBatch {
    pub repetition: usize,
    pub batch: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub tool_version: String,
    pub stimulus_digest: String,
    pub subject_kind: String,
    pub subject_config: serde_json::Value,
    pub subject_config_digest: String,
    pub template_digest: String,
    pub seed: u64,
    pub repetitions: usize,
    pub batch_size: usize,
    pub items: usize,
    pub sessions: usize,
    pub trials: usize,
    pub valid_trials: usize,
    pub invalid_batches: Vec<InvalidBatch>,
    pub started_at: String,
    pub finished_at: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub manifest: RunManifest,
    /// Ordered by (repetition, batch, position in batch).
    pub trials: Vec<TrialRecord>,
    pub transcripts: Vec<(SessionKey, Transcript)>,
}

/// Encoding prompt: preamble, then one line per item in an order shuffled by `seed`.
pub fn build_encoding_prompt(batch: &[(TargetItem, ConditionSignature)], t: &PromptTemplates, seed: u64) -> String {
    let mut order: Vec<usize> = (0..batch.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut lines: Vec<String> = Vec::with_capacity(batch.len() + 1);
    if !t.memorize_preamble.trim().is_empty() {
        lines.push(t.memorize_preamble.clone());
    }
    for i in order {
        let (item, sig) = &batch[i];
        lines.push(t.encoding_line_for(&item.target, item.encoding_cue(sig.encoding), sig.encoding));
    }
    lines.join("\n")
}

/// Question asking for the memorized word standing in `cue_type`'s relation to `cue`.
pub fn build_probe_prompt(cue: &str, cue_type: CueType, t: &PromptTemplates) -> String {
    t.probe_for(cue, cue_type)
}

struct BatchJob {
    key: SessionKey,
    /// (index into the stimulus set, signature)
    items: Vec<(usize, ConditionSignature)>,
}

struct BatchResult {
    key: SessionKey,
    trials: Vec<TrialRecord>,
    transcript: Option<Transcript>,
    error: Option<String>,
}

/// Runs every repetition: fresh session per batch, one encoding prompt, then both probes
/// of each item consecutively in signature order.
pub fn run_experiment(
    set: &StimulusSet,
    factory: &dyn SubjectFactory,
    templates: &PromptTemplates,
    cfg: &RunConfig,
) -> Result<RunOutput, ProtocolError> {
    templates.validate()?;
    if cfg.repetitions == 0 {
        return Err(ProtocolError::NoRepetitions);
    }
    if cfg.batch_size == 0 || !set.len().is_multiple_of(cfg.batch_size) {
        return Err(ProtocolError::BatchSize { batch_size: cfg.batch_size, items: set.len() });
    }
    if let AssignmentSource::Fixed(a) = &cfg.assignment {
        if a.len() != set.len() {
            return Err(StimulusError::CountNotDivisible(a.len()).into());
        }
    }
    let started_at = crate::subjects::now();

    let stimulus_digest = set.digest();
    let subject_config = factory.config();
    let subject_config_digest = json_digest(&subject_config);
    let template_digest = templates.digest();
    let run_id = json_digest(&(
        &stimulus_digest,
        factory.kind(),
        &subject_config_digest,
        &template_digest,
        cfg.seed,
        cfg.repetitions,
        cfg.batch_size,
    ))[..16]
        .to_string();

    let mut jobs = Vec::new();
    for rep in 0..cfg.repetitions {
        let assignment = match &cfg.assignment {
            AssignmentSource::Rotating => assign_conditions(set, derive_seed(cfg.seed, &[0x00a5_516e, rep as u64]))?,
            AssignmentSource::Fixed(a) => a.clone(),
        };
        for (batch, chunk) in (0..set.len()).collect::<Vec<_>>().chunks(cfg.batch_size).enumerate() {
            jobs.push(BatchJob {
                key: SessionKey { repetition: rep, batch },
                items: chunk.iter().map(|&i| (i, assignment.signature(i))).collect(),
            });
        }
    }
    let total = jobs.len();

    let results = cfg.execution.map(jobs, |job| run_batch(job, set, factory, templates, cfg.seed, &run_id));

    let mut trials = Vec::new();
    let mut transcripts = Vec::new();
    let mut invalid_batches = Vec::new();
    let mut ordered: BTreeMap<SessionKey, BatchResult> = results.into_iter().map(|r| (r.key, r)).collect();
    for (key, r) in std::mem::take(&mut ordered) {
        if let Some(err) = r.error {
            log::error!("run {run_id}: repetition {} batch {} failed: {err}", key.repetition, key.batch);
            invalid_batches.push(InvalidBatch { repetition: key.repetition, batch: key.batch, error: err });
        }
        trials.extend(r.trials);
        if let Some(t) = r.transcript {
            transcripts.push((key, t));
        }
    }

    let valid_trials = trials.iter().filter(|t| t.valid).count();
    let manifest = RunManifest {
        run_id,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        stimulus_digest,
        subject_kind: factory.kind().to_string(),
        subject_config,
        subject_config_digest,
        template_digest,
        seed: cfg.seed,
        repetitions: cfg.repetitions,
        batch_size: cfg.batch_size,
        items: set.len(),
        sessions: total,
        trials: trials.len(),
        valid_trials,
        invalid_batches,
        started_at,
        finished_at: crate::subjects::now(),
    };
    let invalid = manifest.invalid_batches.len();
    let output = RunOutput { manifest, trials, transcripts };
    if invalid as f64 > MAX_INVALID_BATCH_FRACTION * total as f64 {
        return Err(ProtocolError::Aborted { invalid, total, output: Box::new(output) });
    }
    Ok(output)
}

fn run_batch(
    job: BatchJob,
    set: &StimulusSet,
    factory: &dyn SubjectFactory,
    templates: &PromptTemplates,
    seed: u64,
    run_id: &str,
) -> BatchResult {
    let key = job.key;
    let transcript_ref = key.transcript_ref();
    let batch: Vec<(TargetItem, ConditionSignature)> =
        job.items.iter().map(|&(i, sig)| (set.items()[i].clone(), sig)).collect();

    let mut session = match factory.open(key) {
        Ok(s) => s,
        Err(e) => {
            return BatchResult {
                key,
                trials: invalid_trials(&job, &batch, run_id, &transcript_ref, &[]),
                transcript: None,
                error: Some(e.to_string()),
            }
        }
    };

    let order_seed = derive_seed(seed, &[0x0e_c0de, key.repetition as u64, key.batch as u64]);
    let encoding = build_encoding_prompt(&batch, templates, order_seed);
    let mut outcomes: Vec<ProbeOutcome> = Vec::with_capacity(batch.len() * 2);
    let mut error = session.send(&encoding).err().map(|e| e.to_string());

    if error.is_none() {
        'items: for (item, sig) in &batch {
            for kind in sig.order.cue_types() {
                let cue = item.probe_cue(kind);
                match session.send(&build_probe_prompt(cue, kind, templates)) {
                    Ok(response) => outcomes.push(ProbeOutcome {
                        cue_type: kind,
                        cue: cue.to_string(),
                        hit: score_response(&response, &item.target),
                        raw_response: response,
                    }),
                    Err(e) => {
                        error = Some(e.to_string());
                        break 'items;
                    }
                }
            }
        }
    }

    let transcript = Some(session.into_transcript());
    let trials = if error.is_some() {
        invalid_trials(&job, &batch, run_id, &transcript_ref, &outcomes)
    } else {
        let mut it = outcomes.into_iter();
        job.items
            .iter()
            .zip(&batch)
            .map(|(&(item_index, signature), (item, _))| TrialRecord {
                run_id: run_id.to_string(),
                repetition: key.repetition,
                batch_index: key.batch,
                item_index,
                item: item.clone(),
                signature,
                first: it.next().expect("two outcomes per item"),
                second: it.next().expect("two outcomes per item"),
                transcript_ref: transcript_ref.clone(),
                valid: true,
            })
            .collect()
    };
    BatchResult { key, trials, transcript, error }
}

/// Records for a failed batch: completed probes are kept, the rest are empty misses.
fn invalid_trials(
    job: &BatchJob,
    batch: &[(TargetItem, ConditionSignature)],
    run_id: &str,
    transcript_ref: &str,
    done: &[ProbeOutcome],
) -> Vec<TrialRecord> {
    let mut done = done.iter().cloned();
    job.items
        .iter()
        .zip(batch)
        .map(|(&(item_index, signature), (item, _))| {
            let [a, b] = signature.order.cue_types().map(|kind| {
                done.next().unwrap_or_else(|| ProbeOutcome {
                    cue_type: kind,
                    cue: item.probe_cue(kind).to_string(),
                    hit: false,
                    raw_response: String::new(),
                })
            });
            TrialRecord {
                run_id: run_id.to_string(),
                repetition: job.key.repetition,
                batch_index: job.key.batch,
                item_index,
                item: item.clone(),
                signature,
                first: a,
                second: b,
                transcript_ref: transcript_ref.to_string(),
                valid: false,
            }
        })
        .collect()
}
