//! Simulated subject with a latent trace per item.
//!
//! At encoding each item draws one of four latent categories (recallable from the
//! associative cue X, the rhyming cue Y, both, or neither). A probe succeeds iff the current
//! category admits its cue type. Failed probes never change the category; with
//! `reencode_on_success` a successful probe makes the other cue succeed as well.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{ChatSession, SessionError, SessionKey, SubjectFactory, Transcript};
use crate::digest::derive_seed;
use crate::protocol::PromptTemplates;
use crate::stimuli::{CueType, StimulusSet};

/// Extra-list words used as failed-probe answers.
pub const DISTRACTORS: [&str; 24] = [
    "anchor", "blanket", "carpet", "compass", "feather", "harbor", "helmet", "kettle", "lemon", "marble", "mirror",
    "needle", "orange", "parrot", "pepper", "puzzle", "saddle", "shovel", "spider", "tunnel", "velvet", "wagon",
    "whistle", "violin",
];

/// Ground-truth outcome probabilities. X is the associative cue, Y the rhyming cue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentTraceParams {
    pub p_xy_both: f64,
    pub p_x_only: f64,
    pub p_y_only: f64,
    pub p_neither: f64,
    #[serde(default)]
    pub reencode_on_success: bool,
}

impl LatentTraceParams {
    /// Cells in the order XY, Xy, xY, xy.
    pub fn new(cells: [f64; 4], reencode_on_success: bool) -> Result<Self, String> {
        let p = LatentTraceParams {
            p_xy_both: cells[0],
            p_x_only: cells[1],
            p_y_only: cells[2],
            p_neither: cells[3],
            reencode_on_success,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn cells(&self) -> [f64; 4] {
        [self.p_xy_both, self.p_x_only, self.p_y_only, self.p_neither]
    }

    pub fn validate(&self) -> Result<(), String> {
        let cells = self.cells();
        if let Some(bad) = cells.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(format!("probability {bad} outside [0, 1]"));
        }
        let sum: f64 = cells.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(format!("probabilities sum to {sum}, expected 1"));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut impl Rng) -> LatentCategory {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (cat, p) in LatentCategory::ALL.iter().zip(self.cells()) {
            acc += p;
            if u < acc {
                return *cat;
            }
        }
        // rounding: fall back to the last category with positive mass
        LatentCategory::ALL
            .iter()
            .zip(self.cells())
            .rev()
            .find(|(_, p)| *p > 0.0)
            .map(|(c, _)| *c)
            .unwrap_or(LatentCategory { assoc: false, rhyme: false })
    }
}

/// Which cue types currently elicit the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatentCategory {
    pub assoc: bool,
    pub rhyme: bool,
}

impl LatentCategory {
    pub const ALL: [LatentCategory; 4] = [
        LatentCategory { assoc: true, rhyme: true },
        LatentCategory { assoc: true, rhyme: false },
        LatentCategory { assoc: false, rhyme: true },
        LatentCategory { assoc: false, rhyme: false },
    ];

    pub fn admits(&self, kind: CueType) -> bool {
        match kind {
            CueType::Associative => self.assoc,
            CueType::Rhyming => self.rhyme,
        }
    }
}

/// Latent parameters per encoding condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulatedProfile {
    pub associative: LatentTraceParams,
    pub rhyming: LatentTraceParams,
}

impl SimulatedProfile {
    pub fn uniform(params: LatentTraceParams) -> Self {
        SimulatedProfile { associative: params, rhyming: params }
    }

    pub fn for_encoding(&self, kind: CueType) -> &LatentTraceParams {
        match kind {
            CueType::Associative => &self.associative,
            CueType::Rhyming => &self.rhyming,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        self.associative.validate().map_err(|e| format!("associative: {e}"))?;
        self.rhyming.validate().map_err(|e| format!("rhyming: {e}"))
    }
}

struct EncodedItem {
    target: String,
    category: LatentCategory,
    reencode: bool,
}

pub struct SimulatedSession {
    profile: SimulatedProfile,
    knowledge: Arc<StimulusSet>,
    templates: PromptTemplates,
    encoding_re: Regex,
    probe_re: Regex,
    rng: ChaCha8Rng,
    memory: Vec<EncodedItem>,
    transcript: Transcript,
}

/// Opens a simulated session. `knowledge` plays the part of the subject's semantic memory:
/// it is used only to resolve which target a probe cue points to.
pub fn open_simulated_session(
    profile: SimulatedProfile,
    knowledge: Arc<StimulusSet>,
    templates: PromptTemplates,
    seed: u64,
) -> Result<SimulatedSession, SessionError> {
    profile.validate().map_err(SessionError::Config)?;
    templates.validate().map_err(|e| SessionError::Config(e.to_string()))?;
    let patterns = (templates.encoding_pattern(), templates.probe_pattern());
    Ok(session_with_patterns(profile, knowledge, templates, patterns, seed))
}

fn session_with_patterns(
    profile: SimulatedProfile,
    knowledge: Arc<StimulusSet>,
    templates: PromptTemplates,
    (encoding_re, probe_re): (Regex, Regex),
    seed: u64,
) -> SimulatedSession {
    let digest = crate::digest::json_digest(&profile);
    SimulatedSession {
        encoding_re,
        probe_re,
        profile,
        knowledge,
        templates,
        rng: ChaCha8Rng::seed_from_u64(seed),
        memory: Vec::new(),
        transcript: Transcript::new("simulated", digest),
    }
}

impl SimulatedSession {
    fn answer(&mut self, prompt: &str) -> Result<String, SessionError> {
        let trimmed = prompt.trim();
        if let Some(c) = self.probe_re.captures(trimmed) {
            let kind = self.templates.relation_kind(&c["relation"]).expect("pattern only admits known relations");
            return Ok(self.probe(&c["cue"], kind));
        }
        let mut encoded = 0;
        for line in trimmed.lines() {
            let Some(c) = self.encoding_re.captures(line.trim_end()) else { continue };
            let kind = self.templates.relation_kind(&c["relation"]).expect("pattern only admits known relations");
            let params = *self.profile.for_encoding(kind);
            let category = params.draw(&mut self.rng);
            self.memory.push(EncodedItem {
                target: c["target"].to_string(),
                category,
                reencode: params.reencode_on_success,
            });
            encoded += 1;
        }
        if encoded == 0 {
            return Err(SessionError::Prompt(excerpt(prompt)));
        }
        Ok(format!("I have memorized the {encoded} words and I am ready for the test."))
    }

    fn probe(&mut self, cue: &str, kind: CueType) -> String {
        let cue = cue.to_lowercase();
        let knowledge = &self.knowledge;
        let slot = self.memory.iter().position(|m| {
            knowledge.items().iter().any(|it| {
                it.target.eq_ignore_ascii_case(&m.target)
                    && (it.probe_cue(kind).to_lowercase() == cue || it.encoding_cue(kind).to_lowercase() == cue)
            })
        });
        if let Some(i) = slot {
            let item = &mut self.memory[i];
            if item.category.admits(kind) {
                if item.reencode {
                    item.category = LatentCategory { assoc: true, rhyme: true };
                }
                return format!("The word is {}.", item.target);
            }
        }
        let distractor = self.distractor();
        format!("The word is {distractor}.")
    }

    fn distractor(&mut self) -> &'static str {
        loop {
            let w = DISTRACTORS[self.rng.random_range(0..DISTRACTORS.len())];
            if !self.memory.iter().any(|m| m.target.eq_ignore_ascii_case(w)) {
                return w;
            }
        }
    }
}

fn excerpt(s: &str) -> String {
    s.chars().take(120).collect()
}

impl ChatSession for SimulatedSession {
    fn send(&mut self, prompt: &str) -> Result<String, SessionError> {
        let response = self.answer(prompt)?;
        self.transcript.record(prompt, &response);
        Ok(response)
    }

    fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    fn into_transcript(self: Box<Self>) -> Transcript {
        self.transcript
    }
}

/// Opens simulated sessions whose seeds derive from the run seed and the session key.
pub struct SimulatedFactory {
    profile: SimulatedProfile,
    knowledge: Arc<StimulusSet>,
    templates: PromptTemplates,
    patterns: (Regex, Regex),
    seed: u64,
}

impl SimulatedFactory {
    pub fn new(
        profile: SimulatedProfile,
        knowledge: Arc<StimulusSet>,
        templates: PromptTemplates,
        seed: u64,
    ) -> Result<Self, SessionError> {
        profile.validate().map_err(SessionError::Config)?;
        templates.validate().map_err(|e| SessionError::Config(e.to_string()))?;
        let patterns = (templates.encoding_pattern(), templates.probe_pattern());
        Ok(SimulatedFactory { profile, knowledge, templates, patterns, seed })
    }

    pub fn profile(&self) -> &SimulatedProfile {
        &self.profile
    }
}

impl SubjectFactory for SimulatedFactory {
    fn kind(&self) -> &'static str {
        "simulated"
    }

    fn config(&self) -> serde_json::Value {
        serde_json::json!({ "profile": self.profile, "seed": self.seed })
    }

    fn open(&self, key: SessionKey) -> Result<Box<dyn ChatSession>, SessionError> {
        let seed = derive_seed(self.seed, &[0x5e55_1010, key.repetition as u64, key.batch as u64]);
        Ok(Box::new(session_with_patterns(
            self.profile,
            self.knowledge.clone(),
            self.templates.clone(),
            self.patterns.clone(),
            seed,
        )))
    }
}
