//! Prompt templates with `{slot}` placeholders.

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stimuli::CueType;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template `{field}`: slot {{{slot}}} must appear exactly once (found {count})")]
    SlotCount { field: &'static str, slot: &'static str, count: usize },
    #[error("template `{field}`: unknown slot {{{slot}}}")]
    UnknownSlot { field: &'static str, slot: String },
    #[error("template `{field}` must fit on one line")]
    Multiline { field: &'static str },
    #[error("relation phrases must be non-empty and distinct")]
    Relations,
    #[error("template file: {0}")]
    Parse(String),
}

/// Encoding and probe prompt wording.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplates {
    pub memorize_preamble: String,
    /// Slots: `{cue}`, `{target}`, `{relation}`.
    pub encoding_line: String,
    /// Slots: `{cue}`, `{relation}`.
    pub probe_question: String,
    pub relation_assoc: String,
    pub relation_rhyme: String,
}

impl Default for PromptTemplates {
    fn default() -> Self {
        PromptTemplates {
            memorize_preamble: "Memorize the following list of words. Each word is shown together with a \
context word. Afterwards I will test your memory: I will give you a cue and you will recall \
the word from the list that it points to."
                .to_string(),
            encoding_line: "- {target} ({relation} \"{cue}\")".to_string(),
            probe_question: "Which word from the list you memorized {relation} \"{cue}\"? \
Answer with that single word."
                .to_string(),
            relation_assoc: "is associated to".to_string(),
            relation_rhyme: "rhymes with".to_string(),
        }
    }
}

fn slot_names(template: &str) -> Vec<String> {
    let re = Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)\}").expect("static regex");
    re.captures_iter(template).map(|c| c[1].to_string()).collect()
}

fn check_slots(field: &'static str, template: &str, declared: &[&'static str]) -> Result<(), TemplateError> {
    let found = slot_names(template);
    if let Some(unknown) = found.iter().find(|s| !declared.contains(&s.as_str())) {
        return Err(TemplateError::UnknownSlot { field, slot: unknown.clone() });
    }
    for &slot in declared {
        let count = found.iter().filter(|s| *s == slot).count();
        if count != 1 {
            return Err(TemplateError::SlotCount { field, slot, count });
        }
    }
    Ok(())
}

impl PromptTemplates {
    pub fn validate(&self) -> Result<(), TemplateError> {
        check_slots("memorize_preamble", &self.memorize_preamble, &[])?;
        check_slots("encoding_line", &self.encoding_line, &["cue", "target", "relation"])?;
        check_slots("probe_question", &self.probe_question, &["cue", "relation"])?;
        check_slots("relation_assoc", &self.relation_assoc, &[])?;
        check_slots("relation_rhyme", &self.relation_rhyme, &[])?;
        if self.encoding_line.contains('\n') {
            return Err(TemplateError::Multiline { field: "encoding_line" });
        }
        if self.relation_assoc.trim().is_empty()
            || self.relation_rhyme.trim().is_empty()
            || self.relation_assoc == self.relation_rhyme
        {
            return Err(TemplateError::Relations);
        }
        Ok(())
    }

    /// Parses and validates a JSON template file.
    pub fn from_json(text: &str) -> Result<Self, TemplateError> {
        let t: PromptTemplates = serde_json::from_str(text).map_err(|e| TemplateError::Parse(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("templates serialize")
    }

    pub fn digest(&self) -> String {
        crate::digest::json_digest(self)
    }

    pub fn relation(&self, kind: CueType) -> &str {
        match kind {
            CueType::Associative => &self.relation_assoc,
            CueType::Rhyming => &self.relation_rhyme,
        }
    }

    pub fn relation_kind(&self, phrase: &str) -> Option<CueType> {
        if phrase == self.relation_assoc {
            Some(CueType::Associative)
        } else if phrase == self.relation_rhyme {
            Some(CueType::Rhyming)
        } else {
            None
        }
    }

    pub fn encoding_line_for(&self, target: &str, cue: &str, kind: CueType) -> String {
        fill(&self.encoding_line, &[("cue", cue), ("target", target), ("relation", self.relation(kind))])
    }

    pub fn probe_for(&self, cue: &str, kind: CueType) -> String {
        fill(&self.probe_question, &[("cue", cue), ("relation", self.relation(kind))])
    }

    /// Regex matching one filled encoding line, with named groups `cue`, `target`, `relation`.
    pub fn encoding_pattern(&self) -> Regex {
        self.pattern(&self.encoding_line, false)
    }

    /// Regex matching a whole filled probe prompt, with named groups `cue`, `relation`.
    pub fn probe_pattern(&self) -> Regex {
        self.pattern(&self.probe_question, true)
    }

    fn pattern(&self, template: &str, dot_all: bool) -> Regex {
        let slot = Regex::new(r"\{(cue|target|relation)\}").expect("static regex");
        let relation =
            format!("(?P<relation>{}|{})", regex::escape(&self.relation_assoc), regex::escape(&self.relation_rhyme));
        let mut out = String::from(if dot_all { "(?s)^" } else { "^" });
        let mut last = 0;
        for m in slot.captures_iter(template) {
            let whole = m.get(0).expect("group 0");
            out.push_str(&regex::escape(&template[last..whole.start()]));
            match &m[1] {
                "relation" => out.push_str(&relation),
                name => out.push_str(&format!("(?P<{name}>.+?)")),
            }
            last = whole.end();
        }
        out.push_str(&regex::escape(&template[last..]));
        out.push('$');
        Regex::new(&out).expect("escaped template builds a valid regex")
    }
}

fn fill(template: &str, values: &[(&str, &str)]) -> String {
    // single pass, so slot-like text inside values is never re-expanded
    let re = Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)\}").expect("static regex");
    re.replace_all(template, |c: &regex::Captures| {
        values.iter().find(|(k, _)| *k == &c[1]).map(|(_, v)| v.to_string()).unwrap_or_else(|| c[0].to_string())
    })
    .into_owned()
}
