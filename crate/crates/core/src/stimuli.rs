//! Stimulus material: target words with their cues, validation against the lexicon, and
//! counterbalanced assignment to the four experimental conditions.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::Lexicon;

#[derive(Debug, Error)]
pub enum StimulusError {
    #[error("stimulus file schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("item count {0} is not divisible by 4")]
    CountNotDivisible(usize),
    #[error("stimulus set is empty")]
    Empty,
    #[error("items[{index}]: words `{first}` and `{second}` are not distinct")]
    NotDistinct { index: usize, first: String, second: String },
    #[error("items[{index}]: duplicate target `{target}` (first seen at items[{first_index}])")]
    DuplicateTarget { index: usize, first_index: usize, target: String },
    #[error("items[{index}].{field}: empty word")]
    EmptyWord { index: usize, field: String },
}

/// Kind of cue relating a context or probe word to a target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CueType {
    #[serde(rename = "A")]
    Associative,
    #[serde(rename = "R")]
    Rhyming,
}

impl CueType {
    pub fn letter(self) -> char {
        match self {
            CueType::Associative => 'A',
            CueType::Rhyming => 'R',
        }
    }

    pub fn other(self) -> CueType {
        match self {
            CueType::Associative => CueType::Rhyming,
            CueType::Rhyming => CueType::Associative,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CueType::Associative => "associative",
            CueType::Rhyming => "rhyming",
        }
    }
}

/// Order in which the two probe cues are presented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProbeOrder {
    AR,
    RA,
}

impl ProbeOrder {
    pub fn cue_types(self) -> [CueType; 2] {
        match self {
            ProbeOrder::AR => [CueType::Associative, CueType::Rhyming],
            ProbeOrder::RA => [CueType::Rhyming, CueType::Associative],
        }
    }

    pub fn first(self) -> CueType {
        self.cue_types()[0]
    }
}

/// Encoding context plus probe order, e.g. `A/RA`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConditionSignature {
    pub encoding: CueType,
    pub order: ProbeOrder,
}

impl ConditionSignature {
    pub const ALL: [ConditionSignature; 4] = [
        ConditionSignature { encoding: CueType::Associative, order: ProbeOrder::AR },
        ConditionSignature { encoding: CueType::Associative, order: ProbeOrder::RA },
        ConditionSignature { encoding: CueType::Rhyming, order: ProbeOrder::AR },
        ConditionSignature { encoding: CueType::Rhyming, order: ProbeOrder::RA },
    ];

    pub fn new(encoding: CueType, order: ProbeOrder) -> Self {
        ConditionSignature { encoding, order }
    }
}

impl fmt::Display for ConditionSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let order = match self.order {
            ProbeOrder::AR => "AR",
            ProbeOrder::RA => "RA",
        };
        write!(f, "{}/{}", self.encoding.letter(), order)
    }
}

impl FromStr for ConditionSignature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ConditionSignature::ALL
            .iter()
            .copied()
            .find(|sig| sig.to_string() == s)
            .ok_or_else(|| format!("unknown condition signature `{s}`"))
    }
}

impl Serialize for ConditionSignature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ConditionSignature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A to-be-remembered word with one encoding and one probe cue of each type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TargetItem {
    pub target: String,
    pub assoc_encoding_cue: String,
    pub assoc_probe_cue: String,
    pub rhyme_encoding_cue: String,
    pub rhyme_probe_cue: String,
}

impl TargetItem {
    pub fn encoding_cue(&self, kind: CueType) -> &str {
        match kind {
            CueType::Associative => &self.assoc_encoding_cue,
            CueType::Rhyming => &self.rhyme_encoding_cue,
        }
    }

    pub fn probe_cue(&self, kind: CueType) -> &str {
        match kind {
            CueType::Associative => &self.assoc_probe_cue,
            CueType::Rhyming => &self.rhyme_probe_cue,
        }
    }

    fn named_words(&self) -> [(&'static str, &str); 5] {
        [
            ("target", &self.target),
            ("assoc[0]", &self.assoc_encoding_cue),
            ("assoc[1]", &self.assoc_probe_cue),
            ("rhyme[0]", &self.rhyme_encoding_cue),
            ("rhyme[1]", &self.rhyme_probe_cue),
        ]
    }
}

/// One record of the stimulus file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemRecord {
    pub target: String,
    pub assoc: [String; 2],
    pub rhyme: [String; 2],
}

impl From<&TargetItem> for ItemRecord {
    fn from(item: &TargetItem) -> Self {
        ItemRecord {
            target: item.target.clone(),
            assoc: [item.assoc_encoding_cue.clone(), item.assoc_probe_cue.clone()],
            rhyme: [item.rhyme_encoding_cue.clone(), item.rhyme_probe_cue.clone()],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusFile {
    #[serde(default)]
    pub metadata: String,
    pub items: Vec<ItemRecord>,
}

/// Validated stimulus list; the item count is a positive multiple of 4.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StimulusSet {
    items: Vec<TargetItem>,
    metadata: String,
}

impl StimulusSet {
    pub fn new(items: Vec<TargetItem>, metadata: impl Into<String>) -> Result<Self, StimulusError> {
        if items.is_empty() {
            return Err(StimulusError::Empty);
        }
        if !items.len().is_multiple_of(4) {
            return Err(StimulusError::CountNotDivisible(items.len()));
        }
        let mut seen: Vec<(String, usize)> = Vec::with_capacity(items.len());
        for (index, item) in items.iter().enumerate() {
            let words = item.named_words();
            for (field, w) in words {
                if w.trim().is_empty() {
                    return Err(StimulusError::EmptyWord { index, field: field.to_string() });
                }
            }
            for i in 0..words.len() {
                for j in i + 1..words.len() {
                    if words[i].1.to_lowercase() == words[j].1.to_lowercase() {
                        return Err(StimulusError::NotDistinct {
                            index,
                            first: words[i].1.to_string(),
                            second: words[j].1.to_string(),
                        });
                    }
                }
            }
            let key = item.target.to_lowercase();
            if let Some((_, first_index)) = seen.iter().find(|(t, _)| *t == key) {
                return Err(StimulusError::DuplicateTarget {
                    index,
                    first_index: *first_index,
                    target: item.target.clone(),
                });
            }
            seen.push((key, index));
        }
        Ok(StimulusSet { items, metadata: metadata.into() })
    }

    pub fn items(&self) -> &[TargetItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn metadata(&self) -> &str {
        &self.metadata
    }

    pub fn to_file(&self) -> StimulusFile {
        StimulusFile { metadata: self.metadata.clone(), items: self.items.iter().map(ItemRecord::from).collect() }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("stimulus file serializes")
    }

    pub fn digest(&self) -> String {
        crate::digest::json_digest(&self.to_file())
    }
}

/// Parses a JSON stimulus document and checks structural invariants (not rhyme validity).
pub fn load_stimulus_set(document: &str) -> Result<StimulusSet, StimulusError> {
    let de = &mut serde_json::Deserializer::from_str(document);
    let file: StimulusFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        StimulusError::Schema { path, message: e.into_inner().to_string() }
    })?;
    let items = file
        .items
        .into_iter()
        .map(|r| {
            let [assoc_encoding_cue, assoc_probe_cue] = r.assoc;
            let [rhyme_encoding_cue, rhyme_probe_cue] = r.rhyme;
            TargetItem { target: r.target, assoc_encoding_cue, assoc_probe_cue, rhyme_encoding_cue, rhyme_probe_cue }
        })
        .collect();
    StimulusSet::new(items, file.metadata)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Severity {
    Pass,
    Warn,
    Fail,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Pass => "PASS",
            Severity::Warn => "WARN",
            Severity::Fail => "FAIL",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub item: usize,
    pub target: String,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    /// PASS iff no finding is a failure. Missing associative cues only warn.
    pub fn passed(&self) -> bool {
        self.findings.iter().all(|f| f.severity != Severity::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Fail)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for finding in &self.findings {
            writeln!(f, "{:<4} items[{}] {}: {}", finding.severity, finding.item, finding.target, finding.message)?;
        }
        write!(f, "{}", if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Checks every item against the lexicon: both rhyme cues must rhyme with the target.
/// A rhyme check whose words are missing from the lexicon cannot pass.
pub fn validate_stimuli(set: &StimulusSet, lex: &Lexicon) -> ValidationReport {
    let mut findings = Vec::new();
    for (index, item) in set.items().iter().enumerate() {
        let mut push = |severity, message: String| {
            findings.push(Finding { item: index, target: item.target.clone(), severity, message })
        };
        for (field, word) in item.named_words() {
            if !lex.contains(word) {
                push(Severity::Warn, format!("{field} `{word}` not in lexicon"));
            }
        }
        push(Severity::Pass, "all five words distinct".to_string());
        for (field, cue) in [("rhyme[0]", &item.rhyme_encoding_cue), ("rhyme[1]", &item.rhyme_probe_cue)] {
            match lex.rhymes(cue, &item.target) {
                Ok(true) => push(Severity::Pass, format!("{field} `{cue}` rhymes with target")),
                Ok(false) => push(Severity::Fail, format!("{field} `{cue}` does not rhyme with target")),
                Err(e) => push(Severity::Fail, format!("{field} `{cue}` rhyme unverifiable: {e}")),
            }
        }
    }
    ValidationReport { findings }
}

/// Signature per item; consecutive blocks of 4 hold each signature exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionAssignment {
    signatures: Vec<ConditionSignature>,
}

impl ConditionAssignment {
    pub fn from_signatures(signatures: Vec<ConditionSignature>) -> Result<Self, StimulusError> {
        if !signatures.len().is_multiple_of(4) {
            return Err(StimulusError::CountNotDivisible(signatures.len()));
        }
        for (b, block) in signatures.chunks(4).enumerate() {
            for sig in ConditionSignature::ALL {
                if block.iter().filter(|s| **s == sig).count() != 1 {
                    return Err(StimulusError::Schema {
                        path: format!("assignment block {b}"),
                        message: format!("signature {sig} must occur exactly once"),
                    });
                }
            }
        }
        Ok(ConditionAssignment { signatures })
    }

    pub fn signature(&self, item: usize) -> ConditionSignature {
        self.signatures[item]
    }

    pub fn signatures(&self) -> &[ConditionSignature] {
        &self.signatures
    }

    pub fn blocks(&self) -> impl Iterator<Item = &[ConditionSignature]> {
        self.signatures.chunks(4)
    }

    pub fn len(&self) -> usize {
        self.signatures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signatures.is_empty()
    }
}

/// The `index`-th permutation (lexicographic, index mod 24) of the four signatures.
pub fn signature_permutation(index: u64) -> [ConditionSignature; 4] {
    let mut pool: Vec<ConditionSignature> = ConditionSignature::ALL.to_vec();
    let mut rem = index % 24;
    let mut out = [ConditionSignature::ALL[0]; 4];
    for (slot, radix) in [6u64, 2, 1, 1].into_iter().enumerate() {
        let pick = (rem / radix) as usize;
        rem %= radix;
        out[slot] = pool.remove(pick);
    }
    out
}

/// Assigns signatures block by block; block `b` gets permutation `(seed + b) mod 24`,
/// so successive seeds rotate item-to-condition pairings.
pub fn assign_conditions(set: &StimulusSet, seed: u64) -> Result<ConditionAssignment, StimulusError> {
    assign_for_count(set.len(), seed)
}

pub(crate) fn assign_for_count(n: usize, seed: u64) -> Result<ConditionAssignment, StimulusError> {
    if !n.is_multiple_of(4) {
        return Err(StimulusError::CountNotDivisible(n));
    }
    let signatures = (0..n / 4).flat_map(|b| signature_permutation((seed % 24) + b as u64)).collect();
    Ok(ConditionAssignment { signatures })
}

/// Words in the set that appear more than once as a cue of one type. A probe cue shared by
/// two targets in the same batch makes the probe ambiguous.
pub fn shared_probe_cues(set: &StimulusSet) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut shared = Vec::new();
    for item in set.items() {
        for kind in [CueType::Associative, CueType::Rhyming] {
            let key = (kind, item.probe_cue(kind).to_lowercase());
            if !seen.insert(key.clone()) {
                shared.push(key.1);
            }
        }
    }
    shared
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::parse_cmudict;

    fn item(t: &str) -> TargetItem {
        TargetItem {
            target: t.into(),
            assoc_encoding_cue: format!("{t}-a0"),
            assoc_probe_cue: format!("{t}-a1"),
            rhyme_encoding_cue: format!("{t}-r0"),
            rhyme_probe_cue: format!("{t}-r1"),
        }
    }

    fn doc(n: usize) -> String {
        let items: Vec<ItemRecord> = (0..n).map(|i| ItemRecord::from(&item(&format!("w{i}")))).collect();
        serde_json::to_string(&StimulusFile { metadata: "test".into(), items }).unwrap()
    }

    #[test]
    fn loads_sixteen() {
        let set = load_stimulus_set(&doc(16)).unwrap();
        assert_eq!(set.len(), 16);
        assert_eq!(set.items()[3].assoc_probe_cue, "w3-a1");
    }

    #[test]
    fn rejects_fifteen() {
        let err = load_stimulus_set(&doc(15)).unwrap_err();
        assert!(err.to_string().contains("not divisible by 4"), "{err}");
    }

    #[test]
    fn rejects_target_equal_to_probe_cue() {
        let mut items: Vec<TargetItem> = (0..4).map(|i| item(&format!("w{i}"))).collect();
        items[2].assoc_probe_cue = "W2".into();
        let err = StimulusSet::new(items, "").unwrap_err();
        assert!(matches!(err, StimulusError::NotDistinct { index: 2, .. }), "{err}");
    }

    #[test]
    fn rejects_duplicate_targets() {
        let mut items: Vec<TargetItem> = (0..4).map(|i| item(&format!("w{i}"))).collect();
        items[3] = item("w1");
        assert!(matches!(
            StimulusSet::new(items, "").unwrap_err(),
            StimulusError::DuplicateTarget { index: 3, first_index: 1, .. }
        ));
    }

    #[test]
    fn schema_errors_carry_path() {
        let bad = r#"{"items":[{"target":"a","assoc":["b"],"rhyme":["c","d"]}]}"#;
        match load_stimulus_set(bad).unwrap_err() {
            StimulusError::Schema { path, .. } => assert_eq!(path, "items[0].assoc"),
            e => panic!("unexpected {e}"),
        }
        let missing = r#"{"items":[{"assoc":["b","c"],"rhyme":["c","d"]}]}"#;
        assert!(matches!(load_stimulus_set(missing).unwrap_err(), StimulusError::Schema { .. }));
    }

    #[test]
    fn signature_display_roundtrip() {
        let rendered: Vec<String> = ConditionSignature::ALL.iter().map(|s| s.to_string()).collect();
        assert_eq!(rendered, ["A/AR", "A/RA", "R/AR", "R/RA"]);
        for s in ConditionSignature::ALL {
            assert_eq!(s.to_string().parse::<ConditionSignature>().unwrap(), s);
        }
    }

    #[test]
    fn assignment_blocks_are_permutations() {
        let set = load_stimulus_set(&doc(16)).unwrap();
        let a = assign_conditions(&set, 0).unwrap();
        assert_eq!(a.blocks().count(), 4);
        for block in a.blocks() {
            let mut b = block.to_vec();
            b.sort();
            assert_eq!(b, ConditionSignature::ALL.to_vec());
        }
        assert_eq!(a, assign_conditions(&set, 0).unwrap());
    }

    #[test]
    fn seeds_reach_every_permutation() {
        // oracle: enumerate all orderings of the four signatures directly
        let mut all = Vec::new();
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let idx = [a, b, c, d];
                        let mut sorted = idx;
                        sorted.sort();
                        if sorted == [0, 1, 2, 3] {
                            all.push(idx.map(|i| ConditionSignature::ALL[i]));
                        }
                    }
                }
            }
        }
        assert_eq!(all.len(), 24);
        let set = load_stimulus_set(&doc(4)).unwrap();
        let reached: HashSet<Vec<ConditionSignature>> =
            (0..24).map(|seed| assign_conditions(&set, seed).unwrap().signatures().to_vec()).collect();
        let expected: HashSet<Vec<ConditionSignature>> = all.into_iter().map(|p| p.to_vec()).collect();
        assert_eq!(reached, expected);
    }

    #[test]
    fn validation_report() {
        let lex = parse_cmudict(
            "FASHION  F AE1 SH AH0 N\nPASSION  P AE1 SH AH0 N\nRATION  R AE1 SH AH0 N\nSTYLE  S T AY1 L\nGARMENT  G AA1 R M AH0 N T\nDOG  D AO1 G\n",
        )
        .lexicon;
        let good = TargetItem {
            target: "fashion".into(),
            assoc_encoding_cue: "style".into(),
            assoc_probe_cue: "garment".into(),
            rhyme_encoding_cue: "passion".into(),
            rhyme_probe_cue: "ration".into(),
        };
        let mut bad = good.clone();
        bad.rhyme_probe_cue = "dog".into();
        let mut missing = good.clone();
        missing.assoc_probe_cue = "couture".into();

        let fill = |it: TargetItem| {
            let mut v = vec![it];
            for i in 0..3 {
                v.push(TargetItem {
                    target: format!("x{i}"),
                    assoc_encoding_cue: "style".into(),
                    assoc_probe_cue: "garment".into(),
                    rhyme_encoding_cue: "passion".into(),
                    rhyme_probe_cue: "ration".into(),
                });
            }
            StimulusSet::new(v, "").unwrap()
        };

        let r = validate_stimuli(&fill(good), &lex);
        assert!(r.findings.iter().filter(|f| f.item == 0).all(|f| f.severity == Severity::Pass));
        let r = validate_stimuli(&fill(bad), &lex);
        let fails: Vec<&Finding> = r.failures().filter(|f| f.item == 0).collect();
        assert_eq!(fails.len(), 1);
        assert!(fails[0].message.contains("dog"));
        let r = validate_stimuli(&fill(missing), &lex);
        assert!(r
            .findings
            .iter()
            .any(|f| f.item == 0 && f.severity == Severity::Warn && f.message.contains("couture")));
        assert!(r.failures().all(|f| f.item != 0));
    }

    #[test]
    fn shared_cues_detected() {
        let mut items: Vec<TargetItem> = (0..4).map(|i| item(&format!("w{i}"))).collect();
        items[1].assoc_probe_cue = "w0-a1".into();
        let set = StimulusSet::new(items, "").unwrap();
        assert_eq!(shared_probe_cues(&set), vec!["w0-a1".to_string()]);
    }
}
