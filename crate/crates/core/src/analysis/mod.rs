//! Data matrices, trace-matrix reduction and reports.
//!
//! A data matrix holds the four dual-probe outcome frequencies for one probe order. Cells
//! are named after the first (F) and second (S) cue: upper case for a hit, lower case for
//! a miss, so `Fs` counts trials where only the first cue elicited the target.

mod reduction;
mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use reduction::{
    reduce, reduce_by_encoding, reduce_frequencies, ClampEvent, EncodingTraces, TraceCells, TraceMatrix,
};
pub use report::{parse_trace_csv, render_report, Report, TRACE_CSV_HEADER};

use crate::protocol::TrialRecord;
use crate::stimuli::{ConditionSignature, CueType, ProbeOrder};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("no valid trials to analyse")]
    NoValidTrials,
    #[error("data matrix is empty")]
    EmptyMatrix,
    #[error("inconsistent saturation: xy = {xy}, yx = {yx} (exactly one order never recalled)")]
    InconsistentSaturation { xy: f64, yx: f64 },
    #[error("signature {0} missing from the table")]
    MissingSignature(ConditionSignature),
    #[error("expected probe orders AR then RA, got {0:?} then {1:?}")]
    OrderMismatch(ProbeOrder, ProbeOrder),
    #[error("frequencies must lie in [0, 1] and sum to 1, got {0:?}")]
    BadFrequencies([f64; 4]),
    #[error("pooling requires count-based matrices")]
    NotCountBased,
}

/// Outcome frequencies in the order FS, Fs, fS, ff.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellFrequencies {
    pub both: f64,
    pub first_only: f64,
    pub second_only: f64,
    pub neither: f64,
}

impl CellFrequencies {
    pub fn new(cells: [f64; 4]) -> Self {
        CellFrequencies { both: cells[0], first_only: cells[1], second_only: cells[2], neither: cells[3] }
    }

    pub fn cells(&self) -> [f64; 4] {
        [self.both, self.first_only, self.second_only, self.neither]
    }

    pub fn sum(&self) -> f64 {
        self.cells().iter().sum()
    }
}

/// 2x2 outcome table for one probe order, optionally restricted to one encoding condition
/// (`encoding: None` means pooled over encodings).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    pub order: ProbeOrder,
    pub encoding: Option<CueType>,
    /// Raw counts FS, Fs, fS, ff; absent for matrices built from exact frequencies.
    pub counts: Option<[u64; 4]>,
    pub freq: CellFrequencies,
}

impl DataMatrix {
    pub fn from_counts(order: ProbeOrder, encoding: Option<CueType>, counts: [u64; 4]) -> Self {
        let n: u64 = counts.iter().sum();
        let freq = if n == 0 {
            CellFrequencies::new([0.0; 4])
        } else {
            CellFrequencies::new(counts.map(|c| c as f64 / n as f64))
        };
        DataMatrix { order, encoding, counts: Some(counts), freq }
    }

    pub fn from_frequencies(
        order: ProbeOrder,
        encoding: Option<CueType>,
        cells: [f64; 4],
    ) -> Result<Self, AnalysisError> {
        let freq = CellFrequencies::new(cells);
        if cells.iter().any(|c| !(0.0..=1.0).contains(c)) || (freq.sum() - 1.0).abs() > 1e-9 {
            return Err(AnalysisError::BadFrequencies(cells));
        }
        Ok(DataMatrix { order, encoding, counts: None, freq })
    }

    pub fn n_total(&self) -> u64 {
        self.counts.map(|c| c.iter().sum()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        match self.counts {
            Some(c) => c.iter().sum::<u64>() == 0,
            None => false,
        }
    }

    /// Cell labels for this order, e.g. `["AR", "Ar", "aR", "ar"]`.
    pub fn cell_labels(&self) -> [String; 4] {
        let [f, s] = self.order.cue_types().map(|c| c.letter());
        let (fl, sl) = (f.to_ascii_lowercase(), s.to_ascii_lowercase());
        [format!("{f}{s}"), format!("{f}{sl}"), format!("{fl}{s}"), format!("{fl}{sl}")]
    }
}

/// Gross valences (first cue, second cue) of a data matrix.
pub fn gross_valences(dm: &DataMatrix) -> Result<(f64, f64), AnalysisError> {
    if dm.is_empty() {
        return Err(AnalysisError::EmptyMatrix);
    }
    let f = &dm.freq;
    Ok((f.both + f.first_only, f.both + f.second_only))
}

/// One data matrix per condition signature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignatureTable {
    pub rows: BTreeMap<ConditionSignature, DataMatrix>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl SignatureTable {
    pub fn get(&self, sig: ConditionSignature) -> Result<&DataMatrix, AnalysisError> {
        self.rows.get(&sig).ok_or(AnalysisError::MissingSignature(sig))
    }
}

/// Counts valid trials by (signature, first hit, second hit).
pub fn tabulate(trials: &[TrialRecord]) -> Result<SignatureTable, AnalysisError> {
    let mut counts: BTreeMap<ConditionSignature, [u64; 4]> = BTreeMap::new();
    for t in trials.iter().filter(|t| t.valid) {
        let cell = match (t.first.hit, t.second.hit) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        counts.entry(t.signature).or_default()[cell] += 1;
    }
    if counts.is_empty() {
        return Err(AnalysisError::NoValidTrials);
    }
    let mut warnings = Vec::new();
    for sig in ConditionSignature::ALL {
        if !counts.contains_key(&sig) {
            log::warn!("no valid trials for signature {sig}");
            warnings.push(format!("no valid trials for signature {sig}"));
        }
    }
    let rows =
        counts.into_iter().map(|(sig, c)| (sig, DataMatrix::from_counts(sig.order, Some(sig.encoding), c))).collect();
    Ok(SignatureTable { rows, warnings })
}
