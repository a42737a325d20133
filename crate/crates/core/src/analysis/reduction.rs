//! Reduction of two ordered data matrices (X then Y, Y then X) to one order-free trace
//! matrix, assuming a cue that fails to elicit the target leaves the trace unchanged.
//!
//! With `xy`, `yx` the both-missed frequencies of the two orders:
//!
//! ```text
//! null      = (xy + yx) / 2
//! X_t       = X  (1 - null) / (1 - xy)      X  = first-cue hits, X-first order
//! Y_t       = Y  (1 - null) / (1 - yx)      Y  = first-cue hits, Y-first order
//! x_t Y_t   = xY (1 - null) / (1 - xy)      xY = X missed, Y hit, X-first order
//! X_t y_t   = yX (1 - null) / (1 - yx)      yX = Y missed, X hit, Y-first order
//! common    = X_t - X_t y_t                 (row residual)
//! common_alt= Y_t - x_t Y_t                 (column residual)
//! ```

use serde::{Deserialize, Serialize};

use super::{AnalysisError, CellFrequencies, DataMatrix, SignatureTable};
use crate::stimuli::{ConditionSignature, CueType, ProbeOrder};

const SATURATION_EPS: f64 = 1e-12;

/// Trace values before any clamping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceCells {
    pub common: f64,
    pub reduced_x: f64,
    pub reduced_y: f64,
    pub null_cell: f64,
    pub gross_x: f64,
    pub gross_y: f64,
    pub common_alt: f64,
}

impl TraceCells {
    fn fields_mut(&mut self) -> [(&'static str, &mut f64); 7] {
        [
            ("XY", &mut self.common),
            ("Xy", &mut self.reduced_x),
            ("xY", &mut self.reduced_y),
            ("xy", &mut self.null_cell),
            ("X", &mut self.gross_x),
            ("Y", &mut self.gross_y),
            ("common_alt", &mut self.common_alt),
        ]
    }
}

/// A value pulled back into [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClampEvent {
    pub cell: String,
    pub raw: f64,
    pub clamped: f64,
}

/// Order-independent valences of the cue pair (X, Y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMatrix {
    pub x_cue: CueType,
    pub y_cue: CueType,
    /// X_t Y_t
    pub common: f64,
    /// X_t y_t
    pub reduced_x: f64,
    /// x_t Y_t
    pub reduced_y: f64,
    /// x_t y_t
    pub null_cell: f64,
    /// X_t
    pub gross_x: f64,
    /// Y_t
    pub gross_y: f64,
    pub common_alt: f64,
    pub discrepancy_common: f64,
    /// |xy - yx|; absent when the trace was not computed from data matrices.
    pub discrepancy_assumption: Option<f64>,
    pub unclamped: TraceCells,
    pub clamp_events: Vec<ClampEvent>,
    /// Trials behind each order's matrix (0 for exact frequencies).
    pub n_xy: u64,
    pub n_yx: u64,
}

impl TraceMatrix {
    fn from_raw(
        x_cue: CueType,
        y_cue: CueType,
        raw: TraceCells,
        discrepancy_assumption: Option<f64>,
        n: (u64, u64),
    ) -> Self {
        let mut cells = raw;
        let mut clamp_events = Vec::new();
        for (name, v) in cells.fields_mut() {
            let c = v.clamp(0.0, 1.0);
            if c != *v {
                log::warn!("trace cell {name} = {v} clamped to {c}");
                clamp_events.push(ClampEvent { cell: name.to_string(), raw: *v, clamped: c });
                *v = c;
            }
        }
        TraceMatrix {
            x_cue,
            y_cue,
            common: cells.common,
            reduced_x: cells.reduced_x,
            reduced_y: cells.reduced_y,
            null_cell: cells.null_cell,
            gross_x: cells.gross_x,
            gross_y: cells.gross_y,
            common_alt: cells.common_alt,
            discrepancy_common: (raw.common - raw.common_alt).abs(),
            discrepancy_assumption,
            unclamped: raw,
            clamp_events,
            n_xy: n.0,
            n_yx: n.1,
        }
    }

    /// Trace from its four cells; gross valences are the row and column sums.
    pub fn from_cells(x_cue: CueType, y_cue: CueType, cells: [f64; 4]) -> Self {
        let [common, reduced_x, reduced_y, null_cell] = cells;
        let raw = TraceCells {
            common,
            reduced_x,
            reduced_y,
            null_cell,
            gross_x: common + reduced_x,
            gross_y: common + reduced_y,
            common_alt: common,
        };
        TraceMatrix::from_raw(x_cue, y_cue, raw, None, (0, 0))
    }

    fn null_trace(x_cue: CueType, y_cue: CueType, discrepancy: f64, n: (u64, u64)) -> Self {
        let raw = TraceCells {
            common: 0.0,
            reduced_x: 0.0,
            reduced_y: 0.0,
            null_cell: 1.0,
            gross_x: 0.0,
            gross_y: 0.0,
            common_alt: 0.0,
        };
        TraceMatrix::from_raw(x_cue, y_cue, raw, Some(discrepancy), n)
    }

    /// Cells in the order XY, Xy, xY, xy.
    pub fn cells(&self) -> [f64; 4] {
        [self.common, self.reduced_x, self.reduced_y, self.null_cell]
    }

    /// x_t, recall failure to X (row sum).
    pub fn gross_not_x(&self) -> f64 {
        self.reduced_y + self.null_cell
    }

    /// y_t, recall failure to Y (column sum).
    pub fn gross_not_y(&self) -> f64 {
        self.reduced_x + self.null_cell
    }

    pub fn was_clamped(&self) -> bool {
        !self.clamp_events.is_empty()
    }
}

/// Reduces frequencies of the X-first matrix `xy_first` and the Y-first matrix `yx_first`.
pub fn reduce_frequencies(
    xy_first: &CellFrequencies,
    yx_first: &CellFrequencies,
    x_cue: CueType,
    y_cue: CueType,
) -> Result<TraceMatrix, AnalysisError> {
    reduce_inner(xy_first, yx_first, x_cue, y_cue, (0, 0))
}

fn reduce_inner(
    a: &CellFrequencies,
    b: &CellFrequencies,
    x_cue: CueType,
    y_cue: CueType,
    n: (u64, u64),
) -> Result<TraceMatrix, AnalysisError> {
    let xy = a.neither;
    let yx = b.neither;
    let discrepancy = (xy - yx).abs();
    let xy_sat = (1.0 - xy).abs() <= SATURATION_EPS;
    let yx_sat = (1.0 - yx).abs() <= SATURATION_EPS;
    match (xy_sat, yx_sat) {
        (true, true) => return Ok(TraceMatrix::null_trace(x_cue, y_cue, discrepancy, n)),
        (true, false) | (false, true) => return Err(AnalysisError::InconsistentSaturation { xy, yx }),
        (false, false) => {}
    }

    let null_cell = (xy + yx) / 2.0;
    let scale_x = (1.0 - null_cell) / (1.0 - xy);
    let scale_y = (1.0 - null_cell) / (1.0 - yx);
    let gross_x = (a.both + a.first_only) * scale_x;
    let gross_y = (b.both + b.first_only) * scale_y;
    let reduced_y = a.second_only * scale_x;
    let reduced_x = b.second_only * scale_y;
    let raw = TraceCells {
        common: gross_x - reduced_x,
        reduced_x,
        reduced_y,
        null_cell,
        gross_x,
        gross_y,
        common_alt: gross_y - reduced_y,
    };
    Ok(TraceMatrix::from_raw(x_cue, y_cue, raw, Some(discrepancy), n))
}

/// Reduces an X-first data matrix and a Y-first data matrix to a trace matrix. X is the
/// first cue of `dm_xy`.
pub fn reduce(dm_xy: &DataMatrix, dm_yx: &DataMatrix) -> Result<TraceMatrix, AnalysisError> {
    if dm_xy.order == dm_yx.order {
        return Err(AnalysisError::OrderMismatch(dm_xy.order, dm_yx.order));
    }
    if dm_xy.is_empty() || dm_yx.is_empty() {
        return Err(AnalysisError::EmptyMatrix);
    }
    let [x_cue, y_cue] = dm_xy.order.cue_types();
    reduce_inner(&dm_xy.freq, &dm_yx.freq, x_cue, y_cue, (dm_xy.n_total(), dm_yx.n_total()))
}

/// Per-encoding traces plus the trace of the pooled counts. X is the associative cue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingTraces {
    pub associative: TraceMatrix,
    pub rhyming: TraceMatrix,
    pub pooled: TraceMatrix,
}

impl EncodingTraces {
    pub fn named(&self) -> [(&'static str, &TraceMatrix); 3] {
        [("associative", &self.associative), ("rhyming", &self.rhyming), ("pooled", &self.pooled)]
    }

    pub fn for_encoding(&self, kind: CueType) -> &TraceMatrix {
        match kind {
            CueType::Associative => &self.associative,
            CueType::Rhyming => &self.rhyming,
        }
    }
}

pub fn reduce_by_encoding(table: &SignatureTable) -> Result<EncodingTraces, AnalysisError> {
    let pair = |enc: CueType| -> Result<(&DataMatrix, &DataMatrix), AnalysisError> {
        Ok((
            table.get(ConditionSignature::new(enc, ProbeOrder::AR))?,
            table.get(ConditionSignature::new(enc, ProbeOrder::RA))?,
        ))
    };
    let (a_ar, a_ra) = pair(CueType::Associative)?;
    let (r_ar, r_ra) = pair(CueType::Rhyming)?;
    let associative = reduce(a_ar, a_ra)?;
    let rhyming = reduce(r_ar, r_ra)?;

    let pool = |m1: &DataMatrix, m2: &DataMatrix, order| -> Result<DataMatrix, AnalysisError> {
        let (c1, c2) = m1.counts.zip(m2.counts).ok_or(AnalysisError::NotCountBased)?;
        Ok(DataMatrix::from_counts(order, None, std::array::from_fn(|i| c1[i] + c2[i])))
    };
    let pooled = reduce(&pool(a_ar, r_ar, ProbeOrder::AR)?, &pool(a_ra, r_ra, ProbeOrder::RA)?)?;
    Ok(EncodingTraces { associative, rhyming, pooled })
}
