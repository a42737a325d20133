use std::fmt::Write as _;
use std::path::Path;

use super::{SignatureTable, TraceMatrix};

pub const TRACE_CSV_HEADER: [&str; 11] = [
    "values",
    "XY",
    "Xy",
    "xY",
    "xy",
    "X",
    "Y",
    "common",
    "common_alt",
    "discrepancy_common",
    "discrepancy_assumption",
];

/// Rendered report: fixed-width text plus CSV files.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    /// Absent when the report was rendered without a signature table.
    pub signature_csv: Option<String>,
    /// (file name, contents), e.g. `trace_associative.csv`.
    pub trace_csvs: Vec<(String, String)>,
}

impl Report {
    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), &self.text)?;
        if let Some(csv) = &self.signature_csv {
            std::fs::write(dir.join("signature_table.csv"), csv)?;
        }
        for (name, csv) in &self.trace_csvs {
            std::fs::write(dir.join(name), csv)?;
        }
        Ok(())
    }
}

/// Renders the signature table (when given) and each named trace matrix.
pub fn render_report(traces: &[(&str, &TraceMatrix)], table: Option<&SignatureTable>) -> Report {
    let mut text = String::new();
    let signature_csv = table.map(|t| {
        render_signature_table(&mut text, t);
        signature_csv(t)
    });
    let mut trace_csvs = Vec::new();
    for (name, trace) in traces {
        if !text.is_empty() {
            text.push('\n');
        }
        render_trace(&mut text, name, trace);
        trace_csvs.push((format!("trace_{name}.csv"), trace_csv(trace)));
    }
    Report { text, signature_csv, trace_csvs }
}

fn render_signature_table(out: &mut String, table: &SignatureTable) {
    let _ = writeln!(out, "Signature table (outcome frequencies normalized to [0,1])");
    let _ = writeln!(out, "F/f: first cue hit/miss, S/s: second cue hit/miss");
    let _ = writeln!(out, "{:<10} {:>7}  {:>6} {:>6} {:>6} {:>6}   cells", "signature", "n", "FS", "Fs", "fS", "ff");
    for (sig, dm) in &table.rows {
        let f = dm.freq.cells();
        let _ = writeln!(
            out,
            "{:<10} {:>7}  {:>6.2} {:>6.2} {:>6.2} {:>6.2}   {}",
            sig.to_string(),
            dm.n_total(),
            f[0],
            f[1],
            f[2],
            f[3],
            dm.cell_labels().join(" ")
        );
    }
    for w in &table.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
}

fn render_trace(out: &mut String, name: &str, t: &TraceMatrix) {
    let (x, y) = (t.x_cue.letter(), t.y_cue.letter());
    let _ = write!(out, "Trace matrix: {name} (X = {x}, Y = {y}");
    if t.n_xy > 0 || t.n_yx > 0 {
        let _ = write!(out, "; n = {} {x}{y}, {} {y}{x}", t.n_xy, t.n_yx);
    }
    let _ = writeln!(out, ")");
    let _ = writeln!(out, "{:<10} {:>8} {:>8} {:>8}", "", format!("{y} +"), format!("{y} -"), "Total");
    let _ = writeln!(out, "{:<10} {:>8.2} {:>8.2} {:>8.2}", format!("{x} +"), t.common, t.reduced_x, t.gross_x);
    let _ =
        writeln!(out, "{:<10} {:>8.2} {:>8.2} {:>8.2}", format!("{x} -"), t.reduced_y, t.null_cell, t.gross_not_x());
    let _ = writeln!(out, "{:<10} {:>8.2} {:>8.2}", "Total", t.gross_y, t.gross_not_y());
    let assumption = t.discrepancy_assumption.map(|d| format!("{d:.3}")).unwrap_or_else(|| "n/a".to_string());
    for (label, value) in [
        ("common (column residual)", format!("{:.3}", t.common_alt)),
        ("discrepancy |common - common_alt|", format!("{:.3}", t.discrepancy_common)),
        ("discrepancy |xy - yx|", assumption),
    ] {
        let _ = writeln!(out, "{label:<34} {value:>8}");
    }
    if t.clamp_events.is_empty() {
        let _ = writeln!(out, "clamped: none");
    } else {
        let events: Vec<String> =
            t.clamp_events.iter().map(|e| format!("{} {:.4} -> {}", e.cell, e.raw, e.clamped)).collect();
        let _ = writeln!(out, "clamped: {}", events.join(", "));
    }
}

fn signature_csv(table: &SignatureTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "signature",
        "encoding",
        "order",
        "n_total",
        "n_FS",
        "n_Fs",
        "n_fS",
        "n_ff",
        "FS",
        "Fs",
        "fS",
        "ff",
    ])
    .expect("write to Vec");
    for (sig, dm) in &table.rows {
        let counts = dm.counts.unwrap_or([0; 4]);
        let mut rec = vec![
            sig.to_string(),
            sig.encoding.letter().to_string(),
            format!("{:?}", sig.order),
            dm.n_total().to_string(),
        ];
        rec.extend(counts.iter().map(u64::to_string));
        rec.extend(dm.freq.cells().iter().map(f64::to_string));
        w.write_record(&rec).expect("write to Vec");
    }
    String::from_utf8(w.into_inner().expect("flush Vec")).expect("csv is UTF-8")
}

fn trace_csv(t: &TraceMatrix) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_CSV_HEADER).expect("write to Vec");
    let assumption = t.discrepancy_assumption.map(|d| d.to_string()).unwrap_or_default();
    let u = &t.unclamped;
    let rows = [
        ("reported", [t.common, t.reduced_x, t.reduced_y, t.null_cell, t.gross_x, t.gross_y, t.common, t.common_alt]),
        ("unclamped", [u.common, u.reduced_x, u.reduced_y, u.null_cell, u.gross_x, u.gross_y, u.common, u.common_alt]),
    ];
    for (label, values) in rows {
        let mut rec = vec![label.to_string()];
        rec.extend(values.iter().map(f64::to_string));
        rec.push(t.discrepancy_common.to_string());
        rec.push(assumption.clone());
        w.write_record(&rec).expect("write to Vec");
    }
    String::from_utf8(w.into_inner().expect("flush Vec")).expect("csv is UTF-8")
}

/// Parses a trace CSV into (row label, values); an empty cell parses as NaN.
pub fn parse_trace_csv(text: &str) -> Result<Vec<(String, Vec<f64>)>, String> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(|e| e.to_string())?.iter().map(str::to_string).collect();
    if header != TRACE_CSV_HEADER {
        return Err(format!("unexpected header {header:?}"));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| e.to_string())?;
            let values = rec
                .iter()
                .skip(1)
                .map(|v| if v.is_empty() { Ok(f64::NAN) } else { v.parse::<f64>().map_err(|e| e.to_string()) })
                .collect::<Result<Vec<f64>, String>>()?;
            Ok((rec[0].to_string(), values))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimuli::CueType;

    #[test]
    fn null_trace_renders_zeros() {
        let t = TraceMatrix::from_cells(CueType::Associative, CueType::Rhyming, [0.0, 0.0, 0.0, 1.0]);
        let r = render_report(&[("associative", &t)], None);
        let row = |label: &str| -> Vec<String> {
            let line = r.text.lines().find(|l| l.starts_with(label)).unwrap();
            line[label.len()..].split_whitespace().map(str::to_string).collect()
        };
        assert_eq!(row("A +"), ["0.00", "0.00", "0.00"]);
        assert_eq!(row("A -"), ["0.00", "1.00", "1.00"]);
        assert_eq!(row("Total"), ["0.00", "1.00"]);
        assert!(r.signature_csv.is_none());
    }

    #[test]
    fn csv_roundtrip() {
        let t = TraceMatrix::from_cells(CueType::Associative, CueType::Rhyming, [0.27, 0.16, 0.16, 0.41]);
        let r = render_report(&[("rhyming", &t)], None);
        let (name, csv) = &r.trace_csvs[0];
        assert_eq!(name, "trace_rhyming.csv");
        let rows = parse_trace_csv(csv).unwrap();
        assert_eq!(rows[0].0, "reported");
        assert_eq!(&rows[0].1[..6], &[t.common, t.reduced_x, t.reduced_y, t.null_cell, t.gross_x, t.gross_y]);
        assert!(rows[0].1[9].is_nan());
    }
}
