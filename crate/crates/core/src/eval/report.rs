use std::fmt::Write;

use super::DetectionCounts;

/// One named system in a results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub counts: DetectionCounts,
}

impl ReportRow {
    pub fn new(name: impl Into<String>, counts: DetectionCounts) -> Self {
        ReportRow {
            name: name.into(),
            counts,
        }
    }
}

/// Fixed-width table: system, predicted, correct, P, R, F0.5 (one decimal).
pub fn format_table(rows: &[ReportRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.name.chars().count())
        .chain([6])
        .max()
        .unwrap_or(6);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<width$}  {:>9}  {:>9}  {:>6}  {:>6}  {:>6}",
        "system", "predicted", "correct", "P", "R", "F0.5"
    );
    for r in rows {
        let c = &r.counts;
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>9}  {:>6.1}  {:>6.1}  {:>6.1}",
            r.name,
            c.predicted,
            c.correct,
            c.precision(),
            c.recall(),
            c.f05()
        );
    }
    out
}

/// CSV with a header row; gold counts are included so the file is
/// self-contained.
pub fn format_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("system,predicted,correct,gold,P,R,F05\n");
    for r in rows {
        let c = &r.counts;
        let name = if r.name.contains([',', '"', '\n']) {
            format!("\"{}\"", r.name.replace('"', "\"\""))
        } else {
            r.name.clone()
        };
        let _ = writeln!(
            out,
            "{name},{},{},{},{:.1},{:.1},{:.1}",
            c.predicted,
            c.correct,
            c.gold,
            c.precision(),
            c.recall(),
            c.f05()
        );
    }
    out
}
