use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::sampler::OOD_SPLITS;
use crate::scalar::Scalar;

use super::EvalReport;

/// One evaluated (method, split) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry<F> {
    pub method: String,
    pub split: String,
    pub report: EvalReport<F>,
}

/// Methods by splits, each cell holding `(AP, AP50)` in percent.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub splits: Vec<String>,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub cells: Vec<Option<(f64, f64)>>,
    pub avg: (f64, f64),
}

fn cell(v: Option<(f64, f64)>) -> String {
    match v {
        Some((ap, ap50)) => format!("{ap:.1}/{ap50:.1}"),
        None => "-".to_string(),
    }
}

/// Lays reports out like the benchmark table: canonical split order first,
/// any other splits after in order of appearance.
pub fn report_table<F: Scalar>(entries: &[ReportEntry<F>]) -> ReportTable {
    let mut splits: Vec<String> = OOD_SPLITS
        .iter()
        .map(|(_, s)| s.to_string())
        .filter(|s| entries.iter().any(|e| &e.split == s))
        .collect();
    for e in entries {
        if !splits.contains(&e.split) {
            splits.push(e.split.clone());
        }
    }
    let mut methods: Vec<String> = Vec::new();
    for e in entries {
        if !methods.contains(&e.method) {
            methods.push(e.method.clone());
        }
    }
    let rows = methods
        .into_iter()
        .map(|method| {
            let cells: Vec<Option<(f64, f64)>> = splits
                .iter()
                .map(|s| {
                    entries
                        .iter()
                        .find(|e| e.method == method && &e.split == s)
                        .map(|e| (100.0 * e.report.ap.lossy_f64(), 100.0 * e.report.ap50.lossy_f64()))
                })
                .collect();
            let present: Vec<(f64, f64)> = cells.iter().flatten().copied().collect();
            let n = present.len().max(1) as f64;
            let avg = (
                present.iter().map(|c| c.0).sum::<f64>() / n,
                present.iter().map(|c| c.1).sum::<f64>() / n,
            );
            ReportRow { method, cells, avg }
        })
        .collect();
    ReportTable { splits, rows }
}

impl ReportTable {
    fn body(&self) -> Vec<Vec<String>> {
        let mut header = vec!["Method".to_string()];
        header.extend(self.splits.iter().cloned());
        header.push("Avg".to_string());
        let mut out = vec![header];
        for r in &self.rows {
            let mut line = vec![r.method.clone()];
            line.extend(r.cells.iter().map(|c| cell(*c)));
            line.push(cell(Some(r.avg)));
            out.push(line);
        }
        out
    }

    /// Aligned plain-text table, cells as `AP/AP50` percentages.
    pub fn to_text(&self) -> String {
        let body = self.body();
        let widths: Vec<usize> =
            (0..body[0].len()).map(|c| body.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
        let mut out = String::new();
        for (i, row) in body.iter().enumerate() {
            let cells: Vec<String> =
                row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}", w = *w)).collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            if i == 0 {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            }
        }
        out
    }

    pub fn to_csv(&self) -> String {
        self.body().iter().map(|r| r.join(",")).collect::<Vec<_>>().join("\n") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(ap: f64, ap50: f64) -> EvalReport<f64> {
        EvalReport { ap, ap50, per_threshold: vec![], per_class: vec![], n_images: 1, n_gt: 1, n_det: 1 }
    }

    fn entry(method: &str, split: &str, ap: f64, ap50: f64) -> ReportEntry<f64> {
        ReportEntry { method: method.into(), split: split.into(), report: report(ap, ap50) }
    }

    #[test]
    fn single_cell() {
        let t = report_table(&[entry("gt", "tiny", 0.824, 1.0)]);
        assert_eq!(t.splits, vec!["tiny"]);
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].cells, vec![Some((82.39999999999999, 100.0))]);
        let text = t.to_text();
        assert!(text.contains("82.4/100.0"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn canonical_order_and_average() {
        let t = report_table(&[
            entry("m", "vertical", 0.2, 0.6),
            entry("m", "few", 0.5, 0.8),
            entry("shuffled", "few", 0.0, 0.0),
        ]);
        assert_eq!(t.splits, vec!["few", "vertical"]);
        assert_eq!(t.rows[0].avg, (35.0, 70.0));
        assert_eq!(t.rows[1].cells[1], None);
        let csv = t.to_csv();
        assert_eq!(csv.lines().next().unwrap(), "Method,few,vertical,Avg");
        assert!(csv.contains("m,50.0/80.0,20.0/60.0,35.0/70.0"));
        assert!(csv.contains("shuffled,0.0/0.0,-,0.0/0.0"));
    }

    #[test]
    fn text_and_csv_agree() {
        let t = report_table(&[entry("a", "few", 0.123, 0.456), entry("a", "many", 0.9, 0.99)]);
        let text = t.to_text();
        for line in t.to_csv().lines().skip(1) {
            for cellv in line.split(',') {
                assert!(text.contains(cellv), "{cellv}");
            }
        }
    }
}
