use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use super::{EvalReport, SweepRow};
use crate::error::{Error, Result};

/// Frozen and SetCSE results for the same protocol and seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmComparison {
    pub frozen: EvalReport,
    pub setcse: EvalReport,
    /// Relative accuracy gain of SetCSE over frozen, in percent.
    pub accuracy_improvement: f64,
    pub f1_improvement: f64,
}

fn relative_gain(new: f64, old: f64) -> f64 {
    if old == 0.0 {
        if new == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (new - old) / old * 100.0
    }
}

impl ArmComparison {
    pub fn new(frozen: EvalReport, setcse: EvalReport) -> Self {
        ArmComparison {
            accuracy_improvement: relative_gain(setcse.accuracy, frozen.accuracy),
            f1_improvement: relative_gain(setcse.f1, frozen.f1),
            frozen,
            setcse,
        }
    }

    pub fn render(&self) -> String {
        let rows = vec![
            vec![
                self.frozen.arm.to_string(),
                pct(self.frozen.accuracy),
                pct(self.frozen.f1),
            ],
            vec![
                self.setcse.arm.to_string(),
                pct(self.setcse.accuracy),
                pct(self.setcse.f1),
            ],
            vec![
                "improvement".into(),
                format!("{:+.2}%", self.accuracy_improvement),
                format!("{:+.2}%", self.f1_improvement),
            ],
        ];
        let mut out = format!("protocol: {}\n", self.frozen.protocol);
        out.push_str(&render_table(&["arm", "accuracy", "f1"], &rows));
        out
    }
}

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

/// Left-aligned, space-padded columns.
pub fn render_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut header.iter().copied());
    for row in rows {
        line(&mut row.iter().map(String::as_str));
    }
    out
}

impl EvalReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "protocol: {}  arm: {}  n_sample: {}  repeats: {}\naccuracy: {}  f1 ({:?}): {}\n",
            self.protocol,
            self.arm,
            self.n_sample,
            self.repeat_accuracy.len(),
            pct(self.accuracy),
            self.f1_average,
            pct(self.f1),
        );
        let rows: Vec<Vec<String>> = self
            .per_class
            .iter()
            .map(|c| {
                vec![
                    c.class.clone(),
                    c.selected.to_string(),
                    c.correct.to_string(),
                    c.evaluated.to_string(),
                    c.correct_evaluated.to_string(),
                ]
            })
            .collect();
        out.push_str(&render_table(
            &["class", "selected", "correct", "evaluated", "correct_evaluated"],
            &rows,
        ));
        out
    }
}

#[derive(Serialize)]
struct CsvRow {
    n_sample: usize,
    arm: String,
    intersection_accuracy: f64,
    intersection_f1: f64,
    difference_accuracy: f64,
    difference_f1: f64,
}

/// Writes one CSV row per sweep point.
pub fn sweep_to_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(CsvRow {
            n_sample: r.n_sample,
            arm: r.intersection.arm.to_string(),
            intersection_accuracy: r.intersection.accuracy,
            intersection_f1: r.intersection.f1,
            difference_accuracy: r.difference.accuracy,
            difference_f1: r.difference.f1,
        })
        .map_err(|e| Error::Format(format!("writing sweep CSV: {e}")))?;
    }
    w.flush()
        .map_err(|e| Error::Format(format!("writing sweep CSV: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_alignment() {
        let t = render_table(&["a", "bb"], &[vec!["xxx".into(), "y".into()]]);
        assert_eq!(t, "a    bb\nxxx  y\n");
    }

    #[test]
    fn gain() {
        assert!((relative_gain(0.6, 0.5) - 20.0).abs() < 1e-9);
        assert_eq!(relative_gain(0.0, 0.0), 0.0);
    }
}
