use std::fmt::Write as _;

use serde::Serialize;

/// Relative slack absorbing binary64 rounding in exact-arithmetic inequalities.
pub const SLACK_REL: f64 = 1e-10;

/// Slack for an inequality whose natural scale is `scale`.
pub fn slack(scale: f64) -> f64 {
    SLACK_REL * (1.0 + scale.abs())
}

/// One checked inequality `lhs ≤ rhs`. `margin` is measured against the
/// slack-inflated bound, so `pass == (margin >= 0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub n: i64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub check: String,
    pub worst_margin: f64,
    pub pass_count: usize,
    pub fail_count: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub records: Vec<CheckRecord>,
    /// Named scalar results (worst ratios, maxima) that are not inequalities.
    pub metrics: Vec<(String, f64)>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `lhs ≤ rhs + slack`.
    pub fn check(&mut self, check: &str, n: i64, lhs: f64, rhs: f64, slack: f64) -> bool {
        let margin = if rhs == f64::INFINITY {
            f64::INFINITY
        } else {
            rhs + slack - lhs
        };
        let pass = margin >= 0.0;
        self.records.push(CheckRecord {
            check: check.to_string(),
            n,
            lhs,
            rhs,
            margin,
            pass,
        });
        pass
    }

    /// Records the strict inequality `lhs < rhs` with no slack.
    pub fn check_strict(&mut self, check: &str, n: i64, lhs: f64, rhs: f64) -> bool {
        let margin = rhs - lhs;
        let pass = margin > 0.0;
        self.records.push(CheckRecord {
            check: check.to_string(),
            n,
            lhs,
            rhs,
            margin,
            pass,
        });
        pass
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.push((name.to_string(), value));
    }

    pub fn get_metric(&self, name: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| *v)
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn extend(&mut self, other: Report) {
        self.records.extend(other.records);
        self.metrics.extend(other.metrics);
        self.notes.extend(other.notes);
    }

    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.records.iter().filter(|r| !r.pass)
    }

    /// Smallest margin over all records, or over one check name.
    pub fn worst_margin(&self, check: Option<&str>) -> f64 {
        self.records
            .iter()
            .filter(|r| check.is_none_or(|c| r.check == c))
            .map(|r| r.margin)
            .fold(f64::INFINITY, f64::min)
    }

    /// Per-check aggregates in first-appearance order.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut rows: Vec<SummaryRow> = Vec::new();
        for r in &self.records {
            let row = match rows.iter_mut().find(|s| s.check == r.check) {
                Some(row) => row,
                None => {
                    rows.push(SummaryRow {
                        check: r.check.clone(),
                        worst_margin: f64::INFINITY,
                        pass_count: 0,
                        fail_count: 0,
                    });
                    rows.last_mut().unwrap()
                }
            };
            row.worst_margin = row.worst_margin.min(r.margin);
            if r.pass {
                row.pass_count += 1;
            } else {
                row.fail_count += 1;
            }
        }
        rows
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// `check,worst_margin,pass_count,fail_count`
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("check,worst_margin,pass_count,fail_count\n");
        for s in self.summary() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                s.check, s.worst_margin, s.pass_count, s.fail_count
            );
        }
        out
    }
}
