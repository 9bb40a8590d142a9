//! Run-level diagnostics: the characteristic continuity modulus and the
//! discrete conservation residuals.

use serde::Serialize;

use super::report::Report;
use crate::error::{Error, Result};
use crate::field::{l2_norm, SpinorField};
use crate::scheme::History;

/// Denominator floor for relative drift of a zero run.
pub const DRIFT_FLOOR: f64 = 1e-300;

/// Squared L² moduli along the characteristics,
/// `Σ_j |u^{n+h}_{j+h} − u^n_j|² τ` and `Σ_j |v^{n+h}_{j−h} − v^n_j|² τ`.
pub fn continuity_modulus(history: &History, n_base: usize, h_cells: usize) -> Result<(f64, f64)> {
    let top = n_base.checked_add(h_cells).ok_or_else(|| {
        Error::InvalidArgument(format!("n_base {n_base} + h {h_cells} overflows"))
    })?;
    let a = history.frame(n_base)?;
    let b = history.frame(top)?;
    let h = h_cells as i64;
    let du = shifted_sq(a, b, h, |f, j| f.u_at(j));
    let dv = shifted_sq(a, b, -h, |f, j| f.v_at(j));
    Ok((du * a.tau(), dv * a.tau()))
}

/// `Σ_j |g(b, j + h) − g(a, j)|²` over every `j` where either term can be
/// nonzero.
fn shifted_sq(
    a: &SpinorField,
    b: &SpinorField,
    h: i64,
    g: impl Fn(&SpinorField, i64) -> num_complex::Complex64,
) -> f64 {
    let lo = a.mesh().j_min().min(b.mesh().j_min() - h);
    let hi = a.mesh().j_max().max(b.mesh().j_max() - h);
    let mut sum = 0.0;
    for j in lo..=hi {
        sum += (g(b, j + h) - g(a, j)).norm_sqr();
    }
    sum
}

/// Spacing of binary64 values at `x` (the ulp of `|x|`).
pub fn ulp(x: f64) -> f64 {
    let x = x.abs();
    if x == 0.0 {
        return f64::from_bits(1);
    }
    if !x.is_finite() {
        return f64::NAN;
    }
    f64::from_bits(x.to_bits() + 1) - x
}

/// Worst conservation residuals of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservationSummary {
    /// `max_n |‖f_n‖ − ‖f_0‖| / max(‖f_0‖, 1e-300)`.
    pub max_l2_drift: f64,
    /// Largest per-cell residual of `|u_j^{n+1}|² + |v_j^{n+1}|² = |u_{j−1}^n|² + |v_{j+1}^n|²`,
    /// in ulps of the larger side.
    pub max_cell_residual_ulps: f64,
    pub max_cell_residual_abs: f64,
}

impl ConservationSummary {
    /// Turns the summary into two checked records.
    pub fn to_report(&self, max_ulps: f64, max_drift: f64) -> Report {
        let mut r = Report::new();
        r.check(
            "cell_conservation_ulps",
            0,
            self.max_cell_residual_ulps,
            max_ulps,
            0.0,
        );
        r.check("l2_drift", 0, self.max_l2_drift, max_drift, 0.0);
        r.metric("max_cell_residual_abs", self.max_cell_residual_abs);
        r
    }
}

/// Residual of the per-cell balance between every pair of consecutive frames.
pub fn cell_residuals(prev: &SpinorField, next: &SpinorField) -> (f64, f64) {
    let mut worst_ulps: f64 = 0.0;
    let mut worst_abs: f64 = 0.0;
    let m = next.mesh();
    for j in m.j_min()..=m.j_max() {
        let after = next.density_at(j);
        let before = prev.u_at(j - 1).norm_sqr() + prev.v_at(j + 1).norm_sqr();
        let diff = (after - before).abs();
        worst_abs = worst_abs.max(diff);
        if diff > 0.0 {
            worst_ulps = worst_ulps.max(diff / ulp(after.max(before)));
        }
    }
    (worst_ulps, worst_abs)
}

/// Conservation residuals over every step of `history`.
pub fn conservation_report(history: &History) -> ConservationSummary {
    let mut tracker = ConservationTracker::new(history.initial());
    for f in &history.frames()[1..] {
        tracker.push(f);
    }
    tracker.summary()
}

/// Streaming form of [`conservation_report`] for runs too long to store.
#[derive(Debug, Clone)]
pub struct ConservationTracker {
    prev: SpinorField,
    norm0: f64,
    summary: ConservationSummary,
}

impl ConservationTracker {
    pub fn new(initial: &SpinorField) -> Self {
        Self {
            prev: initial.clone(),
            norm0: l2_norm(initial),
            summary: ConservationSummary {
                max_l2_drift: 0.0,
                max_cell_residual_ulps: 0.0,
                max_cell_residual_abs: 0.0,
            },
        }
    }

    pub fn push(&mut self, next: &SpinorField) {
        let (ulps, abs) = cell_residuals(&self.prev, next);
        let s = &mut self.summary;
        s.max_cell_residual_ulps = s.max_cell_residual_ulps.max(ulps);
        s.max_cell_residual_abs = s.max_cell_residual_abs.max(abs);
        let drift = (l2_norm(next) - self.norm0).abs() / self.norm0.max(DRIFT_FLOOR);
        s.max_l2_drift = s.max_l2_drift.max(drift);
        self.prev = next.clone();
    }

    pub fn summary(&self) -> ConservationSummary {
        self.summary
    }
}
