//! Discrete characteristic triangles and the per-run a priori estimates:
//! monotone row mass, lateral-edge flux, pointwise bounds and the
//! interaction sum.

use serde::{Deserialize, Serialize};

use super::constants::ConstantsTable;
use super::report::{slack, Report};
use crate::error::{Error, Result};
use crate::field::SpinorField;
use crate::scheme::History;

/// The triangle with apex `(j1, n1)` and base level `n0`; its row at level
/// `n` spans cells `j1 − (n1 − n) ..= j1 + (n1 − n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriangleSpec {
    pub j1: i64,
    pub n1: usize,
    pub n0: usize,
}

impl TriangleSpec {
    pub fn new(j1: i64, n1: usize, n0: usize) -> Result<Self> {
        if n0 > n1 {
            return Err(Error::InvalidArgument(format!(
                "n0 = {n0} exceeds n1 = {n1}"
            )));
        }
        Ok(Self { j1, n1, n0 })
    }

    /// Inclusive cell range of the row at level `n`.
    pub fn row(&self, n: usize) -> (i64, i64) {
        let half = self.n1 as i64 - n as i64;
        (self.j1 - half, self.j1 + half)
    }

    pub fn contains_level(&self, n: usize) -> bool {
        n >= self.n0 && n <= self.n1
    }

    /// Smallest triangle based at level 0 whose rows contain every frame
    /// window of a run of `n_steps` steps started on cells `[lo, hi]`.
    pub fn covering(lo: i64, hi: i64, n_steps: usize) -> Self {
        let j1 = lo + (hi - lo) / 2;
        let reach = (j1 - lo).max(hi - j1) as usize;
        Self {
            j1,
            n1: reach + 2 * n_steps,
            n0: 0,
        }
    }

    fn check_level(&self, n: usize) -> Result<()> {
        if !self.contains_level(n) {
            return Err(Error::StepOutOfRange {
                n: n as i64,
                lo: self.n0 as i64,
                hi: self.n1 as i64,
            });
        }
        Ok(())
    }
}

/// Row sum `Σ (|u_j|² + |v_j|²)` over the triangle row at the field's level
/// (not scaled by `τ`).
pub fn triangle_row_mass(field: &SpinorField, tri: &TriangleSpec) -> Result<f64> {
    tri.check_level(field.step())?;
    let (lo, hi) = tri.row(field.step());
    Ok(row_mass(field, lo, hi))
}

pub(crate) fn row_mass(field: &SpinorField, lo: i64, hi: i64) -> f64 {
    let mut sum = 0.0;
    for j in lo..=hi {
        sum += field.density_at(j);
    }
    sum
}

/// Verifies monotone row mass at every level of the triangle and the
/// lateral-edge bound, both against the base row mass.
pub fn check_triangle_estimates(history: &History, tri: &TriangleSpec) -> Result<Report> {
    history.frame(tri.n1)?;
    let base = triangle_row_mass(history.frame(tri.n0)?, tri)?;
    let tol = slack(base);
    let mut report = Report::new();
    for n in tri.n0..=tri.n1 {
        let mass = triangle_row_mass(history.frame(n)?, tri)?;
        report.check("triangle_row_mass", n as i64, mass, base, tol);
    }
    // u leaves through the right edge, v through the left edge
    let mut edge = 0.0;
    for p in 0..=(tri.n1 - tri.n0) {
        let f = history.frame(tri.n1 - p)?;
        edge += f.u_at(tri.j1 + p as i64).norm_sqr();
        edge += f.v_at(tri.j1 - p as i64).norm_sqr();
    }
    report.check("triangle_lateral_edge", tri.n1 as i64, edge, base, tol);
    report.metric("base_mass", base);
    Ok(report)
}

/// Checks `|u_j^n|² ≤ c2(|u_{j−n}^0|² + m1 c0)` and the mirrored bound for
/// `v` at every cell of every frame; one record per level holds the worst
/// cell. The metric `max_ratio` is the largest `lhs/rhs` seen.
pub fn pointwise_bound_report(history: &History, constants: &ConstantsTable) -> Report {
    let mut report = Report::new();
    let init = history.initial();
    let floor = constants.m1 * constants.c0;
    let mut max_ratio: f64 = 0.0;
    let horizon = (constants.horizon / history.tau()).floor() as usize + 1;
    if history.n_steps() > horizon {
        report.note(format!(
            "history has {} steps, beyond the horizon floor(T/tau)+1 = {horizon}",
            history.n_steps()
        ));
    }
    for f in history.frames() {
        let n = f.step() as i64;
        let mut worst = [(f64::INFINITY, 0.0, 0.0); 2];
        for (i, (u, v)) in f.u().iter().zip(f.v()).enumerate() {
            let j = f.mesh().j_min() + i as i64;
            let pairs = [
                (
                    u.norm_sqr(),
                    constants.c2 * (init.u_at(j - n).norm_sqr() + floor),
                ),
                (
                    v.norm_sqr(),
                    constants.c2 * (init.v_at(j + n).norm_sqr() + floor),
                ),
            ];
            for (k, (lhs, rhs)) in pairs.into_iter().enumerate() {
                let margin = rhs + slack(rhs) - lhs;
                if margin < worst[k].0 {
                    worst[k] = (margin, lhs, rhs);
                }
                if lhs > 0.0 {
                    max_ratio = max_ratio.max(lhs / rhs);
                }
            }
        }
        for (k, name) in ["pointwise_u", "pointwise_v"].into_iter().enumerate() {
            let (_, lhs, rhs) = worst[k];
            report.check(name, n, lhs, rhs, slack(rhs));
        }
    }
    report.metric("max_ratio", max_ratio);
    report
}

/// `Σ_{n=n0}^{n1} Σ_j |u_j^n|² |v_j^n|² τ²`.
pub fn interaction_sum(history: &History, n0: usize, n1: usize) -> Result<f64> {
    if n0 > n1 {
        return Err(Error::InvalidArgument(format!(
            "n0 = {n0} exceeds n1 = {n1}"
        )));
    }
    history.frame(n1)?;
    let mut sum = 0.0;
    for f in &history.frames()[n0..=n1] {
        sum += f.interaction();
    }
    Ok(sum)
}

/// The interaction sum against its bound `c(T)`.
pub fn check_interaction_sum(
    history: &History,
    n0: usize,
    n1: usize,
    constants: &ConstantsTable,
) -> Result<Report> {
    let total = interaction_sum(history, n0, n1)?;
    let mut report = Report::new();
    report.check(
        "interaction_sum",
        n1 as i64,
        total,
        constants.c_t,
        slack(constants.c_t),
    );
    Ok(report)
}
