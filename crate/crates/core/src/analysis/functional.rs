//! Difference functionals of two runs on a characteristic triangle and the
//! stability inequality of the Glimm-type functional `F = Lτ + κQτ²`.

use serde::Serialize;

use super::constants::ConstantsTable;
use super::report::{slack, Report};
use super::triangle::TriangleSpec;
use crate::error::{Error, Result};
use crate::field::SpinorField;
use crate::scheme::{transport_step, History};

/// Functional values on one triangle row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FunctionalRecord {
    pub n: usize,
    pub s_a: f64,
    pub s_b: f64,
    pub q_a: f64,
    pub q_b: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "F")]
    pub f: f64,
}

/// Evaluates every functional on cells `lo..=hi` of two fields.
///
/// The Bony sum `Q = Σ_{j<k} |U_j|² W_k + |V_k|² P_j` with
/// `W = |v|² + |ṽ|²` and `P = |u|² + |ũ|²` is accumulated with running
/// prefix sums of `|U|²` and `P`.
pub fn row_functionals(
    a: &SpinorField,
    b: &SpinorField,
    lo: i64,
    hi: i64,
    kappa: f64,
) -> FunctionalRecord {
    let tau = a.tau();
    let mut rec = FunctionalRecord {
        n: a.step(),
        s_a: 0.0,
        s_b: 0.0,
        q_a: 0.0,
        q_b: 0.0,
        l: 0.0,
        d: 0.0,
        q: 0.0,
        f: 0.0,
    };
    let mut prefix_uu = 0.0;
    let mut prefix_p = 0.0;
    for j in lo..=hi {
        let (ua, va, ub, vb) = (a.u_at(j), a.v_at(j), b.u_at(j), b.v_at(j));
        let (uua, vva, uub, vvb) = (ua.norm_sqr(), va.norm_sqr(), ub.norm_sqr(), vb.norm_sqr());
        let big_u = (ua - ub).norm_sqr();
        let big_v = (va - vb).norm_sqr();
        let w = vva + vvb;
        let p = uua + uub;
        rec.s_a += uua + vva;
        rec.s_b += uub + vvb;
        rec.q_a += uua * vva;
        rec.q_b += uub * vvb;
        rec.l += big_u + big_v;
        rec.d += big_u * w + big_v * p;
        rec.q += prefix_uu * w + big_v * prefix_p;
        prefix_uu += big_u;
        prefix_p += p;
    }
    rec.f = rec.l * tau + kappa * rec.q * tau * tau;
    rec
}

fn check_pair(a: &History, b: &History) -> Result<()> {
    if a.tau() != b.tau() {
        return Err(Error::TauMismatch {
            a: a.tau(),
            b: b.tau(),
        });
    }
    Ok(())
}

/// Functionals of `a − b` on the triangle row at level `n`.
pub fn difference_functionals(
    a: &History,
    b: &History,
    tri: &TriangleSpec,
    n: usize,
    kappa: f64,
) -> Result<FunctionalRecord> {
    check_pair(a, b)?;
    if !tri.contains_level(n) {
        return Err(Error::StepOutOfRange {
            n: n as i64,
            lo: tri.n0 as i64,
            hi: tri.n1 as i64,
        });
    }
    let (lo, hi) = tri.row(n);
    Ok(row_functionals(a.frame(n)?, b.frame(n)?, lo, hi, kappa))
}

/// Functional records for every level `n0..=n1`.
pub fn functional_sweep(
    a: &History,
    b: &History,
    tri: &TriangleSpec,
    kappa: f64,
) -> Result<Vec<FunctionalRecord>> {
    (tri.n0..=tri.n1)
        .map(|n| difference_functionals(a, b, tri, n, kappa))
        .collect()
}

/// `D(n+1−)`: the quartic row sum of the transported (pre nonlinear) state
/// on the row of level `n + 1`.
pub fn transported_dissipation(a: &SpinorField, b: &SpinorField, tri: &TriangleSpec) -> f64 {
    let (lo, hi) = tri.row(a.step() + 1);
    row_functionals(&transport_step(a), &transport_step(b), lo, hi, 0.0).d
}

/// Checks the smallness hypotheses, then the one-step growth inequality
///
/// ```text
/// F(n+1) − F(n) ≤ [(C3 + κC4)τ + κC4(q + q̃)τ²] F(n) τ − D(n+1−) τ²
/// ```
///
/// for every `n0 ≤ n < n1`, and the endpoint bounds
/// `F(n1) ≤ exp((C3+κC4)(n1−n0)τ + κC4 Σ(q+q̃)τ²) F(n0) ≤ e^{C(T)} F(n0)`.
/// All slacks are `1e-10 · (1 + F(n0))`.
///
/// When a hypothesis fails the report holds only the hypothesis records.
pub fn check_glimm_bound(
    a: &History,
    b: &History,
    tri: &TriangleSpec,
    constants: &ConstantsTable,
) -> Result<Report> {
    check_pair(a, b)?;
    a.frame(tri.n1)?;
    b.frame(tri.n1)?;
    let tau = a.tau();
    let kappa = constants.kappa;
    let mut report = Report::new();

    let base = difference_functionals(a, b, tri, tri.n0, kappa)?;
    let ok_a = report.check(
        "glimm_hypothesis_a",
        tri.n0 as i64,
        base.s_a * tau,
        constants.delta,
        0.0,
    );
    let ok_b = report.check(
        "glimm_hypothesis_b",
        tri.n0 as i64,
        base.s_b * tau,
        constants.delta,
        0.0,
    );
    if !(ok_a && ok_b) {
        report.note("smallness hypothesis s(n0)*tau <= delta failed; inequalities not evaluated");
        return Ok(report);
    }

    let tol = slack(base.f);
    let rate = (constants.big_c3 + kappa * constants.big_c4) * tau;
    let mut current = base;
    let mut exponent = 0.0;
    for n in tri.n0..tri.n1 {
        let next = difference_functionals(a, b, tri, n + 1, kappa)?;
        let d_minus = transported_dissipation(a.frame(n)?, b.frame(n)?, tri);
        let q_term = (current.q_a + current.q_b) * tau * tau;
        let growth = (rate + kappa * constants.big_c4 * q_term) * current.f * tau;
        report.check(
            "glimm_step",
            n as i64,
            next.f - current.f,
            growth - d_minus * tau * tau,
            tol,
        );
        exponent += rate + kappa * constants.big_c4 * q_term;
        current = next;
    }
    report.check(
        "glimm_endpoint_sharp",
        tri.n1 as i64,
        current.f,
        exponent.exp() * base.f,
        tol,
    );
    report.check(
        "glimm_endpoint",
        tri.n1 as i64,
        current.f,
        constants.growth_bound() * base.f,
        tol,
    );
    report.metric("F_n0", base.f);
    report.metric("F_n1", current.f);
    Ok(report)
}
