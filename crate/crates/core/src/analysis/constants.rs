//! Explicit constants of the a priori and stability estimates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::SchemeParams;

/// Upper cap on the smallness threshold `δ`.
pub const DELTA_CAP: f64 = 0.1;

/// Constants for one parameter set, data bound `c0` and horizon `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantsTable {
    pub c0: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "C_star")]
    pub c_star: f64,
    pub c1: f64,
    pub m1: f64,
    pub c2: f64,
    #[serde(rename = "C1")]
    pub big_c1: f64,
    #[serde(rename = "C2")]
    pub big_c2: f64,
    #[serde(rename = "C3")]
    pub big_c3: f64,
    #[serde(rename = "C4")]
    pub big_c4: f64,
    #[serde(rename = "C5")]
    pub big_c5: f64,
    pub delta: f64,
    pub kappa: f64,
    #[serde(rename = "cT")]
    pub c_t: f64,
    #[serde(rename = "CT")]
    pub big_c_t: f64,
}

fn finite(name: &'static str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::ConstantOverflow { formula: name })
    }
}

impl ConstantsTable {
    /// `e^{C(T)}`, which may be `+∞` even when `C(T)` is finite.
    pub fn growth_bound(&self) -> f64 {
        self.big_c_t.exp()
    }

    /// Name/value pairs in display order.
    pub fn entries(&self) -> [(&'static str, f64); 15] {
        [
            ("c0", self.c0),
            ("T", self.horizon),
            ("C_star", self.c_star),
            ("c1", self.c1),
            ("m1", self.m1),
            ("c2", self.c2),
            ("C1", self.big_c1),
            ("C2", self.big_c2),
            ("C3", self.big_c3),
            ("C4", self.big_c4),
            ("C5", self.big_c5),
            ("delta", self.delta),
            ("kappa", self.kappa),
            ("cT", self.c_t),
            ("CT", self.big_c_t),
        ]
    }

    /// Aligned two-column text table.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            out.push_str(&format!("{k:<8} {v:>24.16e}\n"));
        }
        out
    }
}

/// Evaluates the closed formulas. `δ` is `min(1/(4·C5|_{δ=1}), 0.1)` and
/// `κ = max(2(C3 + 2), 4)`; both sign constraints are then verified.
pub fn derive_constants(params: &SchemeParams, c0: f64, horizon: f64) -> Result<ConstantsTable> {
    params.validate()?;
    if !(c0.is_finite() && c0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "c0 must be positive, got {c0}"
        )));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "T must be positive, got {horizon}"
        )));
    }
    let m = params.m;
    let a = params.alpha.abs();
    let b = params.beta.abs();

    let c1 = finite("c1", 4.0 * b * (4.0 * b * c0).exp())?;
    let m1 = finite("m1", m * (c1 * c0 + 1.0))?;
    let c_star = 4.0 * (a + 4.0 * b);
    let big_c2 = 2.0 * m + 3.0 * c_star + 4.0 * b;
    let big_c1 = finite("C1", (m + c_star) * (2.0 * big_c2 * c0).exp())?;
    let c2 = finite("c2", (m1 * horizon + 1.0 + c1 * c0).exp())?;

    let c5_at = |delta: f64| 2.0 * big_c1 * (2.0 * m1 + 1.0 + 2.0 * c1 * delta);
    // C5 grows with δ, so its value at δ = 1 bounds it on (0, 1]
    let c5_bound = finite("C5", c5_at(1.0))?;
    let delta = if c5_bound > 0.0 {
        (1.0 / (4.0 * c5_bound)).min(DELTA_CAP)
    } else {
        DELTA_CAP
    };

    let big_c3 = finite("C3", 2.0 * c_star * (2.0 * big_c2 * delta).exp())?;
    let big_c4 = finite(
        "C4",
        2.0 * delta * (m1 * (1.0 + 2.0 * big_c1) + big_c1 * (1.0 + 2.0 * big_c1 * delta)) + c1,
    )?;
    let big_c5 = finite("C5", c5_at(delta))?;
    let kappa = (2.0 * (big_c3 + 2.0)).max(4.0);
    let c_t = finite("cT", c0 * c0 * c2 * (c2 + m1 * c0 + m1 * horizon + 1.0))?;
    let big_c_t = finite(
        "CT",
        (big_c3 + big_c4 * kappa) * (horizon + 1.0) + 2.0 * kappa * big_c4 * c_t,
    )?;

    if -1.0 + big_c5 * delta >= -0.5 {
        return Err(Error::Domain(format!(
            "delta {delta} violates -1 + C5*delta < -1/2 (C5 = {big_c5})"
        )));
    }
    if -kappa / 2.0 + big_c3 >= -1.0 {
        return Err(Error::Domain(format!(
            "kappa {kappa} violates -kappa/2 + C3 < -1 (C3 = {big_c3})"
        )));
    }

    Ok(ConstantsTable {
        c0,
        horizon,
        c_star,
        c1,
        m1,
        c2,
        big_c1,
        big_c2,
        big_c3,
        big_c4,
        big_c5,
        delta,
        kappa,
        c_t,
        big_c_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_zero_kills_c1() {
        let t = derive_constants(&SchemeParams::new(1.0, 2.0, 0.0).unwrap(), 0.5, 1.0).unwrap();
        assert_eq!(t.c1, 0.0);
        assert_eq!(t.m1, 1.0);
    }

    #[test]
    fn massless_beta_zero_collapses() {
        let t = derive_constants(&SchemeParams::new(0.0, 1.5, 0.0).unwrap(), 1.0, 1.0).unwrap();
        assert_eq!(t.m1, 0.0);
        assert_eq!(t.big_c2, 3.0 * t.c_star);
        assert_eq!(t.big_c2, 12.0 * 1.5);
    }

    #[test]
    fn all_zero_couplings() {
        let t = derive_constants(&SchemeParams::new(0.0, 0.0, 0.0).unwrap(), 1.0, 1.0).unwrap();
        assert_eq!(t.c1, 0.0);
        assert_eq!(t.m1, 0.0);
        assert_eq!(t.delta, DELTA_CAP);
        assert_eq!(t.kappa, 4.0);
        assert_eq!(t.c2, std::f64::consts::E);
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = SchemeParams::new(1.0, 1.0, 0.5).unwrap();
        assert!(derive_constants(&p, 0.0, 1.0).is_err());
        assert!(derive_constants(&p, 1.0, -1.0).is_err());
    }

    #[test]
    fn overflow_names_formula() {
        let p = SchemeParams::new(1.0, 1.0, 50.0).unwrap();
        match derive_constants(&p, 10.0, 1.0) {
            Err(Error::ConstantOverflow { formula }) => assert_eq!(formula, "c1"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
