//! The Lie splitting integrator.
//!
//! One macro step is exact transport by one cell (u to the right, v to the
//! left) followed by the pointwise nonlinear flow over time `τ`:
//!
//! ```text
//! du/ds = i m v + i α u |v|² + i 2β (ūv + uv̄) v
//! dv/ds = i m u + i α v |u|² + i 2β (ūv + uv̄) u
//! ```
//!
//! The flow conserves `|u|² + |v|²`. Where no closed form exists it is
//! integrated with classical RK4 substeps, optionally followed by a rescale
//! that restores the conserved total exactly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{l2_norm, Mesh, OdeOptions, SchemeParams, SpinorField};

/// Frames `t = nτ` of one run, all post nonlinear step.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub params: SchemeParams,
    pub ode: OdeOptions,
    frames: Vec<SpinorField>,
}

impl History {
    /// Checks the frame sequence invariants.
    pub fn from_frames(
        params: SchemeParams,
        ode: OdeOptions,
        frames: Vec<SpinorField>,
    ) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::InvalidArgument("history needs at least one frame".into()))?;
        let tau = first.tau();
        for (k, f) in frames.iter().enumerate() {
            if f.step() != k {
                return Err(Error::InvalidArgument(format!(
                    "frame {k} carries step index {}",
                    f.step()
                )));
            }
            if f.tau() != tau {
                return Err(Error::TauMismatch { a: tau, b: f.tau() });
            }
        }
        Ok(Self {
            params,
            ode,
            frames,
        })
    }

    pub fn frames(&self) -> &[SpinorField] {
        &self.frames
    }

    pub fn frame(&self, n: usize) -> Result<&SpinorField> {
        self.frames.get(n).ok_or(Error::InsufficientHistory {
            frames: self.frames.len(),
            needed: n,
        })
    }

    pub fn initial(&self) -> &SpinorField {
        &self.frames[0]
    }

    pub fn last(&self) -> &SpinorField {
        self.frames.last().expect("nonempty history")
    }

    pub fn tau(&self) -> f64 {
        self.frames[0].tau()
    }

    /// Number of macro steps taken.
    pub fn n_steps(&self) -> usize {
        self.frames.len() - 1
    }
}

/// Per-step diagnostics line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub n: usize,
    pub t: f64,
    pub l2: f64,
    pub interaction: f64,
}

impl StepRecord {
    pub fn of(field: &SpinorField) -> Self {
        Self {
            n: field.step(),
            t: field.time(),
            l2: l2_norm(field),
            interaction: field.interaction(),
        }
    }
}

/// Exact transport over one step. The window grows by one cell per side and
/// the step index is unchanged (this is the `n+1−` state).
pub fn transport_step(field: &SpinorField) -> SpinorField {
    let mesh = field.mesh().grown(1);
    let n = field.u().len();
    let zero = Complex64::new(0.0, 0.0);
    // out(j) = u(j − 1) on [j_min − 1, j_max + 1]: two leading zeros
    let mut u = Vec::with_capacity(n + 2);
    u.push(zero);
    u.push(zero);
    u.extend_from_slice(field.u());
    let mut v = Vec::with_capacity(n + 2);
    v.extend_from_slice(field.v());
    v.push(zero);
    v.push(zero);
    SpinorField::from_parts(mesh, u, v, field.step())
}

/// Cells integrated together by the batched kernel.
const LANES: usize = 8;

/// Real coordinates `[Re u, Im u, Re v, Im v]` of `L` independent cells.
type Lanes<const L: usize> = [[f64; L]; 4];

/// The vector field on every lane. `g4 = 4β`, so `g4 · (Re u Re v + Im u Im v)`
/// is the real factor `2β(ūv + uv̄)`.
#[inline(always)]
fn field_lanes<const L: usize>(y: &Lanes<L>, m: f64, alpha: f64, g4: f64) -> Lanes<L> {
    let mut k = [[0.0; L]; 4];
    for l in 0..L {
        let (ur, ui, vr, vi) = (y[0][l], y[1][l], y[2][l], y[3][l]);
        let uu = ur * ur + ui * ui;
        let vv = vr * vr + vi * vi;
        let g = g4 * (ur * vr + ui * vi);
        let (au, av) = (alpha * vv, alpha * uu);
        let ar = m * vr + ur * au + vr * g;
        let ai = m * vi + ui * au + vi * g;
        let br = m * ur + vr * av + ur * g;
        let bi = m * ui + vi * av + ui * g;
        // multiply by i
        k[0][l] = -ai;
        k[1][l] = ar;
        k[2][l] = -bi;
        k[3][l] = br;
    }
    k
}

#[inline(always)]
fn offset<const L: usize>(y: &Lanes<L>, k: &Lanes<L>, h: f64) -> Lanes<L> {
    let mut out = *y;
    for c in 0..4 {
        for l in 0..L {
            out[c][l] += k[c][l] * h;
        }
    }
    out
}

/// `k` RK4 substeps of width `h` on every lane, each optionally followed by
/// a rescale to the lane's conserved `total`. Lanes never interact, so any
/// `L` gives bitwise the same per-cell result.
#[inline(always)]
fn flow_lanes<const L: usize>(
    y: &mut Lanes<L>,
    total: &[f64; L],
    p: &SchemeParams,
    h: f64,
    k: usize,
    project: bool,
) {
    let (m, alpha, g4) = (p.m, p.alpha, 2.0 * p.beta * 2.0);
    let half = 0.5 * h;
    let sixth = h / 6.0;
    for _ in 0..k {
        let k1 = field_lanes(y, m, alpha, g4);
        let k2 = field_lanes(&offset(y, &k1, half), m, alpha, g4);
        let k3 = field_lanes(&offset(y, &k2, half), m, alpha, g4);
        let k4 = field_lanes(&offset(y, &k3, h), m, alpha, g4);
        for c in 0..4 {
            for l in 0..L {
                y[c][l] += (k1[c][l] + (k2[c][l] + k3[c][l]) * 2.0 + k4[c][l]) * sixth;
            }
        }
        if project {
            for l in 0..L {
                let now = lane_total(y, l);
                // zero is a fixed point; scaling by 1 keeps it bit-exact
                let f = if now > 0.0 {
                    (total[l] / now).sqrt()
                } else {
                    1.0
                };
                for comp in y.iter_mut() {
                    comp[l] *= f;
                }
            }
        }
    }
}

/// Removes the rounding the scaling leaves in the recomputed density by
/// nudging the largest component, to first order in the defect.
fn polish_lanes<const L: usize>(y: &mut Lanes<L>, total: &[f64; L]) {
    for l in 0..L {
        for _ in 0..2 {
            let now = lane_total(y, l);
            if now == total[l] || !(now > 0.0 && now.is_finite()) {
                break;
            }
            let c = (1..4).fold(0, |b, c| if y[c][l].abs() > y[b][l].abs() { c } else { b });
            y[c][l] += (total[l] - now) / (2.0 * y[c][l]);
        }
    }
}

#[inline(always)]
fn lane_total<const L: usize>(y: &Lanes<L>, l: usize) -> f64 {
    (y[0][l] * y[0][l] + y[1][l] * y[1][l]) + (y[2][l] * y[2][l] + y[3][l] * y[3][l])
}

/// Whether `nonlinear_flow` takes an exact shortcut for these parameters.
fn uses_shortcut(params: &SchemeParams, ode: &OdeOptions) -> bool {
    params.is_zero()
        || (ode.closed_form_if_available
            && params.beta == 0.0
            && (params.alpha == 0.0 || params.m == 0.0))
}

/// Approximates the nonlinear flow over time `s` from `(u0, v0)`.
pub fn nonlinear_flow(
    u0: Complex64,
    v0: Complex64,
    params: &SchemeParams,
    s: f64,
    ode: &OdeOptions,
) -> Result<(Complex64, Complex64)> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "flow time must be >= 0, got {s}"
        )));
    }
    if s == 0.0 || params.is_zero() || (u0 == Complex64::new(0.0, 0.0) && v0 == u0) {
        return Ok((u0, v0));
    }
    let i = Complex64::new(0.0, 1.0);
    if ode.closed_form_if_available && params.beta == 0.0 {
        if params.alpha == 0.0 {
            // linear mass rotation
            let (sn, cs) = (params.m * s).sin_cos();
            return Ok((u0 * cs + i * v0 * sn, v0 * cs + i * u0 * sn));
        }
        if params.m == 0.0 {
            // moduli are constant, so each component picks up a fixed phase
            let pu = Complex64::from_polar(1.0, params.alpha * v0.norm_sqr() * s);
            let pv = Complex64::from_polar(1.0, params.alpha * u0.norm_sqr() * s);
            return Ok((u0 * pu, v0 * pv));
        }
    }
    let k = ode.substeps_per_tau.max(1);
    let h = s / k as f64;
    let mut y: Lanes<1> = [[u0.re], [u0.im], [v0.re], [v0.im]];
    let total = [lane_total(&y, 0)];
    for sub in 0..k {
        flow_lanes(&mut y, &total, params, h, 1, ode.project_norm);
        if y.iter().any(|c| !c[0].is_finite()) {
            return Err(Error::FlowDiverged { substep: sub });
        }
    }
    if ode.project_norm {
        polish_lanes(&mut y, &total);
    }
    Ok((
        Complex64::new(y[0][0], y[1][0]),
        Complex64::new(y[2][0], y[3][0]),
    ))
}

/// Reference RK4 integration of the nonlinear flow in real coordinates,
/// with `substeps` uniform steps and no projection.
pub fn oracle_flow(
    u0: Complex64,
    v0: Complex64,
    params: &SchemeParams,
    s: f64,
    substeps: usize,
) -> Result<(Complex64, Complex64)> {
    if substeps == 0 {
        return Err(Error::InvalidArgument(
            "oracle needs at least one substep".into(),
        ));
    }
    let (m, al, be) = (params.m, params.alpha, params.beta);
    // y = [Re u, Im u, Re v, Im v]
    let rhs = |y: [f64; 4]| -> [f64; 4] {
        let [a, b, c, d] = y;
        let uu = a * a + b * b;
        let vv = c * c + d * d;
        let w = 4.0 * be * (a * c + b * d);
        // i·(p + iq) = −q + ip
        let pu = m * c + al * vv * a + w * c;
        let qu = m * d + al * vv * b + w * d;
        let pv = m * a + al * uu * c + w * a;
        let qv = m * b + al * uu * d + w * b;
        [-qu, pu, -qv, pv]
    };
    let axpy = |y: [f64; 4], k: [f64; 4], h: f64| -> [f64; 4] {
        [
            y[0] + h * k[0],
            y[1] + h * k[1],
            y[2] + h * k[2],
            y[3] + h * k[3],
        ]
    };
    let h = s / substeps as f64;
    let mut y = [u0.re, u0.im, v0.re, v0.im];
    for sub in 0..substeps {
        let k1 = rhs(y);
        let k2 = rhs(axpy(y, k1, h / 2.0));
        let k3 = rhs(axpy(y, k2, h / 2.0));
        let k4 = rhs(axpy(y, k3, h));
        for c in 0..4 {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        if y.iter().any(|x| !x.is_finite()) {
            return Err(Error::FlowDiverged { substep: sub });
        }
    }
    Ok((Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3])))
}

/// Cells per scheduling block of [`nonlinear_step`].
const BLOCK: usize = 256;

#[cfg(feature = "parallel")]
const PAR_MIN_CELLS: usize = 2 * BLOCK;

type Block = (Vec<Complex64>, Vec<Complex64>);

/// The flow over `s` on one contiguous block of cells starting at `j0`.
// lanes are indexed across several parallel arrays
#[allow(clippy::needless_range_loop)]
fn flow_block(
    u: &[Complex64],
    v: &[Complex64],
    j0: i64,
    params: &SchemeParams,
    s: f64,
    ode: &OdeOptions,
) -> Result<Block> {
    let n = u.len();
    let mut out_u = Vec::with_capacity(n);
    let mut out_v = Vec::with_capacity(n);
    let scalar =
        |i: usize| nonlinear_flow(u[i], v[i], params, s, ode).map_err(|e| e.at_cell(j0 + i as i64));
    let batched = !uses_shortcut(params, ode) && s > 0.0 && s.is_finite();
    let full = if batched { n - n % LANES } else { 0 };
    let k = ode.substeps_per_tau.max(1);
    let h = s / k as f64;
    for base in (0..full).step_by(LANES) {
        let mut y: Lanes<LANES> = [[0.0; LANES]; 4];
        for l in 0..LANES {
            let (a, b) = (u[base + l], v[base + l]);
            y[0][l] = a.re;
            y[1][l] = a.im;
            y[2][l] = b.re;
            y[3][l] = b.im;
        }
        let mut total = [0.0; LANES];
        for (l, t) in total.iter_mut().enumerate() {
            *t = lane_total(&y, l);
        }
        flow_lanes(&mut y, &total, params, h, k, ode.project_norm);
        if ode.project_norm {
            polish_lanes(&mut y, &total);
        }
        for l in 0..LANES {
            let i = base + l;
            let zero = Complex64::new(0.0, 0.0);
            if u[i] == zero && v[i] == zero {
                out_u.push(u[i]);
                out_v.push(v[i]);
            } else if (0..4).all(|c| y[c][l].is_finite()) {
                out_u.push(Complex64::new(y[0][l], y[1][l]));
                out_v.push(Complex64::new(y[2][l], y[3][l]));
            } else {
                // rerun alone to report the substep
                let (a, b) = scalar(i)?;
                out_u.push(a);
                out_v.push(b);
            }
        }
    }
    for i in full..n {
        let (a, b) = scalar(i)?;
        out_u.push(a);
        out_v.push(b);
    }
    Ok((out_u, out_v))
}

/// Applies the flow over `τ` to every cell independently; step index + 1.
/// Cells are integrated in fixed blocks, so the result does not depend on
/// the thread count.
pub fn nonlinear_step(
    field: &SpinorField,
    params: &SchemeParams,
    ode: &OdeOptions,
) -> Result<SpinorField> {
    let tau = field.tau();
    let mesh: Mesh = *field.mesh();
    let (u, v) = (field.u(), field.v());
    let n_blocks = u.len().div_ceil(BLOCK);
    let block = |b: usize| {
        let r = b * BLOCK..((b + 1) * BLOCK).min(u.len());
        flow_block(
            &u[r.clone()],
            &v[r.clone()],
            mesh.j_min() + r.start as i64,
            params,
            tau,
            ode,
        )
    };
    let blocks: Vec<Result<Block>> = {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            if u.len() >= PAR_MIN_CELLS {
                (0..n_blocks).into_par_iter().map(block).collect()
            } else {
                (0..n_blocks).map(block).collect()
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            (0..n_blocks).map(block).collect()
        }
    };
    let mut out_u = Vec::with_capacity(u.len());
    let mut out_v = Vec::with_capacity(u.len());
    for b in blocks {
        let (bu, bv) = b?;
        out_u.extend(bu);
        out_v.extend(bv);
    }
    Ok(SpinorField::from_parts(
        mesh,
        out_u,
        out_v,
        field.step() + 1,
    ))
}

/// One macro step: transport, then the nonlinear flow.
pub fn split_step(
    field: &SpinorField,
    params: &SchemeParams,
    ode: &OdeOptions,
) -> Result<SpinorField> {
    nonlinear_step(&transport_step(field), params, ode)
}

/// Streams frames `0..=n_steps` to `visit` without keeping them.
pub fn evolve<F>(
    initial: &SpinorField,
    params: &SchemeParams,
    n_steps: usize,
    ode: &OdeOptions,
    mut visit: F,
) -> Result<SpinorField>
where
    F: FnMut(&SpinorField) -> Result<()>,
{
    params.validate()?;
    ode.validate()?;
    let mut current = initial.clone().with_step(0);
    visit(&current)?;
    for n in 0..n_steps {
        current = split_step(&current, params, ode).map_err(|e| e.at_step(n))?;
        visit(&current)?;
    }
    Ok(current)
}

/// Runs `n_steps` macro steps, keeping every frame and sending one
/// [`StepRecord`] per frame (including the initial one) to `sink`.
pub fn run(
    initial: &SpinorField,
    params: &SchemeParams,
    n_steps: usize,
    ode: &OdeOptions,
    sink: &mut dyn FnMut(&StepRecord),
) -> Result<History> {
    let mut frames = Vec::with_capacity(n_steps + 1);
    evolve(initial, params, n_steps, ode, |f| {
        sink(&StepRecord::of(f));
        frames.push(f.clone());
        Ok(())
    })?;
    Ok(History {
        params: *params,
        ode: *ode,
        frames,
    })
}

/// [`run`] without diagnostics.
pub fn run_quiet(
    initial: &SpinorField,
    params: &SchemeParams,
    n_steps: usize,
    ode: &OdeOptions,
) -> Result<History> {
    run(initial, params, n_steps, ode, &mut |_| {})
}
