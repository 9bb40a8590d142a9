//! End-to-end studies: mesh-refinement self-convergence, perturbation
//! stability against the functional bound, and oracle benchmarks that
//! isolate the error of the sub-stepped nonlinear flow.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{derive_constants, row_functionals, slack, Report};
use crate::error::{Error, Result};
use crate::field::{
    l2_distance, l2_distance_sq, restrict_to_coarse, sample_initial_data, InitialProfile, Mesh,
    OdeOptions, SamplingMode, SchemeParams, SpinorField,
};
use crate::scheme::{evolve, nonlinear_flow, oracle_flow, run_quiet, History, StepRecord};

/// Default cap on the final window length of any single run.
pub const DEFAULT_CELL_CAP: usize = 1 << 24;

/// Substeps of the reference flow used by the benchmark.
pub const BENCH_ORACLE_SUBSTEPS: usize = 100_000;

/// Substeps of the reference flow used by the special-case suite.
pub const SUITE_ORACLE_SUBSTEPS: usize = 10_000;

/// Number of whole steps in `[0, T]`, rejecting a horizon that is not a
/// multiple of `tau` beyond rounding noise.
pub fn whole_steps(horizon: f64, tau: f64) -> Result<usize> {
    if !(tau.is_finite() && tau > 0.0) || !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need tau > 0 and T >= 0, got tau = {tau}, T = {horizon}"
        )));
    }
    let r = horizon / tau;
    let n = r.round();
    if (r - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::InvalidArgument(format!(
            "T = {horizon} is not a whole number of steps of {tau}"
        )));
    }
    Ok(n as usize)
}

fn check_cap(mesh: &Mesh, n_steps: usize, cap: usize) -> Result<()> {
    let cells = mesh.len() + 2 * n_steps;
    if cells > cap {
        return Err(Error::CellCap { cells, cap });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub k: u32,
    pub tau: f64,
    /// `max_t ‖R(level k) − level k−1‖` over the coarse grid times.
    pub dist: f64,
    /// `dist_k / dist_{k−1}`; absent on the first row.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// `k,tau,dist,ratio` with an empty ratio on the first row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,tau,dist,ratio\n");
        for r in &self.rows {
            let ratio = r.ratio.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", r.k, r.tau, r.dist, ratio);
        }
        out
    }

    /// Strict decrease of the distance column, plus the artifact ratio
    /// gate `ratio_k ≤ max_ratio` for every row with `k ≥ from_k`.
    pub fn gate_report(&self, max_ratio: f64, from_k: u32) -> Report {
        let mut r = Report::new();
        for w in self.rows.windows(2) {
            r.check_strict(
                "convergence_decreasing",
                w[1].k as i64,
                w[1].dist,
                w[0].dist,
            );
        }
        for row in self.rows.iter().filter(|x| x.k >= from_k) {
            if let Some(ratio) = row.ratio {
                r.check(
                    "convergence_ratio_gate",
                    row.k as i64,
                    ratio,
                    max_ratio,
                    0.0,
                );
            }
        }
        r.note(format!(
            "ratio gate <= {max_ratio} for k >= {from_k} is an artifact property gate encoding \
             observed first-order behaviour; convergence is proved without a rate"
        ));
        r
    }
}

/// Knobs of [`convergence_study`] beyond the physical setup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceOptions {
    /// Level `k` uses `τ_k = tau0 · 2^{−k}`.
    pub tau0: f64,
    pub sampling: SamplingMode,
    pub cell_cap: usize,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self {
            tau0: 1.0,
            sampling: SamplingMode::PointSample,
            cell_cap: DEFAULT_CELL_CAP,
        }
    }
}

/// Initial windows nest across levels: level `k` covers exactly the cells
/// refining the level-`k_min` window.
fn level_mesh(
    profile: &InitialProfile,
    opts: &ConvergenceOptions,
    k_min: u32,
    k: u32,
) -> Result<Mesh> {
    let base = profile.default_mesh(opts.tau0 / f64::powi(2.0, k_min as i32))?;
    let f = 1i64 << (k - k_min);
    Mesh::new(
        opts.tau0 / f64::powi(2.0, k as i32),
        base.j_min() * f,
        (base.j_max() + 1) * f - 1,
    )
}

/// Self-convergence ladder over levels `k_min..=k_max`. Each row `k` compares
/// level `k`, restricted onto the level `k−1` mesh, with level `k−1` at every
/// shared grid time `≤ T`. `sink(k, record)` receives every level's per-step
/// diagnostics.
#[allow(clippy::too_many_arguments)]
pub fn convergence_study(
    profile: &InitialProfile,
    params: &SchemeParams,
    horizon: f64,
    k_min: u32,
    k_max: u32,
    ode: &OdeOptions,
    opts: &ConvergenceOptions,
    sink: &mut dyn FnMut(u32, &StepRecord),
) -> Result<ConvergenceTable> {
    if k_max <= k_min {
        return Err(Error::InvalidArgument(format!(
            "need k_max > k_min, got {k_min}..{k_max}"
        )));
    }
    if k_max > 40 {
        return Err(Error::InvalidArgument(format!(
            "k_max = {k_max} is too deep"
        )));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "T must be positive, got {horizon}"
        )));
    }
    profile.validate()?;
    for k in k_min..=k_max {
        let mesh = level_mesh(profile, opts, k_min, k)?;
        check_cap(
            &mesh,
            whole_steps(horizon, mesh.tau()).unwrap_or(0),
            opts.cell_cap,
        )?;
    }

    let mut table = ConvergenceTable::default();
    // frames of the previous level at every one of its grid times
    let mut coarse: Vec<SpinorField> = Vec::new();
    for k in k_min..=k_max {
        let mesh = level_mesh(profile, opts, k_min, k)?;
        let tau = mesh.tau();
        let n_steps = whole_steps(horizon, tau)?;
        let init = sample_initial_data(profile, &mesh, opts.sampling)?;
        let keep = k < k_max;
        let mut frames = Vec::with_capacity(if keep { n_steps + 1 } else { 0 });
        let mut dist: f64 = 0.0;
        let have_coarse = !coarse.is_empty();
        evolve(&init, params, n_steps, ode, |f| {
            sink(k, &StepRecord::of(f));
            if have_coarse && f.step() % 2 == 0 {
                let c = &coarse[f.step() / 2];
                let r = restrict_to_coarse(&f.aligned(2)?, 2)?;
                dist = dist.max(l2_distance(&r, c, 0)?);
            }
            if keep {
                frames.push(f.clone());
            }
            Ok(())
        })?;
        if have_coarse {
            let ratio = table.rows.last().map(|r: &ConvergenceRow| dist / r.dist);
            table.rows.push(ConvergenceRow {
                k,
                tau,
                dist,
                ratio,
            });
        }
        coarse = frames;
    }
    Ok(table)
}

/// Inputs of a perturbation study.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSetup<'a> {
    pub profile: &'a InitialProfile,
    pub perturbation: &'a InitialProfile,
    pub scale: f64,
    pub params: SchemeParams,
    pub horizon: f64,
    pub tau: f64,
    pub ode: OdeOptions,
    pub sampling: SamplingMode,
}

/// Base data `a` and perturbed data `b = a + scale · p` on one shared mesh.
pub fn perturbed_pair(setup: &PerturbationSetup) -> Result<(SpinorField, SpinorField)> {
    if !(setup.scale.is_finite() && setup.scale >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "scale must be nonnegative, got {}",
            setup.scale
        )));
    }
    let m1 = setup.profile.default_mesh(setup.tau)?;
    let m2 = setup.perturbation.default_mesh(setup.tau)?;
    let mesh = m1.union(&m2);
    let a = sample_initial_data(setup.profile, &mesh, setup.sampling)?;
    let p = sample_initial_data(setup.perturbation, &mesh, setup.sampling)?;
    let b = a.add_scaled(&p, setup.scale)?;
    Ok((a, b))
}

/// Runs base and perturbed data and compares `max_n ‖a_n − b_n‖²` with
/// `e^{C(T)} F(0)`, where `F(0) = L(0)τ + κQ(0)τ²` on the base row of a
/// triangle covering both runs through `T`. The constants use `T` and
/// `c0` = the larger initial mass. When the smallness hypotheses fail
/// only the hypothesis records are checked.
pub fn perturbation_study(setup: &PerturbationSetup) -> Result<(Report, History, History)> {
    let n_steps = whole_steps(setup.horizon, setup.tau)?;
    let (a0, b0) = perturbed_pair(setup)?;
    let ha = run_quiet(&a0, &setup.params, n_steps, &setup.ode)?;
    let hb = run_quiet(&b0, &setup.params, n_steps, &setup.ode)?;

    let mut report = Report::new();
    let mut sup_sq: f64 = 0.0;
    let mut first_sq = 0.0;
    let mut min_sq = f64::INFINITY;
    for (n, (fa, fb)) in ha.frames().iter().zip(hb.frames()).enumerate() {
        let d = l2_distance_sq(fa, fb, 0)?;
        if n == 0 {
            first_sq = d;
        }
        sup_sq = sup_sq.max(d);
        min_sq = min_sq.min(d);
    }
    report.metric("initial_sq_distance", first_sq);
    report.metric("max_sq_distance", sup_sq);
    report.metric("min_sq_distance", min_sq);
    report.metric("max_distance", sup_sq.sqrt());

    let c0 = a0.mass().max(b0.mass());
    if c0 == 0.0 || setup.horizon == 0.0 {
        report.note("zero data or zero horizon; bound not evaluated");
        report.check(
            "perturbation_bound",
            n_steps as i64,
            sup_sq,
            first_sq,
            slack(first_sq),
        );
        return Ok((report, ha, hb));
    }
    let k = derive_constants(&setup.params, c0, setup.horizon)?;
    let tri =
        crate::analysis::TriangleSpec::covering(a0.mesh().j_min(), a0.mesh().j_max(), n_steps);
    let (lo, hi) = tri.row(0);
    let base = row_functionals(&a0, &b0, lo, hi, k.kappa);
    let tau = setup.tau;
    let ok_a = report.check("glimm_hypothesis_a", 0, base.s_a * tau, k.delta, 0.0);
    let ok_b = report.check("glimm_hypothesis_b", 0, base.s_b * tau, k.delta, 0.0);
    report.metric("F_0", base.f);
    report.metric("growth_bound", k.growth_bound());
    if !(ok_a && ok_b) {
        report.note("smallness hypothesis s(0)*tau <= delta failed; bound not evaluated");
        return Ok((report, ha, hb));
    }
    let bound = k.growth_bound() * base.f;
    report.check(
        "perturbation_bound",
        n_steps as i64,
        sup_sq,
        bound,
        slack(base.f),
    );
    Ok((report, ha, hb))
}

/// Error of the splitting on spatially constant data: the maximum over
/// cells `|j| ≤ 4` of the component error against the reference flow over
/// the whole horizon. Transport leaves constants invariant away from the
/// window edges, so only the sub-stepped flow contributes.
pub fn homogeneous_benchmark(
    params: &SchemeParams,
    horizon: f64,
    tau: f64,
    ode: &OdeOptions,
    state: (Complex64, Complex64),
) -> Result<f64> {
    let n = whole_steps(horizon, tau)?;
    let half = n as i64 + 4;
    let mesh = Mesh::new(tau, -half, half)?;
    let len = mesh.len();
    let init = SpinorField::new(mesh, vec![state.0; len], vec![state.1; len], 0)?;
    let last = evolve(&init, params, n, ode, |_| Ok(()))?;
    let (ur, vr) = oracle_flow(state.0, state.1, params, horizon, BENCH_ORACLE_SUBSTEPS)?;
    let mut err: f64 = 0.0;
    for j in -4..=4 {
        err = err
            .max((last.u_at(j) - ur).norm())
            .max((last.v_at(j) - vr).norm());
    }
    Ok(err)
}

/// Regimes of the special-case suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `α = β = 0`: rotation by the mass term.
    MassRotation,
    /// `m = β = 0`: pure phase rotation.
    AlphaOnly,
    General,
    Zero,
}

impl Regime {
    pub fn check_name(self) -> &'static str {
        match self {
            Regime::MassRotation => "special_mass_rotation",
            Regime::AlphaOnly => "special_alpha_only",
            Regime::General => "special_general",
            Regime::Zero => "special_zero",
        }
    }

    /// Artifact tolerance for the deviation from the reference flow.
    pub fn tolerance(self) -> f64 {
        match self {
            Regime::MassRotation | Regime::AlphaOnly => 1e-10,
            Regime::General => 1e-9,
            Regime::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpecialCase {
    pub regime: Regime,
    pub params: SchemeParams,
    pub u: Complex64,
    pub v: Complex64,
    pub s: f64,
}

const SUITE_SEED: u64 = 0x5eed_d1ac;

fn unit_disc(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::from_polar(
        rng.gen_range(0.0..1.0),
        rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
    )
}

/// The fixed set of 100 tuples: 30 mass-rotation, 30 α-only, 30 general and
/// 10 zero-coupling tuples, drawn from a seeded ChaCha8 stream.
pub fn special_cases() -> Vec<SpecialCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(SUITE_SEED);
    let mut out = Vec::with_capacity(100);
    for i in 0..100 {
        let (regime, params, s) = match i {
            0..=29 => (
                Regime::MassRotation,
                SchemeParams {
                    m: rng.gen_range(0.0..2.0),
                    alpha: 0.0,
                    beta: 0.0,
                },
                rng.gen_range(0.0..=1.0),
            ),
            30..=59 => (
                Regime::AlphaOnly,
                SchemeParams {
                    m: 0.0,
                    alpha: rng.gen_range(-2.0..2.0),
                    beta: 0.0,
                },
                rng.gen_range(0.0..=1.0),
            ),
            60..=89 => (
                Regime::General,
                SchemeParams {
                    m: rng.gen_range(0.0..1.0),
                    alpha: rng.gen_range(0.0..1.0),
                    beta: rng.gen_range(0.0..1.0),
                },
                rng.gen_range(0.01..=0.1),
            ),
            _ => (
                Regime::Zero,
                SchemeParams {
                    m: 0.0,
                    alpha: 0.0,
                    beta: 0.0,
                },
                rng.gen_range(0.0..=1.0),
            ),
        };
        let u = unit_disc(&mut rng);
        let v = unit_disc(&mut rng);
        out.push(SpecialCase {
            regime,
            params,
            u,
            v,
            s,
        });
    }
    out
}

/// Deviation of [`nonlinear_flow`] under `ode` from the reference flow with
/// 10⁴ substeps on every special case; one record per tuple, one
/// `worst_<regime>` metric per regime.
pub fn special_case_suite(ode: &OdeOptions) -> Result<Report> {
    ode.validate()?;
    let mut report = Report::new();
    let mut worst = [0.0f64; 4];
    for (i, c) in special_cases().iter().enumerate() {
        let (u, v) = nonlinear_flow(c.u, c.v, &c.params, c.s, ode)?;
        let (ur, vr) = oracle_flow(c.u, c.v, &c.params, c.s, SUITE_ORACLE_SUBSTEPS)?;
        let dev = (u - ur).norm().max((v - vr).norm());
        let slot = c.regime as usize;
        worst[slot] = worst[slot].max(dev);
        report.check(
            c.regime.check_name(),
            i as i64,
            dev,
            c.regime.tolerance(),
            0.0,
        );
    }
    for (r, w) in [
        Regime::MassRotation,
        Regime::AlphaOnly,
        Regime::General,
        Regime::Zero,
    ]
    .into_iter()
    .zip(worst)
    {
        report.metric(
            &format!("worst_{}", r.check_name().trim_start_matches("special_")),
            w,
        );
    }
    report.note("special-case tolerances are artifact choices");
    Ok(report)
}

/// One row of a continuity-modulus refinement sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModulusRow {
    pub k: u32,
    pub tau: f64,
    pub h_cells: usize,
    pub u: f64,
    pub v: f64,
}

/// Continuity modulus at fixed physical shift `h` and base time `t0` for
/// `τ_k = 2^{−k}`, `k` in `levels`. Both `h` and `t0` must be whole numbers
/// of steps at every level.
pub fn continuity_study(
    profile: &InitialProfile,
    params: &SchemeParams,
    t0: f64,
    h: f64,
    levels: std::ops::RangeInclusive<u32>,
    ode: &OdeOptions,
    sampling: SamplingMode,
) -> Result<Vec<ModulusRow>> {
    let mut rows = Vec::new();
    for k in levels {
        let tau = f64::powi(2.0, -(k as i32));
        let n_base = whole_steps(t0, tau)?;
        let h_cells = whole_steps(h, tau)?;
        let mesh = profile.default_mesh(tau)?;
        let init = sample_initial_data(profile, &mesh, sampling)?;
        let hist = run_quiet(&init, params, n_base + h_cells, ode)?;
        let (u, v) = crate::analysis::continuity_modulus(&hist, n_base, h_cells)?;
        rows.push(ModulusRow {
            k,
            tau,
            h_cells,
            u,
            v,
        });
    }
    Ok(rows)
}
