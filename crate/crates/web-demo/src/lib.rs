//! WebAssembly bindings for a single static page: a space-time density
//! picture of one run, a refinement ladder and the estimate constants.
//!
//! The `*_impl` functions are plain Rust so they can be tested natively;
//! the exported wrappers only convert errors to JS exceptions.

use dirac_split::experiments::{convergence_study, ConvergenceOptions};
use dirac_split::scheme::evolve;
use dirac_split::{
    analysis::derive_constants, sample_initial_data, Complex64, InitialProfile, OdeOptions,
    SamplingMode, SchemeParams,
};
use wasm_bindgen::prelude::*;

/// Keep browser runs interactive.
const MAX_CELLS: usize = 1 << 21;

fn packet(width: f64, amplitude: f64) -> InitialProfile {
    InitialProfile::gaussian(
        0.0,
        width,
        Complex64::new(amplitude, 0.0),
        Complex64::new(0.0, amplitude),
    )
}

fn params(m: f64, alpha: f64, beta: f64) -> Result<SchemeParams, String> {
    SchemeParams::new(m, alpha, beta).map_err(|e| e.to_string())
}

/// Density `|u|² + |v|²` of every frame on the final window, row-major in
/// time. The returned buffer is `[rows, cols, x_min, tau, data...]`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_impl(
    m: f64,
    alpha: f64,
    beta: f64,
    width: f64,
    amplitude: f64,
    tau: f64,
    steps: usize,
    substeps: usize,
) -> Result<Vec<f64>, String> {
    let p = params(m, alpha, beta)?;
    let profile = packet(width, amplitude);
    let mesh = profile.default_mesh(tau).map_err(|e| e.to_string())?;
    let cols = mesh.len() + 2 * steps;
    let rows = steps + 1;
    if rows.saturating_mul(cols) > MAX_CELLS {
        return Err(format!("{rows} x {cols} cells is too large for the demo"));
    }
    let init = sample_initial_data(&profile, &mesh, SamplingMode::PointSample)
        .map_err(|e| e.to_string())?;
    let j_lo = mesh.j_min() - steps as i64;
    let mut out = Vec::with_capacity(4 + rows * cols);
    out.extend([rows as f64, cols as f64, j_lo as f64 * tau, tau]);
    evolve(
        &init,
        &p,
        steps,
        &OdeOptions::with_substeps(substeps),
        |f| {
            out.extend((0..cols as i64).map(|i| f.density_at(j_lo + i)));
            Ok(())
        },
    )
    .map_err(|e| e.to_string())?;
    Ok(out)
}

/// Self-convergence distances: `[k, dist, k, dist, ...]`.
#[allow(clippy::too_many_arguments)]
pub fn convergence_impl(
    m: f64,
    alpha: f64,
    beta: f64,
    width: f64,
    amplitude: f64,
    horizon: f64,
    k_min: u32,
    k_max: u32,
) -> Result<Vec<f64>, String> {
    let p = params(m, alpha, beta)?;
    let opts = ConvergenceOptions {
        cell_cap: MAX_CELLS,
        ..Default::default()
    };
    let table = convergence_study(
        &packet(width, amplitude),
        &p,
        horizon,
        k_min,
        k_max,
        &OdeOptions::default(),
        &opts,
        &mut |_, _| {},
    )
    .map_err(|e| e.to_string())?;
    Ok(table
        .rows
        .iter()
        .flat_map(|r| [r.k as f64, r.dist])
        .collect())
}

/// The constants table as a JSON object.
pub fn constants_impl(
    m: f64,
    alpha: f64,
    beta: f64,
    c0: f64,
    horizon: f64,
) -> Result<String, String> {
    let t = derive_constants(&params(m, alpha, beta)?, c0, horizon).map_err(|e| e.to_string())?;
    serde_json::to_string(&t).map_err(|e| e.to_string())
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    m: f64,
    alpha: f64,
    beta: f64,
    width: f64,
    amplitude: f64,
    tau: f64,
    steps: usize,
    substeps: usize,
) -> Result<Vec<f64>, JsError> {
    simulate_impl(m, alpha, beta, width, amplitude, tau, steps, substeps)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn convergence(
    m: f64,
    alpha: f64,
    beta: f64,
    width: f64,
    amplitude: f64,
    horizon: f64,
    k_min: u32,
    k_max: u32,
) -> Result<Vec<f64>, JsError> {
    convergence_impl(m, alpha, beta, width, amplitude, horizon, k_min, k_max)
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn constants(m: f64, alpha: f64, beta: f64, c0: f64, horizon: f64) -> Result<String, JsError> {
    constants_impl(m, alpha, beta, c0, horizon).map_err(|e| JsError::new(&e))
}
