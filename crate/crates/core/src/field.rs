//! Meshes, piecewise-constant spinor fields and their L² geometry.
//!
//! A field lives on a finite window of cells `[j_min, j_max]`; cell `j`
//! covers `[jτ, (j+1)τ)` and every cell outside the window holds zero.
//! The time step equals the cell width, so one transport step moves data
//! exactly one cell.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cell width `τ` and inclusive cell window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    tau: f64,
    j_min: i64,
    j_max: i64,
}

impl Mesh {
    pub fn new(tau: f64, j_min: i64, j_max: i64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidMesh(format!(
                "tau must be positive, got {tau}"
            )));
        }
        if j_min > j_max {
            return Err(Error::InvalidMesh(format!(
                "empty window [{j_min}, {j_max}]"
            )));
        }
        Ok(Self { tau, j_min, j_max })
    }

    /// Smallest window whose cells cover `[lo, hi)`.
    pub fn covering(tau: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidMesh(format!("bad extent [{lo}, {hi}]")));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::InvalidMesh(format!(
                "tau must be positive, got {tau}"
            )));
        }
        let j_min = (lo / tau).floor() as i64;
        let j_max = ((hi / tau).ceil() as i64 - 1).max(j_min);
        Self::new(tau, j_min, j_max)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn j_min(&self) -> i64 {
        self.j_min
    }

    pub fn j_max(&self) -> i64 {
        self.j_max
    }

    pub fn len(&self) -> usize {
        (self.j_max - self.j_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, j: i64) -> bool {
        j >= self.j_min && j <= self.j_max
    }

    /// Left edge `x_j = jτ` of cell `j`.
    pub fn x(&self, j: i64) -> f64 {
        j as f64 * self.tau
    }

    /// Window widened by `cells` on each side.
    pub fn grown(&self, cells: i64) -> Self {
        Self {
            tau: self.tau,
            j_min: self.j_min - cells,
            j_max: self.j_max + cells,
        }
    }

    pub(crate) fn index(&self, j: i64) -> Option<usize> {
        self.contains(j).then(|| (j - self.j_min) as usize)
    }

    /// Hull of two windows on the same `τ`.
    pub(crate) fn union(&self, other: &Mesh) -> Self {
        Self {
            tau: self.tau,
            j_min: self.j_min.min(other.j_min),
            j_max: self.j_max.max(other.j_max),
        }
    }
}

/// The discrete state `(u_j^n, v_j^n)` at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    mesh: Mesh,
    u: Vec<Complex64>,
    v: Vec<Complex64>,
    step: usize,
}

impl SpinorField {
    pub fn new(mesh: Mesh, u: Vec<Complex64>, v: Vec<Complex64>, step: usize) -> Result<Self> {
        for got in [u.len(), v.len()] {
            if got != mesh.len() {
                return Err(Error::LengthMismatch {
                    expected: mesh.len(),
                    got,
                });
            }
        }
        for (i, (a, b)) in u.iter().zip(&v).enumerate() {
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::NonFinite {
                    cell: mesh.j_min + i as i64,
                });
            }
        }
        Ok(Self { mesh, u, v, step })
    }

    /// Internal constructor for values already known to be finite.
    pub(crate) fn from_parts(
        mesh: Mesh,
        u: Vec<Complex64>,
        v: Vec<Complex64>,
        step: usize,
    ) -> Self {
        debug_assert_eq!(u.len(), mesh.len());
        debug_assert_eq!(v.len(), mesh.len());
        Self { mesh, u, v, step }
    }

    pub fn zeros(mesh: Mesh, step: usize) -> Self {
        let zero = vec![Complex64::new(0.0, 0.0); mesh.len()];
        Self::from_parts(mesh, zero.clone(), zero, step)
    }

    /// A single nonzero cell.
    pub fn delta(mesh: Mesh, j: i64, u: Complex64, v: Complex64) -> Result<Self> {
        let mut f = Self::zeros(mesh, 0);
        let i = mesh
            .index(j)
            .ok_or_else(|| Error::InvalidArgument(format!("cell {j} outside the window")))?;
        f.u[i] = u;
        f.v[i] = v;
        Self::new(f.mesh, f.u, f.v, 0)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn tau(&self) -> f64 {
        self.mesh.tau
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// Time `nτ` of this level.
    pub fn time(&self) -> f64 {
        self.step as f64 * self.mesh.tau
    }

    pub fn u(&self) -> &[Complex64] {
        &self.u
    }

    pub fn v(&self) -> &[Complex64] {
        &self.v
    }

    pub fn with_step(mut self, step: usize) -> Self {
        self.step = step;
        self
    }

    pub fn u_at(&self, j: i64) -> Complex64 {
        self.mesh
            .index(j)
            .map_or(Complex64::new(0.0, 0.0), |i| self.u[i])
    }

    pub fn v_at(&self, j: i64) -> Complex64 {
        self.mesh
            .index(j)
            .map_or(Complex64::new(0.0, 0.0), |i| self.v[i])
    }

    /// `|u_j|² + |v_j|²`, zero outside the window.
    pub fn density_at(&self, j: i64) -> f64 {
        self.u_at(j).norm_sqr() + self.v_at(j).norm_sqr()
    }

    pub fn densities(&self) -> impl Iterator<Item = f64> + '_ {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(a, b)| a.norm_sqr() + b.norm_sqr())
    }

    /// Discrete mass `Σ_j (|u_j|² + |v_j|²) τ`, summed in index order.
    pub fn mass(&self) -> f64 {
        let mut sum = 0.0;
        for d in self.densities() {
            sum += d;
        }
        sum * self.mesh.tau
    }

    /// `Σ_j |u_j|² |v_j|² τ²`.
    pub fn interaction(&self) -> f64 {
        let mut sum = 0.0;
        for (a, b) in self.u.iter().zip(&self.v) {
            sum += a.norm_sqr() * b.norm_sqr();
        }
        sum * self.mesh.tau * self.mesh.tau
    }

    /// Zero-extend to a window containing the current one.
    pub fn padded_to(&self, j_min: i64, j_max: i64) -> Result<Self> {
        if j_min > self.mesh.j_min || j_max < self.mesh.j_max {
            return Err(Error::InvalidArgument(format!(
                "window [{j_min}, {j_max}] does not contain [{}, {}]",
                self.mesh.j_min, self.mesh.j_max
            )));
        }
        let mesh = Mesh::new(self.mesh.tau, j_min, j_max)?;
        let mut out = Self::zeros(mesh, self.step);
        let off = (self.mesh.j_min - j_min) as usize;
        out.u[off..off + self.u.len()].copy_from_slice(&self.u);
        out.v[off..off + self.v.len()].copy_from_slice(&self.v);
        Ok(out)
    }

    /// Zero-extend so both window ends are multiples of `factor`.
    pub fn aligned(&self, factor: i64) -> Result<Self> {
        if factor < 1 {
            return Err(Error::InvalidArgument(format!("factor {factor} < 1")));
        }
        let j_min = self.mesh.j_min.div_euclid(factor) * factor;
        let j_max = (self.mesh.j_max + 1 + factor - 1).div_euclid(factor) * factor - 1;
        self.padded_to(j_min, j_max)
    }

    /// The field `x ↦ self(x + μτ)`.
    pub fn shifted(&self, cells: i64) -> Self {
        let mesh = Mesh {
            tau: self.mesh.tau,
            j_min: self.mesh.j_min - cells,
            j_max: self.mesh.j_max - cells,
        };
        Self::from_parts(mesh, self.u.clone(), self.v.clone(), self.step)
    }

    /// `self + scale · other` on the union window.
    pub fn add_scaled(&self, other: &SpinorField, scale: f64) -> Result<Self> {
        check_tau(self, other)?;
        let mesh = self.mesh.union(&other.mesh);
        let (mut u, mut v) = (
            Vec::with_capacity(mesh.len()),
            Vec::with_capacity(mesh.len()),
        );
        for j in mesh.j_min..=mesh.j_max {
            u.push(self.u_at(j) + other.u_at(j) * scale);
            v.push(self.v_at(j) + other.v_at(j) * scale);
        }
        Self::new(mesh, u, v, self.step)
    }
}

fn check_tau(a: &SpinorField, b: &SpinorField) -> Result<()> {
    if a.mesh.tau != b.mesh.tau {
        return Err(Error::TauMismatch {
            a: a.mesh.tau,
            b: b.mesh.tau,
        });
    }
    Ok(())
}

/// `sqrt(Σ_j (|u_j|² + |v_j|²) τ)`.
pub fn l2_norm(field: &SpinorField) -> f64 {
    field.mass().sqrt()
}

/// Squared L² norm of `a(· + μτ) − b(·)` over the hull of both windows.
pub fn l2_distance_sq(a: &SpinorField, b: &SpinorField, shift_cells: i64) -> Result<f64> {
    check_tau(a, b)?;
    let a_shifted = Mesh {
        tau: a.mesh.tau,
        j_min: a.mesh.j_min - shift_cells,
        j_max: a.mesh.j_max - shift_cells,
    };
    let hull = a_shifted.union(&b.mesh);
    let mut sum = 0.0;
    for j in hull.j_min..=hull.j_max {
        let du = a.u_at(j + shift_cells) - b.u_at(j);
        let dv = a.v_at(j + shift_cells) - b.v_at(j);
        sum += du.norm_sqr() + dv.norm_sqr();
    }
    Ok(sum * a.mesh.tau)
}

/// L² norm of `a(· + μτ) − b(·)`; `μ` is a whole number of cells.
pub fn l2_distance(a: &SpinorField, b: &SpinorField, shift_cells: i64) -> Result<f64> {
    l2_distance_sq(a, b, shift_cells).map(f64::sqrt)
}

/// L² projection onto the mesh `factor` times coarser: each coarse cell takes
/// the mean of its `factor` fine cells. Both window ends must be aligned.
pub fn restrict_to_coarse(fine: &SpinorField, factor: i64) -> Result<SpinorField> {
    if factor < 2 {
        return Err(Error::InvalidArgument(format!(
            "factor must be >= 2, got {factor}"
        )));
    }
    let m = fine.mesh;
    if m.j_min.rem_euclid(factor) != 0 || (m.j_max + 1).rem_euclid(factor) != 0 {
        return Err(Error::Misaligned {
            j_min: m.j_min,
            j_max: m.j_max,
            factor,
        });
    }
    let coarse = Mesh::new(
        m.tau * factor as f64,
        m.j_min / factor,
        (m.j_max + 1) / factor - 1,
    )?;
    let k = factor as usize;
    let scale = 1.0 / factor as f64;
    let mean = |xs: &[Complex64]| -> Vec<Complex64> {
        xs.chunks_exact(k)
            .map(|c| {
                let mut s = Complex64::new(0.0, 0.0);
                for z in c {
                    s += z;
                }
                s * scale
            })
            .collect()
    };
    Ok(SpinorField::from_parts(
        coarse,
        mean(&fine.u),
        mean(&fine.v),
        fine.step,
    ))
}

/// Equation coefficients: mass `m ≥ 0`, Thirring `α`, Gross–Neveu `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeParams {
    pub m: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl SchemeParams {
    pub fn new(m: f64, alpha: f64, beta: f64) -> Result<Self> {
        let p = Self { m, alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.m.is_finite() && self.alpha.is_finite() && self.beta.is_finite()) {
            return Err(Error::Domain("coefficients must be finite".into()));
        }
        if self.m < 0.0 {
            return Err(Error::Domain(format!(
                "mass m must be nonnegative, got {}",
                self.m
            )));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.m == 0.0 && self.alpha == 0.0 && self.beta == 0.0
    }
}

/// How the nonlinear cell flow is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeOptions {
    #[serde(default = "default_substeps")]
    pub substeps_per_tau: usize,
    #[serde(default = "default_true")]
    pub project_norm: bool,
    #[serde(default = "default_true")]
    pub closed_form_if_available: bool,
}

fn default_substeps() -> usize {
    16
}

fn default_true() -> bool {
    true
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            substeps_per_tau: default_substeps(),
            project_norm: true,
            closed_form_if_available: true,
        }
    }
}

impl OdeOptions {
    pub fn with_substeps(substeps_per_tau: usize) -> Self {
        Self {
            substeps_per_tau,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.substeps_per_tau == 0 {
            return Err(Error::InvalidArgument(
                "substeps_per_tau must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Complex amplitude stored as `[re, im]`.
pub type Amplitude = [f64; 2];

pub(crate) fn amp(a: Amplitude) -> Complex64 {
    Complex64::new(a[0], a[1])
}

/// Concrete initial data `(u₀, v₀)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialProfile {
    /// `(u, v) · exp(−(x−c)²/(2w²)) · exp(ikx)`.
    GaussianPacket {
        center: f64,
        width: f64,
        u: Amplitude,
        v: Amplitude,
        #[serde(default)]
        wavenumber: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        extent: Option<[f64; 2]>,
    },
    /// Piecewise constant on `[x0 + i·dx, x0 + (i+1)·dx)`, zero elsewhere.
    Table {
        x0: f64,
        dx: f64,
        u: Vec<Amplitude>,
        v: Vec<Amplitude>,
    },
    /// Spatially constant on `extent` (default `[-1, 1)`).
    Homogeneous {
        u: Amplitude,
        v: Amplitude,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        extent: Option<[f64; 2]>,
    },
    /// One nonzero cell of the sampling mesh.
    DeltaCell { j: i64, u: Amplitude, v: Amplitude },
}

/// Gaussian tails beyond this many widths are dropped from the default window.
const GAUSSIAN_CUTOFF: f64 = 10.0;

impl InitialProfile {
    pub fn gaussian(center: f64, width: f64, u: Complex64, v: Complex64) -> Self {
        InitialProfile::GaussianPacket {
            center,
            width,
            u: [u.re, u.im],
            v: [v.re, v.im],
            wavenumber: 0.0,
            extent: None,
        }
    }

    pub fn homogeneous(u: Complex64, v: Complex64) -> Self {
        InitialProfile::Homogeneous {
            u: [u.re, u.im],
            v: [v.re, v.im],
            extent: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            InitialProfile::GaussianPacket {
                center,
                width,
                u,
                v,
                wavenumber,
                extent,
            } => {
                if !(width.is_finite() && *width > 0.0) {
                    return Err(Error::InvalidProfile(format!(
                        "gaussian width must be positive, got {width}"
                    )));
                }
                if !finite(&[*center, *wavenumber, u[0], u[1], v[0], v[1]]) {
                    return Err(Error::InvalidProfile(
                        "non-finite gaussian parameter".into(),
                    ));
                }
                check_extent(extent)
            }
            InitialProfile::Table { x0, dx, u, v } => {
                if !(dx.is_finite() && *dx > 0.0 && x0.is_finite()) {
                    return Err(Error::InvalidProfile(format!(
                        "bad table grid x0={x0} dx={dx}"
                    )));
                }
                if u.is_empty() || u.len() != v.len() {
                    return Err(Error::InvalidProfile(format!(
                        "table lengths differ or are empty: u={} v={}",
                        u.len(),
                        v.len()
                    )));
                }
                Ok(())
            }
            InitialProfile::Homogeneous { extent, .. } => check_extent(extent),
            InitialProfile::DeltaCell { .. } => Ok(()),
        }
    }

    /// Physical interval carrying the data, or `None` for mesh-relative kinds.
    pub fn extent(&self) -> Option<(f64, f64)> {
        match self {
            InitialProfile::GaussianPacket {
                center,
                width,
                extent,
                ..
            } => Some(extent.map_or(
                (
                    center - GAUSSIAN_CUTOFF * width,
                    center + GAUSSIAN_CUTOFF * width,
                ),
                |e| (e[0], e[1]),
            )),
            InitialProfile::Table { x0, dx, u, .. } => Some((*x0, x0 + dx * u.len() as f64)),
            InitialProfile::Homogeneous { extent, .. } => {
                Some(extent.map_or((-1.0, 1.0), |e| (e[0], e[1])))
            }
            InitialProfile::DeltaCell { .. } => None,
        }
    }

    /// Smallest mesh of width `tau` covering the profile.
    pub fn default_mesh(&self, tau: f64) -> Result<Mesh> {
        match self {
            InitialProfile::DeltaCell { j, .. } => Mesh::new(tau, *j, *j),
            _ => {
                let (lo, hi) = self.extent().expect("extent for non-delta kinds");
                Mesh::covering(tau, lo, hi)
            }
        }
    }

    fn value_at(&self, x: f64) -> (Complex64, Complex64) {
        let zero = Complex64::new(0.0, 0.0);
        match self {
            InitialProfile::GaussianPacket {
                center,
                width,
                u,
                v,
                wavenumber,
                extent,
            } => {
                if let Some(e) = extent {
                    if x < e[0] || x >= e[1] {
                        return (zero, zero);
                    }
                }
                let z = (x - center) / width;
                let g = (-0.5 * z * z).exp();
                let phase = Complex64::from_polar(g, wavenumber * x);
                (amp(*u) * phase, amp(*v) * phase)
            }
            InitialProfile::Table { x0, dx, u, v } => {
                let i = ((x - x0) / dx).floor();
                if i < 0.0 || i >= u.len() as f64 {
                    (zero, zero)
                } else {
                    let i = i as usize;
                    (amp(u[i]), amp(v[i]))
                }
            }
            InitialProfile::Homogeneous { u, v, extent } => {
                let (lo, hi) = extent.map_or((-1.0, 1.0), |e| (e[0], e[1]));
                if x < lo || x >= hi {
                    (zero, zero)
                } else {
                    (amp(*u), amp(*v))
                }
            }
            InitialProfile::DeltaCell { .. } => unreachable!("delta cells are mesh-relative"),
        }
    }

    fn cell_mean(&self, a: f64, b: f64) -> (Complex64, Complex64) {
        match self {
            InitialProfile::Homogeneous { u, v, extent } => {
                let (lo, hi) = extent.map_or((-1.0, 1.0), |e| (e[0], e[1]));
                let overlap = (b.min(hi) - a.max(lo)).max(0.0);
                if overlap == b - a {
                    (amp(*u), amp(*v))
                } else {
                    let w = overlap / (b - a);
                    (amp(*u) * w, amp(*v) * w)
                }
            }
            InitialProfile::Table { x0, dx, u, v } => {
                let mut su = Complex64::new(0.0, 0.0);
                let mut sv = su;
                let first = (((a - x0) / dx).floor().max(0.0)) as usize;
                for i in first..u.len() {
                    let lo = x0 + dx * i as f64;
                    let hi = lo + dx;
                    if lo >= b {
                        break;
                    }
                    let w = (hi.min(b) - lo.max(a)).max(0.0);
                    su += amp(u[i]) * w;
                    sv += amp(v[i]) * w;
                }
                (su / (b - a), sv / (b - a))
            }
            _ => gauss_legendre_mean(|x| self.value_at(x), a, b),
        }
    }
}

fn check_extent(extent: &Option<[f64; 2]>) -> Result<()> {
    match extent {
        Some([lo, hi]) if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
            Err(Error::InvalidProfile(format!("bad extent [{lo}, {hi}]")))
        }
        _ => Ok(()),
    }
}

/// Composite 5-point Gauss–Legendre mean over `[a, b]`.
fn gauss_legendre_mean<F>(f: F, a: f64, b: f64) -> (Complex64, Complex64)
where
    F: Fn(f64) -> (Complex64, Complex64),
{
    const NODES: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_47,
        0.478_628_670_499_366_47,
        0.236_926_885_056_189_08,
        0.236_926_885_056_189_08,
    ];
    const PANELS: usize = 8;
    let h = (b - a) / PANELS as f64;
    let mut su = Complex64::new(0.0, 0.0);
    let mut sv = su;
    for p in 0..PANELS {
        let mid = a + h * (p as f64 + 0.5);
        for (x, w) in NODES.iter().zip(WEIGHTS) {
            let (fu, fv) = f(mid + 0.5 * h * x);
            su += fu * w;
            sv += fv * w;
        }
    }
    // weights sum to 2 per panel
    let norm = 1.0 / (2.0 * PANELS as f64);
    (su * norm, sv * norm)
}

/// How cell values are produced from a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Cell `j` holds the profile value at `x = jτ`.
    #[default]
    PointSample,
    /// Cell `j` holds the mean over `[jτ, (j+1)τ)`.
    CellAverage,
}

/// Piecewise-constant initial data on `mesh`, at step 0.
pub fn sample_initial_data(
    profile: &InitialProfile,
    mesh: &Mesh,
    mode: SamplingMode,
) -> Result<SpinorField> {
    profile.validate()?;
    let zero = Complex64::new(0.0, 0.0);
    let n = mesh.len();
    let (mut u, mut v) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for j in mesh.j_min..=mesh.j_max {
        let (a, b) = match profile {
            InitialProfile::DeltaCell { j: jd, u, v } => {
                if j == *jd {
                    (amp(*u), amp(*v))
                } else {
                    (zero, zero)
                }
            }
            _ => match mode {
                SamplingMode::PointSample => profile.value_at(mesh.x(j)),
                SamplingMode::CellAverage => profile.cell_mean(mesh.x(j), mesh.x(j + 1)),
            },
        };
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::NonFinite { cell: j });
        }
        u.push(a);
        v.push(b);
    }
    Ok(SpinorField::from_parts(*mesh, u, v, 0))
}
