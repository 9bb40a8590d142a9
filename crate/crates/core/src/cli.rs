//! Command-line front end. Every subcommand reads a JSON run configuration,
//! writes machine outputs under `--out` and prints a short human summary.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 on usage,
//! configuration or runtime errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis::{
    check_glimm_bound, check_interaction_sum, check_triangle_estimates, derive_constants,
    functional_sweep, pointwise_bound_report, ConservationTracker, Report, TriangleSpec,
};
use crate::error::{Error, Result};
use crate::experiments::{
    convergence_study, homogeneous_benchmark, perturbation_study, special_case_suite,
    ConvergenceOptions, PerturbationSetup,
};
use crate::field::{InitialProfile, SchemeParams, SpinorField};
use crate::io::{self, NdjsonWriter, RunSpec};
use crate::scheme::{evolve, run_quiet, History, StepRecord};
use crate::Complex64;

/// Largest per-cell conservation residual accepted by `run`, in ulps.
const RUN_MAX_ULPS: f64 = 4.0;
/// Largest relative L² drift accepted by `run`.
const RUN_MAX_DRIFT: f64 = 1e-12;
/// Artifact tolerance of the homogeneous benchmark.
const BENCH_TOL: f64 = 1e-8;
/// Artifact ratio gate of the convergence ladder.
const RATIO_GATE: f64 = 0.75;
const RATIO_GATE_FROM_K: u32 = 6;

#[derive(Debug, Parser)]
#[command(
    name = "dirac-split",
    version,
    about = "Lie splitting for the 1+1D nonlinear Dirac equation"
)]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory for machine-readable outputs.
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    /// Override a configuration value by dotted key, e.g. ode.substeps_per_tau=64.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Suppress the stdout summary.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scheme, writing per-step diagnostics and optional checkpoints.
    Run,
    /// Mesh-refinement self-convergence ladder with tau_k = tau0 * 2^-k.
    Converge {
        #[arg(long, default_value_t = 4)]
        kmin: u32,
        #[arg(long, default_value_t = 7)]
        kmax: u32,
        #[arg(long, default_value_t = 1.0)]
        tau0: f64,
    },
    /// Stability of the run under a scaled perturbation of the data.
    Perturb {
        #[arg(long, default_value_t = 1e-3)]
        scale: f64,
    },
    /// Triangle mass, pointwise and interaction-sum estimates of one run.
    Triangle {
        #[command(flatten)]
        tri: TriangleArgs,
    },
    /// Difference functionals of a run and its shifted copy, and the
    /// functional growth bound.
    Functional {
        #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
        shift_cells: i64,
        #[command(flatten)]
        tri: TriangleArgs,
    },
    /// Print the explicit estimate constants.
    Constants {
        #[arg(long)]
        m: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
        /// Data bound; defaults to the mass of the configured initial data.
        #[arg(long)]
        c0: Option<f64>,
        /// Horizon; defaults to the configured T.
        #[arg(long = "horizon", value_name = "T")]
        horizon: Option<f64>,
    },
    /// Homogeneous-data benchmark and the nonlinear-flow special cases.
    Bench,
}

#[derive(Debug, Clone, Copy, clap::Args)]
pub struct TriangleArgs {
    /// Apex cell; defaults to the centre of the initial window.
    #[arg(long, allow_hyphen_values = true)]
    pub j1: Option<i64>,
    /// Apex step; defaults to the last step.
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub n0: usize,
}

impl TriangleArgs {
    fn resolve(&self, initial: &SpinorField, n_steps: usize) -> Result<TriangleSpec> {
        let m = initial.mesh();
        let j1 = self.j1.unwrap_or(m.j_min() + (m.j_max() - m.j_min()) / 2);
        TriangleSpec::new(j1, self.n1.unwrap_or(n_steps), self.n0)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

struct Ctx<'a> {
    cli: &'a Cli,
}

impl Ctx<'_> {
    fn say(&self, text: impl AsRef<str>) {
        if !self.cli.quiet {
            println!("{}", text.as_ref());
        }
    }

    fn spec(&self) -> Result<RunSpec> {
        let path = self
            .cli
            .config
            .as_ref()
            .ok_or_else(|| Error::Config("this command needs --config <path>".into()))?;
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        io::parse_config_with(&text, &self.cli.overrides)
    }

    fn out_dir(&self) -> Result<&Path> {
        fs::create_dir_all(&self.cli.out)?;
        Ok(&self.cli.out)
    }

    fn out_path(&self, name: &str) -> Result<PathBuf> {
        Ok(self.out_dir()?.join(name))
    }

    /// Writes `report.ndjson` and `summary.csv` and prints the summary.
    fn finish(&self, report: &Report) -> Result<bool> {
        fs::write(self.out_path("report.ndjson")?, report.to_ndjson())?;
        fs::write(self.out_path("summary.csv")?, report.summary_csv())?;
        for s in report.summary() {
            self.say(format!(
                "{:<28} pass {:>6}  fail {:>6}  worst margin {:.6e}",
                s.check, s.pass_count, s.fail_count, s.worst_margin
            ));
        }
        for (k, v) in &report.metrics {
            self.say(format!("{k:<28} {v:.6e}"));
        }
        for n in &report.notes {
            self.say(format!("note: {n}"));
        }
        let ok = report.all_pass();
        if !ok {
            for f in report.failures().take(5) {
                eprintln!(
                    "FAIL {} at n={}: lhs={:e} rhs={:e}",
                    f.check, f.n, f.lhs, f.rhs
                );
            }
        }
        Ok(ok)
    }
}

pub fn dispatch(cli: &Cli) -> Result<bool> {
    let ctx = Ctx { cli };
    match &cli.command {
        Command::Run => cmd_run(&ctx),
        Command::Converge { kmin, kmax, tau0 } => cmd_converge(&ctx, *kmin, *kmax, *tau0),
        Command::Perturb { scale } => cmd_perturb(&ctx, *scale),
        Command::Triangle { tri } => cmd_triangle(&ctx, tri),
        Command::Functional { shift_cells, tri } => cmd_functional(&ctx, *shift_cells, tri),
        Command::Constants {
            m,
            alpha,
            beta,
            c0,
            horizon,
        } => cmd_constants(&ctx, [*m, *alpha, *beta], *c0, *horizon),
        Command::Bench => cmd_bench(&ctx),
    }
}

fn cmd_run(ctx: &Ctx) -> Result<bool> {
    let spec = ctx.spec()?;
    let init = spec.initial_field()?;
    let n_steps = spec.n_steps();
    let diag_name = spec
        .outputs
        .diagnostics_path
        .as_deref()
        .unwrap_or("diagnostics.ndjson");
    let mut diag = NdjsonWriter::create(&ctx.out_path(diag_name)?)?;
    let every = spec.outputs.checkpoint_every;
    let keep = spec.outputs.history_path.is_some();
    let mut frames = Vec::new();
    let mut tracker = ConservationTracker::new(&init);
    let out = ctx.out_dir()?.to_path_buf();
    evolve(&init, &spec.params, n_steps, &spec.ode, |f| {
        diag.write(&StepRecord::of(f))?;
        if f.step() > 0 {
            tracker.push(f);
        }
        if every > 0 && f.step() % every == 0 {
            io::write_checkpoint(f, &out.join(format!("checkpoint_{:06}.txt", f.step())))?;
        }
        if keep {
            frames.push(f.clone());
        }
        Ok(())
    })?;
    diag.finish()?;
    if let Some(name) = &spec.outputs.history_path {
        let h = History::from_frames(spec.params, spec.ode, frames)?;
        io::write_history(&h, &ctx.out_path(name)?)?;
    }
    let summary = tracker.summary();
    ctx.say(format!("{n_steps} steps of tau = {}", spec.tau));
    let mut report = summary.to_report(RUN_MAX_ULPS, RUN_MAX_DRIFT);
    if !spec.ode.project_norm {
        // without projection the balance only holds to integrator accuracy
        report.records.clear();
        report.note("project_norm is off; conservation reported as metrics only");
        report.metric("max_l2_drift", summary.max_l2_drift);
        report.metric("max_cell_residual_ulps", summary.max_cell_residual_ulps);
    }
    ctx.finish(&report)
}

fn cmd_converge(ctx: &Ctx, kmin: u32, kmax: u32, tau0: f64) -> Result<bool> {
    let spec = ctx.spec()?;
    if !(tau0.is_finite() && tau0 > 0.0) {
        return Err(Error::Config(format!("tau0 must be positive, got {tau0}")));
    }
    let opts = ConvergenceOptions {
        tau0,
        sampling: spec.sampling,
        ..Default::default()
    };
    let mut writers: Vec<(u32, NdjsonWriter<fs::File>)> = Vec::new();
    let mut sink_err: Option<Error> = None;
    let out = ctx.out_dir()?.to_path_buf();
    let table = convergence_study(
        &spec.profile,
        &spec.params,
        spec.horizon,
        kmin,
        kmax,
        &spec.ode,
        &opts,
        &mut |k, rec| {
            if sink_err.is_some() {
                return;
            }
            if writers.last().is_none_or(|(lk, _)| *lk != k) {
                match NdjsonWriter::create(&out.join(format!("level_{k}.ndjson"))) {
                    Ok(w) => writers.push((k, w)),
                    Err(e) => {
                        sink_err = Some(e);
                        return;
                    }
                }
            }
            if let Err(e) = writers.last_mut().expect("writer").1.write(rec) {
                sink_err = Some(e);
            }
        },
    )?;
    if let Some(e) = sink_err {
        return Err(e);
    }
    for (_, w) in writers {
        w.finish()?;
    }
    fs::write(ctx.out_path("convergence.csv")?, table.to_csv())?;
    ctx.say("k    tau              dist                    ratio");
    for r in &table.rows {
        ctx.say(format!(
            "{:<4} {:<16e} {:<23e} {}",
            r.k,
            r.tau,
            r.dist,
            r.ratio.map(|x| format!("{x:.4}")).unwrap_or_default()
        ));
    }
    ctx.finish(&table.gate_report(RATIO_GATE, RATIO_GATE_FROM_K))
}

fn cmd_perturb(ctx: &Ctx, scale: f64) -> Result<bool> {
    let spec = ctx.spec()?;
    let setup = PerturbationSetup {
        profile: &spec.profile,
        perturbation: spec.perturbation_profile(),
        scale,
        params: spec.params,
        horizon: spec.horizon,
        tau: spec.tau,
        ode: spec.ode,
        sampling: spec.sampling,
    };
    let (report, _, _) = perturbation_study(&setup)?;
    ctx.finish(&report)
}

fn run_spec(spec: &RunSpec) -> Result<History> {
    run_quiet(
        &spec.initial_field()?,
        &spec.params,
        spec.n_steps(),
        &spec.ode,
    )
}

fn cmd_triangle(ctx: &Ctx, args: &TriangleArgs) -> Result<bool> {
    let spec = ctx.spec()?;
    let hist = run_spec(&spec)?;
    let tri = args.resolve(hist.initial(), hist.n_steps())?;
    ctx.say(format!(
        "triangle j1={} n1={} n0={}",
        tri.j1, tri.n1, tri.n0
    ));
    let mut report = check_triangle_estimates(&hist, &tri)?;
    let c0 = hist.initial().mass();
    if c0 > 0.0 && spec.horizon > 0.0 {
        let k = derive_constants(&spec.params, c0, spec.horizon)?;
        report.extend(pointwise_bound_report(&hist, &k));
        report.extend(check_interaction_sum(&hist, 0, hist.n_steps(), &k)?);
    } else {
        report.note("zero data or zero horizon; pointwise and interaction bounds skipped");
    }
    ctx.finish(&report)
}

fn cmd_functional(ctx: &Ctx, shift: i64, args: &TriangleArgs) -> Result<bool> {
    let spec = ctx.spec()?;
    let a0 = spec.initial_field()?;
    let b0 = a0.shifted(shift);
    let n = spec.n_steps();
    let ha = run_quiet(&a0, &spec.params, n, &spec.ode)?;
    let hb = run_quiet(&b0, &spec.params, n, &spec.ode)?;
    let tri = args.resolve(&a0, n)?;
    let c0 = a0.mass().max(b0.mass());
    if c0 == 0.0 || spec.horizon == 0.0 {
        return Err(Error::Config(
            "functional needs nonzero data and T > 0".into(),
        ));
    }
    let k = derive_constants(&spec.params, c0, spec.horizon)?;
    let sweep = functional_sweep(&ha, &hb, &tri, k.kappa)?;
    fs::write(ctx.out_path("functionals.ndjson")?, io::to_ndjson(&sweep))?;
    ctx.say(format!(
        "triangle j1={} n1={} n0={}  kappa={:e}  delta={:e}",
        tri.j1, tri.n1, tri.n0, k.kappa, k.delta
    ));
    ctx.finish(&check_glimm_bound(&ha, &hb, &tri, &k)?)
}

fn cmd_constants(
    ctx: &Ctx,
    pab: [Option<f64>; 3],
    c0: Option<f64>,
    horizon: Option<f64>,
) -> Result<bool> {
    let spec = match &ctx.cli.config {
        Some(_) => Some(ctx.spec()?),
        None => None,
    };
    let from_spec = |i: usize, name: &str| -> Result<f64> {
        pab[i]
            .or_else(|| {
                spec.as_ref().map(|s| match i {
                    0 => s.params.m,
                    1 => s.params.alpha,
                    _ => s.params.beta,
                })
            })
            .ok_or_else(|| Error::Config(format!("--{name} is required without --config")))
    };
    let params = SchemeParams::new(
        from_spec(0, "m")?,
        from_spec(1, "alpha")?,
        from_spec(2, "beta")?,
    )?;
    let c0 = match (c0, &spec) {
        (Some(c), _) => c,
        (None, Some(s)) => s.initial_field()?.mass(),
        (None, None) => return Err(Error::Config("--c0 is required without --config".into())),
    };
    let horizon = horizon
        .or(spec.as_ref().map(|s| s.horizon))
        .ok_or_else(|| Error::Config("--horizon is required without --config".into()))?;
    let table = derive_constants(&params, c0, horizon)?;
    fs::write(
        ctx.out_path("constants.json")?,
        serde_json::to_string_pretty(&table)? + "\n",
    )?;
    ctx.say(table.to_table().trim_end());
    Ok(true)
}

fn cmd_bench(ctx: &Ctx) -> Result<bool> {
    let spec = ctx.spec()?;
    let state = match &spec.profile {
        InitialProfile::Homogeneous { u, v, .. } => {
            (Complex64::new(u[0], u[1]), Complex64::new(v[0], v[1]))
        }
        _ => (Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)),
    };
    let err = homogeneous_benchmark(&spec.params, spec.horizon, spec.tau, &spec.ode, state)?;
    let mut report = Report::new();
    report.check(
        "homogeneous_error",
        spec.n_steps() as i64,
        err,
        BENCH_TOL,
        0.0,
    );
    report.extend(special_case_suite(&spec.ode)?);
    ctx.finish(&report)
}
