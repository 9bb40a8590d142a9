//! Run configuration, field checkpoints, histories and NDJSON diagnostics.
//!
//! Checkpoints and histories are plain text with 17 significant digit
//! floats, so every finite binary64 value survives a round trip bit for bit.
//! JSON outputs use the shortest round-trip representation.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::field::{InitialProfile, Mesh, OdeOptions, SamplingMode, SchemeParams, SpinorField};
use crate::scheme::{History, StepRecord};

/// Where a run writes its artifacts. Relative paths resolve against the
/// output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics_path: Option<String>,
    /// Write a checkpoint every this many steps; 0 disables checkpoints.
    #[serde(default)]
    pub checkpoint_every: usize,
}

/// One run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub params: SchemeParams,
    #[serde(default)]
    pub ode: OdeOptions,
    pub profile: InitialProfile,
    /// Second profile for perturbation studies; defaults to `profile`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<InitialProfile>,
    #[serde(default)]
    pub sampling: SamplingMode,
    pub tau: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default)]
    pub outputs: Outputs,
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.ode.validate()?;
        self.profile.validate()?;
        if let Some(p) = &self.perturbation {
            p.validate()?;
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::Config(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::Config(format!(
                "T must be nonnegative, got {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// `⌈T/τ⌉`, forgiving rounding noise of a few ulps.
    pub fn n_steps(&self) -> usize {
        let r = self.horizon / self.tau;
        let near = r.round();
        if (r - near).abs() <= 1e-9 * near.max(1.0) {
            near as usize
        } else {
            r.ceil() as usize
        }
    }

    /// The sampled initial field on the profile's default mesh.
    pub fn initial_field(&self) -> Result<SpinorField> {
        let mesh = self.profile.default_mesh(self.tau)?;
        crate::field::sample_initial_data(&self.profile, &mesh, self.sampling)
    }

    pub fn perturbation_profile(&self) -> &InitialProfile {
        self.perturbation.as_ref().unwrap_or(&self.profile)
    }
}

/// Parses a strict JSON configuration. Unknown keys are rejected and a
/// missing required key is named in the error.
pub fn parse_config(text: &str) -> Result<RunSpec> {
    parse_config_with(text, &[])
}

/// [`parse_config`] after applying `key=value` overrides with dotted keys.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<RunSpec> {
    let mut value: Value =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
    if !value.is_object() {
        return Err(Error::Config("configuration must be a JSON object".into()));
    }
    apply_overrides(&mut value, overrides)?;
    let spec: RunSpec = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
    spec.validate()?;
    Ok(spec)
}

pub fn serialize_config(spec: &RunSpec) -> String {
    let mut s = serde_json::to_string_pretty(spec).expect("run spec serializes");
    s.push('\n');
    s
}

/// Sets `a.b.c=value` entries in a JSON object. The value is parsed as JSON
/// when possible and kept as a string otherwise; missing intermediate
/// objects are created.
pub fn apply_overrides(root: &mut Value, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(Error::Config(format!(
                "override `{item}` has an empty key segment"
            )));
        }
        let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut node = &mut *root;
        let mut parts = key.split('.').peekable();
        while let Some(part) = parts.next() {
            let obj = node.as_object_mut().ok_or_else(|| {
                Error::Config(format!("override `{key}`: `{part}` is inside a non-object"))
            })?;
            if parts.peek().is_none() {
                obj.insert(part.to_string(), parsed);
                break;
            }
            node = obj
                .entry(part.to_string())
                .or_insert_with(|| Value::Object(Default::default()));
        }
    }
    Ok(())
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Checkpoint text: a `tau= jmin= jmax= n=` header and one
/// `j Re(u) Im(u) Re(v) Im(v)` line per cell.
pub fn format_checkpoint(field: &SpinorField) -> String {
    let m = field.mesh();
    let mut out = String::with_capacity(96 * (m.len() + 1));
    let _ = writeln!(
        out,
        "tau={} jmin={} jmax={} n={}",
        float(m.tau()),
        m.j_min(),
        m.j_max(),
        field.step()
    );
    for (i, (u, v)) in field.u().iter().zip(field.v()).enumerate() {
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            m.j_min() + i as i64,
            float(u.re),
            float(u.im),
            float(v.re),
            float(v.im)
        );
    }
    out
}

pub fn parse_checkpoint(text: &str) -> Result<SpinorField> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let field = read_frame(&mut lines, 0).map_err(|e| match e {
        Error::Format {
            line: 0,
            frame,
            msg,
        } => Error::Format {
            line: 1,
            frame,
            msg,
        },
        other => other,
    })?;
    if let Some((line, rest)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::Format {
            line,
            frame: 0,
            msg: format!("trailing content `{rest}`"),
        });
    }
    Ok(field)
}

pub fn write_checkpoint(field: &SpinorField, path: &Path) -> Result<()> {
    fs::write(path, format_checkpoint(field))?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<SpinorField> {
    parse_checkpoint(&fs::read_to_string(path)?)
}

fn header_value<'a>(token: Option<&'a str>, key: &str) -> std::result::Result<&'a str, String> {
    let token = token.ok_or_else(|| format!("missing `{key}=`"))?;
    token
        .strip_prefix(key)
        .and_then(|t| t.strip_prefix('='))
        .ok_or_else(|| format!("expected `{key}=`, found `{token}`"))
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|_| format!("cannot parse {what} `{s}`"))
}

fn read_frame<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    frame: usize,
) -> Result<SpinorField> {
    let fmt = |line: usize, msg: String| Error::Format { line, frame, msg };
    let (hline, header) = lines
        .next()
        .ok_or_else(|| fmt(0, "missing frame header (file truncated)".into()))?;
    let mut tok = header.split_whitespace();
    let parsed = (|| -> std::result::Result<(f64, i64, i64, usize), String> {
        let tau = parse_num(header_value(tok.next(), "tau")?, "tau")?;
        let j_min = parse_num(header_value(tok.next(), "jmin")?, "jmin")?;
        let j_max = parse_num(header_value(tok.next(), "jmax")?, "jmax")?;
        let n = parse_num(header_value(tok.next(), "n")?, "n")?;
        if let Some(extra) = tok.next() {
            return Err(format!("unexpected header token `{extra}`"));
        }
        Ok((tau, j_min, j_max, n))
    })();
    let (tau, j_min, j_max, n) =
        parsed.map_err(|m| fmt(hline, format!("malformed frame header: {m}")))?;
    let mesh = Mesh::new(tau, j_min, j_max).map_err(|e| fmt(hline, e.to_string()))?;
    let mut u = Vec::with_capacity(mesh.len());
    let mut v = Vec::with_capacity(mesh.len());
    let mut last_line = hline;
    for j in j_min..=j_max {
        let (line, text) = lines
            .next()
            .ok_or_else(|| fmt(last_line, format!("file truncated before cell {j}")))?;
        last_line = line;
        let parts: Vec<&str> = text.split_whitespace().collect();
        if parts.len() != 5 {
            return Err(fmt(
                line,
                format!("expected 5 fields, found {}", parts.len()),
            ));
        }
        let jj: i64 = parse_num(parts[0], "cell index").map_err(|m| fmt(line, m))?;
        if jj != j {
            return Err(fmt(line, format!("expected cell {j}, found {jj}")));
        }
        let mut x = [0.0; 4];
        for (k, p) in parts[1..].iter().enumerate() {
            x[k] = parse_num(p, "value").map_err(|m| fmt(line, m))?;
        }
        u.push(Complex64::new(x[0], x[1]));
        v.push(Complex64::new(x[2], x[3]));
    }
    SpinorField::new(mesh, u, v, n).map_err(|e| fmt(last_line, e.to_string()))
}

const FRAME_SEPARATOR: &str = "---";

/// History text: a `history frames=<count> m= alpha= beta= substeps_per_tau=
/// project_norm= closed_form_if_available=` line, then each frame in
/// checkpoint format followed by `---`.
pub fn format_history(history: &History) -> String {
    let p = &history.params;
    let o = &history.ode;
    let mut out = format!(
        "history frames={} m={} alpha={} beta={} substeps_per_tau={} project_norm={} closed_form_if_available={}\n",
        history.frames().len(),
        float(p.m),
        float(p.alpha),
        float(p.beta),
        o.substeps_per_tau,
        o.project_norm,
        o.closed_form_if_available
    );
    for f in history.frames() {
        out.push_str(&format_checkpoint(f));
        out.push_str(FRAME_SEPARATOR);
        out.push('\n');
    }
    out
}

pub fn parse_history(text: &str) -> Result<History> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, header) = lines.next().ok_or(Error::Format {
        line: 1,
        frame: 0,
        msg: "empty history file".into(),
    })?;
    let bad = |msg: String| Error::Format {
        line: 1,
        frame: 0,
        msg,
    };
    let mut tok = header.split_whitespace();
    if tok.next() != Some("history") {
        return Err(bad("expected `history` header".into()));
    }
    let mut next = |key: &str| header_value(tok.next(), key).map_err(&bad);
    let count: usize = parse_num(next("frames")?, "frame count").map_err(bad)?;
    let m = parse_num(next("m")?, "m").map_err(bad)?;
    let alpha = parse_num(next("alpha")?, "alpha").map_err(bad)?;
    let beta = parse_num(next("beta")?, "beta").map_err(bad)?;
    let substeps_per_tau = parse_num(next("substeps_per_tau")?, "substeps").map_err(bad)?;
    let project_norm = parse_num(next("project_norm")?, "flag").map_err(bad)?;
    let closed_form_if_available =
        parse_num(next("closed_form_if_available")?, "flag").map_err(bad)?;
    let params = SchemeParams::new(m, alpha, beta).map_err(|e| bad(e.to_string()))?;
    let ode = OdeOptions {
        substeps_per_tau,
        project_norm,
        closed_form_if_available,
    };

    let mut frames = Vec::with_capacity(count);
    let mut last_line = 1;
    for k in 0..count {
        let res = {
            let mut tracked = lines.by_ref().inspect(|(l, _)| last_line = *l);
            read_frame(&mut tracked, k)
        };
        let f = res.map_err(|e| match e {
            Error::Format {
                line: 0,
                frame,
                msg,
            } => Error::Format {
                line: last_line + 1,
                frame,
                msg,
            },
            other => other,
        })?;
        match lines.next() {
            Some((line, s)) if s.trim() == FRAME_SEPARATOR => last_line = line,
            Some((line, s)) => {
                return Err(Error::Format {
                    line,
                    frame: k,
                    msg: format!("expected `{FRAME_SEPARATOR}`, found `{s}`"),
                })
            }
            None => {
                return Err(Error::Format {
                    line: last_line + 1,
                    frame: k,
                    msg: "file truncated before frame separator".into(),
                })
            }
        }
        frames.push(f);
    }
    if let Some((line, s)) = lines.find(|(_, l)| !l.trim().is_empty()) {
        return Err(Error::Format {
            line,
            frame: count,
            msg: format!("content after the last frame: `{s}`"),
        });
    }
    History::from_frames(params, ode, frames)
}

pub fn write_history(history: &History, path: &Path) -> Result<()> {
    fs::write(path, format_history(history))?;
    Ok(())
}

pub fn read_history(path: &Path) -> Result<History> {
    parse_history(&fs::read_to_string(path)?)
}

/// One JSON object per line.
pub fn to_ndjson<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Line-buffered NDJSON sink for per-step records.
pub struct NdjsonWriter<W: std::io::Write> {
    inner: std::io::BufWriter<W>,
    next_n: Option<usize>,
}

impl NdjsonWriter<fs::File> {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self::new(fs::File::create(path)?))
    }
}

impl<W: std::io::Write> NdjsonWriter<W> {
    pub fn new(inner: W) -> Self {
        Self {
            inner: std::io::BufWriter::new(inner),
            next_n: None,
        }
    }

    /// Appends a record; step indices must arrive consecutively.
    pub fn write(&mut self, record: &StepRecord) -> Result<()> {
        if let Some(want) = self.next_n {
            if record.n != want {
                return Err(Error::InvalidArgument(format!(
                    "diagnostics out of order: expected n = {want}, got {}",
                    record.n
                )));
            }
        }
        self.next_n = Some(record.n + 1);
        serde_json::to_writer(&mut self.inner, record)?;
        self.inner.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        self.inner
            .into_inner()
            .map_err(|e| Error::Io(e.into_error()))
    }
}

pub fn parse_ndjson_records(text: &str) -> Result<Vec<StepRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
