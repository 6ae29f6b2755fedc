//! Command implementations behind the `superflow` binary.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use superflow::cotangent::{integrate_flow, phase_point_from};
use superflow::expmap::{exp_at, exp_jacobian_check, JacobianReport, TangentFiberPoint};
use superflow::geodesics::{integrate, Mode};
use superflow::grassmann::mask_label;
use superflow::model::{point_at, Model, ToleranceSpec};
use superflow::verify::{self, Suite, VerifyOptions};
use superflow::{Execution, GrassmannElement, SuperPoint};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const VERIFY_FAILED: i32 = 1;
    pub const MODEL: i32 = 2;
    pub const LEFT_DOMAIN: i32 = 3;
    pub const NUMERIC: i32 = 4;
    pub const IO: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] superflow::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
    #[error("verification failed: {0} check(s) did not pass")]
    VerifyFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use superflow::Error as E;
        match self {
            CliError::Usage(_) => exit::MODEL,
            CliError::VerifyFailed(_) => exit::VERIFY_FAILED,
            CliError::Io { .. } => exit::IO,
            CliError::Core(e) => match e {
                E::LeftDomain { .. } => exit::LEFT_DOMAIN,
                E::Model(_)
                | E::Syntax { .. }
                | E::UnknownIdentifier(_)
                | E::UnknownCoordinate(_)
                | E::DuplicateCoordinate(_)
                | E::ParityViolation(_)
                | E::SignatureMismatch(_)
                | E::InvalidMetric(_)
                | E::InvalidPoint(_)
                | E::InvalidArgument(_)
                | E::TooManyGenerators(_) => exit::MODEL,
                _ => exit::NUMERIC,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

pub fn load_model(path: &Path) -> CliResult<Model> {
    Ok(Model::load(path)?)
}

/// Parses `name=value` pairs, comma separated or repeated.
pub fn parse_assignments(items: &[String]) -> CliResult<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for item in items.iter().flat_map(|s| s.split(',')) {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("expected name=value, got `{item}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("`{value}` is not a number")))?;
        out.push((name.trim().to_string(), value));
    }
    Ok(out)
}

/// Applies `--tol` overrides: a bare number replaces every tolerance, `key=value`
/// replaces one field.
pub fn apply_tolerances(base: ToleranceSpec, overrides: &[String]) -> CliResult<ToleranceSpec> {
    let mut value = serde_json::to_value(base).expect("tolerances serialize");
    let fields = value.as_object_mut().expect("tolerances are an object");
    for item in overrides.iter().flat_map(|s| s.split(',')) {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let number = |s: &str| -> CliResult<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite() && *x >= 0.0)
                .ok_or_else(|| CliError::Usage(format!("invalid tolerance `{s}`")))
        };
        match item.split_once('=') {
            Some((key, v)) => {
                let key = key.trim();
                if !fields.contains_key(key) {
                    let known: Vec<&str> = fields.keys().map(String::as_str).collect();
                    return Err(CliError::Usage(format!(
                        "unknown tolerance `{key}` (known: {})",
                        known.join(", ")
                    )));
                }
                fields.insert(key.to_string(), number(v)?.into());
            }
            None => {
                let x = number(item)?;
                for v in fields.values_mut() {
                    *v = x.into();
                }
            }
        }
    }
    Ok(serde_json::from_value(value).expect("tolerances round-trip"))
}

/// Writes through a temporary file in the destination directory, so a failed run
/// never leaves a partial file behind.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let ctx = format!("writing {}", path.display());
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io_err(ctx.clone()))?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut w).map_err(io_err(ctx.clone()))?;
        w.flush().map_err(io_err(ctx.clone()))?;
    }
    tmp.persist(path).map_err(|e| CliError::Io {
        context: ctx,
        source: e.error,
    })?;
    Ok(())
}

/// Sends output to `out` atomically, or to `stdout` when no path is given.
fn emit(out: Option<&Path>, stdout: &mut dyn Write, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> CliResult<()> {
    match out {
        Some(p) => write_atomic(p, fill),
        None => fill(stdout).map_err(io_err("writing stdout")),
    }
}

fn resolve_point(model: &Model, ic: Option<&str>, point: &[String]) -> CliResult<SuperPoint> {
    match ic {
        Some(name) => {
            if !point.is_empty() {
                return Err(CliError::Usage("--ic and --point are mutually exclusive".into()));
            }
            Ok(model.initial_condition(name)?.position.clone())
        }
        None => {
            let body = model.body_point(&parse_assignments(point)?)?;
            if let Some(v) = model.metric.domain_violation(&body) {
                return Err(superflow::Error::InvalidPoint(v).into());
            }
            Ok(point_at(&model.metric, &body, model.generators())?)
        }
    }
}

/// Prints the nonzero Christoffel symbols at a point as a tab-separated table.
pub fn cmd_christoffel(model: &Model, ic: Option<&str>, point: &[String], out: Option<&Path>, stdout: &mut dyn Write) -> CliResult<()> {
    let p = resolve_point(model, ic, point)?;
    let chart = &model.metric;
    let report = chart.validate(&[p.clone()], model.tolerances().identity);
    if !report.passed {
        let why = report.first_violation.unwrap_or_else(|| "metric validation failed".into());
        return Err(superflow::Error::InvalidMetric(why).into());
    }
    let table = chart.christoffel_at(&p)?;
    let sig = chart.signature();
    emit(out, stdout, |w| {
        writeln!(w, "k\ti\tj\tvalue")?;
        for (k, i, j, v) in table.nonzero(1e-14) {
            writeln!(w, "{}\t{}\t{}\t{}", sig.name(k), sig.name(i), sig.name(j), v)?;
        }
        Ok(())
    })
}

pub struct RunArgs<'a> {
    pub ic: &'a str,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub out: Option<&'a Path>,
}

fn step(model: &Model, args: &RunArgs) -> CliResult<(f64, f64)> {
    let d = model.defaults();
    let t_end = args.t_end.unwrap_or(d.t_end);
    let dt = args.dt.unwrap_or(d.dt);
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(CliError::Usage(format!("--t-end must be positive, got {t_end}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(CliError::Usage(format!("--dt must be positive, got {dt}")));
    }
    Ok((t_end, dt))
}

pub fn cmd_geodesic(model: &Model, args: &RunArgs, mode: Mode, stdout: &mut dyn Write) -> CliResult<()> {
    let (t_end, dt) = step(model, args)?;
    let ic = model.initial_condition(args.ic)?;
    let traj = integrate(&model.metric, ic, mode, t_end, dt)?;
    emit(args.out, stdout, |w| traj.write_csv(w))
}

pub fn cmd_flow(model: &Model, args: &RunArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let (t_end, dt) = step(model, args)?;
    let ic = model.initial_condition(args.ic)?;
    let init = phase_point_from(&model.metric, ic)?;
    let flow = integrate_flow(&model.metric, &init, t_end, dt)?;
    emit(args.out, stdout, |w| flow.write_csv(w))
}

#[derive(Serialize)]
struct Coefficient {
    mask: String,
    value: f64,
}

#[derive(Serialize)]
struct ExpImage {
    initial_condition: String,
    vector: Vec<Vec<Coefficient>>,
    image: Vec<Vec<Coefficient>>,
}

#[derive(Serialize)]
struct ExpOutput {
    model: String,
    coordinates: Vec<String>,
    base: Vec<f64>,
    dt: f64,
    jacobian_step: f64,
    jacobian: JacobianReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    exp: Option<ExpImage>,
}

fn coefficients(e: &GrassmannElement) -> Vec<Coefficient> {
    e.to_pairs()
        .into_iter()
        .map(|(mask, value)| Coefficient {
            mask: mask_label(mask),
            value,
        })
        .collect()
}

pub struct ExpArgs<'a> {
    pub ic: Option<&'a str>,
    pub point: &'a [String],
    pub dt: Option<f64>,
    pub h: Option<f64>,
    pub out: Option<&'a Path>,
}

/// Jacobian of the exponential map at a body point, and `exp_q(v)` when an initial
/// condition supplies `v` (its position body is used as `q`).
pub fn cmd_exp(model: &Model, args: &ExpArgs, exec: Execution, stdout: &mut dyn Write) -> CliResult<()> {
    let d = model.defaults();
    let dt = args.dt.unwrap_or(d.dt);
    let h = args.h.unwrap_or(d.jacobian_step);
    if !(dt > 0.0 && h > 0.0 && dt.is_finite() && h.is_finite()) {
        return Err(CliError::Usage("--dt and --h must be positive".into()));
    }
    let sig = model.signature();
    let p = resolve_point(model, args.ic, args.point)?;
    let base = p.body(sig);
    let jacobian = exp_jacobian_check(&model.metric, &base, h, dt, exec)?;
    let exp = match args.ic {
        Some(name) => {
            let ic = model.initial_condition(name)?;
            let v = TangentFiberPoint::new(&model.metric, base.clone(), ic.velocity.clone())?;
            let image = exp_at(&model.metric, &v, dt)?;
            Some(ExpImage {
                initial_condition: name.to_string(),
                vector: ic.velocity.iter().map(coefficients).collect(),
                image: image.values().iter().map(coefficients).collect(),
            })
        }
        None => None,
    };
    let output = ExpOutput {
        model: model.name().to_string(),
        coordinates: sig.names().map(str::to_string).collect(),
        base,
        dt,
        jacobian_step: h,
        jacobian,
        exp,
    };
    let text = serde_json::to_string_pretty(&output).expect("exp output serializes");
    emit(args.out, stdout, |w| writeln!(w, "{text}"))
}

pub struct VerifyArgs<'a> {
    pub suite: Suite,
    pub tol: &'a [String],
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub out: Option<&'a Path>,
    pub exec: Execution,
}

/// Runs a verification suite; the JSON report is written even when checks fail.
pub fn cmd_verify(model: &Model, args: &VerifyArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let mut opts = VerifyOptions::for_model(model);
    opts.exec = args.exec;
    opts.tolerances = apply_tolerances(opts.tolerances, args.tol)?;
    if let Some(t) = args.t_end {
        opts.t_end = t;
    }
    if let Some(dt) = args.dt {
        opts.dt = dt;
    }
    if !(opts.dt > 0.0 && opts.t_end > 0.0 && opts.dt.is_finite() && opts.t_end.is_finite()) {
        return Err(CliError::Usage("--dt and --t-end must be positive".into()));
    }
    let report = verify::run(model, args.suite, &opts);
    let text = report.to_json();
    emit(args.out, stdout, |w| writeln!(w, "{text}"))?;
    match report.failures().count() {
        0 => Ok(()),
        n => Err(CliError::VerifyFailed(n)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assignments_split_on_commas() {
        let a = parse_assignments(&["x=1, y=-2.5".into(), "z=3".into()]).unwrap();
        assert_eq!(a, [("x".into(), 1.0), ("y".into(), -2.5), ("z".into(), 3.0)]);
        assert!(parse_assignments(&["x".into()]).is_err());
        assert!(parse_assignments(&["x=abc".into()]).is_err());
    }

    #[test]
    fn tolerance_overrides() {
        let base = ToleranceSpec::default();
        let t = apply_tolerances(base, &["1e-3".into(), "residual=2e-6".into()]).unwrap();
        assert_eq!(t.identity, 1e-3);
        assert_eq!(t.jacobian_odd, 1e-3);
        assert_eq!(t.residual, 2e-6);
        assert!(apply_tolerances(base, &["nope=1".into()]).is_err());
        assert!(apply_tolerances(base, &["-1".into()]).is_err());
        assert_eq!(apply_tolerances(base, &[]).unwrap(), base);
    }

    #[test]
    fn atomic_write_replaces_target() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        std::fs::write(&p, "old").unwrap();
        write_atomic(&p, |w| w.write_all(b"new")).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "new");
        let failed = write_atomic(&p, |w| {
            w.write_all(b"partial")?;
            Err(std::io::Error::other("boom"))
        });
        assert!(matches!(failed, Err(CliError::Io { .. })));
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "new");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn exit_codes() {
        let left = CliError::Core(superflow::Error::LeftDomain { t: 1.0, detail: String::new() });
        assert_eq!(left.exit_code(), exit::LEFT_DOMAIN);
        assert_eq!(CliError::VerifyFailed(2).exit_code(), exit::VERIFY_FAILED);
        assert_eq!(CliError::Core(superflow::Error::ZeroBody).exit_code(), exit::NUMERIC);
        assert_eq!(CliError::Core(superflow::Error::Model("x".into())).exit_code(), exit::MODEL);
    }
}
