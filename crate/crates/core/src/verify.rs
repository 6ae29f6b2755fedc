//! Invariant suites run against a model: metric structure, geodesics, geodesic
//! flow, the exponential map and isometries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cotangent::{self, integrate_flow, phase_point_from, roundtrip_check};
use crate::error::{Error, Result};
use crate::expmap::{
    body_image, exp_jacobian_check, isometry_check, linearization_test, naturality_check,
    numerical_tangent_map, tangent_map, FixedPointStatus,
};
use crate::geodesics::{self, geodesic_residual, integrate_geodesic, speed_drift, InitialCondition};
use crate::geometry::{mat_mul, MetricChart};
use crate::grassmann::{koszul, GrassmannElement};
use crate::model::{Model, ToleranceSpec};
use crate::parallel::{self, Execution};
use crate::report::{Check, Report};
use crate::superexpr::{ChartSignature, SuperPoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    All,
    Metric,
    Geodesic,
    Flow,
    Exp,
    Isometry,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "metric" => Suite::Metric,
            "geodesic" => Suite::Geodesic,
            "flow" => Suite::Flow,
            "exp" => Suite::Exp,
            "isometry" => Suite::Isometry,
            other => return Err(Error::InvalidArgument(format!("unknown suite `{other}`"))),
        })
    }
}

impl std::fmt::Display for Suite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Suite::All => "all",
            Suite::Metric => "metric",
            Suite::Geodesic => "geodesic",
            Suite::Flow => "flow",
            Suite::Exp => "exp",
            Suite::Isometry => "isometry",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    pub exec: Execution,
    pub tolerances: ToleranceSpec,
    pub dt: f64,
    pub t_end: f64,
    pub jacobian_step: f64,
    pub random_points: usize,
    pub seed: u64,
}

impl VerifyOptions {
    pub fn for_model(model: &Model) -> Self {
        let d = model.defaults();
        Self {
            exec: Execution::default(),
            tolerances: model.tolerances(),
            dt: d.dt,
            t_end: d.t_end,
            jacobian_step: d.jacobian_step,
            random_points: 100,
            seed: 0x5eed,
        }
    }
}

/// Random Grassmann points: bodies near the sample box, souls with coefficients in
/// `[-0.5, 0.5]` on every mask of the right parity.
pub fn random_points(
    m: &MetricChart,
    samples: &[Vec<f64>],
    count: usize,
    generators: usize,
    seed: u64,
) -> Vec<SuperPoint> {
    let sig = m.signature();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ne = sig.even_dim();
    let ranges: Vec<(f64, f64)> = (0..ne)
        .map(|k| {
            let lo = samples.iter().map(|s| s[k]).fold(f64::INFINITY, f64::min);
            let hi = samples.iter().map(|s| s[k]).fold(f64::NEG_INFINITY, f64::max);
            let pad = 0.1 * (hi - lo).max(1.0);
            let (dlo, dhi) = m.domain()[k];
            let margin = |x: f64| if x.is_finite() { 1e-3 * (1.0 + x.abs()) } else { 0.0 };
            ((lo - pad).max(dlo + margin(dlo)), (hi + pad).min(dhi - margin(dhi)))
        })
        .collect();
    (0..count)
        .map(|_| {
            let values = (0..sig.dim())
                .map(|i| {
                    let mut v = random_element(&mut rng, generators, sig.parity_bit(i), 0.5);
                    if i < ne {
                        let (lo, hi) = ranges[i];
                        v.set(0, rng.gen_range(lo..hi));
                    }
                    v
                })
                .collect();
            SuperPoint::from_values_unchecked(generators, values)
        })
        .collect()
}

/// Random element of the given parity without body.
pub fn random_element(rng: &mut impl Rng, generators: usize, parity: u32, scale: f64) -> GrassmannElement {
    let mut v = GrassmannElement::zero(generators);
    for mask in 1..(1u32 << generators) {
        if mask.count_ones() % 2 == parity {
            v.set(mask, rng.gen_range(-scale..scale));
        }
    }
    v
}

/// Random parity-correct tangent vector; even components get a body in `[-scale, scale]`.
pub fn random_vector(rng: &mut impl Rng, sig: &ChartSignature, generators: usize, scale: f64) -> Vec<GrassmannElement> {
    (0..sig.dim())
        .map(|i| {
            let mut v = random_element(rng, generators, sig.parity_bit(i), scale);
            if !sig.is_odd(i) {
                v.set(0, rng.gen_range(-scale..scale));
            }
            v
        })
        .collect()
}

/// Largest coefficient of
/// `∂_i g_jk - Σ_l Γ^l_ij g_lk - (-1)^{|i||j|} Σ_l (-1)^{(|i|+|k|+|l|)|j|} Γ^l_ik g_jl`,
/// the coordinate form of `∂_i g(∂_j, ∂_k) = g(∇_i ∂_j, ∂_k) + (-1)^{|i||j|} g(∂_j, ∇_i ∂_k)`.
pub fn compatibility_defect(m: &MetricChart, p: &SuperPoint) -> Result<f64> {
    let sig = m.signature();
    let n = m.dim();
    let g = m.metric_at(p)?;
    let dg = m.partials_at(p)?;
    let gamma = m.christoffel_at(p)?;
    let b = |i: usize| sig.parity_bit(i);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut d = dg[i][j][k].clone();
                for l in 0..n {
                    d -= &(gamma.get(l, i, j) * &g[l][k]);
                    let sign = koszul(b(i), b(j)) * koszul(b(i) ^ b(k) ^ b(l), b(j));
                    d.axpy(-sign, &(gamma.get(l, i, k) * &g[j][l]));
                }
                worst = worst.max(d.max_abs());
            }
        }
    }
    Ok(worst)
}

/// Largest entry of `g^{-1} g - 1`.
pub fn inverse_defect(m: &MetricChart, p: &SuperPoint) -> Result<f64> {
    let g = m.metric_at(p)?;
    let ginv = m.inverse_at(p)?;
    let prod = mat_mul(&ginv, &g, p.generators());
    let mut worst: f64 = 0.0;
    for (i, row) in prod.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            let delta = GrassmannElement::scalar(p.generators(), if i == j { 1.0 } else { 0.0 });
            worst = worst.max(e.max_abs_diff(&delta));
        }
    }
    Ok(worst)
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn check_from<T>(name: &str, tol: f64, r: Result<T>, f: impl FnOnce(T) -> Check) -> Check {
    match r {
        Ok(v) => f(v),
        Err(e) => Check::failed(name, tol, e.to_string()),
    }
}

pub fn metric_suite(model: &Model, opts: &VerifyOptions) -> Vec<Check> {
    let m = &model.metric;
    let tol = opts.tolerances;
    let l = model.generators().max(2);
    let mut points: Vec<SuperPoint> = model
        .samples
        .iter()
        .filter_map(|s| SuperPoint::from_body(m.signature(), s, l).ok())
        .collect();
    points.extend(random_points(m, &model.samples, opts.random_points, l, opts.seed));

    let mut checks = Vec::new();
    let report = m.validate(&points, tol.identity);
    let deviation = report.max_parity_defect.max(report.max_symmetry_defect);
    let mut c = Check::within("metric.valid", deviation, tol.identity);
    if !report.passed {
        c.pass = false;
        c.detail = report.first_violation.clone();
    }
    checks.push(c);
    if !report.passed {
        return checks;
    }

    let per_point = |f: &(dyn Fn(&SuperPoint) -> Result<f64> + Sync)| -> Result<f64> {
        parallel::try_map(opts.exec, &points, |p| f(p)).map(max_of)
    };
    checks.push(check_from(
        "metric.inverse",
        tol.identity,
        per_point(&|p| inverse_defect(m, p)),
        |d| Check::within("metric.inverse", d, tol.identity),
    ));
    let sig = m.signature();
    let tables = m.christoffel_batch(&points, opts.exec);
    checks.push(check_from(
        "metric.christoffel_symmetry",
        tol.identity,
        tables.as_ref().map_err(Clone::clone).map(|ts| max_of(ts.iter().map(|t| t.symmetry_defect(sig)))),
        |d| Check::within("metric.christoffel_symmetry", d, tol.identity),
    ));
    checks.push(check_from(
        "metric.christoffel_parity",
        tol.identity,
        tables.as_ref().map_err(Clone::clone).map(|ts| max_of(ts.iter().map(|t| t.parity_defect(sig)))),
        |d| Check::within("metric.christoffel_parity", d, tol.identity),
    ));
    checks.push(check_from(
        "metric.compatibility",
        tol.compatibility,
        per_point(&|p| compatibility_defect(m, p)),
        |d| Check::within("metric.compatibility", d, tol.compatibility),
    ));
    let reduced = m.reduce_body();
    let body_defect = parallel::try_map(opts.exec, &model.samples, |q| -> Result<f64> {
        let table = m.christoffel_at(&SuperPoint::from_body(sig, q, 0)?)?;
        let classical = reduced.christoffel(q)?;
        let ne = sig.even_dim();
        let mut worst: f64 = 0.0;
        for k in 0..ne {
            for i in 0..ne {
                for j in 0..ne {
                    worst = worst.max((table.get(k, i, j).body() - classical[k][i][j]).abs());
                }
            }
        }
        Ok(worst)
    })
    .map(max_of);
    checks.push(check_from("metric.body_reduction", tol.identity, body_defect, |d| {
        Check::within("metric.body_reduction", d, tol.identity)
    }));
    checks
}

/// Largest deviation of the even bodies of a trajectory from the classical geodesic.
pub fn body_deviation(m: &MetricChart, traj: &geodesics::Trajectory, dt: f64, t_end: f64) -> Result<f64> {
    let sig = m.signature();
    let ne = sig.even_dim();
    let first = &traj.samples[0];
    let x0 = first.position.body(sig);
    let v0: Vec<f64> = first.velocity[..ne].iter().map(|v| v.body()).collect();
    let classical = m.reduce_body().integrate_geodesic(&x0, &v0, t_end, dt)?;
    let mut worst: f64 = 0.0;
    for (s, (_, x, v)) in traj.samples.iter().zip(&classical) {
        for k in 0..ne {
            worst = worst
                .max((s.position.value(k).body() - x[k]).abs())
                .max((s.velocity[k].body() - v[k]).abs());
        }
    }
    Ok(worst)
}

/// Largest deviation of the even bodies of a flow from the classical cotangent flow.
pub fn flow_body_deviation(m: &MetricChart, flow: &cotangent::FlowState, dt: f64, t_end: f64) -> Result<f64> {
    let sig = m.signature();
    let ne = sig.even_dim();
    let x0 = flow.initial.position.body(sig);
    let p0: Vec<f64> = flow.initial.momenta[..ne].iter().map(|p| p.body()).collect();
    let classical = m.reduce_body().integrate_cotangent(&x0, &p0, t_end, dt)?;
    let mut worst: f64 = 0.0;
    for (s, (_, x, p)) in flow.samples.iter().zip(&classical) {
        for k in 0..ne {
            worst = worst
                .max((s.position.value(k).body() - x[k]).abs())
                .max((s.momenta[k].body() - p[k]).abs());
        }
    }
    Ok(worst)
}

fn geodesic_checks(m: &MetricChart, name: &str, ic: &InitialCondition, opts: &VerifyOptions) -> Vec<Check> {
    let tol = opts.tolerances;
    let prefix = format!("geodesic.{name}");
    let traj = match integrate_geodesic(m, ic, opts.t_end, opts.dt) {
        Ok(t) => t,
        Err(e) => return vec![Check::failed(format!("{prefix}.integrate"), 0.0, e.to_string())],
    };
    let mut checks = Vec::new();
    let c = |suffix: &str, tol: f64, r: Result<f64>| {
        let n = format!("{prefix}.{suffix}");
        check_from(&n, tol, r, |d| Check::within(&n, d, tol))
    };
    checks.push(c("residual", tol.residual, geodesic_residual(m, &traj, Execution::Sequential)));
    checks.push(c("speed_drift", tol.conservation, speed_drift(m, &traj, Execution::Sequential)));
    checks.push(c("parity", 0.0, Ok(geodesics::parity_defect(m.signature(), &traj))));
    checks.push(c("body", tol.body, body_deviation(m, &traj, opts.dt, opts.t_end)));
    let again = integrate_geodesic(m, ic, opts.t_end, opts.dt);
    checks.push(c(
        "deterministic",
        0.0,
        again.map(|b| if b == traj { 0.0 } else { f64::INFINITY }),
    ));
    checks
}

pub fn geodesic_suite(model: &Model, opts: &VerifyOptions) -> Vec<Check> {
    parallel::map(opts.exec, &model.initial_conditions, |(name, ic)| {
        geodesic_checks(&model.metric, name, ic, opts)
    })
    .into_iter()
    .flatten()
    .collect()
}

fn flow_checks(m: &MetricChart, name: &str, ic: &InitialCondition, opts: &VerifyOptions) -> Vec<Check> {
    let tol = opts.tolerances;
    let prefix = format!("flow.{name}");
    let flow = match phase_point_from(m, ic).and_then(|p| integrate_flow(m, &p, opts.t_end, opts.dt)) {
        Ok(f) => f,
        Err(e) => return vec![Check::failed(format!("{prefix}.integrate"), 0.0, e.to_string())],
    };
    let c = |suffix: &str, tol: f64, r: Result<f64>| {
        let n = format!("{prefix}.{suffix}");
        check_from(&n, tol, r, |d| Check::within(&n, d, tol))
    };
    let mut checks = vec![c("energy_drift", tol.conservation, Ok(flow.energy_drift()))];
    let sig = m.signature();
    let parity = flow
        .samples
        .iter()
        .flat_map(|s| {
            (0..sig.dim()).map(move |k| {
                s.position
                    .value(k)
                    .parity_defect(sig.parity(k))
                    .max(s.momenta[k].parity_defect(sig.parity(k)))
            })
        })
        .fold(0.0, f64::max);
    checks.push(c("parity", 0.0, Ok(parity)));
    checks.push(c("body", tol.body, flow_body_deviation(m, &flow, opts.dt, opts.t_end)));
    match roundtrip_check(m, ic, opts.t_end, opts.dt) {
        Ok(r) => {
            checks.push(c("roundtrip_positions", tol.roundtrip, Ok(r.position_deviation)));
            checks.push(c("roundtrip_momenta", tol.roundtrip, Ok(r.momentum_deviation)));
            checks.push(c("initial_velocity", tol.identity, Ok(r.initial_velocity_deviation)));
        }
        Err(e) => checks.push(Check::failed(format!("{prefix}.roundtrip"), tol.roundtrip, e.to_string())),
    }
    checks
}

pub fn flow_suite(model: &Model, opts: &VerifyOptions) -> Vec<Check> {
    let m = &model.metric;
    let mut checks: Vec<Check> = parallel::map(opts.exec, &model.initial_conditions, |(name, ic)| {
        flow_checks(m, name, ic, opts)
    })
    .into_iter()
    .flatten()
    .collect();
    let l = model.generators().max(2);
    let points = random_points(m, &model.samples, opts.random_points, l, opts.seed ^ 1);
    let musical = parallel::try_map(opts.exec, &points, |p| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ p.value(0).body().to_bits());
        let v = random_vector(&mut rng, m.signature(), l, 1.0);
        let back = cotangent::sharp(m, p, &cotangent::flat(m, p, &v)?)?;
        Ok(cotangent::max_diff(&back, &v))
    })
    .map(max_of);
    let tol = opts.tolerances.identity;
    checks.push(check_from("flow.sharp_flat", tol, musical, |d| {
        Check::within("flow.sharp_flat", d, tol)
    }));
    checks
}

pub fn exp_suite(model: &Model, opts: &VerifyOptions) -> Vec<Check> {
    let m = &model.metric;
    let tol = opts.tolerances;
    let mut checks = Vec::new();
    let reports = parallel::map(opts.exec, &model.samples, |q| {
        exp_jacobian_check(m, q, opts.jacobian_step, opts.dt, Execution::Sequential)
    });
    for (k, r) in reports.into_iter().enumerate() {
        let name = format!("exp.jacobian.{k}");
        match r {
            Ok(r) => {
                let detail = format!("base {:?}", r.base);
                checks.push(Check::within(format!("{name}.even"), r.even_deviation, tol.jacobian).with_detail(detail.clone()));
                checks.push(
                    Check::within(format!("{name}.odd"), r.odd_deviation.max(r.mixed_max), tol.jacobian_odd)
                        .with_detail(detail),
                );
            }
            Err(e) => checks.push(Check::failed(name, tol.jacobian, e.to_string())),
        }
    }
    for nm in &model.morphisms {
        let name = format!("exp.tangent_map.{}", nm.name);
        let r = tangent_map_agreement(&nm.morphism, &model.samples);
        checks.push(check_from(&name, tol.identity, r, |d| Check::within(&name, d, tol.identity)));
    }
    checks
}

/// Largest difference between the velocity block of the symbolic tangent map's
/// Jacobian at body points and [`numerical_tangent_map`].
pub fn tangent_map_agreement(phi: &crate::superexpr::SuperMorphism, samples: &[Vec<f64>]) -> Result<f64> {
    let t = tangent_map(phi)?;
    let src = phi.source();
    let src2 = t.source();
    let n = src.dim();
    let mut worst: f64 = 0.0;
    for q in samples {
        let j = numerical_tangent_map(phi, q)?;
        let mut body = vec![0.0; src2.even_dim()];
        for (k, x) in q.iter().enumerate() {
            body[src.doubled_indices(k).0] = *x;
        }
        let p = SuperPoint::from_body(src2, &body, 0)?;
        for jj in 0..n {
            let vj = src.doubled_indices(jj).1;
            for i in 0..n {
                let vi = src.doubled_indices(i).1;
                let d = t.pullback(vj).partial(vi, src2.is_odd(vi))?.eval(&p)?.body();
                worst = worst.max((d - j.matrix[(jj, i)]).abs());
            }
        }
    }
    Ok(worst)
}

pub fn isometry_suite(model: &Model, opts: &VerifyOptions) -> Vec<Check> {
    let m = &model.metric;
    let tol = opts.tolerances;
    let l = model.generators().max(2);
    let points = random_points(m, &model.samples, opts.random_points, l, opts.seed ^ 2);
    let mut checks = Vec::new();
    for nm in &model.morphisms {
        let prefix = format!("isometry.{}", nm.name);
        let expect_iso = nm.spec.isometry.unwrap_or(true);
        let name = format!("{prefix}.condition");
        match isometry_check(m, m, &nm.morphism, &points, opts.exec) {
            Ok(r) if expect_iso => {
                let mut c = Check::within(&name, r.max_deviation, tol.identity);
                if r.singular {
                    c.pass = false;
                    c.detail = Some("body Jacobian is singular at a sample".into());
                }
                checks.push(c);
            }
            Ok(r) => checks.push(
                Check::exceeds(&name, r.max_deviation, tol.identity).with_detail("negative control"),
            ),
            Err(e) => checks.push(Check::failed(&name, tol.identity, e.to_string())),
        }
        if expect_iso {
            let name = format!("{prefix}.naturality");
            let r = naturality_over_samples(model, &nm.morphism, opts);
            checks.push(check_from(&name, tol.naturality, r, |d| Check::within(&name, d, tol.naturality)));
        }
        if let (Some(q), Some(lin)) = (&nm.spec.fixed_point, nm.spec.linearization) {
            let name = format!("{prefix}.fixed_point");
            let expected = nm.spec.expect.unwrap_or(FixedPointStatus::Passed);
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 3);
            let vectors: Vec<Vec<GrassmannElement>> =
                (0..3).map(|_| random_vector(&mut rng, m.signature(), l, 0.3)).collect();
            match linearization_test(m, &nm.morphism, q, lin, &points, &vectors, opts.dt, tol.naturality, opts.exec) {
                Ok(r) => {
                    let dev = if r.max_deviation.is_finite() { r.max_deviation } else { r.hypothesis_deviation };
                    let mut c = Check::within(&name, dev, tol.naturality);
                    c.pass = r.status == expected;
                    c.detail = Some(format!("status {:?}, expected {expected:?}. {}", r.status, r.detail));
                    checks.push(c);
                }
                Err(e) => checks.push(Check::failed(&name, tol.naturality, e.to_string())),
            }
        }
    }
    checks
}

/// Naturality deviation at every sample whose image stays in the domain, with three
/// random tangent vectors per sample.
pub fn naturality_over_samples(
    model: &Model,
    phi: &crate::superexpr::SuperMorphism,
    opts: &VerifyOptions,
) -> Result<f64> {
    let m = &model.metric;
    let l = model.generators().max(2);
    let usable: Vec<&Vec<f64>> = model
        .samples
        .iter()
        .filter(|q| body_image(phi, q).is_ok_and(|b| m.domain_violation(&b).is_none()))
        .collect();
    if usable.is_empty() {
        return Err(Error::InvalidArgument("no sample maps into the domain".into()));
    }
    let devs = parallel::try_map(opts.exec, &usable, |q| -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ q[0].to_bits());
        let vectors: Vec<Vec<GrassmannElement>> =
            (0..3).map(|_| random_vector(&mut rng, m.signature(), l, 0.3)).collect();
        naturality_check(m, phi, q, &vectors, opts.dt, Execution::Sequential)
    })?;
    Ok(max_of(devs))
}

/// Runs one suite, or all of them with the metric suite gating the rest.
pub fn run(model: &Model, suite: Suite, opts: &VerifyOptions) -> Report {
    let mut report = Report::new(model.name(), suite.to_string());
    let metric = metric_suite(model, opts);
    let metric_ok = metric.iter().all(|c| c.pass);
    if matches!(suite, Suite::All | Suite::Metric) {
        report.extend(metric.clone());
    }
    if suite == Suite::Metric {
        return report;
    }
    if !metric_ok {
        if suite != Suite::All {
            report.extend(metric.into_iter().filter(|c| !c.pass));
        }
        report.push(Check::failed(
            "skipped",
            0.0,
            "metric is invalid; remaining suites were not run",
        ));
        return report;
    }
    let suites: Vec<Suite> = match suite {
        Suite::All => vec![Suite::Geodesic, Suite::Flow, Suite::Exp, Suite::Isometry],
        s => vec![s],
    };
    for s in suites {
        report.extend(match s {
            Suite::Geodesic => geodesic_suite(model, opts),
            Suite::Flow => flow_suite(model, opts),
            Suite::Exp => exp_suite(model, opts),
            Suite::Isometry => isometry_suite(model, opts),
            Suite::All | Suite::Metric => Vec::new(),
        });
    }
    report
}
