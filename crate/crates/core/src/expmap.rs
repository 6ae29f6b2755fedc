//! Exponential map, tangent maps of morphisms and the checks built on them:
//! `T_0 exp_q = id`, the coordinate isometry condition, naturality
//! `Φ ∘ exp_q = exp_{Φ(q)} ∘ T_qΦ` and its fixed-point special cases.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesics::{check_tangent, integrate_geodesic, InitialCondition};
use crate::geometry::MetricChart;
use crate::grassmann::{koszul, GrassmannElement};
use crate::parallel::{self, Execution};
use crate::superexpr::{ChartSignature, Expr, SuperMorphism, SuperPoint};

/// Prefix of velocity coordinates on tangent charts.
pub const VELOCITY_PREFIX: &str = "v_";

/// A tangent vector at a body point.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentFiberPoint {
    pub base: Vec<f64>,
    pub vector: Vec<GrassmannElement>,
}

impl TangentFiberPoint {
    pub fn new(m: &MetricChart, base: Vec<f64>, vector: Vec<GrassmannElement>) -> Result<Self> {
        let sig = m.signature();
        if base.len() != sig.even_dim() {
            return Err(Error::InvalidPoint(format!(
                "base has {} coordinates, expected {}",
                base.len(),
                sig.even_dim()
            )));
        }
        if let Some(v) = m.domain_violation(&base) {
            return Err(Error::InvalidPoint(v));
        }
        let l = vector.first().map_or(0, GrassmannElement::generators);
        check_tangent(sig, l, &vector, "tangent vector")?;
        Ok(Self { base, vector })
    }

    pub fn generators(&self) -> usize {
        self.vector.first().map_or(0, GrassmannElement::generators)
    }
}

/// `exp_q(v)`: the geodesic from `(q, v)` evaluated at `t = 1`.
pub fn exp_at(m: &MetricChart, v: &TangentFiberPoint, dt: f64) -> Result<SuperPoint> {
    let l = v.generators();
    let ic = InitialCondition {
        position: SuperPoint::from_body(m.signature(), &v.base, l)?,
        velocity: v.vector.clone(),
    };
    check_tangent(m.signature(), l, &ic.velocity, "tangent vector")?;
    Ok(integrate_geodesic(m, &ic, 1.0, dt)?.last().position.clone())
}

/// Real Jacobian in parity block form; entry `(j, i)` is `∂_i Φ*(q_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearTangentMap {
    pub even_dim: usize,
    pub odd_dim: usize,
    pub matrix: DMatrix<f64>,
}

impl LinearTangentMap {
    pub fn identity(even_dim: usize, odd_dim: usize) -> Self {
        let n = even_dim + odd_dim;
        Self {
            even_dim,
            odd_dim,
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.even_dim + self.odd_dim
    }

    fn block_max(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>, other: &DMatrix<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for r in rows {
            for c in cols.clone() {
                worst = worst.max((self.matrix[(r, c)] - other[(r, c)]).abs());
            }
        }
        worst
    }

    pub fn max_deviation(&self, other: &DMatrix<f64>) -> f64 {
        self.block_max(0..self.dim(), 0..self.dim(), other)
    }

    pub fn max_deviation_even(&self, other: &DMatrix<f64>) -> f64 {
        self.block_max(0..self.even_dim, 0..self.even_dim, other)
    }

    pub fn max_deviation_odd(&self, other: &DMatrix<f64>) -> f64 {
        let n = self.dim();
        self.block_max(self.even_dim..n, self.even_dim..n, other)
    }

    /// Largest entry in the even-odd and odd-even blocks.
    pub fn mixed_block_max(&self) -> f64 {
        let n = self.dim();
        let zero = DMatrix::zeros(n, n);
        self.block_max(0..self.even_dim, self.even_dim..n, &zero)
            .max(self.block_max(self.even_dim..n, 0..self.even_dim, &zero))
    }

    /// Applies the map to a Grassmann-valued tangent vector: `w_j = Σ_i v_i J_ji`.
    pub fn apply(&self, v: &[GrassmannElement]) -> Vec<GrassmannElement> {
        let l = v.first().map_or(0, GrassmannElement::generators);
        (0..self.dim())
            .map(|j| {
                let mut w = GrassmannElement::zero(l);
                for (i, vi) in v.iter().enumerate() {
                    let c = self.matrix[(j, i)];
                    if c != 0.0 {
                        w.axpy(c, vi);
                    }
                }
                w
            })
            .collect()
    }
}

fn var(sig: &ChartSignature, index: usize) -> Expr {
    Expr::Var {
        index,
        odd: sig.is_odd(index),
    }
}

/// `TΦ` on the doubled charts `(q, v)`: `(TΦ)*(q_j) = Φ*(q_j)` and
/// `(TΦ)*(v_j) = Σ_i v_i ∂_i Φ*(q_j)`.
pub fn tangent_map(phi: &SuperMorphism) -> Result<SuperMorphism> {
    let src = phi.source();
    let dst = phi.target();
    let src2 = src.doubled(VELOCITY_PREFIX)?;
    let dst2 = dst.doubled(VELOCITY_PREFIX)?;
    let to_pos: Vec<usize> = (0..src.dim()).map(|i| src.doubled_indices(i).0).collect();
    let mut pullbacks = vec![Expr::zero(); dst2.dim()];
    for j in 0..dst.dim() {
        let (pj, vj) = dst.doubled_indices(j);
        let f = phi.pullback(j);
        pullbacks[pj] = f.reindex(&to_pos);
        let terms = (0..src.dim())
            .map(|i| {
                let d = f.partial(i, src.is_odd(i))?.reindex(&to_pos);
                let v = var(&src2, src.doubled_indices(i).1);
                Ok(Expr::Product(vec![v, d]))
            })
            .collect::<Result<Vec<_>>>()?;
        pullbacks[vj] = Expr::Sum(terms).simplify();
    }
    SuperMorphism::new(src2, dst2, pullbacks)
}

/// Body values of `∂_i Φ*(q_j)` at the body point `q`.
pub fn numerical_tangent_map(phi: &SuperMorphism, q: &[f64]) -> Result<LinearTangentMap> {
    let src = phi.source();
    let dst = phi.target();
    if src.dim() != dst.dim() || src.even_dim() != dst.even_dim() {
        return Err(Error::SignatureMismatch(
            "tangent maps need equal source and target dimensions".into(),
        ));
    }
    let p = SuperPoint::from_body(src, q, 0)?;
    let n = src.dim();
    let mut matrix = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            matrix[(j, i)] = phi.pullback(j).partial(i, src.is_odd(i))?.eval(&p)?.body();
        }
    }
    Ok(LinearTangentMap {
        even_dim: src.even_dim(),
        odd_dim: src.odd_dim(),
        matrix,
    })
}

/// Body point `Φ̃(q)`.
pub fn body_image(phi: &SuperMorphism, q: &[f64]) -> Result<Vec<f64>> {
    let p = SuperPoint::from_body(phi.source(), q, 0)?;
    let image = phi.apply(&p)?;
    Ok(image.body(phi.target()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JacobianReport {
    pub base: Vec<f64>,
    #[serde(skip)]
    pub jacobian: Option<LinearTangentMap>,
    pub even_deviation: f64,
    pub odd_deviation: f64,
    pub mixed_max: f64,
}

impl JacobianReport {
    pub fn max_deviation(&self) -> f64 {
        self.even_deviation.max(self.odd_deviation).max(self.mixed_max)
    }
}

/// Linearizes `v ↦ exp_q(v)` at `v = 0`. Even columns use central differences with
/// step `h` on bodies; odd columns read the coefficient of a single generator `θ`
/// in `exp_q(θ e_i)`.
pub fn exp_jacobian(
    m: &MetricChart,
    q: &[f64],
    h: f64,
    dt: f64,
    exec: Execution,
) -> Result<LinearTangentMap> {
    let sig = m.signature();
    let n = sig.dim();
    let ne = sig.even_dim();
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("h must be positive, got {h}")));
    }
    let columns = parallel::try_map_range(exec, n, |i| -> Result<Vec<f64>> {
        if i < ne {
            let shot = |s: f64| -> Result<Vec<f64>> {
                let mut v = vec![GrassmannElement::zero(0); n];
                v[i] = GrassmannElement::scalar(0, s);
                let out = exp_at(m, &TangentFiberPoint::new(m, q.to_vec(), v)?, dt)?;
                Ok(out.body(sig))
            };
            let plus = shot(h)?;
            let minus = shot(-h)?;
            let mut col: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            col.resize(n, 0.0);
            Ok(col)
        } else {
            let mut v = vec![GrassmannElement::zero(1); n];
            v[i] = GrassmannElement::generator(1, 0);
            let out = exp_at(m, &TangentFiberPoint::new(m, q.to_vec(), v)?, dt)?;
            Ok(out.values().iter().map(|x| x.coeff(1)).collect())
        }
    })?;
    let matrix = DMatrix::from_fn(n, n, |j, i| columns[i][j]);
    Ok(LinearTangentMap {
        even_dim: ne,
        odd_dim: n - ne,
        matrix,
    })
}

pub fn exp_jacobian_check(m: &MetricChart, q: &[f64], h: f64, dt: f64, exec: Execution) -> Result<JacobianReport> {
    let j = exp_jacobian(m, q, h, dt, exec)?;
    let id = DMatrix::identity(j.dim(), j.dim());
    Ok(JacobianReport {
        base: q.to_vec(),
        even_deviation: j.max_deviation_even(&id),
        odd_deviation: j.max_deviation_odd(&id),
        mixed_max: j.mixed_block_max(),
        jacobian: Some(j),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IsometryReport {
    pub max_deviation: f64,
    pub samples: usize,
    /// Set when the body Jacobian is singular at some sample.
    pub singular: bool,
}

/// Coordinate isometry condition for `Φ: M → N` at Grassmann sample points of `M`:
/// `g^M_ij = Σ_{k,l} (-1)^{|k|(|j|+|l|)} ∂_iΦ*(q_k) ∂_jΦ*(q_l) Φ*(g^N_kl)`.
pub fn isometry_check(
    m_src: &MetricChart,
    m_dst: &MetricChart,
    phi: &SuperMorphism,
    samples: &[SuperPoint],
    exec: Execution,
) -> Result<IsometryReport> {
    let src = m_src.signature();
    let dst = m_dst.signature();
    if phi.source() != src || phi.target() != dst {
        return Err(Error::SignatureMismatch(
            "morphism signatures differ from the metrics".into(),
        ));
    }
    let n_src = src.dim();
    let n_dst = dst.dim();
    let partials = (0..n_dst)
        .map(|k| {
            (0..n_src)
                .map(|i| phi.pullback(k).partial(i, src.is_odd(i)))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let per_sample = parallel::try_map(exec, samples, |p| -> Result<(f64, bool)> {
        let l = p.generators();
        let gm = m_src.metric_at(p)?;
        let image = phi.apply(p)?;
        let gn = m_dst.metric_at(&image)?;
        // d[k][i] = ∂_iΦ*(q_k)(p)
        let d = partials
            .iter()
            .map(|row| row.iter().map(|e| e.eval(p)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let body = DMatrix::from_fn(n_dst, n_src, |k, i| d[k][i].body());
        let singular = n_src != n_dst || body.determinant().abs() < 1e-12;
        let mut worst: f64 = 0.0;
        for i in 0..n_src {
            for j in 0..n_src {
                let mut rhs = GrassmannElement::zero(l);
                for k in 0..n_dst {
                    for ll in 0..n_dst {
                        if d[k][i].is_zero() || d[ll][j].is_zero() || gn[k][ll].is_zero() {
                            continue;
                        }
                        let sign = koszul(dst.parity_bit(k), src.parity_bit(j) ^ dst.parity_bit(ll));
                        rhs.add_triple_product(sign, &d[k][i], &d[ll][j], &gn[k][ll]);
                    }
                }
                worst = worst.max(rhs.max_abs_diff(&gm[i][j]));
            }
        }
        Ok((worst, singular))
    })?;
    Ok(IsometryReport {
        max_deviation: per_sample.iter().map(|r| r.0).fold(0.0, f64::max),
        samples: samples.len(),
        singular: per_sample.iter().any(|r| r.1),
    })
}

/// Largest coefficient deviation of `Φ(exp_q(v))` from `exp_{Φ̃(q)}(T_qΦ v)` over `vectors`.
pub fn naturality_check(
    m: &MetricChart,
    phi: &SuperMorphism,
    q: &[f64],
    vectors: &[Vec<GrassmannElement>],
    dt: f64,
    exec: Execution,
) -> Result<f64> {
    let tq = numerical_tangent_map(phi, q)?;
    let q_image = body_image(phi, q)?;
    let devs = parallel::try_map(exec, vectors, |v| -> Result<f64> {
        let lhs = phi.apply(&exp_at(m, &TangentFiberPoint::new(m, q.to_vec(), v.clone())?, dt)?)?;
        let w = tq.apply(v);
        let rhs = exp_at(m, &TangentFiberPoint::new(m, q_image.clone(), w)?, dt)?;
        Ok(lhs.max_abs_diff(&rhs))
    })?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}

/// Expected linear part of a map fixing `q`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedLinearization {
    /// `T_qΦ = id`: then `Φ ∘ exp_q = exp_q`.
    Identity,
    /// `T_qΦ = -id`: then `Φ(exp_q(v)) = exp_q(-v)`.
    Reflection,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPointStatus {
    Passed,
    Failed,
    NotAnIsometry,
    HypothesesNotMet,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedPointReport {
    pub status: FixedPointStatus,
    pub isometry_deviation: f64,
    /// Distance of `Φ̃(q)` from `q` plus distance of `T_qΦ` from the expected map.
    pub hypothesis_deviation: f64,
    pub max_deviation: f64,
    pub detail: String,
}

/// Gate order: isometry condition, then `Φ̃(q) = q` with the expected `T_qΦ`, then
/// `Φ(exp_q(v)) = exp_q(±v)` on the sampled vectors.
#[allow(clippy::too_many_arguments)]
pub fn linearization_test(
    m: &MetricChart,
    phi: &SuperMorphism,
    q: &[f64],
    expected: FixedLinearization,
    samples: &[SuperPoint],
    vectors: &[Vec<GrassmannElement>],
    dt: f64,
    tol: f64,
    exec: Execution,
) -> Result<FixedPointReport> {
    let iso = isometry_check(m, m, phi, samples, exec)?;
    let mut report = FixedPointReport {
        status: FixedPointStatus::NotAnIsometry,
        isometry_deviation: iso.max_deviation,
        hypothesis_deviation: f64::INFINITY,
        max_deviation: f64::INFINITY,
        detail: String::new(),
    };
    if !(iso.max_deviation <= tol) || iso.singular {
        report.detail = format!("isometry condition fails (deviation {:e})", iso.max_deviation);
        return Ok(report);
    }
    let sign = match expected {
        FixedLinearization::Identity => 1.0,
        FixedLinearization::Reflection => -1.0,
    };
    let tq = numerical_tangent_map(phi, q)?;
    let n = tq.dim();
    let target = DMatrix::identity(n, n) * sign;
    let moved = body_image(phi, q)?
        .iter()
        .zip(q)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    report.hypothesis_deviation = moved.max(tq.max_deviation(&target));
    if !(report.hypothesis_deviation <= tol) {
        report.status = FixedPointStatus::HypothesesNotMet;
        report.detail = format!(
            "hypotheses not met: fixed point moved by {moved:e}, tangent map off by {:e}",
            tq.max_deviation(&target)
        );
        return Ok(report);
    }
    let devs = parallel::try_map(exec, vectors, |v| -> Result<f64> {
        let lhs = phi.apply(&exp_at(m, &TangentFiberPoint::new(m, q.to_vec(), v.clone())?, dt)?)?;
        let w: Vec<GrassmannElement> = v.iter().map(|x| x.scale(sign)).collect();
        let rhs = exp_at(m, &TangentFiberPoint::new(m, q.to_vec(), w)?, dt)?;
        Ok(lhs.max_abs_diff(&rhs))
    })?;
    report.max_deviation = devs.into_iter().fold(0.0, f64::max);
    report.status = if report.max_deviation <= tol {
        FixedPointStatus::Passed
    } else {
        FixedPointStatus::Failed
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ge(l: usize, pairs: &[(u32, f64)]) -> GrassmannElement {
        GrassmannElement::from_pairs(l, pairs).unwrap()
    }

    fn flat12() -> MetricChart {
        let sig = ChartSignature::new(&["x"], &["th1", "th2"]).unwrap();
        MetricChart::parse(
            "flat",
            sig,
            &[vec!["1", "0", "0"], vec!["0", "0", "1"], vec!["0", "-1", "0"]],
            vec![(-10.0, 10.0)],
        )
        .unwrap()
    }

    fn c_metric() -> MetricChart {
        let sig = ChartSignature::new(&["x"], &["th1", "th2"]).unwrap();
        MetricChart::parse(
            "c",
            sig,
            &[
                vec!["1", "0", "0"],
                vec!["0", "0", "1 + x"],
                vec!["0", "-(1 + x)", "0"],
            ],
            vec![(-0.9, 5.0)],
        )
        .unwrap()
    }

    fn plane() -> MetricChart {
        let sig = ChartSignature::new(&["x", "y"], &[] as &[&str]).unwrap();
        MetricChart::parse("plane", sig, &[vec!["1", "0"], vec!["0", "1"]], vec![(-5.0, 5.0); 2]).unwrap()
    }

    #[test]
    fn exp_flat_is_translation() {
        let m = flat12();
        let v = vec![ge(1, &[(0, 0.5)]), ge(1, &[(1, 1.0)]), ge(1, &[])];
        let p = exp_at(&m, &TangentFiberPoint::new(&m, vec![0.2], v).unwrap(), 1e-2).unwrap();
        assert!((p.value(0).body() - 0.7).abs() < 1e-12);
        assert!((p.value(1).coeff(1) - 1.0).abs() < 1e-12);
        let zero = vec![ge(1, &[]); 3];
        let p = exp_at(&m, &TangentFiberPoint::new(&m, vec![0.2], zero).unwrap(), 1e-2).unwrap();
        assert_eq!(p.value(0).body(), 0.2);
    }

    #[test]
    fn tangent_map_examples() {
        let sig = ChartSignature::new(&["x"], &[] as &[&str]).unwrap();
        let tgt = ChartSignature::new(&["y"], &[] as &[&str]).unwrap();
        let phi = SuperMorphism::parse(&sig, &tgt, &[("y", "x^2")]).unwrap();
        let t = tangent_map(&phi).unwrap();
        let d = sig.doubled(VELOCITY_PREFIX).unwrap();
        let at = SuperPoint::from_body(&d, &[3.0, 2.0], 0).unwrap();
        assert_eq!(t.pullback(1).eval(&at).unwrap().body(), 12.0);
        let j = numerical_tangent_map(&phi, &[3.0]).unwrap();
        assert_eq!(j.matrix[(0, 0)], 6.0);

        let id = SuperMorphism::identity(flat12().signature());
        let t = tangent_map(&id).unwrap();
        assert_eq!(t, SuperMorphism::identity(t.source()));
    }

    #[test]
    fn numerical_map_odd_scaling() {
        let m = flat12();
        let phi = SuperMorphism::parse(
            m.signature(),
            m.signature(),
            &[("x", "x"), ("th1", "2*th1"), ("th2", "th2")],
        )
        .unwrap();
        let j = numerical_tangent_map(&phi, &[0.0]).unwrap();
        assert_eq!(j.matrix[(1, 1)], 2.0);
        assert_eq!(j.mixed_block_max(), 0.0);
    }

    #[test]
    fn jacobian_identity() {
        let m = flat12();
        let r = exp_jacobian_check(&m, &[0.0], 1e-4, 1e-2, Execution::Sequential).unwrap();
        assert!(r.max_deviation() < 1e-9, "{r:?}");
        let m = c_metric();
        let r = exp_jacobian_check(&m, &[0.0], 1e-4, 1e-3, Execution::Sequential).unwrap();
        assert!(r.even_deviation < 1e-5 && r.odd_deviation < 1e-9, "{r:?}");
    }

    #[test]
    fn isometries() {
        let m = flat12();
        let mut rng_points = Vec::new();
        for k in 0..5 {
            let x = k as f64 * 0.3 - 0.6;
            rng_points.push(
                SuperPoint::new(
                    m.signature(),
                    vec![ge(2, &[(0, x), (3, 0.4)]), ge(2, &[(1, 0.3), (2, -0.2)]), ge(2, &[(2, 0.5)])],
                )
                .unwrap(),
            );
        }
        let sym = SuperMorphism::parse(
            m.signature(),
            m.signature(),
            &[("x", "x"), ("th1", "3*th1"), ("th2", "th2/3")],
        )
        .unwrap();
        let r = isometry_check(&m, &m, &sym, &rng_points, Execution::Sequential).unwrap();
        assert!(r.max_deviation < 1e-12);
        let bad = SuperMorphism::parse(
            m.signature(),
            m.signature(),
            &[("x", "x"), ("th1", "2*th1"), ("th2", "th2")],
        )
        .unwrap();
        assert!(isometry_check(&m, &m, &bad, &rng_points, Execution::Sequential).unwrap().max_deviation > 0.5);

        let p = plane();
        let pts: Vec<SuperPoint> = (0..3)
            .map(|k| SuperPoint::from_body(p.signature(), &[k as f64 * 0.5, 0.1], 0).unwrap())
            .collect();
        let rot = SuperMorphism::parse(
            p.signature(),
            p.signature(),
            &[("x", "cos(0.3)*x - sin(0.3)*y"), ("y", "sin(0.3)*x + cos(0.3)*y")],
        )
        .unwrap();
        assert!(isometry_check(&p, &p, &rot, &pts, Execution::Sequential).unwrap().max_deviation < 1e-14);
    }

    #[test]
    fn naturality_on_c_metric() {
        let m = c_metric();
        let phi = SuperMorphism::parse(
            m.signature(),
            m.signature(),
            &[("x", "x"), ("th1", "2*th1 + 0.5*th2"), ("th2", "th2/2")],
        )
        .unwrap();
        let vs = vec![vec![ge(2, &[(0, 0.4)]), ge(2, &[(1, 0.7)]), ge(2, &[(2, -0.3)])]];
        let d = naturality_check(&m, &phi, &[0.1], &vs, 1e-3, Execution::Sequential).unwrap();
        assert!(d < 1e-6, "{d}");
        let bad = SuperMorphism::parse(
            m.signature(),
            m.signature(),
            &[("x", "x"), ("th1", "2*th1"), ("th2", "th2")],
        )
        .unwrap();
        let d = naturality_check(&m, &bad, &[0.1], &vs, 1e-3, Execution::Sequential).unwrap();
        assert!(d > 1e-3, "{d}");
    }

    #[test]
    fn rotation_by_pi_fails_identity_hypothesis() {
        let p = plane();
        let pts = vec![SuperPoint::from_body(p.signature(), &[0.1, 0.2], 0).unwrap()];
        let rot = SuperMorphism::parse(p.signature(), p.signature(), &[("x", "-x"), ("y", "-y")]).unwrap();
        let vs = vec![vec![ge(0, &[(0, 0.3)]), ge(0, &[(0, -0.2)])]];
        let r = linearization_test(
            &p,
            &rot,
            &[0.0, 0.0],
            FixedLinearization::Identity,
            &pts,
            &vs,
            1e-2,
            1e-8,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(r.status, FixedPointStatus::HypothesesNotMet);
        let r = linearization_test(
            &p,
            &rot,
            &[0.0, 0.0],
            FixedLinearization::Reflection,
            &pts,
            &vs,
            1e-2,
            1e-8,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(r.status, FixedPointStatus::Passed);
        let id = SuperMorphism::identity(p.signature());
        let r = linearization_test(
            &p,
            &id,
            &[0.0, 0.0],
            FixedLinearization::Identity,
            &pts,
            &vs,
            1e-2,
            1e-8,
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(r.status, FixedPointStatus::Passed);
    }
}
