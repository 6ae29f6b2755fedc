//! Graded metrics on a chart, their pointwise inverse over the Grassmann
//! algebra, and Levi-Civita Christoffel symbols
//!
//! ```text
//! Γ^k_ij = ½ Σ_l [ ∂_i g_jl + (-1)^{|i||j|} ∂_j g_il - (-1)^{|l|(|i|+|j|)} ∂_l g_ij ] g^lk
//! ```
//!
//! evaluated at Grassmann-valued points with the factor order as written.

use nalgebra::DMatrix;

use crate::classical::ClassicalMetric;
use crate::error::{Error, Result};
use crate::grassmann::{koszul, GrassmannElement, Parity};
use crate::parallel::{self, Execution};
use crate::superexpr::{ChartSignature, Expr, SuperPoint};

/// Square matrix of Grassmann numbers, row-major.
pub type GrassmannMatrix = Vec<Vec<GrassmannElement>>;

/// Absolute tolerances used by the structural checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub identity: f64,
    pub compatibility: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: 1e-10,
            compatibility: 1e-8,
        }
    }
}

/// One open interval per even coordinate; infinite ends are allowed.
pub type DomainBox = Vec<(f64, f64)>;

#[derive(Clone, Debug)]
pub struct MetricChart {
    name: String,
    sig: ChartSignature,
    g: Vec<Vec<Expr>>,
    /// `dg[l][i][j] = ∂_l g_ij`
    dg: Vec<Vec<Vec<Expr>>>,
    /// Every `∂_l g_ij` is identically zero.
    constant: bool,
    domain: DomainBox,
}

impl MetricChart {
    pub fn new(
        name: impl Into<String>,
        sig: ChartSignature,
        g: Vec<Vec<Expr>>,
        domain: DomainBox,
    ) -> Result<Self> {
        let n = sig.dim();
        if g.len() != n || g.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidMetric(format!(
                "metric must be {n}x{n} for a {}|{} chart",
                sig.even_dim(),
                sig.odd_dim()
            )));
        }
        if domain.len() != sig.even_dim() {
            return Err(Error::InvalidMetric(format!(
                "domain box has {} intervals for {} even coordinates",
                domain.len(),
                sig.even_dim()
            )));
        }
        if domain.iter().any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::InvalidMetric("empty domain interval".into()));
        }
        for row in &g {
            for e in row {
                e.check_parity()?;
            }
        }
        let dg = (0..n)
            .map(|l| {
                g.iter()
                    .map(|row| {
                        row.iter()
                            .map(|e| e.partial(l, sig.is_odd(l)))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            name: name.into(),
            sig,
            g,
            constant: dg.iter().flatten().flatten().all(Expr::is_zero),
            dg,
            domain,
        })
    }

    /// Builds a chart from a matrix of expression strings.
    pub fn parse<S: AsRef<str>>(
        name: impl Into<String>,
        sig: ChartSignature,
        entries: &[Vec<S>],
        domain: DomainBox,
    ) -> Result<Self> {
        let g = entries
            .iter()
            .map(|row| {
                row.iter()
                    .map(|s| Expr::parse(s.as_ref(), &sig))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, sig, g, domain)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn signature(&self) -> &ChartSignature {
        &self.sig
    }

    pub fn dim(&self) -> usize {
        self.sig.dim()
    }

    pub fn entry(&self, i: usize, j: usize) -> &Expr {
        &self.g[i][j]
    }

    pub fn entries(&self) -> &[Vec<Expr>] {
        &self.g
    }

    pub fn entry_partial(&self, l: usize, i: usize, j: usize) -> &Expr {
        &self.dg[l][i][j]
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    /// `None` when the body lies in the open domain box, otherwise a description.
    pub fn domain_violation(&self, body: &[f64]) -> Option<String> {
        for (k, (&x, &(lo, hi))) in body.iter().zip(&self.domain).enumerate() {
            if !(x > lo && x < hi) {
                return Some(format!(
                    "{} = {x} outside ({lo}, {hi})",
                    self.sig.name(k)
                ));
            }
        }
        None
    }

    pub fn check_point(&self, p: &SuperPoint) -> Result<()> {
        if p.values().len() != self.dim() {
            return Err(Error::InvalidPoint(format!(
                "expected {} coordinates, got {}",
                self.dim(),
                p.values().len()
            )));
        }
        if let Some(v) = self.domain_violation(&p.body(&self.sig)) {
            return Err(Error::InvalidPoint(v));
        }
        Ok(())
    }

    pub fn metric_at(&self, p: &SuperPoint) -> Result<GrassmannMatrix> {
        self.check_point(p)?;
        self.g
            .iter()
            .map(|row| row.iter().map(|e| e.eval(p)).collect())
            .collect()
    }

    /// `g^{ij}` with `Σ_k g^{ik} g_kj = δ_ij`, exact over the algebra.
    pub fn inverse_at(&self, p: &SuperPoint) -> Result<GrassmannMatrix> {
        let g = self.metric_at(p)?;
        invert_matrix(&g, p.generators())
    }

    pub fn christoffel_at(&self, p: &SuperPoint) -> Result<ChristoffelTable> {
        let ginv = self.inverse_at(p)?;
        self.christoffel_with_inverse(p, &ginv)
    }

    /// True when no metric entry depends on the coordinates, so every Christoffel
    /// symbol vanishes.
    pub fn has_constant_coefficients(&self) -> bool {
        self.constant
    }

    pub(crate) fn christoffel_with_inverse(
        &self,
        p: &SuperPoint,
        ginv: &GrassmannMatrix,
    ) -> Result<ChristoffelTable> {
        let n = self.dim();
        let l_gen = p.generators();
        let mut table = ChristoffelTable::zero(n, l_gen);
        if self.constant {
            return Ok(table);
        }
        let dg = self.partials_at(p)?;
        let par = |i: usize| self.sig.parity_bit(i);
        let mut brackets = vec![GrassmannElement::zero(l_gen); n];
        for i in 0..n {
            for j in 0..n {
                let mut any = false;
                for (l, b) in brackets.iter_mut().enumerate() {
                    b.coeffs_mut().fill(0.0);
                    *b += &dg[i][j][l];
                    b.axpy(koszul(par(i), par(j)), &dg[j][i][l]);
                    b.axpy(-koszul(par(l), par(i) ^ par(j)), &dg[l][i][j]);
                    any |= !b.is_zero();
                }
                if !any {
                    continue;
                }
                for k in 0..n {
                    let acc = table.get_mut(k, i, j);
                    for l in 0..n {
                        if brackets[l].is_zero() || ginv[l][k].is_zero() {
                            continue;
                        }
                        acc.add_product(0.5, &brackets[l], &ginv[l][k]);
                    }
                }
            }
        }
        Ok(table)
    }

    /// `out[l][i][j] = (∂_l g_ij)(p)`
    pub fn partials_at(&self, p: &SuperPoint) -> Result<Vec<GrassmannMatrix>> {
        self.dg
            .iter()
            .map(|m| {
                m.iter()
                    .map(|row| row.iter().map(|e| e.eval(p)).collect())
                    .collect()
            })
            .collect()
    }

    /// `out[i][a][c] = ∂_i (g^{ac})` from differentiating `g^{-1} g = 1`:
    /// `∂_i g^{ac} = -Σ_{k,b} (-1)^{|i|(|a|+|k|)} g^{ak} (∂_i g_kb) g^{bc}`.
    pub fn inverse_partials_at(
        &self,
        p: &SuperPoint,
        ginv: &GrassmannMatrix,
    ) -> Result<Vec<GrassmannMatrix>> {
        let n = self.dim();
        let l_gen = p.generators();
        let dg = self.partials_at(p)?;
        let par = |i: usize| self.sig.parity_bit(i);
        let mut out = vec![vec![vec![GrassmannElement::zero(l_gen); n]; n]; n];
        for (i, dgi) in dg.iter().enumerate() {
            // (∂_i g) g^{-1}
            let mut right = vec![vec![GrassmannElement::zero(l_gen); n]; n];
            for k in 0..n {
                for c in 0..n {
                    let mut acc = GrassmannElement::zero(l_gen);
                    for b in 0..n {
                        if dgi[k][b].is_zero() || ginv[b][c].is_zero() {
                            continue;
                        }
                        acc.add_product(1.0, &dgi[k][b], &ginv[b][c]);
                    }
                    right[k][c] = acc;
                }
            }
            for a in 0..n {
                for c in 0..n {
                    let mut acc = GrassmannElement::zero(l_gen);
                    for k in 0..n {
                        if ginv[a][k].is_zero() || right[k][c].is_zero() {
                            continue;
                        }
                        let sign = -koszul(par(i), par(a) ^ par(k));
                        acc.add_product(sign, &ginv[a][k], &right[k][c]);
                    }
                    out[i][a][c] = acc;
                }
            }
        }
        Ok(out)
    }

    /// Christoffel tables at many points.
    pub fn christoffel_batch(
        &self,
        points: &[SuperPoint],
        exec: Execution,
    ) -> Result<Vec<ChristoffelTable>> {
        parallel::try_map(exec, points, |p| self.christoffel_at(p))
    }

    /// Checks parity, graded symmetry and body nondegeneracy at the samples.
    pub fn validate(&self, samples: &[SuperPoint], tol: f64) -> ValidationReport {
        metric_validate(self, samples, tol)
    }

    pub fn reduce_body(&self) -> ClassicalMetric {
        reduce_body(self)
    }
}

/// Inverse of a Grassmann matrix whose body matrix is invertible:
/// `(B + N)^{-1} = Σ_k (-B^{-1} N)^k B^{-1}`, which terminates since `N` is nilpotent.
pub fn invert_matrix(g: &GrassmannMatrix, generators: usize) -> Result<GrassmannMatrix> {
    let n = g.len();
    let body = DMatrix::from_fn(n, n, |i, j| g[i][j].body());
    let binv = body
        .clone()
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::SingularBody(format!("{body}")))?;
    let binv_g: GrassmannMatrix = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| GrassmannElement::scalar(generators, binv[(i, j)]))
                .collect()
        })
        .collect();
    if g.iter().flatten().all(|e| e.coeffs()[1..].iter().all(|c| *c == 0.0)) {
        return Ok(binv_g);
    }
    // M = -B^{-1} N
    let mut m = vec![vec![GrassmannElement::zero(generators); n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = GrassmannElement::zero(generators);
            for k in 0..n {
                let c = binv[(i, k)];
                if c != 0.0 {
                    acc.axpy(-c, &g[k][j].soul());
                }
            }
            m[i][j] = acc;
        }
    }
    let mut sum = binv_g.clone();
    let mut term = binv_g;
    for _ in 0..generators {
        term = mat_mul(&m, &term, generators);
        if term.iter().flatten().all(GrassmannElement::is_zero) {
            break;
        }
        for (srow, trow) in sum.iter_mut().zip(&term) {
            for (s, t) in srow.iter_mut().zip(trow) {
                *s += t;
            }
        }
    }
    Ok(sum)
}

pub fn mat_mul(a: &GrassmannMatrix, b: &GrassmannMatrix, generators: usize) -> GrassmannMatrix {
    let n = a.len();
    let p = b.first().map_or(0, Vec::len);
    (0..n)
        .map(|i| {
            (0..p)
                .map(|j| {
                    let mut acc = GrassmannElement::zero(generators);
                    for (k, brow) in b.iter().enumerate() {
                        if a[i][k].is_zero() || brow[j].is_zero() {
                            continue;
                        }
                        acc.add_product(1.0, &a[i][k], &brow[j]);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// `Γ^k_ij` at one point, stored as `[k][i][j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChristoffelTable {
    n: usize,
    data: Vec<GrassmannElement>,
}

impl ChristoffelTable {
    pub fn zero(n: usize, generators: usize) -> Self {
        Self {
            n,
            data: vec![GrassmannElement::zero(generators); n * n * n],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> &GrassmannElement {
        &self.data[(k * self.n + i) * self.n + j]
    }

    pub fn get_mut(&mut self, k: usize, i: usize, j: usize) -> &mut GrassmannElement {
        &mut self.data[(k * self.n + i) * self.n + j]
    }

    /// Nonzero entries as `(k, i, j, value)`.
    pub fn nonzero(&self, tol: f64) -> Vec<(usize, usize, usize, &GrassmannElement)> {
        let n = self.n;
        let mut out = Vec::new();
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let v = self.get(k, i, j);
                    if v.max_abs() > tol {
                        out.push((k, i, j, v));
                    }
                }
            }
        }
        out
    }

    /// Largest violation of `Γ^k_ij = (-1)^{|i||j|} Γ^k_ji`.
    pub fn symmetry_defect(&self, sig: &ChartSignature) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut d = self.get(k, i, j).clone();
                    d.axpy(
                        -koszul(sig.parity_bit(i), sig.parity_bit(j)),
                        self.get(k, j, i),
                    );
                    worst = worst.max(d.max_abs());
                }
            }
        }
        worst
    }

    /// Largest coefficient on a mask of the wrong parity (`|i|+|j|+|k|`).
    pub fn parity_defect(&self, sig: &ChartSignature) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let bit = sig.parity_bit(i) ^ sig.parity_bit(j) ^ sig.parity_bit(k);
                    worst = worst.max(self.get(k, i, j).parity_defect(Parity::from_bit(bit)));
                }
            }
        }
        worst
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub first_violation: Option<String>,
    pub max_parity_defect: f64,
    pub max_symmetry_defect: f64,
    pub min_abs_det_even: f64,
    pub min_abs_det_odd: f64,
}

pub fn metric_validate(m: &MetricChart, samples: &[SuperPoint], tol: f64) -> ValidationReport {
    let sig = m.signature();
    let n = sig.dim();
    let ne = sig.even_dim();
    let mut report = ValidationReport {
        passed: true,
        first_violation: None,
        max_parity_defect: 0.0,
        max_symmetry_defect: 0.0,
        min_abs_det_even: f64::INFINITY,
        min_abs_det_odd: f64::INFINITY,
    };
    let fail = |r: &mut ValidationReport, msg: String| {
        if r.passed {
            r.passed = false;
            r.first_violation = Some(msg);
        }
    };

    if sig.odd_dim() % 2 == 1 {
        fail(
            &mut report,
            format!(
                "odd dimension {} is odd, so the antisymmetric odd block is degenerate",
                sig.odd_dim()
            ),
        );
    }
    for i in 0..n {
        for j in 0..n {
            let want = Parity::from_bit(sig.parity_bit(i) ^ sig.parity_bit(j));
            let e = m.entry(i, j);
            if !e.is_zero() && e.parity() != want {
                fail(
                    &mut report,
                    format!(
                        "entry g[{}][{}] has parity {:?}, expected {want:?}",
                        sig.name(i),
                        sig.name(j),
                        e.parity()
                    ),
                );
            }
        }
    }
    if samples.is_empty() {
        fail(&mut report, "no sample points".into());
    }

    for p in samples {
        let g = match m.metric_at(p) {
            Ok(g) => g,
            Err(e) => {
                fail(&mut report, format!("cannot evaluate metric: {e}"));
                continue;
            }
        };
        for i in 0..n {
            for j in 0..n {
                let want = Parity::from_bit(sig.parity_bit(i) ^ sig.parity_bit(j));
                let pd = g[i][j].parity_defect(want);
                report.max_parity_defect = report.max_parity_defect.max(pd);
                if pd > tol {
                    fail(
                        &mut report,
                        format!("g[{}][{}] has wrong-parity coefficients", sig.name(i), sig.name(j)),
                    );
                }
                let mut d = g[i][j].clone();
                d.axpy(-koszul(sig.parity_bit(i), sig.parity_bit(j)), &g[j][i]);
                let sd = d.max_abs();
                report.max_symmetry_defect = report.max_symmetry_defect.max(sd);
                if sd > tol {
                    fail(
                        &mut report,
                        format!(
                            "graded symmetry fails for ({}, {}): g_ij - (-1)^(|i||j|) g_ji = {d}",
                            sig.name(i),
                            sig.name(j)
                        ),
                    );
                }
            }
        }
        let even = DMatrix::from_fn(ne, ne, |i, j| g[i][j].body());
        let odd = DMatrix::from_fn(n - ne, n - ne, |i, j| g[ne + i][ne + j].body());
        let de = if ne == 0 { 1.0 } else { even.determinant() };
        let dodd = if n == ne { 1.0 } else { odd.determinant() };
        report.min_abs_det_even = report.min_abs_det_even.min(de.abs());
        report.min_abs_det_odd = report.min_abs_det_odd.min(dodd.abs());
        if de.abs() <= tol {
            fail(&mut report, "even-even body block is degenerate".into());
        }
        if dodd.abs() <= tol {
            fail(&mut report, "odd-odd body block is degenerate".into());
        }
    }
    report
}

pub fn metric_inverse_at(m: &MetricChart, p: &SuperPoint) -> Result<GrassmannMatrix> {
    m.inverse_at(p)
}

pub fn christoffel_at(m: &MetricChart, p: &SuperPoint) -> Result<ChristoffelTable> {
    m.christoffel_at(p)
}

/// The even-even block with odd variables set to zero, as a classical metric.
pub fn reduce_body(m: &MetricChart) -> ClassicalMetric {
    let sig = m.signature();
    let ne = sig.even_dim();
    let g = (0..ne)
        .map(|i| (0..ne).map(|j| m.entry(i, j).drop_odd()).collect())
        .collect();
    ClassicalMetric::new(sig.even_names().to_vec(), g, m.domain().clone())
}
