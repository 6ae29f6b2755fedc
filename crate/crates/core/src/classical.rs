//! Real Riemannian geometry of an even chart, computed with plain `f64` linear algebra.
//! Used as an independent reference for the body of super computations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::DomainBox;
use crate::ode;
use crate::superexpr::Expr;

#[derive(Clone, Debug)]
pub struct ClassicalMetric {
    names: Vec<String>,
    g: Vec<Vec<Expr>>,
    /// `dg[l][i][j] = ∂_l g_ij`
    dg: Vec<Vec<Vec<Expr>>>,
    domain: DomainBox,
}

/// Samples `(t, x, v)` of a classical solution; `v` is a velocity or a momentum.
pub type ClassicalPath = Vec<(f64, Vec<f64>, Vec<f64>)>;

impl ClassicalMetric {
    /// `g` must only reference even variables `0..names.len()`.
    pub fn new(names: Vec<String>, g: Vec<Vec<Expr>>, domain: DomainBox) -> Self {
        let n = names.len();
        let dg = (0..n)
            .map(|l| {
                g.iter()
                    .map(|row| {
                        row.iter()
                            .map(|e| e.partial(l, false).expect("even partials always exist"))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            names,
            g,
            dg,
            domain,
        }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::InvalidPoint(format!(
                "expected {} coordinates, got {}",
                self.dim(),
                x.len()
            )));
        }
        match self.domain_violation(x) {
            Some(v) => Err(Error::InvalidPoint(v)),
            None => Ok(()),
        }
    }

    pub fn domain_violation(&self, x: &[f64]) -> Option<String> {
        x.iter()
            .zip(&self.domain)
            .zip(&self.names)
            .find(|((x, (lo, hi)), _)| !(**x > *lo && **x < *hi))
            .map(|((x, (lo, hi)), name)| format!("{name} = {x} outside ({lo}, {hi})"))
    }

    fn eval_matrix(&self, m: &[Vec<Expr>], x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = m[i][j].eval_real(x)?;
            }
        }
        Ok(out)
    }

    pub fn metric(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check(x)?;
        self.eval_matrix(&self.g, x)
    }

    pub fn inverse(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let g = self.metric(x)?;
        g.clone()
            .try_inverse()
            .ok_or_else(|| Error::SingularBody(format!("{g}")))
    }

    fn partials(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        self.dg.iter().map(|m| self.eval_matrix(m, x)).collect()
    }

    /// `Γ^k_ij` as `[k][i][j]`.
    pub fn christoffel(&self, x: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
        let n = self.dim();
        let ginv = self.inverse(x)?;
        let dg = self.partials(x)?;
        let mut out = vec![vec![vec![0.0; n]; n]; n];
        for (k, ok) in out.iter_mut().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    ok[i][j] = 0.5
                        * (0..n)
                            .map(|l| (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]) * ginv[(l, k)])
                            .sum::<f64>();
                }
            }
        }
        Ok(out)
    }

    pub fn geodesic_acceleration(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let gamma = self.christoffel(x)?;
        Ok(gamma
            .iter()
            .map(|gk| {
                let mut a = 0.0;
                for (i, row) in gk.iter().enumerate() {
                    for (j, c) in row.iter().enumerate() {
                        a -= c * v[i] * v[j];
                    }
                }
                a
            })
            .collect())
    }

    pub fn speed(&self, x: &[f64], v: &[f64]) -> Result<f64> {
        let g = self.metric(x)?;
        let v = DVector::from_column_slice(v);
        Ok(v.dot(&(&g * &v)))
    }

    pub fn hamiltonian(&self, x: &[f64], p: &[f64]) -> Result<f64> {
        let ginv = self.inverse(x)?;
        let p = DVector::from_column_slice(p);
        Ok(0.5 * p.dot(&(&ginv * &p)))
    }

    /// `(ẋ, ṗ)` with `ẋ = g^{-1} p` and `ṗ_i = ½ uᵀ (∂_i g) u` where `u = g^{-1} p`.
    pub fn hamiltonian_field(&self, x: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let ginv = self.inverse(x)?;
        let u = &ginv * DVector::from_column_slice(p);
        let dg = self.partials(x)?;
        let pdot = dg.iter().map(|d| 0.5 * u.dot(&(d * &u))).collect();
        Ok((u.iter().copied().collect(), pdot))
    }

    pub fn integrate_geodesic(
        &self,
        x0: &[f64],
        v0: &[f64],
        t_end: f64,
        dt: f64,
    ) -> Result<ClassicalPath> {
        self.integrate(x0, v0, t_end, dt, |x, v| {
            Ok((v.to_vec(), self.geodesic_acceleration(x, v)?))
        })
    }

    pub fn integrate_cotangent(
        &self,
        x0: &[f64],
        p0: &[f64],
        t_end: f64,
        dt: f64,
    ) -> Result<ClassicalPath> {
        self.integrate(x0, p0, t_end, dt, |x, p| self.hamiltonian_field(x, p))
    }

    fn integrate<F>(&self, x0: &[f64], v0: &[f64], t_end: f64, dt: f64, field: F) -> Result<ClassicalPath>
    where
        F: Fn(&[f64], &[f64]) -> Result<(Vec<f64>, Vec<f64>)>,
    {
        let n = self.dim();
        if x0.len() != n || v0.len() != n {
            return Err(Error::InvalidArgument("initial data has the wrong length".into()));
        }
        if let Some(v) = self.domain_violation(x0) {
            return Err(Error::InvalidPoint(v));
        }
        let (steps, h) = ode::uniform_grid(t_end, dt)?;
        let mut y: Vec<f64> = x0.iter().chain(v0).copied().collect();
        let mut out = vec![(0.0, x0.to_vec(), v0.to_vec())];
        for s in 1..=steps {
            let t = s as f64 * h;
            y = ode::rk4_step(&y, h, |y| {
                let (x, v) = y.split_at(n);
                if let Some(d) = self.domain_violation(x) {
                    return Err(Error::LeftDomain { t, detail: d });
                }
                let (a, b) = field(x, v)?;
                Ok(a.into_iter().chain(b).collect())
            })?;
            let (x, v) = y.split_at(n);
            if let Some(d) = self.domain_violation(x) {
                return Err(Error::LeftDomain { t, detail: d });
            }
            if y.iter().any(|c| !c.is_finite()) {
                return Err(Error::LeftDomain {
                    t,
                    detail: "state is no longer finite".into(),
                });
            }
            out.push((t, x.to_vec(), v.to_vec()));
        }
        Ok(out)
    }
}
