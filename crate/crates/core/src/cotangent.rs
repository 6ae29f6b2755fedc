//! Geodesic flow on the cotangent chart `(q_i, p_i)` with `|p_i| = |q_i|`.
//!
//! ```text
//! H       = ½ Σ_{i,j} p_i g^ij p_j
//! X_H q_i = Σ_j p_j g^ji
//! X_H p_i = -½ Σ_{k,j} (-1)^{|i||k|} p_k ∂_i(g^kj) p_j
//! ```

use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geodesics::{
    check_tangent, ensure_in_domain, flatten, integrate_geodesic, unflatten, InitialCondition,
};
use crate::geometry::{GrassmannMatrix, MetricChart};
use crate::grassmann::{koszul, mask_bits, GrassmannElement};
use crate::ode;
use crate::parallel::{self, Execution};
use crate::superexpr::{ChartSignature, SuperPoint};

#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub position: SuperPoint,
    pub momenta: Vec<GrassmannElement>,
}

impl PhasePoint {
    pub fn new(
        sig: &ChartSignature,
        position: Vec<GrassmannElement>,
        momenta: Vec<GrassmannElement>,
    ) -> Result<Self> {
        let position = SuperPoint::new(sig, position)?;
        check_tangent(sig, position.generators(), &momenta, "momentum")?;
        Ok(Self { position, momenta })
    }

    pub fn generators(&self) -> usize {
        self.position.generators()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowSample {
    pub t: f64,
    pub position: SuperPoint,
    pub momenta: Vec<GrassmannElement>,
    pub energy: GrassmannElement,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub metric: String,
    pub dt: f64,
    pub coordinates: Vec<String>,
    pub initial: PhasePoint,
    pub samples: Vec<FlowSample>,
}

impl FlowState {
    pub fn generators(&self) -> usize {
        self.initial.generators()
    }

    pub fn last(&self) -> &FlowSample {
        self.samples.last().expect("flows hold the initial sample")
    }

    /// Largest coefficient change of `H` relative to `t = 0`.
    pub fn energy_drift(&self) -> f64 {
        let h0 = &self.samples[0].energy;
        self.samples
            .iter()
            .map(|s| s.energy.max_abs_diff(h0))
            .fold(0.0, f64::max)
    }

    /// Columns `t,coordinate,mask,position,momentum,energy`; the energy column holds
    /// the coefficient of `H` on the row's mask.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let l = self.generators();
        writeln!(w, "t,coordinate,mask,position,momentum,energy")?;
        for s in &self.samples {
            for (k, name) in self.coordinates.iter().enumerate() {
                for mask in 0..(1u32 << l) {
                    writeln!(
                        w,
                        "{:e},{name},{},{:e},{:e},{:e}",
                        s.t,
                        mask_bits(mask, l),
                        s.position.value(k).coeff(mask),
                        s.momenta[k].coeff(mask),
                        s.energy.coeff(mask)
                    )?;
                }
            }
        }
        Ok(())
    }
}

fn energy_with_inverse(ginv: &GrassmannMatrix, p: &[GrassmannElement], l: usize) -> GrassmannElement {
    let n = p.len();
    let mut h = GrassmannElement::zero(l);
    for i in 0..n {
        for j in 0..n {
            if p[i].is_zero() || p[j].is_zero() || ginv[i][j].is_zero() {
                continue;
            }
            h.add_triple_product(1.0, &p[i], &ginv[i][j], &p[j]);
        }
    }
    h.scale(0.5)
}

pub fn energy_at(m: &MetricChart, s: &PhasePoint) -> Result<GrassmannElement> {
    check_tangent(m.signature(), s.generators(), &s.momenta, "momentum")?;
    let ginv = m.inverse_at(&s.position)?;
    Ok(energy_with_inverse(&ginv, &s.momenta, s.generators()))
}

fn field_at(
    m: &MetricChart,
    pos: &SuperPoint,
    p: &[GrassmannElement],
) -> Result<(Vec<GrassmannElement>, Vec<GrassmannElement>, GrassmannMatrix)> {
    let sig = m.signature();
    let n = m.dim();
    let l = pos.generators();
    let ginv = m.inverse_at(pos)?;
    let dginv = m.inverse_partials_at(pos, &ginv)?;
    let qdot = (0..n)
        .map(|i| {
            let mut acc = GrassmannElement::zero(l);
            for j in 0..n {
                if !p[j].is_zero() && !ginv[j][i].is_zero() {
                    acc.add_product(1.0, &p[j], &ginv[j][i]);
                }
            }
            acc
        })
        .collect();
    let pdot = (0..n)
        .map(|i| {
            let mut acc = GrassmannElement::zero(l);
            for k in 0..n {
                if p[k].is_zero() {
                    continue;
                }
                let sign = -0.5 * koszul(sig.parity_bit(i), sig.parity_bit(k));
                for j in 0..n {
                    if p[j].is_zero() || dginv[i][k][j].is_zero() {
                        continue;
                    }
                    acc.add_triple_product(sign, &p[k], &dginv[i][k][j], &p[j]);
                }
            }
            acc
        })
        .collect();
    Ok((qdot, pdot, ginv))
}

/// Components `(X_H q_i, X_H p_i)`.
pub fn xh_at(
    m: &MetricChart,
    s: &PhasePoint,
) -> Result<(Vec<GrassmannElement>, Vec<GrassmannElement>)> {
    check_tangent(m.signature(), s.generators(), &s.momenta, "momentum")?;
    let (q, p, _) = field_at(m, &s.position, &s.momenta)?;
    Ok((q, p))
}

pub fn integrate_flow(m: &MetricChart, init: &PhasePoint, t_end: f64, dt: f64) -> Result<FlowState> {
    let sig = m.signature();
    let l = init.generators();
    let chunk = sig.dim() << l;
    check_tangent(sig, l, &init.momenta, "momentum")?;
    ensure_in_domain(m, init.position.values(), 0.0)?;
    let (steps, h) = ode::uniform_grid(t_end, dt)?;

    let mut y = flatten(init.position.values());
    y.extend(flatten(&init.momenta));
    let mut samples = vec![FlowSample {
        t: 0.0,
        position: init.position.clone(),
        momenta: init.momenta.clone(),
        energy: energy_at(m, init)?,
    }];
    for s in 1..=steps {
        let t = s as f64 * h;
        y = ode::rk4_step(&y, h, |y| {
            let q = unflatten(&y[..chunk], l);
            ensure_in_domain(m, &q, t)?;
            let p = unflatten(&y[chunk..], l);
            let (qdot, pdot, _) = field_at(m, &SuperPoint::from_values_unchecked(l, q), &p)?;
            let mut out = flatten(&qdot);
            out.extend(flatten(&pdot));
            Ok(out)
        })?;
        let q = unflatten(&y[..chunk], l);
        ensure_in_domain(m, &q, t)?;
        let position = SuperPoint::from_values_unchecked(l, q);
        let momenta = unflatten(&y[chunk..], l);
        let ginv = m.inverse_at(&position)?;
        let energy = energy_with_inverse(&ginv, &momenta, l);
        samples.push(FlowSample {
            t,
            position,
            momenta,
            energy,
        });
    }
    Ok(FlowState {
        metric: m.name().to_string(),
        dt: h,
        coordinates: sig.names().map(String::from).collect(),
        initial: init.clone(),
        samples,
    })
}

pub fn integrate_flow_batch(
    m: &MetricChart,
    inits: &[PhasePoint],
    t_end: f64,
    dt: f64,
    exec: Execution,
) -> Result<Vec<FlowState>> {
    parallel::try_map(exec, inits, |i| integrate_flow(m, i, t_end, dt))
}

/// Velocity to momentum: `p_j = Σ_i v_i g_ij`.
pub fn flat(m: &MetricChart, pos: &SuperPoint, v: &[GrassmannElement]) -> Result<Vec<GrassmannElement>> {
    check_tangent(m.signature(), pos.generators(), v, "velocity")?;
    let g = m.metric_at(pos)?;
    Ok(contract_left(v, &g, pos.generators()))
}

/// Momentum to velocity: `v_i = Σ_j p_j g^ji`.
pub fn sharp(m: &MetricChart, pos: &SuperPoint, p: &[GrassmannElement]) -> Result<Vec<GrassmannElement>> {
    check_tangent(m.signature(), pos.generators(), p, "momentum")?;
    let ginv = m.inverse_at(pos)?;
    Ok(contract_left(p, &ginv, pos.generators()))
}

/// `out_j = Σ_i x_i a_ij`
fn contract_left(x: &[GrassmannElement], a: &GrassmannMatrix, l: usize) -> Vec<GrassmannElement> {
    let n = x.len();
    (0..n)
        .map(|j| {
            let mut acc = GrassmannElement::zero(l);
            for i in 0..n {
                if !x[i].is_zero() && !a[i][j].is_zero() {
                    acc.add_product(1.0, &x[i], &a[i][j]);
                }
            }
            acc
        })
        .collect()
}

pub fn phase_point_from(m: &MetricChart, ic: &InitialCondition) -> Result<PhasePoint> {
    Ok(PhasePoint {
        position: ic.position.clone(),
        momenta: flat(m, &ic.position, &ic.velocity)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundTripReport {
    /// Flow positions against geodesic positions.
    pub position_deviation: f64,
    /// Flat-mapped geodesic velocities against flow momenta.
    pub momentum_deviation: f64,
    /// `sharp(flat(v0))` against `v0`.
    pub initial_velocity_deviation: f64,
}

impl RoundTripReport {
    pub fn max(&self) -> f64 {
        self.position_deviation
            .max(self.momentum_deviation)
            .max(self.initial_velocity_deviation)
    }
}

/// Compares the geodesic from `ic` with the flow from its flat-mapped phase point.
pub fn roundtrip_check(
    m: &MetricChart,
    ic: &InitialCondition,
    t_end: f64,
    dt: f64,
) -> Result<RoundTripReport> {
    let traj = integrate_geodesic(m, ic, t_end, dt)?;
    let init = phase_point_from(m, ic)?;
    let flow = integrate_flow(m, &init, t_end, dt)?;
    let mut report = RoundTripReport {
        position_deviation: 0.0,
        momentum_deviation: 0.0,
        initial_velocity_deviation: 0.0,
    };
    let back = sharp(m, &ic.position, &init.momenta)?;
    report.initial_velocity_deviation = max_diff(&back, &ic.velocity);
    for (g, f) in traj.samples.iter().zip(&flow.samples) {
        report.position_deviation = report
            .position_deviation
            .max(g.position.max_abs_diff(&f.position));
        let p = flat(m, &g.position, &g.velocity)?;
        report.momentum_deviation = report.momentum_deviation.max(max_diff(&p, &f.momenta));
    }
    if traj.samples.len() != flow.samples.len() {
        return Err(Error::InvalidArgument("grids differ".into()));
    }
    Ok(report)
}

pub(crate) fn max_diff(a: &[GrassmannElement], b: &[GrassmannElement]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.max_abs_diff(y))
        .fold(0.0, f64::max)
}
