//! JSON model files: a chart, its metric, named initial conditions and morphisms.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expmap::{FixedLinearization, FixedPointStatus};
use crate::geodesics::InitialCondition;
use crate::geometry::MetricChart;
use crate::grassmann::{GrassmannElement, MAX_GENERATORS};
use crate::superexpr::{ChartSignature, Expr, SuperMorphism, SuperPoint};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub even: Vec<String>,
    #[serde(default)]
    pub odd: Vec<String>,
    /// Number of odd generators of the parameter algebra.
    pub generators: usize,
    pub metric: Vec<Vec<String>>,
    /// Open interval per even coordinate; `null` ends and missing coordinates are unbounded.
    #[serde(default)]
    pub domain: BTreeMap<String, [Option<f64>; 2]>,
    #[serde(default)]
    pub initial_conditions: BTreeMap<String, InitialConditionSpec>,
    #[serde(default)]
    pub morphisms: BTreeMap<String, MorphismSpec>,
    /// Body points used by the verification suites.
    #[serde(default)]
    pub samples: Vec<Vec<f64>>,
    #[serde(default)]
    pub defaults: Defaults,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConditionSpec {
    #[serde(default)]
    pub position: BTreeMap<String, ValueSpec>,
    #[serde(default)]
    pub velocity: BTreeMap<String, ValueSpec>,
}

/// A Grassmann number: a plain real or a list of `[mask, coefficient]` terms, where
/// the mask is an integer bit set or a label such as `"1"` or `"t1^t2"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ValueSpec {
    Real(f64),
    Terms(Vec<(MaskSpec, f64)>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MaskSpec {
    Bits(u32),
    Label(String),
}

impl MaskSpec {
    pub fn to_mask(&self) -> Result<u32> {
        match self {
            MaskSpec::Bits(b) => Ok(*b),
            MaskSpec::Label(s) if s.trim() == "1" => Ok(0),
            MaskSpec::Label(s) => {
                let mut mask = 0u32;
                for part in s.split('^') {
                    let k: u32 = part
                        .trim()
                        .strip_prefix('t')
                        .and_then(|d| d.parse().ok())
                        .filter(|k| (1..=MAX_GENERATORS as u32).contains(k))
                        .ok_or_else(|| Error::Model(format!("bad mask label `{s}`")))?;
                    let bit = 1 << (k - 1);
                    if mask & bit != 0 {
                        return Err(Error::Model(format!("repeated generator in `{s}`")));
                    }
                    mask |= bit;
                }
                Ok(mask)
            }
        }
    }
}

impl ValueSpec {
    pub fn to_element(&self, generators: usize) -> Result<GrassmannElement> {
        match self {
            ValueSpec::Real(x) => Ok(GrassmannElement::scalar(generators, *x)),
            ValueSpec::Terms(terms) => {
                let mut pairs = Vec::with_capacity(terms.len());
                for (m, c) in terms {
                    pairs.push((m.to_mask()?, *c));
                }
                let mut out = GrassmannElement::zero(generators);
                for (mask, c) in pairs {
                    out += &GrassmannElement::from_pairs(generators, &[(mask, c)])?;
                }
                Ok(out)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphismSpec {
    /// Pullback expressions; coordinates not listed map to themselves.
    pub pullbacks: BTreeMap<String, String>,
    /// Expected outcome of the isometry condition, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub isometry: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linearization: Option<FixedLinearization>,
    /// Expected status of the fixed-point test; defaults to `passed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<FixedPointStatus>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Defaults {
    pub dt: f64,
    pub t_end: f64,
    pub jacobian_step: f64,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1.0,
            jacobian_step: 1e-4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSpec {
    pub identity: f64,
    pub compatibility: f64,
    pub residual: f64,
    pub conservation: f64,
    pub roundtrip: f64,
    pub body: f64,
    pub jacobian: f64,
    pub jacobian_odd: f64,
    pub naturality: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self {
            identity: 1e-10,
            compatibility: 1e-8,
            residual: 1e-6,
            conservation: 1e-8,
            roundtrip: 1e-6,
            body: 1e-8,
            jacobian: 1e-5,
            jacobian_odd: 1e-9,
            naturality: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedMorphism {
    pub name: String,
    pub morphism: SuperMorphism,
    pub spec: MorphismSpec,
}

/// A parsed and checked model.
#[derive(Clone, Debug)]
pub struct Model {
    pub file: ModelFile,
    pub metric: MetricChart,
    pub initial_conditions: Vec<(String, InitialCondition)>,
    pub morphisms: Vec<NamedMorphism>,
    pub samples: Vec<Vec<f64>>,
}

impl Model {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Model(format!("invalid model JSON: {e}")))?;
        Self::from_file(file)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Model(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_file(file: ModelFile) -> Result<Self> {
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::Model(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        if file.generators > MAX_GENERATORS {
            return Err(Error::TooManyGenerators(file.generators));
        }
        let sig = ChartSignature::new(&file.even, &file.odd)?;
        for name in file.domain.keys() {
            if !sig.even_names().contains(name) {
                return Err(Error::Model(format!(
                    "domain entry `{name}` is not an even coordinate"
                )));
            }
        }
        let domain = sig
            .even_names()
            .iter()
            .map(|n| match file.domain.get(n) {
                Some([lo, hi]) => (lo.unwrap_or(f64::NEG_INFINITY), hi.unwrap_or(f64::INFINITY)),
                None => (f64::NEG_INFINITY, f64::INFINITY),
            })
            .collect();
        let metric = MetricChart::parse(file.name.clone(), sig.clone(), &file.metric, domain)?;

        let l = file.generators;
        let mut initial_conditions = Vec::new();
        for (name, spec) in &file.initial_conditions {
            let ic = build_ic(&metric, spec, l)
                .map_err(|e| Error::Model(format!("initial condition `{name}`: {e}")))?;
            initial_conditions.push((name.clone(), ic));
        }
        let mut morphisms = Vec::new();
        for (name, spec) in &file.morphisms {
            let morphism = build_morphism(&sig, spec)
                .map_err(|e| Error::Model(format!("morphism `{name}`: {e}")))?;
            if let Some(q) = &spec.fixed_point {
                if q.len() != sig.even_dim() {
                    return Err(Error::Model(format!(
                        "morphism `{name}`: fixed_point needs {} values",
                        sig.even_dim()
                    )));
                }
            }
            morphisms.push(NamedMorphism {
                name: name.clone(),
                morphism,
                spec: spec.clone(),
            });
        }
        for s in &file.samples {
            if s.len() != sig.even_dim() {
                return Err(Error::Model(format!(
                    "sample {s:?} needs {} values",
                    sig.even_dim()
                )));
            }
            if let Some(v) = metric.domain_violation(s) {
                return Err(Error::Model(format!("sample {s:?} outside the domain: {v}")));
            }
        }
        let samples = if file.samples.is_empty() {
            default_samples(&metric)
        } else {
            file.samples.clone()
        };
        Ok(Self {
            file,
            metric,
            initial_conditions,
            morphisms,
            samples,
        })
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }

    pub fn generators(&self) -> usize {
        self.file.generators
    }

    pub fn signature(&self) -> &ChartSignature {
        self.metric.signature()
    }

    pub fn defaults(&self) -> Defaults {
        self.file.defaults
    }

    pub fn tolerances(&self) -> ToleranceSpec {
        self.file.tolerances
    }

    pub fn initial_condition(&self, name: &str) -> Result<&InitialCondition> {
        self.initial_conditions
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, ic)| ic)
            .ok_or_else(|| {
                let known: Vec<&str> = self.initial_conditions.iter().map(|(n, _)| n.as_str()).collect();
                Error::Model(format!(
                    "unknown initial condition `{name}` (available: {})",
                    known.join(", ")
                ))
            })
    }

    pub fn morphism(&self, name: &str) -> Result<&NamedMorphism> {
        self.morphisms
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::Model(format!("unknown morphism `{name}`")))
    }

    /// Body point from `name=value` assignments; unspecified even coordinates default
    /// to the first sample point.
    pub fn body_point(&self, assignments: &[(String, f64)]) -> Result<Vec<f64>> {
        let sig = self.signature();
        let mut q = self.samples[0].clone();
        for (name, value) in assignments {
            let k = sig
                .even_names()
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::UnknownCoordinate(name.clone()))?;
            q[k] = *value;
        }
        Ok(q)
    }
}

fn build_ic(m: &MetricChart, spec: &InitialConditionSpec, l: usize) -> Result<InitialCondition> {
    let sig = m.signature();
    let fill = |map: &BTreeMap<String, ValueSpec>| -> Result<Vec<GrassmannElement>> {
        let mut out = vec![GrassmannElement::zero(l); sig.dim()];
        for (name, v) in map {
            let k = sig
                .index_of(name)
                .ok_or_else(|| Error::UnknownCoordinate(name.clone()))?;
            out[k] = v.to_element(l)?;
        }
        Ok(out)
    };
    let ic = InitialCondition::new(sig, fill(&spec.position)?, fill(&spec.velocity)?)?;
    if let Some(v) = m.domain_violation(&ic.position.body(sig)) {
        return Err(Error::InvalidPoint(v));
    }
    Ok(ic)
}

fn build_morphism(sig: &ChartSignature, spec: &MorphismSpec) -> Result<SuperMorphism> {
    let mut pullbacks: Vec<Expr> = (0..sig.dim())
        .map(|i| Expr::Var {
            index: i,
            odd: sig.is_odd(i),
        })
        .collect();
    for (name, text) in &spec.pullbacks {
        let k = sig
            .index_of(name)
            .ok_or_else(|| Error::UnknownCoordinate(name.clone()))?;
        pullbacks[k] = Expr::parse(text, sig)?;
    }
    SuperMorphism::new(sig.clone(), sig.clone(), pullbacks)
}

/// Five body points along the diagonal of the domain box (a unit box around the
/// origin in unbounded directions).
pub fn default_samples(m: &MetricChart) -> Vec<Vec<f64>> {
    let ranges: Vec<(f64, f64)> = m
        .domain()
        .iter()
        .map(|&(lo, hi)| match (lo.is_finite(), hi.is_finite()) {
            (true, true) => (lo, hi),
            (true, false) => (lo, lo + 2.0),
            (false, true) => (hi - 2.0, hi),
            (false, false) => (-1.0, 1.0),
        })
        .collect();
    (0..5)
        .map(|k| {
            let s = 0.3 + 0.1 * k as f64;
            ranges.iter().map(|(lo, hi)| lo + s * (hi - lo)).collect()
        })
        .collect()
}

/// Grassmann sample point with the given body.
pub fn point_at(m: &MetricChart, body: &[f64], generators: usize) -> Result<SuperPoint> {
    SuperPoint::from_body(m.signature(), body, generators)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLAT: &str = r#"{
        "schema_version": 1,
        "name": "flat",
        "even": ["x"],
        "odd": ["th1", "th2"],
        "generators": 2,
        "metric": [["1", "0", "0"], ["0", "0", "1"], ["0", "-1", "0"]],
        "domain": {"x": [-10, 10]},
        "initial_conditions": {
            "a": {"position": {"x": 0.5}, "velocity": {"x": 1, "th1": [["t1", 1.0]], "th2": [[2, 0.5]]}}
        },
        "morphisms": {"scale": {"pullbacks": {"th1": "2*th1", "th2": "th2/2"}, "isometry": true}}
    }"#;

    #[test]
    fn loads() {
        let m = Model::from_json(FLAT).unwrap();
        let ic = m.initial_condition("a").unwrap();
        assert_eq!(ic.position.value(0).body(), 0.5);
        assert_eq!(ic.velocity[1].coeff(1), 1.0);
        assert_eq!(ic.velocity[2].coeff(2), 0.5);
        assert_eq!(m.samples.len(), 5);
        let phi = &m.morphism("scale").unwrap().morphism;
        assert_eq!(phi.pullback(0), &Expr::Var { index: 0, odd: false });
        assert!(m.initial_condition("nope").is_err());
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(Model::from_json("{"), Err(Error::Model(_))));
        let v2 = FLAT.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(Model::from_json(&v2).is_err());
        let wrong_parity = FLAT.replace("[[\"t1\", 1.0]]", "1.0");
        assert!(Model::from_json(&wrong_parity).is_err());
        let unknown = FLAT.replace("\"domain\"", "\"domian\"");
        assert!(Model::from_json(&unknown).is_err());
    }

    #[test]
    fn mask_labels() {
        assert_eq!(MaskSpec::Label("t1^t3".into()).to_mask().unwrap(), 0b101);
        assert_eq!(MaskSpec::Label("1".into()).to_mask().unwrap(), 0);
        assert!(MaskSpec::Label("t1^t1".into()).to_mask().is_err());
        assert!(MaskSpec::Label("x".into()).to_mask().is_err());
    }
}
