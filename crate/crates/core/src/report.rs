//! Machine-readable verification reports.

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// `null` in JSON when no deviation could be computed.
    pub max_deviation: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Passes when `deviation <= tolerance`.
    pub fn within(name: impl Into<String>, deviation: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            max_deviation: deviation.is_finite().then_some(deviation),
            tolerance,
            pass: deviation <= tolerance,
            detail: None,
        }
    }

    /// Passes when `deviation > tolerance`; used for negative controls.
    pub fn exceeds(name: impl Into<String>, deviation: f64, tolerance: f64) -> Self {
        Self {
            pass: deviation > tolerance,
            ..Self::within(name, deviation, tolerance)
        }
    }

    pub fn failed(name: impl Into<String>, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            max_deviation: None,
            tolerance,
            pass: false,
            detail: Some(detail.into()),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub model: String,
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(model: impl Into<String>, suite: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            suite: suite.into(),
            pass: true,
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, check: Check) {
        self.pass &= check.pass;
        self.checks.push(check);
    }

    pub fn extend(&mut self, checks: impl IntoIterator<Item = Check>) {
        for c in checks {
            self.push(c);
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}
