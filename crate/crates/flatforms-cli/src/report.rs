//! The structured result of one command.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::spec::InstanceSpec;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommandEcho {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    pub tolerance_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Value {
    Integer(i64),
    Scalar(f64),
    List(Vec<f64>),
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Invariant {
    pub name: String,
    pub value: Value,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub command: CommandEcho,
    pub instance_digest: String,
    pub invariants: Vec<Invariant>,
    pub residuals: Vec<Residual>,
    pub timing: Timing,
}

/// Accumulates invariants and residuals; every tolerance is multiplied by
/// `tolerance_scale` before the verdict.
#[derive(Debug)]
pub struct Findings {
    tolerance_scale: f64,
    pub invariants: Vec<Invariant>,
    pub residuals: Vec<Residual>,
}

impl Findings {
    pub fn new(tolerance_scale: f64) -> Self {
        Findings { tolerance_scale, invariants: Vec::new(), residuals: Vec::new() }
    }

    pub fn scalar(&mut self, name: impl Into<String>, value: f64) {
        self.invariants.push(Invariant { name: name.into(), value: Value::Scalar(value) });
    }

    pub fn integer(&mut self, name: impl Into<String>, value: i64) {
        self.invariants.push(Invariant { name: name.into(), value: Value::Integer(value) });
    }

    pub fn list(&mut self, name: impl Into<String>, value: Vec<f64>) {
        self.invariants.push(Invariant { name: name.into(), value: Value::List(value) });
    }

    pub fn text(&mut self, name: impl Into<String>, value: impl Into<String>) {
        self.invariants.push(Invariant { name: name.into(), value: Value::Text(value.into()) });
    }

    /// `value ≤ tolerance · scale`; NaN fails.
    pub fn residual(&mut self, name: impl Into<String>, value: f64, tolerance: f64) {
        let tolerance = tolerance * self.tolerance_scale;
        let pass = value.abs() <= tolerance;
        self.residuals.push(Residual { name: name.into(), value, tolerance, pass });
    }

    /// A yes/no check recorded as a residual of 0 or 1 against tolerance 0.
    pub fn check(&mut self, name: impl Into<String>, ok: bool) {
        self.residuals.push(Residual { name: name.into(), value: if ok { 0.0 } else { 1.0 }, tolerance: 0.0, pass: ok });
    }

    pub fn scalar_value(&self, name: &str) -> Option<f64> {
        self.invariants.iter().find(|i| i.name == name).and_then(|i| match i.value {
            Value::Scalar(x) => Some(x),
            Value::Integer(n) => Some(n as f64),
            _ => None,
        })
    }
}

impl Report {
    pub fn passed(&self) -> bool {
        self.residuals.iter().all(|r| r.pass)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("reports serialize");
        text.push('\n');
        text
    }
}

/// SHA-256 of the canonical JSON of the parsed spec. Object keys are sorted, so
/// the digest depends only on the parsed values.
pub fn digest(spec: &InstanceSpec) -> String {
    let value = serde_json::to_value(spec).expect("specs serialize");
    let canonical = serde_json::to_string(&value).expect("values serialize");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Writes through a sibling temporary file and a rename, so readers never see a
/// partial report.
pub fn write_atomically(path: &Path, text: &str) -> Result<(), CliError> {
    let err = |source| CliError::Write { path: path.display().to_string(), source };
    let file_name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, text).map_err(err)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        err(e)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residual_verdicts_scale_and_reject_nan() {
        let mut f = Findings::new(10.0);
        f.residual("small", 5e-10, 1e-10);
        f.residual("nan", f64::NAN, 1.0);
        assert!(f.residuals[0].pass);
        assert_eq!(f.residuals[0].tolerance, 1e-9);
        assert!(!f.residuals[1].pass);
    }

    #[test]
    fn digest_ignores_formatting_but_not_values() {
        let a = InstanceSpec::parse("[symplectic]\nmatrix = [[1.0, 0.0], [0.0, 1.0]]\n", None).unwrap();
        let b = InstanceSpec::parse("[symplectic]\nmatrix = [ [1, 0],\n [0, 1] ]", None).unwrap();
        let c = InstanceSpec::parse("[symplectic]\nmatrix = [[1.0, 0.0], [0.0, 1.5]]\n", None).unwrap();
        assert_eq!(digest(&a), digest(&b));
        assert_ne!(digest(&a), digest(&c));
        let seeded = InstanceSpec::parse("[symplectic]\nmatrix = [[1.0, 0.0], [0.0, 1.0]]\n", Some(3)).unwrap();
        assert_ne!(digest(&a), digest(&seeded));
    }
}
