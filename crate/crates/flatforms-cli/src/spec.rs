//! The instance document: a TOML file with one table per section.
//!
//! Matrices are row-major nested arrays. Every table rejects unknown keys so a
//! misspelt field is a schema error rather than a silent default.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub type Matrix = Vec<Vec<f64>>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub seed: Option<u64>,
    pub base: Option<BaseSpec>,
    pub bundle: Option<BundleSpec>,
    pub complex: Option<ComplexSpec>,
    pub local_system: Option<LocalSystemSpec>,
    pub duality: Option<DualitySpec>,
    pub quadrature: Option<QuadratureSpec>,
    pub symplectic: Option<SymplecticSpec>,
    /// Reference values: each named invariant becomes a residual.
    pub expect: Option<ExpectSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaseKind {
    Point,
    Circle,
    Torus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseSpec {
    pub kind: BaseKind,
    #[serde(default)]
    pub resolution: Vec<usize>,
    /// Defaults to `2π` on every axis.
    #[serde(default)]
    pub periods: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Field {
    #[default]
    Real,
    Complex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleSpec {
    pub rank: usize,
    #[serde(default)]
    pub field: Field,
    /// One per axis; identity when omitted.
    #[serde(default)]
    pub holonomies: Vec<Matrix>,
    /// Imaginary parts of `holonomies`, complex field only.
    pub holonomies_imag: Option<Vec<Matrix>>,
    pub metric: MetricSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MetricSpec {
    /// The constant metric `I`; needs unitary holonomy.
    Parallel,
    /// Random periodic factor of the given size on top of the twist factor.
    Random { amplitude: f64 },
    /// A named closed-form periodic factor on top of the twist factor.
    Formula { id: String, parameters: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexSpec {
    pub ranks: Vec<usize>,
    /// `differentials[p]` maps degree `p` to `p + 1`.
    pub differentials: Vec<Matrix>,
    /// Covolume of the standard basis per degree.
    pub volumes: Option<Vec<f64>>,
    /// `vol(Hᵖ) / vol_L²(Hᵖ)` per degree; L² volumes when omitted.
    pub cohomology_volumes: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalSystemSpec {
    /// Name of a bundled complex; excludes the explicit fields.
    pub library: Option<String>,
    pub name: Option<String>,
    pub cells: Option<Vec<usize>>,
    /// `boundaries[p][σ][τ]`: group-ring element such as `"a - 1"`.
    pub boundaries: Option<Vec<Vec<Vec<String>>>>,
    pub holonomies: Option<Vec<Vec<Vec<i64>>>>,
    pub rank: Option<usize>,
    pub fiber_volume: Option<f64>,
    /// Integral volumes when omitted.
    pub volumes: Option<VolumesSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VolumesSpec {
    Named(NamedVolumes),
    Custom(Vec<f64>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedVolumes {
    Integral,
    L2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualitySpec {
    pub epsilon: i64,
    pub pairing: Option<Matrix>,
    pub ranks: Option<Vec<usize>>,
    pub differential: Option<Matrix>,
    pub holonomies: Option<Vec<Matrix>>,
    pub j: JSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JSpec {
    Parallel { matrix: Matrix },
    Random { rank: usize, amplitude: f64 },
    RandomComplex { top_degree: usize, cohomology_pieces: usize, acyclic_pieces: usize, gap: f64, amplitude: f64 },
    /// `J(θ) = Q e^{−2a sin θ K}` on a circle of period `2π`.
    Boost { amplitude: f64 },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub tolerance: Option<f64>,
    pub step: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymplecticSpec {
    pub matrix: Matrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectSpec {
    #[serde(default = "default_expect_tolerance")]
    pub tolerance: f64,
    pub values: BTreeMap<String, f64>,
}

fn default_expect_tolerance() -> f64 {
    1e-10
}

impl InstanceSpec {
    /// Parses a document, applies the seed override and validates; TOML errors
    /// carry line and column.
    pub fn parse(text: &str, seed: Option<u64>) -> Result<Self, CliError> {
        let mut spec: InstanceSpec = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        if seed.is_some() {
            spec.seed = seed;
        }
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<(), CliError> {
        let sections = [
            self.base.is_some(),
            self.bundle.is_some(),
            self.complex.is_some(),
            self.local_system.is_some(),
            self.duality.is_some(),
            self.symplectic.is_some(),
        ];
        if !sections.iter().any(|&s| s) {
            return Err(CliError::Schema("the document has no instance section".into()));
        }
        if let Some(base) = &self.base {
            let axes = match base.kind {
                BaseKind::Point => 0,
                BaseKind::Circle => 1,
                BaseKind::Torus => base.resolution.len(),
            };
            if base.resolution.len() != axes || (!base.periods.is_empty() && base.periods.len() != axes) {
                return Err(CliError::Schema(format!("base of kind {:?} needs {axes} resolutions and periods", base.kind)));
            }
        }
        if let Some(b) = &self.bundle {
            for m in &b.holonomies {
                check_matrix("bundle.holonomies", m, Some((b.rank, b.rank)))?;
            }
            if let Some(imag) = &b.holonomies_imag {
                if b.field == Field::Real {
                    return Err(CliError::Schema("bundle.holonomies_imag needs field = \"complex\"".into()));
                }
                if imag.len() != b.holonomies.len() {
                    return Err(CliError::Schema("bundle.holonomies_imag must match bundle.holonomies".into()));
                }
                for m in imag {
                    check_matrix("bundle.holonomies_imag", m, Some((b.rank, b.rank)))?;
                }
            }
            if matches!(b.metric, MetricSpec::Random { .. }) {
                self.require_seed("bundle.metric")?;
            }
        }
        if let Some(c) = &self.complex {
            if c.differentials.len() + 1 != c.ranks.len() {
                return Err(CliError::Schema("complex needs one differential fewer than ranks".into()));
            }
            for (p, d) in c.differentials.iter().enumerate() {
                check_matrix("complex.differentials", d, Some((c.ranks[p + 1], c.ranks[p])))?;
            }
        }
        if let Some(d) = &self.duality {
            for (what, m) in [("duality.pairing", &d.pairing), ("duality.differential", &d.differential)] {
                if let Some(m) = m {
                    check_matrix(what, m, None)?;
                }
            }
            if let JSpec::Parallel { matrix } = &d.j {
                check_matrix("duality.j.matrix", matrix, None)?;
            }
            if matches!(d.j, JSpec::Random { .. } | JSpec::RandomComplex { .. }) {
                self.require_seed("duality.j")?;
            }
        }
        if let Some(s) = &self.symplectic {
            check_matrix("symplectic.matrix", &s.matrix, None)?;
        }
        Ok(())
    }

    fn require_seed(&self, what: &str) -> Result<(), CliError> {
        match self.seed {
            Some(_) => Ok(()),
            None => Err(CliError::precondition("seed mandatory for randomized spec", format!("{what} is random"))),
        }
    }
}

/// Rectangular, finite and, when given, of the expected shape. Empty matrices
/// are allowed only with an expected shape that has a zero dimension.
fn check_matrix(what: &str, m: &Matrix, shape: Option<(usize, usize)>) -> Result<(), CliError> {
    let cols = m.first().map_or(0, Vec::len);
    if m.iter().any(|row| row.len() != cols) {
        return Err(CliError::precondition("matrices are rectangular", what.to_string()));
    }
    if m.iter().flatten().any(|x| !x.is_finite()) {
        return Err(CliError::precondition("matrices are numerically parseable", what.to_string()));
    }
    if let Some((r, c)) = shape {
        let empty_ok = m.is_empty() && (r == 0 || c == 0);
        if !empty_ok && (m.len() != r || cols != c) {
            return Err(CliError::Schema(format!("{what}: expected {r}×{c}, got {}×{cols}", m.len())));
        }
    }
    Ok(())
}
