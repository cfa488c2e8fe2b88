//! Flat duality bundles and complexes.
//!
//! A duality bundle carries a parallel nondegenerate `ε`-symmetric pairing `Q`
//! and an automorphism field `J` with `J² = ε`, `JᵀQJ = Q` and `QJ` positive, so
//! that `h = QJ` is a metric. All data are real; they are stored as complex
//! matrices because the grading `τ = J/√ε` is complex when `ε = −1`. The branch
//! is `√−1 = +i`.
//!
//! For a complex `A′ = ∇ + v`, the pair `(A, X)` is the `J`-odd and `J`-even
//! part of `A′` read as `A = A′ + X`, and `A² = −(Xσ)²`, which is evaluated as
//! `−X·(PX)` in the `τ`-graded product with `P` the sign flip on odd form
//! degrees.

mod bundle;
mod complex;
mod generators;
mod normal_form;

pub use bundle::DualityBundle;
pub use complex::{DualityComplex, EtaForm, InducedDuality, RescaledPair};
pub use generators::{
    boost_circle, hyperbolic_bundle, hyperbolic_complex, indefinite_form, lie_projection, random_duality_bundle,
    random_duality_complex, symplectic_form, ComplexShape, JFamily, LieField,
};
pub use normal_form::{
    elliptic_block, hyperbolic_block, random_symplectic, signature, standard_symplectic, symplectic_normal_form,
    symplectic_sum, NormalForm,
};

use thiserror::Error;

use crate::discrete_calculus::GridError;
use crate::flat_bundle::BundleError;
use crate::grassmann::{AlgebraError, C64};
use crate::linalg::LinalgError;
use crate::quadrature::QuadratureError;

/// The symmetry sign of the pairing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Epsilon {
    Plus,
    Minus,
}

impl Epsilon {
    pub fn from_sign(sign: i64) -> Result<Self> {
        match sign {
            1 => Ok(Epsilon::Plus),
            -1 => Ok(Epsilon::Minus),
            other => Err(DualityError::BadEpsilon(other)),
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Epsilon::Plus => 1.0,
            Epsilon::Minus => -1.0,
        }
    }

    /// `√ε` with `√−1 = +i`.
    pub fn sqrt(self) -> C64 {
        match self {
            Epsilon::Plus => C64::new(1.0, 0.0),
            Epsilon::Minus => C64::new(0.0, 1.0),
        }
    }

    /// Degree of the `p`-forms mod 4; the eta-forms sit one degree lower.
    pub fn p_degree(self) -> usize {
        match self {
            Epsilon::Plus => 0,
            Epsilon::Minus => 2,
        }
    }
}

#[derive(Debug, Error)]
pub enum DualityError {
    #[error("ε must be ±1, got {0}")]
    BadEpsilon(i64),
    #[error("pairing is not ε-symmetric (defect {0:.3e})")]
    NotEpsilonSymmetric(f64),
    #[error("pairing is degenerate")]
    DegeneratePairing,
    #[error("holonomy along axis {axis} does not preserve the pairing (defect {defect:.3e})")]
    HolonomyBreaksPairing { axis: usize, defect: f64 },
    #[error("J violates {condition} at node {node} (defect {defect:.3e})")]
    InvalidJ { node: usize, condition: &'static str, defect: f64 },
    #[error("J violates the twist along axis {axis} (defect {defect:.3e})")]
    JTwistViolated { axis: usize, defect: f64 },
    #[error("{what} does not respect the grading (defect {defect:.3e})")]
    NotGraded { what: &'static str, defect: f64 },
    #[error("differential is not compatible with the pairing (defect {0:.3e})")]
    NotCompatible(f64),
    #[error("differential does not square to zero (defect {0:.3e})")]
    NotFlat(f64),
    #[error("holonomy along axis {0} does not commute with the differential")]
    HolonomyBreaksDifferential(usize),
    #[error("t must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("cohomology rank jumps in degree {degree} at node {node}")]
    RankJump { node: usize, degree: usize },
    #[error("form has imaginary or off-degree part {0:.3e}")]
    ParityViolated(f64),
    #[error("family has {family} axes but the grid has {grid}")]
    AxisMismatch { family: usize, grid: usize },
    #[error("complexes have different shapes")]
    ShapeMismatch,
    #[error("matrix is not {0}×{0}")]
    NotSquare(usize),
    #[error("matrix is not symplectic (defect {0:.3e})")]
    NotSymplectic(f64),
    #[error("non-generic holonomy: unit-circle eigenvalue {0} is defective")]
    NonGeneric(C64),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

pub type Result<T> = std::result::Result<T, DualityError>;
