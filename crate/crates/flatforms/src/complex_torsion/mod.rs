//! Finite cochain complexes over `Z` and `R` with volume forms: cohomology,
//! Reidemeister torsion, Milnor additivity, the group `R ⊕ Z` of volume
//! classes, and the pushforward of a local system on a finite CW complex.

mod k0vol;
mod local_system;
mod milnor;
pub mod snf;
mod torsion;

pub use k0vol::{k0vol_class, K0Vol};
pub use local_system::{library, GroupRingElement, HomologyVolumes, LocalSystemCW};
pub use milnor::{random_exact_triple, ExactTriple, MilnorTerms};
pub use snf::{SmithForm, ZMatrix};
pub use torsion::{
    ln_big, nonzero_singular_values, real_null_space, BasedComplex, CohomologyVolumes, HarmonicCohomology,
    IntComplex, IntegralCohomology, RANK_TOL,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TorsionError {
    #[error("differential {degree} has the wrong shape")]
    Shape { degree: usize },
    #[error("d² ≠ 0 after degree {degree}")]
    NotAComplex { degree: usize },
    #[error("volume data inconsistent with the complex")]
    InconsistentVolumes,
    #[error("holonomy of generator {generator} is not an integral unimodular {rank}×{rank} matrix")]
    InvalidHolonomy { generator: usize, rank: usize },
    #[error("word uses generator {0}, which has no holonomy")]
    UnknownGenerator(usize),
    #[error("cannot parse group ring element {0:?}")]
    Parse(String),
    #[error("sequence is not short exact in degree {degree}: {reason}")]
    NotExact { degree: usize, reason: &'static str },
    #[error("fiber volume must be positive and finite, got {0}")]
    BadVolume(f64),
}
