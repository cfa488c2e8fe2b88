//! Secondary invariants of flat vector bundles on discrete models.
//!
//! The crate is layered bottom-up:
//!
//! * [`grassmann`]: matrix-valued forms at a point, with the graded product,
//!   supertrace, transpose, the normalization `φ` and exponentials.
//! * [`heat`]: fast exponentials of even forms whose body is self-adjoint.
//! * [`discrete_calculus`]: point, circle and torus grids carrying fields of
//!   such forms, with a second-order exterior derivative.
//! * [`flat_bundle`]: flat bundles given by holonomies and a metric field; the
//!   odd characteristic forms.
//! * [`complex_torsion`]: based cochain complexes over `Z` and `R`, Smith normal
//!   form, Reidemeister torsion and the `K₀` volume classes of a point.
//! * [`superconnection`]: flat superconnections of total degree one, their odd
//!   forms and the torsion form.
//! * [`duality`]: duality bundles and complexes, `p`-forms, eta-forms and the
//!   normal form of symplectic holonomy.

pub mod complex_torsion;
pub mod discrete_calculus;
pub mod duality;
pub mod flat_bundle;
pub mod grassmann;
pub mod heat;
pub mod linalg;
pub mod quadrature;
pub mod superconnection;

pub use grassmann::{Coefficient, FormMatrix, Grading, MultiIndex, C64};
