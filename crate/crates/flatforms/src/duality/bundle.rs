//! Duality bundles, `ω = J⁻¹dJ` and the `p`-forms.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::{DualityError, Epsilon, Result};
use crate::discrete_calculus::{exterior_d, BaseGrid, GridError, GridField, Twist};
use crate::flat_bundle::FlatBundle;
use crate::grassmann::{FormMatrix, MultiIndex, C64};
use crate::linalg::{identity, inverse, max_abs, CMatrix};

/// Tolerance of the nodewise identities `J² = ε` and `JᵀQJ = Q`, relative to `|J|²`.
const J_TOL: f64 = 1e-10;

/// A flat duality bundle `(E, ∇, Q, J)` in a flat frame: `Q` is constant and the
/// holonomies preserve it.
#[derive(Clone, Debug)]
pub struct DualityBundle {
    epsilon: Epsilon,
    pairing: CMatrix,
    j: GridField,
    flat: FlatBundle,
}

impl DualityBundle {
    /// Samples `j` at the nodes and checks its twist `J(x + Lₐ) = Uₐ J(x) Uₐ⁻¹`
    /// on the seam nodes.
    pub fn new<F>(grid: &BaseGrid, epsilon: Epsilon, pairing: CMatrix, holonomies: Vec<CMatrix>, j: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> CMatrix + Sync,
    {
        let values: Vec<CMatrix> = (0..grid.node_count()).into_par_iter().map(|node| j(&grid.coords(node))).collect();
        let bundle = Self::from_values(grid, epsilon, pairing, holonomies, values)?;
        for axis in 0..grid.dim() {
            let u = &bundle.holonomies()[axis];
            let ui = inverse(u)?;
            let mut defect = 0.0f64;
            for node in (0..grid.node_count()).filter(|&node| grid.node_multi(node)[axis] == 0) {
                let mut x = grid.coords(node);
                x[axis] += grid.periods()[axis];
                let expected = u * bundle.j_at(node) * &ui;
                defect = defect.max(max_abs(&(j(&x) - &expected)) / (1.0 + max_abs(&expected)));
            }
            if defect > J_TOL {
                return Err(DualityError::JTwistViolated { axis, defect });
            }
        }
        Ok(bundle)
    }

    /// Bundle from `J` at the nodes; validates the pairing, the holonomies and
    /// the three nodewise conditions on `J`.
    pub fn from_values(
        grid: &BaseGrid,
        epsilon: Epsilon,
        pairing: CMatrix,
        holonomies: Vec<CMatrix>,
        j: Vec<CMatrix>,
    ) -> Result<Self> {
        let n = pairing.nrows();
        if pairing.ncols() != n {
            return Err(DualityError::NotSquare(n));
        }
        let scale = 1.0 + max_abs(&pairing);
        let eps = C64::new(epsilon.sign(), 0.0);
        let asym = max_abs(&(pairing.transpose() - &pairing * eps));
        if asym > 1e-12 * scale {
            return Err(DualityError::NotEpsilonSymmetric(asym));
        }
        if n > 0 {
            let s = pairing.clone().singular_values();
            let (lo, hi) = s.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            if lo <= 1e-12 * hi {
                return Err(DualityError::DegeneratePairing);
            }
        }
        for (axis, u) in holonomies.iter().enumerate() {
            if u.nrows() != n || u.ncols() != n {
                return Err(DualityError::NotSquare(n));
            }
            let defect = max_abs(&(u.transpose() * &pairing * u - &pairing));
            if defect > 1e-12 * scale * (1.0 + max_abs(u)).powi(2) {
                return Err(DualityError::HolonomyBreaksPairing { axis, defect });
            }
        }
        if j.len() != grid.node_count() {
            return Err(GridError::Incompatible.into());
        }
        let mut metric = Vec::with_capacity(j.len());
        for (node, jm) in j.iter().enumerate() {
            if jm.nrows() != n || jm.ncols() != n {
                return Err(DualityError::NotSquare(n));
            }
            let size = (1.0 + max_abs(jm)).powi(2);
            let square = max_abs(&(jm * jm - identity(n) * eps));
            if square > J_TOL * size {
                return Err(DualityError::InvalidJ { node, condition: "J² = ε", defect: square });
            }
            let compat = max_abs(&(jm.transpose() * &pairing * jm - &pairing));
            if compat > J_TOL * size * scale {
                return Err(DualityError::InvalidJ { node, condition: "JᵀQJ = Q", defect: compat });
            }
            let h = &pairing * jm;
            // symmetric up to roundoff; positivity is checked by the metric bundle
            metric.push((&h + h.adjoint()) * C64::new(0.5, 0.0));
        }
        let flat = FlatBundle::from_metric_values(grid, holonomies.clone(), metric)?;
        let twists = holonomies.iter().map(Twist::conjugation).collect::<std::result::Result<Vec<_>, _>>()?;
        let generators = grid.dim();
        let values = j.into_iter().map(|m| FormMatrix::from_body(generators, m)).collect();
        let j = GridField::from_values(grid, n, twists, values)?;
        Ok(DualityBundle { epsilon, pairing, j, flat })
    }

    pub fn grid(&self) -> &BaseGrid {
        self.flat.grid()
    }

    pub fn rank(&self) -> usize {
        self.pairing.nrows()
    }

    pub fn epsilon(&self) -> Epsilon {
        self.epsilon
    }

    pub fn pairing(&self) -> &CMatrix {
        &self.pairing
    }

    pub fn holonomies(&self) -> &[CMatrix] {
        self.flat.holonomies()
    }

    pub fn j_field(&self) -> &GridField {
        &self.j
    }

    pub fn j_at(&self, node: usize) -> CMatrix {
        self.j.value(node).coefficient(MultiIndex::EMPTY)
    }

    /// `h = QJ` at `node`.
    pub fn metric_at(&self, node: usize) -> CMatrix {
        self.flat.metric().value(node).coefficient(MultiIndex::EMPTY)
    }

    /// The underlying flat bundle with metric `QJ`.
    pub fn flat_bundle(&self) -> &FlatBundle {
        &self.flat
    }

    /// `ω = J⁻¹ dJ`; zero on a point.
    pub fn omega(&self) -> Result<GridField> {
        let dj = match exterior_d(&self.j) {
            Ok(dj) => dj,
            Err(GridError::PointBase) => return Ok(self.j.map(|m| FormMatrix::zero(m.generators(), m.dim()))),
            Err(e) => return Err(e.into()),
        };
        let values = (0..self.grid().node_count())
            .map(|node| Ok(dj.value(node).left_mul_matrix(&inverse(&self.j_at(node))?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(GridField::from_values(self.grid(), self.rank(), self.j.twists().to_vec(), values)?)
    }

    /// `max |J⁻¹dJ − h⁻¹dh|`: `ω` is the connection form of the metric adjoint `∇ + ω`.
    pub fn adjoint_residual(&self) -> Result<f64> {
        Ok(self.omega()?.try_sub(&self.flat.omega()?)?.max_abs())
    }

    /// Curvature of `∇ᵘ = ∇ + ω/2` plus `ω²/4`, that is `½(dω + ω²)`; second
    /// order in the grid spacing.
    pub fn unitary_curvature_residual(&self) -> Result<f64> {
        let omega = self.omega()?;
        let d_omega = match exterior_d(&omega) {
            Ok(f) => f,
            Err(GridError::PointBase) => return Ok(0.0),
            Err(e) => return Err(e.into()),
        };
        let mut worst = 0.0f64;
        for node in 0..self.grid().node_count() {
            let w = omega.value(node);
            let r = d_omega.value(node).try_add(&w.wedge_mul(w)?)?;
            worst = worst.max(0.5 * r.max_abs());
        }
        Ok(worst)
    }

    /// `tr[J cos(ω²/8π)]` for `ε = 1`, `−tr[J sin(ω²/8π)]` for `ε = −1`.
    pub fn p_form(&self) -> Result<GridField> {
        let omega = self.omega()?;
        let coefficients = match self.epsilon {
            Epsilon::Plus => cos_series(),
            Epsilon::Minus => sin_series().iter().map(|c| -c).collect(),
        };
        let values = (0..self.grid().node_count())
            .into_par_iter()
            .map(|node| {
                let w = omega.value(node);
                let series = w.wedge_mul(w)?.nilpotent_series(&coefficients);
                Ok(series.left_mul_matrix(&self.j_at(node)).trace())
            })
            .collect::<Result<Vec<_>>>()?;
        let form = scalar_field(self.grid(), values)?;
        check_degrees(&form, self.epsilon.p_degree())?;
        Ok(form)
    }

    /// `ch(∇^{E₊}) − ch(∇^{E₋})`, with `E±` the images of the projectors onto the
    /// eigenspaces of `J` (of `τ = J/√ε` when `ε = −1`) and `∇^{E±} = P±∇ᵘP±`.
    pub fn p_form_from_eigenbundles(&self) -> Result<GridField> {
        let omega = self.omega()?;
        let n = self.rank();
        let half = C64::new(0.5, 0.0);
        let tau_scale = self.epsilon.sqrt().inv();
        let curvature_scale = C64::new(0.0, 8.0 * PI).inv();
        let values = (0..self.grid().node_count())
            .into_par_iter()
            .map(|node| {
                let tau = self.j_at(node) * tau_scale;
                // P± (−ω²/4) P± is the curvature of ∇^{E±}; ch = tr e^{−R/2iπ}
                let y = {
                    let w = omega.value(node);
                    w.wedge_mul(w)?.scale(curvature_scale)
                };
                let mut total = FormMatrix::zero(y.generators(), 1);
                for sign in [1.0, -1.0] {
                    let p = (identity(n) + &tau * C64::new(sign, 0.0)) * half;
                    let z = y.left_mul_matrix(&p).right_mul_matrix(&p);
                    let ch = z.scale(C64::new(-1.0, 0.0)).exp_neg()?.left_mul_matrix(&p).trace();
                    total = total.try_add(&ch.scale(C64::new(sign, 0.0)))?;
                }
                Ok(total)
            })
            .collect::<Result<Vec<_>>>()?;
        scalar_field(self.grid(), values)
    }

    /// `−(1/4π) tr[J̇ ω sin(ω²/8π)]` for `ε = 1`, `−(1/4π) tr[J̇ ω cos(ω²/8π)]` for
    /// `ε = −1`: the `s`-derivative of `p` along a family `J(s)` up to an exact
    /// form, given `J̇ = ∂J/∂s` at the nodes.
    pub fn p_variation_integrand(&self, j_dot: &[CMatrix]) -> Result<GridField> {
        let omega = self.omega()?;
        let coefficients = match self.epsilon {
            Epsilon::Plus => sin_series(),
            Epsilon::Minus => cos_series(),
        };
        let values = (0..self.grid().node_count())
            .into_par_iter()
            .map(|node| {
                let w = omega.value(node);
                let series = w.wedge_mul(w)?.nilpotent_series(&coefficients);
                let inner = w.wedge_mul(&series)?.left_mul_matrix(&j_dot[node]);
                Ok(inner.trace().scale(C64::new(-1.0 / (4.0 * PI), 0.0)))
            })
            .collect::<Result<Vec<_>>>()?;
        scalar_field(self.grid(), values)
    }
}

/// Taylor coefficients of `cos(y/8π)` in powers of `y`.
fn cos_series() -> Vec<f64> {
    taylor(|k| (k % 2 == 0).then(|| if k % 4 == 0 { 1.0 } else { -1.0 }))
}

/// Taylor coefficients of `sin(y/8π)` in powers of `y`.
fn sin_series() -> Vec<f64> {
    taylor(|k| (k % 2 == 1).then(|| if k % 4 == 1 { 1.0 } else { -1.0 }))
}

fn taylor(sign: impl Fn(usize) -> Option<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    let mut factor = 1.0;
    for k in 0..8 {
        if k > 0 {
            factor /= 8.0 * PI * k as f64;
        }
        out.push(sign(k).map_or(0.0, |s| s * factor));
    }
    out
}

pub(super) fn scalar_field(grid: &BaseGrid, values: Vec<FormMatrix<C64>>) -> Result<GridField> {
    Ok(GridField::from_values(grid, 1, vec![Twist::trivial(1); grid.dim()], values)?)
}

/// Imaginary parts and degrees other than `residue` mod 4 must vanish, relative
/// to the size of the form.
pub(super) fn check_degrees(form: &GridField, residue: usize) -> Result<()> {
    let wrong = form.map_untwisted(|x| x.filter_terms(|i| i.degree() % 4 != residue)).max_abs();
    let defect = wrong.max(form.max_imag());
    if defect > 1e-10 * (1.0 + form.max_abs()) {
        return Err(DualityError::ParityViolated(defect));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duality::{boost_circle, hyperbolic_bundle, random_duality_bundle, symplectic_form, LieField};
    use crate::linalg::{from_rows, to_complex};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn torus(n: usize) -> BaseGrid {
        BaseGrid::torus(&[n, n], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn rejects_bad_data() {
        let grid = BaseGrid::point();
        let q = from_rows(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let bad_j = from_rows(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        // J² = 1 but QJ is not positive
        assert!(DualityBundle::from_values(&grid, Epsilon::Plus, q.clone(), vec![], vec![bad_j]).is_err());
        let skew = symplectic_form(1);
        assert!(matches!(
            DualityBundle::from_values(&grid, Epsilon::Plus, skew, vec![], vec![identity(2)]),
            Err(DualityError::NotEpsilonSymmetric(_))
        ));
        let degenerate = from_rows(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            DualityBundle::from_values(&grid, Epsilon::Plus, degenerate, vec![], vec![identity(2)]),
            Err(DualityError::DegeneratePairing)
        ));
        let circle = BaseGrid::circle(8, 1.0).unwrap();
        let stretch = from_rows(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            DualityBundle::new(&circle, Epsilon::Plus, q.clone(), vec![stretch], |_| q.clone()),
            Err(DualityError::HolonomyBreaksPairing { .. })
        ));
    }

    #[test]
    fn parallel_j_has_vanishing_omega_and_signature_p() {
        let grid = torus(6);
        let q = from_rows(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0]);
        let b = DualityBundle::new(&grid, Epsilon::Plus, q.clone(), vec![identity(3); 2], |_| q.clone()).unwrap();
        assert_eq!(b.omega().unwrap().max_abs(), 0.0);
        let p = b.p_form().unwrap();
        for node in 0..grid.node_count() {
            assert!((p.value(node).scalar(MultiIndex::EMPTY) - C64::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn boost_on_a_circle_matches_the_analytic_omega() {
        let nodes = 256;
        let amplitude = 0.4;
        let b = boost_circle(nodes, amplitude).unwrap();
        let omega = b.omega().unwrap();
        let grid = b.grid().clone();
        let mut worst = 0.0f64;
        for node in 0..nodes {
            let theta = grid.coords(node)[0];
            // J = Q e^{−2aK}, so ω = −2a′K dθ
            let k = to_complex(&nalgebra::DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
            let expected = k * C64::new(-2.0 * amplitude * theta.cos(), 0.0);
            let got = omega.value(node).coefficient(MultiIndex::single(0));
            worst = worst.max(max_abs(&(got - expected)));
        }
        // central differences
        assert!(worst < 1e-3, "{worst}");
        assert!(b.adjoint_residual().unwrap() < 1e-12);
    }

    #[test]
    fn unitary_curvature_residual_is_second_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let family = random_duality_bundle(&mut rng, Epsilon::Minus, 4, 2, 0.4).unwrap();
        let coarse = family.bundle(&torus(16)).unwrap().unitary_curvature_residual().unwrap();
        let fine = family.bundle(&torus(32)).unwrap().unitary_curvature_residual().unwrap();
        let ratio = coarse / fine;
        assert!((3.0..5.0).contains(&ratio), "{coarse} {fine}");
    }

    #[test]
    fn p_form_equals_the_eigenbundle_difference() {
        for (seed, epsilon) in [(1, Epsilon::Plus), (2, Epsilon::Minus), (3, Epsilon::Plus), (4, Epsilon::Minus)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let family = random_duality_bundle(&mut rng, epsilon, 4, 2, 0.6).unwrap();
            let b = family.bundle(&torus(8)).unwrap();
            let p = b.p_form().unwrap();
            let split = b.p_form_from_eigenbundles().unwrap();
            let diff = p.try_sub(&split).unwrap().max_abs();
            assert!(diff < 1e-10, "{epsilon:?}: {diff}");
            if epsilon == Epsilon::Minus {
                assert!(p.degree_part(2).max_abs() > 1e-6, "the symplectic p-form is trivially zero");
            }
        }
    }

    #[test]
    fn hyperbolic_bundle_has_zero_p_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for epsilon in [Epsilon::Plus, Epsilon::Minus] {
            let family = hyperbolic_bundle(&mut rng, epsilon, 2, 2, 0.2, 0.5).unwrap();
            let b = family.bundle(&torus(8)).unwrap();
            assert!(b.p_form().unwrap().max_abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_p_form_below_degree_four_is_the_signature() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let family = random_duality_bundle(&mut rng, Epsilon::Plus, 3, 3, 0.4).unwrap();
        let grid = BaseGrid::torus(&[6, 6, 6], &[1.0; 3]).unwrap();
        let b = family.bundle(&grid).unwrap();
        let p = b.p_form().unwrap();
        let signature = crate::duality::signature(&b.pairing().map(|z| z.re)).unwrap() as f64;
        for v in p.values() {
            assert!((v.scalar(MultiIndex::EMPTY) - C64::new(signature, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn variation_integrand_transgresses_the_p_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let family = random_duality_bundle(&mut rng, Epsilon::Minus, 4, 2, 0.3).unwrap();
        let end = family.random_field(&mut rng, 0.3).unwrap();
        let residual = |n: usize| {
            let grid = BaseGrid::torus(&[n, n], &[1.0, 1.0]).unwrap();
            let at = |s: f64| {
                let field = LieField::combine(&[(1.0 - s, &family.field), (s, &end)]);
                family.bundle_with(&grid, &field).unwrap()
            };
            let (s, h) = (0.4, 1e-4);
            let (plus, minus) = (at(s + h), at(s - h));
            let j_dot: Vec<CMatrix> = (0..grid.node_count())
                .map(|k| (plus.j_at(k) - minus.j_at(k)) * C64::new(0.5 / h, 0.0))
                .collect();
            let dp = plus.p_form().unwrap().try_sub(&minus.p_form().unwrap()).unwrap();
            let dp = dp.map_untwisted(|x| x.scale(C64::new(0.5 / h, 0.0)));
            let d_integrand = exterior_d(&at(s).p_variation_integrand(&j_dot).unwrap()).unwrap();
            d_integrand.try_sub(&dp).unwrap().max_abs()
        };
        let (coarse, fine) = (residual(16), residual(32));
        assert!((3.0..5.0).contains(&(coarse / fine)), "{coarse} {fine}");
    }
}
