//! Flat complex bundles over grids, given by commuting holonomies and a
//! Hermitian metric field, and their odd characteristic forms.
//!
//! A bundle with holonomy `Uᵢ` along axis `i` is stored in a periodic frame in
//! which metrics obey `h(x + Lᵢeᵢ) = Uᵢ^{−†} h(x) Uᵢ^{−1}` and endomorphism fields
//! obey `V(x + Lᵢeᵢ) = Uᵢ V(x) Uᵢ^{−1}`. The flat connection is `d` in this frame.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::discrete_calculus::{exterior_d, integrate_cycle, BaseGrid, GridError, GridField, Twist};
use crate::grassmann::{FormMatrix, MultiIndex, C64};
use crate::linalg::{block_diag, check_positive, expm, hermitian_defect, identity, inverse, logm, max_abs, LinalgError};

/// Tolerance for pairwise commutation of holonomies.
pub const COMMUTATION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BundleError {
    #[error("expected {expected} holonomies, one per axis, got {got}")]
    HolonomyCount { expected: usize, got: usize },
    #[error("holonomy along axis {axis} is not {rank}×{rank}")]
    HolonomyShape { axis: usize, rank: usize },
    #[error("holonomies along axes {0} and {1} do not commute (defect {2:.3e})")]
    NonCommuting(usize, usize, f64),
    #[error("metric is not positive definite at node {node}")]
    NotPositive { node: usize },
    #[error("metric is not Hermitian at node {node} (defect {defect:.3e})")]
    NotHermitian { node: usize, defect: f64 },
    #[error("metric violates the twist along axis {axis} (defect {defect:.3e})")]
    TwistViolated { axis: usize, defect: f64 },
    #[error("characteristic form degree {0} must be odd and at most the base dimension")]
    BadDegree(usize),
    #[error("input {index} is not Hermitian (defect {defect:.3e})")]
    NonHermitianInput { index: usize, defect: f64 },
    #[error("Borel cocycle needs 1 to 6 matrices of equal size")]
    CocycleArity,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A flat bundle `E` with metric `h^E` on a grid.
#[derive(Clone, Debug)]
pub struct FlatBundle {
    grid: BaseGrid,
    rank: usize,
    holonomies: Vec<DMatrix<C64>>,
    metric: GridField,
}

impl FlatBundle {
    /// Validates holonomies and samples `metric` at every node, checking the twist
    /// identity on the seam nodes.
    pub fn new<F>(grid: &BaseGrid, holonomies: Vec<DMatrix<C64>>, metric: F) -> Result<Self, BundleError>
    where
        F: Fn(&[f64]) -> DMatrix<C64> + Sync,
    {
        let mut rank = check_holonomies(grid, &holonomies)?;
        if holonomies.is_empty() {
            // over a point the metric alone fixes the rank
            rank = metric(&grid.coords(0)).nrows();
        }
        let twists = holonomies.iter().map(Twist::metric).collect::<Result<Vec<_>, _>>()?;
        let n = grid.dim();
        let field = GridField::from_fn(grid, rank, twists.clone(), |x| FormMatrix::from_body(n, metric(x)))?;
        for node in 0..grid.node_count() {
            let h = field.value(node).coefficient(MultiIndex::EMPTY);
            let defect = hermitian_defect(&h);
            if defect > 1e-12 * (1.0 + max_abs(&h)) {
                return Err(BundleError::NotHermitian { node, defect });
            }
            if check_positive(&h).is_err() {
                return Err(BundleError::NotPositive { node });
            }
        }
        for axis in 0..n {
            let mut defect = 0.0f64;
            for node in 0..grid.node_count() {
                if grid.node_multi(node)[axis] != 0 {
                    continue;
                }
                let mut x = grid.coords(node);
                let h = field.value(node).coefficient(MultiIndex::EMPTY);
                x[axis] += grid.periods()[axis];
                let shifted = metric(&x);
                let expected = twists[axis].left() * &h * twists[axis].right();
                defect = defect.max(max_abs(&(shifted - &expected)) / (1.0 + max_abs(&expected)));
            }
            if defect > 1e-10 {
                return Err(BundleError::TwistViolated { axis, defect });
            }
        }
        Ok(FlatBundle { grid: grid.clone(), rank, holonomies, metric: field })
    }

    /// Bundle from metric values already sampled at the nodes. The seam identity
    /// cannot be checked without a formula; the field's twists are replaced by
    /// the ones the holonomies prescribe.
    pub fn from_metric_values(
        grid: &BaseGrid,
        holonomies: Vec<DMatrix<C64>>,
        metric: Vec<DMatrix<C64>>,
    ) -> Result<Self, BundleError> {
        let mut rank = check_holonomies(grid, &holonomies)?;
        if holonomies.is_empty() {
            rank = metric.first().map_or(0, |h| h.nrows());
        }
        let twists = holonomies.iter().map(Twist::metric).collect::<Result<Vec<_>, _>>()?;
        let n = grid.dim();
        for (node, h) in metric.iter().enumerate() {
            let defect = hermitian_defect(h);
            if defect > 1e-12 * (1.0 + max_abs(h)) {
                return Err(BundleError::NotHermitian { node, defect });
            }
            if rank > 0 && check_positive(h).is_err() {
                return Err(BundleError::NotPositive { node });
            }
        }
        let values = metric.into_iter().map(|h| FormMatrix::from_body(n, h)).collect();
        let field = GridField::from_values(grid, rank, twists, values)?;
        Ok(FlatBundle { grid: grid.clone(), rank, holonomies, metric: field })
    }

    /// Bundle with the default metric `h = G† K G`, where
    /// `G(x) = exp(−Σ (xᵢ/Lᵢ) log Uᵢ)` carries the twist and `K = exp(S)` is a
    /// periodic positive field with random Hermitian Fourier modes of size `amplitude`.
    pub fn with_default_metric(
        grid: &BaseGrid,
        holonomies: Vec<DMatrix<C64>>,
        amplitude: f64,
        seed: u64,
    ) -> Result<Self, BundleError> {
        let rank = check_holonomies(grid, &holonomies)?;
        let logs = holonomies.iter().map(logm).collect::<Result<Vec<_>, _>>()?;
        let modes = PeriodicHermitian::random(rank, grid.dim(), amplitude, seed);
        let periods = grid.periods().to_vec();
        Self::new(grid, holonomies, move |x| {
            let mut exponent = DMatrix::zeros(rank, rank);
            for (axis, log) in logs.iter().enumerate() {
                exponent -= log * C64::new(x[axis] / periods[axis], 0.0);
            }
            let g = expm(&exponent);
            let k = expm(&modes.at(x, &periods));
            g.adjoint() * k * g
        })
    }

    pub fn grid(&self) -> &BaseGrid {
        &self.grid
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn holonomies(&self) -> &[DMatrix<C64>] {
        &self.holonomies
    }

    pub fn metric(&self) -> &GridField {
        &self.metric
    }

    /// Twists of endomorphism-valued fields of this bundle.
    pub fn endomorphism_twists(&self) -> Result<Vec<Twist>, BundleError> {
        Ok(self.holonomies.iter().map(Twist::conjugation).collect::<Result<Vec<_>, _>>()?)
    }

    /// `ω = h⁻¹ dh`, a degree-1 endomorphism field.
    pub fn omega(&self) -> Result<GridField, BundleError> {
        let dh = exterior_d(&self.metric).or_else(|e| match e {
            // on a point ω vanishes
            GridError::PointBase => Ok(GridField::from_values(
                &self.grid,
                self.rank,
                Vec::new(),
                vec![FormMatrix::zero(0, self.rank)],
            )?),
            other => Err(other),
        })?;
        let mut values = Vec::with_capacity(self.grid.node_count());
        for node in 0..self.grid.node_count() {
            let h = self.metric.value(node).coefficient(MultiIndex::EMPTY);
            let hi = inverse(&h)?;
            values.push(dh.value(node).left_mul_matrix(&hi));
        }
        Ok(GridField::from_values(&self.grid, self.rank, self.endomorphism_twists()?, values)?)
    }

    /// `c_k = (2iπ)^{−(k−1)/2} 2^{−k} Tr[ω^k]` for odd `k ≤ dim`.
    pub fn c_k(&self, k: usize) -> Result<GridField, BundleError> {
        if k % 2 == 0 || k > self.grid.dim() {
            return Err(BundleError::BadDegree(k));
        }
        let omega = self.omega()?;
        Ok(omega.map_untwisted(|w| odd_form_term(w, k)))
    }

    /// `c = Σ_j c_{2j+1} / j!`.
    pub fn c_total(&self) -> Result<GridField, BundleError> {
        let omega = self.omega()?;
        let dim = self.grid.dim();
        Ok(omega.map_untwisted(|w| {
            let mut sum = FormMatrix::zero(dim, 1);
            let mut k = 1;
            let mut factorial = 1.0;
            let mut j = 0;
            while k <= dim {
                let term = odd_form_term(w, k).scale(C64::new(1.0 / factorial, 0.0));
                sum = &sum + &term;
                j += 1;
                factorial *= j as f64;
                k += 2;
            }
            sum
        }))
    }

    /// `E ⊕ F` with block holonomies and block metric.
    pub fn direct_sum(&self, other: &FlatBundle) -> Result<FlatBundle, BundleError> {
        if self.grid != other.grid {
            return Err(GridError::Incompatible.into());
        }
        let holonomies: Vec<_> = self
            .holonomies
            .iter()
            .zip(&other.holonomies)
            .map(|(a, b)| block_diag(&[a.clone(), b.clone()]))
            .collect();
        let twists = holonomies.iter().map(Twist::metric).collect::<Result<Vec<_>, _>>()?;
        let values = self
            .metric
            .values()
            .iter()
            .zip(other.metric.values())
            .map(|(a, b)| {
                FormMatrix::from_body(
                    self.grid.dim(),
                    block_diag(&[a.coefficient(MultiIndex::EMPTY), b.coefficient(MultiIndex::EMPTY)]),
                )
            })
            .collect();
        let metric = GridField::from_values(&self.grid, self.rank + other.rank, twists, values)?;
        Ok(FlatBundle { grid: self.grid.clone(), rank: self.rank + other.rank, holonomies, metric })
    }
}

/// Pairing of a closed scalar form with the fundamental cycle of the sub-torus
/// on `axes`, with each circle oriented so that `∮ c₁ = ln|det U|`.
pub fn cycle_pairing(form: &GridField, axes: &[usize]) -> Result<f64, BundleError> {
    let raw = integrate_cycle(form, axes)?;
    let sign = if axes.len() % 2 == 0 { 1.0 } else { -1.0 };
    Ok(sign * raw.re)
}

/// `(2iπ)^{−(k−1)/2} 2^{−k} Tr[ω^k]` at one node.
pub fn odd_form_term(omega: &FormMatrix<C64>, k: usize) -> FormMatrix<C64> {
    let mut power = omega.clone();
    for _ in 1..k {
        power = &power * omega;
    }
    let scale = C64::new(0.0, 2.0 * std::f64::consts::PI).powf(-((k - 1) as f64) / 2.0) * 0.5f64.powi(k as i32);
    power.trace().scale(scale)
}

/// `Φ_k(M₁, …, M_k) = Σ_σ sign(σ) Tr[M_σ(1) ⋯ M_σ(k)]` for Hermitian inputs.
///
/// Hermitian reversal makes the value real for `k ≡ 0, 1 (mod 4)` and purely
/// imaginary for `k ≡ 2, 3 (mod 4)`, so it is returned as a complex number.
pub fn borel_cocycle(matrices: &[DMatrix<C64>]) -> Result<C64, BundleError> {
    let k = matrices.len();
    if k == 0 || k > 6 || matrices.iter().any(|m| !m.is_square() || m.nrows() != matrices[0].nrows()) {
        return Err(BundleError::CocycleArity);
    }
    for (index, m) in matrices.iter().enumerate() {
        let defect = hermitian_defect(m);
        if defect > 1e-12 * (1.0 + max_abs(m)) {
            return Err(BundleError::NonHermitianInput { index, defect });
        }
    }
    let mut total = C64::new(0.0, 0.0);
    let mut perm: Vec<usize> = (0..k).collect();
    for_each_permutation(&mut perm, 0, 1.0, &mut |p, sign| {
        let mut prod = matrices[p[0]].clone();
        for &i in &p[1..] {
            prod = &prod * &matrices[i];
        }
        total += prod.trace() * sign;
    });
    Ok(total)
}

/// Heap-free recursive enumeration by transpositions, tracking the sign.
fn for_each_permutation(perm: &mut Vec<usize>, start: usize, sign: f64, f: &mut impl FnMut(&[usize], f64)) {
    if start == perm.len() {
        f(perm, sign);
        return;
    }
    for i in start..perm.len() {
        perm.swap(start, i);
        let s = if i == start { sign } else { -sign };
        for_each_permutation(perm, start + 1, s, f);
        perm.swap(start, i);
    }
}

fn check_holonomies(grid: &BaseGrid, holonomies: &[DMatrix<C64>]) -> Result<usize, BundleError> {
    if holonomies.len() != grid.dim() {
        return Err(BundleError::HolonomyCount { expected: grid.dim(), got: holonomies.len() });
    }
    let rank = holonomies.first().map_or(0, |u| u.nrows());
    for (axis, u) in holonomies.iter().enumerate() {
        if u.nrows() != rank || u.ncols() != rank {
            return Err(BundleError::HolonomyShape { axis, rank });
        }
        inverse(u)?;
    }
    for i in 0..holonomies.len() {
        for j in i + 1..holonomies.len() {
            let (a, b) = (&holonomies[i], &holonomies[j]);
            let defect = max_abs(&(a * b - b * a)) / (1.0 + max_abs(a) * max_abs(b));
            if defect > COMMUTATION_TOL {
                return Err(BundleError::NonCommuting(i, j, defect));
            }
        }
    }
    Ok(rank)
}

/// Random periodic Hermitian field `S(x) = Σᵢ Aᵢ cos(2πxᵢ/Lᵢ) + Bᵢ sin(2πxᵢ/Lᵢ)`.
#[derive(Clone, Debug)]
pub struct PeriodicHermitian {
    modes: Vec<(DMatrix<C64>, DMatrix<C64>)>,
}

impl PeriodicHermitian {
    pub fn random(rank: usize, axes: usize, amplitude: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes = (0..axes)
            .map(|_| (random_hermitian(&mut rng, rank, amplitude), random_hermitian(&mut rng, rank, amplitude)))
            .collect();
        PeriodicHermitian { modes }
    }

    pub fn at(&self, x: &[f64], periods: &[f64]) -> DMatrix<C64> {
        let rank = self.modes.first().map_or(0, |m| m.0.nrows());
        let mut s = DMatrix::zeros(rank, rank);
        for (axis, (a, b)) in self.modes.iter().enumerate() {
            let phase = 2.0 * std::f64::consts::PI * x[axis] / periods[axis];
            s += a * C64::new(phase.cos(), 0.0) + b * C64::new(phase.sin(), 0.0);
        }
        s
    }
}

/// Hermitian matrix with entries of size about `scale`.
pub fn random_hermitian(rng: &mut impl Rng, n: usize, scale: f64) -> DMatrix<C64> {
    let m = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&m + m.adjoint()) * C64::new(scale / 2.0, 0.0)
}

/// Random matrix `exp(H)` with `H` Hermitian: an invertible holonomy whose
/// powers commute with each other.
pub fn random_positive(rng: &mut impl Rng, n: usize, scale: f64) -> DMatrix<C64> {
    expm(&random_hermitian(rng, n, scale))
}

/// Commuting holonomies `exp(pᵢ(H))` for one random matrix `H`, one per axis.
pub fn random_commuting_holonomies(rng: &mut impl Rng, n: usize, axes: usize, scale: f64) -> Vec<DMatrix<C64>> {
    let h = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        * C64::new(scale, 0.0);
    let id = identity(n);
    (0..axes)
        .map(|_| {
            let (a, b) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            expm(&(&id * C64::new(a * scale, 0.0) + &h * C64::new(b, 0.0) + &h * &h * C64::new(0.2 * a * b, 0.0)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, sqrt_and_inv_sqrt};
    use std::f64::consts::PI;

    fn line_bundle(lambda: f64, n: usize) -> FlatBundle {
        let grid = BaseGrid::circle(n, 2.0 * PI).unwrap();
        let u = DMatrix::from_element(1, 1, c(lambda));
        FlatBundle::new(&grid, vec![u], |x| DMatrix::from_element(1, 1, c(lambda.powf(-x[0] / PI)))).unwrap()
    }

    #[test]
    fn unitary_constant_metric_has_zero_omega() {
        let grid = BaseGrid::torus(&[8, 8], &[1.0, 1.0]).unwrap();
        let u = DMatrix::from_diagonal(&nalgebra::dvector![C64::from_polar(1.0, 0.3), C64::from_polar(1.0, -1.1)]);
        let b = FlatBundle::new(&grid, vec![u.clone(), u], |_| identity(2)).unwrap();
        assert!(b.omega().unwrap().max_abs() < 1e-14);
        assert!(b.c_total().unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn line_bundle_omega_and_c1() {
        let lambda = 3.0f64;
        let mut errs = Vec::new();
        for n in [32, 64] {
            let b = line_bundle(lambda, n);
            let w = b.omega().unwrap();
            let err = (0..n)
                .map(|i| (w.value(i).scalar(MultiIndex::single(0)) - c(-lambda.ln() / PI)).norm())
                .fold(0.0, f64::max);
            errs.push(err);
            let c1 = b.c_k(1).unwrap();
            let pairing = cycle_pairing(&c1, &[0]).unwrap();
            assert!((pairing - lambda.ln()).abs() < 1e-2, "{pairing}");
        }
        assert!(errs[0] / errs[1] > 3.5, "{errs:?}");
    }

    #[test]
    fn omega_is_similar_to_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let grid = BaseGrid::torus(&[8, 8], &[1.0, 2.0]).unwrap();
        let hol = random_commuting_holonomies(&mut rng, 3, 2, 0.5);
        let b = FlatBundle::with_default_metric(&grid, hol, 0.3, 9).unwrap();
        let w = b.omega().unwrap();
        for node in [0, 17, 63] {
            let h = b.metric().value(node).coefficient(MultiIndex::EMPTY);
            let (root, inv_root) = sqrt_and_inv_sqrt(&h).unwrap();
            for (_, m) in w.value(node).terms() {
                let conj = &root * m * &inv_root;
                assert!(hermitian_defect(&conj) < 1e-12 * (1.0 + max_abs(&conj)));
            }
        }
    }

    #[test]
    fn c1_is_half_dlog_det() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 128;
        let grid = BaseGrid::circle(n, 1.0).unwrap();
        let hol = random_commuting_holonomies(&mut rng, 2, 1, 0.5);
        let b = FlatBundle::with_default_metric(&grid, hol.clone(), 0.3, 1).unwrap();
        let c1 = b.c_k(1).unwrap();
        let det_shift = hol[0].determinant().norm().ln();
        let logdet = |node: usize| b.metric().value(node % n).coefficient(MultiIndex::EMPTY).determinant().re.ln();
        for node in 1..n - 1 {
            let fd = 0.25 * (logdet(node + 1) - logdet(node - 1)) / grid.spacing(0);
            let got = c1.value(node).scalar(MultiIndex::single(0)).re;
            // the two stencils agree to second order
            assert!((got - fd).abs() < 1e-3 * (1.0 + fd.abs()), "{got} vs {fd}");
        }
        assert!((cycle_pairing(&c1, &[0]).unwrap() - det_shift).abs() < 1e-2);
    }

    #[test]
    fn c3_is_real_and_closed_enough() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let grid = BaseGrid::torus(&[10, 10, 10], &[1.0, 1.0, 1.0]).unwrap();
        let hol = random_commuting_holonomies(&mut rng, 3, 3, 0.4);
        let b = FlatBundle::with_default_metric(&grid, hol, 0.3, 2).unwrap();
        let c3 = b.c_k(3).unwrap();
        assert!(c3.max_imag() < 1e-12);
        assert!(matches!(b.c_k(2), Err(BundleError::BadDegree(2))));
    }

    #[test]
    fn direct_sum_is_additive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = BaseGrid::torus(&[8, 8], &[1.0, 1.0]).unwrap();
        let a = FlatBundle::with_default_metric(&grid, random_commuting_holonomies(&mut rng, 2, 2, 0.5), 0.2, 4).unwrap();
        let b = FlatBundle::with_default_metric(&grid, random_commuting_holonomies(&mut rng, 1, 2, 0.5), 0.2, 5).unwrap();
        let sum = a.direct_sum(&b).unwrap();
        let lhs = sum.c_total().unwrap();
        let rhs = a.c_total().unwrap().try_add(&b.c_total().unwrap()).unwrap();
        assert!(lhs.try_sub(&rhs).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let grid = BaseGrid::torus(&[8, 8], &[1.0, 1.0]).unwrap();
        let a = crate::linalg::from_rows(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let b = crate::linalg::from_rows(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        assert!(matches!(FlatBundle::with_default_metric(&grid, vec![a, b], 0.1, 0), Err(BundleError::NonCommuting(..)) | Err(BundleError::Linalg(_))));
        let circle = BaseGrid::circle(8, 1.0).unwrap();
        let twisted = DMatrix::from_element(1, 1, c(2.0));
        assert!(matches!(FlatBundle::new(&circle, vec![twisted], |_| identity(1)), Err(BundleError::TwistViolated { .. })));
    }

    fn oracle_phi3(m: &[DMatrix<C64>]) -> C64 {
        let perms = [([0, 1, 2], 1.0), ([1, 2, 0], 1.0), ([2, 0, 1], 1.0), ([1, 0, 2], -1.0), ([0, 2, 1], -1.0), ([2, 1, 0], -1.0)];
        perms.iter().map(|(p, s)| (&m[p[0]] * &m[p[1]] * &m[p[2]]).trace() * *s).sum()
    }

    #[test]
    fn borel_cocycle_examples() {
        let m = crate::linalg::from_rows(2, 2, &[1.0, 2.0, 2.0, -3.0]);
        assert_eq!(borel_cocycle(std::slice::from_ref(&m)).unwrap(), m.trace());
        let a = crate::linalg::from_rows(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let sx = crate::linalg::from_rows(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let d = crate::linalg::from_rows(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let args = [a.clone(), sx.clone(), d.clone()];
        assert_eq!(borel_cocycle(&args).unwrap(), oracle_phi3(&args));
        assert_eq!(borel_cocycle(&args).unwrap(), c(0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ms: Vec<_> = (0..3).map(|_| random_hermitian(&mut rng, 3, 1.0)).collect();
        let v = borel_cocycle(&ms).unwrap();
        assert!((v - oracle_phi3(&ms)).norm() < 1e-12);
        assert!(v.re.abs() < 1e-12, "Φ₃ of Hermitian inputs is imaginary");
        let swapped = [ms[1].clone(), ms[0].clone(), ms[2].clone()];
        assert!((borel_cocycle(&swapped).unwrap() + v).norm() < 1e-12);
        let non_hermitian = crate::linalg::from_rows(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(borel_cocycle(&[non_hermitian]).is_err());
    }
}
