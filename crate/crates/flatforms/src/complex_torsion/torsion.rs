//! Based cochain complexes over `R` and `Z`, their cohomology and Reidemeister torsion.
//!
//! Convention: with `d̃_p` the differential in orthonormal coordinates,
//! `T = Σ_p (−1)^p ln Π σ(d̃_p) + Σ_p (−1)^p ln(vol(H^p)/vol_{L²}(H^p))`,
//! the product running over nonzero singular values. Thus `T = ln|c|` for
//! `0 → R →^c R → 0` with unit volumes. Equivalently
//! `T = −½ Σ_p (−1)^p p ln det′Δ_p` plus the same harmonic correction.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};

use super::snf::{is_zero, to_f64, zmul, SmithForm, ZMatrix};
use super::k0vol::{k0vol_class, K0Vol};
use super::TorsionError;

/// Relative cutoff below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-10;

/// A real cochain complex `C⁰ → C¹ → ⋯` with an inner product per degree.
#[derive(Clone, Debug, PartialEq)]
pub struct BasedComplex {
    ranks: Vec<usize>,
    differentials: Vec<DMatrix<f64>>,
    grams: Vec<DMatrix<f64>>,
}

/// Harmonic cohomology in one degree: a Gram-orthonormal basis of `ker Δ_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicCohomology {
    pub rank: usize,
    pub basis: DMatrix<f64>,
}

/// How the cohomology volume forms are specified.
#[derive(Clone, Debug, PartialEq)]
pub enum CohomologyVolumes {
    /// `vol(H^p) = vol_{L²}(H^p)` in every degree.
    L2,
    /// `vol(H^p) / vol_{L²}(H^p)` per degree; must be 1 where `H^p = 0`.
    Ratios(Vec<f64>),
}

impl BasedComplex {
    /// Complex with unit (standard) inner products. `differentials[p]` maps
    /// `C^p → C^{p+1}` and has shape `ranks[p+1] × ranks[p]`.
    pub fn new(ranks: Vec<usize>, differentials: Vec<DMatrix<f64>>) -> Result<Self, TorsionError> {
        check_shapes(&ranks, differentials.iter().map(|d| d.shape()))?;
        for p in 1..differentials.len() {
            let dd = &differentials[p] * &differentials[p - 1];
            let scale = 1.0 + differentials[p].amax() * differentials[p - 1].amax();
            if dd.amax() > 1e-12 * scale {
                return Err(TorsionError::NotAComplex { degree: p - 1 });
            }
        }
        let grams = ranks.iter().map(|&n| DMatrix::identity(n, n)).collect();
        Ok(BasedComplex { ranks, differentials, grams })
    }

    /// Scales each standard inner product so the standard basis of `C^p` has
    /// volume `vols[p]`. The zero space only carries the volume 1.
    pub fn with_volumes(self, vols: &[f64]) -> Result<Self, TorsionError> {
        let bad = |(v, &n): (&f64, &usize)| !(*v > 0.0 && v.is_finite()) || (n == 0 && *v != 1.0);
        if vols.len() != self.ranks.len() || vols.iter().zip(&self.ranks).any(bad) {
            return Err(TorsionError::InconsistentVolumes);
        }
        let grams = self
            .ranks
            .iter()
            .zip(vols)
            .map(|(&n, &v)| DMatrix::identity(n, n) * if n == 0 { 1.0 } else { v.powf(2.0 / n as f64) })
            .collect();
        self.with_grams(grams)
    }

    /// Arbitrary symmetric positive definite inner products.
    pub fn with_grams(mut self, grams: Vec<DMatrix<f64>>) -> Result<Self, TorsionError> {
        if grams.len() != self.ranks.len() {
            return Err(TorsionError::InconsistentVolumes);
        }
        for (g, &n) in grams.iter().zip(&self.ranks) {
            if g.shape() != (n, n) || (g - g.transpose()).amax() > 1e-12 * (1.0 + g.amax()) {
                return Err(TorsionError::InconsistentVolumes);
            }
            if n > 0 && g.clone().cholesky().is_none() {
                return Err(TorsionError::InconsistentVolumes);
            }
        }
        self.grams = grams;
        Ok(self)
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn differentials(&self) -> &[DMatrix<f64>] {
        &self.differentials
    }

    pub fn grams(&self) -> &[DMatrix<f64>] {
        &self.grams
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn euler_characteristic(&self) -> i64 {
        alternating(self.ranks.iter().map(|&n| n as i64))
    }

    /// `d_p` with zero maps at the ends.
    pub fn differential(&self, p: isize) -> DMatrix<f64> {
        let n = self.ranks.len() as isize;
        let rows = if p + 1 >= 0 && p + 1 < n { self.ranks[(p + 1) as usize] } else { 0 };
        let cols = if p >= 0 && p < n { self.ranks[p as usize] } else { 0 };
        if p >= 0 && (p as usize) < self.differentials.len() {
            self.differentials[p as usize].clone()
        } else {
            DMatrix::zeros(rows, cols)
        }
    }

    /// Upper Cholesky factor `R_p` with `G_p = R_pᵀ R_p`, so `x ↦ R_p x` is orthonormal.
    fn root(&self, p: usize) -> DMatrix<f64> {
        let n = self.ranks[p];
        if n == 0 {
            return DMatrix::zeros(0, 0);
        }
        self.grams[p].clone().cholesky().expect("validated positive").l().transpose()
    }

    /// `R_{p+1} d_p R_p⁻¹`.
    pub fn orthonormal_differential(&self, p: usize) -> DMatrix<f64> {
        let d = &self.differentials[p];
        let rp = self.root(p);
        let rq = self.root(p + 1);
        let rp_inv = if rp.nrows() == 0 { rp.clone() } else { rp.clone().try_inverse().expect("positive definite") };
        rq * d * rp_inv
    }

    /// Ranks of `d_p`, from singular values with a relative cutoff.
    pub fn differential_ranks(&self) -> Vec<usize> {
        (0..self.differentials.len())
            .map(|p| nonzero_singular_values(&self.orthonormal_differential(p)).len())
            .collect()
    }

    pub fn cohomology_field(&self) -> Vec<HarmonicCohomology> {
        (0..self.ranks.len()).map(|p| self.harmonic(p)).collect()
    }

    /// `ker d̃_p ∩ ker d̃_{p−1}ᵀ`, returned in the original coordinates.
    pub fn harmonic(&self, p: usize) -> HarmonicCohomology {
        let n = self.ranks[p];
        let mut stacked = DMatrix::zeros(0, n);
        if p < self.differentials.len() {
            stacked = self.orthonormal_differential(p);
        }
        if p > 0 {
            let prev = self.orthonormal_differential(p - 1).transpose();
            stacked = stack(&stacked, &prev);
        }
        let kernel = real_null_space(&stacked);
        let rp = self.root(p);
        let basis = if n == 0 { kernel } else { rp.try_inverse().expect("positive definite") * kernel };
        HarmonicCohomology { rank: basis.ncols(), basis }
    }

    /// `ln Π σ(d̃_p)` per degree.
    pub fn log_determinants(&self) -> Vec<f64> {
        (0..self.differentials.len())
            .map(|p| nonzero_singular_values(&self.orthonormal_differential(p)).iter().map(|s| s.ln()).sum())
            .collect()
    }

    /// Torsion with `vol(H) = vol_{L²}(H)`.
    pub fn torsion_l2(&self) -> f64 {
        alternating_f(self.log_determinants().into_iter())
    }

    pub fn reidemeister_torsion(&self, volumes: &CohomologyVolumes) -> Result<f64, TorsionError> {
        let base = self.torsion_l2();
        match volumes {
            CohomologyVolumes::L2 => Ok(base),
            CohomologyVolumes::Ratios(ratios) => {
                if ratios.len() != self.ranks.len() {
                    return Err(TorsionError::InconsistentVolumes);
                }
                let mut correction = 0.0;
                for (p, &r) in ratios.iter().enumerate() {
                    if !(r > 0.0 && r.is_finite()) {
                        return Err(TorsionError::InconsistentVolumes);
                    }
                    if self.harmonic(p).rank == 0 && (r - 1.0).abs() > 1e-12 {
                        return Err(TorsionError::InconsistentVolumes);
                    }
                    let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                    correction += sign * r.ln();
                }
                Ok(base + correction)
            }
        }
    }

    /// `−½ Σ_p (−1)^p p ln det′Δ_p` with `Δ_p = d̃*d̃ + d̃d̃*`, a second route to `torsion_l2`.
    pub fn laplacian_torsion(&self) -> f64 {
        let mut sum = 0.0;
        for p in 0..self.ranks.len() {
            let n = self.ranks[p];
            let mut lap = DMatrix::<f64>::zeros(n, n);
            if p < self.differentials.len() {
                let d = self.orthonormal_differential(p);
                lap += d.transpose() * d;
            }
            if p > 0 {
                let d = self.orthonormal_differential(p - 1);
                lap += &d * d.transpose();
            }
            let eig = lap.symmetric_eigen();
            let top = eig.eigenvalues.amax();
            let logdet: f64 =
                eig.eigenvalues.iter().filter(|&&l| l > RANK_TOL * top.max(1e-300)).map(|l| l.ln()).sum();
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * p as f64 * logdet;
        }
        -0.5 * sum
    }

    /// `vol_{L²}` of the classes of the given cocycles (columns) in `H^p`:
    /// the covolume of their harmonic projections.
    pub fn l2_volume_of_classes(&self, p: usize, cocycles: &DMatrix<f64>) -> f64 {
        let h = self.harmonic(p);
        // harmonic basis is Gram-orthonormal, so coordinates are hᵀ G z
        let coords = h.basis.transpose() * &self.grams[p] * cocycles;
        if coords.ncols() == 0 {
            return 1.0;
        }
        (coords.transpose() * coords).determinant().abs().sqrt()
    }

    pub fn direct_sum(&self, other: &BasedComplex) -> Result<BasedComplex, TorsionError> {
        let len = self.ranks.len().max(other.ranks.len());
        let rank = |c: &BasedComplex, p: usize| c.ranks.get(p).copied().unwrap_or(0);
        let ranks: Vec<usize> = (0..len).map(|p| rank(self, p) + rank(other, p)).collect();
        let diffs = (0..len.saturating_sub(1))
            .map(|p| block2(&self.differential(p as isize), &other.differential(p as isize)))
            .collect();
        let grams = (0..len)
            .map(|p| {
                let g = |c: &BasedComplex| c.grams.get(p).cloned().unwrap_or_else(|| DMatrix::zeros(0, 0));
                block2(&g(self), &g(other))
            })
            .collect();
        BasedComplex::new(ranks, diffs)?.with_grams(grams)
    }
}

/// Cohomology of an integer complex in one degree.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegralCohomology {
    pub free_rank: usize,
    pub torsion_order: BigInt,
    /// Invariant factors greater than one.
    pub torsion_factors: Vec<BigInt>,
}

impl IntegralCohomology {
    pub fn ln_torsion(&self) -> f64 {
        ln_big(&self.torsion_order)
    }
}

/// A cochain complex of free abelian groups with integer differentials.
#[derive(Clone, Debug, PartialEq)]
pub struct IntComplex {
    ranks: Vec<usize>,
    differentials: Vec<ZMatrix>,
}

impl IntComplex {
    pub fn new(ranks: Vec<usize>, differentials: Vec<ZMatrix>) -> Result<Self, TorsionError> {
        check_shapes(&ranks, differentials.iter().map(|d| d.shape()))?;
        for p in 1..differentials.len() {
            if !is_zero(&zmul(&differentials[p], &differentials[p - 1])) {
                return Err(TorsionError::NotAComplex { degree: p - 1 });
            }
        }
        Ok(IntComplex { ranks, differentials })
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn differentials(&self) -> &[ZMatrix] {
        &self.differentials
    }

    pub fn euler_characteristic(&self) -> i64 {
        alternating(self.ranks.iter().map(|&n| n as i64))
    }

    fn smith(&self) -> Vec<SmithForm> {
        self.differentials.iter().map(SmithForm::new).collect()
    }

    pub fn cohomology_integral(&self) -> Vec<IntegralCohomology> {
        let smith = self.smith();
        (0..self.ranks.len())
            .map(|p| {
                let rank_out = if p < smith.len() { smith[p].rank() } else { 0 };
                let incoming = (p > 0).then(|| &smith[p - 1]);
                let rank_in = incoming.map_or(0, |s| s.rank());
                let factors: Vec<BigInt> = incoming
                    .map(|s| s.invariant_factors.iter().filter(|d| !d.is_one()).cloned().collect())
                    .unwrap_or_default();
                IntegralCohomology {
                    free_rank: self.ranks[p] - rank_out - rank_in,
                    torsion_order: factors.iter().fold(BigInt::one(), |a, d| a * d),
                    torsion_factors: factors,
                }
            })
            .collect()
    }

    pub fn to_real(&self) -> BasedComplex {
        BasedComplex::new(self.ranks.clone(), self.differentials.iter().map(to_f64).collect())
            .expect("integer complex is a complex")
    }

    /// `vol_{L²}` of an integral basis of `H^p / torsion`, for the inner products of `real`:
    /// `covol(Z^p_Z) · |tor H^p| / covol(B^p_Z)`.
    pub fn integral_basis_l2_volumes(&self, real: &BasedComplex) -> Vec<f64> {
        let smith = self.smith();
        let cohomology = self.cohomology_integral();
        (0..self.ranks.len())
            .map(|p| {
                let g = &real.grams()[p];
                let cycles = if p < smith.len() {
                    to_f64(&smith[p].kernel_basis())
                } else {
                    DMatrix::identity(self.ranks[p], self.ranks[p])
                };
                let boundaries = if p > 0 { to_f64(&smith[p - 1].image_basis()) } else { DMatrix::zeros(self.ranks[p], 0) };
                let covol = |m: &DMatrix<f64>| if m.ncols() == 0 { 1.0 } else { (m.transpose() * g * m).determinant().sqrt() };
                covol(&cycles) * cohomology[p].torsion_order.to_f64().expect("torsion fits") / covol(&boundaries)
            })
            .collect()
    }
}

impl IntComplex {
    /// `a(T) + Σ_p (−1)^p [(C^p, vol_p)]` for a complex exact over `Z`, where
    /// `vols[p]` is the covolume of the standard basis of `C^p`. Vanishes.
    pub fn acyclic_class_residual(&self, vols: &[f64]) -> Result<K0Vol, TorsionError> {
        if self.cohomology_integral().iter().any(|h| h.free_rank > 0 || !h.torsion_order.is_one()) {
            return Err(TorsionError::NotExact { degree: 0, reason: "complex has cohomology over Z" });
        }
        let t = self.to_real().with_volumes(vols)?.torsion_l2();
        let classes: K0Vol = self
            .ranks
            .iter()
            .zip(vols)
            .enumerate()
            .map(|(p, (&n, &v))| {
                let c = k0vol_class(n, 1.0, v);
                if p % 2 == 0 { c } else { -c }
            })
            .sum();
        Ok(K0Vol::from_real(t) + classes)
    }
}

pub fn ln_big(x: &BigInt) -> f64 {
    let bits = x.bits();
    if bits < 1000 {
        x.to_f64().expect("finite").abs().ln()
    } else {
        let shift = bits - 900;
        let top: BigInt = x >> shift;
        top.to_f64().expect("finite").abs().ln() + shift as f64 * std::f64::consts::LN_2
    }
}

fn check_shapes(ranks: &[usize], shapes: impl Iterator<Item = (usize, usize)>) -> Result<(), TorsionError> {
    let shapes: Vec<_> = shapes.collect();
    if shapes.len() + 1 != ranks.len().max(1) {
        return Err(TorsionError::Shape { degree: shapes.len() });
    }
    for (p, &(r, c)) in shapes.iter().enumerate() {
        if r != ranks[p + 1] || c != ranks[p] {
            return Err(TorsionError::Shape { degree: p });
        }
    }
    Ok(())
}

fn alternating(values: impl Iterator<Item = i64>) -> i64 {
    values.enumerate().map(|(p, v)| if p % 2 == 0 { v } else { -v }).sum()
}

fn alternating_f(values: impl Iterator<Item = f64>) -> f64 {
    values.enumerate().map(|(p, v)| if p % 2 == 0 { v } else { -v }).sum()
}

/// Nonzero singular values, with cutoff relative to the largest one.
pub fn nonzero_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let s = m.clone().svd(false, false).singular_values;
    let top = s.amax();
    if top == 0.0 {
        return Vec::new();
    }
    s.iter().copied().filter(|&x| x > RANK_TOL * top).collect()
}

/// Orthonormal basis of the null space of `m` (columns).
pub fn real_null_space(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    // pad to square so the SVD exposes all right singular vectors
    let padded = if m.nrows() < n { stack(m, &DMatrix::zeros(n - m.nrows(), n)) } else { m.clone() };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let top = svd.singular_values.amax();
    let cols: Vec<_> = (0..n)
        .filter(|&i| top == 0.0 || svd.singular_values[i] <= RANK_TOL * top)
        .map(|i| vt.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

fn stack(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols().max(b.ncols()));
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

pub(crate) fn block2(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

#[cfg(test)]
mod tests {
    use super::super::snf::zmatrix;
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_term(c: f64) -> BasedComplex {
        BasedComplex::new(vec![1, 1], vec![DMatrix::from_element(1, 1, c)]).unwrap()
    }

    #[test]
    fn two_term_torsion_is_log_c() {
        for c in [2.0f64, 3.0, -5.0, 10.0] {
            let t = two_term(c).reidemeister_torsion(&CohomologyVolumes::L2).unwrap();
            assert!((t - c.abs().ln()).abs() < 1e-14);
            assert!((two_term(c).laplacian_torsion() - t).abs() < 1e-13);
        }
    }

    #[test]
    fn isometry_has_zero_torsion() {
        let theta = 0.7f64;
        let rot = DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()]);
        let c = BasedComplex::new(vec![2, 2], vec![rot]).unwrap();
        assert!(c.torsion_l2().abs() < 1e-14);
        let scaled = c.with_volumes(&[3.0, 3.0]).unwrap();
        assert!(scaled.torsion_l2().abs() < 1e-14);
    }

    #[test]
    fn zero_and_identity_complexes() {
        let zero = BasedComplex::new(vec![2, 3], vec![DMatrix::zeros(3, 2)]).unwrap();
        let h: Vec<usize> = zero.cohomology_field().iter().map(|h| h.rank).collect();
        assert_eq!(h, vec![2, 3]);
        let id = BasedComplex::new(vec![2, 2], vec![DMatrix::identity(2, 2)]).unwrap();
        assert!(id.cohomology_field().iter().all(|h| h.rank == 0));
    }

    #[test]
    fn rotation_circle_is_acyclic_with_torsion_two() {
        let d = zmatrix(2, 2, &[-1, -1, 1, -1]);
        let c = IntComplex::new(vec![2, 2], vec![d]).unwrap();
        let real = c.to_real();
        assert!(real.cohomology_field().iter().all(|h| h.rank == 0));
        let z = c.cohomology_integral();
        assert_eq!(z[1].free_rank, 0);
        assert_eq!(z[1].torsion_order, BigInt::from(2));
        assert!((real.torsion_l2() - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn coker_of_two() {
        let c = IntComplex::new(vec![1, 1], vec![zmatrix(1, 1, &[2])]).unwrap();
        let z = c.cohomology_integral();
        assert_eq!((z[0].free_rank, z[1].free_rank), (0, 0));
        assert_eq!(z[1].torsion_order, BigInt::from(2));
        let zero = IntComplex::new(vec![2, 1], vec![zmatrix(1, 2, &[0, 0])]).unwrap();
        let z = zero.cohomology_integral();
        assert_eq!((z[0].free_rank, z[1].free_rank), (2, 1));
        assert!(z.iter().all(|h| h.torsion_order.is_one()));
    }

    #[test]
    fn direct_sum_adds_torsion() {
        let a = two_term(3.0).with_volumes(&[2.0, 0.5]).unwrap();
        let b = BasedComplex::new(vec![2, 2, 1], vec![DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 0.0]), DMatrix::from_row_slice(1, 2, &[0.0, 4.0])]).unwrap();
        let s = a.direct_sum(&b).unwrap();
        assert!((s.torsion_l2() - a.torsion_l2() - b.torsion_l2()).abs() < 1e-12);
    }

    #[test]
    fn volume_ratios_are_validated() {
        let c = two_term(2.0);
        assert!(c.reidemeister_torsion(&CohomologyVolumes::Ratios(vec![2.0, 1.0])).is_err());
        let zero = BasedComplex::new(vec![1, 1], vec![DMatrix::zeros(1, 1)]).unwrap();
        let t = zero.reidemeister_torsion(&CohomologyVolumes::Ratios(vec![2.0, 3.0])).unwrap();
        assert!((t - (2f64.ln() - 3f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn not_a_complex() {
        let one = DMatrix::from_element(1, 1, 1.0);
        assert!(matches!(BasedComplex::new(vec![1, 1, 1], vec![one.clone(), one]), Err(TorsionError::NotAComplex { .. })));
    }

    fn random_complex(rng: &mut ChaCha8Rng) -> BasedComplex {
        // d_1 = P (I − Q) chosen to kill im d_0 via a projection
        let n = [2, 3, 2];
        let d0 = DMatrix::from_fn(n[1], n[0], |_, _| rng.random_range(-1.0..1.0));
        let k = real_null_space(&d0.transpose()); // complement of im d0
        let d1 = DMatrix::from_fn(n[2], k.ncols(), |_, _| rng.random_range(-1.0..1.0)) * k.transpose();
        BasedComplex::new(n.to_vec(), vec![d0, d1]).unwrap()
    }

    /// `g (⊕ identity pieces) g⁻¹` with ranks `[a, a + b, b + c, c]`.
    fn random_acyclic(rng: &mut ChaCha8Rng) -> IntComplex {
        use super::super::snf::{random_unimodular, zzeros};
        let (a, b, c) = (rng.random_range(0..3), rng.random_range(0..3), rng.random_range(0..3));
        let ranks = vec![a, a + b, b + c, c];
        let pieces = [a, b, c];
        let gs: Vec<_> = ranks.iter().map(|&n| random_unimodular(rng, n, 3 * n)).collect();
        let diffs = (0..3)
            .map(|p| {
                // d_p sends the last pieces[p] coordinates of C^p to the first ones of C^{p+1}
                let mut d = zzeros(ranks[p + 1], ranks[p]);
                let start = ranks[p] - pieces[p];
                for k in 0..pieces[p] {
                    d[(k, start + k)] = BigInt::from(if rng.random_bool(0.5) { 1 } else { -1 });
                }
                zmul(&zmul(&gs[p + 1].0, &d), &gs[p].1)
            })
            .collect();
        IntComplex::new(ranks, diffs).unwrap()
    }

    proptest! {
        #[test]
        fn invariant_under_special_linear_changes(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = random_complex(&mut rng);
            // basis change g_p with det 1 and Gram transformed to keep the same inner product
            let gs: Vec<DMatrix<f64>> = c.ranks().iter().map(|&n| {
                let mut g: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)) + DMatrix::identity(n, n) * 2.0;
                let det = g.determinant();
                let s = det.abs().powf(-1.0 / n as f64);
                g *= s;
                if g.determinant() < 0.0 { g.row_mut(0).neg_mut(); }
                g
            }).collect();
            // new coordinates y = g x: d' = g_{p+1} d g_p⁻¹, G' = g⁻ᵀ G g⁻¹
            let diffs: Vec<_> = (0..2).map(|p| &gs[p + 1] * &c.differentials()[p] * gs[p].clone().try_inverse().unwrap()).collect();
            let grams: Vec<_> = gs.iter().map(|g| { let gi = g.clone().try_inverse().unwrap(); gi.transpose() * gi }).collect();
            let changed = BasedComplex::new(c.ranks().to_vec(), diffs).unwrap().with_grams(grams).unwrap();
            // harmonic volumes are intrinsic, so L² torsion is unchanged
            prop_assert!((changed.torsion_l2() - c.torsion_l2()).abs() < 1e-9);
            // unimodular change with unit Grams: same covolumes, same torsion
            let diffs: Vec<_> = (0..2).map(|p| &gs[p + 1] * &c.differentials()[p] * gs[p].clone().try_inverse().unwrap()).collect();
            let plain = BasedComplex::new(c.ranks().to_vec(), diffs).unwrap();
            let ratio_vol: Vec<f64> = (0..3).map(|p| {
                let h = c.harmonic(p).basis;
                let hv = plain.l2_volume_of_classes(p, &(&gs[p] * &h));
                1.0 / hv
            }).collect();
            let t_plain = plain.reidemeister_torsion(&CohomologyVolumes::Ratios(ratio_vol)).unwrap();
            prop_assert!((t_plain - c.torsion_l2()).abs() < 1e-9, "{} vs {}", t_plain, c.torsion_l2());
        }

        #[test]
        fn acyclic_integer_complexes_have_zero_class(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = random_acyclic(&mut rng);
            let vols: Vec<f64> = c.ranks().iter().map(|&n| if n == 0 { 1.0 } else { rng.random_range(0.2..5.0) }).collect();
            let r = c.acyclic_class_residual(&vols).unwrap();
            prop_assert_eq!(r.z, 0);
            prop_assert!(r.r.abs() < 1e-10, "{}", r);
        }

        #[test]
        fn laplacian_route_agrees(seed in 0u64..100) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = random_complex(&mut rng);
            prop_assert!((c.laplacian_torsion() - c.torsion_l2()).abs() < 1e-9);
        }
    }
}
