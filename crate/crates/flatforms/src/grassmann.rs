//! Matrix-valued differential forms at a point.
//!
//! A [`FormMatrix`] is an element of `Λ(R^N) ⊗ M_r(T)`: a finite sum of terms
//! `dθ^I ⊗ B_I` where `I` is a strictly increasing subset of `{1, …, N}` and
//! `B_I` is an `r × r` matrix. Multi-indices are stored as bitmasks so that the
//! reordering sign of a wedge product is a popcount.
//!
//! Two products live on the same carrier:
//!
//! * [`FormMatrix::wedge_mul`] treats forms and matrices as commuting symbols.
//! * [`FormMatrix::super_mul`] is the product of the graded tensor product
//!   `Λ ⊗̂ End(E)` for a `Z₂`-grading `τ` on `E`: an odd matrix picks up a sign
//!   when an odd form moves past it. Supertraces vanish on supercommutators only
//!   for this product.
//!
//! Coefficients are generic over [`Coefficient`], so the same code runs in
//! complex floating point and in exact rational arithmetic.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::{ClosedAddAssign, ClosedMulAssign, ClosedSubAssign, DMatrix, Scalar};
use num_complex::Complex64;
use num_traits::{One, Zero};
use thiserror::Error;

/// Largest supported number of Grassmann generators.
pub const MAX_GENERATORS: usize = 8;

/// Complex double, the default coefficient field.
pub type C64 = Complex64;

/// Scalars admissible as matrix entries.
pub trait Coefficient:
    Scalar
    + Zero
    + One
    + ClosedAddAssign
    + ClosedSubAssign
    + ClosedMulAssign
    + Neg<Output = Self>
    + Div<Output = Self>
{
}

impl<T> Coefficient for T where
    T: Scalar
        + Zero
        + One
        + ClosedAddAssign
        + ClosedSubAssign
        + ClosedMulAssign
        + Neg<Output = Self>
        + Div<Output = Self>
{
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("too many generators: {0} (at most {MAX_GENERATORS})")]
    TooManyGenerators(usize),
    #[error("generator {generator} out of range for {generators} generators")]
    GeneratorOutOfRange { generator: usize, generators: usize },
    #[error("multi-index must be strictly increasing")]
    UnorderedIndex,
    #[error("shape mismatch: ({left_gens} gens, {left_dim}x{left_dim}) vs ({right_gens} gens, {right_dim}x{right_dim})")]
    ShapeMismatch {
        left_gens: usize,
        left_dim: usize,
        right_gens: usize,
        right_dim: usize,
    },
    #[error("coefficient matrix is {rows}x{cols}, expected {dim}x{dim}")]
    BadCoefficient { rows: usize, cols: usize, dim: usize },
    #[error("grading has dimension {grading}, forms have dimension {forms}")]
    GradingMismatch { grading: usize, forms: usize },
    #[error("grading operator does not square to the identity")]
    NotAnInvolution,
    #[error("non-finite coefficient")]
    NonFinite,
}

/// A subset of the generators, bit `k` standing for `dθ^{k+1}`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct MultiIndex(u16);

impl MultiIndex {
    pub const EMPTY: MultiIndex = MultiIndex(0);

    /// Builds an index from 1-based, strictly increasing generator labels.
    pub fn new(generators: usize, labels: &[usize]) -> Result<Self, AlgebraError> {
        let mut mask = 0u16;
        let mut last = 0usize;
        for &g in labels {
            if g == 0 || g > generators {
                return Err(AlgebraError::GeneratorOutOfRange { generator: g, generators });
            }
            if g <= last {
                return Err(AlgebraError::UnorderedIndex);
            }
            last = g;
            mask |= 1 << (g - 1);
        }
        Ok(MultiIndex(mask))
    }

    /// The single generator `dθ^{axis+1}` (0-based axis).
    pub fn single(axis: usize) -> Self {
        MultiIndex(1 << axis)
    }

    pub fn from_mask(mask: u16) -> Self {
        MultiIndex(mask)
    }

    pub fn mask(self) -> u16 {
        self.0
    }

    pub fn degree(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, axis: usize) -> bool {
        self.0 & (1 << axis) != 0
    }

    pub fn is_disjoint(self, other: MultiIndex) -> bool {
        self.0 & other.0 == 0
    }

    pub fn union(self, other: MultiIndex) -> MultiIndex {
        MultiIndex(self.0 | other.0)
    }

    pub fn without(self, axis: usize) -> MultiIndex {
        MultiIndex(self.0 & !(1 << axis))
    }

    /// 1-based labels in increasing order.
    pub fn labels(self) -> Vec<usize> {
        (0..16).filter(|&k| self.contains(k)).map(|k| k + 1).collect()
    }

    /// Sign of `dθ^self ∧ dθ^other` relative to the sorted union; zero if they meet.
    pub fn wedge_sign(self, other: MultiIndex) -> i32 {
        if !self.is_disjoint(other) {
            return 0;
        }
        let mut swaps = 0u32;
        let mut rest = other.0;
        while rest != 0 {
            let j = rest.trailing_zeros();
            swaps += (self.0 >> (j + 1)).count_ones();
            rest &= rest - 1;
        }
        if swaps % 2 == 0 {
            1
        } else {
            -1
        }
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{:?}", self.labels())
    }
}

/// A `Z₂`-grading `τ` (with `τ² = I`), optionally refined by a number operator.
#[derive(Clone, Debug, PartialEq)]
pub struct Grading<T: Coefficient = C64> {
    tau: DMatrix<T>,
    number_operator: Option<Vec<i64>>,
}

impl<T: Coefficient> Grading<T> {
    /// Trusts the caller that `tau² = I`; see [`Grading::checked`] for floats.
    pub fn new_unchecked(tau: DMatrix<T>) -> Self {
        Grading { tau, number_operator: None }
    }

    /// `τ = (−1)^N` for the block sizes `ranks[0], ranks[1], …` of a `Z`-graded space.
    pub fn from_ranks(ranks: &[usize]) -> Self {
        let degrees: Vec<i64> = ranks
            .iter()
            .enumerate()
            .flat_map(|(i, &r)| std::iter::repeat_n(i as i64, r))
            .collect();
        let dim = degrees.len();
        let mut tau = DMatrix::<T>::zeros(dim, dim);
        for (k, &d) in degrees.iter().enumerate() {
            tau[(k, k)] = if d % 2 == 0 { T::one() } else { -T::one() };
        }
        Grading { tau, number_operator: Some(degrees) }
    }

    /// Diagonal grading from a sign per basis vector.
    pub fn from_signs(signs: &[i8]) -> Self {
        let dim = signs.len();
        let mut tau = DMatrix::<T>::zeros(dim, dim);
        for (k, &s) in signs.iter().enumerate() {
            tau[(k, k)] = if s >= 0 { T::one() } else { -T::one() };
        }
        Grading { tau, number_operator: None }
    }

    /// Exact check of `τ² = I`, meaningful for exact coefficient types.
    pub fn exact(tau: DMatrix<T>) -> Result<Self, AlgebraError> {
        if !tau.is_square() {
            return Err(AlgebraError::NotAnInvolution);
        }
        let sq = &tau * &tau;
        if sq != DMatrix::<T>::identity(tau.nrows(), tau.nrows()) {
            return Err(AlgebraError::NotAnInvolution);
        }
        Ok(Grading { tau, number_operator: None })
    }

    pub fn dim(&self) -> usize {
        self.tau.nrows()
    }

    pub fn tau(&self) -> &DMatrix<T> {
        &self.tau
    }

    /// Diagonal of the number operator, if the grading came from a `Z`-grading.
    pub fn number_operator(&self) -> Option<&[i64]> {
        self.number_operator.as_deref()
    }

    /// `τ M τ`, the parity involution on `End(E)`.
    pub fn conjugate(&self, m: &DMatrix<T>) -> DMatrix<T> {
        &self.tau * m * &self.tau
    }
}

impl Grading<C64> {
    /// Accepts `tau` when `‖τ² − I‖_max ≤ tol`.
    pub fn checked(tau: DMatrix<C64>, tol: f64) -> Result<Self, AlgebraError> {
        if !tau.is_square() {
            return Err(AlgebraError::NotAnInvolution);
        }
        let n = tau.nrows();
        let defect = &tau * &tau - DMatrix::<C64>::identity(n, n);
        if defect.iter().any(|z| z.norm() > tol) {
            return Err(AlgebraError::NotAnInvolution);
        }
        Ok(Grading { tau, number_operator: None })
    }

    pub fn with_number_operator(mut self, degrees: Vec<i64>) -> Self {
        self.number_operator = Some(degrees);
        self
    }
}

/// Element of `Λ(R^N) ⊗ M_r(T)`; absent terms are zero.
#[derive(Clone, PartialEq)]
pub struct FormMatrix<T: Coefficient = C64> {
    generators: usize,
    dim: usize,
    terms: Vec<Option<DMatrix<T>>>,
}

impl<T: Coefficient> fmt::Debug for FormMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut map = f.debug_map();
        for (idx, m) in self.terms() {
            map.entry(&idx, m);
        }
        map.finish()
    }
}

impl<T: Coefficient> FormMatrix<T> {
    pub fn zero(generators: usize, dim: usize) -> Self {
        assert!(generators <= MAX_GENERATORS, "at most {MAX_GENERATORS} generators");
        FormMatrix { generators, dim, terms: vec![None; 1 << generators] }
    }

    pub fn try_zero(generators: usize, dim: usize) -> Result<Self, AlgebraError> {
        if generators > MAX_GENERATORS {
            return Err(AlgebraError::TooManyGenerators(generators));
        }
        Ok(Self::zero(generators, dim))
    }

    pub fn identity(generators: usize, dim: usize) -> Self {
        Self::from_body(generators, DMatrix::identity(dim, dim))
    }

    /// Degree-0 element with the given matrix.
    pub fn from_body(generators: usize, body: DMatrix<T>) -> Self {
        assert!(body.is_square(), "coefficients are square");
        let mut out = Self::zero(generators, body.nrows());
        out.terms[0] = Some(body);
        out
    }

    /// Single term `dθ^index ⊗ coefficient`.
    pub fn from_term(
        generators: usize,
        index: MultiIndex,
        coefficient: DMatrix<T>,
    ) -> Result<Self, AlgebraError> {
        let mut out = Self::try_zero(generators, coefficient.nrows())?;
        out.set_term(index, coefficient)?;
        Ok(out)
    }

    /// Scalar (`r = 1`) element from a single value per multi-index.
    pub fn scalar_term(generators: usize, index: MultiIndex, value: T) -> Self {
        let mut out = Self::zero(generators, 1);
        out.terms[index.mask() as usize] = Some(DMatrix::from_element(1, 1, value));
        out
    }

    pub fn generators(&self) -> usize {
        self.generators
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn term(&self, index: MultiIndex) -> Option<&DMatrix<T>> {
        self.terms.get(index.mask() as usize).and_then(|t| t.as_ref())
    }

    /// Coefficient of `index`, zero matrix if absent.
    pub fn coefficient(&self, index: MultiIndex) -> DMatrix<T> {
        self.term(index).cloned().unwrap_or_else(|| DMatrix::zeros(self.dim, self.dim))
    }

    pub fn set_term(&mut self, index: MultiIndex, coefficient: DMatrix<T>) -> Result<(), AlgebraError> {
        if coefficient.nrows() != self.dim || coefficient.ncols() != self.dim {
            return Err(AlgebraError::BadCoefficient {
                rows: coefficient.nrows(),
                cols: coefficient.ncols(),
                dim: self.dim,
            });
        }
        let slot = index.mask() as usize;
        if slot >= self.terms.len() {
            return Err(AlgebraError::GeneratorOutOfRange {
                generator: 16 - index.mask().leading_zeros() as usize,
                generators: self.generators,
            });
        }
        self.terms[slot] = Some(coefficient);
        Ok(())
    }

    /// Adds `coefficient` into the slot `index`.
    pub fn accumulate(&mut self, index: MultiIndex, coefficient: DMatrix<T>) {
        let slot = &mut self.terms[index.mask() as usize];
        match slot {
            Some(m) => *m += coefficient,
            None => *slot = Some(coefficient),
        }
    }

    /// Present terms in canonical (bitmask) order.
    pub fn terms(&self) -> impl Iterator<Item = (MultiIndex, &DMatrix<T>)> {
        self.terms
            .iter()
            .enumerate()
            .filter_map(|(k, t)| t.as_ref().map(|m| (MultiIndex(k as u16), m)))
    }

    fn check_shape(&self, other: &Self) -> Result<(), AlgebraError> {
        if self.generators != other.generators || self.dim != other.dim {
            return Err(AlgebraError::ShapeMismatch {
                left_gens: self.generators,
                left_dim: self.dim,
                right_gens: other.generators,
                right_dim: other.dim,
            });
        }
        Ok(())
    }

    fn check_grading(&self, g: &Grading<T>) -> Result<(), AlgebraError> {
        if g.dim() != self.dim {
            return Err(AlgebraError::GradingMismatch { grading: g.dim(), forms: self.dim });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.check_shape(other)?;
        let terms = self
            .terms
            .iter()
            .zip(&other.terms)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => Some(a + b),
                (Some(a), None) => Some(a.clone()),
                (None, Some(b)) => Some(b.clone()),
                (None, None) => None,
            })
            .collect();
        Ok(FormMatrix { generators: self.generators, dim: self.dim, terms })
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, AlgebraError> {
        self.try_add(&other.neg_ref())
    }

    fn neg_ref(&self) -> Self {
        self.map_terms(|_, m| -m.clone())
    }

    pub fn scale(&self, s: T) -> Self {
        self.map_terms(|_, m| m * s.clone())
    }

    /// Applies `f` to every present coefficient.
    pub fn map_terms(&self, mut f: impl FnMut(MultiIndex, &DMatrix<T>) -> DMatrix<T>) -> Self {
        let terms = self
            .terms
            .iter()
            .enumerate()
            .map(|(k, t)| t.as_ref().map(|m| f(MultiIndex(k as u16), m)))
            .collect();
        FormMatrix { generators: self.generators, dim: self.dim, terms }
    }

    /// Keeps the terms whose index satisfies `keep`.
    pub fn filter_terms(&self, mut keep: impl FnMut(MultiIndex) -> bool) -> Self {
        let terms = self
            .terms
            .iter()
            .enumerate()
            .map(|(k, t)| if keep(MultiIndex(k as u16)) { t.clone() } else { None })
            .collect();
        FormMatrix { generators: self.generators, dim: self.dim, terms }
    }

    pub fn degree_part(&self, degree: usize) -> Self {
        self.filter_terms(|i| i.degree() == degree)
    }

    pub fn even_part(&self) -> Self {
        self.filter_terms(|i| i.degree() % 2 == 0)
    }

    pub fn odd_part(&self) -> Self {
        self.filter_terms(|i| i.degree() % 2 == 1)
    }

    /// `M · a` for a degree-0 matrix `M`.
    pub fn left_mul_matrix(&self, m: &DMatrix<T>) -> Self {
        self.map_terms(|_, b| m * b)
    }

    /// `a · M` for a degree-0 matrix `M` (no sign: `M` carries no form degree).
    pub fn right_mul_matrix(&self, m: &DMatrix<T>) -> Self {
        self.map_terms(|_, b| b * m)
    }

    /// Product treating forms and matrices as commuting symbols.
    pub fn wedge_mul(&self, rhs: &Self) -> Result<Self, AlgebraError> {
        self.check_shape(rhs)?;
        Ok(self.product(rhs, None))
    }

    /// Product in `Λ ⊗̂ End(E)` for the grading `g`.
    pub fn super_mul(&self, rhs: &Self, g: &Grading<T>) -> Result<Self, AlgebraError> {
        self.check_shape(rhs)?;
        self.check_grading(g)?;
        Ok(self.product(rhs, Some(g)))
    }

    /// Shared kernel; assumes shapes already agree.
    pub(crate) fn product(&self, rhs: &Self, grading: Option<&Grading<T>>) -> Self {
        let mut out = Self::zero(self.generators, self.dim);
        let rhs_has_odd = rhs.terms().any(|(i, _)| i.degree() % 2 == 1);
        let conjugated: Vec<Option<DMatrix<T>>> = match grading {
            Some(g) if rhs_has_odd => self
                .terms
                .iter()
                .map(|t| t.as_ref().map(|m| g.conjugate(m)))
                .collect(),
            _ => Vec::new(),
        };
        for (ia, a) in self.terms() {
            for (ib, b) in rhs.terms() {
                let sign = ia.wedge_sign(ib);
                if sign == 0 {
                    continue;
                }
                let left = if grading.is_some() && ib.degree() % 2 == 1 {
                    conjugated[ia.mask() as usize].as_ref().expect("term present")
                } else {
                    a
                };
                let mut c = left * b;
                if sign < 0 {
                    c = -c;
                }
                out.accumulate(ia.union(ib), c);
            }
        }
        out
    }

    /// Splits into parts of definite total parity (form degree + matrix parity).
    pub fn total_parity_parts(&self, g: &Grading<T>) -> Result<(Self, Self), AlgebraError> {
        self.check_grading(g)?;
        let two = T::one() + T::one();
        let mut even = Self::zero(self.generators, self.dim);
        let mut odd = Self::zero(self.generators, self.dim);
        for (i, m) in self.terms() {
            let flipped = g.conjugate(m);
            let m_even = (m + &flipped).map(|x| x / two.clone());
            let m_odd = (m - &flipped).map(|x| x / two.clone());
            if i.degree() % 2 == 0 {
                even.accumulate(i, m_even);
                odd.accumulate(i, m_odd);
            } else {
                even.accumulate(i, m_odd);
                odd.accumulate(i, m_even);
            }
        }
        Ok((even, odd))
    }

    /// `[a, b] = ab − (−1)^{|a||b|} ba` with total parities, extended bilinearly.
    pub fn supercommutator(&self, rhs: &Self, g: &Grading<T>) -> Result<Self, AlgebraError> {
        self.check_shape(rhs)?;
        let (a0, a1) = self.total_parity_parts(g)?;
        let (b0, b1) = rhs.total_parity_parts(g)?;
        let mut out = Self::zero(self.generators, self.dim);
        for (pa, a) in [(0, &a0), (1, &a1)] {
            for (pb, b) in [(0, &b0), (1, &b1)] {
                let ab = a.product(b, Some(g));
                let ba = b.product(a, Some(g));
                let term = if pa * pb == 1 { ab.try_add(&ba)? } else { ab.try_sub(&ba)? };
                out = out.try_add(&term)?;
            }
        }
        Ok(out)
    }

    /// `Tr[τ a]` termwise, as a scalar form.
    pub fn supertrace(&self, g: &Grading<T>) -> Result<Self, AlgebraError> {
        self.check_grading(g)?;
        let mut out = Self::zero(self.generators, 1);
        for (i, m) in self.terms() {
            let t = (g.tau() * m).trace();
            out.terms[i.mask() as usize] = Some(DMatrix::from_element(1, 1, t));
        }
        Ok(out)
    }

    /// Ordinary trace termwise, as a scalar form.
    pub fn trace(&self) -> Self {
        let mut out = Self::zero(self.generators, 1);
        for (i, m) in self.terms() {
            out.terms[i.mask() as usize] = Some(DMatrix::from_element(1, 1, m.trace()));
        }
        out
    }

    /// Degree-`j` term `B` maps to `(−1)^{j(j+1)/2} Bᵀ`.
    pub fn transpose(&self) -> Self {
        self.map_terms(|i, m| {
            let j = i.degree();
            let t = m.transpose();
            if (j * (j + 1) / 2) % 2 == 0 {
                t
            } else {
                -t
            }
        })
    }

    /// Value of a scalar form on `index` (zero if absent). Panics unless `r = 1`.
    pub fn scalar(&self, index: MultiIndex) -> T {
        assert_eq!(self.dim, 1, "scalar() needs a scalar form");
        self.term(index).map(|m| m[(0, 0)].clone()).unwrap_or_else(T::zero)
    }

    /// Highest degree among present terms.
    pub fn max_degree(&self) -> Option<usize> {
        self.terms().map(|(i, _)| i.degree()).max()
    }

    /// Drops the generators past `generators`, keeping only terms that avoid them.
    pub fn restrict_generators(&self, generators: usize) -> Self {
        let mut out = Self::zero(generators, self.dim);
        for (i, m) in self.terms() {
            if (i.mask() as usize) < (1 << generators) {
                out.terms[i.mask() as usize] = Some(m.clone());
            }
        }
        out
    }
}

impl FormMatrix<C64> {
    /// Sum of Frobenius norms; submultiplicative for both products.
    pub fn norm(&self) -> f64 {
        self.terms().map(|(_, m)| m.norm()).sum()
    }

    /// Largest entry modulus over all terms.
    pub fn max_abs(&self) -> f64 {
        self.terms()
            .flat_map(|(_, m)| m.iter().map(|z| z.norm()))
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.terms().all(|(_, m)| m.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// Largest imaginary part over all entries.
    pub fn max_imag(&self) -> f64 {
        self.terms()
            .flat_map(|(_, m)| m.iter().map(|z| z.im.abs()))
            .fold(0.0, f64::max)
    }

    /// Each degree-`k` term scaled by `(2iπ)^{-k/2}`.
    pub fn phi(&self) -> Self {
        let root = sqrt_two_i_pi();
        self.map_terms(|i, m| m * root.powi(-(i.degree() as i32)))
    }

    /// Inverse of [`FormMatrix::phi`].
    pub fn phi_inverse(&self) -> Self {
        let root = sqrt_two_i_pi();
        self.map_terms(|i, m| m * root.powi(i.degree() as i32))
    }

    /// `exp(−a)` for the ungraded product.
    pub fn exp_neg(&self) -> Result<Self, AlgebraError> {
        self.exp_in(&self.scale(C64::new(-1.0, 0.0)), None)
    }

    /// `exp(−a)` in `Λ ⊗̂ End(E)`.
    pub fn exp_neg_graded(&self, g: &Grading<C64>) -> Result<Self, AlgebraError> {
        self.check_grading(g)?;
        self.exp_in(&self.scale(C64::new(-1.0, 0.0)), Some(g))
    }

    /// Scaling and squaring: halve until the norm is below 1/2, sum the Taylor
    /// series until a term drops below 1e-18, then square back.
    fn exp_in(&self, x: &Self, grading: Option<&Grading<C64>>) -> Result<Self, AlgebraError> {
        if !x.is_finite() {
            return Err(AlgebraError::NonFinite);
        }
        let norm = x.norm();
        let mut squarings = 0u32;
        let mut scaled_norm = norm;
        while scaled_norm >= 0.5 {
            scaled_norm /= 2.0;
            squarings += 1;
        }
        let x = x.scale(C64::new(0.5f64.powi(squarings as i32), 0.0));
        let mut sum = Self::identity(x.generators, x.dim);
        let mut term = sum.clone();
        for k in 1..200 {
            term = term.product(&x, grading).scale(C64::new(1.0 / k as f64, 0.0));
            sum = sum.try_add(&term)?;
            if term.norm() < 1e-18 {
                break;
            }
        }
        for _ in 0..squarings {
            sum = sum.product(&sum, grading);
        }
        if !sum.is_finite() {
            return Err(AlgebraError::NonFinite);
        }
        Ok(sum)
    }

    /// Power series `Σ c_k a^k` (ungraded product), stopping once `a^k` vanishes
    /// or `k` exceeds `coefficients.len()`. Suited to nilpotent arguments.
    pub fn nilpotent_series(&self, coefficients: &[f64]) -> Self {
        let mut sum = Self::zero(self.generators, self.dim);
        let mut power = Self::identity(self.generators, self.dim);
        for (k, &c) in coefficients.iter().enumerate() {
            if k > 0 {
                power = power.product(self, None);
            }
            if power.norm() == 0.0 {
                break;
            }
            if c != 0.0 {
                sum = sum.try_add(&power.scale(C64::new(c, 0.0))).expect("same shape");
            }
        }
        sum
    }

    /// Real parts as a real-valued view, for reporting.
    pub fn real_scalar(&self, index: MultiIndex) -> f64 {
        self.scalar(index).re
    }
}

/// The fixed branch `(2iπ)^{1/2} = e^{iπ/4} √(2π)`.
pub fn sqrt_two_i_pi() -> C64 {
    C64::from_polar((2.0 * std::f64::consts::PI).sqrt(), std::f64::consts::FRAC_PI_4)
}

impl<T: Coefficient> Add for &FormMatrix<T> {
    type Output = FormMatrix<T>;
    fn add(self, rhs: Self) -> FormMatrix<T> {
        self.try_add(rhs).expect("FormMatrix shapes must agree")
    }
}

impl<T: Coefficient> Sub for &FormMatrix<T> {
    type Output = FormMatrix<T>;
    fn sub(self, rhs: Self) -> FormMatrix<T> {
        self.try_sub(rhs).expect("FormMatrix shapes must agree")
    }
}

impl<T: Coefficient> Neg for &FormMatrix<T> {
    type Output = FormMatrix<T>;
    fn neg(self) -> FormMatrix<T> {
        self.neg_ref()
    }
}

/// Ungraded product; panics on shape mismatch.
impl<T: Coefficient> Mul for &FormMatrix<T> {
    type Output = FormMatrix<T>;
    fn mul(self, rhs: Self) -> FormMatrix<T> {
        self.wedge_mul(rhs).expect("FormMatrix shapes must agree")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn m1(x: f64) -> DMatrix<C64> {
        DMatrix::from_element(1, 1, c(x))
    }

    fn dx(n: usize, axis: usize) -> MultiIndex {
        MultiIndex::single(axis).restricted(n)
    }

    impl MultiIndex {
        fn restricted(self, n: usize) -> Self {
            assert!((self.mask() as usize) < (1 << n));
            self
        }
    }

    #[test]
    fn repeated_generator_vanishes() {
        let a = FormMatrix::from_term(2, dx(2, 0), m1(2.0)).unwrap();
        let b = FormMatrix::from_term(2, dx(2, 0), m1(3.0)).unwrap();
        assert_eq!((&a * &b).norm(), 0.0);
    }

    #[test]
    fn distinct_generators_multiply() {
        let a = FormMatrix::from_term(2, dx(2, 0), m1(2.0)).unwrap();
        let b = FormMatrix::from_term(2, dx(2, 1), m1(3.0)).unwrap();
        let ab = &a * &b;
        let both = MultiIndex::new(2, &[1, 2]).unwrap();
        assert_eq!(ab.scalar(both), c(6.0));
        assert_eq!((&b * &a).scalar(both), c(-6.0));
    }

    #[test]
    fn multi_index_validation() {
        assert!(MultiIndex::new(3, &[2, 1]).is_err());
        assert!(MultiIndex::new(3, &[4]).is_err());
        assert_eq!(MultiIndex::new(3, &[1, 3]).unwrap().degree(), 2);
        assert!(FormMatrix::<C64>::try_zero(9, 1).is_err());
    }

    #[test]
    fn wedge_sign_by_inversions() {
        let a = MultiIndex::new(4, &[2, 4]).unwrap();
        let b = MultiIndex::new(4, &[1, 3]).unwrap();
        // (2,4,1,3) has three inversions, (1,3,2,4) has one
        assert_eq!(a.wedge_sign(b), -1);
        assert_eq!(b.wedge_sign(a), -1);
    }

    #[test]
    fn supertrace_examples() {
        let g = Grading::<C64>::from_signs(&[1, -1]);
        let id = FormMatrix::<C64>::identity(0, 2);
        assert_eq!(id.supertrace(&g).unwrap().scalar(MultiIndex::EMPTY), c(0.0));
        let d = FormMatrix::from_body(0, DMatrix::from_diagonal(&nalgebra::dvector![c(2.0), c(5.0)]));
        assert_eq!(d.supertrace(&g).unwrap().scalar(MultiIndex::EMPTY), c(-3.0));
    }

    #[test]
    fn transpose_examples() {
        let a = FormMatrix::from_term(1, dx(1, 0), m1(1.0)).unwrap();
        assert_eq!(a.transpose().scalar(dx(1, 0)), c(-1.0));
        let m = DMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(3.0), c(4.0)]);
        let b = FormMatrix::from_body(2, m.clone());
        assert_eq!(b.transpose().coefficient(MultiIndex::EMPTY), m.transpose());
    }

    #[test]
    fn exp_examples() {
        let zero = FormMatrix::<C64>::zero(2, 2);
        assert_eq!(zero.exp_neg().unwrap(), FormMatrix::identity(2, 2));

        let s = FormMatrix::from_term(
            2,
            MultiIndex::new(2, &[1, 2]).unwrap(),
            DMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(0.5), c(-1.0)]),
        )
        .unwrap();
        let expected = &FormMatrix::identity(2, 2) - &s;
        assert_eq!(s.exp_neg().unwrap(), expected);

        let body = FormMatrix::from_body(0, DMatrix::from_diagonal(&nalgebra::dvector![c(0.3), c(2.5)]));
        let e = body.exp_neg().unwrap().coefficient(MultiIndex::EMPTY);
        assert!((e[(0, 0)] - c((-0.3f64).exp())).norm() < 1e-15);
        assert!((e[(1, 1)] - c((-2.5f64).exp())).norm() < 1e-15);
        assert!(e[(0, 1)].norm() < 1e-16);
    }

    #[test]
    fn exp_rejects_nan() {
        let bad = FormMatrix::from_body(0, m1(f64::NAN));
        assert_eq!(bad.exp_neg(), Err(AlgebraError::NonFinite));
    }

    #[test]
    fn phi_examples() {
        let d2 = MultiIndex::new(2, &[1, 2]).unwrap();
        let a = FormMatrix::from_term(2, d2, m1(3.0)).unwrap();
        let expected = c(3.0) / C64::new(0.0, 2.0 * std::f64::consts::PI);
        assert!((a.phi().scalar(d2) - expected).norm() < 1e-15);
        let body = FormMatrix::from_body(2, m1(7.0));
        assert_eq!(body.phi(), body);
        let root = sqrt_two_i_pi();
        assert!((root * root - C64::new(0.0, 2.0 * std::f64::consts::PI)).norm() < 1e-14);
    }

    #[test]
    fn shape_errors() {
        let a = FormMatrix::<C64>::zero(1, 2);
        let b = FormMatrix::<C64>::zero(2, 2);
        assert!(matches!(a.wedge_mul(&b), Err(AlgebraError::ShapeMismatch { .. })));
        let g = Grading::<C64>::from_signs(&[1, 1, -1]);
        assert!(matches!(a.supertrace(&g), Err(AlgebraError::GradingMismatch { .. })));
        assert!(Grading::checked(DMatrix::from_element(1, 1, c(2.0)), 1e-12).is_err());
        let q = |x: i64| BigRational::from_integer(BigInt::from(x));
        assert!(Grading::exact(DMatrix::from_element(1, 1, q(-1))).is_ok());
        assert!(Grading::exact(DMatrix::from_element(1, 1, q(2))).is_err());
    }

    #[test]
    fn graded_product_sign() {
        // odd 0-form v times a 1-form: super sign appears only when the form is on the right
        let g = Grading::<C64>::from_signs(&[1, -1]);
        let v = FormMatrix::from_body(1, DMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(1.0), c(0.0)]));
        let w = FormMatrix::from_term(1, dx(1, 0), DMatrix::identity(2, 2)).unwrap();
        let vw = v.super_mul(&w, &g).unwrap();
        let wv = w.super_mul(&v, &g).unwrap();
        assert_eq!(vw, -&(&v * &w));
        assert_eq!(wv, &w * &v);
    }

    // ---- independent oracle: sort generator lists by explicit swaps ----

    fn oracle_sorted(labels: &[usize]) -> Option<(Vec<usize>, i32)> {
        let mut v = labels.to_vec();
        let mut sign = 1;
        for i in 0..v.len() {
            for j in 0..v.len() - 1 - i {
                if v[j] == v[j + 1] {
                    return None;
                }
                if v[j] > v[j + 1] {
                    v.swap(j, j + 1);
                    sign = -sign;
                }
            }
        }
        if v.windows(2).any(|w| w[0] == w[1]) {
            return None;
        }
        Some((v, sign))
    }

    fn oracle_wedge(a: &FormMatrix<C64>, b: &FormMatrix<C64>) -> FormMatrix<C64> {
        let n = a.generators();
        let mut out = FormMatrix::zero(n, a.dim());
        for (ia, ma) in a.terms() {
            for (ib, mb) in b.terms() {
                let mut labels = ia.labels();
                labels.extend(ib.labels());
                if let Some((sorted, sign)) = oracle_sorted(&labels) {
                    let idx = MultiIndex::new(n, &sorted).unwrap();
                    out.accumulate(idx, ma * mb * c(sign as f64));
                }
            }
        }
        out
    }

    fn form_strategy(n: usize, r: usize) -> impl Strategy<Value = FormMatrix<C64>> {
        prop::collection::vec(-1.0f64..1.0, (1 << n) * r * r * 2).prop_map(move |v| {
            let mut f = FormMatrix::zero(n, r);
            for mask in 0..(1usize << n) {
                let base = mask * r * r * 2;
                let m = DMatrix::from_fn(r, r, |i, j| {
                    let k = base + 2 * (i * r + j);
                    C64::new(v[k], v[k + 1])
                });
                f.set_term(MultiIndex::from_mask(mask as u16), m).unwrap();
            }
            f
        })
    }

    fn close(a: &FormMatrix<C64>, b: &FormMatrix<C64>, tol: f64) -> bool {
        (a - b).max_abs() <= tol
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn wedge_matches_oracle(a in form_strategy(3, 2), b in form_strategy(3, 2)) {
            prop_assert!(close(&(&a * &b), &oracle_wedge(&a, &b), 1e-14));
        }

        #[test]
        fn wedge_is_associative(a in form_strategy(3, 2), b in form_strategy(3, 2), c3 in form_strategy(3, 2)) {
            let left = &(&a * &b) * &c3;
            let right = &a * &(&b * &c3);
            prop_assert!(close(&left, &right, 1e-13));
        }

        #[test]
        fn graded_product_is_associative(a in form_strategy(3, 2), b in form_strategy(3, 2), c3 in form_strategy(3, 2)) {
            let g = Grading::from_signs(&[1, -1]);
            let left = a.super_mul(&b, &g).unwrap().super_mul(&c3, &g).unwrap();
            let right = a.super_mul(&b.super_mul(&c3, &g).unwrap(), &g).unwrap();
            prop_assert!(close(&left, &right, 1e-13));
        }

        #[test]
        fn transpose_reverses_products(a in form_strategy(3, 2), b in form_strategy(3, 2)) {
            let lhs = (&a * &b).transpose();
            let rhs = &b.transpose() * &a.transpose();
            prop_assert!(close(&lhs, &rhs, 1e-14));
        }

        #[test]
        fn transpose_is_involution(a in form_strategy(3, 3)) {
            prop_assert_eq!(a.transpose().transpose(), a);
        }

        #[test]
        fn supertrace_kills_supercommutators(a in form_strategy(3, 3), b in form_strategy(3, 3)) {
            let g = Grading::from_signs(&[1, -1, 1]);
            let s = a.supercommutator(&b, &g).unwrap().supertrace(&g).unwrap();
            prop_assert!(s.max_abs() < 1e-13);
        }

        #[test]
        fn exp_neg_inverts(a in form_strategy(2, 2)) {
            // even element with body norm at most 4
            let even = a.even_part();
            let body_norm = even.coefficient(MultiIndex::EMPTY).norm();
            let even = if body_norm > 4.0 { even.scale(c(4.0 / body_norm)) } else { even };
            let e = even.exp_neg().unwrap();
            let f = even.scale(c(-1.0)).exp_neg().unwrap();
            prop_assert!(close(&(&e * &f), &FormMatrix::identity(2, 2), 1e-12));
        }

        #[test]
        fn phi_round_trip(a in form_strategy(3, 2)) {
            prop_assert!(close(&a.phi().phi_inverse(), &a, 1e-15));
        }
    }
}
