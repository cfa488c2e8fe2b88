//! Smith normal form over `Z` with exact big integers.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

/// Integer matrix with unbounded entries.
pub type ZMatrix = DMatrix<BigInt>;

/// Builds a `rows × cols` integer matrix from row-major data.
pub fn zmatrix(rows: usize, cols: usize, data: &[i64]) -> ZMatrix {
    assert_eq!(data.len(), rows * cols, "row-major data has the wrong length");
    DMatrix::from_fn(rows, cols, |i, j| BigInt::from(data[i * cols + j]))
}

pub fn zidentity(n: usize) -> ZMatrix {
    DMatrix::from_fn(n, n, |i, j| if i == j { BigInt::one() } else { BigInt::zero() })
}

pub fn zzeros(rows: usize, cols: usize) -> ZMatrix {
    DMatrix::from_element(rows, cols, BigInt::zero())
}

/// Exact product; nalgebra's `*` needs numeric traits `BigInt` lacks.
pub fn zmul(a: &ZMatrix, b: &ZMatrix) -> ZMatrix {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions differ");
    DMatrix::from_fn(a.nrows(), b.ncols(), |i, j| {
        (0..a.ncols()).fold(BigInt::zero(), |acc, k| acc + &a[(i, k)] * &b[(k, j)])
    })
}

pub fn is_zero(a: &ZMatrix) -> bool {
    a.iter().all(|x| x.is_zero())
}

pub fn to_f64(a: &ZMatrix) -> DMatrix<f64> {
    use num_traits::ToPrimitive;
    a.map(|x| x.to_f64().expect("entry fits in f64"))
}

/// `L · A · R = D` with `L`, `R` unimodular and `D` diagonal, `d₁ | d₂ | ⋯`.
#[derive(Clone, Debug, PartialEq)]
pub struct SmithForm {
    /// Positive invariant factors; their count is the rank.
    pub invariant_factors: Vec<BigInt>,
    pub left: ZMatrix,
    pub left_inverse: ZMatrix,
    pub right: ZMatrix,
}

impl SmithForm {
    pub fn new(a: &ZMatrix) -> Self {
        let (m, n) = a.shape();
        let mut w = a.clone();
        let mut left = zidentity(m);
        let mut left_inverse = zidentity(m);
        let mut right = zidentity(n);
        let mut factors = Vec::new();

        let mut t = 0;
        while t < m.min(n) {
            let Some((pi, pj)) = min_nonzero(&w, t) else { break };
            swap_rows(&mut w, &mut left, &mut left_inverse, t, pi);
            swap_cols(&mut w, &mut right, t, pj);
            loop {
                let mut clean = true;
                for i in t + 1..m {
                    if w[(i, t)].is_zero() {
                        continue;
                    }
                    let q = w[(i, t)].div_floor(&w[(t, t)]);
                    add_row(&mut w, &mut left, &mut left_inverse, i, t, -q);
                    clean &= w[(i, t)].is_zero();
                }
                for j in t + 1..n {
                    if w[(t, j)].is_zero() {
                        continue;
                    }
                    let q = w[(t, j)].div_floor(&w[(t, t)]);
                    add_col(&mut w, &mut right, j, t, -q);
                    clean &= w[(t, j)].is_zero();
                }
                if !clean {
                    // a remainder is smaller than the pivot: re-pivot on row/column t
                    let (pi, pj) = min_in_cross(&w, t);
                    swap_rows(&mut w, &mut left, &mut left_inverse, t, pi);
                    swap_cols(&mut w, &mut right, t, pj);
                    continue;
                }
                // divisibility of the remaining block by the pivot
                let offender = (t + 1..m).find(|&i| (t + 1..n).any(|j| !w[(i, j)].is_multiple_of(&w[(t, t)])));
                match offender {
                    Some(i) => add_row(&mut w, &mut left, &mut left_inverse, t, i, BigInt::one()),
                    None => break,
                }
            }
            if w[(t, t)].is_negative() {
                negate_row(&mut w, &mut left, &mut left_inverse, t);
            }
            factors.push(w[(t, t)].clone());
            t += 1;
        }
        SmithForm { invariant_factors: factors, left, left_inverse, right }
    }

    pub fn rank(&self) -> usize {
        self.invariant_factors.len()
    }

    /// Product of the invariant factors, the order of the torsion of `coker A`.
    pub fn torsion_order(&self) -> BigInt {
        self.invariant_factors.iter().fold(BigInt::one(), |acc, d| acc * d)
    }

    /// Columns form a `Z`-basis of `ker A`.
    pub fn kernel_basis(&self) -> ZMatrix {
        let n = self.right.ncols();
        self.right.columns(self.rank(), n - self.rank()).into_owned()
    }

    /// Columns form a `Z`-basis of `im A`: `dᵢ` times column `i` of `L⁻¹`.
    pub fn image_basis(&self) -> ZMatrix {
        let r = self.rank();
        let mut out = self.left_inverse.columns(0, r).into_owned();
        for (k, d) in self.invariant_factors.iter().enumerate() {
            for i in 0..out.nrows() {
                out[(i, k)] = &out[(i, k)] * d;
            }
        }
        out
    }
}

fn min_nonzero(w: &ZMatrix, t: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for i in t..w.nrows() {
        for j in t..w.ncols() {
            if w[(i, j)].is_zero() {
                continue;
            }
            if best.is_none_or(|(bi, bj)| w[(i, j)].abs() < w[(bi, bj)].abs()) {
                best = Some((i, j));
            }
        }
    }
    best
}

fn min_in_cross(w: &ZMatrix, t: usize) -> (usize, usize) {
    let mut best = (t, t);
    let consider = |i: usize, j: usize, best: &mut (usize, usize)| {
        if !w[(i, j)].is_zero() && (w[*best].is_zero() || w[(i, j)].abs() < w[*best].abs()) {
            *best = (i, j);
        }
    };
    for i in t..w.nrows() {
        consider(i, t, &mut best);
    }
    for j in t..w.ncols() {
        consider(t, j, &mut best);
    }
    best
}

/// `row_i += q · row_j`.
fn add_row(w: &mut ZMatrix, left: &mut ZMatrix, left_inverse: &mut ZMatrix, i: usize, j: usize, q: BigInt) {
    for c in 0..w.ncols() {
        let v = &w[(j, c)] * &q;
        w[(i, c)] += v;
    }
    for c in 0..left.ncols() {
        let v = &left[(j, c)] * &q;
        left[(i, c)] += v;
    }
    for r in 0..left_inverse.nrows() {
        let v = &left_inverse[(r, i)] * &q;
        left_inverse[(r, j)] -= v;
    }
}

/// `col_j += q · col_i`.
fn add_col(w: &mut ZMatrix, right: &mut ZMatrix, j: usize, i: usize, q: BigInt) {
    for r in 0..w.nrows() {
        let v = &w[(r, i)] * &q;
        w[(r, j)] += v;
    }
    for r in 0..right.nrows() {
        let v = &right[(r, i)] * &q;
        right[(r, j)] += v;
    }
}

fn swap_rows(w: &mut ZMatrix, left: &mut ZMatrix, left_inverse: &mut ZMatrix, a: usize, b: usize) {
    if a != b {
        w.swap_rows(a, b);
        left.swap_rows(a, b);
        left_inverse.swap_columns(a, b);
    }
}

fn swap_cols(w: &mut ZMatrix, right: &mut ZMatrix, a: usize, b: usize) {
    if a != b {
        w.swap_columns(a, b);
        right.swap_columns(a, b);
    }
}

fn negate_row(w: &mut ZMatrix, left: &mut ZMatrix, left_inverse: &mut ZMatrix, i: usize) {
    for c in 0..w.ncols() {
        w[(i, c)] = -w[(i, c)].clone();
    }
    for c in 0..left.ncols() {
        left[(i, c)] = -left[(i, c)].clone();
    }
    for r in 0..left_inverse.nrows() {
        left_inverse[(r, i)] = -left_inverse[(r, i)].clone();
    }
}

/// Random unimodular matrix and its inverse, as products of elementary moves.
pub fn random_unimodular(rng: &mut impl rand::Rng, n: usize, moves: usize) -> (ZMatrix, ZMatrix) {
    let mut g = zidentity(n);
    let mut gi = zidentity(n);
    if n < 2 {
        if n == 1 && rng.random_bool(0.5) {
            g[(0, 0)] = BigInt::from(-1);
            gi[(0, 0)] = BigInt::from(-1);
        }
        return (g, gi);
    }
    for _ in 0..moves {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let q = BigInt::from(rng.random_range(-2i64..=2));
        // g ← (I + q e_i e_jᵀ) g ; g⁻¹ ← g⁻¹ (I − q e_i e_jᵀ)
        for c in 0..n {
            let v = &g[(j, c)] * &q;
            g[(i, c)] += v;
        }
        for r in 0..n {
            let v = &gi[(r, i)] * &q;
            gi[(r, j)] -= v;
        }
    }
    (g, gi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check(a: &ZMatrix) -> SmithForm {
        let s = SmithForm::new(a);
        let d = zmul(&zmul(&s.left, a), &s.right);
        for i in 0..d.nrows() {
            for j in 0..d.ncols() {
                let expected = if i == j && i < s.rank() { s.invariant_factors[i].clone() } else { BigInt::zero() };
                assert_eq!(d[(i, j)], expected, "L A R is not the Smith form");
            }
        }
        assert_eq!(zmul(&s.left, &s.left_inverse), zidentity(a.nrows()));
        for w in s.invariant_factors.windows(2) {
            assert!(w[1].is_multiple_of(&w[0]));
        }
        s
    }

    #[test]
    fn one_by_one() {
        let s = check(&zmatrix(1, 1, &[2]));
        assert_eq!(s.invariant_factors, vec![BigInt::from(2)]);
        assert_eq!(s.torsion_order(), BigInt::from(2));
    }

    #[test]
    fn rotation_minus_identity_has_torsion_two() {
        let s = check(&zmatrix(2, 2, &[-1, -1, 1, -1]));
        assert_eq!(s.invariant_factors, vec![BigInt::from(1), BigInt::from(2)]);
    }

    #[test]
    fn classic_example() {
        let s = check(&zmatrix(3, 3, &[2, 4, 4, -6, 6, 12, 10, -4, -16]));
        let f: Vec<i64> = s.invariant_factors.iter().map(|x| i64::try_from(x).unwrap()).collect();
        assert_eq!(f, vec![2, 6, 12]);
    }

    #[test]
    fn kernel_and_image_bases() {
        let a = zmatrix(2, 3, &[1, 2, 3, 2, 4, 6]);
        let s = check(&a);
        assert_eq!(s.rank(), 1);
        let k = s.kernel_basis();
        assert_eq!(k.ncols(), 2);
        assert!(is_zero(&zmul(&a, &k)));
        let im = s.image_basis();
        assert_eq!(im.ncols(), 1);
    }

    proptest! {
        #[test]
        fn invariant_under_unimodular_conjugation(seed in 0u64..500, rows in 1usize..5, cols in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            use rand::Rng;
            let data: Vec<i64> = (0..rows * cols).map(|_| rng.random_range(-4..=4)).collect();
            let a = zmatrix(rows, cols, &data);
            let (g, _) = random_unimodular(&mut rng, rows, 6);
            let (h, _) = random_unimodular(&mut rng, cols, 6);
            let b = zmul(&zmul(&g, &a), &h);
            prop_assert_eq!(check(&a).invariant_factors, check(&b).invariant_factors);
        }
    }
}
