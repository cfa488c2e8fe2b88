//! Dense complex linear algebra used throughout the crate.
//!
//! Everything here works on `DMatrix<C64>`. Self-adjointness is always relative
//! to an explicit positive Gram matrix, because the metrics of the bundles and
//! complexes we handle are rarely the standard one.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular or numerically singular")]
    Singular,
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("matrix is not Hermitian (defect {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not positive definite (smallest eigenvalue {0:.3e})")]
    NotPositive(f64),
    #[error("matrix is not diagonalizable (reconstruction defect {0:.3e})")]
    Defective(f64),
    #[error("eigen-decomposition did not converge")]
    NoConvergence,
}

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(c)
}

/// Row-major real data to a complex matrix.
pub fn from_rows(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    DMatrix::from_row_slice(rows, cols, data).map(c)
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_imag(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
}

pub fn hermitian_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Block-diagonal assembly.
pub fn block_diag(blocks: &[CMatrix]) -> CMatrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let m: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMatrix::zeros(n, m);
    let (mut r, mut k) = (0, 0);
    for b in blocks {
        out.view_mut((r, k), (b.nrows(), b.ncols())).copy_from(b);
        r += b.nrows();
        k += b.ncols();
    }
    out
}

/// Inverse through LU, rejecting matrices whose reciprocal condition looks hopeless.
pub fn inverse(m: &CMatrix) -> Result<CMatrix, LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare(m.nrows(), m.ncols()));
    }
    if m.nrows() == 0 {
        return Ok(m.clone());
    }
    let inv = m.clone().try_inverse().ok_or(LinalgError::Singular)?;
    let scale = max_abs(m) * max_abs(&inv);
    if !scale.is_finite() || scale > 1e14 {
        return Err(LinalgError::Singular);
    }
    Ok(inv)
}

/// Ascending eigenvalues and unitary eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(Vec<f64>, CMatrix), LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NotSquare(m.nrows(), m.ncols()));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), m.clone()));
    }
    let scale = max_abs(m).max(1.0);
    let defect = hermitian_defect(m);
    if defect > 1e-9 * scale {
        return Err(LinalgError::NotHermitian(defect));
    }
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::try_new(sym, 1e-15, 10_000).ok_or(LinalgError::NoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// `f(M)` for Hermitian `M`.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> f64) -> Result<CMatrix, LinalgError> {
    let (values, vectors) = hermitian_eigen(m)?;
    let d = DVector::from_iterator(values.len(), values.iter().map(|&x| c(f(x))));
    Ok(&vectors * CMatrix::from_diagonal(&d) * vectors.adjoint())
}

pub fn check_positive(m: &CMatrix) -> Result<f64, LinalgError> {
    let (values, _) = hermitian_eigen(m)?;
    let min = values.first().copied().unwrap_or(1.0);
    if min <= 0.0 {
        return Err(LinalgError::NotPositive(min));
    }
    Ok(min)
}

/// Positive square root and its inverse of a positive Hermitian matrix.
pub fn sqrt_and_inv_sqrt(m: &CMatrix) -> Result<(CMatrix, CMatrix), LinalgError> {
    let (values, vectors) = hermitian_eigen(m)?;
    if let Some(&min) = values.first() {
        if min <= 0.0 {
            return Err(LinalgError::NotPositive(min));
        }
    }
    let s = DVector::from_iterator(values.len(), values.iter().map(|&x| c(x.sqrt())));
    let si = DVector::from_iterator(values.len(), values.iter().map(|&x| c(1.0 / x.sqrt())));
    Ok((
        &vectors * CMatrix::from_diagonal(&s) * vectors.adjoint(),
        &vectors * CMatrix::from_diagonal(&si) * vectors.adjoint(),
    ))
}

/// Matrix self-adjoint for the inner product `⟨x, y⟩ = x† G y`: `G M = M† G`.
#[derive(Clone, Debug)]
pub struct SelfAdjointEigen {
    /// Ascending real eigenvalues.
    pub values: Vec<f64>,
    /// Columns are `G`-orthonormal eigenvectors.
    pub vectors: CMatrix,
    /// `vectors⁻¹ = vectors† G`.
    pub inverse: CMatrix,
}

impl SelfAdjointEigen {
    pub fn new(m: &CMatrix, gram: &CMatrix) -> Result<Self, LinalgError> {
        let (root, inv_root) = sqrt_and_inv_sqrt(gram)?;
        let hermitian = &root * m * &inv_root;
        let (values, u) = hermitian_eigen(&hermitian)?;
        let vectors = &inv_root * &u;
        let inverse = u.adjoint() * &root;
        Ok(SelfAdjointEigen { values, vectors, inverse })
    }

    pub fn to_eigenbasis(&self, m: &CMatrix) -> CMatrix {
        &self.inverse * m * &self.vectors
    }

    pub fn from_eigenbasis(&self, m: &CMatrix) -> CMatrix {
        &self.vectors * m * &self.inverse
    }
}

/// Eigen-decomposition `M = P diag(λ) P⁻¹` of a diagonalizable complex matrix.
#[derive(Clone, Debug)]
pub struct Diagonalization {
    pub values: Vec<C64>,
    pub vectors: CMatrix,
    pub inverse: CMatrix,
}

impl Diagonalization {
    /// Complex Schur form followed by back-substitution for the triangular eigenvectors.
    pub fn new(m: &CMatrix) -> Result<Self, LinalgError> {
        if !m.is_square() {
            return Err(LinalgError::NotSquare(m.nrows(), m.ncols()));
        }
        let n = m.nrows();
        if n == 0 {
            return Ok(Diagonalization { values: vec![], vectors: m.clone(), inverse: m.clone() });
        }
        let schur = Schur::try_new(m.clone(), 1e-15, 10_000).ok_or(LinalgError::NoConvergence)?;
        let (q, t) = schur.unpack();
        let scale = max_abs(m).max(1e-300);
        let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
        let mut y = CMatrix::zeros(n, n);
        for k in 0..n {
            y[(k, k)] = c(1.0);
            for i in (0..k).rev() {
                let mut s = C64::new(0.0, 0.0);
                for j in (i + 1)..=k {
                    s += t[(i, j)] * y[(j, k)];
                }
                let denom = values[k] - values[i];
                y[(i, k)] = if denom.norm() > 1e-13 * scale {
                    s / denom
                } else if s.norm() <= 1e-11 * scale {
                    C64::new(0.0, 0.0)
                } else {
                    return Err(LinalgError::Defective(s.norm()));
                };
            }
            let norm = y.column(k).norm();
            y.column_mut(k).unscale_mut(norm);
        }
        let vectors = &q * &y;
        let inverse = vectors.clone().try_inverse().ok_or(LinalgError::Defective(f64::INFINITY))?;
        let rebuilt = &vectors * CMatrix::from_diagonal(&DVector::from_vec(values.clone())) * &inverse;
        let defect = max_abs(&(rebuilt - m));
        if !(defect <= 1e-9 * scale) {
            return Err(LinalgError::Defective(defect));
        }
        Ok(Diagonalization { values, vectors, inverse })
    }

    pub fn apply(&self, f: impl Fn(C64) -> C64) -> CMatrix {
        let d = DVector::from_iterator(self.values.len(), self.values.iter().map(|&z| f(z)));
        &self.vectors * CMatrix::from_diagonal(&d) * &self.inverse
    }
}

/// Principal logarithm of a diagonalizable invertible matrix.
pub fn logm(m: &CMatrix) -> Result<CMatrix, LinalgError> {
    let diag = Diagonalization::new(m)?;
    if diag.values.iter().any(|z| z.norm() == 0.0) {
        return Err(LinalgError::Singular);
    }
    Ok(diag.apply(|z| z.ln()))
}

pub fn expm(m: &CMatrix) -> CMatrix {
    m.clone().exp()
}

/// Orthonormal basis (standard inner product) of the kernel, with relative cutoff.
pub fn null_space(m: &CMatrix, rel_tol: f64) -> CMatrix {
    let cols = m.ncols();
    if cols == 0 {
        return CMatrix::zeros(0, 0);
    }
    if m.nrows() == 0 {
        return identity(cols);
    }
    // pad so that the SVD exposes a full right basis
    let padded = if m.nrows() < cols {
        let mut p = CMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = SVD::new(padded, false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = rel_tol * smax.max(1e-300);
    let kernel: Vec<usize> = (0..cols).filter(|&k| svd.singular_values[k] <= cutoff).collect();
    let mut out = CMatrix::zeros(cols, kernel.len());
    for (j, &k) in kernel.iter().enumerate() {
        for i in 0..cols {
            out[(i, j)] = v_t[(k, i)].conj();
        }
    }
    out
}

/// Numerical rank with relative singular-value cutoff.
pub fn rank(m: &CMatrix, rel_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let s = m.clone().singular_values();
    let smax = s.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > rel_tol * smax).count()
}

/// Least-squares solution of `A X = B` by pseudo-inverse with relative cutoff.
pub fn lstsq(a: &CMatrix, b: &CMatrix, rel_tol: f64) -> CMatrix {
    if a.ncols() == 0 {
        return CMatrix::zeros(0, b.ncols());
    }
    if a.nrows() == 0 {
        return CMatrix::zeros(a.ncols(), b.ncols());
    }
    let svd = SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let eps = rel_tol * smax.max(1e-300);
    svd.solve(b, eps).expect("U and V were computed")
}

/// `G`-orthogonal projector onto the column span of `basis`.
pub fn orthogonal_projector(basis: &CMatrix, gram: &CMatrix) -> Result<CMatrix, LinalgError> {
    let n = gram.nrows();
    if basis.ncols() == 0 {
        return Ok(CMatrix::zeros(n, n));
    }
    let small = basis.adjoint() * gram * basis;
    let inv = inverse(&small)?;
    Ok(basis * inv * basis.adjoint() * gram)
}

/// Column span of `m` as an orthonormal basis (standard inner product).
pub fn range_basis(m: &CMatrix, rel_tol: f64) -> CMatrix {
    if m.ncols() == 0 || m.nrows() == 0 {
        return CMatrix::zeros(m.nrows(), 0);
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > rel_tol * smax.max(1e-300))
        .collect();
    CMatrix::from_fn(m.nrows(), keep.len(), |i, j| u[(i, keep[j])])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
        CMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn self_adjoint_eigen_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random(4, &mut rng);
        let gram = &a * a.adjoint() + identity(4);
        let h = random(4, &mut rng);
        let h = &h + h.adjoint();
        // M = G⁻¹ H is G-self-adjoint
        let m = inverse(&gram).unwrap() * &h;
        let eig = SelfAdjointEigen::new(&m, &gram).unwrap();
        let d = CMatrix::from_diagonal(&DVector::from_iterator(4, eig.values.iter().map(|&x| c(x))));
        assert!(max_abs(&(eig.from_eigenbasis(&d) - &m)) < 1e-12);
        assert!(max_abs(&(&eig.inverse * &eig.vectors - identity(4))) < 1e-12);
    }

    #[test]
    fn diagonalization_and_log() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random(4, &mut rng) + identity(4).scale(3.0);
        let l = logm(&m).unwrap();
        assert!(max_abs(&(expm(&l) - &m)) < 1e-11);
        // repeated eigenvalue but diagonalizable
        let id = identity(3).scale(2.0);
        let d = Diagonalization::new(&id).unwrap();
        assert!(d.values.iter().all(|z| (z - c(2.0)).norm() < 1e-14));
        // Jordan block is rejected
        let j = from_rows(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(Diagonalization::new(&j), Err(LinalgError::Defective(_))));
    }

    #[test]
    fn null_space_and_rank() {
        let m = from_rows(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        let k = null_space(&m, 1e-12);
        assert_eq!(k.ncols(), 1);
        assert!(max_abs(&(&m * &k)) < 1e-14);
        assert_eq!(rank(&m, 1e-12), 2);
        assert_eq!(range_basis(&m, 1e-12).ncols(), 2);
    }

    #[test]
    fn singular_inverse_rejected() {
        let m = from_rows(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(inverse(&m), Err(LinalgError::Singular));
    }
}
