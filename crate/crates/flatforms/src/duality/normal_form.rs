//! Signatures of symmetric forms and the elliptic/hyperbolic normal form of a
//! real symplectic matrix.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;

use super::{DualityError, Result};
use crate::grassmann::C64;
use crate::linalg::{to_complex, CMatrix};

/// Eigenvalues closer than this are one cluster.
const CLUSTER_TOL: f64 = 1e-6;

/// `n₊ − n₋` of a nondegenerate symmetric matrix.
pub fn signature(q: &DMatrix<f64>) -> Result<i64> {
    if !q.is_square() {
        return Err(DualityError::NotSquare(q.nrows()));
    }
    let sym = (q + q.transpose()) * 0.5;
    let values = sym.symmetric_eigenvalues();
    let largest = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if values.iter().any(|x| x.abs() <= 1e-12 * largest) || (q.nrows() > 0 && largest == 0.0) {
        return Err(DualityError::DegeneratePairing);
    }
    Ok(values.iter().map(|x| x.signum() as i64).sum())
}

/// `Ω = [[0, I_m], [−I_m, 0]]` as a real matrix.
pub fn standard_symplectic(m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(2 * m, 2 * m, |i, j| {
        if j == i + m {
            1.0
        } else if i == j + m {
            -1.0
        } else {
            0.0
        }
    })
}

/// Oriented elliptic angles in `(−π, π]` (repeated by multiplicity, sorted) and
/// the number of eigenvalues off the unit circle.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalForm {
    pub angles: Vec<f64>,
    pub hyperbolic_rank: usize,
}

/// Normal form of a symplectic `M` (for the standard `Ω`).
///
/// A unit-circle pair `e^{±iθ}`, `θ ∈ (0, π)`, contributes `θ` or `−θ` according
/// to the sign of `i w†Ωw` on eigenvectors `w` for `e^{iθ}`; with this
/// convention the rotation `[[cos θ, −sin θ], [sin θ, cos θ]]` gives `θ`. The
/// eigenvalue `−1` contributes `π` and `+1` contributes `0`, once per pair.
/// Defective unit-circle eigenvalues are rejected as non-generic.
pub fn symplectic_normal_form(m: &DMatrix<f64>) -> Result<NormalForm> {
    let n = m.nrows();
    if !m.is_square() || n % 2 != 0 {
        return Err(DualityError::NotSquare(n));
    }
    let omega = standard_symplectic(n / 2);
    let defect = (m.transpose() * &omega * m - &omega).amax();
    if defect > 1e-10 * (1.0 + m.amax()).powi(2) {
        return Err(DualityError::NotSymplectic(defect));
    }
    let eigenvalues: Vec<C64> = m.complex_eigenvalues().iter().copied().collect();
    let clusters = cluster(&eigenvalues);
    let mc = to_complex(m);
    let oc = to_complex(&omega);
    let kernel_tol = CLUSTER_TOL * (1.0 + m.amax());

    let mut angles = Vec::new();
    let mut hyperbolic_rank = 0;
    for (center, size) in clusters {
        if (center.norm() - 1.0).abs() > CLUSTER_TOL {
            hyperbolic_rank += size;
            continue;
        }
        // conjugates of the upper half are accounted for with it
        if center.im < -CLUSTER_TOL {
            continue;
        }
        let shifted = &mc - CMatrix::identity(n, n) * center;
        let kernel = kernel(shifted, kernel_tol);
        if kernel.ncols() != size {
            return Err(DualityError::NonGeneric(center));
        }
        if center.im.abs() <= CLUSTER_TOL {
            let angle = if center.re > 0.0 { 0.0 } else { PI };
            angles.extend(std::iter::repeat_n(angle, size / 2));
            continue;
        }
        let theta = center.arg();
        let krein = (kernel.adjoint() * &oc * &kernel) * C64::new(0.0, 1.0);
        let krein = (&krein + krein.adjoint()) * C64::new(0.5, 0.0);
        for value in krein.symmetric_eigenvalues().iter() {
            angles.push(if *value > 0.0 { theta } else { -theta });
        }
    }
    angles.sort_by(f64::total_cmp);
    Ok(NormalForm { angles, hyperbolic_rank })
}

/// Right singular vectors of `m` with singular value at most `tol`. The
/// tolerance is absolute so that `m = 0` has full kernel.
fn kernel(m: CMatrix, tol: f64) -> CMatrix {
    let n = m.ncols();
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let keep: Vec<usize> = (0..n).filter(|&k| svd.singular_values[k] <= tol).collect();
    CMatrix::from_fn(n, keep.len(), |i, j| v_t[(keep[j], i)].conj())
}

/// Groups eigenvalues within `CLUSTER_TOL` (relative) into `(mean, count)`.
fn cluster(values: &[C64]) -> Vec<(C64, usize)> {
    let mut groups: Vec<Vec<C64>> = Vec::new();
    for &z in values {
        match groups.iter_mut().find(|g| (g[0] - z).norm() <= CLUSTER_TOL * (1.0 + z.norm())) {
            Some(g) => g.push(z),
            None => groups.push(vec![z]),
        }
    }
    groups
        .into_iter()
        .map(|g| {
            let mean = g.iter().sum::<C64>() / g.len() as f64;
            (mean, g.len())
        })
        .collect()
}

/// `R(θ) = [[cos θ, −sin θ], [sin θ, cos θ]]`.
pub fn elliptic_block(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// `diag(λ, 1/λ)`.
pub fn hyperbolic_block(lambda: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[lambda, 0.0, 0.0, 1.0 / lambda])
}

/// Symplectic direct sum of `2×2` blocks of determinant one, block `k` acting on
/// the coordinates `(k, m + k)`.
pub fn symplectic_sum(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let m = blocks.len();
    let mut out = DMatrix::zeros(2 * m, 2 * m);
    for (k, b) in blocks.iter().enumerate() {
        out[(k, k)] = b[(0, 0)];
        out[(k, m + k)] = b[(0, 1)];
        out[(m + k, k)] = b[(1, 0)];
        out[(m + k, m + k)] = b[(1, 1)];
    }
    out
}

/// `exp(ΩK)` for a random symmetric `K` with entries of size `scale`.
pub fn random_symplectic(rng: &mut impl Rng, m: usize, scale: f64) -> DMatrix<f64> {
    let n = 2 * m;
    let k = DMatrix::from_fn(n, n, |_, _| rng.random_range(-scale..scale));
    let k = (&k + k.transpose()) * 0.5;
    (standard_symplectic(m) * k).exp()
}
