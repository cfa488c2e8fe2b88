//! Short exact sequences `0 → B →^i C →^j D → 0` of based complexes and the
//! multiplicativity of torsion along them.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use rand::Rng;

use super::snf::{is_zero, random_unimodular, to_f64, zidentity, zmul, zzeros, SmithForm, ZMatrix};
use super::torsion::BasedComplex;
use super::TorsionError;

/// A degreewise short exact sequence of complexes with integer maps.
#[derive(Clone, Debug)]
pub struct ExactTriple {
    pub b: BasedComplex,
    pub c: BasedComplex,
    pub d: BasedComplex,
    pub i: Vec<ZMatrix>,
    pub j: Vec<ZMatrix>,
}

/// The torsions entering the additivity identity.
#[derive(Clone, Debug, PartialEq)]
pub struct MilnorTerms {
    pub t_b: f64,
    pub t_c: f64,
    pub t_d: f64,
    /// Torsion of the long exact cohomology sequence in harmonic bases.
    pub t_h: f64,
    /// `Σ_p (−1)^p T(0 → B^p → C^p → D^p → 0)`.
    pub t_degreewise: f64,
}

impl MilnorTerms {
    /// `|T(B) − T(C) + T(D) + T(H) − Σ_p (−1)^p T(B^p, C^p, D^p)|`.
    ///
    /// With the long sequence graded from `H^0(B)` in degree 0, its torsion
    /// sits on the left.
    pub fn residual(&self) -> f64 {
        (self.t_b - self.t_c + self.t_d + self.t_h - self.t_degreewise).abs()
    }
}

impl ExactTriple {
    pub fn new(
        b: BasedComplex,
        c: BasedComplex,
        d: BasedComplex,
        i: Vec<ZMatrix>,
        j: Vec<ZMatrix>,
    ) -> Result<Self, TorsionError> {
        let len = c.len();
        if b.len() != len || d.len() != len || i.len() != len || j.len() != len {
            return Err(TorsionError::Shape { degree: 0 });
        }
        for p in 0..len {
            let (nb, nc, nd) = (b.ranks()[p], c.ranks()[p], d.ranks()[p]);
            if i[p].shape() != (nc, nb) || j[p].shape() != (nd, nc) {
                return Err(TorsionError::Shape { degree: p });
            }
            let fail = |reason| Err(TorsionError::NotExact { degree: p, reason });
            if !is_zero(&zmul(&j[p], &i[p])) {
                return fail("j∘i ≠ 0");
            }
            if SmithForm::new(&i[p]).rank() != nb {
                return fail("i is not injective");
            }
            if SmithForm::new(&j[p]).rank() != nd {
                return fail("j is not surjective");
            }
            if nc != nb + nd {
                return fail("ranks do not add up");
            }
            // j has a right inverse over Q; integrality of the cokernel is not required
            if p + 1 < len {
                let ip = to_f64(&i[p]);
                let ic = to_f64(&i[p + 1]);
                let lhs = &ic * &b.differentials()[p] - &c.differentials()[p] * &ip;
                let jp = to_f64(&j[p]);
                let jq = to_f64(&j[p + 1]);
                let rhs = &jq * &c.differentials()[p] - &d.differentials()[p] * &jp;
                if lhs.amax() > 1e-9 || rhs.amax() > 1e-9 {
                    return fail("maps do not commute with the differentials");
                }
            }
        }
        Ok(ExactTriple { b, c, d, i, j })
    }

    pub fn terms(&self) -> Result<MilnorTerms, TorsionError> {
        let len = self.c.len();
        let t_degreewise = (0..len)
            .map(|p| {
                let local = BasedComplex::new(
                    vec![self.b.ranks()[p], self.c.ranks()[p], self.d.ranks()[p]],
                    vec![to_f64(&self.i[p]), to_f64(&self.j[p])],
                )?
                .with_grams(vec![self.b.grams()[p].clone(), self.c.grams()[p].clone(), self.d.grams()[p].clone()])?;
                let t = local.torsion_l2();
                Ok(if p % 2 == 0 { t } else { -t })
            })
            .sum::<Result<f64, TorsionError>>()?;
        Ok(MilnorTerms {
            t_b: self.b.torsion_l2(),
            t_c: self.c.torsion_l2(),
            t_d: self.d.torsion_l2(),
            t_h: self.long_exact_sequence()?.torsion_l2(),
            t_degreewise,
        })
    }

    pub fn residual(&self) -> Result<f64, TorsionError> {
        Ok(self.terms()?.residual())
    }

    /// `H^0(B) → H^0(C) → H^0(D) → H^1(B) → ⋯` in degrees `3p, 3p+1, 3p+2`,
    /// each group in its orthonormal harmonic basis.
    pub fn long_exact_sequence(&self) -> Result<BasedComplex, TorsionError> {
        let len = self.c.len();
        let hb = self.b.cohomology_field();
        let hc = self.c.cohomology_field();
        let hd = self.d.cohomology_field();
        let mut ranks = Vec::with_capacity(3 * len);
        let mut maps = Vec::with_capacity(3 * len);
        for p in 0..len {
            ranks.extend([hb[p].rank, hc[p].rank, hd[p].rank]);
            // coordinates of the harmonic part of a cocycle z: hᵀ G z
            let i_star = hc[p].basis.transpose() * &self.c.grams()[p] * to_f64(&self.i[p]) * &hb[p].basis;
            let j_star = hd[p].basis.transpose() * &self.d.grams()[p] * to_f64(&self.j[p]) * &hc[p].basis;
            maps.push(i_star);
            maps.push(j_star);
            if p + 1 < len {
                maps.push(self.connecting(p, &hd[p].basis, &hb[p + 1].basis));
            }
        }
        // exactness makes compositions vanish only up to rounding; drop
        // singular values below a cutoff tied to the largest map
        let scale = maps.iter().map(|m| m.amax()).fold(1.0f64, f64::max);
        let maps = maps.into_iter().map(|m| chop(m, 1e-10 * scale)).collect();
        BasedComplex::new(ranks, maps)
    }

    /// `δ : H^p(D) → H^{p+1}(B)`: lift, differentiate, pull back along `i`.
    fn connecting(&self, p: usize, harmonic_d: &DMatrix<f64>, harmonic_b: &DMatrix<f64>) -> DMatrix<f64> {
        let j = to_f64(&self.j[p]);
        let i = to_f64(&self.i[p + 1]);
        let lift = least_squares(&j, harmonic_d);
        let dc = &self.c.differentials()[p] * lift;
        let x = least_squares(&i, &dc);
        harmonic_b.transpose() * &self.b.grams()[p + 1] * x
    }
}

fn chop(m: DMatrix<f64>, cutoff: f64) -> DMatrix<f64> {
    if m.is_empty() {
        return m;
    }
    let mut svd = m.svd(true, true);
    svd.singular_values.iter_mut().filter(|s| **s < cutoff).for_each(|s| *s = 0.0);
    svd.recompose().expect("both factors computed")
}

fn least_squares(a: &DMatrix<f64>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    if a.ncols() == 0 || rhs.ncols() == 0 {
        return DMatrix::zeros(a.ncols(), rhs.ncols());
    }
    a.clone().svd(true, true).solve(rhs, 1e-12).expect("SVD with both factors")
}

/// Random integer complex of the given ranks with `d² = 0`, built as `g d₀ g⁻¹`
/// from a complex `d₀` in split form `C^p = K^p ⊕ I^p ⊕ R^p` (image, coimage).
fn random_int_complex(rng: &mut impl Rng, ranks: &[usize]) -> Vec<ZMatrix> {
    let len = ranks.len();
    // image dimension of d_p, at most what fits
    let mut image = vec![0usize; len];
    let mut used_from_below = 0;
    for p in 0..len.saturating_sub(1) {
        let available_source = ranks[p] - used_from_below;
        let bound = available_source.min(ranks[p + 1]);
        image[p] = rng.random_range(0..=bound);
        used_from_below = image[p];
    }
    let gs: Vec<(ZMatrix, ZMatrix)> = ranks.iter().map(|&n| random_unimodular(rng, n, 3 * n)).collect();
    let mut incoming = 0;
    (0..len.saturating_sub(1))
        .map(|p| {
            // d maps the last image[p] coordinates of C^p onto the first ones of C^{p+1}
            let mut d0 = zzeros(ranks[p + 1], ranks[p]);
            let start = ranks[p] - image[p];
            debug_assert!(start >= incoming);
            for k in 0..image[p] {
                d0[(k, start + k)] = BigInt::from(rng.random_range(1i64..=3) * if rng.random_bool(0.5) { 1 } else { -1 });
            }
            incoming = image[p];
            zmul(&zmul(&gs[p + 1].0, &d0), &gs[p].1)
        })
        .collect()
}

fn random_gram(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

/// Block matrix `[[a, b], [0, c]]`.
fn upper_block(a: &ZMatrix, b: &ZMatrix, c: &ZMatrix) -> ZMatrix {
    let mut out = zzeros(a.nrows() + c.nrows(), a.ncols() + c.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out.view_mut((a.nrows(), a.ncols()), c.shape()).copy_from(c);
    out
}

fn neg(a: &ZMatrix) -> ZMatrix {
    a.map(|x| -x)
}

fn zsub(a: &ZMatrix, b: &ZMatrix) -> ZMatrix {
    a.zip_map(b, |x, y| x - y)
}

fn zrandom(rng: &mut impl Rng, rows: usize, cols: usize) -> ZMatrix {
    DMatrix::from_fn(rows, cols, |_, _| BigInt::from(rng.random_range(-2i64..=2)))
}

/// A random exact triple of length 3 with ranks at most 3.
///
/// `B = B₀ ⊕ E[1]`, `D = D₀ ⊕ E` and `C` is the extension whose gluing map is a
/// coboundary on `B₀ ⊕ D₀` plus the identity `E → E[1]`, so the connecting map
/// is nonzero. Bases are then scrambled by unimodular changes and all three
/// complexes get random inner products.
pub fn random_exact_triple(rng: &mut impl Rng) -> ExactTriple {
    const LEN: usize = 3;
    let rb: Vec<usize> = (0..LEN).map(|_| rng.random_range(0..=1)).collect();
    let rd: Vec<usize> = (0..LEN).map(|_| rng.random_range(0..=1)).collect();
    // E lives in degrees 0, 1; E[1] in degrees 1, 2
    let re = [rng.random_range(0..=1usize), rng.random_range(0..=1usize)];
    let db0 = random_int_complex(rng, &rb);
    let dd0 = random_int_complex(rng, &rd);
    let de = random_int_complex(rng, &re);

    let e_at = |p: usize| if p < 2 { re[p] } else { 0 };
    let e1_at = |p: usize| if p >= 1 { re[p - 1] } else { 0 };
    let b_ranks: Vec<usize> = (0..LEN).map(|p| rb[p] + e1_at(p)).collect();
    let d_ranks: Vec<usize> = (0..LEN).map(|p| rd[p] + e_at(p)).collect();
    let c_ranks: Vec<usize> = (0..LEN).map(|p| b_ranks[p] + d_ranks[p]).collect();

    // B = B₀ ⊕ E[1] with d_{E[1]}^{q} = −d_E^{q−1}
    let db: Vec<ZMatrix> = (0..LEN - 1)
        .map(|p| {
            let shifted = if p >= 1 { neg(&de[p - 1]) } else { zzeros(e1_at(p + 1), e1_at(p)) };
            zblock2(&db0[p], &shifted)
        })
        .collect();
    let dd: Vec<ZMatrix> = (0..LEN - 1)
        .map(|p| {
            let e = if p < de.len() { de[p].clone() } else { zzeros(e_at(p + 1), e_at(p)) };
            zblock2(&dd0[p], &e)
        })
        .collect();
    // φ_p : D^p → B^{p+1}, φ = d_B ψ_p − ψ_{p+1} d_D on the B₀ ⊕ D₀ part plus id_E
    let psi: Vec<ZMatrix> = (0..LEN).map(|p| zrandom(rng, rb[p], rd[p])).collect();
    let dc: Vec<ZMatrix> = (0..LEN - 1)
        .map(|p| {
            let coboundary = zsub(&zmul(&db0[p], &psi[p]), &zmul(&psi[p + 1], &dd0[p]));
            let mut phi = zzeros(b_ranks[p + 1], d_ranks[p]);
            phi.view_mut((0, 0), coboundary.shape()).copy_from(&coboundary);
            let e = e_at(p);
            phi.view_mut((rb[p + 1], rd[p]), (e, e)).copy_from(&zidentity(e));
            upper_block(&db[p], &phi, &dd[p])
        })
        .collect();
    let i0: Vec<ZMatrix> = (0..LEN)
        .map(|p| {
            let mut m = zzeros(c_ranks[p], b_ranks[p]);
            m.view_mut((0, 0), (b_ranks[p], b_ranks[p])).copy_from(&zidentity(b_ranks[p]));
            m
        })
        .collect();
    let j0: Vec<ZMatrix> = (0..LEN)
        .map(|p| {
            let mut m = zzeros(d_ranks[p], c_ranks[p]);
            m.view_mut((0, b_ranks[p]), (d_ranks[p], d_ranks[p])).copy_from(&zidentity(d_ranks[p]));
            m
        })
        .collect();

    // scramble: x ↦ g x in every degree
    let scramble = |rng: &mut _, ranks: &[usize]| -> Vec<(ZMatrix, ZMatrix)> {
        ranks.iter().map(|&n| random_unimodular(rng, n, 2 * n)).collect()
    };
    let gb = scramble(rng, &b_ranks);
    let gc = scramble(rng, &c_ranks);
    let gd = scramble(rng, &d_ranks);
    let conj = |g: &[(ZMatrix, ZMatrix)], d: &[ZMatrix]| -> Vec<ZMatrix> {
        (0..d.len()).map(|p| zmul(&zmul(&g[p + 1].0, &d[p]), &g[p].1)).collect()
    };
    let between = |gt: &[(ZMatrix, ZMatrix)], gs: &[(ZMatrix, ZMatrix)], m: &[ZMatrix]| -> Vec<ZMatrix> {
        (0..m.len()).map(|p| zmul(&zmul(&gt[p].0, &m[p]), &gs[p].1)).collect()
    };
    let real = |rng: &mut _, ranks: &[usize], d: Vec<ZMatrix>| {
        let grams = ranks.iter().map(|&n| random_gram(rng, n)).collect();
        BasedComplex::new(ranks.to_vec(), d.iter().map(to_f64).collect())
            .and_then(|c| c.with_grams(grams))
            .expect("random complex is valid")
    };
    let b = real(rng, &b_ranks, conj(&gb, &db));
    let c = real(rng, &c_ranks, conj(&gc, &dc));
    let d = real(rng, &d_ranks, conj(&gd, &dd));
    let i = between(&gc, &gb, &i0);
    let j = between(&gd, &gc, &j0);
    ExactTriple::new(b, c, d, i, j).expect("constructed exact")
}

fn zblock2(a: &ZMatrix, b: &ZMatrix) -> ZMatrix {
    let mut out = zzeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex_torsion::snf::zmatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn split_sum_has_zero_residual() {
        let b = BasedComplex::new(vec![1, 1], vec![DMatrix::from_element(1, 1, 2.0)]).unwrap();
        let d = BasedComplex::new(vec![1, 1], vec![DMatrix::from_element(1, 1, 0.0)]).unwrap();
        let c = b.direct_sum(&d).unwrap();
        let i = vec![zmatrix(2, 1, &[1, 0]), zmatrix(2, 1, &[1, 0])];
        let j = vec![zmatrix(1, 2, &[0, 1]), zmatrix(1, 2, &[0, 1])];
        let t = ExactTriple::new(b, c, d, i, j).unwrap();
        assert!(t.residual().unwrap() < 1e-14);
    }

    #[test]
    fn zero_subcomplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = BasedComplex::new(vec![2, 2], vec![DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 0.0])])
            .unwrap()
            .with_grams(vec![random_gram(&mut rng, 2), random_gram(&mut rng, 2)])
            .unwrap();
        let b = BasedComplex::new(vec![0, 0], vec![DMatrix::zeros(0, 0)]).unwrap();
        let j = vec![zmatrix(2, 2, &[1, 1, 0, 1]), zmatrix(2, 2, &[2, 1, 1, 1])];
        // D is C in the basis moved by j, with the pushed-forward inner products
        let jf: Vec<DMatrix<f64>> = j.iter().map(to_f64).collect();
        let dd = &jf[1] * &c.differentials()[0] * jf[0].clone().try_inverse().unwrap();
        let grams = (0..2)
            .map(|p| {
                let inv = jf[p].clone().try_inverse().unwrap();
                inv.transpose() * &c.grams()[p] * inv
            })
            .collect();
        let d = BasedComplex::new(vec![2, 2], vec![dd]).unwrap().with_grams(grams).unwrap();
        let i = vec![zzeros(2, 0), zzeros(2, 0)];
        let t = ExactTriple::new(b, c, d, i, j).unwrap();
        assert!(t.residual().unwrap() < 1e-10, "{:?}", t.terms());
    }

    #[test]
    fn non_exact_input_is_rejected() {
        let one = BasedComplex::new(vec![1], vec![]).unwrap();
        let two = BasedComplex::new(vec![2], vec![]).unwrap();
        let r = ExactTriple::new(one.clone(), two, one, vec![zmatrix(2, 1, &[1, 0])], vec![zmatrix(1, 2, &[1, 0])]);
        assert!(matches!(r, Err(TorsionError::NotExact { .. })));
    }

    #[test]
    fn random_triples_satisfy_additivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut nontrivial = 0;
        for _ in 0..60 {
            let t = random_exact_triple(&mut rng);
            let terms = t.terms().unwrap();
            if terms.t_h.abs() > 1e-6 {
                nontrivial += 1;
            }
            assert!(terms.residual() < 1e-10, "{terms:?}");
        }
        assert!(nontrivial > 5);
    }
}
