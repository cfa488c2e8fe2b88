//! Constructions of duality bundles and complexes with known structure.
//!
//! Every `J` field here has the form `J(x) = G(x) e^{S(x)} J₀ e^{−S(x)} G(x)⁻¹`,
//! where `J₀` is a standard automorphism, `S` is a periodic field in the Lie
//! algebra of `Aut(Q)` and `G(x) = exp(Σₐ (xₐ/Lₐ) Ξₐ)` carries the holonomies
//! `exp Ξₐ`. Conjugation by `Aut(Q)` preserves the three conditions on `J`.

use std::f64::consts::PI;

use rand::Rng;

use super::{DualityBundle, DualityComplex, DualityError, Epsilon, Result};
use crate::discrete_calculus::BaseGrid;
use crate::grassmann::C64;
use crate::linalg::{block_diag, expm, identity, inverse, CMatrix};

/// `½(W − Q⁻¹WᵀQ)`, the projection onto the Lie algebra `{ξ : ξᵀQ + Qξ = 0}`.
pub fn lie_projection(w: &CMatrix, q: &CMatrix) -> Result<CMatrix> {
    let qi = inverse(q)?;
    Ok((w - &qi * w.transpose() * q) * C64::new(0.5, 0.0))
}

/// `diag(I_p, −I_q)`.
pub fn indefinite_form(p: usize, q: usize) -> CMatrix {
    CMatrix::from_fn(p + q, p + q, |i, j| match (i == j, i < p) {
        (true, true) => C64::new(1.0, 0.0),
        (true, false) => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, 0.0),
    })
}

/// `Ω = [[0, I_m], [−I_m, 0]]`.
pub fn symplectic_form(m: usize) -> CMatrix {
    CMatrix::from_fn(2 * m, 2 * m, |i, j| {
        if j == i + m {
            C64::new(1.0, 0.0)
        } else if i == j + m {
            C64::new(-1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// A periodic Lie-algebra valued field `S(x) = Σₐ Aₐ cos(2πxₐ/Lₐ) + Bₐ sin(2πxₐ/Lₐ)`,
/// plus a mixed mode `C sin(2π(x₀/L₀ + x₁/L₁))` on tori of dimension at least 2.
#[derive(Clone, Debug, PartialEq)]
pub struct LieField {
    dim: usize,
    modes: Vec<(CMatrix, CMatrix)>,
    mixed: Option<CMatrix>,
}

impl LieField {
    pub fn zero(dim: usize, axes: usize) -> Self {
        let z = CMatrix::zeros(dim, dim);
        LieField { dim, modes: vec![(z.clone(), z.clone()); axes], mixed: (axes >= 2).then_some(z) }
    }

    /// Uniform entries in `[−amplitude, amplitude]` projected to the Lie algebra;
    /// with `degrees`, only the blocks preserving the degree are filled.
    pub fn random(rng: &mut impl Rng, q: &CMatrix, degrees: Option<&[usize]>, axes: usize, amplitude: f64) -> Result<Self> {
        let dim = q.nrows();
        let mut draw = || -> Result<CMatrix> {
            let w = CMatrix::from_fn(dim, dim, |i, j| {
                let same = degrees.is_none_or(|d| d[i] == d[j]);
                C64::new(if same { rng.random_range(-amplitude..=amplitude) } else { 0.0 }, 0.0)
            });
            lie_projection(&w, q)
        };
        let mut modes = Vec::with_capacity(axes);
        for _ in 0..axes {
            modes.push((draw()?, draw()?));
        }
        let mixed = if axes >= 2 { Some(draw()?) } else { None };
        Ok(LieField { dim, modes, mixed })
    }

    /// Field with explicit `(Aₐ, Bₐ)` modes and no mixed mode.
    pub fn from_modes(dim: usize, modes: Vec<(CMatrix, CMatrix)>) -> Self {
        LieField { dim, modes, mixed: None }
    }

    pub fn at(&self, x: &[f64], periods: &[f64]) -> CMatrix {
        let mut s = CMatrix::zeros(self.dim, self.dim);
        for (axis, (a, b)) in self.modes.iter().enumerate() {
            let phase = 2.0 * PI * x[axis] / periods[axis];
            s += a * C64::new(phase.cos(), 0.0) + b * C64::new(phase.sin(), 0.0);
        }
        if let Some(c) = &self.mixed {
            let phase = 2.0 * PI * (x[0] / periods[0] + x[1] / periods[1]);
            s += c * C64::new(phase.sin(), 0.0);
        }
        s
    }

    /// `Σ cᵢ Sᵢ` over fields of the same shape.
    pub fn combine(terms: &[(f64, &LieField)]) -> LieField {
        let (_, first) = terms[0];
        let mut out = LieField::zero(first.dim, first.modes.len());
        if first.mixed.is_none() {
            out.mixed = None;
        }
        for &(c, f) in terms {
            let c = C64::new(c, 0.0);
            for (o, m) in out.modes.iter_mut().zip(&f.modes) {
                o.0 += &m.0 * c;
                o.1 += &m.1 * c;
            }
            if let (Some(o), Some(m)) = (out.mixed.as_mut(), f.mixed.as_ref()) {
                *o += m * c;
            }
        }
        out
    }
}

/// The data `(ε, Q, J₀, Ξ)` of a family of `J` fields, together with the
/// grading and differential of a complex (ungraded bundles have one degree and
/// `v = 0`).
#[derive(Clone, Debug)]
pub struct JFamily {
    pub epsilon: Epsilon,
    pub pairing: CMatrix,
    pub j0: CMatrix,
    /// Commuting logarithms `Ξₐ` of the holonomies, one per axis.
    pub holonomy_logs: Vec<CMatrix>,
    pub ranks: Vec<usize>,
    pub v: CMatrix,
    /// The field `S` used by [`JFamily::bundle`] and [`JFamily::complex`].
    pub field: LieField,
}

impl JFamily {
    pub fn rank(&self) -> usize {
        self.pairing.nrows()
    }

    /// Degree of each basis vector.
    pub fn degrees(&self) -> Vec<usize> {
        self.ranks.iter().enumerate().flat_map(|(i, &r)| std::iter::repeat_n(i, r)).collect()
    }

    pub fn holonomies(&self) -> Vec<CMatrix> {
        self.holonomy_logs.iter().map(expm).collect()
    }

    pub fn j_at(&self, field: &LieField, x: &[f64], periods: &[f64]) -> CMatrix {
        let n = self.rank();
        let mut log = CMatrix::zeros(n, n);
        for (axis, xi) in self.holonomy_logs.iter().enumerate() {
            log += xi * C64::new(x[axis] / periods[axis], 0.0);
        }
        let s = field.at(x, periods);
        let g = expm(&log) * expm(&s);
        let gi = expm(&(-s)) * expm(&(-log));
        g * &self.j0 * gi
    }

    /// The duality bundle of `field` on `grid`; the grid must have one axis per
    /// holonomy logarithm.
    pub fn bundle_with(&self, grid: &BaseGrid, field: &LieField) -> Result<DualityBundle> {
        if grid.dim() != self.holonomy_logs.len() {
            return Err(DualityError::AxisMismatch { family: self.holonomy_logs.len(), grid: grid.dim() });
        }
        let periods = grid.periods().to_vec();
        DualityBundle::new(grid, self.epsilon, self.pairing.clone(), self.holonomies(), |x| {
            self.j_at(field, x, &periods)
        })
    }

    pub fn bundle(&self, grid: &BaseGrid) -> Result<DualityBundle> {
        self.bundle_with(grid, &self.field)
    }

    pub fn complex_with(&self, grid: &BaseGrid, field: &LieField) -> Result<DualityComplex> {
        DualityComplex::new(self.bundle_with(grid, field)?, self.ranks.clone(), self.v.clone())
    }

    pub fn complex(&self, grid: &BaseGrid) -> Result<DualityComplex> {
        self.complex_with(grid, &self.field)
    }

    /// A fresh random field of the same kind as `field`.
    pub fn random_field(&self, rng: &mut impl Rng, amplitude: f64) -> Result<LieField> {
        let degrees = self.degrees();
        LieField::random(rng, &self.pairing, Some(&degrees), self.holonomy_logs.len(), amplitude)
    }
}

/// Random ungraded duality bundle of the given rank on `axes` axes: a standard
/// form in a random basis, holonomies `exp(cₐξ + dₐξ³)` and a random periodic
/// field of size `amplitude`.
pub fn random_duality_bundle(rng: &mut impl Rng, epsilon: Epsilon, rank: usize, axes: usize, amplitude: f64) -> Result<JFamily> {
    let (q, j0) = match epsilon {
        Epsilon::Plus => {
            let p = rng.random_range(0..=rank);
            let q = indefinite_form(p, rank - p);
            (q.clone(), q)
        }
        Epsilon::Minus => {
            if rank % 2 != 0 {
                return Err(DualityError::NotSquare(rank));
            }
            let q = symplectic_form(rank / 2);
            let j0 = q.transpose();
            (q, j0)
        }
    };
    let b = random_near_identity(rng, &vec![0; rank], 0.3);
    let bi = inverse(&b)?;
    let q = b.transpose() * q * &b;
    let j0 = &bi * j0 * &b;
    let xi = LieField::random(rng, &q, None, 1, 0.3)?.modes[0].0.clone();
    let xi3 = &xi * &xi * &xi;
    let holonomy_logs = (0..axes)
        .map(|_| &xi * C64::new(rng.random_range(-1.0..1.0), 0.0) + &xi3 * C64::new(rng.random_range(-1.0..1.0), 0.0))
        .collect();
    let field = LieField::random(rng, &q, None, axes, amplitude)?;
    Ok(JFamily { epsilon, pairing: q, j0, holonomy_logs, ranks: vec![rank], v: CMatrix::zeros(rank, rank), field })
}

/// The circle of period `2π` with `ε = 1`, `Q = diag(1, −1)` and
/// `J(θ) = e^{aK} Q e^{−aK} = Q e^{−2aK}`, `a = amplitude·sin θ`, `K = [[0,1],[1,0]]`.
pub fn boost_circle(nodes: usize, amplitude: f64) -> Result<DualityBundle> {
    let grid = BaseGrid::circle(nodes, 2.0 * PI)?;
    let q = indefinite_form(1, 1);
    let k = CMatrix::from_fn(2, 2, |i, j| C64::new(if i != j { 1.0 } else { 0.0 }, 0.0));
    DualityBundle::new(&grid, Epsilon::Plus, q.clone(), vec![identity(2)], |x| {
        &q * expm(&(&k * C64::new(-2.0 * amplitude * x[0].sin(), 0.0)))
    })
}

/// Sizes of a random duality complex: pieces of cohomology and acyclic pieces
/// with differential entries in `gap·[0.5, 2]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexShape {
    pub epsilon: Epsilon,
    pub top_degree: usize,
    pub cohomology_pieces: usize,
    pub acyclic_pieces: usize,
    pub gap: f64,
}

/// Builder of a complex in a standard basis, one basis vector at a time.
struct Pieces {
    epsilon: f64,
    degrees: Vec<usize>,
    q: Vec<(usize, usize, f64)>,
    j: Vec<(usize, usize, f64)>,
    v: Vec<(usize, usize, f64)>,
}

impl Pieces {
    fn vector(&mut self, degree: usize) -> usize {
        self.degrees.push(degree);
        self.degrees.len() - 1
    }

    /// `(x, x′) = 1`, `(x′, x) = ε`, `Jx = x′`, `Jx′ = εx`.
    fn pair(&mut self, x: usize, xp: usize) {
        self.q.push((x, xp, 1.0));
        self.q.push((xp, x, self.epsilon));
        self.j.push((xp, x, 1.0));
        self.j.push((x, xp, self.epsilon));
    }

    fn matrices(&self) -> (CMatrix, CMatrix, CMatrix) {
        let n = self.degrees.len();
        let fill = |entries: &[(usize, usize, f64)]| {
            let mut m = CMatrix::zeros(n, n);
            for &(i, j, x) in entries {
                m[(i, j)] += C64::new(x, 0.0);
            }
            m
        };
        (fill(&self.q), fill(&self.j), fill(&self.v))
    }
}

/// Random duality complex in degrees `0..=n` with constant `v`, trivial holonomy
/// and a random periodic `J` field, in a random graded basis.
pub fn random_duality_complex(rng: &mut impl Rng, shape: ComplexShape, axes: usize, amplitude: f64) -> Result<JFamily> {
    let n = shape.top_degree;
    let mut p = Pieces { epsilon: shape.epsilon.sign(), degrees: Vec::new(), q: Vec::new(), j: Vec::new(), v: Vec::new() };
    for _ in 0..shape.cohomology_pieces {
        let i = rng.random_range(0..=n);
        if 2 * i == n {
            match shape.epsilon {
                Epsilon::Plus => {
                    let x = p.vector(i);
                    let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    p.q.push((x, x, s));
                    p.j.push((x, x, s));
                }
                Epsilon::Minus => {
                    let (x, xp) = (p.vector(i), p.vector(i));
                    p.pair(x, xp);
                }
            }
        } else {
            let (lo, hi) = (i.min(n - i), i.max(n - i));
            let (x, xp) = (p.vector(lo), p.vector(hi));
            p.pair(x, xp);
        }
    }
    if n > 0 {
        for _ in 0..shape.acyclic_pieces {
            let mut i = rng.random_range(0..n);
            if 2 * i + 1 > n {
                i = n - 1 - i;
            }
            let c = shape.gap * rng.random_range(0.5..2.0);
            if 2 * i + 1 == n {
                match shape.epsilon {
                    Epsilon::Minus => {
                        // v a = c a′
                        let (a, ap) = (p.vector(i), p.vector(i + 1));
                        p.pair(a, ap);
                        p.v.push((ap, a, c));
                    }
                    Epsilon::Plus => {
                        // v a₁ = c a₂′, v a₂ = −c a₁′
                        let (a1, a2) = (p.vector(i), p.vector(i));
                        let (a1p, a2p) = (p.vector(i + 1), p.vector(i + 1));
                        p.pair(a1, a1p);
                        p.pair(a2, a2p);
                        p.v.push((a2p, a1, c));
                        p.v.push((a1p, a2, -c));
                    }
                }
            } else {
                // v a = c b, v b′ = −c a′
                let (a, b) = (p.vector(i), p.vector(i + 1));
                let (bp, ap) = (p.vector(n - i - 1), p.vector(n - i));
                p.pair(a, ap);
                p.pair(b, bp);
                p.v.push((b, a, c));
                p.v.push((ap, bp, -c));
            }
        }
    }
    let (q, j0, v) = p.matrices();
    let (perm, ranks) = sort_by_degree(&p.degrees, n);
    let degrees: Vec<usize> = ranks.iter().enumerate().flat_map(|(i, &r)| std::iter::repeat_n(i, r)).collect();
    // graded change of basis e ↦ B e
    let b = &perm * random_near_identity(rng, &degrees, 0.3);
    let bi = inverse(&b)?;
    let q = b.transpose() * q * &b;
    let j0 = &bi * j0 * &b;
    let v = &bi * v * &b;
    let dim = degrees.len();
    let holonomy_logs = vec![CMatrix::zeros(dim, dim); axes];
    let field = LieField::random(rng, &q, Some(&degrees), axes, amplitude)?;
    Ok(JFamily { epsilon: shape.epsilon, pairing: q, j0, holonomy_logs, ranks, v, field })
}

/// The hyperbolic complex `V ⊕ Vᵀ` with `Eⁱ = Vⁱ ⊕ (V^{n−i})ᵀ`, pairing
/// `[[0, I], [εI, 0]]`, `J = [[0, εh⁻¹], [h, 0]]` for a graded metric
/// `h = e^{2K(x)}` on `V`, differential `v ⊕ (−vᵀ)` and holonomy `e^{μ} ⊕ e^{−μ}`
/// along every axis. `v_v` must be a real differential on `V` with the given ranks.
pub fn hyperbolic_complex(
    rng: &mut impl Rng,
    epsilon: Epsilon,
    ranks_v: &[usize],
    v_v: &CMatrix,
    axes: usize,
    amplitude: f64,
    mu: f64,
) -> Result<JFamily> {
    let r: usize = ranks_v.iter().sum();
    let n = ranks_v.len() - 1;
    let eps = C64::new(epsilon.sign(), 0.0);
    let zero = CMatrix::zeros(r, r);
    let id = identity(r);
    let q = block_2x2(&zero, &id, &(&id * eps), &zero);
    let j0 = block_2x2(&zero, &(&id * eps), &id, &zero);
    let v = block_diag(&[v_v.clone(), -v_v.transpose()]);
    let degrees_v: Vec<usize> = ranks_v.iter().enumerate().flat_map(|(i, &k)| std::iter::repeat_n(i, k)).collect();
    let degrees: Vec<usize> = degrees_v.iter().copied().chain(degrees_v.iter().map(|d| n - d)).collect();
    let xi = block_diag(&[&id * C64::new(mu, 0.0), &id * C64::new(-mu, 0.0)]);
    let mut modes = Vec::with_capacity(axes);
    for _ in 0..axes {
        let mut mode = || {
            // S = diag(−K, K) with K symmetric and graded
            let k = CMatrix::from_fn(r, r, |i, j| {
                let x = if degrees_v[i] == degrees_v[j] { rng.random_range(-amplitude..=amplitude) } else { 0.0 };
                C64::new(x, 0.0)
            });
            let k = (&k + k.transpose()) * C64::new(0.5, 0.0);
            block_diag(&[-&k, k])
        };
        modes.push((mode(), mode()));
    }
    let (perm, ranks) = sort_by_degree(&degrees, n);
    let pi = perm.transpose();
    let conj = |m: &CMatrix| &pi * m * &perm;
    let field = LieField::from_modes(2 * r, modes.iter().map(|(a, b)| (conj(a), conj(b))).collect());
    Ok(JFamily {
        epsilon,
        pairing: conj(&q),
        j0: conj(&j0),
        holonomy_logs: vec![conj(&xi); axes],
        ranks,
        v: conj(&v),
        field,
    })
}

/// Ungraded hyperbolic bundle `V ⊕ Vᵀ` with `rank V = rank_v`.
pub fn hyperbolic_bundle(
    rng: &mut impl Rng,
    epsilon: Epsilon,
    rank_v: usize,
    axes: usize,
    amplitude: f64,
    mu: f64,
) -> Result<JFamily> {
    hyperbolic_complex(rng, epsilon, &[rank_v], &CMatrix::zeros(rank_v, rank_v), axes, amplitude, mu)
}

fn block_2x2(a: &CMatrix, b: &CMatrix, c: &CMatrix, d: &CMatrix) -> CMatrix {
    let (r, s) = (a.nrows(), d.nrows());
    let mut m = CMatrix::zeros(r + s, r + s);
    m.view_mut((0, 0), (r, r)).copy_from(a);
    m.view_mut((0, r), (r, s)).copy_from(b);
    m.view_mut((r, 0), (s, r)).copy_from(c);
    m.view_mut((r, r), (s, s)).copy_from(d);
    m
}

/// Permutation `P` with `P e_{new} = e_{old}` listing the basis by degree, and
/// the ranks in degrees `0..=top`.
fn sort_by_degree(degrees: &[usize], top: usize) -> (CMatrix, Vec<usize>) {
    let mut order: Vec<usize> = (0..degrees.len()).collect();
    order.sort_by_key(|&k| degrees[k]);
    let n = degrees.len();
    let mut perm = CMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        perm[(old, new)] = C64::new(1.0, 0.0);
    }
    let mut ranks = vec![0; top + 1];
    for &d in degrees {
        ranks[d] += 1;
    }
    (perm, ranks)
}

/// `I + scale·W` with `W` uniform in `[−1, 1]` on the blocks of equal degree.
fn random_near_identity(rng: &mut impl Rng, degrees: &[usize], scale: f64) -> CMatrix {
    let n = degrees.len();
    CMatrix::from_fn(n, n, |i, j| {
        let w = if degrees[i] == degrees[j] { scale * rng.random_range(-1.0..1.0) } else { 0.0 };
        C64::new(if i == j { 1.0 + w } else { w }, 0.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lie_projection_lands_in_the_algebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for q in [indefinite_form(2, 1), symplectic_form(2)] {
            let n = q.nrows();
            let w = CMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), 0.0));
            let xi = lie_projection(&w, &q).unwrap();
            assert!(max_abs(&(xi.transpose() * &q + &q * &xi)) < 1e-14);
            let g = expm(&xi);
            assert!(max_abs(&(g.transpose() * &q * &g - &q)) < 1e-12);
        }
    }

    #[test]
    fn random_complexes_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let grid = BaseGrid::torus(&[5, 5], &[1.0, 1.0]).unwrap();
        for epsilon in [Epsilon::Plus, Epsilon::Minus] {
            for top in 0..4 {
                let shape = ComplexShape { epsilon, top_degree: top, cohomology_pieces: 2, acyclic_pieces: 2, gap: 1.0 };
                let family = random_duality_complex(&mut rng, shape, 2, 0.3).unwrap();
                let c = family.complex(&grid).unwrap();
                assert_eq!(c.ranks().len(), top + 1);
            }
        }
    }

    #[test]
    fn hyperbolic_complex_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = BaseGrid::circle(6, 1.0).unwrap();
        let mut v = CMatrix::zeros(3, 3);
        v[(1, 0)] = C64::new(1.5, 0.0);
        for epsilon in [Epsilon::Plus, Epsilon::Minus] {
            let family = hyperbolic_complex(&mut rng, epsilon, &[1, 1, 1], &v, 1, 0.3, 0.2).unwrap();
            assert_eq!(family.ranks, vec![2, 2, 2]);
            family.complex(&grid).unwrap();
        }
    }
}
