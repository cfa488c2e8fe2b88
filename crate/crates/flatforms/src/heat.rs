//! Exponentials `e^{−(B + S)}` of even forms whose body `B` is diagonalizable
//! with real spectrum, computed exactly in the eigenbasis of `B`.
//!
//! The soul `S` (all terms of positive form degree) is nilpotent, so the
//! Duhamel expansion
//!
//! ```text
//! e^{−(B+S)} = Σ_k (−1)^k ∫_{Δ_k} e^{−s₀B} S e^{−s₁B} S ⋯ S e^{−s_kB}
//! ```
//!
//! stops at `k = N`. In the eigenbasis each simplex integral is the divided
//! difference `ψ_k(λ_{i₀}, …, λ_{i_k})` of `x ↦ e^{−x}` (up to the sign
//! `(−1)^k`), so no scaling-and-squaring is needed however large `B` is. Heat
//! operators `e^{−tΔ}` sampled at many `t` reuse one eigen-decomposition.
//!
//! The body must commute with the grading `τ`, which holds for squares of odd
//! elements.

use nalgebra::DMatrix;

use crate::grassmann::{FormMatrix, Grading, MultiIndex, C64};
use crate::linalg::SelfAdjointEigen;

/// Longest argument list handled without allocation.
const MAX_ARGS: usize = 17;

/// `∫_{Δ_k} exp(−Σ s_m x_m) ds` over the standard simplex, for `k = xs.len() − 1`.
///
/// Equals `(−1)^k` times the divided difference of `e^{−x}` at `xs`. Stable for
/// confluent and widely spread arguments.
pub fn simplex_exp(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty() && xs.len() <= MAX_ARGS, "simplex_exp takes 1 to {MAX_ARGS} arguments");
    let mut sorted = [0.0f64; MAX_ARGS];
    let sorted = &mut sorted[..xs.len()];
    sorted.copy_from_slice(xs);
    sorted.sort_by(f64::total_cmp);
    shifted_simplex_exp(sorted)
}

/// Same as [`simplex_exp`] for sorted arguments.
fn shifted_simplex_exp(xs: &[f64]) -> f64 {
    let k = xs.len() - 1;
    let shift = xs[0];
    if k == 0 {
        return (-shift).exp();
    }
    let spread = xs[k] - shift;
    if spread < 1.0 {
        let mut ys = [0.0f64; MAX_ARGS];
        for (y, x) in ys.iter_mut().zip(xs) {
            *y = x - shift;
        }
        return (-shift).exp() * taylor_simplex_exp(&ys[..xs.len()]);
    }
    (shifted_simplex_exp(&xs[..k]) - shifted_simplex_exp(&xs[1..])) / spread
}

/// `Σ_n (−1)^n h_n(y) / (n + k)!` with `h_n` the complete homogeneous symmetric polynomials.
fn taylor_simplex_exp(ys: &[f64]) -> f64 {
    const TERMS: usize = 40;
    let k = ys.len() - 1;
    // h[n] over the variables processed so far
    let mut h = [0.0f64; TERMS];
    h[0] = 1.0;
    for (j, &y) in ys.iter().enumerate() {
        if j == 0 {
            for n in 1..TERMS {
                h[n] = h[n - 1] * y;
            }
        } else {
            for n in 1..TERMS {
                h[n] += y * h[n - 1];
            }
        }
    }
    let mut factorial = (1..=k).fold(1.0f64, |acc, m| acc * m as f64);
    let mut sum = 0.0;
    for (n, &hn) in h.iter().enumerate() {
        if n > 0 {
            factorial *= (n + k) as f64;
        }
        let term = hn / factorial;
        sum += if n % 2 == 0 { term } else { -term };
        if term.abs() < 1e-18 * sum.abs().max(1e-300) && n > 2 {
            break;
        }
    }
    sum
}

/// A soul term `dθ^I ⊗ C` together with `τ C τ`.
struct SoulTerm {
    index: MultiIndex,
    plain: DMatrix<C64>,
    flipped: DMatrix<C64>,
}

/// `e^{−(diag(values) + soul)}` in the eigenbasis, for the product of `grading`
/// (ungraded when `None`). `soul` must have no degree-0 term.
pub fn exp_neg_diagonal_body(
    values: &[f64],
    soul: &FormMatrix<C64>,
    grading: Option<&Grading<C64>>,
) -> FormMatrix<C64> {
    let r = values.len();
    let n = soul.generators();
    assert_eq!(soul.dim(), r, "soul and spectrum disagree in size");
    let terms: Vec<SoulTerm> = soul
        .terms()
        .filter(|(i, m)| i.degree() > 0 && m.iter().any(|z| z.norm() != 0.0))
        .map(|(i, m)| SoulTerm {
            index: i,
            plain: m.clone(),
            flipped: grading.map(|g| g.conjugate(m)).unwrap_or_else(|| m.clone()),
        })
        .collect();

    let mut out = FormMatrix::zero(n, r);
    let body = DMatrix::from_fn(r, r, |i, j| if i == j { C64::new((-values[i]).exp(), 0.0) } else { C64::new(0.0, 0.0) });
    out.accumulate(MultiIndex::EMPTY, body);

    // ordered chains of pairwise disjoint soul terms
    let mut chain: Vec<usize> = Vec::new();
    let mut cache = DividedDifferences::new(values, terms.len().min(n));
    extend_chains(&terms, &mut cache, grading.is_some(), &mut chain, MultiIndex::EMPTY, &mut out);
    out
}

/// Lazily filled tables of `simplex_exp` over index tuples into `values`, shared
/// by all chains of one exponential. Values equal to within `LEVEL_TOL`
/// (relative) share a level, so degenerate spectra need few evaluations.
struct DividedDifferences {
    size: usize,
    level_of: Vec<usize>,
    levels: Vec<f64>,
    /// `tables[k − 1]` holds level tuples of length `k + 1`, NaN where not yet computed.
    tables: Vec<Vec<f64>>,
}

const LEVEL_TOL: f64 = 1e-13;

impl DividedDifferences {
    fn new(values: &[f64], longest: usize) -> Self {
        let mut levels: Vec<f64> = Vec::new();
        let level_of = values
            .iter()
            .map(|&v| match levels.iter().position(|&l| (l - v).abs() <= LEVEL_TOL * (1.0 + v.abs())) {
                Some(k) => k,
                None => {
                    levels.push(v);
                    levels.len() - 1
                }
            })
            .collect();
        let count = levels.len();
        let tables = (1..=longest).map(|k| vec![f64::NAN; count.pow(k as u32 + 1)]).collect();
        DividedDifferences { size: values.len(), level_of, levels, tables }
    }

    fn get(&mut self, path: &[usize]) -> f64 {
        let count = self.levels.len();
        let slot = path.iter().rev().fold(0usize, |acc, &p| acc * count + self.level_of[p]);
        let cached = self.tables[path.len() - 2][slot];
        if !cached.is_nan() {
            return cached;
        }
        let mut xs = [0.0f64; MAX_ARGS];
        for (x, &p) in xs.iter_mut().zip(path) {
            *x = self.levels[self.level_of[p]];
        }
        let value = simplex_exp(&xs[..path.len()]);
        self.tables[path.len() - 2][slot] = value;
        value
    }
}

fn extend_chains(
    terms: &[SoulTerm],
    cache: &mut DividedDifferences,
    graded: bool,
    chain: &mut Vec<usize>,
    used: MultiIndex,
    out: &mut FormMatrix<C64>,
) {
    for (k, term) in terms.iter().enumerate() {
        if !used.is_disjoint(term.index) {
            continue;
        }
        chain.push(k);
        accumulate_chain(terms, cache, graded, chain, out);
        extend_chains(terms, cache, graded, chain, used.union(term.index), out);
        chain.pop();
    }
}

/// Adds `(−1)^k Σ_paths ψ_k · C₁^{(q)} ⋯ C_k` for one ordered chain.
fn accumulate_chain(
    terms: &[SoulTerm],
    cache: &mut DividedDifferences,
    graded: bool,
    chain: &[usize],
    out: &mut FormMatrix<C64>,
) {
    let k = chain.len();
    let r = cache.size;
    // form sign and per-factor parity of the form degree to its right
    let mut index = MultiIndex::EMPTY;
    let mut sign = 1.0;
    for &c in chain {
        let s = index.wedge_sign(terms[c].index);
        sign *= s as f64;
        index = index.union(terms[c].index);
    }
    let factors: Vec<&DMatrix<C64>> = (0..k)
        .map(|m| {
            let right_degree: usize = chain[m + 1..].iter().map(|&c| terms[c].index.degree()).sum();
            if graded && right_degree % 2 == 1 {
                &terms[chain[m]].flipped
            } else {
                &terms[chain[m]].plain
            }
        })
        .collect();
    let sign = if k % 2 == 0 { sign } else { -sign };

    let mut result = DMatrix::<C64>::zeros(r, r);
    let mut path = vec![0usize; k + 1];
    for i in 0..r {
        for j in 0..r {
            path[0] = i;
            path[k] = j;
            result[(i, j)] = path_sum(&factors, cache, &mut path, 1) * sign;
        }
    }
    out.accumulate(index, result);
}

fn path_sum(factors: &[&DMatrix<C64>], cache: &mut DividedDifferences, path: &mut [usize], depth: usize) -> C64 {
    let k = factors.len();
    if depth == k {
        let mut prod = C64::new(1.0, 0.0);
        for m in 0..k {
            let z = factors[m][(path[m], path[m + 1])];
            if z.norm() == 0.0 {
                return C64::new(0.0, 0.0);
            }
            prod *= z;
        }
        return prod * cache.get(path);
    }
    let mut sum = C64::new(0.0, 0.0);
    for l in 0..cache.size {
        if factors[depth - 1][(path[depth - 1], l)].norm() == 0.0 {
            continue;
        }
        path[depth] = l;
        sum += path_sum(factors, cache, path, depth + 1);
    }
    sum
}

/// `e^{−x}` for an even form `x` whose body is self-adjoint for `eig`'s inner
/// product, with `eig` the decomposition of that body.
pub fn exp_neg_with_eigen(
    x: &FormMatrix<C64>,
    eig: &SelfAdjointEigen,
    grading: Option<&Grading<C64>>,
) -> FormMatrix<C64> {
    let soul = x
        .filter_terms(|i| i.degree() > 0)
        .map_terms(|_, m| eig.to_eigenbasis(m));
    let local = grading.map(|g| Grading::new_unchecked(eig.to_eigenbasis(g.tau())));
    exp_neg_diagonal_body(&eig.values, &soul, local.as_ref()).map_terms(|_, m| eig.from_eigenbasis(m))
}
