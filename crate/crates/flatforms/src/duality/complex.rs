//! Duality complexes `A′ = ∇ + v` with `v` parallel of degree one, their
//! rescaled heat forms, the eta-form and the induced duality on cohomology.

use rayon::prelude::*;

use super::bundle::{check_degrees, scalar_field};
use super::{DualityBundle, DualityError, Epsilon, Result};
use crate::discrete_calculus::{exterior_d, BaseGrid, GridError, GridField};
use crate::grassmann::{sqrt_two_i_pi, FormMatrix, Grading, MultiIndex, C64};
use crate::heat::exp_neg_diagonal_body;
use crate::linalg::{inverse, lstsq, max_abs, range_basis, CMatrix, SelfAdjointEigen};
use crate::quadrature::{integrate_dt, simpson_nodes, QuadratureConfig};

/// Eigenvalues below this fraction of the largest count as kernel.
const KERNEL_CUTOFF: f64 = 1e-8;
/// Tolerance of the structural identities, relative to the sizes involved.
const STRUCTURE_TOL: f64 = 1e-10;
/// Step of the central difference in the path parameter of `p̃`.
const PATH_STEP: f64 = 1e-5;

/// A duality bundle graded by `E⁰ ⊕ ⋯ ⊕ Eⁿ` with a parallel differential `v`.
///
/// The pairing couples `Eⁱ` with `E^{n−i}`, `J` maps `Eⁱ` to `E^{n−i}`, `v` is
/// compatible, `vᵀQ + Qv = 0`, and commutes with the holonomies.
#[derive(Clone, Debug)]
pub struct DualityComplex {
    bundle: DualityBundle,
    ranks: Vec<usize>,
    degrees: Vec<i64>,
    v: CMatrix,
}

/// `C_t` and `D_t` without the derivative: `C_t = d + c`, `D_t = d`.
#[derive(Clone, Debug)]
pub struct RescaledPair {
    pub c: GridField,
    pub d: GridField,
}

#[derive(Clone, Debug)]
pub struct EtaForm {
    pub form: GridField,
    pub error_estimate: f64,
    pub t_max: f64,
    pub evaluations: usize,
}

/// Cohomology with its induced duality, in the frame of a constant lift of a
/// basis of `ker v / im v`.
#[derive(Clone, Debug)]
pub struct InducedDuality {
    pub complex: DualityComplex,
    /// Columns span a complement of `im v` in `ker v`.
    pub lift: CMatrix,
    /// Largest residual of expressing `J` and the holonomies in the lift.
    pub lift_residual: f64,
    /// Largest deviation of the pairing of harmonic representatives from `Q_H`.
    pub pairing_residual: f64,
}

/// Per-node data in the eigenbasis of `−X₀²`.
struct NodeHeat {
    tau: Grading<C64>,
    number: CMatrix,
    x: FormMatrix<C64>,
    values: Vec<f64>,
    eig: SelfAdjointEigen,
}

impl NodeHeat {
    /// `D_t` and `e^{−C_t²}` with `C_t² = −D_t·(PD_t)`; the body of `C_t²` is
    /// exactly `diag(tλ)`.
    fn heat(&self, t: f64) -> Result<(FormMatrix<C64>, FormMatrix<C64>)> {
        let d = scale_by_degree(&self.x, t);
        let pd = flip_odd(&d);
        let soul = d.super_mul(&pd, &self.tau)?.scale(C64::new(-1.0, 0.0)).filter_terms(|i| i.degree() > 0);
        let body: Vec<f64> = self.values.iter().map(|l| t * l).collect();
        Ok((d, exp_neg_diagonal_body(&body, &soul, Some(&self.tau))))
    }
}

impl DualityComplex {
    pub fn new(bundle: DualityBundle, ranks: Vec<usize>, v: CMatrix) -> Result<Self> {
        let n = bundle.rank();
        if ranks.is_empty() || ranks.iter().sum::<usize>() != n || v.shape() != (n, n) {
            return Err(DualityError::ShapeMismatch);
        }
        let degrees: Vec<i64> = ranks.iter().enumerate().flat_map(|(i, &r)| std::iter::repeat_n(i as i64, r)).collect();
        let top = ranks.len() as i64 - 1;
        let q = bundle.pairing();
        let scale = 1.0 + max_abs(q);

        let paired = block_defect(q, &degrees, |a, b| a + b == top);
        if paired > 1e-12 * scale {
            return Err(DualityError::NotGraded { what: "pairing", defect: paired });
        }
        for node in 0..bundle.grid().node_count() {
            let j = bundle.j_at(node);
            let defect = block_defect(&j, &degrees, |a, b| a + b == top);
            if defect > STRUCTURE_TOL * (1.0 + max_abs(&j)) {
                return Err(DualityError::NotGraded { what: "J", defect });
            }
        }
        let v_size = 1.0 + max_abs(&v);
        for (axis, u) in bundle.holonomies().iter().enumerate() {
            let defect = block_defect(u, &degrees, |a, b| a == b);
            if defect > STRUCTURE_TOL * (1.0 + max_abs(u)) {
                return Err(DualityError::NotGraded { what: "holonomy", defect });
            }
            if max_abs(&(u * &v - &v * u)) > STRUCTURE_TOL * (1.0 + max_abs(u)) * v_size {
                return Err(DualityError::HolonomyBreaksDifferential(axis));
            }
        }
        let shifted = block_defect(&v, &degrees, |a, b| a == b + 1);
        if shifted > 1e-12 * v_size {
            return Err(DualityError::NotGraded { what: "differential", defect: shifted });
        }
        let square = max_abs(&(&v * &v));
        if square > STRUCTURE_TOL * v_size * v_size {
            return Err(DualityError::NotFlat(square));
        }
        let compat = max_abs(&(v.transpose() * q + q * &v));
        if compat > STRUCTURE_TOL * v_size * scale {
            return Err(DualityError::NotCompatible(compat));
        }
        Ok(DualityComplex { bundle, ranks, degrees, v })
    }

    /// The bundle as a complex concentrated in degree 0 with `v = 0`.
    pub fn ungraded(bundle: DualityBundle) -> Result<Self> {
        let n = bundle.rank();
        Self::new(bundle, vec![n], CMatrix::zeros(n, n))
    }

    pub fn bundle(&self) -> &DualityBundle {
        &self.bundle
    }

    pub fn grid(&self) -> &BaseGrid {
        self.bundle.grid()
    }

    pub fn epsilon(&self) -> Epsilon {
        self.bundle.epsilon()
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn top_degree(&self) -> usize {
        self.ranks.len() - 1
    }

    pub fn v(&self) -> &CMatrix {
        &self.v
    }

    /// The number operator `N`.
    pub fn number_operator(&self) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.degrees.len(),
            self.degrees.iter().map(|&d| C64::new(d as f64, 0.0)),
        ))
    }

    /// `v* = −J⁻¹vJ`, the metric adjoint of `v`, at `node`.
    pub fn v_star_at(&self, node: usize) -> Result<CMatrix> {
        let j = self.bundle.j_at(node);
        Ok(-(inverse(&j)? * &self.v * j))
    }

    /// `(S, X)` with `A = ∇ + ω/2 + S` the `J`-odd part and `X = ω/2 − ½(v + J⁻¹vJ)`,
    /// so that `A′ = A − X` and `A″ = A + X = ∇ + ω + v*`.
    pub fn split(&self) -> Result<(GridField, GridField)> {
        let omega = self.bundle.omega()?;
        let generators = self.grid().dim();
        let half = C64::new(0.5, 0.0);
        let mut s = Vec::with_capacity(self.grid().node_count());
        let mut x = Vec::with_capacity(self.grid().node_count());
        for node in 0..self.grid().node_count() {
            let j = self.bundle.j_at(node);
            let conj = inverse(&j)? * &self.v * &j;
            s.push(FormMatrix::from_body(generators, (&self.v - &conj) * half));
            let even = FormMatrix::from_body(generators, (&self.v + &conj) * half);
            x.push(omega.value(node).scale(half).try_sub(&even)?);
        }
        let twists = omega.twists().to_vec();
        let n = self.bundle.rank();
        Ok((
            GridField::from_values(self.grid(), n, twists.clone(), s)?,
            GridField::from_values(self.grid(), n, twists, x)?,
        ))
    }

    /// `C_t = ∇ + ω/2 + √t S` and `D_t = ω/2 + √t X₀`.
    pub fn rescaled(&self, t: f64) -> Result<RescaledPair> {
        check_time(t)?;
        let omega = self.bundle.omega()?;
        let (s, x) = self.split()?;
        let half = C64::new(0.5, 0.0);
        let c = omega.map(|m| m.scale(half)).try_add(&s.map(|m| scale_by_degree(m, t)))?;
        Ok(RescaledPair { c, d: x.map(|m| scale_by_degree(m, t)) })
    }

    /// `C_t²` evaluated as `−D_t·(PD_t)` in the `τ`-graded product.
    pub fn c_squared(&self, t: f64) -> Result<GridField> {
        let pair = self.rescaled(t)?;
        let tau_scale = self.epsilon().sqrt().inv();
        let values = (0..self.grid().node_count())
            .map(|node| {
                let g = Grading::new_unchecked(self.bundle.j_at(node) * tau_scale);
                let d = pair.d.value(node);
                Ok(d.super_mul(&flip_odd(d), &g)?.scale(C64::new(-1.0, 0.0)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GridField::from_values(self.grid(), self.bundle.rank(), pair.d.twists().to_vec(), values)?)
    }

    /// `max |ω + c_tᵀ − c_t|` for `C_t = d + c_t`, the transpose being the
    /// metric adjoint with the form-degree signs; zero when `C_t` is symmetric.
    pub fn symmetry_residual(&self, t: f64) -> Result<f64> {
        let pair = self.rescaled(t)?;
        let omega = self.bundle.omega()?;
        let mut worst = 0.0f64;
        for node in 0..self.grid().node_count() {
            let h = self.bundle.metric_at(node);
            let hi = inverse(&h)?;
            let c = pair.c.value(node);
            let transposed = c.transpose().left_mul_matrix(&hi).right_mul_matrix(&h);
            worst = worst.max(omega.value(node).try_add(&transposed)?.try_sub(c)?.max_abs());
        }
        Ok(worst)
    }

    /// Largest of `|(A′)²|` and `|(A″)²|` in the `N`-graded product. `(A′)² = v²`
    /// is exact; `(A″)²` involves `dω + ω²` and is second order on a grid.
    pub fn flat_pair_residual(&self) -> Result<f64> {
        let grading = Grading::from_ranks(&self.ranks);
        let omega = self.bundle.omega()?;
        let generators = self.grid().dim();
        let values = (0..self.grid().node_count())
            .map(|node| Ok(omega.value(node).try_add(&FormMatrix::from_body(generators, self.v_star_at(node)?))?))
            .collect::<Result<Vec<_>>>()?;
        let connection = GridField::from_values(self.grid(), self.bundle.rank(), omega.twists().to_vec(), values)?;
        let derivative = match exterior_d(&connection) {
            Ok(f) => Some(f),
            Err(GridError::PointBase) => None,
            Err(e) => return Err(e.into()),
        };
        let mut worst = max_abs(&(&self.v * &self.v));
        for node in 0..self.grid().node_count() {
            let a = connection.value(node);
            let mut square = a.super_mul(a, &grading)?;
            if let Some(d) = &derivative {
                square = square.try_add(d.value(node))?;
            }
            worst = worst.max(square.max_abs());
        }
        Ok(worst)
    }

    fn prepare(&self) -> Result<Vec<NodeHeat>> {
        let (_, x) = self.split()?;
        let tau_scale = self.epsilon().sqrt().inv();
        let number = self.number_operator();
        (0..self.grid().node_count())
            .into_par_iter()
            .map(|node| {
                let h = self.bundle.metric_at(node);
                let xv = x.value(node);
                let x0 = xv.coefficient(MultiIndex::EMPTY);
                let eig = SelfAdjointEigen::new(&(-(&x0 * &x0)), &h)?;
                let mut values = eig.values.clone();
                let largest = values.iter().fold(0.0f64, |m, l| m.max(l.abs()));
                for l in values.iter_mut() {
                    if *l <= KERNEL_CUTOFF * largest {
                        *l = 0.0;
                    }
                }
                Ok(NodeHeat {
                    tau: Grading::new_unchecked(eig.to_eigenbasis(&(self.bundle.j_at(node) * tau_scale))),
                    number: eig.to_eigenbasis(&number),
                    x: xv.map_terms(|_, m| eig.to_eigenbasis(m)),
                    values,
                    eig,
                })
            })
            .collect()
    }

    /// `p(A′, J(t)) = φ tr[τ e^{−C_t²}]`, real and concentrated in degrees `1 − ε` mod 4.
    pub fn p_rescaled(&self, t: f64) -> Result<GridField> {
        check_time(t)?;
        let prepared = self.prepare()?;
        let values = prepared
            .par_iter()
            .map(|p| {
                let (_, e) = p.heat(t)?;
                Ok(e.supertrace(&p.tau)?.phi())
            })
            .collect::<Result<Vec<_>>>()?;
        let form = scalar_field(self.grid(), values)?;
        check_degrees(&form, self.epsilon().p_degree())?;
        Ok(form)
    }

    /// `p(A′, J) = (1/√ε) φ tr[J e^{−A²}]`.
    pub fn p_super(&self) -> Result<GridField> {
        self.p_rescaled(1.0)
    }

    /// `(1/√ε) tr[J e^{−C_t²}]` at `node`, the degree-0 part of the heat form.
    pub fn heat_trace(&self, t: f64, node: usize) -> Result<C64> {
        check_time(t)?;
        let prepared = self.prepare()?;
        let (_, e) = prepared[node].heat(t)?;
        Ok(e.supertrace(&prepared[node].tau)?.scalar(MultiIndex::EMPTY))
    }

    /// `η̃(t) = (2iπ)^{−1/2} (1/2t) φ tr[τ [N, D_t] e^{−C_t²}]`, real and of
    /// degrees `−ε` mod 4.
    pub fn eta_integrand(&self, t: f64) -> Result<GridField> {
        check_time(t)?;
        let prepared = self.prepare()?;
        let values = prepared.par_iter().map(|p| eta_at(p, t)).collect::<Result<Vec<_>>>()?;
        let form = scalar_field(self.grid(), values)?;
        check_degrees(&form, eta_degree(self.epsilon()))?;
        Ok(form)
    }

    /// `η̃ = −∫₀^∞ η̃(t) dt`, node by node. The integrand is bounded at 0 and must
    /// decay at infinity.
    pub fn eta_form(&self, config: &QuadratureConfig) -> Result<EtaForm> {
        let prepared = self.prepare()?;
        let generators = self.grid().dim();
        let indices: Vec<MultiIndex> = (0u16..1 << generators)
            .map(MultiIndex::from_mask)
            .filter(|i| i.degree() % 2 == 1)
            .collect();
        let config = QuadratureConfig { small_t_order: 0.0, ..config.clone() };
        let results = prepared
            .par_iter()
            .map(|p| {
                let mut failure = None;
                let mut imaginary = 0.0f64;
                let r = integrate_dt(
                    |t| match eta_at(p, t) {
                        Ok(f) => {
                            imaginary = imaginary.max(f.max_imag());
                            indices.iter().map(|&i| f.scalar(i).re).collect()
                        }
                        Err(e) => {
                            failure.get_or_insert(e);
                            vec![f64::NAN; indices.len()]
                        }
                    },
                    &config,
                );
                if let Some(e) = failure {
                    return Err(e);
                }
                let r = r?;
                if imaginary > 1e-8 {
                    return Err(DualityError::ParityViolated(imaginary));
                }
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(results.len());
        let (mut error, mut t_max, mut evaluations) = (0.0f64, 0.0f64, 0);
        for r in &results {
            let mut form = FormMatrix::zero(generators, 1);
            for (k, &i) in indices.iter().enumerate() {
                form.accumulate(i, CMatrix::from_element(1, 1, C64::new(-r.value[k], 0.0)));
            }
            values.push(form);
            error = error.max(r.error_estimate);
            t_max = t_max.max(r.t_max);
            evaluations += r.evaluations;
        }
        Ok(EtaForm { form: scalar_field(self.grid(), values)?, error_estimate: error, t_max, evaluations })
    }

    /// Harmonic space `ker(vv* + v*v)` at every node: ranks per degree and an
    /// `h`-orthonormal basis ordered by degree.
    pub fn harmonic(&self) -> Result<Vec<(Vec<usize>, CMatrix)>> {
        let n = self.bundle.rank();
        let per_node = (0..self.grid().node_count())
            .into_par_iter()
            .map(|node| {
                let h = self.bundle.metric_at(node);
                let vs = self.v_star_at(node)?;
                let laplacian = &vs * &self.v + &self.v * &vs;
                let mut blocks = Vec::with_capacity(self.ranks.len());
                let mut largest = 0.0f64;
                let mut offset = 0;
                for &r in &self.ranks {
                    let eig = SelfAdjointEigen::new(
                        &laplacian.view((offset, offset), (r, r)).into_owned(),
                        &h.view((offset, offset), (r, r)).into_owned(),
                    )?;
                    largest = eig.values.iter().fold(largest, |m, l| m.max(l.abs()));
                    blocks.push((offset, eig));
                    offset += r;
                }
                let mut ranks = Vec::with_capacity(blocks.len());
                let mut columns = Vec::new();
                for (offset, eig) in &blocks {
                    let kernel: Vec<usize> =
                        (0..eig.values.len()).filter(|&k| eig.values[k].abs() <= KERNEL_CUTOFF * largest).collect();
                    ranks.push(kernel.len());
                    for k in kernel {
                        let mut col = CMatrix::zeros(n, 1);
                        col.view_mut((*offset, 0), (eig.vectors.nrows(), 1)).copy_from(&eig.vectors.column(k));
                        columns.push(col);
                    }
                }
                let mut basis = CMatrix::zeros(n, columns.len());
                for (k, c) in columns.iter().enumerate() {
                    basis.set_column(k, &c.column(0));
                }
                Ok((ranks, basis))
            })
            .collect::<Result<Vec<_>>>()?;
        let first = per_node[0].0.clone();
        for (node, (r, _)) in per_node.iter().enumerate() {
            if let Some(degree) = (0..first.len()).find(|&d| r[d] != first[d]) {
                return Err(DualityError::RankJump { node, degree });
            }
        }
        Ok(per_node)
    }

    /// Induced duality with the harmonic basis at node 0 as the lift.
    pub fn induced_duality(&self) -> Result<InducedDuality> {
        let harmonic = self.harmonic()?;
        self.induced_with(&harmonic, harmonic[0].1.clone())
    }

    /// Induced duality for a lift whose columns are `v`-closed, homogeneous,
    /// ordered by degree and independent modulo `im v`.
    pub fn induced_from_lift(&self, lift: &CMatrix) -> Result<InducedDuality> {
        let harmonic = self.harmonic()?;
        self.induced_with(&harmonic, lift.clone())
    }

    fn induced_with(&self, harmonic: &[(Vec<usize>, CMatrix)], lift: CMatrix) -> Result<InducedDuality> {
        let ranks = harmonic[0].0.clone();
        let k = lift.ncols();
        if k != ranks.iter().sum::<usize>() || lift.nrows() != self.bundle.rank() {
            return Err(DualityError::ShapeMismatch);
        }
        let image = range_basis(&self.v, 1e-10);
        let mut frame = CMatrix::zeros(lift.nrows(), k + image.ncols());
        frame.view_mut((0, 0), (lift.nrows(), k)).copy_from(&lift);
        frame.view_mut((0, k), (lift.nrows(), image.ncols())).copy_from(&image);
        let coordinates = |w: &CMatrix| -> (CMatrix, f64) {
            let c = lstsq(&frame, w, 1e-12);
            let residual = max_abs(&(&frame * &c - w)) / (1.0 + max_abs(w));
            (c.rows(0, k).into_owned(), residual)
        };

        let q = self.bundle.pairing();
        let q_h = lift.transpose() * q * &lift;
        let mut lift_residual = 0.0f64;
        let mut pairing_residual = 0.0f64;
        let mut j_h = Vec::with_capacity(harmonic.len());
        for (node, (_, basis)) in harmonic.iter().enumerate() {
            let h = self.bundle.metric_at(node);
            let reps = basis * basis.adjoint() * &h * &lift;
            pairing_residual = pairing_residual.max(max_abs(&(reps.transpose() * q * &reps - &q_h)));
            let (c, r) = coordinates(&(self.bundle.j_at(node) * &reps));
            lift_residual = lift_residual.max(r);
            j_h.push(c);
        }
        let mut holonomies = Vec::with_capacity(self.bundle.holonomies().len());
        for u in self.bundle.holonomies() {
            let (c, r) = coordinates(&(u * &lift));
            lift_residual = lift_residual.max(r);
            holonomies.push(c);
        }
        let bundle = DualityBundle::from_values(self.grid(), self.epsilon(), q_h, holonomies, j_h)?;
        let complex = DualityComplex::new(bundle, ranks, CMatrix::zeros(k, k))?;
        Ok(InducedDuality { complex, lift, lift_residual, pairing_residual })
    }

    /// `max |dη̃ − p(∇^E, J^E) + p(∇^H, J^H)|`, second order in the grid spacing
    /// plus the quadrature error.
    pub fn eta_transgression_residual(&self, config: &QuadratureConfig) -> Result<f64> {
        let eta = self.eta_form(config)?;
        let p_e = self.bundle.p_form()?;
        let p_h = self.induced_duality()?.complex.bundle.p_form()?;
        let d_eta = exterior_d(&eta.form)?;
        Ok(d_eta.try_sub(&p_e)?.try_add(&p_h)?.max_abs())
    }

    /// Integrand of `p̃` in the path parameter:
    /// `(2iπ)^{−1/2} ½ φ tr[τ [J⁻¹J̇, X] e^{−A²}]`, the bracket being the
    /// ordinary commutator.
    pub fn p_tilde_integrand(&self, j_dot: &[CMatrix]) -> Result<GridField> {
        let prepared = self.prepare()?;
        let (_, x) = self.split()?;
        let factor = sqrt_two_i_pi().inv() * 0.5;
        let values = (0..self.grid().node_count())
            .into_par_iter()
            .map(|node| {
                let p = &prepared[node];
                let r = inverse(&self.bundle.j_at(node))? * &j_dot[node];
                let xv = x.value(node);
                let bracket = xv.left_mul_matrix(&r).try_sub(&xv.right_mul_matrix(&r))?;
                let bracket = bracket.map_terms(|_, m| p.eig.to_eigenbasis(m));
                let (_, e) = p.heat(1.0)?;
                Ok(bracket.super_mul(&e, &p.tau)?.supertrace(&p.tau)?.phi().scale(factor))
            })
            .collect::<Result<Vec<_>>>()?;
        let form = scalar_field(self.grid(), values)?;
        check_degrees(&form, eta_degree(self.epsilon()))?;
        Ok(form)
    }

    /// `p̃(A′, J₁, J₂) = ∫₀¹ (p̃ integrand) ds` along `path`, a family of complexes
    /// sharing `A′` with `J(0) = J₂` and `J(1) = J₁`. Composite Simpson with
    /// `intervals` (even) panels; `J̇` by central differences, so `path` must
    /// also accept parameters slightly outside `[0, 1]`. Satisfies
    /// `dp̃ = p(A′, J₁) − p(A′, J₂)`.
    pub fn p_tilde<P>(path: P, intervals: usize) -> Result<GridField>
    where
        P: Fn(f64) -> Result<DualityComplex>,
    {
        let mut total: Option<GridField> = None;
        for (s, w) in simpson_nodes(0.0, 1.0, intervals) {
            let here = path(s)?;
            let plus = path(s + PATH_STEP)?;
            let minus = path(s - PATH_STEP)?;
            let j_dot: Vec<CMatrix> = (0..here.grid().node_count())
                .map(|node| {
                    (plus.bundle.j_at(node) - minus.bundle.j_at(node)) * C64::new(0.5 / PATH_STEP, 0.0)
                })
                .collect();
            let term = here.p_tilde_integrand(&j_dot)?.map_untwisted(|f| f.scale(C64::new(w, 0.0)));
            total = Some(match total {
                None => term,
                Some(acc) => acc.try_add(&term)?,
            });
        }
        Ok(total.expect("Simpson has nodes"))
    }
}

fn eta_at(p: &NodeHeat, t: f64) -> Result<FormMatrix<C64>> {
    let (d, e) = p.heat(t)?;
    let bracket = d.left_mul_matrix(&p.number).try_sub(&d.right_mul_matrix(&p.number))?;
    let factor = sqrt_two_i_pi().inv() * (0.5 / t);
    Ok(bracket.super_mul(&e, &p.tau)?.supertrace(&p.tau)?.phi().scale(factor))
}

fn eta_degree(epsilon: Epsilon) -> usize {
    (epsilon.p_degree() + 3) % 4
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(DualityError::NonPositiveTime(t))
    }
}

/// Degree-`j` terms times `t^{(1−j)/2}`.
fn scale_by_degree(a: &FormMatrix<C64>, t: f64) -> FormMatrix<C64> {
    a.map_terms(|index, m| m * C64::new(t.powf((1.0 - index.degree() as f64) / 2.0), 0.0))
}

/// Sign flip on odd form degrees: `σ` moved past a form.
fn flip_odd(a: &FormMatrix<C64>) -> FormMatrix<C64> {
    a.map_terms(|i, m| if i.degree() % 2 == 1 { -m } else { m.clone() })
}

/// Largest entry of `m` at `(i, j)` with `keep(deg i, deg j)` false.
fn block_defect(m: &CMatrix, degrees: &[i64], keep: impl Fn(i64, i64) -> bool) -> f64 {
    let mut worst = 0.0f64;
    for (i, &a) in degrees.iter().enumerate() {
        for (j, &b) in degrees.iter().enumerate() {
            if !keep(a, b) {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests;
