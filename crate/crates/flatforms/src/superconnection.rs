//! Flat superconnections of total degree one on `Z`-graded bundles over grids.
//!
//! The underlying [`FlatBundle`] is stored in a frame where its connection is
//! `d`, so a superconnection is `A′ = d + α` for an `End(E)`-valued form field
//! `α`: the differential `v` in form degree 0 and the higher terms `A′_j`,
//! `j ≥ 2`, in form degree `j`. The metric adjoint is `A″ = d + ω + α*`, where
//! `ω = h⁻¹dh` and the degree-`j` part of `α*` is `(−1)^{j(j+1)/2} h⁻¹ α_j^† h`.
//!
//! With `f(z) = z e^{z²}` this module computes the odd forms `f(A′, h)`, the
//! even forms `f^∧(C′_t, h)` of the rescaled family `C′_t = t^{N/2} A′ t^{−N/2}`,
//! and the torsion form
//!
//! ```text
//! T_f = −∫₀^∞ [ f^∧(C′_t) − d(H) f′(0)/2 − (d(E) − d(H)) f′(i√t/2)/2 ] dt/t.
//! ```

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::discrete_calculus::{exterior_d, BaseGrid, GridError, GridField};
use crate::flat_bundle::{BundleError, FlatBundle, PeriodicHermitian};
use crate::grassmann::{AlgebraError, FormMatrix, Grading, MultiIndex, C64};
use crate::heat::{exp_neg_diagonal_body, exp_neg_with_eigen};
use crate::linalg::{block_diag, expm, inverse, max_abs, CMatrix, LinalgError, SelfAdjointEigen};
use crate::quadrature::{integrate_dt_over_t, QuadratureConfig, QuadratureError};

/// Relative size of an eigenvalue of `v*v + vv*` below which it counts as zero.
pub const KERNEL_CUTOFF: f64 = 1e-8;

/// Allowed `‖A′²‖∞`, relative to `1 + ‖α‖²`.
pub const FLATNESS_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SuperconnectionError {
    #[error("graded ranks sum to {graded}, bundle has rank {bundle}")]
    RankMismatch { graded: usize, bundle: usize },
    #[error("{what} mixes the graded pieces at node {node}")]
    NotBlockDiagonal { what: &'static str, node: usize },
    #[error("form-degree {degree} part of the superconnection does not shift the grading by {expected}")]
    WrongDegreeShift { degree: usize, expected: i64 },
    #[error("superconnection is not flat: ‖A′²‖ = {0:.3e}")]
    NotFlat(f64),
    #[error("rescaling needs t > 0, got {0}")]
    NonPositiveTime(f64),
    #[error("cohomology rank jumps at node {node} in degree {degree}")]
    RankJump { node: usize, degree: usize },
    #[error("form expected to be real of one parity has a defect {0:.3e}")]
    ParityViolated(f64),
    #[error("operation needs a base of positive dimension")]
    PointBase,
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

type Result<T> = std::result::Result<T, SuperconnectionError>;

/// A flat superconnection `d + α` of total degree one on `E = ⊕ Eⁱ`.
#[derive(Clone, Debug)]
pub struct GradedSuperconnection {
    ranks: Vec<usize>,
    bundle: FlatBundle,
    grading: Grading<C64>,
    alpha: GridField,
}

/// Numerical torsion form with its quadrature diagnostics.
#[derive(Clone, Debug)]
pub struct TorsionForm {
    /// Real even scalar form.
    pub form: GridField,
    pub error_estimate: f64,
    pub t_max: f64,
    pub evaluations: usize,
}

/// `H(E, v) ≅ ker(v*v + vv*)` as a graded subbundle.
#[derive(Clone, Debug)]
pub struct HodgeCohomology {
    pub ranks: Vec<usize>,
    /// `h`-orthogonal projector onto the kernel, an endomorphism field.
    pub projector: GridField,
    /// `h`-orthonormal kernel basis at the base node (columns).
    pub basis: CMatrix,
    /// Induced holonomy per axis in `basis`.
    pub holonomies: Vec<CMatrix>,
}

impl HodgeCohomology {
    pub fn d_number(&self) -> i64 {
        d_number(&self.ranks)
    }

    /// `max ‖[H_a, H_b]‖` over pairs of induced holonomies.
    pub fn flatness_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for (a, ha) in self.holonomies.iter().enumerate() {
            for hb in &self.holonomies[a + 1..] {
                worst = worst.max(max_abs(&(ha * hb - hb * ha)));
            }
        }
        worst
    }
}

/// `Σ (−1)^i i rk Eⁱ`.
pub fn d_number(ranks: &[usize]) -> i64 {
    ranks.iter().enumerate().map(|(i, &r)| if i % 2 == 0 { (i * r) as i64 } else { -((i * r) as i64) }).sum()
}

/// `f′(i√t/2) = e^{−t/4}(1 − t/2)`.
pub fn f_prime_imaginary(t: f64) -> f64 {
    (-t / 4.0).exp() * (1.0 - t / 2.0)
}

/// Per-node data reused across the `t`-family.
struct Prepared {
    omega: FormMatrix<C64>,
    /// `α″ − α − ω`.
    difference: FormMatrix<C64>,
    /// Decomposition of the body of `−(½ Y₀)²` with `Y₀ = v* − v`.
    eig: SelfAdjointEigen,
}

impl GradedSuperconnection {
    /// Validates the block structure, the degree shifts and flatness.
    pub fn new(bundle: FlatBundle, ranks: Vec<usize>, alpha: GridField) -> Result<Self> {
        let total: usize = ranks.iter().sum();
        if total != bundle.rank() {
            return Err(SuperconnectionError::RankMismatch { graded: total, bundle: bundle.rank() });
        }
        if alpha.grid() != bundle.grid() || alpha.dim() != total {
            return Err(GridError::Incompatible.into());
        }
        let degrees = degrees_of(&ranks);
        for node in 0..bundle.grid().node_count() {
            let h = bundle.metric().value(node).coefficient(MultiIndex::EMPTY);
            if shifted_defect(&h, &degrees, 0) > 1e-12 * (1.0 + max_abs(&h)) {
                return Err(SuperconnectionError::NotBlockDiagonal { what: "metric", node });
            }
            for (index, m) in alpha.value(node).terms() {
                let j = index.degree();
                let expected = 1 - j as i64;
                if j == 1 || shifted_defect(m, &degrees, expected) > 1e-12 * (1.0 + max_abs(m)) {
                    return Err(SuperconnectionError::WrongDegreeShift { degree: j, expected });
                }
            }
        }
        for u in bundle.holonomies() {
            if shifted_defect(u, &degrees, 0) > 1e-12 * (1.0 + max_abs(u)) {
                return Err(SuperconnectionError::NotBlockDiagonal { what: "holonomy", node: 0 });
            }
        }
        let grading = Grading::from_ranks(&ranks);
        let s = GradedSuperconnection { ranks, bundle, grading, alpha };
        let residual = s.curvature_of(&s.alpha)?.max_abs();
        let scale = 1.0 + s.alpha.max_abs().powi(2);
        if residual > FLATNESS_TOL * scale {
            return Err(SuperconnectionError::NotFlat(residual));
        }
        Ok(s)
    }

    /// `A′ = d + v` with `v` constant in the flat frame.
    pub fn flat_complex(bundle: FlatBundle, ranks: Vec<usize>, v: &CMatrix) -> Result<Self> {
        let grid = bundle.grid().clone();
        let n = grid.dim();
        let twists = bundle.endomorphism_twists()?;
        let alpha = GridField::from_fn(&grid, v.nrows(), twists, |_| FormMatrix::from_body(n, v.clone()))?;
        Self::new(bundle, ranks, alpha)
    }

    /// Complex `(E, v)` over a point with metric `h`.
    pub fn at_point(ranks: Vec<usize>, v: &CMatrix, h: &CMatrix) -> Result<Self> {
        let h = h.clone();
        let bundle = FlatBundle::new(&BaseGrid::point(), Vec::new(), move |_| h.clone())?;
        Self::flat_complex(bundle, ranks, v)
    }

    /// The flat connection alone, with the same grading and metric.
    pub fn connection_part(&self) -> Result<Self> {
        let alpha = self.alpha.map(|a| FormMatrix::zero(a.generators(), a.dim()));
        Ok(GradedSuperconnection { alpha, ..self.clone() })
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn bundle(&self) -> &FlatBundle {
        &self.bundle
    }

    pub fn grid(&self) -> &BaseGrid {
        self.bundle.grid()
    }

    pub fn grading(&self) -> &Grading<C64> {
        &self.grading
    }

    /// `α` with `A′ = d + α`.
    pub fn alpha(&self) -> &GridField {
        &self.alpha
    }

    /// The degree-0 part `v`.
    pub fn v(&self) -> GridField {
        self.alpha.degree_part(0)
    }

    /// `d(E) = Σ (−1)^i i rk Eⁱ`.
    pub fn d_number(&self) -> i64 {
        d_number(&self.ranks)
    }

    /// `d β + β²` for the superconnection `d + β` on this bundle.
    pub fn curvature_of(&self, beta: &GridField) -> Result<GridField> {
        let square = zip_nodes(beta, beta, |a, b| Ok(a.super_mul(b, &self.grading)?))?;
        match exterior_d(beta) {
            Ok(d) => Ok(d.try_add(&square)?),
            Err(GridError::PointBase) => Ok(square),
            Err(e) => Err(e.into()),
        }
    }

    /// `ω + β*` for the superconnection `d + β`: the metric adjoint is `d + ω + β*`.
    pub fn adjoint_of(&self, beta: &GridField) -> Result<GridField> {
        let omega = self.bundle.omega()?;
        let metric = self.bundle.metric();
        let values = (0..self.grid().node_count())
            .into_par_iter()
            .map(|node| {
                let h = metric.value(node).coefficient(MultiIndex::EMPTY);
                let hi = inverse(&h)?;
                let star = beta.value(node).map_terms(|index, m| {
                    let j = index.degree();
                    let sign = if (j * (j + 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
                    &hi * m.adjoint() * &h * C64::new(sign, 0.0)
                });
                Ok(omega.value(node) + &star)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GridField::from_values(self.grid(), beta.dim(), beta.twists().to_vec(), values)?)
    }

    /// `α″` with `A″ = d + α″`.
    pub fn adjoint(&self) -> Result<GridField> {
        self.adjoint_of(&self.alpha)
    }

    /// `X = ½(A″ − A′) = ½(α″ − α)`.
    pub fn x_form(&self) -> Result<GridField> {
        let adjoint = self.adjoint()?;
        Ok(adjoint.try_sub(&self.alpha)?.map(|x| x.scale(C64::new(0.5, 0.0))))
    }

    /// `C′_t = t^{N/2} A′ t^{−N/2}`: the form-degree-`j` part scaled by `t^{(1−j)/2}`.
    pub fn rescale(&self, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(SuperconnectionError::NonPositiveTime(t));
        }
        let alpha = self.alpha.map(|a| scale_by_degree(a, t));
        Ok(GradedSuperconnection { alpha, ..self.clone() })
    }

    /// `(2iπ)^{1/2} φ Tr_s[f(X)]`, checked to be real and odd.
    pub fn f_form(&self) -> Result<GridField> {
        let x = self.x_form()?;
        let metric = self.bundle.metric();
        let g = &self.grading;
        let values = (0..self.grid().node_count())
            .into_par_iter()
            .map(|node| {
                let h = metric.value(node).coefficient(MultiIndex::EMPTY);
                let fx = f_of_odd(x.value(node), &h, g)?;
                Ok(normalize_odd(&fx.supertrace(g)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let form = scalar_field(self.grid(), values)?;
        check_parity(&form, 1)?;
        Ok(form)
    }

    fn prepare(&self) -> Result<Vec<Prepared>> {
        let omega = self.bundle.omega()?;
        let adjoint = self.adjoint()?;
        let metric = self.bundle.metric();
        (0..self.grid().node_count())
            .into_par_iter()
            .map(|node| {
                let h = metric.value(node).coefficient(MultiIndex::EMPTY);
                let w = omega.value(node).clone();
                let difference = &(adjoint.value(node) - self.alpha.value(node)) - &w;
                let y0 = difference.coefficient(MultiIndex::EMPTY);
                let body = -(&y0 * &y0) * C64::new(0.25, 0.0);
                let mut eig = SelfAdjointEigen::new(&body, &h)?;
                snap_kernel(&mut eig.values);
                Ok(Prepared { omega: w, difference, eig })
            })
            .collect()
    }

    /// `φ Tr_s[(N/2) f′(D_t)]` with `f′(z) = e^{z²}(1 + 2z²)`, checked real and even.
    pub fn f_wedge(&self, t: f64) -> Result<GridField> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(SuperconnectionError::NonPositiveTime(t));
        }
        let prepared = self.prepare()?;
        let values = self.f_wedge_prepared(&prepared, t)?;
        let form = scalar_field(self.grid(), values)?;
        check_parity(&form, 0)?;
        Ok(form)
    }

    fn f_wedge_prepared(&self, prepared: &[Prepared], t: f64) -> Result<Vec<FormMatrix<C64>>> {
        let half_n = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.grading.dim(),
            degrees_of(&self.ranks).iter().map(|&d| C64::new(d as f64 / 2.0, 0.0)),
        ));
        prepared
            .par_iter()
            .map(|p| {
                // D_t = ½(ω + Σ_j t^{(1−j)/2} Y_j), worked out in the eigenbasis of the
                // body of −D_t², which is diag(tλ) exactly; roundoff in the kernel
                // directions would otherwise grow like t
                let d = (&p.omega + &scale_by_degree(&p.difference, t))
                    .scale(C64::new(0.5, 0.0))
                    .map_terms(|_, m| p.eig.to_eigenbasis(m));
                let g = Grading::new_unchecked(p.eig.to_eigenbasis(self.grading.tau()));
                let body: Vec<f64> = p.eig.values.iter().map(|l| t * l).collect();
                let mut d2 = d.super_mul(&d, &g)?;
                let diagonal = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    body.len(),
                    body.iter().map(|&l| C64::new(-l, 0.0)),
                ));
                d2.set_term(MultiIndex::EMPTY, diagonal)?;
                let soul = d2.filter_terms(|i| i.degree() > 0).scale(C64::new(-1.0, 0.0));
                let e = exp_neg_diagonal_body(&body, &soul, Some(&g));
                let fp = &e + &e.super_mul(&d2, &g)?.scale(C64::new(2.0, 0.0));
                Ok(fp.left_mul_matrix(&p.eig.to_eigenbasis(&half_n)).supertrace(&g)?.phi())
            })
            .collect()
    }

    /// Kernel of `v*v + vv*` at every node, its ranks and induced holonomy.
    pub fn hodge_cohomology(&self) -> Result<HodgeCohomology> {
        let v = self.v();
        let vstar = self.adjoint_of(&v)?.degree_part(0);
        let metric = self.bundle.metric();
        let degrees = degrees_of(&self.ranks);
        let top = self.ranks.len();
        let per_node = (0..self.grid().node_count())
            .into_par_iter()
            .map(|node| {
                let h = metric.value(node).coefficient(MultiIndex::EMPTY);
                let a = v.value(node).coefficient(MultiIndex::EMPTY);
                let b = vstar.value(node).coefficient(MultiIndex::EMPTY);
                let laplacian = &b * &a + &a * &b;
                let eig = SelfAdjointEigen::new(&laplacian, &h)?;
                let largest = eig.values.iter().fold(0.0f64, |m, l| m.max(l.abs()));
                let kernel: Vec<usize> =
                    (0..eig.values.len()).filter(|&k| eig.values[k].abs() <= KERNEL_CUTOFF * largest).collect();
                let basis = CMatrix::from_fn(h.nrows(), kernel.len(), |i, k| eig.vectors[(i, kernel[k])]);
                let projector = &basis * basis.adjoint() * &h;
                let mut ranks = vec![0usize; top];
                for (d, r) in ranks.iter_mut().enumerate() {
                    let trace: f64 = (0..degrees.len()).filter(|&i| degrees[i] as usize == d).map(|i| projector[(i, i)].re).sum();
                    *r = trace.round() as usize;
                }
                Ok((ranks, projector, basis))
            })
            .collect::<Result<Vec<_>>>()?;
        let ranks = per_node[0].0.clone();
        for (node, (r, _, _)) in per_node.iter().enumerate() {
            if let Some(degree) = (0..top).find(|&d| r[d] != ranks[d]) {
                return Err(SuperconnectionError::RankJump { node, degree });
            }
        }
        let n = self.grid().dim();
        let projector = GridField::from_values(
            self.grid(),
            self.grading.dim(),
            self.bundle.endomorphism_twists()?,
            per_node.iter().map(|(_, p, _)| FormMatrix::from_body(n, p.clone())).collect(),
        )?;
        let basis = per_node[0].2.clone();
        let h0 = metric.value(0).coefficient(MultiIndex::EMPTY);
        let holonomies = self.bundle.holonomies().iter().map(|u| basis.adjoint() * &h0 * u * &basis).collect();
        Ok(HodgeCohomology { ranks, projector, basis, holonomies })
    }

    /// `f(∇^H, h^H)`, from `X^H = ½ P ω P` on the kernel bundle.
    pub fn f_form_cohomology(&self) -> Result<GridField> {
        let hodge = self.hodge_cohomology()?;
        let omega = self.bundle.omega()?;
        let metric = self.bundle.metric();
        let g = &self.grading;
        let values = (0..self.grid().node_count())
            .into_par_iter()
            .map(|node| {
                let h = metric.value(node).coefficient(MultiIndex::EMPTY);
                let p = hodge.projector.value(node).coefficient(MultiIndex::EMPTY);
                let x = omega.value(node).left_mul_matrix(&p).right_mul_matrix(&p).scale(C64::new(0.5, 0.0));
                let fx = f_of_odd(&x, &h, g)?;
                Ok(normalize_odd(&fx.supertrace(g)?))
            })
            .collect::<Result<Vec<_>>>()?;
        let form = scalar_field(self.grid(), values)?;
        check_parity(&form, 1)?;
        Ok(form)
    }

    /// `T_f` by quadrature in `ln t`, with the counterterms subtracted.
    pub fn torsion_form(&self, config: &QuadratureConfig) -> Result<TorsionForm> {
        let prepared = self.prepare()?;
        let d_e = self.d_number() as f64;
        let d_h = self.hodge_cohomology()?.d_number() as f64;
        let n = self.grid().dim();
        let even: Vec<MultiIndex> =
            (0u16..(1 << n)).map(MultiIndex::from_mask).filter(|i| i.degree() % 2 == 0).collect();
        let mut failure: Option<SuperconnectionError> = None;
        let mut imaginary = 0.0f64;
        let result = integrate_dt_over_t(
            |t| {
                let values = match self.f_wedge_prepared(&prepared, t) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        return vec![0.0; prepared.len() * even.len()];
                    }
                };
                let counter = d_h / 2.0 + (d_e - d_h) * f_prime_imaginary(t) / 2.0;
                let mut out = Vec::with_capacity(values.len() * even.len());
                for v in &values {
                    for &i in &even {
                        let z = v.scalar(i);
                        imaginary = imaginary.max(z.im.abs());
                        out.push(if i.degree() == 0 { z.re - counter } else { z.re });
                    }
                }
                out
            },
            config,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        let result = result?;
        if imaginary > 1e-8 {
            return Err(SuperconnectionError::ParityViolated(imaginary));
        }
        let values = result
            .value
            .chunks(even.len())
            .map(|chunk| {
                let mut form = FormMatrix::zero(n, 1);
                for (&i, &x) in even.iter().zip(chunk) {
                    form.accumulate(i, DMatrix::from_element(1, 1, C64::new(-x, 0.0)));
                }
                form
            })
            .collect();
        Ok(TorsionForm {
            form: scalar_field(self.grid(), values)?,
            error_estimate: result.error_estimate,
            t_max: result.t_max,
            evaluations: result.evaluations,
        })
    }

    /// `‖dT_f − [f(∇^E, h^E) − f(∇^H, h^H)]‖∞`.
    pub fn transgression_residual(&self, config: &QuadratureConfig) -> Result<f64> {
        if self.grid().dim() == 0 {
            return Err(SuperconnectionError::PointBase);
        }
        let t = self.torsion_form(config)?;
        let lhs = exterior_d(&t.form)?;
        let rhs = self.connection_part()?.f_form()?.try_sub(&self.f_form_cohomology()?)?;
        Ok(lhs.try_sub(&rhs)?.max_abs())
    }

    /// `‖∂_t f(C′_t) − (1/t) d f^∧(C′_t)‖∞`, with a central difference of step `dt` in `t`.
    pub fn variation_residual(&self, t: f64, dt: f64) -> Result<f64> {
        if self.grid().dim() == 0 {
            return Err(SuperconnectionError::PointBase);
        }
        if !(dt > 0.0 && t - dt > 0.0) {
            return Err(SuperconnectionError::NonPositiveTime(t - dt));
        }
        let plus = self.rescale(t + dt)?.f_form()?;
        let minus = self.rescale(t - dt)?.f_form()?;
        let lhs = plus.try_sub(&minus)?.map_untwisted(|x| x.scale(C64::new(0.5 / dt, 0.0)));
        let rhs = exterior_d(&self.f_wedge(t)?)?.map_untwisted(|x| x.scale(C64::new(1.0 / t, 0.0)));
        Ok(lhs.try_sub(&rhs)?.max_abs())
    }
}

/// Sets eigenvalues below the kernel cutoff to exactly zero.
fn snap_kernel(values: &mut [f64]) {
    let largest = values.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    values.iter_mut().filter(|l| l.abs() <= KERNEL_CUTOFF * largest).for_each(|l| *l = 0.0);
}

/// `X e^{X²}` for odd `X` whose body is `h`-skew-adjoint.
fn f_of_odd(x: &FormMatrix<C64>, h: &CMatrix, g: &Grading<C64>) -> Result<FormMatrix<C64>> {
    let x2 = x.super_mul(x, g)?;
    let minus = x2.scale(C64::new(-1.0, 0.0));
    let body = minus.coefficient(MultiIndex::EMPTY);
    let e = match SelfAdjointEigen::new(&body, h) {
        Ok(eig) => exp_neg_with_eigen(&minus, &eig, Some(g)),
        Err(_) => minus.exp_neg_graded(g)?,
    };
    Ok(x.super_mul(&e, g)?)
}

/// `(2iπ)^{1/2} φ`: the degree-`k` part times `(2iπ)^{(1−k)/2}`.
fn normalize_odd(form: &FormMatrix<C64>) -> FormMatrix<C64> {
    form.phi().scale(crate::grassmann::sqrt_two_i_pi())
}

fn scale_by_degree(a: &FormMatrix<C64>, t: f64) -> FormMatrix<C64> {
    a.map_terms(|index, m| m * C64::new(t.powf((1.0 - index.degree() as f64) / 2.0), 0.0))
}

fn scalar_field(grid: &BaseGrid, values: Vec<FormMatrix<C64>>) -> Result<GridField> {
    Ok(GridField::from_values(grid, 1, vec![crate::discrete_calculus::Twist::trivial(1); grid.dim()], values)?)
}

/// Imaginary parts and parts of the wrong parity must vanish, relative to the form's size.
fn check_parity(form: &GridField, parity: usize) -> Result<()> {
    let wrong = form.map_untwisted(|x| x.filter_terms(|i| i.degree() % 2 != parity)).max_abs();
    let defect = wrong.max(form.max_imag());
    if defect > 1e-10 * (1.0 + form.max_abs()) {
        return Err(SuperconnectionError::ParityViolated(defect));
    }
    Ok(())
}

fn degrees_of(ranks: &[usize]) -> Vec<i64> {
    ranks.iter().enumerate().flat_map(|(i, &r)| std::iter::repeat_n(i as i64, r)).collect()
}

/// Largest entry of `m` outside the blocks `E^k → E^{k+shift}`.
fn shifted_defect(m: &CMatrix, degrees: &[i64], shift: i64) -> f64 {
    let mut worst = 0.0f64;
    for (i, &di) in degrees.iter().enumerate() {
        for (j, &dj) in degrees.iter().enumerate() {
            if di != dj + shift {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}

fn zip_nodes(
    a: &GridField,
    b: &GridField,
    f: impl Fn(&FormMatrix<C64>, &FormMatrix<C64>) -> Result<FormMatrix<C64>> + Sync,
) -> Result<GridField> {
    let values = (0..a.grid().node_count())
        .into_par_iter()
        .map(|node| f(a.value(node), b.value(node)))
        .collect::<Result<Vec<_>>>()?;
    Ok(GridField::from_values(a.grid(), a.dim(), a.twists().to_vec(), values)?)
}

/// Block-diagonal metric `|λ_a|^{−2x_a/L_a} ⊕ᵢ exp(Sᵢ(x))` for holonomies `λ_a I`.
fn scalar_holonomy_metric(
    ranks: &[usize],
    lambdas: &[f64],
    periods: &[f64],
    amplitude: f64,
    seed: u64,
) -> impl Fn(&[f64]) -> CMatrix + Sync + Send + 'static {
    let modes: Vec<PeriodicHermitian> = ranks
        .iter()
        .enumerate()
        .map(|(i, &r)| PeriodicHermitian::random(r, lambdas.len(), amplitude, seed.wrapping_add(i as u64)))
        .collect();
    let lambdas = lambdas.to_vec();
    let periods = periods.to_vec();
    move |x: &[f64]| {
        let blocks: Vec<CMatrix> = modes.iter().map(|m| expm(&m.at(x, &periods))).collect();
        let scale: f64 = lambdas.iter().zip(x).zip(&periods).map(|((l, xi), p)| l.abs().powf(-2.0 * xi / p)).product();
        block_diag(&blocks) * C64::new(scale, 0.0)
    }
}

/// `(E, v)` over `grid`, twisted by the real line bundle with holonomy `λ_a` per
/// axis, with a random periodic block metric.
pub fn twisted_complex(
    grid: &BaseGrid,
    ranks: Vec<usize>,
    v: &CMatrix,
    lambdas: &[f64],
    amplitude: f64,
    seed: u64,
) -> Result<GradedSuperconnection> {
    let n: usize = ranks.iter().sum();
    let holonomies = lambdas.iter().map(|&l| CMatrix::identity(n, n) * C64::new(l, 0.0)).collect();
    let metric = scalar_holonomy_metric(&ranks, lambdas, grid.periods(), amplitude, seed);
    let bundle = FlatBundle::new(grid, holonomies, metric)?;
    GradedSuperconnection::flat_complex(bundle, ranks, v)
}

/// `0 → C →^c C → 0` over a circle of period `2π` with `h = diag(e^{a sin σ}, 1)`.
pub fn two_term_metric_family(nodes: usize, c: f64, amplitude: f64) -> Result<GradedSuperconnection> {
    let grid = BaseGrid::circle(nodes, 2.0 * std::f64::consts::PI)?;
    let bundle = FlatBundle::new(&grid, vec![CMatrix::identity(2, 2)], move |x| {
        CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new((amplitude * x[0].sin()).exp(), 0.0),
            C64::new(1.0, 0.0),
        ]))
    })?;
    let v = CMatrix::from_fn(2, 2, |i, j| if (i, j) == (1, 0) { C64::new(c, 0.0) } else { C64::new(0.0, 0.0) });
    GradedSuperconnection::flat_complex(bundle, vec![1, 1], &v)
}

/// Random complex differential for the given ranks: `v² = 0`, built from a
/// random split form `Eⁱ = Bⁱ ⊕ Hⁱ ⊕ Cⁱ` (image of `v`, complement, coimage)
/// conjugated by random invertible blocks.
pub fn random_differential(rng: &mut impl Rng, ranks: &[usize]) -> CMatrix {
    differential_with_phases(rng, ranks, 1.0)
}

/// [`random_differential`] with real entries.
pub fn random_real_differential(rng: &mut impl Rng, ranks: &[usize]) -> CMatrix {
    differential_with_phases(rng, ranks, 0.0)
}

fn differential_with_phases(rng: &mut impl Rng, ranks: &[usize], imag: f64) -> CMatrix {
    let n: usize = ranks.iter().sum();
    let offsets: Vec<usize> = ranks.iter().scan(0, |acc, &r| {
        let o = *acc;
        *acc += r;
        Some(o)
    }).collect();
    let mut v = CMatrix::zeros(n, n);
    let mut incoming = 0;
    for i in 0..ranks.len().saturating_sub(1) {
        let room = ranks[i] - incoming;
        let image = rng.random_range(0..=room.min(ranks[i + 1]));
        // the last `image` basis vectors of Eⁱ map onto the first of E^{i+1}
        for k in 0..image {
            let z = C64::new(rng.random_range(0.5..2.0), imag * rng.random_range(-1.0..1.0));
            v[(offsets[i + 1] + k, offsets[i] + ranks[i] - image + k)] = z;
        }
        incoming = image;
    }
    let blocks: Vec<CMatrix> = ranks
        .iter()
        .map(|&r| {
            CMatrix::from_fn(r, r, |a, b| {
                let base = if a == b { C64::new(1.5, 0.0) } else { C64::new(0.0, 0.0) };
                base + C64::new(rng.random_range(-0.5..0.5), imag * rng.random_range(-0.5..0.5))
            })
        })
        .collect();
    let g = block_diag(&blocks);
    let gi = inverse(&g).expect("diagonally dominant");
    &g * v * gi
}

/// Random block-diagonal positive metric.
pub fn random_block_metric(rng: &mut impl Rng, ranks: &[usize]) -> CMatrix {
    let blocks: Vec<CMatrix> = ranks
        .iter()
        .map(|&r| {
            let a = CMatrix::from_fn(r, r, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            &a * a.adjoint() + CMatrix::identity(r, r) * C64::new(0.5, 0.0)
        })
        .collect();
    block_diag(&blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex_torsion::BasedComplex;
    use crate::flat_bundle::random_commuting_holonomies;
    use crate::linalg::from_rows;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_term(c: f64) -> GradedSuperconnection {
        let v = from_rows(2, 2, &[0.0, 0.0, c, 0.0]);
        GradedSuperconnection::at_point(vec![1, 1], &v, &CMatrix::identity(2, 2)).unwrap()
    }

    fn scalar0(f: &GridField, node: usize) -> C64 {
        f.value(node).scalar(MultiIndex::EMPTY)
    }

    #[test]
    fn adjoint_at_point_is_conjugate_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ranks = [2, 3, 1];
        let v = random_differential(&mut rng, &ranks);
        let s = GradedSuperconnection::at_point(ranks.to_vec(), &v, &CMatrix::identity(6, 6)).unwrap();
        let a = s.adjoint().unwrap();
        assert!(max_abs(&(a.value(0).coefficient(MultiIndex::EMPTY) - v.adjoint())) < 1e-15);
        let x = s.x_form().unwrap().value(0).coefficient(MultiIndex::EMPTY);
        assert!(max_abs(&(x - (v.adjoint() - &v) * C64::new(0.5, 0.0))) < 1e-15);
    }

    #[test]
    fn adjoint_is_an_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let grid = BaseGrid::torus(&[8, 8], &[1.0, 1.0]).unwrap();
        let ranks = vec![2, 2];
        let v = random_differential(&mut rng, &ranks);
        let s = twisted_complex(&grid, ranks, &v, &[1.5, 0.7], 0.3, 9).unwrap();
        let twice = s.adjoint_of(&s.adjoint().unwrap()).unwrap();
        assert!(twice.try_sub(s.alpha()).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn ungraded_f_form_is_the_odd_characteristic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let grid = BaseGrid::torus(&[6, 6], &[1.0, 2.0]).unwrap();
        let hol = random_commuting_holonomies(&mut rng, 3, 2, 0.4);
        let bundle = FlatBundle::with_default_metric(&grid, hol, 0.3, 5).unwrap();
        let c = bundle.c_total().unwrap();
        let n = grid.dim();
        let alpha = GridField::from_fn(&grid, 3, bundle.endomorphism_twists().unwrap(), |_| FormMatrix::zero(n, 3)).unwrap();
        let s = GradedSuperconnection::new(bundle, vec![3], alpha).unwrap();
        assert!(s.f_form().unwrap().try_sub(&c).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn f_form_at_point_by_functional_calculus() {
        // degree 0 only: (2iπ)^{1/2} Tr_s[X₀ e^{X₀²}], which vanishes by spectral symmetry
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ranks = [1, 2, 1];
        let v = random_differential(&mut rng, &ranks);
        let h = random_block_metric(&mut rng, &ranks);
        let s = GradedSuperconnection::at_point(ranks.to_vec(), &v, &h).unwrap();
        let f = s.f_form().unwrap();
        assert!(scalar0(&f, 0).norm() < 1e-12);
    }

    #[test]
    fn rescaling_composes_and_t_one_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ranks = [2, 2];
        let v = random_differential(&mut rng, &ranks);
        let s = GradedSuperconnection::at_point(ranks.to_vec(), &v, &CMatrix::identity(4, 4)).unwrap();
        assert_eq!(s.rescale(1.0).unwrap().alpha(), s.alpha());
        let ab = s.rescale(2.0).unwrap().rescale(3.0).unwrap();
        let direct = s.rescale(6.0).unwrap();
        assert!(ab.alpha().try_sub(direct.alpha()).unwrap().max_abs() < 1e-14);
        let root = s.alpha().map(|a| a.scale(C64::new(6f64.sqrt(), 0.0)));
        assert!(direct.alpha().try_sub(&root).unwrap().max_abs() < 1e-14);
        assert!(matches!(s.rescale(0.0), Err(SuperconnectionError::NonPositiveTime(_))));
    }

    #[test]
    fn non_flat_data_is_rejected() {
        // v² ≠ 0 is impossible with a degree-raising v on two pieces, so use three
        let v = from_rows(3, 3, &[0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let r = GradedSuperconnection::at_point(vec![1, 1, 1], &v, &CMatrix::identity(3, 3));
        assert!(matches!(r, Err(SuperconnectionError::NotFlat(_))));
        let lowering = from_rows(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let r = GradedSuperconnection::at_point(vec![1, 1], &lowering, &CMatrix::identity(2, 2));
        assert!(matches!(r, Err(SuperconnectionError::WrongDegreeShift { .. })));
    }

    #[test]
    fn hodge_cohomology_ranks() {
        let zero = GradedSuperconnection::at_point(vec![2, 1], &CMatrix::zeros(3, 3), &CMatrix::identity(3, 3)).unwrap();
        assert_eq!(zero.hodge_cohomology().unwrap().ranks, vec![2, 1]);
        assert_eq!(two_term(2.0).hodge_cohomology().unwrap().ranks, vec![0, 0]);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ranks = [2, 3, 2];
        let v = random_differential(&mut rng, &ranks);
        let s = GradedSuperconnection::at_point(ranks.to_vec(), &v, &random_block_metric(&mut rng, &ranks)).unwrap();
        let h = s.hodge_cohomology().unwrap();
        let real = to_real_complex(&ranks, &v);
        let expected: Vec<usize> = real.iter().map(|&r| r).collect();
        assert_eq!(h.ranks, expected);
    }

    /// Field ranks of `(E, v)` from complex matrix ranks.
    fn to_real_complex(ranks: &[usize], v: &CMatrix) -> Vec<usize> {
        let offsets: Vec<usize> = ranks.iter().scan(0, |a, &r| { let o = *a; *a += r; Some(o) }).collect();
        let rank_of = |i: usize| -> usize {
            if i + 1 >= ranks.len() { return 0; }
            let block = v.view((offsets[i + 1], offsets[i]), (ranks[i + 1], ranks[i])).into_owned();
            crate::linalg::rank(&block, 1e-10)
        };
        (0..ranks.len()).map(|i| ranks[i] - rank_of(i) - if i > 0 { rank_of(i - 1) } else { 0 }).collect()
    }

    #[test]
    fn circle_family_cohomology_is_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let grid = BaseGrid::torus(&[6, 6], &[1.0, 1.0]).unwrap();
        let ranks = vec![2, 3, 2];
        let v = random_differential(&mut rng, &ranks);
        let s = twisted_complex(&grid, ranks, &v, &[2.0, 0.5], 0.2, 3).unwrap();
        let h = s.hodge_cohomology().unwrap();
        assert!(h.flatness_residual() < 1e-10);
    }

    #[test]
    fn torsion_form_of_two_term_complex() {
        let cfg = QuadratureConfig::default();
        for c in [2.0f64, 3.0, 5.0] {
            let t = two_term(c).torsion_form(&cfg).unwrap();
            let value = scalar0(&t.form, 0).re;
            assert!((value + c.ln()).abs() < 1e-6, "c = {c}: {value}");
        }
        let isometric = two_term(1.0).torsion_form(&cfg).unwrap();
        assert!(scalar0(&isometric.form, 0).re.abs() < 1e-7);
        let zero = GradedSuperconnection::at_point(vec![1, 1], &CMatrix::zeros(2, 2), &CMatrix::identity(2, 2)).unwrap();
        assert!(scalar0(&zero.torsion_form(&cfg).unwrap().form, 0).re.abs() < 1e-12);
    }

    #[test]
    fn torsion_form_is_minus_reidemeister_torsion_at_a_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cfg = QuadratureConfig::default();
        for _ in 0..4 {
            let ranks = [1, 2, 2, 1];
            let v = random_real_differential(&mut rng, &ranks);
            let s = GradedSuperconnection::at_point(ranks.to_vec(), &v, &CMatrix::identity(6, 6)).unwrap();
            let tf = scalar0(&s.torsion_form(&cfg).unwrap().form, 0).re;
            let offsets = [0, 1, 3, 5];
            let diffs = (0..3)
                .map(|i| v.view((offsets[i + 1], offsets[i]), (ranks[i + 1], ranks[i])).map(|z| z.re))
                .collect();
            let t = BasedComplex::new(ranks.to_vec(), diffs).unwrap().torsion_l2();
            assert!((tf + t).abs() < 1e-6 * (1.0 + t.abs()), "{tf} vs {t}");
        }
    }

    #[test]
    fn f_wedge_limits() {
        let s = two_term(2.0);
        // small t: d(E)/2 = −1/2
        let small = scalar0(&s.f_wedge(1e-6).unwrap(), 0).re;
        assert!((small + 0.5).abs() < 1e-5);
        // large t on an acyclic complex: d(H)/2 = 0
        let large = scalar0(&s.f_wedge(200.0).unwrap(), 0).re;
        assert!(large.abs() < 1e-10);
    }

    #[test]
    fn transgression_on_metric_family() {
        let cfg = QuadratureConfig::default();
        let coarse = two_term_metric_family(32, 2.0, 0.3).unwrap().transgression_residual(&cfg).unwrap();
        let fine = two_term_metric_family(64, 2.0, 0.3).unwrap().transgression_residual(&cfg).unwrap();
        assert!(coarse < 1e-2, "{coarse}");
        let ratio = coarse / fine;
        assert!((3.0..5.0).contains(&ratio), "{coarse} / {fine}");
    }

    #[test]
    fn variation_formula_on_metric_family() {
        let s = two_term_metric_family(64, 2.0, 0.3).unwrap();
        for t in [0.5, 1.0, 2.0] {
            let r = s.variation_residual(t, 1e-4).unwrap();
            assert!(r < 1e-3, "t = {t}: {r}");
        }
    }

    #[test]
    fn higher_terms_on_a_torus() {
        let grid = BaseGrid::torus(&[6, 6], &[1.0, 1.0]).unwrap();
        let mut v = CMatrix::zeros(4, 4);
        v[(2, 0)] = C64::new(1.3, 0.4);
        let base = twisted_complex(&grid, vec![2, 2], &v, &[1.5, 0.8], 0.3, 4).unwrap();
        // a 2-form term E¹ → E⁰ anticommuting with v
        let mut m = CMatrix::zeros(4, 4);
        m[(1, 3)] = C64::new(0.7, -0.5);
        let top = MultiIndex::from_mask(3);
        let alpha = base.alpha().map(|a| {
            let mut b = a.clone();
            b.accumulate(top, m.clone());
            b
        });
        let s = GradedSuperconnection::new(base.bundle().clone(), vec![2, 2], alpha).unwrap();
        let twice = s.adjoint_of(&s.adjoint().unwrap()).unwrap();
        assert!(twice.try_sub(s.alpha()).unwrap().max_abs() < 1e-13);
        s.f_wedge(1.0).unwrap();
        let t = s.torsion_form(&QuadratureConfig::default()).unwrap();
        assert!(t.form.max_imag() < 1e-12);
        // a 1-form term would change the connection and is rejected
        let bad = base.alpha().map(|a| {
            let mut b = a.clone();
            b.accumulate(MultiIndex::single(0), CMatrix::identity(4, 4));
            b
        });
        let r = GradedSuperconnection::new(base.bundle().clone(), vec![2, 2], bad);
        assert!(matches!(r, Err(SuperconnectionError::WrongDegreeShift { degree: 1, .. })));
    }
}
