//! Named verification suites, one per library module. Each uses the spec's
//! instance where the spec has the relevant section and seeded random
//! instances otherwise.

use std::f64::consts::PI;

use flatforms::complex_torsion::snf::{random_unimodular, zmatrix, zmul, zzeros};
use flatforms::complex_torsion::{library, random_exact_triple, BasedComplex, HomologyVolumes, IntComplex, SmithForm};
use flatforms::discrete_calculus::{exterior_d, integrate_cycle, BaseGrid, GridField, Twist};
use flatforms::duality::{
    elliptic_block, hyperbolic_block, random_duality_bundle, random_duality_complex, random_symplectic,
    symplectic_normal_form, symplectic_sum, ComplexShape, DualityComplex, Epsilon,
};
use flatforms::flat_bundle::{cycle_pairing, random_commuting_holonomies, FlatBundle};
use flatforms::grassmann::{FormMatrix, Grading, MultiIndex, C64};
use flatforms::linalg::{expm, CMatrix};
use flatforms::quadrature::{log_log_slope, log_space};
use flatforms::superconnection::{random_real_differential, two_term_metric_family, GradedSuperconnection};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::commands::{self, grid_tolerance, IDENTITY_TOL, PARITY_TOL};
use crate::error::{CliError, Context};
use crate::instance;
use crate::report::Findings;
use crate::spec::InstanceSpec;

pub const SUITES: &[&str] =
    &["grassmann", "discrete-calculus", "flat-bundle", "complex-torsion", "prop12", "superconnection", "duality"];

pub fn run(suite: &str, spec: &InstanceSpec, f: &mut Findings) -> Result<(), CliError> {
    let mut rng = instance::rng(spec);
    match suite {
        "grassmann" => grassmann(&mut rng, f),
        "discrete-calculus" => discrete_calculus(spec, f),
        "flat-bundle" => flat_bundle(spec, &mut rng, f),
        "complex-torsion" => complex_torsion(spec, &mut rng, f),
        "prop12" => euler_pushforward(spec, f),
        "superconnection" => superconnection(spec, &mut rng, f),
        "duality" => duality(spec, &mut rng, f),
        other => Err(CliError::Usage(format!("unknown suite {other:?}; known suites: {}", SUITES.join(", ")))),
    }
}

// ---- grassmann ----

type Q = BigRational;

fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

fn random_rational(rng: &mut ChaCha8Rng) -> Q {
    q(rng.random_range(-4..=4), rng.random_range(1..=4))
}

/// Random form with every term present; `degrees` restricts the terms kept.
fn rational_form(rng: &mut ChaCha8Rng, gens: usize, dim: usize, keep: impl Fn(usize) -> bool) -> FormMatrix<Q> {
    let mut out = FormMatrix::zero(gens, dim);
    for mask in 0..(1u16 << gens) {
        let index = MultiIndex::from_mask(mask);
        let m = DMatrix::from_fn(dim, dim, |_, _| random_rational(rng));
        if keep(index.degree()) {
            out.accumulate(index, m);
        }
    }
    out
}

fn is_zero(a: &FormMatrix<Q>) -> bool {
    a.terms().all(|(_, m)| m.iter().all(Zero::is_zero))
}

fn grassmann(rng: &mut ChaCha8Rng, f: &mut Findings) -> Result<(), CliError> {
    let (gens, dim) = (3, 2);
    let tau = DMatrix::from_diagonal(&nalgebra::dvector![q(1, 1), q(-1, 1)]);
    let g = Grading::exact(tau).context("grading is an involution")?;
    let trials = 100;
    let (mut assoc, mut sign, mut str_zero, mut transpose) = (true, true, true, true);
    for _ in 0..trials {
        let a = rational_form(rng, gens, dim, |_| true);
        let b = rational_form(rng, gens, dim, |_| true);
        let c = rational_form(rng, gens, dim, |_| true);
        let left = a.super_mul(&b, &g).and_then(|ab| ab.super_mul(&c, &g)).context("shapes agree")?;
        let right = b.super_mul(&c, &g).and_then(|bc| a.super_mul(&bc, &g)).context("shapes agree")?;
        assoc &= is_zero(&left.try_sub(&right).context("shapes agree")?);

        let (p, r) = (rng.random_range(0..=gens), rng.random_range(0..=gens));
        let x = rational_form(rng, gens, 1, |k| k == p);
        let y = rational_form(rng, gens, 1, |k| k == r);
        let xy = x.wedge_mul(&y).context("shapes agree")?;
        let yx = y.wedge_mul(&x).context("shapes agree")?;
        let yx = if p * r % 2 == 1 { yx.scale(q(-1, 1)) } else { yx };
        sign &= is_zero(&xy.try_sub(&yx).context("shapes agree")?);

        let bracket = a.supercommutator(&b, &g).context("shapes agree")?;
        str_zero &= is_zero(&bracket.supertrace(&g).context("grading matches")?);
        transpose &= is_zero(&a.transpose().transpose().try_sub(&a).context("shapes agree")?);
    }
    f.integer("rational_trials", trials);
    f.check("graded_product.associative", assoc);
    f.check("wedge.graded_sign_rule", sign);
    f.check("supertrace_of_supercommutator.zero", str_zero);
    f.check("transpose.involution", transpose);

    let mut worst = 0.0f64;
    for _ in 0..50 {
        let mut a = FormMatrix::<C64>::zero(gens, dim);
        for mask in 0..(1u16 << gens) {
            let index = MultiIndex::from_mask(mask);
            if index.degree() % 2 == 0 {
                a.accumulate(index, DMatrix::from_fn(dim, dim, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))));
            }
        }
        let body = a.coefficient(MultiIndex::EMPTY);
        let norm = body.norm();
        let target = rng.random_range(0.0..4.0);
        let a = a.map_terms(|i, m| if i.degree() == 0 { m * C64::new(target / norm, 0.0) } else { m.clone() });
        let product = a.exp_neg().and_then(|e| e.wedge_mul(&a.scale(C64::new(-1.0, 0.0)).exp_neg()?)).context("exponential is finite")?;
        worst = worst.max((&product - &FormMatrix::identity(gens, dim)).max_abs());
    }
    f.residual("exp_neg.inverse_pair", worst, 1e-12);
    Ok(())
}

// ---- discrete calculus ----

/// `F(x) = e^{(x₀/L₀)Ξ} M(x) e^{−(x₀/L₀)Ξ}` with `M` periodic: a field twisted by
/// conjugation with `U = e^Ξ` along axis 0.
fn twisted_sample(x: &[f64], periods: &[f64]) -> CMatrix {
    let xi = CMatrix::from_row_slice(2, 2, &[C64::new(0.3, 0.0), C64::new(0.5, 0.0), C64::new(0.0, 0.0), C64::new(-0.2, 0.0)]);
    let (s, c) = (2.0 * PI * x[0] / periods[0], 2.0 * PI * x[1] / periods[1]);
    let m = CMatrix::from_row_slice(
        2,
        2,
        &[C64::new(s.sin(), 0.0), C64::new(c.cos(), 0.0), C64::new((s + c).sin(), 0.0), C64::new(1.0, 0.0)],
    );
    let g = expm(&(&xi * C64::new(x[0] / periods[0], 0.0)));
    let gi = expm(&(&xi * C64::new(-x[0] / periods[0], 0.0)));
    g * m * gi
}

fn discrete_calculus(spec: &InstanceSpec, f: &mut Findings) -> Result<(), CliError> {
    let n = spec.base.as_ref().and_then(|b| b.resolution.first().copied()).unwrap_or(16).max(8);
    let periods = [2.0 * PI, 3.0];
    let smooth = |x: &[f64]| (2.0 * PI * x[0] / periods[0]).sin() * (2.0 * PI * x[1] / periods[1]).cos() + (2.0 * PI * x[1] / periods[1]).sin();
    let xi = CMatrix::from_row_slice(2, 2, &[C64::new(0.3, 0.0), C64::new(0.5, 0.0), C64::new(0.0, 0.0), C64::new(-0.2, 0.0)]);
    let mut previous: Option<(f64, f64, f64)> = None;
    for nodes in [n, 2 * n] {
        let grid = BaseGrid::torus(&[nodes, nodes], &periods).context("grid is valid")?;
        let scalar = GridField::untwisted(&grid, 1, |x| FormMatrix::from_body(2, DMatrix::from_element(1, 1, C64::new(smooth(x), 0.0))))
            .context("field is valid")?;
        let d1 = exterior_d(&scalar).context("field lives on a grid")?;
        let d2 = exterior_d(&d1).context("field lives on a grid")?.max_abs();
        let exact = integrate_cycle(&d1, &[0]).context("form pairs with cycles")?.norm();

        let twist = Twist::conjugation(&expm(&xi)).context("twist is invertible")?;
        let twisted = GridField::from_fn(&grid, 2, vec![twist, Twist::trivial(2)], |x| FormMatrix::from_body(2, twisted_sample(x, &periods)))
            .context("field is valid")?;
        let d = exterior_d(&twisted).context("field lives on a grid")?;
        // analytic derivative by a fine central difference of the formula
        let mut equivariance = 0.0f64;
        let eps = 1e-5;
        for node in 0..grid.node_count() {
            let x = grid.coords(node);
            for axis in 0..2 {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[axis] += eps;
                xm[axis] -= eps;
                let exact = (twisted_sample(&xp, &periods) - twisted_sample(&xm, &periods)) / C64::new(2.0 * eps, 0.0);
                let got = d.value(node).coefficient(MultiIndex::single(axis));
                equivariance = equivariance.max(flatforms::linalg::max_abs(&(got - exact)));
            }
        }
        let tol = grid_tolerance(&grid);
        f.residual(format!("d_squared[{nodes}]"), d2, tol);
        f.residual(format!("exact_form_period[{nodes}]"), exact, tol);
        f.residual(format!("twisted_derivative[{nodes}]"), equivariance, tol);
        if let Some((_, _, coarse)) = previous {
            f.scalar("twisted_derivative.refinement_ratio", coarse / equivariance);
            f.residual("twisted_derivative.order_defect", (4.0 - coarse / equivariance).max(0.0), 1.0);
        }
        previous = Some((d2, exact, equivariance));
    }
    Ok(())
}

// ---- flat bundles ----

fn flat_bundle(spec: &InstanceSpec, rng: &mut ChaCha8Rng, f: &mut Findings) -> Result<(), CliError> {
    let grid = match &spec.base {
        Some(b) if b.resolution.len() == 2 => instance::grid(spec)?,
        _ => BaseGrid::torus(&[16, 16], &[1.0, 1.0]).context("grid is valid")?,
    };
    let holonomies = match (&spec.bundle, spec.base.as_ref().map(|b| b.resolution.len())) {
        (Some(_), Some(2)) => instance::bundle(spec, &grid)?.holonomies().to_vec(),
        _ => random_commuting_holonomies(rng, 2, 2, 0.5),
    };
    let seed = spec.seed.unwrap_or(0);
    let e = FlatBundle::with_default_metric(&grid, holonomies.clone(), 0.3, seed).context("bundle is valid")?;
    let e2 = FlatBundle::with_default_metric(&grid, holonomies, 0.3, seed.wrapping_add(1)).context("bundle is valid")?;
    let other = FlatBundle::with_default_metric(&grid, random_commuting_holonomies(rng, 1, 2, 0.5), 0.2, seed.wrapping_add(2))
        .context("bundle is valid")?;
    let tol = grid_tolerance(&grid);

    let c1 = e.c_k(1).context("odd forms exist")?;
    f.residual("c1.closed", exterior_d(&c1).context("grid")?.max_abs(), tol);
    let c1b = e2.c_k(1).context("odd forms exist")?;
    for axis in 0..2 {
        let a = cycle_pairing(&c1, &[axis]).context("pairing")?;
        let b = cycle_pairing(&c1b, &[axis]).context("pairing")?;
        f.scalar(format!("c1[{axis}]"), a);
        f.residual(format!("c1[{axis}].metric_independence"), a - b, tol);
    }
    let sum = e.direct_sum(&other).context("bundles share a grid")?;
    let additivity = sum
        .c_total()
        .context("odd forms exist")?
        .try_sub(&e.c_total().context("odd forms exist")?.try_add(&other.c_total().context("odd forms exist")?).context("grid")?)
        .context("grid")?
        .max_abs();
    f.residual("c.direct_sum_additivity", additivity, 1e-12);
    Ok(())
}

// ---- complex torsion ----

fn euler_pushforward(spec: &InstanceSpec, f: &mut Findings) -> Result<(), CliError> {
    if spec.local_system.is_some() {
        let (cw, volumes) = instance::local_system(spec)?;
        return commands::euler_pushforward(f, &cw, &volumes);
    }
    let instances = library();
    f.integer("instances", instances.len() as i64);
    for cw in &instances {
        for volumes in [HomologyVolumes::Integral, HomologyVolumes::L2] {
            commands::euler_pushforward(f, cw, &volumes)?;
        }
    }
    Ok(())
}

/// Exact over `Z`: ranks `a, a+b, b+c, c` with unimodular pieces.
fn random_acyclic(rng: &mut ChaCha8Rng) -> IntComplex {
    let (a, b, c) = (rng.random_range(0..3), rng.random_range(0..3), rng.random_range(0..3));
    let ranks = vec![a, a + b, b + c, c];
    let pieces = [a, b, c];
    let gs: Vec<_> = ranks.iter().map(|&n| random_unimodular(rng, n, 3 * n)).collect();
    let diffs = (0..3)
        .map(|p| {
            // the last pieces[p] coordinates of Cᵖ map onto the first of C^{p+1}
            let mut d = zzeros(ranks[p + 1], ranks[p]);
            for k in 0..pieces[p] {
                d[(k, ranks[p] - pieces[p] + k)] = BigInt::from(if rng.random_bool(0.5) { 1 } else { -1 });
            }
            zmul(&zmul(&gs[p + 1].0, &d), &gs[p].1)
        })
        .collect();
    IntComplex::new(ranks, diffs).expect("exact by construction")
}

fn complex_torsion(spec: &InstanceSpec, rng: &mut ChaCha8Rng, f: &mut Findings) -> Result<(), CliError> {
    euler_pushforward(spec, f)?;

    let mut snf_ok = true;
    for _ in 0..20 {
        let (r, c) = (rng.random_range(1..5), rng.random_range(1..5));
        let data: Vec<i64> = (0..r * c).map(|_| rng.random_range(-5..=5)).collect();
        let a = zmatrix(r, c, &data);
        let (left, _) = random_unimodular(rng, r, 3 * r);
        let (right, _) = random_unimodular(rng, c, 3 * c);
        let (s, t) = (SmithForm::new(&a), SmithForm::new(&zmul(&zmul(&left, &a), &right)));
        snf_ok &= s.rank() == t.rank() && s.torsion_order() == t.torsion_order();
    }
    f.check("smith_form.unimodular_invariance", snf_ok);

    let (mut class_r, mut class_z) = (0.0f64, true);
    let mut basis_change = 0.0f64;
    for _ in 0..20 {
        let c = random_acyclic(rng);
        let vols: Vec<f64> = c.ranks().iter().map(|&n| if n == 0 { 1.0 } else { rng.random_range(0.2..5.0) }).collect();
        let r = c.acyclic_class_residual(&vols).context("complex is exact over Z")?;
        class_r = class_r.max(r.r.abs());
        class_z &= r.z == 0;

        // special-linear change of coordinates keeps every covolume
        let real = c.to_real();
        let gs: Vec<DMatrix<f64>> = real.ranks().iter().map(|&n| special_linear(rng, n)).collect();
        let diffs = (0..real.len() - 1)
            .map(|p| &gs[p + 1] * &real.differentials()[p] * gs[p].clone().try_inverse().expect("det 1"))
            .collect();
        let changed = BasedComplex::new(real.ranks().to_vec(), diffs).context("d² = 0")?;
        basis_change = basis_change.max((changed.torsion_l2() - real.torsion_l2()).abs());
    }
    f.residual("acyclic_class.r", class_r, IDENTITY_TOL);
    f.check("acyclic_class.z", class_z);
    f.residual("torsion.special_linear_invariance", basis_change, IDENTITY_TOL);

    let mut milnor = 0.0f64;
    for _ in 0..10 {
        milnor = milnor.max(random_exact_triple(rng).residual().context("triple is exact")?.abs());
    }
    f.residual("milnor_additivity", milnor, IDENTITY_TOL);
    Ok(())
}

fn special_linear(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let mut g: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)) + DMatrix::identity(n, n) * 2.0;
    g *= g.determinant().abs().powf(-1.0 / n as f64);
    if g.determinant() < 0.0 {
        g.row_mut(0).neg_mut();
    }
    g
}

// ---- superconnection ----

fn superconnection(spec: &InstanceSpec, rng: &mut ChaCha8Rng, f: &mut Findings) -> Result<(), CliError> {
    let cfg = instance::quadrature(spec);
    let ranks = [1usize, 2, 2, 1];
    let offsets = [0usize, 1, 3, 5];
    let mut ratios = Vec::new();
    while ratios.len() < 10 {
        let v = random_real_differential(rng, &ranks);
        let diffs = (0..3).map(|i| v.view((offsets[i + 1], offsets[i]), (ranks[i + 1], ranks[i])).map(|z| z.re)).collect();
        let c = BasedComplex::new(ranks.to_vec(), diffs).context("d² = 0")?;
        if c.cohomology_field().iter().any(|h| h.rank > 0) {
            continue;
        }
        let s = GradedSuperconnection::at_point(ranks.to_vec(), &v, &CMatrix::identity(6, 6)).context("flat")?;
        let tf = s.torsion_form(&cfg).context("integral converges")?.form.value(0).scalar(MultiIndex::EMPTY).re;
        ratios.push(tf / c.torsion_l2());
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let spread = ratios.iter().map(|r| ((r - mean) / mean).abs()).fold(0.0, f64::max);
    f.scalar("torsion_form_over_reidemeister", mean);
    f.residual("torsion_form_over_reidemeister.spread", spread, 1e-5);

    let family = if spec.complex.is_some() && spec.bundle.is_some() {
        instance::superconnection(spec)?
    } else {
        two_term_metric_family(32, 2.0, 0.3).context("family is flat")?
    };
    let tol = grid_tolerance(family.grid());
    let odd = family.f_form().context("odd form exists")?;
    f.residual("f_form.imaginary", odd.max_imag(), PARITY_TOL);
    if family.grid().dim() > 1 {
        f.residual("f_form.closed", exterior_d(&odd).context("grid")?.max_abs(), tol);
    }
    let residual = family.transgression_residual(&cfg).context("cohomology has constant rank")?;
    f.residual("torsion_form.transgression", residual, tol + cfg.tolerance);

    // large t: the rescaled odd form approaches that of the cohomology
    let limit = family.f_form_cohomology().context("cohomology has constant rank")?;
    let ts = log_space(1e2, 1e4, 5);
    let gaps: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let ft = family.rescale(t)?.f_form()?;
            Ok::<f64, flatforms::superconnection::SuperconnectionError>(ft.try_sub(&limit)?.max_abs())
        })
        .collect::<Result<_, _>>()
        .context("rescaled forms exist")?;
    if gaps.iter().all(|g| *g > 1e-14) {
        let slope = log_log_slope(&ts, &gaps).unwrap_or(f64::NAN);
        f.scalar("f_form.large_t_slope", slope);
        f.residual("f_form.large_t_slope_excess", (slope + 0.4).max(0.0), 0.0);
    } else {
        f.scalar("f_form.large_t_gap", gaps.iter().copied().fold(0.0, f64::max));
    }
    Ok(())
}

// ---- duality ----

fn duality(spec: &InstanceSpec, rng: &mut ChaCha8Rng, f: &mut Findings) -> Result<(), CliError> {
    let circle = BaseGrid::circle(16, 1.0).context("grid is valid")?;
    let bundle_complex = if spec.duality.is_some() {
        instance::duality_complex(spec)?
    } else {
        let family = random_duality_bundle(rng, Epsilon::Minus, 4, 1, 0.3).context("J family")?;
        DualityComplex::ungraded(family.bundle(&circle).context("bundle is valid")?).context("complex is valid")?
    };
    let bundle = bundle_complex.bundle();
    let residue = bundle.epsilon().p_degree();
    let p = bundle.p_form().context("p-form exists")?;
    let eigen = bundle.p_form_from_eigenbundles().context("J has eigenbundles")?;
    f.residual("p.minus_eigenbundle_formula", p.try_sub(&eigen).context("grid")?.max_abs(), IDENTITY_TOL);
    let off = (0..=p.grid().dim()).filter(|k| k % 4 != residue).map(|k| p.degree_part(k).max_abs());
    f.residual("p.parity", off.fold(p.max_imag(), f64::max), PARITY_TOL);

    let shape = |epsilon, top, coh, acy, gap| ComplexShape {
        epsilon,
        top_degree: top,
        cohomology_pieces: coh,
        acyclic_pieces: acy,
        gap,
    };
    let family = random_duality_complex(rng, shape(Epsilon::Minus, 2, 1, 2, 1.0), 1, 0.3).context("J family")?;
    let complex = family.complex(&circle).context("complex is valid")?;
    let at_point = random_duality_complex(rng, shape(Epsilon::Minus, 2, 1, 2, 1.0), 0, 0.0)
        .and_then(|fam| fam.complex(&BaseGrid::point()))
        .and_then(|c| c.flat_pair_residual())
        .context("rescaled pair")?;
    f.residual("flat_pair.point", at_point, IDENTITY_TOL);
    let coarse = complex.flat_pair_residual().context("rescaled pair")?;
    let fine = family
        .complex(&BaseGrid::circle(32, 1.0).context("grid")?)
        .and_then(|c| c.flat_pair_residual())
        .context("rescaled pair")?;
    commands::refinement(f, "flat_pair", coarse, fine);
    let ps = complex.p_super().context("p-form exists")?;
    let off = (0..=1).filter(|k| k % 4 != residue).map(|k| ps.degree_part(k).max_abs());
    f.residual("p_super.parity", off.fold(ps.max_imag(), f64::max), PARITY_TOL);

    // McKean-Singer at a point
    let family = random_duality_complex(rng, shape(Epsilon::Plus, 2, 3, 3, 1.0), 0, 0.0).context("J family")?;
    let point = family.complex(&BaseGrid::point()).context("complex is valid")?;
    let induced = point.induced_duality().context("cohomology has a duality")?;
    let trace_h = induced.complex.bundle().j_at(0).trace();
    let mut drift = 0.0f64;
    for t in log_space(1e-2, 1e2, 10) {
        drift = drift.max((point.heat_trace(t, 0).context("heat trace")? - trace_h).norm());
    }
    f.scalar("heat_trace", trace_h.re);
    f.residual("heat_trace.t_dependence", drift, 1e-8);

    // eta integrand: fast decay at large t, bounded at small t
    let family = random_duality_complex(rng, shape(Epsilon::Minus, 2, 0, 3, 0.2), 1, 0.5).context("J family")?;
    let acyclic = family.complex(&BaseGrid::circle(12, 1.0).context("grid")?).context("complex is valid")?;
    let sup = |t: f64| acyclic.eta_integrand(t).map(|x| x.max_abs());
    let ts = log_space(1e2, 1e4, 9);
    let ys: Vec<f64> = ts.iter().map(|&t| sup(t)).collect::<Result<_, _>>().context("eta integrand")?;
    let slope = log_log_slope(&ts, &ys).unwrap_or(f64::NAN);
    f.scalar("eta_integrand.large_t_slope", slope);
    f.residual("eta_integrand.large_t_slope_excess", (slope + 1.4).max(0.0), 0.0);
    let reference = sup(1e-2).context("eta integrand")?;
    let mut small = 0.0f64;
    for t in log_space(1e-6, 1e-2, 5) {
        small = small.max(sup(t).context("eta integrand")?);
    }
    f.scalar("eta_integrand.small_t_max_over_reference", small / reference);
    f.residual("eta_integrand.small_t_excess", (small / reference - 10.0).max(0.0), 0.0);

    let m = symplectic_sum(&[elliptic_block(PI / 3.0), elliptic_block(-1.0), hyperbolic_block(2.0)]);
    let nf = symplectic_normal_form(&m).context("matrix is generic")?;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let s = random_symplectic(rng, 3, 0.5);
        let conj = &s * &m * s.clone().try_inverse().expect("symplectic");
        let other = symplectic_normal_form(&conj).context("conjugate is generic")?;
        if other.angles.len() != nf.angles.len() || other.hyperbolic_rank != nf.hyperbolic_rank {
            worst = f64::INFINITY;
            continue;
        }
        for (a, b) in other.angles.iter().zip(&nf.angles) {
            worst = worst.max((a - b).abs());
        }
    }
    f.residual("normal_form.conjugation", worst, 1e-8);
    Ok(())
}
