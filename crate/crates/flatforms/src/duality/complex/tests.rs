use super::*;
use crate::duality::{
    hyperbolic_complex, random_duality_bundle, random_duality_complex, signature, ComplexShape, JFamily, LieField,
};
use crate::discrete_calculus::integrate_cycle;
use crate::quadrature::{log_log_slope, log_space};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn torus(n: usize) -> BaseGrid {
    BaseGrid::torus(&[n, n], &[1.0, 1.0]).unwrap()
}

fn shape(epsilon: Epsilon, top: usize, cohomology: usize, acyclic: usize, gap: f64) -> ComplexShape {
    ComplexShape { epsilon, top_degree: top, cohomology_pieces: cohomology, acyclic_pieces: acyclic, gap }
}

fn family(seed: u64, shape: ComplexShape, axes: usize, amplitude: f64) -> JFamily {
    random_duality_complex(&mut ChaCha8Rng::seed_from_u64(seed), shape, axes, amplitude).unwrap()
}

#[test]
fn parallel_data_have_constant_p() {
    let f = family(1, shape(Epsilon::Plus, 2, 3, 0, 1.0), 0, 0.0);
    let c = f.complex(&BaseGrid::point()).unwrap();
    let (s, x) = c.split().unwrap();
    assert_eq!(s.max_abs(), 0.0);
    assert_eq!(x.max_abs(), 0.0);
    let trace = c.bundle().j_at(0).trace();
    let p = c.p_super().unwrap();
    assert!((p.value(0).scalar(MultiIndex::EMPTY) - trace).norm() < 1e-12);
}

#[test]
fn ungraded_split_is_half_omega_and_p_super_is_p_form() {
    for (seed, epsilon) in [(2, Epsilon::Plus), (3, Epsilon::Minus)] {
        let f = random_duality_bundle(&mut ChaCha8Rng::seed_from_u64(seed), epsilon, 4, 2, 0.5).unwrap();
        let c = f.complex(&torus(6)).unwrap();
        let (s, x) = c.split().unwrap();
        assert_eq!(s.max_abs(), 0.0);
        let half = c.bundle().omega().unwrap().map(|m| m.scale(C64::new(0.5, 0.0)));
        assert!(x.try_sub(&half).unwrap().max_abs() < 1e-14);
        let diff = c.p_super().unwrap().try_sub(&c.bundle().p_form().unwrap()).unwrap().max_abs();
        assert!(diff < 1e-10, "{epsilon:?}: {diff}");
    }
}

#[test]
fn rescaled_superconnection_is_symmetric() {
    let f = family(4, shape(Epsilon::Minus, 2, 2, 2, 1.0), 2, 0.4);
    let c = f.complex(&torus(5)).unwrap();
    for t in [0.3, 1.0, 7.0] {
        assert!(c.symmetry_residual(t).unwrap() < 1e-12);
    }
    assert!(matches!(c.rescaled(0.0), Err(DualityError::NonPositiveTime(_))));
}

#[test]
fn curvature_at_a_point_is_a_quarter_of_the_square() {
    let f = family(5, shape(Epsilon::Plus, 3, 1, 3, 1.0), 0, 0.0);
    let c = f.complex(&BaseGrid::point()).unwrap();
    let v = c.v().clone();
    let vs = c.v_star_at(0).unwrap();
    for t in [0.5, 2.0] {
        let expected = (&v + &vs) * (&v + &vs) * C64::new(t / 4.0, 0.0);
        let got = c.c_squared(t).unwrap().value(0).coefficient(MultiIndex::EMPTY);
        assert!(max_abs(&(got - expected)) < 1e-12);
    }
}

#[test]
fn flat_pair_residual() {
    let f = family(6, shape(Epsilon::Minus, 1, 2, 2, 1.0), 0, 0.0);
    assert!(f.complex(&BaseGrid::point()).unwrap().flat_pair_residual().unwrap() < 1e-12);
    let f = family(7, shape(Epsilon::Plus, 2, 2, 2, 1.0), 2, 0.3);
    let coarse = f.complex(&torus(12)).unwrap().flat_pair_residual().unwrap();
    let fine = f.complex(&torus(24)).unwrap().flat_pair_residual().unwrap();
    assert!((3.0..5.0).contains(&(coarse / fine)), "{coarse} {fine}");
}

#[test]
fn structural_violations_are_rejected() {
    let f = family(8, shape(Epsilon::Plus, 2, 1, 1, 1.0), 0, 0.0);
    let point = BaseGrid::point();
    let bundle = f.bundle(&point).unwrap();
    let mut bad = f.v.clone();
    bad[(0, 0)] = C64::new(1.0, 0.0);
    assert!(matches!(
        DualityComplex::new(bundle.clone(), f.ranks.clone(), bad),
        Err(DualityError::NotGraded { what: "differential", .. })
    ));
    assert!(matches!(
        DualityComplex::new(bundle, vec![f.rank()], f.v.clone()),
        Err(DualityError::NotGraded { .. })
    ));
}

#[test]
fn p_rescaled_is_real_with_the_right_degrees() {
    for (seed, epsilon) in [(10, Epsilon::Plus), (11, Epsilon::Minus)] {
        let f = family(seed, shape(epsilon, 2, 2, 2, 1.0), 2, 0.4);
        let c = f.complex(&torus(6)).unwrap();
        for t in [0.1, 1.0, 10.0] {
            c.p_rescaled(t).unwrap();
            c.eta_integrand(t).unwrap();
        }
    }
}

#[test]
fn heat_trace_is_conserved_and_equals_the_cohomology_trace() {
    let f = family(12, shape(Epsilon::Plus, 2, 3, 3, 1.0), 0, 0.0);
    let c = f.complex(&BaseGrid::point()).unwrap();
    let induced = c.induced_duality().unwrap();
    let trace_h = induced.complex.bundle().j_at(0).trace();
    let q_h = induced.complex.bundle().pairing().map(|z| z.re);
    assert!((trace_h.re - signature(&q_h).unwrap() as f64).abs() < 1e-10);
    for t in log_space(1e-2, 1e2, 20) {
        let value = c.heat_trace(t, 0).unwrap();
        assert!((value - trace_h).norm() < 1e-8, "t = {t}: {value} vs {trace_h}");
    }
}

#[test]
fn induced_duality_of_split_and_acyclic_complexes() {
    let grid = BaseGrid::circle(8, 1.0).unwrap();
    let f = random_duality_bundle(&mut ChaCha8Rng::seed_from_u64(13), Epsilon::Minus, 4, 1, 0.4).unwrap();
    let c = f.complex(&grid).unwrap();
    let induced = c.induced_duality().unwrap();
    assert_eq!(induced.complex.ranks(), c.ranks());
    let diff = induced.complex.bundle().p_form().unwrap().try_sub(&c.bundle().p_form().unwrap()).unwrap();
    assert!(diff.max_abs() < 1e-12);
    assert!(induced.lift_residual < 1e-10 && induced.pairing_residual < 1e-10);

    let f = family(14, shape(Epsilon::Plus, 3, 0, 3, 1.0), 1, 0.3);
    let induced = f.complex(&grid).unwrap().induced_duality().unwrap();
    assert_eq!(induced.complex.bundle().rank(), 0);
}

#[test]
fn induced_duality_does_not_depend_on_the_lift() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let f = family(15, shape(Epsilon::Minus, 2, 3, 3, 1.0), 2, 0.3);
    let c = f.complex(&torus(5)).unwrap();
    let first = c.induced_duality().unwrap();
    // move every lift vector by v of a vector one degree lower
    let degrees = f.degrees();
    let lift = first.lift.clone();
    let mut moved = lift.clone();
    for k in 0..lift.ncols() {
        let degree = (0..lift.nrows()).find(|&i| lift[(i, k)].norm() > 1e-8).map(|i| degrees[i]).unwrap();
        if degree == 0 {
            continue;
        }
        let w = CMatrix::from_fn(lift.nrows(), 1, |i, _| {
            C64::new(if degrees[i] + 1 == degree { rng.random_range(-1.0..1.0) } else { 0.0 }, 0.0)
        });
        let shift = c.v() * w;
        for i in 0..lift.nrows() {
            moved[(i, k)] += shift[(i, 0)];
        }
    }
    assert!(max_abs(&(&moved - &lift)) > 1e-3);
    let second = c.induced_from_lift(&moved).unwrap();
    assert!(max_abs(&(first.complex.bundle().pairing() - second.complex.bundle().pairing())) < 1e-10);
    for node in 0..c.grid().node_count() {
        let a = first.complex.bundle().j_at(node);
        let b = second.complex.bundle().j_at(node);
        assert!(max_abs(&(a - b)) < 1e-10);
    }
    assert!(second.pairing_residual < 1e-10);
}

#[test]
fn eta_vanishes_for_split_and_hyperbolic_complexes() {
    let grid = BaseGrid::circle(8, 1.0).unwrap();
    let f = random_duality_bundle(&mut ChaCha8Rng::seed_from_u64(16), Epsilon::Minus, 2, 1, 0.5).unwrap();
    let c = f.complex(&grid).unwrap();
    assert!(c.eta_integrand(0.7).unwrap().max_abs() < 1e-14);

    let mut v = CMatrix::zeros(3, 3);
    v[(1, 0)] = C64::new(1.5, 0.0);
    v[(2, 1)] = C64::new(0.0, 0.0);
    let f = hyperbolic_complex(&mut ChaCha8Rng::seed_from_u64(17), Epsilon::Minus, &[1, 1, 1], &v, 1, 0.4, 0.2).unwrap();
    let c = f.complex(&grid).unwrap();
    for t in [0.1, 1.0, 5.0] {
        assert!(c.eta_integrand(t).unwrap().max_abs() < 1e-12);
    }
    let eta = c.eta_form(&QuadratureConfig::default()).unwrap();
    assert!(eta.form.max_abs() < 1e-10);
}

/// Acyclic complex on a circle with `ε = −1` and top degree 2, so that the
/// eta-form has a degree-1 part.
fn acyclic_circle(seed: u64, gap: f64) -> DualityComplex {
    let f = family(seed, shape(Epsilon::Minus, 2, 0, 3, gap), 1, 0.5);
    f.complex(&BaseGrid::circle(12, 1.0).unwrap()).unwrap()
}

#[test]
fn eta_vanishes_identically_for_odd_top_degree_and_plus_sign() {
    let f = family(18, shape(Epsilon::Plus, 3, 0, 3, 0.5), 3, 0.5);
    let c = f.complex(&BaseGrid::torus(&[4; 3], &[1.0; 3]).unwrap()).unwrap();
    assert!(c.eta_integrand(0.5).unwrap().max_abs() < 1e-12);
}

#[test]
fn eta_integrand_decays_and_is_bounded_at_zero() {
    let c = acyclic_circle(18, 0.2);
    let sup = |t: f64| c.eta_integrand(t).unwrap().max_abs();
    let ts = log_space(1e2, 1e4, 9);
    let ys: Vec<f64> = ts.iter().map(|&t| sup(t)).collect();
    assert!(ys[0] > 1e-6, "{ys:?}");
    let slope = log_log_slope(&ts, &ys).unwrap();
    assert!(slope <= -1.4, "{slope} {ys:?}");
    let reference = sup(1e-2);
    assert!(reference > 0.0);
    for t in log_space(1e-6, 1e-2, 9) {
        assert!(sup(t) <= 10.0 * reference);
    }
}

#[test]
fn eta_integrand_transgresses_the_rescaled_p_form() {
    let f = family(24, shape(Epsilon::Minus, 2, 1, 2, 1.0), 2, 0.4);
    let residual = |n: usize| {
        let c = f.complex(&torus(n)).unwrap();
        let (t, h) = (0.8, 1e-4);
        let dp = c.p_rescaled(t + h).unwrap().try_sub(&c.p_rescaled(t - h).unwrap()).unwrap();
        let dp = dp.map_untwisted(|x| x.scale(C64::new(0.5 / h, 0.0)));
        let d_eta = exterior_d(&c.eta_integrand(t).unwrap()).unwrap();
        assert!(dp.max_abs() > 1e-3);
        d_eta.try_sub(&dp).unwrap().max_abs()
    };
    let (coarse, fine) = (residual(16), residual(32));
    assert!(coarse / fine > 3.0, "{coarse} {fine}");
}

#[test]
fn eta_form_is_stable_under_step_halving() {
    let c = acyclic_circle(19, 1.0);
    let config = QuadratureConfig::default();
    let coarse = c.eta_form(&config).unwrap();
    let fine = c.eta_form(&QuadratureConfig { step: config.step / 2.0, ..config }).unwrap();
    assert!(coarse.form.max_abs() > 1e-4);
    assert!(coarse.form.try_sub(&fine.form).unwrap().max_abs() < 1e-6);
}

#[test]
fn eta_form_transgresses_between_the_p_forms() {
    let f = family(20, shape(Epsilon::Minus, 2, 1, 1, 1.0), 2, 0.3);
    let cfg = QuadratureConfig { t_min: 1e-4, t_max: 1e2, tolerance: 1e-6, ..QuadratureConfig::default() };
    let coarse = f.complex(&torus(16)).unwrap().eta_transgression_residual(&cfg).unwrap();
    let fine = f.complex(&torus(32)).unwrap().eta_transgression_residual(&cfg).unwrap();
    assert!(fine < coarse / 3.0, "{coarse} {fine}");
}

fn path(start: &LieField, end: &LieField, bump: &LieField, s: f64) -> LieField {
    LieField::combine(&[(1.0 - s, start), (s, end), ((std::f64::consts::PI * s).sin(), bump)])
}

#[test]
fn p_tilde_of_a_constant_path_vanishes() {
    let f = family(21, shape(Epsilon::Minus, 2, 1, 1, 1.0), 2, 0.3);
    let grid = torus(5);
    let p = DualityComplex::p_tilde(|_| f.complex(&grid), 2).unwrap();
    assert!(p.max_abs() < 1e-10);
}

#[test]
fn p_tilde_integrand_of_a_bundle_matches_the_variation_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let f = random_duality_bundle(&mut rng, Epsilon::Minus, 4, 2, 0.3).unwrap();
    let end = f.random_field(&mut rng, 0.3).unwrap();
    let grid = torus(8);
    let at = |s: f64| f.complex_with(&grid, &LieField::combine(&[(1.0 - s, &f.field), (s, &end)]));
    let here = at(0.37).unwrap();
    let plus = at(0.37 + 1e-5).unwrap();
    let minus = at(0.37 - 1e-5).unwrap();
    let j_dot: Vec<CMatrix> = (0..grid.node_count())
        .map(|n| (plus.bundle().j_at(n) - minus.bundle().j_at(n)) * C64::new(0.5e5, 0.0))
        .collect();
    let a = here.p_tilde_integrand(&j_dot).unwrap();
    let b = here.bundle().p_variation_integrand(&j_dot).unwrap();
    assert!(a.max_abs() > 1e-3);
    assert!(a.try_sub(&b).unwrap().max_abs() < 1e-8);
}

/// `|dp̃ − (p(J₁) − p(J₂))|` and the periods of `p̃` along a straight and a
/// bent path, on an `n × n` torus.
fn p_tilde_data(f: &JFamily, end: &LieField, bump: &LieField, n: usize) -> (f64, f64) {
    let grid = torus(n);
    let zero = LieField::zero(f.rank(), 2);
    let along = |bump: &LieField| {
        DualityComplex::p_tilde(|s| f.complex_with(&grid, &path(&f.field, end, bump, s)), 8).unwrap()
    };
    let straight = along(&zero);
    let bent = along(bump);
    let p1 = f.complex_with(&grid, end).unwrap().p_super().unwrap();
    let p0 = f.complex_with(&grid, &f.field).unwrap().p_super().unwrap();
    let transgression = exterior_d(&bent).unwrap().try_sub(&p1.try_sub(&p0).unwrap()).unwrap().max_abs();
    let periods = (0..2)
        .map(|axis| (integrate_cycle(&straight, &[axis]).unwrap() - integrate_cycle(&bent, &[axis]).unwrap()).norm())
        .fold(0.0, f64::max);
    (transgression, periods)
}

#[test]
fn p_tilde_transgresses_and_its_periods_do_not_depend_on_the_path() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let f = family(23, shape(Epsilon::Minus, 2, 2, 1, 1.0), 2, 0.3);
    let end = f.random_field(&mut rng, 0.3).unwrap();
    let bump = f.random_field(&mut rng, 0.3).unwrap();
    let (t16, p16) = p_tilde_data(&f, &end, &bump, 16);
    let (t32, p32) = p_tilde_data(&f, &end, &bump, 32);
    assert!(t16 / t32 > 3.0, "{t16} {t32}");
    assert!(p16 / p32 > 3.0 || p32 < 1e-8, "{p16} {p32}");
}


