//! One function per subcommand. Each fills a [`Findings`] with invariants and
//! residuals; verdicts are decided by the caller's tolerance scale.

use flatforms::complex_torsion::{CohomologyVolumes, IntComplex, K0Vol, ZMatrix};
use flatforms::discrete_calculus::{exterior_d, BaseGrid, GridField};
use flatforms::duality::{random_symplectic, symplectic_normal_form, DualityComplex};
use flatforms::flat_bundle::cycle_pairing;
use flatforms::grassmann::MultiIndex;
use nalgebra::DMatrix;
use num_bigint::BigInt;

use crate::error::{CliError, Context};
use crate::instance::{self, real_matrix};
use crate::report::Findings;
use crate::spec::InstanceSpec;

/// Tolerance of a second-order discretization residual is `GRID_CONSTANT · h²`
/// with `h` the spacing relative to the period.
pub const GRID_CONSTANT: f64 = 50.0;
/// Imaginary parts and off-parity components of real forms.
pub const PARITY_TOL: f64 = 1e-10;
pub const IDENTITY_TOL: f64 = 1e-10;

pub fn grid_tolerance(grid: &BaseGrid) -> f64 {
    let h = grid.resolution().iter().map(|&n| 1.0 / n as f64).fold(0.0, f64::max);
    GRID_CONSTANT * h * h
}

/// All `k`-element subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn rec(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            rec(i + 1, n, k, current, out);
            current.pop();
        }
    }
    rec(0, n, k, &mut current, &mut out);
    out
}

fn axes_label(axes: &[usize]) -> String {
    axes.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(",")
}

/// Records the degree-0 value at the base node and every pairing of the
/// degree-`k` part with a coordinate sub-torus.
fn record_form(f: &mut Findings, name: &str, form: &GridField) -> Result<(), CliError> {
    f.scalar(format!("{name}.value0"), form.value(0).scalar(MultiIndex::EMPTY).re);
    let dim = form.grid().dim();
    for k in 1..=dim {
        let part = form.degree_part(k);
        if part.max_abs() == 0.0 {
            continue;
        }
        for axes in combinations(dim, k) {
            let value = cycle_pairing(&part, &axes).context("form pairs with coordinate cycles")?;
            f.scalar(format!("{name}[{}]", axes_label(&axes)), value);
        }
    }
    Ok(())
}

/// The spec on a grid with twice the resolution on every axis. Random families
/// draw the same data, which does not depend on the grid.
fn refined(spec: &InstanceSpec) -> InstanceSpec {
    let mut out = spec.clone();
    if let Some(base) = &mut out.base {
        base.resolution.iter_mut().for_each(|n| *n *= 2);
    }
    out
}

/// A residual that is only `O(h²)` on a grid: records it at `h` and `h/2` and
/// passes when halving `h` divides it by at least 3 (or it is at rounding level).
pub fn refinement(f: &mut Findings, name: &str, coarse: f64, fine: f64) {
    f.scalar(format!("{name}.coarse"), coarse);
    f.scalar(format!("{name}.fine"), fine);
    let defect = if coarse.max(fine) < 1e-12 { 0.0 } else { (3.0 - coarse / fine).max(0.0) };
    f.residual(format!("{name}.refinement"), defect, 0.0);
}

/// Largest component of `form` in degrees not congruent to `residue` mod 4,
/// together with its imaginary part.
fn parity_defect(form: &GridField, residue: usize) -> f64 {
    let off = (0..=form.grid().dim()).filter(|k| k % 4 != residue).map(|k| form.degree_part(k).max_abs());
    off.fold(form.max_imag(), f64::max)
}

fn closedness(f: &mut Findings, name: &str, form: &GridField) -> Result<(), CliError> {
    if form.grid().dim() > 1 {
        let d = exterior_d(form).context("form lives on a grid")?.max_abs();
        f.residual(format!("{name}.closed"), d, grid_tolerance(form.grid()));
    }
    Ok(())
}

pub fn char_forms(spec: &InstanceSpec, f: &mut Findings) -> Result<(), CliError> {
    let grid = instance::grid(spec)?;
    let bundle = instance::bundle(spec, &grid)?;
    f.integer("rank", bundle.rank() as i64);
    f.integer("nodes", grid.node_count() as i64);
    for k in (1..=grid.dim()).step_by(2) {
        let c = bundle.c_k(k).context("odd characteristic forms exist")?;
        let name = format!("c{k}");
        record_form(f, &name, &c)?;
        f.residual(format!("{name}.imaginary"), c.max_imag(), PARITY_TOL);
        closedness(f, &name, &c)?;
        if k == 1 {
            for (axis, u) in bundle.holonomies().iter().enumerate() {
                let expected = u.determinant().norm().ln();
                let got = cycle_pairing(&c, &[axis]).context("form pairs with coordinate cycles")?;
                f.residual(format!("c1[{axis}].minus_ln_det"), got - expected, grid_tolerance(&grid));
            }
        }
    }
    Ok(())
}

pub fn torsion(spec: &InstanceSpec, f: &mut Findings) -> Result<(), CliError> {
    if spec.complex.is_none() {
        return local_system_torsion(spec, f);
    }
    let c = instance::based_complex(spec)?;
    let volumes = match spec.complex.as_ref().and_then(|c| c.cohomology_volumes.clone()) {
        Some(r) => CohomologyVolumes::Ratios(r),
        None => CohomologyVolumes::L2,
    };
    let t = c.reidemeister_torsion(&volumes).context("cohomology volumes match the cohomology")?;
    f.scalar("torsion", t);
    f.scalar("torsion_l2", c.torsion_l2());
    f.integer("euler_characteristic", c.euler_characteristic());
    let ranks: Vec<f64> = c.cohomology_field().iter().map(|h| h.rank as f64).collect();
    f.list("cohomology_ranks", ranks);
    f.residual("torsion_l2.minus_laplacian", c.torsion_l2() - c.laplacian_torsion(), IDENTITY_TOL);
    if let Some(int) = integral_complex(c.ranks(), c.differentials()) {
        let orders: Vec<f64> = int.cohomology_integral().iter().map(|h| flatforms::complex_torsion::ln_big(&h.torsion_order)).collect();
        f.list("ln_torsion_orders", orders);
    }
    Ok(())
}

/// The complex over `Z` when every differential entry is an integer.
fn integral_complex(ranks: &[usize], diffs: &[DMatrix<f64>]) -> Option<IntComplex> {
    let integral = diffs.iter().flat_map(|d| d.iter()).all(|x| x.fract() == 0.0 && x.abs() < 1e15);
    if !integral {
        return None;
    }
    let zs: Vec<ZMatrix> = diffs.iter().map(|d| d.map(|x| BigInt::from(x as i64))).collect();
    IntComplex::new(ranks.to_vec(), zs).ok()
}

fn local_system_torsion(spec: &InstanceSpec, f: &mut Findings) -> Result<(), CliError> {
    let (cw, volumes) = instance::local_system(spec)?;
    f.text("name", cw.name());
    f.integer("euler_characteristic", cw.euler_characteristic());
    let t = cw.torsion(&volumes).context("homology volumes match the cohomology")?;
    f.scalar("torsion", t);
    let data = cw.degree_data();
    f.list("free_ranks", data.iter().map(|d| d.free_rank as f64).collect());
    f.list("ln_torsion_orders", data.iter().map(|d| flatforms::complex_torsion::ln_big(&d.torsion_order)).collect());
    Ok(())
}

pub fn pushforward_point(spec: &InstanceSpec, f: &mut Findings) -> Result<(), CliError> {
    let (cw, volumes) = instance::local_system(spec)?;
    f.text("name", cw.name());
    let push = cw.pushforward_point(&volumes).context("homology volumes match the cohomology")?;
    record_k0(f, "pushforward", push);
    record_k0(f, "fiber_class", cw.fiber_class());
    f.integer("euler_characteristic", cw.euler_characteristic());
    euler_pushforward(f, &cw, &volumes)
}

fn record_k0(f: &mut Findings, name: &str, x: K0Vol) {
    f.scalar(format!("{name}.r"), x.r);
    f.integer(format!("{name}.z"), x.z);
}

pub fn euler_pushforward(
    f: &mut Findings,
    cw: &flatforms::complex_torsion::LocalSystemCW,
    volumes: &flatforms::complex_torsion::HomologyVolumes,
) -> Result<(), CliError> {
    let r = cw.euler_pushforward_residual(volumes).context("homology volumes match the cohomology")?;
    f.residual(format!("{}.pushforward_minus_euler_fiber.r", cw.name()), r.r, IDENTITY_TOL);
    f.check(format!("{}.pushforward_minus_euler_fiber.z", cw.name()), r.z == 0);
    Ok(())
}

pub fn torsion_form(spec: &InstanceSpec, f: &mut Findings) -> Result<(), CliError> {
    let s = instance::superconnection(spec)?;
    let cfg = instance::quadrature(spec);
    let tf = s.torsion_form(&cfg).context("torsion form integral converges")?;
    record_form(f, "torsion_form", &tf.form)?;
    f.scalar("quadrature.error_estimate", tf.error_estimate);
    f.scalar("quadrature.t_max", tf.t_max);
    f.integer("quadrature.evaluations", tf.evaluations as i64);
    f.residual("torsion_form.imaginary", tf.form.max_imag(), PARITY_TOL);
    f.residual("quadrature.error", tf.error_estimate, cfg.tolerance);
    let grid = s.grid().clone();
    if grid.dim() == 0 {
        // at a point the form is a number comparable to the classical torsion
        let c = instance::based_complex(spec)?;
        if c.cohomology_field().iter().all(|h| h.rank == 0) {
            let t = c.torsion_l2();
            f.scalar("reidemeister_torsion", t);
            f.scalar("torsion_form_over_reidemeister", tf.form.value(0).scalar(MultiIndex::EMPTY).re / t);
        }
        return Ok(());
    }
    let odd = s.f_form().context("odd form exists")?;
    record_form(f, "f_form", &odd)?;
    closedness(f, "f_form", &odd)?;
    let lhs = exterior_d(&tf.form).context("form lives on a grid")?;
    let rhs = s
        .connection_part()
        .and_then(|a| a.f_form())
        .and_then(|a| Ok(a.try_sub(&s.f_form_cohomology()?)?))
        .context("cohomology bundle has constant rank")?;
    let residual = lhs.try_sub(&rhs).context("forms live on one grid")?.max_abs();
    f.residual("torsion_form.transgression", residual, grid_tolerance(&grid) + cfg.tolerance);
    Ok(())
}

pub fn p_form(spec: &InstanceSpec, f: &mut Findings) -> Result<(), CliError> {
    let dc = instance::duality_complex(spec)?;
    let residue = dc.epsilon().p_degree();
    f.integer("rank", dc.bundle().rank() as i64);
    f.integer("p_degree_mod_4", residue as i64);
    let p = dc.bundle().p_form().context("p-form exists")?;
    record_form(f, "p", &p)?;
    f.residual("p.parity", parity_defect(&p, residue), PARITY_TOL);
    closedness(f, "p", &p)?;
    let eigen = dc.bundle().p_form_from_eigenbundles().context("J has eigenbundles")?;
    let gap = p.try_sub(&eigen).context("forms live on one grid")?.max_abs();
    f.residual("p.minus_eigenbundle_formula", gap, IDENTITY_TOL);
    if dc.ranks().len() > 1 {
        let coarse = dc.flat_pair_residual().context("rescaled pair exists")?;
        if dc.grid().dim() == 0 {
            f.residual("flat_pair", coarse, IDENTITY_TOL);
        } else {
            let fine = instance::duality_complex(&refined(spec))?.flat_pair_residual().context("rescaled pair exists")?;
            refinement(f, "flat_pair", coarse, fine);
        }
        let ps = dc.p_super().context("p-form of the superconnection exists")?;
        record_form(f, "p_super", &ps)?;
        f.residual("p_super.parity", parity_defect(&ps, residue), PARITY_TOL);
        closedness(f, "p_super", &ps)?;
    }
    Ok(())
}

pub fn eta_form(spec: &InstanceSpec, f: &mut Findings) -> Result<(), CliError> {
    let dc = instance::duality_complex(spec)?;
    let cfg = instance::quadrature(spec);
    let eta = dc.eta_form(&cfg).context("eta integral converges")?;
    record_form(f, "eta", &eta.form)?;
    f.scalar("quadrature.error_estimate", eta.error_estimate);
    f.scalar("quadrature.t_max", eta.t_max);
    f.integer("quadrature.evaluations", eta.evaluations as i64);
    f.residual("eta.parity", parity_defect(&eta.form, (dc.epsilon().p_degree() + 3) % 4), PARITY_TOL);
    f.residual("quadrature.error", eta.error_estimate, cfg.tolerance);
    if dc.grid().dim() > 0 {
        f.residual("eta.transgression", eta_transgression(&dc, &eta.form)?, grid_tolerance(dc.grid()) + cfg.tolerance);
    }
    Ok(())
}

/// `max |dη̃ − p(E) + p(H)|` for an already computed `η̃`.
fn eta_transgression(dc: &DualityComplex, eta: &GridField) -> Result<f64, CliError> {
    let p_e = dc.bundle().p_form().context("p-form exists")?;
    let p_h = dc.induced_duality().and_then(|h| h.complex.bundle().p_form()).context("cohomology has a duality")?;
    let d = exterior_d(eta).context("form lives on a grid")?;
    Ok(d.try_sub(&p_e).and_then(|x| x.try_add(&p_h)).context("forms live on one grid")?.max_abs())
}

pub fn normal_form(spec: &InstanceSpec, f: &mut Findings) -> Result<(), CliError> {
    let m = spec.symplectic.as_ref().ok_or_else(|| CliError::Schema("this command needs a [symplectic] section".into()))?;
    let m = real_matrix(&m.matrix);
    let nf = symplectic_normal_form(&m).context("matrix is symplectic and generic")?;
    f.list("elliptic_angles", nf.angles.clone());
    f.integer("hyperbolic_rank", nf.hyperbolic_rank as i64);
    let mut rng = instance::rng(spec);
    let mut worst = 0.0f64;
    let mut same_rank = true;
    for _ in 0..5 {
        let s = random_symplectic(&mut rng, m.nrows() / 2, 0.5);
        let si = s.clone().try_inverse().ok_or_else(|| CliError::precondition("conjugator is invertible", ""))?;
        let conj = symplectic_normal_form(&(&s * &m * si)).context("conjugate is generic")?;
        same_rank &= conj.hyperbolic_rank == nf.hyperbolic_rank && conj.angles.len() == nf.angles.len();
        for (a, b) in conj.angles.iter().zip(&nf.angles) {
            worst = worst.max((a - b).abs());
        }
    }
    f.residual("conjugation.angles", worst, 1e-8);
    f.check("conjugation.hyperbolic_rank", same_rank);
    Ok(())
}

/// Each `[expect]` value becomes a residual against the invariant of that name.
pub fn expectations(spec: &InstanceSpec, f: &mut Findings) -> Result<(), CliError> {
    let Some(expect) = &spec.expect else {
        return Ok(());
    };
    for (name, want) in &expect.values {
        let got = f
            .scalar_value(name)
            .ok_or_else(|| CliError::Schema(format!("expect.values.{name} names no scalar invariant of this command")))?;
        f.residual(format!("expect.{name}"), got - want, expect.tolerance);
    }
    Ok(())
}
