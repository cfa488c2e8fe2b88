//! Library objects built from the sections of an [`InstanceSpec`].

use std::f64::consts::PI;

use flatforms::complex_torsion::{library, snf::zmatrix, BasedComplex, GroupRingElement, HomologyVolumes, LocalSystemCW};
use flatforms::discrete_calculus::BaseGrid;
use flatforms::duality::{
    boost_circle, random_duality_bundle, random_duality_complex, ComplexShape, DualityBundle, DualityComplex, Epsilon,
};
use flatforms::flat_bundle::FlatBundle;
use flatforms::linalg::{expm, logm, CMatrix};
use flatforms::quadrature::QuadratureConfig;
use flatforms::superconnection::GradedSuperconnection;
use flatforms::C64;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CliError, Context};
use crate::spec::{
    BaseKind, BundleSpec, ComplexSpec, DualitySpec, InstanceSpec, JSpec, LocalSystemSpec, Matrix, MetricSpec,
    NamedVolumes, VolumesSpec,
};

pub fn rng(spec: &InstanceSpec) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(spec.seed.unwrap_or(0))
}

pub fn real_matrix(m: &Matrix) -> DMatrix<f64> {
    let cols = m.first().map_or(0, Vec::len);
    DMatrix::from_fn(m.len(), cols, |i, j| m[i][j])
}

pub fn complex_matrix(m: &Matrix) -> CMatrix {
    real_matrix(m).map(|x| C64::new(x, 0.0))
}

fn missing(section: &str) -> CliError {
    CliError::Schema(format!("this command needs a [{section}] section"))
}

/// The base grid; a point when the spec has no `[base]`.
pub fn grid(spec: &InstanceSpec) -> Result<BaseGrid, CliError> {
    let Some(base) = &spec.base else {
        return Ok(BaseGrid::point());
    };
    let periods =
        if base.periods.is_empty() { vec![2.0 * PI; base.resolution.len()] } else { base.periods.clone() };
    match base.kind {
        BaseKind::Point => Ok(BaseGrid::point()),
        BaseKind::Circle | BaseKind::Torus => BaseGrid::torus(&base.resolution, &periods).context("grid is valid"),
    }
}

fn holonomies(b: &BundleSpec, axes: usize) -> Result<Vec<CMatrix>, CliError> {
    if b.holonomies.is_empty() {
        return Ok(vec![CMatrix::identity(b.rank, b.rank); axes]);
    }
    if b.holonomies.len() != axes {
        return Err(CliError::Schema(format!("bundle needs {axes} holonomies, got {}", b.holonomies.len())));
    }
    let mut out: Vec<CMatrix> = b.holonomies.iter().map(complex_matrix).collect();
    if let Some(imag) = &b.holonomies_imag {
        for (u, im) in out.iter_mut().zip(imag) {
            *u += real_matrix(im).map(|y| C64::new(0.0, y));
        }
    }
    Ok(out)
}

/// Periodic positive factor of a formula metric.
fn formula(id: &str, parameters: &[f64], rank: usize) -> Result<impl Fn(&[f64], &[f64]) -> CMatrix, CliError> {
    let amplitudes = match (id, parameters.len()) {
        ("scalar-sine", 1) => vec![parameters[0]; rank],
        ("diagonal-sine", n) if n == rank => parameters.to_vec(),
        _ => {
            return Err(CliError::Schema(format!(
                "unknown metric formula {id:?} with {} parameters (known: scalar-sine [a], diagonal-sine [a₁ … a_rank])",
                parameters.len()
            )))
        }
    };
    Ok(move |x: &[f64], periods: &[f64]| {
        let wave: f64 = x.iter().zip(periods).map(|(xi, l)| (2.0 * PI * xi / l).sin()).sum();
        CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            rank,
            amplitudes.iter().map(|a| C64::new((a * wave).exp(), 0.0)),
        ))
    })
}

pub fn bundle(spec: &InstanceSpec, grid: &BaseGrid) -> Result<FlatBundle, CliError> {
    let b = spec.bundle.as_ref().ok_or_else(|| missing("bundle"))?;
    let hol = holonomies(b, grid.dim())?;
    let rank = b.rank;
    match &b.metric {
        MetricSpec::Parallel => {
            let hol = if grid.dim() == 0 { Vec::new() } else { hol };
            FlatBundle::new(grid, hol, |_| CMatrix::identity(rank, rank)).context("bundle is flat with a valid metric")
        }
        MetricSpec::Random { amplitude } => {
            if grid.dim() == 0 {
                return Err(CliError::Schema("a random metric needs a circle or torus base".into()));
            }
            FlatBundle::with_default_metric(grid, hol, *amplitude, spec.seed.unwrap_or(0))
                .context("bundle is flat with a valid metric")
        }
        MetricSpec::Formula { id, parameters } => {
            let k = formula(id, parameters, rank)?;
            let logs = hol.iter().map(logm).collect::<Result<Vec<_>, _>>().context("holonomies have logarithms")?;
            let periods = grid.periods().to_vec();
            let hol = if grid.dim() == 0 { Vec::new() } else { hol };
            FlatBundle::new(grid, hol, move |x| {
                let mut exponent = CMatrix::zeros(rank, rank);
                for (axis, log) in logs.iter().enumerate() {
                    exponent -= log * C64::new(x[axis] / periods[axis], 0.0);
                }
                let g = expm(&exponent);
                g.adjoint() * k(x, &periods) * g
            })
            .context("bundle is flat with a valid metric")
        }
    }
}

/// The total differential of a graded complex, block `(p + 1, p)` being
/// `differentials[p]`.
pub fn total_differential(c: &ComplexSpec) -> CMatrix {
    let n: usize = c.ranks.iter().sum();
    let mut v = CMatrix::zeros(n, n);
    let mut offset = 0;
    for (p, d) in c.differentials.iter().enumerate() {
        let next = offset + c.ranks[p];
        for (i, row) in d.iter().enumerate() {
            for (j, x) in row.iter().enumerate() {
                v[(next + i, offset + j)] = C64::new(*x, 0.0);
            }
        }
        offset = next;
    }
    v
}

pub fn based_complex(spec: &InstanceSpec) -> Result<BasedComplex, CliError> {
    let c = spec.complex.as_ref().ok_or_else(|| missing("complex"))?;
    let diffs = c.differentials.iter().enumerate().map(|(p, d)| {
        if d.is_empty() {
            DMatrix::zeros(c.ranks[p + 1], c.ranks[p])
        } else {
            real_matrix(d)
        }
    });
    let complex = BasedComplex::new(c.ranks.clone(), diffs.collect()).context("differentials square to zero")?;
    match &c.volumes {
        Some(v) => complex.with_volumes(v).context("volumes are positive and one on zero spaces"),
        None => Ok(complex),
    }
}

/// The flat superconnection of `[complex]`: over `[bundle]` when present,
/// otherwise at a point with the metric realizing `complex.volumes`.
pub fn superconnection(spec: &InstanceSpec) -> Result<GradedSuperconnection, CliError> {
    let c = spec.complex.as_ref().ok_or_else(|| missing("complex"))?;
    let v = total_differential(c);
    if spec.bundle.is_some() {
        let grid = grid(spec)?;
        let bundle = bundle(spec, &grid)?;
        return GradedSuperconnection::flat_complex(bundle, c.ranks.clone(), &v).context("superconnection is flat");
    }
    let based = based_complex(spec)?;
    let blocks: Vec<CMatrix> = based.grams().iter().map(|g| g.map(|x| C64::new(x, 0.0))).collect();
    let h = flatforms::linalg::block_diag(&blocks);
    GradedSuperconnection::at_point(c.ranks.clone(), &v, &h).context("superconnection is flat")
}

pub fn local_system(spec: &InstanceSpec) -> Result<(LocalSystemCW, HomologyVolumes), CliError> {
    let l = spec.local_system.as_ref().ok_or_else(|| missing("local_system"))?;
    let mut cw = match &l.library {
        Some(name) => {
            if l.cells.is_some() || l.boundaries.is_some() || l.holonomies.is_some() || l.rank.is_some() {
                return Err(CliError::Schema("local_system.library excludes explicit cells".into()));
            }
            library()
                .into_iter()
                .find(|cw| cw.name() == name)
                .ok_or_else(|| CliError::Schema(format!("no bundled complex named {name:?}")))?
        }
        None => explicit_local_system(l)?,
    };
    if let Some(v) = l.fiber_volume {
        cw = cw.with_fiber_volume(v).context("fiber volume is positive")?;
    }
    let volumes = match &l.volumes {
        None | Some(VolumesSpec::Named(NamedVolumes::Integral)) => HomologyVolumes::Integral,
        Some(VolumesSpec::Named(NamedVolumes::L2)) => HomologyVolumes::L2,
        Some(VolumesSpec::Custom(v)) => HomologyVolumes::Custom(v.clone()),
    };
    Ok((cw, volumes))
}

fn explicit_local_system(l: &LocalSystemSpec) -> Result<LocalSystemCW, CliError> {
    let need = |what: &str| CliError::Schema(format!("local_system needs `library` or `{what}`"));
    let cells = l.cells.clone().ok_or_else(|| need("cells"))?;
    let rank = l.rank.unwrap_or(1);
    let boundaries = l
        .boundaries
        .as_ref()
        .ok_or_else(|| need("boundaries"))?
        .iter()
        .map(|block| {
            block
                .iter()
                .map(|row| row.iter().map(|s| GroupRingElement::parse(s)).collect::<Result<Vec<_>, _>>())
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()
        .context("boundary entries are group-ring elements")?;
    let mut holonomies = Vec::new();
    for m in l.holonomies.as_deref().unwrap_or_default() {
        if m.len() != rank || m.iter().any(|row| row.len() != rank) {
            return Err(CliError::precondition("matrices are rectangular", "local_system.holonomies"));
        }
        let flat: Vec<i64> = m.iter().flatten().copied().collect();
        holonomies.push(zmatrix(rank, rank, &flat));
    }
    let name = l.name.clone().unwrap_or_else(|| "custom".into());
    LocalSystemCW::new(name, cells, boundaries, holonomies, rank).context("local system is a valid cochain complex")
}

pub fn quadrature(spec: &InstanceSpec) -> QuadratureConfig {
    let mut cfg = QuadratureConfig::default();
    if let Some(q) = &spec.quadrature {
        cfg.t_min = q.t_min.unwrap_or(cfg.t_min);
        cfg.t_max = q.t_max.unwrap_or(cfg.t_max);
        cfg.tolerance = q.tolerance.unwrap_or(cfg.tolerance);
        cfg.step = q.step.unwrap_or(cfg.step);
    }
    cfg
}

pub fn duality_complex(spec: &InstanceSpec) -> Result<DualityComplex, CliError> {
    let d = spec.duality.as_ref().ok_or_else(|| missing("duality"))?;
    let grid = grid(spec)?;
    let epsilon = Epsilon::from_sign(d.epsilon).context("epsilon is ±1")?;
    let mut rng = rng(spec);
    let complex = match &d.j {
        JSpec::Parallel { matrix } => parallel_duality(d, &grid, epsilon, complex_matrix(matrix))?,
        JSpec::Random { rank, amplitude } => {
            only_j(d)?;
            let family =
                random_duality_bundle(&mut rng, epsilon, *rank, grid.dim(), *amplitude).context("random J family")?;
            DualityComplex::ungraded(family.bundle(&grid).context("duality bundle is valid")?)
                .context("duality complex is valid")?
        }
        JSpec::RandomComplex { top_degree, cohomology_pieces, acyclic_pieces, gap, amplitude } => {
            only_j(d)?;
            let shape = ComplexShape {
                epsilon,
                top_degree: *top_degree,
                cohomology_pieces: *cohomology_pieces,
                acyclic_pieces: *acyclic_pieces,
                gap: *gap,
            };
            let family = random_duality_complex(&mut rng, shape, grid.dim(), *amplitude).context("random J family")?;
            family.complex(&grid).context("duality complex is valid")?
        }
        JSpec::Boost { amplitude } => {
            only_j(d)?;
            if epsilon != Epsilon::Plus || grid.dim() != 1 || (grid.periods()[0] - 2.0 * PI).abs() > 1e-12 {
                return Err(CliError::Schema("the boost family lives on a circle of period 2π with epsilon = 1".into()));
            }
            let bundle = boost_circle(grid.resolution()[0], *amplitude).context("duality bundle is valid")?;
            DualityComplex::ungraded(bundle).context("duality complex is valid")?
        }
    };
    Ok(complex)
}

/// Generated families bring their own pairing and grading.
fn only_j(d: &DualitySpec) -> Result<(), CliError> {
    if d.pairing.is_some() || d.ranks.is_some() || d.differential.is_some() || d.holonomies.is_some() {
        return Err(CliError::Schema("a generated J family excludes pairing, ranks, differential and holonomies".into()));
    }
    Ok(())
}

fn parallel_duality(d: &DualitySpec, grid: &BaseGrid, epsilon: Epsilon, j: CMatrix) -> Result<DualityComplex, CliError> {
    let pairing = d.pairing.as_ref().ok_or_else(|| CliError::Schema("a parallel J needs duality.pairing".into()))?;
    let q = complex_matrix(pairing);
    let n = q.nrows();
    let holonomies = match &d.holonomies {
        Some(h) => h.iter().map(complex_matrix).collect(),
        None => vec![CMatrix::identity(n, n); grid.dim()],
    };
    let bundle = DualityBundle::new(grid, epsilon, q, holonomies, |_| j.clone()).context("duality bundle is valid")?;
    let ranks = d.ranks.clone().unwrap_or_else(|| vec![n]);
    let v = d.differential.as_ref().map_or_else(|| CMatrix::zeros(n, n), complex_matrix);
    DualityComplex::new(bundle, ranks, v).context("duality complex is valid")
}
