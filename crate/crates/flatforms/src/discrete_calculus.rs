//! Point, circle and torus grids carrying fields of [`FormMatrix`] values.
//!
//! Axis `i` (0-based) carries the generator `dθ^{i+1}`. Fields may be twisted:
//! crossing the seam of axis `i` maps a value `V` to `Lᵢ V Rᵢ`, which is how
//! sections of flat bundles with holonomy are stored in a periodic array.

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::grassmann::{AlgebraError, FormMatrix, MultiIndex, C64};
use crate::linalg::{identity, inverse, LinalgError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("no derivative on a point")]
    PointBase,
    #[error("grid dimension {0} is outside 0..=3")]
    BadDimension(usize),
    #[error("axis {axis} has {nodes} nodes; at least 3 are needed")]
    TooCoarse { axis: usize, nodes: usize },
    #[error("axis {axis} has non-positive period {period}")]
    BadPeriod { axis: usize, period: f64 },
    #[error("axis {0} is out of range")]
    AxisOutOfRange(usize),
    #[error("cannot integrate a form of degree at most {field} over a {cycle}-cycle")]
    DegreeMismatch { field: usize, cycle: usize },
    #[error("fields live on different grids or fibers")]
    Incompatible,
    #[error("twist is singular: {0}")]
    SingularTwist(#[from] LinalgError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridKind {
    Point,
    Circle,
    Torus,
}

/// A uniform periodic grid on `∏ [0, Lᵢ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseGrid {
    resolution: Vec<usize>,
    periods: Vec<f64>,
}

impl BaseGrid {
    pub fn point() -> Self {
        BaseGrid { resolution: Vec::new(), periods: Vec::new() }
    }

    pub fn circle(nodes: usize, period: f64) -> Result<Self, GridError> {
        Self::torus(&[nodes], &[period])
    }

    pub fn torus(resolution: &[usize], periods: &[f64]) -> Result<Self, GridError> {
        if resolution.len() > 3 || resolution.len() != periods.len() {
            return Err(GridError::BadDimension(resolution.len()));
        }
        for (axis, (&n, &l)) in resolution.iter().zip(periods).enumerate() {
            if n < 3 {
                return Err(GridError::TooCoarse { axis, nodes: n });
            }
            if !(l > 0.0 && l.is_finite()) {
                return Err(GridError::BadPeriod { axis, period: l });
            }
        }
        Ok(BaseGrid { resolution: resolution.to_vec(), periods: periods.to_vec() })
    }

    pub fn dim(&self) -> usize {
        self.resolution.len()
    }

    pub fn kind(&self) -> GridKind {
        match self.dim() {
            0 => GridKind::Point,
            1 => GridKind::Circle,
            _ => GridKind::Torus,
        }
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn node_count(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.periods[axis] / self.resolution[axis] as f64
    }

    /// Largest spacing, the `h` of convergence statements.
    pub fn max_spacing(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).fold(0.0, f64::max)
    }

    /// Row-major node numbering, axis 0 slowest.
    pub fn node_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.resolution).fold(0, |acc, (&i, &n)| acc * n + i)
    }

    pub fn node_multi(&self, mut node: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            out[axis] = node % self.resolution[axis];
            node /= self.resolution[axis];
        }
        out
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.node_multi(node)
            .iter()
            .enumerate()
            .map(|(axis, &i)| i as f64 * self.spacing(axis))
            .collect()
    }

    /// Neighbor along `axis` by `±1`, and whether the seam was crossed upward (+1) or downward (−1).
    fn neighbor(&self, node: usize, axis: usize, forward: bool) -> (usize, i32) {
        let mut multi = self.node_multi(node);
        let n = self.resolution[axis];
        let crossing = if forward {
            if multi[axis] + 1 == n {
                multi[axis] = 0;
                1
            } else {
                multi[axis] += 1;
                0
            }
        } else if multi[axis] == 0 {
            multi[axis] = n - 1;
            -1
        } else {
            multi[axis] -= 1;
            0
        };
        (self.node_index(&multi), crossing)
    }
}

/// Seam rule `V(x + Lᵢeᵢ) = left · V(x) · right` with cached inverses.
#[derive(Clone, Debug, PartialEq)]
pub struct Twist {
    left: DMatrix<C64>,
    right: DMatrix<C64>,
    left_inv: DMatrix<C64>,
    right_inv: DMatrix<C64>,
}

impl Twist {
    pub fn new(left: DMatrix<C64>, right: DMatrix<C64>) -> Result<Self, GridError> {
        let left_inv = inverse(&left)?;
        let right_inv = inverse(&right)?;
        Ok(Twist { left, right, left_inv, right_inv })
    }

    pub fn trivial(dim: usize) -> Self {
        Twist { left: identity(dim), right: identity(dim), left_inv: identity(dim), right_inv: identity(dim) }
    }

    /// Twist for endomorphism fields of a bundle with holonomy `u`: `V ↦ u V u⁻¹`.
    pub fn conjugation(u: &DMatrix<C64>) -> Result<Self, GridError> {
        let ui = inverse(u)?;
        Self::new(u.clone(), ui)
    }

    /// Twist of metrics: `h ↦ u^{−†} h u⁻¹`.
    pub fn metric(u: &DMatrix<C64>) -> Result<Self, GridError> {
        let ui = inverse(u)?;
        Self::new(ui.adjoint(), ui)
    }

    pub fn left(&self) -> &DMatrix<C64> {
        &self.left
    }

    pub fn right(&self) -> &DMatrix<C64> {
        &self.right
    }

    pub fn apply(&self, v: &FormMatrix<C64>) -> FormMatrix<C64> {
        v.map_terms(|_, m| &self.left * m * &self.right)
    }

    pub fn apply_inverse(&self, v: &FormMatrix<C64>) -> FormMatrix<C64> {
        v.map_terms(|_, m| &self.left_inv * m * &self.right_inv)
    }

    pub fn is_trivial(&self) -> bool {
        let id = identity(self.left.nrows());
        self.left == id && self.right == identity(self.right.nrows())
    }
}

/// A field of form-valued matrices, one per node, with per-axis twists.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    grid: BaseGrid,
    dim: usize,
    values: Vec<FormMatrix<C64>>,
    twists: Vec<Twist>,
}

impl GridField {
    /// Samples `f` at every node; `f` receives the node coordinates.
    pub fn from_fn<F>(grid: &BaseGrid, dim: usize, twists: Vec<Twist>, f: F) -> Result<Self, GridError>
    where
        F: Fn(&[f64]) -> FormMatrix<C64> + Sync,
    {
        if twists.len() != grid.dim() {
            return Err(GridError::Incompatible);
        }
        let values: Vec<FormMatrix<C64>> =
            (0..grid.node_count()).into_par_iter().map(|node| f(&grid.coords(node))).collect();
        Self::from_values(grid, dim, twists, values)
    }

    pub fn from_values(
        grid: &BaseGrid,
        dim: usize,
        twists: Vec<Twist>,
        values: Vec<FormMatrix<C64>>,
    ) -> Result<Self, GridError> {
        let ok = twists.len() == grid.dim()
            && values.len() == grid.node_count()
            && values.iter().all(|v| v.dim() == dim && v.generators() == grid.dim());
        if !ok {
            return Err(GridError::Incompatible);
        }
        Ok(GridField { grid: grid.clone(), dim, values, twists })
    }

    /// Untwisted field, the right type for scalar forms.
    pub fn untwisted<F>(grid: &BaseGrid, dim: usize, f: F) -> Result<Self, GridError>
    where
        F: Fn(&[f64]) -> FormMatrix<C64> + Sync,
    {
        Self::from_fn(grid, dim, vec![Twist::trivial(dim); grid.dim()], f)
    }

    pub fn grid(&self) -> &BaseGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[FormMatrix<C64>] {
        &self.values
    }

    pub fn value(&self, node: usize) -> &FormMatrix<C64> {
        &self.values[node]
    }

    pub fn twists(&self) -> &[Twist] {
        &self.twists
    }

    /// Nodewise map keeping the twists; `f` must commute with them.
    pub fn map(&self, f: impl Fn(&FormMatrix<C64>) -> FormMatrix<C64> + Sync + Send) -> Self {
        let values: Vec<_> = self.values.par_iter().map(f).collect();
        let dim = values.first().map_or(self.dim, |v| v.dim());
        let twists = if dim == self.dim { self.twists.clone() } else { vec![Twist::trivial(dim); self.grid.dim()] };
        GridField { grid: self.grid.clone(), dim, values, twists }
    }

    /// Nodewise map producing an untwisted field (scalar forms, traces).
    pub fn map_untwisted(&self, f: impl Fn(&FormMatrix<C64>) -> FormMatrix<C64> + Sync + Send) -> Self {
        let values: Vec<_> = self.values.par_iter().map(f).collect();
        let dim = values.first().map_or(1, |v| v.dim());
        GridField { grid: self.grid.clone(), dim, values, twists: vec![Twist::trivial(dim); self.grid.dim()] }
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self, GridError> {
        self.zip(other, |a, b| a - b)
    }

    pub fn try_add(&self, other: &Self) -> Result<Self, GridError> {
        self.zip(other, |a, b| a + b)
    }

    fn zip(&self, other: &Self, f: impl Fn(&FormMatrix<C64>, &FormMatrix<C64>) -> FormMatrix<C64>) -> Result<Self, GridError> {
        if self.grid != other.grid || self.dim != other.dim {
            return Err(GridError::Incompatible);
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect();
        Ok(GridField { grid: self.grid.clone(), dim: self.dim, values, twists: self.twists.clone() })
    }

    /// Largest coefficient modulus over all nodes.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.max_abs()).fold(0.0, f64::max)
    }

    /// Largest imaginary part over all nodes.
    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.max_imag()).fold(0.0, f64::max)
    }

    /// Restricts every node value to the terms of one degree.
    pub fn degree_part(&self, degree: usize) -> Self {
        self.map(|v| v.degree_part(degree))
    }

    /// Value at the neighbor of `node` along `axis`, expressed across the seam.
    fn neighbor_value(&self, node: usize, axis: usize, forward: bool) -> FormMatrix<C64> {
        let (other, crossing) = self.grid.neighbor(node, axis, forward);
        let v = &self.values[other];
        match crossing {
            1 => self.twists[axis].apply(v),
            -1 => self.twists[axis].apply_inverse(v),
            _ => v.clone(),
        }
    }

    /// Central difference `∂ᵢ` of every coefficient at `node`.
    pub fn partial(&self, node: usize, axis: usize) -> FormMatrix<C64> {
        let plus = self.neighbor_value(node, axis, true);
        let minus = self.neighbor_value(node, axis, false);
        let scale = C64::new(0.5 / self.grid.spacing(axis), 0.0);
        (&plus - &minus).scale(scale)
    }
}

/// `d f = Σᵢ dθⁱ ∧ ∂ᵢ f` with second-order central differences.
pub fn exterior_d(f: &GridField) -> Result<GridField, GridError> {
    let grid = &f.grid;
    if grid.dim() == 0 {
        return Err(GridError::PointBase);
    }
    let values: Vec<FormMatrix<C64>> = (0..grid.node_count())
        .into_par_iter()
        .map(|node| {
            let mut out = FormMatrix::zero(grid.dim(), f.dim);
            for axis in 0..grid.dim() {
                let generator = MultiIndex::single(axis);
                for (index, m) in f.partial(node, axis).terms() {
                    let sign = generator.wedge_sign(index);
                    if sign != 0 {
                        out.accumulate(generator.union(index), m * C64::new(sign as f64, 0.0));
                    }
                }
            }
            out
        })
        .collect();
    Ok(GridField { grid: grid.clone(), dim: f.dim, values, twists: f.twists.clone() })
}

/// Sum of the top-degree component over the sub-torus spanned by `axes`
/// through the origin node, weighted by the cell volume. Scalar fields only.
pub fn integrate_cycle(f: &GridField, axes: &[usize]) -> Result<C64, GridError> {
    let grid = &f.grid;
    let mut index = MultiIndex::EMPTY;
    for &a in axes {
        if a >= grid.dim() {
            return Err(GridError::AxisOutOfRange(a));
        }
        index = index.union(MultiIndex::single(a));
    }
    let top = f.values.iter().filter_map(|v| v.max_degree()).max().unwrap_or(0);
    if index.degree() != axes.len() || axes.is_empty() || top < axes.len() || f.dim != 1 {
        return Err(GridError::DegreeMismatch { field: top, cycle: axes.len() });
    }
    let cell: f64 = axes.iter().map(|&a| grid.spacing(a)).product();
    let mut sum = C64::new(0.0, 0.0);
    for node in 0..grid.node_count() {
        let multi = grid.node_multi(node);
        let on_cycle = multi.iter().enumerate().all(|(a, &i)| axes.contains(&a) || i == 0);
        if on_cycle {
            sum += f.values[node].scalar(index);
        }
    }
    Ok(sum * cell)
}

/// Interior product with `∂/∂θ^{axis+1}`.
pub fn interior(f: &GridField, axis: usize) -> Result<GridField, GridError> {
    if axis >= f.grid.dim() {
        return Err(GridError::AxisOutOfRange(axis));
    }
    Ok(f.map(|v| interior_form(v, axis)))
}

/// Interior product with the family direction `∂/∂s`, `s` being axis 0.
pub fn contract_parameter(f: &GridField) -> Result<GridField, GridError> {
    interior(f, 0)
}

/// `i_{∂_axis}` on a single form: removes the generator with the sign of its position.
pub fn interior_form(v: &FormMatrix<C64>, axis: usize) -> FormMatrix<C64> {
    let mut out = FormMatrix::zero(v.generators(), v.dim());
    for (index, m) in v.terms() {
        if index.contains(axis) {
            let before = (index.mask() & ((1u16 << axis) - 1)).count_ones();
            let sign = if before % 2 == 0 { 1.0 } else { -1.0 };
            out.accumulate(index.without(axis), m * C64::new(sign, 0.0));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn scalar(n: usize, index: MultiIndex, x: f64) -> FormMatrix<C64> {
        FormMatrix::scalar_term(n, index, C64::new(x, 0.0))
    }

    #[test]
    fn point_has_no_derivative() {
        let f = GridField::untwisted(&BaseGrid::point(), 1, |_| FormMatrix::identity(0, 1)).unwrap();
        assert_eq!(exterior_d(&f), Err(GridError::PointBase));
    }

    #[test]
    fn constant_field_is_closed() {
        let grid = BaseGrid::torus(&[8, 9], &[1.0, 2.0]).unwrap();
        let f = GridField::untwisted(&grid, 2, |_| FormMatrix::identity(2, 2)).unwrap();
        assert_eq!(exterior_d(&f).unwrap().max_abs(), 0.0);
    }

    fn sine_error(n: usize) -> f64 {
        let l = 3.0;
        let grid = BaseGrid::circle(n, l).unwrap();
        let k = 2.0 * PI / l;
        let f = GridField::untwisted(&grid, 1, |x| scalar(1, MultiIndex::EMPTY, (k * x[0]).sin())).unwrap();
        let df = exterior_d(&f).unwrap();
        (0..n)
            .map(|i| {
                let x = grid.coords(i)[0];
                (df.value(i).scalar(MultiIndex::single(0)) - C64::new(k * (k * x).cos(), 0.0)).norm()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn derivative_is_second_order() {
        let (e1, e2) = (sine_error(32), sine_error(64));
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn twisted_derivative_matches_analytic() {
        // section e^{ax} of a line bundle with holonomy e^{aL}
        let (a, l, n) = (0.7, 2.0, 64);
        let grid = BaseGrid::circle(n, l).unwrap();
        let hol = DMatrix::from_element(1, 1, C64::new((a * l).exp(), 0.0));
        let twist = Twist::new(hol, identity(1)).unwrap();
        let f = GridField::from_fn(&grid, 1, vec![twist], |x| scalar(1, MultiIndex::EMPTY, (a * x[0]).exp())).unwrap();
        let df = exterior_d(&f).unwrap();
        for node in [0, n - 1] {
            let x = grid.coords(node)[0];
            let got = df.value(node).scalar(MultiIndex::single(0)).re;
            assert!((got - a * (a * x).exp()).abs() < 1e-3);
        }
    }

    #[test]
    fn d_squared_vanishes_on_torus() {
        let grid = BaseGrid::torus(&[10, 12, 8], &[1.0, 1.5, 2.0]).unwrap();
        let f = GridField::untwisted(&grid, 1, |x| {
            let mut v = scalar(3, MultiIndex::EMPTY, (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1] / 1.5).cos());
            v.accumulate(MultiIndex::single(2), DMatrix::from_element(1, 1, C64::new((PI * x[2]).sin(), 0.0)));
            v
        })
        .unwrap();
        let ddf = exterior_d(&exterior_d(&f).unwrap()).unwrap();
        assert!(ddf.max_abs() < 1e-10);
    }

    #[test]
    fn cycle_integrals() {
        let grid = BaseGrid::circle(16, 2.0 * PI).unwrap();
        let f = GridField::untwisted(&grid, 1, |_| scalar(1, MultiIndex::single(0), 1.0)).unwrap();
        assert!((integrate_cycle(&f, &[0]).unwrap().re - 2.0 * PI).abs() < 1e-13);
        let g = GridField::untwisted(&grid, 1, |_| scalar(1, MultiIndex::single(0), 2.5)).unwrap();
        assert!((integrate_cycle(&g, &[0]).unwrap().re - 5.0 * PI).abs() < 1e-13);
        let exact = exterior_d(&GridField::untwisted(&grid, 1, |x| scalar(1, MultiIndex::EMPTY, x[0].cos())).unwrap()).unwrap();
        assert!(integrate_cycle(&exact, &[0]).unwrap().norm() < 1e-12);
        let zero_form = GridField::untwisted(&grid, 1, |_| scalar(1, MultiIndex::EMPTY, 1.0)).unwrap();
        assert!(matches!(integrate_cycle(&zero_form, &[0]), Err(GridError::DegreeMismatch { .. })));
    }

    #[test]
    fn interior_products() {
        let grid = BaseGrid::torus(&[4, 4], &[1.0, 1.0]).unwrap();
        let ds = MultiIndex::single(0);
        let dx = MultiIndex::single(1);
        let f = GridField::untwisted(&grid, 1, |_| scalar(2, ds, 3.0)).unwrap();
        assert_eq!(contract_parameter(&f).unwrap().value(0).scalar(MultiIndex::EMPTY), C64::new(3.0, 0.0));
        let f = GridField::untwisted(&grid, 1, |_| scalar(2, dx, 3.0)).unwrap();
        assert_eq!(contract_parameter(&f).unwrap().max_abs(), 0.0);
        let f = GridField::untwisted(&grid, 1, |_| scalar(2, ds.union(dx), 3.0)).unwrap();
        assert_eq!(contract_parameter(&f).unwrap().value(0).scalar(dx), C64::new(3.0, 0.0));
        // ds∧dx contracted with ∂x gives −ds
        assert_eq!(interior(&f, 1).unwrap().value(0).scalar(ds), C64::new(-3.0, 0.0));
    }
}
