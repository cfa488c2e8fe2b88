//! Local systems `ρ : Γ → GL_n(Z)` on finite CW complexes and the cochain
//! complex `Hom_{ZΓ}(C_*(X̃), V)`.
//!
//! A cell of `X̃` is identified with a chosen lift; its boundary is a
//! `ZΓ`-combination of lifts of lower cells. With `f(gτ) = ρ(g) f(τ)` the
//! coboundary block for `(σ, τ)` is `ρ(a_στ)`, where `∂σ = Σ_τ a_στ τ`.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed};

use super::k0vol::K0Vol;
use super::snf::{zidentity, zmul, zzeros, SmithForm, ZMatrix};
use super::torsion::{BasedComplex, IntComplex};
use super::TorsionError;

/// `Σ n_k w_k` with `w_k` a word in signed, 1-based generator indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GroupRingElement(pub Vec<(i64, Vec<i32>)>);

impl GroupRingElement {
    pub fn zero() -> Self {
        GroupRingElement(Vec::new())
    }

    pub fn one() -> Self {
        GroupRingElement(vec![(1, Vec::new())])
    }

    /// Parses `"1 - a"`, `"aB - 2"`, `"1 + a"`: letters `a`, `b`, … are the
    /// generators and capitals their inverses.
    pub fn parse(s: &str) -> Result<Self, TorsionError> {
        let err = || TorsionError::Parse(s.to_string());
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(err());
        }
        let mut terms = Vec::new();
        let mut rest = compact.as_str();
        while !rest.is_empty() {
            let (sign, body) = match rest.as_bytes()[0] {
                b'+' => (1, &rest[1..]),
                b'-' => (-1, &rest[1..]),
                _ if terms.is_empty() => (1, rest),
                _ => return Err(err()),
            };
            let end = body.find(['+', '-']).unwrap_or(body.len());
            let term = &body[..end];
            rest = &body[end..];
            let digits = term.find(|c: char| !c.is_ascii_digit()).unwrap_or(term.len());
            let (num, word) = term.split_at(digits);
            if num.is_empty() && word.is_empty() {
                return Err(err());
            }
            let coef: i64 = if num.is_empty() { 1 } else { num.parse().map_err(|_| err())? };
            let letters = word
                .chars()
                .map(|c| match c {
                    'a'..='z' => Ok(c as i32 - 'a' as i32 + 1),
                    'A'..='Z' => Ok(-(c as i32 - 'A' as i32 + 1)),
                    _ => Err(err()),
                })
                .collect::<Result<Vec<i32>, _>>()?;
            terms.push((sign * coef, letters));
        }
        Ok(GroupRingElement(terms))
    }

    /// `Σ n_k ρ(w_k)` with `ρ` given on generators and their inverses.
    fn evaluate(&self, rank: usize, hol: &[(ZMatrix, ZMatrix)]) -> Result<ZMatrix, TorsionError> {
        let mut out = zzeros(rank, rank);
        for (coef, word) in &self.0 {
            let mut m = zidentity(rank);
            for &g in word {
                let k = g.unsigned_abs() as usize;
                let (fwd, inv) = hol.get(k.wrapping_sub(1)).ok_or(TorsionError::UnknownGenerator(k))?;
                m = zmul(&m, if g > 0 { fwd } else { inv });
            }
            let c = BigInt::from(*coef);
            out += m.map(|x| x * &c);
        }
        Ok(out)
    }
}

impl fmt::Display for GroupRingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        for (k, (coef, word)) in self.0.iter().enumerate() {
            match (k, *coef < 0) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let n = coef.abs();
            if word.is_empty() {
                write!(f, "{n}")?;
            } else {
                if n != 1 {
                    write!(f, "{n}")?;
                }
                for &g in word {
                    let base = if g > 0 { b'a' } else { b'A' };
                    write!(f, "{}", (base + (g.unsigned_abs() - 1) as u8) as char)?;
                }
            }
        }
        Ok(())
    }
}

/// Which volume form each cohomology group carries.
#[derive(Clone, Debug, PartialEq)]
pub enum HomologyVolumes {
    /// The integral basis of `H^p / torsion` has volume 1.
    Integral,
    /// The volume induced by the cochain inner products on harmonic forms.
    L2,
    /// Volume of the integral basis of `H^p / torsion`, per degree.
    Custom(Vec<f64>),
}

/// A finite CW complex with a unimodular local system of rank `n` whose
/// integral basis has covolume `fiber_volume`.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalSystemCW {
    name: String,
    cells: Vec<usize>,
    /// `boundaries[p][σ][τ]` for `σ` a `(p+1)`-cell and `τ` a `p`-cell.
    boundaries: Vec<Vec<Vec<GroupRingElement>>>,
    holonomies: Vec<ZMatrix>,
    rank: usize,
    fiber_volume: f64,
    complex: IntComplex,
}

/// Integral cohomology and volumes of one degree of the pushforward.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeData {
    pub free_rank: usize,
    pub torsion_order: BigInt,
    pub l2_volume: f64,
}

impl LocalSystemCW {
    pub fn new(
        name: impl Into<String>,
        cells: Vec<usize>,
        boundaries: Vec<Vec<Vec<GroupRingElement>>>,
        holonomies: Vec<ZMatrix>,
        rank: usize,
    ) -> Result<Self, TorsionError> {
        if cells.is_empty() || boundaries.len() + 1 != cells.len() {
            return Err(TorsionError::Shape { degree: boundaries.len() });
        }
        let mut hol = Vec::with_capacity(holonomies.len());
        for (k, a) in holonomies.iter().enumerate() {
            let invalid = TorsionError::InvalidHolonomy { generator: k + 1, rank };
            if a.shape() != (rank, rank) {
                return Err(invalid);
            }
            let s = SmithForm::new(a);
            if s.rank() != rank || !s.torsion_order().is_one() {
                return Err(invalid);
            }
            hol.push((a.clone(), unimodular_inverse(a, &s)));
        }
        let mut diffs = Vec::with_capacity(boundaries.len());
        for (p, block) in boundaries.iter().enumerate() {
            if block.len() != cells[p + 1] || block.iter().any(|row| row.len() != cells[p]) {
                return Err(TorsionError::Shape { degree: p });
            }
            let mut d = zzeros(rank * cells[p + 1], rank * cells[p]);
            for (s, row) in block.iter().enumerate() {
                for (t, a) in row.iter().enumerate() {
                    let m = a.evaluate(rank, &hol)?;
                    d.view_mut((s * rank, t * rank), (rank, rank)).copy_from(&m);
                }
            }
            diffs.push(d);
        }
        let ranks = cells.iter().map(|c| c * rank).collect();
        let complex = IntComplex::new(ranks, diffs)?;
        Ok(LocalSystemCW { name: name.into(), cells, boundaries, holonomies, rank, fiber_volume: 1.0, complex })
    }

    pub fn with_fiber_volume(mut self, volume: f64) -> Result<Self, TorsionError> {
        if !(volume > 0.0 && volume.is_finite()) {
            return Err(TorsionError::BadVolume(volume));
        }
        self.fiber_volume = volume;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn boundaries(&self) -> &[Vec<Vec<GroupRingElement>>] {
        &self.boundaries
    }

    pub fn holonomies(&self) -> &[ZMatrix] {
        &self.holonomies
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn fiber_volume(&self) -> f64 {
        self.fiber_volume
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.cells.iter().enumerate().map(|(p, &c)| if p % 2 == 0 { c as i64 } else { -(c as i64) }).sum()
    }

    pub fn cochain_complex(&self) -> &IntComplex {
        &self.complex
    }

    /// Real cochains, each cell carrying a copy of `V` with its volume.
    pub fn real_complex(&self) -> BasedComplex {
        let vols: Vec<f64> = self.cells.iter().map(|&c| self.fiber_volume.powi(c as i32)).collect();
        self.complex.to_real().with_volumes(&vols).expect("positive volumes")
    }

    /// Class of the fiber `(V, vol)`.
    pub fn fiber_class(&self) -> K0Vol {
        K0Vol::new(-self.fiber_volume.ln(), self.rank as i64)
    }

    pub fn degree_data(&self) -> Vec<DegreeData> {
        let real = self.real_complex();
        let l2 = self.complex.integral_basis_l2_volumes(&real);
        self.complex
            .cohomology_integral()
            .into_iter()
            .zip(l2)
            .map(|(h, l2_volume)| DegreeData { free_rank: h.free_rank, torsion_order: h.torsion_order, l2_volume })
            .collect()
    }

    /// Torsion of the cochain complex with the given cohomology volumes.
    pub fn torsion(&self, volumes: &HomologyVolumes) -> Result<f64, TorsionError> {
        let real = self.real_complex();
        let data = self.degree_data();
        let chosen = self.chosen_volumes(volumes, &data)?;
        let correction: f64 = data
            .iter()
            .zip(&chosen)
            .enumerate()
            .map(|(p, (d, v))| {
                let x = v.ln() - d.l2_volume.ln();
                if p % 2 == 0 { x } else { -x }
            })
            .sum();
        Ok(real.torsion_l2() + correction)
    }

    fn chosen_volumes(&self, volumes: &HomologyVolumes, data: &[DegreeData]) -> Result<Vec<f64>, TorsionError> {
        Ok(match volumes {
            HomologyVolumes::Integral => vec![1.0; data.len()],
            HomologyVolumes::L2 => data.iter().map(|d| d.l2_volume).collect(),
            HomologyVolumes::Custom(v) => {
                let bad = v.len() != data.len()
                    || v.iter().zip(data).any(|(x, d)| !(*x > 0.0) || (d.free_rank == 0 && (*x - 1.0).abs() > 1e-12));
                if bad {
                    return Err(TorsionError::InconsistentVolumes);
                }
                v.clone()
            }
        })
    }

    /// `(T, 0) + Σ_p (−1)^p [(H^p, vol(H^p))]`: the class pushed forward to a point.
    pub fn pushforward_point(&self, volumes: &HomologyVolumes) -> Result<K0Vol, TorsionError> {
        let data = self.degree_data();
        let chosen = self.chosen_volumes(volumes, &data)?;
        let t = self.torsion(volumes)?;
        let classes: K0Vol = data
            .iter()
            .zip(&chosen)
            .enumerate()
            .map(|(p, (d, v))| {
                let class = K0Vol::new(super::torsion::ln_big(&d.torsion_order) - v.ln(), d.free_rank as i64);
                if p % 2 == 0 { class } else { -class }
            })
            .sum();
        Ok(-K0Vol::from_real(t) + classes)
    }

    /// Pushforward minus `χ(X)·[(V, vol)]`; zero in both components.
    pub fn euler_pushforward_residual(&self, volumes: &HomologyVolumes) -> Result<K0Vol, TorsionError> {
        Ok(self.pushforward_point(volumes)? - self.euler_characteristic() * self.fiber_class())
    }
}

/// Inverse of a unimodular matrix from its Smith form `L A R = I`: `A⁻¹ = R L`.
fn unimodular_inverse(a: &ZMatrix, s: &SmithForm) -> ZMatrix {
    let mut inv = zmul(&s.right, &s.left);
    // invariant factors are positive ones, so L A R = I holds exactly
    debug_assert!(zmul(a, &inv) == zidentity(a.nrows()));
    if a.nrows() == 0 {
        inv = zidentity(0);
    }
    inv
}

fn z(rows: usize, data: &[i64]) -> ZMatrix {
    super::snf::zmatrix(rows, rows, data)
}

fn el(s: &str) -> GroupRingElement {
    GroupRingElement::parse(s).expect("library element")
}

fn circle(name: &str, a: ZMatrix) -> LocalSystemCW {
    let n = a.nrows();
    LocalSystemCW::new(name, vec![1, 1], vec![vec![vec![el("a - 1")]]], vec![a], n).expect("circle")
}

/// The bundled instances: points, intervals, circles, wedges and 2-complexes.
pub fn library() -> Vec<LocalSystemCW> {
    let rotation = z(2, &[0, -1, 1, 0]);
    let cat = z(2, &[2, 1, 1, 1]);
    let shear = z(2, &[1, 1, 0, 1]);
    let one = |n| zidentity(n);
    vec![
        LocalSystemCW::new("point", vec![1], vec![], vec![], 1).unwrap(),
        LocalSystemCW::new("point-rank3", vec![1], vec![], vec![], 3).unwrap().with_fiber_volume(2.5).unwrap(),
        LocalSystemCW::new("two-points", vec![2], vec![], vec![], 1).unwrap(),
        LocalSystemCW::new("interval", vec![2, 1], vec![vec![vec![el("-1"), el("1")]]], vec![], 2)
            .unwrap()
            .with_fiber_volume(3.0)
            .unwrap(),
        LocalSystemCW::new("sphere", vec![1, 0, 1], vec![vec![], vec![vec![]]], vec![], 1).unwrap(),
        circle("circle-rotation", rotation.clone()),
        circle("circle-minus-one", z(1, &[-1])),
        circle("circle-trivial", one(1)).with_fiber_volume(0.5).unwrap(),
        circle("circle-cat-map", cat.clone()),
        circle("circle-shear", shear).with_fiber_volume(2.0).unwrap(),
        LocalSystemCW::new("wedge-of-circles", vec![1, 2], vec![vec![vec![el("a - 1")], vec![el("b - 1")]]], vec![rotation.clone(), cat], 2)
            .unwrap(),
        // Fox derivatives of aba⁻¹b⁻¹
        LocalSystemCW::new(
            "torus",
            vec![1, 2, 1],
            vec![vec![vec![el("a - 1")], vec![el("b - 1")]], vec![vec![el("1 - abA"), el("a - abAB")]]],
            vec![rotation.clone(), z(2, &[-1, 0, 0, -1])],
            2,
        )
        .unwrap(),
        // Fox derivatives of abab⁻¹
        LocalSystemCW::new(
            "klein-bottle",
            vec![1, 2, 1],
            vec![vec![vec![el("a - 1")], vec![el("b - 1")]], vec![vec![el("1 + ab"), el("a - abaB")]]],
            vec![z(1, &[1]), z(1, &[-1])],
            1,
        )
        .unwrap(),
        LocalSystemCW::new(
            "projective-plane",
            vec![1, 1, 1],
            vec![vec![vec![el("a - 1")]], vec![vec![el("1 + a")]]],
            vec![z(1, &[-1])],
            1,
        )
        .unwrap()
        .with_fiber_volume(1.5)
        .unwrap(),
        LocalSystemCW::new(
            "projective-plane-trivial",
            vec![1, 1, 1],
            vec![vec![vec![el("a - 1")]], vec![vec![el("1 + a")]]],
            vec![z(1, &[1])],
            1,
        )
        .unwrap(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    fn find(name: &str) -> LocalSystemCW {
        library().into_iter().find(|x| x.name() == name).unwrap()
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["1 - a", "a - abAB", "2 + 3b", "-1", "1 + ab"] {
            let e = GroupRingElement::parse(s).unwrap();
            assert_eq!(GroupRingElement::parse(&e.to_string()).unwrap(), e, "{s}");
        }
        assert_eq!(GroupRingElement::parse("1 - a").unwrap().0, vec![(1, vec![]), (-1, vec![1])]);
        assert_eq!(GroupRingElement::parse("a - abAB").unwrap().0, vec![(1, vec![1]), (-1, vec![1, 2, -1, -2])]);
        assert!(GroupRingElement::parse("1 + ?").is_err());
        assert!(GroupRingElement::parse("").is_err());
    }

    #[test]
    fn rotation_circle_has_torsion_two() {
        let x = find("circle-rotation");
        let h = x.cochain_complex().cohomology_integral();
        assert_eq!(h[0].free_rank + h[1].free_rank, 0);
        assert_eq!(h[1].torsion_order.to_u64(), Some(2));
        let t = x.torsion(&HomologyVolumes::Integral).unwrap();
        assert!((t - 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn minus_one_line_system() {
        let x = find("circle-minus-one");
        let h = x.cochain_complex().cohomology_integral();
        assert_eq!(h[1].torsion_order.to_u64(), Some(2));
        assert!(x.euler_pushforward_residual(&HomologyVolumes::Integral).unwrap().is_zero(1e-12));
    }

    #[test]
    fn library_satisfies_pushforward_identity() {
        let lib = library();
        assert!(lib.len() >= 10);
        for x in &lib {
            for vols in [HomologyVolumes::Integral, HomologyVolumes::L2] {
                let r = x.euler_pushforward_residual(&vols).unwrap();
                assert!(r.is_zero(1e-10), "{}: {r}", x.name());
            }
        }
    }

    #[test]
    fn expected_cohomology_of_two_complexes() {
        let free = |name: &str| -> Vec<usize> {
            find(name).cochain_complex().cohomology_integral().iter().map(|h| h.free_rank).collect()
        };
        assert_eq!(free("sphere"), vec![1, 0, 1]);
        assert_eq!(free("klein-bottle"), vec![0, 1, 1]);
        assert_eq!(free("projective-plane-trivial"), vec![1, 0, 0]);
        let rp2 = find("projective-plane-trivial").cochain_complex().cohomology_integral();
        assert_eq!(rp2[2].torsion_order.to_u64(), Some(2));
        let torus = find("torus").cochain_complex().cohomology_integral();
        assert!(torus.iter().all(|h| h.free_rank == 0));
    }

    #[test]
    fn noncommuting_torus_holonomy_is_rejected() {
        let r = LocalSystemCW::new(
            "bad-torus",
            vec![1, 2, 1],
            vec![vec![vec![el("a - 1")], vec![el("b - 1")]], vec![vec![el("1 - abA"), el("a - abAB")]]],
            vec![z(2, &[1, 1, 0, 1]), z(2, &[1, 0, 1, 1])],
            2,
        );
        assert!(matches!(r, Err(TorsionError::NotAComplex { .. })));
    }

    #[test]
    fn non_unimodular_holonomy_is_rejected() {
        let r = LocalSystemCW::new("bad", vec![1, 1], vec![vec![vec![el("a - 1")]]], vec![z(1, &[2])], 1);
        assert!(matches!(r, Err(TorsionError::InvalidHolonomy { generator: 1, .. })));
    }

    #[test]
    fn two_points_push_to_twice_the_fiber() {
        let x = find("two-points");
        assert_eq!(x.pushforward_point(&HomologyVolumes::Integral).unwrap(), K0Vol::new(0.0, 2));
        assert!(find("circle-cat-map").pushforward_point(&HomologyVolumes::L2).unwrap().z == 0);
    }
}
