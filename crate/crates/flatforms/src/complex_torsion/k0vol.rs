//! The group `R ⊕ Z` of classes of finitely generated abelian groups with a
//! volume form on their real span.

use std::ops::{Add, Mul, Neg, Sub};

/// `(r, z)`: real part and rank part.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct K0Vol {
    pub r: f64,
    pub z: i64,
}

impl K0Vol {
    pub const ZERO: K0Vol = K0Vol { r: 0.0, z: 0 };

    pub fn new(r: f64, z: i64) -> Self {
        K0Vol { r, z }
    }

    /// Image of a real number: `x ↦ (−x, 0)`.
    pub fn from_real(x: f64) -> Self {
        K0Vol { r: -x, z: 0 }
    }

    /// Zero rank part and real part within `tol`.
    pub fn is_zero(&self, tol: f64) -> bool {
        self.z == 0 && self.r.abs() <= tol
    }
}

/// Class of a group with `free_rank` free generators, torsion subgroup of
/// order `torsion_order`, and an integral basis of covolume `covolume`.
pub fn k0vol_class(free_rank: usize, torsion_order: f64, covolume: f64) -> K0Vol {
    K0Vol { r: torsion_order.ln() - covolume.ln(), z: free_rank as i64 }
}

impl Add for K0Vol {
    type Output = K0Vol;
    fn add(self, o: K0Vol) -> K0Vol {
        K0Vol { r: self.r + o.r, z: self.z + o.z }
    }
}

impl Sub for K0Vol {
    type Output = K0Vol;
    fn sub(self, o: K0Vol) -> K0Vol {
        K0Vol { r: self.r - o.r, z: self.z - o.z }
    }
}

impl Neg for K0Vol {
    type Output = K0Vol;
    fn neg(self) -> K0Vol {
        K0Vol { r: -self.r, z: -self.z }
    }
}

impl Mul<K0Vol> for i64 {
    type Output = K0Vol;
    fn mul(self, k: K0Vol) -> K0Vol {
        K0Vol { r: self as f64 * k.r, z: self * k.z }
    }
}

impl std::iter::Sum for K0Vol {
    fn sum<I: Iterator<Item = K0Vol>>(iter: I) -> K0Vol {
        iter.fold(K0Vol::ZERO, Add::add)
    }
}

impl std::fmt::Display for K0Vol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({:.12e}, {})", self.r, self.z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plug_in_classes() {
        assert_eq!(k0vol_class(1, 1.0, 1.0), K0Vol::new(0.0, 1));
        assert_eq!(k0vol_class(0, 2.0, 1.0), K0Vol::new(2f64.ln(), 0));
        let c = k0vol_class(2, 3.0, 0.5);
        assert!((c.r - (3f64.ln() - 0.5f64.ln())).abs() < 1e-15 && c.z == 2);
    }

    #[test]
    fn group_laws() {
        let a = K0Vol::new(1.5, 2);
        let b = K0Vol::new(-0.25, -3);
        assert_eq!(a + b - b, a);
        assert_eq!(a + (-a), K0Vol::ZERO);
        assert_eq!(3 * a, a + a + a);
        assert_eq!([a, b].into_iter().sum::<K0Vol>(), a + b);
        assert_eq!(K0Vol::from_real(2.0), K0Vol::new(-2.0, 0));
    }
}
