//! Geometry of the rectangular torus and its divergence-free mode algebra.
//!
//! The domain is the torus `]0, 2πq1[ × ]0, 2πq2[`. Lattice vectors
//! `m ∈ Z² \ {0}` index the trigonometric modes `cos⟨m,x⟩_q`, `sin⟨m,x⟩_q`
//! with the weighted phase `⟨m,x⟩_q = m1·x1/q1 + m2·x2/q2`. The
//! divergence-free directions are the q-perpendicular unit vectors
//! `m^{q,⊥}`, and the Stokes operator acts diagonally with eigenvalue
//! `‖m‖_q² = m1²/q1² + m2²/q2²`.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Errors from constructing or using torus geometry and mode indices.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("torus radii must be positive, got ({0}, {1})")]
    NonPositiveRadius(f64, f64),
    #[error("mode index (0, 0) is not a valid mode")]
    ZeroMode,
}

/// A 2D vector with the handful of operations the mode algebra needs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Euclidean dot product.
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// Euclidean length.
    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Counter-clockwise rotation by π/2: `(x, y) ↦ (−y, x)`.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// The rectangular torus `]0, 2πq1[ × ]0, 2πq2[`, `q1, q2 > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGeometry {
    q1: f64,
    q2: f64,
}

impl TorusGeometry {
    pub fn new(q1: f64, q2: f64) -> Result<Self, GeometryError> {
        if !(q1 > 0.0 && q2 > 0.0) || !q1.is_finite() || !q2.is_finite() {
            return Err(GeometryError::NonPositiveRadius(q1, q2));
        }
        Ok(TorusGeometry { q1, q2 })
    }

    /// The unit square torus `q = (1, 1)`.
    pub fn unit() -> Self {
        TorusGeometry { q1: 1.0, q2: 1.0 }
    }

    pub fn q1(&self) -> f64 {
        self.q1
    }

    pub fn q2(&self) -> f64 {
        self.q2
    }

    /// Area of the fundamental domain, `(2π)² q1 q2`.
    pub fn area(&self) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        two_pi * two_pi * self.q1 * self.q2
    }

    /// L² mass `κ = area/2` of each basis function `c_m`, `s_m`
    /// (`∫ cos²⟨m,x⟩_q dx = area/2`, and `|m^{q,⊥}| = 1`).
    pub fn basis_mass(&self) -> f64 {
        0.5 * self.area()
    }

    /// Weighted phase pairing `⟨x, y⟩_q = x1·y1/q1 + x2·y2/q2`.
    pub fn inner_q(&self, x: Vec2, y: Vec2) -> f64 {
        x.x * y.x / self.q1 + x.y * y.y / self.q2
    }
}

/// Weighted pairing `⟨x,y⟩_q = x1·y1/q1 + x2·y2/q2`.
pub fn inner_q(x: Vec2, y: Vec2, g: &TorusGeometry) -> f64 {
    g.inner_q(x, y)
}

/// A nonzero lattice vector `m ∈ Z² \ {0}` indexing one mode pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i64; 2]", into = "[i64; 2]")]
pub struct ModeIndex {
    m1: i64,
    m2: i64,
}

impl ModeIndex {
    pub fn new(m1: i64, m2: i64) -> Result<Self, GeometryError> {
        if m1 == 0 && m2 == 0 {
            return Err(GeometryError::ZeroMode);
        }
        Ok(ModeIndex { m1, m2 })
    }

    pub fn m1(&self) -> i64 {
        self.m1
    }

    pub fn m2(&self) -> i64 {
        self.m2
    }

    /// The ℓ¹ level `|m| = |m1| + |m2|` used to grade the spaces `H^N_q`.
    pub fn level(&self) -> u32 {
        (self.m1.unsigned_abs() + self.m2.unsigned_abs()) as u32
    }

    /// Lattice vector as a real vector.
    pub fn as_vec(&self) -> Vec2 {
        Vec2::new(self.m1 as f64, self.m2 as f64)
    }

    /// Canonical representatives have positive first nonzero component.
    pub fn is_canonical(&self) -> bool {
        self.m1 > 0 || (self.m1 == 0 && self.m2 > 0)
    }

    /// Canonical representative of the pair `{m, −m}` and whether a flip
    /// was applied.
    pub fn canonical(&self) -> (ModeIndex, bool) {
        if self.is_canonical() {
            (*self, false)
        } else {
            (
                ModeIndex {
                    m1: -self.m1,
                    m2: -self.m2,
                },
                true,
            )
        }
    }

    /// `m + n`, or `None` when the sum is the zero vector.
    pub fn checked_add(&self, other: ModeIndex) -> Option<ModeIndex> {
        ModeIndex::new(self.m1 + other.m1, self.m2 + other.m2).ok()
    }

    /// `m − n`, or `None` when the difference is the zero vector.
    pub fn checked_sub(&self, other: ModeIndex) -> Option<ModeIndex> {
        ModeIndex::new(self.m1 - other.m1, self.m2 - other.m2).ok()
    }

    /// Integer cross product `m1·n2 − m2·n1`; zero iff parallel.
    pub fn cross(&self, other: ModeIndex) -> i64 {
        self.m1 * other.m2 - self.m2 * other.m1
    }
}

impl std::ops::Neg for ModeIndex {
    type Output = ModeIndex;
    fn neg(self) -> ModeIndex {
        ModeIndex {
            m1: -self.m1,
            m2: -self.m2,
        }
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.m1, self.m2)
    }
}

impl TryFrom<[i64; 2]> for ModeIndex {
    type Error = GeometryError;
    fn try_from(v: [i64; 2]) -> Result<Self, GeometryError> {
        ModeIndex::new(v[0], v[1])
    }
}

impl From<ModeIndex> for [i64; 2] {
    fn from(m: ModeIndex) -> [i64; 2] {
        [m.m1, m.m2]
    }
}

/// Stokes eigenvalue `‖m‖_q² = m1²/q1² + m2²/q2²` of `−Δ` on `c_m`, `s_m`.
pub fn stokes_eigenvalue(m: ModeIndex, g: &TorusGeometry) -> f64 {
    let k1 = m.m1 as f64 / g.q1();
    let k2 = m.m2 as f64 / g.q2();
    k1 * k1 + k2 * k2
}

/// Weighted norm `‖m‖_q`.
pub fn norm_q(m: ModeIndex, g: &TorusGeometry) -> f64 {
    stokes_eigenvalue(m, g).sqrt()
}

/// The q-perpendicular unit direction of a mode.
///
/// Returns `(−m2·q1, m1·q2)` normalized to Euclidean length 1. This is the
/// unique-up-to-sign vector with `⟨m, m^{q,⊥}⟩_q = 0`; the sign convention
/// reduces to the standard perp `(−m2, m1)` at `q = (1,1)`.
pub fn perp_q(m: ModeIndex, g: &TorusGeometry) -> Vec2 {
    let raw = Vec2::new(-(m.m2 as f64) * g.q1(), (m.m1 as f64) * g.q2());
    raw.scale(1.0 / raw.norm())
}

/// Mode-wise Leray projection direction: the Euclidean projection of `a`
/// onto `span{l^{q,⊥}}`, i.e. `⟨a, l^{q,⊥}⟩ l^{q,⊥}`.
pub fn leray_project_dir(a: Vec2, l: ModeIndex, g: &TorusGeometry) -> Vec2 {
    let p = perp_q(l, g);
    p.scale(a.dot(p))
}

/// All canonical mode indices with `|m| ≤ trunc`, in lexicographic order.
pub fn canonical_modes(trunc: u32) -> Vec<ModeIndex> {
    let n = trunc as i64;
    let mut out = Vec::new();
    for m1 in 0..=n {
        for m2 in -n..=n {
            if m1.abs() + m2.abs() > n {
                continue;
            }
            if let Ok(m) = ModeIndex::new(m1, m2) {
                if m.is_canonical() {
                    out.push(m);
                }
            }
        }
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(q1: f64, q2: f64) -> TorusGeometry {
        TorusGeometry::new(q1, q2).unwrap()
    }

    fn m(m1: i64, m2: i64) -> ModeIndex {
        ModeIndex::new(m1, m2).unwrap()
    }

    #[test]
    fn inner_q_direct_evaluation() {
        assert_eq!(inner_q(Vec2::new(1.0, 2.0), Vec2::new(3.0, 4.0), &q(1.0, 2.0)), 7.0);
        assert_eq!(inner_q(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0), &q(1.0, 1.0)), 0.0);
        assert_eq!(inner_q(Vec2::new(2.0, 3.0), Vec2::new(2.0, 3.0), &q(2.0, 3.0)), 5.0);
    }

    #[test]
    fn perp_q_convention() {
        let p = perp_q(m(1, 0), &q(1.0, 1.0));
        assert!((p.x - 0.0).abs() < 1e-15 && (p.y - 1.0).abs() < 1e-15);

        let p = perp_q(m(1, 1), &q(1.0, 2.0));
        let s5 = 5.0_f64.sqrt();
        assert!((p.x + 1.0 / s5).abs() < 1e-15);
        assert!((p.y - 2.0 / s5).abs() < 1e-15);
        assert!(inner_q(m(1, 1).as_vec(), p, &q(1.0, 2.0)).abs() < 1e-15);

        let p = perp_q(m(0, 3), &q(2.0, 1.0));
        assert!((p.x + 1.0).abs() < 1e-15 && p.y.abs() < 1e-15);
        assert!(inner_q(m(0, 3).as_vec(), p, &q(2.0, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn leray_projection_examples() {
        let g = q(1.0, 1.0);
        let l = m(1, 1);
        let perp = perp_q(l, &g);
        // Identity on the span.
        let out = leray_project_dir(perp, l, &g);
        assert!((out - perp).norm() < 1e-15);
        // Kernel: Euclidean-orthogonal input maps to zero.
        let ker = leray_project_dir(perp.perp(), l, &g);
        assert!(ker.norm() < 1e-15);
        // Hand-computed: a=(1,0), l=(1,1), q=(1,1) → l^{q,⊥}=(−1,1)/√2, P a = (1/2, −1/2).
        let out = leray_project_dir(Vec2::new(1.0, 0.0), l, &g);
        assert!((out.x - 0.5).abs() < 1e-15 && (out.y + 0.5).abs() < 1e-15);
    }

    #[test]
    fn stokes_eigenvalues() {
        assert_eq!(stokes_eigenvalue(m(1, 0), &q(1.0, 1.0)), 1.0);
        assert_eq!(stokes_eigenvalue(m(2, 1), &q(1.0, 1.0)), 5.0);
        assert_eq!(stokes_eigenvalue(m(1, 1), &q(2.0, 1.0)), 1.25);
    }

    #[test]
    fn zero_mode_rejected() {
        assert_eq!(ModeIndex::new(0, 0), Err(GeometryError::ZeroMode));
        assert!(TorusGeometry::new(0.0, 1.0).is_err());
        assert!(TorusGeometry::new(1.0, -2.0).is_err());
    }

    #[test]
    fn canonical_mode_enumeration() {
        // |m| ≤ N has 2N² + 2N nonzero lattice points, half of them canonical.
        for n in 1..=6u32 {
            let count = canonical_modes(n).len() as i64;
            let n = n as i64;
            assert_eq!(count, n * n + n);
        }
        assert!(canonical_modes(4).iter().all(|m| m.is_canonical()));
    }

    #[test]
    fn perp_sweep_all_modes() {
        // ⟨m, m^{q,⊥}⟩_q = 0 and |m^{q,⊥}| = 1 over the |m| ≤ 20 sweep.
        for &(q1, q2) in &[(1.0, 1.0), (0.1, 10.0), (2.7, 0.4), (5.5, 9.1)] {
            let g = q(q1, q2);
            for mm in canonical_modes(20) {
                let p = perp_q(mm, &g);
                assert!(inner_q(mm.as_vec(), p, &g).abs() < 1e-12 * mm.as_vec().norm());
                assert!((p.norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    proptest! {
        #[test]
        fn leray_projection_idempotent(
            ax in -10.0f64..10.0, ay in -10.0f64..10.0,
            m1 in -8i64..8, m2 in -8i64..8,
            q1 in 0.1f64..10.0, q2 in 0.1f64..10.0,
        ) {
            prop_assume!(m1 != 0 || m2 != 0);
            let g = TorusGeometry::new(q1, q2).unwrap();
            let l = ModeIndex::new(m1, m2).unwrap();
            let a = Vec2::new(ax, ay);
            let once = leray_project_dir(a, l, &g);
            let twice = leray_project_dir(once, l, &g);
            prop_assert!((twice - once).norm() <= 1e-14 * (1.0 + a.norm()));
        }

        #[test]
        fn perp_q_orthogonal_unit(
            m1 in -20i64..20, m2 in -20i64..20,
            q1 in 0.1f64..10.0, q2 in 0.1f64..10.0,
        ) {
            prop_assume!(m1 != 0 || m2 != 0);
            let g = TorusGeometry::new(q1, q2).unwrap();
            let mm = ModeIndex::new(m1, m2).unwrap();
            let p = perp_q(mm, &g);
            prop_assert!(g.inner_q(mm.as_vec(), p).abs() < 1e-12 * mm.as_vec().norm());
            prop_assert!((p.norm() - 1.0).abs() < 1e-14);
        }
    }
}
