//! Truncated divergence-free vector fields in the `{c_m, s_m}` basis,
//! with the diagonal operators that act on them.
//!
//! A field is `Σ_m a_m c_m + b_m s_m` where `c_m = m^{q,⊥} cos⟨m,x⟩_q`
//! and `s_m = m^{q,⊥} sin⟨m,x⟩_q`. Coefficients are stored on the
//! canonical half-lattice only (first nonzero component positive), with
//! the redundancy convention `c_{−m} = c_m`, `s_{−m} = −s_m` applied when
//! a non-canonical representative is supplied. The basis is orthogonal
//! but not normalized: each basis function carries L² mass
//! `κ = (2π)² q1 q2 / 2`.

use crate::geometry::{
    canonical_modes, perp_q, stokes_eigenvalue, GeometryError, ModeIndex, TorusGeometry, Vec2,
};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Which trigonometric factor a coefficient multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Cos,
    Sin,
}

impl Parity {
    pub fn label(&self) -> &'static str {
        match self {
            Parity::Cos => "cos",
            Parity::Sin => "sin",
        }
    }
}

/// Fluid parameters: the elastic length `α > 0` and viscosity `ν > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluidParams {
    pub alpha: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("fluid parameters must be positive: alpha={alpha}, nu={nu}")]
    NonPositiveParams { alpha: f64, nu: f64 },
    #[error("fields live on different geometries")]
    GeometryMismatch,
    #[error("fields have different truncations: {0} vs {1}")]
    TruncationMismatch(u32, u32),
    #[error("mode {0} exceeds truncation {1}")]
    ModeBeyondTruncation(ModeIndex, u32),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl FluidParams {
    pub fn new(alpha: f64, nu: f64) -> Result<Self, FieldError> {
        if !(alpha > 0.0 && nu > 0.0) {
            return Err(FieldError::NonPositiveParams { alpha, nu });
        }
        Ok(FluidParams { alpha, nu })
    }

    /// Helmholtz multiplier `1 + α‖m‖_q²`.
    pub fn helmholtz_multiplier(&self, m: ModeIndex, g: &TorusGeometry) -> f64 {
        1.0 + self.alpha * stokes_eigenvalue(m, g)
    }

    /// Eigenvalue `ν‖m‖_q² / (1 + α‖m‖_q²)` of the dissipative operator.
    pub fn l_eigenvalue(&self, m: ModeIndex, g: &TorusGeometry) -> f64 {
        let lam = stokes_eigenvalue(m, g);
        self.nu * lam / (1.0 + self.alpha * lam)
    }
}

/// Coefficient pair of one canonical mode: `a` on `c_m`, `b` on `s_m`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Coeffs {
    pub a: f64,
    pub b: f64,
}

/// A truncated divergence-free, zero-mean vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    geom: TorusGeometry,
    trunc: u32,
    coeffs: BTreeMap<ModeIndex, Coeffs>,
}

impl SpectralField {
    pub fn zero(geom: TorusGeometry, trunc: u32) -> Self {
        SpectralField {
            geom,
            trunc,
            coeffs: BTreeMap::new(),
        }
    }

    /// A single basis mode with amplitude `amp`. Any representative of the
    /// mode pair is accepted.
    pub fn single_mode(
        geom: TorusGeometry,
        trunc: u32,
        m: ModeIndex,
        parity: Parity,
        amp: f64,
    ) -> Result<Self, FieldError> {
        let mut f = SpectralField::zero(geom, trunc);
        f.add_coeff(m, parity, amp)?;
        Ok(f)
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geom
    }

    pub fn trunc(&self) -> u32 {
        self.trunc
    }

    /// Iterate over nonzero canonical-mode coefficients.
    pub fn iter(&self) -> impl Iterator<Item = (&ModeIndex, &Coeffs)> {
        self.coeffs.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.values().all(|c| c.a == 0.0 && c.b == 0.0)
    }

    fn check_compatible(&self, other: &SpectralField) -> Result<(), FieldError> {
        if self.geom != other.geom {
            return Err(FieldError::GeometryMismatch);
        }
        if self.trunc != other.trunc {
            return Err(FieldError::TruncationMismatch(self.trunc, other.trunc));
        }
        Ok(())
    }

    /// Coefficient pair of a mode; non-canonical representatives are
    /// converted by `c_{−m} = c_m`, `s_{−m} = −s_m`.
    pub fn coeff(&self, m: ModeIndex, parity: Parity) -> f64 {
        let (canon, flipped) = m.canonical();
        let c = self.coeffs.get(&canon).copied().unwrap_or_default();
        match (parity, flipped) {
            (Parity::Cos, _) => c.a,
            (Parity::Sin, false) => c.b,
            (Parity::Sin, true) => -c.b,
        }
    }

    /// Add `amp` to a basis coefficient, accepting any representative of the
    /// mode pair (redundancy convention `c_{−m} = c_m`, `s_{−m} = −s_m`).
    pub fn add_coeff(&mut self, m: ModeIndex, parity: Parity, amp: f64) -> Result<(), FieldError> {
        if m.level() > self.trunc {
            return Err(FieldError::ModeBeyondTruncation(m, self.trunc));
        }
        let (canon, flipped) = m.canonical();
        let entry = self.coeffs.entry(canon).or_default();
        match (parity, flipped) {
            (Parity::Cos, _) => entry.a += amp,
            (Parity::Sin, false) => entry.b += amp,
            (Parity::Sin, true) => entry.b -= amp,
        }
        Ok(())
    }

    /// Add the Leray projection of a literal wave term `v·cos⟨m,x⟩_q`
    /// (or `sin`) for an arbitrary nonzero lattice vector `m`.
    ///
    /// The trigonometric identities `cos⟨−m,x⟩ = cos⟨m,x⟩` and
    /// `sin⟨−m,x⟩ = −sin⟨m,x⟩` are applied to land on the canonical
    /// representative, and `v` is projected onto `span{m^{q,⊥}}`, which is
    /// exactly the mode-wise Leray projection.
    pub fn add_wave(&mut self, m: ModeIndex, parity: Parity, v: Vec2) -> Result<(), FieldError> {
        if m.level() > self.trunc {
            return Err(FieldError::ModeBeyondTruncation(m, self.trunc));
        }
        let (canon, flipped) = m.canonical();
        let dir = perp_q(canon, &self.geom);
        let amp = v.dot(dir);
        let entry = self.coeffs.entry(canon).or_default();
        match (parity, flipped) {
            (Parity::Cos, _) => entry.a += amp,
            (Parity::Sin, false) => entry.b += amp,
            (Parity::Sin, true) => entry.b -= amp,
        }
        Ok(())
    }

    /// `self + s·other`.
    pub fn axpy(&mut self, s: f64, other: &SpectralField) -> Result<(), FieldError> {
        self.check_compatible(other)?;
        for (m, c) in other.coeffs.iter() {
            let entry = self.coeffs.entry(*m).or_default();
            entry.a += s * c.a;
            entry.b += s * c.b;
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> SpectralField {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            c.a *= s;
            c.b *= s;
        }
        out
    }

    pub fn add(&self, other: &SpectralField) -> Result<SpectralField, FieldError> {
        let mut out = self.clone();
        out.axpy(1.0, other)?;
        Ok(out)
    }

    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField, FieldError> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// Apply a mode-diagonal multiplier.
    pub fn map_multiplier(&self, mul: impl Fn(ModeIndex) -> f64) -> SpectralField {
        let mut out = self.clone();
        for (m, c) in out.coeffs.iter_mut() {
            let s = mul(*m);
            c.a *= s;
            c.b *= s;
        }
        out
    }

    /// The Helmholtz transform `u ↦ (I − αΔ)u` (coefficient of mode `m`
    /// multiplied by `1 + α‖m‖_q²`), or its exact inverse.
    pub fn helmholtz(&self, p: &FluidParams, inverse: bool) -> SpectralField {
        let geom = self.geom;
        self.map_multiplier(|m| {
            let h = p.helmholtz_multiplier(m, &geom);
            if inverse {
                1.0 / h
            } else {
                h
            }
        })
    }

    /// The dissipative operator `LU = −νPΔ(I−αΔ)^{-1}U`, mode-diagonal with
    /// eigenvalue `ν‖m‖_q²/(1 + α‖m‖_q²)`, so `∂_t U + LU` decays.
    pub fn op_l(&self, p: &FluidParams) -> SpectralField {
        let geom = self.geom;
        self.map_multiplier(|m| p.l_eigenvalue(m, &geom))
    }

    /// Multiplier Sobolev norm
    /// `( Σ_m (1 + ‖m‖_q²)^s (a_m² + b_m²) κ )^{1/2}` with `κ` the basis
    /// mass; coincides with the L² norm at `s = 0`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        debug_assert!(s >= 0.0);
        let kappa = self.geom.basis_mass();
        let mut acc = 0.0;
        for (m, c) in self.coeffs.iter() {
            let w = (1.0 + stokes_eigenvalue(*m, &self.geom)).powf(s);
            acc += w * (c.a * c.a + c.b * c.b) * kappa;
        }
        acc.sqrt()
    }

    /// L² norm of the scalar vorticity `rot u`:
    /// `( Σ_m ‖m‖_q² (a_m² + b_m²) κ )^{1/2}`.
    pub fn vorticity_l2_norm(&self) -> f64 {
        let kappa = self.geom.basis_mass();
        let mut acc = 0.0;
        for (m, c) in self.coeffs.iter() {
            acc += stokes_eigenvalue(*m, &self.geom) * (c.a * c.a + c.b * c.b) * kappa;
        }
        acc.sqrt()
    }

    /// Zero all coefficients with `|m| > k`.
    pub fn project_level(&self, k: u32) -> SpectralField {
        let mut out = self.clone();
        out.coeffs.retain(|m, _| m.level() <= k);
        out
    }

    /// Sobolev norm of the part of the field outside the given slot set.
    pub fn norm_outside(&self, keep: &ModeSubspace, s: f64) -> f64 {
        let kappa = self.geom.basis_mass();
        let mut acc = 0.0;
        for (m, c) in self.coeffs.iter() {
            let w = (1.0 + stokes_eigenvalue(*m, &self.geom)).powf(s) * kappa;
            if !keep.contains_slot(*m, Parity::Cos) {
                acc += w * c.a * c.a;
            }
            if !keep.contains_slot(*m, Parity::Sin) {
                acc += w * c.b * c.b;
            }
        }
        acc.sqrt()
    }

    /// Slots carrying coefficients above `tol` in magnitude.
    pub fn support(&self, tol: f64) -> ModeSubspace {
        let mut sub = ModeSubspace::empty();
        for (m, c) in self.coeffs.iter() {
            if c.a.abs() > tol {
                sub.insert(*m, Parity::Cos);
            }
            if c.b.abs() > tol {
                sub.insert(*m, Parity::Sin);
            }
        }
        sub
    }

    /// Drop exact-zero entries (keeps comparisons and supports tight).
    pub fn prune(&mut self) {
        self.coeffs.retain(|_, c| c.a != 0.0 || c.b != 0.0);
    }

    /// Point value `u(x)` by direct trigonometric summation.
    pub fn eval_at(&self, x: Vec2) -> Vec2 {
        let mut out = Vec2::ZERO;
        for (m, c) in self.coeffs.iter() {
            let phase = self.geom.inner_q(m.as_vec(), x);
            let dir = perp_q(*m, &self.geom);
            out = out + dir.scale(c.a * phase.cos() + c.b * phase.sin());
        }
        out
    }

    /// Point value of the scalar vorticity `rot u` at `x`
    /// (`rot c_m = −‖m‖_q sin⟨m,x⟩_q`, `rot s_m = ‖m‖_q cos⟨m,x⟩_q`).
    pub fn eval_vorticity_at(&self, x: Vec2) -> f64 {
        let mut out = 0.0;
        for (m, c) in self.coeffs.iter() {
            let phase = self.geom.inner_q(m.as_vec(), x);
            let nq = stokes_eigenvalue(*m, &self.geom).sqrt();
            out += nq * (-c.a * phase.sin() + c.b * phase.cos());
        }
        out
    }

    /// Maximum `|m|` over nonzero coefficients, 0 for the zero field.
    pub fn max_level(&self) -> u32 {
        self.coeffs
            .iter()
            .filter(|(_, c)| c.a != 0.0 || c.b != 0.0)
            .map(|(m, _)| m.level())
            .max()
            .unwrap_or(0)
    }
}

/// Serialization schema: `{q: [q1,q2], trunc, modes: [{m, a, b}, ...]}`,
/// canonical half-lattice, lexicographically sorted.
#[derive(Serialize, Deserialize)]
struct FieldRepr {
    q: [f64; 2],
    trunc: u32,
    modes: Vec<ModeRepr>,
}

#[derive(Serialize, Deserialize)]
struct ModeRepr {
    m: [i64; 2],
    a: f64,
    b: f64,
}

impl Serialize for SpectralField {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let modes = self
            .coeffs
            .iter()
            .filter(|(_, c)| c.a != 0.0 || c.b != 0.0)
            .map(|(m, c)| ModeRepr {
                m: (*m).into(),
                a: c.a,
                b: c.b,
            })
            .collect();
        FieldRepr {
            q: [self.geom.q1(), self.geom.q2()],
            trunc: self.trunc,
            modes,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for SpectralField {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let repr = FieldRepr::deserialize(de)?;
        let geom = TorusGeometry::new(repr.q[0], repr.q[1]).map_err(D::Error::custom)?;
        let mut f = SpectralField::zero(geom, repr.trunc);
        for mode in repr.modes {
            let m = ModeIndex::try_from(mode.m).map_err(D::Error::custom)?;
            f.add_coeff(m, Parity::Cos, mode.a).map_err(D::Error::custom)?;
            f.add_coeff(m, Parity::Sin, mode.b).map_err(D::Error::custom)?;
        }
        Ok(f)
    }
}

/// A finite set of (canonical mode, parity) slots; represents the spaces
/// `E`, `H^N_q`, `E_j`. Each slot is a one-dimensional direction, so a set
/// of slots is exactly a slot-aligned subspace.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModeSubspace {
    entries: BTreeSet<(ModeIndex, Parity)>,
}

impl ModeSubspace {
    pub fn empty() -> Self {
        ModeSubspace::default()
    }

    /// `H^N_q`: all slots with `|m| ≤ N`, both parities.
    pub fn h_n(n: u32) -> Self {
        let mut sub = ModeSubspace::empty();
        for m in canonical_modes(n) {
            sub.insert(m, Parity::Cos);
            sub.insert(m, Parity::Sin);
        }
        sub
    }

    pub fn insert(&mut self, m: ModeIndex, parity: Parity) {
        let (canon, _) = m.canonical();
        self.entries.insert((canon, parity));
    }

    pub fn contains_slot(&self, m: ModeIndex, parity: Parity) -> bool {
        let (canon, _) = m.canonical();
        self.entries.contains(&(canon, parity))
    }

    pub fn contains(&self, other: &ModeSubspace) -> bool {
        other.entries.is_subset(&self.entries)
    }

    /// Whether every coefficient of `f` above `tol` sits in this subspace.
    pub fn contains_field(&self, f: &SpectralField, tol: f64) -> bool {
        self.contains(&f.support(tol))
    }

    pub fn union(&self, other: &ModeSubspace) -> ModeSubspace {
        ModeSubspace {
            entries: self.entries.union(&other.entries).cloned().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(ModeIndex, Parity)> {
        self.entries.iter()
    }
}
