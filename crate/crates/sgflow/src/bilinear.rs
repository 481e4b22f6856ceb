//! The bilinear operator `B(U₁,U₂) = P(rot U₁ × (I−αΔ)^{-1}U₂)`, in closed
//! mode-pair form and by an independent grid-quadrature oracle.
//!
//! For wave inputs `f̃_m cos⟨m,x⟩_q` (or `sin`), the operator produces
//! contributions only at `m−n` and `m+n`, with vectors lying in
//! `span{(m±n)^{q,⊥}}` and the Helmholtz factor `(1 + α‖n‖_q²)^{-1}`
//! attached to the second argument's index. Contributions above the
//! truncation are dropped (Galerkin closure) and their L² mass is
//! reported as a spillover diagnostic.

use crate::field::{FieldError, FluidParams, Parity, SpectralField};
use crate::geometry::{
    canonical_modes, leray_project_dir, perp_q, stokes_eigenvalue, ModeIndex, TorusGeometry, Vec2,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BilinearError {
    #[error("input vector is not q-orthogonal to its mode index (residual {0:.3e})")]
    ContractViolation(f64),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("grid of {got} points per axis aliases products; need at least {need}")]
    Aliasing { got: u32, need: u32 },
}

/// One projected contribution of a mode-pair interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contribution {
    /// Output lattice vector, exactly `m−n` or `m+n` (not canonicalized).
    pub mode: ModeIndex,
    pub parity: Parity,
    /// Vector in `span{mode^{q,⊥}}`.
    pub vector: Vec2,
}

/// Per-pair sign table against the four closed-form products:
/// `(sign at m−n, sign at m+n, output parity)` for a base coefficient
/// `½(1+α‖n‖_q²)^{-1}⟨ṽ₁^⊥, m⟩_q`.
fn pair_signs(p1: Parity, p2: Parity) -> (f64, f64, Parity) {
    match (p1, p2) {
        (Parity::Cos, Parity::Sin) => (1.0, -1.0, Parity::Cos),
        (Parity::Sin, Parity::Cos) => (-1.0, -1.0, Parity::Cos),
        (Parity::Cos, Parity::Cos) => (1.0, 1.0, Parity::Sin),
        (Parity::Sin, Parity::Sin) => (1.0, -1.0, Parity::Sin),
    }
}

/// Closed-form interaction of two single wave terms.
///
/// The first argument is `ṽ₁ cos⟨m,x⟩_q` (parity cos) or `ṽ₁ sin⟨m,x⟩_q`,
/// likewise the second at index `n`. Both vectors must satisfy
/// `⟨ṽ, idx⟩_q = 0` (they are divergence-free wave amplitudes); violations
/// are rejected. Output modes `m±n = 0` contribute nothing.
pub fn interact(
    m: ModeIndex,
    p1: Parity,
    v1: Vec2,
    n: ModeIndex,
    p2: Parity,
    v2: Vec2,
    p: &FluidParams,
    g: &TorusGeometry,
) -> Result<Vec<Contribution>, BilinearError> {
    for (idx, v) in [(m, v1), (n, v2)] {
        let res = g.inner_q(idx.as_vec(), v).abs();
        let scale = idx.as_vec().norm() * v.norm();
        if res > 1e-10 * scale.max(1e-300) {
            return Err(BilinearError::ContractViolation(res));
        }
    }
    let pref = 0.5 / (1.0 + p.alpha * stokes_eigenvalue(n, g));
    let r1 = g.inner_q(v1.perp(), m.as_vec());
    let v2p = v2.perp();
    let (s_diff, s_sum, parity) = pair_signs(p1, p2);
    let mut out = Vec::with_capacity(2);
    for (l, sign) in [(m.checked_sub(n), s_diff), (m.checked_add(n), s_sum)] {
        if let Some(l) = l {
            let vector = leray_project_dir(v2p, l, g).scale(sign * pref * r1);
            if vector.x != 0.0 || vector.y != 0.0 {
                out.push(Contribution {
                    mode: l,
                    parity,
                    vector,
                });
            }
        }
    }
    Ok(out)
}

/// Dense lattice accumulator for interaction outputs: rows within the
/// truncation build the result, rows above it (up to `2·trunc`) feed the
/// spillover diagnostic. Accumulation order is fixed by the slot loops,
/// so results are bitwise deterministic.
struct LatticeAccumulator {
    trunc: i64,
    half: i64,
    side: i64,
    cells: Vec<(f64, f64)>,
}

impl LatticeAccumulator {
    fn new(trunc: u32) -> Self {
        let half = 2 * trunc as i64;
        let side = 2 * half + 1;
        LatticeAccumulator {
            trunc: trunc as i64,
            half,
            side,
            cells: vec![(0.0, 0.0); (side * side) as usize],
        }
    }

    fn index(&self, m: ModeIndex) -> usize {
        ((m.m1() + self.half) * self.side + (m.m2() + self.half)) as usize
    }

    /// Accumulate `scalar · P_l(dir)` at `l`. The direction is dotted with
    /// the perp BEFORE scaling so that exact geometric orthogonality (e.g.
    /// self-interactions, where `dir ⊥ l^{q,⊥}` holds bitwise) yields an
    /// exact zero.
    fn add_wave(&mut self, g: &TorusGeometry, l: ModeIndex, parity: Parity, dir: Vec2, scalar: f64) {
        debug_assert!(l.level() as i64 <= 2 * self.trunc);
        let (canon, flipped) = l.canonical();
        let proj = dir.dot(perp_q(canon, g));
        if proj == 0.0 || scalar == 0.0 {
            return;
        }
        let amp = proj * scalar;
        let idx = self.index(canon);
        let cell = &mut self.cells[idx];
        match (parity, flipped) {
            (Parity::Cos, _) => cell.0 += amp,
            (Parity::Sin, false) => cell.1 += amp,
            (Parity::Sin, true) => cell.1 -= amp,
        }
    }

    fn harvest(self, g: TorusGeometry) -> (SpectralField, f64) {
        let mut within = SpectralField::zero(g, self.trunc as u32);
        let kappa = g.basis_mass();
        let mut spill_sq = 0.0;
        for m in canonical_modes(2 * self.trunc as u32) {
            let (a, b) = self.cells[self.index(m)];
            if a == 0.0 && b == 0.0 {
                continue;
            }
            if m.level() as i64 <= self.trunc {
                within.add_coeff(m, Parity::Cos, a).expect("within truncation");
                within.add_coeff(m, Parity::Sin, b).expect("within truncation");
            } else {
                spill_sq += (a * a + b * b) * kappa;
            }
        }
        within.prune();
        (within, spill_sq.sqrt())
    }
}

/// `B(U, V)` summed in closed form over all mode pairs, truncated to the
/// inputs' truncation. Returns the field together with the L² norm of the
/// dropped above-truncation contributions.
pub fn full_b(
    u: &SpectralField,
    v: &SpectralField,
    p: &FluidParams,
) -> Result<(SpectralField, f64), BilinearError> {
    if u.geometry() != v.geometry() {
        return Err(BilinearError::Field(FieldError::GeometryMismatch));
    }
    if u.trunc() != v.trunc() {
        return Err(BilinearError::Field(FieldError::TruncationMismatch(
            u.trunc(),
            v.trunc(),
        )));
    }
    let g = *u.geometry();

    // First-slot waves carry the rot factor ⟨ṽ^⊥, m⟩_q = −coeff·‖m‖_q;
    // second-slot waves carry ṽ^⊥ and the Helmholtz prefactor.
    struct Left {
        m: ModeIndex,
        parity: Parity,
        rot: f64,
    }
    struct Right {
        n: ModeIndex,
        parity: Parity,
        /// `perp(n)^⊥`, unscaled; the coefficient rides in `amp`.
        dir2p: Vec2,
        amp: f64,
        pref: f64,
    }

    let mut left = Vec::new();
    for (m, c) in u.iter() {
        let nq = stokes_eigenvalue(*m, &g).sqrt();
        if c.a != 0.0 {
            left.push(Left {
                m: *m,
                parity: Parity::Cos,
                rot: -c.a * nq,
            });
        }
        if c.b != 0.0 {
            left.push(Left {
                m: *m,
                parity: Parity::Sin,
                rot: -c.b * nq,
            });
        }
    }
    let mut right = Vec::new();
    for (n, c) in v.iter() {
        let pref = 0.5 / (1.0 + p.alpha * stokes_eigenvalue(*n, &g));
        let dir2p = perp_q(*n, &g).perp();
        if c.a != 0.0 {
            right.push(Right {
                n: *n,
                parity: Parity::Cos,
                dir2p,
                amp: c.a,
                pref,
            });
        }
        if c.b != 0.0 {
            right.push(Right {
                n: *n,
                parity: Parity::Sin,
                dir2p,
                amp: c.b,
                pref,
            });
        }
    }

    let mut acc = LatticeAccumulator::new(u.trunc());
    for l in &left {
        for r in &right {
            let base = l.rot * r.pref * r.amp;
            if base == 0.0 {
                continue;
            }
            let (s_diff, s_sum, parity) = pair_signs(l.parity, r.parity);
            if let Some(ld) = l.m.checked_sub(r.n) {
                acc.add_wave(&g, ld, parity, r.dir2p, s_diff * base);
            }
            if let Some(ls) = l.m.checked_add(r.n) {
                acc.add_wave(&g, ls, parity, r.dir2p, s_sum * base);
            }
        }
    }
    Ok(acc.harvest(g))
}

/// Independent oracle for `B(U, V)`: evaluate `rot U` and `(I−αΔ)^{-1}V` on
/// a spatial grid, form the cross product pointwise, and project back onto
/// the basis by quadrature (which is simultaneously the Leray projection).
///
/// The equal-weight periodic grid rule is exact for trigonometric products
/// of total per-axis degree below the grid size; `grid ≥ 4·trunc + 1` keeps
/// a margin over the 3·trunc the triple products need.
pub fn direct_b(
    u: &SpectralField,
    v: &SpectralField,
    p: &FluidParams,
    grid: u32,
) -> Result<SpectralField, BilinearError> {
    if u.geometry() != v.geometry() {
        return Err(BilinearError::Field(FieldError::GeometryMismatch));
    }
    if u.trunc() != v.trunc() {
        return Err(BilinearError::Field(FieldError::TruncationMismatch(
            u.trunc(),
            v.trunc(),
        )));
    }
    let need = 4 * u.trunc() + 1;
    if grid < need {
        return Err(BilinearError::Aliasing { got: grid, need });
    }
    let g = *u.geometry();
    let n = grid as usize;
    let two_pi = 2.0 * std::f64::consts::PI;
    let w = v.helmholtz(p, true);

    let mut points = Vec::with_capacity(n * n);
    let mut cross = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let x = Vec2::new(
                two_pi * g.q1() * (i as f64) / (n as f64),
                two_pi * g.q2() * (j as f64) / (n as f64),
            );
            // rot U × w with the 2D identification: (0,0,λ) × (w,0) = λ w^⊥.
            let val = w.eval_at(x).perp().scale(u.eval_vorticity_at(x));
            points.push(x);
            cross.push(val);
        }
    }

    // ⟨cross, c_l⟩/κ and ⟨cross, s_l⟩/κ; the pairing with the
    // divergence-free basis extracts the Leray-projected coefficients.
    let mut out = SpectralField::zero(g, u.trunc());
    let inv = 2.0 / ((n * n) as f64); // cell·(1/κ) = (area/n²)·(2/area)
    for l in canonical_modes(u.trunc()) {
        let dir = perp_q(l, &g);
        let mut a = 0.0;
        let mut b = 0.0;
        for (x, val) in points.iter().zip(cross.iter()) {
            let phase = g.inner_q(l.as_vec(), *x);
            let proj = val.dot(dir);
            a += proj * phase.cos();
            b += proj * phase.sin();
        }
        out.add_coeff(l, Parity::Cos, a * inv).expect("within truncation");
        out.add_coeff(l, Parity::Sin, b * inv).expect("within truncation");
    }
    out.prune();
    Ok(out)
}

/// Both sides of the two continuity estimates, constant-free, so tests can
/// fit the constant on one sample family and validate on a fresh one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBounds {
    /// `‖V‖_{V²}·‖U‖_{V²}` (majorant shape for the V¹ estimate).
    pub bound_v1: f64,
    /// `‖V‖_{V²}·‖U‖_{V³}` (majorant shape for the V² estimate).
    pub bound_v2: f64,
    /// `‖B(U,V)‖_{V¹}`.
    pub actual_v1: f64,
    /// `‖B(U,V)‖_{V²}`.
    pub actual_v2: f64,
}

pub fn bilinear_norm_bounds(
    u: &SpectralField,
    v: &SpectralField,
    p: &FluidParams,
) -> Result<NormBounds, BilinearError> {
    let (b, _) = full_b(u, v, p)?;
    Ok(NormBounds {
        bound_v1: v.sobolev_norm(2.0) * u.sobolev_norm(2.0),
        bound_v2: v.sobolev_norm(2.0) * u.sobolev_norm(3.0),
        actual_v1: b.sobolev_norm(1.0),
        actual_v2: b.sobolev_norm(2.0),
    })
}

/// Vorticity pairing `⟨rot X, rot Y⟩_{L²} = Σ_m ‖m‖_q²(a a' + b b')κ`.
pub fn vorticity_pairing(x: &SpectralField, y: &SpectralField) -> f64 {
    let g = x.geometry();
    let kappa = g.basis_mass();
    let mut acc = 0.0;
    for (m, c) in x.iter() {
        let lam = stokes_eigenvalue(*m, g);
        let a2 = y.coeff(*m, Parity::Cos);
        let b2 = y.coeff(*m, Parity::Sin);
        acc += lam * (c.a * a2 + c.b * b2) * kappa;
    }
    acc
}
