//! Time integration of the controlled, extended, and perturbed systems,
//! plus the diagonal kernel operator and a-priori-estimate monitors.
//!
//! The dissipative part `L` is mode-diagonal, so it is treated exactly by
//! exponential integrating factors; the bilinear term and forcings go
//! through an explicit exponential Runge–Kutta rule (ETD-RK2 or the
//! classical four-stage ETD-RK4). Step boundaries are snapped to the
//! forcings' breakpoints so each step sees smooth data.

use crate::bilinear::{full_b, BilinearError};
use crate::field::{FieldError, FluidParams, SpectralField};
use crate::geometry::ModeIndex;
use crate::signal::{ControlSignal, Forcing};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("solution norm {norm:.3e} exceeded the blow-up ceiling at t = {t}")]
    Divergence { t: f64, norm: f64 },
    #[error("nonpositive step size {0}")]
    BadStep(f64),
    #[error("nonpositive horizon {0}")]
    BadHorizon(f64),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Bilinear(#[from] BilinearError),
}

/// Integration scheme for the non-stiff part.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    EtdRk2,
    EtdRk4Classical,
}

impl Scheme {
    pub fn order(&self) -> f64 {
        match self {
            Scheme::EtdRk2 => 2.0,
            Scheme::EtdRk4Classical => 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub params: FluidParams,
    /// Blow-up ceiling: `factor · max(1, ‖U0‖_{V¹})`.
    pub blowup_factor: f64,
    /// Keep every `store_stride`-th state (the final state is always kept).
    pub store_stride: usize,
}

impl IntegratorConfig {
    pub fn new(dt: f64, scheme: Scheme, params: FluidParams) -> Self {
        IntegratorConfig {
            dt,
            scheme,
            params,
            blowup_factor: 1e6,
            store_stride: 1,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.store_stride = stride.max(1);
        self
    }
}

/// Per-step norms and the bilinear truncation spillover seen that step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    pub norm_v0: f64,
    pub norm_v1: f64,
    pub norm_v3: f64,
    pub vorticity_l2: f64,
    pub spillover: f64,
}

/// A time-discrete solution: diagnostics at every step, states at the
/// configured stride (plus the final state).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub diagnostics: Vec<StepDiagnostics>,
    pub stored_indices: Vec<usize>,
    pub states: Vec<SpectralField>,
}

impl Trajectory {
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("non-empty trajectory")
    }

    pub fn final_state(&self) -> &SpectralField {
        self.states.last().expect("non-empty trajectory")
    }

    pub fn initial_state(&self) -> &SpectralField {
        &self.states[0]
    }

    /// Stored states with their times.
    pub fn stored(&self) -> impl Iterator<Item = (f64, &SpectralField)> {
        self.stored_indices
            .iter()
            .zip(self.states.iter())
            .map(|(i, s)| (self.times[*i], s))
    }

    /// Stored state closest in time to `t`.
    pub fn state_near(&self, t: f64) -> &SpectralField {
        let mut best = 0;
        let mut gap = f64::INFINITY;
        for (k, i) in self.stored_indices.iter().enumerate() {
            let d = (self.times[*i] - t).abs();
            if d < gap {
                gap = d;
                best = k;
            }
        }
        &self.states[best]
    }
}

/// φ-functions `φ_k(z) = Σ_j z^j/(j+k)!` with series fallback near zero.
fn phi(k: u32, z: f64) -> f64 {
    if z.abs() < 0.25 {
        let mut fact = 1.0;
        for j in 2..=k {
            fact *= j as f64;
        }
        let mut term = 1.0 / fact; // z⁰/(k)!
        let mut acc = term;
        let mut j = 1.0;
        loop {
            term *= z / (j + k as f64);
            acc += term;
            if term.abs() < 1e-20 * acc.abs().max(1e-300) || j > 40.0 {
                return acc;
            }
            j += 1.0;
        }
    }
    match k {
        1 => z.exp_m1() / z,
        2 => (z.exp_m1() - z) / (z * z),
        3 => (z.exp_m1() - z - 0.5 * z * z) / (z * z * z),
        _ => unreachable!("only φ₁..φ₃ are used"),
    }
}

/// Step grid on `[0, horizon]`: every knot is hit exactly, knot spans are
/// subdivided by `dt`.
pub fn build_time_grid(horizon: f64, dt: f64, knots: &[f64]) -> Result<Vec<f64>, DynamicsError> {
    if !(horizon > 0.0) {
        return Err(DynamicsError::BadHorizon(horizon));
    }
    if !(dt > 0.0) {
        return Err(DynamicsError::BadStep(dt));
    }
    let mut anchors = vec![0.0, horizon];
    anchors.extend(
        knots
            .iter()
            .copied()
            .filter(|&t| t > 0.0 && t < horizon && t.is_finite()),
    );
    anchors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    anchors.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * horizon.max(1.0));
    let mut grid = Vec::new();
    for w in anchors.windows(2) {
        let span = w[1] - w[0];
        let n = (span / dt).ceil().max(1.0) as usize;
        for i in 0..n {
            grid.push(w[0] + span * (i as f64) / (n as f64));
        }
    }
    grid.push(horizon);
    Ok(grid)
}

struct StepTables {
    h: f64,
}

/// One integrator step on the transformed variable; `rhs` evaluates the
/// non-stiff part `N(u, t)` and reports bilinear spillover.
fn etd_step(
    u: &SpectralField,
    t: f64,
    tab: &StepTables,
    scheme: Scheme,
    p: &FluidParams,
    rhs: &mut dyn FnMut(&SpectralField, f64) -> Result<(SpectralField, f64), DynamicsError>,
) -> Result<(SpectralField, f64), DynamicsError> {
    let g = *u.geometry();
    let h = tab.h;
    let lam = move |m: ModeIndex| p.l_eigenvalue(m, &g);
    match scheme {
        Scheme::EtdRk2 => {
            let (n_u, s1) = rhs(u, t)?;
            let mut a = u.map_multiplier(|m| (-lam(m) * h).exp());
            a.axpy(1.0, &n_u.map_multiplier(|m| h * phi(1, -lam(m) * h)))?;
            let (n_a, s2) = rhs(&a, t + h)?;
            let mut diff = n_a;
            diff.axpy(-1.0, &n_u)?;
            a.axpy(1.0, &diff.map_multiplier(|m| h * phi(2, -lam(m) * h)))?;
            Ok((a, s1.max(s2)))
        }
        Scheme::EtdRk4Classical => {
            let h2 = 0.5 * h;
            let (n_u, s1) = rhs(u, t)?;
            let decay_half = u.map_multiplier(|m| (-lam(m) * h2).exp());

            let mut a = decay_half.clone();
            a.axpy(1.0, &n_u.map_multiplier(|m| h2 * phi(1, -lam(m) * h2)))?;
            let (n_a, s2) = rhs(&a, t + h2)?;

            let mut b = decay_half;
            b.axpy(1.0, &n_a.map_multiplier(|m| h2 * phi(1, -lam(m) * h2)))?;
            let (n_b, s3) = rhs(&b, t + h2)?;

            let mut c = a.map_multiplier(|m| (-lam(m) * h2).exp());
            let mut comb = n_b.scaled(2.0);
            comb.axpy(-1.0, &n_u)?;
            c.axpy(1.0, &comb.map_multiplier(|m| h2 * phi(1, -lam(m) * h2)))?;
            let (n_c, s4) = rhs(&c, t + h)?;

            let mut out = u.map_multiplier(|m| (-lam(m) * h).exp());
            let f = |k: u32, m: ModeIndex| phi(k, -lam(m) * h);
            out.axpy(
                1.0,
                &n_u.map_multiplier(|m| h * (f(1, m) - 3.0 * f(2, m) + 4.0 * f(3, m))),
            )?;
            let mut ab = n_a;
            ab.axpy(1.0, &n_b)?;
            out.axpy(
                1.0,
                &ab.map_multiplier(|m| h * (2.0 * f(2, m) - 4.0 * f(3, m))),
            )?;
            out.axpy(
                1.0,
                &n_c.map_multiplier(|m| h * (4.0 * f(3, m) - f(2, m))),
            )?;
            Ok((out, s1.max(s2).max(s3).max(s4)))
        }
    }
}

fn diagnostics_of(u: &SpectralField, spill: f64) -> StepDiagnostics {
    StepDiagnostics {
        norm_v0: u.sobolev_norm(0.0),
        norm_v1: u.sobolev_norm(1.0),
        norm_v3: u.sobolev_norm(3.0),
        vorticity_l2: u.vorticity_l2_norm(),
        spillover: spill,
    }
}

fn integrate_system(
    u0: &SpectralField,
    mut rhs: impl FnMut(&SpectralField, f64) -> Result<(SpectralField, f64), DynamicsError>,
    knots: Vec<f64>,
    cfg: &IntegratorConfig,
    horizon: f64,
) -> Result<Trajectory, DynamicsError> {
    let grid = build_time_grid(horizon, cfg.dt, &knots)?;
    let ceiling = cfg.blowup_factor * u0.sobolev_norm(1.0).max(1.0);
    let mut u = u0.clone();
    u.prune();

    let steps = grid.len() - 1;
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        diagnostics: Vec::with_capacity(steps + 1),
        stored_indices: Vec::new(),
        states: Vec::new(),
    };
    traj.times.push(0.0);
    traj.diagnostics.push(diagnostics_of(&u, 0.0));
    traj.stored_indices.push(0);
    traj.states.push(u.clone());

    for i in 0..steps {
        let t = grid[i];
        let h = grid[i + 1] - grid[i];
        let tab = StepTables { h };
        let (next, spill) = etd_step(&u, t, &tab, cfg.scheme, &cfg.params, &mut rhs)?;
        u = next;
        u.prune();
        let d = diagnostics_of(&u, spill);
        if !d.norm_v1.is_finite() || d.norm_v1 > ceiling {
            return Err(DynamicsError::Divergence {
                t: grid[i + 1],
                norm: d.norm_v1,
            });
        }
        traj.times.push(grid[i + 1]);
        traj.diagnostics.push(d);
        let last = i + 1 == steps;
        if last || (i + 1) % cfg.store_stride == 0 {
            traj.stored_indices.push(i + 1);
            traj.states.push(u.clone());
        }
    }
    Ok(traj)
}

/// Plain controlled system `∂_t U + LU + B(U,U) = Pf + η`.
pub fn integrate_plain(
    u0: &SpectralField,
    eta: &dyn Forcing,
    f: &dyn Forcing,
    cfg: &IntegratorConfig,
    horizon: f64,
) -> Result<Trajectory, DynamicsError> {
    let p = cfg.params;
    let mut knots = eta.knots();
    knots.extend(f.knots());
    integrate_system(
        u0,
        |u, t| {
            let (b, spill) = full_b(u, u, &p)?;
            let mut n = b.scaled(-1.0);
            n.axpy(1.0, &f.eval(t))?;
            n.axpy(1.0, &eta.eval(t))?;
            Ok((n, spill))
        },
        knots,
        cfg,
        horizon,
    )
}

/// Extended system `∂_t U + L(U+ζ) + B(U+ζ, U+ζ) = Pf + η`.
pub fn integrate_extended(
    u0: &SpectralField,
    eta: &dyn Forcing,
    zeta: &dyn Forcing,
    f: &dyn Forcing,
    cfg: &IntegratorConfig,
    horizon: f64,
) -> Result<Trajectory, DynamicsError> {
    let p = cfg.params;
    let mut knots = eta.knots();
    knots.extend(zeta.knots());
    knots.extend(f.knots());
    integrate_system(
        u0,
        |u, t| {
            let z = zeta.eval(t);
            let mut shifted = u.clone();
            shifted.axpy(1.0, &z)?;
            let (b, spill) = full_b(&shifted, &shifted, &p)?;
            let mut n = b.scaled(-1.0);
            n.axpy(-1.0, &z.op_l(&p))?;
            n.axpy(1.0, &f.eval(t))?;
            n.axpy(1.0, &eta.eval(t))?;
            Ok((n, spill))
        },
        knots,
        cfg,
        horizon,
    )
}

/// Perturbed system `∂_t W + LW + B(W) + B(W,V) + B(V,W) = Pf`,
/// linearized around the time-dependent field `V`.
pub fn integrate_perturbed(
    w0: &SpectralField,
    v: &dyn Forcing,
    f: &dyn Forcing,
    cfg: &IntegratorConfig,
    horizon: f64,
) -> Result<Trajectory, DynamicsError> {
    let p = cfg.params;
    let mut knots = v.knots();
    knots.extend(f.knots());
    integrate_system(
        w0,
        |w, t| {
            let vt = v.eval(t);
            let (bww, s1) = full_b(w, w, &p)?;
            let (bwv, s2) = full_b(w, &vt, &p)?;
            let (bvw, s3) = full_b(&vt, w, &p)?;
            let mut n = bww.scaled(-1.0);
            n.axpy(-1.0, &bwv)?;
            n.axpy(-1.0, &bvw)?;
            n.axpy(1.0, &f.eval(t))?;
            Ok((n, s1.max(s2).max(s3)))
        },
        knots,
        cfg,
        horizon,
    )
}

/// The kernel operator `K`: solution of `∂_t Z + LZ = Pf`, `Z(0) = 0`, by
/// per-mode variation of constants. Piecewise-constant forcings are
/// integrated in closed form; sampled forcings as exact piecewise-linear
/// interpolants. `cfg.dt` only sets the output grid density — values are
/// exact at every grid point either way.
pub fn kernel_k(
    f: &ControlSignal,
    cfg: &IntegratorConfig,
    horizon: f64,
) -> Result<Trajectory, DynamicsError> {
    let p = cfg.params;
    let grid = build_time_grid(horizon, cfg.dt, &f.knots())?;
    let probe = f.eval(0.0);
    let g = *probe.geometry();
    let mut z = SpectralField::zero(g, probe.trunc());

    let mut traj = Trajectory {
        times: vec![0.0],
        diagnostics: vec![diagnostics_of(&z, 0.0)],
        stored_indices: vec![0],
        states: vec![z.clone()],
    };
    let pcw = f.is_piecewise_constant();
    for (i, w) in grid.windows(2).enumerate() {
        let (lo, hi) = (w[0], w[1]);
        let h = hi - lo;
        let c0 = f.eval(lo);
        // Z(hi) = e^{−λh} Z(lo) + hφ₁(−λh)c₀ + h²φ₂(−λh)·slope
        let mut next = z.map_multiplier(|m| (-p.l_eigenvalue(m, &g) * h).exp());
        next.axpy(1.0, &c0.map_multiplier(|m| h * phi(1, -p.l_eigenvalue(m, &g) * h)))?;
        if !pcw {
            let mut slope = f.eval(hi);
            slope.axpy(-1.0, &c0)?;
            slope = slope.scaled(1.0 / h);
            next.axpy(
                1.0,
                &slope.map_multiplier(|m| h * h * phi(2, -p.l_eigenvalue(m, &g) * h)),
            )?;
        }
        z = next;
        traj.times.push(hi);
        traj.diagnostics.push(diagnostics_of(&z, 0.0));
        traj.stored_indices.push(i + 1);
        traj.states.push(z.clone());
    }
    Ok(traj)
}

/// One row of the L²-vorticity Gronwall check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GronwallRow {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GronwallReport {
    pub rows: Vec<GronwallRow>,
    pub min_margin: f64,
    pub sup_f_v1: f64,
    pub sup_v_v4: f64,
}

/// Evaluate both sides of the vorticity-energy Gronwall bound along a
/// perturbed-system trajectory:
/// `‖rot W(t)‖² ≤ (‖rot W(0)‖² + ‖f‖²_{L∞V¹}) · exp{2t(1 + ‖v‖_{L∞V⁴})}`
/// with `v = (I−αΔ)^{-1}V`.
pub fn gronwall_monitor(
    traj: &Trajectory,
    v: &ControlSignal,
    f: &ControlSignal,
    p: &FluidParams,
) -> GronwallReport {
    let sup_f_v1 = f
        .values()
        .iter()
        .map(|x| x.sobolev_norm(1.0))
        .fold(0.0, f64::max);
    let sup_v_v4 = v
        .values()
        .iter()
        .map(|x| x.helmholtz(p, true).sobolev_norm(4.0))
        .fold(0.0, f64::max);
    let lhs0 = traj.diagnostics[0].vorticity_l2.powi(2);
    let base = lhs0 + sup_f_v1 * sup_f_v1;
    let rate = 2.0 * (1.0 + sup_v_v4);
    let mut rows = Vec::with_capacity(traj.times.len());
    let mut min_margin = f64::INFINITY;
    for (t, d) in traj.times.iter().zip(traj.diagnostics.iter()) {
        let lhs = d.vorticity_l2 * d.vorticity_l2;
        let rhs = base * (rate * t).exp();
        let margin = rhs - lhs;
        min_margin = min_margin.min(margin);
        rows.push(GronwallRow {
            t: *t,
            lhs,
            rhs,
            margin,
        });
    }
    GronwallReport {
        rows,
        min_margin,
        sup_f_v1,
        sup_v_v4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Parity;
    use crate::geometry::TorusGeometry;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn m(m1: i64, m2: i64) -> ModeIndex {
        ModeIndex::new(m1, m2).unwrap()
    }

    fn params() -> FluidParams {
        FluidParams::new(0.5, 0.8).unwrap()
    }

    fn cfg(dt: f64, scheme: Scheme) -> IntegratorConfig {
        IntegratorConfig::new(dt, scheme, params())
    }

    fn zero_sig(trunc: u32, horizon: f64) -> ControlSignal {
        ControlSignal::zero(TorusGeometry::unit(), trunc, horizon)
    }

    fn random_field(rng: &mut impl Rng, trunc: u32, max_level: u32, scale: f64) -> SpectralField {
        let mut f = SpectralField::zero(TorusGeometry::unit(), trunc);
        for mode in crate::geometry::canonical_modes(max_level) {
            f.add_coeff(mode, Parity::Cos, scale * rng.gen_range(-1.0..1.0)).unwrap();
            f.add_coeff(mode, Parity::Sin, scale * rng.gen_range(-1.0..1.0)).unwrap();
        }
        f
    }

    #[test]
    fn phi_functions_match_taylor_oracle() {
        // Brute-force Taylor sums are well conditioned on the z-range the
        // integrators use; both evaluation branches must agree with them.
        let taylor = |k: u32, z: f64| {
            let mut fact = 1.0;
            for j in 1..=k {
                fact *= j as f64;
            }
            let mut term = 1.0 / fact;
            let mut acc = term;
            for j in 1..60 {
                term *= z / (j + k) as f64;
                acc += term;
            }
            acc
        };
        for &z in &[-3.0, -0.5, -0.26, -0.24, -1e-3, -1e-9, 0.0] {
            for k in 1..=3u32 {
                let got = phi(k, z);
                let want = taylor(k, z);
                assert!(
                    (got - want).abs() <= 1e-13 * want.abs(),
                    "phi_{k}({z}): {got} vs {want}"
                );
            }
        }
        assert!((phi(1, 0.0) - 1.0).abs() < 1e-15);
        assert!((phi(2, 0.0) - 0.5).abs() < 1e-15);
        assert!((phi(3, 0.0) - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn single_mode_exact_decay() {
        // With η = f = 0, a single mode decays exactly:
        // a(t) = a(0)·exp(−νλt/(1+αλ)); B vanishes on single modes.
        let p = params();
        let mode = m(2, 1);
        let u0 = SpectralField::single_mode(TorusGeometry::unit(), 6, mode, Parity::Cos, 1.3)
            .unwrap();
        let horizon = 1.0;
        for scheme in [Scheme::EtdRk2, Scheme::EtdRk4Classical] {
            let traj = integrate_plain(
                &u0,
                &zero_sig(6, horizon),
                &zero_sig(6, horizon),
                &cfg(1e-3, scheme),
                horizon,
            )
            .unwrap();
            let lam = p.l_eigenvalue(mode, &TorusGeometry::unit());
            let expect = 1.3 * (-lam * horizon).exp();
            let got = traj.final_state().coeff(mode, Parity::Cos);
            assert!((got - expect).abs() < 1e-10, "{scheme:?}: {got} vs {expect}");
        }
    }

    #[test]
    fn zero_data_zero_trajectory() {
        let u0 = SpectralField::zero(TorusGeometry::unit(), 4);
        let traj = integrate_plain(&u0, &zero_sig(4, 1.0), &zero_sig(4, 1.0), &cfg(1e-2, Scheme::EtdRk4Classical), 1.0).unwrap();
        assert!(traj.states.iter().all(|s| s.is_zero()));
    }

    #[test]
    fn extended_reduces_to_plain_bit_for_bit() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let u0 = random_field(&mut rng, 4, 3, 0.5);
        let eta = ControlSignal::constant(random_field(&mut rng, 4, 2, 0.2), 1.0);
        let c = cfg(1e-2, Scheme::EtdRk4Classical);
        let plain = integrate_plain(&u0, &eta, &zero_sig(4, 1.0), &c, 1.0).unwrap();
        let ext = integrate_extended(&u0, &eta, &zero_sig(4, 1.0), &zero_sig(4, 1.0), &c, 1.0).unwrap();
        assert_eq!(plain.final_state(), ext.final_state());
    }

    #[test]
    fn extended_one_step_constant_zeta() {
        // U0 = 0, η = f = 0, ζ a constant single mode: B(ζ,ζ) = 0 so the
        // first step must produce exactly −hφ₁(−λh)·λ·ζ (linear exact).
        let p = params();
        let mode = m(1, 1);
        let zeta_field =
            SpectralField::single_mode(TorusGeometry::unit(), 4, mode, Parity::Sin, 0.7).unwrap();
        let zeta = ControlSignal::constant(zeta_field, 1.0);
        let u0 = SpectralField::zero(TorusGeometry::unit(), 4);
        let h = 0.25;
        let mut c = cfg(h, Scheme::EtdRk4Classical);
        c.store_stride = 1;
        let traj = integrate_extended(&u0, &zero_sig(4, 1.0), &zeta, &zero_sig(4, 1.0), &c, 1.0).unwrap();
        let lam = p.l_eigenvalue(mode, &TorusGeometry::unit());
        let expect = -h * phi(1, -lam * h) * lam * 0.7;
        let got = traj.states[1].coeff(mode, Parity::Sin);
        assert!((got - expect).abs() < 1e-13, "{got} vs {expect}");
    }

    #[test]
    fn shift_identity_for_smooth_zeta() {
        // For C¹ ζ with η̃ = η + ∂_tζ: the plain solution from U0 + ζ(0)
        // under η̃, shifted back by ζ(t), matches the extended solution
        // under (η, ζ) at every stored time.
        use crate::signal::{LiftedControl, SmoothedSignal};
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let u0 = random_field(&mut rng, 4, 3, 0.4);
        let eta = ControlSignal::constant(random_field(&mut rng, 4, 2, 0.3), 1.0);
        let steps = ControlSignal::piecewise_constant(
            vec![0.0, 0.4, 1.0],
            vec![random_field(&mut rng, 4, 3, 0.6), random_field(&mut rng, 4, 3, 0.6)],
            None,
        )
        .unwrap();
        let zeta = SmoothedSignal::new(&steps, 0.15).unwrap();
        let eta_shifted = LiftedControl {
            eta: eta.clone(),
            zeta: zeta.clone(),
        };
        let c = cfg(1e-3, Scheme::EtdRk4Classical);
        let zf = zero_sig(4, 1.0);
        // ζ(0) = 0 by the pinning, so both start from U0.
        let plain = integrate_plain(&u0, &eta_shifted, &zf, &c, 1.0).unwrap();
        let ext = integrate_extended(&u0, &eta, &zeta, &zf, &c, 1.0).unwrap();
        for ((t, up), (_, ue)) in plain.stored().zip(ext.stored()) {
            let mut shifted_back = up.clone();
            shifted_back.axpy(-1.0, &zeta.eval(t)).unwrap();
            let gap = shifted_back.sub(ue).unwrap().sobolev_norm(1.0);
            assert!(gap < 1e-7, "t = {t}: gap {gap}");
        }
    }

    #[test]
    fn perturbed_reductions() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let w0 = random_field(&mut rng, 4, 3, 0.4);
        let c = cfg(1e-2, Scheme::EtdRk4Classical);
        // V = 0 reduces to the plain system with η = 0.
        let pert = integrate_perturbed(&w0, &zero_sig(4, 1.0), &zero_sig(4, 1.0), &c, 1.0).unwrap();
        let plain = integrate_plain(&w0, &zero_sig(4, 1.0), &zero_sig(4, 1.0), &c, 1.0).unwrap();
        assert_eq!(pert.final_state(), plain.final_state());
        // W0 = 0, f = 0: zero is the solution for any V.
        let v = ControlSignal::constant(random_field(&mut rng, 4, 3, 1.0), 1.0);
        let z0 = SpectralField::zero(TorusGeometry::unit(), 4);
        let ztraj = integrate_perturbed(&z0, &v, &zero_sig(4, 1.0), &c, 1.0).unwrap();
        assert!(ztraj.final_state().is_zero());
    }

    #[test]
    fn vorticity_energy_dissipates_unforced() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let u0 = random_field(&mut rng, 4, 4, 0.8);
        let traj = integrate_plain(
            &u0,
            &zero_sig(4, 1.0),
            &zero_sig(4, 1.0),
            &cfg(1e-3, Scheme::EtdRk4Classical),
            1.0,
        )
        .unwrap();
        for w in traj.diagnostics.windows(2) {
            assert!(w[1].vorticity_l2 <= w[0].vorticity_l2 + 1e-10);
        }
    }

    #[test]
    fn truncation_is_preserved() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let u0 = random_field(&mut rng, 3, 3, 1.0);
        let traj = integrate_plain(
            &u0,
            &zero_sig(3, 0.5),
            &zero_sig(3, 0.5),
            &cfg(1e-2, Scheme::EtdRk4Classical),
            0.5,
        )
        .unwrap();
        assert!(traj.states.iter().all(|s| s.max_level() <= 3));
    }

    #[test]
    fn blow_up_detected_with_time() {
        let g = TorusGeometry::unit();
        let huge = SpectralField::single_mode(g, 4, m(1, 0), Parity::Cos, 1e8).unwrap();
        let eta = ControlSignal::constant(huge, 1.0);
        let u0 = SpectralField::zero(g, 4);
        let err = integrate_plain(&u0, &eta, &zero_sig(4, 1.0), &cfg(1e-2, Scheme::EtdRk4Classical), 1.0);
        match err {
            Err(DynamicsError::Divergence { t, norm }) => {
                assert!(t > 0.0 && t <= 1.0 && norm > 1e6);
            }
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn kernel_constant_forcing_closed_form() {
        let p = params();
        let mode = m(1, 2);
        let g = TorusGeometry::unit();
        let fval = SpectralField::single_mode(g, 4, mode, Parity::Cos, 2.0).unwrap();
        let f = ControlSignal::constant(fval, 1.0);
        let traj = kernel_k(&f, &cfg(0.05, Scheme::EtdRk4Classical), 1.0).unwrap();
        let lam = p.l_eigenvalue(mode, &g);
        for (t, z) in traj.stored() {
            let expect = (1.0 - (-lam * t).exp()) / lam * 2.0;
            assert!((z.coeff(mode, Parity::Cos) - expect).abs() < 1e-13);
        }
        // f = 0 → Z = 0.
        let z = kernel_k(&zero_sig(4, 1.0), &cfg(0.1, Scheme::EtdRk4Classical), 1.0).unwrap();
        assert!(z.final_state().is_zero());
    }

    #[test]
    fn gronwall_monitor_basics() {
        let c = cfg(1e-2, Scheme::EtdRk4Classical);
        // Zero data: 0 ≤ 0, margins all zero.
        let z0 = SpectralField::zero(TorusGeometry::unit(), 4);
        let traj = integrate_perturbed(&z0, &zero_sig(4, 1.0), &zero_sig(4, 1.0), &c, 1.0).unwrap();
        let rep = gronwall_monitor(&traj, &zero_sig(4, 1.0), &zero_sig(4, 1.0), &params());
        assert!(rep.min_margin.abs() < 1e-15);

        // Random small instance: bound holds with positive margin, and the
        // right-hand side is nondecreasing in t.
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let w0 = random_field(&mut rng, 4, 3, 0.5);
        let v = ControlSignal::constant(random_field(&mut rng, 4, 3, 0.5), 1.0);
        let f = ControlSignal::constant(random_field(&mut rng, 4, 2, 0.3), 1.0);
        let traj = integrate_perturbed(&w0, &v, &f, &c, 1.0).unwrap();
        let rep = gronwall_monitor(&traj, &v, &f, &params());
        assert!(rep.min_margin > 0.0);
        for w in rep.rows.windows(2) {
            assert!(w[1].rhs >= w[0].rhs);
        }
    }

    #[test]
    fn convergence_order_both_schemes() {
        // Error against a dt/8 reference on a smooth nonlinear instance,
        // fitted slope within ±0.5 of the nominal order.
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let u0 = random_field(&mut rng, 4, 3, 0.9);
        let eta = ControlSignal::constant(random_field(&mut rng, 4, 2, 0.5), 1.0);
        for scheme in [Scheme::EtdRk2, Scheme::EtdRk4Classical] {
            let mut errs = Vec::new();
            let dts = [1.0 / 24.0, 1.0 / 48.0, 1.0 / 96.0];
            for &dt in &dts {
                let coarse = integrate_plain(&u0, &eta, &zero_sig(4, 1.0), &cfg(dt, scheme), 1.0).unwrap();
                let fine = integrate_plain(&u0, &eta, &zero_sig(4, 1.0), &cfg(dt / 8.0, scheme), 1.0).unwrap();
                errs.push(
                    coarse
                        .final_state()
                        .sub(fine.final_state())
                        .unwrap()
                        .sobolev_norm(1.0),
                );
            }
            let slope = fit_log_slope(&dts, &errs);
            let nominal = scheme.order();
            assert!(
                (slope - nominal).abs() <= 0.5,
                "{scheme:?}: slope {slope}, nominal {nominal}, errs {errs:?}"
            );
        }
    }

    pub(crate) fn fit_log_slope(x: &[f64], y: &[f64]) -> f64 {
        let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
        let n = x.len() as f64;
        let mx = lx.iter().sum::<f64>() / n;
        let my = ly.iter().sum::<f64>() / n;
        let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
        let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
        num / den
    }
}
