//! Convex decomposition of enlarged-space controls, the fast-oscillating
//! relaxation controls, and the lift that absorbs the state-shift control
//! into the additive one.
//!
//! An element `η̄ = η̃ − Σ_j α_j B(ρ̃^j)` of the enlarged space is rewritten
//! through the antisymmetrized family `λ_j = α_j/2α`, `ρ^j = √α ρ̃^j`,
//! `ρ^{j+k} = −ρ^j`, which satisfies, for every `U`,
//! `B(U) − η̄ = Σ_j λ_j (B(U+ρ^j) + Lρ^j) − η̃`. Cycling through the `ρ^j`
//! with dwell fractions `λ_j`, `k` times per horizon, realizes the convex
//! combination in the limit `k → ∞`; the defect is the integrable signal
//! `f_k = g_k + h_k`, whose running integral and kernel image both vanish
//! as `k` grows.

use crate::bilinear::{full_b, BilinearError};
use crate::dynamics::{kernel_k, IntegratorConfig, Trajectory};
use crate::field::{FieldError, FluidParams, SpectralField};
use crate::signal::{ControlSignal, Forcing, LiftedControl, SignalError, SmoothedSignal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConvexifyError {
    #[error("weight α_{index} = {value} must be positive")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("{alphas} weights given for {rhos} directions")]
    CountMismatch { alphas: usize, rhos: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Bilinear(#[from] BilinearError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Dynamics(#[from] crate::dynamics::DynamicsError),
}

/// The antisymmetrized convex decomposition `(η, λ_j, ρ^j)`.
///
/// Invariants: `Σλ_j = 1`, and pairing `λ_{j+k} = λ_j`, `ρ^{j+k} = −ρ^j`
/// for `j ≤ k`, `m = 2k`. The empty decomposition (no pairs) represents an
/// element already in the base space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexDecomposition {
    pub eta: SpectralField,
    pub lambdas: Vec<f64>,
    pub rhos: Vec<SpectralField>,
}

impl ConvexDecomposition {
    pub fn pairs(&self) -> usize {
        self.rhos.len() / 2
    }

    pub fn is_trivial(&self) -> bool {
        self.rhos.is_empty()
    }

    /// The represented element `η̄ = η − Σλ_j B(ρ^j)`.
    pub fn eta_bar(&self, p: &FluidParams) -> Result<SpectralField, ConvexifyError> {
        let mut out = self.eta.clone();
        for (l, rho) in self.lambdas.iter().zip(self.rhos.iter()) {
            let (b, _) = full_b(rho, rho, p)?;
            out.axpy(-l, &b)?;
        }
        Ok(out)
    }
}

/// Build the decomposition from a representation
/// `η̄ = η̃ − Σ_j α_j B(ρ̃^j)` with `α_j > 0`: `m = 2k` directions
/// `ρ^j = √α ρ̃^j`, `ρ^{j+k} = −√α ρ̃^j` and weights `λ_j = α_j/(2α)`,
/// `α = Σα_i`. Passing no pairs yields the trivial decomposition.
pub fn convex_decompose(
    eta_tilde: SpectralField,
    alphas: &[f64],
    rho_tildes: &[SpectralField],
) -> Result<ConvexDecomposition, ConvexifyError> {
    if alphas.len() != rho_tildes.len() {
        return Err(ConvexifyError::CountMismatch {
            alphas: alphas.len(),
            rhos: rho_tildes.len(),
        });
    }
    for (i, &a) in alphas.iter().enumerate() {
        if !(a > 0.0) {
            return Err(ConvexifyError::NonPositiveWeight { index: i, value: a });
        }
    }
    if alphas.is_empty() {
        return Ok(ConvexDecomposition {
            eta: eta_tilde,
            lambdas: Vec::new(),
            rhos: Vec::new(),
        });
    }
    let alpha: f64 = alphas.iter().sum();
    let root = alpha.sqrt();
    let k = alphas.len();
    let mut lambdas = Vec::with_capacity(2 * k);
    let mut rhos = Vec::with_capacity(2 * k);
    for (a, rho) in alphas.iter().zip(rho_tildes.iter()) {
        lambdas.push(a / (2.0 * alpha));
        rhos.push(rho.scaled(root));
    }
    for (a, rho) in alphas.iter().zip(rho_tildes.iter()) {
        lambdas.push(a / (2.0 * alpha));
        rhos.push(rho.scaled(-root));
    }
    Ok(ConvexDecomposition {
        eta: eta_tilde,
        lambdas,
        rhos,
    })
}

/// An oscillation prescription: cycle the decomposition's directions `k`
/// times over the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillationProfile {
    pub decomposition: ConvexDecomposition,
    pub k: u32,
    pub horizon: f64,
}

/// The relaxation control `ψ_k(t) = φ(kt/T)`: piecewise constant, taking
/// value `ρ^j` on the `j`-th sub-slot of each of the `k` periods, slot
/// widths `λ_j·(T/k)`.
pub fn build_psi_k(prof: &OscillationProfile) -> ControlSignal {
    build_psi_k_on(&prof.decomposition, prof.k, 0.0, prof.horizon)
}

/// Same as [`build_psi_k`] on an arbitrary interval `[a, b]`.
pub fn build_psi_k_on(
    decomp: &ConvexDecomposition,
    k: u32,
    a: f64,
    b: f64,
) -> ControlSignal {
    let geom = *decomp.eta.geometry();
    let trunc = decomp.eta.trunc();
    if decomp.is_trivial() {
        let mut z = ControlSignal::zero(geom, trunc, b);
        if a > 0.0 {
            z = ControlSignal::piecewise_constant(
                vec![a, b],
                vec![SpectralField::zero(geom, trunc)],
                None,
            )
            .expect("valid zero signal");
        }
        return z;
    }
    let len = b - a;
    let mut breaks = Vec::new();
    let mut values = Vec::new();
    let mut cum = Vec::with_capacity(decomp.lambdas.len() + 1);
    cum.push(0.0);
    for l in &decomp.lambdas {
        cum.push(cum.last().unwrap() + l);
    }
    for period in 0..k {
        for (j, rho) in decomp.rhos.iter().enumerate() {
            breaks.push(a + len * (period as f64 + cum[j]) / (k as f64));
            values.push(rho.clone());
        }
    }
    breaks.push(b);
    ControlSignal::piecewise_constant(breaks, values, None).expect("slot widths positive")
}

/// Where the frozen field `V_N` in the defect comes from: an integrated
/// trajectory (time-varying) or a piecewise-constant prescription.
#[derive(Debug, Clone, Copy)]
pub enum VnSource<'a> {
    Trajectory(&'a Trajectory),
    PiecewiseConstant(&'a ControlSignal),
}

/// The linear part of the defect, `g_k(t) = Lψ_k(t) − Σλ_j Lρ^j`.
pub fn compute_gk(
    prof: &OscillationProfile,
    p: &FluidParams,
) -> Result<ControlSignal, ConvexifyError> {
    let psi = build_psi_k(prof);
    let d = &prof.decomposition;
    let mut lbar = SpectralField::zero(*d.eta.geometry(), d.eta.trunc());
    for (l, rho) in d.lambdas.iter().zip(d.rhos.iter()) {
        lbar.axpy(*l, &rho.op_l(p))?;
    }
    let breaks = psi.times().to_vec();
    let mut values = Vec::with_capacity(breaks.len() - 1);
    for w in breaks.windows(2) {
        let mut v = psi.eval(w[0]).op_l(p);
        v.axpy(-1.0, &lbar)?;
        values.push(v);
    }
    Ok(ControlSignal::piecewise_constant(breaks, values, None)?)
}

/// The oscillation defect `f_k = g_k + h_k` with
/// `h_k(t) = B(V_N + ψ_k(t)) − Σλ_j B(V_N + ρ^j)`.
///
/// For a piecewise-constant `V_N` the result is exactly piecewise constant
/// on the union grid; for a trajectory source it is sampled on the
/// trajectory's stored grid.
pub fn compute_fk(
    vn: VnSource<'_>,
    prof: &OscillationProfile,
    p: &FluidParams,
) -> Result<ControlSignal, ConvexifyError> {
    let psi = build_psi_k(prof);
    let d = &prof.decomposition;
    let geom = *d.eta.geometry();
    let trunc = d.eta.trunc();

    let mut lbar = SpectralField::zero(geom, trunc);
    for (l, rho) in d.lambdas.iter().zip(d.rhos.iter()) {
        lbar.axpy(*l, &rho.op_l(p))?;
    }
    // Σλ_j B(V + ρ^j) for a given frozen V.
    let bbar = |v: &SpectralField| -> Result<SpectralField, ConvexifyError> {
        let mut acc = SpectralField::zero(geom, trunc);
        for (l, rho) in d.lambdas.iter().zip(d.rhos.iter()) {
            let mut shifted = v.clone();
            shifted.axpy(1.0, rho)?;
            let (b, _) = full_b(&shifted, &shifted, p)?;
            acc.axpy(*l, &b)?;
        }
        Ok(acc)
    };
    let defect = |v: &SpectralField, t: f64| -> Result<SpectralField, ConvexifyError> {
        let psi_t = psi.eval(t);
        let mut out = psi_t.op_l(p);
        out.axpy(-1.0, &lbar)?;
        let mut shifted = v.clone();
        shifted.axpy(1.0, &psi_t)?;
        let (b, _) = full_b(&shifted, &shifted, p)?;
        out.axpy(1.0, &b)?;
        out.axpy(-1.0, &bbar(v)?)?;
        Ok(out)
    };

    match vn {
        VnSource::PiecewiseConstant(vsig) => {
            let mut breaks: Vec<f64> = psi.times().to_vec();
            breaks.extend(vsig.times().iter().copied());
            breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
            breaks.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * prof.horizon.max(1.0));
            breaks.retain(|&t| t <= prof.horizon + 1e-14 * prof.horizon.max(1.0));
            // Cache Σλ_j B(V+ρ^j) per distinct V segment.
            let mut values = Vec::with_capacity(breaks.len() - 1);
            let mut cache: Option<(usize, SpectralField)> = None;
            for w in breaks.windows(2) {
                let t = w[0];
                let vseg = match vsig
                    .times()
                    .binary_search_by(|x| x.partial_cmp(&t).unwrap())
                {
                    Ok(i) => i.min(vsig.values().len() - 1),
                    Err(0) => 0,
                    Err(i) => (i - 1).min(vsig.values().len() - 1),
                };
                let v = &vsig.values()[vseg];
                let bb = match &cache {
                    Some((i, b)) if *i == vseg => b.clone(),
                    _ => {
                        let b = bbar(v)?;
                        cache = Some((vseg, b.clone()));
                        b
                    }
                };
                let psi_t = psi.eval(t);
                let mut out = psi_t.op_l(p);
                out.axpy(-1.0, &lbar)?;
                let mut shifted = v.clone();
                shifted.axpy(1.0, &psi_t)?;
                let (b, _) = full_b(&shifted, &shifted, p)?;
                out.axpy(1.0, &b)?;
                out.axpy(-1.0, &bb)?;
                values.push(out);
            }
            Ok(ControlSignal::piecewise_constant(breaks, values, None)?)
        }
        VnSource::Trajectory(traj) => {
            let mut times = Vec::new();
            let mut values = Vec::new();
            for (t, state) in traj.stored() {
                times.push(t);
                values.push(defect(state, t)?);
            }
            Ok(ControlSignal::sampled(times, values, None)?)
        }
    }
}

/// One row of the relaxation study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxRow {
    pub k: u32,
    /// `sup_t ‖∫₀ᵗ f_k‖_{V²}`.
    pub sup_f_integral: f64,
    /// `sup_t ‖K f_k‖_{V²}`.
    pub sup_kf: f64,
}

/// What the relaxation study oscillates: the real construction, or a fixed
/// k-independent signal (negative control).
pub enum RelaxationInput<'a> {
    Oscillating {
        decomposition: &'a ConvexDecomposition,
        vn: VnSource<'a>,
        horizon: f64,
    },
    Fixed(&'a ControlSignal),
}

/// `sup_t ‖∫₀ᵗ f(s) ds‖_{V²}` for a signal; exact for piecewise-constant
/// signals (the running integral is piecewise linear, so the norm peaks at
/// breakpoints), trapezoid-exact for sampled ones.
pub fn sup_running_integral(f: &ControlSignal, s: f64) -> f64 {
    let times = f.times();
    let probe = &f.values()[0];
    let mut acc = SpectralField::zero(*probe.geometry(), probe.trunc());
    let mut sup = acc.sobolev_norm(s);
    if f.is_piecewise_constant() {
        for (i, w) in times.windows(2).enumerate() {
            acc.axpy(w[1] - w[0], &f.values()[i]).expect("uniform values");
            sup = sup.max(acc.sobolev_norm(s));
        }
    } else {
        for (i, w) in times.windows(2).enumerate() {
            let mut trap = f.values()[i].clone();
            trap.axpy(1.0, &f.values()[i + 1]).expect("uniform values");
            acc.axpy(0.5 * (w[1] - w[0]), &trap).expect("uniform values");
            sup = sup.max(acc.sobolev_norm(s));
        }
    }
    sup
}

/// For each oscillation count: the sup of the running integral of the
/// defect and the sup of its kernel image, both in `V²`. Both columns must
/// decay for the real construction and stay flat for a k-independent
/// defect.
pub fn relaxation_report(
    input: RelaxationInput<'_>,
    ks: &[u32],
    p: &FluidParams,
) -> Result<Vec<RelaxRow>, ConvexifyError> {
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let (fk, horizon) = match &input {
            RelaxationInput::Oscillating {
                decomposition,
                vn,
                horizon,
            } => {
                let prof = OscillationProfile {
                    decomposition: (*decomposition).clone(),
                    k,
                    horizon: *horizon,
                };
                (compute_fk(*vn, &prof, p)?, *horizon)
            }
            RelaxationInput::Fixed(sig) => ((*sig).clone(), sig.horizon()),
        };
        let sup_f_integral = sup_running_integral(&fk, 2.0);
        // Kernel values are exact per span; dt only densifies the grid.
        let min_span = fk
            .times()
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        let cfg = IntegratorConfig::new(
            (min_span / 4.0).max(horizon * 1e-6),
            crate::dynamics::Scheme::EtdRk4Classical,
            *p,
        );
        let ktraj = kernel_k(&fk, &cfg, horizon)?;
        let sup_kf = ktraj
            .states
            .iter()
            .map(|z| z.sobolev_norm(2.0))
            .fold(0.0, f64::max);
        rows.push(RelaxRow {
            k,
            sup_f_integral,
            sup_kf,
        });
    }
    Ok(rows)
}

/// Absorb the state-shift control `ζ` into the additive control: build the
/// C¹ ramp-smoothed `ζ_l` (width `ramp/l`, pinned to zero at both ends) and
/// return `η' = η + ∂_t ζ_l`. The plain system driven by `η'` from `U0`
/// tracks the extended system driven by `(η, ζ)` up to `‖ζ_l − ζ‖_{L²}`.
pub fn lift_extended_control(
    eta: &ControlSignal,
    zeta: &ControlSignal,
    ramp: f64,
    l: u32,
) -> Result<LiftedControl, ConvexifyError> {
    let width = ramp / (l.max(1) as f64);
    let smoothed = SmoothedSignal::new(zeta, width)?;
    Ok(LiftedControl {
        eta: eta.clone(),
        zeta: smoothed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate_extended, integrate_plain, Scheme};
    use crate::field::{ModeSubspace, Parity};
    use crate::geometry::{canonical_modes, ModeIndex, TorusGeometry};
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn geom() -> TorusGeometry {
        TorusGeometry::unit()
    }

    fn p() -> FluidParams {
        FluidParams::new(0.5, 0.8).unwrap()
    }

    fn h3_field(rng: &mut impl Rng, trunc: u32, scale: f64) -> SpectralField {
        let mut f = SpectralField::zero(geom(), trunc);
        for mode in canonical_modes(3) {
            f.add_coeff(mode, Parity::Cos, scale * rng.gen_range(-1.0..1.0)).unwrap();
            f.add_coeff(mode, Parity::Sin, scale * rng.gen_range(-1.0..1.0)).unwrap();
        }
        f
    }

    #[test]
    fn decompose_single_pair_arithmetic() {
        // k=1, α₁=4: λ = (1/2, 1/2), ρ = (2ρ̃, −2ρ̃).
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let rho_t = h3_field(&mut rng, 6, 1.0);
        let eta_t = h3_field(&mut rng, 6, 1.0);
        let d = convex_decompose(eta_t, &[4.0], std::slice::from_ref(&rho_t)).unwrap();
        assert_eq!(d.lambdas, vec![0.5, 0.5]);
        assert!(d.rhos[0].sub(&rho_t.scaled(2.0)).unwrap().sobolev_norm(0.0) < 1e-14);
        assert!(d.rhos[1].sub(&rho_t.scaled(-2.0)).unwrap().sobolev_norm(0.0) < 1e-14);
        let total: f64 = d.lambdas.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn decomposition_serializes_with_named_parts() {
        let mut rng = ChaCha12Rng::seed_from_u64(19);
        let rho = h3_field(&mut rng, 4, 1.0);
        let eta = h3_field(&mut rng, 4, 1.0);
        let d = convex_decompose(eta, &[2.0], std::slice::from_ref(&rho)).unwrap();
        let json = serde_json::to_value(&d).unwrap();
        assert!(json.get("eta").is_some());
        assert_eq!(json["lambdas"].as_array().unwrap().len(), 2);
        assert_eq!(json["rhos"].as_array().unwrap().len(), 2);
        let back: ConvexDecomposition = serde_json::from_value(json).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn nonpositive_weight_rejected() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let rho = h3_field(&mut rng, 4, 1.0);
        let eta = h3_field(&mut rng, 4, 1.0);
        assert!(matches!(
            convex_decompose(eta, &[0.0], std::slice::from_ref(&rho)),
            Err(ConvexifyError::NonPositiveWeight { .. })
        ));
    }

    #[test]
    fn decomposition_identity() {
        // B(U) − η̄ = Σλ_j(B(U+ρ^j) + Lρ^j) − η, to 1e-12, E = H³_q.
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let pp = p();
        for _ in 0..10 {
            let k = rng.gen_range(1..4usize);
            let alphas: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..3.0)).collect();
            let rhos: Vec<SpectralField> = (0..k).map(|_| h3_field(&mut rng, 6, 1.0)).collect();
            let eta = h3_field(&mut rng, 6, 1.0);
            let d = convex_decompose(eta, &alphas, &rhos).unwrap();
            let u = h3_field(&mut rng, 6, 1.0);

            let eta_bar = d.eta_bar(&pp).unwrap();
            let mut lhs = full_b(&u, &u, &pp).unwrap().0;
            lhs.axpy(-1.0, &eta_bar).unwrap();

            let mut rhs = d.eta.scaled(-1.0);
            for (l, rho) in d.lambdas.iter().zip(d.rhos.iter()) {
                let mut shifted = u.clone();
                shifted.axpy(1.0, rho).unwrap();
                let (b, _) = full_b(&shifted, &shifted, &pp).unwrap();
                rhs.axpy(*l, &b).unwrap();
                rhs.axpy(*l, &rho.op_l(&pp)).unwrap();
            }
            let scale = lhs.sobolev_norm(0.0).max(1.0);
            assert!(lhs.sub(&rhs).unwrap().sobolev_norm(0.0) <= 1e-12 * scale);
        }
    }

    #[test]
    fn antisymmetric_sums_vanish() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let alphas = [1.3, 0.4];
        let rhos = vec![h3_field(&mut rng, 4, 1.0), h3_field(&mut rng, 4, 1.0)];
        let eta = h3_field(&mut rng, 4, 1.0);
        let d = convex_decompose(eta, &alphas, &rhos).unwrap();
        let mut sum = SpectralField::zero(geom(), 4);
        let mut lsum = SpectralField::zero(geom(), 4);
        for (l, rho) in d.lambdas.iter().zip(d.rhos.iter()) {
            sum.axpy(*l, rho).unwrap();
            lsum.axpy(*l, &rho.op_l(&p())).unwrap();
        }
        assert!(sum.sobolev_norm(0.0) < 1e-14);
        assert!(lsum.sobolev_norm(0.0) < 1e-14);
    }

    #[test]
    fn psi_k_slots_and_period() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let rho = h3_field(&mut rng, 4, 1.0);
        let eta = SpectralField::zero(geom(), 4);
        let d = convex_decompose(eta, &[2.0], std::slice::from_ref(&rho)).unwrap();
        let horizon = 3.0;

        // k = 1, weights (1/2, 1/2): two slots [0, T/2) and [T/2, T).
        let prof1 = OscillationProfile {
            decomposition: d.clone(),
            k: 1,
            horizon,
        };
        let psi1 = build_psi_k(&prof1);
        assert_eq!(psi1.times(), &[0.0, 1.5, 3.0]);
        assert!(psi1.eval(0.1).sub(&d.rhos[0]).unwrap().sobolev_norm(0.0) < 1e-14);
        assert!(psi1.eval(1.6).sub(&d.rhos[1]).unwrap().sobolev_norm(0.0) < 1e-14);

        // Periodicity ψ_k(t + T/k) = ψ_k(t) on sampled points.
        let prof4 = OscillationProfile {
            decomposition: d.clone(),
            k: 4,
            horizon,
        };
        let psi4 = build_psi_k(&prof4);
        let period = horizon / 4.0;
        for i in 0..40 {
            let t = 0.49 * period + 0.013 * (i as f64);
            if t + period >= horizon {
                break;
            }
            let diff = psi4.eval(t).sub(&psi4.eval(t + period)).unwrap();
            assert!(diff.sobolev_norm(0.0) < 1e-14);
        }

        // Time average over one full period is Σλ_jρ^j = 0.
        let avg = psi4.mean(0.0, period);
        assert!(avg.sobolev_norm(0.0) < 1e-13);
    }

    #[test]
    fn defect_integrals_and_bounds() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let pp = p();
        let rho = h3_field(&mut rng, 6, 1.0);
        let eta = SpectralField::zero(geom(), 6);
        let d = convex_decompose(eta, &[1.7], std::slice::from_ref(&rho)).unwrap();
        let horizon = 1.0;
        let prof = OscillationProfile {
            decomposition: d.clone(),
            k: 8,
            horizon,
        };

        // ∫₀ᵀ g_k = 0 over whole periods.
        let g = compute_gk(&prof, &pp).unwrap();
        assert!(g.mean(0.0, horizon).sobolev_norm(0.0) < 1e-12);

        // sup‖g_k‖_{V^s} ≤ (2ν/α)·max_j‖ρ^j‖_{V^s}, s ∈ {1, 2}.
        for s in [1.0, 2.0] {
            let bound = 2.0 * pp.nu / pp.alpha
                * d.rhos
                    .iter()
                    .map(|r| r.sobolev_norm(s))
                    .fold(0.0, f64::max);
            assert!(g.sup_norm(s) <= bound * (1.0 + 1e-12));
        }

        // With constant V_N the full defect also integrates to zero over
        // whole periods.
        let vn_field = h3_field(&mut rng, 6, 0.6);
        let vn = ControlSignal::constant(vn_field, horizon);
        let fk = compute_fk(VnSource::PiecewiseConstant(&vn), &prof, &pp).unwrap();
        assert!(fk.mean(0.0, horizon).scaled(horizon).sobolev_norm(0.0) < 1e-12);
    }

    #[test]
    fn relaxation_decays_and_negative_control_flat() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let pp = p();
        let rho = h3_field(&mut rng, 6, 1.0);
        let eta = SpectralField::zero(geom(), 6);
        let d = convex_decompose(eta, &[1.0], std::slice::from_ref(&rho)).unwrap();
        let vn_field = h3_field(&mut rng, 6, 0.5);
        let vn = ControlSignal::constant(vn_field, 1.0);
        let ks = [8, 16, 32, 64];
        let rows = relaxation_report(
            RelaxationInput::Oscillating {
                decomposition: &d,
                vn: VnSource::PiecewiseConstant(&vn),
                horizon: 1.0,
            },
            &ks,
            &pp,
        )
        .unwrap();
        for w in rows.windows(2) {
            assert!(w[1].sup_f_integral <= w[0].sup_f_integral * 1.1);
            assert!(w[1].sup_kf <= w[0].sup_kf * 1.1);
        }
        assert!(rows.iter().all(|r| r.sup_f_integral > 0.0 && r.sup_kf > 0.0));
        // Doubling k from 8 to 64 at least halves the running integral.
        assert!(rows[3].sup_f_integral <= 0.5 * rows[0].sup_f_integral);

        // Negative control: a k-independent constant defect gives flat
        // columns (and no relaxation).
        let fixed = ControlSignal::constant(h3_field(&mut rng, 6, 0.5), 1.0);
        let flat = relaxation_report(RelaxationInput::Fixed(&fixed), &ks, &pp).unwrap();
        for w in flat.windows(2) {
            assert!((w[1].sup_f_integral - w[0].sup_f_integral).abs() < 1e-12 * w[0].sup_f_integral);
            assert!((w[1].sup_kf - w[0].sup_kf).abs() < 1e-10 * w[0].sup_kf);
        }

        // Zero defect: all zeros.
        let zero = ControlSignal::zero(geom(), 6, 1.0);
        let zrows = relaxation_report(RelaxationInput::Fixed(&zero), &ks, &pp).unwrap();
        assert!(zrows.iter().all(|r| r.sup_f_integral == 0.0 && r.sup_kf == 0.0));
    }

    #[test]
    fn lift_identity_for_zero_shift() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let eta_field = h3_field(&mut rng, 4, 1.0);
        let eta = ControlSignal::constant(eta_field, 1.0);
        let zeta = ControlSignal::zero(geom(), 4, 1.0);
        let lifted = lift_extended_control(&eta, &zeta, 0.1, 1).unwrap();
        for t in [0.0, 0.3, 0.99] {
            let diff = lifted.eval(t).sub(&eta.eval(t)).unwrap();
            assert!(diff.sobolev_norm(0.0) < 1e-15);
        }
        assert!(lifted.zeta.eval(0.0).is_zero());
        assert!(lifted.zeta.eval(1.0).is_zero());
    }

    #[test]
    fn lift_ramp_too_wide_rejected() {
        let zeta = ControlSignal::piecewise_constant(
            vec![0.0, 0.5, 1.0],
            vec![SpectralField::zero(geom(), 4), SpectralField::zero(geom(), 4)],
            None,
        )
        .unwrap();
        let eta = ControlSignal::zero(geom(), 4, 1.0);
        assert!(lift_extended_control(&eta, &zeta, 0.3, 1).is_err());
        assert!(lift_extended_control(&eta, &zeta, 0.3, 2).is_ok());
    }

    #[test]
    fn lift_end_state_converges_with_ramp_refinement() {
        // Plain system under η + ∂ζ_l vs extended system under (η, ζ):
        // the end-state gap shrinks as l doubles.
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let pp = p();
        let horizon = 1.0;
        let u0 = h3_field(&mut rng, 4, 0.4);
        let eta = ControlSignal::constant(h3_field(&mut rng, 4, 0.4), horizon);
        let zvals = vec![
            h3_field(&mut rng, 4, 0.8),
            h3_field(&mut rng, 4, 0.8),
            h3_field(&mut rng, 4, 0.8),
        ];
        let zeta =
            ControlSignal::piecewise_constant(vec![0.0, 0.33, 0.71, 1.0], zvals, None).unwrap();
        let cfg = IntegratorConfig::new(2e-3, Scheme::EtdRk4Classical, pp);
        let zf = ControlSignal::zero(geom(), 4, horizon);
        let ext = integrate_extended(&u0, &eta, &zeta, &zf, &cfg, horizon).unwrap();

        let mut errs = Vec::new();
        for l in [1u32, 2, 4, 8] {
            let lifted = lift_extended_control(&eta, &zeta, 0.12, l).unwrap();
            // ∂ζ_l stays in the support of ζ.
            let zsupp = zeta.support_hull(0.0).union(&ModeSubspace::h_n(3));
            for t in [0.05, 0.33, 0.7] {
                assert!(zsupp.contains_field(&lifted.zeta.derivative(t), 0.0));
            }
            let plain = integrate_plain(&u0, &lifted, &zf, &cfg, horizon).unwrap();
            let err = plain
                .final_state()
                .sub(ext.final_state())
                .unwrap()
                .sobolev_norm(1.0);
            errs.push(err);
        }
        for w in errs.windows(2) {
            assert!(w[1] <= w[0] * 1.15, "no decay: {errs:?}");
        }
        assert!(errs[3] <= 0.5 * errs[0], "weak decay: {errs:?}");
    }
}
