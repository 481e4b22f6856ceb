//! Time-dependent controls and forcings.
//!
//! Everything the integrators consume implements [`Forcing`]: evaluation at
//! arbitrary times, the breakpoints integration steps must land on, and
//! exact interval means (used by piecewise-constantization). Concrete
//! kinds: piecewise-constant and sampled signals, C¹-smoothed versions of
//! piecewise-constant signals (ramped jumps, pinned to zero at both ends),
//! the lifted control `η + ∂_tζ_l`, and field-polynomial controls.

use crate::field::{FieldError, ModeSubspace, SpectralField};
use crate::geometry::TorusGeometry;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignalError {
    #[error("signal needs at least one segment/sample")]
    Empty,
    #[error("times must be strictly increasing and start at 0")]
    BadTimes,
    #[error("breakpoint/value counts do not match: {breaks} breaks, {values} values")]
    CountMismatch { breaks: usize, values: usize },
    #[error("a signal value has coefficients outside the declared support")]
    SupportViolation,
    #[error("ramp width {width} too wide for shortest segment {shortest}")]
    RampTooWide { width: f64, shortest: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// A time-dependent field the integrators can consume.
pub trait Forcing {
    /// Value at time `t` (clamped to the signal's own horizon).
    fn eval(&self, t: f64) -> SpectralField;
    /// Times that integration steps must hit exactly (jumps, ramp edges).
    fn knots(&self) -> Vec<f64>;
    /// Exact integral mean over `[a, b]`.
    fn mean(&self, a: f64, b: f64) -> SpectralField;
}

impl<F: Forcing + ?Sized> Forcing for &F {
    fn eval(&self, t: f64) -> SpectralField {
        (**self).eval(t)
    }
    fn knots(&self) -> Vec<f64> {
        (**self).knots()
    }
    fn mean(&self, a: f64, b: f64) -> SpectralField {
        (**self).mean(a, b)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum SignalKind {
    /// Right-continuous step function: `values[i]` on `[breaks[i], breaks[i+1])`.
    PiecewiseConstant {
        breaks: Vec<f64>,
        values: Vec<SpectralField>,
    },
    /// Linear interpolation between samples, clamped outside.
    Sampled {
        times: Vec<f64>,
        values: Vec<SpectralField>,
    },
}

/// A control signal with optional declared support subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    kind: SignalKind,
    support: Option<ModeSubspace>,
}

fn check_support(
    values: &[SpectralField],
    support: &Option<ModeSubspace>,
) -> Result<(), SignalError> {
    if let Some(sub) = support {
        for v in values {
            if !sub.contains_field(v, 0.0) {
                return Err(SignalError::SupportViolation);
            }
        }
    }
    Ok(())
}

fn check_times(times: &[f64]) -> Result<(), SignalError> {
    if times.is_empty() {
        return Err(SignalError::Empty);
    }
    if times[0] < 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SignalError::BadTimes);
    }
    Ok(())
}

impl ControlSignal {
    pub fn piecewise_constant(
        breaks: Vec<f64>,
        values: Vec<SpectralField>,
        support: Option<ModeSubspace>,
    ) -> Result<Self, SignalError> {
        if breaks.len() != values.len() + 1 || values.is_empty() {
            return Err(SignalError::CountMismatch {
                breaks: breaks.len(),
                values: values.len(),
            });
        }
        check_times(&breaks)?;
        check_support(&values, &support)?;
        Ok(ControlSignal {
            kind: SignalKind::PiecewiseConstant { breaks, values },
            support,
        })
    }

    pub fn sampled(
        times: Vec<f64>,
        values: Vec<SpectralField>,
        support: Option<ModeSubspace>,
    ) -> Result<Self, SignalError> {
        if times.len() != values.len() || values.is_empty() {
            return Err(SignalError::CountMismatch {
                breaks: times.len(),
                values: values.len(),
            });
        }
        check_times(&times)?;
        check_support(&values, &support)?;
        Ok(ControlSignal {
            kind: SignalKind::Sampled { times, values },
            support,
        })
    }

    /// Constant-in-time signal on `[0, horizon]`.
    pub fn constant(value: SpectralField, horizon: f64) -> Self {
        ControlSignal {
            kind: SignalKind::PiecewiseConstant {
                breaks: vec![0.0, horizon],
                values: vec![value],
            },
            support: None,
        }
    }

    /// Identically-zero signal on `[0, horizon]`.
    pub fn zero(geom: TorusGeometry, trunc: u32, horizon: f64) -> Self {
        ControlSignal::constant(SpectralField::zero(geom, trunc), horizon)
    }

    pub fn values(&self) -> &[SpectralField] {
        match &self.kind {
            SignalKind::PiecewiseConstant { values, .. } => values,
            SignalKind::Sampled { values, .. } => values,
        }
    }

    pub fn is_piecewise_constant(&self) -> bool {
        matches!(self.kind, SignalKind::PiecewiseConstant { .. })
    }

    /// Breakpoints (piecewise-constant) or sample times.
    pub fn times(&self) -> &[f64] {
        match &self.kind {
            SignalKind::PiecewiseConstant { breaks, .. } => breaks,
            SignalKind::Sampled { times, .. } => times,
        }
    }

    pub fn horizon(&self) -> f64 {
        *self.times().last().expect("non-empty")
    }

    pub fn declared_support(&self) -> Option<&ModeSubspace> {
        self.support.as_ref()
    }

    /// Union of the supports of all values.
    pub fn support_hull(&self, tol: f64) -> ModeSubspace {
        let mut out = ModeSubspace::empty();
        for v in self.values() {
            out = out.union(&v.support(tol));
        }
        out
    }

    /// Zero all coefficients with `|m| > k` in every value.
    pub fn project_level(&self, k: u32) -> ControlSignal {
        let map = |vs: &[SpectralField]| vs.iter().map(|v| v.project_level(k)).collect();
        let kind = match &self.kind {
            SignalKind::PiecewiseConstant { breaks, values } => SignalKind::PiecewiseConstant {
                breaks: breaks.clone(),
                values: map(values),
            },
            SignalKind::Sampled { times, values } => SignalKind::Sampled {
                times: times.clone(),
                values: map(values),
            },
        };
        ControlSignal {
            kind,
            support: None,
        }
    }

    /// Largest value norm over the signal's own time grid.
    pub fn sup_norm(&self, s: f64) -> f64 {
        self.values()
            .iter()
            .map(|v| v.sobolev_norm(s))
            .fold(0.0, f64::max)
    }

    fn geometry_probe(&self) -> (&TorusGeometry, u32) {
        let v = &self.values()[0];
        (v.geometry(), v.trunc())
    }
}

impl Forcing for ControlSignal {
    fn eval(&self, t: f64) -> SpectralField {
        match &self.kind {
            SignalKind::PiecewiseConstant { breaks, values } => {
                let idx = match breaks.binary_search_by(|b| b.partial_cmp(&t).unwrap()) {
                    Ok(i) => i.min(values.len() - 1),
                    Err(0) => 0,
                    Err(i) => (i - 1).min(values.len() - 1),
                };
                values[idx].clone()
            }
            SignalKind::Sampled { times, values } => {
                if t <= times[0] {
                    return values[0].clone();
                }
                if t >= *times.last().unwrap() {
                    return values.last().unwrap().clone();
                }
                let i = match times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
                    Ok(i) => return values[i].clone(),
                    Err(i) => i - 1,
                };
                let w = (t - times[i]) / (times[i + 1] - times[i]);
                let mut out = values[i].scaled(1.0 - w);
                out.axpy(w, &values[i + 1]).expect("uniform signal values");
                out
            }
        }
    }

    fn knots(&self) -> Vec<f64> {
        self.times().to_vec()
    }

    fn mean(&self, a: f64, b: f64) -> SpectralField {
        let (geom, trunc) = self.geometry_probe();
        let mut acc = SpectralField::zero(*geom, trunc);
        if b <= a {
            return acc;
        }
        match &self.kind {
            SignalKind::PiecewiseConstant { breaks, values } => {
                for i in 0..values.len() {
                    // Clamp the first/last segment to cover all of [a, b].
                    let lo = if i == 0 { f64::NEG_INFINITY } else { breaks[i] };
                    let hi = if i == values.len() - 1 {
                        f64::INFINITY
                    } else {
                        breaks[i + 1]
                    };
                    let overlap = (hi.min(b) - lo.max(a)).max(0.0);
                    if overlap > 0.0 {
                        acc.axpy(overlap, &values[i]).expect("uniform signal values");
                    }
                }
            }
            SignalKind::Sampled { times, .. } => {
                // Exact integral of the piecewise-linear interpolant:
                // split [a, b] at sample times and use the trapezoid rule,
                // which is exact per linear piece.
                let mut cuts = vec![a];
                for &t in times.iter() {
                    if t > a && t < b {
                        cuts.push(t);
                    }
                }
                cuts.push(b);
                for w in cuts.windows(2) {
                    let (lo, hi) = (w[0], w[1]);
                    let mid = self.eval(lo).add(&self.eval(hi)).expect("uniform");
                    acc.axpy(0.5 * (hi - lo), &mid).expect("uniform signal values");
                }
            }
        }
        acc.scaled(1.0 / (b - a))
    }
}

/// Cubic smoothstep `h(0)=0, h(1)=1, h'(0)=h'(1)=0`.
fn smoothstep(s: f64) -> f64 {
    s * s * (3.0 - 2.0 * s)
}

fn smoothstep_deriv(s: f64) -> f64 {
    6.0 * s * (1.0 - s)
}

/// C¹ smoothing `ζ_l` of a piecewise-constant signal: equal to the signal
/// away from breakpoints, cubic Hermite ramps of width `w` across each
/// interior jump, and one-sided ramps pinning the value to zero at `t = 0`
/// and `t = T` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedSignal {
    breaks: Vec<f64>,
    values: Vec<SpectralField>,
    width: f64,
}

impl SmoothedSignal {
    pub fn new(zeta: &ControlSignal, width: f64) -> Result<Self, SignalError> {
        let (breaks, values) = match &zeta.kind {
            SignalKind::PiecewiseConstant { breaks, values } => (breaks.clone(), values.clone()),
            SignalKind::Sampled { .. } => return Err(SignalError::BadTimes),
        };
        let shortest = breaks
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        if !(width > 0.0) || width >= 0.5 * shortest {
            return Err(SignalError::RampTooWide { width, shortest });
        }
        Ok(SmoothedSignal {
            breaks,
            values,
            width,
        })
    }

    fn zero_field(&self) -> SpectralField {
        let v = &self.values[0];
        SpectralField::zero(*v.geometry(), v.trunc())
    }

    fn horizon(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    /// `(before, after, s)` of the ramp containing `t`, if any.
    fn ramp_at(&self, t: f64) -> Option<(Option<usize>, Option<usize>, f64)> {
        let w = self.width;
        let horizon = self.horizon();
        if t <= w {
            return Some((None, Some(0), (t / w).clamp(0.0, 1.0)));
        }
        if t >= horizon - w {
            let s = ((t - (horizon - w)) / w).clamp(0.0, 1.0);
            return Some((Some(self.values.len() - 1), None, s));
        }
        for i in 1..self.breaks.len() - 1 {
            let c = self.breaks[i];
            if (t - c).abs() <= 0.5 * w {
                let s = ((t - (c - 0.5 * w)) / w).clamp(0.0, 1.0);
                return Some((Some(i - 1), Some(i), s));
            }
        }
        None
    }

    fn value_of(&self, idx: Option<usize>) -> SpectralField {
        match idx {
            Some(i) => self.values[i].clone(),
            None => self.zero_field(),
        }
    }

    /// `ζ_l(t)`.
    pub fn eval(&self, t: f64) -> SpectralField {
        if let Some((from, to, s)) = self.ramp_at(t) {
            let h = smoothstep(s);
            let mut out = self.value_of(from).scaled(1.0 - h);
            out.axpy(h, &self.value_of(to)).expect("uniform values");
            return out;
        }
        let idx = match self
            .breaks
            .binary_search_by(|b| b.partial_cmp(&t).unwrap())
        {
            Ok(i) => i.min(self.values.len() - 1),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.values.len() - 1),
        };
        self.values[idx].clone()
    }

    /// `∂_t ζ_l(t)`: supported on the ramps, `(Δv)·h'(s)/w` there.
    pub fn derivative(&self, t: f64) -> SpectralField {
        if let Some((from, to, s)) = self.ramp_at(t) {
            let mut dv = self.value_of(to);
            dv.axpy(-1.0, &self.value_of(from)).expect("uniform values");
            return dv.scaled(smoothstep_deriv(s) / self.width);
        }
        self.zero_field()
    }

    /// Ramp-edge knots plus interior ramp subdivisions, so integrators
    /// resolve every ramp with a few steps.
    pub fn knots(&self) -> Vec<f64> {
        let w = self.width;
        let horizon = self.horizon();
        let sub = 2;
        let mut out = self.breaks.clone();
        let push_ramp = |lo: f64, hi: f64, out: &mut Vec<f64>| {
            for i in 0..=sub {
                out.push(lo + (hi - lo) * (i as f64) / (sub as f64));
            }
        };
        push_ramp(0.0, w, &mut out);
        push_ramp(horizon - w, horizon, &mut out);
        for i in 1..self.breaks.len() - 1 {
            let c = self.breaks[i];
            push_ramp(c - 0.5 * w, c + 0.5 * w, &mut out);
        }
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        out
    }

    pub fn values(&self) -> &[SpectralField] {
        &self.values
    }

    pub fn width(&self) -> f64 {
        self.width
    }
}

impl Forcing for SmoothedSignal {
    fn eval(&self, t: f64) -> SpectralField {
        SmoothedSignal::eval(self, t)
    }

    fn knots(&self) -> Vec<f64> {
        SmoothedSignal::knots(self)
    }

    fn mean(&self, a: f64, b: f64) -> SpectralField {
        // Piecewise cubic: Simpson per knot interval is exact.
        let mut cuts = vec![a];
        for t in SmoothedSignal::knots(self) {
            if t > a && t < b {
                cuts.push(t);
            }
        }
        cuts.push(b);
        let mut acc = self.zero_field();
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mut simpson = self.eval(lo);
            simpson.axpy(4.0, &self.eval(0.5 * (lo + hi))).expect("uniform");
            simpson.axpy(1.0, &self.eval(hi)).expect("uniform");
            acc.axpy((hi - lo) / 6.0, &simpson).expect("uniform");
        }
        acc.scaled(1.0 / (b - a))
    }
}

/// The lifted control `η' = η + ∂_tζ_l` that makes the plain system track
/// the extended one: the plain solution with `η'` equals the extended
/// solution (with controls `η`, `ζ_l`) shifted by `ζ_l`, and the pinning
/// `ζ_l(0) = ζ_l(T) = 0` matches the endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedControl {
    pub eta: ControlSignal,
    pub zeta: SmoothedSignal,
}

impl Forcing for LiftedControl {
    fn eval(&self, t: f64) -> SpectralField {
        let mut out = self.eta.eval(t);
        out.axpy(1.0, &self.zeta.derivative(t)).expect("uniform values");
        out
    }

    fn knots(&self) -> Vec<f64> {
        let mut out = self.eta.knots();
        out.extend(self.zeta.knots());
        out.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.dedup();
        out
    }

    fn mean(&self, a: f64, b: f64) -> SpectralField {
        // ∫∂_tζ_l = ζ_l(b) − ζ_l(a), so the mean is exact.
        let mut out = self.eta.mean(a, b).scaled(b - a);
        out.axpy(1.0, &self.zeta.eval(b)).expect("uniform values");
        out.axpy(-1.0, &self.zeta.eval(a)).expect("uniform values");
        out.scaled(1.0 / (b - a))
    }
}

/// A field-valued polynomial in time minus an optional signal:
/// `P₀ + tP₁ + … + tᵈP_d − f(t)`. Exact evaluation and interval means.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialControl {
    pub coeffs: Vec<SpectralField>,
    pub subtract: Option<ControlSignal>,
}

impl PolynomialControl {
    pub fn new(coeffs: Vec<SpectralField>, subtract: Option<ControlSignal>) -> Self {
        assert!(!coeffs.is_empty());
        PolynomialControl { coeffs, subtract }
    }

    pub fn project_level(&self, k: u32) -> PolynomialControl {
        PolynomialControl {
            coeffs: self.coeffs.iter().map(|c| c.project_level(k)).collect(),
            subtract: self.subtract.as_ref().map(|f| f.project_level(k)),
        }
    }

    /// Union of coefficient and subtracted-signal supports.
    pub fn support_hull(&self, tol: f64) -> ModeSubspace {
        let mut out = ModeSubspace::empty();
        for c in &self.coeffs {
            out = out.union(&c.support(tol));
        }
        if let Some(f) = &self.subtract {
            out = out.union(&f.support_hull(tol));
        }
        out
    }
}

impl Forcing for PolynomialControl {
    fn eval(&self, t: f64) -> SpectralField {
        let mut out = self.coeffs[0].clone();
        let mut tp = 1.0;
        for c in &self.coeffs[1..] {
            tp *= t;
            out.axpy(tp, c).expect("uniform values");
        }
        if let Some(f) = &self.subtract {
            out.axpy(-1.0, &f.eval(t)).expect("uniform values");
        }
        out
    }

    fn knots(&self) -> Vec<f64> {
        self.subtract.as_ref().map(|f| f.knots()).unwrap_or_default()
    }

    fn mean(&self, a: f64, b: f64) -> SpectralField {
        let mut out = SpectralField::zero(*self.coeffs[0].geometry(), self.coeffs[0].trunc());
        for (i, c) in self.coeffs.iter().enumerate() {
            let k = (i + 1) as f64;
            // ∫ tⁱ dt / (b−a) = (b^{i+1} − a^{i+1}) / ((i+1)(b−a))
            let fac = (b.powi(i as i32 + 1) - a.powi(i as i32 + 1)) / (k * (b - a));
            out.axpy(fac, c).expect("uniform values");
        }
        if let Some(f) = &self.subtract {
            out.axpy(-1.0, &f.mean(a, b)).expect("uniform values");
        }
        out
    }
}

/// Piecewise-constantization of any forcing on the given grid by exact
/// cell means. The grid should include the forcing's own knots so jump
/// mass is preserved cell by cell.
pub fn piecewise_constantize(f: &dyn Forcing, grid: &[f64]) -> Result<ControlSignal, SignalError> {
    check_times(grid)?;
    if grid.len() < 2 {
        return Err(SignalError::Empty);
    }
    let values = grid
        .windows(2)
        .map(|w| f.mean(w[0], w[1]))
        .collect::<Vec<_>>();
    ControlSignal::piecewise_constant(grid.to_vec(), values, None)
}

/// Merge a base uniform grid of `segments` cells on `[0, horizon]` with a
/// set of mandatory knots.
pub fn refine_grid(segments: u32, horizon: f64, knots: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = (0..=segments)
        .map(|i| horizon * (i as f64) / (segments as f64))
        .collect();
    out.extend(knots.iter().copied().filter(|&t| t > 0.0 && t < horizon));
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * horizon.max(1.0));
    out
}
