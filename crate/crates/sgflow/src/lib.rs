//! Spectral Galerkin simulation and low-mode control synthesis for
//! second-grade fluids on the 2D torus.
//!
//! The crate works in the transformed variable `U = (I − αΔ)u`, in which
//! the evolution reads `∂_t U + LU + B(U,U) = Pf + η` with a mode-diagonal
//! dissipative operator `L` and the bilinear transport operator `B`.
//! On top of the simulator sits a constructive control-synthesis engine:
//! any reachable control supported on finitely many Fourier modes is
//! rewritten, level by level, through controls supported on the lowest
//! modes `H³_q`, trading mode count for fast oscillation.
//!
//! Module map:
//! - [`geometry`]: the weighted torus, mode indices, perpendicular
//!   directions, Leray projection directions.
//! - [`field`]: truncated divergence-free fields, diagonal operators,
//!   multiplier Sobolev norms.
//! - [`bilinear`]: the operator `B` in closed mode-pair form plus an
//!   independent grid-quadrature oracle.
//! - [`signal`]: time-dependent controls and forcings.
//! - [`dynamics`]: exponential integrators, the kernel operator, Gronwall
//!   and dissipation monitors.
//! - [`convexify`]: convex decomposition, oscillating relaxation controls,
//!   the extension lift.
//! - [`saturation`]: the constructive ladder expressing high modes through
//!   `H³_q`, with replayable certificates.
//! - [`pipeline`]: the end-to-end synthesis producing an `H³_q`-valued
//!   control steering between prescribed states.

pub mod bilinear;
pub mod convexify;
pub mod dynamics;
pub mod field;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod runner;
pub mod saturation;
pub mod signal;

pub use bilinear::{bilinear_norm_bounds, direct_b, full_b, interact};
pub use convexify::{
    build_psi_k, compute_fk, convex_decompose, lift_extended_control, relaxation_report,
    ConvexDecomposition, OscillationProfile, RelaxationInput, VnSource,
};
pub use dynamics::{
    gronwall_monitor, integrate_extended, integrate_perturbed, integrate_plain, kernel_k,
    IntegratorConfig, Scheme, Trajectory,
};
pub use field::{FluidParams, ModeSubspace, Parity, SpectralField};
pub use geometry::{inner_q, leray_project_dir, perp_q, stokes_eigenvalue, ModeIndex, TorusGeometry, Vec2};
pub use pipeline::{
    project_control, reference_control, stage_descend, synthesize, PipelineConfig, StageReport,
};
pub use saturation::{f_of, ladder_build, saturation_solve, Ladder, LadderStep};
pub use signal::{ControlSignal, Forcing, LiftedControl, PolynomialControl, SmoothedSignal};
