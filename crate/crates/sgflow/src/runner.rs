//! Batch experiment runner behind the command-line interface: JSON-config
//! driven, seed-deterministic, archivable outputs.
//!
//! Every command validates its whole configuration before any computation.
//! With a fixed seed, outputs are byte-identical across runs.

use crate::convexify::{convex_decompose, relaxation_report, RelaxationInput, VnSource};
use crate::dynamics::{integrate_plain, DynamicsError, IntegratorConfig, Scheme};
use crate::field::{FluidParams, Parity, SpectralField};
use crate::geometry::{canonical_modes, ModeIndex, TorusGeometry};
use crate::io;
use crate::pipeline::{synthesize, PipelineConfig, PipelineError};
use crate::saturation::ladder_build;
use crate::signal::{ControlSignal, Forcing};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solution blow-up: {0}")]
    Blowup(DynamicsError),
    #[error("synthesis stage failure: {0}")]
    Stage(PipelineError),
    #[error("{0}")]
    Other(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RunnerError {
    /// Process exit code: 2 config, 3 blow-up, 4 stage failure, 1 other.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunnerError::Config(_) => 2,
            RunnerError::Blowup(_) => 3,
            RunnerError::Stage(_) => 4,
            _ => 1,
        }
    }
}

fn config_err<E: std::fmt::Display>(e: E) -> RunnerError {
    RunnerError::Config(e.to_string())
}

fn map_dynamics(e: DynamicsError) -> RunnerError {
    match e {
        DynamicsError::Divergence { .. } => RunnerError::Blowup(e),
        other => RunnerError::Other(other.to_string()),
    }
}

fn map_pipeline(e: PipelineError) -> RunnerError {
    match e {
        PipelineError::StageFailure { .. } => RunnerError::Stage(e),
        PipelineError::InvalidConfig(msg) => RunnerError::Config(msg),
        PipelineError::Dynamics(d @ DynamicsError::Divergence { .. }) => RunnerError::Blowup(d),
        other => RunnerError::Other(other.to_string()),
    }
}

/// Declarative field construction in configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    Modes {
        entries: Vec<ModeAmp>,
    },
    Random {
        max_level: u32,
        amplitude: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeAmp {
    pub m: [i64; 2],
    pub parity: Parity,
    pub amp: f64,
}

impl FieldSpec {
    pub fn build(
        &self,
        geom: TorusGeometry,
        trunc: u32,
        rng: &mut ChaCha12Rng,
    ) -> Result<SpectralField, RunnerError> {
        match self {
            FieldSpec::Zero => Ok(SpectralField::zero(geom, trunc)),
            FieldSpec::Modes { entries } => {
                let mut f = SpectralField::zero(geom, trunc);
                for e in entries {
                    let m = ModeIndex::new(e.m[0], e.m[1]).map_err(config_err)?;
                    f.add_coeff(m, e.parity, e.amp).map_err(config_err)?;
                }
                Ok(f)
            }
            FieldSpec::Random {
                max_level,
                amplitude,
            } => {
                if *max_level > trunc {
                    return Err(RunnerError::Config(format!(
                        "random field level {max_level} exceeds truncation {trunc}"
                    )));
                }
                let mut f = SpectralField::zero(geom, trunc);
                for m in canonical_modes(*max_level) {
                    f.add_coeff(m, Parity::Cos, amplitude * rng.gen_range(-1.0..1.0))
                        .map_err(config_err)?;
                    f.add_coeff(m, Parity::Sin, amplitude * rng.gen_range(-1.0..1.0))
                        .map_err(config_err)?;
                }
                Ok(f)
            }
        }
    }
}

/// Declarative signal construction in configs.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SignalSpec {
    #[default]
    Zero,
    Constant {
        field: FieldSpec,
    },
    Piecewise {
        breaks: Vec<f64>,
        fields: Vec<FieldSpec>,
    },
}

impl SignalSpec {
    pub fn build(
        &self,
        geom: TorusGeometry,
        trunc: u32,
        horizon: f64,
        rng: &mut ChaCha12Rng,
    ) -> Result<ControlSignal, RunnerError> {
        match self {
            SignalSpec::Zero => Ok(ControlSignal::zero(geom, trunc, horizon)),
            SignalSpec::Constant { field } => Ok(ControlSignal::constant(
                field.build(geom, trunc, rng)?,
                horizon,
            )),
            SignalSpec::Piecewise { breaks, fields } => {
                let values = fields
                    .iter()
                    .map(|f| f.build(geom, trunc, rng))
                    .collect::<Result<Vec<_>, _>>()?;
                ControlSignal::piecewise_constant(breaks.clone(), values, None)
                    .map_err(config_err)
            }
        }
    }
}

fn default_scheme() -> Scheme {
    Scheme::EtdRk4Classical
}

fn default_seed() -> u64 {
    0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub geometry: [f64; 2],
    pub trunc: u32,
    pub alpha: f64,
    pub nu: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub initial: FieldSpec,
    #[serde(default)]
    pub control: SignalSpec,
    #[serde(default)]
    pub force: SignalSpec,
    #[serde(default)]
    pub snapshot_stride: Option<usize>,
}

/// Integrate the plain controlled system and export the trajectory.
pub fn run_simulate(cfg: &SimulateConfig, out_dir: &Path) -> Result<(), RunnerError> {
    let geom = TorusGeometry::new(cfg.geometry[0], cfg.geometry[1]).map_err(config_err)?;
    let params = FluidParams::new(cfg.alpha, cfg.nu).map_err(config_err)?;
    if !(cfg.dt > 0.0 && cfg.horizon > 0.0) {
        return Err(RunnerError::Config("dt and horizon must be positive".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let u0 = cfg.initial.build(geom, cfg.trunc, &mut rng)?;
    let eta = cfg.control.build(geom, cfg.trunc, cfg.horizon, &mut rng)?;
    let force = cfg.force.build(geom, cfg.trunc, cfg.horizon, &mut rng)?;

    let stride = cfg.snapshot_stride.unwrap_or(1);
    let icfg = IntegratorConfig::new(cfg.dt, cfg.scheme, params).with_stride(stride);
    let traj = integrate_plain(&u0, &eta, &force, &icfg, cfg.horizon).map_err(map_dynamics)?;

    std::fs::create_dir_all(out_dir)?;
    io::write_trajectory_csv(&out_dir.join("trajectory.csv"), &traj)?;
    if cfg.snapshot_stride.is_some() {
        io::write_snapshots_json(&out_dir.join("snapshots.json"), &traj, 1)?;
    }
    log::info!(
        "simulate: {} steps, final V1 norm {:.6e}",
        traj.times.len() - 1,
        traj.diagnostics.last().unwrap().norm_v1
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionSpec {
    pub eta: FieldSpec,
    pub alphas: Vec<f64>,
    pub rhos: Vec<FieldSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaxConfig {
    pub geometry: [f64; 2],
    pub trunc: u32,
    pub alpha: f64,
    pub nu: f64,
    pub horizon: f64,
    pub ks: Vec<u32>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub decomposition: DecompositionSpec,
    #[serde(default)]
    pub vn: FieldSpec,
    /// When set, run the k-independent negative control with this constant
    /// defect instead of the oscillating construction.
    #[serde(default)]
    pub fixed_defect: Option<FieldSpec>,
}

impl Default for FieldSpec {
    fn default() -> Self {
        FieldSpec::Zero
    }
}

/// Relaxation study: decay of the oscillation defect over the k-list.
pub fn run_relax(cfg: &RelaxConfig, out_dir: &Path) -> Result<(), RunnerError> {
    let geom = TorusGeometry::new(cfg.geometry[0], cfg.geometry[1]).map_err(config_err)?;
    let params = FluidParams::new(cfg.alpha, cfg.nu).map_err(config_err)?;
    if cfg.ks.is_empty() {
        return Err(RunnerError::Config("ks must not be empty".into()));
    }
    if !(cfg.horizon > 0.0) {
        return Err(RunnerError::Config("horizon must be positive".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let eta = cfg.decomposition.eta.build(geom, cfg.trunc, &mut rng)?;
    let rhos = cfg
        .decomposition
        .rhos
        .iter()
        .map(|f| f.build(geom, cfg.trunc, &mut rng))
        .collect::<Result<Vec<_>, _>>()?;
    let decomp =
        convex_decompose(eta, &cfg.decomposition.alphas, &rhos).map_err(config_err)?;
    let vn_field = cfg.vn.build(geom, cfg.trunc, &mut rng)?;
    let vn = ControlSignal::constant(vn_field, cfg.horizon);

    let rows = match &cfg.fixed_defect {
        Some(spec) => {
            let fixed =
                ControlSignal::constant(spec.build(geom, cfg.trunc, &mut rng)?, cfg.horizon);
            relaxation_report(RelaxationInput::Fixed(&fixed), &cfg.ks, &params)
        }
        None => relaxation_report(
            RelaxationInput::Oscillating {
                decomposition: &decomp,
                vn: VnSource::PiecewiseConstant(&vn),
                horizon: cfg.horizon,
            },
            &cfg.ks,
            &params,
        ),
    }
    .map_err(|e| RunnerError::Other(e.to_string()))?;

    std::fs::create_dir_all(out_dir)?;
    io::write_relaxation_csv(&out_dir.join("relaxation.csv"), &rows)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    pub geometry: [f64; 2],
    pub alpha: f64,
    pub nu: f64,
    pub n_max: u32,
}

#[derive(Serialize)]
struct LadderEnvelope<'a> {
    certificate: &'a crate::saturation::Ladder,
    replay_residual: f64,
    off_span: f64,
    fallback_steps: usize,
}

/// Build, verify, and export the saturation certificate.
pub fn run_ladder(cfg: &LadderConfig, out_dir: &Path) -> Result<(), RunnerError> {
    let geom = TorusGeometry::new(cfg.geometry[0], cfg.geometry[1]).map_err(config_err)?;
    let params = FluidParams::new(cfg.alpha, cfg.nu).map_err(config_err)?;
    if cfg.n_max < 3 {
        return Err(RunnerError::Config("n_max must be at least 3".into()));
    }
    let ladder = ladder_build(cfg.n_max, &geom, &params)
        .map_err(|e| RunnerError::Other(e.to_string()))?;
    let v = ladder
        .verify_all(&params, &geom)
        .map_err(|e| RunnerError::Other(e.to_string()))?;
    let envelope = LadderEnvelope {
        certificate: &ladder,
        replay_residual: v.replay_residual,
        off_span: v.off_span,
        fallback_steps: ladder.steps.iter().filter(|s| s.fallback).count(),
    };
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(
        out_dir.join("ladder.json"),
        serde_json::to_string_pretty(&envelope).map_err(|e| RunnerError::Other(e.to_string()))?,
    )?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    pub geometry: [f64; 2],
    pub trunc: u32,
    pub alpha: f64,
    pub nu: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    pub dt: f64,
    pub horizon: f64,
    pub epsilon: f64,
    pub k_project: u32,
    #[serde(default = "default_segments")]
    pub segments: u32,
    #[serde(default = "default_k0")]
    pub oscillation_k0: u32,
    #[serde(default = "default_kmax")]
    pub max_oscillation_k: u32,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub u0: FieldSpec,
    pub u_target: FieldSpec,
    #[serde(default)]
    pub force: SignalSpec,
}

fn default_segments() -> u32 {
    16
}

fn default_k0() -> u32 {
    16
}

fn default_kmax() -> u32 {
    1024
}

#[derive(Serialize)]
struct ControlManifest<'a> {
    config: &'a ControlConfig,
    stages: &'a [crate::pipeline::StageReport],
    projection_error: f64,
    achieved_v1: f64,
    achieved_u_v3: f64,
    high_mode_warning: bool,
    control_support_levels: Vec<u32>,
}

/// Full control synthesis: manifest JSON plus control and trajectory dumps.
pub fn run_control(cfg: &ControlConfig, out_dir: &Path) -> Result<(), RunnerError> {
    let geom = TorusGeometry::new(cfg.geometry[0], cfg.geometry[1]).map_err(config_err)?;
    let params = FluidParams::new(cfg.alpha, cfg.nu).map_err(config_err)?;
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let u0 = cfg.u0.build(geom, cfg.trunc, &mut rng)?;
    let u_target = cfg.u_target.build(geom, cfg.trunc, &mut rng)?;
    let force = cfg.force.build(geom, cfg.trunc, cfg.horizon, &mut rng)?;

    let pcfg = PipelineConfig {
        horizon: cfg.horizon,
        epsilon: cfg.epsilon,
        trunc: cfg.trunc,
        k_project: cfg.k_project,
        oscillation_k0: cfg.oscillation_k0,
        segments: cfg.segments,
        max_oscillation_k: cfg.max_oscillation_k,
        integrator: IntegratorConfig::new(cfg.dt, cfg.scheme, params),
    };
    pcfg.validate().map_err(map_pipeline)?;
    let ladder = ladder_build(cfg.k_project, &geom, &params)
        .map_err(|e| RunnerError::Other(e.to_string()))?;
    let outcome = synthesize(&u0, &u_target, &force, &ladder, &pcfg).map_err(map_pipeline)?;

    let support_levels = outcome
        .eta_final
        .support_hull(0.0)
        .iter()
        .map(|(m, _)| m.level())
        .collect();
    let manifest = ControlManifest {
        config: cfg,
        stages: &outcome.trace,
        projection_error: outcome.projection_error,
        achieved_v1: outcome.achieved_v1,
        achieved_u_v3: outcome.achieved_u_v3,
        high_mode_warning: outcome.high_mode_warning,
        control_support_levels: support_levels,
    };
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(
        out_dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest).map_err(|e| RunnerError::Other(e.to_string()))?,
    )?;

    // Sample the control on its knots merged with a uniform grid.
    let mut samples = outcome.eta_final.knots();
    let uniform = 512usize;
    for i in 0..=uniform {
        samples.push(cfg.horizon * (i as f64) / (uniform as f64));
    }
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    samples.dedup();
    samples.retain(|&t| (0.0..=cfg.horizon).contains(&t));
    if samples.len() > 4096 {
        let step = samples.len() / 4096 + 1;
        samples = samples.into_iter().step_by(step).collect();
    }
    io::write_control_csv(&out_dir.join("control.csv"), &outcome.eta_final, &samples)?;
    io::write_trajectory_csv(&out_dir.join("trajectory.csv"), &outcome.trajectory)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_spec_validation() {
        let geom = TorusGeometry::unit();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let bad = FieldSpec::Modes {
            entries: vec![ModeAmp {
                m: [0, 0],
                parity: Parity::Cos,
                amp: 1.0,
            }],
        };
        assert!(bad.build(geom, 4, &mut rng).is_err());
        let high = FieldSpec::Random {
            max_level: 9,
            amplitude: 1.0,
        };
        assert!(high.build(geom, 4, &mut rng).is_err());
    }

    #[test]
    fn seeded_fields_are_reproducible() {
        let geom = TorusGeometry::unit();
        let spec = FieldSpec::Random {
            max_level: 3,
            amplitude: 1.0,
        };
        let a = spec
            .build(geom, 4, &mut ChaCha12Rng::seed_from_u64(7))
            .unwrap();
        let b = spec
            .build(geom, 4, &mut ChaCha12Rng::seed_from_u64(7))
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_json_rejects_unknown_fields() {
        let json = r#"{
            "geometry": [1.0, 1.0], "trunc": 4, "alpha": 0.5, "nu": 1.0,
            "dt": 0.01, "horizon": 1.0, "initial": {"kind": "zero"},
            "bogus": 1
        }"#;
        assert!(serde_json::from_str::<SimulateConfig>(json).is_err());
    }
}
