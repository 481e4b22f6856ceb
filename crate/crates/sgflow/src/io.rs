//! File exports: trajectory and control CSVs, relaxation tables, state
//! snapshots. Floats are written with 17 significant digits so every CSV
//! value round-trips exactly.

use crate::convexify::RelaxRow;
use crate::dynamics::Trajectory;
use crate::field::{Parity, SpectralField};
use crate::signal::Forcing;
use std::io::Write;
use std::path::Path;

/// 17-significant-digit scientific notation (round-trip exact for f64).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Trajectory CSV: `t, norm_v0, norm_v1, norm_v3, spillover` per step.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "t,norm_v0,norm_v1,norm_v3,spillover")?;
    for (t, d) in traj.times.iter().zip(traj.diagnostics.iter()) {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(*t),
            fmt_f64(d.norm_v0),
            fmt_f64(d.norm_v1),
            fmt_f64(d.norm_v3),
            fmt_f64(d.spillover)
        )?;
    }
    Ok(())
}

/// Full-state snapshots at the given stride over the stored states, as a
/// JSON list of `{t, state}` objects.
pub fn write_snapshots_json(
    path: &Path,
    traj: &Trajectory,
    stride: usize,
) -> std::io::Result<()> {
    #[derive(serde::Serialize)]
    struct Snap<'a> {
        t: f64,
        state: &'a SpectralField,
    }
    let stride = stride.max(1);
    let mut snaps = Vec::new();
    for (i, (t, s)) in traj.stored().enumerate() {
        if i % stride == 0 {
            snaps.push(Snap { t, state: s });
        }
    }
    let json = serde_json::to_string_pretty(&snaps)?;
    std::fs::write(path, json)
}

/// Relaxation table CSV: `k, sup_f_integral, sup_kf`.
pub fn write_relaxation_csv(path: &Path, rows: &[RelaxRow]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "k,sup_f_integral,sup_kf")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{}",
            r.k,
            fmt_f64(r.sup_f_integral),
            fmt_f64(r.sup_kf)
        )?;
    }
    Ok(())
}

/// Control dump CSV: `t, m1, m2, parity, value` for every nonzero slot at
/// every sample time.
pub fn write_control_csv(
    path: &Path,
    signal: &dyn Forcing,
    samples: &[f64],
) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "t,m1,m2,parity,value")?;
    for &t in samples {
        let field = signal.eval(t);
        for (m, c) in field.iter() {
            for (parity, v) in [(Parity::Cos, c.a), (Parity::Sin, c.b)] {
                if v != 0.0 {
                    writeln!(
                        out,
                        "{},{},{},{},{}",
                        fmt_f64(t),
                        m.m1(),
                        m.m2(),
                        parity.label(),
                        fmt_f64(v)
                    )?;
                }
            }
        }
    }
    Ok(())
}
