//! Free decay of a single basis mode.
//!
//! With no forcing the bilinear term vanishes on a single mode, so each
//! coefficient obeys the scalar law `a(t) = a(0)·exp(−νλt/(1+αλ))`. The
//! integrator (exact on the diagonal part) must reproduce it to near
//! machine precision.
//!
//! Run: `cargo run --release --example single_mode_decay`

use sgflow::dynamics::{IntegratorConfig, Scheme};
use sgflow::field::{FluidParams, Parity, SpectralField};
use sgflow::geometry::{ModeIndex, TorusGeometry};
use sgflow::signal::ControlSignal;
use sgflow::{integrate_plain, stokes_eigenvalue};

fn main() {
    let geom = TorusGeometry::new(1.0, 1.3).unwrap();
    let params = FluidParams::new(0.5, 1.0).unwrap();
    let m = ModeIndex::new(2, 1).unwrap();
    let u0 = SpectralField::single_mode(geom, 6, m, Parity::Cos, 1.5).unwrap();
    let horizon = 1.0;

    let cfg = IntegratorConfig::new(1e-3, Scheme::EtdRk4Classical, params);
    let zero = ControlSignal::zero(geom, 6, horizon);
    let traj = integrate_plain(&u0, &zero, &zero, &cfg, horizon).unwrap();

    let lambda = stokes_eigenvalue(m, &geom);
    let rate = params.nu * lambda / (1.0 + params.alpha * lambda);
    println!("mode {m}, Stokes eigenvalue {lambda:.4}, decay rate {rate:.4}");
    println!("{:>8} {:>22} {:>22} {:>12}", "t", "computed", "exact", "abs err");
    for (t, state) in traj.stored().filter(|(t, _)| (t * 4.0).fract() == 0.0) {
        let got = state.coeff(m, Parity::Cos);
        let exact = 1.5 * (-rate * t).exp();
        println!("{t:>8.3} {got:>22.15e} {exact:>22.15e} {:>12.3e}", (got - exact).abs());
    }
}
