//! Exact steering along a straight line in the transformed variable.
//!
//! The control `η = ∂_tŪ + LŪ + B(Ū) − Pf` makes the straight line
//! `Ū(t) = (1/T)(I−αΔ)((T−t)u₀ + t·u_T)` an exact solution, so the
//! integrated state must land on the target up to integrator error.
//!
//! Run: `cargo run --release --example exact_steering`

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use sgflow::dynamics::{IntegratorConfig, Scheme};
use sgflow::field::{FluidParams, Parity, SpectralField};
use sgflow::geometry::{canonical_modes, TorusGeometry};
use sgflow::signal::ControlSignal;
use sgflow::{integrate_plain, reference_control};

fn main() {
    let geom = TorusGeometry::new(1.0, 1.2).unwrap();
    let params = FluidParams::new(0.5, 1.0).unwrap();
    let horizon = 1.0;
    let trunc = 8;
    let mut rng = ChaCha12Rng::seed_from_u64(7);

    let mut u0 = SpectralField::zero(geom, trunc);
    let mut ut = SpectralField::zero(geom, trunc);
    for m in canonical_modes(3) {
        u0.add_coeff(m, Parity::Cos, 0.4 * rng.gen_range(-1.0..1.0)).unwrap();
        u0.add_coeff(m, Parity::Sin, 0.4 * rng.gen_range(-1.0..1.0)).unwrap();
        ut.add_coeff(m, Parity::Cos, 0.4 * rng.gen_range(-1.0..1.0)).unwrap();
        ut.add_coeff(m, Parity::Sin, 0.4 * rng.gen_range(-1.0..1.0)).unwrap();
    }

    let f = ControlSignal::zero(geom, trunc, horizon);
    println!("{:>10} {:>16}", "dt", "V1 error at T");
    for dt in [1e-2, 3e-3, 1e-3] {
        let cfg = IntegratorConfig::new(dt, Scheme::EtdRk4Classical, params).with_stride(100_000);
        let (_, eta) = reference_control(&u0, &ut, &f, horizon, &cfg).unwrap();
        let traj = integrate_plain(&u0.helmholtz(&params, false), &eta, &f, &cfg, horizon).unwrap();
        let err = traj
            .final_state()
            .sub(&ut.helmholtz(&params, false))
            .unwrap()
            .sobolev_norm(1.0);
        println!("{dt:>10.0e} {err:>16.6e}");
    }
}
