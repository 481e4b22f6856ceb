//! Cross-validation of the bilinear operator: the closed mode-pair form
//! against the independent grid-quadrature oracle, plus the exact
//! self-annihilation of single modes.
//!
//! Run: `cargo run --release --example bilinear_oracle`

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use sgflow::field::{FluidParams, Parity, SpectralField};
use sgflow::geometry::{canonical_modes, TorusGeometry};
use sgflow::{direct_b, full_b};

fn main() {
    let mut rng = ChaCha12Rng::seed_from_u64(2024);
    println!("{:>6} {:>10} {:>8} {:>14} {:>14}", "trunc", "q", "alpha", "|B| (V0)", "rel dev");
    for &trunc in &[2u32, 4, 6] {
        for &alpha in &[0.1, 1.0, 10.0] {
            let geom =
                TorusGeometry::new(rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0)).unwrap();
            let params = FluidParams::new(alpha, 1.0).unwrap();
            let mut u = SpectralField::zero(geom, trunc);
            let mut v = SpectralField::zero(geom, trunc);
            for m in canonical_modes(trunc) {
                u.add_coeff(m, Parity::Cos, rng.gen_range(-1.0..1.0)).unwrap();
                u.add_coeff(m, Parity::Sin, rng.gen_range(-1.0..1.0)).unwrap();
                v.add_coeff(m, Parity::Cos, rng.gen_range(-1.0..1.0)).unwrap();
                v.add_coeff(m, Parity::Sin, rng.gen_range(-1.0..1.0)).unwrap();
            }
            let (fast, spill) = full_b(&u, &v, &params).unwrap();
            let slow = direct_b(&u, &v, &params, 4 * trunc + 1).unwrap();
            let dev = fast.sub(&slow).unwrap().sobolev_norm(0.0) / fast.sobolev_norm(0.0);
            println!(
                "{trunc:>6} ({:>4.2},{:>4.2}) {alpha:>8.1} {:>14.6e} {dev:>14.3e}",
                geom.q1(),
                geom.q2(),
                fast.sobolev_norm(0.0),
            );
            assert!(dev < 1e-10);
            let _ = spill;
        }
    }

    // Single modes annihilate themselves exactly.
    let geom = TorusGeometry::new(1.0, 1.7).unwrap();
    let params = FluidParams::new(0.8, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for m in canonical_modes(6) {
        for parity in [Parity::Cos, Parity::Sin] {
            let f = SpectralField::single_mode(geom, 12, m, parity, 1.0).unwrap();
            worst = worst.max(full_b(&f, &f, &params).unwrap().0.sobolev_norm(0.0));
        }
    }
    println!("\nworst single-mode self-interaction norm: {worst:.1e} (exact zero expected)");
}
