//! Fast-oscillation relaxation: the defect `f_k` of the oscillating
//! control has a running integral and a kernel image that both vanish as
//! the oscillation count grows (here at the piecewise-constant rate 1/k),
//! while a k-independent defect shows no relaxation at all.
//!
//! Run: `cargo run --release --example relaxation_study`

use sgflow::convexify::{RelaxationInput, VnSource};
use sgflow::field::{FluidParams, Parity, SpectralField};
use sgflow::geometry::{ModeIndex, TorusGeometry};
use sgflow::signal::ControlSignal;
use sgflow::{convex_decompose, relaxation_report, saturation_solve};

fn main() {
    let geom = TorusGeometry::new(1.0, 1.1).unwrap();
    let params = FluidParams::new(0.2, 0.1).unwrap();
    let horizon = 1.0;
    let trunc = 6;

    // Oscillate the saturation generator of c_{(3,1)} around a fixed
    // low-mode background.
    let target = ModeIndex::new(3, 1).unwrap();
    let step = saturation_solve(
        target,
        Parity::Cos,
        ModeIndex::new(2, 1).unwrap(),
        ModeIndex::new(1, 0).unwrap(),
        &params,
        &geom,
    )
    .unwrap();
    let rho = step.generator_field(1.0, &geom, trunc).unwrap();
    let eta = step.remainder_field(1.0, &geom, trunc).unwrap();
    let decomp = convex_decompose(eta, &[1.0], std::slice::from_ref(&rho)).unwrap();

    let mut vn_field =
        SpectralField::single_mode(geom, trunc, ModeIndex::new(1, 0).unwrap(), Parity::Cos, 0.6)
            .unwrap();
    vn_field
        .add_coeff(ModeIndex::new(1, 1).unwrap(), Parity::Sin, 0.35)
        .unwrap();
    let vn = ControlSignal::constant(vn_field, horizon);

    let ks = [8, 16, 32, 64, 128];
    let rows = relaxation_report(
        RelaxationInput::Oscillating {
            decomposition: &decomp,
            vn: VnSource::PiecewiseConstant(&vn),
            horizon,
        },
        &ks,
        &params,
    )
    .unwrap();
    println!("oscillating construction:");
    println!("{:>6} {:>16} {:>16}", "k", "sup |∫f| (V2)", "sup |Kf| (V2)");
    for r in &rows {
        println!("{:>6} {:>16.6e} {:>16.6e}", r.k, r.sup_f_integral, r.sup_kf);
    }

    let fixed = ControlSignal::constant(
        SpectralField::single_mode(geom, trunc, ModeIndex::new(1, 1).unwrap(), Parity::Cos, 0.5)
            .unwrap(),
        horizon,
    );
    let flat = relaxation_report(RelaxationInput::Fixed(&fixed), &ks, &params).unwrap();
    println!("\nnegative control (k-independent defect):");
    println!("{:>6} {:>16} {:>16}", "k", "sup |∫f| (V2)", "sup |Kf| (V2)");
    for r in &flat {
        println!("{:>6} {:>16.6e} {:>16.6e}", r.k, r.sup_f_integral, r.sup_kf);
    }
}
