//! Hyperfine structure of the ODMR dips versus transverse bias field.
//!
//! Diagonalizes the 9x9 electron-nucleus Hamiltonian exactly and prints,
//! for each of the two transverse-field dips, the frequency spread of its
//! three strongest hyperfine components. The axial case (three lines
//! separated by A_par) is printed for reference.
//!
//! Run with: cargo run --release --example hyperfine_collapse

use nv_thermo::odmr::transitions_for_field;
use nv_thermo::spin::TransitionLabel;
use nv_thermo::{MagneticField, NvParameters};

fn main() -> nv_thermo::Result<()> {
    let p = NvParameters::default();

    println!("axial reference (2 mT along the NV axis):");
    let axial = transitions_for_field(&p, &MagneticField::axial(2e-3))?;
    let split = p.d_hz + 0.5 * p.gamma_hz_per_t() * 2e-3;
    let mut upper: Vec<f64> = axial
        .transitions
        .iter()
        .filter(|t| t.frequency_hz > split)
        .map(|t| t.frequency_hz)
        .collect();
    upper.sort_by(|a, b| a.partial_cmp(b).unwrap());
    println!(
        "  0->+1 triplet spacings: {:.1} kHz, {:.1} kHz (A_par = {:.1} kHz)",
        (upper[1] - upper[0]) / 1e3,
        (upper[2] - upper[1]) / 1e3,
        p.a_par_hz / 1e3
    );
    println!("  full spread: {:.1} kHz = {:.3} A_par", (upper[2] - upper[0]) / 1e3,
        (upper[2] - upper[0]) / p.a_par_hz);

    for (tag, q) in [("Q = 0 (default)", 0.0), ("Q = -4.95 MHz", -4.95e6)] {
        println!("\ntransverse field, {tag}:");
        println!("{:>8} {:>14} {:>14} {:>14} {:>14}", "B (mT)", "low spread", "", "high spread", "");
        println!("{:>8} {:>14} {:>14} {:>14} {:>14}", "", "kHz", "/ A_par", "kHz", "/ A_par");
        let mut pq = p;
        pq.q_hz = q;
        for b_mt in [2.8, 4.0, 6.0, 8.0, 9.0, 10.0] {
            let set = transitions_for_field(&pq, &MagneticField::transverse(b_mt * 1e-3))?;
            let low = set
                .spread_of_strongest(TransitionLabel::DegPairLow, 3)
                .unwrap_or(f64::NAN);
            let high = set
                .spread_of_strongest(TransitionLabel::DegPairHigh, 3)
                .unwrap_or(f64::NAN);
            println!(
                "{:>8.1} {:>14.1} {:>14.3} {:>14.1} {:>14.3}",
                b_mt,
                low / 1e3,
                low / pq.a_par_hz,
                high / 1e3,
                high / pq.a_par_hz
            );
        }
    }

    println!("\ncomponent detail at 6 mT (Q = 0 defaults):");
    let set = transitions_for_field(&p, &MagneticField::transverse(6e-3))?;
    for t in &set.transitions {
        println!(
            "  {:>12.1} kHz rel D   amp {:.4}   {:?}",
            (t.frequency_hz - p.d_hz) / 1e3,
            t.amplitude,
            t.label
        );
    }
    Ok(())
}
