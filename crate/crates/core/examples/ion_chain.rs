//! Equilibrium of a 137Ba+ chain, a quartic potential for even spacing,
//! and the chip beams imaged onto it.

use ion_addressing::chain::{
    design_uniform_spacing, equilibrium_dimensionless, equilibrium_positions, relay_map, AxialPotential, RelayOptions,
};

fn main() -> ion_addressing::Result<()> {
    for n in [2, 3, 4] {
        let (xi, _) = equilibrium_dimensionless(n, 0.5, 0.0)?;
        println!("N={n} harmonic, dimensionless: {xi:.6?}");
    }

    let pot = AxialPotential::for_ion(137.0, 1.0)?;
    let harmonic = equilibrium_positions(8, &pot)?;
    println!("\n8 ions at 1 MHz: spacings {:.2?} um", harmonic.spacings);

    let d = design_uniform_spacing(8, 3.95)?;
    println!(
        "quartic design: alpha2 {:.3e}, alpha4 {:.3e}, spacings {:.3?} um, rms {:.2}%",
        d.potential.alpha2,
        d.potential.alpha4,
        d.chain.spacings,
        100.0 * d.relative_rms()
    );

    let chip: Vec<f64> = (0..8).map(|i| (i as f64 - 3.5) * 8.0).collect();
    let beams = relay_map(&chip, &[0.95; 8], &RelayOptions::default())?;
    for b in &beams {
        println!("beam at {:6.2} um, waist {:.3} um", b.position, b.waist);
    }
    Ok(())
}
