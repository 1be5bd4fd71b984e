//! Fundamental mode of the written guides and the single-mode cutoff.

use ion_addressing::chip::{build_cross_section, window_for, ChannelCrossSection, N_CLAD};
use ion_addressing::modes::{count_guided_modes, single_mode_cutoff, solve_modes};

fn main() -> ion_addressing::Result<()> {
    let lambda = 0.532;
    for (name, cs) in [
        ("4-scan", ChannelCrossSection::spim_output()),
        ("6-scan", ChannelCrossSection::spim_input()),
    ] {
        let p = build_cross_section(&cs, &window_for(&cs, 3.0, 0.05))?;
        let m = &solve_modes(&p, lambda, 1)?[0];
        let s = m.summary();
        println!(
            "{name}: n_eff {:.6}, MFD {:.2} x {:.2} um, {} guided mode(s)",
            s.n_eff,
            s.mfd_x_um,
            s.mfd_y_um.unwrap_or(f64::NAN),
            count_guided_modes(&p, lambda)
        );
    }

    println!("\ncontrast  d_max (um)");
    for c in [0.005, 0.0075, 0.01, 0.0125, 0.015, 0.0175, 0.02] {
        println!("{c:<9} {:.3}", single_mode_cutoff(c, lambda, N_CLAD)?);
    }
    Ok(())
}
