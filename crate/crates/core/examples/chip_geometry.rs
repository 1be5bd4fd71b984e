//! Fan-in layout of the addressing chip and the written cross-section.

use ion_addressing::chip::{build_cross_section, paths_disjoint, window_for, ChannelCrossSection, ChipLayout};

fn main() -> ion_addressing::Result<()> {
    let layout = ChipLayout::default();
    let paths = layout.paths()?;
    println!("channels        {}", paths.len());
    println!("length          {:.0} um", layout.total_length());
    println!("min bend radius {:.1} mm", layout.min_bend_radius() / 1000.0);
    println!("disjoint        {}", paths_disjoint(&paths, 1000));
    for (i, p) in paths.iter().enumerate() {
        println!("  ch{i}: {:8.1} -> {:6.1} um", p.x_in, p.x_out);
    }

    for (name, cs) in [
        ("4-scan output", ChannelCrossSection::spim_output()),
        ("6-scan input", ChannelCrossSection::spim_input()),
        ("conventional", ChannelCrossSection::conventional()),
    ] {
        let p = build_cross_section(&cs, &window_for(&cs, 3.0, 0.05))?;
        println!(
            "{name:14} peak dn {:.4}  horizontal FWHM {:.2} um",
            p.peak() - p.n_clad,
            p.horizontal_fwhm()
        );
    }

    // a 32-channel variant keeps every path separate
    let wide = ChipLayout {
        n_channels: 32,
        ..ChipLayout::default()
    };
    println!("32 channels disjoint: {}", paths_disjoint(&wide.paths()?, 1000));
    Ok(())
}
