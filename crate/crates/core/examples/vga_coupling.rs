//! Fibre-array coupling into the input facet under random misalignment.

use ion_addressing::chip::ChannelCrossSection;
use ion_addressing::modes::{chip_mode, fiber_mode, mfd, vga_coupling_mc, VGA_OFFSET_BOUNDS};

fn main() -> ion_addressing::Result<()> {
    let lambda = 0.532;
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let fiber = fiber_mode(lambda)?;
    println!("fibre MFD {:.2} um", mfd(&fiber).0);
    for (name, cs) in [
        ("6-scan input", ChannelCrossSection::spim_input()),
        ("4-scan direct", ChannelCrossSection::spim_output()),
    ] {
        let chip = chip_mode(&cs, lambda)?;
        let r = vga_coupling_mc(&fiber, &chip, VGA_OFFSET_BOUNDS, samples, 0)?;
        println!(
            "{name:13}  mean {:.3}  min {:.3}  max {:.3}",
            r.mean_efficiency, r.min_efficiency, r.max_efficiency
        );
    }
    Ok(())
}
