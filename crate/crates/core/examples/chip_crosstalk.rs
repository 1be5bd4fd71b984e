//! Light launched into one channel of the full chip and the power that
//! reaches every output. Pass `conventional` for the weak-contrast preset.
//! Takes about half a minute per design.

use ion_addressing::chip::ChipLayout;
use ion_addressing::propagation::{chip_crosstalk_scan, BpmOptions, ChipDesign};

fn main() -> ion_addressing::Result<()> {
    let design = match std::env::args().nth(1).as_deref() {
        Some("conventional") => ChipDesign::conventional(),
        _ => ChipDesign::spim(),
    };
    let injected = 3;
    let r = chip_crosstalk_scan(&ChipLayout::default(), &design, injected, 0.532, &BpmOptions::default())?;
    println!("{} design, light in channel {injected}", design.name);
    for (i, p) in r.channel_power.iter().enumerate() {
        println!("  ch{i} at {:6.1} um: {p:.3e}", r.centers[i]);
    }
    println!("worst nearest neighbour: {:.2e}", r.worst_neighbour());
    println!("transmitted:             {:.4}", r.transmitted);
    Ok(())
}
