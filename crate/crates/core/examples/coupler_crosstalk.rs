//! Power transfer between two parallel guides against their separation.

use ion_addressing::chip::ChannelCrossSection;
use ion_addressing::propagation::coupler_crosstalk;

fn main() -> ion_addressing::Result<()> {
    let length = 200.0;
    println!("pitch (um)  conventional   4-scan");
    for pitch in [4.0, 5.0, 6.0, 7.0, 8.0] {
        let conv = coupler_crosstalk(&ChannelCrossSection::conventional(), pitch, length, 0.532)?;
        let spim = coupler_crosstalk(&ChannelCrossSection::spim_output(), pitch, length, 0.532)?;
        println!("{pitch:<10}  {conv:<12.3e} {spim:.3e}");
    }
    Ok(())
}
