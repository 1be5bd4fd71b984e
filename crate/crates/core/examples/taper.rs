//! Six-scan to four-scan mode converter: transmission against length.

use ion_addressing::chip::{ChannelCrossSection, Interpolation, TaperSpec};
use ion_addressing::propagation::taper_transmission;

fn main() -> ion_addressing::Result<()> {
    for len in [20.0, 50.0, 200.0, 1000.0, 2200.0] {
        for interp in [Interpolation::Linear, Interpolation::Cosine] {
            let t = TaperSpec::new(
                ChannelCrossSection::spim_input(),
                ChannelCrossSection::spim_output(),
                len,
                interp,
            )?;
            println!("{len:6} um {interp:?}: {:.6}", taper_transmission(&t, 0.532, 0.25)?);
        }
    }
    Ok(())
}
