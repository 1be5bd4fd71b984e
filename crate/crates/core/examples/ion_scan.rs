//! Single-ion scan across eight addressing beams with shot noise, and the
//! beam map recovered from it.

use ion_addressing::sensor::{scan_ion, BeamMap, NoiseModel, ScanConfig};

fn main() -> ion_addressing::Result<()> {
    let map = BeamMap::uniform(8, 3.95, 0.67, 5e-4);
    let (lo, hi) = map.support();
    let positions: Vec<f64> = (0..=((hi - lo) / 0.05) as usize).map(|k| lo + 0.05 * k as f64).collect();
    let noise = NoiseModel {
        shots: 100,
        seed: 7,
        ..Default::default()
    };
    let m = scan_ion(&map, &positions, &ScanConfig::default(), Some(&noise))?;
    if let Some(fit) = &m.fit {
        println!("waist {:.3} um, pitch {:.3} um", fit.mean_waist(), fit.mean_pitch().unwrap_or(f64::NAN));
    }
    for r in &m.neighbours {
        println!("ch{} -> ch{}: {:.2e}", r.channel, r.neighbour, r.ratio);
    }
    println!("mean neighbour ratio {:.2e}", m.mean_neighbour_ratio());
    Ok(())
}
