//! Phase estimation of an AC Stark shift, with and without decoupling.

use ion_addressing::sensor::{
    build_sequence, contrast, rpe_estimate, Decoupling, ExactOracle, NoiseModel, RpeConfig, SampledOracle,
};

fn main() -> ion_addressing::Result<()> {
    println!("{}", build_sequence(4000.0, 500.0, Decoupling::Kdd)?);

    let cfg = RpeConfig::default();
    let delta = 1.2345;
    let exact = rpe_estimate(&mut ExactOracle::new(delta, &cfg), &cfg)?;
    println!("exact probabilities: error {:.1e}", exact.estimate - delta);

    let noise = NoiseModel {
        shots: 100,
        seed: 1,
        ..Default::default()
    };
    let r = rpe_estimate(&mut SampledOracle::new(delta, &cfg, &noise)?, &cfg)?;
    println!("\n k   tau (us)   estimate");
    for g in &r.trace {
        println!("{:2} {:9} {:12.6}", g.k, g.tau, g.estimate);
    }
    println!("final {:.6} +- {:.1e}", r.estimate, r.sigma);

    // slow detuning noise: sigma * tau = 2
    let noisy = NoiseModel {
        sigma: 1e-3,
        shots: 2000,
        seed: 2,
        ..Default::default()
    };
    for mode in [Decoupling::None, Decoupling::SpinEcho, Decoupling::Kdd] {
        let cfg = RpeConfig {
            decoupling: mode,
            ..Default::default()
        };
        let c = contrast(&mut SampledOracle::new(1e-4, &cfg, &noisy)?, 2000.0)?;
        println!("{mode:?} contrast at 2 ms: {c:.3}");
    }
    Ok(())
}
