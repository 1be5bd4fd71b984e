use serde::{Deserialize, Serialize};

use super::cross_section::{ChannelCrossSection, ScanSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Linear,
    Cosine,
}

impl Interpolation {
    /// Blend weight of the output end at fractional position `s` in [0, 1].
    pub fn weight(self, s: f64) -> f64 {
        match self {
            Interpolation::Linear => s,
            Interpolation::Cosine => 0.5 * (1.0 - (std::f64::consts::PI * s).cos()),
        }
    }

    /// Largest slope of `weight` over [0, 1].
    pub fn max_slope(self) -> f64 {
        match self {
            Interpolation::Linear => 1.0,
            Interpolation::Cosine => 0.5 * std::f64::consts::PI,
        }
    }
}

/// Adiabatic transition between two cross-sections along `length` µm.
///
/// Scans are paired by position in the list. A scan present at only one end
/// keeps its geometry and ramps its amplitude to zero at the other end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaperSpec {
    pub input: ChannelCrossSection,
    pub output: ChannelCrossSection,
    pub length: f64,
    pub interpolation: Interpolation,
}

impl TaperSpec {
    pub fn new(
        input: ChannelCrossSection,
        output: ChannelCrossSection,
        length: f64,
        interpolation: Interpolation,
    ) -> Result<Self> {
        if !(length > 0.0) {
            return Err(Error::invalid("taper.length", "must be positive"));
        }
        Ok(Self {
            input,
            output,
            length,
            interpolation,
        })
    }

    /// The six-scan to four-scan input converter over the 2.2 mm straight.
    pub fn chip_default() -> Self {
        Self {
            input: ChannelCrossSection::spim_input(),
            output: ChannelCrossSection::spim_output(),
            length: 2200.0,
            interpolation: Interpolation::Linear,
        }
    }
}

/// Cross-section of `t` at distance `z` from its input end.
pub fn taper_profile(t: &TaperSpec, z: f64) -> Result<ChannelCrossSection> {
    if !(0.0..=t.length).contains(&z) {
        return Err(Error::OutOfRange { z, length: t.length });
    }
    if z == 0.0 {
        return Ok(t.input.clone());
    }
    if z == t.length {
        return Ok(t.output.clone());
    }
    let w = t.interpolation.weight(z / t.length);
    let lerp = |a: f64, b: f64| a + (b - a) * w;
    let count = t.input.scans.len().max(t.output.scans.len());
    let scans = (0..count)
        .map(|k| {
            let (a, b) = match (t.input.scans.get(k), t.output.scans.get(k)) {
                (Some(a), Some(b)) => (*a, *b),
                (Some(a), None) => (*a, ScanSpec { delta_n_peak: 0.0, ..*a }),
                (None, Some(b)) => (ScanSpec { delta_n_peak: 0.0, ..*b }, *b),
                (None, None) => unreachable!(),
            };
            ScanSpec {
                center_x: lerp(a.center_x, b.center_x),
                center_y: lerp(a.center_y, b.center_y),
                delta_n_peak: lerp(a.delta_n_peak, b.delta_n_peak),
                sigma_x: lerp(a.sigma_x, b.sigma_x),
                sigma_y: lerp(a.sigma_y, b.sigma_y),
            }
        })
        .collect();
    Ok(ChannelCrossSection {
        scans,
        n_clad: lerp(t.input.n_clad, t.output.n_clad),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(cs: &ChannelCrossSection) -> Vec<f64> {
        let mut v = vec![cs.n_clad];
        for s in &cs.scans {
            v.extend([s.center_x, s.center_y, s.delta_n_peak, s.sigma_x, s.sigma_y]);
        }
        v
    }

    #[test]
    fn endpoints_are_exact() {
        let t = TaperSpec::chip_default();
        assert_eq!(taper_profile(&t, 0.0).unwrap(), t.input);
        assert_eq!(taper_profile(&t, t.length).unwrap(), t.output);
    }

    #[test]
    fn midpoint_is_mean_for_linear_rule() {
        let t = TaperSpec::chip_default();
        let mid = taper_profile(&t, t.length / 2.0).unwrap();
        assert_eq!(mid.scans.len(), 6);
        for (k, s) in mid.scans.iter().enumerate() {
            let a = t.input.scans[k];
            let b = t.output.scans.get(k).copied().unwrap_or(ScanSpec { delta_n_peak: 0.0, ..a });
            assert!((s.delta_n_peak - 0.5 * (a.delta_n_peak + b.delta_n_peak)).abs() < 1e-15);
            assert!((s.center_x - 0.5 * (a.center_x + b.center_x)).abs() < 1e-15);
            assert!((s.sigma_y - 0.5 * (a.sigma_y + b.sigma_y)).abs() < 1e-15);
        }
    }

    #[test]
    fn out_of_range_is_an_error() {
        let t = TaperSpec::chip_default();
        assert!(matches!(taper_profile(&t, -1.0), Err(Error::OutOfRange { .. })));
        assert!(matches!(taper_profile(&t, 2200.1), Err(Error::OutOfRange { .. })));
    }

    proptest! {
        #[test]
        fn parameters_are_lipschitz_in_z(z in 0.0f64..2199.0, dz in 0.0f64..1.0, cosine in any::<bool>()) {
            let mut t = TaperSpec::chip_default();
            if cosine {
                t.interpolation = Interpolation::Cosine;
            }
            let a = params(&taper_profile(&t, z).unwrap());
            let b = params(&taper_profile(&t, z + dz).unwrap());
            let ends = (params(&t.input), {
                let mut o = params(&t.output);
                // output lacks the two outer scans: they fade to zero amplitude
                let extra = &t.input.scans[4..];
                for s in extra {
                    o.extend([s.center_x, s.center_y, 0.0, s.sigma_x, s.sigma_y]);
                }
                o
            });
            let max_diff = ends.0.iter().zip(&ends.1).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            let bound = t.interpolation.max_slope() * max_diff / t.length * dz + 1e-15;
            for (p, q) in a.iter().zip(&b) {
                prop_assert!((p - q).abs() <= bound);
            }
        }
    }
}
