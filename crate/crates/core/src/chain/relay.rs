use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Extra Gaussian blur of the relay, µm (1/e² radius). Chosen so that the
/// diffraction-limited 0.532 µm spot ends up at the measured 0.67 µm.
pub const RELAY_BLUR_UM: f64 = 0.407_279;

/// Gaussian beam in the ion plane: intensity `peak·exp(−2(x−c)²/w²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IonBeam {
    pub center: f64,
    pub waist: f64,
    pub peak: f64,
}

impl IonBeam {
    pub fn intensity(&self, x: f64) -> f64 {
        let d = x - self.center;
        self.peak * (-2.0 * d * d / (self.waist * self.waist)).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelayOptions {
    pub magnification: f64,
    /// λ/(2·NA).
    pub diffraction_floor: f64,
    /// Quadrature blur added after the diffraction clamp.
    pub blur: f64,
}

impl Default for RelayOptions {
    fn default() -> Self {
        Self {
            magnification: 0.5,
            diffraction_floor: 0.532 / (2.0 * 0.5),
            blur: RELAY_BLUR_UM,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelayedBeam {
    pub position: f64,
    /// Magnified waist clamped at the diffraction floor.
    pub diffraction_waist: f64,
    pub waist: f64,
}

impl RelayedBeam {
    pub fn beam(&self) -> IonBeam {
        IonBeam {
            center: self.position,
            waist: self.waist,
            peak: 1.0,
        }
    }
}

/// Images chip-output spots into the ion plane.
pub fn relay_map(chip_positions: &[f64], chip_waists: &[f64], opts: &RelayOptions) -> Result<Vec<RelayedBeam>> {
    if !(opts.magnification > 0.0) {
        return Err(Error::invalid("magnification", format!("{} must be positive", opts.magnification)));
    }
    if chip_positions.len() != chip_waists.len() {
        return Err(Error::DimensionMismatch {
            expected: (chip_positions.len(), 1),
            found: (chip_waists.len(), 1),
        });
    }
    Ok(chip_positions
        .iter()
        .zip(chip_waists)
        .map(|(&x, &w)| {
            let d = (w * opts.magnification).max(opts.diffraction_floor);
            RelayedBeam {
                position: x * opts.magnification,
                diffraction_waist: d,
                waist: d.hypot(opts.blur),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_micron_pitch_becomes_four() {
        let xs: Vec<f64> = (0..8).map(|i| 8.0 * i as f64).collect();
        let out = relay_map(&xs, &[0.95; 8], &RelayOptions::default()).unwrap();
        for w in out.windows(2) {
            assert!((w[1].position - w[0].position - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn waist_is_clamped_then_blurred() {
        let out = relay_map(&[0.0], &[0.95], &RelayOptions::default()).unwrap()[0];
        assert!((out.diffraction_waist - 0.532).abs() < 1e-12);
        assert!((out.waist - 0.67).abs() < 1e-4);
        let sharp = RelayOptions {
            blur: 0.0,
            ..Default::default()
        };
        assert_eq!(relay_map(&[0.0], &[3.0], &sharp).unwrap()[0].waist, 1.5);
    }

    #[test]
    fn unit_magnification_keeps_positions_and_order() {
        let xs = [-3.0, 0.5, 2.0, 9.0];
        let opts = RelayOptions {
            magnification: 1.0,
            ..Default::default()
        };
        let out = relay_map(&xs, &[1.0; 4], &opts).unwrap();
        for (o, x) in out.iter().zip(xs) {
            assert_eq!(o.position, x);
        }
        assert!(relay_map(&xs, &[1.0; 4], &RelayOptions { magnification: 0.0, ..opts }).is_err());
    }
}
