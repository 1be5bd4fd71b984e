//! Equilibrium positions of ions in an axial trap, potential design for
//! uniform spacing, and the lens relay from chip output to ion plane.
//!
//! Energies are in units of `κ/µm` with `κ = e²/4πε₀`, so a potential
//! `α₂x² + α₄x⁴` has `α₂` in `κ/µm³` and `α₄` in `κ/µm⁵`. Internally all
//! positions are dimensionless, `x = u·ξ`.

mod design;
mod equilibrium;
mod relay;

pub use design::{design_uniform_spacing, design_uniform_spacing_with, DesignOptions, SpacingDesign};
pub use equilibrium::{equilibrium_positions, equilibrium_dimensionless, ChainConfig, MAX_NEWTON_ITERATIONS};
pub use relay::{relay_map, IonBeam, RelayOptions, RelayedBeam, RELAY_BLUR_UM};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `κ = e²/4πε₀` in J·µm.
pub const COULOMB_J_UM: f64 = 2.307_077_552e-22;
const AMU_KG: f64 = 1.660_539_066_60e-27;

/// `α₂x² + α₄x⁴` along the trap axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxialPotential {
    pub alpha2: f64,
    pub alpha4: f64,
}

impl AxialPotential {
    pub fn harmonic(alpha2: f64) -> Result<Self> {
        Self::new(alpha2, 0.0)
    }

    pub fn new(alpha2: f64, alpha4: f64) -> Result<Self> {
        let p = Self { alpha2, alpha4 };
        p.validate()?;
        Ok(p)
    }

    /// Harmonic well of a singly charged ion of `mass_amu` with axial
    /// frequency `freq_mhz` (ω/2π).
    pub fn for_ion(mass_amu: f64, freq_mhz: f64) -> Result<Self> {
        if !(mass_amu > 0.0 && freq_mhz > 0.0) {
            return Err(Error::invalid("for_ion", "mass and frequency must be positive"));
        }
        let omega = 2.0 * std::f64::consts::PI * freq_mhz * 1e6;
        // ½mω² in J/µm², then in κ/µm³
        let k = 0.5 * mass_amu * AMU_KG * omega * omega * 1e-12;
        Self::harmonic(k / COULOMB_J_UM)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha2.is_finite() && self.alpha4.is_finite()) {
            return Err(Error::invalid("potential", "coefficients must be finite"));
        }
        if self.alpha4 < 0.0 {
            return Err(Error::invalid("alpha4", format!("{} < 0 is not confining", self.alpha4)));
        }
        if self.alpha4 == 0.0 && self.alpha2 <= 0.0 {
            return Err(Error::invalid(
                "alpha2",
                format!("{} must be positive without a quartic term", self.alpha2),
            ));
        }
        Ok(())
    }

    /// Length scale `u` in µm.
    pub fn length_scale(&self) -> f64 {
        if self.alpha2 > 0.0 {
            (2.0 * self.alpha2).powf(-1.0 / 3.0)
        } else {
            (4.0 * self.alpha4).powf(-0.2)
        }
    }

    /// Coefficients `(a, b)` of `aξ² + bξ⁴` in units of `κ/u`.
    pub fn dimensionless(&self) -> (f64, f64) {
        let u = self.length_scale();
        (self.alpha2 * u.powi(3), self.alpha4 * u.powi(5))
    }

    pub fn energy(&self, x: f64) -> f64 {
        let x2 = x * x;
        self.alpha2 * x2 + self.alpha4 * x2 * x2
    }
}
