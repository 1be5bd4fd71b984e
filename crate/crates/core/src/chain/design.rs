use serde::Serialize;

use super::equilibrium::{equilibrium_dimensionless, mean, rms_deviation};
use super::{equilibrium_positions, AxialPotential, ChainConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DesignOptions {
    /// Search the quartic coefficient; otherwise the design is harmonic.
    pub quartic: bool,
    pub sweeps: usize,
    /// Search box for the dimensionless quadratic coefficient.
    pub a_range: (f64, f64),
    /// Search box for the dimensionless quartic coefficient.
    pub b_range: (f64, f64),
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            quartic: true,
            sweeps: 6,
            a_range: (-1.0, 1.0),
            b_range: (0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpacingDesign {
    pub potential: AxialPotential,
    pub chain: ChainConfig,
    /// Spacing RMS deviation, µm.
    pub achieved_rms: f64,
    pub target_spacing: f64,
}

impl SpacingDesign {
    pub fn relative_rms(&self) -> f64 {
        self.achieved_rms / self.target_spacing
    }
}

pub fn design_uniform_spacing(n: usize, target_spacing: f64) -> Result<SpacingDesign> {
    design_uniform_spacing_with(n, target_spacing, &DesignOptions::default())
}

/// Relative spacing RMS of the dimensionless chain, or +∞ where the
/// potential does not confine or the solve fails.
fn objective(n: usize, a: f64, b: f64) -> f64 {
    if !(b > 0.0 || (b == 0.0 && a > 0.0)) {
        return f64::INFINITY;
    }
    match equilibrium_dimensionless(n, a, b) {
        Ok((x, _)) => {
            let s: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
            rms_deviation(&s) / mean(&s)
        }
        Err(_) => f64::INFINITY,
    }
}

fn golden(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Coordinate descent with golden-section line searches over the
/// dimensionless `(a, b)`, then rescaled so the mean spacing equals
/// `target_spacing`. Only strict improvements over the harmonic start are
/// kept.
pub fn design_uniform_spacing_with(n: usize, target_spacing: f64, opts: &DesignOptions) -> Result<SpacingDesign> {
    if n < 3 {
        return Err(Error::invalid("n", format!("{n} ions have no spacing to shape")));
    }
    if !(target_spacing > 0.0) {
        return Err(Error::invalid("target_spacing", format!("{target_spacing} must be positive")));
    }
    let (mut a, mut b) = (0.5, 0.0);
    let mut best = objective(n, a, b);
    if opts.quartic {
        for _ in 0..opts.sweeps {
            let before = best;
            let (bb, fb) = golden(opts.b_range.0, opts.b_range.1, |v| objective(n, a, v));
            if fb < best * (1.0 - 1e-9) {
                b = bb;
                best = fb;
            }
            let (aa, fa) = golden(opts.a_range.0, opts.a_range.1, |v| objective(n, v, b));
            if fa < best * (1.0 - 1e-9) {
                a = aa;
                best = fa;
            }
            if best >= before * (1.0 - 1e-6) {
                break;
            }
        }
    }
    let (xi, _) = equilibrium_dimensionless(n, a, b)?;
    let m = mean(&xi.windows(2).map(|w| w[1] - w[0]).collect::<Vec<_>>());
    let u = target_spacing / m;
    let potential = AxialPotential::new(a / u.powi(3), b / u.powi(5))?;
    let chain = equilibrium_positions(n, &potential)?;
    Ok(SpacingDesign {
        potential,
        achieved_rms: chain.spacing_rms,
        chain,
        target_spacing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_ions_stay_harmonic() {
        let d = design_uniform_spacing(3, 4.0).unwrap();
        assert!(d.achieved_rms < 1e-8 * 4.0);
        assert_eq!(d.potential.alpha4, 0.0);
        assert!((d.chain.mean_spacing() - 4.0).abs() < 1e-9);
    }

    #[test]
    fn eight_ion_design_beats_a_brute_force_grid() {
        let d = design_uniform_spacing(8, 3.95).unwrap();
        assert!(d.relative_rms() < 0.02, "{}", d.relative_rms());
        assert!((d.chain.mean_spacing() - 3.95).abs() < 1e-9);
        // coarse grid over the same box
        let mut grid_best = f64::INFINITY;
        for i in 0..=20 {
            for j in 0..=20 {
                let a = -1.0 + 0.1 * i as f64;
                let b = 0.05 * j as f64;
                grid_best = grid_best.min(objective(8, a, b));
            }
        }
        assert!(d.relative_rms() <= grid_best * 1.001, "{} vs grid {grid_best}", d.relative_rms());
    }

    #[test]
    fn harmonic_eight_ion_chain_is_less_uniform() {
        let q = design_uniform_spacing(8, 3.95).unwrap();
        let h = design_uniform_spacing_with(
            8,
            3.95,
            &DesignOptions {
                quartic: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(h.potential.alpha4, 0.0);
        assert!(h.achieved_rms > q.achieved_rms);
    }
}
