use crate::error::{Error, Result};
use crate::linalg::sturm_count_above;

/// Radial discretisation used by the cutoff search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    /// Outer radius of the computational disc, µm.
    pub radius: f64,
    /// Radial step, µm.
    pub step: f64,
}

impl RadialGrid {
    pub fn for_wavelength(wavelength: f64) -> Self {
        Self {
            radius: 60.0,
            step: wavelength / 100.0,
        }
    }
}

/// Number of guided LP modes with azimuthal order `l` for a circular step
/// core of diameter `d`. Each `l ≥ 1` mode is two-fold degenerate in a 2D
/// solve; this counts radial families only.
pub fn lp_mode_count(l: u32, d: f64, n_core: f64, n_clad: f64, wavelength: f64, grid: RadialGrid) -> usize {
    let k0 = 2.0 * std::f64::consts::PI / wavelength;
    let h = grid.step;
    let n = (grid.radius / h).ceil() as usize;
    let a2 = (0.5 * d).powi(2);
    let l2 = (l * l) as f64;
    let (nc2, ncl2) = (n_core * n_core, n_clad * n_clad);
    // cell-centred radii, faces at j·h; symmetrised finite-volume operator
    let r = |j: usize| (j as f64 + 0.5) * h;
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    for j in 0..n {
        let (inner, outer) = (j as f64 * h, (j + 1) as f64 * h);
        let frac = ((a2 - inner * inner) / (outer * outer - inner * inner)).clamp(0.0, 1.0);
        let n2 = ncl2 + frac * (nc2 - ncl2);
        let rj = r(j);
        let k_jj = -(inner + outer) / (h * h) - l2 / rj + k0 * k0 * n2 * rj;
        diag.push(k_jj / rj);
        if j + 1 < n {
            off.push(outer / (h * h) / (rj * r(j + 1)).sqrt());
        }
    }
    sturm_count_above(&diag, &off, k0 * k0 * ncl2)
}

/// Largest circular step-core diameter that guides only the fundamental
/// mode, found by bisection on the appearance of LP11.
pub fn single_mode_cutoff(contrast: f64, wavelength: f64, n_clad: f64) -> Result<f64> {
    single_mode_cutoff_with(contrast, wavelength, n_clad, RadialGrid::for_wavelength(wavelength))
}

pub fn single_mode_cutoff_with(contrast: f64, wavelength: f64, n_clad: f64, grid: RadialGrid) -> Result<f64> {
    if !(contrast > 0.0) {
        return Err(Error::invalid("contrast", format!("{contrast} must be positive")));
    }
    if !(wavelength > 0.0 && n_clad > 1.0) {
        return Err(Error::invalid("wavelength", "wavelength and cladding index out of range"));
    }
    let n_core = n_clad + contrast;
    let na = (n_core * n_core - n_clad * n_clad).sqrt();
    let guess = 2.405 * wavelength / (std::f64::consts::PI * na);
    let multimode = |d: f64| lp_mode_count(1, d, n_core, n_clad, wavelength, grid) > 0;
    let mut lo = 0.5 * guess;
    let mut hi = 1.5 * guess;
    while multimode(lo) {
        lo *= 0.5;
    }
    while !multimode(hi) {
        hi *= 1.5;
    }
    while hi - lo > 1e-5 * guess {
        let mid = 0.5 * (lo + hi);
        if multimode(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(lo)
}
