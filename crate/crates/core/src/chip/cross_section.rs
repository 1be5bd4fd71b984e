use serde::{Deserialize, Serialize};

use super::profile::{Grid2, RiProfile2};
use crate::error::{Error, Result};

/// Cladding index of the borosilicate host glass at 532 nm.
pub const N_CLAD: f64 = 1.51;
/// Composite index contrast of the multiscan output design.
pub const SPIM_CONTRAST: f64 = 0.015;
/// Index contrast of a single conventional laser-written track.
pub const CONVENTIONAL_CONTRAST: f64 = SPIM_CONTRAST / 2.5;
/// Centre-to-centre separation of the central scans.
pub const SCAN_SEPARATION_UM: f64 = 0.4;
pub const DEFAULT_SIGMA_X_UM: f64 = 0.35;
/// Keeps the output design single-mode in 2D; 0.8 µm and above admit a
/// vertically odd second mode.
pub const DEFAULT_SIGMA_Y_UM: f64 = 0.7;
pub const CONVENTIONAL_SIGMA_UM: f64 = 1.0;
/// Amplitude of the two outer input scans relative to the central ones.
pub const INPUT_OUTER_SCAN_FRACTION: f64 = 0.3;
/// Step-index single-mode fibre feeding the chip.
pub const SMF_N_CORE: f64 = 1.4607;
pub const SMF_N_CLAD: f64 = 1.455;
pub const SMF_CORE_DIAMETER_UM: f64 = 3.1;
/// Largest index increment a single scan may carry.
pub const MAX_SCAN_DELTA_N: f64 = 0.05;

/// One laser scan, modelled as a Gaussian index increment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub center_x: f64,
    pub center_y: f64,
    pub delta_n_peak: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_x > 0.0 && self.sigma_y > 0.0) {
            return Err(Error::invalid("scan.sigma", "widths must be positive"));
        }
        if !(self.delta_n_peak.abs() <= MAX_SCAN_DELTA_N) {
            return Err(Error::invalid(
                "scan.delta_n",
                format!("|{}| exceeds {MAX_SCAN_DELTA_N}", self.delta_n_peak),
            ));
        }
        Ok(())
    }

    #[inline]
    pub fn delta_at(&self, x: f64, y: f64) -> f64 {
        let u = (x - self.center_x) / self.sigma_x;
        let v = (y - self.center_y) / self.sigma_y;
        self.delta_n_peak * (-0.5 * (u * u + v * v)).exp()
    }
}

/// A guiding channel: a set of overlapping scans in a uniform cladding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelCrossSection {
    pub scans: Vec<ScanSpec>,
    pub n_clad: f64,
}

impl ChannelCrossSection {
    pub fn new(scans: Vec<ScanSpec>, n_clad: f64) -> Result<Self> {
        let cs = Self { scans, n_clad };
        cs.validate()?;
        Ok(cs)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_clad > 1.0) {
            return Err(Error::invalid("n_clad", format!("{} must exceed 1", self.n_clad)));
        }
        for s in &self.scans {
            s.validate()?;
        }
        let peak = self.peak_contrast();
        if peak > MAX_SCAN_DELTA_N + 1e-12 {
            return Err(Error::invalid(
                "scans",
                format!("composite contrast {peak} exceeds {MAX_SCAN_DELTA_N}"),
            ));
        }
        Ok(())
    }

    pub fn contrast_at(&self, x: f64, y: f64) -> f64 {
        self.scans.iter().map(|s| s.delta_at(x, y)).sum()
    }

    pub fn index_at(&self, x: f64, y: f64) -> f64 {
        self.n_clad + self.contrast_at(x, y)
    }

    /// Maximum of the composite contrast, located by a coarse sweep over the
    /// scan footprint followed by local refinement.
    pub fn peak_contrast(&self) -> f64 {
        if self.scans.is_empty() {
            return 0.0;
        }
        let (x_lo, x_hi, y_lo, y_hi) = self.footprint(3.0);
        let steps = 120;
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in 0..=steps {
            let x = x_lo + (x_hi - x_lo) * i as f64 / steps as f64;
            for j in 0..=steps {
                let y = y_lo + (y_hi - y_lo) * j as f64 / steps as f64;
                let v = self.contrast_at(x, y);
                if v > best.0 {
                    best = (v, x, y);
                }
            }
        }
        // pattern search refinement
        let (mut v, mut x, mut y) = best;
        let mut hx = (x_hi - x_lo) / steps as f64;
        let mut hy = (y_hi - y_lo) / steps as f64;
        while hx > 1e-10 || hy > 1e-10 {
            let mut moved = false;
            for (ddx, ddy) in [(hx, 0.0), (-hx, 0.0), (0.0, hy), (0.0, -hy)] {
                let c = self.contrast_at(x + ddx, y + ddy);
                if c > v {
                    v = c;
                    x += ddx;
                    y += ddy;
                    moved = true;
                }
            }
            if !moved {
                hx *= 0.5;
                hy *= 0.5;
            }
        }
        v
    }

    /// Bounding box of scan centres extended by `k` standard deviations.
    pub fn footprint(&self, k: f64) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for s in &self.scans {
            b.0 = b.0.min(s.center_x - k * s.sigma_x);
            b.1 = b.1.max(s.center_x + k * s.sigma_x);
            b.2 = b.2.min(s.center_y - k * s.sigma_y);
            b.3 = b.3.max(s.center_y + k * s.sigma_y);
        }
        b
    }

    /// The four-scan output design; scan amplitudes are chosen so the
    /// composite peak index equals `n_clad + contrast`.
    pub fn spim_output_with(n_clad: f64, contrast: f64, sigma_x: f64, sigma_y: f64) -> Self {
        let centres = [-1.5, -0.5, 0.5, 1.5].map(|k| k * SCAN_SEPARATION_UM);
        let mut cs = Self {
            scans: centres
                .iter()
                .map(|&cx| ScanSpec {
                    center_x: cx,
                    center_y: 0.0,
                    delta_n_peak: 1.0,
                    sigma_x,
                    sigma_y,
                })
                .collect(),
            n_clad,
        };
        let unit_peak = cs.peak_contrast();
        for s in &mut cs.scans {
            s.delta_n_peak = contrast / unit_peak;
        }
        cs
    }

    pub fn spim_output() -> Self {
        Self::spim_output_with(N_CLAD, SPIM_CONTRAST, DEFAULT_SIGMA_X_UM, DEFAULT_SIGMA_Y_UM)
    }

    /// The six-scan input design: the output design plus one scan on each
    /// side at 1.5x the central separation, carrying
    /// [`INPUT_OUTER_SCAN_FRACTION`] of the central amplitude.
    pub fn spim_input_from(output: &Self) -> Self {
        Self::spim_input_with(output, INPUT_OUTER_SCAN_FRACTION)
    }

    pub fn spim_input_with(output: &Self, outer_fraction: f64) -> Self {
        let mut cs = output.clone();
        let (lo, hi) = output
            .scans
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s.center_x), b.max(s.center_x)));
        let outer_gap = 1.5 * SCAN_SEPARATION_UM;
        let template = output.scans[0];
        for cx in [lo - outer_gap, hi + outer_gap] {
            cs.scans.push(ScanSpec {
                center_x: cx,
                delta_n_peak: template.delta_n_peak * outer_fraction,
                ..template
            });
        }
        cs
    }

    pub fn spim_input() -> Self {
        Self::spim_input_from(&Self::spim_output())
    }

    /// A single-track conventional waveguide.
    pub fn conventional() -> Self {
        Self::conventional_with(N_CLAD, CONVENTIONAL_CONTRAST, CONVENTIONAL_SIGMA_UM)
    }

    pub fn conventional_with(n_clad: f64, contrast: f64, sigma: f64) -> Self {
        Self {
            scans: vec![ScanSpec {
                center_x: 0.0,
                center_y: 0.0,
                delta_n_peak: contrast,
                sigma_x: sigma,
                sigma_y: sigma,
            }],
            n_clad,
        }
    }
}

/// Samples the composite index of `cs` on `window`.
///
/// Every scan centre must sit at least four standard deviations inside the
/// window.
pub fn build_cross_section(cs: &ChannelCrossSection, window: &Grid2) -> Result<RiProfile2> {
    cs.validate()?;
    for (index, s) in cs.scans.iter().enumerate() {
        let inside = s.center_x - 4.0 * s.sigma_x >= window.x0 - 1e-9
            && s.center_x + 4.0 * s.sigma_x <= window.x_max() + 1e-9
            && s.center_y - 4.0 * s.sigma_y >= window.y0 - 1e-9
            && s.center_y + 4.0 * s.sigma_y <= window.y_max() + 1e-9;
        if !inside {
            return Err(Error::WindowTooSmall {
                index,
                center_x: s.center_x,
                center_y: s.center_y,
            });
        }
    }
    Ok(sample(cs, window))
}

fn sample(cs: &ChannelCrossSection, window: &Grid2) -> RiProfile2 {
    let mut samples = vec![cs.n_clad; window.len()];
    for s in &cs.scans {
        // separable evaluation
        let gx: Vec<f64> = (0..window.nx)
            .map(|ix| {
                let u = (window.x(ix) - s.center_x) / s.sigma_x;
                (-0.5 * u * u).exp()
            })
            .collect();
        for iy in 0..window.ny {
            let v = (window.y(iy) - s.center_y) / s.sigma_y;
            let gy = s.delta_n_peak * (-0.5 * v * v).exp();
            let row = &mut samples[iy * window.nx..(iy + 1) * window.nx];
            for (r, g) in row.iter_mut().zip(&gx) {
                *r += gy * g;
            }
        }
    }
    RiProfile2 {
        grid: *window,
        n_clad: cs.n_clad,
        samples,
    }
}

/// Sampling window for `cs`: scan footprint (±4σ) plus `padding` of cladding.
pub fn window_for(cs: &ChannelCrossSection, padding: f64, d: f64) -> Grid2 {
    if cs.scans.is_empty() {
        return Grid2::centered(padding, padding, d);
    }
    let (x_lo, x_hi, y_lo, y_hi) = cs.footprint(4.0);
    let hx = x_lo.abs().max(x_hi.abs()) + padding;
    let hy = y_lo.abs().max(y_hi.abs()) + padding;
    Grid2::centered(hx, hy, d)
}

/// Conventional single-track waveguide sampled on `window`.
pub fn conventional_cross_section(window: &Grid2) -> Result<RiProfile2> {
    build_cross_section(&ChannelCrossSection::conventional(), window)
}

/// The feeding fibre's step profile on `window`.
pub fn smf_profile(window: &Grid2) -> RiProfile2 {
    circular_step_profile(SMF_CORE_DIAMETER_UM, SMF_N_CORE, SMF_N_CLAD, window)
}

/// Circular step-index core with sub-pixel averaging of `n²` at the
/// boundary (16×16 supersampling per cell).
pub fn circular_step_profile(diameter: f64, n_core: f64, n_clad: f64, window: &Grid2) -> RiProfile2 {
    let r2 = 0.25 * diameter * diameter;
    let sub = 16;
    let mut samples = Vec::with_capacity(window.len());
    for iy in 0..window.ny {
        for ix in 0..window.nx {
            let (x, y) = (window.x(ix), window.y(iy));
            let reach = 0.75 * (window.dx.max(window.dy));
            let rc = (x * x + y * y).sqrt();
            let n2 = if rc + reach < 0.5 * diameter {
                n_core * n_core
            } else if rc - reach > 0.5 * diameter {
                n_clad * n_clad
            } else {
                let mut inside = 0;
                for sy in 0..sub {
                    for sx in 0..sub {
                        let px = x + window.dx * ((sx as f64 + 0.5) / sub as f64 - 0.5);
                        let py = y + window.dy * ((sy as f64 + 0.5) / sub as f64 - 0.5);
                        if px * px + py * py < r2 {
                            inside += 1;
                        }
                    }
                }
                let f = inside as f64 / (sub * sub) as f64;
                f * n_core * n_core + (1.0 - f) * n_clad * n_clad
            };
            samples.push(n2.sqrt());
        }
    }
    RiProfile2 {
        grid: *window,
        n_clad,
        samples,
    }
}
