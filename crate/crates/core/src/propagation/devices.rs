use num_complex::Complex64;

use super::bpm::{mode_on_grid, propagate, BpmOptions};
use crate::chip::{
    build_cross_section, effective_index_reduce, taper_profile, window_for, ChannelCrossSection, Grid1, Grid2,
    RiProfile1, TaperSpec,
};
use crate::error::{Error, Result};
use crate::modes::{count_guided_modes, solve_modes_1d};

/// Transverse sampling of every device simulation, µm.
pub const BPM_DX: f64 = 0.05;
/// Cladding kept between a guide and the absorbing strip, µm.
const CLEARANCE: f64 = 8.0;
/// Longitudinal spacing of the cross-section samples along a taper, µm.
const TAPER_SAMPLE_UM: f64 = 20.0;

/// A channel collapsed to a lateral index-contrast profile centred at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedGuide {
    pub profile: RiProfile1,
    /// Half-width beyond which the contrast is below 1e-9.
    pub half_width: f64,
}

impl ReducedGuide {
    /// Reduces `cs` at `wavelength`, refusing guides that are not single-mode
    /// in their full cross-section.
    pub fn single_mode(cs: &ChannelCrossSection, wavelength: f64) -> Result<Self> {
        let window = window_for(cs, 3.0, BPM_DX);
        let p = build_cross_section(cs, &window)?;
        match count_guided_modes(&p, wavelength) {
            0 => return Err(Error::NoGuidedMode),
            1 => {}
            count => return Err(Error::Multimode { count }),
        }
        Ok(Self::from_section(&p, wavelength))
    }

    /// Reduction without the single-mode check.
    pub fn reduce(cs: &ChannelCrossSection, wavelength: f64) -> Result<Self> {
        let window = window_for(cs, 3.0, BPM_DX);
        Ok(Self::from_section(&build_cross_section(cs, &window)?, wavelength))
    }

    fn from_section(p: &crate::chip::RiProfile2, wavelength: f64) -> Self {
        let profile = effective_index_reduce(p, wavelength);
        let g = profile.grid;
        let half_width = profile
            .samples
            .iter()
            .enumerate()
            .filter(|(_, &n)| n - profile.n_clad > 1e-9)
            .map(|(i, _)| g.x(i).abs())
            .fold(0.0, f64::max);
        Self { profile, half_width }
    }

    pub fn n_clad(&self) -> f64 {
        self.profile.n_clad
    }

    /// Index contrast at lateral offset `x` from the guide centre.
    pub fn contrast(&self, x: f64) -> f64 {
        self.profile.at(x) - self.profile.n_clad
    }

    /// Index of this guide alone, centred at `x0`, sampled on `grid`.
    pub fn sampled(&self, grid: &Grid1, x0: f64) -> RiProfile1 {
        let samples = grid.coords().iter().map(|x| self.profile.at(x - x0)).collect();
        RiProfile1 {
            grid: *grid,
            n_clad: self.profile.n_clad,
            samples,
        }
    }

    /// Adds this guide's contrast centred at `x0` into `n`.
    pub fn add_to(&self, grid: &Grid1, x0: f64, weight: f64, n: &mut [f64]) {
        let lo = ((x0 - self.half_width - grid.x0) / grid.dx).floor().max(0.0) as usize;
        let hi = (((x0 + self.half_width - grid.x0) / grid.dx).ceil() as usize).min(grid.nx - 1);
        for (i, v) in n.iter_mut().enumerate().take(hi + 1).skip(lo) {
            *v += weight * self.contrast(grid.x(i) - x0);
        }
    }

    /// Fundamental lateral mode of the guide centred at `x0`, on `grid`.
    pub fn fundamental_on(&self, grid: &Grid1, x0: f64, wavelength: f64) -> Result<Vec<Complex64>> {
        let local = Grid1::centered(self.half_width + 6.0, grid.dx);
        let alone = self.sampled(&local, 0.0);
        let modes = solve_modes_1d(&alone, wavelength, 1)?;
        let m = modes.first().ok_or(Error::NoGuidedMode)?;
        let shifted = Grid1 {
            x0: grid.x0 - x0,
            ..*grid
        };
        Ok(mode_on_grid(m, &shifted))
    }
}

fn window(half_extent: f64, opts: &BpmOptions) -> Grid1 {
    let strip = opts.absorber.map_or(0.0, |a| a.width);
    Grid1::centered(half_extent + CLEARANCE + strip, BPM_DX)
}

/// Power fraction transferred from one guide to an identical neighbour at
/// `pitch` after `length` µm of parallel propagation.
pub fn coupler_crosstalk(cs: &ChannelCrossSection, pitch: f64, length: f64, wavelength: f64) -> Result<f64> {
    coupler_crosstalk_with(cs, pitch, length, wavelength, &BpmOptions::default())
}

pub fn coupler_crosstalk_with(
    cs: &ChannelCrossSection,
    pitch: f64,
    length: f64,
    wavelength: f64,
    opts: &BpmOptions,
) -> Result<f64> {
    if !(pitch > 0.0) {
        return Err(Error::invalid("pitch", "must be positive"));
    }
    let guide = ReducedGuide::single_mode(cs, wavelength)?;
    pair_transfer(&guide, pitch, length, wavelength, opts, false)
}

/// Transfer between the two guides of a symmetric pair; `reverse` launches
/// in the right-hand guide instead of the left.
pub(crate) fn pair_transfer(
    guide: &ReducedGuide,
    pitch: f64,
    length: f64,
    wavelength: f64,
    opts: &BpmOptions,
    reverse: bool,
) -> Result<f64> {
    let grid = window(0.5 * pitch + guide.half_width, opts);
    let (xa, xb) = if reverse { (0.5 * pitch, -0.5 * pitch) } else { (-0.5 * pitch, 0.5 * pitch) };
    let mut pair = vec![guide.n_clad(); grid.nx];
    guide.add_to(&grid, xa, 1.0, &mut pair);
    guide.add_to(&grid, xb, 1.0, &mut pair);
    let launch = guide.fundamental_on(&grid, xa, wavelength)?;
    let target = guide.fundamental_on(&grid, xb, wavelength)?;
    let r = propagate(
        grid,
        guide.n_clad(),
        length,
        |_, n| n.copy_from_slice(&pair),
        &launch,
        wavelength,
        opts,
    )?;
    Ok(r.fraction_in(&target))
}

/// Fraction of the input fundamental delivered into the output fundamental
/// of a taper.
pub fn taper_transmission(t: &TaperSpec, wavelength: f64, dz: f64) -> Result<f64> {
    let opts = BpmOptions {
        dz,
        ..Default::default()
    };
    taper_transmission_with(t, wavelength, &opts)
}

pub fn taper_transmission_with(t: &TaperSpec, wavelength: f64, opts: &BpmOptions) -> Result<f64> {
    let input = ReducedGuide::single_mode(&t.input, wavelength)?;
    let output = ReducedGuide::single_mode(&t.output, wavelength)?;
    let stack = TaperStack::new(t, wavelength)?;
    let grid = window(stack.half_width, opts);
    let planes: Vec<Vec<f64>> = stack.guides.iter().map(|g| g.sampled(&grid, 0.0).samples).collect();
    let launch = input.fundamental_on(&grid, 0.0, wavelength)?;
    let target = output.fundamental_on(&grid, 0.0, wavelength)?;
    let r = propagate(
        grid,
        input.n_clad(),
        t.length,
        |z, n| stack.blend(z, &planes, n),
        &launch,
        wavelength,
        opts,
    )?;
    Ok(r.fraction_in(&target))
}

/// Reduced cross-sections sampled along a taper.
pub(crate) struct TaperStack {
    pub z: Vec<f64>,
    pub guides: Vec<ReducedGuide>,
    pub half_width: f64,
}

impl TaperStack {
    pub fn new(t: &TaperSpec, wavelength: f64) -> Result<Self> {
        let segments = (t.length / TAPER_SAMPLE_UM).ceil().max(1.0) as usize;
        // one window for every plane so the reductions share a lattice
        let (a, b) = (t.input.footprint(4.0), t.output.footprint(4.0));
        let hx = [a.0, a.1, b.0, b.1].iter().map(|v| v.abs()).fold(0.0, f64::max) + 3.0;
        let hy = [a.2, a.3, b.2, b.3].iter().map(|v| v.abs()).fold(0.0, f64::max) + 3.0;
        let section = Grid2::centered(hx, hy, BPM_DX);
        let mut z = Vec::with_capacity(segments + 1);
        let mut guides = Vec::with_capacity(segments + 1);
        for k in 0..=segments {
            let zk = t.length * k as f64 / segments as f64;
            let cs = taper_profile(t, zk)?;
            guides.push(ReducedGuide::from_section(&build_cross_section(&cs, &section)?, wavelength));
            z.push(zk);
        }
        let half_width = guides.iter().map(|g| g.half_width).fold(0.0, f64::max);
        Ok(Self { z, guides, half_width })
    }

    /// Index at `z` linearly interpolated between the sampled planes.
    pub fn blend(&self, z: f64, planes: &[Vec<f64>], n: &mut [f64]) {
        let (k, f) = self.locate(z);
        if f == 0.0 || k + 1 >= planes.len() {
            n.copy_from_slice(&planes[k]);
            return;
        }
        for ((v, a), b) in n.iter_mut().zip(&planes[k]).zip(&planes[k + 1]) {
            *v = a + f * (b - a);
        }
    }

    /// Plane index and blend fraction at `z`.
    pub fn locate(&self, z: f64) -> (usize, f64) {
        let last = self.z.len() - 1;
        if z <= self.z[0] {
            return (0, 0.0);
        }
        if z >= self.z[last] {
            return (last, 0.0);
        }
        let step = self.z[1] - self.z[0];
        let k = ((z - self.z[0]) / step).floor() as usize;
        let k = k.min(last - 1);
        (k, (z - self.z[k]) / step)
    }
}

/// Power left in the straight-guide fundamental after `arc_length` µm of a
/// bend of `radius` µm, modelled with the conformal index `n(x)(1 + x/R)`.
pub fn bend_transmission(cs: &ChannelCrossSection, radius: f64, arc_length: f64, wavelength: f64) -> Result<f64> {
    bend_transmission_with(cs, radius, arc_length, wavelength, &BpmOptions::default())
}

pub fn bend_transmission_with(
    cs: &ChannelCrossSection,
    radius: f64,
    arc_length: f64,
    wavelength: f64,
    opts: &BpmOptions,
) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::invalid("radius", "must be positive"));
    }
    let guide = ReducedGuide::single_mode(cs, wavelength)?;
    let grid = window(guide.half_width, opts);
    let straight = guide.sampled(&grid, 0.0);
    let bent: Vec<f64> = straight
        .samples
        .iter()
        .enumerate()
        .map(|(i, n)| n * (1.0 + grid.x(i) / radius))
        .collect();
    let launch = guide.fundamental_on(&grid, 0.0, wavelength)?;
    let r = propagate(
        grid,
        guide.n_clad(),
        arc_length,
        |_, n| n.copy_from_slice(&bent),
        &launch,
        wavelength,
        opts,
    )?;
    Ok(r.fraction_in(&launch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chip::Interpolation;

    #[test]
    fn multimode_guide_is_rejected() {
        let mut cs = ChannelCrossSection::conventional();
        cs.scans[0].sigma_x = 1.6;
        cs.scans[0].sigma_y = 1.6;
        assert!(matches!(
            coupler_crosstalk(&cs, 8.0, 10.0, 0.532),
            Err(Error::Multimode { .. })
        ));
    }

    #[test]
    fn distant_guides_do_not_couple() {
        let x = coupler_crosstalk(&ChannelCrossSection::spim_output(), 40.0, 200.0, 0.532).unwrap();
        assert!(x < 1e-9, "{x:e}");
    }

    #[test]
    fn coupler_is_reciprocal() {
        let guide = ReducedGuide::single_mode(&ChannelCrossSection::conventional(), 0.532).unwrap();
        let opts = BpmOptions::default();
        let ab = pair_transfer(&guide, 6.0, 200.0, 0.532, &opts, false).unwrap();
        let ba = pair_transfer(&guide, 6.0, 200.0, 0.532, &opts, true).unwrap();
        assert!((ab - ba).abs() < 1e-9, "{ab:e} {ba:e}");
    }

    #[test]
    fn identical_ends_transmit_fully() {
        let cs = ChannelCrossSection::spim_output();
        let t = TaperSpec::new(cs.clone(), cs, 1.0, Interpolation::Linear).unwrap();
        let tr = taper_transmission(&t, 0.532, 0.25).unwrap();
        assert!((tr - 1.0).abs() < 1e-4, "{tr}");
    }

    #[test]
    fn infinite_radius_matches_straight_guide() {
        let cs = ChannelCrossSection::spim_output();
        let straight = bend_transmission(&cs, f64::INFINITY, 500.0, 0.532).unwrap();
        assert!(straight > 0.999);
        let bent = bend_transmission(&cs, 1.0e9, 500.0, 0.532).unwrap();
        assert!((straight - bent).abs() < 1e-6);
    }
}
