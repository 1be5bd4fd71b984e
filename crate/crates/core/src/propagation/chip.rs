use serde::Serialize;

use super::bpm::{propagate, BpmOptions};
use super::devices::{ReducedGuide, TaperStack, BPM_DX};
use crate::chip::{ChannelCrossSection, ChipLayout, Grid1, Interpolation, TaperSpec};
use crate::error::{Error, Result};

/// Channel cross-sections used along the chip: `input` at the input facet,
/// converted to `output` over the input straight when they differ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChipDesign {
    pub name: String,
    pub input: ChannelCrossSection,
    pub output: ChannelCrossSection,
}

impl ChipDesign {
    pub fn spim() -> Self {
        Self {
            name: "spim".into(),
            input: ChannelCrossSection::spim_input(),
            output: ChannelCrossSection::spim_output(),
        }
    }

    pub fn conventional() -> Self {
        Self {
            name: "conventional".into(),
            input: ChannelCrossSection::conventional(),
            output: ChannelCrossSection::conventional(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChipCrosstalk {
    pub injected: usize,
    /// Output channel centres, µm.
    pub centers: Vec<f64>,
    /// Power in each output channel's fundamental mode, as a fraction of
    /// the launched power.
    pub channel_power: Vec<f64>,
    /// `(channel, power ratio to the injected channel)` for the nearest
    /// neighbours.
    pub neighbours: Vec<(usize, f64)>,
    /// `|E|²` across the output facet, `(x µm, intensity)`.
    pub line_profile: Vec<(f64, f64)>,
    /// Launched power still inside the window at the output facet.
    pub transmitted: f64,
}

impl ChipCrosstalk {
    /// Largest nearest-neighbour power ratio.
    pub fn worst_neighbour(&self) -> f64 {
        self.neighbours.iter().map(|n| n.1).fold(0.0, f64::max)
    }
}

/// Propagates light launched into channel `injected` through the whole
/// fan-in and reports the power reaching every output channel.
///
/// Channels are placed at their lab-frame positions `x_i(z)` in every
/// plane, so the curvature of the routing enters through the moving
/// guides themselves.
pub fn chip_crosstalk_scan(
    layout: &ChipLayout,
    design: &ChipDesign,
    injected: usize,
    wavelength: f64,
    opts: &BpmOptions,
) -> Result<ChipCrosstalk> {
    let paths = layout.paths()?;
    if injected >= paths.len() {
        return Err(Error::invalid(
            "injected",
            format!("channel {injected} outside 0..{}", paths.len()),
        ));
    }
    let output = ReducedGuide::single_mode(&design.output, wavelength)?;
    let tapered = design.input != design.output;
    let stack = if tapered {
        ReducedGuide::single_mode(&design.input, wavelength)?;
        let t = TaperSpec::new(
            design.input.clone(),
            design.output.clone(),
            layout.len_straight_in,
            Interpolation::Linear,
        )?;
        Some(TaperStack::new(&t, wavelength)?)
    } else {
        None
    };
    let reach = stack.as_ref().map_or(output.half_width, |s| s.half_width.max(output.half_width));
    let strip = opts.absorber.map_or(0.0, |a| a.width);
    let margin = reach + 8.0 + strip;
    let lo = paths.iter().map(|p| p.x_in.min(p.x_out)).fold(f64::INFINITY, f64::min) - margin;
    let hi = paths.iter().map(|p| p.x_in.max(p.x_out)).fold(f64::NEG_INFINITY, f64::max) + margin;
    let nx = ((hi - lo) / BPM_DX).ceil() as usize + 1;
    let grid = Grid1::new(lo, BPM_DX, nx)?;
    let n_clad = output.n_clad();
    let z_taper = layout.len_straight_in;

    let launch_guide = match &stack {
        Some(s) => &s.guides[0],
        None => &output,
    };
    let launch = launch_guide.fundamental_on(&grid, paths[injected].x_in, wavelength)?;
    let result = propagate(
        grid,
        n_clad,
        layout.total_length(),
        |z, n| {
            n.fill(n_clad);
            for p in &paths {
                let x = p.x(z);
                match &stack {
                    Some(s) if z < z_taper => {
                        let (k, f) = s.locate(z);
                        s.guides[k].add_to(&grid, x, 1.0 - f, n);
                        if f > 0.0 {
                            s.guides[k + 1].add_to(&grid, x, f, n);
                        }
                    }
                    _ => output.add_to(&grid, x, 1.0, n),
                }
            }
        },
        &launch,
        wavelength,
        opts,
    )?;

    let centers: Vec<f64> = paths.iter().map(|p| p.x_out).collect();
    let mut channel_power = Vec::with_capacity(centers.len());
    for &c in &centers {
        let mode = output.fundamental_on(&grid, c, wavelength)?;
        channel_power.push(result.fraction_in(&mode));
    }
    let reference = channel_power[injected];
    let neighbours = [injected.checked_sub(1), Some(injected + 1)]
        .into_iter()
        .flatten()
        .filter(|&k| k < centers.len())
        .map(|k| (k, channel_power[k] / reference))
        .collect();
    let x_lo = centers[0] - 0.5 * layout.output_pitch;
    let x_hi = centers[centers.len() - 1] + 0.5 * layout.output_pitch;
    let line_profile = result
        .intensity()
        .into_iter()
        .filter(|(x, _)| *x >= x_lo && *x <= x_hi)
        .collect();
    Ok(ChipCrosstalk {
        injected,
        centers,
        channel_power,
        neighbours,
        line_profile,
        transmitted: result.final_power(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_channel_has_no_neighbours() {
        let layout = ChipLayout {
            n_channels: 1,
            len_straight_in: 100.0,
            len_curve: 100.0,
            len_straight_out: 50.0,
            ..Default::default()
        };
        let r = chip_crosstalk_scan(&layout, &ChipDesign::conventional(), 0, 0.532, &BpmOptions::default()).unwrap();
        assert!(r.neighbours.is_empty());
        let peak = r.line_profile.iter().map(|p| p.1).fold(0.0, f64::max);
        let maxima = r
            .line_profile
            .windows(3)
            .filter(|w| w[1].1 > w[0].1 && w[1].1 >= w[2].1 && w[1].1 > 1e-3 * peak)
            .count();
        assert_eq!(maxima, 1);
    }

    #[test]
    fn out_of_range_injection_is_rejected() {
        let r = chip_crosstalk_scan(&ChipLayout::default(), &ChipDesign::spim(), 8, 0.532, &BpmOptions::default());
        assert!(r.is_err());
    }
}
