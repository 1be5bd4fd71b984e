use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fan-in geometry of the chip: straight input region, raised-cosine curve,
/// straight output region. All lengths in µm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipLayout {
    pub n_channels: usize,
    pub input_pitch: f64,
    pub output_pitch: f64,
    pub len_straight_in: f64,
    pub len_curve: f64,
    pub len_straight_out: f64,
}

impl Default for ChipLayout {
    fn default() -> Self {
        Self {
            n_channels: 8,
            input_pitch: 127.0,
            output_pitch: 8.0,
            len_straight_in: 2200.0,
            len_curve: 7200.0,
            len_straight_out: 200.0,
        }
    }
}

impl ChipLayout {
    pub fn validate(&self) -> Result<()> {
        if self.n_channels == 0 {
            return Err(Error::invalid("chip.n_channels", "must be at least 1"));
        }
        for (name, v) in [
            ("chip.input_pitch_um", self.input_pitch),
            ("chip.output_pitch_um", self.output_pitch),
            ("chip.len_straight_in_um", self.len_straight_in),
            ("chip.len_curve_um", self.len_curve),
            ("chip.len_straight_out_um", self.len_straight_out),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid(name, format!("{v} must be positive")));
            }
        }
        Ok(())
    }

    pub fn total_length(&self) -> f64 {
        self.len_straight_in + self.len_curve + self.len_straight_out
    }

    pub fn paths(&self) -> Result<Vec<ChannelPath>> {
        (0..self.n_channels).map(|i| channel_path(self, i)).collect()
    }

    /// Smallest bend radius over all channels.
    pub fn min_bend_radius(&self) -> f64 {
        (0..self.n_channels)
            .filter_map(|i| channel_path(self, i).ok())
            .map(|p| p.min_bend_radius())
            .fold(f64::INFINITY, f64::min)
    }

    /// Lateral offset of channel `i` from the array centre at a given pitch.
    pub fn offset(&self, i: usize, pitch: f64) -> f64 {
        (i as f64 - 0.5 * (self.n_channels as f64 - 1.0)) * pitch
    }
}

/// Lateral position `x(z)` of one channel along the chip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPath {
    pub x_in: f64,
    pub x_out: f64,
    pub z_curve_start: f64,
    pub len_curve: f64,
    pub z_end: f64,
}

impl ChannelPath {
    fn phase(&self, z: f64) -> f64 {
        ((z - self.z_curve_start) / self.len_curve).clamp(0.0, 1.0) * std::f64::consts::PI
    }

    fn in_curve(&self, z: f64) -> bool {
        z > self.z_curve_start && z < self.z_curve_start + self.len_curve
    }

    pub fn x(&self, z: f64) -> f64 {
        self.x_in + (self.x_out - self.x_in) * 0.5 * (1.0 - self.phase(z).cos())
    }

    pub fn slope(&self, z: f64) -> f64 {
        if !self.in_curve(z) {
            return 0.0;
        }
        (self.x_out - self.x_in) * 0.5 * std::f64::consts::PI / self.len_curve * self.phase(z).sin()
    }

    pub fn second_derivative(&self, z: f64) -> f64 {
        if !self.in_curve(z) {
            return 0.0;
        }
        let k = std::f64::consts::PI / self.len_curve;
        (self.x_out - self.x_in) * 0.5 * k * k * self.phase(z).cos()
    }

    /// Signed curvature of the path; positive bends towards `+x`.
    pub fn curvature(&self, z: f64) -> f64 {
        let s = self.slope(z);
        self.second_derivative(z) / (1.0 + s * s).powf(1.5)
    }

    /// Minimum bend radius; infinite for a straight channel.
    pub fn min_bend_radius(&self) -> f64 {
        let k = std::f64::consts::PI / self.len_curve;
        let peak = (self.x_out - self.x_in).abs() * 0.5 * k * k;
        // curvature peaks at the ends of the curve where the slope vanishes
        if peak == 0.0 {
            f64::INFINITY
        } else {
            1.0 / peak
        }
    }
}

/// Path of channel `i`: centred at `(i - (n-1)/2)·pitch` at both facets.
pub fn channel_path(layout: &ChipLayout, i: usize) -> Result<ChannelPath> {
    layout.validate()?;
    if i >= layout.n_channels {
        return Err(Error::invalid(
            "channel",
            format!("index {i} outside 0..{}", layout.n_channels),
        ));
    }
    Ok(ChannelPath {
        x_in: layout.offset(i, layout.input_pitch),
        x_out: layout.offset(i, layout.output_pitch),
        z_curve_start: layout.len_straight_in,
        len_curve: layout.len_curve,
        z_end: layout.total_length(),
    })
}

/// True when no two channel paths cross or touch anywhere along the chip,
/// checked on `samples` evenly spaced planes.
pub fn paths_disjoint(paths: &[ChannelPath], samples: usize) -> bool {
    let Some(first) = paths.first() else { return true };
    (0..=samples).all(|k| {
        let z = first.z_end * k as f64 / samples as f64;
        let mut xs: Vec<f64> = paths.iter().map(|p| p.x(z)).collect();
        let ordered = xs.windows(2).all(|w| w[1] > w[0]);
        xs.dedup();
        ordered && xs.len() == paths.len()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn facet_pitches_match_layout() {
        let layout = ChipLayout::default();
        let paths = layout.paths().unwrap();
        for w in paths.windows(2) {
            assert!((w[1].x(0.0) - w[0].x(0.0) - 127.0).abs() < 1e-9);
            let z = layout.total_length();
            assert!((w[1].x(z) - w[0].x(z) - 8.0).abs() < 1e-9);
        }
    }

    #[test]
    fn centre_channel_of_odd_layout_is_straight() {
        let layout = ChipLayout { n_channels: 7, ..Default::default() };
        let p = channel_path(&layout, 3).unwrap();
        for k in 0..100 {
            assert_eq!(p.x(k as f64 * 96.0), 0.0);
        }
        assert!(p.min_bend_radius().is_infinite());
    }

    #[test]
    fn straight_regions_are_flat_and_slope_is_continuous() {
        let layout = ChipLayout::default();
        let p = channel_path(&layout, 0).unwrap();
        assert_eq!(p.x(100.0), p.x(2200.0));
        assert_eq!(p.x(9400.0), p.x(9600.0));
        assert!(p.slope(2200.0).abs() < 1e-15 && p.slope(9400.0).abs() < 1e-12);
        let eps = 1e-6;
        assert!((p.slope(2200.0 + eps) - p.slope(2200.0 - eps)).abs() < 1e-9);
    }

    #[test]
    fn min_bend_radius_matches_finite_difference_curvature() {
        let layout = ChipLayout::default();
        let p = channel_path(&layout, 0).unwrap();
        let h = 0.5;
        let z = 2200.0 + 2.0 * h;
        let fd = (p.x(z + h) - 2.0 * p.x(z) + p.x(z - h)) / (h * h);
        assert!((1.0 / fd.abs() - p.min_bend_radius()).abs() / p.min_bend_radius() < 1e-4);
        assert!((layout.min_bend_radius() - p.min_bend_radius()).abs() < 1e-6);
        assert!(layout.min_bend_radius() > 20_000.0);
    }

    #[test]
    fn thirty_two_channels_do_not_intersect() {
        let layout = ChipLayout { n_channels: 32, ..Default::default() };
        assert!(paths_disjoint(&layout.paths().unwrap(), 2000));
    }

    #[test]
    fn bad_index_is_rejected() {
        assert!(channel_path(&ChipLayout::default(), 8).is_err());
    }

    proptest! {
        #[test]
        fn mirror_symmetry(n in 1usize..40, z in 0.0f64..9600.0) {
            let layout = ChipLayout { n_channels: n, ..Default::default() };
            for i in 0..n {
                let a = channel_path(&layout, i).unwrap().x(z);
                let b = channel_path(&layout, n - 1 - i).unwrap().x(z);
                prop_assert!((a + b).abs() < 1e-9);
            }
        }

        #[test]
        fn separations_shrink_through_curve(n in 2usize..20, z in 2200.0f64..9399.0, dz in 0.0f64..50.0) {
            let layout = ChipLayout { n_channels: n, ..Default::default() };
            let paths = layout.paths().unwrap();
            for w in paths.windows(2) {
                let a = w[1].x(z) - w[0].x(z);
                let b = w[1].x(z + dz) - w[0].x(z + dz);
                prop_assert!(b <= a + 1e-9);
            }
        }
    }
}
