use serde::Serialize;

use super::fit::{multi_gauss_fit, Profile};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelRatio {
    pub channel: usize,
    pub center_um: f64,
    /// Intensity at the channel centre over the fitted injected peak.
    pub peak_ratio: f64,
    /// Background-subtracted power within ±pitch/2 over the same for the
    /// injected channel.
    pub integrated_ratio: f64,
    pub nearest: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrosstalkMetrics {
    pub injected: usize,
    pub injected_peak: f64,
    pub background: f64,
    pub channels: Vec<ChannelRatio>,
}

impl CrosstalkMetrics {
    pub fn nearest(&self) -> impl Iterator<Item = &ChannelRatio> {
        self.channels.iter().filter(|c| c.nearest)
    }
}

/// Cross-talk of every channel relative to the `injected` one.
pub fn crosstalk_metrics(profile: &Profile, centers: &[f64], injected: usize) -> Result<CrosstalkMetrics> {
    if injected >= centers.len() {
        return Err(Error::invalid(
            "injected",
            format!("channel {injected} outside 0..{}", centers.len()),
        ));
    }
    let (lo, hi) = (profile.x[0], profile.x[profile.len() - 1]);
    if let Some(c) = centers.iter().find(|&&c| c < lo || c > hi) {
        return Err(Error::invalid("centers", format!("{c} lies outside [{lo}, {hi}]")));
    }
    let pitch = if centers.len() > 1 {
        (centers[centers.len() - 1] - centers[0]).abs() / (centers.len() - 1) as f64
    } else {
        hi - lo
    };
    let c0 = centers[injected];
    let window = |c: f64| {
        let (x, y): (Vec<f64>, Vec<f64>) = profile
            .x
            .iter()
            .zip(&profile.y)
            .filter(|(x, y)| (**x - c).abs() <= 0.5 * pitch && y.is_finite())
            .map(|(x, y)| (*x, *y))
            .unzip();
        (x, y)
    };
    let (wx, wy) = window(c0);
    let raw_peak = wy.iter().cloned().fold(0.0, f64::max);
    let injected_peak = Profile::new(wx, wy)
        .ok()
        .and_then(|p| multi_gauss_fit(&p, 1, None).ok())
        .map(|f| f.model(f.peaks[0].center))
        .filter(|v| v.is_finite() && *v > 0.0)
        .unwrap_or(raw_peak);
    let background = {
        let mut v: Vec<f64> = profile.y.iter().copied().filter(|v| v.is_finite()).collect();
        v.sort_by(f64::total_cmp);
        v.get(v.len() / 10).copied().unwrap_or(0.0).max(0.0)
    };
    let power = |c: f64| {
        let (_, y) = window(c);
        y.iter().map(|v| v - background).sum::<f64>().max(0.0)
    };
    let reference = power(c0);
    let channels = centers
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != injected)
        .map(|(k, &c)| ChannelRatio {
            channel: k,
            center_um: c,
            peak_ratio: if injected_peak > 0.0 { profile.at(c) / injected_peak } else { 0.0 },
            integrated_ratio: if reference > 0.0 { power(c) / reference } else { 0.0 },
            nearest: k + 1 == injected || k == injected + 1,
        })
        .collect();
    Ok(CrosstalkMetrics {
        injected,
        injected_peak,
        background,
        channels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(amps: &[f64], pitch: f64, w: f64) -> (Profile, Vec<f64>) {
        let n = amps.len();
        let centers: Vec<f64> = (0..n).map(|k| (k as f64 - 0.5 * (n as f64 - 1.0)) * pitch).collect();
        let half = 0.5 * pitch * n as f64;
        let x: Vec<f64> = (0..=(2.0 * half / 0.05) as usize).map(|i| -half + i as f64 * 0.05).collect();
        let y = x
            .iter()
            .map(|&xi| {
                centers
                    .iter()
                    .zip(amps)
                    .map(|(c, a)| a * (-2.0 * (xi - c).powi(2) / (w * w)).exp())
                    .sum()
            })
            .collect();
        (Profile::new(x, y).unwrap(), centers)
    }

    #[test]
    fn dark_neighbours_give_zero() {
        let (p, c) = profile(&[0.0, 1.0, 0.0], 8.0, 1.0);
        let m = crosstalk_metrics(&p, &c, 1).unwrap();
        for ch in &m.channels {
            assert!(ch.peak_ratio.abs() < 1e-12 && ch.integrated_ratio.abs() < 1e-12);
        }
    }

    #[test]
    fn synthetic_floor_is_recovered() {
        let (p, c) = profile(&[5e-4, 1.0, 5e-4], 8.0, 1.0);
        let m = crosstalk_metrics(&p, &c, 1).unwrap();
        for ch in m.nearest() {
            assert!((ch.peak_ratio / 5e-4 - 1.0).abs() < 0.05, "{}", ch.peak_ratio);
            assert!((ch.integrated_ratio / 5e-4 - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn ratios_are_scale_invariant() {
        let (p, c) = profile(&[2e-3, 1.0, 7e-4, 1e-5], 8.0, 1.2);
        let mut q = p.clone();
        q.y.iter_mut().for_each(|v| *v *= 2.0);
        let a = crosstalk_metrics(&p, &c, 1).unwrap();
        let b = crosstalk_metrics(&q, &c, 1).unwrap();
        for (x, y) in a.channels.iter().zip(&b.channels) {
            assert!((x.peak_ratio - y.peak_ratio).abs() <= 1e-9 * x.peak_ratio.abs().max(1e-300));
            assert!((x.integrated_ratio - y.integrated_ratio).abs() <= 1e-9 * x.integrated_ratio.abs().max(1e-300));
        }
    }

    #[test]
    fn edge_channel_has_one_nearest_neighbour() {
        let (p, c) = profile(&[1.0, 1e-3, 1e-5], 8.0, 1.0);
        let m = crosstalk_metrics(&p, &c, 0).unwrap();
        assert_eq!(m.nearest().count(), 1);
    }
}
