use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::rpe::{rpe_estimate, ExactOracle, NoiseModel, Oracle, RpeConfig, SampledOracle};
use crate::analysis::{multi_gauss_fit, GaussFit, Profile};
use crate::chain::IonBeam;
use crate::error::{Error, Result};

/// Ion-plane beams, one per channel. Lighting channel `j` puts `crosstalk`
/// of its peak intensity into each nearest-neighbour beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamMap {
    pub beams: Vec<IonBeam>,
    pub crosstalk: f64,
}

impl BeamMap {
    /// `n` equal beams at `pitch`, centred on the origin.
    pub fn uniform(n: usize, pitch: f64, waist: f64, crosstalk: f64) -> Self {
        let beams = (0..n)
            .map(|i| IonBeam {
                center: (i as f64 - 0.5 * (n as f64 - 1.0)) * pitch,
                waist,
                peak: 1.0,
            })
            .collect();
        Self { beams, crosstalk }
    }

    pub fn centers(&self) -> Vec<f64> {
        self.beams.iter().map(|b| b.center).collect()
    }

    /// Intensity at `x` with channel `lit` switched on.
    pub fn intensity(&self, lit: usize, x: f64) -> f64 {
        let own = self.beams[lit].intensity(x);
        let leak: f64 = [lit.checked_sub(1), Some(lit + 1)]
            .into_iter()
            .flatten()
            .filter_map(|k| self.beams.get(k))
            .map(|b| self.crosstalk * b.intensity(x) / b.peak * self.beams[lit].peak)
            .sum();
        own + leak
    }

    /// Range covered by the beams, five waists beyond the outermost.
    pub fn support(&self) -> (f64, f64) {
        let w = self.beams.iter().map(|b| b.waist).fold(0.0, f64::max);
        let lo = self.beams.iter().map(|b| b.center).fold(f64::INFINITY, f64::min);
        let hi = self.beams.iter().map(|b| b.center).fold(f64::NEG_INFINITY, f64::max);
        (lo - 5.0 * w, hi + 5.0 * w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    /// τ₀ is chosen per point; the other fields apply as given.
    pub rpe: RpeConfig,
    /// Stark shift per unit intensity, rad/µs.
    pub c_stark: f64,
    /// Upper limit on the adapted τ₀, µs.
    pub tau0_max: f64,
    pub adapt_stages: usize,
    pub fit: bool,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            rpe: RpeConfig::default(),
            c_stark: 1.0,
            tau0_max: 5000.0,
            adapt_stages: 4,
            fit: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointEstimate {
    /// rad/µs; NaN when invalid.
    pub delta_hat: f64,
    pub sigma: f64,
    pub tau0: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChannelScan {
    pub channel: usize,
    pub points: Vec<PointEstimate>,
    /// Shifts divided by this channel's largest valid shift.
    pub normalized: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighbourRatio {
    pub channel: usize,
    pub neighbour: usize,
    /// Normalised shift of `channel` at the neighbour's centre.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanMeasurement {
    /// µm, strictly increasing.
    pub positions: Vec<f64>,
    pub channels: Vec<ChannelScan>,
    /// Sum of the normalised channel scans.
    pub combined: Vec<f64>,
    pub fit: Option<GaussFit>,
    pub neighbours: Vec<NeighbourRatio>,
}

impl ScanMeasurement {
    pub fn mean_neighbour_ratio(&self) -> f64 {
        let v: Vec<f64> = self.neighbours.iter().map(|n| n.ratio).filter(|r| r.is_finite()).collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    }
}

/// RPE at one point with τ₀ widened until the estimate fills a quarter of
/// the unambiguous window.
fn measure_point(oracle: &mut dyn Oracle, cfg: &ScanConfig, tau0: f64) -> Result<(f64, f64, f64)> {
    let mut rpe = RpeConfig {
        tau0,
        prior: Some(0.0),
        ..cfg.rpe.clone()
    };
    let mut r = rpe_estimate(oracle, &rpe)?;
    for _ in 1..cfg.adapt_stages {
        let bound = r.estimate.abs() + 3.0 * r.sigma;
        let next = if bound > 0.0 { FRAC_PI_2 / bound } else { cfg.tau0_max }.min(cfg.tau0_max);
        if next <= 2.0 * rpe.tau0 {
            break;
        }
        rpe.tau0 = next;
        rpe.prior = Some(r.estimate);
        r = rpe_estimate(oracle, &rpe)?;
    }
    Ok((r.estimate, r.sigma, rpe.tau0))
}

/// Scans the ion across `positions` once per channel and reconstructs the
/// beam profiles from the measured Stark shifts. `noise = None` uses exact
/// probabilities.
pub fn scan_ion(map: &BeamMap, positions: &[f64], cfg: &ScanConfig, noise: Option<&NoiseModel>) -> Result<ScanMeasurement> {
    if map.beams.is_empty() {
        return Err(Error::invalid("beams", "at least one beam is required"));
    }
    if positions.len() < 2 || positions.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("positions", "need at least two strictly increasing positions"));
    }
    let (lo, hi) = map.support();
    if positions[0] < lo || positions[positions.len() - 1] > hi {
        return Err(Error::invalid(
            "positions",
            format!("scan leaves the beam support [{lo:.3}, {hi:.3}] um"),
        ));
    }
    if !(cfg.c_stark > 0.0) {
        return Err(Error::invalid("c_stark", "must be positive"));
    }
    cfg.rpe.validate()?;
    let n = map.beams.len();
    let np = positions.len();
    let peak = map.beams.iter().map(|b| b.peak).fold(0.0, f64::max) * (1.0 + 2.0 * map.crosstalk);
    let tau0 = FRAC_PI_2 / (cfg.c_stark * peak);

    let points: Vec<PointEstimate> = (0..n * np)
        .into_par_iter()
        .map(|idx| {
            let (ch, i) = (idx / np, idx % np);
            let delta = cfg.c_stark * map.intensity(ch, positions[i]);
            let r = match noise {
                None => measure_point(&mut ExactOracle::new(delta, &cfg.rpe), cfg, tau0),
                Some(nm) => SampledOracle::with_stream(delta, &cfg.rpe, nm, idx as u64)
                    .and_then(|mut o| measure_point(&mut o, cfg, tau0)),
            };
            match r {
                Ok((d, s, t)) => PointEstimate {
                    delta_hat: d,
                    sigma: s,
                    tau0: t,
                    valid: true,
                },
                Err(_) => PointEstimate {
                    delta_hat: f64::NAN,
                    sigma: f64::NAN,
                    tau0,
                    valid: false,
                },
            }
        })
        .collect();

    let mut channels = Vec::with_capacity(n);
    let mut combined = vec![0.0; np];
    for (ch, pts) in points.chunks(np).enumerate() {
        let max = pts.iter().filter(|p| p.valid).map(|p| p.delta_hat).fold(0.0, f64::max);
        let normalized: Vec<f64> = pts
            .iter()
            .map(|p| if p.valid && max > 0.0 { p.delta_hat / max } else { f64::NAN })
            .collect();
        for (c, v) in combined.iter_mut().zip(&normalized) {
            if v.is_finite() {
                *c += v;
            }
        }
        channels.push(ChannelScan {
            channel: ch,
            points: pts.to_vec(),
            normalized,
        });
    }

    let centers = map.centers();
    let mut neighbours = Vec::new();
    for c in &channels {
        let prof = Profile::new(positions.to_vec(), c.normalized.clone())?;
        for k in [c.channel.checked_sub(1), Some(c.channel + 1)].into_iter().flatten() {
            if k < n {
                neighbours.push(NeighbourRatio {
                    channel: c.channel,
                    neighbour: k,
                    ratio: prof.at(centers[k]),
                });
            }
        }
    }

    let fit = if cfg.fit {
        Some(multi_gauss_fit(&Profile::new(positions.to_vec(), combined.clone())?, n, None)?)
    } else {
        None
    };
    Ok(ScanMeasurement {
        positions: positions.to_vec(),
        channels,
        combined,
        fit,
        neighbours,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(|i| lo + i as f64 * step).collect()
    }

    #[test]
    fn noiseless_single_beam_is_recovered() {
        let map = BeamMap {
            beams: vec![IonBeam {
                center: 0.3,
                waist: 0.67,
                peak: 1.0,
            }],
            crosstalk: 0.0,
        };
        let cfg = ScanConfig::default();
        let m = scan_ion(&map, &grid(-2.5, 2.5, 0.05), &cfg, None).unwrap();
        let fit = m.fit.unwrap();
        assert!((fit.peaks[0].center - 0.3).abs() < 1e-6);
        assert!((fit.peaks[0].waist - 0.67).abs() < 1e-6);
    }

    #[test]
    fn neighbour_leak_is_measured() {
        let map = BeamMap::uniform(3, 3.95, 0.67, 5e-4);
        let noise = NoiseModel {
            shots: 1000,
            seed: 2,
            ..Default::default()
        };
        let cfg = ScanConfig {
            fit: false,
            ..Default::default()
        };
        let m = scan_ion(&map, &grid(-6.0, 6.0, 0.05), &cfg, Some(&noise)).unwrap();
        for r in &m.neighbours {
            assert!(r.ratio > 2.5e-4 && r.ratio < 1e-3, "{r:?}");
        }
    }

    #[test]
    fn scans_outside_the_beams_are_rejected() {
        let map = BeamMap::uniform(2, 4.0, 0.67, 0.0);
        assert!(scan_ion(&map, &grid(-20.0, 0.0, 0.5), &ScanConfig::default(), None).is_err());
    }
}
