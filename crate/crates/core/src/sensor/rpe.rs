use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::sequence::{build_sequence, CompiledSequence, Decoupling};
use crate::error::{Error, Result};

/// Analysis bases used by every generation.
pub const MEASUREMENT_PHASES: [f64; 4] = [0.0, FRAC_PI_2, PI, 1.5 * PI];
/// Inter-π gap limit, µs.
pub const DEFAULT_MAX_GAP_US: f64 = 500.0;
/// Quadrature power below which a generation counts as decohered.
pub const DEFAULT_POWER_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RpeConfig {
    /// Base Stark duration τ₀, µs.
    pub tau0: f64,
    pub generations: usize,
    pub max_gap: f64,
    pub decoupling: Decoupling,
    pub power_floor: f64,
    /// Generation 0 picks the candidate nearest this value (rad/µs). `None`
    /// reads the first phase in `[0, 2π)`.
    pub prior: Option<f64>,
}

impl Default for RpeConfig {
    fn default() -> Self {
        Self {
            tau0: 1.0,
            generations: 8,
            max_gap: DEFAULT_MAX_GAP_US,
            decoupling: Decoupling::Kdd,
            power_floor: DEFAULT_POWER_FLOOR,
            prior: None,
        }
    }
}

impl RpeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau0 > 0.0) {
            return Err(Error::invalid("tau0", format!("{} must be positive", self.tau0)));
        }
        if self.generations == 0 {
            return Err(Error::invalid("generations", "at least one generation is required"));
        }
        if !(self.max_gap > 0.0) {
            return Err(Error::invalid("max_gap", format!("{} must be positive", self.max_gap)));
        }
        Ok(())
    }

    /// Largest shift resolved without ambiguity, `2π/τ₀`.
    pub fn max_shift(&self) -> f64 {
        TAU / self.tau0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Quasi-static detuning spread, rad/µs; redrawn every shot.
    pub sigma: f64,
    pub shots: usize,
    /// Symmetric probability of misreading the outcome.
    pub readout_error: f64,
    pub seed: u64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma: 0.0,
            shots: 100,
            readout_error: 0.0,
            seed: 0,
        }
    }
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid("sigma", format!("{} must be non-negative", self.sigma)));
        }
        if self.shots == 0 {
            return Err(Error::invalid("shots", "at least one shot is required"));
        }
        if !(0.0..0.5).contains(&self.readout_error) {
            return Err(Error::invalid("readout_error", format!("{} outside [0, 0.5)", self.readout_error)));
        }
        Ok(())
    }
}

/// Source of outcome-1 probability estimates for a Stark window of `tau`
/// µs read out in basis `phi`.
pub trait Oracle {
    fn estimate(&mut self, tau: f64, phi: f64) -> Result<f64>;

    /// Shots behind each estimate; `None` for exact probabilities.
    fn shots(&self) -> Option<usize>;
}

struct SequenceCache {
    max_gap: f64,
    mode: Decoupling,
    cache: HashMap<u64, CompiledSequence>,
}

impl SequenceCache {
    fn get(&mut self, tau: f64) -> Result<CompiledSequence> {
        if let Some(c) = self.cache.get(&tau.to_bits()) {
            return Ok(*c);
        }
        let c = build_sequence(tau, self.max_gap, self.mode)?.compile();
        self.cache.insert(tau.to_bits(), c);
        Ok(c)
    }
}

/// Exact probabilities for a fixed shift and static detuning.
pub struct ExactOracle {
    pub delta: f64,
    pub detuning: f64,
    sequences: SequenceCache,
}

impl ExactOracle {
    pub fn new(delta: f64, cfg: &RpeConfig) -> Self {
        Self {
            delta,
            detuning: 0.0,
            sequences: SequenceCache {
                max_gap: cfg.max_gap,
                mode: cfg.decoupling,
                cache: HashMap::new(),
            },
        }
    }
}

impl Oracle for ExactOracle {
    fn estimate(&mut self, tau: f64, phi: f64) -> Result<f64> {
        Ok(self.sequences.get(tau)?.probability(self.delta, self.detuning, phi))
    }

    fn shots(&self) -> Option<usize> {
        None
    }
}

/// Finite-shot sampler with quasi-static detuning noise and readout error.
pub struct SampledOracle {
    pub delta: f64,
    noise: NoiseModel,
    detuning: Option<Normal<f64>>,
    rng: ChaCha8Rng,
    sequences: SequenceCache,
}

impl SampledOracle {
    pub fn new(delta: f64, cfg: &RpeConfig, noise: &NoiseModel) -> Result<Self> {
        Self::with_stream(delta, cfg, noise, 0)
    }

    /// Independent random stream `stream` of the noise seed.
    pub fn with_stream(delta: f64, cfg: &RpeConfig, noise: &NoiseModel, stream: u64) -> Result<Self> {
        noise.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        rng.set_stream(stream);
        let detuning = if noise.sigma > 0.0 {
            Some(Normal::new(0.0, noise.sigma).map_err(|e| Error::invalid("sigma", e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            delta,
            noise: noise.clone(),
            detuning,
            rng,
            sequences: SequenceCache {
                max_gap: cfg.max_gap,
                mode: cfg.decoupling,
                cache: HashMap::new(),
            },
        })
    }
}

impl Oracle for SampledOracle {
    fn estimate(&mut self, tau: f64, phi: f64) -> Result<f64> {
        let seq = self.sequences.get(tau)?;
        let mut ones = 0usize;
        for _ in 0..self.noise.shots {
            let d0 = self.detuning.map_or(0.0, |n| n.sample(&mut self.rng));
            let p = seq.probability(self.delta, d0, phi);
            let mut bit = self.rng.random::<f64>() < p;
            if self.noise.readout_error > 0.0 && self.rng.random::<f64>() < self.noise.readout_error {
                bit = !bit;
            }
            ones += bit as usize;
        }
        Ok(ones as f64 / self.noise.shots as f64)
    }

    fn shots(&self) -> Option<usize> {
        Some(self.noise.shots)
    }
}

/// One RPE generation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Generation {
    pub k: usize,
    /// Stark duration `2^k·τ₀`, µs.
    pub tau: f64,
    /// Probabilities at the four analysis bases.
    pub probabilities: [f64; 4],
    pub cos: f64,
    pub sin: f64,
    /// `atan2(sin, cos)` in `[0, 2π)`.
    pub theta: f64,
    /// Reconciled shift after this generation, rad/µs.
    pub estimate: f64,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RpeResult {
    /// rad/µs.
    pub estimate: f64,
    /// One-sigma shot-noise uncertainty of the last generation; zero for
    /// exact probabilities.
    pub sigma: f64,
    pub trace: Vec<Generation>,
}

/// Quadrature amplitude `√(ĉ² + ŝ²)` of a single Stark duration.
pub fn contrast(oracle: &mut dyn Oracle, tau: f64) -> Result<f64> {
    let mut p = [0.0; 4];
    for (slot, &phi) in p.iter_mut().zip(&MEASUREMENT_PHASES) {
        *slot = oracle.estimate(tau, phi)?;
    }
    Ok((p[0] - p[2]).hypot(p[3] - p[1]))
}

/// Robust phase estimation over generations `τ_k = 2^k·τ₀`.
pub fn rpe_estimate(oracle: &mut dyn Oracle, cfg: &RpeConfig) -> Result<RpeResult> {
    cfg.validate()?;
    let mut trace: Vec<Generation> = Vec::with_capacity(cfg.generations);
    let mut previous = cfg.prior;
    let mut sigma = 0.0;
    for k in 0..cfg.generations {
        let tau = cfg.tau0 * (1u64 << k) as f64;
        let mut p = [0.0; 4];
        for (slot, &phi) in p.iter_mut().zip(&MEASUREMENT_PHASES) {
            *slot = oracle.estimate(tau, phi)?;
        }
        let sin = p[0] - p[2];
        let cos = p[3] - p[1];
        let power = cos * cos + sin * sin;
        // rounding can push a zero phase just below 2π
        let theta = match sin.atan2(cos).rem_euclid(TAU) {
            t if TAU - t < 1e-12 => 0.0,
            t => t,
        };
        if power < cfg.power_floor {
            return Err(Error::Decohered {
                generation: k,
                power,
                floor: cfg.power_floor,
                trace,
            });
        }
        let estimate = match previous {
            None => theta / tau,
            Some(prev) => {
                let m = ((prev * tau - theta) / TAU).round();
                (theta + TAU * m) / tau
            }
        };
        if let Some(n) = oracle.shots() {
            let var: f64 = p.iter().map(|q| q * (1.0 - q)).sum::<f64>() / n as f64;
            sigma = (0.5 * var / power).sqrt() / tau;
        }
        previous = Some(estimate);
        trace.push(Generation {
            k,
            tau,
            probabilities: p,
            cos,
            sin,
            theta,
            estimate,
            power,
        });
    }
    Ok(RpeResult {
        estimate: previous.unwrap_or(0.0),
        sigma,
        trace,
    })
}
