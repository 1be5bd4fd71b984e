use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::state::{
    analysis_phase, apply_rotation, convention_probability, free_evolve, mat_mul, rotation_matrix, Mat2, QubitState,
    IDENTITY,
};
use crate::error::{Error, Result};

/// Phases of the five π pulses of one Knill block.
pub const KDD_PHASES: [f64; 5] = [FRAC_PI_6, 0.0, FRAC_PI_2, 0.0, FRAC_PI_6];
/// Base phases of successive Knill blocks.
pub const KDD_BLOCK_PHASES: [f64; 2] = [0.0, FRAC_PI_2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Pulse {
    /// Instantaneous rotation by `angle` about the axis at `phase` in the xy plane.
    Rotation { angle: f64, phase: f64 },
    /// Stark beam on, µs.
    Stark { duration: f64 },
    /// Free evolution with the Stark beam off, µs.
    Delay { duration: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decoupling {
    /// Plain Ramsey: one Stark window, no refocusing.
    None,
    SpinEcho,
    /// Knill decoupling; falls back to a spin echo when the probe is
    /// shorter than the gap limit.
    Kdd,
}

/// Pulses between the preparation and the analysis π/2 pulses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sequence {
    pub pulses: Vec<Pulse>,
    pub decoupling: Decoupling,
    pub stark_time: f64,
}

/// Toggling-frame summary of a sequence of ideal pulses: the phase before
/// the analysis pulse is `stark_weight·δ + static_weight·δ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompiledSequence {
    pub stark_weight: f64,
    pub static_weight: f64,
    /// Net rotation of all pulses at zero detuning.
    #[serde(skip)]
    pub(crate) net: Mat2,
}

impl CompiledSequence {
    pub fn phase(&self, delta: f64, detuning: f64) -> f64 {
        self.stark_weight * delta + self.static_weight * detuning
    }

    pub fn probability(&self, delta: f64, detuning: f64, phi: f64) -> f64 {
        convention_probability(self.phase(delta, detuning), phi)
    }

    /// Phase of the physical analysis pulse for basis `phi`, compensating
    /// the net rotation of the refocusing pulses.
    pub fn analysis_phase(&self, phi: f64) -> f64 {
        let psi = analysis_phase(phi);
        let u = &self.net;
        if u[0][0].norm() >= u[0][1].norm() {
            // diagonal: a z rotation
            psi - (u[0][0] / u[1][1]).arg()
        } else {
            (-u[1][0] / u[0][1]).arg() - psi
        }
    }
}

impl Sequence {
    pub fn pi_count(&self) -> usize {
        self.pulses.iter().filter(|p| matches!(p, Pulse::Rotation { .. })).count()
    }

    pub fn duration(&self) -> f64 {
        self.pulses
            .iter()
            .map(|p| match p {
                Pulse::Stark { duration } | Pulse::Delay { duration } => *duration,
                Pulse::Rotation { .. } => 0.0,
            })
            .sum()
    }

    /// Longest free interval between two consecutive rotations.
    pub fn max_gap(&self) -> f64 {
        let mut gap = 0.0f64;
        let mut current = 0.0;
        let mut seen = false;
        for p in &self.pulses {
            match p {
                Pulse::Rotation { .. } => {
                    if seen {
                        gap = gap.max(current);
                    }
                    seen = true;
                    current = 0.0;
                }
                Pulse::Stark { duration } | Pulse::Delay { duration } => current += duration,
            }
        }
        gap
    }

    /// State after preparation and every pulse, before analysis.
    pub fn evolve(&self, delta: f64, detuning: f64) -> QubitState {
        let mut s = QubitState::prepared();
        for p in &self.pulses {
            s = match *p {
                Pulse::Rotation { angle, phase } => apply_rotation(&s, angle, phase),
                Pulse::Stark { duration } => free_evolve(&s, duration, delta + detuning),
                Pulse::Delay { duration } => free_evolve(&s, duration, detuning),
            };
        }
        s
    }

    /// Every rotation is taken to be a π pulse about an axis in the xy
    /// plane, which flips the sign of later phase accumulation.
    pub fn compile(&self) -> CompiledSequence {
        let mut sign = 1.0;
        let (mut stark, mut stat) = (0.0, 0.0);
        let mut net = IDENTITY;
        for p in &self.pulses {
            match *p {
                Pulse::Rotation { angle, phase } => {
                    net = mat_mul(&rotation_matrix(angle, phase), &net);
                    if (angle.rem_euclid(2.0 * PI) - PI).abs() < 1e-12 {
                        sign = -sign;
                    }
                }
                Pulse::Stark { duration } => {
                    stark += sign * duration;
                    stat += sign * duration;
                }
                Pulse::Delay { duration } => stat += sign * duration,
            }
        }
        CompiledSequence {
            stark_weight: stark,
            static_weight: stat,
            net,
        }
    }

    /// Outcome-1 probability by explicit pulse-by-pulse evolution.
    pub fn probability(&self, delta: f64, detuning: f64, phi: f64) -> f64 {
        let psi = self.compile().analysis_phase(phi);
        apply_rotation(&self.evolve(delta, detuning), FRAC_PI_2, psi).excited_population()
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>12}  {:<8}  {:>12}  {:>8}", "t_us", "pulse", "duration_us", "phase")?;
        let mut t = 0.0;
        for p in &self.pulses {
            match p {
                Pulse::Rotation { angle, phase } => {
                    let name = if (angle - PI).abs() < 1e-12 { "pi".to_string() } else { format!("{angle:.4}") };
                    writeln!(f, "{t:>12.3}  {name:<8}  {:>12}  {phase:>8.4}", "-")?;
                }
                Pulse::Stark { duration } => {
                    writeln!(f, "{t:>12.3}  {:<8}  {duration:>12.3}  {:>8}", "stark", "-")?;
                    t += duration;
                }
                Pulse::Delay { duration } => {
                    writeln!(f, "{t:>12.3}  {:<8}  {duration:>12.3}  {:>8}", "delay", "-")?;
                    t += duration;
                }
            }
        }
        Ok(())
    }
}

/// Sequence probing a Stark window of total length `tau` µs with no free
/// interval between π pulses longer than `max_gap` µs.
pub fn build_sequence(tau: f64, max_gap: f64, mode: Decoupling) -> Result<Sequence> {
    if !(tau > 0.0) {
        return Err(Error::invalid("tau", format!("{tau} must be positive")));
    }
    if !(max_gap > 0.0) {
        return Err(Error::invalid("max_gap", format!("{max_gap} must be positive")));
    }
    let pi = |phase| Pulse::Rotation { angle: PI, phase };
    let pulses = match mode {
        Decoupling::None => vec![Pulse::Stark { duration: tau }],
        Decoupling::SpinEcho => vec![Pulse::Stark { duration: tau }, pi(0.0), Pulse::Delay { duration: tau }],
        Decoupling::Kdd if tau < max_gap => {
            return build_sequence(tau, max_gap, Decoupling::SpinEcho).map(|s| Sequence {
                decoupling: Decoupling::Kdd,
                ..s
            })
        }
        Decoupling::Kdd => {
            // P = 5·blocks pulses split the probe into P + 1 intervals;
            // Stark windows fill the even (unflipped) ones, delays the odd.
            let intervals = |blocks: usize| {
                let p = 5 * blocks;
                (p / 2 + 1, p.div_ceil(2))
            };
            let mut blocks = 1;
            loop {
                let (plus, minus) = intervals(blocks);
                if tau / plus as f64 <= max_gap && tau / minus as f64 <= max_gap {
                    break;
                }
                blocks += 1;
            }
            let (plus, minus) = intervals(blocks);
            let (ds, dd) = (tau / plus as f64, tau / minus as f64);
            let n = 5 * blocks;
            let mut v = Vec::with_capacity(2 * n + 1);
            for k in 0..=n {
                v.push(if k % 2 == 0 {
                    Pulse::Stark { duration: ds }
                } else {
                    Pulse::Delay { duration: dd }
                });
                if k < n {
                    v.push(pi(KDD_PHASES[k % 5] + KDD_BLOCK_PHASES[(k / 5) % 2]));
                }
            }
            v
        }
    };
    Ok(Sequence {
        pulses,
        decoupling: mode,
        stark_time: tau,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn same_rotation(a: &Mat2, b: &Mat2) -> bool {
        let mut tr = Complex64::new(0.0, 0.0);
        for i in 0..2 {
            for j in 0..2 {
                tr += a[i][j].conj() * b[i][j];
            }
        }
        (tr.norm() - 2.0).abs() < 1e-9
    }

    #[test]
    fn short_probe_uses_one_echo_pulse() {
        let s = build_sequence(100.0, 500.0, Decoupling::Kdd).unwrap();
        assert_eq!(s.pi_count(), 1);
    }

    #[test]
    fn long_probe_respects_the_gap() {
        for tau in [500.0, 999.0, 4000.0, 12345.0] {
            let s = build_sequence(tau, 500.0, Decoupling::Kdd).unwrap();
            assert!(s.max_gap() <= 500.0 + 1e-9, "{tau}: {}", s.max_gap());
            assert_eq!(s.pi_count() % 5, 0);
            let fewer = 5 * (s.pi_count() / 5 - 1);
            if fewer > 0 {
                // one block fewer would break the limit
                let (plus, minus) = (fewer / 2 + 1, fewer.div_ceil(2));
                assert!(tau / plus as f64 > 500.0 || tau / minus as f64 > 500.0);
            }
        }
    }

    #[test]
    fn stark_phase_is_sign_coherent() {
        for mode in [Decoupling::None, Decoupling::SpinEcho, Decoupling::Kdd] {
            for tau in [50.0, 4000.0] {
                let c = build_sequence(tau, 500.0, mode).unwrap().compile();
                assert!((c.stark_weight - tau).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn stepwise_and_compiled_agree() {
        for mode in [Decoupling::None, Decoupling::SpinEcho, Decoupling::Kdd] {
            for tau in [30.0, 700.0, 4000.0] {
                let s = build_sequence(tau, 500.0, mode).unwrap();
                let c = s.compile();
                for &(d, d0) in &[(0.0, 0.0), (1e-3, 0.0), (2.1e-3, 4e-4), (-7e-4, 1e-3)] {
                    for phi in [0.0, FRAC_PI_2, PI, 1.5 * PI] {
                        let a = s.probability(d, d0, phi);
                        let b = c.probability(d, d0, phi);
                        assert!((a - b).abs() < 1e-12, "{mode:?} {tau} {d} {d0} {phi}: {a} vs {b}");
                    }
                }
                assert!((s.evolve(1e-3, 2e-4).norm() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_shift_matches_the_reference() {
        for mode in [Decoupling::SpinEcho, Decoupling::Kdd] {
            let s = build_sequence(4000.0, 500.0, mode).unwrap();
            for phi in [0.0, FRAC_PI_2, PI, 1.5 * PI] {
                assert!((s.probability(0.0, 0.0, phi) - convention_probability(0.0, phi)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn echo_cancels_static_detuning() {
        let s = build_sequence(200.0, 500.0, Decoupling::SpinEcho).unwrap();
        let reference = s.probability(3e-3, 0.0, 0.0);
        for d0 in [-0.05, 1e-3, 0.7] {
            assert!((s.probability(3e-3, d0, 0.0) - reference).abs() < 1e-9);
        }
        let k = build_sequence(4000.0, 500.0, Decoupling::Kdd).unwrap();
        assert!(k.compile().static_weight.abs() < 1e-9);
    }

    #[test]
    fn knill_block_is_a_pi_rotation() {
        let mut net = IDENTITY;
        for &p in &KDD_PHASES {
            net = mat_mul(&rotation_matrix(PI, p), &net);
        }
        // alternating phase sum π/6 − 0 + π/2 − 0 + π/6
        assert!(same_rotation(&net, &rotation_matrix(PI, 5.0 * FRAC_PI_6)));
    }

    #[test]
    fn table_lists_every_pulse() {
        let s = build_sequence(100.0, 500.0, Decoupling::SpinEcho).unwrap();
        assert_eq!(s.to_string().lines().count(), 1 + s.pulses.len());
    }
}
