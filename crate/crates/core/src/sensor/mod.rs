//! Single-ion AC Stark shift sensing: ideal pulse algebra, decoupled
//! probe sequences, robust phase estimation, ion scans and the
//! neighbour gate-error model.
//!
//! Stark shifts are in rad/µs, times in µs. Readout follows
//! `p₁(φ) = (1 + sin(θ − φ))/2` for an accumulated phase θ.

mod gate_error;
mod rpe;
mod scan;
mod sequence;
mod state;

pub use gate_error::{neighbor_error, pulse_error, AddressingMode};
pub use rpe::{
    contrast, rpe_estimate, ExactOracle, Generation, NoiseModel, Oracle, RpeConfig, RpeResult, SampledOracle,
    DEFAULT_MAX_GAP_US, DEFAULT_POWER_FLOOR, MEASUREMENT_PHASES,
};
pub use scan::{scan_ion, BeamMap, ChannelScan, NeighbourRatio, PointEstimate, ScanConfig, ScanMeasurement};
pub use sequence::{build_sequence, CompiledSequence, Decoupling, Pulse, Sequence, KDD_BLOCK_PHASES, KDD_PHASES};
pub use state::{analysis_phase, apply_rotation, convention_probability, free_evolve, measure, QubitState};
