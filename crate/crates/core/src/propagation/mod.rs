//! Paraxial beam propagation in (x, z) over effective-index profiles.

mod bpm;
mod chip;
mod devices;

pub use bpm::{
    mode_on_grid, propagate, propagate_invariant, Absorber, BpmOptions, PropagationResult, MAX_STEP_PHASE,
};
pub use chip::{chip_crosstalk_scan, ChipCrosstalk, ChipDesign};
pub use devices::{
    bend_transmission, bend_transmission_with, coupler_crosstalk, coupler_crosstalk_with, taper_transmission,
    taper_transmission_with, ReducedGuide, BPM_DX,
};
