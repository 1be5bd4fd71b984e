//! Scalar finite-difference eigenmodes, mode sizes and overlaps.

mod coupling;
mod cutoff;
mod field;
mod solver;

pub use coupling::{chip_mode, fiber_mode, vga_coupling_mc, CouplingReport, COUPLING_DX, VGA_OFFSET_BOUNDS};
pub use cutoff::{lp_mode_count, single_mode_cutoff, single_mode_cutoff_with, RadialGrid};
pub use field::{mfd, overlap_efficiency, ModeField, ModeSummary};
pub use solver::{
    count_guided_modes, count_guided_modes_1d, solve_modes, solve_modes_1d, solve_modes_1d_with,
    solve_modes_with, SolverOptions,
};
