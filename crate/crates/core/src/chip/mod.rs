//! Refractive-index synthesis for multiscan and conventional waveguides,
//! input tapers and the fan-in routing of the chip.

mod cross_section;
mod layout;
mod profile;
mod reduce;
mod taper;

pub use cross_section::{
    build_cross_section, circular_step_profile, conventional_cross_section, smf_profile, window_for,
    ChannelCrossSection, ScanSpec, CONVENTIONAL_CONTRAST, CONVENTIONAL_SIGMA_UM, DEFAULT_SIGMA_X_UM,
    DEFAULT_SIGMA_Y_UM, INPUT_OUTER_SCAN_FRACTION, MAX_SCAN_DELTA_N, N_CLAD, SCAN_SEPARATION_UM,
    SMF_CORE_DIAMETER_UM, SMF_N_CLAD, SMF_N_CORE, SPIM_CONTRAST,
};
pub use layout::{channel_path, paths_disjoint, ChannelPath, ChipLayout};
pub use profile::{Grid1, Grid2, RiProfile1, RiProfile2};
pub use reduce::effective_index_reduce;
pub use taper::{taper_profile, Interpolation, TaperSpec};
