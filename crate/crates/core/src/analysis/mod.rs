//! Exposure-stack composition, line profiles, Gaussian fitting and
//! cross-talk metrics for camera or simulated intensity data.
//!
//! Beam radii follow the 1/e² intensity convention throughout.

mod fit;
mod hdr;
mod metrics;

pub use fit::{
    line_profile, multi_gauss_fit, multi_gauss_fit_with, Axis, FitOptions, GaussFit, Peak, Profile, DEFAULT_BAND,
};
pub use hdr::{hdr_compose, hdr_compose_with, ExposureFrame, HdrImage, Image, SATURATION_FRACTION};
pub use metrics::{crosstalk_metrics, ChannelRatio, CrosstalkMetrics};
