//! Baseline interpolators: sliding-window averaging and thin-plate splines.

mod boxcar;
mod thin_plate;

pub use boxcar::{boxcar_reconstruct, BoxcarConfig, RangeAdjust};
pub use thin_plate::{
    default_smoothing, mean_nearest_neighbor_spacing, thin_plate_reconstruct, tps_kernel,
    ThinPlateConfig, ThinPlateSpline,
};
