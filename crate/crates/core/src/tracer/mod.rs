//! Branch tracking with oriented VOIs.

mod placement;
mod surface;
mod trace;
mod tree;

pub use placement::{extend_voi, size_voi, VoiSizing};
pub use surface::{
    detect_leak, surface_exit_components, surface_ratio, surface_voxel_count, ExitComponent, Face, LeakParams,
    LeakReason, LeakVerdict, Plane, MIN_EXIT_VOXELS,
};
pub use trace::{inspect_voi, reconstruct, trace, VoiInspection};
pub use tree::{AirwayTree, BranchRecord, BranchStatus, TracedVoi};
