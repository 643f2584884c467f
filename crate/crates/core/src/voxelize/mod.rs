//! Histogram binning, free-space carving, label resolution, lonely-voxel
//! refinement and camera field-of-view masking.

mod histogram;
mod io;
mod occupancy;

pub use histogram::{bin_cloud, bin_points, carve_free, VoxelHistogramGrid};
pub use io::{
    decode_mask, decode_occupancy, encode_mask, encode_occupancy, read_mask, read_occupancy, write_mask,
    write_occupancy, write_ply, FOVM_MAGIC, GRID_HEADER_LEN, GRID_VERSION, OCCG_MAGIC,
};
pub use occupancy::{fov_mask, majority_class, refine_lonely, resolve_labels, FovMask, OccupancyGrid, Resolved};
