//! Point-cloud files, scene manifests, images and ego-motion compensation.

mod format;
mod manifest;
mod motion;
mod ppm;

pub use format::{
    decode_cloud, encode_cloud, encode_lidar, encode_radar, read_cloud, read_lidar, read_radar, seconds_to_ticks,
    write_cloud, Cloud, LabeledCloud, LidarPoint, RadarCloud, RadarPoint, Schema, CLOUD_MAGIC, CLOUD_VERSION,
    HEADER_LEN, RECORD_LEN, TICK,
};
pub use manifest::{
    default_class_names, Extrinsics, FrameRecord, SceneManifest, DEFAULT_SWEEP_PERIOD, MANIFEST_VERSION,
};
pub use motion::{compensate_ego_motion, compensate_radar, SweepMotion};
pub use ppm::{read_pgm, read_ppm, write_pgm, write_ppm};
