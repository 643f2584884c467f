use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classes::{CLASS_NAMES, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, GridSpec, Pose};

pub const MANIFEST_VERSION: u32 = 1;

/// Ouster-class lidar at 20 Hz.
pub const DEFAULT_SWEEP_PERIOD: f64 = 0.05;

/// Sensor-to-ego mounting poses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrinsics {
    pub lidar_to_ego: Pose,
    pub radar_to_ego: Pose,
    pub camera_to_ego: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: u64,
    /// Seconds.
    pub timestamp: f64,
    /// Ego-to-world pose at `timestamp`.
    pub ego_pose: Pose,
    /// Paths are relative to the manifest's directory.
    pub lidar: Option<PathBuf>,
    pub radar: Option<PathBuf>,
    pub image: Option<PathBuf>,
    #[serde(default)]
    pub is_key: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    /// Generator seed for synthetic scenes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_sweep_period")]
    pub sweep_period: f64,
    pub extrinsics: Extrinsics,
    /// Native-resolution intrinsics of the front camera.
    pub intrinsics: CameraIntrinsics,
    pub grid: GridSpec,
    pub classes: Vec<String>,
    pub frames: Vec<FrameRecord>,
    #[serde(skip)]
    base_dir: PathBuf,
}

fn default_sweep_period() -> f64 {
    DEFAULT_SWEEP_PERIOD
}

pub fn default_class_names() -> Vec<String> {
    CLASS_NAMES.iter().map(|s| s.to_string()).collect()
}

impl SceneManifest {
    pub fn new(extrinsics: Extrinsics, intrinsics: CameraIntrinsics, grid: GridSpec, frames: Vec<FrameRecord>) -> Self {
        Self {
            version: MANIFEST_VERSION,
            name: String::new(),
            seed: None,
            sweep_period: DEFAULT_SWEEP_PERIOD,
            extrinsics,
            intrinsics,
            grid,
            classes: default_class_names(),
            frames,
            base_dir: PathBuf::new(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: SceneManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Manifest { path: path.to_path_buf(), reason: e.to_string() })?;
        m.validate().map_err(|reason| Error::Manifest { path: path.to_path_buf(), reason })?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Internal(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.version != MANIFEST_VERSION {
            return Err(format!("unsupported manifest version {}", self.version));
        }
        if self.classes.len() != NUM_CLASSES {
            return Err(format!("expected {NUM_CLASSES} class names, found {}", self.classes.len()));
        }
        if self.classes[NUM_CLASSES - 1] != "free" {
            return Err(format!("class 17 must be named \"free\", found {:?}", self.classes[17]));
        }
        if !(self.sweep_period > 0.0) {
            return Err(format!("sweep_period must be positive, got {}", self.sweep_period));
        }
        let mut ids = BTreeSet::new();
        for f in &self.frames {
            if !ids.insert(f.frame_id) {
                return Err(format!("duplicate frame id {}", f.frame_id));
            }
            if !f.timestamp.is_finite() {
                return Err(format!("frame {} has a non-finite timestamp", f.frame_id));
            }
        }
        for w in self.frames.windows(2) {
            if !(w[1].timestamp > w[0].timestamp) {
                return Err(format!(
                    "timestamps must increase: frame {} ({}) follows frame {} ({})",
                    w[1].frame_id, w[1].timestamp, w[0].frame_id, w[0].timestamp
                ));
            }
        }
        Ok(())
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn set_base_dir(&mut self, dir: impl Into<PathBuf>) {
        self.base_dir = dir.into();
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.base_dir.join(rel)
    }

    pub fn frame_position(&self, frame_id: u64) -> Option<usize> {
        self.frames.iter().position(|f| f.frame_id == frame_id)
    }

    pub fn frame(&self, frame_id: u64) -> Option<&FrameRecord> {
        self.frames.iter().find(|f| f.frame_id == frame_id)
    }

    pub fn key_frames(&self) -> impl Iterator<Item = &FrameRecord> {
        self.frames.iter().filter(|f| f.is_key)
    }

    /// Lidar-to-world pose of a frame.
    pub fn lidar_to_world(&self, frame: &FrameRecord) -> Pose {
        frame.ego_pose.compose(&self.extrinsics.lidar_to_ego)
    }

    pub fn radar_to_camera(&self) -> Pose {
        self.extrinsics.camera_to_ego.inverse().compose(&self.extrinsics.radar_to_ego)
    }

    pub fn lidar_to_camera(&self) -> Pose {
        self.extrinsics.camera_to_ego.inverse().compose(&self.extrinsics.lidar_to_ego)
    }
}
