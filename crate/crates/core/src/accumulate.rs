//! Multi-frame scene assembly around a key frame.
//!
//! Static points are gathered from every frame in the window; dynamic points
//! come from the key frame alone. Everything is moved into the world frame and
//! tagged with the frame it came from so free-space carving can use the right
//! sensor origin.

use std::collections::BTreeSet;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::classes::{DEFAULT_DYNAMIC, NUM_SEMANTIC};
use crate::cloudio::{read_lidar, LabeledCloud, SceneManifest, SweepMotion};
use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::par;

pub const DEFAULT_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AccumulationConfig {
    /// Frames taken before and after the key frame.
    pub window: usize,
    pub dynamic_classes: BTreeSet<u8>,
    /// Undo intra-sweep ego motion using per-point time offsets.
    pub compensate_motion: bool,
}

impl Default for AccumulationConfig {
    fn default() -> Self {
        Self { window: DEFAULT_WINDOW, dynamic_classes: DEFAULT_DYNAMIC.into_iter().collect(), compensate_motion: true }
    }
}

impl AccumulationConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(bad) = self.dynamic_classes.iter().find(|&&c| c as usize >= NUM_SEMANTIC) {
            return Err(Error::config("dynamic_classes", format!("class {bad} is not a semantic class (0..=16)")));
        }
        Ok(())
    }

    fn is_dynamic(&self, label: u8) -> bool {
        self.dynamic_classes.contains(&label)
    }
}

/// Partitions a cloud by membership of each label in the dynamic set.
/// Returns `(dynamic, static)`, each preserving input order.
pub fn split_dynamic(cloud: &LabeledCloud, cfg: &AccumulationConfig) -> (LabeledCloud, LabeledCloud) {
    let (dynamic, stat): (Vec<_>, Vec<_>) = cloud.points.iter().partition(|p| cfg.is_dynamic(p.label));
    (LabeledCloud::new(dynamic), LabeledCloud::new(stat))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldPoint {
    pub position: Vector3<f64>,
    pub label: u8,
    /// Index into [`AssembledScene::origins`].
    pub source: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorOrigin {
    pub frame_id: u64,
    pub position: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledScene {
    pub key_frame: u64,
    /// Ego-to-world pose of the key frame.
    pub key_ego_pose: Pose,
    /// Ordered by (frame, point index).
    pub points: Vec<WorldPoint>,
    /// One lidar origin per contributing frame, in frame order.
    pub origins: Vec<SensorOrigin>,
    pub static_points: usize,
    pub dynamic_points: usize,
}

impl AssembledScene {
    /// Same scene expressed in the frame given by `world_to_target`.
    pub fn transformed(&self, world_to_target: &Pose) -> AssembledScene {
        AssembledScene {
            points: self
                .points
                .iter()
                .map(|p| WorldPoint { position: world_to_target.transform_point(&p.position), ..*p })
                .collect(),
            origins: self
                .origins
                .iter()
                .map(|o| SensorOrigin { position: world_to_target.transform_point(&o.position), ..*o })
                .collect(),
            ..self.clone()
        }
    }

    /// The scene in the key frame's ego coordinates, where the label grid lives.
    pub fn in_key_ego_frame(&self) -> AssembledScene {
        self.transformed(&self.key_ego_pose.inverse())
    }
}

/// Gathers the window around `key_frame` into one world-frame cloud.
pub fn assemble_scene(manifest: &SceneManifest, key_frame: u64, cfg: &AccumulationConfig) -> Result<AssembledScene> {
    cfg.validate()?;
    let key_pos = manifest
        .frame_position(key_frame)
        .ok_or_else(|| Error::Ingest { frame: key_frame, reason: "key frame is not listed in the manifest".into() })?;
    let lo = key_pos.saturating_sub(cfg.window);
    let hi = (key_pos + cfg.window).min(manifest.frames.len() - 1);
    let positions: Vec<usize> = (lo..=hi).collect();

    let per_frame = par::map(&positions, |&pos| load_frame_points(manifest, pos, pos == key_pos, cfg));

    let mut scene = AssembledScene {
        key_frame,
        key_ego_pose: manifest.frames[key_pos].ego_pose,
        points: Vec::new(),
        origins: Vec::with_capacity(positions.len()),
        static_points: 0,
        dynamic_points: 0,
    };
    for result in per_frame {
        let frame = result?;
        let source = scene.origins.len() as u32;
        scene.origins.push(frame.origin);
        scene.static_points += frame.n_static;
        scene.dynamic_points += frame.points.len() - frame.n_static;
        scene.points.extend(frame.points.into_iter().map(|(position, label)| WorldPoint { position, label, source }));
    }
    Ok(scene)
}

struct FramePoints {
    origin: SensorOrigin,
    points: Vec<(Vector3<f64>, u8)>,
    n_static: usize,
}

fn load_frame_points(
    manifest: &SceneManifest,
    pos: usize,
    is_key: bool,
    cfg: &AccumulationConfig,
) -> Result<FramePoints> {
    let frame = &manifest.frames[pos];
    let ingest = |reason: String| Error::Ingest { frame: frame.frame_id, reason };
    let rel = frame.lidar.as_ref().ok_or_else(|| ingest("no lidar file listed".into()))?;
    let cloud = read_lidar(manifest.resolve(rel)).map_err(|e| ingest(e.to_string()))?;

    let lidar_to_world = manifest.lidar_to_world(frame);
    let motion = if cfg.compensate_motion && cloud.points.iter().any(|p| p.t_ticks != 0) {
        Some(sweep_motion(manifest, pos).map_err(|e| ingest(e.to_string()))?)
    } else {
        None
    };

    let mut points = Vec::with_capacity(cloud.len());
    let mut n_static = 0;
    for p in &cloud.points {
        let dynamic = cfg.is_dynamic(p.label);
        if dynamic && !is_key {
            continue;
        }
        let world = match &motion {
            Some(m) => m.pose_at(p.t_offset()).map_err(|e| ingest(e.to_string()))?.transform_point(&p.position()),
            None => lidar_to_world.transform_point(&p.position()),
        };
        if !dynamic {
            n_static += 1;
        }
        points.push((world, p.label));
    }
    Ok(FramePoints {
        origin: SensorOrigin { frame_id: frame.frame_id, position: *lidar_to_world.translation() },
        points,
        n_static,
    })
}

/// Lidar-to-world motion over the sweep starting at frame `pos`, from ego poses
/// interpolated (or extrapolated at the last frame) by timestamp.
fn sweep_motion(manifest: &SceneManifest, pos: usize) -> Result<SweepMotion> {
    let frames = &manifest.frames;
    let f = &frames[pos];
    let period = manifest.sweep_period;
    let end_ego = if frames.len() < 2 {
        f.ego_pose
    } else {
        let (a, b) =
            if pos + 1 < frames.len() { (&frames[pos], &frames[pos + 1]) } else { (&frames[pos - 1], &frames[pos]) };
        let s = (f.timestamp + period - a.timestamp) / (b.timestamp - a.timestamp);
        Pose::interpolate(&a.ego_pose, &b.ego_pose, s)?
    };
    let lidar = manifest.extrinsics.lidar_to_ego;
    SweepMotion::new(f.ego_pose.compose(&lidar), end_ego.compose(&lidar), period)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::{CAR, MANMADE, PEDESTRIAN};
    use crate::cloudio::LidarPoint;
    use std::collections::BTreeMap;

    fn cloud(labels: &[u8]) -> LabeledCloud {
        LabeledCloud::new(
            labels
                .iter()
                .enumerate()
                .map(|(i, &l)| LidarPoint::new(Vector3::new(i as f64, 0.0, 0.0), 0.1, l, 0.0))
                .collect(),
        )
    }

    #[test]
    fn empty_dynamic_set_keeps_everything_static() {
        let c = cloud(&[CAR, MANMADE, PEDESTRIAN]);
        let cfg = AccumulationConfig { dynamic_classes: BTreeSet::new(), ..Default::default() };
        let (d, s) = split_dynamic(&c, &cfg);
        assert!(d.is_empty());
        assert_eq!(s, c);
    }

    #[test]
    fn split_by_membership() {
        let c = cloud(&[CAR, MANMADE, PEDESTRIAN, MANMADE, CAR]);
        let cfg = AccumulationConfig { dynamic_classes: [CAR, PEDESTRIAN].into_iter().collect(), ..Default::default() };
        let (d, s) = split_dynamic(&c, &cfg);
        assert_eq!(d.points.iter().map(|p| p.label).collect::<Vec<_>>(), vec![CAR, PEDESTRIAN, CAR]);
        assert_eq!(s.points.iter().map(|p| p.label).collect::<Vec<_>>(), vec![MANMADE, MANMADE]);
    }

    #[test]
    fn default_dynamic_set_excludes_barrier() {
        let cfg = AccumulationConfig::default();
        assert!(!cfg.dynamic_classes.contains(&crate::classes::BARRIER));
        assert_eq!(cfg.dynamic_classes.len(), 8);
        assert_eq!(cfg.window, 10);
    }

    #[test]
    fn rejects_non_semantic_dynamic_class() {
        let cfg = AccumulationConfig { dynamic_classes: [17].into_iter().collect(), ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn split_is_a_multiset_partition(labels in proptest::collection::vec(0u8..17, 0..200),
                                         dyn_set in proptest::collection::btree_set(0u8..17, 0..17)) {
            let c = cloud(&labels);
            let cfg = AccumulationConfig { dynamic_classes: dyn_set.clone(), ..Default::default() };
            let (d, s) = split_dynamic(&c, &cfg);
            proptest::prop_assert_eq!(d.len() + s.len(), c.len());
            // multiset oracle keyed by exact bit patterns
            let key = |p: &LidarPoint| (p.x.to_bits(), p.label);
            let mut counts: BTreeMap<_, i64> = BTreeMap::new();
            for p in &c.points { *counts.entry(key(p)).or_default() += 1; }
            for p in d.points.iter().chain(&s.points) { *counts.entry(key(p)).or_default() -= 1; }
            proptest::prop_assert!(counts.values().all(|&v| v == 0));
            proptest::prop_assert!(d.points.iter().all(|p| dyn_set.contains(&p.label)));
            proptest::prop_assert!(s.points.iter().all(|p| !dyn_set.contains(&p.label)));
        }
    }
}
