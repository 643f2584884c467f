use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{analytic_occupancy, cast_ray, simulate_lidar, simulate_radar, BeamPattern, ScenePrimitive};
use crate::classes::{CAR, CLASS_COLORS, DRIVEABLE_SURFACE, MANMADE, PEDESTRIAN, TRUCK};
use crate::cloudio::{write_cloud, write_ppm, Cloud, Extrinsics, FrameRecord, SceneManifest};
use crate::depthassoc::{WORKING_HEIGHT, WORKING_WIDTH};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, GridSpec, Pose};
use crate::par;
use crate::voxelize::write_occupancy;

pub const SCENARIO_NAMES: [&str; 3] = ["static-street", "moving-box", "crossing-pedestrian"];

/// Gap between box faces and the voxel boundaries they are laid out on, so
/// surface returns never land on a cell face.
const INSET: f64 = 0.02;
const SKY: [u8; 3] = [135, 206, 235];

/// Straight-line ego motion without rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoTrack {
    pub start: Vector3<f64>,
    pub velocity: Vector3<f64>,
}

impl EgoTrack {
    pub fn pose_at(&self, t: f64) -> Pose {
        Pose::from_translation(self.start + self.velocity * t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub primitives: Vec<ScenePrimitive>,
    pub ego: EgoTrack,
    pub frames: usize,
    /// Seconds between frames.
    pub dt: f64,
    pub key_frames: Vec<usize>,
    pub extrinsics: Extrinsics,
    /// Native camera model; images are rendered at `image_size`.
    pub intrinsics: CameraIntrinsics,
    pub image_size: (u32, u32),
    pub beams: BeamPattern,
    pub radar_detections: usize,
    pub radar_sigma: f64,
}

/// Box spanning voxel-aligned bounds, shrunk by the inset on every face.
fn aligned(min: [f64; 3], max: [f64; 3], class: u8) -> ScenePrimitive {
    let d = Vector3::repeat(INSET);
    ScenePrimitive::cuboid(Vector3::from(min) + d, Vector3::from(max) - d, class).expect("valid scenario box")
}

impl Scenario {
    pub fn builtin(name: &str) -> Result<Self> {
        let ground = ScenePrimitive::ground(-0.6 - INSET, DRIVEABLE_SURFACE)?;
        let driving = EgoTrack { start: Vector3::zeros(), velocity: Vector3::new(4.0, 0.0, 0.0) };
        let (primitives, ego) = match name {
            "static-street" => (
                vec![
                    ground,
                    aligned([-16.0, 8.0, -0.6], [4.0, 12.0, 8.0], MANMADE),
                    aligned([6.0, 8.0, -0.6], [22.0, 14.0, 6.0], MANMADE),
                    aligned([-10.0, -14.0, -0.6], [26.0, -9.2, 10.0], MANMADE),
                    aligned([30.0, -20.0, -0.6], [31.2, 20.0, 4.0], MANMADE),
                ],
                driving,
            ),
            "moving-box" => (
                vec![
                    ground,
                    aligned([-10.0, -14.0, -0.6], [26.0, -9.2, 8.0], MANMADE),
                    aligned([14.0, 4.0, -0.6], [22.0, 6.4, 2.6], TRUCK),
                    aligned([30.0, -4.0, -0.6], [34.4, -2.0, 1.0], CAR).moving(Vector3::new(-8.0, 0.0, 0.0))?,
                ],
                EgoTrack { start: Vector3::zeros(), velocity: Vector3::zeros() },
            ),
            "crossing-pedestrian" => (
                vec![
                    ground,
                    aligned([-8.0, 9.2, -0.6], [30.0, 10.0, 3.0], MANMADE),
                    aligned([12.0, -6.0, -0.6], [12.4, -5.6, 1.4], PEDESTRIAN).moving(Vector3::new(0.0, 2.0, 0.0))?,
                ],
                driving,
            ),
            other => {
                return Err(Error::config(
                    "scenario",
                    format!("unknown scenario {other:?}; expected one of {}", SCENARIO_NAMES.join(", ")),
                ))
            }
        };
        Ok(Self {
            name: name.to_string(),
            primitives,
            ego,
            frames: 16,
            dt: 0.1,
            key_frames: vec![2, 6, 10, 14],
            extrinsics: Extrinsics {
                lidar_to_ego: Pose::from_translation(Vector3::new(0.2, 0.2, 1.2)),
                radar_to_ego: Pose::from_translation(Vector3::new(2.0, 0.0, 0.5)),
                camera_to_ego: Pose::forward_camera(Vector3::new(1.0, 0.0, 1.5)),
            },
            intrinsics: CameraIntrinsics::from_fov(1936, 1216, 64.0, 44.0)?,
            image_size: (WORKING_WIDTH, WORKING_HEIGHT),
            beams: BeamPattern::default(),
            radar_detections: 24,
            radar_sigma: 0.05,
        })
    }

    pub fn time(&self, frame: usize) -> f64 {
        frame as f64 * self.dt
    }

    pub fn ego_pose(&self, frame: usize) -> Pose {
        self.ego.pose_at(self.time(frame))
    }

    /// Exact labels for a key frame in that frame's ego coordinates.
    pub fn ground_truth(&self, frame: usize, spec: &GridSpec) -> crate::voxelize::OccupancyGrid {
        analytic_occupancy(&self.primitives, spec, self.time(frame), &self.ego_pose(frame))
    }

    /// Pinhole render of class colors with distance shading.
    pub fn render(&self, frame: usize) -> Result<RgbImage> {
        let (w, h) = self.image_size;
        let k = self.intrinsics.resized(w, h)?;
        let t = self.time(frame);
        let cam = self.ego_pose(frame).compose(&self.extrinsics.camera_to_ego);
        let origin = *cam.translation();
        let rows = par::map_range(h as usize, |row| {
            (0..w)
                .map(|col| {
                    let d = cam.transform_vector(&k.unproject(col as f64, row as f64, 1.0).normalize());
                    match cast_ray(&self.primitives, &origin, &d, t) {
                        Some((s, i)) => {
                            let shade = 1.0 / (1.0 + s / 80.0);
                            CLASS_COLORS[self.primitives[i].class as usize].map(|c| (c as f64 * shade).round() as u8)
                        }
                        None => SKY,
                    }
                })
                .collect::<Vec<_>>()
        });
        Ok(RgbImage::from_fn(w, h, |x, y| Rgb(rows[y as usize][x as usize])))
    }
}

fn file_name(dir: &str, frame: usize, ext: &str) -> PathBuf {
    PathBuf::from(dir).join(format!("{frame:06}.{ext}"))
}

fn mkdir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Writes manifest, clouds, images and ground-truth grids under `out`.
/// Radar noise for frame `i` comes from stream `i` of a generator seeded with `seed`.
pub fn generate_scene(scn: &Scenario, seed: u64, grid: &GridSpec, out: &Path) -> Result<SceneManifest> {
    scn.beams.validate()?;
    for sub in ["lidar", "radar", "image", "gt"] {
        mkdir(&out.join(sub))?;
    }
    let radar_to_world = |i: usize| scn.ego_pose(i).compose(&scn.extrinsics.radar_to_ego);
    let records = par::map_range(scn.frames, |i| -> Result<FrameRecord> {
        let t = scn.time(i);
        let ego = scn.ego_pose(i);
        let lidar = simulate_lidar(&scn.primitives, t, &ego.compose(&scn.extrinsics.lidar_to_ego), &scn.beams);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let radar =
            simulate_radar(&scn.primitives, t, &radar_to_world(i), scn.radar_detections, scn.radar_sigma, &mut rng)?;
        let (lp, rp, ip) = (file_name("lidar", i, "ocpc"), file_name("radar", i, "ocpc"), file_name("image", i, "ppm"));
        write_cloud(out.join(&lp), &Cloud::Lidar(lidar))?;
        write_cloud(out.join(&rp), &Cloud::Radar(radar))?;
        write_ppm(out.join(&ip), &scn.render(i)?)?;
        let is_key = scn.key_frames.contains(&i);
        if is_key {
            write_occupancy(out.join("gt").join(format!("frame_{i:06}.occg")), &scn.ground_truth(i, grid))?;
        }
        Ok(FrameRecord {
            frame_id: i as u64,
            timestamp: t,
            ego_pose: ego,
            lidar: Some(lp),
            radar: Some(rp),
            image: Some(ip),
            is_key,
        })
    });
    let frames = records.into_iter().collect::<Result<Vec<_>>>()?;
    let mut m = SceneManifest::new(scn.extrinsics, scn.intrinsics, *grid, frames);
    m.name = scn.name.clone();
    m.seed = Some(seed);
    m.save(out.join("manifest.json"))?;
    m.set_base_dir(out);
    Ok(m)
}
