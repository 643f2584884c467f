//! Analytic scene generator: ground planes and axis-aligned boxes, exact
//! lidar ray casting, noisy radar sampling, and exact ground-truth grids.

mod scenario;

pub use scenario::{generate_scene, EgoTrack, Scenario, SCENARIO_NAMES};

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::classes::{self, FREE};
use crate::cloudio::{LabeledCloud, LidarPoint, RadarCloud, RadarPoint};
use crate::error::{Error, Result};
use crate::geometry::{GridSpec, Pose};
use crate::par;
use crate::voxelize::OccupancyGrid;

/// Rays starting closer than this to a surface do not hit it.
const MIN_HIT: f64 = 1e-9;
const LIDAR_INTENSITY: f32 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Solid half-space below `z = height`.
    Ground { height: f64 },
    /// Box at time zero; moves with the primitive's velocity.
    Box { min: Vector3<f64>, max: Vector3<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenePrimitive {
    pub shape: Shape,
    pub class: u8,
    /// World-frame velocity in m/s. Ground planes are always static.
    #[serde(default = "Vector3::zeros")]
    pub velocity: Vector3<f64>,
}

impl ScenePrimitive {
    pub fn ground(height: f64, class: u8) -> Result<Self> {
        Self::checked(Shape::Ground { height }, class, Vector3::zeros())
    }

    pub fn cuboid(min: Vector3<f64>, max: Vector3<f64>, class: u8) -> Result<Self> {
        Self::checked(Shape::Box { min, max }, class, Vector3::zeros())
    }

    pub fn moving(self, velocity: Vector3<f64>) -> Result<Self> {
        Self::checked(self.shape, self.class, velocity)
    }

    fn checked(shape: Shape, class: u8, velocity: Vector3<f64>) -> Result<Self> {
        if !classes::is_semantic(class) {
            return Err(Error::config("class", format!("{class} is not a semantic class")));
        }
        match shape {
            Shape::Ground { height } if !height.is_finite() => {
                return Err(Error::config("height", "must be finite"));
            }
            Shape::Ground { .. } if velocity != Vector3::zeros() => {
                return Err(Error::config("velocity", "ground planes cannot move"));
            }
            Shape::Box { min, max } if !(0..3).all(|i| max[i] > min[i] && min[i].is_finite() && max[i].is_finite()) => {
                return Err(Error::config("dims", format!("box {min:?}..{max:?} has no volume")));
            }
            _ => {}
        }
        if !velocity.iter().all(|v| v.is_finite()) {
            return Err(Error::config("velocity", "must be finite"));
        }
        Ok(Self { shape, class, velocity })
    }

    /// Shape at time `t`.
    pub fn shape_at(&self, t: f64) -> Shape {
        match self.shape {
            Shape::Box { min, max } => Shape::Box { min: min + self.velocity * t, max: max + self.velocity * t },
            g => g,
        }
    }

    pub fn contains(&self, p: &Vector3<f64>, t: f64) -> bool {
        match self.shape_at(t) {
            Shape::Ground { height } => p.z < height,
            Shape::Box { min, max } => (0..3).all(|i| p[i] >= min[i] && p[i] < max[i]),
        }
    }

    /// Distance along the unit direction `dir` to the first surface crossing.
    pub fn intersect(&self, origin: &Vector3<f64>, dir: &Vector3<f64>, t: f64) -> Option<f64> {
        match self.shape_at(t) {
            Shape::Ground { height } => {
                if origin.z <= height || dir.z >= 0.0 {
                    return None;
                }
                let s = (height - origin.z) / dir.z;
                (s > MIN_HIT).then_some(s)
            }
            Shape::Box { min, max } => ray_box(origin, dir, &min, &max),
        }
    }

    /// Unsigned distance from `p` to the primitive's surface at time `t`.
    pub fn surface_residual(&self, p: &Vector3<f64>, t: f64) -> f64 {
        match self.shape_at(t) {
            Shape::Ground { height } => (p.z - height).abs(),
            Shape::Box { min, max } => {
                let outside = (0..3).map(|i| (min[i] - p[i]).max(p[i] - max[i]).max(0.0).powi(2)).sum::<f64>().sqrt();
                if outside > 0.0 {
                    outside
                } else {
                    (0..3).map(|i| (p[i] - min[i]).min(max[i] - p[i])).fold(f64::INFINITY, f64::min)
                }
            }
        }
    }
}

/// Entry distance of a ray starting outside the box.
fn ray_box(o: &Vector3<f64>, d: &Vector3<f64>, min: &Vector3<f64>, max: &Vector3<f64>) -> Option<f64> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for i in 0..3 {
        if d[i] == 0.0 {
            if o[i] < min[i] || o[i] > max[i] {
                return None;
            }
            continue;
        }
        let (a, b) = ((min[i] - o[i]) / d[i], (max[i] - o[i]) / d[i]);
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    (t0 <= t1 && t0 > MIN_HIT).then_some(t0)
}

/// Nearest hit over all primitives: (distance, primitive index).
pub fn cast_ray(prims: &[ScenePrimitive], origin: &Vector3<f64>, dir: &Vector3<f64>, t: f64) -> Option<(f64, usize)> {
    prims
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.intersect(origin, dir, t).map(|s| (s, i)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BeamPattern {
    pub rings: u32,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    pub azimuth_steps: u32,
    pub max_range: f64,
}

impl Default for BeamPattern {
    fn default() -> Self {
        Self { rings: 32, elevation_min_deg: -22.0, elevation_max_deg: 22.0, azimuth_steps: 900, max_range: 120.0 }
    }
}

impl BeamPattern {
    pub fn validate(&self) -> Result<()> {
        if self.rings == 0 || self.azimuth_steps == 0 {
            return Err(Error::config("beam_pattern", "needs at least one ring and one azimuth step"));
        }
        if !(self.elevation_min_deg <= self.elevation_max_deg) || !(self.max_range > 0.0) {
            return Err(Error::config("beam_pattern", "invalid elevation span or range"));
        }
        Ok(())
    }

    /// Unit directions in the sensor frame, ring-major.
    pub fn directions(&self) -> Vec<Vector3<f64>> {
        let mut out = Vec::with_capacity((self.rings * self.azimuth_steps) as usize);
        for r in 0..self.rings {
            let el = if self.rings == 1 {
                self.elevation_min_deg
            } else {
                self.elevation_min_deg
                    + (self.elevation_max_deg - self.elevation_min_deg) * r as f64 / (self.rings - 1) as f64
            }
            .to_radians();
            for a in 0..self.azimuth_steps {
                let az = std::f64::consts::TAU * a as f64 / self.azimuth_steps as f64;
                out.push(Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()));
            }
        }
        out
    }
}

/// A lidar return before quantization to the cloud format.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Return {
    /// World-frame hit position.
    pub world: Vector3<f64>,
    /// Sensor-frame hit position.
    pub local: Vector3<f64>,
    pub label: u8,
    pub primitive: usize,
}

/// Exact returns for every beam that hits something within range.
pub fn lidar_returns(prims: &[ScenePrimitive], t: f64, sensor_to_world: &Pose, pattern: &BeamPattern) -> Vec<Return> {
    let origin = *sensor_to_world.translation();
    let dirs = pattern.directions();
    par::map(&dirs, |d| {
        let wd = sensor_to_world.transform_vector(d);
        cast_ray(prims, &origin, &wd, t).filter(|(s, _)| *s <= pattern.max_range).map(|(s, i)| Return {
            world: origin + wd * s,
            local: d * s,
            label: prims[i].class,
            primitive: i,
        })
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Sensor-frame labeled cloud captured instantaneously at time `t`.
pub fn simulate_lidar(prims: &[ScenePrimitive], t: f64, sensor_to_world: &Pose, pattern: &BeamPattern) -> LabeledCloud {
    LabeledCloud::new(
        lidar_returns(prims, t, sensor_to_world, pattern)
            .into_iter()
            .map(|r| LidarPoint::new(r.local, LIDAR_INTENSITY, r.label, 0.0))
            .collect(),
    )
}

/// Nominal radar cross-section in dBsm by class.
pub fn class_rcs(class: u8) -> f32 {
    match class {
        classes::BUS | classes::TRUCK | classes::TRAILER | classes::CONSTRUCTION_VEHICLE => 20.0,
        classes::CAR => 10.0,
        classes::MOTORCYCLE => 3.0,
        classes::BICYCLE => 0.0,
        classes::PEDESTRIAN => -5.0,
        classes::BARRIER | classes::TRAFFIC_CONE => 2.0,
        classes::MANMADE => 15.0,
        classes::VEGETATION => -2.0,
        _ => -10.0,
    }
}

const FACE_ATTEMPTS: usize = 50;

/// Up to `detections_per_object` visible surface samples per box with Gaussian
/// position noise, in the sensor frame. Ground planes produce no detections.
pub fn simulate_radar<R: Rng + ?Sized>(
    prims: &[ScenePrimitive],
    t: f64,
    sensor_to_world: &Pose,
    detections_per_object: usize,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<RadarCloud> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::config("noise_sigma", format!("{noise_sigma} must be finite and nonnegative")));
    }
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::config("noise_sigma", e.to_string()))?;
    let origin = *sensor_to_world.translation();
    let world_to_sensor = sensor_to_world.inverse();
    let mut points = Vec::new();
    for (idx, prim) in prims.iter().enumerate() {
        let Shape::Box { min, max } = prim.shape_at(t) else { continue };
        let faces = visible_faces(&origin, &min, &max);
        if faces.is_empty() {
            continue;
        }
        let total_area: f64 = faces.iter().map(|f| f.area).sum();
        let mut accepted = 0;
        for _ in 0..detections_per_object * FACE_ATTEMPTS {
            if accepted == detections_per_object {
                break;
            }
            let mut pick = rng.random::<f64>() * total_area;
            let face = faces
                .iter()
                .find(|f| {
                    pick -= f.area;
                    pick < 0.0
                })
                .unwrap_or(faces.last().unwrap());
            let mut p = Vector3::zeros();
            p[face.axis] = face.value;
            for k in 0..3 {
                if k != face.axis {
                    p[k] = min[k] + rng.random::<f64>() * (max[k] - min[k]);
                }
            }
            let to = p - origin;
            let dist = to.norm();
            let dir = to / dist;
            match cast_ray(prims, &origin, &dir, t) {
                Some((s, i)) if i == idx && (s - dist).abs() <= 1e-9 * dist.max(1.0) => {}
                _ => continue,
            }
            accepted += 1;
            let jitter = Vector3::from_fn(|_, _| noise.sample(rng));
            let local = world_to_sensor.transform_point(&(p + jitter));
            points.push(RadarPoint {
                x: local.x as f32,
                y: local.y as f32,
                z: local.z as f32,
                velocity: prim.velocity.dot(&dir) as f32,
                rcs: class_rcs(prim.class),
                confidence: 1.0,
            });
        }
    }
    Ok(RadarCloud::new(points))
}

struct Face {
    axis: usize,
    value: f64,
    area: f64,
}

fn visible_faces(o: &Vector3<f64>, min: &Vector3<f64>, max: &Vector3<f64>) -> Vec<Face> {
    let mut faces = Vec::new();
    for axis in 0..3 {
        let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
        let area = (max[a] - min[a]) * (max[b] - min[b]);
        if o[axis] < min[axis] {
            faces.push(Face { axis, value: min[axis], area });
        } else if o[axis] > max[axis] {
            faces.push(Face { axis, value: max[axis], area });
        }
    }
    faces
}

/// Ground-truth grid: each voxel takes the class of the last primitive that
/// contains its center at time `t`, else free. `grid_to_world` places the grid.
pub fn analytic_occupancy(prims: &[ScenePrimitive], spec: &GridSpec, t: f64, grid_to_world: &Pose) -> OccupancyGrid {
    let [nx, ny, nz] = spec.dims();
    let slabs = par::map_range(nx, |x| {
        let mut out = vec![FREE; ny * nz];
        for y in 0..ny {
            for z in 0..nz {
                let c = grid_to_world.transform_point(&spec.voxel_center([x, y, z]));
                if let Some(p) = prims.iter().rev().find(|p| p.contains(&c, t)) {
                    out[y * nz + z] = p.class;
                }
            }
        }
        out
    });
    OccupancyGrid::from_labels(*spec, slabs.concat()).expect("dims match by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::{CAR, DRIVEABLE_SURFACE, MANMADE};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn downward_beam_hits_ground() {
        let prims = [ScenePrimitive::ground(-0.5, DRIVEABLE_SURFACE).unwrap()];
        let pattern = BeamPattern {
            rings: 1,
            elevation_min_deg: -90.0,
            elevation_max_deg: -90.0,
            azimuth_steps: 1,
            max_range: 10.0,
        };
        let r = lidar_returns(&prims, 0.0, &Pose::from_translation(v(3.0, 2.0, 1.5)), &pattern);
        assert_eq!(r.len(), 1);
        assert!((r[0].world - v(3.0, 2.0, -0.5)).norm() < 1e-12);
        assert_eq!(r[0].label, DRIVEABLE_SURFACE);
    }

    #[test]
    fn box_behind_forward_beams_is_invisible() {
        let prims = [ScenePrimitive::cuboid(v(-10.0, -1.0, -1.0), v(-8.0, 1.0, 1.0), CAR).unwrap()];
        let pattern = BeamPattern {
            rings: 5,
            elevation_min_deg: -10.0,
            elevation_max_deg: 10.0,
            azimuth_steps: 1,
            max_range: 100.0,
        };
        assert!(lidar_returns(&prims, 0.0, &Pose::identity(), &pattern).is_empty());
        let full = BeamPattern { azimuth_steps: 360, ..pattern };
        assert!(!lidar_returns(&prims, 0.0, &Pose::identity(), &full).is_empty());
    }

    #[test]
    fn returns_lie_on_surfaces() {
        let prims = [
            ScenePrimitive::ground(-0.62, DRIVEABLE_SURFACE).unwrap(),
            ScenePrimitive::cuboid(v(5.02, -3.0, -0.58), v(9.0, 3.0, 2.0), MANMADE).unwrap(),
            ScenePrimitive::cuboid(v(-6.0, 2.0, -0.58), v(-4.0, 4.0, 1.0), CAR).unwrap(),
        ];
        let pose = Pose::from_yaw(0.3, v(0.5, -0.2, 1.2));
        let r = lidar_returns(&prims, 0.0, &pose, &BeamPattern::default());
        assert!(r.len() > 1000);
        for ret in &r {
            assert!(prims[ret.primitive].surface_residual(&ret.world, 0.0) < 1e-9);
            assert!((pose.transform_point(&ret.local) - ret.world).norm() < 1e-9);
        }
        assert!(r.iter().any(|x| x.label == CAR));
    }

    #[test]
    fn moving_box_shifts_hits() {
        let p = ScenePrimitive::cuboid(v(10.0, -1.0, -1.0), v(12.0, 1.0, 1.0), CAR)
            .unwrap()
            .moving(v(5.0, 0.0, 0.0))
            .unwrap();
        let d = v(1.0, 0.0, 0.0);
        assert_eq!(p.intersect(&Vector3::zeros(), &d, 0.0), Some(10.0));
        assert_eq!(p.intersect(&Vector3::zeros(), &d, 2.0), Some(20.0));
    }

    #[test]
    fn radar_static_and_receding() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let parked = [ScenePrimitive::cuboid(v(10.0, -1.0, -0.5), v(14.0, 1.0, 1.0), CAR).unwrap()];
        let r = simulate_radar(&parked, 0.0, &Pose::identity(), 30, 0.0, &mut rng).unwrap();
        assert_eq!(r.len(), 30);
        assert!(r.points.iter().all(|p| p.velocity == 0.0 && p.confidence == 1.0 && p.rcs == 10.0));
        for p in &r.points {
            assert!(parked[0].surface_residual(&p.position(), 0.0) < 1e-5);
        }
        let tiny = [ScenePrimitive::cuboid(v(100.0, -0.01, -0.01), v(100.02, 0.01, 0.01), CAR)
            .unwrap()
            .moving(v(5.0, 0.0, 0.0))
            .unwrap()];
        let r = simulate_radar(&tiny, 0.0, &Pose::identity(), 10, 0.0, &mut rng).unwrap();
        assert_eq!(r.len(), 10);
        assert!(r.points.iter().all(|p| (p.velocity - 5.0).abs() < 1e-6));
    }

    #[test]
    fn radar_is_seed_reproducible() {
        let prims = [ScenePrimitive::cuboid(v(10.0, -1.0, -0.5), v(14.0, 1.0, 1.0), CAR).unwrap()];
        let run = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            simulate_radar(&prims, 0.0, &Pose::identity(), 20, 0.1, &mut rng).unwrap()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn analytic_grid_counts() {
        let spec = GridSpec::occ3d();
        assert_eq!(analytic_occupancy(&[], &spec, 0.0, &Pose::identity()).occupied_count(), 0);
        let b = ScenePrimitive::cuboid(v(0.0, 0.0, 0.2), v(2.0, 2.0, 2.2), CAR).unwrap();
        assert_eq!(analytic_occupancy(&[b], &spec, 0.0, &Pose::identity()).occupied_count(), 125);
        let g = ScenePrimitive::ground(-0.6, DRIVEABLE_SURFACE).unwrap();
        let grid = analytic_occupancy(&[g], &spec, 0.0, &Pose::identity());
        assert_eq!(grid.occupied_count(), 200 * 200);
        assert!((0..200).all(|x| grid.get([x, 7, 0]) == DRIVEABLE_SURFACE && grid.get([x, 7, 1]) == FREE));
        // later primitive wins the overlap
        let grid = analytic_occupancy(
            &[
                b,
                b.moving(Vector3::zeros())
                    .map(|mut p| {
                        p.class = MANMADE;
                        p
                    })
                    .unwrap(),
            ],
            &spec,
            0.0,
            &Pose::identity(),
        );
        assert_eq!(grid.class_counts()[MANMADE as usize], 125);
    }

    #[test]
    fn invalid_primitives_rejected() {
        assert!(ScenePrimitive::cuboid(v(0.0, 0.0, 0.0), v(0.0, 1.0, 1.0), CAR).is_err());
        assert!(ScenePrimitive::ground(0.0, FREE).is_err());
        assert!(ScenePrimitive::ground(0.0, DRIVEABLE_SURFACE).unwrap().moving(v(1.0, 0.0, 0.0)).is_err());
    }
}
