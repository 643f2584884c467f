//! Ego-motion compensation of sweeps.

use nalgebra::Vector3;

use super::format::{LabeledCloud, LidarPoint, RadarCloud, RadarPoint};
use crate::error::{Error, Result};
use crate::geometry::Pose;

/// Sensor-to-world poses at the start and end of one sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepMotion {
    pub start: Pose,
    pub end: Pose,
    /// Sweep duration in seconds.
    pub period: f64,
}

impl SweepMotion {
    pub fn new(start: Pose, end: Pose, period: f64) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::config("sweep_period", format!("must be positive, got {period}")));
        }
        Ok(Self { start, end, period })
    }

    /// Sensor-to-world pose `t` seconds after the sweep start.
    pub fn pose_at(&self, t: f64) -> Result<Pose> {
        Pose::interpolate(&self.start, &self.end, t / self.period)
    }

    /// Re-expresses sensor-frame point `p` captured at `t` in the sensor frame
    /// at `reference_time`.
    pub fn compensate_point(&self, p: &Vector3<f64>, t: f64, reference: &Pose) -> Result<Vector3<f64>> {
        let capture = self.pose_at(t)?;
        Ok(reference.inverse().transform_point(&capture.transform_point(p)))
    }
}

/// Moves every point to where the sensor would have seen it at
/// `reference_time` (seconds from sweep start), keeping world positions fixed.
pub fn compensate_ego_motion(cloud: &LabeledCloud, motion: &SweepMotion, reference_time: f64) -> Result<LabeledCloud> {
    let reference_inv = motion.pose_at(reference_time)?.inverse();
    let tol = 1e-9 + super::format::TICK / 2.0;
    let mut points = Vec::with_capacity(cloud.len());
    for (i, p) in cloud.points.iter().enumerate() {
        let t = p.t_offset();
        if t < -tol || t > motion.period + tol {
            return Err(Error::Geometry(format!(
                "point {i} time offset {t} s lies outside the {} s sweep",
                motion.period
            )));
        }
        if p.t_ticks == super::format::seconds_to_ticks(reference_time) {
            points.push(*p);
            continue;
        }
        let capture = motion.pose_at(t)?;
        let q = reference_inv.transform_point(&capture.transform_point(&p.position()));
        points.push(LidarPoint { x: q.x as f32, y: q.y as f32, z: q.z as f32, ..*p });
    }
    Ok(LabeledCloud { points })
}

/// Moves a whole radar cloud captured at sensor pose `capture` into the sensor
/// frame at pose `reference` (both sensor-to-world).
pub fn compensate_radar(cloud: &RadarCloud, capture: &Pose, reference: &Pose) -> RadarCloud {
    let rel = reference.inverse().compose(capture);
    RadarCloud {
        points: cloud
            .points
            .iter()
            .map(|p| {
                let q = rel.transform_point(&p.position());
                RadarPoint { x: q.x as f32, y: q.y as f32, z: q.z as f32, ..*p }
            })
            .collect(),
    }
}
