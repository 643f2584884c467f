//! Rigid transforms, pinhole projection, voxel lattices and ray walking.

mod camera;
mod grid;
mod pose;
mod traverse;

pub use camera::{focal_from_fov, CameraIntrinsics, Projection, MIN_DEPTH};
pub use grid::{GridSpec, Voxel};
pub use pose::{Pose, ORTHONORMAL_TOL};
pub use traverse::{traverse_ray, walk, Ray, Traversal, MIN_RAY_LENGTH};

pub use nalgebra::{Matrix3, Vector3};

/// Applies `pose` to every point.
pub fn transform_points(pose: &Pose, points: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    pose.transform_points(points)
}

/// Projects a camera-frame point with `k`.
pub fn project_point(k: &CameraIntrinsics, cam_point: &Vector3<f64>) -> Projection {
    k.project(cam_point)
}
