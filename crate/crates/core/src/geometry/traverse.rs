//! Exact voxel walking along a segment (Amanatides–Woo stepping).
//!
//! Boundary crossing parameters are recomputed from the absolute plane
//! position at every step instead of accumulated, so long rays do not drift.

use nalgebra::Vector3;

use super::grid::{GridSpec, Voxel};
use crate::error::{Error, Result};

pub const MIN_RAY_LENGTH: f64 = 1e-9;

/// A lidar beam from the sensor origin to its return.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    origin: Vector3<f64>,
    endpoint: Vector3<f64>,
}

impl Ray {
    pub fn new(origin: Vector3<f64>, endpoint: Vector3<f64>) -> Result<Self> {
        let len = (endpoint - origin).norm();
        if !(len > MIN_RAY_LENGTH) {
            return Err(Error::Geometry(format!("ray length {len} is below {MIN_RAY_LENGTH} m")));
        }
        Ok(Self { origin, endpoint })
    }

    pub fn origin(&self) -> &Vector3<f64> {
        &self.origin
    }
    pub fn endpoint(&self) -> &Vector3<f64> {
        &self.endpoint
    }
    pub fn at(&self, t: f64) -> Vector3<f64> {
        self.origin + (self.endpoint - self.origin) * t
    }
}

/// Voxels crossed by `[origin, endpoint)` plus the voxel holding the endpoint.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Traversal {
    /// Crossed voxels in order from the origin. Never contains `hit`.
    pub voxels: Vec<Voxel>,
    /// Ray parameter in `[0, 1]` at which each voxel is entered.
    pub entry_t: Vec<f64>,
    pub hit: Option<Voxel>,
}

/// Walks `ray` through `grid`.
pub fn traverse_ray(grid: &GridSpec, ray: &Ray) -> Traversal {
    let mut out = Traversal::default();
    out.hit = walk(grid, ray.origin(), ray.endpoint(), |v, t| {
        out.voxels.push(v);
        out.entry_t.push(t);
    });
    out
}

/// Allocation-free form of [`traverse_ray`]: calls `visit(voxel, entry_t)` for
/// every crossed voxel before the hit voxel and returns the hit voxel.
/// Degenerate segments (shorter than [`MIN_RAY_LENGTH`]) visit nothing.
pub fn walk<F>(grid: &GridSpec, origin: &Vector3<f64>, endpoint: &Vector3<f64>, mut visit: F) -> Option<Voxel>
where
    F: FnMut(Voxel, f64),
{
    let hit = grid.voxel_of(endpoint);
    let d = endpoint - origin;
    if !(d.norm() > MIN_RAY_LENGTH) {
        return hit;
    }
    let gmin = grid.origin();
    let gmax = grid.max_corner();
    let size = grid.voxel_size();
    let dims = grid.dims();

    // clip the parametric segment [0, 1] against the grid box
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for a in 0..3 {
        if d[a] == 0.0 {
            if origin[a] < gmin[a] || origin[a] >= gmax[a] {
                return hit;
            }
        } else {
            let ta = (gmin[a] - origin[a]) / d[a];
            let tb = (gmax[a] - origin[a]) / d[a];
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
    }
    if !(t0 < t1) {
        return hit;
    }

    let start = origin + d * t0;
    let mut cell = [0i64; 3];
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    for a in 0..3 {
        let f = ((start[a] - gmin[a]) / size).floor();
        cell[a] = (f as i64).clamp(0, dims[a] as i64 - 1);
        step[a] = if d[a] > 0.0 {
            1
        } else if d[a] < 0.0 {
            -1
        } else {
            0
        };
        t_max[a] = boundary_t(gmin[a], size, cell[a], step[a], origin[a], d[a]);
    }

    let mut t_cur = t0;
    loop {
        let v = [cell[0] as usize, cell[1] as usize, cell[2] as usize];
        if Some(v) == hit {
            break;
        }
        visit(v, t_cur);

        // smallest crossing parameter; exact ties resolve x, then y, then z
        let mut axis = 0;
        if t_max[1] < t_max[axis] {
            axis = 1;
        }
        if t_max[2] < t_max[axis] {
            axis = 2;
        }
        let t_next = t_max[axis];
        if !(t_next < t1) {
            break;
        }
        cell[axis] += step[axis];
        if cell[axis] < 0 || cell[axis] >= dims[axis] as i64 {
            break;
        }
        t_max[axis] = boundary_t(gmin[axis], size, cell[axis], step[axis], origin[axis], d[axis]);
        t_cur = t_next;
    }
    hit
}

#[inline]
fn boundary_t(gmin: f64, size: f64, cell: i64, step: i64, o: f64, d: f64) -> f64 {
    match step {
        1 => (gmin + (cell + 1) as f64 * size - o) / d,
        -1 => (gmin + cell as f64 * size - o) / d,
        _ => f64::INFINITY,
    }
}
