use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer voxel coordinates `[xi, yi, zi]`.
pub type Voxel = [usize; 3];

/// Axis-aligned voxel lattice. Cells are half-open: voxel `i` along an axis
/// covers `[origin + i·size, origin + (i+1)·size)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGrid", into = "RawGrid")]
pub struct GridSpec {
    origin: Vector3<f64>,
    voxel_size: f64,
    dims: [usize; 3],
}

#[derive(Serialize, Deserialize)]
struct RawGrid {
    origin: [f64; 3],
    voxel_size: f64,
    dims: [usize; 3],
}

impl TryFrom<RawGrid> for GridSpec {
    type Error = Error;
    fn try_from(r: RawGrid) -> Result<Self> {
        GridSpec::new(Vector3::from(r.origin), r.voxel_size, r.dims)
    }
}

impl From<GridSpec> for RawGrid {
    fn from(g: GridSpec) -> Self {
        RawGrid { origin: g.origin.into(), voxel_size: g.voxel_size, dims: g.dims }
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::occ3d()
    }
}

impl GridSpec {
    pub fn new(origin: Vector3<f64>, voxel_size: f64, dims: [usize; 3]) -> Result<Self> {
        if !(voxel_size.is_finite() && voxel_size > 0.0) {
            return Err(Error::Geometry(format!("voxel size must be positive, got {voxel_size}")));
        }
        if dims.contains(&0) {
            return Err(Error::Geometry(format!("grid dims must be >= 1, got {dims:?}")));
        }
        if dims.iter().product::<usize>() > u32::MAX as usize {
            return Err(Error::Geometry(format!("grid {dims:?} has too many voxels")));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::Geometry("grid origin is not finite".into()));
        }
        Ok(Self { origin, voxel_size, dims })
    }

    /// 80 × 80 × 6.4 m at 0.4 m: x, y ∈ [−40, 40), z ∈ [−1.0, 5.4).
    pub fn occ3d() -> Self {
        Self { origin: Vector3::new(-40.0, -40.0, -1.0), voxel_size: 0.4, dims: [200, 200, 16] }
    }

    /// Grid covering `[min, max)` at `voxel_size`; each extent must be a whole
    /// number of voxels (within 1e-6).
    pub fn from_bounds(min: Vector3<f64>, max: Vector3<f64>, voxel_size: f64) -> Result<Self> {
        let mut dims = [0usize; 3];
        for a in 0..3 {
            let n = (max[a] - min[a]) / voxel_size;
            let r = n.round();
            if r < 1.0 || (n - r).abs() > 1e-6 {
                return Err(Error::Geometry(format!(
                    "extent {} along axis {a} is not a whole number of {voxel_size} m voxels",
                    max[a] - min[a]
                )));
            }
            dims[a] = r as usize;
        }
        Self::new(min, voxel_size, dims)
    }

    pub fn origin(&self) -> &Vector3<f64> {
        &self.origin
    }
    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }
    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn extent(&self) -> Vector3<f64> {
        Vector3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64) * self.voxel_size
    }
    pub fn max_corner(&self) -> Vector3<f64> {
        self.origin + self.extent()
    }

    /// Containing voxel of `p` under the floor convention, if inside.
    pub fn voxel_of(&self, p: &Vector3<f64>) -> Option<Voxel> {
        let mut v = [0usize; 3];
        for a in 0..3 {
            let f = ((p[a] - self.origin[a]) / self.voxel_size).floor();
            if !(f >= 0.0 && f < self.dims[a] as f64) {
                return None;
            }
            v[a] = f as usize;
        }
        Some(v)
    }

    /// Flat index with z fastest: `(xi·Ny + yi)·Nz + zi`.
    #[inline]
    pub fn linear(&self, v: Voxel) -> usize {
        (v[0] * self.dims[1] + v[1]) * self.dims[2] + v[2]
    }

    #[inline]
    pub fn unlinear(&self, idx: usize) -> Voxel {
        let z = idx % self.dims[2];
        let rest = idx / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], z]
    }

    pub fn contains_voxel(&self, v: [i64; 3]) -> bool {
        (0..3).all(|a| v[a] >= 0 && (v[a] as usize) < self.dims[a])
    }

    pub fn voxel_center(&self, v: Voxel) -> Vector3<f64> {
        Vector3::new(
            self.origin.x + (v[0] as f64 + 0.5) * self.voxel_size,
            self.origin.y + (v[1] as f64 + 0.5) * self.voxel_size,
            self.origin.z + (v[2] as f64 + 0.5) * self.voxel_size,
        )
    }

    /// Lower corner of voxel `v`.
    pub fn voxel_min(&self, v: Voxel) -> Vector3<f64> {
        Vector3::new(
            self.origin.x + v[0] as f64 * self.voxel_size,
            self.origin.y + v[1] as f64 * self.voxel_size,
            self.origin.z + v[2] as f64 * self.voxel_size,
        )
    }

    /// True if both specs describe the same lattice bit-for-bit.
    pub fn same_lattice(&self, other: &GridSpec) -> bool {
        self == other
    }
}
