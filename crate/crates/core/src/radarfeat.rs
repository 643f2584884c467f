//! PointPillars-style radar preprocessing: x-y pillar assignment and the
//! per-point 9-D decoration (six raw channels plus offsets from the pillar's
//! point mean).

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cloudio::RadarCloud;
use crate::error::{Error, Result};
use crate::geometry::GridSpec;
use crate::par;

pub const FEATURE_DIM: usize = 9;
pub const PFTR_MAGIC: &[u8; 4] = b"PFTR";
pub const PFTR_VERSION: u32 = 1;
pub const DEFAULT_PILLAR_SIZE: f64 = 0.4;

/// Rectangular x-y region covered by pillars, half-open on the max side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PillarExtent {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl PillarExtent {
    pub fn from_grid(spec: &GridSpec) -> Self {
        let max = spec.max_corner();
        Self { x_min: spec.origin().x, x_max: max.x, y_min: spec.origin().y, y_max: max.y }
    }
}

impl Default for PillarExtent {
    fn default() -> Self {
        Self::from_grid(&GridSpec::occ3d())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pillar {
    /// `ix · ny + iy`.
    pub id: u32,
    pub ix: usize,
    pub iy: usize,
    /// Indices into the source cloud, ascending.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PillarGrid {
    pub pillar_size: f64,
    pub extent: PillarExtent,
    pub nx: usize,
    pub ny: usize,
    /// Non-empty pillars ordered by id.
    pub pillars: Vec<Pillar>,
    /// Number of points in the source cloud.
    pub source_len: usize,
    pub out_of_bounds: usize,
}

impl PillarGrid {
    pub fn in_bounds(&self) -> usize {
        self.source_len - self.out_of_bounds
    }
}

/// Groups points into x-y pillars using the same floor convention as voxel
/// binning, ignoring z.
pub fn pillarize(cloud: &RadarCloud, pillar_size: f64, extent: PillarExtent) -> Result<PillarGrid> {
    if !(pillar_size.is_finite() && pillar_size > 0.0) {
        return Err(Error::config("pillar_size", format!("must be positive, got {pillar_size}")));
    }
    let nx = ((extent.x_max - extent.x_min) / pillar_size).ceil();
    let ny = ((extent.y_max - extent.y_min) / pillar_size).ceil();
    if !(nx >= 1.0 && ny >= 1.0 && nx * ny <= u32::MAX as f64) {
        return Err(Error::config("pillar_extent", format!("{extent:?} gives {nx}x{ny} pillars")));
    }
    let (nx, ny) = (nx as usize, ny as usize);
    let mut map: BTreeMap<u32, Pillar> = BTreeMap::new();
    let mut out_of_bounds = 0;
    for (i, p) in cloud.points.iter().enumerate() {
        let fx = ((p.x as f64 - extent.x_min) / pillar_size).floor();
        let fy = ((p.y as f64 - extent.y_min) / pillar_size).floor();
        let inside = fx >= 0.0
            && fy >= 0.0
            && fx < nx as f64
            && fy < ny as f64
            && (p.x as f64) < extent.x_max
            && (p.y as f64) < extent.y_max;
        if !inside {
            out_of_bounds += 1;
            continue;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        let id = (ix * ny + iy) as u32;
        map.entry(id).or_insert_with(|| Pillar { id, ix, iy, members: Vec::new() }).members.push(i);
    }
    Ok(PillarGrid {
        pillar_size,
        extent,
        nx,
        ny,
        pillars: map.into_values().collect(),
        source_len: cloud.len(),
        out_of_bounds,
    })
}

/// Decorated points, one row per in-bounds point in source order.
#[derive(Debug, Clone, PartialEq)]
pub struct PillarFeatures {
    /// `(x, y, z, velocity, rcs, confidence, xc, yc, zc)`.
    pub rows: Vec<[f32; FEATURE_DIM]>,
    pub pillar_ids: Vec<u32>,
    pub point_indices: Vec<usize>,
}

impl PillarFeatures {
    pub fn len(&self) -> usize {
        self.rows.len()
    }
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

pub fn featurize(grid: &PillarGrid, cloud: &RadarCloud) -> Result<PillarFeatures> {
    if grid.source_len != cloud.len() {
        return Err(Error::Internal(format!(
            "pillar grid was built from {} points, cloud has {}",
            grid.source_len,
            cloud.len()
        )));
    }
    // (point index, pillar id, row) per pillar
    let per_pillar: Vec<Vec<(usize, u32, [f32; FEATURE_DIM])>> = par::map(&grid.pillars, |pillar| {
        let n = pillar.members.len() as f64;
        let mut mean = [0.0f64; 3];
        for &i in &pillar.members {
            let p = &cloud.points[i];
            mean[0] += p.x as f64;
            mean[1] += p.y as f64;
            mean[2] += p.z as f64;
        }
        mean.iter_mut().for_each(|m| *m /= n);
        pillar
            .members
            .iter()
            .map(|&i| {
                let p = &cloud.points[i];
                let row = [
                    p.x,
                    p.y,
                    p.z,
                    p.velocity,
                    p.rcs,
                    p.confidence,
                    (p.x as f64 - mean[0]) as f32,
                    (p.y as f64 - mean[1]) as f32,
                    (p.z as f64 - mean[2]) as f32,
                ];
                (i, pillar.id, row)
            })
            .collect()
    });
    let mut all: Vec<_> = per_pillar.into_iter().flatten().collect();
    all.sort_unstable_by_key(|(i, _, _)| *i);
    Ok(PillarFeatures {
        rows: all.iter().map(|(_, _, r)| *r).collect(),
        pillar_ids: all.iter().map(|(_, id, _)| *id).collect(),
        point_indices: all.iter().map(|(i, _, _)| *i).collect(),
    })
}

/// `PFTR`, u32 version, u32 row count, then per row 9×f32 and a u32 pillar id.
pub fn encode_features(f: &PillarFeatures) -> Vec<u8> {
    let mut buf = Vec::with_capacity(12 + f.len() * 40);
    buf.extend_from_slice(PFTR_MAGIC);
    buf.extend_from_slice(&PFTR_VERSION.to_le_bytes());
    buf.extend_from_slice(&(f.len() as u32).to_le_bytes());
    for (row, id) in f.rows.iter().zip(&f.pillar_ids) {
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&id.to_le_bytes());
    }
    buf
}

pub fn write_features(path: impl AsRef<Path>, f: &PillarFeatures) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_features(f)).map_err(|e| Error::io(path, e))
}
