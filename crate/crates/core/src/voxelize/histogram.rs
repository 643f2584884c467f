use nalgebra::Vector3;

use crate::accumulate::{SensorOrigin, WorldPoint};
use crate::classes::NUM_SEMANTIC;
use crate::cloudio::LabeledCloud;
use crate::error::{Error, Result};
use crate::geometry::{walk, GridSpec};
use crate::par;

/// Points per parallel work item when binning and carving.
const CHUNK: usize = 2048;
/// Rays whose traversals are buffered before being applied to the counters.
const CARVE_BATCH: usize = 1 << 16;

/// Per-voxel class hit counters and free-traversal counters. Counter addition
/// is commutative, so grids built from disjoint frame subsets can be merged
/// in any order.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelHistogramGrid {
    spec: GridSpec,
    hits: Vec<[u32; NUM_SEMANTIC]>,
    free: Vec<u32>,
    dropped: u64,
}

impl VoxelHistogramGrid {
    pub fn new(spec: GridSpec) -> Self {
        let n = spec.len();
        Self { spec, hits: vec![[0; NUM_SEMANTIC]; n], free: vec![0; n], dropped: 0 }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn hits(&self, idx: usize) -> &[u32; NUM_SEMANTIC] {
        &self.hits[idx]
    }

    pub fn hit_total(&self, idx: usize) -> u32 {
        self.hits[idx].iter().sum()
    }

    pub fn free_count(&self, idx: usize) -> u32 {
        self.free[idx]
    }

    /// Points that fell outside the grid during binning.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub(crate) fn hit_slice(&self) -> &[[u32; NUM_SEMANTIC]] {
        &self.hits
    }

    pub(crate) fn free_slice(&self) -> &[u32] {
        &self.free
    }

    pub fn add_hit(&mut self, idx: usize, label: u8) {
        self.hits[idx][label as usize] += 1;
    }

    pub fn add_free(&mut self, idx: usize) {
        self.free[idx] += 1;
    }

    /// Adds `other`'s counters into `self`.
    pub fn merge(&mut self, other: &VoxelHistogramGrid) -> Result<()> {
        if self.spec != other.spec {
            return Err(Error::Geometry("cannot merge histograms over different grids".into()));
        }
        for (a, b) in self.hits.iter_mut().zip(&other.hits) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.free.iter_mut().zip(&other.free) {
            *a += b;
        }
        self.dropped += other.dropped;
        Ok(())
    }

    /// Voxels with at least one hit or traversal.
    pub fn observed(&self, idx: usize) -> bool {
        self.free[idx] > 0 || self.hit_total(idx) > 0
    }
}

/// Increments the hit counter of each point's voxel. Returns the number of
/// points binned; out-of-grid points are added to the drop statistic.
pub fn bin_points(grid: &mut VoxelHistogramGrid, points: &[WorldPoint]) -> usize {
    let spec = grid.spec;
    let indices: Vec<Vec<Option<u32>>> = par::map_chunks(points, CHUNK, |chunk| {
        chunk.iter().map(|p| spec.voxel_of(&p.position).map(|v| spec.linear(v) as u32)).collect()
    });
    let mut binned = 0;
    for (idx, p) in indices.iter().flatten().zip(points) {
        match idx {
            Some(i) => {
                grid.add_hit(*i as usize, p.label);
                binned += 1;
            }
            None => grid.dropped += 1,
        }
    }
    binned
}

/// [`bin_points`] for a cloud already expressed in the grid's frame.
pub fn bin_cloud(grid: &mut VoxelHistogramGrid, cloud: &LabeledCloud) -> usize {
    let pts: Vec<WorldPoint> =
        cloud.points.iter().map(|p| WorldPoint { position: p.position(), label: p.label, source: 0 }).collect();
    bin_points(grid, &pts)
}

/// Walks every beam from its frame's sensor origin to the point and counts
/// one free traversal for each voxel crossed before the hit voxel.
pub fn carve_free(grid: &mut VoxelHistogramGrid, points: &[WorldPoint], origins: &[SensorOrigin]) -> Result<()> {
    if let Some(p) = points.iter().find(|p| p.source as usize >= origins.len()) {
        return Err(Error::Internal(format!(
            "point references sensor origin {} but only {} exist",
            p.source,
            origins.len()
        )));
    }
    let spec = grid.spec;
    let origin_of = |p: &WorldPoint| -> Vector3<f64> { origins[p.source as usize].position };
    for batch in points.chunks(CARVE_BATCH) {
        let crossed: Vec<Vec<u32>> = par::map_chunks(batch, CHUNK, |chunk| {
            let mut out = Vec::with_capacity(chunk.len() * 32);
            for p in chunk {
                walk(&spec, &origin_of(p), &p.position, |v, _| out.push(spec.linear(v) as u32));
            }
            out
        });
        for idx in crossed.iter().flatten() {
            grid.add_free(*idx as usize);
        }
    }
    Ok(())
}
