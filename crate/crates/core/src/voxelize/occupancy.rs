use crate::classes::{FREE, NUM_CLASSES, NUM_SEMANTIC};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, GridSpec, Pose, Voxel};
use crate::par;

use super::histogram::VoxelHistogramGrid;

/// Dense per-voxel labels: 0..=16 semantic, 17 free.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    spec: GridSpec,
    labels: Vec<u8>,
}

impl OccupancyGrid {
    pub fn new_free(spec: GridSpec) -> Self {
        Self { labels: vec![FREE; spec.len()], spec }
    }

    pub fn from_labels(spec: GridSpec, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != spec.len() {
            return Err(Error::Geometry(format!("{} labels for a grid of {} voxels", labels.len(), spec.len())));
        }
        if let Some(bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(Error::Geometry(format!("label {bad} outside 0..=17")));
        }
        Ok(Self { spec, labels })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, v: Voxel) -> u8 {
        self.labels[self.spec.linear(v)]
    }

    pub fn set(&mut self, v: Voxel, label: u8) {
        assert!((label as usize) < NUM_CLASSES, "label {label} outside 0..=17");
        let i = self.spec.linear(v);
        self.labels[i] = label;
    }

    /// Voxel count per class id.
    pub fn class_counts(&self) -> [u64; NUM_CLASSES] {
        let mut c = [0u64; NUM_CLASSES];
        for &l in &self.labels {
            c[l as usize] += 1;
        }
        c
    }

    pub fn occupied_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != FREE).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub grid: OccupancyGrid,
    /// Voxels with neither hits nor traversals (labeled free).
    pub unobserved: u64,
}

/// Majority class over the hit counters, lowest id on ties. `None` when the
/// voxel has no hits.
pub fn majority_class(hits: &[u32; NUM_SEMANTIC]) -> Option<u8> {
    let mut best: Option<(u8, u32)> = None;
    for (c, &n) in hits.iter().enumerate() {
        if n > 0 && best.is_none_or(|(_, m)| n > m) {
            best = Some((c as u8, n));
        }
    }
    best.map(|(c, _)| c)
}

/// Collapses the histogram to labels. Any hit makes a voxel occupied with its
/// majority class; everything else is free.
pub fn resolve_labels(grid: &VoxelHistogramGrid) -> Resolved {
    let hits = grid.hit_slice();
    let free = grid.free_slice();
    let labels: Vec<u8> = par::map_range(hits.len(), |i| majority_class(&hits[i]).unwrap_or(FREE));
    let unobserved = (0..hits.len()).filter(|&i| labels[i] == FREE && free[i] == 0).count() as u64;
    Resolved { grid: OccupancyGrid { spec: *grid.spec(), labels }, unobserved }
}

/// One pass of lonely-voxel cleanup. An occupied voxel with no same-class
/// voxel among its 26 neighbors takes the most common class among its
/// occupied neighbors (lowest id on ties), or becomes free if it has none.
/// All decisions read `occ`; the result is a new grid.
pub fn refine_lonely(occ: &OccupancyGrid) -> OccupancyGrid {
    let spec = occ.spec;
    let [nx, ny, nz] = spec.dims();
    let labels = &occ.labels;
    let refined: Vec<u8> = par::map_range(labels.len(), |i| {
        let own = labels[i];
        if own == FREE {
            return own;
        }
        let [x, y, z] = spec.unlinear(i);
        let mut counts = [0u32; NUM_SEMANTIC];
        for dx in -1i64..=1 {
            let xx = x as i64 + dx;
            if xx < 0 || xx >= nx as i64 {
                continue;
            }
            for dy in -1i64..=1 {
                let yy = y as i64 + dy;
                if yy < 0 || yy >= ny as i64 {
                    continue;
                }
                for dz in -1i64..=1 {
                    let zz = z as i64 + dz;
                    if zz < 0 || zz >= nz as i64 || (dx == 0 && dy == 0 && dz == 0) {
                        continue;
                    }
                    let l = labels[spec.linear([xx as usize, yy as usize, zz as usize])];
                    if l == own {
                        return own;
                    }
                    if l != FREE {
                        counts[l as usize] += 1;
                    }
                }
            }
        }
        majority_class(&counts).unwrap_or(FREE)
    });
    OccupancyGrid { spec, labels: refined }
}

/// Voxels whose centers are visible to a camera.
#[derive(Debug, Clone, PartialEq)]
pub struct FovMask {
    spec: GridSpec,
    mask: Vec<bool>,
}

impl FovMask {
    pub fn from_bools(spec: GridSpec, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != spec.len() {
            return Err(Error::Geometry(format!("mask has {} entries for {} voxels", mask.len(), spec.len())));
        }
        Ok(Self { spec, mask })
    }

    pub fn all(spec: GridSpec) -> Self {
        Self { mask: vec![true; spec.len()], spec }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.mask
    }

    pub fn get(&self, v: Voxel) -> bool {
        self.mask[self.spec.linear(v)]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> FovMask {
        FovMask { spec: self.spec, mask: self.mask.iter().map(|b| !b).collect() }
    }
}

/// Marks voxels whose centers project in front of the camera and inside the
/// image. `cam_to_grid` maps camera-frame points into the grid frame.
pub fn fov_mask(spec: &GridSpec, k: &CameraIntrinsics, cam_to_grid: &Pose) -> FovMask {
    let grid_to_cam = cam_to_grid.inverse();
    let mask = par::map_range(spec.len(), |i| {
        let c = grid_to_cam.transform_point(&spec.voxel_center(spec.unlinear(i)));
        match k.project(&c).visible() {
            Some((u, v, _)) => k.in_image(u, v),
            None => false,
        }
    });
    FovMask { spec: *spec, mask }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::{CAR, MANMADE, PEDESTRIAN, TRUCK};
    use nalgebra::Vector3;

    fn spec3() -> GridSpec {
        GridSpec::new(Vector3::zeros(), 0.4, [3, 3, 3]).unwrap()
    }

    fn hist_with(counts: &[(u8, u32)], free: u32) -> VoxelHistogramGrid {
        let mut g = VoxelHistogramGrid::new(GridSpec::new(Vector3::zeros(), 1.0, [1, 1, 1]).unwrap());
        for &(c, n) in counts {
            for _ in 0..n {
                g.add_hit(0, c);
            }
        }
        for _ in 0..free {
            g.add_free(0);
        }
        g
    }

    #[test]
    fn occupied_dominates_free() {
        let r = resolve_labels(&hist_with(&[(CAR, 2), (PEDESTRIAN, 1)], 5));
        assert_eq!(r.grid.labels(), &[CAR]);
        assert_eq!(r.unobserved, 0);
    }

    #[test]
    fn unobserved_is_free_and_counted() {
        let r = resolve_labels(&hist_with(&[], 0));
        assert_eq!(r.grid.labels(), &[FREE]);
        assert_eq!(r.unobserved, 1);
        let r = resolve_labels(&hist_with(&[], 3));
        assert_eq!(r.grid.labels(), &[FREE]);
        assert_eq!(r.unobserved, 0);
    }

    #[test]
    fn tie_goes_to_lower_id() {
        let r = resolve_labels(&hist_with(&[(TRUCK, 2), (CAR, 2)], 0));
        assert_eq!(r.grid.labels(), &[CAR]);
    }

    #[test]
    fn face_neighbors_keep_voxel() {
        let mut occ = OccupancyGrid::new_free(spec3());
        occ.set([1, 1, 1], CAR);
        for v in [[0, 1, 1], [2, 1, 1], [1, 0, 1], [1, 2, 1], [1, 1, 0], [1, 1, 2]] {
            occ.set(v, CAR);
        }
        assert_eq!(refine_lonely(&occ), occ);
    }

    #[test]
    fn surrounded_pedestrian_becomes_manmade() {
        let mut occ = OccupancyGrid::from_labels(spec3(), vec![MANMADE; 27]).unwrap();
        occ.set([1, 1, 1], PEDESTRIAN);
        let out = refine_lonely(&occ);
        assert_eq!(out.get([1, 1, 1]), MANMADE);
        assert_eq!(out.class_counts()[MANMADE as usize], 27);
    }

    #[test]
    fn isolated_voxel_becomes_free() {
        let mut occ = OccupancyGrid::new_free(spec3());
        occ.set([1, 1, 1], CAR);
        assert_eq!(refine_lonely(&occ).occupied_count(), 0);
    }

    #[test]
    fn reads_input_not_output() {
        // two lonely voxels of different classes side by side swap rather than
        // cascade: each sees the other's original class
        let mut occ = OccupancyGrid::new_free(spec3());
        occ.set([0, 0, 0], CAR);
        occ.set([1, 0, 0], TRUCK);
        let out = refine_lonely(&occ);
        assert_eq!(out.get([0, 0, 0]), TRUCK);
        assert_eq!(out.get([1, 0, 0]), CAR);
    }

    #[test]
    fn neighbor_majority_with_tie() {
        let mut occ = OccupancyGrid::new_free(spec3());
        occ.set([1, 1, 1], PEDESTRIAN);
        occ.set([0, 0, 0], TRUCK);
        occ.set([2, 2, 2], CAR);
        assert_eq!(refine_lonely(&occ).get([1, 1, 1]), CAR);
        occ.set([0, 2, 0], TRUCK);
        assert_eq!(refine_lonely(&occ).get([1, 1, 1]), TRUCK);
    }

    #[test]
    fn from_labels_validates() {
        assert!(OccupancyGrid::from_labels(spec3(), vec![0; 26]).is_err());
        assert!(OccupancyGrid::from_labels(spec3(), vec![18; 27]).is_err());
    }

    #[test]
    fn fov_mask_front_and_back() {
        let spec = GridSpec::occ3d();
        let k = CameraIntrinsics::from_fov(1936, 1216, 64.0, 44.0).unwrap();
        // camera at the grid center, optical axis along +x
        let cam = Pose::forward_camera(Vector3::new(0.0, 0.0, 0.2));
        let m = fov_mask(&spec, &k, &cam);
        let ahead = spec.voxel_of(&Vector3::new(10.0, 0.1, 0.3)).unwrap();
        assert!(m.get(ahead));
        let behind = spec.voxel_of(&Vector3::new(-10.0, 0.1, 0.3)).unwrap();
        assert!(!m.get(behind));
        // every voxel with center x <= 0 is behind the camera
        for i in 0..spec.len() {
            let v = spec.unlinear(i);
            if spec.voxel_center(v).x <= 0.0 {
                assert!(!m.as_slice()[i]);
            }
        }
        let frac = m.count() as f64 / spec.len() as f64;
        assert!(frac > 0.1 && frac < 0.5, "{frac}");
    }
}
