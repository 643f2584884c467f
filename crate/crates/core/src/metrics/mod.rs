//! Occupancy evaluation: per-class IoU, mIoU, frequency-weighted mIoU and
//! class-agnostic occupied IoU.

mod report;

pub use report::{ClassEntry, EvalReport};

use crate::classes::{FREE, NUM_CLASSES, NUM_SEMANTIC};
use crate::error::{Error, Result};
use crate::par;
use crate::voxelize::{FovMask, OccupancyGrid};

const CHUNK: usize = 1 << 14;

/// Per-class true/false positive and false negative voxel counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: [u64; NUM_CLASSES],
    pub fp: [u64; NUM_CLASSES],
    pub fn_: [u64; NUM_CLASSES],
    /// Voxels that passed the mask.
    pub evaluated: u64,
}

impl ConfusionCounts {
    pub fn record(&mut self, pred: u8, gt: u8) {
        self.evaluated += 1;
        if pred == gt {
            self.tp[pred as usize] += 1;
        } else {
            self.fp[pred as usize] += 1;
            self.fn_[gt as usize] += 1;
        }
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        for c in 0..NUM_CLASSES {
            self.tp[c] += other.tp[c];
            self.fp[c] += other.fp[c];
            self.fn_[c] += other.fn_[c];
        }
        self.evaluated += other.evaluated;
    }

    /// `TP / (TP + FP + FN)`, or `None` when the class never occurs in either grid.
    pub fn iou(&self, class: u8) -> Option<f64> {
        let c = class as usize;
        let denom = self.tp[c] + self.fp[c] + self.fn_[c];
        (denom > 0).then(|| self.tp[c] as f64 / denom as f64)
    }

    /// Ground-truth voxel count of a class.
    pub fn support(&self, class: u8) -> u64 {
        self.tp[class as usize] + self.fn_[class as usize]
    }
}

fn check_specs(pred: &OccupancyGrid, gt: &OccupancyGrid, mask: Option<&FovMask>) -> Result<()> {
    if pred.spec() != gt.spec() {
        return Err(Error::Eval(format!(
            "prediction grid {:?} differs from ground truth {:?}",
            pred.spec(),
            gt.spec()
        )));
    }
    if let Some(m) = mask {
        if m.spec().dims() != gt.spec().dims() {
            return Err(Error::Eval(format!(
                "mask dims {:?} differ from grid dims {:?}",
                m.spec().dims(),
                gt.spec().dims()
            )));
        }
    }
    Ok(())
}

/// Counts agreement between two grids over the voxels selected by `mask`.
pub fn accumulate_confusion(
    pred: &OccupancyGrid,
    gt: &OccupancyGrid,
    mask: Option<&FovMask>,
) -> Result<ConfusionCounts> {
    check_specs(pred, gt, mask)?;
    let (p, g) = (pred.labels(), gt.labels());
    let n_chunks = p.len().div_ceil(CHUNK);
    let partial = par::map_range(n_chunks, |k| {
        let mut c = ConfusionCounts::default();
        for i in k * CHUNK..((k + 1) * CHUNK).min(p.len()) {
            if mask.is_none_or(|m| m.as_slice()[i]) {
                c.record(p[i], g[i]);
            }
        }
        c
    });
    let mut total = ConfusionCounts::default();
    partial.iter().for_each(|c| total.merge(c));
    Ok(total)
}

/// The 17 semantic classes; free is excluded from mIoU by default.
pub fn semantic_classes() -> Vec<u8> {
    (0..NUM_SEMANTIC as u8).collect()
}

/// Members of `classes` in ascending id order, each once.
fn selected(classes: &[u8]) -> impl Iterator<Item = u8> + '_ {
    (0..NUM_CLASSES as u8).filter(move |c| classes.contains(c))
}

/// IoU per class id, `None` marking a class absent from both grids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassIous(pub [Option<f64>; NUM_CLASSES]);

impl ClassIous {
    pub fn from_counts(c: &ConfusionCounts) -> Self {
        Self(std::array::from_fn(|i| c.iou(i as u8)))
    }

    pub fn get(&self, class: u8) -> Option<f64> {
        self.0[class as usize]
    }

    /// Unweighted mean over the non-missing classes in `classes`.
    pub fn mean(&self, classes: &[u8]) -> Option<f64> {
        let present: Vec<f64> = selected(classes).filter_map(|c| self.get(c)).collect();
        (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
    }

    /// `Σ w_c·IoU_c / Σ w_c` over the non-missing classes in `classes`.
    pub fn weighted_mean(&self, weights: &ClassWeights, classes: &[u8]) -> Result<Option<f64>> {
        let mut num = 0.0;
        let mut den = 0.0;
        for c in selected(classes) {
            let Some(iou) = self.get(c) else { continue };
            let w = weights.get(c).ok_or_else(|| {
                Error::Eval(format!("no weight for present class {} ({})", c, crate::classes::name(c)))
            })?;
            num += w * iou;
            den += w;
        }
        Ok((den > 0.0).then(|| num / den))
    }
}

/// Per-class frequency weights (any positive scale).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights(pub [Option<f64>; NUM_CLASSES]);

impl ClassWeights {
    pub fn uniform() -> Self {
        Self([Some(1.0); NUM_CLASSES])
    }

    pub fn new(weights: [Option<f64>; NUM_CLASSES]) -> Result<Self> {
        if let Some(w) = weights.iter().flatten().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::Eval(format!("class weight {w} must be finite and nonnegative")));
        }
        Ok(Self(weights))
    }

    /// Weights proportional to each class's ground-truth support.
    pub fn from_support(c: &ConfusionCounts) -> Self {
        let total: u64 = (0..NUM_CLASSES as u8).map(|k| c.support(k)).sum();
        Self(std::array::from_fn(|k| {
            Some(if total == 0 { 0.0 } else { c.support(k as u8) as f64 / total as f64 * 100.0 })
        }))
    }

    pub fn get(&self, class: u8) -> Option<f64> {
        self.0[class as usize]
    }
}

/// Mean IoU over `classes`; `None` if every class is missing.
pub fn miou(counts: &ConfusionCounts, classes: &[u8]) -> Option<f64> {
    ClassIous::from_counts(counts).mean(classes)
}

pub fn weighted_miou(counts: &ConfusionCounts, weights: &ClassWeights, classes: &[u8]) -> Result<Option<f64>> {
    ClassIous::from_counts(counts).weighted_mean(weights, classes)
}

/// Binary occupied-vs-free counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OccupiedCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl OccupiedCounts {
    pub fn merge(&mut self, o: &OccupiedCounts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }

    pub fn iou(&self) -> Option<f64> {
        let d = self.tp + self.fp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }
}

pub fn occupied_counts(pred: &OccupancyGrid, gt: &OccupancyGrid, mask: Option<&FovMask>) -> Result<OccupiedCounts> {
    check_specs(pred, gt, mask)?;
    let (p, g) = (pred.labels(), gt.labels());
    let mut c = OccupiedCounts::default();
    for i in 0..p.len() {
        if mask.is_some_and(|m| !m.as_slice()[i]) {
            continue;
        }
        match (p[i] != FREE, g[i] != FREE) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(c)
}

/// IoU after merging all semantic classes into one occupied class.
pub fn occupied_iou(pred: &OccupancyGrid, gt: &OccupancyGrid, mask: Option<&FovMask>) -> Result<Option<f64>> {
    Ok(occupied_counts(pred, gt, mask)?.iou())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classes::{CAR, PEDESTRIAN, TRUCK};
    use crate::geometry::GridSpec;
    use nalgebra::Vector3;

    fn grid(labels: &[u8]) -> OccupancyGrid {
        let spec = GridSpec::new(Vector3::zeros(), 1.0, [labels.len(), 1, 1]).unwrap();
        OccupancyGrid::from_labels(spec, labels.to_vec()).unwrap()
    }

    #[test]
    fn perfect_prediction() {
        let g = grid(&[CAR, FREE, PEDESTRIAN, TRUCK]);
        let c = accumulate_confusion(&g, &g, None).unwrap();
        assert!(c.fp.iter().chain(&c.fn_).all(|&x| x == 0));
        assert_eq!(miou(&c, &semantic_classes()), Some(1.0));
        assert_eq!(occupied_iou(&g, &g, None).unwrap(), Some(1.0));
    }

    #[test]
    fn hand_counted_confusion() {
        let gt = grid(&[CAR, CAR, FREE, PEDESTRIAN]);
        let pred = grid(&[CAR, PEDESTRIAN, FREE, PEDESTRIAN]);
        let c = accumulate_confusion(&pred, &gt, None).unwrap();
        assert_eq!((c.tp[CAR as usize], c.fn_[CAR as usize], c.fp[CAR as usize]), (1, 1, 0));
        assert_eq!((c.tp[PEDESTRIAN as usize], c.fp[PEDESTRIAN as usize]), (1, 1));
        assert_eq!(c.tp[FREE as usize], 1);
        assert_eq!(c.evaluated, 4);
        assert_eq!(c.iou(CAR), Some(0.5));
        assert_eq!(c.iou(PEDESTRIAN), Some(0.5));
        assert_eq!(c.iou(TRUCK), None);
    }

    #[test]
    fn masked_partition_is_additive() {
        let gt = grid(&[CAR, CAR, FREE, PEDESTRIAN, TRUCK, FREE]);
        let pred = grid(&[CAR, PEDESTRIAN, FREE, PEDESTRIAN, FREE, TRUCK]);
        let m = FovMask::from_bools(*gt.spec(), vec![true, false, true, false, true, true]).unwrap();
        let mut a = accumulate_confusion(&pred, &gt, Some(&m)).unwrap();
        let b = accumulate_confusion(&pred, &gt, Some(&m.complement())).unwrap();
        a.merge(&b);
        assert_eq!(a, accumulate_confusion(&pred, &gt, None).unwrap());
    }

    #[test]
    fn two_class_mean() {
        let mut v = [None; NUM_CLASSES];
        v[1] = Some(0.5);
        v[2] = Some(0.75);
        let ious = ClassIous(v);
        assert_eq!(ious.mean(&semantic_classes()), Some(0.625));
        assert_eq!(ious.weighted_mean(&ClassWeights::uniform(), &semantic_classes()).unwrap(), Some(0.625));
    }

    #[test]
    fn all_missing_is_undefined() {
        let c = ConfusionCounts::default();
        assert_eq!(miou(&c, &semantic_classes()), None);
        assert_eq!(weighted_miou(&c, &ClassWeights::uniform(), &semantic_classes()).unwrap(), None);
    }

    #[test]
    fn missing_weight_is_an_error() {
        let g = grid(&[CAR]);
        let c = accumulate_confusion(&g, &g, None).unwrap();
        let mut w = ClassWeights::uniform();
        w.0[CAR as usize] = None;
        assert!(weighted_miou(&c, &w, &semantic_classes()).is_err());
        assert!(ClassWeights::new([Some(-1.0); NUM_CLASSES]).is_err());
    }

    #[test]
    fn occupied_iou_hand_count() {
        // 10 occupied in gt; prediction covers 5 of them and adds 5 spurious
        let mut gt = vec![FREE; 20];
        let mut pred = vec![FREE; 20];
        gt[..10].fill(CAR);
        pred[5..15].fill(TRUCK);
        let v = occupied_iou(&grid(&pred), &grid(&gt), None).unwrap().unwrap();
        assert!((v - 5.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn spec_mismatch_is_eval_error() {
        let a = grid(&[CAR, CAR]);
        let b = grid(&[CAR, CAR, CAR]);
        assert!(matches!(accumulate_confusion(&a, &b, None), Err(Error::Eval(_))));
    }

    proptest::proptest! {
        #[test]
        fn metrics_invariants(pairs in proptest::collection::vec((0u8..18, 0u8..18), 1..300),
                              relabel in 0u8..17) {
            let pred = grid(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
            let gt = grid(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
            let c = accumulate_confusion(&pred, &gt, None).unwrap();
            let all: Vec<u8> = (0..18).collect();
            for k in 0..18u8 {
                if let Some(v) = c.iou(k) { proptest::prop_assert!((0.0..=1.0).contains(&v)); }
            }
            let tp_sum: u64 = c.tp.iter().sum();
            proptest::prop_assert!(tp_sum <= c.evaluated);
            // class order does not matter
            let mut rev = all.clone();
            rev.reverse();
            proptest::prop_assert_eq!(miou(&c, &all), miou(&c, &rev));
            // equal weights reduce to the plain mean
            let w = ClassWeights([Some(2.5); NUM_CLASSES]);
            let (a, b) = (weighted_miou(&c, &w, &all).unwrap(), miou(&c, &all));
            let agree = match (a, b) { (Some(a), Some(b)) => (a - b).abs() < 1e-12, (None, None) => true, _ => false };
            proptest::prop_assert!(agree);
            // occupied IoU ignores which semantic class is used
            let flat = |g: &OccupancyGrid| grid(&g.labels().iter().map(|&l| if l == FREE { FREE } else { relabel }).collect::<Vec<_>>());
            proptest::prop_assert_eq!(occupied_iou(&pred, &gt, None).unwrap(), occupied_iou(&flat(&pred), &flat(&gt), None).unwrap());
        }
    }
}
