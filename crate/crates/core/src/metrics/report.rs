use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassIous, ClassWeights, ConfusionCounts, OccupiedCounts};
use crate::classes::{self, NUM_CLASSES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: u8,
    pub name: String,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// `null` when the class is absent from both prediction and ground truth.
    pub iou: Option<f64>,
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub frames: usize,
    pub voxels_evaluated: u64,
    pub eval_classes: Vec<u8>,
    pub miou: Option<f64>,
    pub weighted_miou: Option<f64>,
    pub occupied_iou: Option<f64>,
    pub classes: Vec<ClassEntry>,
}

impl EvalReport {
    pub fn build(
        frames: usize,
        counts: &ConfusionCounts,
        occupied: &OccupiedCounts,
        weights: &ClassWeights,
        eval_classes: &[u8],
    ) -> Result<Self> {
        let ious = ClassIous::from_counts(counts);
        let classes = (0..NUM_CLASSES as u8)
            .map(|c| ClassEntry {
                id: c,
                name: classes::name(c).to_string(),
                tp: counts.tp[c as usize],
                fp: counts.fp[c as usize],
                fn_: counts.fn_[c as usize],
                iou: ious.get(c),
                weight: weights.get(c),
            })
            .collect();
        Ok(Self {
            frames,
            voxels_evaluated: counts.evaluated,
            eval_classes: eval_classes.to_vec(),
            miou: ious.mean(eval_classes),
            weighted_miou: ious.weighted_mean(weights, eval_classes)?,
            occupied_iou: occupied.iou(),
            classes,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    /// Fixed-width table, values in percent, `–` for missing classes.
    pub fn to_table(&self) -> String {
        let pct = |v: Option<f64>| v.map_or_else(|| "–".to_string(), |x| format!("{:.1}", x * 100.0));
        let mut s = String::new();
        let _ = writeln!(s, "{:<22} {:>8} {:>8} {:>8}  {:>8}", "class", "IoU", "weight", "eval", "support");
        for e in &self.classes {
            let w = e.weight.map_or_else(|| "–".to_string(), |w| format!("{w:.2}"));
            let evald = if self.eval_classes.contains(&e.id) { "yes" } else { "no" };
            let _ = writeln!(
                s,
                "{:<22} {:>8} {:>8} {:>8}  {:>8}",
                format!("{:>2} {}", e.id, e.name),
                pct(e.iou),
                w,
                evald,
                e.tp + e.fn_
            );
        }
        let _ = writeln!(s, "{:<22} {:>8}", "mIoU", pct(self.miou));
        let _ = writeln!(s, "{:<22} {:>8}", "weighted mIoU", pct(self.weighted_miou));
        let _ = writeln!(s, "{:<22} {:>8}", "occupied IoU", pct(self.occupied_iou));
        let _ = write!(s, "{:<22} {:>8}", "voxels evaluated", self.voxels_evaluated);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::semantic_classes;

    #[test]
    fn missing_classes_render_as_dash_and_null() {
        let mut c = ConfusionCounts::default();
        c.record(4, 4);
        c.record(4, 7);
        let occ = OccupiedCounts { tp: 2, fp: 0, fn_: 0 };
        let r = EvalReport::build(1, &c, &occ, &ClassWeights::uniform(), &semantic_classes()).unwrap();
        assert_eq!(r.miou, Some(0.25));
        let table = r.to_table();
        assert!(table.contains("bus") && table.contains('–'));
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert!(json["classes"][3]["iou"].is_null());
        assert_eq!(json["classes"][4]["iou"], 0.5);
        let back: EvalReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
