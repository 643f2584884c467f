//! End-to-end commands: auto-labeling, evaluation, depth preparation,
//! synthetic scene generation and FOV masks.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::accumulate::{assemble_scene, AccumulationConfig};
use crate::classes::{FREE, NUM_CLASSES};
use crate::cloudio::{read_lidar, read_ppm, read_radar, write_pgm, write_ppm, SceneManifest};
use crate::depthassoc::{
    bin_depth, make_pseudo_depth, make_rgbd, project_depth_map, write_depth, DepthBinning, DepthImage, ImageCalib,
    DEFAULT_STRIDE, WORKING_HEIGHT, WORKING_WIDTH,
};
use crate::error::{Error, Result};
use crate::geometry::GridSpec;
use crate::metrics::{
    accumulate_confusion, occupied_counts, semantic_classes, ClassWeights, ConfusionCounts, EvalReport, OccupiedCounts,
};
use crate::par;
use crate::synth::{generate_scene, Scenario};
use crate::voxelize::{
    bin_points, carve_free, fov_mask, read_mask, read_occupancy, refine_lonely, resolve_labels, write_mask,
    write_occupancy, FovMask, OccupancyGrid, VoxelHistogramGrid,
};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Count the free class in the semantic means.
    pub include_free: bool,
    /// Per-class weights; by default the ground-truth class frequencies.
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Replaces the manifest's grid when set.
    pub grid: Option<GridSpec>,
    pub accumulation: AccumulationConfig,
    pub refine: bool,
    pub depth_binning: DepthBinning,
    pub stride: u32,
    /// Working image size as `[width, height]`.
    pub image_size: [u32; 2],
    /// Worker threads; all available cores when unset.
    pub threads: Option<usize>,
    pub seed: u64,
    pub eval: EvalConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            grid: None,
            accumulation: AccumulationConfig::default(),
            refine: true,
            depth_binning: DepthBinning::default(),
            stride: DEFAULT_STRIDE,
            image_size: [WORKING_WIDTH, WORKING_HEIGHT],
            threads: None,
            seed: 0,
            eval: EvalConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| Error::config(path.display().to_string(), e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.accumulation.validate()?;
        self.depth_binning.validate()?;
        if self.stride == 0 {
            return Err(Error::config("stride", "must be positive"));
        }
        if self.image_size.contains(&0) {
            return Err(Error::config("image_size", "must be positive"));
        }
        if self.threads == Some(0) {
            return Err(Error::config("threads", "must be positive"));
        }
        if let Some(w) = &self.eval.weights {
            if w.len() != NUM_CLASSES {
                return Err(Error::config("eval.weights", format!("expected {NUM_CLASSES} entries, got {}", w.len())));
            }
        }
        Ok(())
    }

    pub fn grid_for(&self, m: &SceneManifest) -> GridSpec {
        self.grid.unwrap_or(m.grid)
    }
}

/// Parses `a..b` (inclusive) or `a..=b`.
pub fn parse_frame_range(s: &str) -> Result<RangeInclusive<u64>> {
    let bad = || Error::config("frames", format!("expected a..b, got {s:?}"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a > b {
        return Err(bad());
    }
    Ok(a..=b)
}

pub fn grid_file_name(frame_id: u64) -> String {
    format!("frame_{frame_id:06}.occg")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameStats {
    pub frame_id: u64,
    pub points: usize,
    pub static_points: usize,
    pub dynamic_points: usize,
    pub dropped_points: u64,
    pub observed_voxels: usize,
    pub unobserved_voxels: u64,
    pub occupied_voxels: usize,
    pub refined_voxels: usize,
    pub seconds: f64,
}

/// Labels for one key frame plus the per-voxel evidence they came from.
#[derive(Debug, Clone)]
pub struct FrameLabels {
    pub frame_id: u64,
    pub grid: OccupancyGrid,
    pub hit_totals: Vec<u32>,
    pub free_counts: Vec<u32>,
    pub stats: FrameStats,
}

impl FrameLabels {
    pub fn observed(&self, idx: usize) -> bool {
        self.hit_totals[idx] > 0 || self.free_counts[idx] > 0
    }
}

/// Accumulates, voxelizes, carves, resolves and refines one key frame.
/// The grid is expressed in the key frame's ego coordinates.
pub fn autolabel_frame(m: &SceneManifest, key: u64, cfg: &PipelineConfig) -> Result<FrameLabels> {
    let started = Instant::now();
    let scene = assemble_scene(m, key, &cfg.accumulation)?.in_key_ego_frame();
    let mut hist = VoxelHistogramGrid::new(cfg.grid_for(m));
    bin_points(&mut hist, &scene.points);
    carve_free(&mut hist, &scene.points, &scene.origins)?;
    let resolved = resolve_labels(&hist);
    let grid = if cfg.refine { refine_lonely(&resolved.grid) } else { resolved.grid.clone() };
    let n = hist.spec().len();
    let hit_totals: Vec<u32> = (0..n).map(|i| hist.hit_total(i)).collect();
    let free_counts: Vec<u32> = (0..n).map(|i| hist.free_count(i)).collect();
    let refined_voxels = grid.labels().iter().zip(resolved.grid.labels()).filter(|(a, b)| a != b).count();
    let stats = FrameStats {
        frame_id: key,
        points: scene.points.len(),
        static_points: scene.static_points,
        dynamic_points: scene.dynamic_points,
        dropped_points: hist.dropped(),
        observed_voxels: (0..n).filter(|&i| hit_totals[i] > 0 || free_counts[i] > 0).count(),
        unobserved_voxels: resolved.unobserved,
        occupied_voxels: grid.occupied_count(),
        refined_voxels,
        seconds: started.elapsed().as_secs_f64(),
    };
    Ok(FrameLabels { frame_id: key, grid, hit_totals, free_counts, stats })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AutolabelStats {
    pub manifest: PathBuf,
    pub threads: usize,
    pub frames: Vec<FrameStats>,
    pub total_seconds: f64,
}

/// Key frames to label: the flagged ones, or every frame if none is flagged.
fn selected_key_frames(m: &SceneManifest, range: Option<&RangeInclusive<u64>>) -> Vec<u64> {
    let flagged: Vec<u64> = m.key_frames().map(|f| f.frame_id).collect();
    let keys = if flagged.is_empty() { m.frames.iter().map(|f| f.frame_id).collect() } else { flagged };
    keys.into_iter().filter(|id| range.is_none_or(|r| r.contains(id))).collect()
}

/// Labels every selected key frame, writing `frame_XXXXXX.occg` and `stats.json` to `out`.
pub fn cmd_autolabel(
    manifest_path: &Path,
    cfg: &PipelineConfig,
    out: &Path,
    frames: Option<&RangeInclusive<u64>>,
) -> Result<Vec<FrameLabels>> {
    cfg.validate()?;
    let m = SceneManifest::load(manifest_path)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let keys = selected_key_frames(&m, frames);
    if keys.is_empty() {
        warn!("no key frames selected in {}", manifest_path.display());
    }
    let started = Instant::now();
    par::with_threads(cfg.threads, || {
        let threads = par::current_threads();
        let mut labeled = Vec::with_capacity(keys.len());
        for &key in &keys {
            let f = autolabel_frame(&m, key, cfg)?;
            write_occupancy(out.join(grid_file_name(key)), &f.grid)?;
            info!(
                "frame {key}: {} points, {} occupied, {} unobserved voxels, {:.2}s",
                f.stats.points, f.stats.occupied_voxels, f.stats.unobserved_voxels, f.stats.seconds
            );
            labeled.push(f);
        }
        let stats = AutolabelStats {
            manifest: manifest_path.to_path_buf(),
            threads,
            frames: labeled.iter().map(|f| f.stats.clone()).collect(),
            total_seconds: started.elapsed().as_secs_f64(),
        };
        let path = out.join("stats.json");
        let text = serde_json::to_string_pretty(&stats).map_err(|e| Error::Internal(e.to_string()))?;
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(labeled)
    })
}

fn list_grids(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "occg") {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                out.insert(name.to_string(), path.clone());
            }
        }
    }
    Ok(out)
}

/// Where masks come from: one mask for every frame, or one file per frame
/// named like the grid with a `.fovm` extension.
fn mask_for(mask: Option<&Path>, grid_name: &str) -> Result<Option<FovMask>> {
    match mask {
        None => Ok(None),
        Some(p) if p.is_dir() => read_mask(p.join(Path::new(grid_name).with_extension("fovm"))).map(Some),
        Some(p) => read_mask(p).map(Some),
    }
}

/// Compares matching grid files of two directories and writes
/// `report.json` and `report.txt` to `out` when given.
pub fn cmd_eval(
    pred_dir: &Path,
    gt_dir: &Path,
    mask: Option<&Path>,
    cfg: &PipelineConfig,
    out: Option<&Path>,
) -> Result<EvalReport> {
    cfg.validate()?;
    let pred = list_grids(pred_dir)?;
    let gt = list_grids(gt_dir)?;
    let only_pred: Vec<&str> = pred.keys().filter(|k| !gt.contains_key(*k)).map(String::as_str).collect();
    let only_gt: Vec<&str> = gt.keys().filter(|k| !pred.contains_key(*k)).map(String::as_str).collect();
    if !only_pred.is_empty() || !only_gt.is_empty() {
        return Err(Error::UnmatchedFrames(format!(
            "only in {}: [{}]; only in {}: [{}]",
            pred_dir.display(),
            only_pred.join(", "),
            gt_dir.display(),
            only_gt.join(", ")
        )));
    }
    if gt.is_empty() {
        return Err(Error::UnmatchedFrames(format!("no .occg files in {}", gt_dir.display())));
    }
    let shared_mask = match mask {
        Some(p) if !p.is_dir() => Some(read_mask(p)?),
        _ => None,
    };
    let names: Vec<&String> = gt.keys().collect();
    let per_frame = par::with_threads(cfg.threads, || {
        par::map(&names, |name| -> Result<(ConfusionCounts, OccupiedCounts)> {
            let p = read_occupancy(&pred[*name])?;
            let g = read_occupancy(&gt[*name])?;
            let own = if shared_mask.is_none() { mask_for(mask, name)? } else { None };
            let m = shared_mask.as_ref().or(own.as_ref());
            Ok((accumulate_confusion(&p, &g, m)?, occupied_counts(&p, &g, m)?))
        })
    });
    let mut counts = ConfusionCounts::default();
    let mut occ = OccupiedCounts::default();
    for r in per_frame {
        let (c, o) = r?;
        counts.merge(&c);
        occ.merge(&o);
    }
    let weights = match &cfg.eval.weights {
        Some(w) => ClassWeights::new(std::array::from_fn(|i| Some(w[i])))?,
        None => ClassWeights::from_support(&counts),
    };
    let mut classes = semantic_classes();
    if cfg.eval.include_free {
        classes.push(FREE);
    }
    let report = EvalReport::build(names.len(), &counts, &occ, &weights, &classes)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        report.save_json(&dir.join("report.json"))?;
        let txt = dir.join("report.txt");
        std::fs::write(&txt, report.to_table() + "\n").map_err(|e| Error::io(&txt, e))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DepthMode {
    LidarGt,
    Pseudo,
    Rgbd,
    Bins,
}

impl std::str::FromStr for DepthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lidar-gt" => Ok(Self::LidarGt),
            "pseudo" => Ok(Self::Pseudo),
            "rgbd" => Ok(Self::Rgbd),
            "bins" => Ok(Self::Bins),
            _ => {
                Err(Error::config("mode", format!("unknown depth mode {s:?}; expected lidar-gt, pseudo, rgbd or bins")))
            }
        }
    }
}

fn lidar_depth(m: &SceneManifest, frame: u64, calib: &ImageCalib) -> Result<DepthImage> {
    let rec = m.frame(frame).expect("frame checked by caller");
    let rel = rec.lidar.as_ref().ok_or_else(|| Error::Ingest { frame, reason: "no lidar file listed".into() })?;
    let cloud = read_lidar(m.resolve(rel))?;
    let pts: Vec<_> = cloud.points.iter().map(|p| p.position()).collect();
    Ok(project_depth_map(&pts, &calib.intrinsics, &calib.lidar_to_cam))
}

fn radar_of(m: &SceneManifest, frame: u64) -> Result<crate::cloudio::RadarCloud> {
    let rec = m.frame(frame).expect("frame checked by caller");
    let rel = rec.radar.as_ref().ok_or_else(|| Error::Ingest { frame, reason: "no radar file listed".into() })?;
    read_radar(m.resolve(rel))
}

/// Writes the depth products of one frame and returns the files written.
pub fn cmd_depth(
    manifest_path: &Path,
    frame: u64,
    mode: DepthMode,
    cfg: &PipelineConfig,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let m = SceneManifest::load(manifest_path)?;
    let rec = m
        .frame(frame)
        .ok_or_else(|| Error::Ingest { frame, reason: format!("not listed in {}", manifest_path.display()) })?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let [w, h] = cfg.image_size;
    let calib = ImageCalib::from_manifest(&m, w, h)?;
    let stem = format!("frame_{frame:06}");
    let mut written = Vec::new();
    match mode {
        DepthMode::LidarGt => {
            let p = out.join(format!("{stem}_lidar.dpth"));
            write_depth(&p, &lidar_depth(&m, frame, &calib)?)?;
            written.push(p);
        }
        DepthMode::Bins => {
            let bins = bin_depth(&lidar_depth(&m, frame, &calib)?, &cfg.depth_binning);
            let p = out.join(format!("{stem}_bins.pgm"));
            write_pgm(&p, bins.width, bins.height, &bins.bins)?;
            written.push(p);
        }
        DepthMode::Pseudo => {
            let p = out.join(format!("{stem}_pseudo.dpth"));
            write_depth(&p, &make_pseudo_depth(&radar_of(&m, frame)?, &calib, cfg.stride)?)?;
            written.push(p);
        }
        DepthMode::Rgbd => {
            let rel = rec
                .image
                .as_ref()
                .ok_or_else(|| Error::Ingest { frame, reason: "no image listed for rgbd mode".into() })?;
            let img = read_ppm(m.resolve(rel))?;
            let calib = ImageCalib::from_manifest(&m, img.width(), img.height())?;
            let rgbd = make_rgbd(&img, &radar_of(&m, frame)?, &calib)?;
            let (pc, pd) = (out.join(format!("{stem}_rgbd.ppm")), out.join(format!("{stem}_rgbd.dpth")));
            write_ppm(&pc, &rgbd.to_rgb8())?;
            write_depth(&pd, rgbd.depth())?;
            written.extend([pc, pd]);
        }
    }
    Ok(written)
}

/// Generates a built-in scenario under `out`.
pub fn cmd_synth(scenario: &str, seed: u64, cfg: &PipelineConfig, out: &Path) -> Result<SceneManifest> {
    cfg.validate()?;
    let scn = Scenario::builtin(scenario)?;
    let grid = cfg.grid.unwrap_or_default();
    par::with_threads(cfg.threads, || generate_scene(&scn, seed, &grid, out))
}

/// Writes `fov_mask.fovm`: voxels of the label grid visible to the camera.
pub fn cmd_fov_mask(manifest_path: &Path, cfg: &PipelineConfig, out: &Path) -> Result<FovMask> {
    cfg.validate()?;
    let m = SceneManifest::load(manifest_path)?;
    let mask = fov_mask(&cfg.grid_for(&m), &m.intrinsics, &m.extrinsics.camera_to_ego);
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_mask(out.join("fov_mask.fovm"), &mask)?;
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_ranges() {
        assert_eq!(parse_frame_range("3..7").unwrap(), 3..=7);
        assert_eq!(parse_frame_range("3..=7").unwrap(), 3..=7);
        assert!(parse_frame_range("7..3").is_err());
        assert!(matches!(parse_frame_range("x"), Err(Error::Config { .. })));
    }

    #[test]
    fn config_defaults_round_trip() {
        let cfg = PipelineConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<PipelineConfig>(&text).unwrap(), cfg);
        assert_eq!(serde_json::from_str::<PipelineConfig>("{}").unwrap(), cfg);
        assert_eq!(cfg.stride, 16);
        assert_eq!(cfg.depth_binning.bins, 80);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"strid": 4}"#).is_err());
    }

    #[test]
    fn invalid_config_fields() {
        let cfg = PipelineConfig { threads: Some(0), ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
        let cfg = PipelineConfig {
            eval: EvalConfig { weights: Some(vec![1.0; 3]), ..Default::default() },
            ..Default::default()
        };
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 3);
    }

    #[test]
    fn eval_unmatched_frames() {
        let spec = GridSpec::new(nalgebra::Vector3::zeros(), 1.0, [2, 2, 2]).unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let g = OccupancyGrid::new_free(spec);
        write_occupancy(a.path().join(grid_file_name(1)), &g).unwrap();
        write_occupancy(b.path().join(grid_file_name(2)), &g).unwrap();
        let err = cmd_eval(a.path(), b.path(), None, &PipelineConfig::default(), None).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }
}
