use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use occlabel::classes::{CAR, FREE, PEDESTRIAN};
use occlabel::cloudio::{read_pgm, write_cloud, Cloud, RadarCloud, SceneManifest};
use occlabel::depthassoc::{bin_depth, read_depth, DepthBinning};
use occlabel::geometry::{GridSpec, Vector3};
use occlabel::metrics::{
    accumulate_confusion, miou, occupied_counts, semantic_classes, ConfusionCounts, OccupiedCounts,
};
use occlabel::voxelize::{read_mask, read_occupancy, write_occupancy, OccupancyGrid};

fn occlabel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_occlabel")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "exit {:?}\n{}", out.status.code(), String::from_utf8_lossy(&out.stderr));
}

/// One generated scene shared by the read-only tests.
fn scene() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("cli-scene");
        let _ = std::fs::remove_dir_all(&dir);
        ok(&occlabel(&["synth", "--scenario", "crossing-pedestrian", "--seed", "5", "--out", s(&dir)]));
        dir
    })
}

fn manifest() -> PathBuf {
    scene().join("manifest.json")
}

#[test]
fn autolabel_then_eval_against_ground_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let labels = tmp.path().join("labels");
    let out = occlabel(&["autolabel", "--manifest", s(&manifest()), "--out", s(&labels), "--frames", "2..6"]);
    ok(&out);
    let mut names: Vec<_> = std::fs::read_dir(&labels).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["frame_000002.occg", "frame_000006.occg", "stats.json"]);
    let stats: serde_json::Value = serde_json::from_slice(&std::fs::read(labels.join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["frames"].as_array().unwrap().len(), 2);

    // compare against the matching ground-truth subset
    let gt = tmp.path().join("gt");
    std::fs::create_dir(&gt).unwrap();
    for n in ["frame_000002.occg", "frame_000006.occg"] {
        std::fs::copy(scene().join("gt").join(n), gt.join(n)).unwrap();
    }
    let report = tmp.path().join("report");
    let out = occlabel(&["eval", "--pred", s(&labels), "--gt", s(&gt), "--out", s(&report)]);
    ok(&out);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(report.join("report.json")).unwrap()).unwrap();
    let (mut counts, mut occ) = (ConfusionCounts::default(), OccupiedCounts::default());
    for n in ["frame_000002.occg", "frame_000006.occg"] {
        let (p, g) = (read_occupancy(labels.join(n)).unwrap(), read_occupancy(gt.join(n)).unwrap());
        counts.merge(&accumulate_confusion(&p, &g, None).unwrap());
        occ.merge(&occupied_counts(&p, &g, None).unwrap());
    }
    assert_eq!(json["miou"].as_f64(), miou(&counts, &semantic_classes()));
    assert_eq!(json["occupied_iou"].as_f64(), occ.iou());
    assert_eq!(json["voxels_evaluated"].as_u64(), Some(counts.evaluated));
    assert!(String::from_utf8_lossy(&out.stdout).contains("weighted mIoU"));
}

#[test]
fn eval_of_identical_dirs_is_perfect() {
    let out = occlabel(&["eval", "--pred", s(&scene().join("gt")), "--gt", s(&scene().join("gt"))]);
    ok(&out);
    let table = String::from_utf8_lossy(&out.stdout);
    let line = |key: &str| table.lines().find(|l| l.starts_with(key)).unwrap().to_string();
    assert!(line("mIoU").ends_with("100.0"));
    assert!(line("occupied IoU").ends_with("100.0"));
    assert!(line(" 4 car").contains('–'), "absent class renders as a dash");
}

#[test]
fn eval_matches_hand_counted_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let (pred, gt) = (tmp.path().join("pred"), tmp.path().join("gt"));
    std::fs::create_dir_all(&pred).unwrap();
    std::fs::create_dir_all(&gt).unwrap();
    let spec = GridSpec::new(Vector3::zeros(), 0.5, [4, 1, 1]).unwrap();
    let grid = |l: &[u8]| OccupancyGrid::from_labels(spec, l.to_vec()).unwrap();
    write_occupancy(pred.join("frame_000000.occg"), &grid(&[CAR, PEDESTRIAN, FREE, PEDESTRIAN])).unwrap();
    write_occupancy(gt.join("frame_000000.occg"), &grid(&[CAR, CAR, FREE, PEDESTRIAN])).unwrap();
    let report = tmp.path().join("report");
    ok(&occlabel(&["eval", "--pred", s(&pred), "--gt", s(&gt), "--out", s(&report)]));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(report.join("report.json")).unwrap()).unwrap();
    let class = |c: u8| &json["classes"][c as usize];
    assert_eq!((class(CAR)["tp"].as_u64(), class(CAR)["fn"].as_u64()), (Some(1), Some(1)));
    assert_eq!((class(PEDESTRIAN)["tp"].as_u64(), class(PEDESTRIAN)["fp"].as_u64()), (Some(1), Some(1)));
    assert_eq!(class(FREE)["tp"].as_u64(), Some(1));
    assert_eq!(json["miou"].as_f64(), Some(0.5));
    assert_eq!(json["occupied_iou"].as_f64(), Some(1.0));
    assert!(class(3)["iou"].is_null());
    let txt = std::fs::read_to_string(report.join("report.txt")).unwrap();
    assert!(txt.contains('–'));
}

#[test]
fn autolabel_is_repeatable_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let dir = tmp.path().join(name);
        ok(&occlabel(&[
            "autolabel",
            "--manifest",
            s(&manifest()),
            "--out",
            s(&dir),
            "--frames",
            "10..10",
            "--threads",
            threads,
        ]));
        std::fs::read(dir.join("frame_000010.occg")).unwrap()
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "1"));
    assert_eq!(a, run("c", "8"));
}

#[test]
fn synth_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = |name: &str| {
        let dir = tmp.path().join(name);
        ok(&occlabel(&["synth", "--scenario", "moving-box", "--seed", "9", "--out", s(&dir)]));
        dir
    };
    let (a, b) = (gen("a"), gen("b"));
    for sub in ["", "lidar", "radar", "image", "gt"] {
        for entry in std::fs::read_dir(a.join(sub)).unwrap() {
            let path = entry.unwrap().path();
            if path.is_file() {
                let rel = path.strip_prefix(&a).unwrap();
                assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(b.join(rel)).unwrap(), "{}", rel.display());
            }
        }
    }
}

#[test]
fn depth_modes_are_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let cfg = out.join("stride1.json");
    std::fs::write(&cfg, r#"{"stride": 1}"#).unwrap();
    let m = s(&manifest()).to_string();
    for mode in ["lidar-gt", "bins", "pseudo", "rgbd"] {
        ok(&occlabel(&[
            "depth",
            "--manifest",
            &m,
            "--frame",
            "6",
            "--mode",
            mode,
            "--out",
            s(out),
            "--config",
            s(&cfg),
        ]));
    }
    let lidar = read_depth(out.join("frame_000006_lidar.dpth")).unwrap();
    assert!(lidar.nonzero() > 100);
    let bins = read_pgm(out.join("frame_000006_bins.pgm")).unwrap();
    assert_eq!(bins.as_raw(), &bin_depth(&lidar, &DepthBinning::default()).bins);
    let pseudo = read_depth(out.join("frame_000006_pseudo.dpth")).unwrap();
    let rgbd = read_depth(out.join("frame_000006_rgbd.dpth")).unwrap();
    assert!(pseudo.nonzero() > 0);
    assert_eq!(pseudo, rgbd);
}

#[test]
fn pseudo_depth_of_empty_radar_is_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let mut m = SceneManifest::load(manifest()).unwrap();
    let radar = tmp.path().join("empty.ocpc");
    write_cloud(&radar, &Cloud::Radar(RadarCloud::default())).unwrap();
    for f in &mut m.frames {
        f.lidar = f.lidar.as_ref().map(|p| scene().join(p));
        f.image = None;
        f.radar = Some(radar.clone());
    }
    let path = tmp.path().join("manifest.json");
    m.save(&path).unwrap();
    ok(&occlabel(&["depth", "--manifest", s(&path), "--frame", "2", "--mode", "pseudo", "--out", s(tmp.path())]));
    let d = read_depth(tmp.path().join("frame_000002_pseudo.dpth")).unwrap();
    assert_eq!((d.width(), d.height(), d.nonzero()), (44, 16, 0));
    let out = occlabel(&["depth", "--manifest", s(&path), "--frame", "2", "--mode", "rgbd", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2), "rgbd without an image is an input error");
}

#[test]
fn fov_mask_is_written() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&occlabel(&["fov-mask", "--manifest", s(&manifest()), "--out", s(tmp.path())]));
    let mask = read_mask(tmp.path().join("fov_mask.fovm")).unwrap();
    assert!(mask.count() > 0 && mask.count() < mask.as_slice().len());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path();
    let code = |args: &[&str]| occlabel(args).status.code();

    assert_eq!(code(&["synth", "--scenario", "foggy-bridge", "--out", s(t)]), Some(3));

    let bad = t.join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&["autolabel", "--manifest", s(&bad), "--out", s(t)]), Some(2));

    let cfg = t.join("cfg.json");
    std::fs::write(&cfg, r#"{"stride": 0}"#).unwrap();
    assert_eq!(code(&["autolabel", "--manifest", s(&manifest()), "--out", s(t), "--config", s(&cfg)]), Some(3));
    assert_eq!(code(&["autolabel", "--manifest", s(&manifest()), "--out", s(t), "--frames", "9..2"]), Some(3));
    assert_eq!(
        code(&["depth", "--manifest", s(&manifest()), "--frame", "2", "--mode", "sonar", "--out", s(t)]),
        Some(3)
    );

    let (a, b) = (t.join("a"), t.join("b"));
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    let g = OccupancyGrid::new_free(GridSpec::new(Vector3::zeros(), 1.0, [2, 2, 2]).unwrap());
    write_occupancy(a.join("frame_000001.occg"), &g).unwrap();
    write_occupancy(b.join("frame_000002.occg"), &g).unwrap();
    assert_eq!(code(&["eval", "--pred", s(&a), "--gt", s(&b)]), Some(4));

    std::fs::write(b.join("frame_000001.occg"), b"OCCG garbage").unwrap();
    std::fs::remove_file(b.join("frame_000002.occg")).unwrap();
    assert_eq!(code(&["eval", "--pred", s(&a), "--gt", s(&b)]), Some(2));
}
