//! Sequential vs parallel throughput of the heavy stages. "sequential" runs
//! inside a one-thread pool; building with `--no-default-features` removes
//! rayon entirely and both variants then run the sequential code.

use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use occlabel::accumulate::AccumulationConfig;
use occlabel::geometry::GridSpec;
use occlabel::par;
use occlabel::pipeline::{autolabel_frame, PipelineConfig};
use occlabel::synth::{generate_scene, Scenario};
use occlabel::voxelize::{bin_points, carve_free, VoxelHistogramGrid};

fn modes() -> [(&'static str, Option<usize>); 2] {
    [("sequential", Some(1)), ("parallel", None)]
}

fn benches(c: &mut Criterion) {
    let dir = tempfile::tempdir().unwrap();
    let scn = Scenario::builtin("static-street").unwrap();
    let grid = GridSpec::occ3d();
    let manifest = generate_scene(&scn, 1, &grid, dir.path()).unwrap();
    let key = scn.key_frames[1] as u64;
    let cfg = PipelineConfig::default();
    let scene = occlabel::accumulate::assemble_scene(&manifest, key, &AccumulationConfig::default())
        .unwrap()
        .in_key_ego_frame();

    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10).measurement_time(Duration::from_secs(8));
    for (name, threads) in modes() {
        g.bench_with_input(BenchmarkId::new("carve_free", name), &threads, |b, &t| {
            par::with_threads(t, || {
                b.iter(|| {
                    let mut h = VoxelHistogramGrid::new(grid);
                    bin_points(&mut h, &scene.points);
                    carve_free(&mut h, &scene.points, &scene.origins).unwrap();
                    h.dropped()
                })
            })
        });
        g.bench_with_input(BenchmarkId::new("autolabel_frame", name), &threads, |b, &t| {
            par::with_threads(t, || b.iter(|| autolabel_frame(&manifest, key, &cfg).unwrap().stats.occupied_voxels))
        });
        g.bench_with_input(BenchmarkId::new("analytic_occupancy", name), &threads, |b, &t| {
            par::with_threads(t, || b.iter(|| scn.ground_truth(key as usize, &grid).occupied_count()))
        });
    }
    g.finish();
}

criterion_group!(pipeline, benches);
criterion_main!(pipeline);
