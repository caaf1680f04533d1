//! Criterion benches for the hot paths: whole-grid characteristic scans,
//! the reduction helpers (parallel vs forced-sequential), and the
//! alternating norm optimizer. Build with and without the `parallel`
//! feature to compare the rayon path against the sequential fallback.

use criterion::{criterion_group, criterion_main, Criterion};

use sparseform_core::characteristics::{ainf_exp_global, fujii_wilson_global};
use sparseform_core::dyadic::{Carrier, Cube, CubeSums, Grid, StepFn};
use sparseform_core::extremal::{lambda_norm, OptimOptions};
use sparseform_core::forms::{derive_config, LambdaRule, WeightSetting};
use sparseform_core::par;
use sparseform_core::sparse::random_sparse_family;

fn weight(depth: u32, salt: u64) -> StepFn {
    let g = Grid::new(depth).unwrap();
    StepFn::from_fn(g, |i| {
        let x = (i as u64).wrapping_mul(6364136223846793005).wrapping_add(salt);
        1.0 + ((x >> 33) % 1000) as f64 / 250.0
    })
}

fn bench_global_scans(c: &mut Criterion) {
    let v = weight(12, 17);
    let mut group = c.benchmark_group("global_scans");
    group.sample_size(10);
    group.bench_function("fujii_wilson_depth12", |b| {
        b.iter(|| fujii_wilson_global(&v).unwrap())
    });
    group.bench_function("ainf_exp_depth12", |b| b.iter(|| ainf_exp_global(&v).unwrap()));
    group.finish();
}

fn bench_reduction(c: &mut Criterion) {
    // The same per-cube workload through the feature-selected reduction and
    // the always-sequential one, so a single build shows the dispatch gap.
    let v = weight(12, 5);
    let grid = v.grid();
    let cubes: Vec<Cube> = grid.cubes().collect();
    let sums = CubeSums::new(&v);
    let logs = CubeSums::new(&v.map(f64::ln));
    let work = |q: &Cube| sums.average(*q) * (-logs.average(*q)).exp();

    let mut group = c.benchmark_group("cube_reduction");
    group.sample_size(10);
    group.bench_function("feature_selected", |b| b.iter(|| par::map_max(&cubes, work)));
    group.bench_function("forced_sequential", |b| b.iter(|| par::map_max_seq(&cubes, work)));
    group.finish();
}

fn bench_norm_optimizer(c: &mut Criterion) {
    let depth = 6;
    let u = weight(depth, 101);
    let v = weight(depth, 202);
    let cfg = derive_config(1.0, f64::INFINITY, 2.0, 2.0).unwrap();
    let setting = WeightSetting::from_duals(u, v, cfg, LambdaRule::Lebesgue).unwrap();
    let family =
        random_sparse_family(setting.grid(), Carrier::Lebesgue, 0.5, 0.7, 3).unwrap();
    let opts = OptimOptions { tol: 1e-6, restarts: 4, iter_cap: 2_000, seed: 9 };

    let mut group = c.benchmark_group("optimizers");
    group.sample_size(10);
    group.bench_function("lambda_norm_depth6", |b| {
        b.iter(|| lambda_norm(&setting, &family, &opts).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_global_scans, bench_reduction, bench_norm_optimizer);
criterion_main!(benches);
