use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use subproduct::fusion::FusionMaps;
use subproduct::kk::{self, CertifyConfig, KkBlocks};
use subproduct::linalg::{c, op_norm, Mat};
use subproduct::system::{build_su2, BuildConfig};
use subproduct::toeplitz;

fn linalg(cr: &mut Criterion) {
    let a = Mat::from_fn(200, 200, |i, j| {
        c(((i * 7 + j * 3) % 11) as f64, ((i + 2 * j) % 5) as f64)
    });
    cr.bench_function("op_norm_200", |b| b.iter(|| op_norm(black_box(&a))));
}

fn systems(cr: &mut Criterion) {
    let cfg = BuildConfig::default();
    cr.bench_function("build_n2_m5", |b| b.iter(|| build_su2(2, 5, &cfg).unwrap()));
    let sys = build_su2(2, 4, &cfg).unwrap();
    cr.bench_function("fusion_registry_n2_m4", |b| {
        b.iter(|| {
            FusionMaps::new(&sys)
                .unwrap()
                .check_identities(1e-9)
                .unwrap()
        })
    });
    cr.bench_function("toeplitz_relations_n2_m4", |b| {
        b.iter(|| toeplitz::verify_relations(&sys, 1e-9).unwrap())
    });
}

fn kk_blocks(cr: &mut Criterion) {
    let sys = build_su2(1, 5, &BuildConfig::default()).unwrap();
    cr.bench_function("kk_douu_n1_k3", |b| {
        b.iter(|| kk::douu_blocks(&sys, 3, 3).unwrap())
    });
    cr.bench_function("kk_certify_n1_m5", |b| {
        b.iter(|| kk::certify(&sys, &CertifyConfig::for_degree(5)).unwrap())
    });
    let kb = KkBlocks::new(&sys).unwrap();
    cr.bench_function("kk_sector_i_n1_N4", |b| {
        b.iter(|| kb.homotopy_path(kk::Path::I, 0.5, 4).unwrap())
    });
    cr.bench_function("gysin_k_theory", |b| {
        b.iter(|| kk::gysin_k_theory(black_box(7)).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = linalg, systems, kk_blocks
}
criterion_main!(benches);
