//! Benchmarks for the hot paths: grouping recovery, class enumeration,
//! bottleneck computation and the subset-rank faithfulness check.

use criterion::{criterion_group, criterion_main, Criterion};
use lvsemme::assumptions::{check_lvsemme_faithfulness, minimal_bottleneck_size};
use lvsemme::generate::{generate_model, shuffle_scale_columns, EnforceFlags, GeneratorConfig};
use lvsemme::grouping::compute_aog;
use lvsemme::mixing::build_w_star;
use lvsemme::model::{CanonicalModel, VarId};
use lvsemme::recovery::{enumerate_class, recover_aog};
use std::collections::BTreeSet;
use std::hint::black_box;

fn fixture() -> CanonicalModel {
    let mut cfg = GeneratorConfig::new(3, 3, 3, 2, 0xBE9C);
    cfg.edge_density = 0.45;
    cfg.enforce = EnforceFlags {
        minimal: true,
        conventional_faithful: true,
        lvsemme_faithful: false,
    };
    generate_model(&cfg).expect("benchmark fixture")
}

fn bench_recovery(c: &mut Criterion) {
    let model = fixture();
    let w = build_w_star(&model).unwrap();
    let (shuffled, _, _) = shuffle_scale_columns(&w, 7);
    c.bench_function("recover_aog", |b| {
        b.iter(|| recover_aog(black_box(&shuffled), 1e-9).unwrap())
    });
    let grouping = recover_aog(&shuffled, 1e-9).unwrap();
    c.bench_function("enumerate_class", |b| {
        b.iter(|| enumerate_class(black_box(&shuffled), &grouping, 1e-9).unwrap())
    });
    c.bench_function("compute_aog", |b| b.iter(|| compute_aog(black_box(&model)).unwrap()));
}

fn bench_assumptions(c: &mut Criterion) {
    let model = fixture();
    let diagram = model.diagram();
    let latents: BTreeSet<VarId> = model.latents().into_iter().collect();
    let observed: BTreeSet<VarId> = model.observed().into_iter().collect();
    c.bench_function("minimal_bottleneck", |b| {
        b.iter(|| {
            minimal_bottleneck_size(black_box(&diagram), &latents, &observed).unwrap()
        })
    });
    c.bench_function("lvsemme_check_cap3", |b| {
        b.iter(|| check_lvsemme_faithfulness(black_box(&model), 1e-9, 3).unwrap())
    });
}

criterion_group!(benches, bench_recovery, bench_assumptions);
criterion_main!(benches);
