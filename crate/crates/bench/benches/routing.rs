use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;

use hsdn_core::clustering::partition;
use hsdn_core::controller::{compress_rules, compute_backup_rules, compute_paths, Budget, Demand};
use hsdn_core::kernel::topology::id_width;
use hsdn_core::scenario::gen::{grid, random_connected};

fn routing(c: &mut Criterion) {
    let g = grid(6, 6);
    let w = id_width(g.nodes());
    let demands = Demand::all_pairs(g.nodes());
    c.bench_function("compute_paths grid36 all-pairs", |b| {
        b.iter(|| compute_paths(black_box(&g), black_box(&demands), w))
    });

    let plan = compute_paths(&g, &demands, w);
    c.bench_function("compute_backup_rules grid36 B=8", |b| {
        b.iter(|| compute_backup_rules(&g, black_box(&plan), &demands, Budget::rules(8), w))
    });

    let rules = plan.node_rules(hsdn_core::NodeId(15));
    c.bench_function("compress_rules grid36 node", |b| {
        b.iter(|| compress_rules(black_box(&rules)))
    });

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let r = random_connected(&mut rng, 64, 0.05);
    c.bench_function("partition random64 s=8", |b| {
        b.iter(|| partition(black_box(&r), 8))
    });
}

criterion_group!(benches, routing);
criterion_main!(benches);
