use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use elcarb_bench::{asks, bids, linear_demand, s0, P_LOLC};
use elcarb_core::equilibrium::tau_profile;
use elcarb_core::rational::int;
use elcarb_core::{clear_auction, clear_market};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn power_exchange(c: &mut Criterion) {
    let mut group = c.benchmark_group("clear_market");
    let demand = linear_demand(150);
    for n in [2, 8, 32] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let a = asks(&mut rng, n, 6);
        group.bench_with_input(BenchmarkId::from_parameter(n), &a, |b, a| {
            b.iter(|| clear_market(black_box(a), &demand, &int(P_LOLC)).unwrap())
        });
    }
    group.finish();
}

fn carbon_auction(c: &mut Criterion) {
    let mut group = c.benchmark_group("clear_auction");
    for n in [2, 8, 32] {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + n as u64);
        let b = bids(&mut rng, n, 4);
        let cap = int(5 * n as i64);
        group.bench_with_input(BenchmarkId::from_parameter(n), &b, |bench, b| {
            bench.iter(|| clear_auction(black_box(b), &cap).unwrap())
        });
    }
    group.finish();
}

fn willingness_profile(c: &mut Criterion) {
    let s = s0();
    c.bench_function("tau_profile/s0", |b| b.iter(|| tau_profile(black_box(&s)).unwrap()));
}

criterion_group!(benches, power_exchange, carbon_auction, willingness_profile);
criterion_main!(benches);
