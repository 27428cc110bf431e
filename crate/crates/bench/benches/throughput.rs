use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use mulenet::secstream::{advance_key, init_key_state, Dsm, Keychain, Window};
use mulenet::simkit::{run, synth, Scenario};
use mulenet_bench::{frames, secret};

fn key_schedule(c: &mut Criterion) {
    let secret = secret();
    let first = init_key_state(&secret).unwrap();
    let mut g = c.benchmark_group("key_schedule");
    g.throughput(Throughput::Elements(1000));
    g.bench_function("advance_1000", |b| {
        b.iter(|| {
            let mut k = first.clone();
            for _ in 0..1000 {
                k = advance_key(&k, &secret);
            }
            black_box(k)
        })
    });
    g.finish();
}

fn dsm(c: &mut Criterion) {
    let frames = frames(1000);
    let mut g = c.benchmark_group("dsm");
    g.throughput(Throughput::Elements(frames.len() as u64));
    g.bench_function("filter_1000", |b| {
        b.iter_batched(
            || Dsm::new(Keychain::new(secret()).unwrap(), Window::SKEW),
            |mut dsm| black_box(dsm.filter_wire(&frames)),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let relay = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/relay.json")).unwrap();
    let busy = synth::busy(1);
    let mut g = c.benchmark_group("run");
    g.sample_size(20);
    g.bench_function("relay", |b| b.iter(|| black_box(run(&relay).unwrap())));
    g.bench_function("busy", |b| b.iter(|| black_box(run(&busy).unwrap())));
    g.finish();
}

criterion_group!(benches, key_schedule, dsm, simulation);
criterion_main!(benches);
