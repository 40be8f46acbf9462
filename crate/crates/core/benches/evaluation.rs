use std::hint::black_box;

use arbitration_core::{
    ArbitrationGraph, ArbitratorSpec, BehaviorOption, BehaviorSignals, EvalMode, FnBehavior, Node,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

/// Stand-in for an expensive applicability check (corridor construction,
/// prediction sweeps).
fn busy_signal(seed: u64, work: u32) -> bool {
    let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    for _ in 0..work {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
    }
    !x.is_multiple_of(3)
}

fn wide_graph(groups: usize, leaves: usize, work: u32) -> ArbitrationGraph<u64, usize> {
    let options = (0..groups).map(|g| {
        let leaves = (0..leaves).map(move |l| {
            let idx = g * leaves + l;
            BehaviorOption::new(Node::block(
                FnBehavior::new(
                    format!("leaf{idx}"),
                    move |env: &u64, _| {
                        Ok(BehaviorSignals::new(busy_signal(*env + idx as u64, work), false))
                    },
                    move |_| Ok(idx),
                )
                .with_cost(move |env: &u64| Ok(((*env + idx as u64) % 17) as f64)),
            ))
        });
        BehaviorOption::new(Node::arbitrator(
            format!("group{g}"),
            ArbitratorSpec::cost(0.5),
            leaves,
        ))
    });
    let fallback = BehaviorOption::new(Node::block(FnBehavior::new(
        "fallback",
        |_: &u64, _| Ok(BehaviorSignals::new(true, false)),
        |_| Ok(usize::MAX),
    )));
    let root = Node::arbitrator("root", ArbitratorSpec::priority(), options.chain([fallback]));
    ArbitrationGraph::new(root).expect("valid graph")
}

fn bench_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("graph_step");
    for work in [200u32, 20_000] {
        for (label, mode) in [("sequential", EvalMode::Sequential), ("parallel", EvalMode::Parallel)] {
            let mut graph = wide_graph(8, 8, work).with_mode(mode);
            let mut tick = 0u64;
            group.bench_with_input(BenchmarkId::new(label, work), &work, |b, _| {
                b.iter(|| {
                    tick += 1;
                    black_box(graph.step(&tick, tick as f64).map(|(cmd, _)| cmd).ok())
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bench_step);
criterion_main!(benches);
