use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use carat_bench::{chain, load_fixture};
use carat_core::{build_lp, fixed_point_oracle, trace, TraceOptions};

fn solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    for products in [5, 20, 60] {
        let chain = chain(42, products, true);
        group.bench_with_input(BenchmarkId::new("lp", products), &chain, |b, ch| {
            b.iter(|| {
                build_lp(&ch.graph, &ch.psi, &ch.inlets, &ch.attributes, &ch.elements).unwrap().solve().unwrap()
            })
        });
        group.bench_with_input(BenchmarkId::new("oracle", products), &chain, |b, ch| {
            b.iter(|| fixed_point_oracle(&ch.graph, &ch.psi, &ch.inlets, &ch.attributes, &ch.elements).unwrap())
        });
    }
    group.finish();
}

fn fixtures(c: &mut Criterion) {
    let opts = TraceOptions::default();
    for (name, inlet) in [("tdi", "inlet_case1.csv"), ("bdo", "inlet.csv")] {
        let f = load_fixture(name, inlet);
        c.bench_function(&format!("trace/{name}"), |b| {
            b.iter(|| trace(&f.graph, &f.inlets, &f.cache, Some(&f.provider), &opts).unwrap())
        });
    }
}

criterion_group!(benches, solve, fixtures);
criterion_main!(benches);
