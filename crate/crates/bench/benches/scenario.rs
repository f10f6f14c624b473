use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fivegsim::nwdaf::kpi_packet_counts;
use fivegsim::urllc::measure_delivery_reliability;
use fivegsim::{default_topology, run_scenario, RedundancyKind, ScenarioKind, ScenarioSpec};

fn scenarios(c: &mut Criterion) {
    let topo = default_topology();
    let mut g = c.benchmark_group("scenario");
    g.sample_size(10);
    g.bench_function("idle", |b| b.iter(|| run_scenario(&topo, &ScenarioSpec::new(ScenarioKind::Idle)).unwrap()));
    for ues in [1, 10, 100] {
        let spec = ScenarioSpec::new(ScenarioKind::ManyRequests).ues(ues);
        g.bench_with_input(BenchmarkId::new("many_requests", ues), &spec, |b, spec| {
            b.iter(|| run_scenario(&topo, spec).unwrap())
        });
    }
    for kind in [RedundancyKind::None, RedundancyKind::N3Replication] {
        g.bench_function(BenchmarkId::new("reliability_1k", kind.short_name()), |b| {
            b.iter(|| measure_delivery_reliability(kind, 0.1, 1000, 42))
        });
    }
    g.finish();

    let run = run_scenario(&topo, &ScenarioSpec::new(ScenarioKind::ManyRequests).ues(100)).unwrap();
    c.bench_function("kpi_packet_counts_100ues", |b| {
        b.iter(|| kpi_packet_counts(run.events.events(), run.window, None))
    });
}

criterion_group!(benches, scenarios);
criterion_main!(benches);
