//! Failover-planning throughput at increasing cluster sizes.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use failsim::cluster::AppIx;
use failsim::proactive::WarmProblem;
use failsim::progressive::{plan_failover, FailoverRequest, PlanApp, PlanServer};
use failsim::synth::{self, SynthSpec};

fn request_for(apps: usize, servers: usize, seed: u64) -> (failsim::Catalog, FailoverRequest) {
    let spec = SynthSpec {
        apps,
        servers,
        families: 8.min(apps.max(2)),
        sites: 4.min(servers.max(1)),
        ..SynthSpec::default()
    };
    let (catalog, state) = synth::instance(seed, &spec).expect("synth instance ingests");
    // Fail the first server: its primaries become the affected set.
    let failed = failsim::cluster::ServerIx(0);
    let affected: Vec<PlanApp> = state
        .app_ixs()
        .filter(|&a| state.app(a).primary_server == failed)
        .map(|a| {
            let app = state.app(a);
            PlanApp {
                app: a,
                app_id: app.app_id.clone(),
                family: app.family,
                rate: app.rate,
                slo_ms: app.slo_ms,
                forbidden_server: Some(failed),
                forbidden_site: None,
            }
        })
        .collect();
    let servers: Vec<PlanServer> = state
        .server_ixs()
        .filter(|&s| s != failed)
        .map(|s| {
            let srv = state.server(s);
            PlanServer {
                server: s,
                server_id: srv.server_id.clone(),
                site: srv.site,
                class: srv.class.clone(),
                net_latency_ms: state.site(srv.site).net_latency_ms,
                capacity: srv.capacity,
                free: srv.free(),
            }
        })
        .collect();
    let request = FailoverRequest {
        affected,
        servers,
        progressive_loading: true,
        global_budget: None,
    };
    (catalog, request)
}

fn bench_reactive_heuristic(c: &mut Criterion) {
    let mut group = c.benchmark_group("reactive-plan");
    for &(apps, servers) in &[(50usize, 10usize), (300, 40), (1000, 100), (3000, 200)] {
        let (catalog, request) = request_for(apps, servers, 42);
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{apps}apps-{servers}srv")),
            &(catalog, request),
            |b, (catalog, request)| b.iter(|| plan_failover(catalog, request)),
        );
    }
    group.finish();
}

fn bench_exact_solver(c: &mut Criterion) {
    let mut group = c.benchmark_group("warm-solve");
    for &(apps, servers) in &[(6usize, 3usize), (10, 4), (16, 6)] {
        let spec = SynthSpec {
            apps,
            servers,
            families: 4,
            sites: 2,
            ..SynthSpec::tiny()
        };
        let (catalog, state) = synth::instance(7, &spec).expect("synth instance ingests");
        let k: Vec<AppIx> = state.app_ixs().collect();
        let mut problem = WarmProblem::build(&catalog, &state, &k);
        problem.alpha = Some(0.1);
        problem.partial_k = true;
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{apps}apps-{servers}srv")),
            &(catalog, problem),
            |b, (catalog, problem)| {
                b.iter(|| failsim::proactive::solve_warm(catalog, problem).unwrap())
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bench_reactive_heuristic, bench_exact_solver);
criterion_main!(benches);
