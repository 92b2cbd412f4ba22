//! Acceptance gates, one test per release criterion. Each test prints a
//! single `criterion N <name>: PASS|FAIL` line (run with `--nocapture` to see
//! the scorecard) and pins every tolerance as a named constant, covering:
//! solver exactness against exhaustive enumeration, plan validity across
//! policies, recovery/MTTR/accuracy brackets on the bundled scenarios, the
//! MTTR decomposition, detector bounds, reactive-planner scalability, and
//! bit-level determinism.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use failsim::baselines::{plan_full_cold, plan_full_warm, Policy};
use failsim::cluster::{AppIx, ServerIx};
use failsim::detector::Detector;
use failsim::engine::{run, RunArtifacts};
use failsim::metrics::RunMetrics;
use failsim::proactive::{solve_warm, validate_plan, PlacementPlan, Violation, WarmProblem};
use failsim::progressive::{plan_failover, FailoverRequest, PlanApp};
use failsim::scenario::{select_k, Scenario};
use failsim::sweep::{expand, run_batch, SweepAxis, SweepJob};
use failsim::synth::{self, derive_seed, SynthSpec};

// ── pinned tolerances ──────────────────────────────────────────────────────

/// Criterion 1: instances compared against the exhaustive oracle, and how
/// closely the objectives must agree (f64 summation noise only).
const ENUM_INSTANCES: u64 = 200;
const ENUM_OBJECTIVE_EPS: f64 = 1e-9;
const ENUM_TIME_BUDGET: Duration = Duration::from_secs(5);

/// Criterion 2: random instances validated per policy.
const VALIDITY_INSTANCES: u64 = 1000;

/// Criterion 3: recovery/MTTR/accuracy brackets on the bundled six-server
/// reference scenario, means over its six rotated single-server failures.
const REF_FULL_WARM_RECOVERY_PCT: (f64, f64) = (75.0, 95.0);
const REF_FULL_COLD_RECOVERY_PCT: (f64, f64) = (85.0, 100.0);
const REF_MTTR_RATIO_MAX: f64 = 0.6;
const REF_ACC_REDUCTION_MAX_PCT: f64 = 1.5;
const REF_TIME_BUDGET: Duration = Duration::from_secs(30);

/// Criterion 4: headroom sweep on the bundled 100-server workload. The
/// baseline brackets apply at the tightest (10%) point.
const HEADROOM_POINTS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
const TIGHT_ACC_REDUCTION_MAX_PCT: f64 = 6.0;
const TIGHT_FULL_WARM_RECOVERY_PCT: (f64, f64) = (40.5, 60.5);
const TIGHT_FULL_WARM_K_RECOVERY_PCT: (f64, f64) = (56.0, 76.0);
const TIGHT_FULL_COLD_RECOVERY_PCT: (f64, f64) = (69.8, 89.8);
const SWEEP_TIME_BUDGET: Duration = Duration::from_secs(300);

/// Criterion 5: MTTR decomposition. The exact values hold in the bundled
/// zero-jitter timing configuration: a crash at 1035 ms is declared by the
/// 1100 ms detector scan (65 ms), and loads charge fetch + load + notify.
const WARM_MTTR_BRACKET_MS: (f64, f64) = (30.0, 150.0);
const WARM_MTTR_EXACT_MS: f64 = 65.0 + 10.0;
const COLD_158_BRACKET_MS: (f64, f64) = (1000.0, 1600.0);
const COLD_158_EXACT_MS: f64 = 65.0 + 800.0 + 441.0 + 10.0;
const PROGRESSIVE_MTTR_REDUCTION_MIN: f64 = 0.60;

/// Criterion 6: multi-site failures on the bundled ten-site workload.
const FULL_RECOVERY_THROUGH_SITES: u32 = 5;
const SITE_GAP_MIN_PTS: f64 = 30.0;

/// Criterion 7: declaration latency bound (two missed beats plus one scan)
/// and the healthy-stream volume that must produce no false positive.
const HEALTHY_HEARTBEATS: u64 = 1_000_000;

/// Criterion 8: reactive-planner scale point.
const PLANNER_APPS: usize = 3000;
const PLANNER_SERVERS: usize = 500;
const PLANNER_VARIANTS: usize = 4;
const PLANNER_TIME_BUDGET: Duration = Duration::from_secs(4);

// ── reporting ──────────────────────────────────────────────────────────────

/// One acceptance criterion: checks accumulate, the verdict prints as a
/// single line, and failures still surface through the usual panic path so
/// the harness counts the test red.
struct Gate {
    label: &'static str,
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Gate {
    fn new(label: &'static str) -> Gate {
        Gate {
            label,
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: String) {
        if !ok {
            self.failures.push(what);
        }
    }

    fn note(&mut self, note: String) {
        self.notes.push(note);
    }

    fn finish(self) {
        let verdict = if self.failures.is_empty() {
            "PASS"
        } else {
            "FAIL"
        };
        let notes = if self.notes.is_empty() {
            String::new()
        } else {
            format!(" ({})", self.notes.join(", "))
        };
        println!("{}: {verdict}{notes}", self.label);
        assert!(
            self.failures.is_empty(),
            "{}: {}",
            self.label,
            self.failures.join("; ")
        );
    }
}

// ── shared helpers ─────────────────────────────────────────────────────────

fn scenario_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn within(x: f64, bracket: (f64, f64)) -> bool {
    x >= bracket.0 && x <= bracket.1
}

/// Mean of one metric over the runs of a (policy, axis value) group.
fn group_mean(
    jobs: &[SweepJob],
    runs: &[RunArtifacts],
    policy: Policy,
    value: Option<&str>,
    f: impl Fn(&RunMetrics) -> f64,
) -> f64 {
    let vals: Vec<f64> = jobs
        .iter()
        .zip(runs)
        .filter(|(j, _)| j.policy == policy && value.map_or(true, |v| j.value == v))
        .map(|(_, r)| f(&r.metrics))
        .collect();
    assert!(
        !vals.is_empty(),
        "no runs matched policy {} value {value:?}",
        policy.name()
    );
    mean(&vals)
}

fn recovery(m: &RunMetrics) -> f64 {
    m.recovery_rate_pct
        .expect("run injected at least one failure")
}

fn mttr(m: &RunMetrics) -> f64 {
    m.mean_mttr_ms.expect("run recovered at least one app")
}

fn acc_reduction(m: &RunMetrics) -> f64 {
    m.acc_reduction_pct.expect("run recovered at least one app")
}

// ── criterion 1: exact solver vs exhaustive enumeration ───────────────────

#[test]
fn c1_exact_solver_matches_exhaustive_enumeration() {
    let mut gate = Gate::new("criterion 1 exact-solver-vs-enumeration");
    let started = Instant::now();
    let (mut feasible, mut infeasible) = (0u64, 0u64);
    for i in 0..ENUM_INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(0xACC0_0001, i));
        let spec = SynthSpec {
            families: rng.gen_range(1..=3),
            variants_min: 1,
            variants_max: rng.gen_range(1..=3),
            mem_min_mib: 16,
            mem_max_mib: rng.gen_range(100..=500),
            servers: rng.gen_range(2..=4),
            sites: rng.gen_range(1..=2),
            apps: rng.gen_range(2..=6),
            slo_ms: if rng.gen_bool(0.25) {
                rng.gen_range(0.05..0.6)
            } else {
                1e9
            },
            target_mem_utilization: rng.gen_range(0.3..0.7),
            ..SynthSpec::default()
        };
        let (catalog, state) = synth::instance(derive_seed(0xACC0_0001, i), &spec).unwrap();
        let k_fraction = if rng.gen_bool(0.6) { 1.0 } else { 0.5 };
        let k: Vec<AppIx> = select_k(&state, k_fraction).into_iter().collect();
        let mut problem = WarmProblem::build(&catalog, &state, &k);
        problem.alpha = rng.gen_bool(0.7).then(|| rng.gen_range(0.0..0.4));
        problem.site_independence = rng.gen_bool(0.3);

        let plan = solve_warm(&catalog, &problem).unwrap();
        match common::enumerate_optimum(&problem) {
            Some(optimum) => {
                feasible += 1;
                gate.check(
                    plan.feasible,
                    format!("instance {i}: solver infeasible, enumeration found {optimum:.6}"),
                );
                gate.check(
                    !plan.used_fallback,
                    format!("instance {i}: heuristic fallback ran inside the exact budget"),
                );
                if plan.feasible {
                    gate.check(
                        (plan.objective - optimum).abs() <= ENUM_OBJECTIVE_EPS,
                        format!(
                            "instance {i}: objective {:.9} != enumerated optimum {optimum:.9}",
                            plan.objective
                        ),
                    );
                }
            }
            None => {
                infeasible += 1;
                gate.check(
                    !plan.feasible,
                    format!("instance {i}: solver feasible where enumeration found nothing"),
                );
            }
        }
    }
    let elapsed = started.elapsed();
    gate.check(
        elapsed < ENUM_TIME_BUDGET,
        format!("{ENUM_INSTANCES} instances took {elapsed:.2?}, budget {ENUM_TIME_BUDGET:?}"),
    );
    gate.note(format!(
        "{feasible} feasible + {infeasible} infeasible instances in {elapsed:.2?}"
    ));
    gate.finish();
}

// ── criterion 2: every policy's plans validate clean ───────────────────────

fn tally(total: &mut usize, samples: &mut Vec<String>, who: &str, i: u64, found: Vec<Violation>) {
    if found.is_empty() {
        return;
    }
    *total += found.len();
    if samples.len() < 5 {
        samples.push(format!("instance {i} {who}: {}", found[0]));
    }
}

#[test]
fn c2_plans_satisfy_placement_constraints_for_every_policy() {
    let mut gate = Gate::new("criterion 2 plan-validity");
    let started = Instant::now();
    let mut total = 0usize;
    let mut samples: Vec<String> = Vec::new();
    let mut errors: Vec<String> = Vec::new();
    let mut plans = 0u64;
    let mut resampled = 0u64;
    for i in 0..VALIDITY_INSTANCES {
        // Tightly-utilized draws can be unsatisfiable at generation time (no
        // server fits some primary); resample those deterministically.
        let mut attempt = 0u64;
        let (spec, catalog, state, mut rng) = loop {
            let salt = derive_seed(0xACC0_0002, i + 7919 * attempt);
            let mut rng = ChaCha8Rng::seed_from_u64(salt);
            let spec = SynthSpec {
                families: rng.gen_range(2..=4),
                variants_min: 1,
                variants_max: rng.gen_range(1..=4),
                mem_min_mib: 16,
                mem_max_mib: rng.gen_range(128..=700),
                servers: rng.gen_range(3..=6),
                sites: rng.gen_range(2..=3),
                apps: rng.gen_range(3..=14),
                slo_ms: if rng.gen_bool(0.2) {
                    rng.gen_range(0.05..0.7)
                } else {
                    1e9
                },
                target_mem_utilization: rng.gen_range(0.3..0.7),
                ..SynthSpec::default()
            };
            match synth::instance(salt, &spec) {
                Ok((catalog, state)) => break (spec, catalog, state, rng),
                Err(_) => {
                    resampled += 1;
                    attempt += 1;
                    assert!(attempt < 50, "instance {i}: generation kept failing");
                }
            }
        };
        let k = select_k(&state, 0.5);
        let k_vec: Vec<AppIx> = k.iter().copied().collect();
        let all: Vec<AppIx> = state.app_ixs().collect();

        // Warm planning under randomized reservation/independence/replica
        // knobs; a low tuple budget forces the heuristic path now and then.
        let mut problem = WarmProblem::build(&catalog, &state, &k_vec);
        problem.alpha = Some(rng.gen_range(0.0..0.4));
        problem.site_independence = rng.gen_bool(0.3);
        problem.partial_k = rng.gen_bool(0.15);
        problem.require_coverage = !problem.partial_k;
        if rng.gen_bool(0.15) && spec.apps <= 8 {
            problem.replicas_per_app = 2;
            problem.budget_tuples = 5_000;
        } else if rng.gen_bool(0.4) {
            problem.budget_tuples = 1; // below any tuple count: heuristic path
        } else {
            problem.budget_tuples = 5_000; // exact entry with a bounded search
        }
        match solve_warm(&catalog, &problem) {
            Ok(plan) if plan.feasible => {
                plans += 1;
                tally(
                    &mut total,
                    &mut samples,
                    "two-step",
                    i,
                    validate_plan(&catalog, &plan, &problem),
                );
            }
            Ok(plan) => {
                if plan.violated.is_none() {
                    errors.push(format!("instance {i}: infeasible plan names no constraint"));
                }
            }
            // Replica placement past the exact budget declines by contract.
            Err(_) if problem.replicas_per_app > 1 => {}
            Err(e) => errors.push(format!("instance {i}: {e}")),
        }

        // Full-size warm baselines: one warms everyone, one only K.
        let mut problem_all = WarmProblem::build(&catalog, &state, &all);
        problem_all.require_coverage = false; // skipped misfits are legitimate
        let apps: Vec<PlanApp> = problem_all
            .apps
            .iter()
            .map(|a| PlanApp {
                app: a.app,
                app_id: a.app_id.clone(),
                family: a.family,
                rate: a.rate,
                slo_ms: a.slo_ms,
                forbidden_server: Some(a.primary_server),
                forbidden_site: None,
            })
            .collect();
        for (who, everyone) in [("full-warm", true), ("full-warm-k", false)] {
            let plan = plan_full_warm(&catalog, &problem_all.servers, &apps, &k, everyone);
            plans += 1;
            tally(
                &mut total,
                &mut samples,
                who,
                i,
                validate_plan(&catalog, &plan, &problem_all),
            );
        }

        // Cold placement planned at a server failure.
        let failed = state.app(AppIx(0)).primary_server;
        let mut failed_state = state.clone();
        failed_state.fail_server(failed);
        let affected: Vec<AppIx> = all
            .iter()
            .copied()
            .filter(|&a| state.app(a).primary_server == failed)
            .collect();
        let mut problem_cold = WarmProblem::build(&catalog, &failed_state, &affected);
        problem_cold.require_coverage = false;
        let cold_apps: Vec<PlanApp> = problem_cold
            .apps
            .iter()
            .map(|a| PlanApp {
                app: a.app,
                app_id: a.app_id.clone(),
                family: a.family,
                rate: a.rate,
                slo_ms: a.slo_ms,
                forbidden_server: Some(failed),
                forbidden_site: None,
            })
            .collect();
        let mut cold_rng = ChaCha8Rng::seed_from_u64(derive_seed(0xACC0_0002, 100_000 + i));
        let (placements, unrecovered) = plan_full_cold(
            &catalog,
            &problem_cold.servers,
            &cold_apps,
            &k,
            &mut cold_rng,
        );
        let cold_plan = PlacementPlan {
            warm: placements
                .iter()
                .map(|p| (p.app, vec![(p.selected, p.server)]))
                .collect(),
            objective: 0.0,
            feasible: true,
            violated: None,
            detail: None,
            skipped: unrecovered,
            used_fallback: false,
        };
        plans += 1;
        tally(
            &mut total,
            &mut samples,
            "full-cold",
            i,
            validate_plan(&catalog, &cold_plan, &problem_cold),
        );
    }
    gate.check(
        errors.is_empty(),
        format!("planning errors: {}", errors.join("; ")),
    );
    gate.check(
        total == 0,
        format!("{total} violations, first: {}", samples.join("; ")),
    );
    gate.note(format!(
        "{plans} plans over {VALIDITY_INSTANCES} instances ({resampled} draws resampled) in {:.2?}",
        started.elapsed()
    ));
    gate.finish();
}

// ── criterion 3: reference-scenario brackets ───────────────────────────────

#[test]
fn c3_reference_scenario_recovery_and_mttr_brackets() {
    let mut gate = Gate::new("criterion 3 reference-scenario-brackets");
    let started = Instant::now();
    let base = Scenario::load(&scenario_path("scenarios/testbed/one-server.toml")).unwrap();
    let (catalog, state) = base.load_inputs().unwrap();
    let jobs = expand(&base, &SweepAxis::Policy(Policy::ALL.to_vec()), &[]).unwrap();
    let runs = run_batch(&catalog, &state, &jobs, true).unwrap();
    let rec = |p| group_mean(&jobs, &runs, p, None, recovery);
    let mttr_of = |p| group_mean(&jobs, &runs, p, None, mttr);

    let ts_rec = rec(Policy::TwoStep);
    let fw_rec = rec(Policy::FullWarm);
    let fc_rec = rec(Policy::FullCold);
    let ts_mttr = mttr_of(Policy::TwoStep);
    let fwk_mttr = mttr_of(Policy::FullWarmK);
    let ts_acc = group_mean(&jobs, &runs, Policy::TwoStep, None, acc_reduction);

    gate.check(
        ts_rec == 100.0,
        format!("two-step recovery {ts_rec:.2}% != 100%"),
    );
    gate.check(
        within(fw_rec, REF_FULL_WARM_RECOVERY_PCT),
        format!("full-warm recovery {fw_rec:.2}% outside {REF_FULL_WARM_RECOVERY_PCT:?}"),
    );
    gate.check(
        within(fc_rec, REF_FULL_COLD_RECOVERY_PCT),
        format!("full-cold recovery {fc_rec:.2}% outside {REF_FULL_COLD_RECOVERY_PCT:?}"),
    );
    gate.check(
        ts_mttr <= REF_MTTR_RATIO_MAX * fwk_mttr,
        format!("MTTR {ts_mttr:.1} ms > {REF_MTTR_RATIO_MAX} x full-warm-k {fwk_mttr:.1} ms"),
    );
    gate.check(
        ts_acc <= REF_ACC_REDUCTION_MAX_PCT,
        format!("accuracy reduction {ts_acc:.2}% > {REF_ACC_REDUCTION_MAX_PCT}%"),
    );
    let elapsed = started.elapsed();
    gate.check(
        elapsed < REF_TIME_BUDGET,
        format!("took {elapsed:.2?}, budget {REF_TIME_BUDGET:?}"),
    );
    gate.note(format!(
        "recovery ts {ts_rec:.1} / fw {fw_rec:.1} / fc {fc_rec:.1}, mttr ratio {:.2}, acc {ts_acc:.2}%",
        ts_mttr / fwk_mttr
    ));
    gate.finish();
}

// ── criterion 4: headroom sweep brackets ───────────────────────────────────

#[test]
fn c4_headroom_sweep_recovery_and_accuracy_brackets() {
    let mut gate = Gate::new("criterion 4 headroom-sweep-brackets");
    let started = Instant::now();
    let base = Scenario::load(&scenario_path("scenarios/large/one-server.toml")).unwrap();
    let (catalog, state) = base.load_inputs().unwrap();

    let axis = SweepAxis::Headroom(HEADROOM_POINTS.to_vec());
    let ts_jobs = expand(&base, &axis, &[Policy::TwoStep]).unwrap();
    let ts_runs = run_batch(&catalog, &state, &ts_jobs, true).unwrap();
    for h in HEADROOM_POINTS {
        let key = format!("{h}");
        let r = group_mean(&ts_jobs, &ts_runs, Policy::TwoStep, Some(&key), recovery);
        gate.check(
            r == 100.0,
            format!("two-step recovery {r:.2}% != 100% at headroom {h}"),
        );
    }
    let tight_key = format!("{}", HEADROOM_POINTS[0]);
    let ts_acc = group_mean(
        &ts_jobs,
        &ts_runs,
        Policy::TwoStep,
        Some(&tight_key),
        acc_reduction,
    );
    gate.check(
        ts_acc <= TIGHT_ACC_REDUCTION_MAX_PCT,
        format!(
            "accuracy reduction {ts_acc:.2}% > {TIGHT_ACC_REDUCTION_MAX_PCT}% at tight headroom"
        ),
    );

    // Baselines at the tightest point only; each bracket, then the ordering.
    let mut tight = base.clone();
    tight.params.headroom = HEADROOM_POINTS[0];
    let b_axis = SweepAxis::Policy(vec![Policy::FullWarm, Policy::FullWarmK, Policy::FullCold]);
    let b_jobs = expand(&tight, &b_axis, &[]).unwrap();
    let b_runs = run_batch(&catalog, &state, &b_jobs, true).unwrap();
    let fw = group_mean(&b_jobs, &b_runs, Policy::FullWarm, None, recovery);
    let fwk = group_mean(&b_jobs, &b_runs, Policy::FullWarmK, None, recovery);
    let fc = group_mean(&b_jobs, &b_runs, Policy::FullCold, None, recovery);
    gate.check(
        within(fw, TIGHT_FULL_WARM_RECOVERY_PCT),
        format!("full-warm recovery {fw:.2}% outside {TIGHT_FULL_WARM_RECOVERY_PCT:?}"),
    );
    gate.check(
        within(fwk, TIGHT_FULL_WARM_K_RECOVERY_PCT),
        format!("full-warm-k recovery {fwk:.2}% outside {TIGHT_FULL_WARM_K_RECOVERY_PCT:?}"),
    );
    gate.check(
        within(fc, TIGHT_FULL_COLD_RECOVERY_PCT),
        format!("full-cold recovery {fc:.2}% outside {TIGHT_FULL_COLD_RECOVERY_PCT:?}"),
    );
    gate.check(
        fw < fwk && fwk < fc,
        format!("recovery order violated: fw {fw:.2} / fwk {fwk:.2} / fc {fc:.2}"),
    );
    let elapsed = started.elapsed();
    gate.check(
        elapsed < SWEEP_TIME_BUDGET,
        format!("took {elapsed:.2?}, budget {SWEEP_TIME_BUDGET:?}"),
    );
    gate.note(format!(
        "tight point: ts 100/{ts_acc:.2}%, fw {fw:.1} / fwk {fwk:.1} / fc {fc:.1}, {elapsed:.2?}"
    ));
    gate.finish();
}

// ── criterion 5: MTTR decomposition ────────────────────────────────────────

const MINI_CATALOG: &str = r#"schema_version = 1

[[families]]
family_id = "pin"
[[families.variants]]
variant_id = "pin-full"
raw_accuracy = 0.90
mem_demand_mib = 158
compute_fraction = 0.0

[[families]]
family_id = "lane"
[[families.variants]]
variant_id = "lane-lite"
raw_accuracy = 0.72
mem_demand_mib = 158
compute_fraction = 0.0
[[families.variants]]
variant_id = "lane-full"
raw_accuracy = 0.90
mem_demand_mib = 1500
compute_fraction = 0.0
"#;

fn mini_cluster(family: &str) -> String {
    format!(
        "schema_version = 1\n\n\
         [[servers]]\nserver_id = \"s1\"\nsite_id = \"east\"\nmem_gib = 4.0\ncompute = 1.0\n\n\
         [[servers]]\nserver_id = \"s2\"\nsite_id = \"west\"\nmem_gib = 4.0\ncompute = 1.0\n\n\
         [[apps]]\napp_id = \"svc\"\nfamily_id = \"{family}\"\nprimary_server = \"s1\"\n\
         rate = 1.0\nslo_ms = 1e9\n"
    )
}

fn mini_scenario(name: &str, cluster: &str, policy: &str, params: &str) -> String {
    format!(
        "schema_version = 1\nname = \"{name}\"\ncatalog = \"catalog.toml\"\n\
         cluster = \"{cluster}\"\npolicy = \"{policy}\"\nhorizon_ms = 10000\nseed = 11\n\
         repeats = 1\n\n[params]\nheadroom = 0.5\n{params}\n\n\
         [[injections]]\nat_ms = 1035\nkind = \"server\"\ntargets = [\"s1\"]\n"
    )
}

#[test]
fn c5_mttr_decomposition_and_progressive_loading_gain() {
    let mut gate = Gate::new("criterion 5 mttr-decomposition");
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| std::fs::write(dir.path().join(name), text).unwrap();
    write("catalog.toml", MINI_CATALOG);
    write("cluster-pin.toml", &mini_cluster("pin"));
    write("cluster-lane.toml", &mini_cluster("lane"));
    write(
        "warm.toml",
        &mini_scenario(
            "mttr-warm",
            "cluster-pin.toml",
            "two-step",
            "k_fraction = 1.0",
        ),
    );
    write(
        "cold.toml",
        &mini_scenario(
            "mttr-cold",
            "cluster-pin.toml",
            "full-cold",
            "k_fraction = 0.0\nfetch_ms = 800",
        ),
    );
    write(
        "progressive.toml",
        &mini_scenario(
            "mttr-progressive",
            "cluster-lane.toml",
            "two-step",
            "k_fraction = 0.0\nfetch_ms = 800\nprogressive_loading = true",
        ),
    );
    write(
        "direct.toml",
        &mini_scenario(
            "mttr-direct",
            "cluster-lane.toml",
            "two-step",
            "k_fraction = 0.0\nfetch_ms = 800\nprogressive_loading = false",
        ),
    );
    let run_one = |file: &str| -> RunArtifacts {
        let sc = Scenario::load(&dir.path().join(file)).unwrap();
        let (catalog, state) = sc.load_inputs().unwrap();
        run(&catalog, &state, &sc, 0).unwrap()
    };

    // Warm failover pays detection + notify, nothing else.
    let warm = run_one("warm.toml");
    let warm_mttr = mttr(&warm.metrics);
    gate.check(
        within(warm_mttr, WARM_MTTR_BRACKET_MS),
        format!("warm MTTR {warm_mttr} ms outside {WARM_MTTR_BRACKET_MS:?}"),
    );
    gate.check(
        warm_mttr == WARM_MTTR_EXACT_MS,
        format!("warm MTTR {warm_mttr} ms != exact {WARM_MTTR_EXACT_MS} ms"),
    );
    gate.check(
        warm.metrics.per_app.iter().all(|r| r.warm_path),
        "warm scenario recovered through a load instead of the standby".into(),
    );

    // A 158 MiB cold load adds fetch + load to the same detection + notify.
    let cold = run_one("cold.toml");
    let cold_mttr = mttr(&cold.metrics);
    gate.check(
        within(cold_mttr, COLD_158_BRACKET_MS),
        format!("cold-158 MTTR {cold_mttr} ms outside {COLD_158_BRACKET_MS:?}"),
    );
    gate.check(
        cold_mttr == COLD_158_EXACT_MS,
        format!("cold-158 MTTR {cold_mttr} ms != exact {COLD_158_EXACT_MS} ms"),
    );

    // Loading the small variant first, upgrading later, beats loading the
    // full-size variant directly by a wide margin.
    let progressive = mttr(&run_one("progressive.toml").metrics);
    let direct = mttr(&run_one("direct.toml").metrics);
    let reduction = 1.0 - progressive / direct;
    gate.check(
        reduction >= PROGRESSIVE_MTTR_REDUCTION_MIN,
        format!(
            "progressive {progressive} ms vs direct {direct} ms reduces MTTR by only {:.1}%",
            reduction * 100.0
        ),
    );
    gate.note(format!(
        "warm {warm_mttr} ms, cold-158 {cold_mttr} ms, progressive gain {:.1}%",
        reduction * 100.0
    ));
    gate.finish();
}

// ── criterion 6: site-failure margins ──────────────────────────────────────

#[test]
fn c6_site_failure_sweep_recovery_margins() {
    let mut gate = Gate::new("criterion 6 site-failure-margins");
    let started = Instant::now();
    let base = Scenario::load(&scenario_path("scenarios/large/site-failures.toml")).unwrap();
    let (catalog, state) = base.load_inputs().unwrap();

    let counts: Vec<u32> = (1..=7).collect();
    let ts_jobs = expand(&base, &SweepAxis::FailedSites(counts), &[Policy::TwoStep]).unwrap();
    let ts_runs = run_batch(&catalog, &state, &ts_jobs, true).unwrap();
    let mut by_count: BTreeMap<u32, f64> = BTreeMap::new();
    for sites in 1..=7u32 {
        let key = format!("{sites}");
        let r = group_mean(&ts_jobs, &ts_runs, Policy::TwoStep, Some(&key), recovery);
        by_count.insert(sites, r);
        if sites <= FULL_RECOVERY_THROUGH_SITES {
            gate.check(
                r == 100.0,
                format!("two-step recovery {r:.2}% != 100% at {sites} sites"),
            );
        }
    }

    // Half the fleet down: the gap over the cold baseline must stay wide.
    let fc_jobs = expand(&base, &SweepAxis::FailedSites(vec![5]), &[Policy::FullCold]).unwrap();
    let fc_runs = run_batch(&catalog, &state, &fc_jobs, true).unwrap();
    let fc5 = group_mean(&fc_jobs, &fc_runs, Policy::FullCold, None, recovery);
    let ts5 = by_count[&5];
    gate.check(
        ts5 - fc5 >= SITE_GAP_MIN_PTS,
        format!(
            "recovery gap at 5 sites {:.2} pts < {SITE_GAP_MIN_PTS}",
            ts5 - fc5
        ),
    );
    let elapsed = started.elapsed();
    gate.check(
        elapsed < SWEEP_TIME_BUDGET,
        format!("took {elapsed:.2?}, budget {SWEEP_TIME_BUDGET:?}"),
    );
    gate.note(format!(
        "ts at 5/6/7 sites {:.1}/{:.1}/{:.1}, full-cold at 5 {fc5:.1}, {elapsed:.2?}",
        by_count[&5], by_count[&6], by_count[&7]
    ));
    gate.finish();
}

// ── criterion 7: detector properties ───────────────────────────────────────

#[test]
fn c7_detector_latency_bound_and_no_false_positives() {
    let mut gate = Gate::new("criterion 7 detector-properties");
    const MS: u64 = 1_000;
    let (period, check) = (20 * MS, 100 * MS); // default timings
    let bound = 2 * period + check;

    // Crash instant swept across one joint heartbeat x scan phase cycle on a
    // 0.25 ms grid; declaration latency must stay within two missed beats
    // plus one scan everywhere.
    let mut worst = 0u64;
    let mut undetected: Option<u64> = None;
    for crash in (0..100 * MS).step_by(250) {
        let mut d = Detector::new(period, check, [ServerIx(0)]);
        let mut t = 0;
        while t <= crash {
            d.record_heartbeat(ServerIx(0), t).unwrap();
            t += period;
        }
        let mut scan = (crash / check + 1) * check;
        let declared = loop {
            if !d.check(scan).is_empty() {
                break Some(scan);
            }
            scan += check;
            if scan > crash + 10 * check {
                break None;
            }
        };
        match declared {
            Some(at) => worst = worst.max(at - crash),
            None => undetected = undetected.or(Some(crash)),
        }
    }
    gate.check(
        undetected.is_none(),
        format!("crash at {undetected:?} us never declared"),
    );
    gate.check(
        worst <= bound,
        format!("worst declaration latency {worst} us exceeds 2T + scan = {bound} us"),
    );

    // A healthy fleet with arbitrary per-server beat phases: a million
    // heartbeats, zero declarations.
    let offsets = [0u64, 3_000, 7_250, 12_500, 19_750];
    let servers: Vec<ServerIx> = (0..offsets.len()).map(ServerIx).collect();
    let mut d = Detector::new(period, check, servers.clone());
    let mut next_beat = offsets;
    let mut next_check = check;
    let mut beats = 0u64;
    let mut declared = Vec::new();
    while beats < HEALTHY_HEARTBEATS {
        let s = (0..next_beat.len()).min_by_key(|&s| next_beat[s]).unwrap();
        if next_beat[s] <= next_check {
            d.record_heartbeat(servers[s], next_beat[s]).unwrap();
            next_beat[s] += period;
            beats += 1;
        } else {
            declared.extend(d.check(next_check));
            next_check += check;
        }
    }
    gate.check(
        declared.is_empty(),
        format!(
            "{} false positives over {HEALTHY_HEARTBEATS} healthy heartbeats",
            declared.len()
        ),
    );
    gate.note(format!(
        "worst latency {:.1} ms (bound {:.1} ms)",
        worst as f64 / 1e3,
        bound as f64 / 1e3
    ));
    gate.finish();
}

// ── criterion 8: reactive-planner scalability ──────────────────────────────

#[test]
fn c8_reactive_planner_scales_to_large_fleets() {
    let mut gate = Gate::new("criterion 8 planner-scalability");
    let spec = SynthSpec {
        families: 12,
        variants_min: PLANNER_VARIANTS,
        variants_max: PLANNER_VARIANTS,
        mem_min_mib: 40,
        mem_max_mib: 900,
        servers: PLANNER_SERVERS,
        sites: 10,
        apps: PLANNER_APPS,
        target_mem_utilization: 0.45,
        ..SynthSpec::default()
    };
    let (catalog, state) = synth::instance(0xACC0_0008, &spec).unwrap();
    let request = FailoverRequest::full_replan(&state, true);
    let started = Instant::now();
    let decision = plan_failover(&catalog, &request);
    let elapsed = started.elapsed();

    gate.check(
        elapsed < PLANNER_TIME_BUDGET,
        format!(
            "replanning {PLANNER_APPS} apps took {elapsed:.2?}, budget {PLANNER_TIME_BUDGET:?}"
        ),
    );
    let accounted = decision.placements.len() + decision.unrecovered.len();
    gate.check(
        accounted == PLANNER_APPS,
        format!("planner accounted for {accounted} of {PLANNER_APPS} apps"),
    );
    gate.check(
        !decision.placements.is_empty(),
        "planner placed nothing".into(),
    );
    gate.note(format!(
        "{} placements / {} unrecovered in {elapsed:.2?}",
        decision.placements.len(),
        decision.unrecovered.len()
    ));
    gate.finish();
}

// ── criterion 9: determinism ───────────────────────────────────────────────

#[test]
fn c9_same_seed_runs_are_byte_identical() {
    let mut gate = Gate::new("criterion 9 determinism");
    let render = |a: &RunArtifacts| -> String {
        let mut s = serde_json::to_string(&a.log).unwrap();
        s.push('\n');
        s.push_str(&serde_json::to_string(&a.metrics).unwrap());
        s
    };
    let cases: Vec<(&str, Policy, u32)> = vec![
        ("scenarios/testbed/one-server.toml", Policy::TwoStep, 0),
        ("scenarios/testbed/one-server.toml", Policy::FullWarm, 0),
        ("scenarios/testbed/one-server.toml", Policy::FullCold, 0),
        ("scenarios/testbed/one-server.toml", Policy::FullWarmK, 0),
        ("scenarios/testbed/one-server.toml", Policy::TwoStep, 3),
        ("scenarios/large/one-server.toml", Policy::TwoStep, 0),
        ("scenarios/large/site-failures.toml", Policy::TwoStep, 2),
    ];
    let count = cases.len();
    for (rel, policy, repeat) in cases {
        let mut sc = Scenario::load(&scenario_path(rel)).unwrap();
        sc.policy = policy;
        let (catalog, state) = sc.load_inputs().unwrap();
        let first = render(&run(&catalog, &state, &sc, repeat).unwrap());
        let second = render(&run(&catalog, &state, &sc, repeat).unwrap());
        gate.check(
            first == second,
            format!(
                "{rel} {} repeat {repeat}: reruns differ byte-for-byte",
                policy.name()
            ),
        );
    }
    gate.note(format!(
        "{count} scenario/policy/repeat combinations re-run"
    ));
    gate.finish();
}
