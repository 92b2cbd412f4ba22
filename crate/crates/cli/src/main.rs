//! Experiment harness for the failover simulator.
//!
//! Four commands: `run` executes one scenario (all repeats) and writes run
//! logs plus metrics; `sweep` crosses one parameter axis with a policy set
//! and writes plot-ready CSV series; `bench-heuristic` times the reactive
//! planner on synthetic instances; `validate` checks input files without
//! running anything. All artifacts carry the artifact schema version and
//! the scenario content hash.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use failsim::baselines::Policy;
use failsim::metrics::{aggregate, Aggregate, RunMetrics};
use failsim::progressive::{plan_failover, FailoverRequest};
use failsim::scenario::{Injection, Scenario, TargetKind, TargetMode};
use failsim::sweep::{expand, run_batch, SweepAxis, SweepJob};
use failsim::synth::{self, SynthSpec};
use failsim::RunArtifacts;

/// Version stamped into every artifact this binary writes.
const ARTIFACT_SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "failsim",
    version,
    about = "Failover simulator experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario (all repeats) and write logs + metrics.
    Run(RunArgs),
    /// Cross one parameter axis with a policy set and write CSV series.
    Sweep(SweepArgs),
    /// Time the reactive planner on synthetic instances.
    BenchHeuristic(BenchArgs),
    /// Parse and cross-check catalog, cluster, and scenario files.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long, visible_alias = "config")]
    scenario: PathBuf,
    /// Artifact directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the scenario's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scenario's repeat count.
    #[arg(long)]
    repeats: Option<u32>,
    /// Override the scenario's policy (two-step, full-warm, full-warm-k, full-cold).
    #[arg(long)]
    policy: Option<String>,
    /// Override the emergency-reservation share α.
    #[arg(long)]
    alpha: Option<f64>,
    /// Override the protected fraction K.
    #[arg(long)]
    k_fraction: Option<f64>,
    /// Override the post-placement free-memory fraction.
    #[arg(long)]
    headroom: Option<f64>,
    /// Replace the scenario's injections with one rotating N-site failure.
    #[arg(long)]
    failed_sites: Option<u32>,
}

#[derive(Args)]
struct SweepArgs {
    /// Base scenario file (TOML).
    #[arg(long, visible_alias = "config")]
    scenario: PathBuf,
    /// Artifact directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the scenario's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the scenario's repeat count.
    #[arg(long)]
    repeats: Option<u32>,
    /// Headroom axis values.
    #[arg(long, value_delimiter = ',')]
    headroom: Vec<String>,
    /// Protected-fraction axis values.
    #[arg(long, value_delimiter = ',')]
    k_fraction: Vec<String>,
    /// Emergency-reservation axis values.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<String>,
    /// Failed-site-count axis values.
    #[arg(long, value_delimiter = ',')]
    failed_sites: Vec<String>,
    /// Policies to cross with the axis — or the axis itself when given alone.
    #[arg(long, value_delimiter = ',')]
    policy: Vec<String>,
}

#[derive(Args)]
struct BenchArgs {
    /// Instance sizes as APPS:SERVERS:VARIANTS triples.
    #[arg(value_name = "APPS:SERVERS:VARIANTS",
          default_values_t = ["10:4:3", "1000:500:4", "3000:500:4"].map(String::from))]
    sizes: Vec<String>,
    /// Write the timing table as CSV into this directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Synthetic-instance seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Timed iterations per size (best and mean are reported).
    #[arg(long, default_value_t = 3)]
    repeats: u32,
}

#[derive(Args)]
struct ValidateArgs {
    /// Scenario file (TOML); its catalog and cluster are checked too.
    #[arg(long, visible_alias = "config")]
    scenario: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::BenchHeuristic(args) => cmd_bench_heuristic(args),
        Cmd::Validate(args) => cmd_validate(args),
    }
}

// ── run ──────────────────────────────────────────────────────────────────

/// Replace the injection list with a single rotating multi-site failure,
/// keeping the first injection's instant (or a third of the horizon).
fn override_failed_sites(scenario: &mut Scenario, count: u32) {
    let at_ms = scenario
        .injections
        .first()
        .map(|i| i.at_ms)
        .unwrap_or(scenario.horizon_ms / 3);
    scenario.injections = vec![Injection {
        at_ms,
        kind: TargetKind::Site,
        mode: TargetMode::Rotate,
        targets: Vec::new(),
        count,
    }];
}

fn apply_overrides(scenario: &mut Scenario, args: &RunArgs) -> Result<()> {
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(repeats) = args.repeats {
        scenario.repeats = repeats;
    }
    if let Some(policy) = &args.policy {
        scenario.policy = Policy::parse(policy)?;
    }
    if let Some(alpha) = args.alpha {
        scenario.params.alpha = alpha;
    }
    if let Some(k) = args.k_fraction {
        scenario.params.k_fraction = k;
    }
    if let Some(headroom) = args.headroom {
        scenario.params.headroom = headroom;
    }
    if let Some(sites) = args.failed_sites {
        override_failed_sites(scenario, sites);
    }
    Ok(())
}

/// Effective parameters echoed into artifact headers so a run can be
/// reproduced even when CLI flags overrode the scenario file.
fn params_json(scenario: &Scenario) -> serde_json::Value {
    let p = &scenario.params;
    serde_json::json!({
        "k_fraction": p.k_fraction,
        "alpha": p.alpha,
        "headroom": p.headroom,
        "replicas_per_app": p.replicas_per_app,
        "site_independence": p.site_independence,
        "progressive_loading": p.progressive_loading,
        "partial_k": p.partial_k,
        "solver_budget_tuples": p.solver_budget_tuples,
        "fetch_ms": p.fetch_ms,
        "notify_ms": p.notify_ms,
        "heartbeat_period_ms": p.heartbeat_period_ms,
        "check_interval_ms": p.check_interval_ms,
        "heartbeat_jitter_ms": p.heartbeat_jitter_ms,
    })
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut scenario = Scenario::load(&args.scenario)
        .with_context(|| format!("loading scenario {}", args.scenario.display()))?;
    apply_overrides(&mut scenario, &args)?;
    let (catalog, state) = scenario.load_inputs().context("loading scenario inputs")?;

    let mut runs = Vec::with_capacity(scenario.repeats as usize);
    for repeat in 0..scenario.repeats {
        runs.push(
            failsim::run(&catalog, &state, &scenario, repeat)
                .with_context(|| format!("repeat {repeat}"))?,
        );
    }

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for artifacts in &runs {
        write_run_log(&args.out, &scenario, artifacts)?;
    }
    let metrics: Vec<&RunMetrics> = runs.iter().map(|r| &r.metrics).collect();
    write_metrics_json(&args.out, &scenario, &metrics)?;
    write_metrics_csv(&args.out.join("metrics.csv"), &scenario, &metrics)?;
    write_per_app_csv(&args.out, &scenario, &runs)?;

    for m in &metrics {
        println!(
            "{} seed={} repeat={} affected={} recovered={} rate={} mttr={} acc_red={}",
            m.policy,
            m.seed,
            m.repeat,
            m.affected,
            m.recovered,
            fmt_opt(m.recovery_rate_pct),
            fmt_opt(m.mean_mttr_ms),
            fmt_opt(m.acc_reduction_pct),
        );
    }
    let owned: Vec<RunMetrics> = runs.iter().map(|r| r.metrics.clone()).collect();
    for agg in aggregate(&owned, false)? {
        println!(
            "aggregate {}: runs={} recovery={} mttr_ms={} acc_reduction={}",
            agg.policy,
            agg.runs,
            fmt_extrema(&agg.recovery_rate_pct),
            fmt_extrema(&agg.mean_mttr_ms),
            fmt_extrema(&agg.acc_reduction_pct),
        );
    }
    println!("artifacts written to {}", args.out.display());
    Ok(())
}

// ── sweep ────────────────────────────────────────────────────────────────

fn resolve_axis(args: &SweepArgs) -> Result<(SweepAxis, Vec<Policy>)> {
    let mut axes: Vec<(&str, &Vec<String>)> = Vec::new();
    for (name, values) in [
        ("headroom", &args.headroom),
        ("k_fraction", &args.k_fraction),
        ("alpha", &args.alpha),
        ("failed_sites", &args.failed_sites),
    ] {
        if !values.is_empty() {
            axes.push((name, values));
        }
    }
    let policies: Vec<Policy> = args
        .policy
        .iter()
        .map(|p| Policy::parse(p))
        .collect::<failsim::Result<_>>()?;
    match axes.as_slice() {
        [] if !policies.is_empty() => Ok((SweepAxis::Policy(policies), Vec::new())),
        [] => bail!(
            "no sweep axis: pass one of --headroom/--k-fraction/--alpha/--failed-sites \
             with a value list, or --policy alone"
        ),
        [(name, values)] => Ok((SweepAxis::parse(name, values)?, policies)),
        many => bail!(
            "more than one sweep axis given ({}); sweeps vary a single axis",
            many.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let mut scenario = Scenario::load(&args.scenario)
        .with_context(|| format!("loading scenario {}", args.scenario.display()))?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(repeats) = args.repeats {
        scenario.repeats = repeats;
    }
    let (catalog, state) = scenario.load_inputs().context("loading scenario inputs")?;
    let (axis, policies) = resolve_axis(&args)?;
    let jobs = expand(&scenario, &axis, &policies)?;
    println!(
        "sweep {} over {}: {} runs ({} repeats each)",
        scenario.name,
        axis.name(),
        jobs.len(),
        scenario.repeats
    );
    let started = Instant::now();
    let runs = run_batch(&catalog, &state, &jobs, true)?;
    println!("completed in {:.2}s", started.elapsed().as_secs_f64());

    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_sweep_runs_csv(&args.out.join("sweep_runs.csv"), &scenario, &jobs, &runs)?;
    let summary = summarize_sweep(&jobs, &runs)?;
    write_sweep_summary_csv(
        &args.out.join("sweep_summary.csv"),
        &scenario,
        &axis,
        &summary,
    )?;

    for (value, agg) in &summary {
        println!(
            "{}={} {}: recovery={} mttr_ms={} acc_reduction={}",
            axis.name(),
            value,
            agg.policy,
            fmt_extrema(&agg.recovery_rate_pct),
            fmt_extrema(&agg.mean_mttr_ms),
            fmt_extrema(&agg.acc_reduction_pct),
        );
    }
    println!("artifacts written to {}", args.out.display());
    Ok(())
}

/// Aggregate sweep runs into one row per (value, policy), in job order.
fn summarize_sweep(jobs: &[SweepJob], runs: &[RunArtifacts]) -> Result<Vec<(String, Aggregate)>> {
    let mut values: Vec<&str> = Vec::new();
    for job in jobs {
        if !values.contains(&job.value.as_str()) {
            values.push(&job.value);
        }
    }
    let mut rows = Vec::new();
    for value in values {
        let group: Vec<RunMetrics> = jobs
            .iter()
            .zip(runs)
            .filter(|(job, _)| job.value == value)
            .map(|(_, run)| run.metrics.clone())
            .collect();
        for agg in aggregate(&group, true)? {
            rows.push((value.to_string(), agg));
        }
    }
    Ok(rows)
}

// ── bench-heuristic ──────────────────────────────────────────────────────

fn parse_size(text: &str) -> Result<(usize, usize, usize)> {
    let parts: Vec<&str> = text.split(':').collect();
    let [apps, servers, variants] = parts.as_slice() else {
        bail!("bad size {text:?}: expected APPS:SERVERS:VARIANTS");
    };
    let parse = |part: &str, what: &str| -> Result<usize> {
        let n: usize = part
            .parse()
            .with_context(|| format!("bad {what} in {text:?}"))?;
        if n == 0 {
            bail!("{what} must be positive in {text:?}");
        }
        Ok(n)
    };
    Ok((
        parse(apps, "app count")?,
        parse(servers, "server count")?,
        parse(variants, "variant count")?,
    ))
}

struct BenchRow {
    apps: usize,
    servers: usize,
    variants: usize,
    placed: usize,
    unrecovered: usize,
    best_ms: f64,
    mean_ms: f64,
}

fn bench_one(
    apps: usize,
    servers: usize,
    variants: usize,
    seed: u64,
    repeats: u32,
) -> Result<BenchRow> {
    let spec = SynthSpec {
        apps,
        servers,
        families: 12.min(apps.max(1)),
        sites: (servers / 50).clamp(1, 10),
        variants_min: variants,
        variants_max: variants,
        ..SynthSpec::default()
    };
    let (catalog, state) = synth::instance(seed, &spec)?;
    let request = FailoverRequest::full_replan(&state, true);
    let mut times_ms = Vec::with_capacity(repeats as usize);
    let mut decision = None;
    for _ in 0..repeats.max(1) {
        let started = Instant::now();
        decision = Some(plan_failover(&catalog, &request));
        times_ms.push(started.elapsed().as_secs_f64() * 1e3);
    }
    let decision = decision.expect("at least one timed iteration");
    let best_ms = times_ms.iter().copied().fold(f64::INFINITY, f64::min);
    let mean_ms = times_ms.iter().sum::<f64>() / times_ms.len() as f64;
    Ok(BenchRow {
        apps,
        servers,
        variants,
        placed: decision.placements.len(),
        unrecovered: decision.unrecovered.len(),
        best_ms,
        mean_ms,
    })
}

fn cmd_bench_heuristic(args: BenchArgs) -> Result<()> {
    let mut rows = Vec::new();
    println!(
        "{:>6} {:>8} {:>9} {:>8} {:>12} {:>10} {:>10}",
        "apps", "servers", "variants", "placed", "unrecovered", "best_ms", "mean_ms"
    );
    for size in &args.sizes {
        let (apps, servers, variants) = parse_size(size)?;
        let row = bench_one(apps, servers, variants, args.seed, args.repeats)?;
        println!(
            "{:>6} {:>8} {:>9} {:>8} {:>12} {:>10.3} {:>10.3}",
            row.apps,
            row.servers,
            row.variants,
            row.placed,
            row.unrecovered,
            row.best_ms,
            row.mean_ms
        );
        rows.push(row);
    }
    if let Some(out) = &args.out {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let path = out.join("bench_heuristic.csv");
        let mut w = csv::Writer::from_path(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        w.write_record([
            "schema_version",
            "seed",
            "apps",
            "servers",
            "variants",
            "placed",
            "unrecovered",
            "best_ms",
            "mean_ms",
        ])?;
        for row in &rows {
            w.write_record([
                ARTIFACT_SCHEMA_VERSION.to_string(),
                args.seed.to_string(),
                row.apps.to_string(),
                row.servers.to_string(),
                row.variants.to_string(),
                row.placed.to_string(),
                row.unrecovered.to_string(),
                format!("{:.3}", row.best_ms),
                format!("{:.3}", row.mean_ms),
            ])?;
        }
        w.flush()?;
        println!("timing table written to {}", path.display());
    }
    Ok(())
}

// ── validate ─────────────────────────────────────────────────────────────

fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let scenario = Scenario::load(&args.scenario)
        .with_context(|| format!("loading scenario {}", args.scenario.display()))?;
    let (catalog, state) = scenario.load_inputs().context("loading scenario inputs")?;
    state.audit().context("capacity audit")?;
    for (which, injection) in scenario.injections.iter().enumerate() {
        if injection.mode != TargetMode::Explicit {
            continue;
        }
        for target in &injection.targets {
            let known = match injection.kind {
                TargetKind::Server => state.server_by_id(target).is_some(),
                TargetKind::Site => state.sites.iter().any(|s| &s.site_id == target),
            };
            if !known {
                bail!("injection {which}: unknown target {target:?}");
            }
        }
    }
    for (which, restore) in scenario.restores.iter().enumerate() {
        for target in &restore.targets {
            let known = match restore.kind {
                TargetKind::Server => state.server_by_id(target).is_some(),
                TargetKind::Site => state.sites.iter().any(|s| &s.site_id == target),
            };
            if !known {
                bail!("restore {which}: unknown target {target:?}");
            }
        }
    }
    let (mem_pct, compute_pct) = state.utilization_pct();
    println!(
        "scenario {} ok (hash {})",
        scenario.name,
        &scenario.hash[..12]
    );
    println!(
        "catalog {}: {} families",
        scenario.catalog_path.display(),
        catalog.families().len()
    );
    println!(
        "cluster {}: {} servers / {} sites / {} apps, {:.1}% mem {:.1}% compute",
        scenario.cluster_path.display(),
        state.servers.len(),
        state.sites.len(),
        state.apps.len(),
        mem_pct,
        compute_pct,
    );
    println!(
        "policy {} horizon {} ms, {} injections, {} restores, {} repeats",
        scenario.policy.name(),
        scenario.horizon_ms,
        scenario.injections.len(),
        scenario.restores.len(),
        scenario.repeats
    );
    Ok(())
}

// ── artifact writers ─────────────────────────────────────────────────────

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into())
}

fn fmt_extrema(x: &Option<failsim::metrics::Extrema>) -> String {
    match x {
        Some(e) => format!("{:.4} [{:.4}, {:.4}]", e.mean, e.min, e.max),
        None => "-".into(),
    }
}

fn csv_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

fn write_run_log(out: &Path, scenario: &Scenario, artifacts: &RunArtifacts) -> Result<()> {
    let path = out.join(format!("{}-r{}.log.jsonl", scenario.name, artifacts.repeat));
    let mut file =
        fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let header = serde_json::json!({
        "schema_version": ARTIFACT_SCHEMA_VERSION,
        "scenario": scenario.name,
        "scenario_hash": scenario.hash,
        "policy": artifacts.policy.name(),
        "seed": artifacts.seed,
        "repeat": artifacts.repeat,
    });
    writeln!(file, "{header}")?;
    for record in &artifacts.log {
        writeln!(file, "{record}")?;
    }
    Ok(())
}

fn write_metrics_json(out: &Path, scenario: &Scenario, runs: &[&RunMetrics]) -> Result<()> {
    let owned: Vec<RunMetrics> = runs.iter().map(|m| (*m).clone()).collect();
    let doc = serde_json::json!({
        "schema_version": ARTIFACT_SCHEMA_VERSION,
        "scenario": scenario.name,
        "scenario_hash": scenario.hash,
        "policy": scenario.policy.name(),
        "seed": scenario.seed,
        "repeats": scenario.repeats,
        "params": params_json(scenario),
        "runs": owned,
        "aggregate": aggregate(&owned, false)?,
    });
    let path = out.join("metrics.json");
    fs::write(&path, format!("{}\n", serde_json::to_string_pretty(&doc)?))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

const RUN_CSV_HEADER: [&str; 11] = [
    "schema_version",
    "scenario_hash",
    "policy",
    "seed",
    "repeat",
    "affected",
    "recovered",
    "recovery_rate_pct",
    "mean_mttr_ms",
    "acc_reduction_pct",
    "flagged",
];

fn run_csv_record(scenario: &Scenario, m: &RunMetrics) -> Vec<String> {
    vec![
        ARTIFACT_SCHEMA_VERSION.to_string(),
        scenario.hash.clone(),
        m.policy.clone(),
        m.seed.to_string(),
        m.repeat.to_string(),
        m.affected.to_string(),
        m.recovered.to_string(),
        csv_opt(m.recovery_rate_pct),
        csv_opt(m.mean_mttr_ms),
        csv_opt(m.acc_reduction_pct),
        m.flagged_no_affected.to_string(),
    ]
}

fn write_metrics_csv(path: &Path, scenario: &Scenario, runs: &[&RunMetrics]) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(RUN_CSV_HEADER)?;
    for m in runs {
        w.write_record(run_csv_record(scenario, m))?;
    }
    w.flush()?;
    Ok(())
}

fn write_per_app_csv(out: &Path, scenario: &Scenario, runs: &[RunArtifacts]) -> Result<()> {
    let path = out.join("per_app.csv");
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record([
        "schema_version",
        "scenario_hash",
        "policy",
        "seed",
        "repeat",
        "app_id",
        "critical",
        "recovered",
        "mttr_ms",
        "acc_primary",
        "acc_backup",
        "final_variant",
        "warm_path",
    ])?;
    for run in runs {
        for row in &run.metrics.per_app {
            w.write_record([
                ARTIFACT_SCHEMA_VERSION.to_string(),
                scenario.hash.clone(),
                run.metrics.policy.clone(),
                run.metrics.seed.to_string(),
                run.metrics.repeat.to_string(),
                row.app_id.clone(),
                row.critical.to_string(),
                row.recovered.to_string(),
                csv_opt(row.mttr_ms),
                format!("{:.6}", row.acc_primary),
                csv_opt(row.acc_backup),
                row.final_variant.clone().unwrap_or_default(),
                row.warm_path.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_sweep_runs_csv(
    path: &Path,
    scenario: &Scenario,
    jobs: &[SweepJob],
    runs: &[RunArtifacts],
) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    let mut header = vec!["axis", "value"];
    header.extend(RUN_CSV_HEADER);
    w.write_record(&header)?;
    for (job, run) in jobs.iter().zip(runs) {
        let mut record = vec![job.axis.clone(), job.value.clone()];
        record.extend(run_csv_record(scenario, &run.metrics));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

fn write_sweep_summary_csv(
    path: &Path,
    scenario: &Scenario,
    axis: &SweepAxis,
    summary: &[(String, Aggregate)],
) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record([
        "schema_version",
        "scenario_hash",
        "axis",
        "value",
        "policy",
        "runs",
        "flagged_runs",
        "recovery_rate_mean",
        "recovery_rate_min",
        "recovery_rate_max",
        "mttr_mean_ms",
        "mttr_min_ms",
        "mttr_max_ms",
        "acc_reduction_mean",
        "acc_reduction_min",
        "acc_reduction_max",
    ])?;
    let ext = |e: &Option<failsim::metrics::Extrema>| match e {
        Some(e) => [
            format!("{:.6}", e.mean),
            format!("{:.6}", e.min),
            format!("{:.6}", e.max),
        ],
        None => [String::new(), String::new(), String::new()],
    };
    for (value, agg) in summary {
        let mut record = vec![
            ARTIFACT_SCHEMA_VERSION.to_string(),
            scenario.hash.clone(),
            axis.name().to_string(),
            value.clone(),
            agg.policy.clone(),
            agg.runs.to_string(),
            agg.flagged_runs.to_string(),
        ];
        record.extend(ext(&agg.recovery_rate_pct));
        record.extend(ext(&agg.mean_mttr_ms));
        record.extend(ext(&agg.acc_reduction_pct));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}
