//! Deterministic discrete-event simulation of failure, detection, and
//! failover.
//!
//! Virtual time is integer microseconds. Every run is driven by a single
//! binary-heap event loop ordered by (time, seq); the seq counter breaks
//! same-instant ties in scheduling order, so setup-scheduled injections win
//! against rescheduled heartbeats at the same instant. Heartbeats and
//! detector checks are lazy self-rescheduling chains; they execute but are
//! not logged — the run log records only state-changing events, which keeps
//! it byte-comparable across runs.
//!
//! Model loads are serialized per server through a FIFO queue
//! (`busy_until_us`): a load starts at `max(now, queue tail)` and holds the
//! queue until it completes. Capacity, in contrast, is charged up front when
//! a placement is decided, so overlapping failovers never oversubscribe a
//! server even while loads are still in flight.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::baselines::{plan_full_cold, plan_full_warm, Policy, WarmScope};
use crate::catalog::{Catalog, VariantIx};
use crate::cluster::{apply_headroom, AppIx, ClusterState, Replica, Resources, ServerIx, Tier};
use crate::detector::Detector;
use crate::error::{Error, Result};
use crate::metrics::{self, RunMetrics};
use crate::proactive::{solve_warm, PlacementPlan, WarmProblem};
use crate::progressive::{plan_failover, FailoverRequest, Placement, PlanApp, PlanServer};
use crate::scenario::{resolve_targets, select_k, Scenario, TargetKind};
use crate::synth::derive_seed;

// ── events ───────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LoadRole {
    /// First step of a failover schedule — completion is the recovery point.
    FirstStep,
    /// Background load of the selected variant during progressive failover.
    Upgrade,
    /// Reload of a primary on a freshly restored server.
    PrimaryReload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SwitchKind {
    Recovery,
    Upgrade,
    SwitchBack,
}

#[derive(Debug, Clone)]
enum EventKind {
    Heartbeat {
        server: ServerIx,
        nominal_us: u64,
    },
    DetectorCheck,
    InjectFailure {
        servers: Vec<ServerIx>,
    },
    InjectSiteFailure {
        site_ids: Vec<String>,
        servers: Vec<ServerIx>,
    },
    LoadComplete {
        app: AppIx,
        server: ServerIx,
        variant: VariantIx,
        generation: u64,
        role: LoadRole,
    },
    TrafficSwitch {
        app: AppIx,
        generation: u64,
        kind: SwitchKind,
    },
    NotifyClient {
        app: AppIx,
        generation: u64,
    },
    Restore {
        servers: Vec<ServerIx>,
    },
}

#[derive(Debug)]
struct Event {
    time_us: u64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.time_us == other.time_us && self.seq == other.seq
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap pops the maximum; invert so the earliest (time, seq)
        // comes out first.
        other
            .time_us
            .cmp(&self.time_us)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

// ── timelines ────────────────────────────────────────────────────────────

/// The lifecycle of one failover: opened when a serving replica is lost,
/// closed when the client is notified of the new location. An app that
/// fails twice gets two timelines.
#[derive(Debug, Clone)]
pub struct FailoverTimeline {
    pub app: AppIx,
    pub app_id: String,
    pub failure_us: u64,
    pub detection_us: Option<u64>,
    /// Set when the client notification completes; `None` = unrecovered.
    pub recovery_us: Option<u64>,
    /// Set if traffic later moved back to the restored primary.
    pub switch_back_us: Option<u64>,
    pub first_variant: Option<VariantIx>,
    /// Variant serving at the end of the run (after any upgrade).
    pub final_variant: Option<VariantIx>,
    pub backup_server: Option<ServerIx>,
    /// Recovered by switching to a pre-placed warm replica (no load).
    pub warm_path: bool,
}

impl FailoverTimeline {
    pub fn recovered(&self) -> bool {
        self.recovery_us.is_some()
    }

    /// Mean-time-to-recovery, measured from the failure itself (detection
    /// latency included) to client notification.
    pub fn mttr_us(&self) -> Option<u64> {
        self.recovery_us.map(|r| r - self.failure_us)
    }
}

/// Everything one run produces.
#[derive(Debug)]
pub struct RunArtifacts {
    pub scenario_name: String,
    pub policy: Policy,
    pub seed: u64,
    pub repeat: u32,
    pub timelines: Vec<FailoverTimeline>,
    pub metrics: RunMetrics,
    /// Ordered structured records of state-changing events.
    pub log: Vec<serde_json::Value>,
    /// Objective of the proactive warm plan, when the policy has one.
    pub warm_objective: Option<f64>,
    pub final_state: ClusterState,
}

// ── simulation ───────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy)]
struct PlannedRecovery {
    server: ServerIx,
    first: VariantIx,
    selected: VariantIx,
}

#[derive(Debug, Clone, Copy)]
struct Inflight {
    server: ServerIx,
    role: LoadRole,
}

struct Sim<'a> {
    catalog: &'a Catalog,
    scenario: &'a Scenario,
    state: ClusterState,
    repeat: u32,
    rng: ChaCha8Rng,
    detector: Detector,
    queue: BinaryHeap<Event>,
    next_seq: u64,
    now_us: u64,
    horizon_us: u64,
    /// Per-app generation; bumped on re-plan so stale events cancel.
    generation: Vec<u64>,
    /// Per-server load-queue tail.
    busy_until_us: Vec<u64>,
    /// Where each app currently serves from, `None` while down.
    serving: Vec<Option<(ServerIx, VariantIx)>>,
    planned: BTreeMap<AppIx, PlannedRecovery>,
    inflight: BTreeMap<AppIx, Inflight>,
    /// Apps whose failure awaits detector declaration of this server.
    pending_detection: BTreeMap<AppIx, ServerIx>,
    /// Apps whose in-flight load target died; re-planned at its declaration.
    pending_replan: BTreeMap<AppIx, ServerIx>,
    /// App → index of its open (unresolved) timeline.
    open: BTreeMap<AppIx, usize>,
    /// App → index of its most recent timeline, open or closed.
    last_timeline: BTreeMap<AppIx, usize>,
    timelines: Vec<FailoverTimeline>,
    k: BTreeSet<AppIx>,
    log: Vec<serde_json::Value>,
    warm_objective: Option<f64>,
}

/// Execute one run of `scenario` on a copy of `base`. `repeat` selects the
/// RNG stream and the rotation offset of rotating injections.
pub fn run(
    catalog: &Catalog,
    base: &ClusterState,
    scenario: &Scenario,
    repeat: u32,
) -> Result<RunArtifacts> {
    let p = &scenario.params;
    let mut state = base.clone();
    apply_headroom(&mut state, p.headroom)?;
    let n_servers = state.servers.len();
    let n_apps = state.apps.len();
    let serving = state
        .apps
        .iter()
        .map(|a| Some((a.primary_server, a.primary_variant)))
        .collect();
    let mut sim = Sim {
        catalog,
        scenario,
        repeat,
        rng: ChaCha8Rng::seed_from_u64(derive_seed(scenario.seed, repeat as u64)),
        detector: Detector::new(
            p.heartbeat_period_ms * 1000,
            p.check_interval_ms * 1000,
            state.server_ixs(),
        ),
        state,
        queue: BinaryHeap::new(),
        next_seq: 0,
        now_us: 0,
        horizon_us: scenario.horizon_ms * 1000,
        generation: vec![0; n_apps],
        busy_until_us: vec![0; n_servers],
        serving,
        planned: BTreeMap::new(),
        inflight: BTreeMap::new(),
        pending_detection: BTreeMap::new(),
        pending_replan: BTreeMap::new(),
        open: BTreeMap::new(),
        last_timeline: BTreeMap::new(),
        timelines: Vec::new(),
        k: BTreeSet::new(),
        log: Vec::new(),
        warm_objective: None,
    };
    sim.setup()?;
    sim.drive()?;
    sim.finish()
}

impl<'a> Sim<'a> {
    // ── scheduling ───────────────────────────────────────────────────

    fn push(&mut self, time_us: u64, kind: EventKind) -> Result<()> {
        if time_us < self.now_us {
            return Err(Error::Protocol(format!(
                "event scheduled in the past: {time_us} < now {} ({kind:?})",
                self.now_us
            )));
        }
        self.queue.push(Event {
            time_us,
            seq: self.next_seq,
            kind,
        });
        self.next_seq += 1;
        Ok(())
    }

    fn emit(&mut self, record: serde_json::Value) {
        self.log.push(record);
    }

    fn load_us(&self, variant: VariantIx) -> u64 {
        (self.catalog.load_ms(variant) * 1000.0).round() as u64
    }

    fn fetch_us(&self) -> u64 {
        self.scenario.params.fetch_ms * 1000
    }

    fn audit(&self, context: &str) -> Result<()> {
        self.state.audit().map_err(|e| {
            Error::Protocol(format!(
                "resource accounting broken after {context} at t={}us: {e}",
                self.now_us
            ))
        })
    }

    // ── setup ────────────────────────────────────────────────────────

    fn setup(&mut self) -> Result<()> {
        let p = self.scenario.params.clone();
        self.k = select_k(&self.state, p.k_fraction);
        self.place_warm_backups()?;

        // Injections and restores first: at equal timestamps they must beat
        // rescheduled heartbeat/check events, which always carry larger seq.
        let injections = self.scenario.injections.clone();
        for inj in &injections {
            let servers = resolve_targets(inj, &self.state, self.repeat, &mut self.rng)?;
            let kind = match inj.kind {
                TargetKind::Server => EventKind::InjectFailure { servers },
                TargetKind::Site => EventKind::InjectSiteFailure {
                    site_ids: self.resolve_site_ids(inj, &servers),
                    servers,
                },
            };
            self.push(inj.at_ms * 1000, kind)?;
        }
        let restores = self.scenario.restores.clone();
        for r in &restores {
            let mut servers = Vec::new();
            for id in &r.targets {
                match r.kind {
                    TargetKind::Server => {
                        servers.push(self.state.server_by_id(id).ok_or_else(|| {
                            Error::Setup(format!("restore names unknown server {id:?}"))
                        })?)
                    }
                    TargetKind::Site => {
                        let site = self
                            .state
                            .sites
                            .iter()
                            .find(|s| s.site_id == *id)
                            .ok_or_else(|| {
                                Error::Setup(format!("restore names unknown site {id:?}"))
                            })?;
                        servers.extend(site.members.iter().copied());
                    }
                }
            }
            self.push(r.at_ms * 1000, EventKind::Restore { servers })?;
        }

        let period_us = p.heartbeat_period_ms * 1000;
        for s in self.state.server_ixs().collect::<Vec<_>>() {
            let at = period_us + self.jitter_us();
            self.push(
                at,
                EventKind::Heartbeat {
                    server: s,
                    nominal_us: period_us,
                },
            )?;
        }
        self.push(p.check_interval_ms * 1000, EventKind::DetectorCheck)?;
        Ok(())
    }

    /// Site ids actually hit by a site injection, in member order.
    fn resolve_site_ids(
        &self,
        inj: &crate::scenario::Injection,
        servers: &[ServerIx],
    ) -> Vec<String> {
        let mut ids: Vec<String> = servers
            .iter()
            .map(|&s| self.state.site(self.state.server(s).site).site_id.clone())
            .collect();
        ids.sort();
        ids.dedup();
        let _ = inj;
        ids
    }

    fn jitter_us(&mut self) -> u64 {
        let jitter_ms = self.scenario.params.heartbeat_jitter_ms;
        if jitter_ms == 0 {
            0
        } else {
            self.rng.gen_range(0..=jitter_ms * 1000)
        }
    }

    /// Proactive phase: place warm backups according to the policy's scope.
    fn place_warm_backups(&mut self) -> Result<()> {
        let p = self.scenario.params.clone();
        let policy = self.scenario.policy;
        let scope: Vec<AppIx> = match policy.warm_scope() {
            WarmScope::None => return Ok(()),
            WarmScope::All => self.state.app_ixs().collect(),
            WarmScope::CriticalOnly => self.k.iter().copied().collect(),
        };
        let plan = if policy == Policy::TwoStep {
            let mut problem = WarmProblem::build(self.catalog, &self.state, &scope);
            problem.alpha = Some(p.alpha);
            problem.replicas_per_app = p.replicas_per_app as usize;
            problem.site_independence = p.site_independence;
            problem.budget_tuples = p.solver_budget_tuples;
            problem.partial_k = p.partial_k;
            problem.require_coverage = !p.partial_k;
            let mut plan = solve_warm(self.catalog, &problem)?;
            if !plan.feasible {
                self.emit(json!({
                    "t_us": 0,
                    "event": "warm-plan-infeasible",
                    "detail": plan.detail,
                    "violated": plan.violated.map(|v| v.to_string()),
                }));
                // Best effort: protect what fits rather than aborting.
                problem.partial_k = true;
                problem.require_coverage = false;
                plan = solve_warm(self.catalog, &problem)?;
            }
            plan
        } else {
            // Full-size baselines place greedily, largest variants only.
            let servers = self.plan_servers();
            let apps: Vec<PlanApp> = scope.iter().map(|&a| self.plan_app(a, true)).collect();
            plan_full_warm(
                self.catalog,
                &servers,
                &apps,
                &self.k,
                policy == Policy::FullWarm,
            )
        };
        self.install_warm(&plan)?;
        self.warm_objective = Some(plan.objective);
        self.emit(json!({
            "t_us": 0,
            "event": "warm-plan",
            "policy": policy.name(),
            "objective": plan.objective,
            "placed": plan.warm.len(),
            "skipped": plan.skipped.len(),
            "fallback": plan.used_fallback,
        }));
        Ok(())
    }

    fn install_warm(&mut self, plan: &PlacementPlan) -> Result<()> {
        for (&app, replicas) in &plan.warm {
            for &(variant, server) in replicas {
                let v = self.catalog.variant(variant);
                self.state.insert_replica(
                    server,
                    app,
                    Replica {
                        variant,
                        tier: Tier::Warm,
                        charged: Resources::new(v.mem_kib, v.compute_millis),
                    },
                )?;
            }
        }
        self.audit("warm placement")
    }

    // ── planner views ────────────────────────────────────────────────

    fn plan_servers(&self) -> Vec<PlanServer> {
        let mut ixs: Vec<ServerIx> = self
            .state
            .server_ixs()
            .filter(|&s| self.state.server(s).alive)
            .collect();
        ixs.sort_by(|&a, &b| {
            self.state
                .server(a)
                .server_id
                .cmp(&self.state.server(b).server_id)
        });
        ixs.into_iter()
            .map(|s| {
                let srv = self.state.server(s);
                PlanServer {
                    server: s,
                    server_id: srv.server_id.clone(),
                    site: srv.site,
                    class: srv.class.clone(),
                    net_latency_ms: self.state.site(srv.site).net_latency_ms,
                    capacity: srv.capacity,
                    free: srv.free(),
                }
            })
            .collect()
    }

    fn plan_app(&self, app: AppIx, forbid_primary: bool) -> PlanApp {
        let a = self.state.app(app);
        PlanApp {
            app,
            app_id: a.app_id.clone(),
            family: a.family,
            rate: a.rate,
            slo_ms: a.slo_ms,
            forbidden_server: forbid_primary.then_some(a.primary_server),
            forbidden_site: None,
        }
    }

    // ── event loop ───────────────────────────────────────────────────

    fn drive(&mut self) -> Result<()> {
        while let Some(ev) = self.queue.pop() {
            if ev.time_us > self.horizon_us {
                break;
            }
            if ev.time_us < self.now_us {
                return Err(Error::Protocol(format!(
                    "event out of order: {} < now {} ({:?})",
                    ev.time_us, self.now_us, ev.kind
                )));
            }
            self.now_us = ev.time_us;
            self.execute(ev.kind)?;
        }
        Ok(())
    }

    fn execute(&mut self, kind: EventKind) -> Result<()> {
        match kind {
            EventKind::Heartbeat { server, nominal_us } => self.on_heartbeat(server, nominal_us),
            EventKind::DetectorCheck => self.on_check(),
            EventKind::InjectFailure { servers } => self.on_inject(&servers, None),
            EventKind::InjectSiteFailure { site_ids, servers } => {
                self.on_inject(&servers, Some(&site_ids))
            }
            EventKind::LoadComplete {
                app,
                server,
                variant,
                generation,
                role,
            } => self.on_load_complete(app, server, variant, generation, role),
            EventKind::TrafficSwitch {
                app,
                generation,
                kind,
            } => self.on_switch(app, generation, kind),
            EventKind::NotifyClient { app, generation } => self.on_notify(app, generation),
            EventKind::Restore { servers } => self.on_restore(&servers),
        }
    }

    // ── heartbeats & detection ───────────────────────────────────────

    fn on_heartbeat(&mut self, server: ServerIx, nominal_us: u64) -> Result<()> {
        if !self.state.server(server).alive {
            // Dead servers stop heartbeating; the chain restarts on restore.
            return Ok(());
        }
        self.detector.record_heartbeat(server, self.now_us)?;
        let next = nominal_us + self.scenario.params.heartbeat_period_ms * 1000;
        if next <= self.horizon_us {
            let at = next + self.jitter_us();
            self.push(
                at,
                EventKind::Heartbeat {
                    server,
                    nominal_us: next,
                },
            )?;
        }
        Ok(())
    }

    fn on_check(&mut self) -> Result<()> {
        let newly = self.detector.check(self.now_us);
        if !newly.is_empty() {
            for &s in &newly {
                self.emit(json!({
                    "t_us": self.now_us,
                    "event": "server-declared-failed",
                    "server": self.state.server(s).server_id,
                }));
            }
            let declared: BTreeSet<ServerIx> = newly.into_iter().collect();
            let mut batch: Vec<AppIx> = Vec::new();
            let ready: Vec<AppIx> = self
                .pending_detection
                .iter()
                .filter(|(_, s)| declared.contains(s))
                .map(|(&a, _)| a)
                .collect();
            for app in ready {
                self.pending_detection.remove(&app);
                let idx = self.open[&app];
                let tl = &mut self.timelines[idx];
                if tl.detection_us.is_none() {
                    debug_assert!(tl.failure_us <= self.now_us);
                    tl.detection_us = Some(self.now_us);
                }
                batch.push(app);
            }
            let replan: Vec<AppIx> = self
                .pending_replan
                .iter()
                .filter(|(_, s)| declared.contains(s))
                .map(|(&a, _)| a)
                .collect();
            for app in replan {
                self.pending_replan.remove(&app);
                batch.push(app);
            }
            batch.sort();
            batch.dedup();
            self.dispatch_failover(batch)?;
        }
        let next = self.now_us + self.scenario.params.check_interval_ms * 1000;
        if next <= self.horizon_us {
            self.push(next, EventKind::DetectorCheck)?;
        }
        Ok(())
    }

    // ── failure & restore ────────────────────────────────────────────

    fn on_inject(&mut self, servers: &[ServerIx], site_ids: Option<&[String]>) -> Result<()> {
        if let Some(ids) = site_ids {
            for id in ids {
                self.emit(json!({
                    "t_us": self.now_us,
                    "event": "inject-site-failure",
                    "site": id,
                }));
            }
        }
        for &s in servers {
            if !self.state.server(s).alive {
                self.emit(json!({
                    "t_us": self.now_us,
                    "event": "inject-ignored",
                    "server": self.state.server(s).server_id,
                    "detail": "target already failed",
                }));
                continue;
            }
            self.emit(json!({
                "t_us": self.now_us,
                "event": "inject-server-failure",
                "server": self.state.server(s).server_id,
            }));
            self.state.fail_server(s);
            self.busy_until_us[s.0] = 0;

            // Apps that were serving from this server lose their replica.
            for app in self.state.app_ixs().collect::<Vec<_>>() {
                if self.serving[app.0].map(|(srv, _)| srv) != Some(s) {
                    continue;
                }
                self.serving[app.0] = None;
                self.generation[app.0] += 1; // cancel pending switch/notify
                self.planned.remove(&app);
                if !self.open.contains_key(&app) {
                    let idx = self.timelines.len();
                    self.timelines.push(FailoverTimeline {
                        app,
                        app_id: self.state.app(app).app_id.clone(),
                        failure_us: self.now_us,
                        detection_us: None,
                        recovery_us: None,
                        switch_back_us: None,
                        first_variant: None,
                        final_variant: None,
                        backup_server: None,
                        warm_path: false,
                    });
                    self.open.insert(app, idx);
                    self.last_timeline.insert(app, idx);
                }
                self.pending_detection.insert(app, s);
            }

            // Standby replicas on the dead server are lost but non-fatal.
            for (app, replica) in self.state.server(s).loaded.clone() {
                if replica.tier != Tier::Primary
                    && self.serving[app.0].map(|(srv, _)| srv) != Some(s)
                {
                    self.emit(json!({
                        "t_us": self.now_us,
                        "event": "backup-lost",
                        "app": self.state.app(app).app_id,
                        "server": self.state.server(s).server_id,
                    }));
                }
            }

            // In-flight loads targeting the dead server.
            for (app, fl) in self.inflight.clone() {
                if fl.server != s {
                    continue;
                }
                self.inflight.remove(&app);
                match fl.role {
                    LoadRole::PrimaryReload => {
                        self.emit(json!({
                            "t_us": self.now_us,
                            "event": "reload-lost",
                            "app": self.state.app(app).app_id,
                            "server": self.state.server(s).server_id,
                        }));
                    }
                    LoadRole::FirstStep => {
                        // Still down; re-plan once the death is declared.
                        self.generation[app.0] += 1;
                        self.pending_replan.insert(app, s);
                    }
                    LoadRole::Upgrade => {} // serving rule above covered it
                }
            }
        }
        self.audit("failure injection")
    }

    fn on_restore(&mut self, servers: &[ServerIx]) -> Result<()> {
        for &s in servers {
            if self.state.server(s).alive {
                self.emit(json!({
                    "t_us": self.now_us,
                    "event": "restore-ignored",
                    "server": self.state.server(s).server_id,
                    "detail": "target is alive",
                }));
                continue;
            }
            let primaries = self.state.restore_server(s);
            self.detector.restore(s, self.now_us);
            self.emit(json!({
                "t_us": self.now_us,
                "event": "restore-server",
                "server": self.state.server(s).server_id,
            }));
            let period_us = self.scenario.params.heartbeat_period_ms * 1000;
            let nominal = self.now_us + period_us;
            if nominal <= self.horizon_us {
                let at = nominal + self.jitter_us();
                self.push(
                    at,
                    EventKind::Heartbeat {
                        server: s,
                        nominal_us: nominal,
                    },
                )?;
            }
            // Primary model bytes survived on disk; the reload charges time
            // through the load queue, not memory (the replica stayed
            // charged while the server was down).
            for app in primaries {
                if self.serving[app.0].map(|(srv, _)| srv) == Some(s) {
                    continue; // still nominally serving here (never failed over)
                }
                let variant = self.state.app(app).primary_variant;
                let start = self.now_us.max(self.busy_until_us[s.0]);
                let complete = start + self.fetch_us() + self.load_us(variant);
                self.busy_until_us[s.0] = complete;
                self.inflight.insert(
                    app,
                    Inflight {
                        server: s,
                        role: LoadRole::PrimaryReload,
                    },
                );
                let generation = self.generation[app.0];
                self.emit(json!({
                    "t_us": self.now_us,
                    "event": "primary-reload-queued",
                    "app": self.state.app(app).app_id,
                    "server": self.state.server(s).server_id,
                    "load_start_us": start,
                    "load_complete_us": complete,
                }));
                self.push(
                    complete,
                    EventKind::LoadComplete {
                        app,
                        server: s,
                        variant,
                        generation,
                        role: LoadRole::PrimaryReload,
                    },
                )?;
            }
        }
        self.audit("restore")
    }

    // ── failover dispatch ────────────────────────────────────────────

    fn dispatch_failover(&mut self, batch: Vec<AppIx>) -> Result<()> {
        if batch.is_empty() {
            return Ok(());
        }
        let policy = self.scenario.policy;
        let mut cold: Vec<AppIx> = Vec::new();
        for app in batch {
            if self.serving[app.0].is_some() {
                // Restored before the failure was even declared.
                continue;
            }
            self.generation[app.0] += 1;
            match self.best_warm_replica(app) {
                Some((server, variant)) => {
                    let generation = self.generation[app.0];
                    self.planned.insert(
                        app,
                        PlannedRecovery {
                            server,
                            first: variant,
                            selected: variant,
                        },
                    );
                    let idx = self.open[&app];
                    self.timelines[idx].warm_path = true;
                    self.timelines[idx].backup_server = Some(server);
                    self.emit(json!({
                        "t_us": self.now_us,
                        "event": "failover-planned",
                        "app": self.state.app(app).app_id,
                        "server": self.state.server(server).server_id,
                        "first": self.catalog.variant(variant).variant_id,
                        "selected": self.catalog.variant(variant).variant_id,
                        "warm": true,
                    }));
                    self.push(
                        self.now_us,
                        EventKind::TrafficSwitch {
                            app,
                            generation,
                            kind: SwitchKind::Recovery,
                        },
                    )?;
                }
                None => cold.push(app),
            }
        }
        if cold.is_empty() {
            return Ok(());
        }
        if !policy.has_cold_fallback() {
            for app in cold {
                self.emit(json!({
                    "t_us": self.now_us,
                    "event": "unrecoverable",
                    "app": self.state.app(app).app_id,
                    "reason": "no-cold-fallback",
                }));
            }
            return Ok(());
        }

        let servers = self.plan_servers();
        let affected: Vec<PlanApp> = cold.iter().map(|&a| self.plan_app(a, false)).collect();
        let (placements, unrecovered) = match policy {
            // Both baselines load full-size variants cold; FullWarmK differs
            // only in having pre-warmed the critical set above.
            Policy::FullCold | Policy::FullWarmK => {
                plan_full_cold(self.catalog, &servers, &affected, &self.k, &mut self.rng)
            }
            Policy::TwoStep => {
                let decision = plan_failover(
                    self.catalog,
                    &FailoverRequest {
                        affected,
                        servers,
                        progressive_loading: self.scenario.params.progressive_loading,
                        // Emergencies may eat the α reserve — that is what
                        // it was held back for.
                        global_budget: None,
                    },
                );
                self.emit(json!({
                    "t_us": self.now_us,
                    "event": "reactive-plan",
                    "apps": decision.placements.len() + decision.unrecovered.len(),
                    "delta": decision.delta,
                }));
                (decision.placements, decision.unrecovered)
            }
            Policy::FullWarm => unreachable!("no cold fallback"),
        };
        for placement in &placements {
            self.start_recovery_load(placement)?;
        }
        for app in unrecovered {
            self.emit(json!({
                "t_us": self.now_us,
                "event": "unrecoverable",
                "app": self.state.app(app).app_id,
                "reason": "no-capacity",
            }));
        }
        self.audit("failover planning")
    }

    /// Best surviving standby for an app: highest accuracy, then lowest
    /// server id. `None` if every standby is on a dead server (or none
    /// was ever placed).
    fn best_warm_replica(&self, app: AppIx) -> Option<(ServerIx, VariantIx)> {
        let mut best: Option<(ServerIx, VariantIx, f64)> = None;
        for s in self.state.server_ixs() {
            let srv = self.state.server(s);
            if !srv.alive {
                continue;
            }
            let Some(replica) = srv.loaded.get(&app) else {
                continue;
            };
            if replica.tier != Tier::Warm {
                continue;
            }
            let acc = self.catalog.variant(replica.variant).norm_accuracy;
            let better = match &best {
                None => true,
                Some((bs, _, bacc)) => {
                    acc > *bacc
                        || (acc == *bacc && srv.server_id < self.state.server(*bs).server_id)
                }
            };
            if better {
                best = Some((s, replica.variant, acc));
            }
        }
        best.map(|(s, v, _)| (s, v))
    }

    /// Charge capacity now, queue the first load, log the decision record.
    fn start_recovery_load(&mut self, placement: &Placement) -> Result<()> {
        let app = placement.app;
        let s = placement.server;
        self.state.insert_replica(
            s,
            app,
            Replica {
                variant: placement.selected,
                tier: Tier::Emergency,
                charged: placement.footprint,
            },
        )?;
        let start = self.now_us.max(self.busy_until_us[s.0]);
        let complete = start + self.fetch_us() + self.load_us(placement.first_load);
        self.busy_until_us[s.0] = complete;
        self.inflight.insert(
            app,
            Inflight {
                server: s,
                role: LoadRole::FirstStep,
            },
        );
        self.planned.insert(
            app,
            PlannedRecovery {
                server: s,
                first: placement.first_load,
                selected: placement.selected,
            },
        );
        let idx = self.open[&app];
        self.timelines[idx].backup_server = Some(s);
        let generation = self.generation[app.0];
        self.emit(json!({
            "t_us": self.now_us,
            "event": "failover-planned",
            "app": self.state.app(app).app_id,
            "server": self.state.server(s).server_id,
            "first": self.catalog.variant(placement.first_load).variant_id,
            "selected": self.catalog.variant(placement.selected).variant_id,
            "warm": false,
            "load_start_us": start,
            "load_complete_us": complete,
        }));
        self.push(
            complete,
            EventKind::LoadComplete {
                app,
                server: s,
                variant: placement.first_load,
                generation,
                role: LoadRole::FirstStep,
            },
        )
    }

    // ── loads, switches, notifications ───────────────────────────────

    fn on_load_complete(
        &mut self,
        app: AppIx,
        server: ServerIx,
        variant: VariantIx,
        generation: u64,
        role: LoadRole,
    ) -> Result<()> {
        if generation != self.generation[app.0] || !self.state.server(server).alive {
            return Ok(()); // cancelled by re-plan, or the target died
        }
        self.emit(json!({
            "t_us": self.now_us,
            "event": "load-complete",
            "app": self.state.app(app).app_id,
            "server": self.state.server(server).server_id,
            "variant": self.catalog.variant(variant).variant_id,
            "upgrade": role == LoadRole::Upgrade,
        }));
        match role {
            LoadRole::FirstStep => {
                self.inflight.remove(&app);
                self.push(
                    self.now_us,
                    EventKind::TrafficSwitch {
                        app,
                        generation,
                        kind: SwitchKind::Recovery,
                    },
                )?;
                let planned = self.planned[&app];
                if planned.selected != planned.first {
                    // Background upgrade: queued behind whatever else the
                    // server is loading; capacity was charged up front.
                    let start = self.now_us.max(self.busy_until_us[server.0]);
                    let complete = start + self.fetch_us() + self.load_us(planned.selected);
                    self.busy_until_us[server.0] = complete;
                    self.inflight.insert(
                        app,
                        Inflight {
                            server,
                            role: LoadRole::Upgrade,
                        },
                    );
                    self.push(
                        complete,
                        EventKind::LoadComplete {
                            app,
                            server,
                            variant: planned.selected,
                            generation,
                            role: LoadRole::Upgrade,
                        },
                    )?;
                }
            }
            LoadRole::Upgrade => {
                self.inflight.remove(&app);
                self.push(
                    self.now_us,
                    EventKind::TrafficSwitch {
                        app,
                        generation,
                        kind: SwitchKind::Upgrade,
                    },
                )?;
            }
            LoadRole::PrimaryReload => {
                self.inflight.remove(&app);
                self.push(
                    self.now_us,
                    EventKind::TrafficSwitch {
                        app,
                        generation,
                        kind: SwitchKind::SwitchBack,
                    },
                )?;
            }
        }
        Ok(())
    }

    fn on_switch(&mut self, app: AppIx, generation: u64, kind: SwitchKind) -> Result<()> {
        if generation != self.generation[app.0] {
            return Ok(());
        }
        match kind {
            SwitchKind::Recovery => {
                let planned = self.planned[&app];
                self.serving[app.0] = Some((planned.server, planned.first));
                let idx = self.open[&app];
                let tl = &mut self.timelines[idx];
                tl.first_variant = Some(planned.first);
                tl.final_variant = Some(planned.first);
                self.emit(json!({
                    "t_us": self.now_us,
                    "event": "traffic-switch",
                    "kind": "recovery",
                    "app": self.state.app(app).app_id,
                    "server": self.state.server(planned.server).server_id,
                    "variant": self.catalog.variant(planned.first).variant_id,
                }));
                let notify_at = self.now_us + self.scenario.params.notify_ms * 1000;
                self.push(notify_at, EventKind::NotifyClient { app, generation })?;
            }
            SwitchKind::Upgrade => {
                let planned = self.planned[&app];
                let v = self.catalog.variant(planned.selected);
                // Swap the transient co-residency charge for the selected
                // variant alone — the recovery-point variant is unloaded.
                self.state.replace_replica(
                    planned.server,
                    app,
                    Replica {
                        variant: planned.selected,
                        tier: Tier::Emergency,
                        charged: Resources::new(v.mem_kib, v.compute_millis),
                    },
                );
                self.serving[app.0] = Some((planned.server, planned.selected));
                let idx = self.last_timeline[&app];
                self.timelines[idx].final_variant = Some(planned.selected);
                self.emit(json!({
                    "t_us": self.now_us,
                    "event": "traffic-switch",
                    "kind": "upgrade",
                    "app": self.state.app(app).app_id,
                    "server": self.state.server(planned.server).server_id,
                    "variant": v.variant_id,
                }));
                self.audit("upgrade switch")?;
            }
            SwitchKind::SwitchBack => {
                self.generation[app.0] += 1; // cancel any in-flight upgrade
                if let Some((srv, _)) = self.serving[app.0] {
                    if srv != self.state.app(app).primary_server {
                        self.state.remove_replica(srv, app);
                    }
                } else if let Some(fl) = self.inflight.remove(&app) {
                    // Primary resumed while a recovery load was in flight.
                    if self.state.server(fl.server).alive {
                        self.state.remove_replica(fl.server, app);
                    }
                }
                let a = self.state.app(app);
                self.serving[app.0] = Some((a.primary_server, a.primary_variant));
                self.planned.remove(&app);
                self.pending_detection.remove(&app);
                self.pending_replan.remove(&app);
                if let Some(&idx) = self.last_timeline.get(&app) {
                    self.timelines[idx].switch_back_us = Some(self.now_us);
                }
                self.emit(json!({
                    "t_us": self.now_us,
                    "event": "traffic-switch",
                    "kind": "switch-back",
                    "app": self.state.app(app).app_id,
                    "server": self.state.server(self.state.app(app).primary_server).server_id,
                }));
                self.audit("switch back")?;
            }
        }
        Ok(())
    }

    fn on_notify(&mut self, app: AppIx, generation: u64) -> Result<()> {
        if generation != self.generation[app.0] {
            return Ok(());
        }
        let Some(idx) = self.open.remove(&app) else {
            return Ok(());
        };
        let tl = &mut self.timelines[idx];
        debug_assert!(tl.detection_us.is_some_and(|d| d <= self.now_us));
        tl.recovery_us = Some(self.now_us);
        self.emit(json!({
            "t_us": self.now_us,
            "event": "notify-client",
            "app": self.state.app(app).app_id,
        }));
        Ok(())
    }

    // ── wrap-up ──────────────────────────────────────────────────────

    fn finish(self) -> Result<RunArtifacts> {
        self.audit("final state")?;
        let metrics = metrics::compute(
            self.catalog,
            &self.state,
            &self.k,
            &self.timelines,
            self.scenario.policy,
            &self.scenario.hash,
            self.scenario.seed,
            self.repeat,
        );
        Ok(RunArtifacts {
            scenario_name: self.scenario.name.clone(),
            policy: self.scenario.policy,
            seed: self.scenario.seed,
            repeat: self.repeat,
            timelines: self.timelines,
            metrics,
            log: self.log,
            warm_objective: self.warm_objective,
            final_state: self.state,
        })
    }
}
