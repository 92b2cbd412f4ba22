//! Proactive warm-backup placement.
//!
//! Before any failure happens, a chosen subset K of critical applications
//! gets standby replicas. The placement maximizes Σ rate·accuracy over the
//! chosen (variant, server) assignments subject to:
//!
//! * per-server capacity on the free resources of each server,
//! * a global reservation that caps all warm replicas to a (1−α) share of
//!   the cluster's free capacity, keeping headroom for reactive recovery,
//! * no backup on its application's own primary server,
//! * exactly `replicas_per_app` assignments per app on distinct servers
//!   (distinct sites when site independence is on),
//! * per-app latency SLOs.
//!
//! Small and mid-size instances are solved exactly with branch and bound;
//! instances past the tuple budget fall back to the reactive right-sizing
//! heuristic restricted to K.

use std::collections::BTreeMap;
use std::fmt;

use crate::catalog::{Catalog, FamilyIx, MemKib, VariantIx};
use crate::cluster::{AppIx, ClusterState, Resources, ServerIx, SiteIx};
use crate::error::{Error, Result};
use crate::progressive::{plan_failover, FailoverRequest, PlanApp, PlanServer};

const EPS: f64 = 1e-9;

/// One candidate assignment of a variant to a server for one app.
#[derive(Debug, Clone)]
pub struct WarmCandidate {
    pub variant: VariantIx,
    /// Index into [`WarmProblem::servers`].
    pub server_pos: usize,
    pub demand: Resources,
    pub acc: f64,
    /// Observed latency on that server, None when the class is unprofiled.
    pub latency_ms: Option<f64>,
}

/// One app in K together with its candidate assignments.
#[derive(Debug, Clone)]
pub struct WarmApp {
    pub app: AppIx,
    pub app_id: String,
    pub family: FamilyIx,
    pub rate: f64,
    pub slo_ms: f64,
    pub primary_server: ServerIx,
    pub primary_site: SiteIx,
    pub candidates: Vec<WarmCandidate>,
}

/// A warm-placement instance over a snapshot of free capacity.
#[derive(Debug, Clone)]
pub struct WarmProblem {
    pub apps: Vec<WarmApp>,
    pub servers: Vec<PlanServer>,
    /// Some(α) enforces the global reservation: warm replicas together may
    /// use at most (1−α) of the snapshot's free capacity.
    pub alpha: Option<f64>,
    pub replicas_per_app: usize,
    pub site_independence: bool,
    /// Instances with more (app, variant, server) tuples than this are not
    /// solved exactly; see [`solve_warm`].
    pub budget_tuples: u64,
    pub allow_fallback: bool,
    /// Keep solving for the remaining apps when some app is unplaceable.
    pub partial_k: bool,
    /// Whether the validator demands full coverage of K (off for plans of
    /// best-effort policies that may legitimately skip apps).
    pub require_coverage: bool,
}

impl WarmProblem {
    /// Snapshot a problem from live cluster state for the apps in `k`.
    /// Candidates enumerate every (family variant, alive server) pair; the
    /// solver applies the placement-legality filters.
    pub fn build(catalog: &Catalog, state: &ClusterState, k: &[AppIx]) -> WarmProblem {
        let mut server_ixs: Vec<ServerIx> = state
            .server_ixs()
            .filter(|&s| state.server(s).alive)
            .collect();
        server_ixs.sort_by(|&a, &b| state.server(a).server_id.cmp(&state.server(b).server_id));
        let servers: Vec<PlanServer> = server_ixs
            .iter()
            .map(|&s| {
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

        let mut k_sorted = k.to_vec();
        k_sorted.sort_by(|&a, &b| state.app(a).app_id.cmp(&state.app(b).app_id));
        let apps = k_sorted
            .into_iter()
            .map(|a| {
                let app = state.app(a);
                let primary_site = state.server(app.primary_server).site;
                let mut candidates = Vec::new();
                for &variant in &catalog.family(app.family).variants {
                    let var = catalog.variant(variant);
                    for (server_pos, srv) in servers.iter().enumerate() {
                        candidates.push(WarmCandidate {
                            variant,
                            server_pos,
                            demand: Resources::new(var.mem_kib, var.compute_millis),
                            acc: var.norm_accuracy,
                            latency_ms: catalog.observed_latency_ms(
                                variant,
                                &srv.class,
                                srv.net_latency_ms,
                            ),
                        });
                    }
                }
                WarmApp {
                    app: a,
                    app_id: app.app_id.clone(),
                    family: app.family,
                    rate: app.rate,
                    slo_ms: app.slo_ms,
                    primary_server: app.primary_server,
                    primary_site,
                    candidates,
                }
            })
            .collect();

        WarmProblem {
            apps,
            servers,
            alpha: None,
            replicas_per_app: 1,
            site_independence: false,
            budget_tuples: 1_000_000,
            allow_fallback: true,
            partial_k: false,
            require_coverage: true,
        }
    }

    /// The global reservation: (1−α) of the snapshot's free capacity,
    /// rounded down per resource. None when α is unset.
    pub fn reservation_budget(&self) -> Option<Resources> {
        self.alpha.map(|alpha| {
            let keep = 1.0 - alpha;
            let mem: MemKib = self.servers.iter().map(|s| s.free.mem_kib).sum();
            let cpu: u64 = self.servers.iter().map(|s| s.free.compute_millis).sum();
            Resources::new(
                (mem as f64 * keep).floor() as u64,
                (cpu as f64 * keep).floor() as u64,
            )
        })
    }

    fn tuple_count(&self) -> u64 {
        self.apps.iter().map(|a| a.candidates.len() as u64).sum()
    }
}

/// Require every backup to sit in a different site than its app's primary.
pub fn extend_site_independence(mut problem: WarmProblem) -> WarmProblem {
    problem.site_independence = true;
    problem
}

/// Placement constraints, used both for infeasibility reports and for
/// validator findings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarmConstraint {
    /// A server would hold more than its free capacity.
    ServerCapacity,
    /// All warm replicas together exceed the (1−α) reservation.
    GlobalReservation,
    /// A backup shares a server with its own primary.
    PrimaryCollision,
    /// An app is missing assignments, has duplicates, or replicas collide.
    Coverage,
    /// Latency on the chosen server exceeds the app's SLO.
    LatencySlo,
    /// A backup shares a site with its primary, or replicas share a site.
    SiteIndependence,
}

impl fmt::Display for WarmConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            WarmConstraint::ServerCapacity => "server-capacity",
            WarmConstraint::GlobalReservation => "global-reservation",
            WarmConstraint::PrimaryCollision => "primary-collision",
            WarmConstraint::Coverage => "coverage",
            WarmConstraint::LatencySlo => "latency-slo",
            WarmConstraint::SiteIndependence => "site-independence",
        };
        f.write_str(name)
    }
}

/// One constraint violation found by [`validate_plan`].
#[derive(Debug, Clone)]
pub struct Violation {
    pub constraint: WarmConstraint,
    pub app_id: Option<String>,
    pub server_id: Option<String>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.constraint)?;
        if let Some(app) = &self.app_id {
            write!(f, " app={app}")?;
        }
        if let Some(server) = &self.server_id {
            write!(f, " server={server}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

/// Result of warm placement.
#[derive(Debug, Clone)]
pub struct PlacementPlan {
    /// Chosen assignments per app (one entry per replica).
    pub warm: BTreeMap<AppIx, Vec<(VariantIx, ServerIx)>>,
    /// Σ rate·accuracy over all assignments.
    pub objective: f64,
    pub feasible: bool,
    /// Tightest violated constraint when infeasible.
    pub violated: Option<WarmConstraint>,
    pub detail: Option<String>,
    /// Apps dropped under `partial_k` (or unplaceable in fallback mode).
    pub skipped: Vec<AppIx>,
    /// True when the heuristic fallback produced the plan.
    pub used_fallback: bool,
}

impl PlacementPlan {
    fn infeasible(constraint: WarmConstraint, detail: String) -> PlacementPlan {
        PlacementPlan {
            warm: BTreeMap::new(),
            objective: 0.0,
            feasible: false,
            violated: Some(constraint),
            detail: Some(detail),
            skipped: Vec::new(),
            used_fallback: false,
        }
    }
}

/// Is this candidate a legal assignment for the app (ignoring capacity)?
fn legal(problem: &WarmProblem, app: &WarmApp, cand: &WarmCandidate) -> bool {
    let srv = &problem.servers[cand.server_pos];
    srv.server != app.primary_server
        && (!problem.site_independence || srv.site != app.primary_site)
        && cand.latency_ms.is_some_and(|l| l <= app.slo_ms)
}

/// Which filter wipes out the app's candidate set? Applied in order:
/// primary exclusion, site independence, latency, then root capacity.
fn blocking_constraint(problem: &WarmProblem, app: &WarmApp) -> WarmConstraint {
    let mut pool: Vec<&WarmCandidate> = app.candidates.iter().collect();
    if pool.is_empty() {
        return WarmConstraint::ServerCapacity;
    }
    pool.retain(|c| problem.servers[c.server_pos].server != app.primary_server);
    if pool.is_empty() {
        return WarmConstraint::PrimaryCollision;
    }
    if problem.site_independence {
        pool.retain(|c| problem.servers[c.server_pos].site != app.primary_site);
        if pool.is_empty() {
            return WarmConstraint::SiteIndependence;
        }
    }
    pool.retain(|c| c.latency_ms.is_some_and(|l| l <= app.slo_ms));
    if pool.is_empty() {
        return WarmConstraint::LatencySlo;
    }
    WarmConstraint::ServerCapacity
}

/// A unit of branching: the complete replica set for one app.
#[derive(Debug, Clone)]
struct Choice {
    value: f64,
    mem: MemKib,
    picks: Vec<usize>, // indices into the app's candidate list
}

/// Enumerate an app's choices: single candidates, or — for multiple
/// replicas — combinations on pairwise-distinct servers (and sites when
/// site independence is on).
fn enumerate_choices(
    problem: &WarmProblem,
    app: &WarmApp,
    feasible: &[usize],
) -> Result<Vec<Choice>> {
    let r = problem.replicas_per_app.max(1);
    let mut out: Vec<Choice> = Vec::new();
    if r == 1 {
        for &c in feasible {
            let cand = &app.candidates[c];
            out.push(Choice {
                value: app.rate * cand.acc,
                mem: cand.demand.mem_kib,
                picks: vec![c],
            });
        }
    } else {
        // Replica counts stay tiny in practice; enumerate combinations.
        let cap: u64 = 200_000;
        let mut stack: Vec<usize> = Vec::with_capacity(r);
        fn rec(
            problem: &WarmProblem,
            app: &WarmApp,
            feasible: &[usize],
            start: usize,
            r: usize,
            stack: &mut Vec<usize>,
            out: &mut Vec<Choice>,
            cap: u64,
        ) -> Result<()> {
            if stack.len() == r {
                let value: f64 = stack
                    .iter()
                    .map(|&c| app.rate * app.candidates[c].acc)
                    .sum();
                let mem: MemKib = stack
                    .iter()
                    .map(|&c| app.candidates[c].demand.mem_kib)
                    .sum();
                out.push(Choice {
                    value,
                    mem,
                    picks: stack.clone(),
                });
                if out.len() as u64 > cap {
                    return Err(Error::Planning(format!(
                        "replica combination count for app {} exceeds {cap}",
                        app.app_id
                    )));
                }
                return Ok(());
            }
            for (i, &c) in feasible.iter().enumerate().skip(start) {
                let srv = &problem.servers[app.candidates[c].server_pos];
                let clash = stack.iter().any(|&p| {
                    let prev = &problem.servers[app.candidates[p].server_pos];
                    prev.server == srv.server
                        || (problem.site_independence && prev.site == srv.site)
                });
                if clash {
                    continue;
                }
                stack.push(c);
                rec(problem, app, feasible, i + 1, r, stack, out, cap)?;
                stack.pop();
            }
            Ok(())
        }
        rec(problem, app, feasible, 0, r, &mut stack, &mut out, cap)?;
    }
    // Deterministic exploration order: best value first, then the smaller
    // footprint, then positional order of the picks.
    out.sort_by(|a, b| {
        b.value
            .partial_cmp(&a.value)
            .unwrap()
            .then_with(|| a.mem.cmp(&b.mem))
            .then_with(|| a.picks.cmp(&b.picks))
    });
    Ok(out)
}

/// A choice's demands resolved to server positions, hoisted out of the
/// search loop.
struct ChoicePre {
    entries: Vec<(usize, Resources)>,
    total: Resources,
}

struct SearchCtx<'a> {
    choices: &'a [Vec<Choice>],
    pre: Vec<Vec<ChoicePre>>, // per depth, per choice
    suffix_best: Vec<f64>,
    suffix_min_mem: Vec<MemKib>,
    best: Option<(f64, MemKib, Vec<usize>)>,
    stuck_depth: usize,
    stuck_global: bool,
    nodes: u64,
    /// Node cap making the search anytime: when exhausted, the best complete
    /// assignment found so far stands in for the proven optimum.
    node_budget: u64,
    truncated: bool,
}

fn dfs(
    ctx: &mut SearchCtx,
    depth: usize,
    free: &mut [Resources],
    budget: &mut Option<Resources>,
    obj: f64,
    mem: MemKib,
    picks: &mut Vec<usize>,
) {
    if ctx.truncated {
        return;
    }
    if ctx.nodes >= ctx.node_budget {
        ctx.truncated = true;
        return;
    }
    ctx.nodes += 1;
    if depth == ctx.choices.len() {
        let better = match &ctx.best {
            None => true,
            Some((bo, bm, _)) => obj > bo + EPS || (obj >= bo - EPS && mem < *bm),
        };
        if better {
            ctx.best = Some((obj, mem, picks.clone()));
        }
        return;
    }
    if let Some((bo, bm, _)) = &ctx.best {
        let ub = obj + ctx.suffix_best[depth];
        if ub < bo - EPS {
            return;
        }
        if ub <= bo + EPS && mem + ctx.suffix_min_mem[depth] >= *bm {
            return; // can at best tie the objective without improving memory
        }
    }
    let mut any = false;
    for cx in 0..ctx.choices[depth].len() {
        let choice = &ctx.choices[depth][cx];
        let (value, choice_mem) = (choice.value, choice.mem);
        let total = ctx.pre[depth][cx].total;
        // Apply the choice's demands, unwinding on the first misfit.
        let mut applied = 0;
        let mut fits = true;
        for i in 0..ctx.pre[depth][cx].entries.len() {
            let (sp, d) = ctx.pre[depth][cx].entries[i];
            if !d.fits_in(&free[sp]) {
                fits = false;
                break;
            }
            free[sp] = free[sp].checked_sub(&d);
            applied += 1;
        }
        let mut budget_ok = true;
        if fits {
            if let Some(b) = budget {
                if total.fits_in(b) {
                    *b = b.checked_sub(&total);
                } else {
                    budget_ok = false;
                }
            }
        }
        if fits && budget_ok {
            any = true;
            picks.push(cx);
            dfs(
                ctx,
                depth + 1,
                free,
                budget,
                obj + value,
                mem + choice_mem,
                picks,
            );
            picks.pop();
            if let Some(b) = budget {
                *b = b.checked_add(&total);
            }
        } else if !budget_ok && depth >= ctx.stuck_depth {
            ctx.stuck_depth = depth;
            ctx.stuck_global = true;
        }
        for i in 0..applied {
            let (sp, d) = ctx.pre[depth][cx].entries[i];
            free[sp] = free[sp].checked_add(&d);
        }
    }
    if !any && depth > ctx.stuck_depth {
        ctx.stuck_depth = depth;
        ctx.stuck_global = false;
    }
}

/// Solve the warm-placement problem.
///
/// Exact branch and bound when the instance is within `budget_tuples`
/// (app, variant, server) tuples; otherwise the reactive heuristic runs
/// restricted to K (or planning fails when `allow_fallback` is off).
/// Ties in the objective resolve toward the smaller total memory footprint,
/// then the first plan in deterministic exploration order.
pub fn solve_warm(catalog: &Catalog, problem: &WarmProblem) -> Result<PlacementPlan> {
    if problem.apps.is_empty() {
        return Ok(PlacementPlan {
            warm: BTreeMap::new(),
            objective: 0.0,
            feasible: true,
            violated: None,
            detail: None,
            skipped: Vec::new(),
            used_fallback: false,
        });
    }
    if let Some(alpha) = problem.alpha {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Planning(format!("alpha {alpha} outside [0, 1]")));
        }
    }
    if problem.tuple_count() > problem.budget_tuples {
        if !problem.allow_fallback {
            return Err(Error::Planning(format!(
                "instance has {} assignment tuples (budget {}) and fallback is disabled",
                problem.tuple_count(),
                problem.budget_tuples
            )));
        }
        return fallback_heuristic(catalog, problem);
    }

    // Per-app legal candidates; unplaceable apps either stop the plan or are
    // skipped under partial-K.
    let mut skipped: Vec<AppIx> = Vec::new();
    let mut active: Vec<&WarmApp> = Vec::new();
    for app in &problem.apps {
        let any_legal = app.candidates.iter().any(|c| legal(problem, app, c));
        if any_legal {
            active.push(app);
        } else if problem.partial_k {
            skipped.push(app.app);
        } else {
            let constraint = blocking_constraint(problem, app);
            return Ok(PlacementPlan::infeasible(
                constraint,
                format!(
                    "app {} has no legal (variant, server) assignment",
                    app.app_id
                ),
            ));
        }
    }

    // Branch order: most valuable apps first, ties by id.
    let mut order: Vec<usize> = (0..active.len()).collect();
    order.sort_by(|&a, &b| {
        let key = |ix: usize| {
            let app = active[ix];
            app.candidates
                .iter()
                .map(|c| app.rate * c.acc)
                .fold(0.0, f64::max)
        };
        key(b)
            .partial_cmp(&key(a))
            .unwrap()
            .then_with(|| active[a].app_id.cmp(&active[b].app_id))
    });
    let ordered: Vec<&WarmApp> = order.iter().map(|&i| active[i]).collect();

    let mut choices: Vec<Vec<Choice>> = Vec::with_capacity(ordered.len());
    for app in &ordered {
        let feasible: Vec<usize> = (0..app.candidates.len())
            .filter(|&c| legal(problem, app, &app.candidates[c]))
            .collect();
        let ch = enumerate_choices(problem, app, &feasible)?;
        if ch.is_empty() {
            // Possible only with replicas > 1: singles exist, no legal combo.
            if problem.partial_k {
                skipped.push(app.app);
                continue;
            }
            return Ok(PlacementPlan::infeasible(
                if problem.site_independence {
                    WarmConstraint::SiteIndependence
                } else {
                    WarmConstraint::Coverage
                },
                format!("app {} has no legal replica combination", app.app_id),
            ));
        }
        choices.push(ch);
    }
    let ordered: Vec<&WarmApp> = ordered
        .into_iter()
        .filter(|a| !skipped.contains(&a.app))
        .collect();

    let n = choices.len();
    let mut suffix_best = vec![0.0; n + 1];
    let mut suffix_min_mem = vec![0u64; n + 1];
    for i in (0..n).rev() {
        suffix_best[i] = suffix_best[i + 1] + choices[i][0].value;
        suffix_min_mem[i] =
            suffix_min_mem[i + 1] + choices[i].iter().map(|c| c.mem).min().unwrap_or(0);
    }
    let pre: Vec<Vec<ChoicePre>> = ordered
        .iter()
        .zip(&choices)
        .map(|(app, ch)| {
            ch.iter()
                .map(|choice| {
                    let entries: Vec<(usize, Resources)> = choice
                        .picks
                        .iter()
                        .map(|&p| (app.candidates[p].server_pos, app.candidates[p].demand))
                        .collect();
                    let total = entries
                        .iter()
                        .fold(Resources::default(), |acc, (_, d)| acc.checked_add(d));
                    ChoicePre { entries, total }
                })
                .collect()
        })
        .collect();

    let mut ctx = SearchCtx {
        choices: &choices,
        pre,
        suffix_best,
        suffix_min_mem,
        best: None,
        stuck_depth: 0,
        stuck_global: false,
        nodes: 0,
        // The tuple budget gates which instances get the exact search; the
        // node budget bounds how long that search may prove optimality.
        node_budget: problem.budget_tuples.saturating_mul(10),
        truncated: false,
    };
    let mut free: Vec<Resources> = problem.servers.iter().map(|s| s.free).collect();
    let mut budget = problem.reservation_budget();
    let mut picks = Vec::with_capacity(n);
    dfs(&mut ctx, 0, &mut free, &mut budget, 0.0, 0, &mut picks);
    let truncated = ctx.truncated;

    match ctx.best {
        Some((objective, _, assignment)) => {
            let mut warm: BTreeMap<AppIx, Vec<(VariantIx, ServerIx)>> = BTreeMap::new();
            for (depth, &cx) in assignment.iter().enumerate() {
                let app = ordered[depth];
                let mut entries: Vec<(VariantIx, ServerIx)> = choices[depth][cx]
                    .picks
                    .iter()
                    .map(|&p| {
                        let cand = &app.candidates[p];
                        (cand.variant, problem.servers[cand.server_pos].server)
                    })
                    .collect();
                entries.sort_by_key(|&(v, s)| (s, v));
                warm.insert(app.app, entries);
            }
            skipped.sort();
            Ok(PlacementPlan {
                warm,
                objective,
                feasible: true,
                violated: None,
                detail: truncated.then(|| {
                    format!(
                        "search truncated after {} nodes; best assignment found within \
                         budget (optimality not proven)",
                        ctx.nodes
                    )
                }),
                skipped,
                used_fallback: false,
            })
        }
        None if truncated => {
            // The search ran out of nodes before completing any assignment;
            // that is a budget statement, not an infeasibility proof.
            fallback_heuristic(catalog, problem)
        }
        None => {
            if problem.partial_k {
                // Best effort: let the heuristic place what it can.
                return fallback_heuristic(catalog, problem);
            }
            let stuck_app = ordered.get(ctx.stuck_depth).map(|a| a.app_id.as_str());
            let (constraint, what) = if ctx.stuck_global {
                (
                    WarmConstraint::GlobalReservation,
                    "the (1-alpha) reservation",
                )
            } else {
                (WarmConstraint::ServerCapacity, "free server capacity")
            };
            Ok(PlacementPlan::infeasible(
                constraint,
                format!(
                    "no full assignment fits {what}; search stalled at app {}",
                    stuck_app.unwrap_or("?")
                ),
            ))
        }
    }
}

/// Right-size K with the reactive heuristic: used past the exact-solver
/// budget and as the best-effort path under partial-K.
fn fallback_heuristic(catalog: &Catalog, problem: &WarmProblem) -> Result<PlacementPlan> {
    if problem.replicas_per_app > 1 {
        return Err(Error::Planning(
            "replica placement needs the exact solver; raise the tuple budget".into(),
        ));
    }
    let request = FailoverRequest {
        affected: problem
            .apps
            .iter()
            .map(|a| PlanApp {
                app: a.app,
                app_id: a.app_id.clone(),
                family: a.family,
                rate: a.rate,
                slo_ms: a.slo_ms,
                forbidden_server: Some(a.primary_server),
                forbidden_site: problem.site_independence.then_some(a.primary_site),
            })
            .collect(),
        servers: problem.servers.clone(),
        // Warm replicas load ahead of failures; no transient co-residency.
        progressive_loading: false,
        global_budget: problem.reservation_budget(),
    };
    let decision = plan_failover(catalog, &request);
    let mut warm = BTreeMap::new();
    let mut objective = 0.0;
    for p in &decision.placements {
        let acc = catalog.variant(p.selected).norm_accuracy;
        let rate = problem
            .apps
            .iter()
            .find(|a| a.app == p.app)
            .map_or(0.0, |a| a.rate);
        objective += rate * acc;
        warm.insert(p.app, vec![(p.selected, p.server)]);
    }
    let feasible = decision.unrecovered.is_empty() || problem.partial_k;
    let (violated, detail) = if feasible {
        (None, None)
    } else {
        let first = decision.unrecovered[0];
        let app = problem
            .apps
            .iter()
            .find(|a| a.app == first)
            .expect("app came from K");
        (
            Some(blocking_constraint(problem, app)),
            Some(format!("heuristic could not place app {}", app.app_id)),
        )
    };
    Ok(PlacementPlan {
        warm,
        objective,
        feasible,
        violated,
        detail,
        skipped: decision.unrecovered,
        used_fallback: true,
    })
}

/// Check a plan against every placement constraint; empty means clean.
/// Coverage is only demanded of feasible plans of problems that require it;
/// apps listed in `plan.skipped` are exempt from coverage.
pub fn validate_plan(
    catalog: &Catalog,
    plan: &PlacementPlan,
    problem: &WarmProblem,
) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut per_server: BTreeMap<usize, Resources> = BTreeMap::new();
    let mut total = Resources::default();

    for (&app_ix, entries) in &plan.warm {
        let Some(app) = problem.apps.iter().find(|a| a.app == app_ix) else {
            violations.push(Violation {
                constraint: WarmConstraint::Coverage,
                app_id: None,
                server_id: None,
                detail: format!("plan places app index {} outside K", app_ix.0),
            });
            continue;
        };
        let mut seen_servers: Vec<ServerIx> = Vec::new();
        let mut seen_sites: Vec<SiteIx> = Vec::new();
        for &(variant, server) in entries {
            let Some(server_pos) = problem.servers.iter().position(|s| s.server == server) else {
                violations.push(Violation {
                    constraint: WarmConstraint::ServerCapacity,
                    app_id: Some(app.app_id.clone()),
                    server_id: None,
                    detail: format!("assignment targets unknown server index {}", server.0),
                });
                continue;
            };
            let srv = &problem.servers[server_pos];
            if !catalog.family(app.family).variants.contains(&variant) {
                violations.push(Violation {
                    constraint: WarmConstraint::Coverage,
                    app_id: Some(app.app_id.clone()),
                    server_id: Some(srv.server_id.clone()),
                    detail: format!(
                        "variant {} does not belong to the app's family",
                        catalog.variant(variant).variant_id
                    ),
                });
                continue;
            }
            if server == app.primary_server {
                violations.push(Violation {
                    constraint: WarmConstraint::PrimaryCollision,
                    app_id: Some(app.app_id.clone()),
                    server_id: Some(srv.server_id.clone()),
                    detail: "backup scheduled on the app's own primary server".into(),
                });
            }
            if problem.site_independence && srv.site == app.primary_site {
                violations.push(Violation {
                    constraint: WarmConstraint::SiteIndependence,
                    app_id: Some(app.app_id.clone()),
                    server_id: Some(srv.server_id.clone()),
                    detail: "backup shares a site with the app's primary".into(),
                });
            }
            match catalog.observed_latency_ms(variant, &srv.class, srv.net_latency_ms) {
                Some(l) if l <= app.slo_ms => {}
                Some(l) => violations.push(Violation {
                    constraint: WarmConstraint::LatencySlo,
                    app_id: Some(app.app_id.clone()),
                    server_id: Some(srv.server_id.clone()),
                    detail: format!(
                        "observed latency {l:.2} ms exceeds SLO {:.2} ms",
                        app.slo_ms
                    ),
                }),
                None => violations.push(Violation {
                    constraint: WarmConstraint::LatencySlo,
                    app_id: Some(app.app_id.clone()),
                    server_id: Some(srv.server_id.clone()),
                    detail: format!("server class {} is not profiled for the variant", srv.class),
                }),
            }
            if seen_servers.contains(&server) {
                violations.push(Violation {
                    constraint: WarmConstraint::Coverage,
                    app_id: Some(app.app_id.clone()),
                    server_id: Some(srv.server_id.clone()),
                    detail: "replicas of one app share a server".into(),
                });
            }
            if problem.site_independence && seen_sites.contains(&srv.site) {
                violations.push(Violation {
                    constraint: WarmConstraint::SiteIndependence,
                    app_id: Some(app.app_id.clone()),
                    server_id: Some(srv.server_id.clone()),
                    detail: "replicas of one app share a site".into(),
                });
            }
            seen_servers.push(server);
            seen_sites.push(srv.site);

            let var = catalog.variant(variant);
            let demand = Resources::new(var.mem_kib, var.compute_millis);
            let entry = per_server.entry(server_pos).or_default();
            *entry = entry.checked_add(&demand);
            total = total.checked_add(&demand);
        }
    }

    for (&server_pos, used) in &per_server {
        let srv = &problem.servers[server_pos];
        if !used.fits_in(&srv.free) {
            violations.push(Violation {
                constraint: WarmConstraint::ServerCapacity,
                app_id: None,
                server_id: Some(srv.server_id.clone()),
                detail: format!(
                    "warm load {} KiB / {} compute-millis exceeds free {} KiB / {}",
                    used.mem_kib, used.compute_millis, srv.free.mem_kib, srv.free.compute_millis
                ),
            });
        }
    }
    if let Some(budget) = problem.reservation_budget() {
        if !total.fits_in(&budget) {
            violations.push(Violation {
                constraint: WarmConstraint::GlobalReservation,
                app_id: None,
                server_id: None,
                detail: format!(
                    "warm total {} KiB / {} compute-millis exceeds the reservation {} KiB / {}",
                    total.mem_kib, total.compute_millis, budget.mem_kib, budget.compute_millis
                ),
            });
        }
    }

    if problem.require_coverage && plan.feasible {
        let want = problem.replicas_per_app.max(1);
        for app in &problem.apps {
            if plan.skipped.contains(&app.app) {
                continue;
            }
            let got = plan.warm.get(&app.app).map_or(0, |e| e.len());
            if got != want {
                violations.push(Violation {
                    constraint: WarmConstraint::Coverage,
                    app_id: Some(app.app_id.clone()),
                    server_id: None,
                    detail: format!("app has {got} assignments, expected {want}"),
                });
            }
        }
    }
    violations
}
