//! Reactive failover planning: demand-ratio variant matching, worst-fit
//! placement, and the smallest-first progressive loading schedule.
//!
//! When more demand fails over than the survivors can absorb at full size,
//! the planner right-sizes each replacement: it computes the ratio δ of free
//! memory to full-size demand, matches every app to the variant closest to
//! δ·full, packs the selections worst-fit, and finally upgrades selections
//! where memory is left over. Recovery itself is progressive: the smallest
//! variant loads (and serves) first, the selected variant follows in the
//! background, so time-to-recovery tracks the smallest footprint.

use crate::catalog::{Catalog, FamilyIx, MemKib, VariantIx};
use crate::cluster::{AppIx, ClusterState, Resources, ServerIx, SiteIx};

/// One application that needs a new serving replica.
#[derive(Debug, Clone)]
pub struct PlanApp {
    pub app: AppIx,
    pub app_id: String,
    pub family: FamilyIx,
    pub rate: f64,
    pub slo_ms: f64,
    /// The (failed) primary server: never a placement target.
    pub forbidden_server: Option<ServerIx>,
    /// When set, candidate servers in this site are excluded (used by the
    /// warm-placement fallback with site independence enabled).
    pub forbidden_site: Option<SiteIx>,
}

/// Free capacity snapshot of one candidate server.
#[derive(Debug, Clone)]
pub struct PlanServer {
    pub server: ServerIx,
    pub server_id: String,
    pub site: SiteIx,
    pub class: String,
    pub net_latency_ms: f64,
    pub capacity: Resources,
    pub free: Resources,
}

/// Input to [`plan_failover`]: the affected apps N' and available servers S'.
#[derive(Debug, Clone)]
pub struct FailoverRequest {
    pub affected: Vec<PlanApp>,
    pub servers: Vec<PlanServer>,
    /// Smallest-first loading: placements are charged for the smallest and
    /// the selected variant concurrently (the upgrade's transient footprint).
    pub progressive_loading: bool,
    /// Optional aggregate cap across all placements (warm-plan fallback mode;
    /// reactive planning has no global reservation).
    pub global_budget: Option<Resources>,
}

impl FailoverRequest {
    /// Build a request that replans every application at once: each app's
    /// own primary host is forbidden for it but stays available to the
    /// others. This is the scalability-benchmark workload; scenario runs
    /// assemble their requests from live failure state instead.
    pub fn full_replan(state: &ClusterState, progressive_loading: bool) -> FailoverRequest {
        let affected = state
            .app_ixs()
            .map(|a| {
                let app = state.app(a);
                PlanApp {
                    app: a,
                    app_id: app.app_id.clone(),
                    family: app.family,
                    rate: app.rate,
                    slo_ms: app.slo_ms,
                    forbidden_server: Some(app.primary_server),
                    forbidden_site: None,
                }
            })
            .collect();
        let servers = state
            .server_ixs()
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
        FailoverRequest {
            affected,
            servers,
            progressive_loading,
            global_budget: None,
        }
    }
}

/// A planned replacement replica.
#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub app: AppIx,
    pub server: ServerIx,
    /// Variant that will serve once the schedule completes.
    pub selected: VariantIx,
    /// Variant loaded (and switched to) first; equals `selected` unless
    /// progressive loading picked a smaller stepping stone.
    pub first_load: VariantIx,
    /// Resources charged on the server while the schedule runs.
    pub footprint: Resources,
}

/// Output of the planner: placements plus the apps nothing could absorb.
#[derive(Debug, Clone)]
pub struct FailoverDecision {
    pub delta: f64,
    pub placements: Vec<Placement>,
    pub unrecovered: Vec<AppIx>,
}

/// δ = free memory across S' / full-size memory demand of N'.
/// Returns +∞ when nothing failed over (no demand).
pub fn demand_ratio(catalog: &Catalog, request: &FailoverRequest) -> f64 {
    let free: MemKib = request.servers.iter().map(|s| s.free.mem_kib).sum();
    let free = match request.global_budget {
        Some(budget) => free.min(budget.mem_kib),
        None => free,
    };
    let demand: MemKib = request
        .affected
        .iter()
        .map(|a| catalog.variant(catalog.largest(a.family)).mem_kib)
        .sum();
    if demand == 0 {
        return f64::INFINITY;
    }
    free as f64 / demand as f64
}

/// Variant whose memory demand is closest to δ·(full-size demand), capped at
/// full size for δ ≥ 1. Ties go to the higher-accuracy variant.
pub fn match_variant(catalog: &Catalog, family: FamilyIx, delta: f64) -> VariantIx {
    let full = catalog.largest(family);
    if delta >= 1.0 {
        return full;
    }
    let target = delta * catalog.variant(full).mem_kib as f64;
    let mut best: Option<(f64, f64, VariantIx)> = None;
    for &v in &catalog.family(family).variants {
        let var = catalog.variant(v);
        let dist = (var.mem_kib as f64 - target).abs();
        let better = match best {
            None => true,
            Some((bd, bacc, _)) => dist < bd || (dist == bd && var.norm_accuracy > bacc),
        };
        if better {
            best = Some((dist, var.norm_accuracy, v));
        }
    }
    best.expect("family is non-empty").2
}

pub(crate) fn slo_ok(
    catalog: &Catalog,
    variant: VariantIx,
    server: &PlanServer,
    slo_ms: f64,
) -> bool {
    catalog
        .observed_latency_ms(variant, &server.class, server.net_latency_ms)
        .is_some_and(|l| l <= slo_ms)
}

/// Worst-fit server selection over a free-capacity snapshot: the feasible
/// server with the most free memory, ties broken by larger free fraction,
/// then smaller server id.
pub(crate) fn pick_worst_fit(
    servers: &[PlanServer],
    free: &[Resources],
    need: &Resources,
    feasible: impl Fn(usize) -> bool,
) -> Option<usize> {
    let mut best: Option<(MemKib, f64, usize)> = None;
    for (sx, srv) in servers.iter().enumerate() {
        if !feasible(sx) || !need.fits_in(&free[sx]) {
            continue;
        }
        let frac = free[sx].mem_kib as f64 / srv.capacity.mem_kib.max(1) as f64;
        let better = match best {
            None => true,
            Some((bm, bf, bx)) => {
                free[sx].mem_kib > bm
                    || (free[sx].mem_kib == bm && frac > bf)
                    || (free[sx].mem_kib == bm
                        && frac == bf
                        && srv.server_id < servers[bx].server_id)
            }
        };
        if better {
            best = Some((free[sx].mem_kib, frac, sx));
        }
    }
    best.map(|(_, _, sx)| sx)
}

/// What a placement of `selected` charges while its schedule runs: with
/// progressive loading the smallest variant is co-resident until the upgrade
/// finishes, so both footprints (and the larger compute) are reserved.
fn footprint(
    catalog: &Catalog,
    family: FamilyIx,
    selected: VariantIx,
    progressive_loading: bool,
) -> Resources {
    let sel = catalog.variant(selected);
    let smallest = catalog.smallest(family);
    if !progressive_loading || selected == smallest {
        return Resources::new(sel.mem_kib, sel.compute_millis);
    }
    let small = catalog.variant(smallest);
    Resources::new(
        sel.mem_kib + small.mem_kib,
        sel.compute_millis.max(small.compute_millis),
    )
}

/// Plan replacements for every affected app: match a variant to δ, place it
/// on the worst-fit feasible server (falling back to smaller variants), then
/// upgrade selections while per-server memory allows.
pub fn plan_failover(catalog: &Catalog, request: &FailoverRequest) -> FailoverDecision {
    let delta = demand_ratio(catalog, request);

    // Mutable free-capacity view; placements pack sequentially.
    let mut free: Vec<Resources> = request.servers.iter().map(|s| s.free).collect();
    let mut budget = request.global_budget;

    // Descending rate * full-size accuracy, then app id.
    let mut order: Vec<usize> = (0..request.affected.len()).collect();
    order.sort_by(|&a, &b| {
        let key = |ix: usize| {
            let app = &request.affected[ix];
            app.rate * catalog.variant(catalog.largest(app.family)).norm_accuracy
        };
        key(b)
            .partial_cmp(&key(a))
            .unwrap()
            .then_with(|| request.affected[a].app_id.cmp(&request.affected[b].app_id))
    });

    let feasible_server = |app: &PlanApp, srv: &PlanServer| {
        app.forbidden_server != Some(srv.server)
            && app.forbidden_site.map_or(true, |site| srv.site != site)
    };

    let mut placements: Vec<Placement> = Vec::new();
    let mut unrecovered: Vec<AppIx> = Vec::new();

    for &ix in &order {
        let app = &request.affected[ix];
        let matched = match_variant(catalog, app.family, delta);
        let family = catalog.family(app.family);
        let matched_pos = family.variants.iter().position(|&v| v == matched).unwrap();

        let mut placed = false;
        // Walk the matched variant downward until something fits somewhere.
        for &variant in family.variants[..=matched_pos].iter().rev() {
            let need = footprint(catalog, app.family, variant, request.progressive_loading);
            if let Some(b) = budget {
                if !need.fits_in(&b) {
                    continue;
                }
            }
            let best = pick_worst_fit(&request.servers, &free, &need, |sx| {
                let srv = &request.servers[sx];
                feasible_server(app, srv) && slo_ok(catalog, variant, srv, app.slo_ms)
            });
            if let Some(sx) = best {
                free[sx] = free[sx].checked_sub(&need);
                if let Some(b) = budget.as_mut() {
                    *b = b.checked_sub(&need);
                }
                placements.push(Placement {
                    app: app.app,
                    server: request.servers[sx].server,
                    selected: variant,
                    first_load: if request.progressive_loading {
                        catalog.smallest(app.family)
                    } else {
                        variant
                    },
                    footprint: need,
                });
                placed = true;
                break;
            }
        }
        if !placed {
            unrecovered.push(app.app);
        }
    }

    // Upgrade pass: promote each selection to the most accurate variant the
    // chosen server can still hold (co-residency included).
    for placement in &mut placements {
        let app = request
            .affected
            .iter()
            .find(|a| a.app == placement.app)
            .expect("placement app comes from the request");
        let sx = request
            .servers
            .iter()
            .position(|s| s.server == placement.server)
            .expect("placement server comes from the request");
        let current_acc = catalog.variant(placement.selected).norm_accuracy;
        let mut best: Option<(f64, MemKib, VariantIx)> = None;
        for &v in &catalog.family(app.family).variants {
            let var = catalog.variant(v);
            if v == placement.selected || var.norm_accuracy < current_acc {
                continue;
            }
            let need = footprint(catalog, app.family, v, request.progressive_loading);
            let extra_mem = need.mem_kib.saturating_sub(placement.footprint.mem_kib);
            let extra_cpu = need
                .compute_millis
                .saturating_sub(placement.footprint.compute_millis);
            let extra = Resources::new(extra_mem, extra_cpu);
            if !extra.fits_in(&free[sx]) || !slo_ok(catalog, v, &request.servers[sx], app.slo_ms) {
                continue;
            }
            if let Some(b) = budget {
                if !extra.fits_in(&b) {
                    continue;
                }
            }
            let better = match best {
                None => true,
                Some((bacc, bmem, _)) => {
                    var.norm_accuracy > bacc || (var.norm_accuracy == bacc && var.mem_kib > bmem)
                }
            };
            if better {
                best = Some((var.norm_accuracy, var.mem_kib, v));
            }
        }
        if let Some((_, _, v)) = best {
            let need = footprint(catalog, app.family, v, request.progressive_loading);
            let extra = Resources::new(
                need.mem_kib - placement.footprint.mem_kib,
                need.compute_millis
                    .saturating_sub(placement.footprint.compute_millis),
            );
            free[sx] = free[sx].checked_sub(&extra);
            if let Some(b) = budget.as_mut() {
                *b = b.checked_sub(&extra);
            }
            placement.selected = v;
            placement.footprint = need;
        }
    }

    unrecovered.sort();
    FailoverDecision {
        delta,
        placements,
        unrecovered,
    }
}

// ── schedules ───────────────────────────────────────────────────────────────

/// One load in a recovery schedule. Traffic moves to the variant at
/// `complete_us`; the first step's completion is the recovery point.
#[derive(Debug, Clone)]
pub struct LoadStep {
    pub variant: VariantIx,
    pub start_us: u64,
    pub complete_us: u64,
    pub upgrade: bool,
}

fn ms_to_us(ms: f64) -> u64 {
    (ms * 1000.0).round() as u64
}

/// Expand a placement into its ordered load steps starting at `t0_us`.
/// Single step when the first load already is the selected variant;
/// otherwise the selected variant loads in the background after the first
/// switch and replaces it atomically on completion.
pub fn schedule(
    catalog: &Catalog,
    placement: &Placement,
    t0_us: u64,
    fetch_us: u64,
) -> Vec<LoadStep> {
    let first_done = t0_us + fetch_us + ms_to_us(catalog.load_ms(placement.first_load));
    let mut steps = vec![LoadStep {
        variant: placement.first_load,
        start_us: t0_us,
        complete_us: first_done,
        upgrade: false,
    }];
    if placement.selected != placement.first_load {
        steps.push(LoadStep {
            variant: placement.selected,
            start_us: first_done,
            complete_us: first_done + fetch_us + ms_to_us(catalog.load_ms(placement.selected)),
            upgrade: true,
        });
    }
    steps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::Catalog;

    /// One family per entry: (family_id, [(variant_id, acc, mem_mib)]).
    fn catalog_of(families: &[(&str, &[(&str, f64, f64)])]) -> Catalog {
        let mut text = String::from("schema_version = 1\n");
        for (fam, variants) in families {
            text.push_str(&format!("[[families]]\nfamily_id = \"{fam}\"\n"));
            for (id, acc, mem) in *variants {
                text.push_str(&format!(
                    "[[families.variants]]\nvariant_id = \"{id}\"\nraw_accuracy = {acc}\n\
                     mem_demand_mib = {mem}\ncompute_fraction = 0.0\n"
                ));
            }
        }
        Catalog::from_toml(&text, "toy").unwrap()
    }

    fn server(id: &str, free_mib: f64) -> PlanServer {
        PlanServer {
            server: ServerIx(id.bytes().last().unwrap() as usize),
            server_id: id.to_string(),
            site: SiteIx(0),
            class: "default".into(),
            net_latency_ms: 0.0,
            capacity: Resources::new(crate::catalog::mib_to_kib(free_mib), 1000),
            free: Resources::new(crate::catalog::mib_to_kib(free_mib), 1000),
        }
    }

    fn plan_app(catalog: &Catalog, id: &str, family: &str) -> PlanApp {
        PlanApp {
            app: AppIx(id.bytes().last().unwrap() as usize),
            app_id: id.to_string(),
            family: catalog.family_by_id(family).unwrap(),
            rate: 1.0,
            slo_ms: 1e9,
            forbidden_server: None,
            forbidden_site: None,
        }
    }

    fn request(
        catalog: &Catalog,
        apps: &[(&str, &str)],
        servers: &[(&str, f64)],
    ) -> FailoverRequest {
        FailoverRequest {
            affected: apps
                .iter()
                .map(|(id, fam)| plan_app(catalog, id, fam))
                .collect(),
            servers: servers.iter().map(|(id, mib)| server(id, *mib)).collect(),
            progressive_loading: true,
            global_budget: None,
        }
    }

    #[test]
    fn demand_ratio_arithmetic() {
        let cat = catalog_of(&[("f", &[("small", 0.8, 100.0), ("full", 1.0, 800.0)])]);
        // free 1000 MiB vs one full-size 800 MiB demand -> 1.25.
        let req = request(&cat, &[("a", "f")], &[("s1", 1000.0)]);
        assert!((demand_ratio(&cat, &req) - 1.25).abs() < 1e-12);
        // free 400 vs 800 -> 0.5.
        let req = request(&cat, &[("a", "f")], &[("s1", 400.0)]);
        assert!((demand_ratio(&cat, &req) - 0.5).abs() < 1e-12);
        // No affected apps -> +inf sentinel.
        let req = request(&cat, &[], &[("s1", 400.0)]);
        assert!(demand_ratio(&cat, &req).is_infinite());
    }

    #[test]
    fn match_variant_caps_and_picks_nearest() {
        let cat = catalog_of(&[(
            "f",
            &[("v10", 0.7, 10.0), ("v30", 0.8, 30.0), ("v100", 1.0, 100.0)],
        )]);
        let fam = cat.family_by_id("f").unwrap();
        // Cap at full size for delta >= 1.
        assert_eq!(
            cat.variant(match_variant(&cat, fam, 1.5)).variant_id,
            "v100"
        );
        assert_eq!(
            cat.variant(match_variant(&cat, fam, 1.0)).variant_id,
            "v100"
        );
        // delta 0.3 -> target 30 -> exact hit.
        assert_eq!(cat.variant(match_variant(&cat, fam, 0.3)).variant_id, "v30");
        // delta 0.5 with {50%, 100%} variants -> the 50% variant.
        let cat2 = catalog_of(&[("g", &[("half", 0.9, 50.0), ("full", 1.0, 100.0)])]);
        let fam2 = cat2.family_by_id("g").unwrap();
        assert_eq!(
            cat2.variant(match_variant(&cat2, fam2, 0.5)).variant_id,
            "half"
        );
    }

    #[test]
    fn match_variant_tie_prefers_accuracy() {
        // Target 65 is equidistant from 30 and 100; higher accuracy wins.
        let cat = catalog_of(&[("f", &[("v30", 0.8, 30.0), ("v100", 1.0, 100.0)])]);
        let fam = cat.family_by_id("f").unwrap();
        assert_eq!(
            cat.variant(match_variant(&cat, fam, 0.65)).variant_id,
            "v100"
        );
    }

    #[test]
    fn ample_capacity_places_full_size_directly() {
        let cat = catalog_of(&[("f", &[("small", 0.8, 100.0), ("full", 1.0, 800.0)])]);
        let req = request(&cat, &[("a", "f")], &[("s1", 4000.0)]);
        let decision = plan_failover(&cat, &req);
        assert!(decision.unrecovered.is_empty());
        let p = &decision.placements[0];
        assert_eq!(cat.variant(p.selected).variant_id, "full");
        // Progressive loading still steps through the smallest variant.
        assert_eq!(cat.variant(p.first_load).variant_id, "small");
        // Transient co-residency charged: 100 + 800 MiB.
        assert_eq!(p.footprint.mem_kib, crate::catalog::mib_to_kib(900.0));
    }

    #[test]
    fn capacity_squeeze_falls_to_smallest_single_step() {
        let cat = catalog_of(&[("f", &[("small", 0.8, 158.0), ("full", 1.0, 806.0)])]);
        // 200 MiB free: delta ~0.25 matches the small variant; single step.
        let req = request(&cat, &[("a", "f")], &[("s1", 200.0)]);
        let decision = plan_failover(&cat, &req);
        let p = &decision.placements[0];
        assert_eq!(p.selected, p.first_load);
        assert_eq!(cat.variant(p.selected).variant_id, "small");
        assert_eq!(p.footprint.mem_kib, crate::catalog::mib_to_kib(158.0));
    }

    #[test]
    fn upgrade_blocked_by_coresidency_accounting() {
        // Two apps of a {30,100,500} family, 500 MiB free. delta = 0.5 so the
        // match picks 100; each placement charges 30+100 co-resident. The
        // remaining 240 MiB cannot host a 500-upgrade (30+500 footprint).
        let cat = catalog_of(&[(
            "f",
            &[
                ("v30", 0.8, 30.0),
                ("v100", 0.9, 100.0),
                ("v500", 1.0, 500.0),
            ],
        )]);
        let req = request(&cat, &[("a", "f"), ("b", "f")], &[("s1", 500.0)]);
        let decision = plan_failover(&cat, &req);
        assert_eq!(decision.placements.len(), 2);
        for p in &decision.placements {
            assert_eq!(cat.variant(p.selected).variant_id, "v100");
            assert_eq!(p.footprint.mem_kib, crate::catalog::mib_to_kib(130.0));
        }
        assert!((decision.delta - 0.5).abs() < 1e-12);
    }

    #[test]
    fn upgrade_promotes_when_memory_allows() {
        // A second, unplaceable whale drags delta down so the first app is
        // matched small; the upgrade pass then promotes it to full size.
        let cat = catalog_of(&[
            ("f", &[("v30", 0.8, 30.0), ("v100", 1.0, 100.0)]),
            ("whale", &[("w", 1.0, 2000.0)]),
        ]);
        let req = request(
            &cat,
            &[("a", "f"), ("b", "whale")],
            &[("s1", 500.0), ("s2", 500.0)],
        );
        let decision = plan_failover(&cat, &req);
        assert_eq!(decision.unrecovered.len(), 1, "whale cannot fit anywhere");
        let p = &decision.placements[0];
        // Matched small (delta = 1000/2100 gives target 47.6 -> v30), then
        // promoted to v100 since 30+100 fits the chosen server easily.
        assert_eq!(cat.variant(p.selected).variant_id, "v100");
        assert_eq!(cat.variant(p.first_load).variant_id, "v30");
        assert_eq!(p.footprint.mem_kib, crate::catalog::mib_to_kib(130.0));
    }

    #[test]
    fn worst_fit_prefers_most_free_memory() {
        let cat = catalog_of(&[("f", &[("v", 1.0, 100.0)])]);
        let req = request(&cat, &[("a", "f")], &[("s1", 300.0), ("s2", 900.0)]);
        let decision = plan_failover(&cat, &req);
        assert_eq!(decision.placements[0].server, req.servers[1].server);
    }

    #[test]
    fn forbidden_primary_server_excluded() {
        let cat = catalog_of(&[("f", &[("v", 1.0, 100.0)])]);
        let mut req = request(&cat, &[("a", "f")], &[("s1", 300.0), ("s2", 900.0)]);
        req.affected[0].forbidden_server = Some(req.servers[1].server);
        let decision = plan_failover(&cat, &req);
        assert_eq!(decision.placements[0].server, req.servers[0].server);
    }

    #[test]
    fn slo_filters_servers_per_variant() {
        let mut text = String::from("schema_version = 1\n[[families]]\nfamily_id = \"f\"\n");
        text.push_str(
            "[[families.variants]]\nvariant_id = \"v\"\nraw_accuracy = 1.0\n\
             mem_demand_mib = 100\ncompute_fraction = 0.0\n\
             [families.variants.service_latency_ms]\nfast = 5.0\nslow = 50.0\n",
        );
        let cat = Catalog::from_toml(&text, "toy").unwrap();
        let mut req = request(&cat, &[("a", "f")], &[("s1", 900.0), ("s2", 300.0)]);
        req.servers[0].class = "slow".into(); // more memory but violates SLO
        req.servers[1].class = "fast".into();
        req.affected[0].slo_ms = 10.0;
        let decision = plan_failover(&cat, &req);
        assert_eq!(decision.placements[0].server, req.servers[1].server);
        // Loosening the SLO flips the choice back to the worst-fit server.
        req.affected[0].slo_ms = 100.0;
        let decision = plan_failover(&cat, &req);
        assert_eq!(decision.placements[0].server, req.servers[0].server);
    }

    #[test]
    fn unrecovered_marked_when_nothing_fits() {
        let cat = catalog_of(&[("f", &[("v", 1.0, 100.0)])]);
        let req = request(&cat, &[("a", "f")], &[("s1", 50.0)]);
        let decision = plan_failover(&cat, &req);
        assert!(decision.placements.is_empty());
        assert_eq!(decision.unrecovered.len(), 1);
    }

    #[test]
    fn global_budget_caps_aggregate_placements() {
        let cat = catalog_of(&[("f", &[("v", 1.0, 100.0)]), ("g", &[("w", 1.0, 100.0)])]);
        let mut req = request(&cat, &[("a", "f"), ("b", "g")], &[("s1", 900.0)]);
        req.progressive_loading = false;
        req.global_budget = Some(Resources::new(crate::catalog::mib_to_kib(150.0), 1000));
        let decision = plan_failover(&cat, &req);
        assert_eq!(decision.placements.len(), 1);
        assert_eq!(decision.unrecovered.len(), 1);
    }

    #[test]
    fn schedule_single_step_when_selected_is_smallest() {
        let cat = catalog_of(&[("f", &[("small", 0.8, 158.0), ("full", 1.0, 806.0)])]);
        let fam = cat.family_by_id("f").unwrap();
        let placement = Placement {
            app: AppIx(0),
            server: ServerIx(0),
            selected: cat.smallest(fam),
            first_load: cat.smallest(fam),
            footprint: Resources::new(crate::catalog::mib_to_kib(158.0), 0),
        };
        let steps = schedule(&cat, &placement, 1_000_000, 0);
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].complete_us, 1_000_000 + 441_000);
        assert!(!steps[0].upgrade);
    }

    #[test]
    fn schedule_two_steps_with_reference_load_times() {
        // 158 MiB first load recovers at ~441 ms; the 806 MiB upgrade
        // completes ~2105 ms after that.
        let cat = catalog_of(&[("f", &[("small", 0.8, 158.0), ("full", 1.0, 806.0)])]);
        let fam = cat.family_by_id("f").unwrap();
        let placement = Placement {
            app: AppIx(0),
            server: ServerIx(0),
            selected: cat.largest(fam),
            first_load: cat.smallest(fam),
            footprint: Resources::new(crate::catalog::mib_to_kib(964.0), 0),
        };
        let steps = schedule(&cat, &placement, 0, 0);
        assert_eq!(steps.len(), 2);
        assert_eq!(steps[0].complete_us, 441_000);
        assert_eq!(steps[1].start_us, 441_000);
        assert_eq!(steps[1].complete_us, 441_000 + 2_105_000);
        assert!(steps[1].upgrade);
    }

    #[test]
    fn recovery_point_dominates_direct_load() {
        // With progressive loading the first switch lands strictly earlier
        // than loading the selected variant directly (when they differ).
        let cat = catalog_of(&[("f", &[("small", 0.8, 158.0), ("full", 1.0, 806.0)])]);
        let fam = cat.family_by_id("f").unwrap();
        let progressive = Placement {
            app: AppIx(0),
            server: ServerIx(0),
            selected: cat.largest(fam),
            first_load: cat.smallest(fam),
            footprint: Resources::default(),
        };
        let direct = Placement {
            first_load: cat.largest(fam),
            ..progressive.clone()
        };
        let fetch = 800_000;
        let p = schedule(&cat, &progressive, 0, fetch);
        let d = schedule(&cat, &direct, 0, fetch);
        assert!(p[0].complete_us < d[0].complete_us);
    }

    /// Exhaustive oracle over all (variant-or-skip, server) assignments with
    /// the same footprint accounting; maximizes Σ rate·accuracy.
    fn oracle_best(catalog: &Catalog, req: &FailoverRequest) -> f64 {
        fn rec(
            catalog: &Catalog,
            req: &FailoverRequest,
            ix: usize,
            free: &mut Vec<Resources>,
            acc: f64,
            best: &mut f64,
        ) {
            if ix == req.affected.len() {
                *best = best.max(acc);
                return;
            }
            let app = &req.affected[ix];
            rec(catalog, req, ix + 1, free, acc, best); // skip (unrecovered)
            let variants = catalog.family(app.family).variants.clone();
            for &v in &variants {
                let need = footprint(catalog, app.family, v, req.progressive_loading);
                for sx in 0..req.servers.len() {
                    let srv = &req.servers[sx];
                    if Some(srv.server) == app.forbidden_server
                        || !need.fits_in(&free[sx])
                        || !slo_ok(catalog, v, srv, app.slo_ms)
                    {
                        continue;
                    }
                    free[sx] = free[sx].checked_sub(&need);
                    rec(
                        catalog,
                        req,
                        ix + 1,
                        free,
                        acc + app.rate * catalog.variant(v).norm_accuracy,
                        best,
                    );
                    free[sx] = free[sx].checked_add(&need);
                }
            }
        }
        let mut free: Vec<Resources> = req.servers.iter().map(|s| s.free).collect();
        let mut best = 0.0;
        rec(catalog, req, 0, &mut free, 0.0, &mut best);
        best
    }

    #[test]
    fn heuristic_never_beats_exhaustive_oracle() {
        let cat = catalog_of(&[
            (
                "f",
                &[
                    ("f30", 0.8, 30.0),
                    ("f100", 0.9, 100.0),
                    ("f500", 1.0, 500.0),
                ],
            ),
            ("g", &[("g20", 0.85, 20.0), ("g200", 1.0, 200.0)]),
        ]);
        for (apps, servers) in [
            (vec![("a", "f"), ("b", "f")], vec![("s1", 500.0)]),
            (
                vec![("a", "f"), ("b", "g")],
                vec![("s1", 260.0), ("s2", 90.0)],
            ),
            (
                vec![("a", "g"), ("b", "g"), ("c", "f")],
                vec![("s1", 400.0)],
            ),
            (vec![("a", "f")], vec![("s1", 25.0)]),
        ] {
            let req = request(&cat, &apps, &servers);
            let decision = plan_failover(&cat, &req);
            let heuristic: f64 = decision
                .placements
                .iter()
                .map(|p| {
                    let app = req.affected.iter().find(|a| a.app == p.app).unwrap();
                    app.rate * cat.variant(p.selected).norm_accuracy
                })
                .sum();
            let best = oracle_best(&cat, &req);
            assert!(
                heuristic <= best + 1e-9,
                "heuristic {heuristic} exceeds oracle {best} on {apps:?}"
            );
        }
    }

    #[test]
    fn smallest_fit_guarantees_recovery() {
        // If an app's smallest variant fits some feasible server at its turn,
        // the app must not end up unrecovered.
        let cat = catalog_of(&[("f", &[("v30", 0.8, 30.0), ("v100", 1.0, 100.0)])]);
        let req = request(&cat, &[("a", "f"), ("b", "f"), ("c", "f")], &[("s1", 95.0)]);
        let decision = plan_failover(&cat, &req);
        // 95 MiB holds three 30 MiB smallest variants.
        assert!(decision.unrecovered.is_empty());
        assert_eq!(decision.placements.len(), 3);
    }
}
