//! Full-size replication baselines.
//!
//! Three reference policies that replicate applications only at full size —
//! no right-sizing, no accuracy trade — behind the same planner interfaces
//! as the two-step policy:
//!
//! * **full-warm**: full-size warm backups for everyone, greedily worst-fit,
//!   critical apps first; whoever doesn't fit has no backup at all.
//! * **full-cold**: nothing proactive; on failure, full-size replicas load
//!   cold — critical apps first, the rest in seeded-random order — until
//!   capacity runs out.
//! * **full-warm-k**: warm backups for the critical set only, cold loads
//!   for everyone else at failure time.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::catalog::Catalog;
use crate::cluster::{AppIx, Resources};
use crate::error::{Error, Result};
use crate::proactive::PlacementPlan;
use crate::progressive::{pick_worst_fit, slo_ok, Placement, PlanApp, PlanServer};

/// Failover policy under simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Policy {
    /// Right-sized warm backups for K plus reactive progressive failover.
    TwoStep,
    /// Full-size warm backups for all apps, best effort.
    FullWarm,
    /// Full-size cold loads at failure time only.
    FullCold,
    /// Full-size warm for K, full-size cold for the rest.
    FullWarmK,
}

impl Policy {
    pub const ALL: [Policy; 4] = [
        Policy::TwoStep,
        Policy::FullWarm,
        Policy::FullCold,
        Policy::FullWarmK,
    ];

    pub fn parse(name: &str) -> Result<Policy> {
        match name {
            "two-step" => Ok(Policy::TwoStep),
            "full-warm" => Ok(Policy::FullWarm),
            "full-cold" => Ok(Policy::FullCold),
            "full-warm-k" => Ok(Policy::FullWarmK),
            other => Err(Error::Setup(format!(
                "unknown policy \"{other}\" (expected two-step, full-warm, full-cold, full-warm-k)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::TwoStep => "two-step",
            Policy::FullWarm => "full-warm",
            Policy::FullCold => "full-cold",
            Policy::FullWarmK => "full-warm-k",
        }
    }

    /// Who gets a proactive warm backup under this policy.
    pub fn warm_scope(&self) -> WarmScope {
        match self {
            Policy::TwoStep | Policy::FullWarmK => WarmScope::CriticalOnly,
            Policy::FullWarm => WarmScope::All,
            Policy::FullCold => WarmScope::None,
        }
    }

    /// Whether apps without a live warm backup get reactive cold loads.
    pub fn has_cold_fallback(&self) -> bool {
        matches!(self, Policy::TwoStep | Policy::FullCold | Policy::FullWarmK)
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarmScope {
    All,
    CriticalOnly,
    None,
}

/// Baseline ordering: descending rate (full-size accuracy is 1 for every
/// app), ties by app id.
fn by_priority(apps: &mut [&PlanApp]) {
    apps.sort_by(|a, b| {
        b.rate
            .partial_cmp(&a.rate)
            .unwrap()
            .then_with(|| a.app_id.cmp(&b.app_id))
    });
}

/// Greedy full-size warm placement: critical apps first, then the rest,
/// each worst-fit onto the feasible server with the most free memory.
/// Apps that don't fit are skipped — baselines never downsize.
pub fn plan_full_warm(
    catalog: &Catalog,
    servers: &[PlanServer],
    apps: &[PlanApp],
    k: &BTreeSet<AppIx>,
    include_non_critical: bool,
) -> PlacementPlan {
    let mut free: Vec<Resources> = servers.iter().map(|s| s.free).collect();
    let mut critical: Vec<&PlanApp> = apps.iter().filter(|a| k.contains(&a.app)).collect();
    let mut rest: Vec<&PlanApp> = if include_non_critical {
        apps.iter().filter(|a| !k.contains(&a.app)).collect()
    } else {
        Vec::new()
    };
    by_priority(&mut critical);
    by_priority(&mut rest);

    let mut warm = BTreeMap::new();
    let mut skipped = Vec::new();
    let mut objective = 0.0;
    for app in critical.into_iter().chain(rest) {
        let full = catalog.largest(app.family);
        let var = catalog.variant(full);
        let need = Resources::new(var.mem_kib, var.compute_millis);
        let pick = pick_worst_fit(servers, &free, &need, |sx| {
            let srv = &servers[sx];
            app.forbidden_server != Some(srv.server) && slo_ok(catalog, full, srv, app.slo_ms)
        });
        match pick {
            Some(sx) => {
                free[sx] = free[sx].checked_sub(&need);
                warm.insert(app.app, vec![(full, servers[sx].server)]);
                objective += app.rate * var.norm_accuracy;
            }
            None => skipped.push(app.app),
        }
    }
    skipped.sort();
    PlacementPlan {
        warm,
        objective,
        feasible: true, // best effort by definition; gaps live in `skipped`
        violated: None,
        detail: None,
        skipped,
        used_fallback: false,
    }
}

/// Reactive full-size cold placement in load order: critical apps first
/// (descending rate), the rest shuffled by the run's generator, each
/// worst-fit; apps that no longer fit are unrecovered. The returned
/// placement order is the load order.
pub fn plan_full_cold(
    catalog: &Catalog,
    servers: &[PlanServer],
    affected: &[PlanApp],
    k: &BTreeSet<AppIx>,
    rng: &mut ChaCha8Rng,
) -> (Vec<Placement>, Vec<AppIx>) {
    let mut free: Vec<Resources> = servers.iter().map(|s| s.free).collect();
    let mut critical: Vec<&PlanApp> = affected.iter().filter(|a| k.contains(&a.app)).collect();
    by_priority(&mut critical);
    let mut rest: Vec<&PlanApp> = affected.iter().filter(|a| !k.contains(&a.app)).collect();
    rest.sort_by(|a, b| a.app_id.cmp(&b.app_id)); // seed-independent base order
    rest.shuffle(rng);

    let mut placements = Vec::new();
    let mut unrecovered = Vec::new();
    for app in critical.into_iter().chain(rest) {
        let full = catalog.largest(app.family);
        let var = catalog.variant(full);
        let need = Resources::new(var.mem_kib, var.compute_millis);
        let pick = pick_worst_fit(servers, &free, &need, |sx| {
            let srv = &servers[sx];
            app.forbidden_server != Some(srv.server) && slo_ok(catalog, full, srv, app.slo_ms)
        });
        match pick {
            Some(sx) => {
                free[sx] = free[sx].checked_sub(&need);
                placements.push(Placement {
                    app: app.app,
                    server: servers[sx].server,
                    selected: full,
                    first_load: full,
                    footprint: need,
                });
            }
            None => unrecovered.push(app.app),
        }
    }
    unrecovered.sort();
    (placements, unrecovered)
}
