//! Shared helpers for the integration suite: an exhaustive placement oracle
//! used to cross-check the branch-and-bound solver on desk-size instances.

use failsim::cluster::Resources;
use failsim::proactive::{WarmApp, WarmCandidate, WarmProblem};

/// Assignment legality, restated independently of the solver: a backup may
/// not sit on its app's primary server (nor, under site independence, in the
/// primary's site) and must meet the app's SLO on the target server.
fn legal(problem: &WarmProblem, app: &WarmApp, cand: &WarmCandidate) -> bool {
    let srv = &problem.servers[cand.server_pos];
    srv.server != app.primary_server
        && (!problem.site_independence || srv.site != app.primary_site)
        && cand.latency_ms.is_some_and(|l| l <= app.slo_ms)
}

/// Exhaustive optimum of a single-replica warm-placement instance: the best
/// Σ rate·accuracy over every complete assignment that fits per-server free
/// capacity and the (1−α) reservation, or `None` when no complete assignment
/// exists. The only shortcut is capacity pruning, which is exact: demands
/// are non-negative, so an over-capacity prefix has no feasible extension.
pub fn enumerate_optimum(problem: &WarmProblem) -> Option<f64> {
    assert_eq!(
        problem.replicas_per_app, 1,
        "oracle covers single replicas only"
    );
    let choices: Vec<Vec<(usize, Resources, f64)>> = problem
        .apps
        .iter()
        .map(|app| {
            app.candidates
                .iter()
                .filter(|c| legal(problem, app, c))
                .map(|c| (c.server_pos, c.demand, app.rate * c.acc))
                .collect()
        })
        .collect();
    if choices.iter().any(Vec::is_empty) {
        return None;
    }
    let budget = problem.reservation_budget();
    let mut used = vec![Resources::default(); problem.servers.len()];
    let mut best = None;
    descend(
        problem,
        &choices,
        budget,
        0,
        Resources::default(),
        0.0,
        &mut used,
        &mut best,
    );
    best
}

#[allow(clippy::too_many_arguments)]
fn descend(
    problem: &WarmProblem,
    choices: &[Vec<(usize, Resources, f64)>],
    budget: Option<Resources>,
    depth: usize,
    total: Resources,
    value: f64,
    used: &mut [Resources],
    best: &mut Option<f64>,
) {
    if depth == choices.len() {
        if best.map_or(true, |b| value > b) {
            *best = Some(value);
        }
        return;
    }
    for &(server_pos, demand, gain) in &choices[depth] {
        let after = used[server_pos].checked_add(&demand);
        if !after.fits_in(&problem.servers[server_pos].free) {
            continue;
        }
        let grown = total.checked_add(&demand);
        if let Some(b) = budget {
            if !grown.fits_in(&b) {
                continue;
            }
        }
        let saved = used[server_pos];
        used[server_pos] = after;
        descend(
            problem,
            choices,
            budget,
            depth + 1,
            grown,
            value + gain,
            used,
            best,
        );
        used[server_pos] = saved;
    }
}
