//! Evaluation metrics over failover timelines.
//!
//! Three headline numbers per run: recovery rate (share of failure-affected
//! apps that got a serving replica), mean time to recovery over the
//! recovered ones, and mean accuracy reduction over the recovered ones.
//! Unrecovered apps carry no MTTR and contribute no accuracy term — they are
//! captured entirely by the recovery rate.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::baselines::Policy;
use crate::catalog::Catalog;
use crate::cluster::{AppIx, ClusterState};
use crate::engine::FailoverTimeline;
use crate::error::{Error, Result};

/// One row per failover instance (an app can fail more than once).
#[derive(Debug, Clone, Serialize)]
pub struct PerAppRow {
    pub app_id: String,
    pub critical: bool,
    pub recovered: bool,
    pub mttr_ms: Option<f64>,
    pub acc_primary: f64,
    pub acc_backup: Option<f64>,
    pub final_variant: Option<String>,
    pub warm_path: bool,
}

/// Metrics of one simulation run.
#[derive(Debug, Clone, Serialize)]
pub struct RunMetrics {
    pub policy: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub repeat: u32,
    pub affected: usize,
    pub recovered: usize,
    /// None (and `flagged_no_affected`) when the run saw no failures.
    pub recovery_rate_pct: Option<f64>,
    /// Mean over recovered instances only.
    pub mean_mttr_ms: Option<f64>,
    /// Mean of (1 − acc_backup/acc_primary)·100 over recovered instances.
    pub acc_reduction_pct: Option<f64>,
    pub flagged_no_affected: bool,
    pub per_app: Vec<PerAppRow>,
}

/// Reduce a run's timelines to metrics.
#[allow(clippy::too_many_arguments)]
pub fn compute(
    catalog: &Catalog,
    state: &ClusterState,
    k: &BTreeSet<AppIx>,
    timelines: &[FailoverTimeline],
    policy: Policy,
    scenario_hash: &str,
    seed: u64,
    repeat: u32,
) -> RunMetrics {
    let mut per_app = Vec::with_capacity(timelines.len());
    let mut mttr_sum = 0.0;
    let mut reduction_sum = 0.0;
    let mut recovered = 0usize;
    for tl in timelines {
        let app = state.app(tl.app);
        let acc_primary = catalog.variant(app.primary_variant).norm_accuracy;
        let acc_backup = tl.final_variant.map(|v| catalog.variant(v).norm_accuracy);
        let mttr_ms = tl.mttr_us().map(|us| us as f64 / 1000.0);
        if let (Some(mttr), Some(backup)) = (mttr_ms, acc_backup) {
            recovered += 1;
            mttr_sum += mttr;
            reduction_sum += (1.0 - backup / acc_primary) * 100.0;
        }
        per_app.push(PerAppRow {
            app_id: app.app_id.clone(),
            critical: k.contains(&tl.app),
            recovered: tl.recovered(),
            mttr_ms,
            acc_primary,
            acc_backup,
            final_variant: tl
                .final_variant
                .map(|v| catalog.variant(v).variant_id.clone()),
            warm_path: tl.warm_path,
        });
    }
    let affected = timelines.len();
    RunMetrics {
        policy: policy.name().to_string(),
        scenario_hash: scenario_hash.to_string(),
        seed,
        repeat,
        affected,
        recovered,
        recovery_rate_pct: (affected > 0).then(|| recovered as f64 / affected as f64 * 100.0),
        mean_mttr_ms: (recovered > 0).then(|| mttr_sum / recovered as f64),
        acc_reduction_pct: (recovered > 0).then(|| reduction_sum / recovered as f64),
        flagged_no_affected: affected == 0,
        per_app,
    }
}

/// Mean and extrema of one metric across runs.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Extrema {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

fn extrema(values: impl Iterator<Item = f64>) -> Option<Extrema> {
    let values: Vec<f64> = values.collect();
    if values.is_empty() {
        return None;
    }
    let sum: f64 = values.iter().sum();
    Some(Extrema {
        mean: sum / values.len() as f64,
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Cross-run summary for one policy.
#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub policy: String,
    pub runs: usize,
    pub flagged_runs: usize,
    pub recovery_rate_pct: Option<Extrema>,
    pub mean_mttr_ms: Option<Extrema>,
    pub acc_reduction_pct: Option<Extrema>,
}

/// Aggregate runs into per-policy summaries. With `group_by_policy` off,
/// all runs must share one policy — mixing without grouping is an error.
pub fn aggregate(runs: &[RunMetrics], group_by_policy: bool) -> Result<Vec<Aggregate>> {
    if runs.is_empty() {
        return Err(Error::Setup("no runs to aggregate".into()));
    }
    let mut policies: Vec<&str> = runs.iter().map(|r| r.policy.as_str()).collect();
    policies.sort_unstable();
    policies.dedup();
    if !group_by_policy && policies.len() > 1 {
        return Err(Error::Setup(format!(
            "runs mix policies {policies:?}; aggregate per policy or enable grouping"
        )));
    }
    Ok(policies
        .into_iter()
        .map(|policy| {
            let group: Vec<&RunMetrics> = runs.iter().filter(|r| r.policy == policy).collect();
            Aggregate {
                policy: policy.to_string(),
                runs: group.len(),
                flagged_runs: group.iter().filter(|r| r.flagged_no_affected).count(),
                recovery_rate_pct: extrema(group.iter().filter_map(|r| r.recovery_rate_pct)),
                mean_mttr_ms: extrema(group.iter().filter_map(|r| r.mean_mttr_ms)),
                acc_reduction_pct: extrema(group.iter().filter_map(|r| r.acc_reduction_pct)),
            }
        })
        .collect())
}
