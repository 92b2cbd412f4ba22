//! Parameter sweeps: one axis, a set of policies, `repeats` runs each.
//!
//! A sweep expands into an ordered job list — exactly
//! `|values| · |policies| · repeats` runs (the policy axis carries its
//! policies as values) — and executes it either sequentially or, with the
//! `parallel` feature, across threads. Every job owns an isolated scenario
//! and cluster copy, so results are identical in both modes and the output
//! order always follows the job list.

use crate::baselines::Policy;
use crate::catalog::Catalog;
use crate::cluster::ClusterState;
use crate::engine::{run, RunArtifacts};
use crate::error::{Error, Result};
use crate::scenario::{Injection, Scenario, TargetKind, TargetMode};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// One swept dimension and its values.
#[derive(Debug, Clone)]
pub enum SweepAxis {
    Headroom(Vec<f64>),
    KFraction(Vec<f64>),
    Alpha(Vec<f64>),
    Policy(Vec<Policy>),
    FailedSites(Vec<u32>),
}

impl SweepAxis {
    /// Parse an axis name and its textual values (CLI surface).
    pub fn parse(axis: &str, values: &[String]) -> Result<SweepAxis> {
        if values.is_empty() {
            return Err(Error::Setup(format!("sweep axis {axis:?} has no values")));
        }
        let floats = || -> Result<Vec<f64>> {
            values
                .iter()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::Setup(format!("bad {axis} value {v:?}")))
                })
                .collect()
        };
        match axis {
            "headroom" => Ok(SweepAxis::Headroom(floats()?)),
            "k_fraction" => Ok(SweepAxis::KFraction(floats()?)),
            "alpha" => Ok(SweepAxis::Alpha(floats()?)),
            "policy" => Ok(SweepAxis::Policy(
                values
                    .iter()
                    .map(|v| Policy::parse(v))
                    .collect::<Result<Vec<_>>>()?,
            )),
            "failed_sites" => Ok(SweepAxis::FailedSites(
                values
                    .iter()
                    .map(|v| {
                        v.parse::<u32>()
                            .map_err(|_| Error::Setup(format!("bad failed_sites value {v:?}")))
                    })
                    .collect::<Result<Vec<_>>>()?,
            )),
            other => Err(Error::Setup(format!(
                "unknown sweep axis {other:?} (expected headroom, k_fraction, alpha, \
                 policy, or failed_sites)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Headroom(_) => "headroom",
            SweepAxis::KFraction(_) => "k_fraction",
            SweepAxis::Alpha(_) => "alpha",
            SweepAxis::Policy(_) => "policy",
            SweepAxis::FailedSites(_) => "failed_sites",
        }
    }
}

/// One run of a sweep: a fully configured scenario plus its grid position.
#[derive(Debug, Clone)]
pub struct SweepJob {
    pub axis: String,
    pub value: String,
    pub policy: Policy,
    pub repeat: u32,
    pub scenario: Scenario,
}

fn apply_value(scenario: &mut Scenario, axis: &SweepAxis, pos: usize) -> String {
    match axis {
        SweepAxis::Headroom(v) => {
            scenario.params.headroom = v[pos];
            format!("{}", v[pos])
        }
        SweepAxis::KFraction(v) => {
            scenario.params.k_fraction = v[pos];
            format!("{}", v[pos])
        }
        SweepAxis::Alpha(v) => {
            scenario.params.alpha = v[pos];
            format!("{}", v[pos])
        }
        SweepAxis::Policy(v) => {
            scenario.policy = v[pos];
            v[pos].name().to_string()
        }
        SweepAxis::FailedSites(v) => {
            // Replace the scenario's injections with one rotating multi-site
            // failure; the rotation offset advances with the repeat index.
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
                count: v[pos],
            }];
            format!("{}", v[pos])
        }
    }
}

/// Expand a sweep into its ordered job list. For non-policy axes each value
/// is crossed with `policies`; the policy axis ignores `policies` and uses
/// its own values. Repeats come from the base scenario.
pub fn expand(base: &Scenario, axis: &SweepAxis, policies: &[Policy]) -> Result<Vec<SweepJob>> {
    let n_values = match axis {
        SweepAxis::Headroom(v) | SweepAxis::KFraction(v) | SweepAxis::Alpha(v) => v.len(),
        SweepAxis::Policy(v) => v.len(),
        SweepAxis::FailedSites(v) => v.len(),
    };
    if n_values == 0 {
        return Err(Error::Setup("sweep has no values".into()));
    }
    let cross: Vec<Option<Policy>> = match axis {
        SweepAxis::Policy(_) => vec![None],
        _ if policies.is_empty() => vec![Some(base.policy)],
        _ => policies.iter().copied().map(Some).collect(),
    };
    let mut jobs = Vec::with_capacity(n_values * cross.len() * base.repeats as usize);
    for pos in 0..n_values {
        for &policy in &cross {
            for repeat in 0..base.repeats {
                let mut scenario = base.clone();
                if let Some(p) = policy {
                    scenario.policy = p;
                }
                let value = apply_value(&mut scenario, axis, pos);
                jobs.push(SweepJob {
                    axis: axis.name().to_string(),
                    value,
                    policy: scenario.policy,
                    repeat,
                    scenario,
                });
            }
        }
    }
    Ok(jobs)
}

/// Execute a job list. With `parallel` (and the `parallel` feature compiled
/// in) jobs run across threads; output order matches `jobs` either way.
pub fn run_batch(
    catalog: &Catalog,
    state: &ClusterState,
    jobs: &[SweepJob],
    parallel: bool,
) -> Result<Vec<RunArtifacts>> {
    #[cfg(feature = "parallel")]
    {
        if parallel {
            return jobs
                .par_iter()
                .map(|job| run(catalog, state, &job.scenario, job.repeat))
                .collect();
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = parallel;
    jobs.iter()
        .map(|job| run(catalog, state, &job.scenario, job.repeat))
        .collect()
}
