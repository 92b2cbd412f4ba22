//! Heartbeat-based failure detection.
//!
//! Every server pushes a keep-alive on a fixed period T (default 20 ms); the
//! controller scans on a coarser grid (default 100 ms) and declares a server
//! failed when the gap since its last heartbeat exceeds 2·T — two missed
//! beats. Declarations are sticky until an explicit restore, so a late
//! heartbeat from a half-dead server cannot flap the state.

use std::collections::{BTreeMap, BTreeSet};

use crate::cluster::{ClusterState, ServerIx, SiteIx};
use crate::error::{Error, Result};

/// Heartbeat bookkeeping state. Times are virtual microseconds.
#[derive(Debug, Clone)]
pub struct Detector {
    pub period_us: u64,
    pub check_interval_us: u64,
    last_seen: BTreeMap<ServerIx, u64>,
    declared_failed: BTreeSet<ServerIx>,
}

impl Detector {
    /// Track `servers`, all considered alive as of time zero.
    pub fn new(
        period_us: u64,
        check_interval_us: u64,
        servers: impl IntoIterator<Item = ServerIx>,
    ) -> Detector {
        Detector {
            period_us,
            check_interval_us,
            last_seen: servers.into_iter().map(|s| (s, 0)).collect(),
            declared_failed: BTreeSet::new(),
        }
    }

    pub fn last_seen(&self, server: ServerIx) -> Option<u64> {
        self.last_seen.get(&server).copied()
    }

    pub fn is_declared_failed(&self, server: ServerIx) -> bool {
        self.declared_failed.contains(&server)
    }

    /// Record a keep-alive from `server` at `now`.
    pub fn record_heartbeat(&mut self, server: ServerIx, now: u64) -> Result<()> {
        match self.last_seen.get_mut(&server) {
            Some(seen) => {
                *seen = (*seen).max(now);
                Ok(())
            }
            None => Err(Error::Protocol(format!(
                "heartbeat from untracked server index {}",
                server.0
            ))),
        }
    }

    /// Controller scan at `now`: declares (and returns) every server whose
    /// heartbeat gap strictly exceeds two periods. Already-declared servers
    /// are not re-reported.
    pub fn check(&mut self, now: u64) -> Vec<ServerIx> {
        let mut newly = Vec::new();
        for (&server, &seen) in &self.last_seen {
            if self.declared_failed.contains(&server) {
                continue;
            }
            if now.saturating_sub(seen) > 2 * self.period_us {
                newly.push(server);
            }
        }
        for &s in &newly {
            self.declared_failed.insert(s);
        }
        newly
    }

    /// Clear the failure declaration after the server came back; its clock
    /// restarts at `now`.
    pub fn restore(&mut self, server: ServerIx, now: u64) {
        self.declared_failed.remove(&server);
        if let Some(seen) = self.last_seen.get_mut(&server) {
            *seen = now;
        }
    }

    /// A site has failed exactly when every member server is declared failed.
    pub fn site_failed(&self, state: &ClusterState, site: SiteIx) -> bool {
        let members = &state.site(site).members;
        !members.is_empty() && members.iter().all(|s| self.declared_failed.contains(s))
    }
}
