//! Cluster state: servers, sites, applications, and capacity accounting.
//!
//! Capacity is tracked in integer units (KiB of memory, 1/1000ths of an
//! accelerator) so that charge/credit sequences conserve exactly and runs
//! replay bit-for-bit. Every replica on a server carries the resources it
//! was charged; the sum of those charges always equals the server's `used`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::{mib_to_kib, Catalog, ComputeMillis, FamilyIx, MemKib, VariantIx};
use crate::error::{Error, Result};

/// Index into [`ClusterState::servers`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ServerIx(pub usize);

/// Index into [`ClusterState::apps`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AppIx(pub usize);

/// Index into [`ClusterState::sites`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SiteIx(pub usize);

/// A two-resource bundle: accelerator memory and accelerator compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Resources {
    pub mem_kib: MemKib,
    pub compute_millis: ComputeMillis,
}

impl Resources {
    pub fn new(mem_kib: MemKib, compute_millis: ComputeMillis) -> Self {
        Resources {
            mem_kib,
            compute_millis,
        }
    }

    pub fn fits_in(&self, other: &Resources) -> bool {
        self.mem_kib <= other.mem_kib && self.compute_millis <= other.compute_millis
    }

    pub fn checked_add(&self, other: &Resources) -> Resources {
        Resources {
            mem_kib: self
                .mem_kib
                .checked_add(other.mem_kib)
                .expect("resource overflow"),
            compute_millis: self
                .compute_millis
                .checked_add(other.compute_millis)
                .expect("resource overflow"),
        }
    }

    pub fn checked_sub(&self, other: &Resources) -> Resources {
        Resources {
            mem_kib: self
                .mem_kib
                .checked_sub(other.mem_kib)
                .expect("resource underflow"),
            compute_millis: self
                .compute_millis
                .checked_sub(other.compute_millis)
                .expect("resource underflow"),
        }
    }
}

/// Why a replica occupies a server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Tier {
    /// The application's primary serving replica.
    Primary,
    /// Pre-placed standby from the proactive plan.
    Warm,
    /// Loaded reactively after a failure.
    Emergency,
}

/// One replica resident on a server, with the resources it was charged.
/// During a progressive upgrade the charge covers both co-resident variants.
#[derive(Debug, Clone)]
pub struct Replica {
    pub variant: VariantIx,
    pub tier: Tier,
    pub charged: Resources,
}

#[derive(Debug, Clone)]
pub struct Server {
    pub server_id: String,
    pub site: SiteIx,
    pub class: String,
    pub capacity: Resources,
    /// Sum of all replica charges currently on this server.
    pub used: Resources,
    /// Memory withheld from backup placement by the headroom knob.
    pub reserved_mem_kib: MemKib,
    /// At most one replica per application per server.
    pub loaded: BTreeMap<AppIx, Replica>,
    pub alive: bool,
}

impl Server {
    /// Capacity still available for new replicas.
    pub fn free(&self) -> Resources {
        Resources {
            mem_kib: self.capacity.mem_kib - self.used.mem_kib - self.reserved_mem_kib,
            compute_millis: self.capacity.compute_millis - self.used.compute_millis,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Site {
    pub site_id: String,
    pub members: Vec<ServerIx>,
    pub net_latency_ms: f64,
}

#[derive(Debug, Clone)]
pub struct Application {
    pub app_id: String,
    pub family: FamilyIx,
    pub primary_variant: VariantIx,
    pub primary_server: ServerIx,
    pub critical: bool,
    /// Request rate, the weight of this app in placement objectives.
    pub rate: f64,
    pub slo_ms: f64,
}

#[derive(Debug, Clone)]
pub struct ClusterState {
    pub servers: Vec<Server>,
    pub sites: Vec<Site>,
    pub apps: Vec<Application>,
    server_ids: BTreeMap<String, ServerIx>,
    app_ids: BTreeMap<String, AppIx>,
}

impl ClusterState {
    pub fn server(&self, ix: ServerIx) -> &Server {
        &self.servers[ix.0]
    }

    pub fn app(&self, ix: AppIx) -> &Application {
        &self.apps[ix.0]
    }

    pub fn site(&self, ix: SiteIx) -> &Site {
        &self.sites[ix.0]
    }

    pub fn server_by_id(&self, id: &str) -> Option<ServerIx> {
        self.server_ids.get(id).copied()
    }

    pub fn app_by_id(&self, id: &str) -> Option<AppIx> {
        self.app_ids.get(id).copied()
    }

    pub fn server_ixs(&self) -> impl Iterator<Item = ServerIx> {
        (0..self.servers.len()).map(ServerIx)
    }

    pub fn app_ixs(&self) -> impl Iterator<Item = AppIx> {
        (0..self.apps.len()).map(AppIx)
    }

    /// Latency a client of `app` would see from a replica of `variant` on
    /// `server`: the variant's service latency for the server class plus the
    /// site's network latency. `None` when the class is not profiled.
    pub fn replica_latency_ms(
        &self,
        catalog: &Catalog,
        variant: VariantIx,
        server: ServerIx,
    ) -> Option<f64> {
        let srv = self.server(server);
        catalog.observed_latency_ms(variant, &srv.class, self.site(srv.site).net_latency_ms)
    }

    /// Place a replica on a server, charging `charged` against capacity.
    pub fn insert_replica(&mut self, server: ServerIx, app: AppIx, replica: Replica) -> Result<()> {
        let srv = &mut self.servers[server.0];
        if !replica.charged.fits_in(&srv.free()) {
            return Err(Error::Setup(format!(
                "replica of app '{}' does not fit on server '{}'",
                self.apps[app.0].app_id, srv.server_id
            )));
        }
        if srv.loaded.contains_key(&app) {
            return Err(Error::Setup(format!(
                "app '{}' already has a replica on server '{}'",
                self.apps[app.0].app_id, srv.server_id
            )));
        }
        srv.used = srv.used.checked_add(&replica.charged);
        srv.loaded.insert(app, replica);
        Ok(())
    }

    /// Remove an app's replica from a server, crediting its charge back.
    pub fn remove_replica(&mut self, server: ServerIx, app: AppIx) -> Option<Replica> {
        let srv = &mut self.servers[server.0];
        let replica = srv.loaded.remove(&app)?;
        srv.used = srv.used.checked_sub(&replica.charged);
        Some(replica)
    }

    /// Swap an existing replica's variant/charge in place (upgrade step).
    pub fn replace_replica(&mut self, server: ServerIx, app: AppIx, replica: Replica) {
        let srv = &mut self.servers[server.0];
        let old = srv.loaded.insert(app, replica);
        let old = old.expect("replace_replica requires an existing replica");
        srv.used = srv.used.checked_sub(&old.charged);
        let charged = srv.loaded[&app].charged;
        srv.used = srv.used.checked_add(&charged);
    }

    /// Mark a server failed. Its replicas stay recorded (they are lost, not
    /// migrated) but the server no longer participates in placement.
    pub fn fail_server(&mut self, server: ServerIx) {
        self.servers[server.0].alive = false;
    }

    /// Bring a failed server back: backups placed on it are dropped and only
    /// its primary replicas remain (to be reloaded by the caller).
    /// Returns the apps whose primaries live here.
    pub fn restore_server(&mut self, server: ServerIx) -> Vec<AppIx> {
        let srv = &mut self.servers[server.0];
        srv.alive = true;
        let primaries: Vec<AppIx> = srv
            .loaded
            .iter()
            .filter(|(_, r)| r.tier == Tier::Primary)
            .map(|(&a, _)| a)
            .collect();
        srv.loaded.retain(|_, r| r.tier == Tier::Primary);
        srv.used = srv
            .loaded
            .values()
            .fold(Resources::default(), |acc, r| acc.checked_add(&r.charged));
        primaries
    }

    pub fn site_alive(&self, site: SiteIx) -> bool {
        self.sites[site.0]
            .members
            .iter()
            .any(|&s| self.servers[s.0].alive)
    }

    /// Aggregate (memory, compute) utilization over all servers, in percent.
    pub fn utilization_pct(&self) -> (f64, f64) {
        let (mut used, mut cap) = (Resources::default(), Resources::default());
        for s in &self.servers {
            used = used.checked_add(&s.used);
            cap = cap.checked_add(&s.capacity);
        }
        (
            100.0 * used.mem_kib as f64 / cap.mem_kib as f64,
            100.0 * used.compute_millis as f64 / cap.compute_millis as f64,
        )
    }

    /// Verify capacity conservation on every server: the replica charges sum
    /// exactly to `used`, and `used + reserved` never exceeds capacity.
    pub fn audit(&self) -> Result<()> {
        for s in &self.servers {
            let sum = s
                .loaded
                .values()
                .fold(Resources::default(), |acc, r| acc.checked_add(&r.charged));
            if sum != s.used {
                return Err(Error::Protocol(format!(
                    "server '{}': replica charges {:?} != used {:?}",
                    s.server_id, sum, s.used
                )));
            }
            if s.used.mem_kib + s.reserved_mem_kib > s.capacity.mem_kib
                || s.used.compute_millis > s.capacity.compute_millis
            {
                return Err(Error::Protocol(format!(
                    "server '{}': capacity overrun",
                    s.server_id
                )));
            }
        }
        Ok(())
    }
}

// ── placement and capacity knobs ────────────────────────────────────────────

/// Pick the worst-fit server for a memory demand: maximum free memory, ties
/// broken by larger free fraction, then by server id. Only servers passing
/// `feasible` are considered.
pub fn worst_fit_server<F>(state: &ClusterState, feasible: F) -> Option<ServerIx>
where
    F: Fn(ServerIx, &Server) -> bool,
{
    let mut best: Option<(MemKib, f64, ServerIx)> = None;
    for ix in state.server_ixs() {
        let srv = state.server(ix);
        if !srv.alive || !feasible(ix, srv) {
            continue;
        }
        let free = srv.free().mem_kib;
        let frac = free as f64 / srv.capacity.mem_kib as f64;
        let better = match best {
            None => true,
            Some((bf, bfrac, bix)) => {
                free > bf
                    || (free == bf && frac > bfrac)
                    || (free == bf
                        && frac == bfrac
                        && state.server(ix).server_id < state.server(bix).server_id)
            }
        };
        if better {
            best = Some((free, frac, ix));
        }
    }
    best.map(|(_, _, ix)| ix)
}

/// Place every unpinned primary via worst-fit, in the order given. When
/// `target_util` is set, the resulting aggregate memory utilization must land
/// within ±5 points of it.
pub fn place_primaries(
    state: &mut ClusterState,
    catalog: &Catalog,
    order: &[(AppIx, bool)], // (app, pinned)
    target_util: Option<f64>,
) -> Result<()> {
    for &(app_ix, pinned) in order {
        let (variant_ix, demand, pinned_server) = {
            let app = &state.apps[app_ix.0];
            let v = catalog.variant(app.primary_variant);
            (
                app.primary_variant,
                Resources::new(v.mem_kib, v.compute_millis),
                app.primary_server,
            )
        };
        let server = if pinned {
            pinned_server
        } else {
            let chosen =
                worst_fit_server(state, |_, srv| demand.fits_in(&srv.free())).ok_or_else(|| {
                    Error::Setup(format!(
                        "no server fits primary of app '{}'",
                        state.apps[app_ix.0].app_id
                    ))
                })?;
            state.apps[app_ix.0].primary_server = chosen;
            chosen
        };
        let replica = Replica {
            variant: variant_ix,
            tier: Tier::Primary,
            charged: demand,
        };
        state.insert_replica(server, app_ix, replica).map_err(|_| {
            Error::Setup(format!(
                "primary of app '{}' does not fit on server '{}'",
                state.apps[app_ix.0].app_id,
                state.server(server).server_id
            ))
        })?;
    }
    if let Some(target) = target_util {
        let (mem_util, _) = state.utilization_pct();
        if (mem_util - target * 100.0).abs() > 5.0 {
            return Err(Error::Setup(format!(
                "primary placement landed at {mem_util:.1}% memory utilization, \
                 outside ±5 points of the {target:.0}% target",
                target = target * 100.0
            )));
        }
    }
    Ok(())
}

/// Scale per-server free memory so the aggregate free memory equals
/// `headroom` of aggregate memory capacity. Placements are untouched; the
/// withheld memory is recorded as a per-server reservation.
pub fn apply_headroom(state: &mut ClusterState, headroom: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&headroom) {
        return Err(Error::Setup(format!("headroom {headroom} outside [0, 1]")));
    }
    let total_cap: MemKib = state.servers.iter().map(|s| s.capacity.mem_kib).sum();
    let total_free: MemKib = state
        .servers
        .iter()
        .map(|s| s.capacity.mem_kib - s.used.mem_kib)
        .sum();
    let target = headroom * total_cap as f64;
    if target > total_free as f64 {
        return Err(Error::Setup(format!(
            "headroom {:.0}% exceeds the {:.1}% of memory left after primaries",
            headroom * 100.0,
            100.0 * total_free as f64 / total_cap as f64
        )));
    }
    let factor = if total_free == 0 {
        0.0
    } else {
        target / total_free as f64
    };
    for s in &mut state.servers {
        let free = s.capacity.mem_kib - s.used.mem_kib;
        let kept = (free as f64 * factor).round() as MemKib;
        s.reserved_mem_kib = free - kept.min(free);
    }
    Ok(())
}

/// Global warm-backup budget: `(1 - alpha)` of the free capacity summed over
/// alive servers, per resource. The held-back `alpha` share stays available
/// for reactive (cold) loads only.
pub fn usable_capacity(state: &ClusterState, alpha: f64) -> Result<Resources> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Setup(format!("alpha {alpha} outside [0, 1]")));
    }
    let mut free = Resources::default();
    for s in state.servers.iter().filter(|s| s.alive) {
        free = free.checked_add(&s.free());
    }
    Ok(Resources {
        mem_kib: ((1.0 - alpha) * free.mem_kib as f64).floor() as MemKib,
        compute_millis: ((1.0 - alpha) * free.compute_millis as f64).floor() as ComputeMillis,
    })
}

// ── file schema ─────────────────────────────────────────────────────────────

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClusterFile {
    schema_version: u32,
    servers: Vec<ServerSpec>,
    #[serde(default)]
    sites: Vec<SiteSpec>,
    #[serde(default)]
    apps: Vec<AppSpec>,
    placement: Option<PlacementSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServerSpec {
    server_id: String,
    site_id: String,
    mem_gib: f64,
    compute: f64,
    #[serde(default = "default_class")]
    class: String,
}

fn default_class() -> String {
    "default".to_string()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteSpec {
    site_id: String,
    #[serde(default)]
    net_latency_ms: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AppSpec {
    app_id: String,
    family_id: String,
    /// A variant id, or "largest" for the family's full-size variant.
    #[serde(default = "default_largest")]
    primary_variant: String,
    /// A server id, or "auto" to let worst-fit placement decide.
    #[serde(default = "default_auto")]
    primary_server: String,
    #[serde(default)]
    critical: bool,
    #[serde(default = "default_rate")]
    rate: f64,
    slo_ms: f64,
}

fn default_largest() -> String {
    "largest".to_string()
}

fn default_auto() -> String {
    "auto".to_string()
}

fn default_rate() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlacementSpec {
    target_util: f64,
}

impl ClusterState {
    pub fn from_file(catalog: &Catalog, path: &Path) -> Result<ClusterState> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::schema(path.display().to_string(), e.to_string()))?;
        ClusterState::from_toml(catalog, &text, &path.display().to_string())
    }

    /// Parse a cluster document and place primaries. Apps pinned to explicit
    /// servers are charged first; "auto" apps are worst-fit placed in file
    /// order.
    pub fn from_toml(catalog: &Catalog, text: &str, origin: &str) -> Result<ClusterState> {
        let file: ClusterFile =
            toml::from_str(text).map_err(|e| Error::schema(origin, e.to_string()))?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(Error::schema(
                origin,
                format!(
                    "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                    file.schema_version
                ),
            ));
        }
        if file.servers.is_empty() {
            return Err(Error::schema(origin, "cluster has no servers"));
        }

        let mut sites: Vec<Site> = Vec::new();
        let mut site_ids: BTreeMap<String, SiteIx> = BTreeMap::new();
        for spec in &file.sites {
            if site_ids.contains_key(&spec.site_id) {
                return Err(Error::schema(
                    origin,
                    format!("duplicate site '{}'", spec.site_id),
                ));
            }
            site_ids.insert(spec.site_id.clone(), SiteIx(sites.len()));
            sites.push(Site {
                site_id: spec.site_id.clone(),
                members: Vec::new(),
                net_latency_ms: spec.net_latency_ms,
            });
        }

        let mut servers: Vec<Server> = Vec::new();
        let mut server_ids: BTreeMap<String, ServerIx> = BTreeMap::new();
        for spec in file.servers {
            let site = *site_ids.entry(spec.site_id.clone()).or_insert_with(|| {
                sites.push(Site {
                    site_id: spec.site_id.clone(),
                    members: Vec::new(),
                    net_latency_ms: 0.0,
                });
                SiteIx(sites.len() - 1)
            });
            let ix = ServerIx(servers.len());
            if server_ids.insert(spec.server_id.clone(), ix).is_some() {
                return Err(Error::schema(
                    origin,
                    format!("duplicate server '{}'", spec.server_id),
                ));
            }
            if spec.mem_gib <= 0.0 || spec.compute <= 0.0 {
                return Err(Error::schema(
                    origin,
                    format!("server '{}': non-positive capacity", spec.server_id),
                ));
            }
            sites[site.0].members.push(ix);
            servers.push(Server {
                server_id: spec.server_id,
                site,
                class: spec.class,
                capacity: Resources::new(
                    mib_to_kib(spec.mem_gib * 1024.0),
                    (spec.compute * 1000.0).round() as ComputeMillis,
                ),
                used: Resources::default(),
                reserved_mem_kib: 0,
                loaded: BTreeMap::new(),
                alive: true,
            });
        }
        for site in &sites {
            if site.members.is_empty() {
                return Err(Error::schema(
                    origin,
                    format!("site '{}' has no servers", site.site_id),
                ));
            }
        }

        let mut apps: Vec<Application> = Vec::new();
        let mut app_ids: BTreeMap<String, AppIx> = BTreeMap::new();
        let mut order: Vec<(AppIx, bool)> = Vec::new();
        for spec in file.apps {
            let family = catalog.family_by_id(&spec.family_id).ok_or_else(|| {
                Error::Setup(format!(
                    "app '{}' references unknown family '{}'",
                    spec.app_id, spec.family_id
                ))
            })?;
            let primary_variant = if spec.primary_variant == "largest" {
                catalog.largest(family)
            } else {
                let v = catalog
                    .variant_by_id(&spec.primary_variant)
                    .ok_or_else(|| {
                        Error::Setup(format!(
                            "app '{}' references unknown variant '{}'",
                            spec.app_id, spec.primary_variant
                        ))
                    })?;
                if catalog.variant(v).family != family {
                    return Err(Error::Setup(format!(
                        "app '{}': variant '{}' is not in family '{}'",
                        spec.app_id, spec.primary_variant, spec.family_id
                    )));
                }
                v
            };
            let (server, pinned) = if spec.primary_server == "auto" {
                (ServerIx(0), false) // placeholder until worst-fit picks one
            } else {
                let s = server_ids
                    .get(&spec.primary_server)
                    .copied()
                    .ok_or_else(|| {
                        Error::Setup(format!(
                            "app '{}' references unknown server '{}'",
                            spec.app_id, spec.primary_server
                        ))
                    })?;
                (s, true)
            };
            if spec.rate <= 0.0 {
                return Err(Error::Setup(format!(
                    "app '{}': non-positive rate",
                    spec.app_id
                )));
            }
            if spec.slo_ms <= 0.0 {
                return Err(Error::Setup(format!(
                    "app '{}': non-positive slo_ms",
                    spec.app_id
                )));
            }
            let ix = AppIx(apps.len());
            if app_ids.insert(spec.app_id.clone(), ix).is_some() {
                return Err(Error::schema(
                    origin,
                    format!("duplicate app '{}'", spec.app_id),
                ));
            }
            apps.push(Application {
                app_id: spec.app_id,
                family,
                primary_variant,
                primary_server: server,
                critical: spec.critical,
                rate: spec.rate,
                slo_ms: spec.slo_ms,
            });
            order.push((ix, pinned));
        }

        let mut state = ClusterState {
            servers,
            sites,
            apps,
            server_ids,
            app_ids,
        };
        // Pinned apps are charged before worst-fit sees the cluster.
        let mut seq: Vec<(AppIx, bool)> = order
            .iter()
            .copied()
            .filter(|&(_, pinned)| pinned)
            .collect();
        seq.extend(order.iter().copied().filter(|&(_, pinned)| !pinned));
        place_primaries(
            &mut state,
            catalog,
            &seq,
            file.placement.map(|p| p.target_util),
        )?;
        Ok(state)
    }
}
