//! Scenario files: a TOML description of one experiment — which catalog and
//! cluster to load, which policy to run, what to break and when.
//!
//! Paths inside a scenario are resolved relative to the scenario file, so a
//! scenario directory can be moved or committed wholesale. The scenario hash
//! covers the raw bytes of all three files (scenario, catalog, cluster);
//! artifacts carry it so results can be traced back to exact inputs.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::baselines::Policy;
use crate::catalog::Catalog;
use crate::cluster::{AppIx, ClusterState, ServerIx};
use crate::error::{Error, Result};

// ── file schema ──────────────────────────────────────────────────────────

fn default_repeats() -> u32 {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    schema_version: u32,
    name: String,
    catalog: String,
    cluster: String,
    policy: String,
    horizon_ms: u64,
    seed: u64,
    #[serde(default = "default_repeats")]
    repeats: u32,
    #[serde(default)]
    params: ParamsFile,
    #[serde(default)]
    injections: Vec<InjectionFile>,
    #[serde(default)]
    restores: Vec<RestoreFile>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    k_fraction: Option<f64>,
    alpha: Option<f64>,
    headroom: Option<f64>,
    replicas_per_app: Option<u32>,
    site_independence: Option<bool>,
    progressive_loading: Option<bool>,
    partial_k: Option<bool>,
    solver_budget_tuples: Option<u64>,
    fetch_ms: Option<u64>,
    notify_ms: Option<u64>,
    heartbeat_period_ms: Option<u64>,
    check_interval_ms: Option<u64>,
    heartbeat_jitter_ms: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InjectionFile {
    at_ms: u64,
    kind: String,
    #[serde(default = "default_mode")]
    mode: String,
    #[serde(default)]
    targets: Vec<String>,
    #[serde(default)]
    count: Option<u32>,
}

fn default_mode() -> String {
    "explicit".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RestoreFile {
    at_ms: u64,
    kind: String,
    targets: Vec<String>,
}

// ── resolved model ───────────────────────────────────────────────────────

/// Tunables with their defaults. Every knob the planner, detector or engine
/// reads comes through here so a scenario file states only what it changes.
#[derive(Debug, Clone)]
pub struct Params {
    /// Fraction of apps protected with warm standbys (criticals always in).
    pub k_fraction: f64,
    /// Share of free capacity held back from warm placement for emergencies.
    pub alpha: f64,
    /// Per-server memory fraction kept free of primaries at setup.
    pub headroom: f64,
    pub replicas_per_app: u32,
    pub site_independence: bool,
    pub progressive_loading: bool,
    pub partial_k: bool,
    pub solver_budget_tuples: u64,
    /// Model fetch cost charged before each load (0 = image already local).
    pub fetch_ms: u64,
    /// Client notification cost after a traffic switch.
    pub notify_ms: u64,
    pub heartbeat_period_ms: u64,
    pub check_interval_ms: u64,
    /// Uniform per-heartbeat jitter in [0, jitter] ms.
    pub heartbeat_jitter_ms: u64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            k_fraction: 0.5,
            alpha: 0.1,
            headroom: 0.2,
            replicas_per_app: 1,
            site_independence: false,
            progressive_loading: true,
            partial_k: false,
            solver_budget_tuples: 1_000_000,
            fetch_ms: 0,
            notify_ms: 10,
            heartbeat_period_ms: 20,
            check_interval_ms: 100,
            heartbeat_jitter_ms: 0,
        }
    }
}

/// What to fail: one server or a whole site (all its member servers).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetKind {
    Server,
    Site,
}

/// How injection targets are chosen per repeat.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetMode {
    /// The listed ids, every repeat.
    Explicit,
    /// `count` targets starting at an offset that advances with the repeat
    /// index, wrapping around the id-sorted pool.
    Rotate,
    /// `count` targets drawn from the run's seeded RNG.
    Random,
}

#[derive(Debug, Clone)]
pub struct Injection {
    pub at_ms: u64,
    pub kind: TargetKind,
    pub mode: TargetMode,
    pub targets: Vec<String>,
    pub count: u32,
}

#[derive(Debug, Clone)]
pub struct Restore {
    pub at_ms: u64,
    pub kind: TargetKind,
    pub targets: Vec<String>,
}

/// A fully loaded scenario: inputs parsed, paths resolved, hash computed.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub catalog_path: PathBuf,
    pub cluster_path: PathBuf,
    pub policy: Policy,
    pub horizon_ms: u64,
    pub seed: u64,
    pub repeats: u32,
    pub params: Params,
    pub injections: Vec<Injection>,
    pub restores: Vec<Restore>,
    /// SHA-256 over the raw bytes of scenario, catalog and cluster files.
    pub hash: String,
}

fn parse_kind(kind: &str, path: &Path) -> Result<TargetKind> {
    match kind {
        "server" => Ok(TargetKind::Server),
        "site" => Ok(TargetKind::Site),
        other => Err(Error::Schema {
            path: path.display().to_string(),
            detail: format!("unknown target kind {other:?} (expected \"server\" or \"site\")"),
        }),
    }
}

impl Scenario {
    /// Load and validate a scenario file, resolving catalog/cluster paths
    /// relative to its directory.
    pub fn load(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Schema {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let file: ScenarioFile = toml::from_str(&text).map_err(|e| Error::Schema {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        if file.schema_version != 1 {
            return Err(Error::Schema {
                path: path.display().to_string(),
                detail: format!("unsupported schema_version {}", file.schema_version),
            });
        }
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let catalog_path = dir.join(&file.catalog);
        let cluster_path = dir.join(&file.cluster);

        let d = Params::default();
        let p = &file.params;
        let params = Params {
            k_fraction: p.k_fraction.unwrap_or(d.k_fraction),
            alpha: p.alpha.unwrap_or(d.alpha),
            headroom: p.headroom.unwrap_or(d.headroom),
            replicas_per_app: p.replicas_per_app.unwrap_or(d.replicas_per_app),
            site_independence: p.site_independence.unwrap_or(d.site_independence),
            progressive_loading: p.progressive_loading.unwrap_or(d.progressive_loading),
            partial_k: p.partial_k.unwrap_or(d.partial_k),
            solver_budget_tuples: p.solver_budget_tuples.unwrap_or(d.solver_budget_tuples),
            fetch_ms: p.fetch_ms.unwrap_or(d.fetch_ms),
            notify_ms: p.notify_ms.unwrap_or(d.notify_ms),
            heartbeat_period_ms: p.heartbeat_period_ms.unwrap_or(d.heartbeat_period_ms),
            check_interval_ms: p.check_interval_ms.unwrap_or(d.check_interval_ms),
            heartbeat_jitter_ms: p.heartbeat_jitter_ms.unwrap_or(d.heartbeat_jitter_ms),
        };
        for (name, v) in [
            ("k_fraction", params.k_fraction),
            ("alpha", params.alpha),
            ("headroom", params.headroom),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Schema {
                    path: path.display().to_string(),
                    detail: format!("{name} = {v} outside [0, 1]"),
                });
            }
        }
        if params.heartbeat_period_ms == 0 || params.check_interval_ms == 0 {
            return Err(Error::Schema {
                path: path.display().to_string(),
                detail: "heartbeat_period_ms and check_interval_ms must be positive".into(),
            });
        }

        let mut injections = Vec::with_capacity(file.injections.len());
        for inj in &file.injections {
            if inj.at_ms > file.horizon_ms {
                return Err(Error::Schema {
                    path: path.display().to_string(),
                    detail: format!(
                        "injection at {} ms lies past the {} ms horizon",
                        inj.at_ms, file.horizon_ms
                    ),
                });
            }
            let mode = match inj.mode.as_str() {
                "explicit" => TargetMode::Explicit,
                "rotate" => TargetMode::Rotate,
                "random" => TargetMode::Random,
                other => {
                    return Err(Error::Schema {
                        path: path.display().to_string(),
                        detail: format!("unknown injection mode {other:?}"),
                    })
                }
            };
            if mode == TargetMode::Explicit && inj.targets.is_empty() {
                return Err(Error::Schema {
                    path: path.display().to_string(),
                    detail: "explicit injection lists no targets".into(),
                });
            }
            if mode != TargetMode::Explicit && inj.count.unwrap_or(0) == 0 {
                return Err(Error::Schema {
                    path: path.display().to_string(),
                    detail: format!("{} injection needs count >= 1", inj.mode),
                });
            }
            injections.push(Injection {
                at_ms: inj.at_ms,
                kind: parse_kind(&inj.kind, path)?,
                mode,
                targets: inj.targets.clone(),
                count: inj.count.unwrap_or(1),
            });
        }
        // Restores may land past the horizon (they then simply never fire).
        let restores = file
            .restores
            .iter()
            .map(|r| {
                Ok(Restore {
                    at_ms: r.at_ms,
                    kind: parse_kind(&r.kind, path)?,
                    targets: r.targets.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut hasher = Sha256::new();
        for p in [path, &catalog_path, &cluster_path] {
            let bytes = std::fs::read(p).map_err(|e| Error::Schema {
                path: p.display().to_string(),
                detail: e.to_string(),
            })?;
            hasher.update(&bytes);
        }
        let hash: String = hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();

        Ok(Scenario {
            name: file.name,
            catalog_path,
            cluster_path,
            policy: Policy::parse(&file.policy)?,
            horizon_ms: file.horizon_ms,
            seed: file.seed,
            repeats: file.repeats,
            params,
            injections,
            restores,
            hash,
        })
    }

    /// Load the catalog and cluster this scenario points at.
    pub fn load_inputs(&self) -> Result<(Catalog, ClusterState)> {
        let catalog = Catalog::from_file(&self.catalog_path)?;
        let state = ClusterState::from_file(&catalog, &self.cluster_path)?;
        Ok((catalog, state))
    }
}

// ── protected-set selection ──────────────────────────────────────────────

/// Pick the protected app set: every critical app, topped up with the
/// highest-rate remaining apps (ties by id) until `round(fraction · n)`.
pub fn select_k(state: &ClusterState, fraction: f64) -> BTreeSet<AppIx> {
    let n = state.apps.len();
    let want = (fraction * n as f64).round() as usize;
    let mut k: BTreeSet<AppIx> = state
        .apps
        .iter()
        .enumerate()
        .filter(|(_, a)| a.critical)
        .map(|(i, _)| AppIx(i))
        .collect();
    let mut rest: Vec<AppIx> = (0..n).map(AppIx).filter(|ix| !k.contains(ix)).collect();
    rest.sort_by(|a, b| {
        let (ra, rb) = (state.app(*a).rate, state.app(*b).rate);
        rb.partial_cmp(&ra)
            .unwrap()
            .then_with(|| state.app(*a).app_id.cmp(&state.app(*b).app_id))
    });
    for ix in rest {
        if k.len() >= want {
            break;
        }
        k.insert(ix);
    }
    k
}

// ── injection target resolution ──────────────────────────────────────────

fn server_target(state: &ClusterState, id: &str) -> Result<ServerIx> {
    state
        .server_by_id(id)
        .ok_or_else(|| Error::Setup(format!("injection names unknown server {id:?}")))
}

fn site_members(state: &ClusterState, site_id: &str) -> Result<Vec<ServerIx>> {
    state
        .sites
        .iter()
        .find(|s| s.site_id == site_id)
        .map(|s| s.members.clone())
        .ok_or_else(|| Error::Setup(format!("injection names unknown site {site_id:?}")))
}

/// Expand one injection into the concrete servers to fail, given the repeat
/// index (for `rotate`) and the run RNG (for `random`). Site injections
/// return every member of each chosen site.
pub fn resolve_targets(
    inj: &Injection,
    state: &ClusterState,
    repeat: u32,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ServerIx>> {
    let chosen_ids: Vec<String> = match inj.mode {
        TargetMode::Explicit => inj.targets.clone(),
        TargetMode::Rotate | TargetMode::Random => {
            let mut pool: Vec<String> = match inj.kind {
                TargetKind::Server => state.servers.iter().map(|s| s.server_id.clone()).collect(),
                TargetKind::Site => state.sites.iter().map(|s| s.site_id.clone()).collect(),
            };
            pool.sort();
            let count = (inj.count as usize).min(pool.len());
            if inj.mode == TargetMode::Rotate {
                let offset = repeat as usize % pool.len();
                (0..count)
                    .map(|i| pool[(offset + i) % pool.len()].clone())
                    .collect()
            } else {
                pool.partial_shuffle(rng, count).0.to_vec()
            }
        }
    };
    let mut servers = Vec::new();
    for id in &chosen_ids {
        match inj.kind {
            TargetKind::Server => servers.push(server_target(state, id)?),
            TargetKind::Site => servers.extend(site_members(state, id)?),
        }
    }
    servers.sort();
    servers.dedup();
    Ok(servers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::derive_seed;
    use rand::SeedableRng;
    use std::io::Write;

    const CATALOG: &str = "schema_version = 1\n[[families]]\nfamily_id = \"f\"\n\
        [[families.variants]]\nvariant_id = \"v\"\nraw_accuracy = 0.8\n\
        mem_demand_mib = 50\ncompute_fraction = 0.0\n";

    const CLUSTER: &str = "schema_version = 1\n\
        [[servers]]\nserver_id = \"s1\"\nsite_id = \"east\"\nmem_gib = 1.0\ncompute = 1.0\n\
        [[servers]]\nserver_id = \"s2\"\nsite_id = \"east\"\nmem_gib = 1.0\ncompute = 1.0\n\
        [[servers]]\nserver_id = \"s3\"\nsite_id = \"west\"\nmem_gib = 1.0\ncompute = 1.0\n\
        [[apps]]\napp_id = \"a\"\nfamily_id = \"f\"\nslo_ms = 100.0\n";

    fn write_dir(scenario: &str) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (name, text) in [
            ("catalog.toml", CATALOG),
            ("cluster.toml", CLUSTER),
            ("run.toml", scenario),
        ] {
            let mut f = std::fs::File::create(dir.path().join(name)).unwrap();
            f.write_all(text.as_bytes()).unwrap();
        }
        dir
    }

    const SCENARIO: &str = "schema_version = 1\nname = \"demo\"\n\
        catalog = \"catalog.toml\"\ncluster = \"cluster.toml\"\n\
        policy = \"two-step\"\nhorizon_ms = 5000\nseed = 7\nrepeats = 3\n\
        [params]\nalpha = 0.2\n\
        [[injections]]\nat_ms = 1000\nkind = \"server\"\ntargets = [\"s1\"]\n\
        [[restores]]\nat_ms = 9000\nkind = \"server\"\ntargets = [\"s1\"]\n";

    #[test]
    fn loads_with_defaults_and_overrides() {
        let dir = write_dir(SCENARIO);
        let sc = Scenario::load(&dir.path().join("run.toml")).unwrap();
        assert_eq!(sc.policy, Policy::TwoStep);
        assert_eq!(sc.params.alpha, 0.2); // overridden
        assert_eq!(sc.params.k_fraction, 0.5); // default
        assert_eq!(sc.params.notify_ms, 10);
        assert_eq!(sc.repeats, 3);
        assert_eq!(sc.hash.len(), 64);
        // Restores may outlive the horizon; this one does.
        assert_eq!(sc.restores[0].at_ms, 9000);
        let (catalog, state) = sc.load_inputs().unwrap();
        assert_eq!(catalog.variants().len(), 1);
        assert_eq!(state.servers.len(), 3);
    }

    #[test]
    fn hash_tracks_all_three_files() {
        let dir = write_dir(SCENARIO);
        let h1 = Scenario::load(&dir.path().join("run.toml")).unwrap().hash;
        // Touch the cluster file only: scenario text is unchanged but the
        // hash must move.
        std::fs::write(
            dir.path().join("cluster.toml"),
            CLUSTER.replace("mem_gib = 1.0", "mem_gib = 2.0"),
        )
        .unwrap();
        let h2 = Scenario::load(&dir.path().join("run.toml")).unwrap().hash;
        assert_ne!(h1, h2);
    }

    #[test]
    fn injection_past_horizon_is_rejected() {
        let bad = SCENARIO.replace("at_ms = 1000", "at_ms = 6000");
        let dir = write_dir(&bad);
        let err = Scenario::load(&dir.path().join("run.toml")).unwrap_err();
        assert!(err.to_string().contains("horizon"), "{err}");
    }

    #[test]
    fn unknown_field_is_rejected() {
        let bad = format!("{SCENARIO}\n[extra]\nx = 1\n");
        let dir = write_dir(&bad);
        assert!(Scenario::load(&dir.path().join("run.toml")).is_err());
    }

    fn mini_state() -> (Catalog, ClusterState) {
        let catalog = Catalog::from_toml(CATALOG, "toy").unwrap();
        let state = ClusterState::from_toml(&catalog, CLUSTER, "toy").unwrap();
        (catalog, state)
    }

    #[test]
    fn explicit_site_injection_expands_to_members() {
        let (_c, state) = mini_state();
        let inj = Injection {
            at_ms: 0,
            kind: TargetKind::Site,
            mode: TargetMode::Explicit,
            targets: vec!["east".into()],
            count: 1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let got = resolve_targets(&inj, &state, 0, &mut rng).unwrap();
        assert_eq!(got, vec![ServerIx(0), ServerIx(1)]);
    }

    #[test]
    fn rotate_walks_the_pool_with_repeat_index() {
        let (_c, state) = mini_state();
        let inj = Injection {
            at_ms: 0,
            kind: TargetKind::Server,
            mode: TargetMode::Rotate,
            targets: vec![],
            count: 1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let picks: Vec<Vec<ServerIx>> = (0..4)
            .map(|r| resolve_targets(&inj, &state, r, &mut rng).unwrap())
            .collect();
        assert_eq!(picks[0], vec![ServerIx(0)]);
        assert_eq!(picks[1], vec![ServerIx(1)]);
        assert_eq!(picks[2], vec![ServerIx(2)]);
        assert_eq!(picks[3], vec![ServerIx(0)]); // wraps
    }

    #[test]
    fn random_mode_is_seed_deterministic() {
        let (_c, state) = mini_state();
        let inj = Injection {
            at_ms: 0,
            kind: TargetKind::Server,
            mode: TargetMode::Random,
            targets: vec![],
            count: 2,
        };
        let pick = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
            resolve_targets(&inj, &state, 0, &mut rng).unwrap()
        };
        assert_eq!(pick(11), pick(11));
        assert_eq!(pick(11).len(), 2);
    }

    #[test]
    fn unknown_target_id_errors() {
        let (_c, state) = mini_state();
        let inj = Injection {
            at_ms: 0,
            kind: TargetKind::Server,
            mode: TargetMode::Explicit,
            targets: vec!["nope".into()],
            count: 1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(resolve_targets(&inj, &state, 0, &mut rng).is_err());
    }

    #[test]
    fn protected_set_tops_up_by_rate() {
        let catalog = Catalog::from_toml(CATALOG, "toy").unwrap();
        let state = ClusterState::from_toml(
            &catalog,
            "schema_version = 1\n\
             [[servers]]\nserver_id = \"s1\"\nsite_id = \"a\"\nmem_gib = 4.0\ncompute = 1.0\n\
             [[apps]]\napp_id = \"low\"\nfamily_id = \"f\"\nslo_ms = 1e9\nrate = 1.0\n\
             [[apps]]\napp_id = \"crit\"\nfamily_id = \"f\"\nslo_ms = 1e9\nrate = 0.5\ncritical = true\n\
             [[apps]]\napp_id = \"high\"\nfamily_id = \"f\"\nslo_ms = 1e9\nrate = 9.0\n\
             [[apps]]\napp_id = \"mid\"\nfamily_id = \"f\"\nslo_ms = 1e9\nrate = 5.0\n",
            "toy",
        )
        .unwrap();
        // round(0.5 · 4) = 2: the critical app plus the highest-rate one.
        let k = select_k(&state, 0.5);
        assert_eq!(k.len(), 2);
        assert!(k.contains(&AppIx(1)) && k.contains(&AppIx(2)));
        // Criticals stay in even when the fraction rounds to zero.
        let k0 = select_k(&state, 0.0);
        assert_eq!(k0.len(), 1);
        assert!(k0.contains(&AppIx(1)));
    }
}
