//! Seeded synthetic workload generation.
//!
//! Produces catalog and cluster documents (as TOML text, so the real ingest
//! path is exercised) for randomized solver tests, benchmarks, and the
//! committed large-scale scenario. Everything is a pure function of the seed
//! and the [`SynthSpec`], so generated artifacts can be regenerated and
//! compared byte-for-byte.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::Catalog;
use crate::cluster::ClusterState;
use crate::error::Result;

/// splitmix64 finalizer: decorrelates seeds derived from a common base.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Knobs for one synthetic instance.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    /// Model families, including `whale_families` oversized ones.
    pub families: usize,
    pub variants_min: usize,
    pub variants_max: usize,
    /// Footprint range for ordinary (non-whale) variants.
    pub mem_min_mib: u64,
    pub mem_max_mib: u64,
    /// Families whose full-size variant is `whale_mem_mib` (0 for none).
    pub whale_families: usize,
    pub whale_mem_mib: u64,
    pub compute_fraction_max: f64,
    pub servers: usize,
    pub sites: usize,
    /// Per-server memory; `None` sizes servers from demand so that primary
    /// placements land near `target_mem_utilization`.
    pub server_mem_gib: Option<f64>,
    pub apps: usize,
    /// Fraction of apps pinned to whale families.
    pub whale_app_share: f64,
    pub rate_range: (f64, f64),
    /// Rate range for whale-family apps; `None` uses `rate_range`. Heavy
    /// models typically serve analytical, low-QPS traffic, so giving them
    /// a lower band also keeps them out of rate-ranked critical sets.
    pub whale_rate_range: Option<(f64, f64)>,
    pub slo_ms: f64,
    pub target_mem_utilization: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            families: 4,
            variants_min: 2,
            variants_max: 4,
            mem_min_mib: 10,
            mem_max_mib: 800,
            whale_families: 0,
            whale_mem_mib: 7168,
            compute_fraction_max: 0.05,
            servers: 4,
            sites: 2,
            server_mem_gib: None,
            apps: 12,
            whale_app_share: 0.0,
            rate_range: (0.5, 5.0),
            whale_rate_range: None,
            slo_ms: 1e9,
            target_mem_utilization: 0.45,
        }
    }
}

impl SynthSpec {
    /// Desk-scale instances for exhaustive-oracle comparisons.
    pub fn tiny() -> Self {
        SynthSpec {
            families: 3,
            variants_min: 1,
            variants_max: 3,
            mem_min_mib: 16,
            mem_max_mib: 400,
            servers: 3,
            sites: 2,
            apps: 5,
            ..SynthSpec::default()
        }
    }

    /// The bundled 100-server reference workload: ten sites, 640 apps over
    /// sixteen families (three of them oversized), sized for moderate
    /// primary utilization. `scenarios/large/` holds the generated files;
    /// a drift test keeps them in sync with this spec.
    pub fn large_scale() -> Self {
        SynthSpec {
            families: 16,
            variants_min: 3,
            variants_max: 6,
            mem_min_mib: 60,
            mem_max_mib: 1100,
            whale_families: 3,
            whale_mem_mib: 7168,
            servers: 100,
            sites: 10,
            apps: 640,
            whale_app_share: 0.156,
            target_mem_utilization: 0.40,
            ..SynthSpec::default()
        }
    }
}

/// Seed for the bundled large-scale instance (see [`SynthSpec::large_scale`]).
pub const LARGE_SCALE_SEED: u64 = 9_020;

/// Distinct, ascending footprints for one family.
fn family_mems(rng: &mut ChaCha8Rng, spec: &SynthSpec, n: usize, whale: bool) -> Vec<u64> {
    if whale && n > 1 {
        // Oversized families still ship a distilled variant: anchor the
        // bottom of the ladder in the ordinary band and climb geometrically
        // to the full footprint, so every family keeps a cheap fallback.
        let bottom = rng.gen_range(spec.mem_min_mib..=spec.mem_min_mib * 4) as f64;
        let ratio = spec.whale_mem_mib as f64 / bottom;
        let mut mems: Vec<u64> = (0..n)
            .map(|i| (bottom * ratio.powf(i as f64 / (n - 1) as f64)).round() as u64)
            .collect();
        for i in 1..n {
            if mems[i] <= mems[i - 1] {
                mems[i] = mems[i - 1] + 1;
            }
        }
        return mems;
    }
    let top = if whale {
        spec.whale_mem_mib
    } else {
        rng.gen_range(spec.mem_min_mib.max(spec.mem_max_mib / 2)..=spec.mem_max_mib)
    };
    let mut mems = vec![top];
    // Smaller variants thin out roughly geometrically below the full size.
    let mut cur = top;
    for _ in 1..n {
        let shrink = rng.gen_range(0.25..0.60);
        cur = ((cur as f64 * shrink) as u64).max(spec.mem_min_mib.min(cur.saturating_sub(1)));
        while mems.contains(&cur) {
            cur += 1;
        }
        mems.push(cur);
    }
    mems.sort_unstable();
    mems
}

/// Generate the catalog and cluster documents for `seed`.
pub fn instance_toml(seed: u64, spec: &SynthSpec) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x5e_ed));
    let mut catalog = String::from("schema_version = 1\n");

    let mut family_ids: Vec<String> = Vec::new();
    let mut whale_ids: Vec<String> = Vec::new();
    let mut full_mem_mib: Vec<u64> = Vec::new();
    for f in 0..spec.families {
        let whale = f < spec.whale_families;
        let fam_id = format!("fam-{f:02}");
        let n = rng.gen_range(spec.variants_min..=spec.variants_max).max(1);
        let mems = family_mems(&mut rng, spec, n, whale);
        let top_acc = rng.gen_range(0.72..0.95);
        let _ = writeln!(catalog, "\n[[families]]\nfamily_id = \"{fam_id}\"");
        for (j, mem) in mems.iter().enumerate() {
            // Accuracy grows with footprint; the full-size variant is the
            // unique maximum by construction.
            let frac = (j + 1) as f64 / mems.len() as f64;
            let acc = top_acc * (0.82 + 0.18 * frac) - if j + 1 == mems.len() { 0.0 } else { 1e-4 };
            let compute = rng.gen_range(0.0..spec.compute_fraction_max);
            let _ = writeln!(
                catalog,
                "[[families.variants]]\nvariant_id = \"{fam_id}-v{j}\"\n\
                 raw_accuracy = {acc:.6}\nmem_demand_mib = {mem}\ncompute_fraction = {compute:.4}"
            );
        }
        full_mem_mib.push(*mems.last().unwrap());
        if whale {
            whale_ids.push(fam_id.clone());
        }
        family_ids.push(fam_id);
    }

    // Apps: whales take their share, the rest draw uniformly.
    let whale_apps = (spec.apps as f64 * spec.whale_app_share).round() as usize;
    let mut app_family: Vec<usize> = Vec::with_capacity(spec.apps);
    for a in 0..spec.apps {
        if a < whale_apps && !whale_ids.is_empty() {
            app_family.push(a % spec.whale_families);
        } else if spec.families > spec.whale_families {
            app_family.push(rng.gen_range(spec.whale_families..spec.families));
        } else {
            app_family.push(rng.gen_range(0..spec.families));
        }
    }
    app_family.shuffle(&mut rng);

    // Size servers so full-size primaries land near the target utilization.
    let demand_mib: u64 = app_family.iter().map(|&f| full_mem_mib[f]).sum();
    let server_mem_gib = spec.server_mem_gib.unwrap_or_else(|| {
        let per_server = demand_mib as f64 / spec.target_mem_utilization / spec.servers as f64;
        let floor = if spec.whale_families > 0 {
            spec.whale_mem_mib as f64 * 1.3
        } else {
            full_mem_mib.iter().copied().max().unwrap_or(1) as f64 * 1.2
        };
        (per_server.max(floor) / 512.0).ceil() * 0.5
    });

    let mut cluster = String::from("schema_version = 1\n");
    for s in 0..spec.servers {
        let _ = writeln!(
            cluster,
            "\n[[servers]]\nserver_id = \"srv-{s:02}\"\nsite_id = \"site-{:01}\"\n\
             mem_gib = {server_mem_gib}\ncompute = 1.0",
            s % spec.sites
        );
    }
    for site in 0..spec.sites {
        let _ = writeln!(
            cluster,
            "\n[[sites]]\nsite_id = \"site-{site:01}\"\nnet_latency_ms = {:.2}",
            0.25 * site as f64
        );
    }
    for (a, &f) in app_family.iter().enumerate() {
        let band = if f < spec.whale_families {
            spec.whale_rate_range.unwrap_or(spec.rate_range)
        } else {
            spec.rate_range
        };
        let rate = rng.gen_range(band.0..=band.1);
        let _ = writeln!(
            cluster,
            "\n[[apps]]\napp_id = \"app-{a:03}\"\nfamily_id = \"{}\"\n\
             rate = {rate:.3}\nslo_ms = {:.1}",
            family_ids[f], spec.slo_ms
        );
    }
    (catalog, cluster)
}

/// Generate and ingest an instance in one step.
pub fn instance(seed: u64, spec: &SynthSpec) -> Result<(Catalog, ClusterState)> {
    let (cat_toml, cluster_toml) = instance_toml(seed, spec);
    let catalog = Catalog::from_toml(&cat_toml, "synth-catalog")?;
    let state = ClusterState::from_toml(&catalog, &cluster_toml, "synth-cluster")?;
    Ok((catalog, state))
}
