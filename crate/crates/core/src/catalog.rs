//! Model catalog: families of variants plus the load-time model.
//!
//! A *family* is a set of interchangeable variants of one architecture
//! (e.g. four sizes of the same CNN). Variants trade memory footprint for
//! accuracy; within a family accuracies are normalized against the best
//! variant so placement objectives are comparable across families.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Memory is tracked in whole KiB so capacity accounting stays exact.
pub type MemKib = u64;
/// Compute demand in 1/1000ths of one accelerator.
pub type ComputeMillis = u64;

pub fn mib_to_kib(mib: f64) -> MemKib {
    (mib * 1024.0).round() as MemKib
}

pub fn kib_to_mib(kib: MemKib) -> f64 {
    kib as f64 / 1024.0
}

/// Index into [`Catalog::variants`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VariantIx(pub usize);

/// Index into [`Catalog::families`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FamilyIx(pub usize);

/// One deployable model: footprint, accuracy and per-server-class latency.
#[derive(Debug, Clone)]
pub struct ModelVariant {
    pub variant_id: String,
    pub family: FamilyIx,
    /// Accuracy as reported for the model itself, in (0, 1].
    pub raw_accuracy: f64,
    /// Accuracy relative to the best variant of the family (max = 1.0).
    pub norm_accuracy: f64,
    pub mem_kib: MemKib,
    pub compute_millis: ComputeMillis,
    /// Service latency by server class, in ms.
    pub service_latency_ms: BTreeMap<String, f64>,
    /// Measured load time; when absent the catalog's linear model is used.
    pub load_time_override_ms: Option<f64>,
}

impl ModelVariant {
    pub fn mem_mib(&self) -> f64 {
        kib_to_mib(self.mem_kib)
    }
}

/// Spread-based bucketing of families by how far their footprints stretch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

impl fmt::Display for SizeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SizeClass::Small => write!(f, "small"),
            SizeClass::Medium => write!(f, "medium"),
            SizeClass::Large => write!(f, "large"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelFamily {
    pub family_id: String,
    /// Variants in strictly ascending memory order.
    pub variants: Vec<VariantIx>,
    pub size_class: SizeClass,
}

/// Linear model-load-time fit: `load_ms = intercept + slope * mem_mib`.
///
/// The default is a two-point fit through measured loads of a 158 MiB model
/// (441 ms) and an 806 MiB model (2105 ms).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LoadTimeModel {
    pub intercept_ms: f64,
    pub slope_ms_per_mib: f64,
}

impl Default for LoadTimeModel {
    fn default() -> Self {
        let (m0, t0) = (158.0, 441.0);
        let (m1, t1) = (806.0, 2105.0);
        let slope = (t1 - t0) / (m1 - m0);
        LoadTimeModel {
            intercept_ms: t0 - slope * m0,
            slope_ms_per_mib: slope,
        }
    }
}

impl LoadTimeModel {
    pub fn load_ms(&self, mem_kib: MemKib) -> f64 {
        self.intercept_ms + self.slope_ms_per_mib * kib_to_mib(mem_kib)
    }
}

/// Family spread thresholds (MiB) separating Small / Medium / Large.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeClassThresholds {
    pub small_max_mib: f64,
    pub large_min_mib: f64,
}

impl Default for SizeClassThresholds {
    fn default() -> Self {
        SizeClassThresholds {
            small_max_mib: 50.0,
            large_min_mib: 300.0,
        }
    }
}

/// Classify a family by the footprint spread between its extremes.
/// Spread strictly below `small_max` is Small, strictly above `large_min`
/// is Large, everything else (boundaries included) Medium.
pub fn classify_spread(spread_mib: f64, t: &SizeClassThresholds) -> SizeClass {
    if spread_mib < t.small_max_mib {
        SizeClass::Small
    } else if spread_mib > t.large_min_mib {
        SizeClass::Large
    } else {
        SizeClass::Medium
    }
}

/// Parsed, normalized, classified model catalog.
#[derive(Debug, Clone)]
pub struct Catalog {
    families: Vec<ModelFamily>,
    variants: Vec<ModelVariant>,
    family_ids: BTreeMap<String, FamilyIx>,
    variant_ids: BTreeMap<String, VariantIx>,
    pub load_time: LoadTimeModel,
    pub thresholds: SizeClassThresholds,
}

impl Catalog {
    pub fn families(&self) -> &[ModelFamily] {
        &self.families
    }

    pub fn variants(&self) -> &[ModelVariant] {
        &self.variants
    }

    pub fn family(&self, ix: FamilyIx) -> &ModelFamily {
        &self.families[ix.0]
    }

    pub fn variant(&self, ix: VariantIx) -> &ModelVariant {
        &self.variants[ix.0]
    }

    pub fn family_by_id(&self, id: &str) -> Option<FamilyIx> {
        self.family_ids.get(id).copied()
    }

    pub fn variant_by_id(&self, id: &str) -> Option<VariantIx> {
        self.variant_ids.get(id).copied()
    }

    /// Smallest-footprint variant of a family.
    pub fn smallest(&self, family: FamilyIx) -> VariantIx {
        *self
            .family(family)
            .variants
            .first()
            .expect("family is non-empty")
    }

    /// Largest-footprint ("full-size") variant of a family.
    pub fn largest(&self, family: FamilyIx) -> VariantIx {
        *self
            .family(family)
            .variants
            .last()
            .expect("family is non-empty")
    }

    /// Load time for a variant: measured override if present, else the
    /// linear fit on its footprint.
    pub fn load_ms(&self, ix: VariantIx) -> f64 {
        let v = self.variant(ix);
        v.load_time_override_ms
            .unwrap_or_else(|| self.load_time.load_ms(v.mem_kib))
    }

    /// Service latency of a variant on a server of `class`, if profiled.
    pub fn service_latency_ms(&self, ix: VariantIx, class: &str) -> Option<f64> {
        self.variant(ix).service_latency_ms.get(class).copied()
    }

    /// Latency a client observes from `variant` on a server of `class`
    /// reached over `net_ms` of network: profiled service latency plus the
    /// network leg. Unprofiled variants are assumed latency-negligible;
    /// profiled ones fall back to their "default" class entry and return
    /// None for a class they have no figure for.
    pub fn observed_latency_ms(&self, ix: VariantIx, class: &str, net_ms: f64) -> Option<f64> {
        let profile = &self.variant(ix).service_latency_ms;
        let service = if profile.is_empty() {
            0.0
        } else {
            profile
                .get(class)
                .or_else(|| profile.get("default"))
                .copied()?
        };
        Some(service + net_ms)
    }

    pub fn from_file(path: &Path) -> Result<Catalog> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::schema(path.display().to_string(), e.to_string()))?;
        Catalog::from_toml(&text, &path.display().to_string())
    }

    /// Parse a catalog document. Unknown fields are rejected, accuracies are
    /// normalized per family, and families are size-classified at ingest.
    pub fn from_toml(text: &str, origin: &str) -> Result<Catalog> {
        let file: CatalogFile =
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
        let load_time = match file.load_time {
            Some(spec) => LoadTimeModel {
                intercept_ms: spec.intercept_ms,
                slope_ms_per_mib: spec.slope_ms_per_mib,
            },
            None => LoadTimeModel::default(),
        };
        let thresholds = file.size_class.unwrap_or_default();

        let mut catalog = Catalog {
            families: Vec::new(),
            variants: Vec::new(),
            family_ids: BTreeMap::new(),
            variant_ids: BTreeMap::new(),
            load_time,
            thresholds,
        };
        for fam in file.families {
            catalog.ingest_family(fam, origin)?;
        }
        if catalog.families.is_empty() {
            return Err(Error::schema(origin, "catalog has no families"));
        }
        Ok(catalog)
    }

    fn ingest_family(&mut self, spec: FamilySpec, origin: &str) -> Result<()> {
        let fam_ix = FamilyIx(self.families.len());
        if self
            .family_ids
            .insert(spec.family_id.clone(), fam_ix)
            .is_some()
        {
            return Err(Error::schema(
                origin,
                format!("duplicate family '{}'", spec.family_id),
            ));
        }
        if spec.variants.is_empty() {
            return Err(Error::schema(
                origin,
                format!("family '{}' has no variants", spec.family_id),
            ));
        }

        let mut specs = spec.variants;
        specs.sort_by_key(|v| mib_to_kib(v.mem_demand_mib));
        for pair in specs.windows(2) {
            if mib_to_kib(pair[0].mem_demand_mib) == mib_to_kib(pair[1].mem_demand_mib) {
                return Err(Error::schema(
                    origin,
                    format!(
                        "family '{}': variants '{}' and '{}' tie on memory demand",
                        spec.family_id, pair[0].variant_id, pair[1].variant_id
                    ),
                ));
            }
        }

        let best = specs
            .iter()
            .map(|v| v.raw_accuracy)
            .fold(f64::MIN, f64::max);
        if specs.iter().filter(|v| v.raw_accuracy == best).count() != 1 {
            return Err(Error::schema(
                origin,
                format!(
                    "family '{}': ties at the best accuracy are not allowed",
                    spec.family_id
                ),
            ));
        }

        let mut members = Vec::with_capacity(specs.len());
        for v in specs {
            if !(v.raw_accuracy > 0.0 && v.raw_accuracy <= 1.0) {
                return Err(Error::schema(
                    origin,
                    format!(
                        "variant '{}': accuracy {} outside (0, 1]",
                        v.variant_id, v.raw_accuracy
                    ),
                ));
            }
            if v.mem_demand_mib <= 0.0 {
                return Err(Error::schema(
                    origin,
                    format!("variant '{}': non-positive memory demand", v.variant_id),
                ));
            }
            if !(0.0..=1.0).contains(&v.compute_fraction) {
                return Err(Error::schema(
                    origin,
                    format!(
                        "variant '{}': compute fraction outside [0, 1]",
                        v.variant_id
                    ),
                ));
            }
            let var_ix = VariantIx(self.variants.len());
            if self
                .variant_ids
                .insert(v.variant_id.clone(), var_ix)
                .is_some()
            {
                return Err(Error::schema(
                    origin,
                    format!("duplicate variant '{}'", v.variant_id),
                ));
            }
            self.variants.push(ModelVariant {
                variant_id: v.variant_id,
                family: fam_ix,
                raw_accuracy: v.raw_accuracy,
                norm_accuracy: v.raw_accuracy / best,
                mem_kib: mib_to_kib(v.mem_demand_mib),
                compute_millis: (v.compute_fraction * 1000.0).round() as ComputeMillis,
                service_latency_ms: v.service_latency_ms,
                load_time_override_ms: v.load_time_ms,
            });
            members.push(var_ix);
        }

        let spread_mib = kib_to_mib(
            self.variant(*members.last().unwrap()).mem_kib - self.variant(members[0]).mem_kib,
        );
        self.families.push(ModelFamily {
            family_id: spec.family_id,
            variants: members,
            size_class: classify_spread(spread_mib, &self.thresholds),
        });
        Ok(())
    }
}

pub const SCHEMA_VERSION: u32 = 1;

// ── file schema ─────────────────────────────────────────────────────────────

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogFile {
    schema_version: u32,
    load_time: Option<LoadTimeSpec>,
    size_class: Option<SizeClassThresholds>,
    families: Vec<FamilySpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadTimeSpec {
    intercept_ms: f64,
    slope_ms_per_mib: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilySpec {
    family_id: String,
    variants: Vec<VariantSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariantSpec {
    variant_id: String,
    raw_accuracy: f64,
    mem_demand_mib: f64,
    compute_fraction: f64,
    #[serde(default)]
    service_latency_ms: BTreeMap<String, f64>,
    /// Optional measured load time overriding the linear model.
    load_time_ms: Option<f64>,
}
