//! Experiment and sweep configuration files.
//!
//! All configuration files are JSON with a versioned `schema` field.
//! Unknown keys are errors, not warnings: a typo in a simulator config
//! silently changes an experiment, so nothing is ignored.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use stacksim_core::dram::DramDeviceConfig;
use stacksim_core::metrics::CoreParams;
use stacksim_core::orgs::run::SimulationSettings;
use stacksim_core::orgs::{
    AlloyConfig, BansheeConfig, CacheConfig, HmaConfig, IdealMemoryConfig, MemCacheConfig,
    MemCachePartition, OrgSpec, UnisonConfig,
};
use stacksim_core::trace::{SyntheticTraceSpec, TraceSource};
use stacksim_core::{Error, Result};

pub const EXPERIMENT_SCHEMA: &str = "stacksim-experiment-v1";
pub const SWEEP_SCHEMA: &str = "stacksim-sweep-v1";
pub const TRACE_SPEC_SCHEMA: &str = "stacksim-trace-v1";
pub const COUNTS_SCHEMA: &str = "stacksim-counts-v1";
pub const PLAN_SCHEMA: &str = "stacksim-plan-v1";

pub fn load_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("{}: invalid JSON: {e}", path.display())))
}

/// Pops and checks the `schema` key, then deserializes the rest strictly.
pub fn parse_with_schema<T: DeserializeOwned>(mut value: Value, expected: &str) -> Result<T> {
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::config("top-level JSON value must be an object"))?;
    match obj.remove("schema") {
        Some(Value::String(s)) if s == expected => {}
        Some(Value::String(s)) => {
            return Err(Error::config(format!(
                "schema is \"{s}\", expected \"{expected}\""
            )))
        }
        _ => return Err(Error::config(format!("missing schema key \"{expected}\""))),
    }
    serde_json::from_value(value).map_err(|e| Error::config(e.to_string()))
}

/// Serializes `value` with a `schema` key injected at the top.
pub fn attach_schema<T: Serialize>(value: &T, schema: &str) -> Result<Value> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::config(e.to_string()))?;
    let obj = v
        .as_object_mut()
        .ok_or_else(|| Error::config("cannot attach a schema to a non-object"))?;
    obj.insert("schema".into(), Value::String(schema.into()));
    Ok(v)
}

/// Where the trace comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TraceSection {
    File(PathBuf),
    Synthetic(SyntheticTraceSpec),
}

impl TraceSection {
    /// File paths are interpreted relative to the config file's directory.
    pub fn to_source(&self, base_dir: &Path) -> TraceSource {
        match self {
            TraceSection::File(path) if path.is_relative() => {
                TraceSource::File(base_dir.join(path))
            }
            TraceSection::File(path) => TraceSource::File(path.clone()),
            TraceSection::Synthetic(spec) => TraceSource::Synthetic(spec.clone()),
        }
    }
}

/// An organization (or cache) selection: a name plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrgSection {
    pub name: String,
    #[serde(default)]
    pub params: Value,
}

fn params_object(params: &Value) -> Result<Value> {
    match params {
        Value::Null => Ok(Value::Object(Default::default())),
        Value::Object(_) => Ok(params.clone()),
        other => Err(Error::config(format!(
            "organization params must be an object, got {other}"
        ))),
    }
}

fn parse_params<T: DeserializeOwned>(name: &str, params: &Value) -> Result<T> {
    serde_json::from_value(params_object(params)?)
        .map_err(|e| Error::config(format!("organization \"{name}\": {e}")))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MemCacheParams {
    partition: MemCachePartition,
    cache: OrgSection,
    #[serde(default)]
    demand_hits_only: bool,
}

impl OrgSection {
    pub fn to_spec(&self) -> Result<OrgSpec> {
        Ok(match self.name.as_str() {
            "nostacked" => OrgSpec::NoStacked,
            "infinite" => OrgSpec::Infinite,
            "alloy" => OrgSpec::Alloy(parse_params::<AlloyConfig>(&self.name, &self.params)?),
            "unison" => OrgSpec::Unison(parse_params::<UnisonConfig>(&self.name, &self.params)?),
            "banshee" => {
                OrgSpec::Banshee(parse_params::<BansheeConfig>(&self.name, &self.params)?)
            }
            "idealmem" => OrgSpec::IdealMemory(parse_params::<IdealMemoryConfig>(
                &self.name,
                &self.params,
            )?),
            "hma" => OrgSpec::Hma(parse_params::<HmaConfig>(&self.name, &self.params)?),
            "memcache" => {
                let p: MemCacheParams = parse_params(&self.name, &self.params)?;
                OrgSpec::MemCache(MemCacheConfig {
                    partition: p.partition,
                    cache: p.cache.to_cache_config()?,
                    demand_hits_only: p.demand_hits_only,
                })
            }
            other => {
                return Err(Error::config(format!(
                    "unknown organization \"{other}\"; expected one of nostacked, infinite, \
                     alloy, unison, banshee, hma, idealmem, memcache"
                )))
            }
        })
    }

    pub fn to_cache_config(&self) -> Result<CacheConfig> {
        Ok(match self.name.as_str() {
            "alloy" => CacheConfig::Alloy(parse_params(&self.name, &self.params)?),
            "unison" => CacheConfig::Unison(parse_params(&self.name, &self.params)?),
            "banshee" => CacheConfig::Banshee(parse_params(&self.name, &self.params)?),
            other => {
                return Err(Error::config(format!(
                    "\"{other}\" is not a cache organization; expected alloy, unison, or banshee"
                )))
            }
        })
    }
}

macro_rules! override_struct {
    ($name:ident over $base:ty { $($field:ident: $ty:ty),+ $(,)? }) => {
        /// Partial override; omitted keys keep the default value.
        #[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct $name {
            $(pub $field: Option<$ty>,)+
        }

        impl $name {
            pub fn apply(&self, mut base: $base) -> $base {
                $(if let Some(v) = self.$field.clone() { base.$field = v; })+
                base
            }
        }
    };
}

override_struct!(DeviceOverride over DramDeviceConfig {
    capacity: u64,
    channels: u32,
    per_channel_bandwidth: f64,
    bus_width: u32,
    min_transfer: u32,
    row_buffer: u64,
    ranks_per_channel: u32,
    banks_per_rank: u32,
    t_cas: u32,
    t_rcd: u32,
    t_rp: u32,
    t_ras: u32,
    clock_hz: f64,
});

override_struct!(CoreOverride over CoreParams {
    cores: u32,
    clock_hz: f64,
    peak_ipc: u32,
    overlap_factor: f64,
});

/// A full experiment: one trace, one organization, one device pair.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub trace: TraceSection,
    #[serde(default)]
    pub warmup_records: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub organization: OrgSection,
    #[serde(default)]
    pub stacked_dram: DeviceOverride,
    #[serde(default)]
    pub offchip_dram: DeviceOverride,
    #[serde(default)]
    pub core: CoreOverride,
}

pub struct ResolvedExperiment {
    pub source: TraceSource,
    pub spec: OrgSpec,
    pub settings: SimulationSettings,
}

impl ExperimentFile {
    pub fn load(path: &Path) -> Result<Self> {
        parse_with_schema(load_json(path)?, EXPERIMENT_SCHEMA)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn resolve(&self, base_dir: &Path, seed_override: Option<u64>) -> Result<ResolvedExperiment> {
        let settings = SimulationSettings {
            stacked: self.stacked_dram.apply(DramDeviceConfig::stacked_default()),
            offchip: self.offchip_dram.apply(DramDeviceConfig::offchip_default()),
            core: self.core.apply(CoreParams::default()),
            warmup_records: self.warmup_records,
            seed: seed_override.or(self.seed).unwrap_or(0),
        };
        settings.validate()?;
        Ok(ResolvedExperiment {
            source: self.trace.to_source(base_dir),
            spec: self.organization.to_spec()?,
            settings,
        })
    }

    /// The parts that must agree across the runs of a comparison.
    pub fn comparable_key(&self) -> (TraceSection, DeviceOverride, DeviceOverride, CoreOverride, Option<u64>, Option<u64>) {
        (
            self.trace.clone(),
            self.stacked_dram.clone(),
            self.offchip_dram.clone(),
            self.core.clone(),
            self.seed,
            self.warmup_records,
        )
    }
}

/// Sweep kinds and their parameters.
#[derive(Debug)]
pub enum SweepFile {
    Partition(PartitionSweep),
    DramSize(DramSizeSweep),
    SampleSize(SampleSizeSweep),
    Stability(StabilitySweep),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBase {
    pub trace: TraceSection,
    #[serde(default)]
    pub warmup_records: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub stacked_dram: DeviceOverride,
    #[serde(default)]
    pub offchip_dram: DeviceOverride,
    #[serde(default)]
    pub core: CoreOverride,
}

impl SweepBase {
    pub fn settings(&self, seed_override: Option<u64>) -> Result<SimulationSettings> {
        let settings = SimulationSettings {
            stacked: self.stacked_dram.apply(DramDeviceConfig::stacked_default()),
            offchip: self.offchip_dram.apply(DramDeviceConfig::offchip_default()),
            core: self.core.apply(CoreParams::default()),
            warmup_records: self.warmup_records,
            seed: seed_override.or(self.seed).unwrap_or(0),
        };
        settings.validate()?;
        Ok(settings)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionSweep {
    pub trace: TraceSection,
    #[serde(default)]
    pub warmup_records: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub stacked_dram: DeviceOverride,
    #[serde(default)]
    pub offchip_dram: DeviceOverride,
    #[serde(default)]
    pub core: CoreOverride,
    pub cache: OrgSection,
    /// `(mem_bytes, cache_bytes)` points; defaults to five evenly spaced
    /// splits including the all-cache and all-memory endpoints.
    #[serde(default)]
    pub partitions: Option<Vec<(u64, u64)>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DramSizeSweep {
    pub trace: TraceSection,
    #[serde(default)]
    pub warmup_records: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub stacked_dram: DeviceOverride,
    #[serde(default)]
    pub offchip_dram: DeviceOverride,
    #[serde(default)]
    pub core: CoreOverride,
    pub organization: OrgSection,
    pub capacities: Vec<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSizeSweep {
    pub trace: TraceSection,
    pub fractions: Vec<f64>,
    pub k: usize,
    #[serde(default = "default_page_size")]
    pub page_size: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySweep {
    pub trace: TraceSection,
    pub k: usize,
    pub window_records: u64,
    #[serde(default = "default_page_size")]
    pub page_size: u64,
}

fn default_page_size() -> u64 {
    4096
}

impl SweepFile {
    pub fn load(path: &Path) -> Result<Self> {
        let mut value = load_json(path)?;
        let obj = value
            .as_object_mut()
            .ok_or_else(|| Error::config("sweep config must be an object"))?;
        let kind = match obj.remove("kind") {
            Some(Value::String(k)) => k,
            _ => return Err(Error::config("sweep config requires a string \"kind\" key")),
        };
        let parse_err = |e: Error| Error::config(format!("{}: {e}", path.display()));
        Ok(match kind.as_str() {
            "partition" => {
                SweepFile::Partition(parse_with_schema(value, SWEEP_SCHEMA).map_err(parse_err)?)
            }
            "dram_size" => {
                SweepFile::DramSize(parse_with_schema(value, SWEEP_SCHEMA).map_err(parse_err)?)
            }
            "sample_size" => {
                SweepFile::SampleSize(parse_with_schema(value, SWEEP_SCHEMA).map_err(parse_err)?)
            }
            "stability" => {
                SweepFile::Stability(parse_with_schema(value, SWEEP_SCHEMA).map_err(parse_err)?)
            }
            other => {
                return Err(Error::config(format!(
                    "unknown sweep kind \"{other}\"; expected partition, dram_size, \
                     sample_size, or stability"
                )))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_top_level_keys_are_rejected() {
        let value = serde_json::json!({
            "schema": EXPERIMENT_SCHEMA,
            "trace": {"synthetic": {
                "n_hot_pages": 1, "n_transient_pages": 0, "hot_access_fraction": 1.0,
                "zipf_exponent": 0.0, "transient_lifetime": 1, "total_records": 10,
                "writeback_fraction": 0.0, "instructions_per_record": 1.0, "rng_seed": 0
            }},
            "organization": {"name": "infinite"},
            "warmup_recorsd": 5
        });
        let err = parse_with_schema::<ExperimentFile>(value, EXPERIMENT_SCHEMA).unwrap_err();
        assert!(err.to_string().contains("warmup_recorsd"), "{err}");
    }

    #[test]
    fn wrong_schema_is_named() {
        let value = serde_json::json!({"schema": "something-else", "trace": {}});
        let err = parse_with_schema::<ExperimentFile>(value, EXPERIMENT_SCHEMA).unwrap_err();
        assert!(err.to_string().contains("something-else"));
    }

    #[test]
    fn unknown_org_params_are_rejected() {
        let section = OrgSection {
            name: "banshee".into(),
            params: serde_json::json!({"flush_treshold": 0.5}),
        };
        let err = section.to_spec().unwrap_err();
        assert!(err.to_string().contains("flush_treshold"), "{err}");
    }

    #[test]
    fn memcache_params_parse_both_partition_forms() {
        for partition in [serde_json::json!("auto"), serde_json::json!({"mem_bytes": 8192})] {
            let section = OrgSection {
                name: "memcache".into(),
                params: serde_json::json!({
                    "partition": partition,
                    "cache": {"name": "banshee", "params": {"sampling_coefficient": 0.5}},
                }),
            };
            let spec = section.to_spec().unwrap();
            match spec {
                OrgSpec::MemCache(cfg) => match cfg.cache {
                    CacheConfig::Banshee(b) => assert_eq!(b.sampling_coefficient, 0.5),
                    other => panic!("wrong cache: {other:?}"),
                },
                other => panic!("wrong spec: {other:?}"),
            }
        }
    }

    #[test]
    fn device_overrides_merge_onto_defaults() {
        let over = DeviceOverride {
            capacity: Some(1 << 20),
            channels: Some(2),
            ..DeviceOverride::default()
        };
        let cfg = over.apply(DramDeviceConfig::stacked_default());
        assert_eq!(cfg.capacity, 1 << 20);
        assert_eq!(cfg.channels, 2);
        assert_eq!(cfg.row_buffer, 8192);
    }
}
