//! Replays a trace through an organization and assembles the run report.
//!
//! Records before the warm-up boundary update organization state (caches
//! fill, counters ramp) but none of the reported statistics; the boundary
//! resets the ledger and counters, not the state.

use serde_json::json;

use crate::dram::{DramDeviceConfig, RowBufferState, TrafficLedger};
use crate::error::{Error, Result};
use crate::metrics::{mpki, speedup, CoreParams, OutcomeCounts, PerfBreakdown, RunReport};
use crate::partition::compute_memory_fraction;
use crate::profiler::{profile_source, top_k};
use crate::trace::{AccessKind, TraceSource};

use super::{
    MemCache, MemCachePartition, MemCachePlan, NoStacked, Organization, OrgSpec, ServedBy,
    BLOCK_BYTES, {Hma, IdealMemory, Infinite},
};

/// Everything a run needs besides the organization and the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSettings {
    pub stacked: DramDeviceConfig,
    pub offchip: DramDeviceConfig,
    pub core: CoreParams,
    /// Records that update state but not statistics; defaults to 10% of
    /// the trace.
    pub warmup_records: Option<u64>,
    /// Seeds the run's own randomness (e.g. miss sampling).
    pub seed: u64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            stacked: DramDeviceConfig::stacked_default(),
            offchip: DramDeviceConfig::offchip_default(),
            core: CoreParams::default(),
            warmup_records: None,
            seed: 0,
        }
    }
}

impl SimulationSettings {
    pub fn validate(&self) -> Result<()> {
        self.stacked.validate()?;
        self.offchip.validate()?;
        self.core.validate()
    }

    fn warmup_for(&self, total_records: u64) -> u64 {
        self.warmup_records.unwrap_or(total_records / 10)
    }
}

/// An organization ready to run, plus its resolved-configuration echo.
pub struct ResolvedOrg {
    pub org: Box<dyn Organization>,
    pub echo: serde_json::Value,
    pub flush_latency_s: f64,
}

/// Builds the organization's state machine, running whatever auxiliary
/// passes the design needs (a profiling pass for the memory-filled
/// designs, plus a full-cache simulation for the auto-partitioned hybrid).
pub fn resolve(
    spec: &OrgSpec,
    source: &TraceSource,
    settings: &SimulationSettings,
) -> Result<ResolvedOrg> {
    match spec {
        OrgSpec::NoStacked => Ok(ResolvedOrg {
            org: Box::new(NoStacked),
            echo: json!({ "name": "nostacked" }),
            flush_latency_s: 0.0,
        }),
        OrgSpec::Infinite => Ok(ResolvedOrg {
            org: Box::new(Infinite),
            echo: json!({ "name": "infinite" }),
            flush_latency_s: 0.0,
        }),
        OrgSpec::Alloy(cfg) => {
            cfg.validate()?;
            let org = super::AlloyCache::new(cfg.clone(), settings.stacked.capacity);
            if org.frames() == 0 {
                return Err(Error::config("stacked capacity below one tag-and-data unit"));
            }
            let echo = json!({ "name": "alloy", "config": cfg, "frames": org.frames() });
            Ok(ResolvedOrg { org: Box::new(org), echo, flush_latency_s: 0.0 })
        }
        OrgSpec::Unison(cfg) => {
            cfg.validate()?;
            let org = super::UnisonCache::new(cfg.clone(), settings.stacked.capacity);
            if org.frames() == 0 {
                return Err(Error::config("stacked capacity below one cache set"));
            }
            let echo = json!({ "name": "unison", "config": cfg, "frames": org.frames() });
            Ok(ResolvedOrg { org: Box::new(org), echo, flush_latency_s: 0.0 })
        }
        OrgSpec::Banshee(cfg) => {
            cfg.validate()?;
            let org = super::BansheeCache::new(cfg.clone(), settings.stacked.capacity, settings.seed);
            if org.frames() == 0 {
                return Err(Error::config("stacked capacity below one cache set"));
            }
            let echo = json!({ "name": "banshee", "config": cfg, "frames": org.frames() });
            Ok(ResolvedOrg {
                org: Box::new(org),
                echo,
                flush_latency_s: cfg.flush_latency_seconds(),
            })
        }
        OrgSpec::IdealMemory(cfg) => {
            cfg.validate()?;
            let frames = settings.stacked.capacity / cfg.page_size;
            let counts = profile_source(source, cfg.page_size)?;
            let manifest = top_k(&counts, frames as usize);
            let org = IdealMemory::new(cfg.page_size, &manifest, frames);
            let echo = json!({
                "name": "idealmem",
                "config": cfg,
                "frames": frames,
                "resident_pages": org.resident_pages(),
            });
            Ok(ResolvedOrg { org: Box::new(org), echo, flush_latency_s: 0.0 })
        }
        OrgSpec::Hma(cfg) => {
            cfg.validate()?;
            let frames = settings.stacked.capacity / cfg.page_size;
            let org = Hma::new(cfg.clone(), frames);
            let echo = json!({ "name": "hma", "config": cfg, "frames": frames });
            Ok(ResolvedOrg { org: Box::new(org), echo, flush_latency_s: 0.0 })
        }
        OrgSpec::MemCache(cfg) => {
            cfg.validate()?;
            let plan = resolve_memcache_plan(cfg, source, settings)?;
            build_memcache(&plan, settings)
        }
    }
}

fn resolve_memcache_plan(
    cfg: &super::MemCacheConfig,
    source: &TraceSource,
    settings: &SimulationSettings,
) -> Result<MemCachePlan> {
    let page_size = cfg.cache.page_size();
    let total_frames = settings.stacked.capacity / page_size;
    if total_frames == 0 {
        return Err(Error::config("stacked capacity below one frame"));
    }
    let counts = profile_source(source, page_size)?;
    match cfg.partition {
        MemCachePartition::MemBytes(mem_bytes) => {
            if mem_bytes % page_size != 0 {
                return Err(Error::config(format!(
                    "mem_bytes {mem_bytes} is not a whole number of {page_size}-byte frames"
                )));
            }
            let mem_frames = mem_bytes / page_size;
            if mem_frames > total_frames {
                return Err(Error::config(format!(
                    "mem_bytes {mem_bytes} exceeds stacked capacity {}",
                    settings.stacked.capacity
                )));
            }
            Ok(MemCachePlan {
                mem_frames,
                hot_pages: top_k(&counts, mem_frames as usize),
                cache: cfg.cache.clone(),
                total_frames,
                cache_ahf: None,
                demand_hits_only: cfg.demand_hits_only,
            })
        }
        MemCachePartition::Auto => {
            // First consider the whole stack as a cache to find how many
            // hits a frame is worth, then trade frames for hot pages.
            let mut cache = cfg.cache.build(settings.stacked.capacity, settings.seed)?;
            let stats = run_pass(cache.as_mut(), source, settings)?;
            let hits = if cfg.demand_hits_only {
                stats.measured_reads - stats.reads_off
            } else {
                stats.outcomes.stacked_total()
            };
            let plan = compute_memory_fraction(&counts, hits, total_frames)?;
            Ok(MemCachePlan {
                mem_frames: plan.mem_frames,
                hot_pages: plan.hot_pages,
                cache: cfg.cache.clone(),
                total_frames,
                cache_ahf: Some(plan.cache_ahf),
                demand_hits_only: cfg.demand_hits_only,
            })
        }
    }
}

fn build_memcache(plan: &MemCachePlan, settings: &SimulationSettings) -> Result<ResolvedOrg> {
    let org = MemCache::new(plan, settings.stacked.capacity, settings.seed)?;
    let mem_bytes = plan.mem_frames * plan.cache.page_size();
    let echo = json!({
        "name": "memcache",
        "cache": plan.cache,
        "partition": {
            "mem_frames": plan.mem_frames,
            "mem_fraction": plan.mem_fraction(),
            "total_frames": plan.total_frames,
            "mem_bytes": mem_bytes,
            "cache_bytes": settings.stacked.capacity - mem_bytes,
            "cache_ahf": plan.cache_ahf,
            "hot_pages": plan.hot_pages.len(),
            "demand_hits_only": plan.demand_hits_only,
        },
    });
    Ok(ResolvedOrg {
        org: Box::new(org),
        echo,
        flush_latency_s: plan.cache.flush_latency_seconds(),
    })
}

/// Statistics of one measurement window.
pub struct PassStats {
    pub measured_records: u64,
    pub measured_instructions: u64,
    pub outcomes: OutcomeCounts,
    pub measured_reads: u64,
    pub reads_off: u64,
    pub flush_count: u64,
    pub swap_count: u64,
    pub latency_sum_ns: f64,
    pub ledger: TrafficLedger,
    pub warmup_records: u64,
}

/// Replays the whole source through `org`, splitting warm-up from
/// measurement.
pub fn run_pass(
    org: &mut dyn Organization,
    source: &TraceSource,
    settings: &SimulationSettings,
) -> Result<PassStats> {
    let total = source.len()?;
    let warmup = settings.warmup_for(total);
    if total == 0 || warmup >= total {
        return Err(Error::domain(format!(
            "empty measurement window: {total} records, {warmup} of warm-up"
        )));
    }

    let mut warm_ledger = TrafficLedger::new();
    let mut ledger = TrafficLedger::new();
    let mut stacked_rows = RowBufferState::new(&settings.stacked);
    let mut offchip_rows = RowBufferState::new(&settings.offchip);

    let mut outcomes = OutcomeCounts::default();
    let mut measured_reads = 0u64;
    let mut reads_off = 0u64;
    let mut flush_count = 0u64;
    let mut swap_count = 0u64;
    let mut latency_sum_ns = 0.0f64;
    let mut boundary_icount = 0u64;
    let mut last_icount = 0u64;

    for (i, record) in source.stream()?.enumerate() {
        let record = record?;
        let index = i as u64;
        if record.addr >= settings.offchip.capacity {
            return Err(Error::Validation {
                index,
                reason: format!(
                    "address {:#x} outside the {}-byte physical space",
                    record.addr, settings.offchip.capacity
                ),
            });
        }
        let measured = index >= warmup;
        let active = if measured { &mut ledger } else { &mut warm_ledger };
        let mut ctx = super::StepContext::new(
            active,
            &settings.stacked,
            &settings.offchip,
            &mut stacked_rows,
            &mut offchip_rows,
        );
        let outcome = org.step(&record, &mut ctx)?;
        if measured {
            match outcome.served_by {
                ServedBy::StackedMemory => outcomes.stacked_memory += 1,
                ServedBy::StackedCacheHit => outcomes.stacked_cache_hit += 1,
                ServedBy::OffChip => outcomes.off_chip += 1,
            }
            if record.kind == AccessKind::Read {
                measured_reads += 1;
                if outcome.served_by == ServedBy::OffChip {
                    reads_off += 1;
                }
            }
            flush_count += u64::from(outcome.flags.flush);
            swap_count += u64::from(outcome.flags.swap_interval);
            latency_sum_ns += outcome.latency_ns;
        } else if index + 1 == warmup {
            boundary_icount = record.icount;
        }
        last_icount = record.icount;
    }

    let measured_records = total - warmup;
    assert_eq!(outcomes.total(), measured_records);
    // Conservation: each measured record is 64 bytes of data on one device.
    assert_eq!(
        ledger.stacked.data + ledger.off_chip.data,
        measured_records * BLOCK_BYTES,
        "demand data bytes out of balance"
    );

    let measured_instructions = last_icount - boundary_icount;
    if measured_instructions == 0 {
        return Err(Error::domain(
            "measurement window spans zero instructions",
        ));
    }
    Ok(PassStats {
        measured_records,
        measured_instructions,
        outcomes,
        measured_reads,
        reads_off,
        flush_count,
        swap_count,
        latency_sum_ns,
        ledger,
        warmup_records: warmup,
    })
}

/// Estimated run time of the no-stack baseline on this trace, for speedup
/// normalization.
pub fn baseline_seconds(source: &TraceSource, settings: &SimulationSettings) -> Result<f64> {
    let mut org = NoStacked;
    let stats = run_pass(&mut org, source, settings)?;
    let perf = PerfBreakdown::evaluate(
        stats.measured_instructions,
        &stats.ledger,
        &settings.stacked,
        &settings.offchip,
        &settings.core,
        0,
        0.0,
        stats.latency_sum_ns,
    )?;
    Ok(perf.total)
}

/// Runs one organization over the trace and reports everything.
pub fn simulate(
    spec: &OrgSpec,
    source: &TraceSource,
    settings: &SimulationSettings,
) -> Result<RunReport> {
    simulate_with_baseline(spec, source, settings, None)
}

/// Like [`simulate`], reusing a precomputed baseline time when comparing
/// several organizations over the same trace.
pub fn simulate_with_baseline(
    spec: &OrgSpec,
    source: &TraceSource,
    settings: &SimulationSettings,
    baseline: Option<f64>,
) -> Result<RunReport> {
    settings.validate()?;
    let resolved = resolve(spec, source, settings)?;
    finish_run(resolved, spec.name(), source, settings, baseline)
}

/// Runs an explicitly planned hybrid (used by partition sweeps). The
/// baseline time is computed once and cached in `baseline`.
pub fn simulate_plan(
    plan: &MemCachePlan,
    source: &TraceSource,
    settings: &SimulationSettings,
    baseline: &mut Option<f64>,
) -> Result<RunReport> {
    settings.validate()?;
    if baseline.is_none() {
        *baseline = Some(baseline_seconds(source, settings)?);
    }
    let resolved = build_memcache(plan, settings)?;
    finish_run(resolved, "memcache", source, settings, *baseline)
}

fn finish_run(
    mut resolved: ResolvedOrg,
    name: &str,
    source: &TraceSource,
    settings: &SimulationSettings,
    baseline: Option<f64>,
) -> Result<RunReport> {
    let stats = run_pass(resolved.org.as_mut(), source, settings)?;
    let perf = PerfBreakdown::evaluate(
        stats.measured_instructions,
        &stats.ledger,
        &settings.stacked,
        &settings.offchip,
        &settings.core,
        stats.flush_count,
        resolved.flush_latency_s,
        stats.latency_sum_ns,
    )?;
    let baseline_s = match baseline {
        Some(b) => b,
        None if name == "nostacked" => perf.total,
        None => baseline_seconds(source, settings)?,
    };
    let config_echo = json!({
        "organization": resolved.echo,
        "trace": source.echo(),
        "warmup_records": stats.warmup_records,
        "seed": settings.seed,
        "stacked_dram": settings.stacked,
        "offchip_dram": settings.offchip,
        "core": settings.core,
    });
    Ok(RunReport {
        organization: name.to_string(),
        measured_records: stats.measured_records,
        measured_instructions: stats.measured_instructions,
        outcomes: stats.outcomes,
        measured_reads: stats.measured_reads,
        reads_served_off_chip: stats.reads_off,
        mpki: mpki(stats.reads_off, stats.measured_instructions)?,
        ledger: stats.ledger,
        flush_count: stats.flush_count,
        swap_interval_count: stats.swap_count,
        latency_sum_ns: stats.latency_sum_ns,
        estimated_time_seconds: perf.total,
        speedup_vs_baseline: speedup(baseline_s, perf.total),
        config_echo,
    })
}
