//! Die-stacked DRAM organizations.
//!
//! An organization consumes one LLSC miss or writeback at a time and
//! decides where it is served, charging every byte it moves to the run's
//! traffic ledger. Seven organizations are provided: a no-stack baseline,
//! an infinite stack, three cache designs (block-based direct-mapped with
//! adjacent tags, page-based set-associative with footprint fills, and
//! page-based with page-table tags plus lazy replacement), two memory
//! designs (statically filled with the hottest pages, and periodically
//! re-ranked), and the hybrid that splits the stack into a memory portion
//! for hot pages and a cache portion for everything else.
//!
//! Byte accounting follows one conservation rule throughout: every record
//! contributes exactly 64 bytes of `Data` on exactly one device; all other
//! traffic is `Metadata`, `SpecData`, or `Replacement`.

pub mod alloy;
pub mod banshee;
pub mod memcache;
pub mod memory;
pub mod run;
pub mod simple;
pub mod unison;

use serde::{Deserialize, Serialize};

use crate::dram::{
    access_latency, Device, DramDeviceConfig, RowBufferState, TrafficCategory, TrafficLedger,
};
use crate::error::{Error, Result};
use crate::profiler::HotPageManifest;
use crate::trace::TraceRecord;

pub use alloy::AlloyCache;
pub use banshee::BansheeCache;
pub use memcache::MemCache;
pub use memory::{Hma, IdealMemory};
pub use simple::{Infinite, NoStacked};
pub use unison::UnisonCache;

/// Bytes of one cache block / demand access.
pub const BLOCK_BYTES: u64 = crate::trace::BLOCK_BYTES;

/// Where a record was served from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServedBy {
    /// The memory-managed part of the stack (no tags involved).
    StackedMemory,
    /// The cache-managed part of the stack.
    StackedCacheHit,
    OffChip,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeFlags {
    /// The step drained a tag buffer into the page table.
    pub flush: bool,
    /// The step replaced a block or page in the stack.
    pub replacement: bool,
    /// The step ended a periodic re-ranking interval.
    pub swap_interval: bool,
}

/// Result of serving one trace record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceOutcome {
    pub served_by: ServedBy,
    pub latency_ns: f64,
    pub flags: OutcomeFlags,
}

impl ServiceOutcome {
    fn new(served_by: ServedBy, latency_ns: f64) -> Self {
        Self {
            served_by,
            latency_ns,
            flags: OutcomeFlags::default(),
        }
    }
}

/// Per-step view of the run: the active ledger plus the two devices'
/// row-buffer state. Owned by the runner so that organizations sharing a
/// device (e.g. a hybrid and its inner cache) also share its state.
pub struct StepContext<'a> {
    pub ledger: &'a mut TrafficLedger,
    stacked_cfg: &'a DramDeviceConfig,
    offchip_cfg: &'a DramDeviceConfig,
    stacked_rows: &'a mut RowBufferState,
    offchip_rows: &'a mut RowBufferState,
}

impl<'a> StepContext<'a> {
    pub fn new(
        ledger: &'a mut TrafficLedger,
        stacked_cfg: &'a DramDeviceConfig,
        offchip_cfg: &'a DramDeviceConfig,
        stacked_rows: &'a mut RowBufferState,
        offchip_rows: &'a mut RowBufferState,
    ) -> Self {
        Self {
            ledger,
            stacked_cfg,
            offchip_cfg,
            stacked_rows,
            offchip_rows,
        }
    }

    fn device_cfg(&self, device: Device) -> &DramDeviceConfig {
        match device {
            Device::Stacked => self.stacked_cfg,
            Device::OffChip => self.offchip_cfg,
        }
    }

    /// Books a transfer, rounded up to the device's minimum transfer size;
    /// returns the recorded bytes.
    pub fn xfer(&mut self, device: Device, category: TrafficCategory, bytes: u64) -> Result<u64> {
        let min = self.device_cfg(device).min_transfer;
        self.ledger.transfer(device, category, bytes, min)
    }

    /// Rounds `bytes` up to the device's minimum transfer size without
    /// recording anything.
    pub fn rounded(&self, device: Device, bytes: u64) -> u64 {
        let granule = u64::from(self.device_cfg(device).min_transfer);
        bytes.div_ceil(granule) * granule
    }

    /// Latency of a demand-path access at `addr`, updating the device's
    /// open-row state. Background traffic (fills, metadata, victims) is
    /// accounted in bytes only and does not go through here.
    pub fn access(&mut self, device: Device, addr: u64, bytes: u64) -> f64 {
        let (cfg, rows) = match device {
            Device::Stacked => (self.stacked_cfg, &mut *self.stacked_rows),
            Device::OffChip => (self.offchip_cfg, &mut *self.offchip_rows),
        };
        let row_hit = rows.touch(addr, cfg);
        access_latency(row_hit, bytes, cfg)
    }
}

/// One LLSC-level event in, a service outcome plus accounting out.
pub trait Organization {
    fn step(&mut self, record: &TraceRecord, ctx: &mut StepContext) -> Result<ServiceOutcome>;
}

/// Block-based direct-mapped cache storing each tag adjacent to its data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlloyConfig {
    pub block_size: u64,
    /// Tag-and-data unit: block plus adjacent tag bytes.
    pub tad_size: u64,
}

impl Default for AlloyConfig {
    fn default() -> Self {
        Self {
            block_size: 64,
            tad_size: 72,
        }
    }
}

impl AlloyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_size != BLOCK_BYTES {
            return Err(Error::config(format!(
                "only {BLOCK_BYTES}-byte blocks are supported"
            )));
        }
        if self.tad_size <= self.block_size {
            return Err(Error::config("tad_size must exceed block_size"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplacementPolicy {
    Lru,
}

/// Page-based set-associative cache with co-located tags, per-access LRU
/// updates, and footprint-sized fills.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnisonConfig {
    pub page_size: u64,
    pub associativity: u32,
    /// Blocks transferred per fill, standing in for a perfect footprint
    /// predictor fed by offline profiling.
    pub avg_footprint_blocks: u64,
    pub replacement: ReplacementPolicy,
}

impl Default for UnisonConfig {
    fn default() -> Self {
        Self {
            page_size: 4096,
            associativity: 4,
            avg_footprint_blocks: 64,
            replacement: ReplacementPolicy::Lru,
        }
    }
}

impl UnisonConfig {
    pub fn validate(&self) -> Result<()> {
        validate_page(self.page_size)?;
        if self.associativity == 0 {
            return Err(Error::config("associativity must be positive"));
        }
        let max = self.page_size / BLOCK_BYTES;
        if self.avg_footprint_blocks == 0 || self.avg_footprint_blocks > max {
            return Err(Error::config(format!(
                "avg_footprint_blocks must be in 1..={max}"
            )));
        }
        Ok(())
    }
}

/// Page-based set-associative cache that tracks tags through the page
/// table, samples frequency counters on misses, and replaces pages lazily.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BansheeConfig {
    pub page_size: u64,
    pub associativity: u32,
    pub tag_buffer_entries: u32,
    pub tag_buffer_assoc: u32,
    /// Buffer occupancy share beyond which a software flush fires.
    pub flush_threshold: f64,
    pub flush_latency_us: f64,
    /// Probability that a miss updates the set's frequency counters.
    pub sampling_coefficient: f64,
    pub counter_bits: u32,
    /// A candidate replaces the coldest resident page only when its counter
    /// exceeds the victim's by more than this margin.
    pub replace_margin: u32,
    pub avg_footprint_blocks: u64,
}

impl Default for BansheeConfig {
    fn default() -> Self {
        Self {
            page_size: 4096,
            associativity: 4,
            tag_buffer_entries: 1024,
            tag_buffer_assoc: 8,
            flush_threshold: 0.7,
            flush_latency_us: 25.0,
            sampling_coefficient: 0.1,
            counter_bits: 5,
            replace_margin: 2,
            avg_footprint_blocks: 64,
        }
    }
}

impl BansheeConfig {
    pub fn validate(&self) -> Result<()> {
        validate_page(self.page_size)?;
        if self.associativity == 0 || self.tag_buffer_entries == 0 || self.tag_buffer_assoc == 0 {
            return Err(Error::config(
                "associativity and tag buffer geometry must be positive",
            ));
        }
        if !(self.flush_threshold > 0.0 && self.flush_threshold <= 1.0) {
            return Err(Error::config("flush_threshold must be in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.sampling_coefficient) {
            return Err(Error::config("sampling_coefficient must be in [0, 1]"));
        }
        if self.counter_bits == 0 || self.counter_bits > 8 {
            return Err(Error::config("counter_bits must be in 1..=8"));
        }
        if !(self.flush_latency_us >= 0.0) {
            return Err(Error::config("flush_latency_us must be non-negative"));
        }
        let max = self.page_size / BLOCK_BYTES;
        if self.avg_footprint_blocks == 0 || self.avg_footprint_blocks > max {
            return Err(Error::config(format!(
                "avg_footprint_blocks must be in 1..={max}"
            )));
        }
        Ok(())
    }

    pub fn flush_latency_seconds(&self) -> f64 {
        self.flush_latency_us * 1e-6
    }
}

fn validate_page(page_size: u64) -> Result<()> {
    // Dirty blocks are tracked in a 128-bit mask, so at most 128 blocks.
    if !page_size.is_power_of_two() || page_size < BLOCK_BYTES || page_size > 128 * BLOCK_BYTES {
        return Err(Error::config(format!(
            "page_size {page_size} must be a power of two in {}..={}",
            BLOCK_BYTES,
            128 * BLOCK_BYTES
        )));
    }
    Ok(())
}

/// The cache designs usable standalone or as the hybrid's cache portion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum CacheConfig {
    Alloy(AlloyConfig),
    Unison(UnisonConfig),
    Banshee(BansheeConfig),
}

impl CacheConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            CacheConfig::Alloy(c) => c.validate(),
            CacheConfig::Unison(c) => c.validate(),
            CacheConfig::Banshee(c) => c.validate(),
        }
    }

    /// Frame granularity the stack is partitioned at. Block-based caches
    /// still sit on 4 KB frames.
    pub fn page_size(&self) -> u64 {
        match self {
            CacheConfig::Alloy(_) => 4096,
            CacheConfig::Unison(c) => c.page_size,
            CacheConfig::Banshee(c) => c.page_size,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CacheConfig::Alloy(_) => "alloy",
            CacheConfig::Unison(_) => "unison",
            CacheConfig::Banshee(_) => "banshee",
        }
    }

    pub fn flush_latency_seconds(&self) -> f64 {
        match self {
            CacheConfig::Banshee(c) => c.flush_latency_seconds(),
            _ => 0.0,
        }
    }

    /// Builds the cache state machine over `capacity` bytes of the stack.
    /// Zero-capacity caches are valid degenerate states (every access
    /// forwards off-chip), used by hybrids that devote all frames to memory.
    pub fn build(&self, capacity: u64, seed: u64) -> Result<Box<dyn Organization>> {
        self.validate()?;
        Ok(match self {
            CacheConfig::Alloy(c) => Box::new(AlloyCache::new(c.clone(), capacity)),
            CacheConfig::Unison(c) => Box::new(UnisonCache::new(c.clone(), capacity)),
            CacheConfig::Banshee(c) => Box::new(BansheeCache::new(c.clone(), capacity, seed)),
        })
    }
}

/// How the whole-stack-as-memory organization re-ranks pages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HmaMode {
    /// Page swaps are free: no bytes, no stall.
    Idealized,
    /// Each swapped pair moves four pages' worth of bytes, split across
    /// both devices as replacement traffic.
    Accounted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HmaConfig {
    pub page_size: u64,
    /// Records between re-rankings.
    pub interval_misses: u64,
    pub mode: HmaMode,
}

impl Default for HmaConfig {
    fn default() -> Self {
        Self {
            page_size: 4096,
            interval_misses: 100_000_000,
            mode: HmaMode::Idealized,
        }
    }
}

impl HmaConfig {
    pub fn validate(&self) -> Result<()> {
        validate_page(self.page_size)?;
        if self.interval_misses == 0 {
            return Err(Error::config("interval_misses must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdealMemoryConfig {
    pub page_size: u64,
}

impl Default for IdealMemoryConfig {
    fn default() -> Self {
        Self { page_size: 4096 }
    }
}

impl IdealMemoryConfig {
    pub fn validate(&self) -> Result<()> {
        validate_page(self.page_size)
    }
}

/// How the hybrid's memory/cache split is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemCachePartition {
    /// Run the memory-fraction computation against a full-cache simulation
    /// of the same trace.
    Auto,
    /// Fixed bytes devoted to memory.
    MemBytes(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemCacheConfig {
    pub partition: MemCachePartition,
    pub cache: CacheConfig,
    /// Count only demand hits (not writeback hits) as the full-cache hits
    /// fed to the partitioning computation.
    #[serde(default)]
    pub demand_hits_only: bool,
}

impl MemCacheConfig {
    pub fn validate(&self) -> Result<()> {
        self.cache.validate()
    }
}

/// A fully resolved hybrid: how many frames are memory, which pages live
/// there, and the cache design over the remaining frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemCachePlan {
    pub mem_frames: u64,
    pub hot_pages: HotPageManifest,
    pub cache: CacheConfig,
    pub total_frames: u64,
    /// Average hits per frame of the full-cache run, when auto-partitioned.
    pub cache_ahf: Option<f64>,
    pub demand_hits_only: bool,
}

impl MemCachePlan {
    pub fn validate(&self) -> Result<()> {
        if self.mem_frames > self.total_frames {
            return Err(Error::config(format!(
                "mem_frames {} exceeds total frames {}",
                self.mem_frames, self.total_frames
            )));
        }
        if self.hot_pages.len() as u64 > self.mem_frames {
            return Err(Error::config(
                "more hot pages than memory frames to hold them",
            ));
        }
        let mut distinct: Vec<u64> = self.hot_pages.pages.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() != self.hot_pages.len() {
            return Err(Error::config("hot page list contains duplicates"));
        }
        self.cache.validate()
    }

    pub fn mem_fraction(&self) -> f64 {
        self.mem_frames as f64 / self.total_frames as f64
    }
}

/// User-facing organization selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum OrgSpec {
    #[serde(rename = "nostacked")]
    NoStacked,
    Infinite,
    Alloy(AlloyConfig),
    Unison(UnisonConfig),
    Banshee(BansheeConfig),
    #[serde(rename = "idealmem")]
    IdealMemory(IdealMemoryConfig),
    Hma(HmaConfig),
    #[serde(rename = "memcache")]
    MemCache(MemCacheConfig),
}

impl OrgSpec {
    pub fn name(&self) -> &'static str {
        match self {
            OrgSpec::NoStacked => "nostacked",
            OrgSpec::Infinite => "infinite",
            OrgSpec::Alloy(_) => "alloy",
            OrgSpec::Unison(_) => "unison",
            OrgSpec::Banshee(_) => "banshee",
            OrgSpec::IdealMemory(_) => "idealmem",
            OrgSpec::Hma(_) => "hma",
            OrgSpec::MemCache(_) => "memcache",
        }
    }
}
