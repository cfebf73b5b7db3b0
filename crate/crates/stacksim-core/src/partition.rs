//! Memory/cache capacity partitioning: decide how many stacked-DRAM frames
//! can be turned into plain memory before the hybrid falls behind a
//! full-cache design, using the cache's average hits per frame as the bar.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orgs::run::{simulate_plan, SimulationSettings};
use crate::orgs::{CacheConfig, MemCachePlan};
use crate::metrics::RunReport;
use crate::profiler::{profile_source, top_k, HotPageManifest, PageAccessCounts};
use crate::trace::TraceSource;

/// Output of the memory-fraction computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionPlan {
    /// Frames converted to memory.
    pub mem_frames: u64,
    /// `mem_frames / total_frames`.
    pub mem_fraction: f64,
    /// The full-cache average hits per frame the loop compared against.
    pub cache_ahf: f64,
    /// The pages allocated to the memory frames, hottest first.
    pub hot_pages: HotPageManifest,
    pub total_frames: u64,
}

/// Turns frames into memory one hot page at a time.
///
/// With `cache_ahf = total_cache_hits / total_frames`, the loop allocates
/// the hottest unallocated page and keeps going while the accesses absorbed
/// so far stay at or above `mem_frames * cache_ahf`. The loop re-checks
/// after each allocation, so the final frame may individually fall below
/// the bar. Two guards bound the printed recurrence: it stops when every
/// page is allocated or when every frame is memory (reachable e.g. with
/// zero cache hits).
pub fn compute_memory_fraction(
    counts: &PageAccessCounts,
    total_cache_hits: u64,
    total_frames: u64,
) -> Result<PartitionPlan> {
    if total_frames == 0 {
        return Err(Error::domain("total_frames must be >= 1"));
    }
    let cache_ahf = total_cache_hits as f64 / total_frames as f64;
    let sorted = counts.sorted_desc();

    let mut mem_frames = 0u64;
    let mut total_accesses = 0u64;
    while total_accesses as f64 >= mem_frames as f64 * cache_ahf {
        if mem_frames == total_frames || mem_frames as usize == sorted.len() {
            break;
        }
        let (_page, count) = sorted[mem_frames as usize];
        mem_frames += 1;
        total_accesses += count;
    }

    let hot_pages = HotPageManifest {
        pages: sorted
            .iter()
            .take(mem_frames as usize)
            .map(|&(page, _)| page)
            .collect(),
        source_records: counts.total_accesses(),
    };
    Ok(PartitionPlan {
        mem_frames,
        mem_fraction: mem_frames as f64 / total_frames as f64,
        cache_ahf,
        hot_pages,
        total_frames,
    })
}

/// One point of a partition sweep: bytes devoted to memory and to cache.
pub type PartitionPoint = (u64, u64);

/// Runs one hybrid simulation per `(mem_bytes, cache_bytes)` split, filling
/// the memory portion with the profile's hottest pages. Each split must sum
/// to the stacked capacity. The endpoints `(0, C)` and `(C, 0)` reproduce
/// the bare cache and the statically-filled memory, respectively.
pub fn partition_sweep(
    source: &TraceSource,
    cache: &CacheConfig,
    partitions: &[PartitionPoint],
    settings: &SimulationSettings,
) -> Result<Vec<RunReport>> {
    let page_size = cache.page_size();
    let capacity = settings.stacked.capacity;
    for &(mem, cache_bytes) in partitions {
        if mem + cache_bytes != capacity {
            return Err(Error::config(format!(
                "partition {mem}+{cache_bytes} does not sum to stacked capacity {capacity}"
            )));
        }
        if mem % page_size != 0 {
            return Err(Error::config(format!(
                "memory bytes {mem} not a whole number of {page_size}-byte frames"
            )));
        }
    }
    let counts = profile_source(source, page_size)?;
    let total_frames = capacity / page_size;
    let mut reports = Vec::with_capacity(partitions.len());
    let mut baseline = None;
    for &(mem_bytes, _) in partitions {
        let mem_frames = mem_bytes / page_size;
        let plan = MemCachePlan {
            mem_frames,
            hot_pages: top_k(&counts, mem_frames as usize),
            cache: cache.clone(),
            total_frames,
            cache_ahf: None,
            demand_hits_only: false,
        };
        let report = simulate_plan(&plan, source, settings, &mut baseline)?;
        reports.push(report);
    }
    Ok(reports)
}
