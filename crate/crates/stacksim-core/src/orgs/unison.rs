//! Page-based set-associative cache with tags co-located in the stack,
//! perfect way prediction, LRU replacement, and footprint-sized fills.

use crate::dram::{Device, TrafficCategory};
use crate::error::Result;
use crate::trace::{AccessKind, TraceRecord};

use super::{Organization, ServedBy, ServiceOutcome, StepContext, UnisonConfig, BLOCK_BYTES};

/// Tag or LRU touch, before rounding to the minimum transfer.
const META_TOUCH_BYTES: u64 = 16;

#[derive(Debug, Clone, Copy, Default)]
struct Way {
    page: u64,
    valid: bool,
    dirty: u128,
    last_used: u64,
}

pub struct UnisonCache {
    cfg: UnisonConfig,
    ways: Vec<Way>,
    n_sets: u64,
    tick: u64,
}

impl UnisonCache {
    pub fn new(cfg: UnisonConfig, capacity: u64) -> Self {
        let frames = capacity / cfg.page_size;
        let n_sets = frames / u64::from(cfg.associativity);
        let ways = vec![Way::default(); (n_sets * u64::from(cfg.associativity)) as usize];
        Self { cfg, ways, n_sets, tick: 0 }
    }

    pub fn frames(&self) -> u64 {
        self.ways.len() as u64
    }

    fn set_range(&self, set: u64) -> std::ops::Range<usize> {
        let assoc = self.cfg.associativity as usize;
        let base = set as usize * assoc;
        base..base + assoc
    }

    /// Stacked address of a way's frame, for row-locality modeling.
    fn way_addr(&self, way_index: usize) -> u64 {
        way_index as u64 * self.cfg.page_size
    }

    fn lookup(&self, set: u64, page: u64) -> Option<usize> {
        self.set_range(set)
            .find(|&i| self.ways[i].valid && self.ways[i].page == page)
    }

    /// First invalid way, else the least recently used one.
    fn victim(&self, set: u64) -> usize {
        let range = self.set_range(set);
        if let Some(free) = range.clone().find(|&i| !self.ways[i].valid) {
            return free;
        }
        range
            .min_by_key(|&i| self.ways[i].last_used)
            .expect("associativity >= 1")
    }

    fn off_chip_only(
        &mut self,
        record: &TraceRecord,
        ctx: &mut StepContext,
    ) -> Result<ServiceOutcome> {
        ctx.xfer(Device::OffChip, TrafficCategory::Data, BLOCK_BYTES)?;
        let latency = ctx.access(Device::OffChip, record.addr, BLOCK_BYTES);
        Ok(ServiceOutcome::new(ServedBy::OffChip, latency))
    }

    /// Evicts the victim (booking its dirty blocks as off-chip replacement
    /// traffic) and pulls the footprint of `page` into the frame.
    /// `demand_blocks` of the footprint arrive with the demand itself and
    /// are not refetched.
    fn fill(
        &mut self,
        set: u64,
        page: u64,
        demand_blocks: u64,
        ctx: &mut StepContext,
    ) -> Result<usize> {
        let victim = self.victim(set);
        let way = self.ways[victim];
        if way.valid && way.dirty != 0 {
            let dirty_blocks = u64::from(way.dirty.count_ones());
            ctx.xfer(
                Device::OffChip,
                TrafficCategory::Replacement,
                dirty_blocks * BLOCK_BYTES,
            )?;
        }
        let fetched = self.cfg.avg_footprint_blocks - demand_blocks;
        if fetched > 0 {
            ctx.xfer(Device::OffChip, TrafficCategory::Replacement, fetched * BLOCK_BYTES)?;
            ctx.xfer(Device::Stacked, TrafficCategory::Replacement, fetched * BLOCK_BYTES)?;
        }
        // Tag and LRU state written with the insertion.
        ctx.xfer(Device::Stacked, TrafficCategory::Metadata, META_TOUCH_BYTES)?;
        self.tick += 1;
        self.ways[victim] = Way {
            page,
            valid: true,
            dirty: 0,
            last_used: self.tick,
        };
        Ok(victim)
    }
}

impl Organization for UnisonCache {
    fn step(&mut self, record: &TraceRecord, ctx: &mut StepContext) -> Result<ServiceOutcome> {
        if self.n_sets == 0 {
            return self.off_chip_only(record, ctx);
        }
        let page = record.addr / self.cfg.page_size;
        let block_bit = 1u128 << ((record.addr % self.cfg.page_size) / BLOCK_BYTES);
        let set = page % self.n_sets;
        let hit = self.lookup(set, page);

        match (record.kind, hit) {
            (AccessKind::Read, Some(way_index)) => {
                // Overlapped tag+data read, then the LRU update write.
                ctx.xfer(Device::Stacked, TrafficCategory::Data, BLOCK_BYTES)?;
                ctx.xfer(Device::Stacked, TrafficCategory::Metadata, META_TOUCH_BYTES)?;
                ctx.xfer(Device::Stacked, TrafficCategory::Metadata, META_TOUCH_BYTES)?;
                self.tick += 1;
                self.ways[way_index].last_used = self.tick;
                let addr = self.way_addr(way_index) + record.addr % self.cfg.page_size;
                let bytes = BLOCK_BYTES + ctx.rounded(Device::Stacked, META_TOUCH_BYTES);
                let latency = ctx.access(Device::Stacked, addr, bytes);
                Ok(ServiceOutcome::new(ServedBy::StackedCacheHit, latency))
            }
            (AccessKind::Writeback, Some(way_index)) => {
                ctx.xfer(Device::Stacked, TrafficCategory::Data, BLOCK_BYTES)?;
                ctx.xfer(Device::Stacked, TrafficCategory::Metadata, META_TOUCH_BYTES)?;
                ctx.xfer(Device::Stacked, TrafficCategory::Metadata, META_TOUCH_BYTES)?;
                self.tick += 1;
                let way = &mut self.ways[way_index];
                way.last_used = self.tick;
                way.dirty |= block_bit;
                let addr = self.way_addr(way_index) + record.addr % self.cfg.page_size;
                let bytes = BLOCK_BYTES + ctx.rounded(Device::Stacked, META_TOUCH_BYTES);
                let latency = ctx.access(Device::Stacked, addr, bytes);
                Ok(ServiceOutcome::new(ServedBy::StackedCacheHit, latency))
            }
            (AccessKind::Read, None) => {
                // The overlapped probe reads a tag and a wasted way of data.
                ctx.xfer(Device::Stacked, TrafficCategory::Metadata, META_TOUCH_BYTES)?;
                ctx.xfer(Device::Stacked, TrafficCategory::SpecData, BLOCK_BYTES)?;
                ctx.xfer(Device::OffChip, TrafficCategory::Data, BLOCK_BYTES)?;
                // The demand block is inserted along with the footprint.
                ctx.xfer(Device::Stacked, TrafficCategory::Replacement, BLOCK_BYTES)?;
                self.fill(set, page, 1, ctx)?;
                let probe_bytes = BLOCK_BYTES + ctx.rounded(Device::Stacked, META_TOUCH_BYTES);
                let latency = ctx.access(Device::Stacked, self.way_addr(self.set_range(set).start), probe_bytes)
                    + ctx.access(Device::OffChip, record.addr, BLOCK_BYTES);
                let mut out = ServiceOutcome::new(ServedBy::OffChip, latency);
                out.flags.replacement = true;
                Ok(out)
            }
            (AccessKind::Writeback, None) => {
                // Write-allocate: the evicted block itself provides one
                // footprint block; the rest are fetched around it.
                ctx.xfer(Device::Stacked, TrafficCategory::Metadata, META_TOUCH_BYTES)?;
                let victim = self.fill(set, page, 1, ctx)?;
                ctx.xfer(Device::Stacked, TrafficCategory::Data, BLOCK_BYTES)?;
                self.ways[victim].dirty |= block_bit;
                let probe = ctx.rounded(Device::Stacked, META_TOUCH_BYTES);
                let addr = self.way_addr(victim) + record.addr % self.cfg.page_size;
                let latency = ctx.access(Device::Stacked, self.way_addr(self.set_range(set).start), probe)
                    + ctx.access(Device::Stacked, addr, BLOCK_BYTES);
                let mut out = ServiceOutcome::new(ServedBy::StackedCacheHit, latency);
                out.flags.replacement = true;
                Ok(out)
            }
        }
    }
}
