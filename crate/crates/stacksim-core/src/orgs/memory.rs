//! Stack-as-memory organizations: a static one oracularly filled with the
//! trace's hottest pages, and a periodic one that re-ranks and swaps pages
//! every interval.

use std::collections::HashMap;

use crate::dram::{Device, TrafficCategory};
use crate::error::Result;
use crate::profiler::HotPageManifest;
use crate::trace::TraceRecord;

use super::{
    HmaConfig, HmaMode, Organization, ServedBy, ServiceOutcome, StepContext, BLOCK_BYTES,
};

/// Die-stacked memory statically filled with a hot-page manifest. No tags,
/// no metadata, no replacement: a page either lives in the stack or it
/// does not.
pub struct IdealMemory {
    page_size: u64,
    /// Resident page -> stacked frame index.
    frames: HashMap<u64, u64>,
}

impl IdealMemory {
    /// Fills frames in manifest order (hottest page in frame 0).
    pub fn new(page_size: u64, manifest: &HotPageManifest, frame_budget: u64) -> Self {
        let frames = manifest
            .pages
            .iter()
            .take(frame_budget as usize)
            .enumerate()
            .map(|(frame, &page)| (page, frame as u64))
            .collect();
        Self { page_size, frames }
    }

    pub fn resident_pages(&self) -> usize {
        self.frames.len()
    }
}

impl Organization for IdealMemory {
    fn step(&mut self, record: &TraceRecord, ctx: &mut StepContext) -> Result<ServiceOutcome> {
        let page = record.addr / self.page_size;
        let offset = record.addr % self.page_size;
        if let Some(&frame) = self.frames.get(&page) {
            ctx.xfer(Device::Stacked, TrafficCategory::Data, BLOCK_BYTES)?;
            let latency = ctx.access(Device::Stacked, frame * self.page_size + offset, BLOCK_BYTES);
            Ok(ServiceOutcome::new(ServedBy::StackedMemory, latency))
        } else {
            ctx.xfer(Device::OffChip, TrafficCategory::Data, BLOCK_BYTES)?;
            let latency = ctx.access(Device::OffChip, record.addr, BLOCK_BYTES);
            Ok(ServiceOutcome::new(ServedBy::OffChip, latency))
        }
    }
}

/// Whole stack as memory with periodic software re-ranking: every
/// `interval_misses` records the pages of the elapsed interval are sorted
/// by access count and the top ones swapped into the stack.
pub struct Hma {
    cfg: HmaConfig,
    frame_budget: u64,
    resident: HashMap<u64, u64>,
    interval_counts: HashMap<u64, u64>,
    records_in_interval: u64,
    intervals_completed: u64,
}

impl Hma {
    pub fn new(cfg: HmaConfig, frame_budget: u64) -> Self {
        Self {
            cfg,
            frame_budget,
            resident: HashMap::new(),
            interval_counts: HashMap::new(),
            records_in_interval: 0,
            intervals_completed: 0,
        }
    }

    pub fn intervals_completed(&self) -> u64 {
        self.intervals_completed
    }

    /// Re-ranks the elapsed interval and installs the new resident set.
    /// In accounted mode every page moved in either direction costs a
    /// page-size read on its source device and a page-size write on its
    /// destination (16 KB per swapped pair in total).
    fn swap(&mut self, ctx: &mut StepContext) -> Result<()> {
        let mut ranked: Vec<(u64, u64)> = self
            .interval_counts
            .iter()
            .map(|(&p, &c)| (p, c))
            .collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked.truncate(self.frame_budget as usize);
        let new_resident: HashMap<u64, u64> = ranked
            .into_iter()
            .enumerate()
            .map(|(frame, (page, _))| (page, frame as u64))
            .collect();

        if self.cfg.mode == HmaMode::Accounted {
            let page_bytes = self.cfg.page_size;
            for page in new_resident.keys() {
                if !self.resident.contains_key(page) {
                    ctx.xfer(Device::OffChip, TrafficCategory::Replacement, page_bytes)?;
                    ctx.xfer(Device::Stacked, TrafficCategory::Replacement, page_bytes)?;
                }
            }
            for page in self.resident.keys() {
                if !new_resident.contains_key(page) {
                    ctx.xfer(Device::Stacked, TrafficCategory::Replacement, page_bytes)?;
                    ctx.xfer(Device::OffChip, TrafficCategory::Replacement, page_bytes)?;
                }
            }
        }
        self.resident = new_resident;
        self.interval_counts.clear();
        self.intervals_completed += 1;
        Ok(())
    }
}

impl Organization for Hma {
    fn step(&mut self, record: &TraceRecord, ctx: &mut StepContext) -> Result<ServiceOutcome> {
        let page = record.addr / self.cfg.page_size;
        let offset = record.addr % self.cfg.page_size;
        let mut outcome = if let Some(&frame) = self.resident.get(&page) {
            ctx.xfer(Device::Stacked, TrafficCategory::Data, BLOCK_BYTES)?;
            let latency =
                ctx.access(Device::Stacked, frame * self.cfg.page_size + offset, BLOCK_BYTES);
            ServiceOutcome::new(ServedBy::StackedMemory, latency)
        } else {
            ctx.xfer(Device::OffChip, TrafficCategory::Data, BLOCK_BYTES)?;
            let latency = ctx.access(Device::OffChip, record.addr, BLOCK_BYTES);
            ServiceOutcome::new(ServedBy::OffChip, latency)
        };

        *self.interval_counts.entry(page).or_insert(0) += 1;
        self.records_in_interval += 1;
        if self.records_in_interval == self.cfg.interval_misses {
            self.swap(ctx)?;
            self.records_in_interval = 0;
            outcome.flags.swap_interval = true;
        }
        Ok(outcome)
    }
}
