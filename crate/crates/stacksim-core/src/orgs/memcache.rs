//! The hybrid organization: part of the stack is software-visible memory
//! holding profiled hot pages, the rest is a hardware cache for everything
//! else. Requests route by page: hot pages are served tag-free from the
//! memory portion, all other pages fall through to the cache portion.

use std::collections::HashMap;

use crate::dram::{Device, TrafficCategory};
use crate::error::Result;
use crate::trace::TraceRecord;

use super::{MemCachePlan, Organization, ServedBy, ServiceOutcome, StepContext, BLOCK_BYTES};

pub struct MemCache {
    page_size: u64,
    /// Hot page -> memory-portion frame index.
    hot_frames: HashMap<u64, u64>,
    cache: Box<dyn Organization>,
}

impl MemCache {
    /// Builds the hybrid from a resolved plan over `capacity` bytes of
    /// stack. The hot pages are installed up front (the warm-up fill); the
    /// cache portion gets whatever capacity the memory frames leave over.
    pub fn new(plan: &MemCachePlan, capacity: u64, seed: u64) -> Result<Self> {
        plan.validate()?;
        let page_size = plan.cache.page_size();
        let mem_bytes = plan.mem_frames * page_size;
        let cache = plan.cache.build(capacity - mem_bytes, seed)?;
        let hot_frames = plan
            .hot_pages
            .pages
            .iter()
            .enumerate()
            .map(|(frame, &page)| (page, frame as u64))
            .collect();
        Ok(Self {
            page_size,
            hot_frames,
            cache,
        })
    }

    pub fn hot_pages(&self) -> usize {
        self.hot_frames.len()
    }
}

impl Organization for MemCache {
    fn step(&mut self, record: &TraceRecord, ctx: &mut StepContext) -> Result<ServiceOutcome> {
        let page = record.addr / self.page_size;
        if let Some(&frame) = self.hot_frames.get(&page) {
            ctx.xfer(Device::Stacked, TrafficCategory::Data, BLOCK_BYTES)?;
            let offset = record.addr % self.page_size;
            let latency = ctx.access(Device::Stacked, frame * self.page_size + offset, BLOCK_BYTES);
            Ok(ServiceOutcome::new(ServedBy::StackedMemory, latency))
        } else {
            self.cache.step(record, ctx)
        }
    }
}
