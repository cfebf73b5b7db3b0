//! Direct-mapped block cache that stores each tag adjacent to its data and
//! streams both out in a single access.

use crate::dram::{Device, TrafficCategory};
use crate::error::Result;
use crate::trace::{AccessKind, TraceRecord};

use super::{AlloyConfig, Organization, ServedBy, ServiceOutcome, StepContext, BLOCK_BYTES};

#[derive(Debug, Clone, Copy, Default)]
struct Line {
    block: u64,
    valid: bool,
    dirty: bool,
}

pub struct AlloyCache {
    cfg: AlloyConfig,
    lines: Vec<Line>,
}

impl AlloyCache {
    /// A cache of `capacity / tad_size` frames; zero frames is a valid
    /// degenerate cache that forwards everything off-chip.
    pub fn new(cfg: AlloyConfig, capacity: u64) -> Self {
        let n_frames = (capacity / cfg.tad_size) as usize;
        Self {
            cfg,
            lines: vec![Line::default(); n_frames],
        }
    }

    pub fn frames(&self) -> u64 {
        self.lines.len() as u64
    }

    fn frame_addr(&self, index: u64) -> u64 {
        index * self.cfg.tad_size
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
}

impl Organization for AlloyCache {
    fn step(&mut self, record: &TraceRecord, ctx: &mut StepContext) -> Result<ServiceOutcome> {
        if self.lines.is_empty() {
            return self.off_chip_only(record, ctx);
        }
        let block = record.addr / BLOCK_BYTES;
        let index = block % self.lines.len() as u64;
        let frame_addr = self.frame_addr(index);
        let line = &mut self.lines[index as usize];
        let hit = line.valid && line.block == block;
        let tad = ctx.rounded(Device::Stacked, self.cfg.tad_size);
        let tag_bytes = self.cfg.tad_size - self.cfg.block_size;

        match (record.kind, hit) {
            (AccessKind::Read, true) => {
                // One tag-and-data stream serves the hit.
                ctx.xfer(Device::Stacked, TrafficCategory::Data, BLOCK_BYTES)?;
                ctx.xfer(Device::Stacked, TrafficCategory::Metadata, tad - BLOCK_BYTES)?;
                let latency = ctx.access(Device::Stacked, frame_addr, tad);
                Ok(ServiceOutcome::new(ServedBy::StackedCacheHit, latency))
            }
            (AccessKind::Read, false) => {
                // The streamed unit was wasted: tag plus speculative data.
                ctx.xfer(Device::Stacked, TrafficCategory::SpecData, BLOCK_BYTES)?;
                ctx.xfer(Device::Stacked, TrafficCategory::Metadata, tad - BLOCK_BYTES)?;
                ctx.xfer(Device::OffChip, TrafficCategory::Data, BLOCK_BYTES)?;
                // Fill the frame, writing back the old dirty occupant.
                if line.valid && line.dirty {
                    ctx.xfer(Device::OffChip, TrafficCategory::Replacement, BLOCK_BYTES)?;
                }
                ctx.xfer(Device::Stacked, TrafficCategory::Replacement, self.cfg.tad_size)?;
                *line = Line { block, valid: true, dirty: false };
                let latency = ctx.access(Device::Stacked, frame_addr, tad)
                    + ctx.access(Device::OffChip, record.addr, BLOCK_BYTES);
                let mut out = ServiceOutcome::new(ServedBy::OffChip, latency);
                out.flags.replacement = true;
                Ok(out)
            }
            (AccessKind::Writeback, true) => {
                // Tag probe, then the whole unit is rewritten.
                ctx.xfer(Device::Stacked, TrafficCategory::Metadata, tag_bytes)?;
                ctx.xfer(Device::Stacked, TrafficCategory::Data, BLOCK_BYTES)?;
                ctx.xfer(Device::Stacked, TrafficCategory::Metadata, tad - BLOCK_BYTES)?;
                line.dirty = true;
                let latency = ctx.access(Device::Stacked, frame_addr, ctx.rounded(Device::Stacked, tag_bytes))
                    + ctx.access(Device::Stacked, frame_addr, tad);
                Ok(ServiceOutcome::new(ServedBy::StackedCacheHit, latency))
            }
            (AccessKind::Writeback, false) => {
                // No write-allocate: probe the tag, send the block off-chip.
                ctx.xfer(Device::Stacked, TrafficCategory::Metadata, tag_bytes)?;
                ctx.xfer(Device::OffChip, TrafficCategory::Data, BLOCK_BYTES)?;
                let latency = ctx.access(Device::Stacked, frame_addr, ctx.rounded(Device::Stacked, tag_bytes))
                    + ctx.access(Device::OffChip, record.addr, BLOCK_BYTES);
                Ok(ServiceOutcome::new(ServedBy::OffChip, latency))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dram::{DramDeviceConfig, RowBufferState, TrafficLedger};

    fn harness() -> (DramDeviceConfig, DramDeviceConfig, TrafficLedger, RowBufferState, RowBufferState)
    {
        let stacked = DramDeviceConfig::stacked_default();
        let offchip = DramDeviceConfig::offchip_default();
        let srows = RowBufferState::new(&stacked);
        let orows = RowBufferState::new(&offchip);
        (stacked, offchip, TrafficLedger::new(), srows, orows)
    }

    fn read(addr: u64) -> TraceRecord {
        TraceRecord { icount: 0, addr, kind: AccessKind::Read }
    }

    #[test]
    fn second_read_to_same_block_hits_with_one_rounded_tad() {
        let (stacked, offchip, mut ledger, mut srows, mut orows) = harness();
        let mut cache = AlloyCache::new(AlloyConfig::default(), 1 << 20);

        let mut ctx = StepContext::new(&mut ledger, &stacked, &offchip, &mut srows, &mut orows);
        let first = cache.step(&read(0x40), &mut ctx).unwrap();
        assert_eq!(first.served_by, ServedBy::OffChip);
        assert!(first.flags.replacement);

        let before = ledger.total(Device::Stacked);
        let mut ctx = StepContext::new(&mut ledger, &stacked, &offchip, &mut srows, &mut orows);
        let second = cache.step(&read(0x40), &mut ctx).unwrap();
        assert_eq!(second.served_by, ServedBy::StackedCacheHit);
        // The hit costs exactly one 72-byte unit rounded to 96.
        assert_eq!(ledger.total(Device::Stacked) - before, 96);
        assert_eq!(ledger.stacked.data, 64);
    }

    #[test]
    fn miss_books_spec_data_and_fill() {
        let (stacked, offchip, mut ledger, mut srows, mut orows) = harness();
        let mut cache = AlloyCache::new(AlloyConfig::default(), 1 << 20);
        let mut ctx = StepContext::new(&mut ledger, &stacked, &offchip, &mut srows, &mut orows);
        cache.step(&read(0x80), &mut ctx).unwrap();
        assert_eq!(ledger.stacked.spec_data, 64);
        assert_eq!(ledger.stacked.metadata, 32);
        assert_eq!(ledger.stacked.replacement, 96);
        assert_eq!(ledger.off_chip.data, 64);
    }

    #[test]
    fn conflicting_dirty_block_is_written_back_as_replacement() {
        let (stacked, offchip, mut ledger, mut srows, mut orows) = harness();
        // Two frames only, so blocks 0 and 2 conflict.
        let mut cache = AlloyCache::new(AlloyConfig::default(), 144);
        assert_eq!(cache.frames(), 2);

        let wb = TraceRecord { icount: 0, addr: 0x0, kind: AccessKind::Writeback };
        let mut ctx = StepContext::new(&mut ledger, &stacked, &offchip, &mut srows, &mut orows);
        cache.step(&read(0x0), &mut ctx).unwrap();
        let mut ctx = StepContext::new(&mut ledger, &stacked, &offchip, &mut srows, &mut orows);
        cache.step(&wb, &mut ctx).unwrap();

        let before = ledger.off_chip.replacement;
        let mut ctx = StepContext::new(&mut ledger, &stacked, &offchip, &mut srows, &mut orows);
        cache.step(&read(0x80), &mut ctx).unwrap();
        assert_eq!(ledger.off_chip.replacement - before, 64);
    }

    #[test]
    fn writeback_miss_does_not_allocate() {
        let (stacked, offchip, mut ledger, mut srows, mut orows) = harness();
        let mut cache = AlloyCache::new(AlloyConfig::default(), 1 << 20);
        let wb = TraceRecord { icount: 0, addr: 0x140, kind: AccessKind::Writeback };
        let mut ctx = StepContext::new(&mut ledger, &stacked, &offchip, &mut srows, &mut orows);
        let out = cache.step(&wb, &mut ctx).unwrap();
        assert_eq!(out.served_by, ServedBy::OffChip);
        assert_eq!(ledger.off_chip.data, 64);
        assert_eq!(ledger.stacked.replacement, 0);
        // A later read to the same block still misses.
        let mut ctx = StepContext::new(&mut ledger, &stacked, &offchip, &mut srows, &mut orows);
        assert_eq!(
            cache.step(&read(0x140), &mut ctx).unwrap().served_by,
            ServedBy::OffChip
        );
    }
}
