//! Page-based cache that tracks tags through the page table (hits pay no
//! tag-check traffic), samples per-set frequency counters on misses, and
//! replaces pages lazily. Remapped pages queue in an on-die tag buffer;
//! crossing its occupancy threshold triggers a software flush whose stall
//! is charged to the run's time model.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dram::{Device, TrafficCategory};
use crate::error::Result;
use crate::trace::{AccessKind, TraceRecord};

use super::{BansheeConfig, Organization, ServedBy, ServiceOutcome, StepContext, BLOCK_BYTES};

/// One frequency-counter touch in stacked DRAM, before rounding.
const COUNTER_TOUCH_BYTES: u64 = 32;

#[derive(Debug, Clone, Copy, Default)]
struct Way {
    page: u64,
    valid: bool,
    dirty: u128,
    counter: u8,
}

/// Frequency counter for a page that missed in this set but is not (yet)
/// resident.
#[derive(Debug, Clone, Copy, Default)]
struct Candidate {
    page: u64,
    count: u8,
    valid: bool,
}

pub struct BansheeCache {
    cfg: BansheeConfig,
    ways: Vec<Way>,
    candidates: Vec<Candidate>,
    n_sets: u64,
    counter_max: u8,
    tag_buffer_occupancy: u32,
    rng: ChaCha8Rng,
}

impl BansheeCache {
    pub fn new(cfg: BansheeConfig, capacity: u64, seed: u64) -> Self {
        let frames = capacity / cfg.page_size;
        let n_sets = frames / u64::from(cfg.associativity);
        let slots = (n_sets * u64::from(cfg.associativity)) as usize;
        let counter_max = ((1u32 << cfg.counter_bits) - 1) as u8;
        Self {
            ways: vec![Way::default(); slots],
            candidates: vec![Candidate::default(); slots],
            n_sets,
            counter_max,
            tag_buffer_occupancy: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            cfg,
        }
    }

    pub fn frames(&self) -> u64 {
        self.ways.len() as u64
    }

    fn set_range(&self, set: u64) -> std::ops::Range<usize> {
        let assoc = self.cfg.associativity as usize;
        let base = set as usize * assoc;
        base..base + assoc
    }

    fn way_addr(&self, way_index: usize) -> u64 {
        way_index as u64 * self.cfg.page_size
    }

    fn lookup(&self, set: u64, page: u64) -> Option<usize> {
        self.set_range(set)
            .find(|&i| self.ways[i].valid && self.ways[i].page == page)
    }

    /// Bumps the candidate counter for `page`, tracking it if a slot is
    /// free. Under slot pressure the weakest candidate is aged out first;
    /// the new page is adopted only once a slot has decayed to nothing.
    /// Returns the page's counter when it is tracked after this update.
    fn bump_candidate(&mut self, set: u64, page: u64) -> Option<u8> {
        let range = self.set_range(set);
        let slots = &mut self.candidates[range];
        if let Some(slot) = slots.iter_mut().find(|s| s.valid && s.page == page) {
            slot.count = slot.count.saturating_add(1).min(self.counter_max);
            return Some(slot.count);
        }
        if let Some(slot) = slots.iter_mut().find(|s| !s.valid) {
            *slot = Candidate { page, count: 1, valid: true };
            return Some(1);
        }
        let weakest = slots
            .iter()
            .enumerate()
            .min_by_key(|(_, s)| s.count)
            .map(|(i, _)| i)
            .expect("associativity >= 1");
        if slots[weakest].count <= 1 {
            slots[weakest] = Candidate { page, count: 1, valid: true };
            Some(1)
        } else {
            slots[weakest].count -= 1;
            None
        }
    }

    fn drop_candidate(&mut self, set: u64, page: u64) {
        let range = self.set_range(set);
        for slot in &mut self.candidates[range] {
            if slot.valid && slot.page == page {
                slot.valid = false;
            }
        }
    }

    /// Queues a remap in the tag buffer; past the occupancy threshold the
    /// buffer is drained to the page table in one software flush.
    fn note_remap(&mut self) -> bool {
        self.tag_buffer_occupancy += 1;
        let limit = self.cfg.flush_threshold * f64::from(self.cfg.tag_buffer_entries);
        if f64::from(self.tag_buffer_occupancy) > limit {
            self.tag_buffer_occupancy = 0;
            true
        } else {
            false
        }
    }

    /// Replaces the victim way with `page`. `demand_is_write` means the
    /// demand block arrives with the access itself and is written straight
    /// into the frame rather than fetched from off-chip.
    fn replace(
        &mut self,
        victim: usize,
        page: u64,
        counter: u8,
        demand_is_write: bool,
        ctx: &mut StepContext,
    ) -> Result<()> {
        let old = self.ways[victim];
        if old.valid && old.dirty != 0 {
            let dirty_blocks = u64::from(old.dirty.count_ones());
            ctx.xfer(
                Device::OffChip,
                TrafficCategory::Replacement,
                dirty_blocks * BLOCK_BYTES,
            )?;
        }
        // The demand block arrives with the access either way; only the
        // rest of the footprint is fetched around it.
        let fetched = self.cfg.avg_footprint_blocks - 1;
        if fetched > 0 {
            ctx.xfer(Device::OffChip, TrafficCategory::Replacement, fetched * BLOCK_BYTES)?;
            ctx.xfer(Device::Stacked, TrafficCategory::Replacement, fetched * BLOCK_BYTES)?;
        }
        if !demand_is_write {
            // A read's demand block is inserted as part of the fill.
            ctx.xfer(Device::Stacked, TrafficCategory::Replacement, BLOCK_BYTES)?;
        }
        self.ways[victim] = Way { page, valid: true, dirty: 0, counter };
        self.drop_candidate(page % self.n_sets, page);
        Ok(())
    }
}

impl Organization for BansheeCache {
    fn step(&mut self, record: &TraceRecord, ctx: &mut StepContext) -> Result<ServiceOutcome> {
        if self.n_sets == 0 {
            ctx.xfer(Device::OffChip, TrafficCategory::Data, BLOCK_BYTES)?;
            let latency = ctx.access(Device::OffChip, record.addr, BLOCK_BYTES);
            return Ok(ServiceOutcome::new(ServedBy::OffChip, latency));
        }
        let page = record.addr / self.cfg.page_size;
        let offset = record.addr % self.cfg.page_size;
        let block_bit = 1u128 << (offset / BLOCK_BYTES);
        let set = page % self.n_sets;

        if let Some(way_index) = self.lookup(set, page) {
            // Residency is known from the page table: no tag traffic.
            ctx.xfer(Device::Stacked, TrafficCategory::Data, BLOCK_BYTES)?;
            if record.kind == AccessKind::Writeback {
                self.ways[way_index].dirty |= block_bit;
            }
            let latency = ctx.access(Device::Stacked, self.way_addr(way_index) + offset, BLOCK_BYTES);
            return Ok(ServiceOutcome::new(ServedBy::StackedCacheHit, latency));
        }

        // Miss. A sampled miss updates the set's counters in stacked DRAM
        // and may promote the page over the coldest resident one.
        let sampled = self.rng.random::<f64>() < self.cfg.sampling_coefficient;
        let mut admitted_way = None;
        let mut flushed = false;
        if sampled {
            ctx.xfer(Device::Stacked, TrafficCategory::Metadata, COUNTER_TOUCH_BYTES)?;
            ctx.xfer(Device::Stacked, TrafficCategory::Metadata, COUNTER_TOUCH_BYTES)?;
            if let Some(count) = self.bump_candidate(set, page) {
                let range = self.set_range(set);
                let victim = match range.clone().find(|&i| !self.ways[i].valid) {
                    Some(free) => Some(free),
                    None => {
                        let coldest = range
                            .min_by_key(|&i| self.ways[i].counter)
                            .expect("associativity >= 1");
                        let bar =
                            u32::from(self.ways[coldest].counter) + self.cfg.replace_margin;
                        (u32::from(count) > bar).then_some(coldest)
                    }
                };
                if let Some(victim) = victim {
                    let is_write = record.kind == AccessKind::Writeback;
                    self.replace(victim, page, count, is_write, ctx)?;
                    flushed = self.note_remap();
                    admitted_way = Some(victim);
                }
            }
        }

        let (served_by, latency) = match admitted_way {
            Some(way_index) if record.kind == AccessKind::Writeback => {
                // Write-allocate: the block lands in the fresh frame.
                ctx.xfer(Device::Stacked, TrafficCategory::Data, BLOCK_BYTES)?;
                self.ways[way_index].dirty |= block_bit;
                let latency =
                    ctx.access(Device::Stacked, self.way_addr(way_index) + offset, BLOCK_BYTES);
                (ServedBy::StackedCacheHit, latency)
            }
            _ => {
                ctx.xfer(Device::OffChip, TrafficCategory::Data, BLOCK_BYTES)?;
                let latency = ctx.access(Device::OffChip, record.addr, BLOCK_BYTES);
                (ServedBy::OffChip, latency)
            }
        };
        let mut out = ServiceOutcome::new(served_by, latency);
        out.flags.replacement = admitted_way.is_some();
        out.flags.flush = flushed;
        Ok(out)
    }
}
