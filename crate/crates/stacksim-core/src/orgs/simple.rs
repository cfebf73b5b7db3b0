//! The two trivial organizations bounding every comparison: no stack at
//! all, and a stack large enough to hold everything.

use crate::dram::{Device, TrafficCategory};
use crate::error::Result;
use crate::trace::TraceRecord;

use super::{Organization, ServedBy, ServiceOutcome, StepContext, BLOCK_BYTES};

/// Baseline without die-stacked DRAM: every record goes off-chip.
#[derive(Debug, Default)]
pub struct NoStacked;

impl Organization for NoStacked {
    fn step(&mut self, record: &TraceRecord, ctx: &mut StepContext) -> Result<ServiceOutcome> {
        ctx.xfer(Device::OffChip, TrafficCategory::Data, BLOCK_BYTES)?;
        let latency = ctx.access(Device::OffChip, record.addr, BLOCK_BYTES);
        Ok(ServiceOutcome::new(ServedBy::OffChip, latency))
    }
}

/// Unbounded stack hosting the whole dataset as memory.
#[derive(Debug, Default)]
pub struct Infinite;

impl Organization for Infinite {
    fn step(&mut self, record: &TraceRecord, ctx: &mut StepContext) -> Result<ServiceOutcome> {
        ctx.xfer(Device::Stacked, TrafficCategory::Data, BLOCK_BYTES)?;
        let latency = ctx.access(Device::Stacked, record.addr, BLOCK_BYTES);
        Ok(ServiceOutcome::new(ServedBy::StackedMemory, latency))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dram::{DramDeviceConfig, RowBufferState, TrafficLedger};
    use crate::trace::AccessKind;

    #[test]
    fn every_record_is_64_data_bytes_on_one_device() {
        let stacked = DramDeviceConfig::stacked_default();
        let offchip = DramDeviceConfig::offchip_default();
        let mut ledger = TrafficLedger::new();
        let mut srows = RowBufferState::new(&stacked);
        let mut orows = RowBufferState::new(&offchip);
        let record = TraceRecord {
            icount: 1,
            addr: 0x1000,
            kind: AccessKind::Read,
        };

        let mut ctx = StepContext::new(&mut ledger, &stacked, &offchip, &mut srows, &mut orows);
        let out = NoStacked.step(&record, &mut ctx).unwrap();
        assert_eq!(out.served_by, ServedBy::OffChip);

        let mut ctx = StepContext::new(&mut ledger, &stacked, &offchip, &mut srows, &mut orows);
        let out = Infinite.step(&record, &mut ctx).unwrap();
        assert_eq!(out.served_by, ServedBy::StackedMemory);

        assert_eq!(ledger.off_chip.data, 64);
        assert_eq!(ledger.stacked.data, 64);
        assert_eq!(ledger.total(Device::Stacked), 64);
        assert_eq!(ledger.total(Device::OffChip), 64);
    }
}
