//! Device configuration, traffic accounting at minimum-transfer
//! granularity, and a closed-form open-page latency model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical addresses interleave across memory channels at this granularity.
pub const CHANNEL_INTERLEAVE_BYTES: u64 = 4096;

/// Timing and geometry of one DRAM device (the stack or the off-chip DIMMs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DramDeviceConfig {
    pub capacity: u64,
    pub channels: u32,
    /// Peak bandwidth of a single channel, bytes per second.
    pub per_channel_bandwidth: f64,
    /// Link width in bytes; data is transferred on both clock edges.
    pub bus_width: u32,
    /// Smallest transfer the device accepts; every burst is rounded up to it.
    pub min_transfer: u32,
    pub row_buffer: u64,
    pub ranks_per_channel: u32,
    pub banks_per_rank: u32,
    pub t_cas: u32,
    pub t_rcd: u32,
    pub t_rp: u32,
    pub t_ras: u32,
    pub clock_hz: f64,
}

impl DramDeviceConfig {
    /// 4 GB stack, four channels of 21 GB/s each (84 GB/s aggregate),
    /// DDR-1333 timings with an 8 KB row buffer.
    pub fn stacked_default() -> Self {
        Self {
            capacity: 4 << 30,
            channels: 4,
            per_channel_bandwidth: 21e9,
            bus_width: 16,
            min_transfer: 32,
            row_buffer: 8192,
            ranks_per_channel: 4,
            banks_per_rank: 8,
            t_cas: 10,
            t_rcd: 10,
            t_rp: 10,
            t_ras: 24,
            clock_hz: 666.5e6,
        }
    }

    /// Single 21 GB/s channel. The off-chip capacity doubles as the bound
    /// of the physical address space the traces may touch.
    pub fn offchip_default() -> Self {
        Self {
            capacity: 1 << 40,
            channels: 1,
            ..Self::stacked_default()
        }
    }

    pub fn aggregate_bandwidth(&self) -> f64 {
        f64::from(self.channels) * self.per_channel_bandwidth
    }

    pub fn banks(&self) -> u32 {
        self.ranks_per_channel * self.banks_per_rank
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 {
            return Err(Error::config("channels must be positive"));
        }
        if self.capacity == 0 || self.capacity % u64::from(self.channels) != 0 {
            return Err(Error::config(format!(
                "capacity {} must be positive and divisible by {} channels",
                self.capacity, self.channels
            )));
        }
        if self.bus_width == 0 || self.min_transfer == 0 || self.min_transfer % self.bus_width != 0
        {
            return Err(Error::config(format!(
                "min_transfer {} must be a positive multiple of bus_width {}",
                self.min_transfer, self.bus_width
            )));
        }
        if self.row_buffer == 0 || self.ranks_per_channel == 0 || self.banks_per_rank == 0 {
            return Err(Error::config("row_buffer, ranks, and banks must be positive"));
        }
        if self.t_cas == 0 || self.t_rcd == 0 || self.t_rp == 0 || self.t_ras == 0 {
            return Err(Error::config("all DRAM timing fields must be positive"));
        }
        if !(self.clock_hz > 0.0) || !(self.per_channel_bandwidth > 0.0) {
            return Err(Error::config("clock and bandwidth must be positive"));
        }
        Ok(())
    }
}

/// Maps a physical address to its memory channel (4 KB interleaving).
pub fn channel_of(addr: u64, cfg: &DramDeviceConfig) -> u32 {
    ((addr / CHANNEL_INTERLEAVE_BYTES) % u64::from(cfg.channels)) as u32
}

/// Latency of one access in nanoseconds under the open-page model:
/// a row hit pays tCAS, a row miss pays tRP + tRCD + tCAS, and the burst
/// moves `2 * bus_width` bytes per clock.
pub fn access_latency(row_hit: bool, bytes: u64, cfg: &DramDeviceConfig) -> f64 {
    debug_assert!(bytes > 0);
    let base = if row_hit {
        u64::from(cfg.t_cas)
    } else {
        u64::from(cfg.t_rp + cfg.t_rcd + cfg.t_cas)
    };
    let per_clock = u64::from(2 * cfg.bus_width);
    let burst = bytes.div_ceil(per_clock);
    (base + burst) as f64 / cfg.clock_hz * 1e9
}

/// Open-row bookkeeping. Banks are indexed as
/// `floor(addr / row_buffer) mod (ranks * banks)`.
#[derive(Debug, Clone)]
pub struct RowBufferState {
    open_rows: Vec<Option<u64>>,
}

impl RowBufferState {
    pub fn new(cfg: &DramDeviceConfig) -> Self {
        Self {
            open_rows: vec![None; cfg.banks() as usize],
        }
    }

    /// Records an access and reports whether it hit the open row.
    pub fn touch(&mut self, addr: u64, cfg: &DramDeviceConfig) -> bool {
        let row = addr / cfg.row_buffer;
        let bank = (row % self.open_rows.len() as u64) as usize;
        let hit = self.open_rows[bank] == Some(row);
        self.open_rows[bank] = Some(row);
        hit
    }
}

/// The device an access or transfer lands on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Device {
    Stacked,
    OffChip,
}

/// What a transfer's bytes were moved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficCategory {
    /// Reading or updating the data an access actually asked for.
    Data,
    /// Tags, frequency counters, and replacement state (e.g. LRU bits).
    Metadata,
    /// Data streamed speculatively for requests that then missed.
    SpecData,
    /// Blocks or pages moved to (re)fill frames, including dirty victims.
    Replacement,
}

/// Byte counters for one device.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceCounters {
    pub data: u64,
    pub metadata: u64,
    pub spec_data: u64,
    pub replacement: u64,
}

impl DeviceCounters {
    pub fn total(&self) -> u64 {
        self.data + self.metadata + self.spec_data + self.replacement
    }
}

/// Per-run traffic ledger: bytes per device per category. Counters only
/// grow; totals are the exact sum of the four categories.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficLedger {
    pub stacked: DeviceCounters,
    pub off_chip: DeviceCounters,
}

impl TrafficLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a transfer, rounding it up to the device's minimum transfer
    /// size. Returns the bytes actually recorded. Empty transfers are a
    /// caller bug and rejected.
    pub fn transfer(
        &mut self,
        device: Device,
        category: TrafficCategory,
        bytes: u64,
        min_transfer: u32,
    ) -> Result<u64> {
        if bytes == 0 {
            return Err(Error::domain("zero-byte transfer"));
        }
        let granule = u64::from(min_transfer);
        let recorded = bytes.div_ceil(granule) * granule;
        let counters = match device {
            Device::Stacked => &mut self.stacked,
            Device::OffChip => &mut self.off_chip,
        };
        let slot = match category {
            TrafficCategory::Data => &mut counters.data,
            TrafficCategory::Metadata => &mut counters.metadata,
            TrafficCategory::SpecData => &mut counters.spec_data,
            TrafficCategory::Replacement => &mut counters.replacement,
        };
        *slot += recorded;
        Ok(recorded)
    }

    pub fn device(&self, device: Device) -> &DeviceCounters {
        match device {
            Device::Stacked => &self.stacked,
            Device::OffChip => &self.off_chip,
        }
    }

    pub fn total(&self, device: Device) -> u64 {
        self.device(device).total()
    }
}
