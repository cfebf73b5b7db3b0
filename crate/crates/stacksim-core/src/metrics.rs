//! Run statistics: MPKI, tag-storage estimation, the bandwidth-bound
//! performance model, and the per-run report.

use serde::{Deserialize, Serialize};

use crate::dram::{DramDeviceConfig, TrafficLedger};
use crate::error::{Error, Result};

/// Misses per kilo-instruction.
pub fn mpki(misses: u64, instructions: u64) -> Result<f64> {
    if instructions == 0 {
        return Err(Error::domain("mpki over zero instructions"));
    }
    Ok(1000.0 * misses as f64 / instructions as f64)
}

/// Bytes of tag storage for a cache of `capacity` managed at `granularity`
/// with `bits_per_entry` of metadata per entry.
///
/// `granularity` must divide `capacity` and `bits_per_entry` must be
/// positive; both are caller obligations.
pub fn tag_storage_estimate(capacity: u64, granularity: u64, bits_per_entry: u64) -> u64 {
    assert!(granularity > 0 && capacity % granularity == 0);
    assert!(bits_per_entry > 0);
    capacity / granularity * bits_per_entry / 8
}

/// Compute-side parameters of the modeled chip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoreParams {
    pub cores: u32,
    pub clock_hz: f64,
    pub peak_ipc: u32,
    /// Divisor applied to summed access latencies; a proxy for
    /// memory-level parallelism hiding latency behind bandwidth.
    pub overlap_factor: f64,
}

impl Default for CoreParams {
    fn default() -> Self {
        Self {
            cores: 16,
            clock_hz: 2.8e9,
            peak_ipc: 4,
            overlap_factor: 4.0,
        }
    }
}

impl CoreParams {
    pub fn validate(&self) -> Result<()> {
        if self.cores == 0 || self.peak_ipc == 0 {
            return Err(Error::config("cores and peak_ipc must be positive"));
        }
        if !(self.clock_hz > 0.0) {
            return Err(Error::config("core clock must be positive"));
        }
        if !(self.overlap_factor > 0.0) {
            return Err(Error::config("overlap_factor must be positive"));
        }
        Ok(())
    }
}

/// Components of the estimated run time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfBreakdown {
    pub t_compute: f64,
    pub t_stacked: f64,
    pub t_offchip: f64,
    pub t_flush_stall: f64,
    pub t_latency_stall: f64,
    /// `max(t_compute, t_stacked, t_offchip) + stalls`, seconds.
    pub total: f64,
}

impl PerfBreakdown {
    /// Bandwidth-bound time estimate: the run is as slow as its most
    /// saturated resource, plus serialized stalls.
    pub fn evaluate(
        measured_instructions: u64,
        ledger: &TrafficLedger,
        stacked: &DramDeviceConfig,
        offchip: &DramDeviceConfig,
        core: &CoreParams,
        flush_count: u64,
        flush_latency_s: f64,
        latency_sum_ns: f64,
    ) -> Result<Self> {
        core.validate()?;
        let stacked_bw = stacked.aggregate_bandwidth();
        let offchip_bw = offchip.aggregate_bandwidth();
        if !(stacked_bw > 0.0) || !(offchip_bw > 0.0) {
            return Err(Error::config("device bandwidth must be positive"));
        }
        let inst_rate = f64::from(core.cores) * f64::from(core.peak_ipc) * core.clock_hz;
        let t_compute = measured_instructions as f64 / inst_rate;
        let t_stacked = ledger.stacked.total() as f64 / stacked_bw;
        let t_offchip = ledger.off_chip.total() as f64 / offchip_bw;
        let t_flush_stall = flush_count as f64 * flush_latency_s;
        let t_latency_stall = latency_sum_ns * 1e-9 / core.overlap_factor;
        let total = t_compute.max(t_stacked).max(t_offchip) + t_flush_stall + t_latency_stall;
        Ok(Self {
            t_compute,
            t_stacked,
            t_offchip,
            t_flush_stall,
            t_latency_stall,
            total,
        })
    }
}

pub fn speedup(baseline_seconds: f64, seconds: f64) -> f64 {
    baseline_seconds / seconds
}

/// Outcome counts of the measurement window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeCounts {
    pub stacked_memory: u64,
    pub stacked_cache_hit: u64,
    pub off_chip: u64,
}

impl OutcomeCounts {
    pub fn total(&self) -> u64 {
        self.stacked_memory + self.stacked_cache_hit + self.off_chip
    }

    /// Records served by the stack, memory- or cache-managed.
    pub fn stacked_total(&self) -> u64 {
        self.stacked_memory + self.stacked_cache_hit
    }
}

/// Everything one simulation run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub organization: String,
    pub measured_records: u64,
    pub measured_instructions: u64,
    pub outcomes: OutcomeCounts,
    /// Demand (read) records in the measurement window.
    pub measured_reads: u64,
    /// Demand records the stack could not serve.
    pub reads_served_off_chip: u64,
    pub mpki: f64,
    pub ledger: TrafficLedger,
    pub flush_count: u64,
    pub swap_interval_count: u64,
    pub latency_sum_ns: f64,
    pub estimated_time_seconds: f64,
    pub speedup_vs_baseline: f64,
    /// The fully resolved configuration the run executed with.
    pub config_echo: serde_json::Value,
}

impl RunReport {
    /// Compares everything the simulation physics produced, ignoring the
    /// organization label and the configuration echo.
    pub fn same_results_as(&self, other: &RunReport) -> bool {
        self.measured_records == other.measured_records
            && self.measured_instructions == other.measured_instructions
            && self.outcomes == other.outcomes
            && self.measured_reads == other.measured_reads
            && self.reads_served_off_chip == other.reads_served_off_chip
            && self.mpki == other.mpki
            && self.ledger == other.ledger
            && self.flush_count == other.flush_count
            && self.swap_interval_count == other.swap_interval_count
            && self.latency_sum_ns == other.latency_sum_ns
            && self.estimated_time_seconds == other.estimated_time_seconds
            && self.speedup_vs_baseline == other.speedup_vs_baseline
    }
}
