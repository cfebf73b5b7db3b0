//! Report emission: JSON reports and flat CSV rows with a fixed,
//! documented column order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::Value;

use stacksim_core::metrics::RunReport;
use stacksim_core::{Error, Result};

/// Column order of every per-run CSV row. This order is part of the
/// output contract; plotting scripts may rely on it.
pub const RUN_CSV_COLUMNS: &[&str] = &[
    "run",
    "org",
    "mem_bytes",
    "cache_bytes",
    "measured_records",
    "measured_instructions",
    "reads",
    "reads_off_chip",
    "served_stacked_memory",
    "served_stacked_cache",
    "served_off_chip",
    "mpki",
    "stacked_data_bytes",
    "stacked_metadata_bytes",
    "stacked_spec_data_bytes",
    "stacked_replacement_bytes",
    "stacked_total_bytes",
    "offchip_data_bytes",
    "offchip_metadata_bytes",
    "offchip_spec_data_bytes",
    "offchip_replacement_bytes",
    "offchip_total_bytes",
    "flush_count",
    "swap_interval_count",
    "latency_sum_ns",
    "estimated_time_s",
    "speedup_vs_baseline",
];

pub fn run_csv_header() -> String {
    RUN_CSV_COLUMNS.join(",")
}

/// The hybrid's memory/cache byte split, when the report has one.
fn partition_bytes(report: &RunReport) -> (String, String) {
    let partition = &report.config_echo["organization"]["partition"];
    match (
        partition["mem_bytes"].as_u64(),
        partition["cache_bytes"].as_u64(),
    ) {
        (Some(m), Some(c)) => (m.to_string(), c.to_string()),
        _ => (String::new(), String::new()),
    }
}

pub fn run_csv_row(label: &str, report: &RunReport) -> String {
    let (mem_bytes, cache_bytes) = partition_bytes(report);
    let s = &report.ledger.stacked;
    let o = &report.ledger.off_chip;
    let mut row = String::new();
    let _ = write!(
        row,
        "{label},{org},{mem_bytes},{cache_bytes},{records},{instructions},{reads},{reads_off},\
         {mem},{cache},{off},{mpki},{sd},{sm},{ss},{sr},{st},{od},{om},{os},{or},{ot},\
         {flushes},{swaps},{lat},{time},{speedup}",
        org = report.organization,
        records = report.measured_records,
        instructions = report.measured_instructions,
        reads = report.measured_reads,
        reads_off = report.reads_served_off_chip,
        mem = report.outcomes.stacked_memory,
        cache = report.outcomes.stacked_cache_hit,
        off = report.outcomes.off_chip,
        mpki = report.mpki,
        sd = s.data,
        sm = s.metadata,
        ss = s.spec_data,
        sr = s.replacement,
        st = s.total(),
        od = o.data,
        om = o.metadata,
        os = o.spec_data,
        or = o.replacement,
        ot = o.total(),
        flushes = report.flush_count,
        swaps = report.swap_interval_count,
        lat = report.latency_sum_ns,
        time = report.estimated_time_seconds,
        speedup = report.speedup_vs_baseline,
    );
    row
}

pub fn run_csv(rows: &[(String, &RunReport)]) -> String {
    let mut out = run_csv_header();
    out.push('\n');
    for (label, report) in rows {
        out.push_str(&run_csv_row(label, report));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    Both,
}

impl OutputFormat {
    pub fn wants_json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }

    pub fn wants_csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
}

pub fn ensure_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(Error::Io)
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::config(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(Error::Io)
}

pub fn write_report_json(path: &Path, report: &RunReport) -> Result<()> {
    let value = serde_json::to_value(report).map_err(|e| Error::config(e.to_string()))?;
    write_json(path, &value)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(Error::Io)
}
