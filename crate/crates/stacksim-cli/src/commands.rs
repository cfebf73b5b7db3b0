//! Implementations of the CLI subcommands.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use stacksim_core::metrics::RunReport;
use stacksim_core::orgs::run::{baseline_seconds, simulate, simulate_with_baseline};
use stacksim_core::partition::{compute_memory_fraction, partition_sweep};
use stacksim_core::profiler::{
    accuracy_vs_sample_size, memory_serve_fraction_over_time, profile_source, top_k,
    PageAccessCounts,
};
use stacksim_core::trace::{generate, read_trace, write_trace, SyntheticTraceSpec};
use stacksim_core::{Error, Result};

use crate::config::{
    attach_schema, load_json, parse_with_schema, ExperimentFile, ResolvedExperiment, SweepFile,
    COUNTS_SCHEMA, PLAN_SCHEMA, TRACE_SPEC_SCHEMA,
};
use crate::output::{
    ensure_out_dir, run_csv, write_json, write_report_json, write_text, OutputFormat,
};

fn base_dir(config_path: &Path) -> PathBuf {
    config_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// `gen-trace`: realize a synthetic trace spec as a binary trace file.
pub fn gen_trace(spec_path: &Path, out: &Path) -> Result<u64> {
    let spec: SyntheticTraceSpec =
        parse_with_schema(load_json(spec_path)?, TRACE_SPEC_SCHEMA)
            .map_err(|e| Error::config(format!("{}: {e}", spec_path.display())))?;
    let written = write_trace(out, spec.page_size as u32, generate(&spec)?)?;
    Ok(written)
}

/// `profile`: count accesses per page over a trace file.
pub fn profile_cmd(trace: &Path, page_size: Option<u64>, out: &Path) -> Result<PageAccessCounts> {
    let page_size = match page_size {
        Some(p) => p,
        None => {
            // Fall back to the page size recorded in the trace header.
            let header = read_trace(trace)?.header();
            u64::from(header.page_size)
        }
    };
    let counts = stacksim_core::profiler::profile(read_trace(trace)?, page_size)?;
    write_json(out, &attach_schema(&counts, COUNTS_SCHEMA)?)?;
    Ok(counts)
}

/// `partition`: run the memory-fraction computation over saved counts.
pub fn partition_cmd(
    counts_path: &Path,
    cache_hits: u64,
    frames: u64,
    out: &Path,
) -> Result<f64> {
    let counts: PageAccessCounts = parse_with_schema(load_json(counts_path)?, COUNTS_SCHEMA)
        .map_err(|e| Error::config(format!("{}: {e}", counts_path.display())))?;
    let plan = compute_memory_fraction(&counts, cache_hits, frames)?;
    write_json(out, &attach_schema(&plan, PLAN_SCHEMA)?)?;
    Ok(plan.mem_fraction)
}

/// `simulate`: one organization over one trace, reports to `out_dir`.
pub fn simulate_cmd(
    config_path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    format: OutputFormat,
) -> Result<RunReport> {
    let file = ExperimentFile::load(config_path)?;
    let ResolvedExperiment { source, spec, settings } =
        file.resolve(&base_dir(config_path), seed)?;
    let report = simulate(&spec, &source, &settings)?;
    ensure_out_dir(out_dir)?;
    emit_single(out_dir, &report.organization.clone(), &report, format)?;
    Ok(report)
}

fn emit_single(
    out_dir: &Path,
    label: &str,
    report: &RunReport,
    format: OutputFormat,
) -> Result<()> {
    if format.wants_json() {
        write_report_json(&out_dir.join(format!("report-{label}.json")), report)?;
    }
    if format.wants_csv() {
        let csv = run_csv(&[(label.to_string(), report)]);
        write_text(&out_dir.join(format!("report-{label}.csv")), &csv)?;
    }
    Ok(())
}

/// `compare`: several configs over the identical trace and devices; one
/// CSV row per organization plus a ranked summary.
pub fn compare_cmd(
    config_paths: &[PathBuf],
    out_dir: &Path,
    seed: Option<u64>,
    format: OutputFormat,
) -> Result<Vec<(String, RunReport)>> {
    if config_paths.len() < 2 {
        return Err(Error::config("compare needs at least two --config files"));
    }
    let files: Vec<ExperimentFile> = config_paths
        .iter()
        .map(|p| ExperimentFile::load(p))
        .collect::<Result<_>>()?;
    let key = files[0].comparable_key();
    for (path, file) in config_paths.iter().zip(&files).skip(1) {
        if file.comparable_key() != key {
            return Err(Error::config(format!(
                "{}: trace, device, seed, and warm-up sections must match the first config",
                path.display()
            )));
        }
    }

    let runs: Vec<(String, ResolvedExperiment)> = config_paths
        .iter()
        .zip(&files)
        .enumerate()
        .map(|(i, (path, file))| {
            let resolved = file.resolve(&base_dir(path), seed)?;
            Ok((format!("{i}-{}", resolved.spec.name()), resolved))
        })
        .collect::<Result<_>>()?;

    // One shared baseline: every run replays the same trace.
    let baseline = baseline_seconds(&runs[0].1.source, &runs[0].1.settings)?;
    let reports: Vec<(String, RunReport)> = runs
        .par_iter()
        .map(|(label, r)| {
            let report = simulate_with_baseline(&r.spec, &r.source, &r.settings, Some(baseline))?;
            Ok((label.clone(), report))
        })
        .collect::<Result<_>>()?;

    ensure_out_dir(out_dir)?;
    if format.wants_json() {
        for (label, report) in &reports {
            write_report_json(&out_dir.join(format!("report-{label}.json")), report)?;
        }
    }
    if format.wants_csv() {
        let rows: Vec<(String, &RunReport)> = reports
            .iter()
            .map(|(label, r)| (label.clone(), r))
            .collect();
        write_text(&out_dir.join("compare.csv"), &run_csv(&rows))?;
    }
    Ok(reports)
}

/// Ranked one-line-per-run summary of a comparison, fastest first.
pub fn ranked_summary(reports: &[(String, RunReport)]) -> String {
    let mut ranked: Vec<&(String, RunReport)> = reports.iter().collect();
    ranked.sort_by(|a, b| {
        b.1.speedup_vs_baseline
            .partial_cmp(&a.1.speedup_vs_baseline)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    let mut out = String::from("rank  run                    speedup      mpki  offchip_bytes\n");
    for (rank, (label, report)) in ranked.iter().enumerate() {
        out.push_str(&format!(
            "{:<5} {:<22} {:>8.3} {:>9.3} {:>14}\n",
            rank + 1,
            label,
            report.speedup_vs_baseline,
            report.mpki,
            report.ledger.off_chip.total(),
        ));
    }
    out
}

/// `sweep`: batch experiments along one axis, one CSV row per point.
pub fn sweep_cmd(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<PathBuf> {
    let sweep = SweepFile::load(config_path)?;
    let dir = base_dir(config_path);
    ensure_out_dir(out_dir)?;
    match sweep {
        SweepFile::Partition(cfg) => {
            let settings = {
                let base = crate::config::SweepBase {
                    trace: cfg.trace.clone(),
                    warmup_records: cfg.warmup_records,
                    seed: cfg.seed,
                    stacked_dram: cfg.stacked_dram.clone(),
                    offchip_dram: cfg.offchip_dram.clone(),
                    core: cfg.core.clone(),
                };
                base.settings(seed)?
            };
            let cache = cfg.cache.to_cache_config()?;
            let capacity = settings.stacked.capacity;
            let page = cache.page_size();
            let partitions = match cfg.partitions {
                Some(p) => p,
                None => default_partitions(capacity, page)?,
            };
            let source = cfg.trace.to_source(&dir);
            let reports = partition_sweep(&source, &cache, &partitions, &settings)?;
            let rows: Vec<(String, &RunReport)> = partitions
                .iter()
                .zip(&reports)
                .map(|(&(mem, _), report)| (format!("mem-{mem}"), report))
                .collect();
            let path = out_dir.join("sweep-partition.csv");
            write_text(&path, &run_csv(&rows))?;
            Ok(path)
        }
        SweepFile::DramSize(cfg) => {
            if cfg.capacities.is_empty() {
                return Err(Error::config("dram_size sweep needs at least one capacity"));
            }
            let base = crate::config::SweepBase {
                trace: cfg.trace.clone(),
                warmup_records: cfg.warmup_records,
                seed: cfg.seed,
                stacked_dram: cfg.stacked_dram.clone(),
                offchip_dram: cfg.offchip_dram.clone(),
                core: cfg.core.clone(),
            };
            let spec = cfg.organization.to_spec()?;
            let source = cfg.trace.to_source(&dir);
            let reports: Vec<(u64, RunReport)> = cfg
                .capacities
                .par_iter()
                .map(|&capacity| {
                    let mut settings = base.settings(seed)?;
                    settings.stacked.capacity = capacity;
                    settings.stacked.validate()?;
                    let report = simulate(&spec, &source, &settings)?;
                    Ok((capacity, report))
                })
                .collect::<Result<_>>()?;
            let mut csv = String::from("stacked_capacity_bytes,");
            csv.push_str(&crate::output::run_csv_header());
            csv.push('\n');
            for (capacity, report) in &reports {
                csv.push_str(&format!(
                    "{capacity},{}\n",
                    crate::output::run_csv_row(&format!("cap-{capacity}"), report)
                ));
            }
            let path = out_dir.join("sweep-dram-size.csv");
            write_text(&path, &csv)?;
            Ok(path)
        }
        SweepFile::SampleSize(cfg) => {
            let source = cfg.trace.to_source(&dir);
            let points = accuracy_vs_sample_size(&source, &cfg.fractions, cfg.k, cfg.page_size)?;
            let mut csv = String::from("fraction,records_profiled,accuracy\n");
            for p in points {
                csv.push_str(&format!(
                    "{},{},{}\n",
                    p.fraction, p.records_profiled, p.accuracy
                ));
            }
            let path = out_dir.join("sweep-sample-size.csv");
            write_text(&path, &csv)?;
            Ok(path)
        }
        SweepFile::Stability(cfg) => {
            let source = cfg.trace.to_source(&dir);
            let counts = profile_source(&source, cfg.page_size)?;
            let manifest = top_k(&counts, cfg.k);
            let points = memory_serve_fraction_over_time(
                &source,
                &manifest,
                cfg.k,
                cfg.window_records,
                cfg.page_size,
            )?;
            let mut csv = String::from("window_index,start_record,fraction_served_from_memory\n");
            for p in points {
                csv.push_str(&format!("{},{},{}\n", p.window_index, p.start_record, p.fraction));
            }
            let path = out_dir.join("sweep-stability.csv");
            write_text(&path, &csv)?;
            Ok(path)
        }
    }
}

/// Five evenly spaced memory/cache splits, endpoints included.
pub fn default_partitions(capacity: u64, page_size: u64) -> Result<Vec<(u64, u64)>> {
    if capacity % page_size != 0 {
        return Err(Error::config(format!(
            "stacked capacity {capacity} is not a whole number of {page_size}-byte frames"
        )));
    }
    let frames = capacity / page_size;
    Ok((0..=4)
        .map(|i| {
            let mem = frames * i / 4 * page_size;
            (mem, capacity - mem)
        })
        .collect())
}

/// Echo of a run destined for logs: the key numbers on one line.
pub fn one_line(report: &RunReport) -> String {
    format!(
        "{}: {} records, mpki {:.3}, stacked {} B, off-chip {} B, est {:.6} s, speedup {:.3}",
        report.organization,
        report.measured_records,
        report.mpki,
        report.ledger.stacked.total(),
        report.ledger.off_chip.total(),
        report.estimated_time_seconds,
        report.speedup_vs_baseline,
    )
}
