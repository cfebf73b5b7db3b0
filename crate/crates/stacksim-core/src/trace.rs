//! Trace records, bit-exact trace file I/O, the synthetic two-population
//! generator, and trace-level analyses.
//!
//! File format (little-endian): a 16-byte header — magic `STKTRC1\0`,
//! `page_size: u32`, `reserved: u32` — followed by fixed 17-byte records:
//! `icount: u64`, `addr: u64`, `kind: u8` (0 = read, 1 = writeback).

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::profiler::PageAccessCounts;

pub const TRACE_MAGIC: [u8; 8] = *b"STKTRC1\0";
pub const TRACE_HEADER_LEN: u64 = 16;
pub const TRACE_RECORD_LEN: u64 = 17;

/// Cache-block granularity of a single trace record.
pub const BLOCK_BYTES: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccessKind {
    Read,
    Writeback,
}

/// One post-LLSC memory event: a demand miss or a dirty eviction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// Cumulative retired-instruction count; non-decreasing over a stream.
    pub icount: u64,
    /// Physical byte address.
    pub addr: u64,
    pub kind: AccessKind,
}

impl TraceRecord {
    pub fn page(&self, page_size: u64) -> u64 {
        self.addr / page_size
    }

    fn encode(&self, buf: &mut [u8; TRACE_RECORD_LEN as usize]) {
        buf[0..8].copy_from_slice(&self.icount.to_le_bytes());
        buf[8..16].copy_from_slice(&self.addr.to_le_bytes());
        buf[16] = match self.kind {
            AccessKind::Read => 0,
            AccessKind::Writeback => 1,
        };
    }

    fn decode(buf: &[u8; TRACE_RECORD_LEN as usize], index: u64) -> Result<Self> {
        let kind = match buf[16] {
            0 => AccessKind::Read,
            1 => AccessKind::Writeback,
            other => {
                return Err(Error::Format(format!(
                    "record {index}: unknown access kind {other}"
                )))
            }
        };
        Ok(Self {
            icount: u64::from_le_bytes(buf[0..8].try_into().unwrap()),
            addr: u64::from_le_bytes(buf[8..16].try_into().unwrap()),
            kind,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceHeader {
    pub page_size: u32,
}

/// Streaming reader that checks the header and enforces monotone `icount`.
pub struct TraceReader<R: Read> {
    inner: R,
    header: TraceHeader,
    next_index: u64,
    last_icount: Option<u64>,
    failed: bool,
}

impl<R: Read> TraceReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut header = [0u8; TRACE_HEADER_LEN as usize];
        inner
            .read_exact(&mut header)
            .map_err(|e| Error::Format(format!("short header: {e}")))?;
        if header[0..8] != TRACE_MAGIC {
            return Err(Error::Format("bad magic; not a trace file".into()));
        }
        let page_size = u32::from_le_bytes(header[8..12].try_into().unwrap());
        Ok(Self {
            inner,
            header: TraceHeader { page_size },
            next_index: 0,
            last_icount: None,
            failed: false,
        })
    }

    pub fn header(&self) -> TraceHeader {
        self.header
    }
}

impl<R: Read> Iterator for TraceReader<R> {
    type Item = Result<TraceRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let mut buf = [0u8; TRACE_RECORD_LEN as usize];
        match read_exact_or_eof(&mut self.inner, &mut buf) {
            Ok(false) => return None,
            Ok(true) => {}
            Err(e) => {
                self.failed = true;
                return Some(Err(Error::Format(format!(
                    "record {}: torn record: {e}",
                    self.next_index
                ))));
            }
        }
        let index = self.next_index;
        self.next_index += 1;
        let record = match TraceRecord::decode(&buf, index) {
            Ok(r) => r,
            Err(e) => {
                self.failed = true;
                return Some(Err(e));
            }
        };
        if let Some(prev) = self.last_icount {
            if record.icount < prev {
                self.failed = true;
                return Some(Err(Error::Validation {
                    index,
                    reason: format!("icount {} decreased from {}", record.icount, prev),
                }));
            }
        }
        self.last_icount = Some(record.icount);
        Some(Ok(record))
    }
}

/// Reads a whole record into `buf`; `Ok(false)` on clean end of stream.
fn read_exact_or_eof<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            if filled == 0 {
                return Ok(false);
            }
            return Err(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                format!("{filled} of {} bytes", buf.len()),
            ));
        }
        filled += n;
    }
    Ok(true)
}

pub fn read_trace(path: &Path) -> Result<TraceReader<BufReader<File>>> {
    let file = File::open(path)?;
    TraceReader::new(BufReader::new(file))
}

/// Incremental trace writer; `finish` flushes and returns the record count.
pub struct TraceWriter<W: Write> {
    inner: W,
    written: u64,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut inner: W, page_size: u32) -> Result<Self> {
        let mut header = [0u8; TRACE_HEADER_LEN as usize];
        header[0..8].copy_from_slice(&TRACE_MAGIC);
        header[8..12].copy_from_slice(&page_size.to_le_bytes());
        inner.write_all(&header)?;
        Ok(Self { inner, written: 0 })
    }

    pub fn write_record(&mut self, record: &TraceRecord) -> Result<()> {
        let mut buf = [0u8; TRACE_RECORD_LEN as usize];
        record.encode(&mut buf);
        self.inner.write_all(&buf)?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<u64> {
        self.inner.flush()?;
        Ok(self.written)
    }
}

/// Writes a full trace file; the stream may itself fail mid-way (e.g. a
/// generator exhausting its address space), in which case the error is
/// propagated and the partial file is left behind.
pub fn write_trace(
    path: &Path,
    page_size: u32,
    records: impl IntoIterator<Item = Result<TraceRecord>>,
) -> Result<u64> {
    let file = File::create(path)?;
    let mut writer = TraceWriter::new(BufWriter::new(file), page_size)?;
    for record in records {
        writer.write_record(&record?)?;
    }
    writer.finish()
}

/// Parameters of the synthetic two-population trace: a steady hot set with
/// Zipf-skewed popularity plus a churn of short-lived transient pages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTraceSpec {
    #[serde(default = "default_page_size")]
    pub page_size: u64,
    pub n_hot_pages: u64,
    pub n_transient_pages: u64,
    pub hot_access_fraction: f64,
    /// Skew of popularity within the hot set; 0 means uniform.
    pub zipf_exponent: f64,
    /// Accesses a transient page receives before it retires for good.
    pub transient_lifetime: u64,
    pub total_records: u64,
    pub writeback_fraction: f64,
    pub instructions_per_record: f64,
    pub rng_seed: u64,
}

fn default_page_size() -> u64 {
    4096
}

impl SyntheticTraceSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.page_size.is_power_of_two() || self.page_size < BLOCK_BYTES {
            return Err(Error::config(format!(
                "page_size {} must be a power of two >= {BLOCK_BYTES}",
                self.page_size
            )));
        }
        for (name, p) in [
            ("hot_access_fraction", self.hot_access_fraction),
            ("writeback_fraction", self.writeback_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::config(format!("{name} {p} outside [0, 1]")));
            }
        }
        if self.hot_access_fraction > 0.0 && self.n_hot_pages == 0 {
            return Err(Error::config(
                "n_hot_pages must be >= 1 when hot_access_fraction > 0",
            ));
        }
        if self.hot_access_fraction < 1.0 && self.transient_lifetime == 0 {
            return Err(Error::config(
                "transient_lifetime must be >= 1 when transient accesses occur",
            ));
        }
        if !(self.zipf_exponent >= 0.0) {
            return Err(Error::config("zipf_exponent must be >= 0"));
        }
        if !(self.instructions_per_record > 0.0) || !self.instructions_per_record.is_finite() {
            return Err(Error::config("instructions_per_record must be positive"));
        }
        let pages = self.n_hot_pages.checked_add(self.n_transient_pages);
        if pages.and_then(|p| p.checked_mul(self.page_size)).is_none() {
            return Err(Error::config("address space overflows u64"));
        }
        Ok(())
    }

    /// Bytes spanned by the hot region followed by the transient region.
    pub fn address_space_bytes(&self) -> u64 {
        (self.n_hot_pages + self.n_transient_pages) * self.page_size
    }
}

/// Deterministic record stream for a [`SyntheticTraceSpec`].
///
/// The per-record draw sequence is fixed and is part of the reproducibility
/// contract: role (hot vs. transient), hot rank (hot only), block offset,
/// then read/writeback.
pub struct TraceGenerator {
    spec: SyntheticTraceSpec,
    rng: ChaCha8Rng,
    /// Unnormalized Zipf CDF over hot ranks; empty when no hot accesses.
    zipf_cdf: Vec<f64>,
    block_mask: u64,
    emitted: u64,
    live_transient: Option<u64>,
    live_remaining: u64,
    failed: bool,
}

impl TraceGenerator {
    pub fn new(spec: SyntheticTraceSpec) -> Result<Self> {
        spec.validate()?;
        let zipf_cdf = if spec.hot_access_fraction > 0.0 {
            let mut cdf = Vec::with_capacity(spec.n_hot_pages as usize);
            let mut acc = 0.0f64;
            for rank in 0..spec.n_hot_pages {
                acc += ((rank + 1) as f64).powf(-spec.zipf_exponent);
                cdf.push(acc);
            }
            cdf
        } else {
            Vec::new()
        };
        let block_mask = spec.page_size / BLOCK_BYTES - 1;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(spec.rng_seed),
            zipf_cdf,
            block_mask,
            emitted: 0,
            live_transient: None,
            live_remaining: 0,
            failed: false,
            spec,
        })
    }

    pub fn spec(&self) -> &SyntheticTraceSpec {
        &self.spec
    }

    fn sample_hot_rank(&mut self) -> u64 {
        let total = *self.zipf_cdf.last().expect("nonempty hot set");
        let x = self.rng.random::<f64>() * total;
        self.zipf_cdf.partition_point(|&c| c <= x) as u64
    }

    fn next_transient_page(&mut self) -> Result<u64> {
        if self.live_remaining == 0 {
            let next = self.live_transient.map_or(0, |i| i + 1);
            if next >= self.spec.n_transient_pages {
                return Err(Error::Capacity(format!(
                    "transient region exhausted after {} pages",
                    self.spec.n_transient_pages
                )));
            }
            self.live_transient = Some(next);
            self.live_remaining = self.spec.transient_lifetime;
        }
        self.live_remaining -= 1;
        Ok(self.spec.n_hot_pages + self.live_transient.unwrap())
    }
}

impl Iterator for TraceGenerator {
    type Item = Result<TraceRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.emitted == self.spec.total_records {
            return None;
        }
        let hot = self.rng.random::<f64>() < self.spec.hot_access_fraction;
        let page = if hot {
            self.sample_hot_rank()
        } else {
            match self.next_transient_page() {
                Ok(p) => p,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        };
        // Power-of-two block count per page, so masking is unbiased.
        let block = self.rng.random::<u64>() & self.block_mask;
        let kind = if self.rng.random::<f64>() < self.spec.writeback_fraction {
            AccessKind::Writeback
        } else {
            AccessKind::Read
        };
        self.emitted += 1;
        let icount = (self.spec.instructions_per_record * self.emitted as f64).round() as u64;
        Some(Ok(TraceRecord {
            icount,
            addr: page * self.spec.page_size + block * BLOCK_BYTES,
            kind,
        }))
    }
}

pub fn generate(spec: &SyntheticTraceSpec) -> Result<TraceGenerator> {
    TraceGenerator::new(spec.clone())
}

/// A replayable source of trace records. Simulations and profiling may
/// stream a source several times; every pass yields the identical records.
#[derive(Debug, Clone)]
pub enum TraceSource {
    File(PathBuf),
    Synthetic(SyntheticTraceSpec),
    Memory(Arc<[TraceRecord]>),
}

impl TraceSource {
    pub fn from_records(records: Vec<TraceRecord>) -> Self {
        TraceSource::Memory(records.into())
    }

    pub fn stream(&self) -> Result<TraceStream> {
        match self {
            TraceSource::File(path) => Ok(TraceStream::File(read_trace(path)?)),
            TraceSource::Synthetic(spec) => Ok(TraceStream::Synthetic(generate(spec)?)),
            TraceSource::Memory(records) => Ok(TraceStream::Memory {
                records: records.clone(),
                next: 0,
            }),
        }
    }

    /// Number of records the source will yield.
    pub fn len(&self) -> Result<u64> {
        match self {
            TraceSource::File(path) => {
                read_trace(path)?; // header must parse
                let bytes = std::fs::metadata(path)?.len();
                if bytes < TRACE_HEADER_LEN || (bytes - TRACE_HEADER_LEN) % TRACE_RECORD_LEN != 0 {
                    return Err(Error::Format(format!(
                        "file length {bytes} is not a whole number of records"
                    )));
                }
                Ok((bytes - TRACE_HEADER_LEN) / TRACE_RECORD_LEN)
            }
            TraceSource::Synthetic(spec) => Ok(spec.total_records),
            TraceSource::Memory(records) => Ok(records.len() as u64),
        }
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(self.len()? == 0)
    }

    /// Summary of the source for report config echoes.
    pub fn echo(&self) -> serde_json::Value {
        match self {
            TraceSource::File(path) => serde_json::json!({ "file": path.display().to_string() }),
            TraceSource::Synthetic(spec) => serde_json::json!({ "synthetic": spec }),
            TraceSource::Memory(records) => {
                serde_json::json!({ "in_memory": { "records": records.len() } })
            }
        }
    }
}

pub enum TraceStream {
    File(TraceReader<BufReader<File>>),
    Synthetic(TraceGenerator),
    Memory { records: Arc<[TraceRecord]>, next: usize },
}

impl Iterator for TraceStream {
    type Item = Result<TraceRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            TraceStream::File(r) => r.next(),
            TraceStream::Synthetic(g) => g.next(),
            TraceStream::Memory { records, next } => {
                let record = *records.get(*next)?;
                *next += 1;
                Some(Ok(record))
            }
        }
    }
}

/// One point of the hot-page cumulative distribution: after the hottest
/// `page_rank_fraction` of pages, `access_fraction` of accesses are covered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub page_rank_fraction: f64,
    pub access_fraction: f64,
}

/// Cumulative access distribution with pages sorted from hottest to
/// coldest (ties broken by ascending page id).
pub fn cdf(counts: &PageAccessCounts) -> Result<Vec<CdfPoint>> {
    if counts.is_empty() {
        return Err(Error::domain("cdf of empty page counts"));
    }
    let sorted = counts.sorted_desc();
    let n_pages = sorted.len() as f64;
    let total = counts.total_accesses() as f64;
    let mut acc = 0u64;
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, &(_page, count))| {
            acc += count;
            CdfPoint {
                page_rank_fraction: (i + 1) as f64 / n_pages,
                access_fraction: acc as f64 / total,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiler::profile;

    fn spec() -> SyntheticTraceSpec {
        SyntheticTraceSpec {
            page_size: 4096,
            n_hot_pages: 1000,
            n_transient_pages: 100_000,
            hot_access_fraction: 0.9,
            zipf_exponent: 0.8,
            transient_lifetime: 10,
            total_records: 10_000,
            writeback_fraction: 0.25,
            instructions_per_record: 7.7,
            rng_seed: 42,
        }
    }

    #[test]
    fn degenerate_hot_set_targets_one_page() {
        let s = SyntheticTraceSpec {
            hot_access_fraction: 1.0,
            n_hot_pages: 1,
            total_records: 500,
            ..spec()
        };
        for r in generate(&s).unwrap() {
            assert_eq!(r.unwrap().page(4096), 0);
        }
    }

    #[test]
    fn transient_retirement_is_exact() {
        let s = SyntheticTraceSpec {
            hot_access_fraction: 0.0,
            transient_lifetime: 10,
            total_records: 100,
            ..spec()
        };
        let records: Vec<_> = generate(&s).unwrap().map(|r| r.unwrap()).collect();
        let counts = profile(records.iter().copied().map(Ok), 4096).unwrap();
        assert_eq!(counts.pages(), 10);
        assert!(counts.iter().all(|(_, &c)| c == 10));
    }

    #[test]
    fn hot_share_matches_spec_fraction() {
        let s = SyntheticTraceSpec {
            total_records: 1_000_000,
            ..spec()
        };
        let hot = generate(&s)
            .unwrap()
            .filter(|r| r.as_ref().unwrap().page(4096) < s.n_hot_pages)
            .count();
        let share = hot as f64 / s.total_records as f64;
        assert!((share - 0.9).abs() <= 0.01, "hot share {share}");
    }

    #[test]
    fn generation_is_reproducible() {
        let a: Vec<_> = generate(&spec()).unwrap().map(|r| r.unwrap()).collect();
        let b: Vec<_> = generate(&spec()).unwrap().map(|r| r.unwrap()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn icount_is_monotone_and_scaled() {
        let records: Vec<_> = generate(&spec()).unwrap().map(|r| r.unwrap()).collect();
        for pair in records.windows(2) {
            assert!(pair[1].icount >= pair[0].icount);
        }
        let last = records.last().unwrap().icount;
        assert_eq!(last, (7.7f64 * 10_000.0).round() as u64);
    }

    #[test]
    fn transient_exhaustion_is_a_capacity_error() {
        let s = SyntheticTraceSpec {
            hot_access_fraction: 0.0,
            n_transient_pages: 3,
            transient_lifetime: 2,
            total_records: 10,
            ..spec()
        };
        let result: Result<Vec<_>> = generate(&s).unwrap().collect();
        assert!(matches!(result, Err(Error::Capacity(_))));
    }

    #[test]
    fn empty_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.bin");
        write_trace(&path, 4096, std::iter::empty()).unwrap();
        let mut reader = read_trace(&path).unwrap();
        assert_eq!(reader.header().page_size, 4096);
        assert!(reader.next().is_none());
    }

    #[test]
    fn hand_written_records_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("three.bin");
        let records = vec![
            TraceRecord { icount: 1, addr: 0x40, kind: AccessKind::Read },
            TraceRecord { icount: 5, addr: 0x1000, kind: AccessKind::Writeback },
            TraceRecord { icount: 5, addr: 0xffff_0000, kind: AccessKind::Read },
        ];
        write_trace(&path, 4096, records.iter().copied().map(Ok)).unwrap();
        let back: Vec<_> = read_trace(&path).unwrap().map(|r| r.unwrap()).collect();
        assert_eq!(back, records);
    }

    #[test]
    fn corrupt_magic_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        std::fs::write(&path, b"NOTATRACE_______").unwrap();
        assert!(matches!(read_trace(&path), Err(Error::Format(_))));
    }

    #[test]
    fn non_monotone_icount_names_the_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mono.bin");
        let records = vec![
            TraceRecord { icount: 10, addr: 0, kind: AccessKind::Read },
            TraceRecord { icount: 9, addr: 64, kind: AccessKind::Read },
        ];
        write_trace(&path, 4096, records.into_iter().map(Ok)).unwrap();
        let result: Result<Vec<_>> = read_trace(&path).unwrap().collect();
        match result {
            Err(Error::Validation { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn generated_stream_survives_write_and_reread() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gen.bin");
        let s = SyntheticTraceSpec {
            total_records: 50_000,
            rng_seed: 7,
            ..spec()
        };
        write_trace(&path, s.page_size as u32, generate(&s).unwrap()).unwrap();
        let reread: Vec<_> = read_trace(&path).unwrap().map(|r| r.unwrap()).collect();
        let direct: Vec<_> = generate(&s).unwrap().map(|r| r.unwrap()).collect();
        assert_eq!(reread, direct);
    }

    #[test]
    fn cdf_of_skewed_counts() {
        let mut counts = PageAccessCounts::new(4096);
        for (page, n) in [(0u64, 90u64), (1, 5), (2, 5)] {
            counts.add(page, n);
        }
        let points = cdf(&counts).unwrap();
        assert_eq!(points.len(), 3);
        assert!((points[0].page_rank_fraction - 1.0 / 3.0).abs() < 1e-12);
        assert!((points[0].access_fraction - 0.90).abs() < 1e-12);
        assert!((points[1].access_fraction - 0.95).abs() < 1e-12);
        assert_eq!(points[2].page_rank_fraction, 1.0);
        assert_eq!(points[2].access_fraction, 1.0);
    }

    #[test]
    fn cdf_of_uniform_counts_is_diagonal() {
        let mut counts = PageAccessCounts::new(4096);
        for page in 0..8u64 {
            counts.add(page, 3);
        }
        for p in cdf(&counts).unwrap() {
            assert!((p.access_fraction - p.page_rank_fraction).abs() < 1e-12);
        }
    }

    #[test]
    fn cdf_of_generated_trace_is_hot_heavy() {
        let s = SyntheticTraceSpec {
            n_hot_pages: 1000,
            zipf_exponent: 0.8,
            hot_access_fraction: 0.9,
            total_records: 1_000_000,
            ..spec()
        };
        let counts = profile(generate(&s).unwrap(), s.page_size).unwrap();
        let points = cdf(&counts).unwrap();
        // Top 10% of pages must serve at least 85% of accesses.
        let at_decile = points
            .iter()
            .find(|p| p.page_rank_fraction >= 0.10)
            .unwrap();
        assert!(at_decile.access_fraction >= 0.85, "{:?}", at_decile);
    }

    #[test]
    fn cdf_rejects_empty_counts() {
        let counts = PageAccessCounts::new(4096);
        assert!(matches!(cdf(&counts), Err(Error::Domain(_))));
    }
}
