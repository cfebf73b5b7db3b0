//! Offline page-frequency profiling, hot-page ranking, classification
//! accuracy, and hot-page stability over time.

use std::collections::BTreeMap;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{TraceRecord, TraceSource};

/// Accesses per page gathered by a profiling pass. Reads and writebacks
/// count alike; pages never seen are absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PageAccessCounts {
    page_size: u64,
    total_accesses: u64,
    counts: BTreeMap<u64, u64>,
}

impl PageAccessCounts {
    pub fn new(page_size: u64) -> Self {
        Self {
            page_size,
            total_accesses: 0,
            counts: BTreeMap::new(),
        }
    }

    pub fn page_size(&self) -> u64 {
        self.page_size
    }

    pub fn total_accesses(&self) -> u64 {
        self.total_accesses
    }

    pub fn pages(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn get(&self, page: u64) -> u64 {
        self.counts.get(&page).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&u64, &u64)> {
        self.counts.iter()
    }

    pub fn record(&mut self, page: u64) {
        self.add(page, 1);
    }

    pub fn add(&mut self, page: u64, n: u64) {
        if n == 0 {
            return;
        }
        *self.counts.entry(page).or_insert(0) += n;
        self.total_accesses += n;
    }

    /// Pointwise sum with another profile of the same page size.
    pub fn merge(&mut self, other: &PageAccessCounts) -> Result<()> {
        if other.page_size != self.page_size {
            return Err(Error::domain(format!(
                "cannot merge profiles with page sizes {} and {}",
                self.page_size, other.page_size
            )));
        }
        for (&page, &n) in other.counts.iter() {
            self.add(page, n);
        }
        Ok(())
    }

    /// Pages sorted by descending count, ties broken by ascending page id.
    pub fn sorted_desc(&self) -> Vec<(u64, u64)> {
        let mut v: Vec<(u64, u64)> = self.counts.iter().map(|(&p, &c)| (p, c)).collect();
        v.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }
}

/// Hottest pages first, as selected by [`top_k`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HotPageManifest {
    pub pages: Vec<u64>,
    /// Number of trace records behind the ranking.
    pub source_records: u64,
}

impl HotPageManifest {
    pub fn len(&self) -> usize {
        self.pages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pages.is_empty()
    }
}

/// Counts records per page over a record stream.
pub fn profile(
    records: impl IntoIterator<Item = Result<TraceRecord>>,
    page_size: u64,
) -> Result<PageAccessCounts> {
    if !page_size.is_power_of_two() {
        return Err(Error::domain(format!(
            "page_size {page_size} must be a power of two"
        )));
    }
    let shift = page_size.trailing_zeros();
    let mut counts = PageAccessCounts::new(page_size);
    for record in records {
        counts.record(record?.addr >> shift);
    }
    Ok(counts)
}

pub fn profile_source(source: &TraceSource, page_size: u64) -> Result<PageAccessCounts> {
    profile(source.stream()?, page_size)
}

/// The `min(k, pages)` hottest pages, descending count, ties by page id.
pub fn top_k(counts: &PageAccessCounts, k: usize) -> HotPageManifest {
    let mut sorted = counts.sorted_desc();
    sorted.truncate(k);
    HotPageManifest {
        pages: sorted.into_iter().map(|(page, _)| page).collect(),
        source_records: counts.total_accesses(),
    }
}

/// Result of comparing two hot-page classifications.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    /// Shared fraction of the two top-k sets, in [0, 1].
    pub value: f64,
    /// The k actually compared over.
    pub k_used: usize,
    /// Set when a manifest was shorter than the requested k.
    pub truncated: bool,
}

/// Ratio of pages shared by the two manifests' top-k sets. When a manifest
/// has fewer than `k` entries the comparison shrinks to the shorter length
/// and is flagged as truncated.
pub fn classification_accuracy(
    sample: &HotPageManifest,
    full: &HotPageManifest,
    k: usize,
) -> Result<Accuracy> {
    if k == 0 {
        return Err(Error::domain("classification accuracy with k = 0"));
    }
    let k_used = k.min(sample.len()).min(full.len());
    let truncated = k_used < k;
    if k_used == 0 {
        return Ok(Accuracy { value: 0.0, k_used, truncated });
    }
    let sample_set: HashSet<u64> = sample.pages[..k_used].iter().copied().collect();
    let shared = full.pages[..k_used]
        .iter()
        .filter(|p| sample_set.contains(p))
        .count();
    Ok(Accuracy {
        value: shared as f64 / k_used as f64,
        k_used,
        truncated,
    })
}

/// Accuracy of a prefix-based classification at one sample fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub fraction: f64,
    pub records_profiled: u64,
    pub accuracy: f64,
}

/// For each fraction `f`, profiles the first `f` share of the trace, takes
/// its top-k, and compares against the full-trace top-k. Fractions must be
/// ascending and end at exactly 1.0, where the accuracy is 1.0 by identity.
pub fn accuracy_vs_sample_size(
    source: &TraceSource,
    fractions: &[f64],
    k: usize,
    page_size: u64,
) -> Result<Vec<SamplePoint>> {
    if fractions.is_empty() || *fractions.last().unwrap() != 1.0 {
        return Err(Error::domain("fractions must end at 1.0"));
    }
    if fractions.windows(2).any(|w| w[0] >= w[1]) || fractions[0] < 0.0 {
        return Err(Error::domain("fractions must be sorted ascending in [0, 1]"));
    }
    if k == 0 {
        return Err(Error::domain("k must be positive"));
    }
    let total = source.len()?;
    if total == 0 {
        return Err(Error::domain("cannot sample an empty trace"));
    }
    if !page_size.is_power_of_two() {
        return Err(Error::domain("page_size must be a power of two"));
    }

    let boundaries: Vec<u64> = fractions
        .iter()
        .map(|f| ((f * total as f64).floor() as u64).min(total))
        .collect();

    // One streaming pass; snapshot the ranking at each boundary.
    let shift = page_size.trailing_zeros();
    let mut counts = PageAccessCounts::new(page_size);
    let mut snapshots: Vec<(u64, HotPageManifest)> = Vec::with_capacity(boundaries.len());
    let mut seen = 0u64;
    let mut next = 0usize;
    for record in source.stream()? {
        while next < boundaries.len() && boundaries[next] == seen {
            snapshots.push((seen, top_k(&counts, k)));
            next += 1;
        }
        counts.record(record?.addr >> shift);
        seen += 1;
    }
    while next < boundaries.len() {
        snapshots.push((seen.min(boundaries[next]), top_k(&counts, k)));
        next += 1;
    }

    let full = top_k(&counts, k);
    fractions
        .iter()
        .zip(snapshots)
        .map(|(&fraction, (records_profiled, manifest))| {
            let accuracy = classification_accuracy(&manifest, &full, k)?;
            Ok(SamplePoint {
                fraction,
                records_profiled,
                accuracy: accuracy.value,
            })
        })
        .collect()
}

/// Share of one time window served by the manifest's top-k pages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowPoint {
    pub window_index: u64,
    pub start_record: u64,
    pub fraction: f64,
}

/// Per-window fraction of records whose page is in the manifest's top-k.
/// Only complete windows are reported; a trailing partial window is dropped.
pub fn memory_serve_fraction_over_time(
    source: &TraceSource,
    manifest: &HotPageManifest,
    k: usize,
    window_records: u64,
    page_size: u64,
) -> Result<Vec<WindowPoint>> {
    if window_records == 0 {
        return Err(Error::domain("window_records must be positive"));
    }
    if !page_size.is_power_of_two() {
        return Err(Error::domain("page_size must be a power of two"));
    }
    let shift = page_size.trailing_zeros();
    let resident: HashSet<u64> = manifest.pages.iter().take(k).copied().collect();
    let mut points = Vec::new();
    let mut in_window = 0u64;
    let mut served = 0u64;
    let mut index = 0u64;
    for record in source.stream()? {
        if resident.contains(&(record?.addr >> shift)) {
            served += 1;
        }
        in_window += 1;
        if in_window == window_records {
            points.push(WindowPoint {
                window_index: points.len() as u64,
                start_record: index + 1 - window_records,
                fraction: served as f64 / window_records as f64,
            });
            in_window = 0;
            served = 0;
        }
        index += 1;
    }
    Ok(points)
}
