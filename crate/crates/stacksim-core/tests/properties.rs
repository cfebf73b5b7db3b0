//! Randomized invariants: trace round trips, ranking properties, and the
//! literal-transcription oracle for the memory-fraction computation.

use proptest::prelude::*;

use stacksim_core::partition::compute_memory_fraction;
use stacksim_core::profiler::{profile, top_k, PageAccessCounts};
use stacksim_core::trace::{
    cdf, generate, read_trace, write_trace, AccessKind, SyntheticTraceSpec, TraceRecord,
};

/// Direct transcription of the memory-fraction recurrence, kept separate
/// from the library implementation on purpose: sort pages by count
/// (descending, ties by id), then allocate while
/// `totalAccesses >= memFrames * cacheAHF`, stopping at page or frame
/// exhaustion.
fn literal_memory_fraction(mut pages: Vec<(u64, u64)>, cache_hits: u64, frames: u64) -> u64 {
    let ahf = cache_hits as f64 / frames as f64;
    pages.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut mem_frames = 0u64;
    let mut total_accesses = 0u64;
    loop {
        if (total_accesses as f64) < mem_frames as f64 * ahf {
            break;
        }
        if pages.is_empty() || mem_frames == frames {
            break;
        }
        let top = pages.remove(0);
        mem_frames += 1;
        total_accesses += top.1;
    }
    mem_frames
}

fn counts_of(pairs: &[(u64, u64)]) -> PageAccessCounts {
    let mut counts = PageAccessCounts::new(4096);
    for &(page, count) in pairs {
        counts.add(page, count);
    }
    counts
}

fn arb_records() -> impl Strategy<Value = Vec<TraceRecord>> {
    prop::collection::vec((0u64..1000, 0u64..(1 << 24), prop::bool::ANY), 0..200).prop_map(
        |raw| {
            let mut icount = 0;
            raw.into_iter()
                .map(|(delta, addr, wb)| {
                    icount += delta;
                    TraceRecord {
                        icount,
                        addr: addr & !63,
                        kind: if wb { AccessKind::Writeback } else { AccessKind::Read },
                    }
                })
                .collect()
        },
    )
}

proptest! {
    #[test]
    fn trace_files_round_trip_byte_identically(records in arb_records()) {
        let dir = tempfile::tempdir().unwrap();
        let path_a = dir.path().join("a.bin");
        let path_b = dir.path().join("b.bin");
        write_trace(&path_a, 4096, records.iter().copied().map(Ok)).unwrap();
        let reread: Vec<_> = read_trace(&path_a).unwrap().map(|r| r.unwrap()).collect();
        prop_assert_eq!(&reread, &records);
        write_trace(&path_b, 4096, reread.into_iter().map(Ok)).unwrap();
        prop_assert_eq!(std::fs::read(&path_a).unwrap(), std::fs::read(&path_b).unwrap());
    }

    #[test]
    fn memory_fraction_matches_the_literal_transcription(
        pairs in prop::collection::btree_map(0u64..256, 1u64..10_000, 0..64),
        cache_hits in 0u64..200_000,
        frames in 1u64..=64,
    ) {
        let pairs: Vec<(u64, u64)> = pairs.into_iter().collect();
        let plan = compute_memory_fraction(&counts_of(&pairs), cache_hits, frames).unwrap();
        let oracle = literal_memory_fraction(pairs, cache_hits, frames);
        prop_assert_eq!(plan.mem_frames, oracle);
    }

    #[test]
    fn cdf_is_monotone_and_ends_at_one(
        pairs in prop::collection::btree_map(0u64..512, 1u64..1_000, 1..128),
    ) {
        let pairs: Vec<(u64, u64)> = pairs.into_iter().collect();
        let points = cdf(&counts_of(&pairs)).unwrap();
        for w in points.windows(2) {
            prop_assert!(w[1].page_rank_fraction >= w[0].page_rank_fraction);
            prop_assert!(w[1].access_fraction >= w[0].access_fraction - 1e-12);
        }
        let last = points.last().unwrap();
        prop_assert_eq!(last.page_rank_fraction, 1.0);
        prop_assert_eq!(last.access_fraction, 1.0);
    }

    #[test]
    fn top_k_is_always_a_prefix(
        pairs in prop::collection::btree_map(0u64..128, 1u64..100, 1..40),
        k in 0usize..40,
    ) {
        let counts = counts_of(&pairs.into_iter().collect::<Vec<_>>());
        let small = top_k(&counts, k);
        let big = top_k(&counts, k + 1);
        prop_assert_eq!(&small.pages[..], &big.pages[..small.pages.len()]);
    }

    #[test]
    fn generated_counts_sum_to_total_records(
        seed in any::<u64>(),
        hot_fraction in 0.0f64..=1.0,
        total in 1u64..4_000,
    ) {
        let spec = SyntheticTraceSpec {
            page_size: 4096,
            n_hot_pages: 64,
            n_transient_pages: 1 << 20,
            hot_access_fraction: hot_fraction,
            zipf_exponent: 0.7,
            transient_lifetime: 3,
            total_records: total,
            writeback_fraction: 0.25,
            instructions_per_record: 1.5,
            rng_seed: seed,
        };
        let counts = profile(generate(&spec).unwrap(), 4096).unwrap();
        prop_assert_eq!(counts.total_accesses(), total);
    }
}
