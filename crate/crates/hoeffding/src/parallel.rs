//! Chunk-parallel Monte Carlo. Chunks are merged by summing counts, so the
//! result is identical to the sequential run for any number of workers.

use hoeffding_core::montecarlo::{ChunkCounts, EventSetEstimate, EventSetRun};
use hoeffding_core::{EventSpec, IncrementLaw, Result};
use rayon::prelude::*;

pub fn estimate_events(
    law: &IncrementLaw,
    specs: &[EventSpec],
    n: u64,
    trials: u64,
    seed: u64,
    gamma: f64,
) -> Result<EventSetEstimate> {
    let run = EventSetRun::new(law, specs, n, trials, seed)?;
    let chunks = (0..run.chunks())
        .into_par_iter()
        .map(|c| run.run_chunk(c))
        .collect::<Result<Vec<_>>>()?;
    let counts = chunks
        .iter()
        .fold(ChunkCounts::default(), |acc, c| acc.merge(c));
    EventSetEstimate::from_counts(&counts, law, specs, n, seed, gamma)
}

/// Runs `estimate_events` on a dedicated pool of `threads` workers.
pub fn estimate_events_with_threads(
    threads: usize,
    law: &IncrementLaw,
    specs: &[EventSpec],
    n: u64,
    trials: u64,
    seed: u64,
    gamma: f64,
) -> Result<EventSetEstimate> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| estimate_events(law, specs, n, trials, seed, gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use hoeffding_core::montecarlo::{estimate_events as sequential, CHUNK_SIZE, REPORT_GAMMA};
    use hoeffding_core::EventVariant;

    #[test]
    fn worker_count_does_not_change_counts() {
        let law = IncrementLaw::two_point_bounded(0.5).unwrap();
        let specs = [
            EventSpec::new(2.0, 3.0, EventVariant::StoppedAnyK).unwrap(),
            EventSpec::new(2.0, 3.0, EventVariant::FinalOnly).unwrap(),
        ];
        let trials = 4 * CHUNK_SIZE + 77;
        let base = sequential(&law, &specs, 12, trials, 5, REPORT_GAMMA).unwrap();
        for threads in [1, 2, 3, 8] {
            let par =
                estimate_events_with_threads(threads, &law, &specs, 12, trials, 5, REPORT_GAMMA)
                    .unwrap();
            assert_eq!(par, base, "threads = {threads}");
        }
    }
}
