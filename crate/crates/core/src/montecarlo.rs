//! Monte Carlo estimates of event probabilities with exact binomial intervals.
//!
//! Trials are split into chunks of [`CHUNK_SIZE`] paths. Chunk `c` draws its paths
//! sequentially from substream `c` of the seed, so hit counts depend only on
//! `(law, spec, n, trials, seed)` and chunks can be evaluated in any order.

use alloc::vec;
use alloc::vec::Vec;

use crate::bounds::LogProb;
use crate::processes::{
    event_hit, EventSpec, EventVariant, IncrementLaw, PathRecord, PathSimulator, StreamKey,
};
use crate::special::beta_quantile;
use crate::{Error, Result};

pub const CHUNK_SIZE: u64 = 1 << 16;
/// Confidence level for PASS/FLAG decisions.
pub const VERIFY_GAMMA: f64 = 0.999;
/// Confidence level for reported intervals.
pub const REPORT_GAMMA: f64 = 0.95;

/// Two-sided Clopper-Pearson interval for `hits` successes in `trials` at level `gamma`.
pub fn clopper_pearson(hits: u64, trials: u64, gamma: f64) -> Result<(f64, f64)> {
    check_gamma(gamma)?;
    check_trials(trials)?;
    if hits > trials {
        return Err(Error::OutOfDomain {
            name: "hits",
            value: hits as f64,
            expected: "<= trials",
        });
    }
    let alpha = 1.0 - gamma;
    let (k, n) = (hits as f64, trials as f64);
    let p_hat = k / n;
    let low = if hits == 0 {
        0.0
    } else {
        beta_quantile(k, n - k + 1.0, alpha / 2.0)
    };
    let high = if hits == trials {
        1.0
    } else {
        beta_quantile(k + 1.0, n - k, 1.0 - alpha / 2.0)
    };
    Ok((low.min(p_hat), high.max(p_hat)))
}

fn check_gamma(gamma: f64) -> Result<f64> {
    if gamma.is_finite() && gamma > 0.0 && gamma < 1.0 {
        Ok(gamma)
    } else {
        Err(Error::OutOfDomain {
            name: "gamma",
            value: gamma,
            expected: "in (0, 1)",
        })
    }
}

fn check_trials(trials: u64) -> Result<u64> {
    if trials == 0 {
        return Err(Error::OutOfDomain {
            name: "trials",
            value: 0.0,
            expected: ">= 1",
        });
    }
    Ok(trials)
}

/// Empirical event probability with its interval and everything needed to reproduce it.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub hits: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub gamma: f64,
    pub seed: u64,
    pub n: u64,
    pub law: IncrementLaw,
    pub spec: EventSpec,
}

impl Estimate {
    pub fn from_counts(
        hits: u64,
        trials: u64,
        gamma: f64,
        seed: u64,
        n: u64,
        law: IncrementLaw,
        spec: EventSpec,
    ) -> Result<Self> {
        let (ci_low, ci_high) = clopper_pearson(hits, trials, gamma)?;
        Ok(Estimate {
            hits,
            trials,
            p_hat: hits as f64 / trials as f64,
            ci_low,
            ci_high,
            gamma,
            seed,
            n,
            law,
            spec,
        })
    }
}

/// Outcome of checking an estimate against a claimed upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Flag,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Flag => "flag",
        }
    }
}

/// `Pass` unless the whole interval lies above the bound.
pub fn verify_bound(estimate: &Estimate, bound: LogProb) -> Verdict {
    if estimate.ci_low <= bound.value() {
        Verdict::Pass
    } else {
        Verdict::Flag
    }
}

/// `bound / p_hat`; without hits only `p <= ci_high` can be reported.
pub fn tightness_ratio(estimate: &Estimate, bound: LogProb) -> Result<f64> {
    if estimate.hits == 0 {
        return Err(Error::ZeroHits {
            ci_high: estimate.ci_high,
        });
    }
    Ok(bound.value() / estimate.p_hat)
}

/// Checks that every spec can be evaluated on the same paths and returns their truncation level.
fn shared_truncation(specs: &[EventSpec]) -> Result<Option<f64>> {
    let mut level = None;
    for spec in specs {
        if let EventVariant::TruncatedAnyK { y } = spec.variant {
            match level {
                None => level = Some(y),
                Some(prev) if prev != y => {
                    return Err(Error::TruncationMismatch {
                        event: y,
                        path: prev,
                    })
                }
                Some(_) => {}
            }
        }
    }
    Ok(level)
}

/// Number of chunks covering `trials` paths.
pub fn chunk_count(trials: u64) -> u64 {
    trials.div_ceil(CHUNK_SIZE)
}

/// Hit counts of one chunk for a family of events evaluated on shared paths.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChunkCounts {
    pub trials: u64,
    pub hits: Vec<u64>,
    /// Paths on which `specs[i + 1]` occurred without `specs[i]`.
    pub nesting_violations: u64,
}

impl ChunkCounts {
    /// Commutative merge.
    pub fn merge(mut self, other: &ChunkCounts) -> ChunkCounts {
        if self.hits.is_empty() {
            self.hits = vec![0; other.hits.len()];
        }
        self.trials += other.trials;
        for (a, b) in self.hits.iter_mut().zip(&other.hits) {
            *a += b;
        }
        self.nesting_violations += other.nesting_violations;
        self
    }
}

/// Prepared simulation for a family of events sharing `(law, n, trials, seed)`.
#[derive(Debug, Clone)]
pub struct EventSetRun {
    simulator: PathSimulator,
    key: StreamKey,
    specs: Vec<EventSpec>,
    trials: u64,
}

impl EventSetRun {
    /// `specs` should be ordered from the largest event to the smallest for nesting checks.
    pub fn new(
        law: &IncrementLaw,
        specs: &[EventSpec],
        n: u64,
        trials: u64,
        seed: u64,
    ) -> Result<Self> {
        check_trials(trials)?;
        if specs.is_empty() {
            return Err(Error::MissingParameter { name: "event spec" });
        }
        let y = shared_truncation(specs)?;
        Ok(EventSetRun {
            simulator: PathSimulator::new(law, n, y)?,
            key: StreamKey::new(seed),
            specs: specs.to_vec(),
            trials,
        })
    }

    pub fn chunks(&self) -> u64 {
        chunk_count(self.trials)
    }

    /// Simulates chunk `index` and counts the hits of every event.
    pub fn run_chunk(&self, index: u64) -> Result<ChunkCounts> {
        let start = index * CHUNK_SIZE;
        let size = self.trials.saturating_sub(start).min(CHUNK_SIZE);
        let mut rng = self.key.stream(index);
        let mut record = PathRecord::default();
        let mut counts = ChunkCounts {
            trials: size,
            hits: vec![0; self.specs.len()],
            nesting_violations: 0,
        };
        let mut outcome = vec![false; self.specs.len()];
        for _ in 0..size {
            self.simulator.simulate_into(&mut rng, &mut record);
            for (slot, spec) in outcome.iter_mut().zip(&self.specs) {
                *slot = event_hit(&record, spec)?;
            }
            for (count, &hit) in counts.hits.iter_mut().zip(&outcome) {
                *count += hit as u64;
            }
            if outcome.windows(2).any(|w| w[1] && !w[0]) {
                counts.nesting_violations += 1;
            }
        }
        Ok(counts)
    }

    /// Runs every chunk in order.
    pub fn run_sequential(&self) -> Result<ChunkCounts> {
        (0..self.chunks()).try_fold(ChunkCounts::default(), |acc, c| {
            Ok(acc.merge(&self.run_chunk(c)?))
        })
    }

    pub fn specs(&self) -> &[EventSpec] {
        &self.specs
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn seed(&self) -> u64 {
        self.key.seed()
    }
}

/// Estimates of several events on the same simulated paths.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSetEstimate {
    pub estimates: Vec<Estimate>,
    pub nesting_violations: u64,
}

impl EventSetEstimate {
    pub fn from_counts(
        counts: &ChunkCounts,
        law: &IncrementLaw,
        specs: &[EventSpec],
        n: u64,
        seed: u64,
        gamma: f64,
    ) -> Result<Self> {
        let estimates = counts
            .hits
            .iter()
            .zip(specs)
            .map(|(&hits, spec)| {
                Estimate::from_counts(hits, counts.trials, gamma, seed, n, law.clone(), *spec)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EventSetEstimate {
            estimates,
            nesting_violations: counts.nesting_violations,
        })
    }
}

pub fn estimate_events(
    law: &IncrementLaw,
    specs: &[EventSpec],
    n: u64,
    trials: u64,
    seed: u64,
    gamma: f64,
) -> Result<EventSetEstimate> {
    check_gamma(gamma)?;
    let run = EventSetRun::new(law, specs, n, trials, seed)?;
    let counts = run.run_sequential()?;
    EventSetEstimate::from_counts(&counts, law, specs, n, seed, gamma)
}

/// Estimates `P(event)` from `trials` simulated paths.
pub fn estimate_event(
    law: &IncrementLaw,
    spec: &EventSpec,
    n: u64,
    trials: u64,
    seed: u64,
    gamma: f64,
) -> Result<Estimate> {
    let mut set = estimate_events(law, core::slice::from_ref(spec), n, trials, seed, gamma)?;
    Ok(set.estimates.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{bound_hn, TailQuery};
    use crate::oracle::{exact_event_probability, LatticeLaw};
    use crate::processes::unit_interval;
    use rand_core::SeedableRng;
    use statrs::distribution::{Beta, ContinuousCDF};

    fn cp_reference(k: u64, n: u64, gamma: f64) -> (f64, f64) {
        let a = (1.0 - gamma) / 2.0;
        let (k, n) = (k as f64, n as f64);
        let lo = if k == 0.0 {
            0.0
        } else {
            Beta::new(k, n - k + 1.0).unwrap().inverse_cdf(a)
        };
        let hi = if k == n {
            1.0
        } else {
            Beta::new(k + 1.0, n - k).unwrap().inverse_cdf(1.0 - a)
        };
        (lo, hi)
    }

    #[test]
    fn clopper_pearson_matches_beta_quantiles() {
        for &(k, n) in &[
            (1, 10),
            (5, 10),
            (9, 10),
            (3, 1000),
            (250, 1000),
            (2500, 10_000),
        ] {
            for &g in &[0.95, 0.999] {
                let (lo, hi) = clopper_pearson(k, n, g).unwrap();
                let (rlo, rhi) = cp_reference(k, n, g);
                assert!(
                    (lo - rlo).abs() <= 1e-9 * rlo.max(1e-12),
                    "{k}/{n} {lo} {rlo}"
                );
                assert!((hi - rhi).abs() <= 1e-9 * rhi, "{k}/{n} {hi} {rhi}");
            }
        }
    }

    #[test]
    fn clopper_pearson_single_hit_closed_form() {
        // One hit: the lower end is 1 - (1 - alpha / 2)^(1 / n).
        for &n in &[10u64, 1000, 1_000_000] {
            let (lo, _) = clopper_pearson(1, n, 0.95).unwrap();
            let exact = -f64::exp_m1(f64::ln(0.975) / n as f64);
            assert!((lo / exact - 1.0).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn clopper_pearson_edges() {
        let (lo, hi) = clopper_pearson(0, 100, 0.95).unwrap();
        assert_eq!(lo, 0.0);
        // Zero hits: upper end is 1 - (alpha / 2)^(1 / n).
        assert!((hi - (1.0 - 0.025f64.powf(0.01))).abs() < 1e-12);
        let (lo, hi) = clopper_pearson(100, 100, 0.95).unwrap();
        assert_eq!(hi, 1.0);
        assert!((lo - 0.025f64.powf(0.01)).abs() < 1e-12);
        assert!(clopper_pearson(3, 2, 0.95).is_err());
        assert!(clopper_pearson(0, 0, 0.95).is_err());
        assert!(clopper_pearson(1, 2, 1.0).is_err());
        assert!(clopper_pearson(1, 2, 0.0).is_err());
    }

    #[test]
    fn coverage_is_at_least_nominal_minus_two_percent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut covered = 0;
        for _ in 0..1000 {
            let hits = (0..10_000)
                .filter(|_| unit_interval(&mut rng) < 0.25)
                .count() as u64;
            let (lo, hi) = clopper_pearson(hits, 10_000, 0.95).unwrap();
            covered += (lo <= 0.25 && 0.25 <= hi) as u32;
        }
        assert!(covered >= 930, "coverage {covered}/1000");
    }

    #[test]
    fn certain_and_impossible_events() {
        let law = IncrementLaw::two_point_bounded(1.0).unwrap();
        let spec = EventSpec::new(-1e6, 1e6, EventVariant::FinalOnly).unwrap();
        let e = estimate_event(&law, &spec, 5, 100, 1, REPORT_GAMMA).unwrap();
        assert_eq!((e.p_hat, e.ci_high), (1.0, 1.0));
        let spec = EventSpec::new(6.0, 1e6, EventVariant::StoppedAnyK).unwrap();
        let e = estimate_event(&law, &spec, 5, 100, 1, REPORT_GAMMA).unwrap();
        assert_eq!((e.p_hat, e.ci_low), (0.0, 0.0));
    }

    #[test]
    fn rademacher_matches_the_oracle() {
        let atoms = [(1.0, 0.5), (-1.0, 0.5)];
        let exact = exact_event_probability(&LatticeLaw::new(&atoms).unwrap(), 2, 2.0, 2f64.sqrt())
            .unwrap();
        let law = IncrementLaw::discrete(&atoms).unwrap();
        let spec = EventSpec::new(2.0, 2f64.sqrt(), EventVariant::StoppedAnyK).unwrap();
        let e = estimate_event(&law, &spec, 2, 1_000_000, 42, VERIFY_GAMMA).unwrap();
        assert!(
            e.ci_low <= exact.p_stopped && exact.p_stopped <= e.ci_high,
            "{e:?}"
        );
    }

    #[test]
    fn estimates_are_reproducible_and_chunk_order_free() {
        let law = IncrementLaw::two_point_extremal(0.5).unwrap();
        let spec = EventSpec::new(2.0, 3.0, EventVariant::StoppedAnyK).unwrap();
        let trials = 3 * CHUNK_SIZE + 123;
        let a = estimate_event(&law, &spec, 10, trials, 9, REPORT_GAMMA).unwrap();
        let b = estimate_event(&law, &spec, 10, trials, 9, REPORT_GAMMA).unwrap();
        assert_eq!(a, b);
        let run = EventSetRun::new(&law, &[spec], 10, trials, 9).unwrap();
        let reversed = (0..run.chunks())
            .rev()
            .map(|c| run.run_chunk(c).unwrap())
            .fold(ChunkCounts::default(), |acc, c| acc.merge(&c));
        assert_eq!(reversed.hits[0], a.hits);
        assert_eq!(reversed.trials, trials);
        let other = estimate_event(&law, &spec, 10, trials, 10, REPORT_GAMMA).unwrap();
        assert_ne!(other.hits, a.hits);
    }

    #[test]
    fn nested_events_on_shared_paths() {
        let law = IncrementLaw::two_point_extremal(1.0).unwrap();
        let specs = [
            EventSpec::new(2.0, 4.0, EventVariant::StoppedAnyK).unwrap(),
            EventSpec::new(2.0, 4.0, EventVariant::MaxWithFinalQC).unwrap(),
            EventSpec::new(2.0, 4.0, EventVariant::FinalOnly).unwrap(),
        ];
        let set = estimate_events(&law, &specs, 16, 200_000, 3, REPORT_GAMMA).unwrap();
        assert_eq!(set.nesting_violations, 0);
        let h: Vec<u64> = set.estimates.iter().map(|e| e.hits).collect();
        assert!(h[2] <= h[1] && h[1] <= h[0], "{h:?}");
        assert!(h[2] > 0);
    }

    #[test]
    fn mixed_truncation_levels_are_rejected() {
        let law = IncrementLaw::CenteredExponential;
        let specs = [
            EventSpec::new(2.0, 4.0, EventVariant::TruncatedAnyK { y: 1.0 }).unwrap(),
            EventSpec::new(2.0, 4.0, EventVariant::TruncatedAnyK { y: 2.0 }).unwrap(),
        ];
        assert!(matches!(
            estimate_events(&law, &specs, 4, 10, 1, REPORT_GAMMA),
            Err(Error::TruncationMismatch { .. })
        ));
    }

    fn fake_estimate(hits: u64, trials: u64, ci: (f64, f64)) -> Estimate {
        Estimate {
            hits,
            trials,
            p_hat: hits as f64 / trials as f64,
            ci_low: ci.0,
            ci_high: ci.1,
            gamma: REPORT_GAMMA,
            seed: 0,
            n: 1,
            law: IncrementLaw::CenteredExponential,
            spec: EventSpec::new(1.0, 1.0, EventVariant::StoppedAnyK).unwrap(),
        }
    }

    #[test]
    fn verdict_examples() {
        let bound = LogProb::from_linear(0.25);
        assert_eq!(
            verify_bound(&fake_estimate(1000, 10_000, (0.094, 0.106)), bound),
            Verdict::Pass
        );
        assert_eq!(
            verify_bound(&fake_estimate(3000, 10_000, (0.294, 0.306)), bound),
            Verdict::Flag
        );
    }

    #[test]
    fn tightness_examples() {
        let e = fake_estimate(2500, 10_000, (0.24, 0.26));
        assert!((tightness_ratio(&e, LogProb::from_linear(0.25)).unwrap() - 1.0).abs() < 1e-15);
        let h2 = bound_hn(&TailQuery::new(2.0, 2f64.sqrt(), 2).unwrap());
        let r = tightness_ratio(&e, h2).unwrap();
        assert!((r - h2.value() / 0.25).abs() < 1e-15);
        match tightness_ratio(&fake_estimate(0, 10, (0.0, 0.3)), h2) {
            Err(Error::ZeroHits { ci_high }) => assert_eq!(ci_high, 0.3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
