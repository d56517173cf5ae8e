//! Exact event probabilities for finite-support IID increments.
//!
//! With IID increments `<X>_k = k m2` is deterministic, so the stopped event is the
//! first passage of `X_k` above `x` restricted to `k <= k_max`, the largest step
//! whose budget `k m2` still fits in `v^2`. The dynamic program propagates the law
//! of `X_k` over reachable sums, removes mass at first passage and stops after
//! `k_max` steps. Sums are kept as integer multiples of a common lattice step when
//! one exists, and as a tolerance-merged list of reals otherwise.

use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, floor, log, round};

use crate::bounds::{bound_b1, bound_b2, bound_f, bound_hn, bound_prohorov, LogProb, TailQuery};
use crate::error::positive;
use crate::processes::{event_hit, reaches, within_budget, EventSpec, EventVariant, PathRecord};
use crate::{Error, Result};

const PROBABILITY_SUM_TOLERANCE: f64 = 1e-12;
/// Maximum number of reachable sums tracked at any step.
pub const STATE_CAP: usize = 1_000_000;
/// Maximum number of paths visited in enumeration mode.
pub const ENUMERATION_CAP: u128 = 1 << 25;
const MERGE_TOLERANCE: f64 = 1e-12;
// Slack on `log p <= log bound`; admits round-off only.
const LOG_SLACK: f64 = 1e-10;

/// A finite law given by distinct atoms sorted by value.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeLaw {
    atoms: Vec<(f64, f64)>,
    m2: f64,
}

impl LatticeLaw {
    pub fn new(atoms: &[(f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidLaw { reason: "no atoms" });
        }
        let mut atoms = atoms.to_vec();
        if atoms
            .iter()
            .any(|(v, p)| !v.is_finite() || !p.is_finite() || *p <= 0.0)
        {
            return Err(Error::InvalidLaw {
                reason: "atom values must be finite and probabilities positive",
            });
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        if atoms.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidLaw {
                reason: "atom values must be distinct",
            });
        }
        let total: f64 = atoms.iter().map(|(_, p)| p).sum();
        if fabs(total - 1.0) > PROBABILITY_SUM_TOLERANCE {
            return Err(Error::InvalidLaw {
                reason: "probabilities must sum to 1",
            });
        }
        let m2 = atoms.iter().map(|(v, p)| p * v * v).sum();
        Ok(LatticeLaw { atoms, m2 })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn second_moment(&self) -> f64 {
        self.m2
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(v, p)| v * p).sum()
    }

    pub fn support_max(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].0
    }

    pub fn support_min(&self) -> f64 {
        self.atoms[0].0
    }
}

/// Exact probabilities of the three nested events.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactResult {
    /// `P(X_k >= x and <X>_k <= v^2 for some k in [1, n])`.
    pub p_stopped: f64,
    /// `P(max_k X_k >= x and <X>_n <= v^2)`.
    pub p_max: f64,
    /// `P(X_n >= x and <X>_n <= v^2)`.
    pub p_final: f64,
    pub n: u64,
    pub x: f64,
    pub v: f64,
    /// Mass not absorbed by the stopped event; `p_stopped + surviving_mass = 1`.
    pub surviving_mass: f64,
}

impl ExactResult {
    /// `p_final <= p_max <= p_stopped`, all within `[0, 1]`, up to accumulation round-off.
    pub fn is_nested(&self) -> bool {
        let tol = 1e-12;
        0.0 <= self.p_final
            && self.p_final <= self.p_max + tol
            && self.p_max <= self.p_stopped + tol
            && self.p_stopped <= 1.0 + tol
    }
}

/// How the oracle evaluates the event probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    /// First-passage dynamic program over reachable sums.
    Dp,
    /// Brute force over all `|atoms|^n` paths.
    Enumerate,
}

/// Exact event probabilities by dynamic programming.
pub fn exact_event_probability(law: &LatticeLaw, n: u64, x: f64, v: f64) -> Result<ExactResult> {
    exact_event_probability_with(law, n, x, v, OracleMode::Dp)
}

pub fn exact_event_probability_with(
    law: &LatticeLaw,
    n: u64,
    x: f64,
    v: f64,
    mode: OracleMode,
) -> Result<ExactResult> {
    let v = positive("v", v)?;
    if !x.is_finite() {
        return Err(Error::NonFinite { name: "x" });
    }
    if n == 0 {
        return Err(Error::OutOfDomain {
            name: "n",
            value: 0.0,
            expected: ">= 1",
        });
    }
    if law.m2 == 0.0 {
        return Err(Error::InvalidLaw {
            reason: "second moment is zero",
        });
    }
    let v2 = v * v;
    let (p_stopped, p_max, p_final, surviving_mass) = match mode {
        OracleMode::Dp => dp_probabilities(law, n, x, v2)?,
        OracleMode::Enumerate => enumerate_probabilities(law, n, x, v2)?,
    };
    Ok(ExactResult {
        p_stopped,
        p_max,
        p_final,
        n,
        x,
        v,
        surviving_mass,
    })
}

/// `P(max_{k <= n} X_k >= x)` with no budget constraint.
pub fn max_passage_probability(law: &LatticeLaw, n: u64, x: f64) -> Result<f64> {
    // With the budget equal to <X>_n every step is admissible.
    let full_budget = n as f64 * law.m2;
    let v = positive("n m2", full_budget).map(libm::sqrt)?;
    let r = exact_event_probability(law, n, x, v * (1.0 + 1e-9))?;
    Ok(r.p_stopped)
}

/// Largest `k <= n` whose budget `k m2` fits in `v2`.
fn max_admissible_step(m2: f64, v2: f64, n: u64) -> u64 {
    let ratio = v2 / m2;
    let mut k = if ratio >= n as f64 {
        n
    } else {
        floor(ratio) as u64
    };
    while k < n && within_budget((k + 1) as f64 * m2, v2) {
        k += 1;
    }
    while k > 0 && !within_budget(k as f64 * m2, v2) {
        k -= 1;
    }
    k
}

/// Integer representation `value = m * step` shared by all atoms.
fn common_lattice(values: &[f64]) -> Option<(f64, Vec<i64>)> {
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(fabs(*v)));
    if scale == 0.0 {
        return None;
    }
    let tol = 1e-9 * scale;
    let mut step = 0.0_f64;
    for &v in values {
        let mut a = fabs(v);
        let mut b = step;
        if a < b {
            core::mem::swap(&mut a, &mut b);
        }
        while b > tol {
            let r = a % b;
            a = b;
            b = if r < tol || b - r < tol { 0.0 } else { r };
        }
        step = a;
    }
    if step <= tol {
        return None;
    }
    let mut offsets = Vec::with_capacity(values.len());
    for &v in values {
        let m = round(v / step);
        if fabs(m * step - v) > 1e-12 * scale || fabs(m) > STATE_CAP as f64 {
            return None;
        }
        offsets.push(m as i64);
    }
    Some((step, offsets))
}

type Probabilities = (f64, f64, f64, f64);

fn dp_probabilities(law: &LatticeLaw, n: u64, x: f64, v2: f64) -> Result<Probabilities> {
    let k_max = max_admissible_step(law.m2, v2, n);
    let values: Vec<f64> = law.atoms.iter().map(|(v, _)| *v).collect();
    match common_lattice(&values) {
        Some((step, offsets)) => dense_dp(law, &offsets, step, n, k_max, x),
        None => sparse_dp(law, n, k_max, x),
    }
}

/// Distribution over `m_lo + i` for `i in 0..probs.len()`.
struct DenseDistribution {
    m_lo: i64,
    probs: Vec<f64>,
}

impl DenseDistribution {
    fn point_mass() -> Self {
        DenseDistribution {
            m_lo: 0,
            probs: vec![1.0],
        }
    }

    fn convolve(&self, atoms: &[(i64, f64)], min_off: i64, max_off: i64) -> Result<Self> {
        let width = self.probs.len() + (max_off - min_off) as usize;
        if width > STATE_CAP {
            return Err(Error::StateCapExceeded {
                states: width,
                cap: STATE_CAP,
            });
        }
        let mut probs = vec![0.0; width];
        for (i, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for &(off, q) in atoms {
                probs[i + (off - min_off) as usize] += p * q;
            }
        }
        Ok(DenseDistribution {
            m_lo: self.m_lo + min_off,
            probs,
        })
    }
}

fn dense_dp(
    law: &LatticeLaw,
    offsets: &[i64],
    step: f64,
    n: u64,
    k_max: u64,
    x: f64,
) -> Result<Probabilities> {
    let atoms: Vec<(i64, f64)> = offsets
        .iter()
        .zip(&law.atoms)
        .map(|(&m, &(_, p))| (m, p))
        .collect();
    let min_off = *offsets.iter().min().unwrap_or(&0);
    let max_off = *offsets.iter().max().unwrap_or(&0);
    let hit = |m: i64| reaches(m as f64 * step, x);

    let mut dist = DenseDistribution::point_mass();
    let mut absorbed = 0.0;
    for _ in 0..k_max {
        dist = dist.convolve(&atoms, min_off, max_off)?;
        for (i, p) in dist.probs.iter_mut().enumerate() {
            if *p != 0.0 && hit(dist.m_lo + i as i64) {
                absorbed += *p;
                *p = 0.0;
            }
        }
    }
    let surviving: f64 = dist.probs.iter().sum();

    let (p_max, p_final) = if k_max == n {
        let mut free = DenseDistribution::point_mass();
        for _ in 0..n {
            free = free.convolve(&atoms, min_off, max_off)?;
        }
        let p_final = free
            .probs
            .iter()
            .enumerate()
            .filter(|(i, _)| hit(free.m_lo + *i as i64))
            .map(|(_, p)| p)
            .sum();
        (absorbed, p_final)
    } else {
        (0.0, 0.0)
    };
    Ok((absorbed, p_max, p_final, surviving))
}

fn sparse_step(dist: &[(f64, f64)], atoms: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    let mut next: Vec<(f64, f64)> = Vec::with_capacity(dist.len() * atoms.len());
    for &(s, p) in dist {
        for &(v, q) in atoms {
            next.push((s + v, p * q));
        }
    }
    next.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::with_capacity(next.len());
    for (s, p) in next {
        match merged.last_mut() {
            Some(last) if fabs(s - last.0) <= MERGE_TOLERANCE * fabs(s).max(1.0) => last.1 += p,
            _ => merged.push((s, p)),
        }
    }
    if merged.len() > STATE_CAP {
        return Err(Error::StateCapExceeded {
            states: merged.len(),
            cap: STATE_CAP,
        });
    }
    Ok(merged)
}

fn sparse_dp(law: &LatticeLaw, n: u64, k_max: u64, x: f64) -> Result<Probabilities> {
    let mut dist = vec![(0.0, 1.0)];
    let mut absorbed = 0.0;
    for _ in 0..k_max {
        dist = sparse_step(&dist, &law.atoms)?;
        dist.retain(|&(s, p)| {
            if reaches(s, x) {
                absorbed += p;
                false
            } else {
                true
            }
        });
    }
    let surviving = dist.iter().map(|(_, p)| p).sum();
    let (p_max, p_final) = if k_max == n {
        let mut free = vec![(0.0, 1.0)];
        for _ in 0..n {
            free = sparse_step(&free, &law.atoms)?;
        }
        let p_final = free
            .iter()
            .filter(|(s, _)| reaches(*s, x))
            .map(|(_, p)| p)
            .sum();
        (absorbed, p_final)
    } else {
        (0.0, 0.0)
    };
    Ok((absorbed, p_max, p_final, surviving))
}

fn enumerate_probabilities(law: &LatticeLaw, n: u64, x: f64, v2: f64) -> Result<Probabilities> {
    let k = law.atoms.len();
    let paths = (k as u128)
        .checked_pow(n as u32)
        .filter(|&p| p <= ENUMERATION_CAP);
    let Some(paths) = paths else {
        return Err(Error::EnumerationTooLarge {
            paths: (k as u128).saturating_pow(n.min(u32::MAX as u64) as u32),
            cap: ENUMERATION_CAP,
        });
    };
    let specs = [
        EventSpec::with_v2(x, v2, EventVariant::StoppedAnyK)?,
        EventSpec::with_v2(x, v2, EventVariant::MaxWithFinalQC)?,
        EventSpec::with_v2(x, v2, EventVariant::FinalOnly)?,
    ];
    let n = n as usize;
    let mut digits = vec![0usize; n];
    let mut totals = [0.0; 3];
    for _ in 0..paths {
        let increments: Vec<f64> = digits.iter().map(|&d| law.atoms[d].0).collect();
        let prob: f64 = digits.iter().map(|&d| law.atoms[d].1).product();
        let path = PathRecord::from_increments(increments, law.m2, None);
        for (total, spec) in totals.iter_mut().zip(&specs) {
            if event_hit(&path, spec)? {
                *total += prob;
            }
        }
        for d in digits.iter_mut() {
            *d += 1;
            if *d < k {
                break;
            }
            *d = 0;
        }
    }
    Ok((totals[0], totals[1], totals[2], 1.0 - totals[0]))
}

/// The exact stopped probability against each bound that covers it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundComparison {
    pub exact: ExactResult,
    pub hn: LogProb,
    pub f: LogProb,
    pub b1: LogProb,
    pub b2: LogProb,
    pub prohorov: LogProb,
}

impl BoundComparison {
    fn named(&self) -> [(&'static str, LogProb); 5] {
        [
            ("H_n", self.hn),
            ("F", self.f),
            ("B1", self.b1),
            ("B2", self.b2),
            ("Prohorov", self.prohorov),
        ]
    }

    /// `p_stopped <= bound` for every bound, and the event nesting.
    pub fn holds(&self) -> bool {
        self.first_violation().is_none() && self.exact.is_nested()
    }

    pub fn first_violation(&self) -> Option<Error> {
        let p = self.exact.p_stopped;
        self.named()
            .into_iter()
            .find(|(_, bound)| !probability_within(p, *bound))
            .map(|(name, bound)| Error::BoundViolated {
                bound: name,
                probability: p,
                bound_value: bound.value(),
                x: self.exact.x,
                v: self.exact.v,
                n: self.exact.n,
            })
    }

    /// Fails with the reproduction data of the first violated bound.
    pub fn require_valid(&self) -> Result<()> {
        match self.first_violation() {
            Some(err) => Err(err),
            None => Ok(()),
        }
    }
}

/// `p <= bound` in log-space with round-off slack.
pub fn probability_within(p: f64, bound: LogProb) -> bool {
    p <= 0.0 || log(p) <= bound.log_value() + LOG_SLACK
}

/// Compares the exact stopped probability with `H_n`, `F`, `B1`, `B2` and Prohorov.
///
/// Only laws with support `<= 1` and mean `<= 0` are accepted.
pub fn exact_vs_bound(law: &LatticeLaw, n: u64, x: f64, v: f64) -> Result<BoundComparison> {
    if law.support_max() > 1.0 + 1e-12 {
        return Err(Error::HypothesisViolated {
            reason: "support exceeds 1",
        });
    }
    if law.mean() > 1e-12 {
        return Err(Error::HypothesisViolated {
            reason: "mean is positive",
        });
    }
    let q = TailQuery::new(x, v, n)?;
    let exact = exact_event_probability(law, n, x, v)?;
    Ok(BoundComparison {
        exact,
        hn: bound_hn(&q),
        f: bound_f(x, v)?,
        b1: bound_b1(x, v)?,
        b2: bound_b2(x, v)?,
        prohorov: bound_prohorov(x, v)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rademacher() -> LatticeLaw {
        LatticeLaw::new(&[(1.0, 0.5), (-1.0, 0.5)]).unwrap()
    }

    #[test]
    fn lattice_law_validation() {
        assert!(LatticeLaw::new(&[]).is_err());
        assert!(LatticeLaw::new(&[(1.0, 0.5), (1.0, 0.5)]).is_err());
        assert!(LatticeLaw::new(&[(1.0, 0.5), (-1.0, 0.4)]).is_err());
        assert!(LatticeLaw::new(&[(1.0, 1.5), (-1.0, -0.5)]).is_err());
        assert!(LatticeLaw::new(&[(f64::NAN, 1.0)]).is_err());
        let law = LatticeLaw::new(&[(1.0, 0.25), (-1.0 / 3.0, 0.75)]).unwrap();
        assert_eq!(law.support_min(), -1.0 / 3.0);
        assert!((law.second_moment() - (0.25 + 0.75 / 9.0)).abs() < 1e-15);
        assert!(law.mean().abs() < 1e-15);
    }

    #[test]
    fn two_step_rademacher_examples() {
        let r = exact_event_probability(&rademacher(), 2, 2.0, 2f64.sqrt()).unwrap();
        assert_eq!(r.p_stopped, 0.25);
        let r = exact_event_probability(&rademacher(), 2, 2.0, 1.0).unwrap();
        assert_eq!(r.p_stopped, 0.0);
    }

    #[test]
    fn threshold_below_support_is_certain() {
        let law = LatticeLaw::new(&[(1.0, 0.3), (-0.5, 0.7)]).unwrap();
        let r = exact_event_probability(&law, 4, -1e6, 2.0).unwrap();
        assert_eq!(r.p_stopped, 1.0);
        let r = exact_event_probability(&law, 4, 0.0, law.second_moment().sqrt()).unwrap();
        assert!(r.p_stopped >= 0.3);
    }

    #[test]
    fn degenerate_law_is_rejected() {
        let law = LatticeLaw::new(&[(0.0, 1.0)]).unwrap();
        assert!(matches!(
            exact_event_probability(&law, 3, 0.0, 1.0),
            Err(Error::InvalidLaw { .. })
        ));
    }

    #[test]
    fn common_lattice_detection() {
        let (step, m) = common_lattice(&[-0.3, 1.0]).unwrap();
        assert!((step - 0.1).abs() < 1e-12);
        assert_eq!(m, vec![-3, 10]);
        let (step, m) = common_lattice(&[-0.5, 0.0, 1.0]).unwrap();
        assert_eq!((step, m), (0.5, vec![-1, 0, 2]));
        assert!(common_lattice(&[-core::f64::consts::PI, 1.0]).is_none());
    }

    #[test]
    fn sparse_and_dense_paths_agree() {
        // Irrational ratio forces the merge-tolerance path.
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let law = LatticeLaw::new(&[(1.0, s / (1.0 + s)), (-s, 1.0 / (1.0 + s))]).unwrap();
        let dp = exact_event_probability(&law, 8, 1.5, 2.0).unwrap();
        let en = exact_event_probability_with(&law, 8, 1.5, 2.0, OracleMode::Enumerate).unwrap();
        assert!((dp.p_stopped - en.p_stopped).abs() < 1e-12);
        assert!((dp.p_max - en.p_max).abs() < 1e-12);
        assert!((dp.p_final - en.p_final).abs() < 1e-12);
    }

    #[test]
    fn mass_is_conserved() {
        let law = LatticeLaw::new(&[(1.0, 0.2), (0.0, 0.4), (-1.0, 0.4)]).unwrap();
        let r = exact_event_probability(&law, 20, 3.0, 3.0).unwrap();
        assert!((r.p_stopped + r.surviving_mass - 1.0).abs() < 1e-12);
        assert!(r.is_nested());
    }

    #[test]
    fn enumeration_cap_is_enforced() {
        let law = LatticeLaw::new(&[(1.0, 0.2), (0.0, 0.4), (-1.0, 0.4)]).unwrap();
        assert!(matches!(
            exact_event_probability_with(&law, 20, 1.0, 5.0, OracleMode::Enumerate),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn state_cap_is_enforced() {
        // Lattice step 1e-4: each step widens the support by 19999 states.
        let law = LatticeLaw::new(&[(1.0, 0.5), (-0.9999, 0.5)]).unwrap();
        assert!(common_lattice(&[-0.9999, 1.0]).is_some());
        assert!(matches!(
            exact_event_probability(&law, 60, 100.0, 100.0),
            Err(Error::StateCapExceeded { .. })
        ));
    }

    #[test]
    fn bound_comparison_examples() {
        let c = exact_vs_bound(&rademacher(), 10, 3.0, 10f64.sqrt()).unwrap();
        assert!(c.holds());
        assert!(c.exact.p_stopped <= c.hn.value());

        // x = n: only the all-ones path; H_n(n, sqrt(n s)) = (s / (1 + s))^n exactly.
        let c = exact_vs_bound(&rademacher(), 10, 10.0, 10f64.sqrt()).unwrap();
        assert!((c.exact.p_stopped - 0.5f64.powi(10)).abs() < 1e-18);
        assert!((c.hn.value() / 0.5f64.powi(10) - 1.0).abs() < 1e-12);
        assert!(c.holds());

        let c = exact_vs_bound(&rademacher(), 10, 11.0, 10f64.sqrt()).unwrap();
        assert_eq!(c.exact.p_stopped, 0.0);
        assert_eq!(c.hn.value(), 0.0);
        assert!(c.require_valid().is_ok());
    }

    #[test]
    fn hypotheses_are_enforced() {
        let above = LatticeLaw::new(&[(2.0, 0.2), (-0.5, 0.8)]).unwrap();
        assert!(matches!(
            exact_vs_bound(&above, 3, 1.0, 1.0),
            Err(Error::HypothesisViolated { .. })
        ));
        let positive_mean = LatticeLaw::new(&[(1.0, 0.6), (-1.0, 0.4)]).unwrap();
        assert!(matches!(
            exact_vs_bound(&positive_mean, 3, 1.0, 1.0),
            Err(Error::HypothesisViolated { .. })
        ));
    }

    #[test]
    fn violations_are_reported_with_reproduction_data() {
        let fake = BoundComparison {
            exact: ExactResult {
                p_stopped: 0.5,
                p_max: 0.5,
                p_final: 0.5,
                n: 3,
                x: 1.0,
                v: 1.0,
                surviving_mass: 0.5,
            },
            hn: LogProb::from_linear(0.25),
            f: LogProb::ONE,
            b1: LogProb::ONE,
            b2: LogProb::ONE,
            prohorov: LogProb::ONE,
        };
        assert!(!fake.holds());
        match fake.require_valid() {
            Err(Error::BoundViolated { bound, n, .. }) => assert_eq!((bound, n), ("H_n", 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn max_passage_ignores_the_budget() {
        let r = max_passage_probability(&rademacher(), 2, 2.0).unwrap();
        assert_eq!(r, 0.25);
        let r = max_passage_probability(&rademacher(), 3, 1.0).unwrap();
        // P(max of a 3-step walk >= 1) = 1 - P(first step -1 and never back) = 5/8.
        assert!((r - 0.625).abs() < 1e-15);
    }
}
