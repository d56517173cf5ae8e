//! Increment laws, path simulation and the event indicators of the stopped bounds.
//!
//! Paths have IID increments, so the conditional moments are deterministic: the
//! quadratic characteristic is `<X>_k = k E[xi^2]` and the truncated variance is
//! `V_k^2(y) = k E[xi^2 1{xi <= y}]`. Every event is then exactly decidable from
//! the stored trajectory.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use libm::{exp, expm1, fabs, log1p};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{nonnegative, positive};
use crate::oracle::LatticeLaw;
use crate::{Error, Result};

/// One-step distribution of the differences `xi_i`.
#[derive(Debug, Clone, PartialEq)]
pub enum IncrementLaw {
    /// `P(xi = 1) = s / (1 + s)`, `P(xi = -s) = 1 / (1 + s)`: the law attaining the Bennett MGF bound.
    TwoPointExtremal { sigma2: f64 },
    /// `P(xi = 1) = b / (1 + b)`, `P(xi = -b) = 1 / (1 + b)`: a martingale law on `[-b, 1]`.
    TwoPointBounded { b: f64 },
    /// [`IncrementLaw::TwoPointBounded`] shifted down by `delta in [0, b]`; a strict supermartingale law for `delta > 0`.
    DriftedTwoPoint { b: f64, delta: f64 },
    /// `xi = Z - 1` with `Z ~ Exp(1)`: centered, unbounded above.
    CenteredExponential,
    /// Arbitrary finite support.
    Discrete(LatticeLaw),
}

impl IncrementLaw {
    pub fn two_point_extremal(sigma2: f64) -> Result<Self> {
        Ok(IncrementLaw::TwoPointExtremal {
            sigma2: positive("sigma2", sigma2)?,
        })
    }

    pub fn two_point_bounded(b: f64) -> Result<Self> {
        Ok(IncrementLaw::TwoPointBounded {
            b: positive("b", b)?,
        })
    }

    pub fn drifted_two_point(b: f64, delta: f64) -> Result<Self> {
        let b = positive("b", b)?;
        let delta = nonnegative("delta", delta)?;
        if delta > b {
            return Err(Error::OutOfDomain {
                name: "delta",
                value: delta,
                expected: "<= b",
            });
        }
        Ok(IncrementLaw::DriftedTwoPoint { b, delta })
    }

    pub fn discrete(atoms: &[(f64, f64)]) -> Result<Self> {
        LatticeLaw::new(atoms).map(IncrementLaw::Discrete)
    }

    /// `(value, probability)` pairs for finite-support laws.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        let two_point = |hi: f64, lo: f64, p_hi: f64| alloc::vec![(lo, 1.0 - p_hi), (hi, p_hi)];
        match self {
            IncrementLaw::TwoPointExtremal { sigma2 } => {
                Some(two_point(1.0, -sigma2, sigma2 / (1.0 + sigma2)))
            }
            IncrementLaw::TwoPointBounded { b } => Some(two_point(1.0, -b, b / (1.0 + b))),
            IncrementLaw::DriftedTwoPoint { b, delta } => {
                Some(two_point(1.0 - delta, -b - delta, b / (1.0 + b)))
            }
            IncrementLaw::CenteredExponential => None,
            IncrementLaw::Discrete(law) => Some(law.atoms().to_vec()),
        }
    }

    /// The finite-support law as a [`LatticeLaw`], for the exact oracle.
    pub fn lattice(&self) -> Option<LatticeLaw> {
        match self {
            IncrementLaw::Discrete(law) => Some(law.clone()),
            other => other.atoms().and_then(|atoms| LatticeLaw::new(&atoms).ok()),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            IncrementLaw::TwoPointExtremal { .. } | IncrementLaw::TwoPointBounded { .. } => 0.0,
            IncrementLaw::DriftedTwoPoint { delta, .. } => -delta,
            IncrementLaw::CenteredExponential => 0.0,
            IncrementLaw::Discrete(law) => law.mean(),
        }
    }

    /// Upper end of the support.
    pub fn support_max(&self) -> f64 {
        match self {
            IncrementLaw::TwoPointExtremal { .. } | IncrementLaw::TwoPointBounded { .. } => 1.0,
            IncrementLaw::DriftedTwoPoint { delta, .. } => 1.0 - delta,
            IncrementLaw::CenteredExponential => f64::INFINITY,
            IncrementLaw::Discrete(law) => law.support_max(),
        }
    }

    /// Lower end of the support.
    pub fn support_min(&self) -> f64 {
        match self {
            IncrementLaw::TwoPointExtremal { sigma2 } => -sigma2,
            IncrementLaw::TwoPointBounded { b } => -b,
            IncrementLaw::DriftedTwoPoint { b, delta } => -b - delta,
            IncrementLaw::CenteredExponential => -1.0,
            IncrementLaw::Discrete(law) => law.support_min(),
        }
    }

    /// The exact one-step second moment `E[xi^2]`.
    pub fn conditional_variance(&self) -> f64 {
        match self {
            IncrementLaw::TwoPointExtremal { sigma2 } => *sigma2,
            IncrementLaw::TwoPointBounded { b } => *b,
            // E[(eta - delta)^2] with E eta = 0 and E eta^2 = b.
            IncrementLaw::DriftedTwoPoint { b, delta } => b + delta * delta,
            IncrementLaw::CenteredExponential => 1.0,
            IncrementLaw::Discrete(law) => law.second_moment(),
        }
    }

    /// `E[xi^2 1{xi <= y}]`.
    pub fn truncated_variance(&self, y: f64) -> Result<f64> {
        let y = positive("y", y)?;
        Ok(match self {
            // int_0^c (z - 1)^2 e^{-z} dz = 1 - e^{-c} (c^2 + 1), c = y + 1
            IncrementLaw::CenteredExponential => {
                let c = y + 1.0;
                -expm1(-c) - exp(-c) * c * c
            }
            law => law
                .atoms()
                .unwrap_or_default()
                .iter()
                .filter(|(value, _)| *value <= y)
                .map(|(value, prob)| prob * value * value)
                .sum(),
        })
    }

    /// `P(xi > y)` and `P(max_{i <= n} xi_i > y) = 1 - (1 - P(xi > y))^n`.
    pub fn exceedance_tail(&self, y: f64, n: u64) -> Result<(f64, f64)> {
        let y = positive("y", y)?;
        let per_step = match self {
            IncrementLaw::CenteredExponential => exp(-(y + 1.0)),
            law => law
                .atoms()
                .unwrap_or_default()
                .iter()
                .filter(|(value, _)| *value > y)
                .map(|(_, prob)| prob)
                .sum(),
        };
        let p_max = if per_step >= 1.0 {
            1.0
        } else {
            -expm1(n as f64 * log1p(-per_step))
        };
        Ok((per_step, p_max))
    }
}

impl fmt::Display for IncrementLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IncrementLaw::TwoPointExtremal { sigma2 } => write!(f, "extremal:{sigma2:?}"),
            IncrementLaw::TwoPointBounded { b } => write!(f, "bounded:{b:?}"),
            IncrementLaw::DriftedTwoPoint { b, delta } => write!(f, "drifted:{b:?},{delta:?}"),
            IncrementLaw::CenteredExponential => f.write_str("cexp"),
            IncrementLaw::Discrete(law) => {
                f.write_str("atoms:")?;
                for (i, (value, prob)) in law.atoms().iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "{value:?}@{prob:?}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for IncrementLaw {
    type Err = Error;

    /// Parses `extremal:S`, `bounded:B`, `drifted:B,D`, `cexp` or `atoms:V@P;V@P;...`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = Error::InvalidLaw {
            reason: "expected extremal:S, bounded:B, drifted:B,D, cexp or atoms:V@P;...",
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad.clone());
        let s = s.trim();
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        match kind.trim() {
            "extremal" => IncrementLaw::two_point_extremal(num(args)?),
            "bounded" => IncrementLaw::two_point_bounded(num(args)?),
            "drifted" => {
                let (b, d) = args.split_once(',').ok_or(bad.clone())?;
                IncrementLaw::drifted_two_point(num(b)?, num(d)?)
            }
            "cexp" if args.is_empty() => Ok(IncrementLaw::CenteredExponential),
            "atoms" => {
                let atoms = args
                    .split(';')
                    .map(|atom| {
                        let (v, p) = atom.split_once('@').ok_or(bad.clone())?;
                        Ok((num(v)?, num(p)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                IncrementLaw::discrete(&atoms)
            }
            _ => Err(bad),
        }
    }
}

/// Draws from an [`IncrementLaw`] using precomputed atom tables.
#[derive(Debug, Clone)]
pub struct Sampler {
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    TwoPoint {
        lo: f64,
        hi: f64,
        p_hi: f64,
    },
    Table {
        values: Vec<f64>,
        cumulative: Vec<f64>,
    },
    Exponential,
}

impl Sampler {
    pub fn new(law: &IncrementLaw) -> Self {
        let kind = match law {
            IncrementLaw::CenteredExponential => SamplerKind::Exponential,
            IncrementLaw::Discrete(lattice) => {
                let mut acc = 0.0;
                let cumulative = lattice
                    .atoms()
                    .iter()
                    .map(|(_, p)| {
                        acc += p;
                        acc
                    })
                    .collect();
                SamplerKind::Table {
                    values: lattice.atoms().iter().map(|(v, _)| *v).collect(),
                    cumulative,
                }
            }
            two_point => {
                let atoms = two_point.atoms().unwrap_or_default();
                SamplerKind::TwoPoint {
                    lo: atoms[0].0,
                    hi: atoms[1].0,
                    p_hi: atoms[1].1,
                }
            }
        };
        Sampler { kind }
    }

    pub fn sample<R: RngCore>(&self, rng: &mut R) -> f64 {
        let u = unit_interval(rng);
        match &self.kind {
            SamplerKind::TwoPoint { lo, hi, p_hi } => {
                if u < *p_hi {
                    *hi
                } else {
                    *lo
                }
            }
            SamplerKind::Table { values, cumulative } => {
                let idx = cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(values.len() - 1);
                values[idx]
            }
            SamplerKind::Exponential => -log1p(-u) - 1.0,
        }
    }
}

/// Uniform draw on `[0, 1)` with 53 random bits.
pub fn unit_interval<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Key of the per-path random streams: path `i` of seed `s` always sees stream `i` of key `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamKey {
    seed: u64,
    key: [u8; 32],
}

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        let mut state = seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        StreamKey { seed, key }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent ChaCha8 stream number `index` under this key.
    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(index);
        rng
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Truncated variance track `V_k^2(y)` of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedTrack {
    pub y: f64,
    /// `V_0^2 = 0, V_1^2(y), ..., V_n^2(y)`.
    pub values: Vec<f64>,
}

/// One simulated trajectory. Index `k` of each track holds the value after `k` steps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PathRecord {
    /// `xi_1, ..., xi_n`.
    pub increments: Vec<f64>,
    /// `X_0 = 0, X_1, ..., X_n`.
    pub partial_sums: Vec<f64>,
    /// `<X>_0 = 0, <X>_1, ..., <X>_n`.
    pub qc: Vec<f64>,
    pub trunc_var: Option<TruncatedTrack>,
    pub max_increment: f64,
}

impl PathRecord {
    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    /// Builds the tracks for a given increment sequence and deterministic per-step moments.
    pub fn from_increments(
        increments: Vec<f64>,
        step_qc: f64,
        truncation: Option<(f64, f64)>,
    ) -> Self {
        let mut record = PathRecord::default();
        record.fill(increments.iter().copied(), step_qc, truncation);
        record
    }

    fn fill<I: Iterator<Item = f64>>(
        &mut self,
        increments: I,
        step_qc: f64,
        truncation: Option<(f64, f64)>,
    ) {
        self.increments.clear();
        self.partial_sums.clear();
        self.qc.clear();
        self.partial_sums.push(0.0);
        self.qc.push(0.0);
        self.max_increment = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for xi in increments {
            sum += xi;
            self.increments.push(xi);
            self.partial_sums.push(sum);
            self.max_increment = self.max_increment.max(xi);
        }
        let n = self.increments.len();
        self.qc.extend((1..=n).map(|k| k as f64 * step_qc));
        self.trunc_var = truncation.map(|(y, step)| TruncatedTrack {
            y,
            values: (0..=n).map(|k| k as f64 * step).collect(),
        });
    }
}

/// Simulation of one law at a fixed horizon and optional truncation level.
#[derive(Debug, Clone)]
pub struct PathSimulator {
    sampler: Sampler,
    n: u64,
    step_qc: f64,
    truncation: Option<(f64, f64)>,
}

impl PathSimulator {
    pub fn new(law: &IncrementLaw, n: u64, y: Option<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::OutOfDomain {
                name: "n",
                value: 0.0,
                expected: ">= 1",
            });
        }
        let truncation = match y {
            Some(y) => Some((y, law.truncated_variance(y)?)),
            None => None,
        };
        Ok(PathSimulator {
            sampler: Sampler::new(law),
            n,
            step_qc: law.conditional_variance(),
            truncation,
        })
    }

    /// Overwrites `record` with the path drawn from `rng`, reusing its buffers.
    pub fn simulate_into<R: RngCore>(&self, rng: &mut R, record: &mut PathRecord) {
        let sampler = &self.sampler;
        record.fill(
            (0..self.n).map(|_| sampler.sample(rng)),
            self.step_qc,
            self.truncation,
        );
    }
}

/// Simulates a path of `n` IID increments, bit-reproducible from `(law, n, seed)`.
pub fn simulate_path(law: &IncrementLaw, n: u64, seed: u64, y: Option<f64>) -> Result<PathRecord> {
    let simulator = PathSimulator::new(law, n, y)?;
    let mut record = PathRecord::default();
    simulator.simulate_into(&mut StreamKey::new(seed).stream(0), &mut record);
    Ok(record)
}

/// Which event of the stopped-bound family to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventVariant {
    /// `X_k >= x and <X>_k <= v^2` for some `k in [1, n]`.
    StoppedAnyK,
    /// `max_k X_k >= x and <X>_n <= v^2`.
    MaxWithFinalQC,
    /// `X_n >= x and <X>_n <= v^2`.
    FinalOnly,
    /// `X_k >= x and V_k^2(y) <= v^2` for some `k in [1, n]`.
    TruncatedAnyK { y: f64 },
}

impl EventVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventVariant::StoppedAnyK => "stopped",
            EventVariant::MaxWithFinalQC => "max_final_qc",
            EventVariant::FinalOnly => "final",
            EventVariant::TruncatedAnyK { .. } => "truncated",
        }
    }
}

/// Threshold `x`, budget `v^2` and variant of an event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventSpec {
    pub x: f64,
    pub v2: f64,
    pub variant: EventVariant,
}

impl EventSpec {
    /// `x` may be negative (a certain event); `v > 0`.
    pub fn new(x: f64, v: f64, variant: EventVariant) -> Result<Self> {
        let v = positive("v", v)?;
        Self::with_v2(x, v * v, variant)
    }

    pub fn with_v2(x: f64, v2: f64, variant: EventVariant) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::NonFinite { name: "x" });
        }
        let v2 = positive("v2", v2)?;
        if let EventVariant::TruncatedAnyK { y } = variant {
            positive("y", y)?;
        }
        Ok(EventSpec { x, v2, variant })
    }

    pub fn v(&self) -> f64 {
        libm::sqrt(self.v2)
    }
}

// Partial sums and budgets are compared with a relative slack so that values equal
// in exact arithmetic (a lattice sum of x, or k E[xi^2] = v^2) are not split by round-off.
const THRESHOLD_SLACK: f64 = 1e-10;
const BUDGET_SLACK: f64 = 1e-12;

/// `sum >= x` up to round-off.
pub fn reaches(sum: f64, x: f64) -> bool {
    sum >= x - THRESHOLD_SLACK * fabs(x).max(1.0)
}

/// `qc <= v2` up to round-off.
pub fn within_budget(qc: f64, v2: f64) -> bool {
    qc <= v2 * (1.0 + BUDGET_SLACK)
}

/// Exact indicator of the event along the stored trajectory.
pub fn event_hit(path: &PathRecord, spec: &EventSpec) -> Result<bool> {
    let n = path.len();
    if n == 0 {
        return Err(Error::OutOfDomain {
            name: "path length",
            value: 0.0,
            expected: ">= 1",
        });
    }
    let sums = &path.partial_sums[1..];
    Ok(match spec.variant {
        EventVariant::StoppedAnyK => sums
            .iter()
            .zip(&path.qc[1..])
            .any(|(&s, &q)| reaches(s, spec.x) && within_budget(q, spec.v2)),
        EventVariant::MaxWithFinalQC => {
            within_budget(path.qc[n], spec.v2) && sums.iter().any(|&s| reaches(s, spec.x))
        }
        EventVariant::FinalOnly => {
            within_budget(path.qc[n], spec.v2) && reaches(sums[n - 1], spec.x)
        }
        EventVariant::TruncatedAnyK { y } => {
            let track = path
                .trunc_var
                .as_ref()
                .ok_or(Error::MissingTruncation { y })?;
            if track.y != y {
                return Err(Error::TruncationMismatch {
                    event: y,
                    path: track.y,
                });
            }
            sums.iter()
                .zip(&track.values[1..])
                .any(|(&s, &q)| reaches(s, spec.x) && within_budget(q, spec.v2))
        }
    })
}
