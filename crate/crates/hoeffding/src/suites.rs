//! Property, oracle and Monte Carlo suites behind `verify`.
//!
//! Each suite counts individual checks and keeps the first few failures with enough
//! context (parameters, seeds) to reproduce them. The cumulant function is a
//! parameter so that a deliberately broken build can be checked to fail.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use hoeffding_core::bounds::{
    bennett_inverse_form, bound_azuma_refined, bound_b1, bound_f, bound_hn, bound_hoeffding_ho11,
    hoeffding_independent, u_n, Regime, UnBranch,
};
use hoeffding_core::cumulant::{
    f_lambda_t, lambda_star_freedman, lambda_star_hn, mgf_upper_bound, minimize_tilt,
    quadratic_cumulant_bound,
};
use hoeffding_core::montecarlo::VERIFY_GAMMA;
use hoeffding_core::oracle::{
    exact_event_probability, exact_event_probability_with, exact_vs_bound, max_passage_probability,
    probability_within, OracleMode,
};
use hoeffding_core::processes::{unit_interval, StreamKey};
use hoeffding_core::{
    EventSpec, EventVariant, IncrementLaw, LatticeLaw, TailQuery, Tilt, TruncationQuery,
    VarianceLevel, Verdict,
};

use crate::commands::{self, applicable_bounds, SimulationRequest};
use crate::grid::{default_grid, dense_grid};
use crate::parallel;

/// Signature of `f(lambda, t)`.
pub type CumulantFn = fn(Tilt, VarianceLevel) -> f64;

/// `-f(lambda, t)`: a deliberately wrong cumulant used to check that the suites fail.
pub fn sign_flipped_cumulant(tilt: Tilt, t: VarianceLevel) -> f64 {
    -f_lambda_t(tilt, t)
}

#[derive(Debug, Clone, Copy)]
pub struct SuiteOptions {
    pub cumulant: CumulantFn,
    /// Paths per Monte Carlo instance.
    pub mc_trials: u64,
    pub seed: u64,
    pub gamma: f64,
}

pub const DEFAULT_MC_TRIALS: u64 = 1_000_000;
pub const DEFAULT_SEED: u64 = 20_240_601;

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            cumulant: f_lambda_t,
            mc_trials: DEFAULT_MC_TRIALS,
            seed: DEFAULT_SEED,
            gamma: VERIFY_GAMMA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Cumulant,
    Mgf,
    Chain,
    Limit,
    Variational,
    Reduction,
    Azuma,
    BennettInverse,
    Oracle,
    MonteCarlo,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Cumulant,
        Suite::Mgf,
        Suite::Chain,
        Suite::Limit,
        Suite::Variational,
        Suite::Reduction,
        Suite::Azuma,
        Suite::BennettInverse,
        Suite::Oracle,
        Suite::MonteCarlo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Cumulant => "cumulant",
            Suite::Mgf => "mgf",
            Suite::Chain => "chain",
            Suite::Limit => "limit",
            Suite::Variational => "variational",
            Suite::Reduction => "reduction",
            Suite::Azuma => "azuma",
            Suite::BennettInverse => "bennett-inverse",
            Suite::Oracle => "oracle",
            Suite::MonteCarlo => "montecarlo",
        }
    }

    /// `all` or a comma-separated list of suite names.
    pub fn parse_selection(text: &str) -> Result<Vec<Suite>, String> {
        if text == "all" {
            return Ok(Suite::ALL.to_vec());
        }
        text.split(',').map(|s| s.trim().parse()).collect()
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|s| s.as_str()).collect();
                format!(
                    "unknown suite {s:?}, expected all or one of {}",
                    names.join(", ")
                )
            })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

const MAX_EXAMPLES: usize = 10;

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: u64,
    pub failures: u64,
    /// The first few failures, with reproduction data.
    pub examples: Vec<String>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checks > 0
    }
}

#[derive(Default)]
struct Tally {
    checks: u64,
    failures: u64,
    examples: Vec<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.fail(detail());
        }
    }

    fn fail(&mut self, detail: String) {
        self.failures += 1;
        if self.examples.len() < MAX_EXAMPLES {
            self.examples.push(detail);
        }
    }
}

pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> SuiteReport {
    let start = Instant::now();
    let mut t = Tally::default();
    match suite {
        Suite::Cumulant => cumulant(&mut t, opts.cumulant),
        Suite::Mgf => mgf(&mut t, opts.cumulant),
        Suite::Chain => chain(&mut t),
        Suite::Limit => limit(&mut t),
        Suite::Variational => variational(&mut t, opts.cumulant),
        Suite::Reduction => reduction(&mut t),
        Suite::Azuma => azuma(&mut t),
        Suite::BennettInverse => bennett_inverse(&mut t),
        Suite::Oracle => oracle(&mut t),
        Suite::MonteCarlo => montecarlo(&mut t, opts),
    }
    SuiteReport {
        suite,
        checks: t.checks,
        failures: t.failures,
        examples: t.examples,
        elapsed: start.elapsed(),
    }
}

fn tilt(l: f64) -> Tilt {
    Tilt::new(l).expect("grid tilts are nonnegative")
}

fn level(t: f64) -> VarianceLevel {
    VarianceLevel::new(t).expect("grid levels are nonnegative")
}

const FD_STEP: f64 = 1e-4;
const CONCAVITY_TOLERANCE: f64 = 1e-6;
const RELATIVE_SLACK: f64 = 1e-12;

/// Monotonicity and concavity in `t`, decrease of `f / t`, and the linear and quadratic upper bounds.
fn cumulant(t: &mut Tally, f: CumulantFn) {
    let h = FD_STEP;
    let ts: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
    for l in [0.1, 0.5, 1.0, 2.0, 5.0] {
        let g = |s: f64| f(tilt(l), level(s));
        for &s in &ts {
            let (up, mid) = (g(s + h), g(s));
            t.check(up > mid, || {
                format!("f not increasing at lambda={l} t={s}: {mid} -> {up}")
            });
            if s >= h {
                let second = (up - 2.0 * mid + g(s - h)) / (h * h);
                t.check(second <= CONCAVITY_TOLERANCE, || {
                    format!("f not concave at lambda={l} t={s}: second difference {second}")
                });
            }
        }
    }
    for l in [0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0] {
        let g = |s: f64| f(tilt(l), level(s));
        let linear_slope = l.exp_m1() - l;
        for w in ts[1..].windows(2) {
            let (a, b) = (g(w[0]) / w[0], g(w[1]) / w[1]);
            t.check(b <= a + RELATIVE_SLACK * a.abs(), || {
                format!(
                    "f/t increases at lambda={l} between t={} and t={}: {a} -> {b}",
                    w[0], w[1]
                )
            });
        }
        for &s in &ts {
            let bound = linear_slope * s;
            let value = g(s);
            t.check(value <= bound + RELATIVE_SLACK * bound.abs(), || {
                format!("f above (e^l - 1 - l) t at lambda={l} t={s}: {value} > {bound}")
            });
        }
    }
    for i in 0..=100 {
        let l = i as f64 * 0.1;
        for j in 1..=100 {
            let b = j as f64 * 0.05;
            let value = f(tilt(l), level(b));
            let bound = quadratic_cumulant_bound(tilt(l), b).expect("b > 0");
            t.check(value <= bound + RELATIVE_SLACK * bound.abs(), || {
                format!("f above l^2 (1 + b)^2 / 8 at lambda={l} b={b}: {value} > {bound}")
            });
        }
    }
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn zoo_laws() -> Vec<IncrementLaw> {
    let mut laws = Vec::new();
    for s in [0.25, 0.5, 1.0, 2.0] {
        laws.push(IncrementLaw::two_point_extremal(s).expect("valid"));
    }
    for b in [0.25, 0.5, 1.0] {
        laws.push(IncrementLaw::two_point_bounded(b).expect("valid"));
    }
    for (b, d) in [(0.5, 0.1), (0.75, 0.25)] {
        laws.push(IncrementLaw::drifted_two_point(b, d).expect("valid"));
    }
    laws.push(IncrementLaw::discrete(&[(-1.0, 0.4), (0.0, 0.4), (1.0, 0.2)]).expect("valid"));
    laws.push(IncrementLaw::discrete(&[(-0.5, 0.5), (0.0, 0.25), (1.0, 0.25)]).expect("valid"));
    let s = std::f64::consts::FRAC_1_SQRT_2;
    laws.push(IncrementLaw::two_point_extremal(s).expect("valid"));
    laws
}

/// Equality of the Bennett MGF bound for the extremal law and domination for the zoo.
fn mgf(t: &mut Tally, f: CumulantFn) {
    for i in 0..=100 {
        let l = i as f64 * 0.2;
        for j in 1..=100 {
            let s = j as f64 * 0.1;
            let law = IncrementLaw::two_point_extremal(s).expect("s > 0");
            let exact: f64 = law
                .atoms()
                .expect("finite")
                .iter()
                .map(|(v, p)| p * (l * v).exp())
                .sum();
            let bound = mgf_upper_bound(tilt(l), level(s));
            let gap = relative_gap(bound, exact);
            t.check(gap <= RELATIVE_SLACK, || {
                format!("extremal MGF mismatch at lambda={l} sigma2={s}: {bound} vs {exact} (rel {gap:e})")
            });
            let from_f = f(tilt(l), level(s)).exp();
            let gap = relative_gap(from_f, exact);
            t.check(gap <= RELATIVE_SLACK, || {
                format!("exp f(lambda, sigma2) != extremal MGF at lambda={l} sigma2={s}: {from_f} vs {exact}")
            });
        }
    }
    for law in zoo_laws() {
        let atoms = law.atoms().expect("finite");
        for i in 0..=100 {
            let l = i as f64 * 0.2;
            let exact: f64 = atoms.iter().map(|(v, p)| p * (l * v).exp()).sum();
            let bound = mgf_upper_bound(tilt(l), level(law.conditional_variance()));
            t.check(exact <= bound * (1.0 + RELATIVE_SLACK), || {
                format!("MGF of {law} exceeds the bound at lambda={l}: {exact} > {bound}")
            });
        }
    }
}

/// `H_n <= F <= B1 <= B2`, `H_n <= Prohorov` and growth in `n` on the dense and default grids.
fn chain(t: &mut Tally) {
    for grid in [dense_grid(), default_grid()] {
        match commands::compare(&grid) {
            Ok(c) => {
                let claims = c.rows.iter().filter(|r| r.verdict.is_some()).count() as u64;
                t.checks += claims;
                for v in c.violations {
                    t.fail(v);
                }
            }
            Err(e) => t.fail(format!("grid evaluation failed: {e}")),
        }
    }
}

const LIMIT_N: [u64; 7] = [1, 2, 5, 10, 100, 10_000, 1_000_000];
const LIMIT_TOLERANCE: f64 = 1e-3;

/// `H_n -> F` and monotone growth of `H_n` in `n`.
fn limit(t: &mut Tally) {
    let axis: Vec<f64> = (0..20)
        .map(|i| 0.1 * 100f64.powf(i as f64 / 19.0))
        .collect();
    for &x in &axis {
        for &v in &axis {
            let log_f = bound_f(x, v).expect("valid").log_value();
            let logs: Vec<f64> = LIMIT_N
                .iter()
                .map(|&n| bound_hn(&TailQuery::new(x, v, n).expect("valid")).log_value())
                .collect();
            let last = logs[logs.len() - 1];
            t.check(
                (last - log_f).abs() <= LIMIT_TOLERANCE * log_f.abs(),
                || format!("H_1e6 far from F at x={x} v={v}: {last} vs {log_f}"),
            );
            for (w, n) in logs.windows(2).zip(LIMIT_N.windows(2)) {
                t.check(w[0] <= w[1] + commands::ORDERING_SLACK, || {
                    format!(
                        "H_n decreases from n={} to n={} at x={x} v={v}: {} > {}",
                        n[0], n[1], w[0], w[1]
                    )
                });
            }
        }
    }
}

const VARIATIONAL_TOLERANCE: f64 = 1e-8;

/// Golden-section minimization of the tilt objectives against the closed forms.
fn variational(t: &mut Tally, f: CumulantFn) {
    for n in [1u64, 2, 10, 100] {
        let nf = n as f64;
        for v in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let v2 = v * v;
            for frac in [0.0, 0.05, 0.3, 0.7, 0.95] {
                let x = frac * nf;
                let q = TailQuery::new(x, v, n).expect("valid");
                let hn_objective = |l: Tilt| -l.lambda() * x + nf * f(l, level(v2 / nf));
                match minimize_tilt(hn_objective, 1.0) {
                    Ok((_, min)) => {
                        let closed = bound_hn(&q).log_value();
                        t.check((min - closed).abs() <= VARIATIONAL_TOLERANCE, || {
                            format!("H_n variational gap at x={x} v={v} n={n}: {min} vs {closed}")
                        });
                        let star = hn_objective(lambda_star_hn(&q).expect("x < n"));
                        t.check((min - star).abs() <= VARIATIONAL_TOLERANCE, || {
                            format!("H_n closed-form tilt not optimal at x={x} v={v} n={n}: {star} vs {min}")
                        });
                    }
                    Err(e) => t.fail(format!("H_n objective at x={x} v={v} n={n}: {e}")),
                }
                let fr_objective =
                    |l: Tilt| -l.lambda() * x + (l.lambda().exp_m1() - l.lambda()) * v2;
                match minimize_tilt(fr_objective, 1.0) {
                    Ok((_, min)) => {
                        let closed = bound_f(x, v).expect("valid").log_value();
                        t.check((min - closed).abs() <= VARIATIONAL_TOLERANCE, || {
                            format!("F variational gap at x={x} v={v}: {min} vs {closed}")
                        });
                        let star = fr_objective(lambda_star_freedman(x, v).expect("valid"));
                        t.check((min - star).abs() <= VARIATIONAL_TOLERANCE, || {
                            format!(
                                "F closed-form tilt not optimal at x={x} v={v}: {star} vs {min}"
                            )
                        });
                    }
                    Err(e) => t.fail(format!("F objective at x={x} v={v}: {e}")),
                }
            }
        }
    }
}

/// Hoeffding's independent-sum bound as the `x = n t`, `v^2 = n sigma^2` case of `H_n`.
fn reduction(t: &mut Tally) {
    const TS: [f64; 10] = [0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.8, 0.9, 0.95];
    const SIGMAS: [f64; 10] = [0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 10.0];
    for tt in TS {
        for s in SIGMAS {
            for n in [1u64, 2, 10, 100, 1000] {
                let nf = n as f64;
                let ho = hoeffding_independent(tt, s, n).expect("valid").log_value();
                let hn = bound_hn(&TailQuery::new(nf * tt, (nf * s).sqrt(), n).expect("valid"))
                    .log_value();
                t.check(
                    (ho - hn).abs() <= RELATIVE_SLACK * ho.abs().max(1.0),
                    || format!("reduction mismatch at t={tt} sigma2={s} n={n}: {ho} vs {hn}"),
                );
            }
        }
    }
}

/// `4 (n b + x / 3) < n (1 + b)^2` exactly when `x < 3/4 n (1 - b)^2`.
///
/// `b` and `x` are dyadic so every quantity except `x / 3` is exact, and the
/// boundary `x / 3` is exact too.
fn azuma(t: &mut Tally) {
    for k in 1..=48u32 {
        let b = k as f64 / 16.0;
        for n in 1..=100u64 {
            let nf = n as f64;
            let boundary = 0.75 * nf * (1.0 - b) * (1.0 - b);
            let xs = (0..=8 * n).map(|j| j as f64 / 8.0).chain([boundary]);
            for x in xs {
                let (_, branch) = u_n(x, b, n).expect("valid");
                let predicted = x < boundary;
                t.check((branch == UnBranch::Bernstein) == predicted, || {
                    format!(
                        "U_n branch {} at x={x} b={b} n={n}, boundary {boundary}",
                        branch.as_str()
                    )
                });
            }
        }
    }
}

/// `B1(x / 3 + v sqrt(2 x), v) <= e^{-x}`.
fn bennett_inverse(t: &mut Tally) {
    for lvl in [0.5, 1.0, 2.0, 5.0, 10.0] {
        for v in [0.25, 1.0, 4.0] {
            let (threshold, bound) = bennett_inverse_form(lvl, v).expect("valid");
            t.check(bound.log_value() == -lvl, || {
                format!("inverse-form bound at level={lvl}")
            });
            let b1 = bound_b1(threshold, v).expect("valid").value();
            let cap = (-lvl).exp() * (1.0 + RELATIVE_SLACK);
            t.check(b1 <= cap, || {
                format!("B1({threshold}, {v}) = {b1} > e^-{lvl} at level={lvl}")
            });
        }
    }
}

const ORACLE_N: [u64; 3] = [5, 10, 25];
const ORACLE_X_FRACTIONS: [f64; 4] = [0.1, 0.3, 0.6, 1.0];
const ORACLE_BUDGETS: [f64; 2] = [1.0, 0.5];
const ENUMERATION_INSTANCES: u64 = 200;
const AGREEMENT_TOLERANCE: f64 = 1e-12;

/// Lower support magnitude and regime for the bounded-difference bounds, when they apply.
fn bounded_difference(law: &IncrementLaw) -> Option<(f64, Regime)> {
    let b = -law.support_min();
    if law.support_max() > 1.0 || b <= 0.0 {
        return None;
    }
    if law.mean().abs() <= 1e-12 {
        Some((b, Regime::Martingale))
    } else if law.mean() < 0.0 && b <= 1.0 {
        Some((b, Regime::Supermartingale))
    } else {
        None
    }
}

/// Exact probabilities of the zoo against every bound whose hypotheses hold.
fn oracle(t: &mut Tally) {
    let mut instances = 0u64;
    for law in zoo_laws() {
        let lattice = law.lattice().expect("finite support");
        let m2 = lattice.second_moment();
        for n in ORACLE_N {
            for frac in ORACLE_X_FRACTIONS {
                let x = frac * n as f64;
                for budget in ORACLE_BUDGETS {
                    let v = (budget * n as f64 * m2).sqrt();
                    instances += 1;
                    let tag = || format!("law={law} n={n} x={x} v={v:?}");
                    let cmp = match exact_vs_bound(&lattice, n, x, v) {
                        Ok(c) => c,
                        Err(e) => {
                            t.fail(format!("{}: {e}", tag()));
                            continue;
                        }
                    };
                    t.check(cmp.require_valid().is_ok(), || {
                        format!("{}: {:?}", tag(), cmp.first_violation())
                    });
                    t.check(cmp.exact.is_nested(), || {
                        format!("{}: events not nested {:?}", tag(), cmp.exact)
                    });
                    let mass = cmp.exact.p_stopped + cmp.exact.surviving_mass;
                    t.check((mass - 1.0).abs() <= AGREEMENT_TOLERANCE, || {
                        format!("{}: mass {mass} not conserved", tag())
                    });
                }
                if let Some((b, regime)) = bounded_difference(&law) {
                    let tag = || format!("law={law} n={n} x={x} b={b}");
                    match max_passage_probability(&lattice, n, x) {
                        Ok(p) => {
                            let tq =
                                TruncationQuery::new(TailQuery::new(x, 1.0, n).expect("valid"))
                                    .with_b(b)
                                    .expect("b > 0");
                            let (azuma, _) = bound_azuma_refined(&tq).expect("b set");
                            let ho11 = bound_hoeffding_ho11(&tq, regime).expect("regime checked");
                            t.check(probability_within(p, azuma), || {
                                format!("{}: P(max >= x) = {p} > Azuma {}", tag(), azuma.value())
                            });
                            t.check(probability_within(p, ho11), || {
                                format!("{}: P(max >= x) = {p} > Ho11 {}", tag(), ho11.value())
                            });
                        }
                        Err(e) => t.fail(format!("{}: {e}", tag())),
                    }
                }
            }
        }
    }
    t.check(instances >= 200, || {
        format!("oracle corpus has only {instances} instances")
    });
    enumeration_agreement(t);
}

/// DP against brute-force enumeration on random small instances.
fn enumeration_agreement(t: &mut Tally) {
    let laws: Vec<LatticeLaw> = zoo_laws()
        .iter()
        .filter_map(IncrementLaw::lattice)
        .collect();
    let mut rng = StreamKey::new(0x00e1_ac1e).stream(0);
    for i in 0..ENUMERATION_INSTANCES {
        let law = &laws[(unit_interval(&mut rng) * laws.len() as f64) as usize % laws.len()];
        let max_n = if law.atoms().len() > 2 { 8 } else { 12 };
        let n = 1 + (unit_interval(&mut rng) * max_n as f64) as u64;
        let x = unit_interval(&mut rng) * n as f64;
        let v = (unit_interval(&mut rng) * 1.2 * n as f64 * law.second_moment())
            .sqrt()
            .max(1e-3);
        let tag = || {
            format!(
                "instance {i}: atoms={:?} n={n} x={x:?} v={v:?}",
                law.atoms()
            )
        };
        let dp = exact_event_probability(law, n, x, v);
        let en = exact_event_probability_with(law, n, x, v, OracleMode::Enumerate);
        match (dp, en) {
            (Ok(dp), Ok(en)) => {
                let gap = (dp.p_stopped - en.p_stopped)
                    .abs()
                    .max((dp.p_max - en.p_max).abs())
                    .max((dp.p_final - en.p_final).abs());
                t.check(gap <= AGREEMENT_TOLERANCE, || {
                    format!("{}: DP and enumeration differ by {gap:e}", tag())
                });
            }
            (dp, en) => t.fail(format!("{}: {:?} / {:?}", tag(), dp.err(), en.err())),
        }
    }
}

/// A Monte Carlo instance: the events `X_k >= x` under budget `v^2` at horizon `n`.
struct McInstance {
    law: IncrementLaw,
    n: u64,
    x: f64,
    /// Budget in units of `n E[xi^2]`.
    budget: f64,
    y: Option<f64>,
    /// Bounds that must be among those verified, so the instance is not vacuous.
    required: &'static [&'static str],
}

fn mc_corpus() -> Vec<McInstance> {
    let law = |l: hoeffding_core::Result<IncrementLaw>| l.expect("valid law");
    vec![
        McInstance {
            law: law(IncrementLaw::two_point_extremal(1.0)),
            n: 50,
            x: 8.0,
            budget: 1.0,
            y: None,
            required: &["H_n", "F", "B1", "B2", "Prohorov"],
        },
        McInstance {
            law: law(IncrementLaw::two_point_extremal(0.25)),
            n: 20,
            x: 3.0,
            budget: 1.0,
            y: None,
            required: &["H_n", "Prohorov", "Ho11"],
        },
        McInstance {
            law: law(IncrementLaw::two_point_bounded(0.5)),
            n: 30,
            x: 5.0,
            budget: 1.0,
            y: None,
            required: &["Azuma_refined", "Ho11"],
        },
        McInstance {
            law: law(IncrementLaw::two_point_bounded(2.0)),
            n: 20,
            x: 6.0,
            budget: 1.0,
            y: None,
            required: &["Azuma_refined", "Ho11"],
        },
        McInstance {
            law: law(IncrementLaw::drifted_two_point(0.5, 0.1)),
            n: 30,
            x: 3.0,
            budget: 1.0,
            y: None,
            required: &["H_n", "Azuma_refined", "Ho11"],
        },
        McInstance {
            law: law(IncrementLaw::drifted_two_point(0.75, 0.25)),
            n: 20,
            x: 2.0,
            budget: 0.8,
            y: None,
            required: &["H_n", "Ho11"],
        },
        McInstance {
            law: law(IncrementLaw::discrete(&[
                (-1.0, 0.4),
                (0.0, 0.4),
                (1.0, 0.2),
            ])),
            n: 25,
            x: 3.0,
            budget: 1.0,
            y: None,
            required: &["H_n", "B2"],
        },
        McInstance {
            // Unbounded above by 1 but satisfies the tilted-moment condition up to the optimal tilt.
            law: law(IncrementLaw::discrete(&[(1.1, 0.2), (-0.275, 0.8)])),
            n: 20,
            x: 6.0,
            budget: 1.0,
            y: None,
            required: &["F"],
        },
        McInstance {
            law: IncrementLaw::CenteredExponential,
            n: 20,
            x: 6.0,
            budget: 1.0,
            y: Some(3.0),
            required: &["Fuk_Nagaev"],
        },
    ]
}

fn mc_specs(
    inst: &McInstance,
    v: f64,
    variants: &[EventVariant],
) -> hoeffding_core::Result<Vec<EventSpec>> {
    variants
        .iter()
        .map(|&var| EventSpec::new(inst.x, v, var))
        .collect()
}

/// Every applicable bound against the Clopper-Pearson lower end, and nesting of the
/// stopped, max and final events on every path. The truncated event is not nested
/// in the others and runs separately.
fn montecarlo(t: &mut Tally, opts: &SuiteOptions) {
    for (i, inst) in mc_corpus().into_iter().enumerate() {
        let seed = opts.seed.wrapping_add(i as u64);
        let v = (inst.budget * inst.n as f64 * inst.law.conditional_variance()).sqrt();
        let tag = || {
            format!(
                "law={} n={} x={} v={v:?} trials={} seed={seed}",
                inst.law, inst.n, inst.x, opts.mc_trials
            )
        };
        let mut runs = vec![vec![
            EventVariant::StoppedAnyK,
            EventVariant::MaxWithFinalQC,
            EventVariant::FinalOnly,
        ]];
        if let Some(y) = inst.y {
            runs.push(vec![EventVariant::TruncatedAnyK { y }]);
        }
        let mut verified: Vec<&'static str> = Vec::new();
        for variants in runs {
            let set = mc_specs(&inst, v, &variants).and_then(|specs| {
                parallel::estimate_events(
                    &inst.law,
                    &specs,
                    inst.n,
                    opts.mc_trials,
                    seed,
                    opts.gamma,
                )
            });
            let set = match set {
                Ok(s) => s,
                Err(e) => {
                    t.fail(format!("{}: {e}", tag()));
                    continue;
                }
            };
            t.check(set.nesting_violations == 0, || {
                format!(
                    "{}: {} paths violate event nesting",
                    tag(),
                    set.nesting_violations
                )
            });
            for (estimate, &variant) in set.estimates.iter().zip(&variants) {
                let req = SimulationRequest {
                    law: inst.law.clone(),
                    variant,
                    x: inst.x,
                    v,
                    n: inst.n,
                    b: None,
                    trials: opts.mc_trials,
                    seed,
                    gamma: opts.gamma,
                };
                let bounds = match applicable_bounds(&req) {
                    Ok(b) => b,
                    Err(e) => {
                        t.fail(format!("{}: {e}", tag()));
                        continue;
                    }
                };
                for b in bounds {
                    verified.push(b.name);
                    let verdict = hoeffding_core::montecarlo::verify_bound(estimate, b.log);
                    t.check(verdict == Verdict::Pass, || {
                        format!(
                            "{}: FLAG {} on {} event: ci_low {} > bound {}",
                            tag(),
                            b.name,
                            variant.as_str(),
                            estimate.ci_low,
                            b.log.value()
                        )
                    });
                }
            }
        }
        for name in inst.required {
            t.check(verified.contains(name), || {
                format!("{}: bound {name} was never applicable", tag())
            });
        }
    }
}
