//! Moment generating function and cumulant machinery.
//!
//! For an increment `xi <= 1` with `E xi <= 0` and `E xi^2 = t`, the log-MGF is
//! bounded by
//!
//! ```text
//! f(lambda, t) = log( e^{-lambda t} / (1 + t) + t e^{lambda} / (1 + t) ),   lambda, t >= 0,
//! ```
//!
//! with equality for the two-point law on `{-t, 1}`. Summing over steps and using
//! concavity of `f` in `t` gives `Psi_k(lambda) <= k f(lambda, <X>_k / k)`; the
//! tangent line at `t = 0` gives the weaker `(e^lambda - 1 - lambda) <X>_k`.
//! The tail bounds of [`crate::bounds`] are infima of `-lambda x + (cumulant bound)`
//! over `lambda >= 0`; [`minimize_tilt`] computes those infima numerically so every
//! closed form has an independent cross-check.

use libm::{exp, log, log1p};

use crate::bounds::TailQuery;
use crate::error::{nonnegative, positive};
use crate::processes::IncrementLaw;
use crate::special::{exp_m1_minus, simpson};
use crate::{Error, Result};

/// Exponential tilting parameter `lambda >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Tilt(f64);

impl Tilt {
    pub const ZERO: Tilt = Tilt(0.0);

    pub fn new(lambda: f64) -> Result<Self> {
        nonnegative("lambda", lambda).map(Tilt)
    }

    pub fn lambda(self) -> f64 {
        self.0
    }
}

/// A conditional variance level `t >= 0` (a one-step second moment or an average `<X>_k / k`).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct VarianceLevel(f64);

impl VarianceLevel {
    pub fn new(t: f64) -> Result<Self> {
        nonnegative("t", t).map(VarianceLevel)
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

// Below this tilt the expm1-based form cannot overflow for any practical t.
const DIRECT_FORM_MAX_LAMBDA: f64 = 30.0;

/// `f(lambda, t)`, the logarithm of the Bennett MGF bound.
///
/// Small tilts use `log1p(((e^{-lt} - 1 + lt) + t (e^l - 1 - l)) / (1 + t))`, a sum of
/// nonnegative terms free of cancellation. Large tilts factor `e^lambda` out before
/// taking the log.
pub fn f_lambda_t(tilt: Tilt, t: VarianceLevel) -> f64 {
    let (l, t) = (tilt.0, t.0);
    if l == 0.0 || t == 0.0 {
        return 0.0;
    }
    let value = if l <= DIRECT_FORM_MAX_LAMBDA {
        log1p((exp_m1_minus(-l * t) + t * exp_m1_minus(l)) / (1.0 + t))
    } else {
        l + log(t + exp(-l * (1.0 + t))) - log1p(t)
    };
    value.max(0.0)
}

/// Bennett's bound on `E e^{lambda xi}` for `xi <= 1`, `E xi <= 0`, `E xi^2 = sigma2`.
pub fn mgf_upper_bound(tilt: Tilt, sigma2: VarianceLevel) -> f64 {
    let (l, s) = (tilt.0, sigma2.0);
    (exp(-l * s) + s * exp(l)) / (1.0 + s)
}

/// `k f(lambda, qc / k)`: the bound on the cumulant process at step `k` with `<X>_k = qc`.
pub fn cumulant_bound_hn(tilt: Tilt, k: u64, qc: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::OutOfDomain {
            name: "k",
            value: 0.0,
            expected: ">= 1",
        });
    }
    let qc = nonnegative("qc", qc)?;
    let k = k as f64;
    Ok(k * f_lambda_t(tilt, VarianceLevel(qc / k)))
}

/// `(e^lambda - 1 - lambda) qc`, valid under the weaker moment condition.
pub fn cumulant_bound_freedman(tilt: Tilt, qc: f64) -> Result<f64> {
    let qc = nonnegative("qc", qc)?;
    Ok(exp_m1_minus(tilt.0) * qc)
}

/// `lambda^2 (1 + b)^2 / 8`, an upper bound on `f(lambda, b)`.
pub fn quadratic_cumulant_bound(tilt: Tilt, b: f64) -> Result<f64> {
    let b = positive("b", b)?;
    let z = tilt.0 * (1.0 + b);
    Ok(z * z / 8.0)
}

/// Closed-form minimizer of `lambda -> -lambda x + n f(lambda, v^2 / n)` for `0 <= x < n`.
pub fn lambda_star_hn(q: &TailQuery) -> Result<Tilt> {
    let (x, v2, n) = (q.x(), q.v2(), q.n() as f64);
    if x >= n {
        return Err(Error::TiltDiverges { x, n: q.n() });
    }
    let scale = n / (n + v2);
    Ok(Tilt((scale * (log1p(x / v2) - log1p(-x / n))).max(0.0)))
}

/// Closed-form minimizer `log(1 + x / v^2)` of `lambda -> -lambda x + (e^lambda - 1 - lambda) v^2`.
pub fn lambda_star_freedman(x: f64, v: f64) -> Result<Tilt> {
    let x = nonnegative("x", x)?;
    let v = positive("v", v)?;
    Ok(Tilt(log1p(x / (v * v))))
}

const GOLDEN_INTERVAL_WIDTH: f64 = 1e-10;
const MAX_EXPANSIONS: usize = 200;
const UNIMODAL_SLACK: f64 = 1e-12;

/// Minimizes a unimodal objective over `lambda >= 0`.
///
/// The upper end of the bracket starts at `lambda_hi_seed` and doubles until the
/// objective stops decreasing; golden-section search then shrinks the bracket to a
/// width of `1e-10`. The result is rejected unless it is no larger than the
/// objective at both initial bracket ends.
pub fn minimize_tilt<F>(objective: F, lambda_hi_seed: f64) -> Result<(Tilt, f64)>
where
    F: Fn(Tilt) -> f64,
{
    let seed = positive("lambda_hi_seed", lambda_hi_seed)?;
    let g = |l: f64| objective(Tilt(l));

    let (lo, hi) = bracket(&g, seed)?;
    let (f_lo, f_hi) = (g(lo), g(hi));

    let inv_phi = (libm::sqrt(5.0) - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (g(c), g(d));
    while b - a > GOLDEN_INTERVAL_WIDTH {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = g(d);
        }
    }
    let best = 0.5 * (a + b);
    let value = g(best);

    for edge in [f_lo, f_hi] {
        let slack = UNIMODAL_SLACK * edge.abs().max(1.0);
        if value.is_nan() || value > edge + slack {
            return Err(Error::NotUnimodal {
                interior: value,
                edge,
            });
        }
    }
    Ok((Tilt(best), value))
}

fn bracket<G: Fn(f64) -> f64>(g: &G, seed: f64) -> Result<(f64, f64)> {
    let mut a = 0.0;
    let mut b = seed;
    let mut fb = g(b);
    if fb >= g(a) {
        return Ok((a, b));
    }
    for _ in 0..MAX_EXPANSIONS {
        let c = 2.0 * b;
        let fc = g(c);
        if fc >= fb {
            return Ok((a, c));
        }
        a = b;
        b = c;
        fb = fc;
    }
    Err(Error::BracketNotClosed {
        expansions: MAX_EXPANSIONS,
    })
}

const CDWE_RELATIVE_TOLERANCE: f64 = 1e-12;
const CDWE_QUADRATURE_NODES: usize = 1_000_000;
const CDWE_QUADRATURE_SPAN: f64 = 80.0;

/// Checks `E[xi^2 e^{lambda xi}] <= e^lambda E[xi^2]` at every tilt of the grid.
///
/// Finite-support laws are evaluated exactly. For the centered exponential law the
/// left side is integrated with a 10^6-node Simpson rule after the substitution
/// `u = (1 - lambda) z`; for `lambda >= 1` it diverges.
pub fn check_cdwe(law: &IncrementLaw, lambda_grid: &[Tilt]) -> Result<bool> {
    if lambda_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let second_moment = law.conditional_variance();
    for &tilt in lambda_grid {
        let l = tilt.0;
        let lhs = tilted_second_moment(law, l);
        let rhs = exp(l) * second_moment;
        if lhs.is_nan() || lhs > rhs * (1.0 + CDWE_RELATIVE_TOLERANCE) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `E[xi^2 e^{lambda xi}]` for a zoo law; `+inf` where the integral diverges.
pub fn tilted_second_moment(law: &IncrementLaw, lambda: f64) -> f64 {
    match law.atoms() {
        Some(atoms) => atoms
            .iter()
            .map(|&(value, prob)| prob * value * value * exp(lambda * value))
            .sum(),
        None => {
            let s = 1.0 - lambda;
            if s <= 0.0 {
                return f64::INFINITY;
            }
            // xi = Z - 1, Z ~ Exp(1): e^{-lambda} / s * int_0^inf (u/s - 1)^2 e^{-u} du
            let integral = simpson(
                |u| {
                    let w = u / s - 1.0;
                    w * w * exp(-u)
                },
                0.0,
                CDWE_QUADRATURE_SPAN,
                CDWE_QUADRATURE_NODES,
            );
            exp(-lambda) / s * integral
        }
    }
}
