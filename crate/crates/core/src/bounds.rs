//! Closed-form tail bounds, evaluated in log-space.
//!
//! Every bound is a probability, so results are [`LogProb`] values clamped at
//! `log 1 = 0`. The Bennett-type exponents are written through
//!
//! ```text
//! h(u) = (1 + u) log(1 + u) - u,   u >= -1,
//! ```
//!
//! which is nonnegative and has a well-conditioned series near zero:
//!
//! ```text
//! log F(x, v)   = -v^2 h(x / v^2)
//! log H_n(x, v) = -n / (n + v^2) * ( v^2 h(x / v^2) + n h(-x / n) ),   0 <= x < n
//! log H_n(n, v) = n log(v^2 / (n + v^2))
//! ```

use libm::{asinh, exp, fabs, log, log1p, sqrt};

use crate::error::{nonnegative, positive, probability};
use crate::special::log_add_exp;
use crate::{Error, Result};

/// The `(x, v, n)` triple parameterizing the stopped-event bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailQuery {
    x: f64,
    v: f64,
    v2: f64,
    n: u64,
}

impl TailQuery {
    pub fn new(x: f64, v: f64, n: u64) -> Result<Self> {
        let v = positive("v", v)?;
        Self::build(x, v, v * v, n)
    }

    /// Builds the query from the variance budget `v^2` directly, avoiding a square-root round trip.
    pub fn with_v2(x: f64, v2: f64, n: u64) -> Result<Self> {
        let v2 = positive("v2", v2)?;
        Self::build(x, sqrt(v2), v2, n)
    }

    fn build(x: f64, v: f64, v2: f64, n: u64) -> Result<Self> {
        let x = nonnegative("x", x)?;
        if n == 0 {
            return Err(Error::OutOfDomain {
                name: "n",
                value: 0.0,
                expected: ">= 1",
            });
        }
        Ok(TailQuery { x, v, v2, n })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn v2(&self) -> f64 {
        self.v2
    }

    pub fn n(&self) -> u64 {
        self.n
    }
}

/// A probability carried as its natural logarithm, never above `log 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogProb(f64);

impl LogProb {
    pub const ONE: LogProb = LogProb(0.0);
    pub const ZERO: LogProb = LogProb(f64::NEG_INFINITY);

    /// Clamps `log_value` to `<= 0`. NaN is mapped to `log 1`, the vacuous bound.
    pub fn from_log(log_value: f64) -> Self {
        if log_value.is_nan() || log_value > 0.0 {
            LogProb::ONE
        } else {
            LogProb(log_value)
        }
    }

    pub fn from_linear(p: f64) -> Self {
        if p <= 0.0 {
            LogProb::ZERO
        } else {
            Self::from_log(log(p))
        }
    }

    pub fn log_value(self) -> f64 {
        self.0
    }

    pub fn value(self) -> f64 {
        exp(self.0)
    }

    /// Clamped sum of two probabilities.
    pub fn saturating_add(self, other: LogProb) -> LogProb {
        LogProb::from_log(log_add_exp(self.0, other.0))
    }
}

/// A [`TailQuery`] extended with the truncation level `y` and lower bound magnitude `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationQuery {
    pub base: TailQuery,
    y: Option<f64>,
    b: Option<f64>,
}

impl TruncationQuery {
    pub fn new(base: TailQuery) -> Self {
        TruncationQuery {
            base,
            y: None,
            b: None,
        }
    }

    pub fn with_y(mut self, y: f64) -> Result<Self> {
        self.y = Some(positive("y", y)?);
        Ok(self)
    }

    pub fn with_b(mut self, b: f64) -> Result<Self> {
        self.b = Some(positive("b", b)?);
        Ok(self)
    }

    pub fn y(&self) -> Result<f64> {
        self.y.ok_or(Error::MissingParameter { name: "y" })
    }

    pub fn b(&self) -> Result<f64> {
        self.b.ok_or(Error::MissingParameter { name: "b" })
    }
}

/// `h(u) = (1 + u) log1p(u) - u` for `u >= -1`.
pub fn bennett_h(u: f64) -> f64 {
    if u == -1.0 {
        return 1.0;
    }
    if fabs(u) < 0.1 {
        // sum_{k >= 2} (-1)^k u^k / (k (k - 1))
        let mut power = u * u;
        let mut sum = 0.0;
        let mut k = 2.0;
        loop {
            let term = power / (k * (k - 1.0));
            sum += term;
            if fabs(term) <= 1e-18 * fabs(sum) {
                break;
            }
            power *= -u;
            k += 1.0;
        }
        sum
    } else {
        (1.0 + u) * log1p(u) - u
    }
}

/// `H_n(x, v)`, with `(+inf)^0 = 1` at `x = n` and the indicator `1{x <= n}`.
pub fn bound_hn(q: &TailQuery) -> LogProb {
    let (x, v2) = (q.x, q.v2);
    let n = q.n as f64;
    if x > n {
        LogProb::ZERO
    } else if x == n {
        LogProb::from_log(-n * log1p(n / v2))
    } else {
        let scale = n / (n + v2);
        LogProb::from_log(-scale * (v2 * bennett_h(x / v2) + n * bennett_h(-x / n)))
    }
}

/// Freedman's bound `F(x, v) = (v^2 / (x + v^2))^{x + v^2} e^x`.
pub fn bound_f(x: f64, v: f64) -> Result<LogProb> {
    let x = nonnegative("x", x)?;
    let v2 = positive("v", v)? * v;
    Ok(freedman_log(x, v2))
}

fn freedman_log(x: f64, v2: f64) -> LogProb {
    LogProb::from_log(-v2 * bennett_h(x / v2))
}

/// Bennett's bound `B1(x, v)`.
pub fn bound_b1(x: f64, v: f64) -> Result<LogProb> {
    let x = nonnegative("x", x)?;
    let v2 = positive("v", v)? * v;
    if x == 0.0 {
        return Ok(LogProb::ONE);
    }
    let denom = v2 * (1.0 + sqrt(1.0 + 2.0 * x / (3.0 * v2))) + x / 3.0;
    Ok(LogProb::from_log(-x * x / denom))
}

/// Bernstein's bound `B2(x, v) = exp(-x^2 / (2 (v^2 + x / 3)))`.
pub fn bound_b2(x: f64, v: f64) -> Result<LogProb> {
    let x = nonnegative("x", x)?;
    let v2 = positive("v", v)? * v;
    Ok(LogProb::from_log(-x * x / (2.0 * (v2 + x / 3.0))))
}

/// Prohorov's bound `exp(-(x / 2) asinh(x / (2 v^2)))`.
pub fn bound_prohorov(x: f64, v: f64) -> Result<LogProb> {
    let x = nonnegative("x", x)?;
    let v2 = positive("v", v)? * v;
    Ok(LogProb::from_log(-0.5 * x * asinh(x / (2.0 * v2))))
}

/// Which side of `U_n(x, b) = min{n (1 + b)^2, 4 (n b + x / 3)}` is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnBranch {
    /// `n (1 + b)^2`, the classical Azuma-Hoeffding denominator.
    Azuma,
    /// `4 (n b + x / 3)`, the Bernstein-type denominator.
    Bernstein,
    Tied,
}

impl UnBranch {
    pub fn as_str(self) -> &'static str {
        match self {
            UnBranch::Azuma => "azuma",
            UnBranch::Bernstein => "bernstein",
            UnBranch::Tied => "tied",
        }
    }
}

/// `U_n(x, b)` and its active branch.
pub fn u_n(x: f64, b: f64, n: u64) -> Result<(f64, UnBranch)> {
    let x = nonnegative("x", x)?;
    let b = positive("b", b)?;
    let n = n as f64;
    let azuma = n * (1.0 + b) * (1.0 + b);
    let bernstein = 4.0 * (n * b + x / 3.0);
    Ok(if bernstein < azuma {
        (bernstein, UnBranch::Bernstein)
    } else if azuma < bernstein {
        (azuma, UnBranch::Azuma)
    } else {
        (azuma, UnBranch::Tied)
    })
}

/// The refined Azuma-Hoeffding bound `exp(-2 x^2 / U_n(x, b))` and the active `U_n` branch.
pub fn bound_azuma_refined(tq: &TruncationQuery) -> Result<(LogProb, UnBranch)> {
    let b = tq.b()?;
    let x = tq.base.x;
    let (u, branch) = u_n(x, b, tq.base.n)?;
    Ok((LogProb::from_log(-2.0 * x * x / u), branch))
}

/// Which difference sequences a bounded-below bound is claimed for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Martingale,
    /// Requires `0 < b <= 1`.
    Supermartingale,
}

/// `H_n(x, sqrt(n b))`, the bound for differences in `[-b, 1]`.
pub fn bound_hoeffding_ho11(tq: &TruncationQuery, regime: Regime) -> Result<LogProb> {
    let b = tq.b()?;
    if regime == Regime::Supermartingale && b > 1.0 {
        return Err(Error::SupermartingaleRange { b });
    }
    let n = tq.base.n;
    let q = TailQuery::with_v2(tq.base.x, n as f64 * b, n)?;
    Ok(bound_hn(&q))
}

/// The two terms of the truncated bound and their clamped sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FukNagaev {
    pub hn: LogProb,
    pub p_exceed: f64,
    pub total: LogProb,
}

/// `H_n(x / y, v / y) + P(max_i xi_i > y)` for unbounded supermartingale differences.
///
/// `v` is taken from `tq.base`; `p_exceed` is supplied by the caller.
pub fn bound_fuk_nagaev(tq: &TruncationQuery, p_exceed: f64) -> Result<FukNagaev> {
    let y = tq.y()?;
    let p_exceed = probability("p_exceed", p_exceed)?;
    let base = &tq.base;
    let rescaled = TailQuery::with_v2(base.x / y, base.v2 / (y * y), base.n)?;
    let hn = bound_hn(&rescaled);
    Ok(FukNagaev {
        hn,
        p_exceed,
        total: hn.saturating_add(LogProb::from_linear(p_exceed)),
    })
}

/// Courbot's bound `F(x / y, v / y) + sum_i P(xi_i > y) + P(<X>_n > v^2)`.
pub fn bound_courbot(x: f64, y: f64, v: f64, sum_exceed: f64, p_qc_exceed: f64) -> Result<LogProb> {
    let x = nonnegative("x", x)?;
    let y = positive("y", y)?;
    let v = positive("v", v)?;
    let sum_exceed = nonnegative("sum_exceed", sum_exceed)?;
    let p_qc_exceed = probability("p_qc_exceed", p_qc_exceed)?;
    let f_term = freedman_log(x / y, v * v / (y * y));
    Ok(f_term
        .saturating_add(LogProb::from_linear(sum_exceed))
        .saturating_add(LogProb::from_linear(p_qc_exceed)))
}

/// Haeusler's bound `exp((x / y) (1 - log(x y / v^2)))`, clamped at 1.
pub fn bound_haeusler(x: f64, y: f64, v: f64) -> Result<LogProb> {
    let x = positive("x", x)?;
    let y = positive("y", y)?;
    let v = positive("v", v)?;
    Ok(LogProb::from_log((x / y) * (1.0 - log(x * y / (v * v)))))
}

/// Bennett's inequality for `P(X_n >= n t)` with average variance `sigma2`.
pub fn bennett_original(t: f64, sigma2: f64, n: u64) -> Result<LogProb> {
    let t = nonnegative("t", t)?;
    let sigma2 = positive("sigma2", sigma2)?;
    Ok(LogProb::from_log(
        -(n as f64) * sigma2 * bennett_h(t / sigma2),
    ))
}

/// Hoeffding's bound for independent `xi_i <= 1`, `0 <= t < 1`.
pub fn hoeffding_independent(t: f64, sigma2: f64, n: u64) -> Result<LogProb> {
    let t = nonnegative("t", t)?;
    if t >= 1.0 {
        return Err(Error::OutOfDomain {
            name: "t",
            value: t,
            expected: "< 1",
        });
    }
    let sigma2 = positive("sigma2", sigma2)?;
    let w = 1.0 + sigma2;
    let per_step = -(t + sigma2) / w * log1p(t / sigma2) - (1.0 - t) / w * log1p(-t);
    Ok(LogProb::from_log(n as f64 * per_step))
}

/// The threshold `x / 3 + v sqrt(2 x)` exceeded with probability at most `e^{-x}`, `x = level`.
pub fn bennett_inverse_form(level: f64, v: f64) -> Result<(f64, LogProb)> {
    let level = positive("level", level)?;
    let v = positive("v", v)?;
    Ok((
        level / 3.0 + v * sqrt(2.0 * level),
        LogProb::from_log(-level),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(x: f64, v: f64, n: u64) -> TailQuery {
        TailQuery::new(x, v, n).unwrap()
    }

    const E: f64 = core::f64::consts::E;

    #[test]
    fn bennett_h_series_and_direct_forms_meet() {
        // 40-digit reference values.
        let reference = [
            (-0.0999, 0.005165005411740352),
            (-0.05, 0.0012713703318269934),
            (1e-9, 4.999999998333334e-19),
            (0.05, 0.0012296723779036034),
            (0.0999, 0.004831671312369207),
        ];
        for (u, h) in reference {
            assert!((bennett_h(u) - h).abs() <= 4e-16 * h, "u={u}");
        }
        assert_eq!(bennett_h(0.0), 0.0);
        assert_eq!(bennett_h(-1.0), 1.0);
    }

    #[test]
    fn query_validation() {
        assert!(TailQuery::new(-1.0, 1.0, 1).is_err());
        assert!(TailQuery::new(1.0, 0.0, 1).is_err());
        assert!(TailQuery::new(1.0, 1.0, 0).is_err());
        assert!(TailQuery::new(f64::NAN, 1.0, 1).is_err());
        assert!(TruncationQuery::new(q(1.0, 1.0, 1)).with_y(0.0).is_err());
    }

    #[test]
    fn hn_examples() {
        assert_eq!(bound_hn(&q(0.0, 1.0, 5)).value(), 1.0);
        assert!((bound_hn(&q(1.0, 1.0, 2)).value() - 2f64.powf(-2.0 / 3.0)).abs() < 1e-15);
        assert!((bound_hn(&q(2.0, 1.0, 2)).value() - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(bound_hn(&q(3.0, 1.0, 2)), LogProb::ZERO);
        assert_eq!(bound_hn(&q(3.0, 1.0, 2)).value(), 0.0);
    }

    #[test]
    fn hn_convention_branch_is_the_left_limit() {
        for (v, n) in [(1.0, 2), (0.5, 10), (3.0, 7)] {
            let at = bound_hn(&q(n as f64, v, n)).log_value();
            let near = bound_hn(&q(n as f64 * (1.0 - 1e-9), v, n)).log_value();
            assert!(
                (at - near).abs() < 1e-6 * at.abs(),
                "v={v} n={n}: {at} vs {near}"
            );
        }
    }

    #[test]
    fn freedman_bennett_bernstein_examples() {
        assert_eq!(bound_f(0.0, 2.0).unwrap(), LogProb::ONE);
        assert!((bound_f(1.0, 1.0).unwrap().value() - E / 4.0).abs() < 1e-15);
        let h = bound_hn(&q(1.0, 1.0, 1_000_000)).value();
        assert!((h / (E / 4.0) - 1.0).abs() < 1e-3);

        assert_eq!(bound_b1(0.0, 1.0).unwrap(), LogProb::ONE);
        let b1 = (-1.0 / (1.0 + (5.0f64 / 3.0).sqrt() + 1.0 / 3.0)).exp();
        assert!((bound_b1(1.0, 1.0).unwrap().value() - b1).abs() < 1e-15);
        assert!((b1 - 0.6831437579639258).abs() < 1e-15);
        assert!(bound_f(1.0, 1.0).unwrap() <= bound_b1(1.0, 1.0).unwrap());

        assert_eq!(bound_b2(0.0, 1.0).unwrap(), LogProb::ONE);
        assert!((bound_b2(1.0, 1.0).unwrap().value() - (-0.375f64).exp()).abs() < 1e-15);
        assert!(bound_b1(1.0, 1.0).unwrap() <= bound_b2(1.0, 1.0).unwrap());
    }

    #[test]
    fn prohorov_examples() {
        assert_eq!(bound_prohorov(0.0, 1.0).unwrap(), LogProb::ONE);
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        let expected = (-0.5 * golden.ln()).exp();
        assert!((bound_prohorov(1.0, 1.0).unwrap().value() - expected).abs() < 1e-15);
        assert!((expected - 0.786151).abs() < 1e-6);
        assert!(bound_hn(&q(1.0, 1.0, 2)) <= bound_prohorov(1.0, 1.0).unwrap());
    }

    #[test]
    fn azuma_refined_examples() {
        let tq = |x, n, b| TruncationQuery::new(q(x, 1.0, n)).with_b(b).unwrap();
        let (p, branch) = bound_azuma_refined(&tq(0.0, 10, 1.0)).unwrap();
        assert_eq!(p, LogProb::ONE);
        assert_eq!(branch, UnBranch::Tied);
        assert_eq!(u_n(0.0, 1.0, 10).unwrap().0, 40.0);

        let (u, branch) = u_n(1.0, 0.5, 10).unwrap();
        assert!((u - 64.0 / 3.0).abs() < 1e-13);
        assert_eq!(branch, UnBranch::Bernstein);
        let (p, _) = bound_azuma_refined(&tq(1.0, 10, 0.5)).unwrap();
        assert!((p.log_value() + 3.0 / 32.0).abs() < 1e-15);

        let (u, branch) = u_n(3.0, 0.5, 10).unwrap();
        assert_eq!((u, branch), (22.5, UnBranch::Azuma));
        let (p, _) = bound_azuma_refined(&tq(3.0, 10, 0.5)).unwrap();
        assert!((p.value() - (-0.8f64).exp()).abs() < 1e-15);

        assert!(matches!(
            bound_azuma_refined(&TruncationQuery::new(q(1.0, 1.0, 2))),
            Err(Error::MissingParameter { name: "b" })
        ));
    }

    #[test]
    fn ho11_examples() {
        let tq = |x, n, b| TruncationQuery::new(q(x, 1.0, n)).with_b(b).unwrap();
        assert_eq!(
            bound_hoeffding_ho11(&tq(0.0, 4, 0.5), Regime::Martingale).unwrap(),
            LogProb::ONE
        );
        let p = bound_hoeffding_ho11(&tq(1.0, 2, 0.5), Regime::Supermartingale).unwrap();
        assert!((p.value() - 2f64.powf(-2.0 / 3.0)).abs() < 1e-15);
        let (azuma, _) = bound_azuma_refined(&tq(1.0, 2, 0.5)).unwrap();
        assert!(p <= azuma);
        assert!(matches!(
            bound_hoeffding_ho11(&tq(1.0, 2, 1.5), Regime::Supermartingale),
            Err(Error::SupermartingaleRange { .. })
        ));
        assert!(bound_hoeffding_ho11(&tq(1.0, 2, 1.5), Regime::Martingale).is_ok());
    }

    #[test]
    fn fuk_nagaev_examples() {
        let tq = |x, v, n, y| TruncationQuery::new(q(x, v, n)).with_y(y).unwrap();
        let r = bound_fuk_nagaev(&tq(0.0, 1.0, 5, 1.0), 0.0).unwrap();
        assert_eq!(r.total, LogProb::ONE);
        let r = bound_fuk_nagaev(&tq(2.0, 2.0, 2, 2.0), 0.0).unwrap();
        assert!((r.total.value() - 2f64.powf(-2.0 / 3.0)).abs() < 1e-15);
        assert_eq!(r.hn, r.total);
        assert!(bound_fuk_nagaev(&tq(2.0, 2.0, 2, 2.0), 1.5).is_err());
        assert!(bound_fuk_nagaev(&tq(2.0, 2.0, 2, 2.0), -0.1).is_err());

        let p = 0.01;
        let r = bound_fuk_nagaev(&tq(4.0, 2.0, 2, 2.0), p).unwrap();
        assert!((r.total.value() - (r.hn.value() + p)).abs() < 1e-15);
    }

    #[test]
    fn courbot_and_haeusler_examples() {
        assert_eq!(
            bound_courbot(0.0, 1.0, 1.0, 0.0, 0.0).unwrap(),
            LogProb::ONE
        );
        assert!((bound_courbot(2.0, 2.0, 2.0, 0.0, 0.0).unwrap().value() - E / 4.0).abs() < 1e-15);
        assert!(bound_courbot(2.0, 2.0, 2.0, -0.1, 0.0).is_err());
        assert!(bound_courbot(2.0, 2.0, 2.0, 0.0, -0.1).is_err());

        // x y / v^2 = e puts the exponent at zero.
        let (y, v) = (2.0, 3.0);
        let x = v * v / y * E;
        assert!(bound_haeusler(x, y, v).unwrap().log_value().abs() < 1e-14);
        assert_eq!(bound_haeusler(2.0, 1.0, 1.0).unwrap(), LogProb::ONE);
        let haeusler = bound_haeusler(8.0, 1.0, 1.0).unwrap();
        assert!((haeusler.log_value() - 8.0 * (1.0 - 8f64.ln())).abs() < 1e-14);
        assert!((haeusler.value() - 1.78e-4).abs() < 1e-6);
        // F(8, 1) = 9^{-9} e^8, about 7.7e-6.
        let f = bound_f(8.0, 1.0).unwrap();
        assert!((f.value() - 9f64.powi(-9) * 8f64.exp()).abs() < 1e-18);
        assert!(f <= haeusler);
    }

    #[test]
    fn bennett_and_hoeffding_independent_examples() {
        assert_eq!(bennett_original(0.0, 1.0, 3).unwrap(), LogProb::ONE);
        assert!((bennett_original(1.0, 1.0, 1).unwrap().value() - E / 4.0).abs() < 1e-15);
        let a = bennett_original(0.5, 1.0, 4).unwrap().log_value();
        let b = bound_f(2.0, 2.0).unwrap().log_value();
        assert!((a - b).abs() < 1e-15);

        assert_eq!(hoeffding_independent(0.0, 1.0, 5).unwrap(), LogProb::ONE);
        let h = hoeffding_independent(0.5, 0.5, 2).unwrap();
        assert!((h.value() - 2f64.powf(-2.0 / 3.0)).abs() < 1e-15);
        assert!(
            hoeffding_independent(0.3, 1.0, 4).unwrap() <= bennett_original(0.3, 1.0, 4).unwrap()
        );
        assert!(hoeffding_independent(1.0, 1.0, 4).is_err());
    }

    #[test]
    fn bennett_inverse_examples() {
        let (th, p) = bennett_inverse_form(1e-14, 1.0).unwrap();
        assert!(th < 1e-6 && (p.value() - 1.0).abs() < 1e-13);
        let (th, p) = bennett_inverse_form(1.0, 1.0).unwrap();
        assert!((th - (1.0 / 3.0 + 2f64.sqrt())).abs() < 1e-15);
        assert!((p.value() - (-1f64).exp()).abs() < 1e-16);
        assert!(bound_b1(th, 1.0).unwrap().value() <= (-1f64).exp() * (1.0 + 1e-12));
        let (th, p) = bennett_inverse_form(2.0, 0.5).unwrap();
        assert!((th - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.log_value(), -2.0);
        assert!(bennett_inverse_form(0.0, 1.0).is_err());
    }

    #[test]
    fn log_prob_clamps() {
        assert_eq!(LogProb::from_log(0.6), LogProb::ONE);
        assert_eq!(LogProb::from_log(f64::NAN), LogProb::ONE);
        assert_eq!(LogProb::from_linear(0.0), LogProb::ZERO);
        assert_eq!(LogProb::from_linear(3.0), LogProb::ONE);
        let half = LogProb::from_linear(0.5);
        assert_eq!(half.saturating_add(half), LogProb::ONE);
        assert_eq!(half.saturating_add(half).saturating_add(half).value(), 1.0);
    }
}
