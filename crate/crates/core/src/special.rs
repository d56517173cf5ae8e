//! Numerically stable scalar primitives shared by the bound and estimator code.

use libm::{exp, expm1, fabs, lgamma, log, log1p};

/// `e^z - 1 - z` without cancellation near zero.
///
/// The result is nonnegative for every real `z`.
pub fn exp_m1_minus(z: f64) -> f64 {
    if fabs(z) < 0.5 {
        // Taylor tail: z^2/2! + z^3/3! + ...; |z| < 0.5 converges to round-off in < 20 terms.
        let mut term = z * z / 2.0;
        let mut sum = term;
        let mut k = 2.0;
        while fabs(term) > 1e-18 * sum {
            k += 1.0;
            term *= z / k;
            sum += term;
        }
        sum
    } else {
        expm1(z) - z
    }
}

/// `log(exp(a) + exp(b))`, tolerating `-inf` operands.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + log1p(exp(lo - hi))
}

/// `log B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    lgamma(a) + lgamma(b) - lgamma(a + b)
}

// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 200_000;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if fabs(d) < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if fabs(d) < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if fabs(c) < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if fabs(del - 1.0) < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)` for `a, b > 0`.
pub fn regularized_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * log(x) + b * log1p(-x) - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        exp(ln_front) * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - exp(ln_front) * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Quantile of the Beta(a, b) distribution by bisection on `I_x(a, b)`.
pub fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..1100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if regularized_beta(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Composite Simpson rule over `[lo, hi]` with `intervals` (rounded up to even) subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, intervals: usize) -> f64 {
    let n = intervals.max(2).next_multiple_of(2);
    let h = (hi - lo) / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let v = f(lo + i as f64 * h);
        if i % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / 3.0 * (f(lo) + 4.0 * odd + 2.0 * even + f(hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::function::beta::beta_reg;

    #[test]
    fn exp_m1_minus_matches_series_and_direct_forms() {
        assert_eq!(exp_m1_minus(0.0), 0.0);
        let z = 1e-8;
        assert!((exp_m1_minus(z) / (z * z / 2.0) - 1.0).abs() < 1e-7);
        let e = core::f64::consts::E;
        assert!((exp_m1_minus(1.0) - (e - 2.0)).abs() < 1e-15);
        for z in [-0.49_f64, -0.3, 0.2, 0.4999, 0.5, 0.7, -2.0] {
            let direct = z.exp() - 1.0 - z;
            assert!((exp_m1_minus(z) - direct).abs() < 1e-14, "z = {z}");
        }
    }

    #[test]
    fn log_add_exp_handles_infinities() {
        assert_eq!(log_add_exp(f64::NEG_INFINITY, -1.0), -1.0);
        assert_eq!(log_add_exp(-2.0, f64::NEG_INFINITY), -2.0);
        let v = log_add_exp(0.5f64.ln(), 0.25f64.ln());
        assert!((v - 0.75f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn incomplete_beta_agrees_with_statrs() {
        for &(a, b) in &[
            (1.0, 1.0),
            (2.5, 7.0),
            (40.0, 3.0),
            (250.0, 750.0),
            (2501.0, 7500.0),
        ] {
            for &x in &[1e-4, 0.1, 0.25, 0.3333, 0.5, 0.9] {
                let ours = regularized_beta(a, b, x);
                let oracle = beta_reg(a, b, x);
                assert!(
                    (ours - oracle).abs() < 1e-10,
                    "a={a} b={b} x={x}: {ours} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn beta_quantile_inverts_the_cdf() {
        for &(a, b, p) in &[
            (3.0, 9.0, 0.025),
            (250_001.0, 750_000.0, 0.9995),
            (1.0, 1e6, 0.0005),
        ] {
            let q = beta_quantile(a, b, p);
            assert!((regularized_beta(a, b, q) - p).abs() < 1e-9 * p.max(1e-3));
        }
        // Beta(1, 1) is uniform.
        assert!((beta_quantile(1.0, 1.0, 0.3) - 0.3).abs() < 1e-14);
    }

    #[test]
    fn simpson_integrates_cubics_exactly() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 10);
        assert!((v - 2.0).abs() < 1e-13);
    }
}
