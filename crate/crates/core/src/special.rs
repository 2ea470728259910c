//! Digamma and log-gamma for positive real arguments.
//!
//! Both shift the argument upward with the recurrence until it is at least
//! [`ASYMPTOTIC_THRESHOLD`], then evaluate the asymptotic series.

use std::f64::consts::PI;

const ASYMPTOTIC_THRESHOLD: f64 = 10.0;

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

// B_{2k} / (2k) for k = 1..7
const DIGAMMA_COEFFS: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

// B_{2k} / (2k (2k - 1)) for k = 1..7
const LN_GAMMA_COEFFS: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
];

/// The digamma function ψ(x) = d/dx ln Γ(x), for `x > 0`.
///
/// Returns NaN for non-positive or NaN input.
pub fn digamma(x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return f64::NAN;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    let mut x = x;
    let mut shift = 0.0;
    while x < ASYMPTOTIC_THRESHOLD {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    let mut series = 0.0;
    let mut power = inv2;
    for c in DIGAMMA_COEFFS {
        series += c * power;
        power *= inv2;
    }
    shift + x.ln() - 0.5 / x - series
}

/// Natural logarithm of the gamma function, for `x > 0`.
///
/// Returns NaN for non-positive or NaN input.
pub fn ln_gamma(x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return f64::NAN;
    }
    if x.is_infinite() {
        return f64::INFINITY;
    }
    // Γ(1) = Γ(2) = 1 exactly; the series would leave rounding residue.
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    let mut x = x;
    let mut log_prod = 0.0;
    let mut prod = 1.0;
    while x < ASYMPTOTIC_THRESHOLD {
        prod *= x;
        // keep the running product well inside f64 range for tiny x
        if prod < 1e-250 || prod > 1e250 {
            log_prod += prod.ln();
            prod = 1.0;
        }
        x += 1.0;
    }
    log_prod += prod.ln();
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut power = inv;
    for c in LN_GAMMA_COEFFS {
        series += c * power;
        power *= inv2;
    }
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + series - log_prod
}

/// ln B(a, b) = ln Γ(a) + ln Γ(b) − ln Γ(a + b).
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// ln C(n, k) for `k <= n`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    if k == 0 || k == n {
        return 0.0;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}
