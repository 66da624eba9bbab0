//! Standard normal helpers that stay finite deep into the tails.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use libm::erfc;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this the asymptotic tail series is used; `cdf` would underflow soon after.
const TAIL_CUTOFF: f64 = -30.0;

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `1 - 1/x^2 + 3/x^4 - 15/x^6 + ...`, truncated where the terms stop mattering for |x| >= 30.
fn tail_series(x: f64) -> f64 {
    let inv = 1.0 / (x * x);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..=6 {
        term *= -((2 * k - 1) as f64) * inv;
        sum += term;
    }
    sum
}

pub fn log_cdf(x: f64) -> f64 {
    if x >= TAIL_CUTOFF {
        cdf(x).ln()
    } else {
        // Phi(x) ~ phi(x) / -x * series
        -0.5 * x * x - LN_SQRT_2PI - (-x).ln() + tail_series(x).ln()
    }
}

/// Inverse Mills ratio `phi(x) / Phi(x)`.
pub fn mills(x: f64) -> f64 {
    if x >= TAIL_CUTOFF {
        pdf(x) / cdf(x)
    } else {
        -x / tail_series(x)
    }
}
