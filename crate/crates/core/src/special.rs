//! Error-function helpers.
//!
//! `erfc` comes from `libm` and `erf_inv` from `statrs`; [`ln_erfc`] adds a log-domain
//! complementary error function for the deep tails reached by error-rate
//! sweeps, where `erfc` itself underflows.

use std::f64::consts::{PI, SQRT_2};

/// Complementary error function.
#[inline]
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// Inverse error function on (-1, 1).
#[inline]
pub fn erf_inv(y: f64) -> f64 {
    statrs::function::erf::erf_inv(y)
}

const CONTINUED_FRACTION_FROM: f64 = 4.0;

/// Natural log of `erfc(x)`, finite for every finite `x`.
pub fn ln_erfc(x: f64) -> f64 {
    if x < CONTINUED_FRACTION_FROM {
        return erfc(x).ln();
    }
    // erfc(x) = exp(-x^2) / (sqrt(pi) g(x)),  g = x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))
    let tiny = 1e-300;
    let mut f = x;
    let mut c = f;
    let mut d = 0.0;
    for j in 1..500 {
        let a = j as f64 / 2.0;
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    -x * x - 0.5 * PI.ln() - f.ln()
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Upper-tail standard normal probability P(Z > z).
#[inline]
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}
