use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use std::f64::consts::SQRT_2;

/// Standard normal CDF.
pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// Standard normal upper tail, accurate far into the tail.
pub fn sf(z: f64) -> f64 {
    0.5 * erfc(z / SQRT_2)
}

pub fn quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}
