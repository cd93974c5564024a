use statrs::function::gamma::ln_gamma;

use super::{StatsError, TestResult};

/// Exact one-tailed binomial test, `p = P(X ≥ k)` for `X ~ Binomial(n, p0)`.
///
/// The tail is summed in log space so that extreme conditions (hundreds of
/// trials far above chance) underflow gracefully to zero instead of losing
/// precision.
pub fn binomial_above_chance(k: u64, n: u64, p0: f64) -> Result<TestResult, StatsError> {
    if k > n {
        return Err(StatsError::Domain(format!("successes {k} exceed trials {n}")));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(StatsError::Domain(format!("chance probability {p0} not in (0,1)")));
    }
    let p = if k == 0 {
        1.0
    } else if k == n {
        p0.powi(n as i32)
    } else {
        let ln_p = p0.ln();
        let ln_q = (-p0).ln_1p();
        let ln_n_fact = ln_gamma(n as f64 + 1.0);
        let terms: Vec<f64> = (k..=n)
            .map(|j| {
                let j_f = j as f64;
                ln_n_fact - ln_gamma(j_f + 1.0) - ln_gamma((n - j) as f64 + 1.0)
                    + j_f * ln_p
                    + (n - j) as f64 * ln_q
            })
            .collect();
        let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = terms.iter().map(|t| (t - max).exp()).sum();
        (max + sum.ln()).exp().min(1.0)
    };
    let mut r = TestResult::new("binomial_one_tailed", k as f64, p);
    r.effect_size = Some(k as f64 / n as f64 - p0);
    Ok(r)
}
