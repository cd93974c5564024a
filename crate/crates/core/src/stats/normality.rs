//! Normality tests applied to baseline accuracies before and after the logit
//! transform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{mean, normal, sample_sd, StatsError, TestResult};

const MIN_N: usize = 8;
const MAX_SW_N: usize = 5000;

/// Shapiro–Wilk, D'Agostino–Pearson and Lilliefors, in that order.
pub fn normality_tests(x: &[f64], lilliefors_replicates: usize, seed: u64) -> Result<Vec<TestResult>, StatsError> {
    Ok(vec![
        shapiro_wilk(x)?,
        dagostino_pearson(x)?,
        lilliefors(x, lilliefors_replicates, seed)?,
    ])
}

fn check(x: &[f64]) -> Result<(), StatsError> {
    if x.len() < MIN_N {
        return Err(StatsError::SampleTooSmall {
            needed: MIN_N,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::Domain("non-finite observation".into()));
    }
    Ok(())
}

fn poly(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Shapiro–Wilk W with Royston's polynomial approximations for the
/// coefficients and the null distribution of W.
pub fn shapiro_wilk(x: &[f64]) -> Result<TestResult, StatsError> {
    check(x)?;
    let n = x.len();
    if n > MAX_SW_N {
        return Err(StatsError::Domain(format!("Shapiro–Wilk supports n ≤ {MAX_SW_N}")));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let range = sorted[n - 1] - sorted[0];
    if range <= 0.0 {
        return Err(StatsError::DegenerateSample);
    }

    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];

    let an = n as f64;
    let half = n / 2;
    let m: Vec<f64> = (1..=half)
        .map(|i| normal::quantile((i as f64 - 0.375) / (an + 0.25)))
        .collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;
    let mut a = vec![0.0; half];
    let (first, fac) = if n > 5 {
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
            / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
            .sqrt();
        a[1] = a2;
        (2, fac)
    } else {
        (1, ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt())
    };
    a[0] = a1;
    for i in first..half {
        a[i] = -m[i] / fac;
    }

    let xbar = mean(&sorted);
    let ssq: f64 = sorted.iter().map(|v| (v - xbar) * (v - xbar)).sum();
    let numer: f64 = (0..half).map(|i| a[i] * (sorted[n - 1 - i] - sorted[i])).sum();
    let w = (numer * numer / ssq).min(1.0);

    let p = if n <= 11 {
        const G: [f64; 2] = [-2.273, 0.459];
        const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
        const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
        let gamma = poly(&G, an);
        let mu = poly(&C3, an);
        let s = poly(&C4, an).exp();
        let w1 = (1.0 - w).ln();
        if w1 >= gamma {
            1e-99
        } else {
            let y = -(gamma - w1).ln();
            normal::sf((y - mu) / s)
        }
    } else {
        const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
        const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
        let ln_n = an.ln();
        let mu = poly(&C5, ln_n);
        let s = poly(&C6, ln_n).exp();
        normal::sf(((1.0 - w).ln() - mu) / s)
    };
    Ok(TestResult::new("shapiro_wilk", w, p))
}

/// D'Agostino–Pearson K² omnibus test from the skewness and kurtosis z-scores.
pub fn dagostino_pearson(x: &[f64]) -> Result<TestResult, StatsError> {
    check(x)?;
    let n = x.len() as f64;
    let xbar = mean(x);
    let moment = |k: i32| x.iter().map(|v| (v - xbar).powi(k)).sum::<f64>() / n;
    let m2 = moment(2);
    if m2 <= 0.0 {
        return Err(StatsError::DegenerateSample);
    }
    let g1 = moment(3) / m2.powf(1.5);
    let b2 = moment(4) / (m2 * m2);

    // skewness
    let y = g1 * ((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0))).sqrt();
    let beta2 = 3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0)
        / ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
    let w2 = -1.0 + (2.0 * (beta2 - 1.0)).sqrt();
    let delta = 1.0 / (0.5 * w2.ln()).sqrt();
    let alpha = (2.0 / (w2 - 1.0)).sqrt();
    let y = if y == 0.0 { 1.0 } else { y };
    let z_skew = delta * (y / alpha + ((y / alpha).powi(2) + 1.0).sqrt()).ln();

    // kurtosis
    let e = 3.0 * (n - 1.0) / (n + 1.0);
    let var_b2 = 24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0) * (n + 1.0) * (n + 3.0) * (n + 5.0));
    let xk = (b2 - e) / var_b2.sqrt();
    let sqrt_beta1 = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0))
        * (6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0))).sqrt();
    let a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + (1.0 + 4.0 / (sqrt_beta1 * sqrt_beta1)).sqrt());
    let term1 = 1.0 - 2.0 / (9.0 * a);
    let denom = 1.0 + xk * (2.0 / (a - 4.0)).sqrt();
    if denom == 0.0 {
        return Err(StatsError::Domain("kurtosis transform undefined".into()));
    }
    let term2 = denom.signum() * ((1.0 - 2.0 / a) / denom.abs()).powf(1.0 / 3.0);
    let z_kurt = (term1 - term2) / (2.0 / (9.0 * a)).sqrt();

    let k2 = z_skew * z_skew + z_kurt * z_kurt;
    // chi-square with two degrees of freedom
    Ok(TestResult::new("dagostino_pearson", k2, (-k2 / 2.0).exp()))
}

fn ks_normal_statistic(x: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let m = mean(x);
    let sd = sample_sd(x);
    if !(sd > 0.0) {
        return None;
    }
    let mut z: Vec<f64> = x.iter().map(|v| (v - m) / sd).collect();
    z.sort_by(f64::total_cmp);
    let d = z
        .iter()
        .enumerate()
        .map(|(i, &zi)| {
            let f = normal::cdf(zi);
            let i = i as f64;
            ((i + 1.0) / n - f).max(f - i / n)
        })
        .fold(0.0, f64::max);
    Some(d)
}

/// Lilliefors test: Kolmogorov–Smirnov distance to the normal with estimated
/// mean and standard deviation, p-value from a seeded Monte Carlo null.
///
/// Replicate `i` draws from its own ChaCha stream, so the result does not
/// depend on how the replicates are scheduled across threads.
pub fn lilliefors(x: &[f64], replicates: usize, seed: u64) -> Result<TestResult, StatsError> {
    check(x)?;
    if replicates == 0 {
        return Err(StatsError::Domain("replicates must be positive".into()));
    }
    let d = ks_normal_statistic(x).ok_or(StatsError::DegenerateSample)?;
    let n = x.len();
    let exceed = (0..replicates)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let sample: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            ks_normal_statistic(&sample).is_some_and(|dn| dn >= d)
        })
        .count();
    let p = (exceed + 1) as f64 / (replicates + 1) as f64;
    Ok(TestResult::new("lilliefors", d, p))
}
