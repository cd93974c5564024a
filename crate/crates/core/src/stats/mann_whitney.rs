use serde::{Deserialize, Serialize};

use super::{normal, StatsError, TestResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// `x` tends to be larger than `y`.
    Greater,
    /// `x` tends to be smaller than `y`.
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MwMethod {
    /// Normal approximation, tie-corrected variance, continuity correction.
    #[default]
    Asymptotic,
    /// Exact null distribution of U. Only for untied samples.
    Exact,
}

/// Mann–Whitney U test using the continuity-corrected normal approximation.
///
/// The reported statistic is `U` for `x`: the number of (x, y) pairs with
/// `x > y`, ties counting one half.
pub fn mann_whitney_u(x: &[f64], y: &[f64], alternative: Alternative) -> Result<TestResult, StatsError> {
    mann_whitney_u_with(x, y, alternative, MwMethod::Asymptotic)
}

pub fn mann_whitney_u_with(
    x: &[f64],
    y: &[f64],
    alternative: Alternative,
    method: MwMethod,
) -> Result<TestResult, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(StatsError::Domain("non-finite observation".into()));
    }
    let (n1, n2) = (x.len(), y.len());
    let (rank_sum_x, tie_term) = rank_sum(x, y);
    let n1f = n1 as f64;
    let n2f = n2 as f64;
    let u1 = rank_sum_x - n1f * (n1f + 1.0) / 2.0;
    let u2 = n1f * n2f - u1;
    let effect = 2.0 * u1 / (n1f * n2f) - 1.0;

    let mut result = match method {
        MwMethod::Asymptotic => {
            let n = n1f + n2f;
            let mu = n1f * n2f / 2.0;
            let var = n1f * n2f / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
            let p = if var <= 0.0 {
                1.0
            } else {
                let s = var.sqrt();
                match alternative {
                    Alternative::TwoSided => 2.0 * normal::sf((u1.max(u2) - mu - 0.5) / s),
                    Alternative::Greater => normal::sf((u1 - mu - 0.5) / s),
                    Alternative::Less => normal::cdf((u1 - mu + 0.5) / s),
                }
            };
            TestResult::new("mann_whitney_u", u1, p)
        }
        MwMethod::Exact => {
            if tie_term > 0.0 {
                return Err(StatsError::Domain("exact Mann–Whitney requires untied samples".into()));
            }
            let dist = exact_u_distribution(n1, n2)?;
            // U1 is integral without ties.
            let u = u1.round() as usize;
            let lower: f64 = dist[..=u].iter().sum();
            let upper: f64 = dist[u..].iter().sum();
            let p = match alternative {
                Alternative::TwoSided => 2.0 * lower.min(upper),
                Alternative::Greater => upper,
                Alternative::Less => lower,
            };
            TestResult::new("mann_whitney_u_exact", u1, p)
        }
    };
    result.effect_size = Some(effect);
    Ok(result)
}

/// Mid-rank sum of `x` in the pooled sample and the tie term Σ(t³ − t).
fn rank_sum(x: &[f64], y: &[f64]) -> (f64, f64) {
    let mut pooled: Vec<(f64, bool)> = x
        .iter()
        .map(|&v| (v, true))
        .chain(y.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut sum = 0.0;
    let mut ties = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let t = (j - i) as f64;
        // ranks i+1..=j averaged
        let mid = (i + 1 + j) as f64 / 2.0;
        sum += mid * pooled[i..j].iter().filter(|p| p.1).count() as f64;
        ties += t * t * t - t;
        i = j;
    }
    (sum, ties)
}

/// Null probability mass of U for sample sizes (n1, n2), no ties.
fn exact_u_distribution(n1: usize, n2: usize) -> Result<Vec<f64>, StatsError> {
    let max_u = n1 * n2;
    if max_u > 200_000 {
        return Err(StatsError::Domain("samples too large for exact enumeration".into()));
    }
    // counts[j][u] for the current i, built over i = 0..=n1.
    let mut prev: Vec<Vec<f64>> = (0..=n2).map(|_| vec![1.0]).collect();
    for i in 1..=n1 {
        let mut cur: Vec<Vec<f64>> = Vec::with_capacity(n2 + 1);
        cur.push(vec![1.0]);
        for j in 1..=n2 {
            let len = i * j + 1;
            let mut row = vec![0.0; len];
            // last element is an x above all j y's: contributes j to U
            for (u, c) in prev[j].iter().enumerate() {
                row[u + j] += c;
            }
            for (u, c) in cur[j - 1].iter().enumerate() {
                row[u] += c;
            }
            cur.push(row);
        }
        prev = cur;
    }
    let counts = &prev[n2];
    let total: f64 = counts.iter().sum();
    Ok(counts.iter().map(|c| c / total).collect())
}
