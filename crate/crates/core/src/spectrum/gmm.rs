use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SpectrumError;

const MAX_ITER: usize = 500;
const TOL: f64 = 1e-8;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A fitted one-dimensional Gaussian mixture in canonical form
/// (components ordered by descending mean).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmFit {
    pub k: usize,
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    pub log_likelihood: f64,
    pub n_iterations: usize,
    pub converged: bool,
    pub variance_floor: f64,
    /// Restart that produced this fit; 0 is the quantile initialization.
    pub restart: usize,
    /// Log-likelihood before each M-step, then at the returned parameters.
    #[serde(skip)]
    pub ll_trace: Vec<f64>,
}

impl GmmFit {
    /// Number of free parameters: k means, k variances, k − 1 weights.
    pub fn n_params(&self) -> usize {
        3 * self.k - 1
    }

    /// `ln(w_j) + ln N(x | μ_j, σ²_j)` for every component.
    pub fn log_joint(&self, x: f64) -> Vec<f64> {
        (0..self.k)
            .map(|j| self.weights[j].ln() + log_normal(x, self.means[j], self.variances[j]))
            .collect()
    }

    /// Posterior component probabilities at `x`.
    pub fn posterior(&self, x: f64) -> Vec<f64> {
        let lj = self.log_joint(x);
        let norm = log_sum_exp(&lj);
        lj.iter().map(|l| (l - norm).exp()).collect()
    }

    pub fn log_density(&self, x: f64) -> f64 {
        log_sum_exp(&self.log_joint(x))
    }
}

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Params {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Means at the given quantile levels, uniform weights and the pooled
/// within-cluster variance after nearest-mean assignment.
fn init_params(data: &[f64], sorted: &[f64], levels: &[f64], floor: f64) -> Params {
    let k = levels.len();
    let means: Vec<f64> = levels.iter().map(|&p| quantile_sorted(sorted, p)).collect();
    let ss: f64 = data
        .iter()
        .map(|&x| {
            means
                .iter()
                .map(|m| (x - m) * (x - m))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    let var = (ss / data.len() as f64).max(floor);
    Params {
        weights: vec![1.0 / k as f64; k],
        means,
        variances: vec![var; k],
    }
}

/// E-step: log-likelihood and responsibilities (row-major n×k).
fn e_step(data: &[f64], p: &Params, resp: &mut [f64]) -> f64 {
    let k = p.weights.len();
    let log_w: Vec<f64> = p.weights.iter().map(|w| w.ln()).collect();
    let mut ll = 0.0;
    let mut row = vec![0.0; k];
    for (i, &x) in data.iter().enumerate() {
        for j in 0..k {
            row[j] = log_w[j] + log_normal(x, p.means[j], p.variances[j]);
        }
        let norm = log_sum_exp(&row);
        ll += norm;
        for j in 0..k {
            resp[i * k + j] = (row[j] - norm).exp();
        }
    }
    ll
}

fn m_step(data: &[f64], resp: &[f64], p: &mut Params, floor: f64) {
    let k = p.weights.len();
    let n = data.len() as f64;
    for j in 0..k {
        let nk: f64 = (0..data.len()).map(|i| resp[i * k + j]).sum();
        p.weights[j] = nk / n;
        if nk <= f64::MIN_POSITIVE {
            // empty component: weight drops to zero, location is kept
            continue;
        }
        let mean = data.iter().enumerate().map(|(i, x)| resp[i * k + j] * x).sum::<f64>() / nk;
        let var = data
            .iter()
            .enumerate()
            .map(|(i, x)| resp[i * k + j] * (x - mean) * (x - mean))
            .sum::<f64>()
            / nk;
        p.means[j] = mean;
        p.variances[j] = var.max(floor);
    }
}

pub(crate) fn run_em(data: &[f64], mut p: Params, floor: f64, restart: usize) -> GmmFit {
    let k = p.weights.len();
    let mut resp = vec![0.0; data.len() * k];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut ll = e_step(data, &p, &mut resp);
    trace.push(ll);
    while iterations < MAX_ITER {
        m_step(data, &resp, &mut p, floor);
        iterations += 1;
        let next = e_step(data, &p, &mut resp);
        trace.push(next);
        debug_assert!(
            next >= ll - 1e-9 * ll.abs().max(1.0),
            "EM log-likelihood decreased: {ll} -> {next}"
        );
        let gain = next - ll;
        ll = next;
        if gain < TOL {
            converged = true;
            break;
        }
    }
    canonicalize(p, ll, iterations, converged, floor, restart, trace)
}

fn canonicalize(
    p: Params,
    ll: f64,
    n_iterations: usize,
    converged: bool,
    variance_floor: f64,
    restart: usize,
    ll_trace: Vec<f64>,
) -> GmmFit {
    let k = p.weights.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        p.means[b]
            .total_cmp(&p.means[a])
            .then(p.weights[b].total_cmp(&p.weights[a]))
            .then(p.variances[a].total_cmp(&p.variances[b]))
    });
    GmmFit {
        k,
        weights: order.iter().map(|&j| p.weights[j]).collect(),
        means: order.iter().map(|&j| p.means[j]).collect(),
        variances: order.iter().map(|&j| p.variances[j]).collect(),
        log_likelihood: ll,
        n_iterations,
        converged,
        variance_floor,
        restart,
        ll_trace,
    }
}

pub(crate) fn variance_floor(data: &[f64]) -> f64 {
    let (lo, hi) = data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let range = hi - lo;
    if range > 0.0 {
        1e-6 * range * range
    } else {
        1e-6
    }
}

pub(crate) fn check_data(data: &[f64], k: usize) -> Result<(), SpectrumError> {
    if k == 0 {
        return Err(SpectrumError::InvalidK(k));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(SpectrumError::NonFinite);
    }
    if data.len() < k {
        return Err(SpectrumError::TooFewPoints {
            needed: k,
            got: data.len(),
        });
    }
    Ok(())
}

/// Best-of-restarts EM fit of a `k`-component mixture.
///
/// Restart 0 places the means at evenly spaced sample quantiles; restart
/// `r > 0` jitters each level uniformly within its `1/k` slot, drawing from
/// ChaCha stream `r` of `seed`.
/// The winner maximizes the log-likelihood, ties going to the lower restart
/// index, so the result does not depend on thread scheduling.
pub fn fit_gmm_1d(data: &[f64], k: usize, seed: u64, restarts: usize) -> Result<GmmFit, SpectrumError> {
    check_data(data, k)?;
    if restarts == 0 {
        return Err(SpectrumError::InvalidRestarts);
    }
    let floor = variance_floor(data);
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);

    let fits: Vec<GmmFit> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let levels: Vec<f64> = if r == 0 {
                (0..k).map(|j| (j as f64 + 0.5) / k as f64).collect()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r as u64);
                (0..k).map(|j| (j as f64 + rng.random::<f64>()) / k as f64).collect()
            };
            run_em(data, init_params(data, &sorted, &levels, floor), floor, r)
        })
        .collect();

    let best = fits
        .into_iter()
        .reduce(|a, b| if b.log_likelihood > a.log_likelihood { b } else { a })
        .expect("at least one restart");
    Ok(best)
}

/// One row of the information-criterion table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub k: usize,
    pub n_params: usize,
    pub bic: f64,
    pub aicc: f64,
    pub fit: GmmFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelection {
    pub n: usize,
    pub candidates: Vec<Candidate>,
    /// Component counts skipped because AICc is undefined (n ≤ p + 1).
    pub skipped: Vec<usize>,
    pub best_bic_k: usize,
    pub best_aicc_k: usize,
    /// The count used downstream: the BIC choice.
    pub selected_k: usize,
    pub warnings: Vec<String>,
}

impl ModelSelection {
    pub fn selected(&self) -> &Candidate {
        self.candidates
            .iter()
            .find(|c| c.k == self.selected_k)
            .expect("selected k is among the candidates")
    }
}

/// Fits every `k` in the range and scores each with BIC and AICc.
pub fn select_model(
    data: &[f64],
    k_range: std::ops::RangeInclusive<usize>,
    seed: u64,
    restarts: usize,
) -> Result<ModelSelection, SpectrumError> {
    let (k_min, k_max) = (*k_range.start(), *k_range.end());
    if k_min < 1 || k_max < k_min || k_max > 8 {
        return Err(SpectrumError::InvalidKRange(k_min, k_max));
    }
    check_data(data, 1)?;
    if data.len() <= k_max {
        return Err(SpectrumError::TooFewPoints {
            needed: k_max + 1,
            got: data.len(),
        });
    }
    let n = data.len();
    let nf = n as f64;
    let mut candidates = Vec::new();
    let mut skipped = Vec::new();
    let mut warnings = Vec::new();
    for k in k_range {
        let p = 3 * k - 1;
        if n <= p + 1 {
            skipped.push(k);
            warnings.push(format!("AICc undefined for k = {k} (n = {n}, p = {p}); skipped"));
            continue;
        }
        let fit = fit_gmm_1d(data, k, seed, restarts)?;
        let pf = p as f64;
        let ll = fit.log_likelihood;
        candidates.push(Candidate {
            k,
            n_params: p,
            bic: pf * nf.ln() - 2.0 * ll,
            aicc: 2.0 * pf - 2.0 * ll + 2.0 * pf * (pf + 1.0) / (nf - pf - 1.0),
            fit,
        });
    }
    let argmin = |f: fn(&Candidate) -> f64| {
        candidates
            .iter()
            .min_by(|a, b| f(a).total_cmp(&f(b)).then(a.k.cmp(&b.k)))
            .map(|c| c.k)
    };
    let best_bic_k = argmin(|c| c.bic).ok_or(SpectrumError::AiccUndefined)?;
    let best_aicc_k = argmin(|c| c.aicc).ok_or(SpectrumError::AiccUndefined)?;
    if best_bic_k != best_aicc_k {
        warnings.push(format!(
            "BIC selects k = {best_bic_k} but AICc selects k = {best_aicc_k}; using BIC"
        ));
    }
    Ok(ModelSelection {
        n,
        candidates,
        skipped,
        best_bic_k,
        best_aicc_k,
        selected_k: best_bic_k,
        warnings,
    })
}
