//! Straight-from-the-definition alignment metrics. Deliberately shares no
//! code with `crate::metrics`; `None` marks an undefined value.

use crate::ingest::ResponseSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleMetrics {
    pub ec: Option<f64>,
    pub ma: Option<f64>,
    pub cled: Option<f64>,
}

/// Returns `None` when the two sets are not trial-aligned.
pub fn oracle_metrics(a: &ResponseSet, b: &ResponseSet, alpha: f64) -> Option<OracleMetrics> {
    if a.trials.len() != b.trials.len() || a.trials.is_empty() || a.n_categories != b.n_categories {
        return None;
    }
    for k in 0..a.trials.len() {
        if a.trials[k].image_id != b.trials[k].image_id || a.trials[k].truth != b.trials[k].truth {
            return None;
        }
    }
    let c = a.n_categories;
    let t: Vec<usize> = a.trials.iter().map(|x| x.truth).collect();
    let ya: Vec<usize> = a.trials.iter().map(|x| x.response).collect();
    let yb: Vec<usize> = b.trials.iter().map(|x| x.response).collect();
    let n = t.len();

    // error consistency
    let mut both_right = 0;
    let mut both_wrong = 0;
    let mut a_right = 0;
    let mut b_right = 0;
    for k in 0..n {
        if ya[k] == t[k] {
            a_right += 1;
        }
        if yb[k] == t[k] {
            b_right += 1;
        }
        if ya[k] == t[k] && yb[k] == t[k] {
            both_right += 1;
        }
        if ya[k] != t[k] && yb[k] != t[k] {
            both_wrong += 1;
        }
    }
    let p_obs = (both_right + both_wrong) as f64 / n as f64;
    let pa = a_right as f64 / n as f64;
    let pb = b_right as f64 / n as f64;
    let p_exp = pa * pb + (1.0 - pa) * (1.0 - pb);
    let ec = if p_exp == 1.0 {
        None
    } else {
        Some((p_obs - p_exp) / (1.0 - p_exp))
    };

    // misclassification agreement over the jointly wrong trials
    let mut m = vec![vec![0usize; c]; c];
    let mut n_err = 0;
    for k in 0..n {
        if ya[k] != t[k] && yb[k] != t[k] {
            m[ya[k]][yb[k]] += 1;
            n_err += 1;
        }
    }
    let ma = if n_err == 0 {
        None
    } else {
        let ne = n_err as f64;
        let mut agree = 0;
        for i in 0..c {
            agree += m[i][i];
        }
        let p_o = agree as f64 / ne;
        let mut p_e = 0.0;
        for i in 0..c {
            let mut row = 0;
            let mut col = 0;
            for j in 0..c {
                row += m[i][j];
                col += m[j][i];
            }
            p_e += (row as f64 / ne) * (col as f64 / ne);
        }
        if p_e == 1.0 {
            None
        } else {
            Some((p_o - p_e) / (1.0 - p_e))
        }
    };

    // class-level error divergence
    let mut fa = vec![vec![0.0f64; c]; c];
    let mut fb = vec![vec![0.0f64; c]; c];
    for k in 0..n {
        if ya[k] != t[k] {
            fa[t[k]][ya[k]] += 1.0;
        }
        if yb[k] != t[k] {
            fb[t[k]][yb[k]] += 1.0;
        }
    }
    let na: Vec<f64> = fa.iter().map(|r| r.iter().sum()).collect();
    let nb: Vec<f64> = fb.iter().map(|r| r.iter().sum()).collect();
    let total: f64 = na.iter().sum::<f64>() + nb.iter().sum::<f64>();
    let cled = if total == 0.0 {
        None
    } else {
        let mut value = 0.0;
        for i in 0..c {
            let w = (na[i] + nb[i]) / total;
            if w == 0.0 {
                continue;
            }
            let pi_a: Vec<f64> = fa[i].iter().map(|f| (f + alpha) / (na[i] + c as f64 * alpha)).collect();
            let pi_b: Vec<f64> = fb[i].iter().map(|f| (f + alpha) / (nb[i] + c as f64 * alpha)).collect();
            let mut kl_a = 0.0;
            let mut kl_b = 0.0;
            for j in 0..c {
                let mid = (pi_a[j] + pi_b[j]) / 2.0;
                kl_a += pi_a[j] * (pi_a[j] / mid).ln();
                kl_b += pi_b[j] * (pi_b[j] / mid).ln();
            }
            value += w * (kl_a + kl_b) / 2.0 / std::f64::consts::LN_2;
        }
        Some(value)
    };

    Some(OracleMetrics { ec, ma, cled })
}
