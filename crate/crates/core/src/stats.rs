//! Goodness-of-fit and independence tests used on exit samples.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Survival function of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // P(K ≤ λ) = √(2π)/λ Σ e^{-(2k-1)²π²/(8λ²)}
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=20).map(|k| (-((2 * k - 1) as f64).powi(2) * c).exp()).sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0);
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let t = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { t } else { -t };
        if t < 1e-18 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

fn ks_p(d: f64, ne: f64) -> f64 {
    let sq = ne.sqrt();
    kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)
}

/// One-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, v) in x.iter().enumerate() {
        let c = cdf(*v);
        d = d.max(c - i as f64 / n).max((i + 1) as f64 / n - c);
    }
    (d, ks_p(d, n))
}

/// KS test of `taus` against Exp(rate).
pub fn ks_exponential(taus: &[f64], rate: f64) -> Result<(f64, f64)> {
    if taus.len() < 50 {
        return Err(Error::TooFewSamples { needed: 50, got: taus.len() });
    }
    if !(rate > 0.0) {
        return Err(Error::Invalid(format!("rate {rate}")));
    }
    Ok(ks_one_sample(taus, |t| if t <= 0.0 { 0.0 } else { -(-rate * t).exp_m1() }))
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    if n == 0 || m == 0 {
        return (0.0, 1.0);
    }
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    (d, ks_p(d, ne))
}

/// Total variation distance between two probability vectors.
pub fn tv_distance(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Normalized histogram of `x` over `[lo, hi)` with `bins` bins.
pub fn histogram(x: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut out = vec![0.0; bins];
    if x.is_empty() {
        return out;
    }
    for v in x {
        let b = ((v - lo) / (hi - lo) * bins as f64).floor();
        out[(b.max(0.0) as usize).min(bins - 1)] += 1.0;
    }
    out.iter_mut().for_each(|c| *c /= x.len() as f64);
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndependenceResult {
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Final number of time-quantile bins.
    pub time_bins: usize,
    /// Final grouping of the location categories.
    pub space_groups: Vec<Vec<usize>>,
}

/// Chi-square test of independence between exit times (binned by sample
/// quantiles) and location categories `0..space_bins`. Sparse cells are
/// merged until every expected count is at least 5.
pub fn independence_test(
    taus: &[f64],
    locations: &[usize],
    time_bins: usize,
    space_bins: usize,
) -> Result<IndependenceResult> {
    let n = taus.len();
    if n != locations.len() {
        return Err(Error::Invalid("times and locations differ in length".into()));
    }
    let mut sorted = taus.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut groups: Vec<Vec<usize>> = (0..space_bins).map(|s| vec![s]).collect();
    let mut tb = time_bins.max(2);
    loop {
        if groups.len() < 2 || tb < 2 {
            return Err(Error::SparseTable);
        }
        let cuts: Vec<f64> = (1..tb).map(|k| sorted[(k * n / tb).min(n - 1)]).collect();
        let mut group_of = vec![usize::MAX; space_bins];
        for (g, members) in groups.iter().enumerate() {
            for &s in members {
                group_of[s] = g;
            }
        }
        let cols = groups.len();
        let mut table = vec![0.0; tb * cols];
        for (t, &l) in taus.iter().zip(locations) {
            if l >= space_bins {
                return Err(Error::Invalid(format!("location bin {l} out of range")));
            }
            let r = cuts.partition_point(|c| *c < *t);
            table[r * cols + group_of[l]] += 1.0;
        }
        let rows: Vec<f64> = (0..tb).map(|r| (0..cols).map(|c| table[r * cols + c]).sum()).collect();
        let colsum: Vec<f64> = (0..cols).map(|c| (0..tb).map(|r| table[r * cols + c]).sum()).collect();
        // Empty columns carry no information.
        if let Some(c) = colsum.iter().position(|&s| s == 0.0) {
            groups.remove(c);
            continue;
        }
        let nn = n as f64;
        let min_row = rows.iter().copied().fold(f64::INFINITY, f64::min);
        let (cmin, min_col) =
            colsum.iter().copied().enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        if min_row * min_col / nn < 5.0 {
            if min_col * min_row.max(nn / tb as f64) / nn < 5.0 && cols > 2 {
                let other = if cmin + 1 < cols { cmin + 1 } else { cmin - 1 };
                let moved = groups.remove(cmin);
                let target = if other > cmin { other - 1 } else { other };
                groups[target].extend(moved);
            } else {
                tb -= 1;
            }
            continue;
        }
        let mut chi2 = 0.0;
        for r in 0..tb {
            for c in 0..cols {
                let e = rows[r] * colsum[c] / nn;
                chi2 += (table[r * cols + c] - e).powi(2) / e;
            }
        }
        let dof = (tb - 1) * (cols - 1);
        let p_value = ChiSquared::new(dof as f64).map_err(|e| Error::Invalid(e.to_string()))?.sf(chi2);
        return Ok(IndependenceResult { chi2, dof, p_value, time_bins: tb, space_groups: groups });
    }
}
