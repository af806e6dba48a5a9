//! Sample statistics.

use serde::Serialize;

use crate::error::{Error, Result};

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|` with
/// right-continuous empirical CDFs.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Precondition("KS distance needs two nonempty samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// `ln((1/n) Σ e^{x_i})` without overflow.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + s.ln() - (xs.len() as f64).ln()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Default number of upper order statistics, `⌊√n⌋`.
pub fn default_hill_k(n: usize) -> usize {
    (n as f64).sqrt().floor() as usize
}

/// Hill tail index from the `k` largest values:
/// `1 / ((1/k) Σ_{i=1}^{k} ln(X_(n−i+1)/X_(n−k)))`.
pub fn hill_estimator(values: &[f64], k: Option<usize>) -> Result<f64> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    hill_sorted_desc(&v, k.unwrap_or_else(|| default_hill_k(values.len())))
}

fn hill_sorted_desc(desc: &[f64], k: usize) -> Result<f64> {
    let n = desc.len();
    if k < 10 || k >= n {
        return Err(Error::Precondition(format!("Hill estimator needs 10 <= k < n, got k = {k}, n = {n}")));
    }
    if desc.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::Precondition("Hill estimator needs positive finite values".into()));
    }
    let threshold = desc[k].ln();
    let s: f64 = desc[..k].iter().map(|x| x.ln() - threshold).sum();
    if !(s > 0.0) {
        return Err(Error::DegenerateSample(format!("top {k} order statistics are tied")));
    }
    Ok(k as f64 / s)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HillSweep {
    pub points: Vec<(usize, f64)>,
    /// Slope of `ln α̂` against `ln k`.
    pub log_slope: f64,
    /// Estimates falling off with `k`, the signature of a light tail.
    pub light_tail_flag: bool,
}

impl HillSweep {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,estimate\n");
        for (k, e) in &self.points {
            out.push_str(&format!("{k},{}\n", crate::simulate::fmt17(*e)));
        }
        out
    }
}

pub const HILL_LIGHT_SLOPE: f64 = -0.1;

/// Geometric `k` grid from 10 to `n/10`.
pub fn hill_k_grid(n: usize, points: usize) -> Vec<usize> {
    let hi = (n / 10).max(11) as f64;
    let mut ks: Vec<usize> = (0..points)
        .map(|i| (10.0 * (hi / 10.0).powf(i as f64 / (points - 1).max(1) as f64)).round() as usize)
        .collect();
    ks.dedup();
    ks
}

pub fn hill_sweep(values: &[f64], ks: &[usize]) -> Result<HillSweep> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let points = ks.iter().map(|&k| Ok((k, hill_sorted_desc(&v, k)?))).collect::<Result<Vec<_>>>()?;
    let lx: Vec<f64> = points.iter().map(|(k, _)| (*k as f64).ln()).collect();
    let ly: Vec<f64> = points.iter().map(|(_, e)| e.ln()).collect();
    let log_slope = if points.len() > 1 { linear_fit(&lx, &ly).0 } else { 0.0 };
    Ok(HillSweep { points, log_slope, light_tail_flag: log_slope < HILL_LIGHT_SLOPE })
}
