//! Prediction-error metrics and zero-crossing statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

fn same_len(op: &'static str, a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::dims(op, format!("lengths {} and {}", a.len(), b.len())));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// RMS error divided by the standard deviation of the target.
pub fn nmrse(predicted: &[f64], target: &[f64]) -> Result<f64> {
    same_len("nmrse", predicted, target)?;
    if target.len() < 2 {
        return Err(Error::InvalidArgument("nmrse needs at least 2 samples".into()));
    }
    let mu = mean(target);
    let var = target.iter().map(|x| (x - mu).powi(2)).sum::<f64>();
    if !(var > 0.0) {
        return Err(Error::ConstantSeries);
    }
    let err = predicted.iter().zip(target).map(|(o, x)| (o - x).powi(2)).sum::<f64>();
    Ok((err / var).sqrt())
}

/// `λ · Σ max(0, |o_t − x_t| − ε)`.
pub fn eps_error_timeavg(predicted: &[f64], target: &[f64], eps: f64, lambda_appr: f64) -> Result<f64> {
    same_len("eps_error_timeavg", predicted, target)?;
    let s: f64 = predicted
        .iter()
        .zip(target)
        .map(|(o, x)| ((o - x).abs() - eps).max(0.0))
        .sum();
    Ok(lambda_appr * s)
}

/// Gaps between consecutive sign changes. A change is recorded at `i`
/// when samples `i` and `i+1` differ in sign; an exact zero takes the sign
/// of the next nonzero sample.
pub fn zero_crossing_distances(series: &[f64]) -> Vec<usize> {
    let mut signs = vec![0i8; series.len()];
    let mut carry = 0i8;
    for i in (0..series.len()).rev() {
        let v = series[i];
        if v > 0.0 {
            carry = 1;
        } else if v < 0.0 {
            carry = -1;
        }
        signs[i] = carry;
    }
    let crossings: Vec<usize> = signs
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != 0 && w[1] != 0 && w[0] != w[1])
        .map(|(i, _)| i)
        .collect();
    crossings.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Excess kurtosis `E[(X−μ)⁴]/σ⁴ − 3` with population moments.
pub fn kurtosis(samples: &[f64]) -> Result<f64> {
    if samples.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "kurtosis needs at least 4 samples, got {}",
            samples.len()
        )));
    }
    let mu = mean(samples);
    let m2 = samples.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / samples.len() as f64;
    if !(m2 > 0.0) {
        return Err(Error::InvalidArgument("kurtosis of zero-variance samples".into()));
    }
    let m4 = samples.iter().map(|x| (x - mu).powi(4)).sum::<f64>() / samples.len() as f64;
    Ok(m4 / (m2 * m2) - 3.0)
}

/// Least-squares slope of log density against log distance, with
/// distances binned as [1,2), [2,4), [4,8), …. Each bin's count is divided
/// by its width and the sample size; its abscissa is the geometric mean of
/// the smallest and largest integer it holds.
pub fn loglog_slope(distances: &[usize]) -> Result<(f64, f64)> {
    let max = distances.iter().copied().max().unwrap_or(0);
    if distances.contains(&0) {
        return Err(Error::InvalidArgument("distances must be positive".into()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let n = distances.len() as f64;
    let mut lo = 1usize;
    while lo <= max {
        let hi = lo * 2;
        let count = distances.iter().filter(|&&d| d >= lo && d < hi).count();
        if count > 0 {
            let center = ((lo * (hi - 1)) as f64).sqrt();
            xs.push(center.ln());
            ys.push((count as f64 / (hi - lo) as f64 / n).ln());
        }
        lo = hi;
    }
    if xs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "log-log fit needs 3 nonempty bins, got {}",
            xs.len()
        )));
    }
    let mx = mean(&xs);
    let my = mean(&ys);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok((slope, r2))
}

/// Fraction of entries strictly below `threshold` in magnitude.
pub fn sparsity_fraction(m: &Matrix, threshold: f64) -> f64 {
    let v = m.as_slice();
    if v.is_empty() {
        return 0.0;
    }
    v.iter().filter(|x| x.abs() < threshold).count() as f64 / v.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroCrossingStats {
    pub distances: Vec<usize>,
    pub kurtosis: f64,
    pub loglog_slope: f64,
    pub slope_r2: f64,
}

impl ZeroCrossingStats {
    pub fn from_series(series: &[f64]) -> Result<Self> {
        let distances = zero_crossing_distances(series);
        let d: Vec<f64> = distances.iter().map(|&x| x as f64).collect();
        let kurtosis = kurtosis(&d)?;
        let (loglog_slope, slope_r2) = loglog_slope(&distances)?;
        Ok(ZeroCrossingStats {
            distances,
            kurtosis,
            loglog_slope,
            slope_r2,
        })
    }
}
