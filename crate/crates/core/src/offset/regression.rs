//! Per-channel straight-line fits of `ρ_j` against the brightness sum `Σρ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest region a fit accepts.
pub const MIN_REGION_PIXELS: usize = 8;

/// Population variance of the regressor below which a region is flat.
pub const MIN_REGRESSOR_VARIANCE: f64 = 1e-12;

/// Pair budget for the Theil-Sen slope median.
pub const THEIL_SEN_MAX_PAIRS: usize = 10_000;

pub const THEIL_SEN_SEED: u64 = 0x0516_b0a7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
}

fn check_inputs(sums: &[f64], rhos: &[f64]) -> Result<f64> {
    if sums.len() != rhos.len() {
        return Err(Error::InvalidParameter(format!(
            "regressor has {} samples, response has {}",
            sums.len(),
            rhos.len()
        )));
    }
    if sums.len() < MIN_REGION_PIXELS {
        return Err(Error::TooFewPixels {
            count: sums.len(),
            min: MIN_REGION_PIXELS,
        });
    }
    let n = sums.len() as f64;
    let mean = sums.iter().sum::<f64>() / n;
    let var = sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    if !(var > MIN_REGRESSOR_VARIANCE) {
        return Err(Error::FlatRegion);
    }
    Ok(mean)
}

fn r_squared(sums: &[f64], rhos: &[f64], slope: f64, intercept: f64) -> f64 {
    let n = rhos.len() as f64;
    let mean = rhos.iter().sum::<f64>() / n;
    let ss_tot: f64 = rhos.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = sums
        .iter()
        .zip(rhos)
        .map(|(x, y)| (y - (slope * x + intercept)).powi(2))
        .sum();
    if ss_tot == 0.0 {
        // constant response: a horizontal line explains it completely
        if ss_res == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Ordinary least squares of `rhos` on `sums`; the intercept is the offset
/// estimate for that channel.
pub fn fit_channel_line(sums: &[f64], rhos: &[f64]) -> Result<ChannelFit> {
    let mean_x = check_inputs(sums, rhos)?;
    let n = sums.len() as f64;
    let mean_y = rhos.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in sums.iter().zip(rhos) {
        let dx = x - mean_x;
        sxx += dx * dx;
        sxy += dx * (y - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    Ok(ChannelFit {
        slope,
        intercept,
        r2: r_squared(sums, rhos, slope, intercept),
        n: sums.len(),
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Index pairs used by the Theil-Sen estimator: every pair when there are
/// at most [`THEIL_SEN_MAX_PAIRS`], otherwise that many pairs drawn with a
/// fixed-seed generator.
pub(crate) fn theil_sen_pairs(n: usize, seed: u64) -> Vec<(usize, usize)> {
    let total = n * n.saturating_sub(1) / 2;
    if total <= THEIL_SEN_MAX_PAIRS {
        return (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(THEIL_SEN_MAX_PAIRS);
    while pairs.len() < THEIL_SEN_MAX_PAIRS {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j {
            pairs.push((i.min(j), i.max(j)));
        }
    }
    pairs
}

/// Theil-Sen fit: median of pairwise slopes over `pairs`, intercept the
/// median residual `y - slope·x`.
pub(crate) fn fit_channel_line_theil_sen_pairs(
    sums: &[f64],
    rhos: &[f64],
    pairs: &[(usize, usize)],
) -> Result<ChannelFit> {
    check_inputs(sums, rhos)?;
    let mut slopes: Vec<f64> = pairs
        .iter()
        .filter_map(|&(i, j)| {
            let dx = sums[j] - sums[i];
            (dx.abs() > 1e-12).then(|| (rhos[j] - rhos[i]) / dx)
        })
        .collect();
    if slopes.is_empty() {
        return Err(Error::FlatRegion);
    }
    let slope = median(&mut slopes);
    let mut residuals: Vec<f64> = sums.iter().zip(rhos).map(|(x, y)| y - slope * x).collect();
    let intercept = median(&mut residuals);
    Ok(ChannelFit {
        slope,
        intercept,
        r2: r_squared(sums, rhos, slope, intercept),
        n: sums.len(),
    })
}

pub fn fit_channel_line_theil_sen(sums: &[f64], rhos: &[f64], seed: u64) -> Result<ChannelFit> {
    let pairs = theil_sen_pairs(sums.len(), seed);
    fit_channel_line_theil_sen_pairs(sums, rhos, &pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Points `s·k + δ` for s in {0.2, 0.3, ..., 1.0}; returns (Σρ, ρ_j).
    fn line_samples(k: [f64; 3], delta: [f64; 3], j: usize) -> (Vec<f64>, Vec<f64>) {
        (0..=8)
            .map(|i| {
                let s = 0.2 + 0.1 * i as f64;
                let p: Vec<f64> = (0..3).map(|c| s * k[c] + delta[c]).collect();
                (p.iter().sum::<f64>(), p[j])
            })
            .unzip()
    }

    #[test]
    fn exact_line_recovers_closed_form() {
        // intercept = δ_1 - k_1·Σδ = 0.05 - 0.6·0.25 = -0.10
        let (x, y) = line_samples([0.6, 0.3, 0.1], [0.05, 0.08, 0.12], 0);
        let fit = fit_channel_line(&x, &y).unwrap();
        assert!((fit.slope - 0.6).abs() < 1e-12);
        assert!((fit.intercept + 0.10).abs() < 1e-12);
        assert!((fit.r2 - 1.0).abs() < 1e-12);
        assert_eq!(fit.n, 9);
    }

    #[test]
    fn identical_pixels_are_flat() {
        let x = vec![0.4; 20];
        let y = vec![0.1; 20];
        assert!(matches!(fit_channel_line(&x, &y), Err(Error::FlatRegion)));
        assert!(matches!(fit_channel_line_theil_sen(&x, &y, 1), Err(Error::FlatRegion)));
    }

    #[test]
    fn origin_crossing_data_has_zero_intercept() {
        let (x, y) = line_samples([0.5, 0.2, 0.3], [0.0; 3], 2);
        let fit = fit_channel_line(&x, &y).unwrap();
        assert!(fit.intercept.abs() < 1e-9);
    }

    #[test]
    fn too_few_samples() {
        let err = fit_channel_line(&[0.1, 0.2, 0.3], &[0.0, 0.1, 0.2]).unwrap_err();
        assert!(matches!(err, Error::TooFewPixels { count: 3, min: 8 }));
    }

    #[test]
    fn theil_sen_ignores_gross_outliers() {
        let (x, mut y) = line_samples([0.6, 0.3, 0.1], [0.05, 0.08, 0.12], 0);
        let (mut x, mut y2) = (x.clone(), y.clone());
        for _ in 0..3 {
            x.extend_from_slice(&x.clone()[..9]);
            y2.extend_from_slice(&y[..9]);
        }
        y = y2;
        y[4] += 5.0;
        y[13] -= 3.0;
        let ts = fit_channel_line_theil_sen(&x, &y, 7).unwrap();
        assert!((ts.slope - 0.6).abs() < 1e-9);
        assert!((ts.intercept + 0.10).abs() < 1e-9);
        let ols = fit_channel_line(&x, &y).unwrap();
        assert!((ols.intercept + 0.10).abs() > 1e-3);
    }

    #[test]
    fn theil_sen_pair_budget() {
        assert_eq!(theil_sen_pairs(10, 0).len(), 45);
        let sampled = theil_sen_pairs(1000, 0);
        assert_eq!(sampled.len(), THEIL_SEN_MAX_PAIRS);
        assert!(sampled.iter().all(|&(i, j)| i < j && j < 1000));
        assert_eq!(sampled, theil_sen_pairs(1000, 0));
    }
}
