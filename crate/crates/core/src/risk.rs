//! Gaussian modelling of TTC samples and the probability of falling below
//! a critical TTC.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{EventClass, SimResult};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::special::erfc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit<T = f64> {
    pub mean_s: T,
    pub std_s: T,
    /// Finite samples used in the fit.
    pub n_samples: usize,
    pub n_excluded_infinite: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianRisk<T = f64> {
    pub mean_s: T,
    pub std_s: T,
    pub ttc_crit_s: T,
    pub prob_below: T,
    pub n_samples: usize,
    pub n_excluded_infinite: usize,
}

/// Sample mean and standard deviation (n - 1 denominator) of the finite
/// samples. Infinite samples are counted, not used.
///
/// The finite samples are summed in sorted order, so the result does not
/// depend on the input order.
pub fn fit_gaussian<T: Scalar>(samples: &[T]) -> Result<GaussianFit<T>> {
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("NaN TTC sample"));
    }
    let mut finite: Vec<T> = samples.iter().copied().filter(|x| x.is_finite()).collect();
    let n_excluded_infinite = samples.len() - finite.len();
    if finite.len() < 2 {
        return Err(Error::InsufficientData { finite: finite.len() });
    }
    finite.sort_by(|a, b| a.partial_cmp(b).expect("finite samples are ordered"));

    let n = T::from_usize(finite.len()).expect("sample count fits scalar");
    let mean = finite.iter().fold(T::zero(), |acc, &x| acc + x) / n;
    let ss = finite.iter().fold(T::zero(), |acc, &x| acc + (x - mean) * (x - mean));
    let std = (ss / (n - T::one())).sqrt();
    if !(std > T::zero()) {
        return Err(Error::DegenerateDistribution(format!(
            "all {} finite samples equal {mean}",
            finite.len()
        )));
    }
    Ok(GaussianFit {
        mean_s: mean,
        std_s: std,
        n_samples: finite.len(),
        n_excluded_infinite,
    })
}

/// Standard normal CDF, `0.5 * erfc(-z / sqrt 2)`; absolute error well
/// below 1e-7 (about 1e-16 in f64).
pub fn normal_cdf<T: Scalar>(z: T) -> T {
    let z = z.to_f64_lossy();
    T::lit(0.5 * erfc(-z / std::f64::consts::SQRT_2))
}

pub fn normal_pdf<T: Scalar>(x: T, mean: T, std: T) -> T {
    let z = (x - mean) / std;
    (-(z * z) / T::two()).exp() / (std * T::lit((2.0 * std::f64::consts::PI).sqrt()))
}

/// Probability mass of `N(mean, std^2)` below `crit`.
pub fn prob_below_threshold<T: Scalar>(mean: T, std: T, crit: T) -> Result<T> {
    if !(std.is_finite() && std > T::zero()) {
        return Err(Error::DegenerateDistribution(format!("standard deviation must be > 0, got {std}")));
    }
    if !mean.is_finite() || crit.is_nan() {
        return Err(Error::invalid("mean must be finite and threshold not NaN"));
    }
    Ok(normal_cdf((crit - mean) / std))
}

pub fn gaussian_risk<T: Scalar>(samples: &[T], ttc_crit_s: T) -> Result<GaussianRisk<T>> {
    let fit = fit_gaussian(samples)?;
    Ok(GaussianRisk {
        mean_s: fit.mean_s,
        std_s: fit.std_s,
        ttc_crit_s,
        prob_below: prob_below_threshold(fit.mean_s, fit.std_s, ttc_crit_s)?,
        n_samples: fit.n_samples,
        n_excluded_infinite: fit.n_excluded_infinite,
    })
}

/// What the summary needs from one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStats<T = f64> {
    pub min_ttc_s: T,
    pub critical: bool,
}

impl<T: Scalar> From<&SimResult<T>> for RunStats<T> {
    fn from(r: &SimResult<T>) -> Self {
        Self {
            min_ttc_s: r.min_ttc_s,
            critical: r.classification == EventClass::Critical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow<T = f64> {
    pub model: String,
    /// `None` when the fit failed; see `unavailable`.
    pub risk: Option<GaussianRisk<T>>,
    pub unavailable: Option<String>,
    pub critical_fraction: T,
    pub n_runs: usize,
    pub n_finite: usize,
    pub n_excluded: usize,
}

/// One row per model, ordered by model name. A model whose samples cannot
/// be fitted gets a row marked unavailable instead of failing the table.
pub fn summarize_models<T: Scalar>(per_model: &BTreeMap<String, Vec<RunStats<T>>>, ttc_crit_s: T) -> Vec<SummaryRow<T>> {
    per_model
        .iter()
        .map(|(model, runs)| {
            let samples: Vec<T> = runs.iter().map(|r| r.min_ttc_s).collect();
            let n_finite = samples.iter().filter(|x| x.is_finite()).count();
            let critical = runs.iter().filter(|r| r.critical).count();
            let critical_fraction = if runs.is_empty() {
                T::zero()
            } else {
                T::from_usize(critical).unwrap() / T::from_usize(runs.len()).unwrap()
            };
            let (risk, unavailable) = match gaussian_risk(&samples, ttc_crit_s) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            SummaryRow {
                model: model.clone(),
                risk,
                unavailable,
                critical_fraction,
                n_runs: runs.len(),
                n_finite,
                n_excluded: samples.len() - n_finite,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin<T = f64> {
    pub left: T,
    pub right: T,
    pub count: usize,
}

/// Uniform bins over `[lo, hi]`; the right edge belongs to the last bin.
/// Values outside the range and non-finite values are not counted.
pub fn histogram<T: Scalar>(values: &[T], lo: T, hi: T, bins: usize) -> Vec<HistogramBin<T>> {
    assert!(bins > 0 && hi > lo, "histogram needs bins > 0 and hi > lo");
    let nb = T::from_usize(bins).unwrap();
    let width = (hi - lo) / nb;
    let mut out: Vec<HistogramBin<T>> = (0..bins)
        .map(|i| {
            let i_t = T::from_usize(i).unwrap();
            let right = if i + 1 == bins { hi } else { lo + width * (i_t + T::one()) };
            HistogramBin {
                left: lo + width * i_t,
                right,
                count: 0,
            }
        })
        .collect();
    for &v in values {
        if !(v.is_finite() && v >= lo && v <= hi) {
            continue;
        }
        let idx = ((v - lo) / width).floor().to_usize().unwrap_or(0).min(bins - 1);
        out[idx].count += 1;
    }
    out
}

/// Fitted density sampled at `points` uniform abscissae over
/// `mean +- 6 std`.
pub fn density_curve<T: Scalar>(mean: T, std: T, points: usize) -> Vec<(T, T)> {
    assert!(points >= 2, "density curve needs at least two points");
    let lo = mean - T::lit(6.0) * std;
    let step = T::lit(12.0) * std / T::from_usize(points - 1).unwrap();
    (0..points)
        .map(|i| {
            let x = lo + step * T::from_usize(i).unwrap();
            (x, normal_pdf(x, mean, std))
        })
        .collect()
}
