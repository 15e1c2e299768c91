//! Finite-horizon growth sequences and their extrapolation.
//!
//! Every estimator in the crate produces a sequence `a_n` of normalized
//! log-quantities (nats per iteration). Three extrapolators are provided:
//!
//! * the sub-additive rule: for sub-additive `n·a_n` the limit equals
//!   `inf_n a_n`, so the minimum over the computed horizon is an upper
//!   estimate that improves monotonically with the horizon;
//! * a least-squares fit `a_n ≈ rate + β/n` over the largest half of the
//!   computed horizons, which removes the `O(1/n)` bias of a constant
//!   prefactor;
//! * the Cauchy difference `(n·a_n − m·a_m)/(n − m)` of the last two entries.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Extrapolation {
    /// Minimum of the computed entries.
    SubadditiveMin,
    /// Intercept of the `rate + β/n` least-squares fit.
    InverseNFit,
    /// Least-squares slope of `n·a_n` against `n` (used for log-counts).
    CountSlope,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthEntry {
    pub n: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitDiagnostics {
    pub intercept: f64,
    pub slope: f64,
    pub rms_residual: f64,
    /// Smallest horizon used in the fit window.
    pub window_start: usize,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthSeries {
    pub entries: Vec<GrowthEntry>,
    pub extrapolated_rate: f64,
    pub method: Extrapolation,
    pub fit: Option<FitDiagnostics>,
    pub cauchy_rate: Option<f64>,
    pub subadditive_min: f64,
}

impl GrowthSeries {
    /// Builds a series and its diagnostics; the headline rate is chosen by
    /// `method`.
    pub fn new(entries: Vec<GrowthEntry>, method: Extrapolation) -> Result<Self> {
        validate(&entries)?;
        let fit = fit_inverse_n(&entries);
        let cauchy_rate = cauchy_difference(&entries);
        let subadditive_min = entries.iter().map(|e| e.value).fold(f64::INFINITY, f64::min);
        let extrapolated_rate = match method {
            Extrapolation::SubadditiveMin => subadditive_min,
            Extrapolation::InverseNFit => fit.map_or(entries[entries.len() - 1].value, |f| f.intercept),
            Extrapolation::CountSlope => count_slope(&entries).unwrap_or(entries[entries.len() - 1].value),
        };
        Ok(GrowthSeries { entries, extrapolated_rate, method, fit, cauchy_rate, subadditive_min })
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>, method: Extrapolation) -> Result<Self> {
        Self::new(pairs.into_iter().map(|(n, value)| GrowthEntry { n, value }).collect(), method)
    }

    pub fn ns(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.n).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    pub fn value_at(&self, n: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.n == n).map(|e| e.value)
    }

    pub fn last(&self) -> GrowthEntry {
        self.entries[self.entries.len() - 1]
    }
}

fn validate(entries: &[GrowthEntry]) -> Result<()> {
    if entries.is_empty() {
        return Err(Error::param("growth series needs at least one entry"));
    }
    for w in entries.windows(2) {
        if w[1].n <= w[0].n {
            return Err(Error::param(format!("horizons must increase strictly ({} then {})", w[0].n, w[1].n)));
        }
    }
    if let Some(e) = entries.iter().find(|e| e.n == 0 || !e.value.is_finite()) {
        return Err(Error::InvariantViolated(format!("non-finite or n = 0 entry at n = {}: {}", e.n, e.value)));
    }
    Ok(())
}

/// The largest ⌈len/2⌉ entries (at least two when available).
fn fit_window(entries: &[GrowthEntry]) -> &[GrowthEntry] {
    let len = entries.len();
    let take = len.div_ceil(2).max(2).min(len);
    &entries[len - take..]
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn least_squares_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let k = xs.len();
    if k < 2 || ys.len() != k {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / k as f64;
    let my = ys.iter().sum::<f64>() / k as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((my - slope * mx, slope))
}

/// Fits `a_n = rate + β/n` over the largest half of the horizons.
pub fn fit_inverse_n(entries: &[GrowthEntry]) -> Option<FitDiagnostics> {
    let w = fit_window(entries);
    let xs: Vec<f64> = w.iter().map(|e| 1.0 / e.n as f64).collect();
    let ys: Vec<f64> = w.iter().map(|e| e.value).collect();
    let (intercept, slope) = least_squares_line(&xs, &ys)?;
    let ss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Some(FitDiagnostics {
        intercept,
        slope,
        rms_residual: (ss / xs.len() as f64).sqrt(),
        window_start: w[0].n,
        points: w.len(),
    })
}

/// `(n·a_n − m·a_m)/(n − m)` for the last two entries.
pub fn cauchy_difference(entries: &[GrowthEntry]) -> Option<f64> {
    if entries.len() < 2 {
        return None;
    }
    let p = entries[entries.len() - 2];
    let q = entries[entries.len() - 1];
    Some((q.n as f64 * q.value - p.n as f64 * p.value) / (q.n - p.n) as f64)
}

fn count_slope(entries: &[GrowthEntry]) -> Option<f64> {
    let w = fit_window(entries);
    let xs: Vec<f64> = w.iter().map(|e| e.n as f64).collect();
    let ys: Vec<f64> = w.iter().map(|e| e.n as f64 * e.value).collect();
    least_squares_line(&xs, &ys).map(|(_, s)| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_increasing_and_non_finite() {
        assert!(GrowthSeries::from_pairs([(2, 0.1), (2, 0.2)], Extrapolation::InverseNFit).is_err());
        assert!(GrowthSeries::from_pairs([(1, f64::NAN)], Extrapolation::InverseNFit).is_err());
        assert!(GrowthSeries::from_pairs(Vec::<(usize, f64)>::new(), Extrapolation::InverseNFit).is_err());
    }

    #[test]
    fn inverse_n_fit_recovers_exact_model() {
        let s = GrowthSeries::from_pairs((1..=20).map(|n| (n, 0.7 + 1.3 / n as f64)), Extrapolation::InverseNFit)
            .unwrap();
        let fit = s.fit.unwrap();
        assert!((fit.intercept - 0.7).abs() < 1e-12);
        assert!((fit.slope - 1.3).abs() < 1e-10);
        assert_eq!(fit.window_start, 11);
        assert!((s.extrapolated_rate - 0.7).abs() < 1e-12);
        // n·a_n = 0.7 n + 1.3 is affine, so the Cauchy difference is exact
        assert!((s.cauchy_rate.unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn subadditive_rule_takes_minimum() {
        let s = GrowthSeries::from_pairs([(1, 1.0), (2, 0.8), (3, 0.9)], Extrapolation::SubadditiveMin).unwrap();
        assert_eq!(s.extrapolated_rate, 0.8);
    }

    #[test]
    fn count_slope_is_slope_of_log_count() {
        let s = GrowthSeries::from_pairs((1..=6).map(|n| (n, (2.0 + 0.5 * n as f64) / n as f64)), Extrapolation::CountSlope)
            .unwrap();
        assert!((s.extrapolated_rate - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_entry_uses_value() {
        let s = GrowthSeries::from_pairs([(5, 0.3)], Extrapolation::InverseNFit).unwrap();
        assert_eq!(s.extrapolated_rate, 0.3);
        assert!(s.fit.is_none());
        assert!(s.cauchy_rate.is_none());
    }
}
