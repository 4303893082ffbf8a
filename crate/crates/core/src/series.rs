// SPDX-License-Identifier: MIT OR Apache-2.0

//! Series containers, summary statistics and preprocessing transforms.

use crate::error::{ParcsError, Result};

/// A univariate series of at least three finite observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub const MIN_LEN: usize = 3;

    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < Self::MIN_LEN {
            return Err(ParcsError::InvalidInput(format!(
                "series needs at least {} observations, got {}",
                Self::MIN_LEN,
                values.len()
            )));
        }
        if let Some(t) = values.iter().position(|v| !v.is_finite()) {
            return Err(ParcsError::InvalidInput(format!(
                "non-finite value {} at t={}",
                values[t],
                t + 1
            )));
        }
        Ok(Self { values })
    }

    /// Wraps values that are already known to be valid.
    pub(crate) fn from_trusted(values: Vec<f64>) -> Self {
        debug_assert!(values.len() >= Self::MIN_LEN);
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        arithmetic_mean(self)
    }
}

/// `N` covariate series sharing a common length.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiSeries {
    columns: Vec<TimeSeries>,
}

impl MultiSeries {
    pub fn new(columns: Vec<TimeSeries>) -> Result<Self> {
        let Some(first) = columns.first() else {
            return Err(ParcsError::InvalidInput(
                "at least one covariate is required".into(),
            ));
        };
        let len = first.len();
        if let Some(n) = columns.iter().position(|c| c.len() != len) {
            return Err(ParcsError::InvalidInput(format!(
                "covariate {} has length {}, expected {}",
                n + 1,
                columns[n].len(),
                len
            )));
        }
        Ok(Self { columns })
    }

    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let columns = columns
            .into_iter()
            .map(TimeSeries::new)
            .collect::<Result<Vec<_>>>()?;
        Self::new(columns)
    }

    pub fn univariate(series: TimeSeries) -> Self {
        Self {
            columns: vec![series],
        }
    }

    /// Number of time steps `T`.
    pub fn len(&self) -> usize {
        self.columns[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Number of covariates `N`.
    pub fn covariates(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[TimeSeries] {
        &self.columns
    }

    pub fn column(&self, n: usize) -> &TimeSeries {
        &self.columns[n]
    }

    pub fn into_columns(self) -> Vec<TimeSeries> {
        self.columns
    }
}

impl From<TimeSeries> for MultiSeries {
    fn from(series: TimeSeries) -> Self {
        Self::univariate(series)
    }
}

pub fn arithmetic_mean(series: &TimeSeries) -> f64 {
    mean_of(series.values())
}

pub(crate) fn mean_of(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Biased sample autocorrelation at `lag`: the lag autocovariance divided by
/// the lag-0 autocovariance, both normalised by `T`.
pub fn autocorrelation(series: &TimeSeries, lag: usize) -> Result<f64> {
    let t = series.len();
    if lag == 0 || lag > t - 2 {
        return Err(ParcsError::InvalidInput(format!(
            "lag must lie in 1..={}, got {}",
            t - 2,
            lag
        )));
    }
    let values = series.values();
    let mean = mean_of(values);
    let dev: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let c0: f64 = dev.iter().map(|d| d * d).sum();
    // Relative floor: a constant series accumulates rounding residue only.
    let scale: f64 = values.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    if c0 <= 1e-24 * scale {
        return Err(ParcsError::NoVariance);
    }
    let ck: f64 = dev.iter().zip(&dev[lag..]).map(|(a, b)| a * b).sum();
    Ok(ck / c0)
}

/// Element-wise square root of non-negative count data.
pub fn sqrt_transform(series: &MultiSeries) -> Result<MultiSeries> {
    let mut columns = Vec::with_capacity(series.covariates());
    for (n, col) in series.columns().iter().enumerate() {
        if let Some(t) = col.values().iter().position(|v| *v < 0.0) {
            return Err(ParcsError::NegativeCount {
                t: t + 1,
                covariate: n + 1,
                value: col.values()[t],
            });
        }
        columns.push(TimeSeries::from_trusted(
            col.values().iter().map(|v| v.sqrt()).collect(),
        ));
    }
    Ok(MultiSeries { columns })
}
