// SPDX-License-Identifier: MIT OR Apache-2.0

//! Ground-truth step models and the simulation presets used for evaluation.

use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{ParcsError, Result};
use crate::rng::RngSpec;
use crate::series::{MultiSeries, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    GaussianMa,
    Poisson,
}

/// Parameters of a piecewise-constant mean with additive MA(q) Gaussian or
/// Poisson observation noise.
///
/// `weights[m][n]` is the jump of covariate `n` after change point `cps[m]`;
/// the jump takes effect at `t = cps[m] + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepModelSpec {
    pub baseline: Vec<f64>,
    pub cps: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    /// `kappa_1..kappa_q`; `kappa_0 = 1` is implicit.
    pub ma_coeffs: Vec<f64>,
    pub sigma: f64,
    #[serde(rename = "T")]
    pub len: usize,
    pub noise_kind: NoiseKind,
}

impl StepModelSpec {
    pub fn covariates(&self) -> usize {
        self.baseline.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.baseline.len();
        if n == 0 {
            return Err(ParcsError::Config("baseline must have at least one covariate".into()));
        }
        if self.len < TimeSeries::MIN_LEN {
            return Err(ParcsError::Config(format!("T must be at least 3, got {}", self.len)));
        }
        if self.weights.len() != self.cps.len() {
            return Err(ParcsError::Config(format!(
                "{} change points but {} weight rows",
                self.cps.len(),
                self.weights.len()
            )));
        }
        for (m, row) in self.weights.iter().enumerate() {
            if row.len() != n {
                return Err(ParcsError::Config(format!(
                    "weight row {} has {} entries, expected {}",
                    m + 1,
                    row.len(),
                    n
                )));
            }
        }
        for (i, &c) in self.cps.iter().enumerate() {
            if c < 2 || c > self.len - 1 {
                return Err(ParcsError::Config(format!(
                    "change point {c} outside 2..={}",
                    self.len - 1
                )));
            }
            if i > 0 && c <= self.cps[i - 1] {
                return Err(ParcsError::Config("change points must be strictly increasing".into()));
            }
        }
        let all_finite = self
            .baseline
            .iter()
            .chain(self.weights.iter().flatten())
            .chain(&self.ma_coeffs)
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(ParcsError::Config("model parameters must be finite".into()));
        }
        if self.noise_kind == NoiseKind::GaussianMa && !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(ParcsError::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }

    /// Change points carrying a nonzero jump in at least one covariate.
    pub fn effective_cps(&self) -> Vec<usize> {
        self.cps
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| w.iter().any(|v| *v != 0.0))
            .map(|(c, _)| *c)
            .collect()
    }

    fn mean_column(&self, n: usize) -> Vec<f64> {
        (1..=self.len)
            .map(|t| {
                self.baseline[n]
                    + self
                        .cps
                        .iter()
                        .zip(&self.weights)
                        .filter(|(c, _)| t > **c)
                        .map(|(_, w)| w[n])
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Noise-free piecewise-constant mean of `spec`.
pub fn deterministic_mean(spec: &StepModelSpec) -> Result<MultiSeries> {
    spec.validate()?;
    let columns = (0..spec.covariates())
        .map(|n| TimeSeries::from_trusted(spec.mean_column(n)))
        .collect();
    MultiSeries::new(columns)
}

/// Draws one realisation of `spec`. Covariate `n` uses the sub-stream keyed by `n`.
pub fn generate(spec: &StepModelSpec, rng: RngSpec) -> Result<MultiSeries> {
    spec.validate()?;
    let mut columns = Vec::with_capacity(spec.covariates());
    for n in 0..spec.covariates() {
        let mean = spec.mean_column(n);
        let mut gen = rng.substream(n as u64).generator();
        let values = match spec.noise_kind {
            NoiseKind::GaussianMa => {
                let q = spec.ma_coeffs.len();
                let normal = Normal::new(0.0, spec.sigma)
                    .map_err(|e| ParcsError::Config(e.to_string()))?;
                // q warm-up innovations precede t = 1.
                let eps: Vec<f64> = (0..spec.len + q).map(|_| normal.sample(&mut gen)).collect();
                mean.iter()
                    .enumerate()
                    .map(|(i, mu)| {
                        let j = i + q;
                        let ma: f64 = spec
                            .ma_coeffs
                            .iter()
                            .enumerate()
                            .map(|(tau, k)| k * eps[j - tau - 1])
                            .sum();
                        mu + eps[j] + ma
                    })
                    .collect()
            }
            NoiseKind::Poisson => {
                let mut out = Vec::with_capacity(spec.len);
                for (i, &rate) in mean.iter().enumerate() {
                    if rate < 0.0 {
                        return Err(ParcsError::Config(format!(
                            "negative Poisson rate {rate} at t={}, covariate={}",
                            i + 1,
                            n + 1
                        )));
                    }
                    if rate == 0.0 {
                        out.push(0.0);
                    } else {
                        let p = Poisson::new(rate).map_err(|e| ParcsError::Config(e.to_string()))?;
                        out.push(p.sample(&mut gen));
                    }
                }
                out
            }
        };
        columns.push(TimeSeries::from_trusted(values));
    }
    MultiSeries::new(columns)
}

/// Registered preset names.
pub const SCENARIOS: &[&str] = &[
    "amoc-grid",
    "ma2-amoc",
    "two-cp-1",
    "two-cp-2",
    "two-cp-3",
    "ma2-two-cp",
    "multivariate-9",
    "poisson-9",
];

/// Optional parameter overrides applied on top of a preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOverrides {
    #[serde(rename = "T")]
    pub len: Option<usize>,
    pub sigma: Option<f64>,
    /// Weight scale; for single-change presets this is the step `w` itself.
    pub w0: Option<f64>,
    /// Change-point location for single-change presets.
    pub c: Option<usize>,
    pub w1: Option<f64>,
    pub w2: Option<f64>,
}

impl ScenarioOverrides {
    /// Applies one `key=value` pair.
    pub fn set(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| ParcsError::Config(format!("override '{pair}' is not key=value")))?;
        let float = |v: &str| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| ParcsError::Config(format!("override {key}: '{v}' is not a number")))
        };
        let int = |v: &str| {
            v.trim()
                .parse::<usize>()
                .map_err(|_| ParcsError::Config(format!("override {key}: '{v}' is not an integer")))
        };
        match key.trim() {
            "T" | "t" | "len" => self.len = Some(int(value)?),
            "sigma" => self.sigma = Some(float(value)?),
            "w0" | "w" => self.w0 = Some(float(value)?),
            "c" => self.c = Some(int(value)?),
            "w1" => self.w1 = Some(float(value)?),
            "w2" => self.w2 = Some(float(value)?),
            other => {
                return Err(ParcsError::Config(format!(
                    "unknown override key '{other}' (expected T, sigma, w0, c, w1, w2)"
                )))
            }
        }
        Ok(())
    }

    pub fn parse_all<S: AsRef<str>>(pairs: &[S]) -> Result<Self> {
        let mut o = Self::default();
        for p in pairs {
            o.set(p.as_ref())?;
        }
        Ok(o)
    }
}

fn relative_cp(fraction: f64, len: usize) -> usize {
    (fraction * len as f64).round() as usize
}

const MULTI_B: [f64; 9] = [0., 0., 0., 2., 2., 2., 0., 1., 2.];
const POISSON_B: [f64; 9] = [1., 1., 1., 3., 3., 3., 1., 2., 1.];
const MULTI_W1: [f64; 9] = [1., 2., 2., -2., 0., 0., 0., 0., 0.];
const MULTI_W2: [f64; 9] = [2., 1., -1., 0., 1., -1., 0., 0., 0.];

fn ma2_coeffs(sigma: f64) -> Vec<f64> {
    vec![-0.5 / sigma, 0.4 / sigma]
}

/// Builds the preset `name` with `overrides` applied.
pub fn scenario(name: &str, overrides: &ScenarioOverrides) -> Result<StepModelSpec> {
    let len = overrides.len.unwrap_or(100);
    let w0 = overrides.w0.unwrap_or(1.0);
    let spec = match name {
        "amoc-grid" | "ma2-amoc" => {
            let ma = name == "ma2-amoc";
            let sigma = overrides.sigma.unwrap_or(if ma { 0.7 } else { 1.0 });
            StepModelSpec {
                baseline: vec![0.0],
                cps: vec![overrides.c.unwrap_or_else(|| relative_cp(0.5, len))],
                weights: vec![vec![w0]],
                ma_coeffs: if ma { ma2_coeffs(sigma) } else { Vec::new() },
                sigma,
                len,
                noise_kind: NoiseKind::GaussianMa,
            }
        }
        "two-cp-1" | "two-cp-2" | "two-cp-3" | "ma2-two-cp" => {
            let (d1, d2) = match name {
                "two-cp-1" => (1.0, 2.0),
                "two-cp-3" => (2.0, 1.0),
                _ => (2.0, -1.0),
            };
            let ma = name == "ma2-two-cp";
            let sigma = overrides.sigma.unwrap_or(if ma { 0.7 } else { 1.0 });
            StepModelSpec {
                baseline: vec![0.0],
                cps: vec![relative_cp(0.2, len), relative_cp(0.6, len)],
                weights: vec![
                    vec![overrides.w1.unwrap_or(d1) * w0],
                    vec![overrides.w2.unwrap_or(d2) * w0],
                ],
                ma_coeffs: if ma { ma2_coeffs(sigma) } else { Vec::new() },
                sigma,
                len,
                noise_kind: NoiseKind::GaussianMa,
            }
        }
        "multivariate-9" | "poisson-9" => {
            let poisson = name == "poisson-9";
            StepModelSpec {
                baseline: if poisson { POISSON_B.to_vec() } else { MULTI_B.to_vec() },
                cps: vec![relative_cp(0.2, len), relative_cp(0.6, len)],
                weights: vec![
                    MULTI_W1.iter().map(|w| w * w0).collect(),
                    MULTI_W2.iter().map(|w| w * w0).collect(),
                ],
                ma_coeffs: Vec::new(),
                sigma: overrides.sigma.unwrap_or(1.0),
                len,
                noise_kind: if poisson { NoiseKind::Poisson } else { NoiseKind::GaussianMa },
            }
        }
        _ => {
            return Err(ParcsError::UnknownScenario {
                name: name.to_string(),
                available: SCENARIOS.join(", "),
            })
        }
    };
    spec.validate()?;
    Ok(spec)
}
