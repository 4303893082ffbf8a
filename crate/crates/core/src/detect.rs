// SPDX-License-Identifier: MIT OR Apache-2.0

//! One entry point over all detection methods.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cusum::{amoc_detect, binary_segmentation, LocatorConfig};
use crate::error::{ParcsError, Result};
use crate::infer::{parcs_significance_test, BootstrapConfig, SignificanceResult};
use crate::parcs::{fit_parcs, reconstruct_step_estimate};
use crate::rng::RngSpec;
use crate::series::{mean_of, sqrt_transform, MultiSeries, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Parcs,
    /// Single change point, unweighted locator.
    Cusum,
    /// Single change point, maximum-likelihood locator weighting.
    CusumMl,
    /// CUSUM with binary segmentation.
    Binseg,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Parcs, Method::Cusum, Method::CusumMl, Method::Binseg];

    pub fn name(self) -> &'static str {
        match self {
            Method::Parcs => "parcs",
            Method::Cusum => "cusum",
            Method::CusumMl => "cusum-ml",
            Method::Binseg => "binseg",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = ParcsError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| ParcsError::Config(format!("unknown method '{s}' (expected parcs, cusum, cusum-ml or binseg)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub method: Method,
    /// Model order `M` for PARCS.
    pub max_cps: usize,
    /// Forward-stage bound `L`; `None` uses the default for `max_cps`.
    pub forward: Option<usize>,
    /// Locator weighting exponent; `None` uses the method default.
    pub gamma: Option<f64>,
    /// Partitioning rounds for binary segmentation.
    pub max_depth: usize,
    pub sqrt_preprocess: bool,
    pub bootstrap: BootstrapConfig,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            method: Method::Parcs,
            max_cps: 3,
            forward: None,
            gamma: None,
            max_depth: 1,
            sqrt_preprocess: false,
            bootstrap: BootstrapConfig::default(),
        }
    }
}

impl DetectConfig {
    pub fn locator(&self) -> Result<LocatorConfig> {
        let gamma = match (self.gamma, self.method) {
            (Some(g), _) => g,
            (None, Method::CusumMl) => LocatorConfig::ML.gamma,
            (None, _) => LocatorConfig::PLAIN.gamma,
        };
        LocatorConfig::new(gamma)
    }

    pub fn validate(&self) -> Result<()> {
        self.bootstrap.validate()?;
        self.locator()?;
        if self.method == Method::Parcs {
            if self.max_cps == 0 {
                return Err(ParcsError::Config("max-cps must be at least 1".into()));
            }
            if let Some(l) = self.forward {
                if l < self.max_cps {
                    return Err(ParcsError::Config(format!(
                        "forward bound {l} is below max-cps {}",
                        self.max_cps
                    )));
                }
            }
        }
        if self.method == Method::Binseg && self.max_depth == 0 {
            return Err(ParcsError::Config("max-depth must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub method: Method,
    pub result: SignificanceResult,
    /// Piecewise-constant mean estimate per covariate.
    pub reconstructed: Vec<Vec<f64>>,
}

impl Detection {
    pub fn locations(&self) -> Vec<usize> {
        self.result.accepted_locations()
    }
}

/// Runs the configured method on `series`.
pub fn detect(series: &MultiSeries, config: &DetectConfig, rng: RngSpec) -> Result<Detection> {
    config.validate()?;
    let prepared;
    let series = if config.sqrt_preprocess {
        prepared = sqrt_transform(series)?;
        &prepared
    } else {
        series
    };
    let univariate = || -> Result<&TimeSeries> {
        if series.covariates() != 1 {
            return Err(ParcsError::Config(format!(
                "method {} handles a single covariate, input has {}",
                config.method,
                series.covariates()
            )));
        }
        Ok(series.column(0))
    };
    let boot = &config.bootstrap;
    let result = match config.method {
        Method::Parcs => {
            let model = fit_parcs(series, config.max_cps, config.forward)?;
            let mut result = parcs_significance_test(series, &model, boot, rng)?;
            result.diagnostics.splice(0..0, model.diagnostics.iter().cloned());
            result
        }
        Method::Cusum | Method::CusumMl => amoc_detect(univariate()?, config.locator()?, boot, rng)?,
        Method::Binseg => binary_segmentation(univariate()?, config.locator()?, boot, config.max_depth, rng)?,
    };
    let reconstructed = match &result.reconstructed_model {
        Some(model) => reconstruct_step_estimate(model)
            .into_columns()
            .into_iter()
            .map(TimeSeries::into_values)
            .collect(),
        None => series
            .columns()
            .iter()
            .map(|c| segment_means(c.values(), &result.accepted_locations()))
            .collect(),
    };
    Ok(Detection { method: config.method, result, reconstructed })
}

/// Piecewise-constant fit with breaks after each location in `cps`.
pub fn segment_means(values: &[f64], cps: &[usize]) -> Vec<f64> {
    let mut bounds: Vec<usize> = cps.iter().copied().filter(|c| *c > 0 && *c < values.len()).collect();
    bounds.sort_unstable();
    bounds.dedup();
    bounds.push(values.len());
    let mut out = Vec::with_capacity(values.len());
    let mut start = 0;
    for end in bounds {
        let m = mean_of(&values[start..end]);
        out.extend(std::iter::repeat_n(m, end - start));
        start = end;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infer::BlockSize;
    use crate::synth::{deterministic_mean, scenario, ScenarioOverrides};

    fn cfg(method: Method) -> DetectConfig {
        DetectConfig {
            method,
            bootstrap: BootstrapConfig {
                block_size: BlockSize::Fixed(1),
                ..BootstrapConfig::new(200, 0.05).unwrap()
            },
            ..DetectConfig::default()
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("wbs".parse::<Method>().is_err());
    }

    #[test]
    fn noiseless_two_step_by_rank() {
        let spec = scenario("two-cp-1", &ScenarioOverrides::default()).unwrap();
        let x = deterministic_mean(&spec).unwrap();
        let d = detect(&x, &cfg(Method::Parcs), RngSpec::new(1)).unwrap();
        assert_eq!(d.locations(), vec![60, 20]);
        let truth = x.column(0).values();
        assert!(d.reconstructed[0].iter().zip(truth).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn constant_series_any_method() {
        let x = MultiSeries::from_columns(vec![vec![2.0; 50]]).unwrap();
        for m in Method::ALL {
            let d = detect(&x, &cfg(m), RngSpec::new(1)).unwrap();
            assert!(d.locations().is_empty(), "{m}");
            assert!(d.reconstructed[0].iter().all(|v| (v - 2.0).abs() < 1e-12));
        }
    }

    #[test]
    fn cusum_ml_is_cusum_with_half_gamma() {
        let spec = scenario("amoc-grid", &ScenarioOverrides { c: Some(20), ..Default::default() }).unwrap();
        let x = crate::synth::generate(&spec, RngSpec::new(4)).unwrap();
        let ml = detect(&x, &cfg(Method::CusumMl), RngSpec::new(9)).unwrap();
        let plain = DetectConfig { gamma: Some(0.5), ..cfg(Method::Cusum) };
        assert_eq!(ml.result, detect(&x, &plain, RngSpec::new(9)).unwrap().result);
    }

    #[test]
    fn cusum_rejects_multivariate() {
        let x = MultiSeries::from_columns(vec![vec![0.0, 1.0, 2.0, 3.0]; 2]).unwrap();
        assert!(matches!(detect(&x, &cfg(Method::Cusum), RngSpec::new(1)), Err(ParcsError::Config(_))));
    }

    #[test]
    fn segment_mean_examples() {
        assert_eq!(segment_means(&[1., 3., 5., 7.], &[2]), vec![2., 2., 6., 6.]);
        assert_eq!(segment_means(&[1., 3.], &[]), vec![2., 2.]);
    }
}
