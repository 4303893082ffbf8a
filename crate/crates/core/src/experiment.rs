// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte Carlo generate, detect and score loop over a scenario, a set of
//! methods and a grid of nominal levels.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{detect, DetectConfig, Detection, Method};
use crate::error::{ParcsError, Result};
use crate::metrics::{default_window, DetectionOutcome, MetricReport, RateDefinition, Scoring};
use crate::rng::RngSpec;
use crate::synth::{generate, scenario, ScenarioOverrides, StepModelSpec};

const DATA_STREAM: u64 = 1;
const DETECT_STREAM: u64 = 2;

/// Realisation `r` of a benchmark seeded with `seed`.
pub fn realisation_rng(seed: u64, r: usize) -> RngSpec {
    RngSpec::new(seed).keyed(&[DATA_STREAM, r as u64])
}

/// Detection stream for realisation `r`; shared by all methods and levels.
pub fn detection_rng(seed: u64, r: usize) -> RngSpec {
    RngSpec::new(seed).keyed(&[DETECT_STREAM, r as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub scenario: String,
    pub overrides: ScenarioOverrides,
    pub methods: Vec<Method>,
    pub alpha_grid: Vec<f64>,
    pub realisations: usize,
    pub seed: u64,
    /// Template for every run; its method and level are replaced per cell.
    pub detect: DetectConfig,
    /// Matching window half-width; `None` uses `round(0.05 T)`.
    pub window: Option<usize>,
    pub rates: RateDefinition,
}

impl BenchmarkConfig {
    pub fn spec(&self) -> Result<StepModelSpec> {
        scenario(&self.scenario, &self.overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(ParcsError::Config("no methods to benchmark".into()));
        }
        if self.alpha_grid.is_empty() {
            return Err(ParcsError::Config("alpha grid is empty".into()));
        }
        if self.realisations == 0 {
            return Err(ParcsError::Config("realisations must be at least 1".into()));
        }
        self.spec()?;
        for m in &self.methods {
            for a in &self.alpha_grid {
                self.cell_config(*m, *a).validate()?;
            }
        }
        Ok(())
    }

    fn cell_config(&self, method: Method, alpha: f64) -> DetectConfig {
        let mut c = self.detect.clone();
        c.method = method;
        c.bootstrap.alpha = alpha;
        c
    }

    /// Scenario name with its overrides, e.g. `amoc-grid[T=50,c=20]`.
    pub fn condition(&self) -> String {
        let o = &self.overrides;
        let mut parts = Vec::new();
        if let Some(v) = o.len {
            parts.push(format!("T={v}"));
        }
        if let Some(v) = o.sigma {
            parts.push(format!("sigma={v}"));
        }
        if let Some(v) = o.w0 {
            parts.push(format!("w0={v}"));
        }
        if let Some(v) = o.c {
            parts.push(format!("c={v}"));
        }
        if let Some(v) = o.w1 {
            parts.push(format!("w1={v}"));
        }
        if let Some(v) = o.w2 {
            parts.push(format!("w2={v}"));
        }
        if parts.is_empty() {
            self.scenario.clone()
        } else {
            format!("{}[{}]", self.scenario, parts.join(","))
        }
    }
}

/// Wall-clock seconds spent per benchmark cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub method: Method,
    pub alpha: f64,
    pub detect_seconds: f64,
    pub score_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOutput {
    pub condition: String,
    pub spec: StepModelSpec,
    pub reports: Vec<MetricReport>,
    /// `outcomes[cell][r]`, cells ordered as `reports`.
    pub outcomes: Vec<Vec<DetectionOutcome>>,
    pub generate_seconds: f64,
    pub timings: Vec<CellTiming>,
}

/// Runs every method at every level on the same realisations.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkOutput> {
    config.validate()?;
    let spec = config.spec()?;
    let scoring = Scoring {
        window: config.window.unwrap_or_else(|| default_window(spec.len)),
        rates: config.rates,
    };
    let started = Instant::now();
    let data = (0..config.realisations)
        .into_par_iter()
        .map(|r| generate(&spec, realisation_rng(config.seed, r)))
        .collect::<Result<Vec<_>>>()?;
    let generate_seconds = started.elapsed().as_secs_f64();
    let condition = config.condition();

    let mut reports = Vec::new();
    let mut outcomes = Vec::new();
    let mut timings = Vec::new();
    for &method in &config.methods {
        for &alpha in &config.alpha_grid {
            let cfg = config.cell_config(method, alpha);
            let started = Instant::now();
            let cell = data
                .par_iter()
                .enumerate()
                .map(|(r, x)| {
                    let d: Detection = detect(x, &cfg, detection_rng(config.seed, r))?;
                    Ok(DetectionOutcome::from_spec(&spec, d.locations()))
                })
                .collect::<Result<Vec<_>>>()?;
            let detect_seconds = started.elapsed().as_secs_f64();
            let started = Instant::now();
            reports.push(MetricReport::score(&condition, method.name(), alpha, &cell, scoring)?);
            timings.push(CellTiming {
                method,
                alpha,
                detect_seconds,
                score_seconds: started.elapsed().as_secs_f64(),
            });
            outcomes.push(cell);
        }
    }
    Ok(BenchmarkOutput { condition, spec, reports, outcomes, generate_seconds, timings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infer::{BlockSize, BootstrapConfig};

    fn config() -> BenchmarkConfig {
        BenchmarkConfig {
            scenario: "two-cp-3".into(),
            overrides: ScenarioOverrides { len: Some(50), ..Default::default() },
            methods: vec![Method::Parcs, Method::Binseg],
            alpha_grid: vec![0.05, 0.3],
            realisations: 6,
            seed: 11,
            detect: DetectConfig {
                bootstrap: BootstrapConfig {
                    block_size: BlockSize::Fixed(1),
                    ..BootstrapConfig::new(100, 0.05).unwrap()
                },
                ..DetectConfig::default()
            },
            window: None,
            rates: RateDefinition::Count,
        }
    }

    #[test]
    fn reports_cover_grid_and_reproduce() {
        let c = config();
        let a = run_benchmark(&c).unwrap();
        assert_eq!(a.reports.len(), 4);
        assert_eq!(a.condition, "two-cp-3[T=50]");
        let b = run_benchmark(&c).unwrap();
        assert_eq!(a.reports, b.reports);
        for r in &a.reports {
            assert_eq!(r.accuracy.len(), 2);
            assert!((0.0..=1.0).contains(&r.type1) && (0.0..=1.0).contains(&r.type2));
        }
    }

    #[test]
    fn invalid_grid_is_rejected() {
        let mut c = config();
        c.alpha_grid = vec![0.001];
        assert!(run_benchmark(&c).is_err());
        let mut c = config();
        c.methods.clear();
        assert!(run_benchmark(&c).is_err());
        let mut c = config();
        c.scenario = "nope".into();
        assert!(matches!(run_benchmark(&c), Err(ParcsError::UnknownScenario { .. })));
    }
}
