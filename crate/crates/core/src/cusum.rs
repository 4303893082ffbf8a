// SPDX-License-Identifier: MIT OR Apache-2.0

//! CUSUM curves, the weighted single-change locator, and the bootstrap-tested
//! AMOC and binary-segmentation baselines.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{ParcsError, Result};
use crate::infer::{
    block_count, block_order, estimate_ma_order, negligible, permute_into, BlockSize,
    BootstrapConfig, CpTest, Edf, SignificanceResult,
};
use crate::rng::RngSpec;
use crate::series::{mean_of, TimeSeries};

/// Cumulative sum of deviations from the mean, `y_t = sum_{s<=t} (x_s - <x>)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CusumCurve {
    y: Vec<f64>,
    source_mean: f64,
}

impl CusumCurve {
    pub fn from_parts(y: Vec<f64>, source_mean: f64) -> Self {
        Self { y, source_mean }
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn source_mean(&self) -> f64 {
        self.source_mean
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

pub fn cusum_transform(series: &TimeSeries) -> CusumCurve {
    let (y, mean) = cusum_of(series.values());
    CusumCurve::from_parts(y, mean)
}

pub(crate) fn cusum_of(values: &[f64]) -> (Vec<f64>, f64) {
    let mean = mean_of(values);
    let mut acc = 0.0;
    let y = values
        .iter()
        .map(|x| {
            acc += x - mean;
            acc
        })
        .collect();
    (y, mean)
}

/// Inverts a CUSUM curve with `y_0 = 0`.
pub fn invert_cusum(curve: &CusumCurve) -> TimeSeries {
    let mut prev = 0.0;
    let values = curve
        .y
        .iter()
        .map(|y| {
            let x = y - prev + curve.source_mean;
            prev = *y;
            x
        })
        .collect();
    TimeSeries::from_trusted(values)
}

/// Weight exponent of the locator; 0 is the plain CUSUM, 0.5 the ML variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocatorConfig {
    pub gamma: f64,
}

impl LocatorConfig {
    pub const PLAIN: Self = Self { gamma: 0.0 };
    pub const ML: Self = Self { gamma: 0.5 };

    pub fn new(gamma: f64) -> Result<Self> {
        let c = Self { gamma };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.gamma) {
            return Err(ParcsError::Config(format!(
                "gamma must lie in [0, 0.5], got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

impl Default for LocatorConfig {
    fn default() -> Self {
        Self::PLAIN
    }
}

/// Weights `(T / (t (T - t)))^gamma` for `t = 1..T-1`.
fn locator_weights(len: usize, gamma: f64) -> Vec<f64> {
    let tf = len as f64;
    (1..len)
        .map(|t| {
            if gamma == 0.0 {
                1.0
            } else {
                let t = t as f64;
                (tf / (t * (tf - t))).powf(gamma)
            }
        })
        .collect()
}

/// Argmax over interior `t` of the weighted `|y_t|`; ties go to the smallest `t`.
fn weighted_argmax(y: &[f64], weights: &[f64]) -> (usize, f64) {
    let mut best = (1, f64::NEG_INFINITY);
    for (i, w) in weights.iter().enumerate() {
        let s = w * y[i].abs();
        if s > best.1 {
            best = (i + 1, s);
        }
    }
    best
}

/// Estimated change point `c_hat` and its (weighted) maximum statistic.
pub fn locate(series: &TimeSeries, config: LocatorConfig) -> (usize, f64) {
    locate_values(series.values(), config.gamma)
}

fn locate_values(values: &[f64], gamma: f64) -> (usize, f64) {
    let (y, _) = cusum_of(values);
    weighted_argmax(&y, &locator_weights(values.len(), gamma))
}

/// Baseline and jump from the means before and after `c_hat`.
pub fn estimate_step(series: &TimeSeries, c_hat: usize) -> Result<(f64, f64)> {
    estimate_step_values(series.values(), c_hat)
}

fn estimate_step_values(values: &[f64], c_hat: usize) -> Result<(f64, f64)> {
    if c_hat == 0 || c_hat >= values.len() {
        return Err(ParcsError::InvalidInput(format!(
            "split {c_hat} outside 1..={}",
            values.len() - 1
        )));
    }
    let b = mean_of(&values[..c_hat]);
    let w = mean_of(&values[c_hat..]) - b;
    Ok((b, w))
}

struct AmocOutcome {
    c_hat: usize,
    statistic: f64,
    threshold: f64,
    p_value: f64,
    accepted: bool,
    weight: f64,
    q: Option<usize>,
    block: usize,
    notes: Vec<String>,
}

fn resolve_block_size(x0: &[f64], boot: &BootstrapConfig, notes: &mut Vec<String>) -> Result<(usize, Option<usize>)> {
    match boot.block_size {
        BlockSize::Fixed(k) => Ok((k, None)),
        BlockSize::Auto => {
            let series = TimeSeries::new(x0.to_vec())?;
            let q = match estimate_ma_order(&series, boot.ma_upper_bound, boot.ma_alpha) {
                Ok(q) => q,
                Err(ParcsError::NoVariance) => {
                    notes.push("H0 series has no variance; MA order set to 0".into());
                    0
                }
                Err(e) => return Err(e),
            };
            Ok((q + 1, Some(q)))
        }
    }
}

fn amoc_test(values: &[f64], gamma: f64, boot: &BootstrapConfig, rng: RngSpec) -> Result<AmocOutcome> {
    let len = values.len();
    let weights = locator_weights(len, gamma);
    let (y, _) = cusum_of(values);
    let (c_hat, statistic) = weighted_argmax(&y, &weights);
    let (_, weight) = estimate_step_values(values, c_hat)?;
    let x0: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, x)| if i + 1 > c_hat { x - weight } else { *x })
        .collect();
    let mut notes = Vec::new();
    let (block, q) = resolve_block_size(&x0, boot, &mut notes)?;
    let n_blocks = block_count(len, block);
    let samples: Vec<f64> = (0..boot.permutations)
        .map(|i| {
            let mut gen = rng.substream(i as u64).generator();
            let order = block_order(n_blocks, &mut gen);
            let mut perm = vec![0.0; len];
            permute_into(&x0, block, &order, &mut perm);
            let (yp, _) = cusum_of(&perm);
            weighted_argmax(&yp, &weights).1
        })
        .collect();
    let edf = Edf::new(samples);
    let threshold = edf.inverse(boot.alpha)?;
    let p_value = edf.p_value(statistic);
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())) * len as f64;
    let zero = negligible(statistic, scale);
    if zero {
        notes.push(format!("statistic at {c_hat} is numerically zero"));
    }
    Ok(AmocOutcome {
        c_hat,
        statistic,
        threshold,
        p_value,
        accepted: statistic >= threshold && !zero,
        weight,
        q,
        block,
        notes,
    })
}

/// Single change-point detection with a block-permutation bootstrap test.
pub fn amoc_detect(
    series: &TimeSeries,
    config: LocatorConfig,
    boot: &BootstrapConfig,
    rng: RngSpec,
) -> Result<SignificanceResult> {
    config.validate()?;
    boot.validate()?;
    if let BlockSize::Fixed(k) = boot.block_size {
        boot.check_feasible(series.len(), k)?;
    }
    let out = amoc_test(series.values(), config.gamma, boot, rng)?;
    boot.check_feasible(series.len(), out.block)?;
    let test = CpTest {
        location: out.c_hat,
        rank: 1,
        statistic: out.statistic,
        threshold: out.threshold,
        p_value: out.p_value,
        step_weights: vec![out.weight],
    };
    let mut result = SignificanceResult {
        estimated_q: out.q,
        block_size: out.block,
        ..SignificanceResult::default()
    };
    result.diagnostics = out.notes;
    if out.accepted {
        result.accepted.push(test);
    } else {
        result.rejected.push(test);
    }
    Ok(result)
}

/// Recursive AMOC detection, partitioning at each accepted change point for up
/// to `max_depth` rounds. `max_depth = 1` tests the full series and, after an
/// acceptance, each of the two resulting segments once.
pub fn binary_segmentation(
    series: &TimeSeries,
    config: LocatorConfig,
    boot: &BootstrapConfig,
    max_depth: usize,
    rng: RngSpec,
) -> Result<SignificanceResult> {
    config.validate()?;
    boot.validate()?;
    if max_depth == 0 {
        return Err(ParcsError::Config("max_depth must be at least 1".into()));
    }
    let values = series.values();
    let mut result = SignificanceResult::default();
    // (offset, len, remaining partitioning rounds)
    let mut queue = VecDeque::from([(0usize, values.len(), max_depth)]);
    let mut rank = 0;
    let mut top_level = true;
    while let Some((offset, len, depth)) = queue.pop_front() {
        let segment = &values[offset..offset + len];
        let floor = boot.segment_floor();
        if len < floor {
            result.diagnostics.push(format!(
                "segment [{}, {}] of length {len} skipped (minimum {floor})",
                offset + 1,
                offset + len
            ));
            continue;
        }
        let seg_rng = rng.keyed(&[offset as u64, len as u64]);
        let out = amoc_test(segment, config.gamma, boot, seg_rng)?;
        if len < boot.segment_floor_for(out.block) {
            result.diagnostics.push(format!(
                "segment [{}, {}] of length {len} skipped (block size {} needs {})",
                offset + 1,
                offset + len,
                out.block,
                boot.segment_floor_for(out.block)
            ));
            continue;
        }
        if top_level {
            result.estimated_q = out.q;
            result.block_size = out.block;
            top_level = false;
        }
        result.diagnostics.extend(
            out.notes
                .iter()
                .map(|n| format!("segment [{}, {}]: {n}", offset + 1, offset + len)),
        );
        rank += 1;
        let test = CpTest {
            location: offset + out.c_hat,
            rank,
            statistic: out.statistic,
            threshold: out.threshold,
            p_value: out.p_value,
            step_weights: vec![out.weight],
        };
        if out.accepted {
            result.accepted.push(test);
            if depth > 0 {
                queue.push_back((offset, out.c_hat, depth - 1));
                queue.push_back((offset + out.c_hat, len - out.c_hat, depth - 1));
            }
        } else {
            result.rejected.push(test);
        }
    }
    Ok(result)
}
