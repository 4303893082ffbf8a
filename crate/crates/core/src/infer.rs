// SPDX-License-Identifier: MIT OR Apache-2.0

//! Significance testing: MA order identification, block-permutation
//! bootstrap, empirical distribution functions and the rank-ordered change
//! point test for fitted PARCS models.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cusum::{cusum_transform, CusumCurve};
use crate::error::{ParcsError, Result};
use crate::linalg::MinNormSolver;
use crate::parcs::{curves_of, fit_coefficients, paired_design, ParcsModel};
use crate::rng::RngSpec;
use crate::series::{autocorrelation, mean_of, MultiSeries, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockSize {
    /// `k = q + 1` with `q` estimated from the H0 series.
    Auto,
    Fixed(usize),
}

impl std::str::FromStr for BlockSize {
    type Err = ParcsError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(BlockSize::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(BlockSize::Fixed(k)),
            _ => Err(ParcsError::Config(format!("block size must be 'auto' or a positive integer, got '{s}'"))),
        }
    }
}

impl std::fmt::Display for BlockSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BlockSize::Auto => f.write_str("auto"),
            BlockSize::Fixed(k) => write!(f, "{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Number of permutations `B`.
    pub permutations: usize,
    pub alpha: f64,
    pub block_size: BlockSize,
    /// Upper bound `Q` on the MA order.
    pub ma_upper_bound: usize,
    /// Level of the autocorrelation test used to pick the MA order.
    pub ma_alpha: f64,
    /// Use one block order for all covariates instead of one per covariate.
    pub shared_permutation: bool,
    /// Minimum number of blocks for a PARCS or AMOC test.
    pub min_blocks: usize,
    /// Binary-segmentation segments shorter than `max(3, factor * k)` are skipped.
    pub segment_block_factor: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            permutations: 10_000,
            alpha: 0.05,
            block_size: BlockSize::Auto,
            ma_upper_bound: 9,
            ma_alpha: 0.05,
            shared_permutation: false,
            min_blocks: 5,
            segment_block_factor: 2,
        }
    }
}

impl BootstrapConfig {
    pub const MIN_PERMUTATIONS: usize = 100;

    pub fn new(permutations: usize, alpha: f64) -> Result<Self> {
        let c = Self {
            permutations,
            alpha,
            ..Self::default()
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.permutations < Self::MIN_PERMUTATIONS {
            return Err(ParcsError::Config(format!(
                "bootstrap needs at least {} permutations, got {}",
                Self::MIN_PERMUTATIONS,
                self.permutations
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ParcsError::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.alpha * (self.permutations as f64) < 1.0 {
            return Err(ParcsError::Config(format!(
                "alpha={} is not resolvable with B={} permutations",
                self.alpha, self.permutations
            )));
        }
        if let BlockSize::Fixed(0) = self.block_size {
            return Err(ParcsError::Config("block size must be at least 1".into()));
        }
        if self.ma_upper_bound == 0 {
            return Err(ParcsError::Config("MA order upper bound must be at least 1".into()));
        }
        if !(self.ma_alpha > 0.0 && self.ma_alpha < 1.0) {
            return Err(ParcsError::Config(format!(
                "MA test level must lie in (0, 1), got {}",
                self.ma_alpha
            )));
        }
        if self.min_blocks == 0 {
            return Err(ParcsError::Config("minimum block count must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn check_feasible(&self, len: usize, k: usize) -> Result<()> {
        let n = block_count(len, k);
        if k > len || n < self.min_blocks {
            return Err(ParcsError::InfeasibleBlocks(format!(
                "block size {k} splits T={len} into {n} blocks; at least {} blocks need T >= {}",
                self.min_blocks,
                (self.min_blocks - 1) * k + 1
            )));
        }
        Ok(())
    }

    pub(crate) fn segment_floor_for(&self, k: usize) -> usize {
        (self.segment_block_factor * k).max(3)
    }

    pub(crate) fn segment_floor(&self) -> usize {
        match self.block_size {
            BlockSize::Fixed(k) => self.segment_floor_for(k),
            BlockSize::Auto => 3,
        }
    }
}

/// Empirical distribution of bootstrap statistics, stored sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct Edf {
    samples: Vec<f64>,
}

impl Edf {
    pub fn new(mut samples: Vec<f64>) -> Self {
        samples.sort_by(f64::total_cmp);
        Self { samples }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Empirical `(1 - alpha)` quantile: the ascending order statistic at rank
    /// `ceil((1 - alpha) B)`. `alpha = 1` yields negative infinity.
    pub fn inverse(&self, alpha: f64) -> Result<f64> {
        let b = self.samples.len();
        if b == 0 {
            return Err(ParcsError::Config("empty bootstrap distribution".into()));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(ParcsError::Config(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if alpha * (b as f64) < 1.0 {
            return Err(ParcsError::Config(format!(
                "alpha={alpha} is not resolvable with B={b} samples"
            )));
        }
        // The small offset absorbs representation error in (1 - alpha) * B.
        let rank = ((1.0 - alpha) * b as f64 - 1e-9).ceil().max(0.0) as usize;
        if rank == 0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.samples[rank - 1])
    }

    /// Add-one bootstrap p-value `(1 + #{S_i >= s}) / (B + 1)`.
    pub fn p_value(&self, s: f64) -> f64 {
        let below = self.samples.partition_point(|v| *v < s);
        let at_or_above = self.samples.len() - below;
        (1 + at_or_above) as f64 / (self.samples.len() + 1) as f64
    }
}

pub fn edf_inverse(edf: &Edf, alpha: f64) -> Result<f64> {
    edf.inverse(alpha)
}

/// Outcome of testing one candidate change point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpTest {
    pub location: usize,
    pub rank: usize,
    pub statistic: f64,
    pub threshold: f64,
    pub p_value: f64,
    /// Estimated signed jump per covariate.
    pub step_weights: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub accepted: Vec<CpTest>,
    pub rejected: Vec<CpTest>,
    /// MA order used for the block size, when it was estimated.
    pub estimated_q: Option<usize>,
    pub block_size: usize,
    pub reconstructed_model: Option<ParcsModel>,
    pub diagnostics: Vec<String>,
}

impl SignificanceResult {
    pub fn accepted_locations(&self) -> Vec<usize> {
        self.accepted.iter().map(|t| t.location).collect()
    }
}

/// Statistics at or below this fraction of the data scale count as zero, so
/// exact fits never pass a test through rounding residue.
const NEGLIGIBLE: f64 = 1e-9;

pub(crate) fn negligible(stat: f64, scale: f64) -> bool {
    stat <= NEGLIGIBLE * scale
}

/// H0-conform series: the model fit is removed from the CUSUM curve of
/// response `response`, which is then inverted with `y_0 = 0`.
pub fn h0_series(curve: &CusumCurve, model: &ParcsModel, response: usize) -> Result<TimeSeries> {
    if curve.len() != model.len || response >= model.responses() {
        return Err(ParcsError::InvalidInput(
            "model does not match the curve it is applied to".into(),
        ));
    }
    let fit = model.fitted(response);
    let mut prev = 0.0;
    let values = curve
        .y()
        .iter()
        .zip(&fit)
        .map(|(y, f)| {
            let r = y - f;
            let x = r - prev + curve.source_mean();
            prev = r;
            x
        })
        .collect();
    TimeSeries::new(values)
}

/// MA order: `tau - 1` for the first lag `tau` whose autocorrelation falls in
/// the central `1 - alpha` interval of `N(-1/(T - tau), 1/(T - tau))`, or
/// `Q` when every lag up to `Q` rejects.
pub fn estimate_ma_order(x0: &TimeSeries, upper: usize, alpha: f64) -> Result<usize> {
    if upper == 0 {
        return Err(ParcsError::Config("MA order upper bound must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ParcsError::Config(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let len = x0.len();
    let max_lag = upper.min(len - 2);
    for tau in 1..=max_lag {
        let r = autocorrelation(x0, tau)?;
        let dof = (len - tau) as f64;
        let law = Normal::new(-1.0 / dof, (1.0 / dof).sqrt())
            .map_err(|e| ParcsError::Internal(e.to_string()))?;
        let lo = law.inverse_cdf(alpha / 2.0);
        let hi = law.inverse_cdf(1.0 - alpha / 2.0);
        if (lo..=hi).contains(&r) {
            return Ok(tau - 1);
        }
    }
    Ok(upper)
}

pub(crate) fn block_count(len: usize, k: usize) -> usize {
    len.div_ceil(k)
}

/// Uniformly random order of `n_blocks` blocks.
pub(crate) fn block_order<R: Rng>(n_blocks: usize, rng: &mut R) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n_blocks).collect();
    order.shuffle(rng);
    order
}

/// Writes the blocks of `src` (length `k`, trailing remainder block kept) in
/// `order` into `out`.
pub(crate) fn permute_into(src: &[f64], k: usize, order: &[usize], out: &mut [f64]) {
    let mut pos = 0;
    for &b in order {
        let start = b * k;
        let end = (start + k).min(src.len());
        out[pos..pos + end - start].copy_from_slice(&src[start..end]);
        pos += end - start;
    }
}

/// Concatenates the length-`k` blocks of `x0` in a uniformly random order.
pub fn block_permute(x0: &TimeSeries, k: usize, rng: RngSpec) -> Result<TimeSeries> {
    let len = x0.len();
    if k == 0 || k > len {
        return Err(ParcsError::InvalidInput(format!("block size must lie in 1..={len}, got {k}")));
    }
    let order = block_order(block_count(len, k), &mut rng.generator());
    let mut out = vec![0.0; len];
    permute_into(x0.values(), k, &order, &mut out);
    Ok(TimeSeries::from_trusted(out))
}

/// Stream key for permutation `i` of tested change point `m`, covariate `n`.
pub(crate) fn permutation_stream(rng: RngSpec, m: usize, i: usize, n: Option<usize>) -> RngSpec {
    match n {
        Some(n) => rng.keyed(&[m as u64, i as u64, n as u64]),
        None => rng.keyed(&[m as u64, i as u64]),
    }
}

/// Bending of the first knot of `knots` as a linear functional of the source
/// series: `S(x) = u . x - mean(x) * sum(u)`.
struct BendingFunctional {
    u: Vec<f64>,
    u_sum: f64,
}

impl BendingFunctional {
    fn new(knots: &[usize], len: usize) -> Self {
        let solver = MinNormSolver::new(paired_design(knots, len));
        let plus = solver.coefficient_functional(1);
        let minus = solver.coefficient_functional(2);
        let g: Vec<f64> = plus.iter().zip(&minus).map(|(a, b)| a + b).collect();
        // y = C (x - mean), C lower-triangular ones, so g.y = (C^T g).(x - mean).
        let mut u = vec![0.0; len];
        let mut acc = 0.0;
        for t in (0..len).rev() {
            acc += g[t];
            u[t] = acc;
        }
        let u_sum = u.iter().sum();
        Self { u, u_sum }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let ux: f64 = self.u.iter().zip(x).map(|(a, b)| a * b).sum();
        ux - mean_of(x) * self.u_sum
    }
}

/// Residual curves after a least-squares fit on the spline pairs of `knots`.
fn regress_out(curves: &[CusumCurve], knots: &[usize]) -> Result<Vec<CusumCurve>> {
    let fit = fit_coefficients(curves, knots)?;
    Ok(curves
        .iter()
        .enumerate()
        .map(|(n, c)| {
            let r = c.y().iter().zip(fit.fitted(n)).map(|(y, f)| y - f).collect();
            CusumCurve::from_parts(r, c.source_mean())
        })
        .collect())
}

fn resolve_block_size(
    x0: &[TimeSeries],
    boot: &BootstrapConfig,
    diagnostics: &mut Vec<String>,
) -> Result<(usize, Option<usize>)> {
    match boot.block_size {
        BlockSize::Fixed(k) => Ok((k, None)),
        BlockSize::Auto => {
            let mut q = 0;
            for (n, x) in x0.iter().enumerate() {
                match estimate_ma_order(x, boot.ma_upper_bound, boot.ma_alpha) {
                    Ok(qn) => q = q.max(qn),
                    Err(ParcsError::NoVariance) => diagnostics.push(format!(
                        "H0 series of covariate {} has no variance; MA order taken as 0",
                        n + 1
                    )),
                    Err(e) => return Err(e),
                }
            }
            Ok((q + 1, Some(q)))
        }
    }
}

/// Rank-ordered bootstrap test of every knot of `model`.
pub fn parcs_significance_test(
    series: &MultiSeries,
    model: &ParcsModel,
    boot: &BootstrapConfig,
    rng: RngSpec,
) -> Result<SignificanceResult> {
    significance_test_prefix(series, model, boot, rng, usize::MAX)
}

/// As [`parcs_significance_test`], stopping after the first `limit` knots.
pub fn significance_test_prefix(
    series: &MultiSeries,
    model: &ParcsModel,
    boot: &BootstrapConfig,
    rng: RngSpec,
    limit: usize,
) -> Result<SignificanceResult> {
    boot.validate()?;
    let len = series.len();
    if model.len != len || model.responses() != series.covariates() {
        return Err(ParcsError::InvalidInput(
            "model was not fitted on this series".into(),
        ));
    }
    let curves = curves_of(series);
    let mut diagnostics = Vec::new();
    let x0: Vec<TimeSeries> = curves
        .iter()
        .enumerate()
        .map(|(n, c)| h0_series(c, model, n))
        .collect::<Result<_>>()?;
    let (block, q) = resolve_block_size(&x0, boot, &mut diagnostics)?;
    boot.check_feasible(len, block)?;
    let n_blocks = block_count(len, block);
    let scale = series
        .columns()
        .iter()
        .flat_map(|c| c.values())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let ranked = &model.ranked_knots;
    let n_cov = series.covariates();

    let mut accepted: Vec<CpTest> = Vec::new();
    let mut rejected: Vec<CpTest> = Vec::new();
    for m in 0..ranked.len().min(limit) {
        let remaining = &ranked[m..];
        let kept: Vec<usize> = accepted.iter().map(|t| t.location).collect();
        let residual = regress_out(&curves, &kept)?;
        let observed = fit_coefficients(&residual, remaining)?;
        let statistic = observed.bending_statistic(1)?;
        let step_weights = observed.step_weights(1);

        let functional = BendingFunctional::new(remaining, len);
        let samples: Vec<f64> = (0..boot.permutations)
            .into_par_iter()
            .map(|i| {
                let mut buf = vec![0.0; len];
                let mut shared = None;
                let mut total = 0.0;
                for (n, x) in x0.iter().enumerate() {
                    let order = if boot.shared_permutation {
                        shared
                            .get_or_insert_with(|| {
                                block_order(n_blocks, &mut permutation_stream(rng, m, i, None).generator())
                            })
                            .clone()
                    } else {
                        block_order(n_blocks, &mut permutation_stream(rng, m, i, Some(n)).generator())
                    };
                    permute_into(x.values(), block, &order, &mut buf);
                    total += functional.eval(&buf).abs();
                }
                total / n_cov as f64
            })
            .collect();
        let edf = Edf::new(samples);
        let threshold = edf.inverse(boot.alpha)?;
        let p_value = edf.p_value(statistic);
        let zero = negligible(statistic, scale);
        if zero {
            diagnostics.push(format!("bending at knot {} is numerically zero", ranked[m]));
        }
        let test = CpTest {
            location: ranked[m],
            rank: m + 1,
            statistic,
            threshold,
            p_value,
            step_weights,
        };
        if statistic >= threshold && !zero {
            accepted.push(test);
        } else {
            rejected.push(test);
        }
    }

    let kept: Vec<usize> = accepted.iter().map(|t| t.location).collect();
    let reconstructed = fit_coefficients(&curves, &kept)?;
    for (r, t) in accepted.iter_mut().enumerate() {
        t.step_weights = reconstructed.step_weights(r + 1);
    }
    diagnostics.extend(reconstructed.diagnostics.iter().cloned());
    Ok(SignificanceResult {
        accepted,
        rejected,
        estimated_q: q,
        block_size: block,
        reconstructed_model: Some(reconstructed),
        diagnostics,
    })
}

/// Bootstrap statistic of permutation `i` for tested knot `m`, computed by an
/// explicit CUSUM transform and refit. Reference path for the functional form.
pub fn bootstrap_statistic_by_refit(
    x0: &[TimeSeries],
    remaining: &[usize],
    block: usize,
    rng: RngSpec,
    m: usize,
    i: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for (n, x) in x0.iter().enumerate() {
        let permuted = block_permute(x, block, permutation_stream(rng, m, i, Some(n)))?;
        let curve = cusum_transform(&permuted);
        let model = fit_coefficients(std::slice::from_ref(&curve), remaining)?;
        total += model.bending_statistic(1)?;
    }
    Ok(total / x0.len() as f64)
}
