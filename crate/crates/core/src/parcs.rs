// SPDX-License-Identifier: MIT OR Apache-2.0

//! Paired piecewise-linear spline models of CUSUM curves.
//!
//! A knot `c` contributes the pair `h+_t = (t - c)_+` and `h-_t = (c - t)_+`.
//! The slope change of the fitted curve at `c` is `beta+ + beta-`, which is the
//! estimated jump of the underlying mean at that change point.
//!
//! Knot selection runs in three greedy stages (forward addition, pruning and
//! ranking). Candidate scoring only needs residual sums of squares, so it works
//! on the full-rank basis `{1, t, (t - c)_+}` spanning the same column space as
//! the paired design; final coefficients always come from a from-scratch
//! minimum-norm fit of the paired design.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cusum::{cusum_transform, CusumCurve};
use crate::error::{ParcsError, Result};
use crate::linalg::{deflate, dot, MinNormSolver, OrthoBasis};
use crate::series::{MultiSeries, TimeSeries};

/// Sorted set of distinct interior knots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnotSet(Vec<usize>);

impl KnotSet {
    pub fn new(mut knots: Vec<usize>, len: usize) -> Result<Self> {
        knots.sort_unstable();
        for w in knots.windows(2) {
            if w[0] == w[1] {
                return Err(ParcsError::InvalidInput(format!("duplicate knot {}", w[0])));
            }
        }
        if let Some(c) = knots.iter().find(|&&c| !is_interior(c, len)) {
            return Err(ParcsError::InvalidInput(format!(
                "knot {c} outside interior range 2..={}",
                len.saturating_sub(1)
            )));
        }
        Ok(Self(knots))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, c: usize) -> bool {
        self.0.binary_search(&c).is_ok()
    }

    fn insert(&mut self, c: usize) {
        if let Err(pos) = self.0.binary_search(&c) {
            self.0.insert(pos, c);
        }
    }

    fn remove(&mut self, c: usize) {
        if let Ok(pos) = self.0.binary_search(&c) {
            self.0.remove(pos);
        }
    }

    fn without(&self, c: usize) -> Vec<usize> {
        self.0.iter().copied().filter(|&k| k != c).collect()
    }
}

fn is_interior(c: usize, len: usize) -> bool {
    c >= 2 && c < len
}

/// Evaluates the spline pair centred at knot `c` on `t = 1..=len`.
pub fn spline_pair(c: usize, len: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !is_interior(c, len) {
        return Err(ParcsError::InvalidInput(format!(
            "knot {c} outside interior range 2..={}",
            len.saturating_sub(1)
        )));
    }
    Ok((hinge_plus(c, len), hinge_minus(c, len)))
}

fn hinge_plus(c: usize, len: usize) -> Vec<f64> {
    (1..=len).map(|t| if t > c { (t - c) as f64 } else { 0.0 }).collect()
}

fn hinge_minus(c: usize, len: usize) -> Vec<f64> {
    (1..=len).map(|t| if t < c { (c - t) as f64 } else { 0.0 }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplinePair {
    pub plus: f64,
    pub minus: f64,
}

impl SplinePair {
    /// Signed slope change at the knot.
    pub fn bending(&self) -> f64 {
        self.plus + self.minus
    }
}

/// Fitted multi-response PARCS model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParcsModel {
    /// Knots in rank order (most explained variance first).
    pub ranked_knots: Vec<usize>,
    /// `beta_0` per response.
    pub intercepts: Vec<f64>,
    /// `coeffs[n][m]` is the spline pair of knot `ranked_knots[m]` for response `n`.
    pub coeffs: Vec<Vec<SplinePair>>,
    /// Mean of each source series, retained so fits can be mapped back to levels.
    pub source_means: Vec<f64>,
    /// Residual mean-square error averaged over responses.
    pub mse: f64,
    #[serde(rename = "T")]
    pub len: usize,
    /// Numerical rank of the paired design.
    pub design_rank: usize,
    /// Set when the design rank is below its column count; coefficients are
    /// then the minimum-norm solution.
    pub rank_deficient: bool,
    pub diagnostics: Vec<String>,
}

impl ParcsModel {
    pub fn order(&self) -> usize {
        self.ranked_knots.len()
    }

    pub fn responses(&self) -> usize {
        self.intercepts.len()
    }

    /// Fitted curve for response `n` on `t = 1..=T`.
    pub fn fitted(&self, n: usize) -> Vec<f64> {
        let mut y = vec![self.intercepts[n]; self.len];
        for (c, pair) in self.ranked_knots.iter().zip(&self.coeffs[n]) {
            for (i, yt) in y.iter_mut().enumerate() {
                let t = i + 1;
                if t > *c {
                    *yt += pair.plus * (t - c) as f64;
                } else if t < *c {
                    *yt += pair.minus * (c - t) as f64;
                }
            }
        }
        y
    }

    /// Bending statistic `|beta+ + beta-|` of the knot at 1-based `knot_rank`,
    /// averaged over responses.
    pub fn bending_statistic(&self, knot_rank: usize) -> Result<f64> {
        if knot_rank == 0 || knot_rank > self.order() {
            return Err(ParcsError::InvalidInput(format!(
                "knot rank {knot_rank} outside 1..={}",
                self.order()
            )));
        }
        let m = knot_rank - 1;
        let total: f64 = self.coeffs.iter().map(|row| row[m].bending().abs()).sum();
        Ok(total / self.responses() as f64)
    }

    /// Signed slope change per response at 1-based `knot_rank`.
    pub fn step_weights(&self, knot_rank: usize) -> Vec<f64> {
        self.coeffs.iter().map(|row| row[knot_rank - 1].bending()).collect()
    }
}

/// Free function form of [`ParcsModel::bending_statistic`].
pub fn bending_statistic(model: &ParcsModel, knot_rank: usize) -> Result<f64> {
    model.bending_statistic(knot_rank)
}

fn check_curves(curves: &[CusumCurve]) -> Result<usize> {
    let first = curves
        .first()
        .ok_or_else(|| ParcsError::InvalidInput("at least one response curve is required".into()))?;
    let len = first.len();
    if curves.iter().any(|c| c.len() != len) {
        return Err(ParcsError::InvalidInput("response curves differ in length".into()));
    }
    Ok(len)
}

/// Paired design `[1, h+_1, h-_1, h+_2, h-_2, ...]` for the given knot order.
pub(crate) fn paired_design(knots: &[usize], len: usize) -> DMatrix<f64> {
    let cols = 1 + 2 * knots.len();
    let mut x = DMatrix::zeros(len, cols);
    for i in 0..len {
        x[(i, 0)] = 1.0;
        let t = i + 1;
        for (m, &c) in knots.iter().enumerate() {
            if t > c {
                x[(i, 1 + 2 * m)] = (t - c) as f64;
            } else if t < c {
                x[(i, 2 + 2 * m)] = (c - t) as f64;
            }
        }
    }
    x
}

/// Least-squares intercept and spline-pair coefficients for `knots`, in the
/// given order, fitted independently per response.
pub fn fit_coefficients(curves: &[CusumCurve], knots: &[usize]) -> Result<ParcsModel> {
    let len = check_curves(curves)?;
    KnotSet::new(knots.to_vec(), len)?;
    if len <= 2 * knots.len() + 1 {
        return Err(ParcsError::InvalidInput(format!(
            "{} knots need more than {} time steps, got {}",
            knots.len(),
            2 * knots.len() + 1,
            len
        )));
    }
    let solver = MinNormSolver::new(paired_design(knots, len));
    let structural_rank = if knots.is_empty() { 1 } else { knots.len() + 2 };
    let mut diagnostics = Vec::new();
    if solver.rank() < structural_rank {
        diagnostics.push(format!(
            "design rank {} below expected {} for knots {:?}; using minimum-norm coefficients",
            solver.rank(),
            structural_rank,
            knots
        ));
    }
    let mut intercepts = Vec::with_capacity(curves.len());
    let mut coeffs = Vec::with_capacity(curves.len());
    let mut sse = 0.0;
    for curve in curves {
        let beta = solver.solve(curve.y());
        let fit = solver.fitted(&beta);
        sse += curve.y().iter().zip(&fit).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        intercepts.push(beta[0]);
        coeffs.push(
            (0..knots.len())
                .map(|m| SplinePair {
                    plus: beta[1 + 2 * m],
                    minus: beta[2 + 2 * m],
                })
                .collect(),
        );
    }
    Ok(ParcsModel {
        ranked_knots: knots.to_vec(),
        intercepts,
        coeffs,
        source_means: curves.iter().map(|c| c.source_mean()).collect(),
        mse: sse / (len * curves.len()) as f64,
        len,
        design_rank: solver.rank(),
        rank_deficient: solver.rank() < solver.columns(),
        diagnostics,
    })
}

/// Residual-sum-of-squares machinery shared by the selection stages.
struct Selector<'a> {
    curves: &'a [CusumCurve],
    len: usize,
}

impl<'a> Selector<'a> {
    fn new(curves: &'a [CusumCurve]) -> Result<Self> {
        let len = check_curves(curves)?;
        Ok(Self { curves, len })
    }

    fn scale(&self) -> f64 {
        (self.len * self.curves.len()) as f64
    }

    fn linear_column(&self) -> Vec<f64> {
        (1..=self.len).map(|t| t as f64).collect()
    }

    /// Full-rank basis for the span of the paired design with `knots`.
    fn basis_for(&self, knots: &[usize]) -> OrthoBasis {
        let mut basis = OrthoBasis::new();
        basis.push(&vec![1.0; self.len]);
        if !knots.is_empty() {
            basis.push(&self.linear_column());
            for &c in knots {
                basis.push(&hinge_plus(c, self.len));
            }
        }
        basis
    }

    /// From-scratch mean-square error (averaged over responses) for `knots`.
    fn mse(&self, knots: &[usize]) -> f64 {
        let basis = self.basis_for(knots);
        let sse: f64 = self
            .curves
            .iter()
            .map(|c| {
                let r = basis.residual(c.y());
                dot(&r, &r)
            })
            .sum();
        sse / self.scale()
    }

    /// Greedily adds `count` knots, returning each addition with the mse after it.
    fn forward(&self, count: usize) -> Vec<(usize, f64)> {
        let mut basis = self.basis_for(&[]);
        let mut residuals: Vec<Vec<f64>> = self.curves.iter().map(|c| basis.residual(c.y())).collect();
        let mut chosen = KnotSet::empty();
        let mut path = Vec::with_capacity(count);
        let linear = self.linear_column();
        for _ in 0..count {
            let mut best: Option<(usize, f64, Vec<Vec<f64>>)> = None;
            for c in 2..self.len {
                if chosen.contains(c) {
                    continue;
                }
                let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(2);
                let mut trial = basis.clone();
                if chosen.is_empty() && trial.push(&linear) {
                    dirs.push(trial_last(&trial));
                }
                if trial.push(&hinge_plus(c, self.len)) {
                    dirs.push(trial_last(&trial));
                }
                let sse: f64 = residuals
                    .iter()
                    .map(|r| {
                        let d = deflate(r, &dirs);
                        dot(&d, &d)
                    })
                    .sum();
                let mse = sse / self.scale();
                if best.as_ref().is_none_or(|(_, b, _)| mse < *b) {
                    best = Some((c, mse, dirs));
                }
            }
            let Some((c, mse, dirs)) = best else { break };
            for d in &dirs {
                basis.push(d);
            }
            residuals = residuals.iter().map(|r| deflate(r, &dirs)).collect();
            chosen.insert(c);
            path.push((c, mse));
        }
        path
    }

    /// Greedily removes knots until `target` remain, returning each removal
    /// with the mse after it.
    fn backward(&self, knots: &KnotSet, target: usize) -> Vec<(usize, f64)> {
        let mut current = knots.clone();
        let mut path = Vec::new();
        while current.len() > target {
            let mut best: Option<(usize, f64)> = None;
            for &c in current.as_slice() {
                let mse = self.mse(&current.without(c));
                if best.is_none_or(|(_, b)| mse < b) {
                    best = Some((c, mse));
                }
            }
            let (c, mse) = best.expect("non-empty knot set");
            current.remove(c);
            path.push((c, mse));
        }
        path
    }
}

fn trial_last(basis: &OrthoBasis) -> Vec<f64> {
    basis.last().expect("direction was just pushed").to_vec()
}

/// Knots added by a forward sweep of `count` steps, with the mse after each.
pub fn forward_path(curves: &[CusumCurve], count: usize) -> Result<Vec<(usize, f64)>> {
    let selector = Selector::new(curves)?;
    check_forward_size(count, selector.len)?;
    Ok(selector.forward(count))
}

fn check_forward_size(count: usize, len: usize) -> Result<()> {
    if count == 0 {
        return Err(ParcsError::Config("forward bound L must be at least 1".into()));
    }
    if count > len.saturating_sub(2) {
        return Err(ParcsError::Config(format!(
            "forward bound L={count} exceeds the {} interior knots of a series of length {len}",
            len.saturating_sub(2)
        )));
    }
    Ok(())
}

/// Forward stage: greedily adds the knot that lowers mse most, `count` times.
pub fn forward_stage(curves: &[CusumCurve], count: usize) -> Result<KnotSet> {
    let path = forward_path(curves, count)?;
    let len = curves[0].len();
    KnotSet::new(path.into_iter().map(|(c, _)| c).collect(), len)
}

/// Knots removed by pruning down to `target`, with the mse after each removal.
pub fn pruning_path(curves: &[CusumCurve], knots: &KnotSet, target: usize) -> Result<Vec<(usize, f64)>> {
    let selector = Selector::new(curves)?;
    if target > knots.len() {
        return Err(ParcsError::Config(format!(
            "cannot prune {} knots up to {target}",
            knots.len()
        )));
    }
    Ok(selector.backward(knots, target))
}

/// Pruning stage: greedily drops the knot whose removal raises mse least.
pub fn pruning_stage(curves: &[CusumCurve], knots: &KnotSet, target: usize) -> Result<KnotSet> {
    let removed = pruning_path(curves, knots, target)?;
    let mut kept = knots.clone();
    for (c, _) in removed {
        kept.remove(c);
    }
    Ok(kept)
}

/// Ranking stage: orders knots by explained variance, most first.
pub fn ranking_stage(curves: &[CusumCurve], knots: &KnotSet) -> Result<Vec<usize>> {
    let removed = pruning_path(curves, knots, 0)?;
    Ok(removed.into_iter().rev().map(|(c, _)| c).collect())
}

/// Default forward bound for a target order `m`.
pub fn default_forward_bound(m: usize) -> usize {
    (5 * m).div_ceil(2)
}

/// CUSUM curves of every covariate.
pub fn curves_of(series: &MultiSeries) -> Vec<CusumCurve> {
    series.columns().iter().map(cusum_transform).collect()
}

/// Fits the order-`m` model: forward sweep to `forward` knots (default
/// `ceil(2.5 m)`), pruning to `m`, ranking and a final coefficient fit.
pub fn fit_parcs(series: &MultiSeries, m: usize, forward: Option<usize>) -> Result<ParcsModel> {
    fit_parcs_curves(&curves_of(series), m, forward)
}

pub fn fit_parcs_curves(curves: &[CusumCurve], m: usize, forward: Option<usize>) -> Result<ParcsModel> {
    if m == 0 {
        return Err(ParcsError::Config("model order M must be at least 1".into()));
    }
    let l = forward.unwrap_or_else(|| default_forward_bound(m));
    if l < m {
        return Err(ParcsError::Config(format!("forward bound L={l} is below M={m}")));
    }
    let len = check_curves(curves)?;
    check_forward_size(l, len)?;
    if len <= 2 * m + 1 {
        return Err(ParcsError::Config(format!(
            "order M={m} needs more than {} time steps, got {len}",
            2 * m + 1
        )));
    }
    let candidates = forward_stage(curves, l)?;
    let pruned = pruning_stage(curves, &candidates, m)?;
    let ranked = ranking_stage(curves, &pruned)?;
    fit_coefficients(curves, &ranked)
}

/// Piecewise-constant mean implied by the model, per response.
pub fn reconstruct_step_estimate(model: &ParcsModel) -> MultiSeries {
    let columns = (0..model.responses())
        .map(|n| {
            // The fitted curve extended to t = 0, where every h+ vanishes.
            let mut prev = model.intercepts[n]
                + model.coeffs[n]
                    .iter()
                    .zip(&model.ranked_knots)
                    .map(|(p, c)| p.minus * *c as f64)
                    .sum::<f64>();
            let values = model
                .fitted(n)
                .into_iter()
                .map(|y| {
                    let x = y - prev + model.source_means[n];
                    prev = y;
                    x
                })
                .collect();
            TimeSeries::from_trusted(values)
        })
        .collect::<Vec<TimeSeries>>();
    MultiSeries::new(columns).expect("responses share the model length")
}
