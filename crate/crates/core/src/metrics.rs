// SPDX-License-Identifier: MIT OR Apache-2.0

//! Evaluation measures over ensembles of detection outcomes.

use serde::{Deserialize, Serialize};

use crate::error::{ParcsError, Result};
use crate::synth::StepModelSpec;

/// Detections of one realisation together with the change points it was
/// generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    /// True change points with a nonzero jump in at least one covariate.
    pub truth: Vec<usize>,
    pub len: usize,
    pub detected: Vec<usize>,
}

impl DetectionOutcome {
    pub fn new(truth: Vec<usize>, len: usize, detected: Vec<usize>) -> Self {
        Self { truth, len, detected }
    }

    pub fn from_spec(spec: &StepModelSpec, detected: Vec<usize>) -> Self {
        Self::new(spec.effective_cps(), spec.len, detected)
    }

    pub fn any_detection(&self) -> bool {
        !self.detected.is_empty()
    }

    pub fn detection_count(&self) -> usize {
        self.detected.len()
    }
}

/// Half-width `round(0.05 T)` of the window in which a detection matches a
/// true change point.
pub fn default_window(len: usize) -> usize {
    (0.05 * len as f64).round() as usize
}

/// Signed displacement of `c_hat` from `c` towards the series centre.
pub fn centre_bias(c: usize, c_hat: usize, len: usize) -> f64 {
    let sign = if c as f64 - len as f64 / 2.0 > 0.0 { 1.0 } else { -1.0 };
    sign * (c as f64 - c_hat as f64)
}

/// One-to-one matching of detections to true change points, closest pairs
/// first. Entry `j` holds the index of the detection matched to `truth[j]`.
pub fn match_detections(truth: &[usize], detected: &[usize], window: usize) -> Vec<Option<usize>> {
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (j, &c) in truth.iter().enumerate() {
        for (i, &d) in detected.iter().enumerate() {
            let dist = c.abs_diff(d);
            if dist <= window {
                pairs.push((dist, j, i));
            }
        }
    }
    pairs.sort_unstable();
    let mut matched = vec![None; truth.len()];
    let mut used = vec![false; detected.len()];
    for (_, j, i) in pairs {
        if matched[j].is_none() && !used[i] {
            matched[j] = Some(i);
            used[i] = true;
        }
    }
    matched
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub type1: f64,
    pub type2: f64,
}

/// How detections are counted as errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateDefinition {
    /// Type I: more detections than true change points. Type II: fewer
    /// detections than true change points, per true change point.
    #[default]
    Count,
    /// Detections are matched one-to-one to true change points within the
    /// window. Type I: any unmatched detection. Type II: unmatched true
    /// change points.
    Windowed,
}

impl std::str::FromStr for RateDefinition {
    type Err = ParcsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "count" => Ok(Self::Count),
            "windowed" => Ok(Self::Windowed),
            _ => Err(ParcsError::Config(format!("unknown rate definition '{s}' (expected count or windowed)"))),
        }
    }
}

/// Window and error-counting rule used to score an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scoring {
    pub window: usize,
    pub rates: RateDefinition,
}

impl Scoring {
    pub fn for_len(len: usize) -> Self {
        Self { window: default_window(len), rates: RateDefinition::default() }
    }

    pub fn windowed(window: usize) -> Self {
        Self { window, rates: RateDefinition::Windowed }
    }
}

/// Error rates of an ensemble under `scoring`.
pub fn error_rates(outcomes: &[DetectionOutcome], scoring: Scoring) -> Result<ErrorRates> {
    if outcomes.is_empty() {
        return Err(ParcsError::InvalidInput("no outcomes to score".into()));
    }
    let mut false_runs = 0usize;
    let mut misses = 0usize;
    let mut total = 0usize;
    for o in outcomes {
        let hits = match scoring.rates {
            RateDefinition::Windowed => match_detections(&o.truth, &o.detected, scoring.window)
                .iter()
                .flatten()
                .count(),
            RateDefinition::Count => o.detected.len().min(o.truth.len()),
        };
        misses += o.truth.len() - hits;
        total += o.truth.len();
        if o.detected.len() > hits {
            false_runs += 1;
        }
    }
    Ok(ErrorRates {
        type1: false_runs as f64 / outcomes.len() as f64,
        type2: if total == 0 { 0.0 } else { misses as f64 / total as f64 },
    })
}

/// Share of realisations with a detection within the scoring window of `c`,
/// less the empirical type I rate divided by `m`.
pub fn accuracy_score(outcomes: &[DetectionOutcome], c: usize, scoring: Scoring, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(ParcsError::InvalidInput("accuracy needs at least one true change point".into()));
    }
    let rates = error_rates(outcomes, scoring)?;
    Ok(detection_rate(outcomes, c, scoring.window) - rates.type1 / m as f64)
}

/// Share of realisations with any detection within `window` of `c`.
pub fn detection_rate(outcomes: &[DetectionOutcome], c: usize, window: usize) -> f64 {
    let hits = outcomes
        .iter()
        .filter(|o| o.detected.iter().any(|d| d.abs_diff(c) <= window))
        .count();
    hits as f64 / outcomes.len().max(1) as f64
}

/// Centre bias of the detection nearest to `c` in every realisation with at
/// least one detection.
pub fn centre_bias_samples(outcomes: &[DetectionOutcome], c: usize) -> Vec<f64> {
    outcomes
        .iter()
        .filter_map(|o| {
            o.detected
                .iter()
                .min_by_key(|d| (d.abs_diff(c), **d))
                .map(|d| centre_bias(c, *d, o.len))
        })
        .collect()
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub alpha: f64,
    pub false_discovery: f64,
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpPoint {
    pub alpha: f64,
    /// `1 - alpha`.
    pub nominal: f64,
    /// `1 - alpha_hat`, the empirical H0 acceptance rate.
    pub factual: f64,
}

/// Outcomes of one nominal level on a pure-noise ensemble and a signal ensemble.
#[derive(Debug, Clone)]
pub struct LevelOutcomes {
    pub alpha: f64,
    pub noise: Vec<DetectionOutcome>,
    pub signal: Vec<DetectionOutcome>,
}

/// Type I rate on noise against power on signal, one point per level, sorted
/// by level.
pub fn roc_curve(levels: &[LevelOutcomes], scoring: Scoring) -> Result<Vec<RocPoint>> {
    let mut points = levels
        .iter()
        .map(|l| {
            Ok(RocPoint {
                alpha: l.alpha,
                false_discovery: error_rates(&l.noise, scoring)?.type1,
                power: 1.0 - error_rates(&l.signal, scoring)?.type2,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    Ok(points)
}

/// Nominal against empirical H0 acceptance on pure-noise ensembles given as
/// `(alpha, outcomes)`, sorted by level.
pub fn pp_curve(levels: &[(f64, Vec<DetectionOutcome>)]) -> Result<Vec<PpPoint>> {
    let mut points = levels
        .iter()
        .map(|(alpha, noise)| {
            if noise.is_empty() {
                return Err(ParcsError::InvalidInput("no outcomes to score".into()));
            }
            let rejected = noise.iter().filter(|o| o.any_detection()).count();
            Ok(PpPoint {
                alpha: *alpha,
                nominal: 1.0 - alpha,
                factual: 1.0 - rejected as f64 / noise.len() as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    Ok(points)
}

/// Summary of one method on one condition at one nominal level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub condition: String,
    pub method: String,
    pub alpha_nominal: f64,
    pub realisations: usize,
    pub type1: f64,
    pub type2: f64,
    /// Accuracy per true change point, in ascending location order.
    pub accuracy: Vec<f64>,
    pub cb_mean: Option<f64>,
    pub cb_median: Option<f64>,
    pub centre_bias: Vec<f64>,
}

impl MetricReport {
    pub fn score(
        condition: &str,
        method: &str,
        alpha: f64,
        outcomes: &[DetectionOutcome],
        scoring: Scoring,
    ) -> Result<Self> {
        let rates = error_rates(outcomes, scoring)?;
        let mut truth = outcomes[0].truth.clone();
        truth.sort_unstable();
        let accuracy = truth
            .iter()
            .map(|c| accuracy_score(outcomes, *c, scoring, truth.len()))
            .collect::<Result<Vec<_>>>()?;
        let cb: Vec<f64> = truth.iter().flat_map(|c| centre_bias_samples(outcomes, *c)).collect();
        Ok(Self {
            condition: condition.to_string(),
            method: method.to_string(),
            alpha_nominal: alpha,
            realisations: outcomes.len(),
            type1: rates.type1,
            type2: rates.type2,
            accuracy,
            cb_mean: mean(&cb),
            cb_median: median(&cb),
            centre_bias: cb,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn out(truth: &[usize], detected: &[usize]) -> DetectionOutcome {
        DetectionOutcome::new(truth.to_vec(), 100, detected.to_vec())
    }

    #[test]
    fn centre_bias_examples() {
        assert_eq!(centre_bias(20, 25, 100), 5.0);
        assert_eq!(centre_bias(80, 75, 100), 5.0);
        assert_eq!(centre_bias(20, 15, 100), -5.0);
        assert_eq!(centre_bias(33, 33, 100), 0.0);
        assert_eq!(centre_bias(50, 45, 100), -5.0);
    }

    proptest! {
        #[test]
        fn centre_bias_mirror(len in 3usize..500, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let c = 1 + (a * (len - 1) as f64) as usize;
            let d = 1 + (b * (len - 1) as f64) as usize;
            if 2 * c != len + 1 {
                prop_assert_eq!(centre_bias(c, d, len), centre_bias(len + 1 - c, len + 1 - d, len));
            }
        }

        #[test]
        fn matching_is_one_to_one(
            truth in prop::collection::vec(1usize..100, 0..5),
            det in prop::collection::vec(1usize..100, 0..6),
            w in 0usize..10,
        ) {
            let m = match_detections(&truth, &det, w);
            let hits: Vec<usize> = m.iter().flatten().copied().collect();
            let mut uniq = hits.clone();
            uniq.sort();
            uniq.dedup();
            prop_assert_eq!(uniq.len(), hits.len());
            prop_assert!(hits.len() <= truth.len().min(det.len()));
            for (j, i) in m.iter().enumerate() {
                if let Some(i) = i {
                    prop_assert!(truth[j].abs_diff(det[*i]) <= w);
                }
            }
        }

        #[test]
        fn rates_order_invariant(seed in any::<u64>()) {
            let mut v: Vec<DetectionOutcome> = (0..20)
                .map(|i| out(&[20, 60], &[(seed as usize + i * 7) % 99 + 1]))
                .collect();
            let a = error_rates(&v, Scoring::windowed(5)).unwrap();
            v.reverse();
            prop_assert_eq!(a, error_rates(&v, Scoring::windowed(5)).unwrap());
            prop_assert!((0.0..=1.0).contains(&a.type1) && (0.0..=1.0).contains(&a.type2));
        }
    }

    #[test]
    fn nearest_pairs_match_first() {
        assert_eq!(match_detections(&[20, 24], &[23], 5), vec![None, Some(0)]);
        assert_eq!(match_detections(&[20, 24], &[23, 19], 5), vec![Some(1), Some(0)]);
        assert_eq!(match_detections(&[20], &[26], 5), vec![None]);
    }

    #[test]
    fn error_rate_examples() {
        let exact = vec![out(&[20, 60], &[60, 20]); 10];
        assert_eq!(error_rates(&exact, Scoring::windowed(5)).unwrap(), ErrorRates { type1: 0.0, type2: 0.0 });
        // A displaced detection is a miss and a false discovery.
        let off = vec![out(&[20, 60], &[60, 30])];
        assert_eq!(error_rates(&off, Scoring::windowed(5)).unwrap(), ErrorRates { type1: 1.0, type2: 0.5 });
        let noise = vec![out(&[], &[]), out(&[], &[40])];
        assert_eq!(error_rates(&noise, Scoring::windowed(5)).unwrap(), ErrorRates { type1: 0.5, type2: 0.0 });
        assert!(error_rates(&[], Scoring::windowed(5)).is_err());
    }

    #[test]
    fn count_rates_ignore_location() {
        let c = Scoring { window: 5, rates: RateDefinition::Count };
        let off = vec![out(&[20, 60], &[60, 30])];
        assert_eq!(error_rates(&off, c).unwrap(), ErrorRates { type1: 0.0, type2: 0.0 });
        let v = vec![out(&[20, 60], &[60]), out(&[20, 60], &[20, 60, 90]), out(&[20, 60], &[])];
        let r = error_rates(&v, c).unwrap();
        assert!((r.type1 - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.type2 - 0.5).abs() < 1e-12);
        assert_eq!("count".parse::<RateDefinition>().unwrap(), RateDefinition::Count);
        assert!("nearest".parse::<RateDefinition>().is_err());
    }

    #[test]
    fn accuracy_examples() {
        let exact = vec![out(&[20, 60], &[20, 60]); 4];
        assert_eq!(accuracy_score(&exact, 20, Scoring::windowed(5), 2).unwrap(), 1.0);
        // 85 of 100 within range, 4 of them with a false discovery elsewhere.
        let mut v = Vec::new();
        for i in 0..100 {
            let mut d = vec![60];
            if i < 85 {
                d.push(21);
            }
            if i < 4 {
                d.push(90);
            }
            v.push(out(&[20, 60], &d));
        }
        let a = accuracy_score(&v, 20, Scoring::windowed(5), 2).unwrap();
        assert!((a - 0.83).abs() < 1e-12);
        assert!(a <= detection_rate(&v, 20, 5));
        assert!(accuracy_score(&[], 20, Scoring::windowed(5), 2).is_err());
        assert!(accuracy_score(&exact, 20, Scoring::windowed(5), 0).is_err());
    }

    #[test]
    fn roc_and_pp_limits() {
        let levels = vec![
            LevelOutcomes { alpha: 1.0, noise: vec![out(&[], &[3])], signal: vec![out(&[50], &[50])] },
            LevelOutcomes { alpha: 0.0, noise: vec![out(&[], &[])], signal: vec![out(&[50], &[])] },
        ];
        let roc = roc_curve(&levels, Scoring::windowed(5)).unwrap();
        assert_eq!((roc[0].false_discovery, roc[0].power), (0.0, 0.0));
        assert_eq!((roc[1].false_discovery, roc[1].power), (1.0, 1.0));
        let pp = pp_curve(&[(1.0, vec![out(&[], &[7])]), (0.05, vec![out(&[], &[])])]).unwrap();
        assert_eq!((pp[1].nominal, pp[1].factual), (0.0, 0.0));
        assert!((pp[0].nominal - 0.95).abs() < 1e-12 && pp[0].factual == 1.0);
    }

    #[test]
    fn report_fields() {
        let v = vec![out(&[20, 60], &[22, 60]), out(&[20, 60], &[60])];
        let r = MetricReport::score("two-cp-1", "parcs", 0.3, &v, Scoring::windowed(5)).unwrap();
        assert_eq!(r.accuracy, vec![0.5, 1.0]);
        assert_eq!(r.type2, 0.25);
        assert_eq!(r.centre_bias, vec![2.0, 40.0, 0.0, 0.0]);
        assert_eq!(r.cb_median, Some(1.0));
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(mean(&[]), None);
    }
}
