//! Anomaly scoring and the point-F1 / event-F1 evaluation protocol.
//!
//! Scores are the squared reconstruction error at the final position of
//! the window ending at each test step, so every point is scored exactly
//! once and only from data at or before it. Event-level evaluation treats
//! maximal runs of positives as single units, decoupling detection
//! quality from event duration.

use crate::data::{window_ending_at, zscore_normalize, DataError, TimeSeries};
use crate::model::{forward_fast, ModelConfig, ModelError, Mode, TShapeParams};
use crate::tensor::Tape;
use rayon::prelude::*;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("predictions and labels have different lengths ({pred} vs {labels})")]
    LengthMismatch { pred: usize, labels: usize },
    #[error("score at index {index} is not finite; parameters are untrained or diverged")]
    NonFiniteScore { index: usize },
    #[error("test region is empty")]
    EmptyTestRegion,
}

/// Per-time-point anomaly scores aligned to the test region.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSeries {
    pub scores: Vec<f64>,
    /// Absolute index of `scores[0]` in the source series.
    pub start_index: usize,
    /// Offset into `scores` of the first point whose window needed no
    /// left padding.
    pub valid_from: usize,
}

impl ScoreSeries {
    /// Render as `index,score` CSV with absolute indices.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,score\n");
        for (i, s) in self.scores.iter().enumerate() {
            let _ = writeln!(out, "{},{}", self.start_index + i, s);
        }
        out
    }
}

/// Score every test point of `series` with a trained model.
pub fn score_series(
    params: &TShapeParams,
    config: &ModelConfig,
    series: &TimeSeries,
) -> Result<ScoreSeries, MetricsError> {
    if series.split_index >= series.len() {
        return Err(MetricsError::EmptyTestRegion);
    }
    let (normalized, _) = zscore_normalize(series)?;
    let t_len = config.window_t;
    let split = series.split_index;
    let scores: Vec<f64> = (split..series.len())
        .into_par_iter()
        .map(|t| -> Result<f64, MetricsError> {
            let window = window_ending_at(&normalized.values, t, t_len);
            let mut tape = Tape::new();
            let wid = tape
                .leaf_from(vec![t_len], window, false)
                .map_err(ModelError::from)?;
            let pass = forward_fast(&mut tape, wid, params, config, Mode::Eval)?;
            let recon = tape.data(pass.reconstruction);
            let target = tape.data(wid);
            let err = target[t_len - 1] - recon[t_len - 1];
            let score = err * err;
            if !score.is_finite() {
                return Err(MetricsError::NonFiniteScore { index: t });
            }
            Ok(score)
        })
        .collect::<Result<_, _>>()?;
    Ok(ScoreSeries {
        scores,
        start_index: split,
        valid_from: (t_len - 1).saturating_sub(split),
    })
}

/// Strict thresholding: positive iff `score > threshold`.
pub fn binarize(scores: &[f64], threshold: f64) -> Vec<u8> {
    scores.iter().map(|&s| u8::from(s > threshold)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counts {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl F1 {
    /// Precision, recall, and F1 with the 0/0 → 0 convention.
    pub fn from_counts(counts: Counts) -> F1 {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(counts.true_pos, counts.true_pos + counts.false_pos);
        let recall = ratio(counts.true_pos, counts.true_pos + counts.false_neg);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        F1 {
            precision,
            recall,
            f1,
        }
    }
}

/// Pointwise precision/recall/F1.
pub fn point_f1(pred: &[u8], labels: &[u8]) -> Result<(Counts, F1), MetricsError> {
    if pred.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            pred: pred.len(),
            labels: labels.len(),
        });
    }
    let mut counts = Counts {
        true_pos: 0,
        false_pos: 0,
        false_neg: 0,
    };
    for (&p, &l) in pred.iter().zip(labels) {
        match (p, l) {
            (1, 1) => counts.true_pos += 1,
            (1, 0) => counts.false_pos += 1,
            (0, 1) => counts.false_neg += 1,
            _ => {}
        }
    }
    Ok((counts, F1::from_counts(counts)))
}

/// Maximal runs of 1s as half-open `[start, end)` intervals, sorted.
pub fn extract_events(binary: &[u8]) -> Vec<(usize, usize)> {
    let mut events = Vec::new();
    let mut start = None;
    for (i, &b) in binary.iter().enumerate() {
        match (b, start) {
            (1, None) => start = Some(i),
            (0, Some(s)) => {
                events.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        events.push((s, binary.len()));
    }
    events
}

/// Event-level precision/recall/F1.
///
/// Recall is event-level: a ground-truth event counts as detected when any
/// predicted positive point overlaps it, so event duration plays no role.
/// Precision is point-level: a blanket prediction that merges into one
/// giant event would otherwise overlap every ground-truth event with zero
/// stray events and score a vacuous 1.0 under a threshold sweep. The
/// returned counts are event-granular; `false_pos` is the number of
/// predicted events overlapping no ground-truth event.
pub fn event_f1(pred: &[u8], labels: &[u8]) -> Result<(Counts, F1), MetricsError> {
    if pred.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            pred: pred.len(),
            labels: labels.len(),
        });
    }
    let gt_events = extract_events(labels);
    let pred_events = extract_events(pred);
    let overlap = |(a0, a1): (usize, usize), (b0, b1): (usize, usize)| a0 < b1 && b0 < a1;
    let true_pos = gt_events
        .iter()
        .filter(|&&gt| pred_events.iter().any(|&pe| overlap(gt, pe)))
        .count();
    let false_neg = gt_events.len() - true_pos;
    let false_pos = pred_events
        .iter()
        .filter(|&&pe| !gt_events.iter().any(|&gt| overlap(gt, pe)))
        .count();
    let counts = Counts {
        true_pos,
        false_pos,
        false_neg,
    };
    let (point_counts, _) = point_f1(pred, labels)?;
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(
        point_counts.true_pos,
        point_counts.true_pos + point_counts.false_pos,
    );
    let recall = ratio(counts.true_pos, counts.true_pos + counts.false_neg);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok((
        counts,
        F1 {
            precision,
            recall,
            f1,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Point,
    Event,
}

/// Outcome of a best-threshold search for one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub best_f1: f64,
    pub best_threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub counts: Counts,
}

/// Evaluate the metric at every distinct score value plus one sentinel
/// above the maximum, and return the highest F1 and the smallest threshold
/// achieving it.
///
/// With strict `>` binarization the maximum score already yields the
/// all-negative prediction. The all-positive prediction is deliberately
/// not a candidate: a single predicted event covering the whole region
/// overlaps every ground-truth event with no stray event, so it would
/// score a degenerate event-F1 of 1 for any detector.
pub fn best_f1_sweep(
    scores: &[f64],
    labels: &[u8],
    kind: MetricKind,
) -> Result<SweepResult, MetricsError> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch {
            pred: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(MetricsError::EmptyTestRegion);
    }
    let mut candidates: Vec<f64> = scores.to_vec();
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("scores must not contain NaN"));
    candidates.dedup();
    let hi = candidates[candidates.len() - 1] + 1.0;
    candidates.push(hi);

    let evaluated: Vec<(f64, Counts, F1)> = candidates
        .par_iter()
        .map(|&threshold| {
            let pred = binarize(scores, threshold);
            let (counts, f1) = match kind {
                MetricKind::Point => point_f1(&pred, labels).expect("lengths checked"),
                MetricKind::Event => event_f1(&pred, labels).expect("lengths checked"),
            };
            (threshold, counts, f1)
        })
        .collect();

    let mut best = &evaluated[0];
    for entry in &evaluated[1..] {
        if entry.2.f1 > best.2.f1 {
            best = entry;
        }
    }
    Ok(SweepResult {
        best_f1: best.2.f1,
        best_threshold: best.0,
        precision: best.2.precision,
        recall: best.2.recall,
        counts: best.1,
    })
}

/// Point and event sweeps over one score series.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub point: SweepResult,
    pub event: SweepResult,
}

impl EvalReport {
    pub fn evaluate(scores: &[f64], labels: &[u8]) -> Result<EvalReport, MetricsError> {
        Ok(EvalReport {
            point: best_f1_sweep(scores, labels, MetricKind::Point)?,
            event: best_f1_sweep(scores, labels, MetricKind::Event)?,
        })
    }

    /// Key-value document, one metric prefix per granularity.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        for (prefix, sweep) in [("point", &self.point), ("event", &self.event)] {
            let _ = writeln!(out, "{prefix}.best_f1 = {}", sweep.best_f1);
            let _ = writeln!(out, "{prefix}.best_threshold = {}", sweep.best_threshold);
            let _ = writeln!(out, "{prefix}.precision = {}", sweep.precision);
            let _ = writeln!(out, "{prefix}.recall = {}", sweep.recall);
            let _ = writeln!(out, "{prefix}.tp = {}", sweep.counts.true_pos);
            let _ = writeln!(out, "{prefix}.fp = {}", sweep.counts.false_pos);
            let _ = writeln!(out, "{prefix}.fn = {}", sweep.counts.false_neg);
        }
        out
    }
}
