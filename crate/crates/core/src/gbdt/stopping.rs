use std::ops::Range;

use super::{EvalMetric, TrainConfig};
use crate::metrics::{auc, grouped_report};

/// Scores validation probabilities. Implementations must be deterministic.
pub trait ValidationMetric: Send + Sync {
    fn name(&self) -> &str;
    fn higher_is_better(&self) -> bool;
    /// `NaN` when the metric is undefined on this data.
    fn evaluate(&self, truth: &[u8], proba: &[f64]) -> f64;
}

pub struct AucMetric;

impl ValidationMetric for AucMetric {
    fn name(&self) -> &str {
        "auc"
    }

    fn higher_is_better(&self) -> bool {
        true
    }

    fn evaluate(&self, truth: &[u8], proba: &[f64]) -> f64 {
        auc(truth, proba).unwrap_or(f64::NAN)
    }
}

/// TC-error of thresholded, median-smoothed predictions, pooled over videos.
pub struct TcErrorMetric {
    pub groups: Vec<Range<usize>>,
    pub window: usize,
}

impl TcErrorMetric {
    /// Treats all rows as one video.
    pub fn single(n: usize, window: usize) -> Self {
        Self { groups: vec![0..n], window }
    }
}

impl ValidationMetric for TcErrorMetric {
    fn name(&self) -> &str {
        "tc_error"
    }

    fn higher_is_better(&self) -> bool {
        false
    }

    fn evaluate(&self, truth: &[u8], proba: &[f64]) -> f64 {
        match grouped_report(truth, proba, &self.groups, Some(self.window)) {
            Ok(r) if !r.degenerate_denominator => r.tc_error,
            _ => f64::NAN,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Track {
    best: f64,
    best_iter: usize,
}

/// Stops when every metric has gone `patience` rounds without strict
/// improvement. The best iteration is chosen by the first metric, with later
/// metrics breaking exact ties.
pub struct EarlyStopping {
    metrics: Vec<Box<dyn ValidationMetric>>,
    patience: usize,
    tracks: Vec<Option<Track>>,
    best_iter: Option<usize>,
    best_values: Vec<f64>,
}

impl EarlyStopping {
    pub fn new(metrics: Vec<Box<dyn ValidationMetric>>, patience: usize) -> Self {
        let n = metrics.len();
        Self { metrics, patience, tracks: vec![None; n], best_iter: None, best_values: Vec::new() }
    }

    /// Metrics implied by `cfg.eval_metric`; `groups` are the validation videos.
    pub fn from_config(cfg: &TrainConfig, groups: Vec<Range<usize>>) -> Self {
        let tc = || Box::new(TcErrorMetric { groups: groups.clone(), window: cfg.smooth_window }) as Box<dyn ValidationMetric>;
        let metrics: Vec<Box<dyn ValidationMetric>> = match cfg.eval_metric {
            EvalMetric::Auc => vec![Box::new(AucMetric)],
            EvalMetric::TcError => vec![tc()],
            EvalMetric::Both => vec![tc(), Box::new(AucMetric)],
        };
        Self::new(metrics, cfg.early_stopping_rounds)
    }

    pub fn names(&self) -> Vec<String> {
        self.metrics.iter().map(|m| m.name().to_string()).collect()
    }

    fn better(m: &dyn ValidationMetric, a: f64, b: f64) -> bool {
        if a.is_nan() {
            return false;
        }
        if b.is_nan() {
            return true;
        }
        if m.higher_is_better() {
            a > b
        } else {
            a < b
        }
    }

    /// Records the metrics of `iteration` and returns them in order.
    pub fn observe(&mut self, iteration: usize, truth: &[u8], proba: &[f64]) -> Vec<f64> {
        let values: Vec<f64> = self.metrics.iter().map(|m| m.evaluate(truth, proba)).collect();
        for (k, m) in self.metrics.iter().enumerate() {
            let v = values[k];
            match self.tracks[k] {
                Some(t) if !Self::better(m.as_ref(), v, t.best) => {}
                _ => self.tracks[k] = Some(Track { best: v, best_iter: iteration }),
            }
        }
        let improves = match self.best_iter {
            None => true,
            Some(_) => {
                let mut verdict = false;
                for (k, m) in self.metrics.iter().enumerate() {
                    let (v, b) = (values[k], self.best_values[k]);
                    if Self::better(m.as_ref(), v, b) {
                        verdict = true;
                        break;
                    }
                    // Equal (or both undefined): defer to the next metric.
                    let tied = v == b || (v.is_nan() && b.is_nan());
                    if !tied {
                        break;
                    }
                }
                verdict
            }
        };
        if improves {
            self.best_iter = Some(iteration);
            self.best_values = values.clone();
        }
        values
    }

    pub fn should_stop(&self, iteration: usize) -> bool {
        !self.metrics.is_empty()
            && self.tracks.iter().all(|t| t.is_some_and(|t| iteration - t.best_iter >= self.patience))
    }

    pub fn best_iteration(&self) -> Option<usize> {
        self.best_iter
    }

    pub fn best_values(&self) -> &[f64] {
        &self.best_values
    }
}
