//! Touch-event error taxonomy, frame-wise classification metrics, AUC and
//! median smoothing.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{consensus_mask, segments_from_mask, Label, LabelArray, TouchSegment};

pub const DEFAULT_SMOOTH_WINDOW: usize = 5;
pub const PROBA_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorCounts {
    pub split: u64,
    pub ghost: u64,
    pub miss: u64,
    pub join: u64,
    pub deduct: u64,
    pub append: u64,
}

impl ErrorCounts {
    pub fn touch_count_errors(&self) -> u64 {
        self.split + self.ghost + self.miss + self.join
    }

    pub fn edge_errors(&self) -> u64 {
        self.deduct + self.append
    }

    /// Counts seen from the other side: truth and prediction exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            split: self.join,
            join: self.split,
            miss: self.ghost,
            ghost: self.miss,
            deduct: self.append,
            append: self.deduct,
        }
    }

    fn add(&mut self, o: &Self) {
        self.split += o.split;
        self.ghost += o.ghost;
        self.miss += o.miss;
        self.join += o.join;
        self.deduct += o.deduct;
        self.append += o.append;
    }
}

/// Total boundary displacement, in frames, behind the deduct and append counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeFrames {
    pub deduct: u64,
    pub append: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Frame-wise rates; `None` where the denominator is zero.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DerivedMetrics {
    pub auc: Option<f64>,
    pub accuracy: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub geometric_mean: Option<f64>,
    pub percent_correct: Option<f64>,
}

impl DerivedMetrics {
    pub fn from_confusion(c: &Confusion, auc: Option<f64>) -> Self {
        let accuracy = ratio(c.tp + c.tn, c.total());
        let sensitivity = ratio(c.tp, c.tp + c.fn_);
        let specificity = ratio(c.tn, c.tn + c.fp);
        let geometric_mean = match (sensitivity, specificity) {
            (Some(a), Some(b)) => Some((a * b).sqrt()),
            _ => None,
        };
        Self {
            auc,
            accuracy,
            sensitivity,
            specificity,
            precision: ratio(c.tp, c.tp + c.fp),
            geometric_mean,
            percent_correct: accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub counts: ErrorCounts,
    pub edge_frames: EdgeFrames,
    pub n_true_touches: u64,
    pub n_pred_touches: u64,
    pub n_frames: u64,
    /// Touch-count errors per true touch; the raw count when there are no
    /// true touches (see `degenerate_denominator`).
    pub tc_error: f64,
    pub edge_error_rate: f64,
    pub degenerate_denominator: bool,
    pub confusion: Confusion,
    pub derived: DerivedMetrics,
}

impl ErrorReport {
    pub fn new(
        counts: ErrorCounts,
        edge_frames: EdgeFrames,
        n_true_touches: u64,
        n_pred_touches: u64,
        confusion: Confusion,
        auc: Option<f64>,
    ) -> Self {
        let degenerate = n_true_touches == 0;
        let den = if degenerate { 1.0 } else { n_true_touches as f64 };
        Self {
            tc_error: counts.touch_count_errors() as f64 / den,
            edge_error_rate: counts.edge_errors() as f64 / den,
            degenerate_denominator: degenerate,
            counts,
            edge_frames,
            n_true_touches,
            n_pred_touches,
            n_frames: confusion.total(),
            derived: DerivedMetrics::from_confusion(&confusion, auc),
            confusion,
        }
    }

    pub fn with_auc(mut self, auc: Option<f64>) -> Self {
        self.derived.auc = auc;
        self
    }
}

/// Pools counts and confusion matrices, then recomputes every rate. AUC does
/// not pool and is left empty.
pub fn aggregate(reports: &[ErrorReport]) -> ErrorReport {
    let mut counts = ErrorCounts::default();
    let mut edge = EdgeFrames::default();
    let mut conf = Confusion::default();
    let (mut nt, mut np) = (0, 0);
    for r in reports {
        counts.add(&r.counts);
        edge.deduct += r.edge_frames.deduct;
        edge.append += r.edge_frames.append;
        conf.tp += r.confusion.tp;
        conf.fp += r.confusion.fp;
        conf.tn += r.confusion.tn;
        conf.fn_ += r.confusion.fn_;
        nt += r.n_true_touches;
        np += r.n_pred_touches;
    }
    ErrorReport::new(counts, edge, nt, np, conf, None)
}

/// Event-level comparison of two fully labeled binary sequences.
pub fn classify_binary(truth: &[bool], pred: &[bool]) -> Result<ErrorReport> {
    if truth.len() != pred.len() {
        return Err(Error::ShapeMismatch(format!("truth has {} frames, prediction {}", truth.len(), pred.len())));
    }
    let t = segments_from_mask(truth);
    let p = segments_from_mask(pred);
    let (t, p) = (t.segments(), p.segments());

    // Both lists are sorted and disjoint, so overlapping pairs come out of a merge sweep.
    let mut t_over = vec![0u64; t.len()];
    let mut p_over = vec![0u64; p.len()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < t.len() && j < p.len() {
        if t[i].overlaps(&p[j]) {
            t_over[i] += 1;
            p_over[j] += 1;
            pairs.push((i, j));
        }
        if t[i].end < p[j].end {
            i += 1;
        } else {
            j += 1;
        }
    }

    let mut counts = ErrorCounts {
        miss: t_over.iter().filter(|&&k| k == 0).count() as u64,
        ghost: p_over.iter().filter(|&&k| k == 0).count() as u64,
        split: t_over.iter().map(|&k| k.saturating_sub(1)).sum(),
        join: p_over.iter().map(|&k| k.saturating_sub(1)).sum(),
        ..Default::default()
    };
    let mut edge = EdgeFrames::default();
    for &(i, j) in &pairs {
        if t_over[i] == 1 && p_over[j] == 1 {
            edge_errors(&t[i], &p[j], &mut counts, &mut edge);
        }
    }

    let mut conf = Confusion::default();
    for (&y, &q) in truth.iter().zip(pred) {
        match (y, q) {
            (true, true) => conf.tp += 1,
            (false, true) => conf.fp += 1,
            (false, false) => conf.tn += 1,
            (true, false) => conf.fn_ += 1,
        }
    }
    Ok(ErrorReport::new(counts, edge, t.len() as u64, p.len() as u64, conf, None))
}

fn edge_errors(t: &TouchSegment, p: &TouchSegment, counts: &mut ErrorCounts, edge: &mut EdgeFrames) {
    if p.start > t.start {
        counts.deduct += 1;
        edge.deduct += (p.start - t.start) as u64;
    } else if p.start < t.start {
        counts.append += 1;
        edge.append += (t.start - p.start) as u64;
    }
    if p.end < t.end {
        counts.deduct += 1;
        edge.deduct += (t.end - p.end) as u64;
    } else if p.end > t.end {
        counts.append += 1;
        edge.append += (p.end - t.end) as u64;
    }
}

/// Compares `pred` against `truth` on frames where both arrays have the pole
/// in reach. Segments are derived after dropping the other frames.
pub fn classify_errors(truth: &LabelArray, pred: &LabelArray) -> Result<ErrorReport> {
    if truth.len() != pred.len() {
        return Err(Error::ShapeMismatch(format!("truth has {} frames, prediction {}", truth.len(), pred.len())));
    }
    let keep: Vec<bool> = truth.pole_in_reach().iter().zip(pred.pole_in_reach()).map(|(&a, &b)| a && b).collect();
    let t = truth.compress(&keep)?;
    let p = pred.compress(&keep)?;
    t.check_labeled()?;
    p.check_labeled()?;
    classify_binary(&t.touch_mask(), &p.touch_mask())
}

/// Scores `subject` on the frames where both members of `pair` agree on a
/// label, using their shared labels as ground truth.
pub fn compare_to_consensus(subject: &LabelArray, pair: [&LabelArray; 2]) -> Result<ErrorReport> {
    let [a, b] = pair;
    if subject.len() != a.len() {
        return Err(Error::ShapeMismatch(format!("subject has {} frames, pair {}", subject.len(), a.len())));
    }
    let agree = consensus_mask(a, b)?;
    let keep: Vec<bool> = (0..a.len())
        .map(|i| {
            agree[i]
                && a.values()[i] != Label::Unlabeled
                && a.pole_in_reach()[i]
                && b.pole_in_reach()[i]
                && subject.pole_in_reach()[i]
        })
        .collect();
    if !keep.iter().any(|&k| k) {
        return Err(Error::UndefinedMetric("the curator pair agrees on no in-reach frame".into()));
    }
    let truth = a.compress(&keep)?;
    let subj = subject.compress(&keep)?;
    subj.check_labeled()?;
    classify_binary(&truth.touch_mask(), &subj.touch_mask())
}

/// Area under the ROC curve via the Mann–Whitney statistic with midranks.
pub fn auc(truth: &[u8], scores: &[f64]) -> Result<f64> {
    if truth.len() != scores.len() {
        return Err(Error::ShapeMismatch(format!("{} labels for {} scores", truth.len(), scores.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric("NaN score".into()));
    }
    if let Some(&bad) = truth.iter().find(|&&y| y > 1) {
        return Err(Error::Label(format!("label {bad} is not binary")));
    }
    let n_pos = truth.iter().filter(|&&y| y == 1).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Ranks are 1-based; a tie block over positions [i, j) shares rank (i + j + 1) / 2.
    let mut pos_rank_sum = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j + 1) as f64 / 2.0;
        let positives = order[i..j].iter().filter(|&&k| truth[k] == 1).count();
        pos_rank_sum += midrank * positives as f64;
        i = j;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

fn check_window(window: usize) -> Result<()> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidWindow(window));
    }
    Ok(())
}

/// Centered sliding median of a binary sequence with edge-value padding.
pub fn median_smooth_binary(x: &[bool], window: usize) -> Result<Vec<bool>> {
    check_window(window)?;
    let n = x.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let h = (window / 2) as i64;
    let at = |i: i64| x[i.clamp(0, n as i64 - 1) as usize];
    let mut ones: usize = (-h..=h).filter(|&i| at(i)).count();
    let mut out = Vec::with_capacity(n);
    for t in 0..n as i64 {
        out.push(ones > window / 2);
        ones -= usize::from(at(t - h));
        ones += usize::from(at(t + h + 1));
    }
    Ok(out)
}

/// Smooths each contiguous range of `groups` independently.
pub fn median_smooth_grouped(x: &[bool], groups: &[Range<usize>], window: usize) -> Result<Vec<bool>> {
    check_window(window)?;
    let mut out = vec![false; x.len()];
    for g in groups {
        let s = median_smooth_binary(&x[g.clone()], window)?;
        out[g.clone()].copy_from_slice(&s);
    }
    Ok(out)
}

/// Thresholds probabilities at 0.5 (inclusive) and smooths the result.
pub fn median_smooth_proba(p: &[f64], window: usize) -> Result<Vec<bool>> {
    median_smooth_binary(&threshold(p), window)
}

pub fn threshold(p: &[f64]) -> Vec<bool> {
    p.iter().map(|&v| v >= PROBA_THRESHOLD).collect()
}

/// Smooths a label array; every frame must be labeled.
pub fn median_smooth(labels: &LabelArray, window: usize) -> Result<LabelArray> {
    if let Some(frame) = labels.values().iter().position(|&v| v == Label::Unlabeled) {
        return Err(Error::UnlabeledFrame { frame });
    }
    let x: Vec<bool> = labels.values().iter().map(|&v| v == Label::Touch).collect();
    let values = median_smooth_binary(&x, window)?.into_iter().map(Label::from_bool).collect();
    LabelArray::new(values, labels.pole_in_reach().to_vec(), labels.frame_rate_hz())
}

/// TC-error report of thresholded, smoothed probabilities against binary
/// truth, evaluated per group and pooled.
pub fn grouped_report(
    truth: &[u8],
    proba: &[f64],
    groups: &[Range<usize>],
    window: Option<usize>,
) -> Result<ErrorReport> {
    if truth.len() != proba.len() {
        return Err(Error::ShapeMismatch(format!("{} labels for {} predictions", truth.len(), proba.len())));
    }
    let mut reports = Vec::with_capacity(groups.len());
    for g in groups {
        let mut pred = threshold(&proba[g.clone()]);
        if let Some(w) = window {
            pred = median_smooth_binary(&pred, w)?;
        }
        let t: Vec<bool> = truth[g.clone()].iter().map(|&y| y == 1).collect();
        reports.push(classify_binary(&t, &pred)?);
    }
    Ok(aggregate(&reports))
}
