//! Training-data selection, recursive feature elimination and
//! hyperparameter search.

use std::collections::BTreeMap;

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbdt::{fit, Dataset, GbdtModel, TrainConfig};
use crate::ingest::FeatureMatrix;
use crate::labels::{dilate_touch_mask, LabelArray, SessionManifest};
use crate::metrics::auc;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BorderSelection {
    pub keep: Vec<bool>,
    pub retained: usize,
    pub total: usize,
}

/// Frames within `k` frames of any touch frame.
pub fn border_extract(labels: &LabelArray, k: usize) -> BorderSelection {
    let keep = dilate_touch_mask(labels, k);
    BorderSelection { retained: keep.iter().filter(|&&b| b).count(), total: keep.len(), keep }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    ByVideo,
    ByFrameIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub strategy: SplitStrategy,
    pub train_fraction: f64,
    /// Share of videos assigned to validation under `by_video`; the rest is test.
    pub valid_fraction: f64,
    pub n_folds: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { strategy: SplitStrategy::ByVideo, train_fraction: 0.7, valid_fraction: 0.15, n_folds: 10, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!("train_fraction {} outside (0, 1)", self.train_fraction)));
        }
        if !(self.valid_fraction >= 0.0 && self.train_fraction + self.valid_fraction <= 1.0 + 1e-12) {
            return Err(Error::InvalidConfig("valid_fraction must be >= 0 and leave room for train".into()));
        }
        if self.n_folds == 0 {
            return Err(Error::InvalidConfig("n_folds must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Train,
    Valid,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoAssignment {
    pub video_id: String,
    pub part: Part,
    pub fold: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameAssignment {
    pub video_id: String,
    pub frame: u32,
    pub part: Part,
    pub fold: usize,
}

/// Result of [`split_data`]: whole videos under `by_video`, single frames
/// under `by_frame_index`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub spec: SplitSpec,
    pub videos: Vec<VideoAssignment>,
    pub frames: Vec<FrameAssignment>,
}

impl SplitAssignment {
    pub fn part_of(&self, video_id: &str, frame: u32) -> Option<(Part, usize)> {
        match self.spec.strategy {
            SplitStrategy::ByVideo => self.videos.iter().find(|v| v.video_id == video_id).map(|v| (v.part, v.fold)),
            SplitStrategy::ByFrameIndex => {
                self.frames.iter().find(|f| f.video_id == video_id && f.frame == frame).map(|f| (f.part, f.fold))
            }
        }
    }
}

pub fn split_data(manifest: &SessionManifest, spec: &SplitSpec) -> Result<SplitAssignment> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.strategy {
        SplitStrategy::ByVideo => {
            let n = manifest.videos.len();
            if n < spec.n_folds.max(2) {
                return Err(Error::InsufficientData(format!("{n} videos for {} folds", spec.n_folds)));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let n_train = ((spec.train_fraction * n as f64).round() as usize).clamp(1, n - 1);
            let n_valid = ((spec.valid_fraction * n as f64).round() as usize).min(n - n_train);
            let mut videos: Vec<VideoAssignment> = order
                .iter()
                .enumerate()
                .map(|(rank, &i)| {
                    let part = if rank < n_train {
                        Part::Train
                    } else if rank < n_train + n_valid {
                        Part::Valid
                    } else {
                        Part::Test
                    };
                    VideoAssignment { video_id: manifest.videos[i].video_id.clone(), part, fold: rank % spec.n_folds }
                })
                .collect();
            videos.sort_by(|a, b| a.video_id.cmp(&b.video_id));
            Ok(SplitAssignment { spec: spec.clone(), videos, frames: Vec::new() })
        }
        SplitStrategy::ByFrameIndex => {
            let all: Vec<(String, u32)> = manifest
                .videos
                .iter()
                .flat_map(|v| (0..v.n_frames as u32).map(move |f| (v.video_id.clone(), f)))
                .collect();
            let n = all.len();
            if n < spec.n_folds {
                return Err(Error::InsufficientData(format!("{n} frames for {} folds", spec.n_folds)));
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let n_train = (spec.train_fraction * n as f64).round() as usize;
            let mut part = vec![Part::Train; n];
            let mut fold = vec![0; n];
            for (rank, &i) in order.iter().enumerate() {
                if rank < n_train {
                    fold[i] = rank % spec.n_folds;
                } else {
                    part[i] = Part::Valid;
                    fold[i] = (rank - n_train) % spec.n_folds;
                }
            }
            let frames = all
                .into_iter()
                .enumerate()
                .map(|(i, (video_id, frame))| FrameAssignment { video_id, frame, part: part[i], fold: fold[i] })
                .collect();
            Ok(SplitAssignment { spec: spec.clone(), videos: Vec::new(), frames })
        }
    }
}

/// One cross-validation fold: a training part and its validation part.
#[derive(Debug, Clone)]
pub struct Fold {
    pub train_x: FeatureMatrix,
    pub train_y: Vec<u8>,
    pub valid_x: FeatureMatrix,
    pub valid_y: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "value", rename_all = "snake_case")]
pub enum RfeStep {
    /// Drop this fraction of the surviving features, lowest ensemble gain first.
    DropBottomGainFraction(f64),
    /// Drop features whose ensemble gain is below the value.
    GainBelow(f64),
    /// Drop features split on fewer times than the value across the ensemble.
    SplitsBelow(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeConfig {
    pub train: TrainConfig,
    pub schedule: Vec<RfeStep>,
    /// Largest tolerated drop of mean validation AUC below the best accepted round.
    pub tolerance: f64,
    pub min_features: usize,
}

impl Default for RfeConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            schedule: vec![RfeStep::DropBottomGainFraction(0.5); 20],
            tolerance: 0.001,
            min_features: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeRound {
    pub round: usize,
    pub n_features: usize,
    pub mean_auc: Option<f64>,
    pub fold_auc: Vec<Option<f64>>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeResult {
    /// Surviving column ids, ascending.
    pub selected: Vec<usize>,
    pub trace: Vec<RfeRound>,
    pub warnings: Vec<String>,
}

struct RoundEval {
    mean_auc: f64,
    fold_auc: Vec<Option<f64>>,
    gain: Vec<f64>,
    split: Vec<u64>,
}

fn evaluate_subset(folds: &[Fold], cols: &[usize], cfg: &TrainConfig) -> Result<RoundEval> {
    let results: Vec<Result<(GbdtModel, Option<f64>)>> = folds
        .par_iter()
        .map(|f| {
            let tx = f.train_x.select_columns(cols)?;
            let vx = f.valid_x.select_columns(cols)?;
            let out = fit(&Dataset::new(&tx, &f.train_y), Some(&Dataset::new(&vx, &f.valid_y)), cfg)?;
            let a = auc(&f.valid_y, &out.model.predict_raw(&vx)?).ok();
            Ok((out.model, a))
        })
        .collect();
    let mut gain = vec![0.0; cols.len()];
    let mut split = vec![0u64; cols.len()];
    let mut fold_auc = Vec::new();
    for r in results {
        let (model, a) = r?;
        let imp = model.importance();
        for (k, g) in imp.gain.iter().enumerate() {
            gain[k] += g;
            split[k] += imp.split[k];
        }
        fold_auc.push(a);
    }
    let defined: Vec<f64> = fold_auc.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::UndefinedMetric("no fold has a defined validation AUC".into()));
    }
    let mean_auc = defined.iter().sum::<f64>() / defined.len() as f64;
    Ok(RoundEval { mean_auc, fold_auc, gain, split })
}

fn apply_step(step: &RfeStep, cols: &[usize], gain: &[f64], split: &[u64], min_features: usize) -> Vec<usize> {
    let mut keep: Vec<usize> = match *step {
        RfeStep::DropBottomGainFraction(frac) => {
            let n_drop = ((cols.len() as f64 * frac).floor() as usize).min(cols.len().saturating_sub(min_features));
            let mut order: Vec<usize> = (0..cols.len()).collect();
            order.sort_by(|&a, &b| gain[a].total_cmp(&gain[b]).then(cols[a].cmp(&cols[b])));
            order[n_drop..].to_vec()
        }
        RfeStep::GainBelow(t) => (0..cols.len()).filter(|&k| gain[k] >= t).collect(),
        RfeStep::SplitsBelow(t) => (0..cols.len()).filter(|&k| split[k] >= t).collect(),
    };
    if keep.len() < min_features {
        // Fall back to the strongest features.
        let mut order: Vec<usize> = (0..cols.len()).collect();
        order.sort_by(|&a, &b| gain[b].total_cmp(&gain[a]).then(cols[a].cmp(&cols[b])));
        keep = order.into_iter().take(min_features.min(cols.len())).collect();
    }
    let mut out: Vec<usize> = keep.into_iter().map(|k| cols[k]).collect();
    out.sort_unstable();
    out
}

/// Ensemble recursive feature elimination over `folds`.
///
/// Round 0 trains on every column and drops columns no fold model used.
/// Each schedule step then proposes a smaller set from the current ensemble
/// importances; a proposal whose mean validation AUC falls more than
/// `tolerance` below the best accepted round is rejected and ends the search.
pub fn rfe(folds: &[Fold], cfg: &RfeConfig) -> Result<RfeResult> {
    let Some(first) = folds.first() else {
        return Err(Error::EmptyInput("rfe needs at least one fold".into()));
    };
    let n_cols = first.train_x.cols();
    if folds.iter().any(|f| f.train_x.cols() != n_cols || f.valid_x.cols() != n_cols) {
        return Err(Error::ShapeMismatch("folds have different column counts".into()));
    }
    let all: Vec<usize> = (0..n_cols).collect();
    let mut trace = Vec::new();
    let mut warnings = Vec::new();

    let r0 = evaluate_subset(folds, &all, &cfg.train)?;
    trace.push(RfeRound { round: 0, n_features: n_cols, mean_auc: Some(r0.mean_auc), fold_auc: r0.fold_auc.clone(), accepted: true });
    let used: Vec<usize> = (0..n_cols).filter(|&k| r0.gain[k] > 0.0 || r0.split[k] > 0).collect();
    let mut current = if used.len() >= cfg.min_features { used } else { apply_step(&RfeStep::GainBelow(0.0), &all, &r0.gain, &r0.split, cfg.min_features) };
    let mut gain: Vec<f64> = current.iter().map(|&c| r0.gain[c]).collect();
    let mut split: Vec<u64> = current.iter().map(|&c| r0.split[c]).collect();
    let mut best_auc = r0.mean_auc;

    let mut guard_fired = false;
    for (i, step) in cfg.schedule.iter().enumerate() {
        let candidate = apply_step(step, &current, &gain, &split, cfg.min_features);
        if candidate.len() == current.len() {
            continue;
        }
        let eval = evaluate_subset(folds, &candidate, &cfg.train)?;
        let accepted = eval.mean_auc >= best_auc - cfg.tolerance;
        trace.push(RfeRound {
            round: i + 1,
            n_features: candidate.len(),
            mean_auc: Some(eval.mean_auc),
            fold_auc: eval.fold_auc.clone(),
            accepted,
        });
        if !accepted {
            guard_fired = true;
            break;
        }
        best_auc = best_auc.max(eval.mean_auc);
        current = candidate;
        gain = eval.gain;
        split = eval.split;
        if current.len() <= cfg.min_features {
            break;
        }
    }
    if !guard_fired && !cfg.schedule.is_empty() {
        let msg = "RFE schedule exhausted without the AUC guard firing; returning the last accepted round".to_string();
        warn!("{msg}");
        warnings.push(msg);
    }
    Ok(RfeResult { selected: current, trace, warnings })
}

/// Sampling ranges; equal bounds pin a parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub lambda_l1: (f64, f64),
    pub lambda_l2: (f64, f64),
    pub num_leaves: (usize, usize),
    pub feature_fraction: (f64, f64),
    pub bagging_fraction: (f64, f64),
    pub bagging_freq: (usize, usize),
    pub min_data_in_leaf: (usize, usize),
    pub n_trials: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            lambda_l1: (1e-5, 10.0),
            lambda_l2: (1e-5, 10.0),
            num_leaves: (2, 256),
            feature_fraction: (0.4, 1.0),
            bagging_fraction: (0.4, 1.0),
            bagging_freq: (1, 7),
            min_data_in_leaf: (5, 100),
            n_trials: 100,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("search space: {m}")));
        if self.n_trials == 0 {
            return bad("n_trials must be >= 1");
        }
        for (name, (lo, hi)) in [("lambda_l1", self.lambda_l1), ("lambda_l2", self.lambda_l2)] {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return bad(&format!("{name} needs 0 < lo <= hi"));
            }
        }
        for (name, (lo, hi)) in [("feature_fraction", self.feature_fraction), ("bagging_fraction", self.bagging_fraction)] {
            if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
                return bad(&format!("{name} needs 0 < lo <= hi <= 1"));
            }
        }
        if self.num_leaves.0 < 2 || self.num_leaves.0 > self.num_leaves.1 {
            return bad("num_leaves needs 2 <= lo <= hi");
        }
        if self.bagging_freq.0 > self.bagging_freq.1 || self.min_data_in_leaf.0 > self.min_data_in_leaf.1 {
            return bad("integer ranges need lo <= hi");
        }
        Ok(())
    }

    pub fn is_point(&self) -> bool {
        self.lambda_l1.0 == self.lambda_l1.1
            && self.lambda_l2.0 == self.lambda_l2.1
            && self.num_leaves.0 == self.num_leaves.1
            && self.feature_fraction.0 == self.feature_fraction.1
            && self.bagging_fraction.0 == self.bagging_fraction.1
            && self.bagging_freq.0 == self.bagging_freq.1
            && self.min_data_in_leaf.0 == self.min_data_in_leaf.1
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> TrialParams {
        let log_uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
            if lo == hi {
                lo
            } else {
                rng.random_range(lo.ln()..hi.ln()).exp().clamp(lo, hi)
            }
        };
        let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| if lo == hi { lo } else { rng.random_range(lo..=hi) };
        let int = |rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)| rng.random_range(lo..=hi);
        TrialParams {
            lambda_l1: log_uniform(rng, self.lambda_l1),
            lambda_l2: log_uniform(rng, self.lambda_l2),
            num_leaves: int(rng, self.num_leaves),
            feature_fraction: uniform(rng, self.feature_fraction),
            bagging_fraction: uniform(rng, self.bagging_fraction),
            bagging_freq: int(rng, self.bagging_freq),
            min_data_in_leaf: int(rng, self.min_data_in_leaf),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialParams {
    pub lambda_l1: f64,
    pub lambda_l2: f64,
    pub num_leaves: usize,
    pub feature_fraction: f64,
    pub bagging_fraction: f64,
    pub bagging_freq: usize,
    pub min_data_in_leaf: usize,
}

impl TrialParams {
    pub fn apply(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            lambda_l1: self.lambda_l1,
            lambda_l2: self.lambda_l2,
            num_leaves: self.num_leaves,
            feature_fraction: self.feature_fraction,
            bagging_fraction: self.bagging_fraction,
            bagging_freq: self.bagging_freq,
            min_data_in_leaf: self.min_data_in_leaf as f64,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialScore {
    pub tc_error: f64,
    pub auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub params: TrialParams,
    pub score: Option<TrialScore>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_trial: usize,
    pub best_config: TrainConfig,
    pub best_score: TrialScore,
    pub trials: Vec<TrialRecord>,
}

/// Uniform random search. Parameters for every trial are drawn up front from
/// the seeded generator, trials run in parallel, and the winner has the
/// lowest TC-error, then the highest AUC, then the lowest trial number.
pub fn hyper_search<F>(space: &SearchSpace, base: &TrainConfig, seed: u64, objective: F) -> Result<SearchResult>
where
    F: Fn(&TrainConfig) -> Result<TrialScore> + Sync,
{
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = if space.is_point() { 1 } else { space.n_trials };
    let params: Vec<TrialParams> = (0..n).map(|_| space.sample(&mut rng)).collect();
    let trials: Vec<TrialRecord> = params
        .into_par_iter()
        .enumerate()
        .map(|(trial, params)| {
            let cfg = params.apply(base);
            let outcome = cfg.validate().and_then(|_| objective(&cfg));
            match outcome {
                Ok(score) if score.tc_error.is_nan() => {
                    TrialRecord { trial, params, score: None, error: Some("objective returned NaN TC-error".into()) }
                }
                Ok(score) => TrialRecord { trial, params, score: Some(score), error: None },
                Err(e) => TrialRecord { trial, params, score: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    let mut best: Option<(usize, TrialScore)> = None;
    for t in &trials {
        if let Some(s) = t.score {
            let better = match best {
                None => true,
                Some((_, b)) => s.tc_error < b.tc_error || (s.tc_error == b.tc_error && s.auc > b.auc),
            };
            if better {
                best = Some((t.trial, s));
            }
        }
    }
    let Some((best_trial, best_score)) = best else {
        return Err(Error::DegenerateData("every search trial failed".into()));
    };
    Ok(SearchResult { best_trial, best_config: trials[best_trial].params.apply(base), best_score, trials })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameSpacing {
    #[default]
    Consecutive,
    /// Evenly spread over the in-reach frames of each video.
    Spread,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartRule {
    /// One start frame shared by all chosen videos.
    #[default]
    Common,
    PerVideo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleSpec {
    pub videos_wanted: usize,
    pub frames_per_video: usize,
    pub spacing: FrameSpacing,
    pub start: StartRule,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self { videos_wanted: 10, frames_per_video: 10, spacing: FrameSpacing::Consecutive, start: StartRule::Common }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SampledFrame {
    pub video_id: String,
    pub frame: usize,
}

/// Indices of `k` of `n` sorted items at equally spaced quantiles.
pub fn quantile_indices(n: usize, k: usize) -> Vec<usize> {
    match k {
        0 => Vec::new(),
        1 => vec![(n - 1) / 2],
        _ => (0..k).map(|i| ((i * (n - 1)) as f64 / (k - 1) as f64).round() as usize).collect(),
    }
}

fn first_window(reach: &[bool], len: usize) -> Option<usize> {
    let mut run = 0;
    for (i, &r) in reach.iter().enumerate() {
        run = if r { run + 1 } else { 0 };
        if run >= len {
            return Some(i + 1 - len);
        }
    }
    None
}

/// Frames for curation, drawn from videos spread along the pole position.
/// `reach` holds the pole-in-reach mask of every manifest video.
pub fn pole_position_sample(
    manifest: &SessionManifest,
    reach: &BTreeMap<String, Vec<bool>>,
    spec: &SampleSpec,
) -> Result<Vec<SampledFrame>> {
    if spec.videos_wanted == 0 || spec.frames_per_video == 0 {
        return Err(Error::InvalidConfig("videos_wanted and frames_per_video must be positive".into()));
    }
    let mut positioned = Vec::with_capacity(manifest.videos.len());
    for v in &manifest.videos {
        let x = v
            .pole_position_x
            .ok_or_else(|| Error::MissingMetadata(format!("video {} has no pole_position_x", v.video_id)))?;
        positioned.push((x, v.video_id.clone()));
    }
    if positioned.len() < spec.videos_wanted {
        return Err(Error::InsufficientData(format!(
            "{} videos available, {} wanted",
            positioned.len(),
            spec.videos_wanted
        )));
    }
    positioned.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let chosen: Vec<&String> =
        quantile_indices(positioned.len(), spec.videos_wanted).into_iter().map(|i| &positioned[i].1).collect();
    let masks: Vec<&Vec<bool>> = chosen
        .iter()
        .map(|id| reach.get(*id).ok_or_else(|| Error::MissingMetadata(format!("no pole-in-reach mask for video {id}"))))
        .collect::<Result<_>>()?;
    let k = spec.frames_per_video;
    let mut out = Vec::with_capacity(chosen.len() * k);
    match (spec.spacing, spec.start) {
        (FrameSpacing::Consecutive, StartRule::Common) => {
            let shortest = masks.iter().map(|m| m.len()).min().unwrap_or(0);
            let common: Vec<bool> = (0..shortest).map(|i| masks.iter().all(|m| m[i])).collect();
            let start = first_window(&common, k).ok_or(Error::NoCommonWindow)?;
            for id in &chosen {
                out.extend((start..start + k).map(|frame| SampledFrame { video_id: (*id).clone(), frame }));
            }
        }
        (FrameSpacing::Consecutive, StartRule::PerVideo) => {
            for (id, m) in chosen.iter().zip(&masks) {
                let start = first_window(m, k).ok_or(Error::NoCommonWindow)?;
                out.extend((start..start + k).map(|frame| SampledFrame { video_id: (*id).clone(), frame }));
            }
        }
        (FrameSpacing::Spread, _) => {
            for (id, m) in chosen.iter().zip(&masks) {
                let in_reach: Vec<usize> = (0..m.len()).filter(|&i| m[i]).collect();
                if in_reach.len() < k {
                    return Err(Error::NoCommonWindow);
                }
                out.extend(
                    quantile_indices(in_reach.len(), k)
                        .into_iter()
                        .map(|q| SampledFrame { video_id: (*id).clone(), frame: in_reach[q] }),
                );
            }
        }
    }
    Ok(out)
}
