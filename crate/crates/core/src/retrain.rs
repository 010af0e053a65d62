//! Adapting a trained classifier to a new session from a small curated sample.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featgen::{mask_duplicate, EdgeMaskIndex};
use crate::gbdt::{fit, Dataset, EvalMetric, FitOutput, GbdtModel, TrainConfig};
use crate::ingest::FeatureMatrix;
use crate::labels::Label;
use crate::metrics::{auc, grouped_report, ErrorReport};

/// Features and binary labels of one part of a bundle.
#[derive(Debug, Clone)]
pub struct LabeledPart {
    pub x: FeatureMatrix,
    pub y: Vec<u8>,
}

impl LabeledPart {
    pub fn new(x: FeatureMatrix, y: Vec<u8>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::ShapeMismatch(format!("{} rows, {} labels", x.rows(), y.len())));
        }
        if let Some(bad) = y.iter().find(|&&v| v > 1) {
            return Err(Error::Label(format!("label {bad} is not binary")));
        }
        Ok(Self { x, y })
    }

    /// Curated labels; unlabeled frames are rejected.
    pub fn from_labels(x: FeatureMatrix, labels: &[Label]) -> Result<Self> {
        let y = labels
            .iter()
            .enumerate()
            .map(|(frame, l)| match l {
                Label::Touch => Ok(1),
                Label::NoTouch => Ok(0),
                Label::Unlabeled => Err(Error::UnlabeledFrame { frame }),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(x, y)
    }

    fn select(&self, rows: &[usize]) -> Self {
        Self { x: self.x.select_rows(rows), y: rows.iter().map(|&r| self.y[r]).collect() }
    }

    fn masked(&self, idx: &EdgeMaskIndex, seed: u64) -> Result<Self> {
        Ok(Self { x: mask_duplicate(&self.x, idx, seed)?, y: self.y.clone() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BundleConfig {
    pub train_fraction: f64,
    pub sample_weight: f64,
    pub base_weight: f64,
    pub seed: u64,
}

impl Default for BundleConfig {
    fn default() -> Self {
        Self { train_fraction: 0.7, sample_weight: 2.0, base_weight: 1.0, seed: 0 }
    }
}

/// Training material for adaptation: the original data, the new sample split
/// into train and validation parts, and an edge-masked copy of each.
#[derive(Debug, Clone)]
pub struct RetrainBundle {
    pub base_train: LabeledPart,
    pub base_valid: LabeledPart,
    pub sample_train: LabeledPart,
    pub sample_valid: LabeledPart,
    pub base_train_masked: LabeledPart,
    pub base_valid_masked: LabeledPart,
    pub sample_train_masked: LabeledPart,
    pub sample_valid_masked: LabeledPart,
    pub config: BundleConfig,
}

pub fn build_retrain_bundle(
    base_train: LabeledPart,
    base_valid: LabeledPart,
    sample: LabeledPart,
    edge: &EdgeMaskIndex,
    cfg: &BundleConfig,
) -> Result<RetrainBundle> {
    if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!("train_fraction {} outside (0, 1)", cfg.train_fraction)));
    }
    if !(cfg.sample_weight > 0.0 && cfg.base_weight > 0.0) {
        return Err(Error::InvalidConfig("weights must be positive".into()));
    }
    let n_cols = base_train.x.cols();
    if base_valid.x.cols() != n_cols || sample.x.cols() != n_cols {
        return Err(Error::ShapeMismatch("bundle parts have different column counts".into()));
    }
    if sample.x.rows() < 2 {
        return Err(Error::InsufficientData(format!("{} sampled frames", sample.x.rows())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..sample.x.rows()).collect();
    order.shuffle(&mut rng);
    let n_train = ((cfg.train_fraction * order.len() as f64).round() as usize).clamp(1, order.len() - 1);
    let mut train_rows = order[..n_train].to_vec();
    let mut valid_rows = order[n_train..].to_vec();
    train_rows.sort_unstable();
    valid_rows.sort_unstable();
    let sample_train = sample.select(&train_rows);
    let sample_valid = sample.select(&valid_rows);
    let s = cfg.seed.wrapping_mul(4);
    Ok(RetrainBundle {
        base_train_masked: base_train.masked(edge, s.wrapping_add(1))?,
        base_valid_masked: base_valid.masked(edge, s.wrapping_add(2))?,
        sample_train_masked: sample_train.masked(edge, s.wrapping_add(3))?,
        sample_valid_masked: sample_valid.masked(edge, s.wrapping_add(4))?,
        base_train,
        base_valid,
        sample_train,
        sample_valid,
        config: *cfg,
    })
}

impl RetrainBundle {
    fn stack(parts: &[(&LabeledPart, f64)]) -> Result<(FeatureMatrix, Vec<u8>, Vec<f64>)> {
        let x = FeatureMatrix::vstack(&parts.iter().map(|(p, _)| &p.x).collect::<Vec<_>>())?;
        let y = parts.iter().flat_map(|(p, _)| p.y.iter().copied()).collect();
        let w = parts.iter().flat_map(|(p, w)| std::iter::repeat_n(*w, p.y.len())).collect();
        Ok((x, y, w))
    }

    /// Weighted training rows: base parts at the base weight, sample parts at
    /// the sample weight, originals and masked copies alike.
    pub fn training_set(&self) -> Result<(FeatureMatrix, Vec<u8>, Vec<f64>)> {
        let (b, s) = (self.config.base_weight, self.config.sample_weight);
        Self::stack(&[
            (&self.base_train, b),
            (&self.base_train_masked, b),
            (&self.sample_train, s),
            (&self.sample_train_masked, s),
        ])
    }

    /// Validation rows; weights are not applied when scoring.
    pub fn validation_set(&self) -> Result<(FeatureMatrix, Vec<u8>)> {
        let (x, y, _) = Self::stack(&[
            (&self.base_valid, 1.0),
            (&self.base_valid_masked, 1.0),
            (&self.sample_valid, 1.0),
            (&self.sample_valid_masked, 1.0),
        ])?;
        Ok((x, y))
    }
}

/// Defaults for adaptation: early stopping on TC-error and AUC with a long
/// patience.
pub fn retrain_config(base: &TrainConfig) -> TrainConfig {
    TrainConfig { eval_metric: EvalMetric::Both, early_stopping_rounds: 500, ..base.clone() }
}

pub fn retrain(bundle: &RetrainBundle, cfg: &TrainConfig) -> Result<FitOutput> {
    let (tx, ty, tw) = bundle.training_set()?;
    let (vx, vy) = bundle.validation_set()?;
    fit(&Dataset::weighted(&tx, &ty, &tw), Some(&Dataset::new(&vx, &vy)), cfg)
}

/// Held-out frames of one session, contiguous per video.
#[derive(Debug, Clone)]
pub struct HoldoutSession {
    pub session_id: String,
    pub data: LabeledPart,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEval {
    pub session_id: String,
    pub report: ErrorReport,
}

/// Per-session TC-error with median smoothing inside each video, plus AUC.
pub fn evaluate_sessions(model: &GbdtModel, sessions: &[HoldoutSession], window: Option<usize>) -> Result<Vec<SessionEval>> {
    sessions
        .iter()
        .map(|s| {
            let proba = model.predict_proba(&s.data.x)?;
            let report = grouped_report(&s.data.y, &proba, &s.data.x.video_groups(), window)?
                .with_auc(auc(&s.data.y, &proba).ok());
            Ok(SessionEval { session_id: s.session_id.clone(), report })
        })
        .collect()
}
