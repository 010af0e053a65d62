use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bins::BinSchema;
use super::tree::{Node, Tree};
use super::{sigmoid, TrainConfig};
use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;
use crate::labels::write_atomic;

pub const MODEL_FORMAT: &str = "touchgrid-gbdt";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub format: String,
    pub version: u32,
    pub n_features: usize,
    pub base_score: f64,
    pub trees: Vec<Tree>,
    pub config: TrainConfig,
    #[serde(default)]
    pub best_iteration: usize,
    /// Validation metrics at the best iteration; `None` where undefined.
    #[serde(default)]
    pub best_metrics: BTreeMap<String, Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bin_schema: Option<BinSchema>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importances: Option<ImportanceReport>,
    /// Engineered column ids of the model inputs, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_ids: Option<Vec<usize>>,
}

impl GbdtModel {
    pub fn constant(n_features: usize, base_score: f64, config: TrainConfig) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            n_features,
            base_score,
            trees: Vec::new(),
            config,
            best_iteration: 0,
            best_metrics: BTreeMap::new(),
            bin_schema: None,
            importances: None,
            feature_ids: None,
        }
    }

    fn check_columns(&self, m: &FeatureMatrix) -> Result<()> {
        if m.cols() != self.n_features {
            return Err(Error::ShapeMismatch(format!("matrix has {} columns, model expects {}", m.cols(), self.n_features)));
        }
        Ok(())
    }

    /// Raw scores using the first `n_trees` trees.
    pub fn predict_raw_prefix(&self, m: &FeatureMatrix, n_trees: usize) -> Result<Vec<f64>> {
        self.check_columns(m)?;
        let trees = &self.trees[..n_trees.min(self.trees.len())];
        Ok((0..m.rows())
            .into_par_iter()
            .map(|r| {
                let row = m.row(r);
                let mut s = self.base_score;
                for t in trees {
                    s += t.predict_row(row);
                }
                s
            })
            .collect())
    }

    pub fn predict_raw(&self, m: &FeatureMatrix) -> Result<Vec<f64>> {
        self.predict_raw_prefix(m, self.trees.len())
    }

    pub fn predict_proba(&self, m: &FeatureMatrix) -> Result<Vec<f64>> {
        Ok(self.predict_raw(m)?.into_iter().map(sigmoid).collect())
    }

    pub fn importance(&self) -> ImportanceReport {
        ImportanceReport::from_trees(self.n_features, &self.trees)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Format(format!("not a model file (format {:?})", self.format)));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {}", self.version)));
        }
        if !self.base_score.is_finite() {
            return Err(Error::Format("base score is not finite".into()));
        }
        for (i, t) in self.trees.iter().enumerate() {
            t.validate(self.n_features).map_err(|e| Error::Format(format!("tree {i}: {e}")))?;
        }
        if let Some(s) = &self.bin_schema {
            if s.n_features() != self.n_features {
                return Err(Error::Format("bin schema feature count differs from model".into()));
            }
            s.validate(255)?;
        }
        if let Some(ids) = &self.feature_ids {
            if ids.len() != self.n_features {
                return Err(Error::Format("feature id list length differs from model".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let model: GbdtModel = serde_json::from_slice(bytes).map_err(|e| Error::Format(format!("model JSON: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_json()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read(path)?)
    }
}

pub fn save_model(model: &GbdtModel, path: &Path) -> Result<()> {
    model.save(path)
}

pub fn load_model(path: &Path) -> Result<GbdtModel> {
    GbdtModel::load(path)
}

/// Per-feature split-gain and split-count totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub gain: Vec<f64>,
    pub split: Vec<u64>,
}

impl ImportanceReport {
    pub fn zeros(n_features: usize) -> Self {
        Self { gain: vec![0.0; n_features], split: vec![0; n_features] }
    }

    pub fn from_trees(n_features: usize, trees: &[Tree]) -> Self {
        let mut r = Self::zeros(n_features);
        for t in trees {
            for n in &t.nodes {
                if let Node::Split { feature, gain, .. } = n {
                    r.gain[*feature] += gain;
                    r.split[*feature] += 1;
                }
            }
        }
        r
    }

    /// Sum over an ensemble of models sharing one feature layout.
    pub fn ensemble(models: &[GbdtModel]) -> Result<Self> {
        let n = models.first().map_or(0, |m| m.n_features);
        let mut r = Self::zeros(n);
        for m in models {
            if m.n_features != n {
                return Err(Error::ShapeMismatch("ensemble members have different feature counts".into()));
            }
            let part = m.importance();
            for f in 0..n {
                r.gain[f] += part.gain[f];
                r.split[f] += part.split[f];
            }
        }
        Ok(r)
    }

    pub fn n_features(&self) -> usize {
        self.gain.len()
    }

    /// Feature ids by descending gain; ties by ascending id.
    pub fn ranked_by_gain(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..self.gain.len()).collect();
        ids.sort_by(|&a, &b| self.gain[b].total_cmp(&self.gain[a]).then(a.cmp(&b)));
        ids
    }
}
