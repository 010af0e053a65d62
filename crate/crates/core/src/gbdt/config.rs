use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Validation metric used for early stopping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMetric {
    #[default]
    Auc,
    TcError,
    /// TC-error first, AUC as the secondary criterion.
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub num_leaves: usize,
    pub max_iterations: usize,
    pub learning_rate: f64,
    pub max_bins: usize,
    /// Minimum summed sample weight per leaf.
    pub min_data_in_leaf: f64,
    pub min_data_in_bin: usize,
    pub min_sum_hessian_in_leaf: f64,
    pub bagging_fraction: f64,
    pub feature_fraction: f64,
    pub bagging_freq: usize,
    pub lambda_l1: f64,
    pub lambda_l2: f64,
    pub early_stopping_rounds: usize,
    pub eval_metric: EvalMetric,
    pub max_depth: Option<usize>,
    /// Maximum number of cached histograms (one histogram covers every
    /// feature of one leaf).
    pub histogram_pool_size: usize,
    /// Median-smoothing window applied before TC-error evaluation.
    pub smooth_window: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_leaves: 31,
            max_iterations: 5000,
            learning_rate: 0.1,
            max_bins: 255,
            min_data_in_leaf: 20.0,
            min_data_in_bin: 3,
            min_sum_hessian_in_leaf: 1e-3,
            bagging_fraction: 1.0,
            feature_fraction: 1.0,
            bagging_freq: 0,
            lambda_l1: 0.0,
            lambda_l2: 0.0,
            early_stopping_rounds: 40,
            eval_metric: EvalMetric::Auc,
            max_depth: None,
            histogram_pool_size: 16_384,
            smooth_window: 5,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_leaves < 2 {
            return bad(format!("num_leaves {} < 2", self.num_leaves));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate {} outside (0, 1]", self.learning_rate));
        }
        if !(2..=255).contains(&self.max_bins) {
            return bad(format!("max_bins {} outside [2, 255]", self.max_bins));
        }
        for (name, v) in [("bagging_fraction", self.bagging_fraction), ("feature_fraction", self.feature_fraction)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} {v} outside (0, 1]"));
            }
        }
        for (name, v) in [
            ("lambda_l1", self.lambda_l1),
            ("lambda_l2", self.lambda_l2),
            ("min_data_in_leaf", self.min_data_in_leaf),
            ("min_sum_hessian_in_leaf", self.min_sum_hessian_in_leaf),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} {v} must be finite and non-negative"));
            }
        }
        if self.lambda_l2 == 0.0 && self.min_sum_hessian_in_leaf == 0.0 {
            return bad("lambda_l2 and min_sum_hessian_in_leaf cannot both be 0".into());
        }
        if self.max_depth == Some(0) {
            return bad("max_depth must be at least 1".into());
        }
        if self.histogram_pool_size == 0 {
            return bad("histogram_pool_size must be positive".into());
        }
        if self.smooth_window.is_multiple_of(2) {
            return Err(Error::InvalidWindow(self.smooth_window));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        assert_eq!((cfg.num_leaves, cfg.max_bins, cfg.early_stopping_rounds), (31, 255, 40));
    }

    #[test]
    fn rejects_out_of_range() {
        let base = TrainConfig::default();
        let cases = [
            TrainConfig { num_leaves: 1, ..base.clone() },
            TrainConfig { learning_rate: 0.0, ..base.clone() },
            TrainConfig { learning_rate: 1.5, ..base.clone() },
            TrainConfig { max_bins: 256, ..base.clone() },
            TrainConfig { max_bins: 1, ..base.clone() },
            TrainConfig { bagging_fraction: 0.0, ..base.clone() },
            TrainConfig { feature_fraction: 1.1, ..base.clone() },
            TrainConfig { max_depth: Some(0), ..base.clone() },
        ];
        for c in cases {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn partial_json_takes_defaults() {
        let cfg: TrainConfig = serde_json::from_str(r#"{"num_leaves": 7, "eval_metric": "both"}"#).unwrap();
        assert_eq!(cfg.num_leaves, 7);
        assert_eq!(cfg.eval_metric, EvalMetric::Both);
        assert_eq!(cfg.max_iterations, 5000);
    }
}
