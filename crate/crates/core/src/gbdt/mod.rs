//! Histogram gradient-boosted decision trees for binary classification.
//!
//! Newton boosting on the logistic loss with leaf-wise growth. Leaf output
//! is `-sign(G) max(|G| - l1, 0) / (H + l2)` times the learning rate, and a
//! split gains `(S(G_L, H_L) + S(G_R, H_R) - S(G, H)) / 2` with
//! `S(G, H) = soft(G, l1)^2 / (H + l2)`.
//!
//! A tree that would raise the training loss has its leaves halved (up to
//! ten times) and is discarded, ending training, if that does not help.

mod bins;
mod config;
mod hist;
mod model;
mod stopping;
mod train;
mod tree;

pub use bins::{build_bins, BinSchema, BinnedMatrix, FeatureBins, MISSING_BIN};
pub use config::{EvalMetric, TrainConfig};
pub use hist::{best_split_for_feature, leaf_value, quantize, split_gain, BinStat, SplitCandidate, SplitRules, SCALE};
pub use model::{load_model, save_model, GbdtModel, ImportanceReport, MODEL_FORMAT, MODEL_VERSION};
pub use stopping::{AucMetric, EarlyStopping, TcErrorMetric, ValidationMetric};
pub use train::{fit, fit_with_stopper, Dataset, FitOutput, LogRecord};
pub use tree::{Node, Tree};

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^s) - y s`, stable for large `|s|`.
pub fn logistic_loss(s: f64, y: u8) -> f64 {
    s.max(0.0) + (-s.abs()).exp().ln_1p() - if y == 1 { s } else { 0.0 }
}

/// Mean weighted logistic loss of a model's raw scores.
pub fn mean_logistic_loss(scores: &[f64], y: &[u8], weights: Option<&[f64]>) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, (&s, &t)) in scores.iter().zip(y).enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        num += w * logistic_loss(s, t);
        den += w;
    }
    num / den
}
