use std::collections::BTreeMap;

use log::{debug, warn};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bins::{build_bins, BinSchema, BinnedMatrix, MISSING_BIN};
use super::hist::{best_split, leaf_value, quantize, BinStat, Histogram, HistogramPool, RowStats, SplitCandidate, SplitRules};
use super::model::GbdtModel;
use super::stopping::EarlyStopping;
use super::tree::{Node, Tree};
use super::{logistic_loss, sigmoid, TrainConfig};
use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;

/// Scale of the fixed-point training loss used for the acceptance check.
const LOSS_SCALE: f64 = (1u64 << 40) as f64;
const MAX_HALVINGS: usize = 10;

/// Labeled rows with optional per-row weights.
#[derive(Debug, Clone, Copy)]
pub struct Dataset<'a> {
    pub x: &'a FeatureMatrix,
    pub y: &'a [u8],
    pub weights: Option<&'a [f64]>,
}

impl<'a> Dataset<'a> {
    pub fn new(x: &'a FeatureMatrix, y: &'a [u8]) -> Self {
        Self { x, y, weights: None }
    }

    pub fn weighted(x: &'a FeatureMatrix, y: &'a [u8], weights: &'a [f64]) -> Self {
        Self { x, y, weights: Some(weights) }
    }

    fn weight(&self, r: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[r])
    }

    fn check(&self, what: &str) -> Result<()> {
        if self.y.len() != self.x.rows() {
            return Err(Error::ShapeMismatch(format!("{what}: {} labels for {} rows", self.y.len(), self.x.rows())));
        }
        if let Some(&bad) = self.y.iter().find(|&&y| y > 1) {
            return Err(Error::Label(format!("{what}: label {bad} is not 0 or 1")));
        }
        if let Some(w) = self.weights {
            if w.len() != self.x.rows() {
                return Err(Error::ShapeMismatch(format!("{what}: {} weights for {} rows", w.len(), self.x.rows())));
            }
            if w.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
                return Err(Error::InvalidConfig(format!("{what}: weights must be finite and non-negative")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub iteration: usize,
    pub train_loss: f64,
    pub valid_metrics: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub model: GbdtModel,
    pub log: Vec<LogRecord>,
    pub warnings: Vec<String>,
}

impl FitOutput {
    /// Training log as line-delimited JSON.
    pub fn log_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.log {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Trains with early stopping driven by `cfg.eval_metric` on `valid`.
pub fn fit(train: &Dataset, valid: Option<&Dataset>, cfg: &TrainConfig) -> Result<FitOutput> {
    let stopper = valid.map(|v| EarlyStopping::from_config(cfg, v.x.video_groups()));
    fit_with_stopper(train, valid, cfg, stopper)
}

pub fn fit_with_stopper(
    train: &Dataset,
    valid: Option<&Dataset>,
    cfg: &TrainConfig,
    mut stopper: Option<EarlyStopping>,
) -> Result<FitOutput> {
    cfg.validate()?;
    train.check("train")?;
    if train.x.rows() == 0 {
        return Err(Error::EmptyInput("training set has no rows".into()));
    }
    if let Some(v) = valid {
        v.check("valid")?;
        if v.x.cols() != train.x.cols() {
            return Err(Error::ShapeMismatch(format!(
                "train has {} columns, valid {}",
                train.x.cols(),
                v.x.cols()
            )));
        }
    }
    if stopper.is_some() && valid.is_none() {
        return Err(Error::InvalidConfig("early stopping needs a validation set".into()));
    }
    let n = train.x.rows();
    let w: Vec<f64> = (0..n).map(|r| train.weight(r)).collect();
    let w_total: f64 = w.iter().sum();
    if w_total <= 0.0 {
        return Err(Error::InvalidConfig("training weights sum to zero".into()));
    }
    let w_pos: f64 = (0..n).filter(|&r| train.y[r] == 1).map(|r| w[r]).sum();
    let prevalence = (w_pos / w_total).clamp(1e-6, 1.0 - 1e-6);
    let base_score = (prevalence / (1.0 - prevalence)).ln();

    let schema = build_bins(train.x, train.weights, cfg)?;
    let data = schema.bin_matrix(train.x)?;
    let mut model = GbdtModel::constant(train.x.cols(), base_score, cfg.clone());
    let mut warnings = Vec::new();
    let mut log = Vec::new();

    let mut scores = vec![base_score; n];
    let mut valid_scores = valid.map(|v| vec![base_score; v.x.rows()]).unwrap_or_default();
    let mut loss = fixed_loss(&scores, train.y, &w);
    record(&mut log, 0, loss, w_total, valid, &valid_scores, stopper.as_mut());

    let single_class = w_pos == 0.0 || w_pos == w_total;
    let splittable = data.n_bins.iter().any(|&nb| nb >= 2);
    if !splittable {
        let msg = "DegenerateData: no feature has more than one distinct value; returning the base-score model";
        warn!("{msg}");
        warnings.push(msg.to_string());
    }

    let mut trees: Vec<Tree> = Vec::new();
    if splittable && !single_class {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut pool = HistogramPool::new(cfg.histogram_pool_size);
        let offsets = Histogram::layout(&data.n_bins);
        let rules = SplitRules {
            lambda_l1: cfg.lambda_l1,
            lambda_l2: cfg.lambda_l2,
            min_data_in_leaf: cfg.min_data_in_leaf,
            min_sum_hessian: cfg.min_sum_hessian_in_leaf,
        };
        let bagging = cfg.bagging_freq > 0 && cfg.bagging_fraction < 1.0;
        let mut bag: Vec<u32> = (0..n as u32).filter(|&r| w[r as usize] > 0.0).collect();
        let n_features = train.x.cols();

        for it in 1..=cfg.max_iterations {
            if bagging && (it - 1) % cfg.bagging_freq == 0 {
                let k = ((cfg.bagging_fraction * n as f64).round() as usize).clamp(1, n);
                let mut idx = sample(&mut rng, n, k).into_vec();
                idx.sort_unstable();
                bag = idx.into_iter().filter(|&r| w[r] > 0.0).map(|r| r as u32).collect();
            }
            let active: Vec<usize> = if cfg.feature_fraction < 1.0 {
                let k = ((cfg.feature_fraction * n_features as f64).round() as usize).clamp(1, n_features);
                let mut idx = sample(&mut rng, n_features, k).into_vec();
                idx.sort_unstable();
                idx
            } else {
                (0..n_features).collect()
            };
            let stats = row_stats(&scores, train.y, &w);
            let grown = grow_tree(&data, &schema, &offsets, &bag, &stats, &active, &rules, cfg, &mut pool);
            let Some(mut tree) = grown else {
                debug!("iteration {it}: no admissible split, stopping");
                break;
            };
            let deltas: Vec<f64> = (0..n).into_par_iter().map(|r| tree.predict_binned(&data, r)).collect();
            let mut factor = 1.0;
            let mut accepted = None;
            for _ in 0..=MAX_HALVINGS {
                let candidate: Vec<f64> = scores.iter().zip(&deltas).map(|(s, d)| s + d * factor).collect();
                let l = fixed_loss(&candidate, train.y, &w);
                if l <= loss {
                    accepted = Some((candidate, l));
                    break;
                }
                factor *= 0.5;
            }
            let Some((new_scores, new_loss)) = accepted else {
                let msg = format!("iteration {it}: tree increased training loss after {MAX_HALVINGS} halvings; stopping");
                warn!("{msg}");
                warnings.push(msg);
                break;
            };
            if factor != 1.0 {
                tree.scale_leaves(factor);
            }
            scores = new_scores;
            loss = new_loss;
            if let Some(v) = valid {
                valid_scores.par_iter_mut().enumerate().for_each(|(r, s)| *s += tree.predict_row(v.x.row(r)));
            }
            trees.push(tree);
            record(&mut log, it, loss, w_total, valid, &valid_scores, stopper.as_mut());
            if stopper.as_ref().is_some_and(|s| s.should_stop(it)) {
                break;
            }
        }
    }

    let best = match &stopper {
        Some(s) => s.best_iteration().unwrap_or(0),
        None => trees.len(),
    };
    trees.truncate(best);
    if let Some(s) = &stopper {
        model.best_metrics =
            s.names().into_iter().zip(s.best_values()).map(|(k, &v)| (k, (!v.is_nan()).then_some(v))).collect();
    }
    model.best_iteration = best;
    model.trees = trees;
    model.importances = Some(model.importance());
    model.bin_schema = Some(schema);
    Ok(FitOutput { model, log, warnings })
}

fn record(
    log: &mut Vec<LogRecord>,
    iteration: usize,
    loss: i128,
    w_total: f64,
    valid: Option<&Dataset>,
    valid_scores: &[f64],
    stopper: Option<&mut EarlyStopping>,
) {
    let mut valid_metrics = BTreeMap::new();
    if let (Some(s), Some(v)) = (stopper, valid) {
        let proba: Vec<f64> = valid_scores.iter().map(|&x| sigmoid(x)).collect();
        let values = s.observe(iteration, v.y, &proba);
        for (name, value) in s.names().into_iter().zip(values) {
            valid_metrics.insert(name, (!value.is_nan()).then_some(value));
        }
    }
    log.push(LogRecord { iteration, train_loss: loss as f64 / LOSS_SCALE / w_total, valid_metrics });
}

/// Weighted logistic loss in fixed point, independent of summation order.
fn fixed_loss(scores: &[f64], y: &[u8], w: &[f64]) -> i128 {
    scores
        .par_iter()
        .zip(y)
        .zip(w)
        .map(|((&s, &y), &w)| {
            let l = logistic_loss(s, y);
            if w.fract() == 0.0 {
                (l * LOSS_SCALE).round() as i128 * w as i128
            } else {
                (l * w * LOSS_SCALE).round() as i128
            }
        })
        .sum()
}

fn row_stats(scores: &[f64], y: &[u8], w: &[f64]) -> RowStats {
    let (g, h): (Vec<i64>, Vec<i64>) = scores
        .par_iter()
        .zip(y)
        .zip(w)
        .map(|((&s, &y), &w)| {
            let p = sigmoid(s);
            (quantize(p - y as f64, w), quantize(p * (1.0 - p), w))
        })
        .unzip();
    RowStats { g, h, w: w.to_vec() }
}

struct LeafState {
    node: usize,
    rows: Vec<u32>,
    total: BinStat,
    depth: usize,
    split: Option<SplitCandidate>,
}

#[allow(clippy::too_many_arguments)]
fn grow_tree(
    data: &BinnedMatrix,
    schema: &BinSchema,
    offsets: &[usize],
    bag: &[u32],
    stats: &RowStats,
    active: &[usize],
    rules: &SplitRules,
    cfg: &TrainConfig,
    pool: &mut HistogramPool,
) -> Option<Tree> {
    pool.clear();
    let can_split = |depth: usize, total: &BinStat| {
        cfg.max_depth.is_none_or(|d| depth < d) && total.w >= 2.0 * rules.min_data_in_leaf && total.w > 0.0
    };
    let mut total = BinStat::default();
    for &r in bag {
        let r = r as usize;
        total.g += stats.g[r];
        total.h += stats.h[r];
        total.w += stats.w[r];
    }
    let root_hist = Histogram::build(data, offsets, bag, stats, active);
    let split = if can_split(0, &total) { best_split(&root_hist, &total, active, rules) } else { None };
    split?;
    pool.put(0, root_hist);
    let mut nodes = vec![Node::Leaf { value: 0.0 }];
    let mut leaves = vec![LeafState { node: 0, rows: bag.to_vec(), total, depth: 0, split }];

    while leaves.len() < cfg.num_leaves {
        let mut pick: Option<usize> = None;
        for (i, l) in leaves.iter().enumerate() {
            if let Some(s) = l.split {
                if pick.is_none_or(|p| s.gain > leaves[p].split.unwrap().gain) {
                    pick = Some(i);
                }
            }
        }
        let Some(i) = pick else { break };
        let leaf = leaves.remove(i);
        let cand = leaf.split.unwrap();
        let col = data.column(cand.feature);
        let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = leaf.rows.iter().partition(|&&r| {
            let b = col[r as usize];
            if b == MISSING_BIN {
                cand.default_left
            } else {
                b <= cand.bin
            }
        });
        let (left_id, right_id) = (nodes.len(), nodes.len() + 1);
        nodes[leaf.node] = Node::Split {
            feature: cand.feature,
            bin_threshold: cand.bin,
            threshold: schema.features[cand.feature].upper_bound(cand.bin),
            default_left: cand.default_left,
            left: left_id,
            right: right_id,
            gain: cand.gain,
        };
        nodes.push(Node::Leaf { value: 0.0 });
        nodes.push(Node::Leaf { value: 0.0 });

        let parent_hist = pool.take(leaf.node);
        let left_small = left_rows.len() <= right_rows.len();
        let (small, large) = if left_small { (&left_rows, &right_rows) } else { (&right_rows, &left_rows) };
        let small_hist = Histogram::build(data, offsets, small, stats, active);
        let large_hist = match parent_hist {
            Some(p) => p.subtract(&small_hist),
            None => Histogram::build(data, offsets, large, stats, active),
        };
        let (left_hist, right_hist) = if left_small { (small_hist, large_hist) } else { (large_hist, small_hist) };

        for (node, rows, total, hist) in [
            (left_id, left_rows, cand.left, left_hist),
            (right_id, right_rows, cand.right, right_hist),
        ] {
            let depth = leaf.depth + 1;
            let split = if can_split(depth, &total) { best_split(&hist, &total, active, rules) } else { None };
            if split.is_some() {
                pool.put(node, hist);
            }
            leaves.push(LeafState { node, rows, total, depth, split });
        }
    }
    pool.clear();

    for l in &leaves {
        let v = leaf_value(l.total.grad(), l.total.hess(), cfg.lambda_l1, cfg.lambda_l2) * cfg.learning_rate;
        nodes[l.node] = Node::Leaf { value: v };
    }
    Some(Tree { nodes })
}
