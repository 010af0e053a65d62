//! Temporal feature engineering.
//!
//! A base matrix with `F` columns expands into `S` transform sets of `F`
//! columns each (original, shifts, rolling means, rolling standard
//! deviations, discrete differences) followed by one cross-feature standard
//! deviation column per set. With the default configuration `S = 41`, so
//! 2,048 base features become `41 * 2048 + 41 = 84,009` columns.
//!
//! Every transform is evaluated inside a single video; positions whose
//! window reaches past either end of the video are undefined (NaN).

use std::fmt;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hashing::json_hash;
use crate::ingest::{FeatureMatrix, UNDEFINED};

/// Number of rows in the canonical edge-mask index: the first and last
/// [`EDGE_HALF`] frames of a video.
pub const EDGE_ROWS: usize = 100;
pub const EDGE_HALF: usize = 50;

/// Sign convention of the discrete difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffSign {
    /// `out[t] = x[t] - x[t + s]`
    #[default]
    Forward,
    /// `out[t] = x[t + s] - x[t]`
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatGenConfig {
    pub shifts: Vec<i64>,
    pub windows: Vec<usize>,
    pub diff_steps: Vec<i64>,
    pub include_cross_std: bool,
    pub diff_sign: DiffSign,
}

impl Default for FeatGenConfig {
    fn default() -> Self {
        Self {
            shifts: vec![-5, -4, -3, -2, -1, 1, 2, 3, 4, 5],
            windows: vec![3, 7, 11, 15, 21, 41, 61],
            diff_steps: vec![-50, -20, -10, -5, -4, -3, -2, -1, 1, 2, 3, 4, 5, 10, 20, 50],
            include_cross_std: true,
            diff_sign: DiffSign::Forward,
        }
    }
}

impl FeatGenConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(&w) = self.windows.iter().find(|&&w| w < 3 || w % 2 == 0) {
            return Err(Error::InvalidWindow(w));
        }
        if self.shifts.contains(&0) || self.diff_steps.contains(&0) {
            return Err(Error::InvalidOffset(0));
        }
        Ok(())
    }

    /// `1 + |shifts| + 2 |windows| + |diff_steps|`.
    pub fn set_count(&self) -> usize {
        1 + self.shifts.len() + 2 * self.windows.len() + self.diff_steps.len()
    }

    pub fn sets(&self) -> Vec<Transform> {
        let mut sets = vec![Transform::Original];
        sets.extend(self.shifts.iter().map(|&k| Transform::Shift(k)));
        sets.extend(self.windows.iter().map(|&w| Transform::RollingMean(w)));
        sets.extend(self.windows.iter().map(|&w| Transform::RollingStd(w)));
        sets.extend(self.diff_steps.iter().map(|&s| Transform::Diff(s, self.diff_sign)));
        sets
    }

    pub fn output_columns(&self, n_base: usize) -> usize {
        let s = self.set_count();
        s * n_base + if self.include_cross_std { s } else { 0 }
    }

    pub fn hash(&self) -> String {
        json_hash(self)
    }
}

/// One transform family applied to every base feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Original,
    Shift(i64),
    RollingMean(usize),
    RollingStd(usize),
    Diff(i64, DiffSign),
}

impl Transform {
    /// Whether position `t` of an `n`-frame video is undefined.
    pub fn undefined_at(&self, t: usize, n: usize) -> bool {
        let (t, n) = (t as i64, n as i64);
        match *self {
            Transform::Original => false,
            Transform::Shift(k) => t - k < 0 || t - k >= n,
            Transform::RollingMean(w) | Transform::RollingStd(w) => {
                let h = (w / 2) as i64;
                t < h || t >= n - h
            }
            Transform::Diff(s, _) => t + s < 0 || t + s >= n,
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        match *self {
            Transform::Original => out.copy_from_slice(x),
            Transform::Shift(k) => shift_series(x, k, out),
            Transform::RollingMean(w) => rolling_mean_series(x, w, out),
            Transform::RollingStd(w) => rolling_std_series(x, w, out),
            Transform::Diff(s, sign) => diff_series(x, s, sign, out),
        }
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transform::Original => write!(f, "original"),
            Transform::Shift(k) => write!(f, "shift({k})"),
            Transform::RollingMean(w) => write!(f, "rolling_mean({w})"),
            Transform::RollingStd(w) => write!(f, "rolling_std({w})"),
            Transform::Diff(s, DiffSign::Forward) => write!(f, "diff({s})"),
            Transform::Diff(s, DiffSign::Backward) => write!(f, "diff_backward({s})"),
        }
    }
}

/// What an engineered column holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnSource {
    /// Base feature `base` under transform set `set`.
    Feature { set: usize, base: usize },
    /// Cross-feature standard deviation of transform set `set`.
    CrossStd { set: usize },
}

/// Layout of an engineered matrix; maps column ids to their source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub n_base: usize,
    pub sets: Vec<Transform>,
    pub include_cross_std: bool,
}

impl ColumnMap {
    pub fn new(cfg: &FeatGenConfig, n_base: usize) -> Self {
        Self { n_base, sets: cfg.sets(), include_cross_std: cfg.include_cross_std }
    }

    pub fn n_columns(&self) -> usize {
        self.sets.len() * self.n_base + if self.include_cross_std { self.sets.len() } else { 0 }
    }

    pub fn source(&self, id: usize) -> Result<ColumnSource> {
        let feature_cols = self.sets.len() * self.n_base;
        if id < feature_cols {
            Ok(ColumnSource::Feature { set: id / self.n_base, base: id % self.n_base })
        } else if id < self.n_columns() {
            Ok(ColumnSource::CrossStd { set: id - feature_cols })
        } else {
            Err(Error::ShapeMismatch(format!("column {id} beyond {} engineered columns", self.n_columns())))
        }
    }

    pub fn transform(&self, id: usize) -> Result<Transform> {
        Ok(match self.source(id)? {
            ColumnSource::Feature { set, .. } | ColumnSource::CrossStd { set } => self.sets[set],
        })
    }

    /// Human-readable column name, e.g. `f12:rolling_std(7)` or `xstd:shift(-1)`.
    pub fn name(&self, id: usize) -> Result<String> {
        Ok(match self.source(id)? {
            ColumnSource::Feature { set, base } => format!("f{base}:{}", self.sets[set]),
            ColumnSource::CrossStd { set } => format!("xstd:{}", self.sets[set]),
        })
    }
}

/// Sidecar block describing how an engineered matrix was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatgenBlock {
    pub version: u32,
    pub config: FeatGenConfig,
    pub config_hash: String,
    pub column_map: ColumnMap,
    /// Set when the matrix holds a subset of the engineered columns, in order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selected_columns: Option<Vec<usize>>,
}

impl FeatgenBlock {
    pub fn new(cfg: &FeatGenConfig, n_base: usize) -> Self {
        Self {
            version: 1,
            config: cfg.clone(),
            config_hash: cfg.hash(),
            column_map: ColumnMap::new(cfg, n_base),
            selected_columns: None,
        }
    }

    /// Engineered column ids of the matrix columns, in order.
    pub fn column_ids(&self) -> Vec<usize> {
        self.selected_columns.clone().unwrap_or_else(|| (0..self.column_map.n_columns()).collect())
    }

    /// Block for a further column subset (`subset` indexes the current columns).
    pub fn select(&self, subset: &[usize]) -> Result<FeatgenBlock> {
        let ids = self.column_ids();
        let selected = subset
            .iter()
            .map(|&c| ids.get(c).copied().ok_or_else(|| Error::ShapeMismatch(format!("column {c} out of range"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatgenBlock { selected_columns: Some(selected), ..self.clone() })
    }
}

fn shift_series(x: &[f64], k: i64, out: &mut [f64]) {
    let n = x.len() as i64;
    for (t, o) in out.iter_mut().enumerate() {
        let src = t as i64 - k;
        *o = if (0..n).contains(&src) { x[src as usize] } else { f64::NAN };
    }
}

fn rolling_mean_series(x: &[f64], w: usize, out: &mut [f64]) {
    let h = w / 2;
    let n = x.len();
    out.fill(f64::NAN);
    if n < w {
        return;
    }
    // Prefix sums of the defined values plus a running count of undefined ones.
    let mut sum = vec![0.0f64; n + 1];
    let mut nan = vec![0usize; n + 1];
    for i in 0..n {
        let v = x[i];
        sum[i + 1] = sum[i] + if v.is_nan() { 0.0 } else { v };
        nan[i + 1] = nan[i] + usize::from(v.is_nan());
    }
    for t in h..n - h {
        let (lo, hi) = (t - h, t + h + 1);
        if nan[hi] == nan[lo] {
            out[t] = (sum[hi] - sum[lo]) / w as f64;
        }
    }
}

fn rolling_std_series(x: &[f64], w: usize, out: &mut [f64]) {
    let h = w / 2;
    let n = x.len();
    out.fill(f64::NAN);
    if n < w {
        return;
    }
    for t in h..n - h {
        let win = &x[t - h..=t + h];
        let mean = win.iter().sum::<f64>() / w as f64;
        let ss: f64 = win.iter().map(|v| (v - mean) * (v - mean)).sum();
        out[t] = (ss / w as f64).sqrt();
    }
}

fn diff_series(x: &[f64], s: i64, sign: DiffSign, out: &mut [f64]) {
    let n = x.len() as i64;
    for (t, o) in out.iter_mut().enumerate() {
        let other = t as i64 + s;
        *o = if (0..n).contains(&other) {
            match sign {
                DiffSign::Forward => x[t] - x[other as usize],
                DiffSign::Backward => x[other as usize] - x[t],
            }
        } else {
            f64::NAN
        };
    }
}

fn population_std(values: &[f32]) -> f32 {
    if values.iter().any(|v| v.is_nan()) {
        return UNDEFINED;
    }
    let n = values.len() as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / n;
    let ss: f64 = values.iter().map(|&v| (v as f64 - mean).powi(2)).sum();
    (ss / n).sqrt() as f32
}

fn to_f32(v: f64) -> f32 {
    if v.is_nan() {
        UNDEFINED
    } else {
        v as f32
    }
}

/// Applies `transform` to every column of `m`, video by video.
fn apply_per_video(m: &FeatureMatrix, transform: Transform) -> Result<FeatureMatrix> {
    m.validate_provenance()?;
    let groups = m.video_groups();
    let columns: Vec<Vec<f32>> = (0..m.cols())
        .into_par_iter()
        .map(|c| transform_column(m, c, &groups, transform))
        .collect();
    let mut data = vec![0.0f32; m.rows() * m.cols()];
    for (c, col) in columns.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            data[r * m.cols() + c] = v;
        }
    }
    FeatureMatrix::new(m.rows(), m.cols(), data, m.row_index().to_vec())
}

fn transform_column(m: &FeatureMatrix, c: usize, groups: &[Range<usize>], transform: Transform) -> Vec<f32> {
    let mut out = Vec::with_capacity(m.rows());
    let mut buf = Vec::new();
    for g in groups {
        let x: Vec<f64> = g.clone().map(|r| m.get(r, c) as f64).collect();
        buf.resize(x.len(), 0.0);
        transform.apply(&x, &mut buf);
        out.extend(buf.iter().map(|&v| to_f32(v)));
    }
    out
}

/// `out[t] = m[t - k]` within each video.
pub fn shift_features(m: &FeatureMatrix, k: i64) -> Result<FeatureMatrix> {
    if k == 0 {
        return Err(Error::InvalidOffset(0));
    }
    apply_per_video(m, Transform::Shift(k))
}

/// Centered rolling mean over `w` frames.
pub fn rolling_mean(m: &FeatureMatrix, w: usize) -> Result<FeatureMatrix> {
    if w < 3 || w.is_multiple_of(2) {
        return Err(Error::InvalidWindow(w));
    }
    apply_per_video(m, Transform::RollingMean(w))
}

/// Centered rolling population standard deviation over `w` frames.
pub fn rolling_std(m: &FeatureMatrix, w: usize) -> Result<FeatureMatrix> {
    if w < 3 || w.is_multiple_of(2) {
        return Err(Error::InvalidWindow(w));
    }
    apply_per_video(m, Transform::RollingStd(w))
}

/// `out[t] = m[t] - m[t + s]` within each video.
pub fn discrete_diff(m: &FeatureMatrix, s: i64) -> Result<FeatureMatrix> {
    discrete_diff_signed(m, s, DiffSign::Forward)
}

pub fn discrete_diff_signed(m: &FeatureMatrix, s: i64, sign: DiffSign) -> Result<FeatureMatrix> {
    if s == 0 {
        return Err(Error::InvalidOffset(0));
    }
    apply_per_video(m, Transform::Diff(s, sign))
}

/// Per-row population standard deviation across all columns of `set`.
pub fn cross_feature_std(set: &FeatureMatrix) -> Result<Vec<f32>> {
    if set.cols() < 2 {
        return Err(Error::TooFewFeatures(set.cols()));
    }
    Ok((0..set.rows()).map(|r| population_std(set.row(r))).collect())
}

/// Full expansion of `m` under `cfg`; see the module docs for the column order.
pub fn engineer_all(m: &FeatureMatrix, cfg: &FeatGenConfig) -> Result<FeatureMatrix> {
    cfg.validate()?;
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::EmptyInput(format!("{}x{} base matrix", m.rows(), m.cols())));
    }
    m.validate_provenance()?;
    let groups = m.video_groups();
    let sets = cfg.sets();
    let n_base = m.cols();
    let rows = m.rows();
    let out_cols = cfg.output_columns(n_base);

    // Column-parallel: each base feature yields one column per set.
    let per_feature: Vec<Vec<Vec<f32>>> = (0..n_base)
        .into_par_iter()
        .map(|c| sets.iter().map(|&t| transform_column(m, c, &groups, t)).collect())
        .collect();

    let mut data = vec![0.0f32; rows * out_cols];
    data.par_chunks_mut(out_cols).enumerate().for_each(|(r, row)| {
        for (s, _) in sets.iter().enumerate() {
            let block = &mut row[s * n_base..(s + 1) * n_base];
            for (b, slot) in block.iter_mut().enumerate() {
                *slot = per_feature[b][s][r];
            }
        }
        if cfg.include_cross_std {
            let feature_cols = sets.len() * n_base;
            for s in 0..sets.len() {
                let v = population_std(&row[s * n_base..(s + 1) * n_base]);
                row[feature_cols + s] = v;
            }
        }
    });
    FeatureMatrix::new(rows, out_cols, data, m.row_index().to_vec())
}

/// Undefined pattern of the first and last [`EDGE_HALF`] frames of a video
/// for a subset of engineered columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeMaskIndex {
    columns: Vec<usize>,
    n_rows: usize,
    mask: Vec<bool>,
}

impl EdgeMaskIndex {
    /// Row `r < 50` describes frame `r`; row `r >= 50` describes frame
    /// `n - 100 + r` of an `n >= 100` frame video.
    pub fn build(map: &ColumnMap, feature_subset: &[usize]) -> Result<Self> {
        let transforms = feature_subset.iter().map(|&id| map.transform(id)).collect::<Result<Vec<_>>>()?;
        let mut mask = Vec::with_capacity(EDGE_ROWS * transforms.len());
        for r in 0..EDGE_ROWS {
            mask.extend(transforms.iter().map(|t| t.undefined_at(r, EDGE_ROWS)));
        }
        Ok(Self { columns: feature_subset.to_vec(), n_rows: EDGE_ROWS, mask })
    }

    /// Index from an explicit row-major boolean matrix.
    pub fn from_rows(columns: Vec<usize>, rows: Vec<Vec<bool>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("edge mask index needs at least one row".into()));
        }
        if rows.iter().any(|r| r.len() != columns.len()) {
            return Err(Error::ShapeMismatch("edge mask row width".into()));
        }
        Ok(Self { n_rows: rows.len(), mask: rows.into_iter().flatten().collect(), columns })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn row(&self, r: usize) -> &[bool] {
        &self.mask[r * self.columns.len()..(r + 1) * self.columns.len()]
    }

    pub fn is_undefined(&self, r: usize, c: usize) -> bool {
        self.row(r)[c]
    }
}

pub fn build_edge_mask_index(map: &ColumnMap, feature_subset: &[usize]) -> Result<EdgeMaskIndex> {
    EdgeMaskIndex::build(map, feature_subset)
}

/// Copy of `dataset` where each row takes the undefined pattern of a
/// uniformly drawn index row. Deterministic for a given seed.
pub fn mask_duplicate(dataset: &FeatureMatrix, idx: &EdgeMaskIndex, seed: u64) -> Result<FeatureMatrix> {
    if dataset.cols() != idx.n_columns() {
        return Err(Error::ShapeMismatch(format!(
            "dataset has {} columns, edge index {}",
            dataset.cols(),
            idx.n_columns()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = dataset.clone();
    for r in 0..out.rows() {
        let pick = rng.random_range(0..idx.n_rows());
        for (c, &undefined) in idx.row(pick).iter().enumerate() {
            if undefined {
                out.set(r, c, UNDEFINED);
            }
        }
    }
    Ok(out)
}

/// Indices of rows with no undefined entry.
pub fn defined_rows(m: &FeatureMatrix) -> Vec<usize> {
    (0..m.rows()).filter(|&r| m.is_defined_row(r)).collect()
}

pub fn drop_undefined_rows(m: &FeatureMatrix) -> FeatureMatrix {
    m.select_rows(&defined_rows(m))
}
