use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::error::{Error, Result};
use crate::ingest::FeatureMatrix;

/// Bin 0 holds undefined values; finite values fall into bins `1..=n_bins`.
pub const MISSING_BIN: u8 = 0;

/// Bin boundaries of one feature. A value `v` lands in bin `1 + #{c : c < v}`,
/// so `cuts[k]` is the inclusive upper bound of bin `k + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBins {
    pub cuts: Vec<f64>,
    /// False when the training data held no defined value.
    pub has_values: bool,
}

impl FeatureBins {
    /// Number of value bins (missing bin excluded).
    pub fn n_bins(&self) -> usize {
        if self.has_values {
            self.cuts.len() + 1
        } else {
            0
        }
    }

    pub fn bin(&self, v: f32) -> u8 {
        if v.is_nan() {
            return MISSING_BIN;
        }
        if !self.has_values {
            return MISSING_BIN;
        }
        let v = v as f64;
        (1 + self.cuts.partition_point(|&c| c < v)) as u8
    }

    /// Largest value routed left by a split after bin `b`.
    pub fn upper_bound(&self, b: u8) -> f64 {
        self.cuts[b as usize - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSchema {
    pub features: Vec<FeatureBins>,
}

impl BinSchema {
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn validate(&self, max_bins: usize) -> Result<()> {
        for (f, b) in self.features.iter().enumerate() {
            if b.n_bins() > max_bins {
                return Err(Error::Format(format!("feature {f} has {} bins > {max_bins}", b.n_bins())));
            }
            if b.cuts.windows(2).any(|w| !(w[0] < w[1])) || b.cuts.iter().any(|c| !c.is_finite()) {
                return Err(Error::Format(format!("feature {f} bin bounds are not strictly increasing")));
            }
        }
        Ok(())
    }

    pub fn bin_matrix(&self, m: &FeatureMatrix) -> Result<BinnedMatrix> {
        if m.cols() != self.n_features() {
            return Err(Error::ShapeMismatch(format!("{} columns, schema has {}", m.cols(), self.n_features())));
        }
        let rows = m.rows();
        let columns: Vec<Vec<u8>> = self
            .features
            .par_iter()
            .zip(transpose(m))
            .map(|(fb, col)| col.into_iter().map(|v| fb.bin(v)).collect())
            .collect();
        Ok(BinnedMatrix {
            rows,
            n_bins: self.features.iter().map(FeatureBins::n_bins).collect(),
            bins: columns.concat(),
        })
    }
}

/// Column-major bin codes.
#[derive(Debug, Clone)]
pub struct BinnedMatrix {
    pub rows: usize,
    pub n_bins: Vec<usize>,
    pub bins: Vec<u8>,
}

impl BinnedMatrix {
    pub fn cols(&self) -> usize {
        self.n_bins.len()
    }

    pub fn column(&self, f: usize) -> &[u8] {
        &self.bins[f * self.rows..(f + 1) * self.rows]
    }

    pub fn get(&self, r: usize, f: usize) -> u8 {
        self.bins[f * self.rows + r]
    }
}

/// Unsigned key whose order matches `f32::total_cmp`.
fn order_key(v: f32) -> u32 {
    let b = v.to_bits();
    if b >> 31 == 1 { !b } else { b | 1 << 31 }
}

fn from_order_key(k: u32) -> f32 {
    f32::from_bits(if k >> 31 == 1 { k & !(1 << 31) } else { !k })
}

/// Column-major copy of a row-major matrix.
fn transpose(m: &FeatureMatrix) -> Vec<Vec<f32>> {
    let mut cols: Vec<Vec<f32>> = (0..m.cols()).map(|_| Vec::with_capacity(m.rows())).collect();
    for r in 0..m.rows() {
        for (col, &v) in cols.iter_mut().zip(m.row(r)) {
            col.push(v);
        }
    }
    cols
}

/// Quantile bins from (optionally weighted) training values.
pub fn build_bins(train: &FeatureMatrix, weights: Option<&[f64]>, cfg: &TrainConfig) -> Result<BinSchema> {
    if train.rows() == 0 {
        return Err(Error::EmptyInput("training set has no rows".into()));
    }
    if let Some(w) = weights {
        if w.len() != train.rows() {
            return Err(Error::ShapeMismatch(format!("{} weights for {} rows", w.len(), train.rows())));
        }
    }
    let features = transpose(train)
        .into_par_iter()
        .map(|col| {
            let vals: Vec<(f32, f64)> = match weights {
                Some(w) => {
                    let mut vals: Vec<(f32, f64)> = col
                        .into_iter()
                        .zip(w)
                        .filter(|&(v, &w)| !v.is_nan() && w > 0.0)
                        .map(|(v, &w)| (v, w))
                        .collect();
                    vals.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
                    vals
                }
                None => {
                    let mut keys: Vec<u32> = col.into_iter().filter(|v| !v.is_nan()).map(order_key).collect();
                    keys.sort_unstable();
                    keys.into_iter().map(|k| (from_order_key(k), 1.0)).collect()
                }
            };
            feature_bins(&vals, cfg.max_bins, cfg.min_data_in_bin as f64)
        })
        .collect();
    Ok(BinSchema { features })
}

fn feature_bins(sorted: &[(f32, f64)], max_bins: usize, min_in_bin: f64) -> FeatureBins {
    // Distinct values with their summed weights.
    let mut distinct: Vec<(f64, f64)> = Vec::new();
    for &(v, w) in sorted {
        let v = v as f64;
        match distinct.last_mut() {
            Some(last) if last.0 == v => last.1 += w,
            _ => distinct.push((v, w)),
        }
    }
    if distinct.is_empty() {
        return FeatureBins { cuts: Vec::new(), has_values: false };
    }
    let mid = |i: usize| {
        let (a, b) = (distinct[i].0, distinct[i + 1].0);
        let m = a + (b - a) / 2.0;
        // Guard against rounding onto the upper neighbour.
        if m < b {
            m
        } else {
            a
        }
    };
    let mut cuts = Vec::new();
    if distinct.len() <= max_bins {
        let mut acc = 0.0;
        for i in 0..distinct.len() - 1 {
            acc += distinct[i].1;
            if acc >= min_in_bin {
                cuts.push(mid(i));
                acc = 0.0;
            }
        }
        // A light final bin joins its predecessor.
        acc += distinct.last().unwrap().1;
        if acc < min_in_bin && !cuts.is_empty() {
            cuts.pop();
        }
    } else {
        let total: f64 = distinct.iter().map(|d| d.1).sum();
        let nb = max_bins as f64;
        let target = |k: usize| (k as f64 * total / nb).round();
        let mut cum = 0.0;
        let mut since_cut = 0.0;
        let mut k = 1;
        for i in 0..distinct.len() - 1 {
            cum += distinct[i].1;
            since_cut += distinct[i].1;
            if k < max_bins && cum >= target(k) && since_cut >= min_in_bin {
                cuts.push(mid(i));
                since_cut = 0.0;
                while k < max_bins && target(k) <= cum {
                    k += 1;
                }
            }
        }
    }
    FeatureBins { cuts, has_values: true }
}
