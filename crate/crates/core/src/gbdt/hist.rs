//! Fixed-point gradient histograms.
//!
//! Gradients and hessians are accumulated as integers scaled by 2^30, so
//! sums do not depend on row order: a row of weight 2 contributes exactly
//! what two copies contribute, and `parent - child` equals the sibling built
//! from scratch.

use std::collections::HashMap;

use rayon::prelude::*;

use super::bins::BinnedMatrix;

pub const SCALE: f64 = (1u64 << 30) as f64;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BinStat {
    pub g: i64,
    pub h: i64,
    pub w: f64,
}

impl BinStat {
    fn add(&mut self, o: &BinStat) {
        self.g += o.g;
        self.h += o.h;
        self.w += o.w;
    }

    fn sub(&self, o: &BinStat) -> BinStat {
        BinStat { g: self.g - o.g, h: self.h - o.h, w: self.w - o.w }
    }

    pub fn grad(&self) -> f64 {
        self.g as f64 / SCALE
    }

    pub fn hess(&self) -> f64 {
        self.h as f64 / SCALE
    }
}

/// Quantize `x * w`; integer weights scale the quantized value so that
/// repeated rows and weighted rows agree exactly.
pub fn quantize(x: f64, w: f64) -> i64 {
    if w.fract() == 0.0 {
        (x * SCALE).round() as i64 * w as i64
    } else {
        (x * w * SCALE).round() as i64
    }
}

/// Per-row quantized statistics for one boosting iteration.
pub struct RowStats {
    pub g: Vec<i64>,
    pub h: Vec<i64>,
    pub w: Vec<f64>,
}

/// One leaf's histogram over all features; bin 0 of each feature is missing.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub offsets: Vec<usize>,
    pub bins: Vec<BinStat>,
}

impl Histogram {
    pub fn layout(n_bins: &[usize]) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(n_bins.len() + 1);
        let mut acc = 0;
        for &nb in n_bins {
            offsets.push(acc);
            acc += nb + 1;
        }
        offsets.push(acc);
        offsets
    }

    /// Direct construction over `rows` for the `active` features; inactive
    /// features stay zero.
    pub fn build(data: &BinnedMatrix, offsets: &[usize], rows: &[u32], stats: &RowStats, active: &[usize]) -> Self {
        // Gathered once so every feature pass reads the statistics sequentially.
        let ordered: Vec<BinStat> = rows
            .iter()
            .map(|&r| {
                let r = r as usize;
                BinStat { g: stats.g[r], h: stats.h[r], w: stats.w[r] }
            })
            .collect();
        let parts: Vec<(usize, Vec<BinStat>)> = active
            .par_iter()
            .map(|&f| {
                let width = offsets[f + 1] - offsets[f];
                let mut local = vec![BinStat::default(); width];
                let col = data.column(f);
                for (&r, o) in rows.iter().zip(&ordered) {
                    local[col[r as usize] as usize].add(o);
                }
                (f, local)
            })
            .collect();
        let mut bins = vec![BinStat::default(); *offsets.last().unwrap()];
        for (f, local) in parts {
            bins[offsets[f]..offsets[f + 1]].copy_from_slice(&local);
        }
        Self { offsets: offsets.to_vec(), bins }
    }

    pub fn subtract(&self, child: &Histogram) -> Histogram {
        Histogram {
            offsets: self.offsets.clone(),
            bins: self.bins.iter().zip(&child.bins).map(|(a, b)| a.sub(b)).collect(),
        }
    }

    pub fn feature(&self, f: usize) -> &[BinStat] {
        &self.bins[self.offsets[f]..self.offsets[f + 1]]
    }
}

/// L1 soft threshold.
fn soft(g: f64, l1: f64) -> f64 {
    g.signum() * (g.abs() - l1).max(0.0)
}

/// Leaf output before the learning rate: `-sign(G) max(|G| - l1, 0) / (H + l2)`.
pub fn leaf_value(g: f64, h: f64, l1: f64, l2: f64) -> f64 {
    -soft(g, l1) / (h + l2)
}

fn score(g: f64, h: f64, l1: f64, l2: f64) -> f64 {
    let t = soft(g, l1);
    t * t / (h + l2)
}

pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, l1: f64, l2: f64) -> f64 {
    0.5 * (score(gl, hl, l1, l2) + score(gr, hr, l1, l2) - score(gl + gr, hl + hr, l1, l2))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub bin: u8,
    pub default_left: bool,
    pub gain: f64,
    pub left: BinStat,
    pub right: BinStat,
}

pub struct SplitRules {
    pub lambda_l1: f64,
    pub lambda_l2: f64,
    pub min_data_in_leaf: f64,
    pub min_sum_hessian: f64,
}

/// Best split of one feature histogram. Candidates are visited by threshold
/// ascending, default-left before default-right; only a strictly higher
/// gain replaces the incumbent.
pub fn best_split_for_feature(f: usize, hist: &[BinStat], total: &BinStat, rules: &SplitRules) -> Option<SplitCandidate> {
    let nb = hist.len() - 1;
    if nb < 2 {
        return None;
    }
    let missing = hist[0];
    let (g, h) = (total.grad(), total.hess());
    let parent = score(g, h, rules.lambda_l1, rules.lambda_l2);
    let mut best: Option<SplitCandidate> = None;
    let mut cum = BinStat::default();
    for b in 1..nb {
        cum.add(&hist[b]);
        for default_left in [true, false] {
            let mut left = cum;
            if default_left {
                left.add(&missing);
            }
            let right = total.sub(&left);
            if left.w < rules.min_data_in_leaf || right.w < rules.min_data_in_leaf {
                continue;
            }
            let (hl, hr) = (left.hess(), right.hess());
            if hl < rules.min_sum_hessian || hr < rules.min_sum_hessian || left.w <= 0.0 || right.w <= 0.0 {
                continue;
            }
            let gain = 0.5
                * (score(left.grad(), hl, rules.lambda_l1, rules.lambda_l2)
                    + score(right.grad(), hr, rules.lambda_l1, rules.lambda_l2)
                    - parent);
            if gain > 0.0 && best.is_none_or(|c| gain > c.gain) {
                best = Some(SplitCandidate { feature: f, bin: b as u8, default_left, gain, left, right });
            }
        }
    }
    best
}

/// Best split over the active features; ties keep the lowest feature id.
pub fn best_split(hist: &Histogram, total: &BinStat, active: &[usize], rules: &SplitRules) -> Option<SplitCandidate> {
    let per_feature: Vec<Option<SplitCandidate>> = active
        .par_iter()
        .map(|&f| best_split_for_feature(f, hist.feature(f), total, rules))
        .collect();
    let mut best: Option<SplitCandidate> = None;
    for c in per_feature.into_iter().flatten() {
        if best.is_none_or(|b| c.gain > b.gain) {
            best = Some(c);
        }
    }
    best
}

/// Bounded cache of leaf histograms with least-recently-used eviction.
pub struct HistogramPool {
    capacity: usize,
    tick: u64,
    entries: HashMap<usize, (u64, Histogram)>,
}

impl HistogramPool {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), tick: 0, entries: HashMap::new() }
    }

    pub fn put(&mut self, leaf: usize, hist: Histogram) {
        self.tick += 1;
        if !self.entries.contains_key(&leaf) && self.entries.len() >= self.capacity {
            if let Some(&victim) = self.entries.iter().min_by_key(|(_, (t, _))| *t).map(|(k, _)| k) {
                self.entries.remove(&victim);
            }
        }
        self.entries.insert(leaf, (self.tick, hist));
    }

    pub fn take(&mut self, leaf: usize) -> Option<Histogram> {
        self.entries.remove(&leaf).map(|(_, h)| h)
    }

    #[cfg(test)]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_leaf() {
        assert_eq!(leaf_value(4.0, 2.0, 1.0, 1.0), -1.0);
        assert_eq!(leaf_value(-4.0, 2.0, 1.0, 1.0), 1.0);
        assert_eq!(leaf_value(0.5, 2.0, 1.0, 1.0), 0.0);
    }

    #[test]
    fn quantized_weights_match_repetition() {
        for x in [0.123456789, -0.987654321, 1e-7] {
            assert_eq!(quantize(x, 3.0), 3 * quantize(x, 1.0));
        }
    }

    fn random_case(seed: u64) -> (BinnedMatrix, RowStats, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = 300;
        let n_bins = vec![5, 1, 9];
        let mut bins = Vec::new();
        for &nb in &n_bins {
            bins.extend((0..rows).map(|_| rng.random_range(0..=nb as u8)));
        }
        let data = BinnedMatrix { rows, n_bins, bins };
        let stats = RowStats {
            g: (0..rows).map(|_| quantize(rng.random_range(-1.0..1.0), 1.0)).collect(),
            h: (0..rows).map(|_| quantize(rng.random_range(0.0..0.25), 1.0)).collect(),
            w: vec![1.0; rows],
        };
        (data, stats, vec![0, 1, 2])
    }

    #[test]
    fn subtraction_equals_direct_construction() {
        for seed in 0..10 {
            let (data, stats, active) = random_case(seed);
            let offsets = Histogram::layout(&data.n_bins);
            let all: Vec<u32> = (0..data.rows as u32).collect();
            let (left, right): (Vec<u32>, Vec<u32>) = all.iter().partition(|&&r| r % 3 == 0);
            let parent = Histogram::build(&data, &offsets, &all, &stats, &active);
            let l = Histogram::build(&data, &offsets, &left, &stats, &active);
            let r = Histogram::build(&data, &offsets, &right, &stats, &active);
            assert_eq!(parent.subtract(&l), r);
        }
    }

    #[test]
    fn pool_evicts_least_recent() {
        let h = Histogram { offsets: vec![0, 1], bins: vec![BinStat::default()] };
        let mut pool = HistogramPool::new(2);
        pool.put(1, h.clone());
        pool.put(2, h.clone());
        pool.put(3, h.clone());
        assert_eq!(pool.len(), 2);
        assert!(pool.take(1).is_none());
        assert!(pool.take(2).is_some());
    }
}
