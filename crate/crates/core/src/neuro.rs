//! Touch-aligned spike analysis: peri-stimulus time histograms and
//! touch-neuron detection.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{SegmentList, DEFAULT_FRAME_RATE_HZ};

pub const PSTH_PRE: usize = 100;
pub const PSTH_POST: usize = 100;
pub const SMOOTH_BINS: usize = 5;
pub const BASELINE: (i64, i64) = (-100, -20);
pub const RESPONSE: (i64, i64) = (1, 100);
pub const Z_THRESHOLD: f64 = 2.0;
pub const MIN_RUN: usize = 4;

/// Per-frame spike counts of one neuron during one video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpikeTrain {
    pub video_id: String,
    pub counts: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeFile {
    #[serde(default = "default_rate")]
    pub frame_rate_hz: f64,
    pub videos: Vec<SpikeTrain>,
}

fn default_rate() -> f64 {
    DEFAULT_FRAME_RATE_HZ
}

impl SpikeFile {
    /// Reads JSON, or CSV with one `video_id,c0,c1,...` row per video.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            Self::parse_csv(&text)
        } else {
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("spike JSON: {e}")))
        }
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut videos = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split(',');
            let video_id = fields.next().unwrap_or_default().trim().to_string();
            let counts = fields
                .map(|f| f.trim().parse::<u32>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Format(format!("spike CSV line {}: {e}", n + 1)))?;
            videos.push(SpikeTrain { video_id, counts });
        }
        Ok(Self { frame_rate_hz: DEFAULT_FRAME_RATE_HZ, videos })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsthOptions {
    pub pre: usize,
    pub post: usize,
    pub with_ci: bool,
}

impl Default for PsthOptions {
    fn default() -> Self {
        Self { pre: PSTH_PRE, post: PSTH_POST, with_ci: false }
    }
}

/// Mean spike count per frame offset from touch onset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psth {
    pub pre: usize,
    pub post: usize,
    /// `mean[i]` is offset `i - pre`.
    pub mean: Vec<f64>,
    pub n_onsets: usize,
    /// Onsets too close to a video edge for the full window.
    pub n_dropped: usize,
    /// Half-width of the 95% normal interval, `1.96 sd / sqrt(n)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<Vec<f64>>,
}

impl Psth {
    pub fn offsets(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.mean.len()).map(|i| i as i64 - self.pre as i64)
    }

    pub fn index_of(&self, offset: i64) -> Option<usize> {
        let i = offset + self.pre as i64;
        (0..self.mean.len() as i64).contains(&i).then_some(i as usize)
    }

    pub fn at(&self, offset: i64) -> Option<f64> {
        self.index_of(offset).map(|i| self.mean[i])
    }
}

/// Averages spike counts around every touch onset of every video.
pub fn build_psth(trains: &[SpikeTrain], touches: &[SegmentList], opts: &PsthOptions) -> Result<Psth> {
    if trains.len() != touches.len() {
        return Err(Error::ShapeMismatch(format!("{} spike trains for {} segment lists", trains.len(), touches.len())));
    }
    let width = opts.pre + opts.post + 1;
    let mut sum = vec![0.0; width];
    let mut sum_sq = vec![0.0; width];
    let mut n = 0usize;
    let mut dropped = 0usize;
    for (train, segs) in trains.iter().zip(touches) {
        if train.counts.len() != segs.n_frames() {
            return Err(Error::ShapeMismatch(format!(
                "video {}: {} spike frames, {} label frames",
                train.video_id,
                train.counts.len(),
                segs.n_frames()
            )));
        }
        for onset in segs.onsets() {
            if onset < opts.pre || onset + opts.post >= train.counts.len() {
                dropped += 1;
                continue;
            }
            let window = &train.counts[onset - opts.pre..=onset + opts.post];
            for (i, &c) in window.iter().enumerate() {
                let c = f64::from(c);
                sum[i] += c;
                sum_sq[i] += c * c;
            }
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::NoOnsets);
    }
    let nf = n as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
    let ci = opts.with_ci.then(|| {
        (0..width)
            .map(|i| {
                if n < 2 {
                    return 0.0;
                }
                let var = ((sum_sq[i] - nf * mean[i] * mean[i]) / (nf - 1.0)).max(0.0);
                1.96 * var.sqrt() / nf.sqrt()
            })
            .collect()
    });
    Ok(Psth { pre: opts.pre, post: opts.post, mean, n_onsets: n, n_dropped: dropped, ci })
}

/// Centered moving average; the window shrinks at the ends.
pub fn moving_average(x: &[f64], bins: usize) -> Vec<f64> {
    let half = bins / 2;
    let mut prefix = vec![0.0; x.len() + 1];
    for (i, v) in x.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

fn mean_and_population_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Excited,
    Suppressed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub is_touch_neuron: bool,
    /// First and last offsets of the signal window, inclusive.
    pub signal_window: Option<(i64, i64)>,
    pub polarity: Option<Polarity>,
    /// Offset of the smoothed maximum within the response range.
    pub peak_offset: i64,
    pub baseline_mean: f64,
    pub baseline_sd: f64,
    pub smoothed: Vec<f64>,
    pub z: Vec<f64>,
}

fn check_span(psth: &Psth) -> Result<()> {
    if psth.index_of(BASELINE.0).is_none() || psth.index_of(RESPONSE.1).is_none() {
        return Err(Error::ShapeMismatch(format!(
            "PSTH spans {}..={}, need {}..={}",
            -(psth.pre as i64),
            psth.post,
            BASELINE.0,
            RESPONSE.1
        )));
    }
    Ok(())
}

fn polarity_of(z: f64) -> Option<Polarity> {
    if z > Z_THRESHOLD {
        Some(Polarity::Excited)
    } else if z < -Z_THRESHOLD {
        Some(Polarity::Suppressed)
    } else {
        None
    }
}

/// Maximal same-sign runs of at least `MIN_RUN` bins beyond the threshold in `z[lo..=hi]`.
fn qualifying_runs(z: &[f64], lo: usize, hi: usize) -> Vec<(usize, usize, Polarity)> {
    let mut runs = Vec::new();
    let mut i = lo;
    while i <= hi {
        if let Some(p) = polarity_of(z[i]) {
            let start = i;
            while i < hi && polarity_of(z[i + 1]) == Some(p) {
                i += 1;
            }
            if i - start + 1 >= MIN_RUN {
                runs.push((start, i, p));
            }
        }
        i += 1;
    }
    runs
}

/// Significant response after touch onset.
///
/// The PSTH is smoothed with a centered 5-bin average and z-scored against
/// the smoothed baseline. Runs of at least four consecutive bins beyond
/// +-2 SD within the response range qualify. The window starts at the first
/// qualifying run and extends through later runs of the same sign; a run of
/// the opposite sign ends it.
pub fn detect_touch_neuron(psth: &Psth) -> Result<Detection> {
    check_span(psth)?;
    let smoothed = moving_average(&psth.mean, SMOOTH_BINS);
    let b0 = psth.index_of(BASELINE.0).unwrap_or(0);
    let b1 = psth.index_of(BASELINE.1).unwrap_or(0);
    let (baseline_mean, baseline_sd) = mean_and_population_sd(&smoothed[b0..=b1]);
    if baseline_sd == 0.0 || !baseline_sd.is_finite() {
        return Err(Error::DegenerateBaseline);
    }
    let z: Vec<f64> = smoothed.iter().map(|s| (s - baseline_mean) / baseline_sd).collect();

    let r0 = psth.index_of(RESPONSE.0).unwrap_or(0);
    let r1 = psth.index_of(RESPONSE.1).unwrap_or(0);
    let runs = qualifying_runs(&z, r0, r1);
    let (signal_window, polarity) = match runs.first() {
        Some(&(start, mut end, p)) => {
            for &(_, e, q) in &runs[1..] {
                if q != p {
                    break;
                }
                end = e;
            }
            let off = |i: usize| i as i64 - psth.pre as i64;
            (Some((off(start), off(end))), Some(p))
        }
        None => (None, None),
    };
    let mut peak = r0;
    for j in r0..=r1 {
        if smoothed[j] > smoothed[peak] {
            peak = j;
        }
    }
    Ok(Detection {
        is_touch_neuron: signal_window.is_some(),
        signal_window,
        polarity,
        peak_offset: peak as i64 - psth.pre as i64,
        baseline_mean,
        baseline_sd,
        smoothed,
        z,
    })
}

/// Absolute area of the unsmoothed, baseline-subtracted PSTH over `window`.
pub fn spikes_per_touch(psth: &Psth, window: (i64, i64)) -> Result<f64> {
    check_span(psth)?;
    let (Some(lo), Some(hi)) = (psth.index_of(window.0), psth.index_of(window.1)) else {
        return Err(Error::EmptyWindow);
    };
    if lo > hi {
        return Err(Error::EmptyWindow);
    }
    let b0 = psth.index_of(BASELINE.0).unwrap_or(0);
    let b1 = psth.index_of(BASELINE.1).unwrap_or(0);
    let base = psth.mean[b0..=b1].iter().sum::<f64>() / (b1 - b0 + 1) as f64;
    Ok(psth.mean[lo..=hi].iter().map(|m| m - base).sum::<f64>().abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::TouchSegment;
    use proptest::prelude::*;

    fn psth_from(mean: Vec<f64>) -> Psth {
        Psth { pre: 100, post: 100, n_onsets: 1, n_dropped: 0, ci: None, mean }
    }

    /// Baseline alternating around 1 so the SD is nonzero.
    fn baseline_trace() -> Vec<f64> {
        (0..201).map(|i| if i % 2 == 0 { 1.0 } else { 1.2 }).collect()
    }

    #[test]
    fn single_onset_psth_copies_train() {
        let counts: Vec<u32> = (0..400).map(|i| (i % 7) as u32).collect();
        let segs = SegmentList::new(vec![TouchSegment::new(150, 160)], 400).unwrap();
        let train = SpikeTrain { video_id: "v".into(), counts: counts.clone() };
        let p = build_psth(&[train], &[segs], &PsthOptions { with_ci: true, ..Default::default() }).unwrap();
        assert_eq!(p.n_onsets, 1);
        for (i, m) in p.mean.iter().enumerate() {
            assert_eq!(*m, f64::from(counts[50 + i]));
        }
        assert!(p.ci.unwrap().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn clipped_onsets_dropped() {
        let segs = SegmentList::new(vec![TouchSegment::new(20, 30), TouchSegment::new(200, 210), TouchSegment::new(350, 360)], 400)
            .unwrap();
        let train = SpikeTrain { video_id: "v".into(), counts: vec![1; 400] };
        let p = build_psth(std::slice::from_ref(&train), &[segs], &PsthOptions::default()).unwrap();
        assert_eq!((p.n_onsets, p.n_dropped), (1, 2));
        let none = SegmentList::new(vec![TouchSegment::new(10, 12)], 400).unwrap();
        assert!(matches!(build_psth(&[train], &[none], &PsthOptions::default()), Err(Error::NoOnsets)));
    }

    #[test]
    fn excited_window_and_peak() {
        let mut m = baseline_trace();
        for v in &mut m[110..131] {
            *v = 6.0;
        }
        for (k, v) in [7.0, 8.0, 9.0, 10.0, 9.0, 8.0, 7.0].into_iter().enumerate() {
            m[117 + k] = v;
        }
        let d = detect_touch_neuron(&psth_from(m)).unwrap();
        assert!(d.is_touch_neuron);
        assert_eq!(d.polarity, Some(Polarity::Excited));
        let (s, e) = d.signal_window.unwrap();
        assert!((8..=10).contains(&s) && (30..=32).contains(&e), "{s} {e}");
        assert_eq!(d.peak_offset, 20);
    }

    #[test]
    fn flat_baseline_is_degenerate() {
        assert!(matches!(detect_touch_neuron(&psth_from(vec![1.0; 201])), Err(Error::DegenerateBaseline)));
    }

    #[test]
    fn opposite_sign_ends_the_window() {
        let mut m = baseline_trace();
        for v in &mut m[105..115] {
            *v = 5.0;
        }
        for v in &mut m[130..140] {
            *v = -3.0;
        }
        for v in &mut m[160..170] {
            *v = 5.0;
        }
        let d = detect_touch_neuron(&psth_from(m)).unwrap();
        let (_, e) = d.signal_window.unwrap();
        assert!(e < 30, "window ran to {e}");
    }

    #[test]
    fn same_sign_regions_merge() {
        let mut m = baseline_trace();
        for v in &mut m[105..115] {
            *v = 5.0;
        }
        for v in &mut m[140..150] {
            *v = 5.0;
        }
        let d = detect_touch_neuron(&psth_from(m)).unwrap();
        let (s, e) = d.signal_window.unwrap();
        assert!(s <= 5 && e >= 49, "{s} {e}");
    }

    #[test]
    fn runs_need_four_bins() {
        let mut z = vec![0.0; 20];
        z[2..5].fill(3.0);
        z[8..12].fill(-2.5);
        z[14..18].fill(2.0);
        assert_eq!(qualifying_runs(&z, 0, 19), vec![(8, 11, Polarity::Suppressed)]);
        assert!(qualifying_runs(&z, 0, 10).is_empty());
    }

    #[test]
    fn spikes_per_touch_area() {
        let mut m = vec![2.0; 201];
        for v in &mut m[110..120] {
            *v = 5.0;
        }
        let p = psth_from(m);
        assert!((spikes_per_touch(&p, (10, 19)).unwrap() - 30.0).abs() < 1e-12);
        assert!(matches!(spikes_per_touch(&p, (20, 10)), Err(Error::EmptyWindow)));
    }

    #[test]
    fn csv_spikes() {
        let f = SpikeFile::parse_csv("v1,0,1,2\n# skip\nv2,3,0,0\n").unwrap();
        assert_eq!(f.videos[1].counts, vec![3, 0, 0]);
        assert!(SpikeFile::parse_csv("v,1,x").is_err());
    }

    proptest! {
        #[test]
        fn moving_average_matches_naive(x in prop::collection::vec(-5.0f64..5.0, 1..60)) {
            let got = moving_average(&x, 5);
            for i in 0..x.len() {
                let lo = i.saturating_sub(2);
                let hi = (i + 2).min(x.len() - 1);
                let want = x[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64;
                prop_assert!((got[i] - want).abs() < 1e-9);
            }
        }

        #[test]
        fn psth_mean_is_average_of_aligned_rows(
            onsets in prop::collection::btree_set(100usize..700, 1..6),
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let counts: Vec<u32> = (0..800).map(|_| rng.random_range(0..4)).collect();
            let onsets: Vec<usize> = onsets.into_iter().collect();
            let mut segs = Vec::new();
            let mut last_end = None;
            for &o in &onsets {
                if last_end.is_some_and(|e| o <= e + 1) { continue; }
                segs.push(TouchSegment::new(o, o));
                last_end = Some(o);
            }
            let starts: Vec<usize> = segs.iter().map(|s| s.start).collect();
            let list = SegmentList::new(segs, 800).unwrap();
            let p = build_psth(&[SpikeTrain { video_id: "v".into(), counts: counts.clone() }], &[list], &PsthOptions::default()).unwrap();
            for k in 0..201 {
                let want = starts.iter().map(|&o| f64::from(counts[o - 100 + k])).sum::<f64>() / starts.len() as f64;
                prop_assert!((p.mean[k] - want).abs() < 1e-12);
            }
        }
    }
}
