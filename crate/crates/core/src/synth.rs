//! Seeded synthetic fixtures for tests, benchmarks and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::featgen::FeatGenConfig;
use crate::ingest::{FeatureMatrix, Image, RowId};
use crate::labels::{SegmentList, TouchSegment};
use crate::neuro::SpikeTrain;

fn gauss(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    Normal::new(0.0, sd).map(|n| n.sample(rng)).unwrap_or(0.0)
}

/// Random touches with lengths and gaps drawn uniformly from the ranges.
pub fn touch_segments(
    rng: &mut ChaCha8Rng,
    n_frames: usize,
    len: (usize, usize),
    gap: (usize, usize),
) -> SegmentList {
    let mut segs = Vec::new();
    let mut t = rng.random_range(gap.0..=gap.1);
    loop {
        let l = rng.random_range(len.0..=len.1);
        if t + l >= n_frames {
            break;
        }
        segs.push(TouchSegment::new(t, t + l - 1));
        t += l + rng.random_range(gap.0.max(1)..=gap.1.max(1));
    }
    SegmentList::new(segs, n_frames).unwrap_or_else(|_| SegmentList::new(Vec::new(), n_frames).expect("empty list"))
}

pub fn segment_mask(segs: &SegmentList) -> Vec<bool> {
    let mut m = vec![false; segs.n_frames()];
    for s in segs.segments() {
        m[s.start..=s.end].fill(true);
    }
    m
}

/// Uniform noise matrix of `n_videos` contiguous videos.
pub fn random_base_matrix(n_videos: usize, frames: usize, n_base: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = n_videos * frames;
    let data: Vec<f32> = (0..rows * n_base).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let index = (0..rows).map(|r| RowId::new("synth", format!("v{:03}", r / frames), (r % frames) as u32)).collect();
    FeatureMatrix::new(rows, n_base, data, index).expect("consistent shape")
}

/// Binary classification with `n_informative` useful columns followed by
/// `n_noise` pure-noise columns.
pub fn rfe_fixture(n_rows: usize, n_informative: usize, n_noise: usize, seed: u64) -> (FeatureMatrix, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = n_informative + n_noise;
    let weights: Vec<f64> = (0..n_informative).map(|k| 1.0 - 0.5 * k as f64 / n_informative.max(1) as f64).collect();
    let scale = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    let mut data = Vec::with_capacity(n_rows * cols);
    let mut y = Vec::with_capacity(n_rows);
    for _ in 0..n_rows {
        let row: Vec<f64> = (0..cols).map(|_| gauss(&mut rng, 1.0)).collect();
        let signal: f64 = row.iter().zip(&weights).map(|(x, w)| x * w).sum::<f64>() / scale;
        y.push(u8::from(signal + gauss(&mut rng, 0.3) > 0.0));
        data.extend(row.iter().map(|&v| v as f32));
    }
    let index = (0..n_rows).map(|r| RowId::new("rfe", format!("v{:03}", r / 1000), (r % 1000) as u32)).collect();
    (FeatureMatrix::new(n_rows, cols, data, index).expect("consistent shape"), y)
}

/// Layout of the drift experiment.
#[derive(Debug, Clone)]
pub struct DriftSpec {
    pub n_sessions: usize,
    pub n_shifted: usize,
    pub videos_per_session: usize,
    pub frames_per_video: usize,
    /// Offset added to the touch-carrying feature in shifted sessions.
    pub shift: f64,
    pub noise: f64,
}

impl Default for DriftSpec {
    fn default() -> Self {
        Self { n_sessions: 16, n_shifted: 5, videos_per_session: 6, frames_per_video: 400, shift: 0.8, noise: 0.15 }
    }
}

/// One synthetic recording session: raw per-frame features and truth.
#[derive(Debug, Clone)]
pub struct DriftSession {
    pub session_id: String,
    pub shifted: bool,
    pub base: FeatureMatrix,
    pub labels: Vec<u8>,
}

/// Sessions with three base features per frame: a touch signal riding on a
/// slowly varying brightness, the brightness alone, and a lighting level that
/// is zero except in shifted sessions, where the shift also lands on the touch
/// signal. The last `n_shifted` sessions are shifted.
pub fn drift_sessions(spec: &DriftSpec, seed: u64) -> Vec<DriftSession> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..spec.n_sessions)
        .map(|s| {
            let shifted = s >= spec.n_sessions - spec.n_shifted;
            let offset = if shifted { spec.shift } else { 0.0 };
            let session_id = format!("session{s:02}");
            let mut data = Vec::new();
            let mut index = Vec::new();
            let mut labels = Vec::new();
            for v in 0..spec.videos_per_session {
                let segs = touch_segments(&mut rng, spec.frames_per_video, (8, 40), (15, 80));
                let touch = segment_mask(&segs);
                let mut brightness = rng.random_range(-0.5..0.5);
                for (t, &on) in touch.iter().enumerate() {
                    brightness = (brightness + gauss(&mut rng, 0.02)).clamp(-1.0, 1.0);
                    let f0 = f64::from(u8::from(on)) + brightness + offset + gauss(&mut rng, spec.noise);
                    let f1 = brightness + gauss(&mut rng, 0.05);
                    let f2 = offset + gauss(&mut rng, 0.05);
                    data.extend([f0 as f32, f1 as f32, f2 as f32]);
                    index.push(RowId::new(session_id.clone(), format!("{session_id}_v{v}"), t as u32));
                    labels.push(u8::from(on));
                }
            }
            let rows = labels.len();
            DriftSession {
                session_id,
                shifted,
                base: FeatureMatrix::new(rows, 3, data, index).expect("consistent shape"),
                labels,
            }
        })
        .collect()
}

/// A compact transform set for fast end-to-end fixtures.
pub fn small_featgen_config() -> FeatGenConfig {
    FeatGenConfig {
        shifts: vec![-3, -2, -1, 1, 2, 3],
        windows: vec![3, 7],
        diff_steps: vec![-2, -1, 1, 2],
        ..FeatGenConfig::default()
    }
}

/// Added firing rate over an inclusive range of offsets from touch onset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectedResponse {
    pub start: i64,
    pub end: i64,
    pub rate: f64,
}

#[derive(Debug, Clone)]
pub struct SpikeFixtureSpec {
    pub n_videos: usize,
    pub frames_per_video: usize,
    pub baseline_rate: f64,
    pub responses: Vec<InjectedResponse>,
    /// Touch spacing; keep above the PSTH span so windows do not overlap.
    pub gap: (usize, usize),
    pub touch_len: (usize, usize),
}

impl Default for SpikeFixtureSpec {
    fn default() -> Self {
        Self {
            n_videos: 50,
            frames_per_video: 3000,
            baseline_rate: 0.05,
            responses: Vec::new(),
            gap: (220, 260),
            touch_len: (20, 40),
        }
    }
}

/// Poisson spike counts with rate changes locked to touch onsets.
pub fn spike_fixture(spec: &SpikeFixtureSpec, seed: u64) -> (Vec<SpikeTrain>, Vec<SegmentList>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trains = Vec::new();
    let mut touches = Vec::new();
    for v in 0..spec.n_videos {
        let segs = touch_segments(&mut rng, spec.frames_per_video, spec.touch_len, spec.gap);
        let mut rate = vec![spec.baseline_rate; spec.frames_per_video];
        for onset in segs.onsets() {
            for r in &spec.responses {
                for off in r.start..=r.end {
                    let t = onset as i64 + off;
                    if (0..spec.frames_per_video as i64).contains(&t) {
                        rate[t as usize] += r.rate;
                    }
                }
            }
        }
        let counts = rate
            .iter()
            .map(|&lambda| {
                if lambda <= 0.0 {
                    0
                } else {
                    Poisson::new(lambda).map(|p| p.sample(&mut rng) as u32).unwrap_or(0)
                }
            })
            .collect();
        trains.push(SpikeTrain { video_id: format!("v{v:03}"), counts });
        touches.push(segs);
    }
    (trains, touches)
}

/// Random grayscale image with a textured patch; returns the patch and its
/// top-left corner.
pub fn embedded_template(
    rng: &mut ChaCha8Rng,
    width: usize,
    height: usize,
    tw: usize,
    th: usize,
) -> (Image, Image, (usize, usize)) {
    let pixels: Vec<u8> = (0..width * height).map(|_| rng.random_range(0..=255u8)).collect();
    let frame = Image::gray(width, height, pixels).expect("consistent shape");
    let x = rng.random_range(0..=width - tw);
    let y = rng.random_range(0..=height - th);
    let tmpl = frame.sub_image(x, y, tw, th).expect("inside frame");
    (frame, tmpl, (x, y))
}
