#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use touchgrid::labels::{Label, LabelFile, SessionManifest, VideoEntry, VideoLabels};
use touchgrid::synth::{segment_mask, touch_segments};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_touchgrid"));
    c.env_remove("TOUCHGRID_CONFIG");
    c
}

pub fn run(args: &[&str], config: Option<&Path>) -> Output {
    let mut c = bin();
    if let Some(cfg) = config {
        c.arg("--config").arg(cfg);
    }
    c.args(args).output().expect("binary runs")
}

pub fn ok(args: &[&str], config: Option<&Path>) -> Output {
    let out = run(args, config);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Session with `videos` videos: four base features, the first of which
/// tracks the touch state.
pub struct Fixture {
    pub csv: PathBuf,
    pub labels: PathBuf,
    pub manifest: PathBuf,
    pub truth: LabelFile,
}

pub fn write_fixture(dir: &Path, session: &str, videos: usize, frames: usize, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("session_id,video_id,frame_idx,f0,f1,f2,f3\n");
    let mut label_videos = Vec::new();
    let mut entries = Vec::new();
    for v in 0..videos {
        let video_id = format!("{session}_v{v:02}");
        let touch = segment_mask(&touch_segments(&mut rng, frames, (8, 30), (10, 50)));
        for (t, &on) in touch.iter().enumerate() {
            let f0 = f64::from(u8::from(on)) + rng.random_range(-0.4..0.4);
            let noise: [f64; 3] = [rng.random(), rng.random(), rng.random()];
            writeln!(csv, "{session},{video_id},{t},{f0:.5},{:.5},{:.5},{:.5}", noise[0], noise[1], noise[2]).unwrap();
        }
        label_videos.push(VideoLabels {
            video_id: video_id.clone(),
            labels: touch.iter().map(|&b| Label::from_bool(b)).collect(),
            pole_in_reach: vec![true; frames],
        });
        entries.push(VideoEntry { video_id, n_frames: frames, pole_position_x: Some(v as f64 * 10.0) });
    }
    let csv_path = dir.join(format!("{session}.csv"));
    std::fs::write(&csv_path, csv).unwrap();
    let truth = LabelFile { session_id: session.into(), frame_rate_hz: 1000.0, videos: label_videos };
    let labels = dir.join(format!("{session}_labels.json"));
    truth.write_atomic(&labels).unwrap();
    let manifest = SessionManifest { session_id: session.into(), videos: entries, frame_rate_hz: 1000.0 };
    let manifest_path = dir.join(format!("{session}_manifest.json"));
    std::fs::write(&manifest_path, serde_json::to_vec(&manifest).unwrap()).unwrap();
    Fixture { csv: csv_path, labels, manifest: manifest_path, truth }
}

/// Fast settings for end-to-end runs.
pub fn write_config(dir: &Path) -> PathBuf {
    let cfg = serde_json::json!({
        "train": { "max_iterations": 40, "num_leaves": 8, "min_data_in_leaf": 5.0, "early_stopping_rounds": 10, "eval_metric": "both" },
        "rfe": { "n_folds": 2, "schedule": [{ "rule": "drop_bottom_gain_fraction", "value": 0.5 }] },
        "search": { "n_trials": 3, "num_leaves": [4, 16] },
        "sample": { "videos_wanted": 3, "frames_per_video": 20 },
        "retrain": { "patience": 20 }
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_vec(&cfg).unwrap()).unwrap();
    path
}
