//! JSON artifacts exchanged between commands and the curation server.

use std::path::Path;

use serde::{Deserialize, Serialize};
use touchgrid::labels::{Label, LabelArray, LabelFile, SessionManifest};
use touchgrid::select::SampledFrame;
use touchgrid::{Error, Result};

pub const PREDICTIONS_FORMAT: &str = "touchgrid-predictions";
pub const SESSION_FORMAT: &str = "touchgrid-session";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoPredictions {
    pub session_id: String,
    pub video_id: String,
    pub frames: Vec<u32>,
    pub proba: Vec<f64>,
    /// Thresholded and, when configured, median-smoothed calls.
    pub touch: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Predictions {
    pub format: String,
    pub version: u32,
    #[serde(default)]
    pub smooth_window: Option<usize>,
    pub videos: Vec<VideoPredictions>,
    #[serde(default)]
    pub provenance: Option<serde_json::Value>,
}

impl Predictions {
    pub fn video(&self, video_id: &str) -> Option<&VideoPredictions> {
        self.videos.iter().find(|v| v.video_id == video_id)
    }

    /// Label array over `n_frames`; frames without a prediction are unlabeled
    /// and marked out of reach.
    pub fn label_array(v: &VideoPredictions, n_frames: usize, frame_rate_hz: f64) -> Result<LabelArray> {
        let mut values = vec![Label::Unlabeled; n_frames];
        let mut reach = vec![false; n_frames];
        for (&f, &t) in v.frames.iter().zip(&v.touch) {
            let f = f as usize;
            if f >= n_frames {
                return Err(Error::FrameIndex { index: f, count: n_frames });
            }
            values[f] = Label::from_bool(t == 1);
            reach[f] = true;
        }
        LabelArray::new(values, reach, frame_rate_hz)
    }
}

/// Either a label file or a predictions file, told apart by `format`.
pub enum LabelsOrPredictions {
    Labels(LabelFile),
    Predictions(Predictions),
}

pub fn read_labels_or_predictions(path: &Path) -> Result<LabelsOrPredictions> {
    let bytes = std::fs::read(path)?;
    let value: serde_json::Value =
        serde_json::from_slice(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if value.get("format").and_then(|f| f.as_str()) == Some(PREDICTIONS_FORMAT) {
        let p: Predictions =
            serde_json::from_value(value).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Ok(LabelsOrPredictions::Predictions(p))
    } else {
        Ok(LabelsOrPredictions::Labels(LabelFile::from_slice(&bytes)?))
    }
}

/// Session bundle manifest: the videos of a session and the frames chosen
/// for curation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionBundle {
    pub format: String,
    pub session: SessionManifest,
    pub frames: Vec<SampledFrame>,
    #[serde(default)]
    pub provenance: Option<serde_json::Value>,
}

impl SessionBundle {
    pub fn read(path: &Path) -> Result<Self> {
        let b: SessionBundle = serde_json::from_slice(&std::fs::read(path)?)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        b.session.validate()?;
        Ok(b)
    }
}
