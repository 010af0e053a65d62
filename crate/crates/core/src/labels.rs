//! Per-frame touch labels and the segment algebra built on them.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const DEFAULT_FRAME_RATE_HZ: f64 = 1000.0;

/// Curated state of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    NoTouch,
    Touch,
    Unlabeled,
}

impl Label {
    /// Wire code used in label files: 0, 1, or -1 for unlabeled.
    pub fn code(self) -> i8 {
        match self {
            Label::NoTouch => 0,
            Label::Touch => 1,
            Label::Unlabeled => -1,
        }
    }

    pub fn from_code(code: i64) -> Result<Self> {
        match code {
            0 => Ok(Label::NoTouch),
            1 => Ok(Label::Touch),
            -1 => Ok(Label::Unlabeled),
            other => Err(Error::Label(format!("label code {other} is not one of 0, 1, -1"))),
        }
    }

    pub fn from_bool(touch: bool) -> Self {
        if touch {
            Label::Touch
        } else {
            Label::NoTouch
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.code())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let code = i64::deserialize(d)?;
        Label::from_code(code).map_err(serde::de::Error::custom)
    }
}

/// Per-frame labels for one video (or a concatenated session) together with
/// the mask of frames where the object was within reach.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelArray {
    values: Vec<Label>,
    pole_in_reach: Vec<bool>,
    frame_rate_hz: f64,
}

impl LabelArray {
    pub fn new(values: Vec<Label>, pole_in_reach: Vec<bool>, frame_rate_hz: f64) -> Result<Self> {
        if values.len() != pole_in_reach.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels but {} pole-in-reach flags",
                values.len(),
                pole_in_reach.len()
            )));
        }
        if !(frame_rate_hz > 0.0 && frame_rate_hz.is_finite()) {
            return Err(Error::InvalidConfig(format!("frame rate {frame_rate_hz} must be positive")));
        }
        Ok(Self { values, pole_in_reach, frame_rate_hz })
    }

    /// Fully labeled array with the pole in reach on every frame.
    pub fn from_binary(touch: &[u8]) -> Self {
        let values = touch.iter().map(|&v| Label::from_bool(v != 0)).collect();
        Self { values, pole_in_reach: vec![true; touch.len()], frame_rate_hz: DEFAULT_FRAME_RATE_HZ }
    }

    /// Parse a compact string such as `"0011100"`; `u` marks unlabeled frames.
    pub fn parse(pattern: &str) -> Result<Self> {
        let values = pattern
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(Label::NoTouch),
                '1' => Ok(Label::Touch),
                'u' | 'U' => Ok(Label::Unlabeled),
                other => Err(Error::Label(format!("unexpected label character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let n = values.len();
        Self::new(values, vec![true; n], DEFAULT_FRAME_RATE_HZ)
    }

    pub fn with_pole_in_reach(mut self, pole_in_reach: Vec<bool>) -> Result<Self> {
        if pole_in_reach.len() != self.values.len() {
            return Err(Error::ShapeMismatch("pole-in-reach mask length".into()));
        }
        self.pole_in_reach = pole_in_reach;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Label] {
        &self.values
    }

    pub fn pole_in_reach(&self) -> &[bool] {
        &self.pole_in_reach
    }

    pub fn frame_rate_hz(&self) -> f64 {
        self.frame_rate_hz
    }

    /// Touch mask restricted to in-reach frames. Unlabeled frames count as
    /// no-touch; callers that must reject them use [`LabelArray::check_labeled`].
    pub fn touch_mask(&self) -> Vec<bool> {
        self.values
            .iter()
            .zip(&self.pole_in_reach)
            .map(|(&v, &reach)| reach && v == Label::Touch)
            .collect()
    }

    /// Binary labels (1 = touch) with out-of-reach frames forced to 0.
    pub fn to_binary(&self) -> Result<Vec<u8>> {
        self.check_labeled()?;
        Ok(self.touch_mask().into_iter().map(u8::from).collect())
    }

    /// Fails on the first unlabeled frame inside the pole-in-reach region.
    pub fn check_labeled(&self) -> Result<()> {
        match self
            .values
            .iter()
            .zip(&self.pole_in_reach)
            .position(|(&v, &reach)| reach && v == Label::Unlabeled)
        {
            Some(frame) => Err(Error::UnlabeledFrame { frame }),
            None => Ok(()),
        }
    }

    /// Keeps only the frames where `keep` is true, preserving order.
    pub fn compress(&self, keep: &[bool]) -> Result<LabelArray> {
        if keep.len() != self.len() {
            return Err(Error::ShapeMismatch("compress mask length".into()));
        }
        let mut values = Vec::new();
        let mut reach = Vec::new();
        for i in 0..self.len() {
            if keep[i] {
                values.push(self.values[i]);
                reach.push(self.pole_in_reach[i]);
            }
        }
        Ok(LabelArray { values, pole_in_reach: reach, frame_rate_hz: self.frame_rate_hz })
    }

    /// Appends `other` after `self`.
    pub fn concat(&self, other: &LabelArray) -> LabelArray {
        let mut out = self.clone();
        out.values.extend_from_slice(&other.values);
        out.pole_in_reach.extend_from_slice(&other.pole_in_reach);
        out
    }
}

/// Inclusive frame interval `[start, end]` of one touch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TouchSegment {
    pub start: usize,
    pub end: usize,
}

impl TouchSegment {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, other: &TouchSegment) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// Sorted, disjoint, non-adjacent touch segments over `n_frames` frames.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentList {
    segments: Vec<TouchSegment>,
    n_frames: usize,
}

impl SegmentList {
    pub fn new(segments: Vec<TouchSegment>, n_frames: usize) -> Result<Self> {
        for (i, s) in segments.iter().enumerate() {
            if s.start > s.end {
                return Err(Error::InvalidSegments(format!("segment {i} has start {} > end {}", s.start, s.end)));
            }
            if s.end >= n_frames {
                return Err(Error::InvalidSegments(format!(
                    "segment {i} ends at {} beyond {n_frames} frames",
                    s.end
                )));
            }
            if i > 0 && segments[i - 1].end + 1 >= s.start {
                return Err(Error::InvalidSegments(format!(
                    "segment {i} overlaps, touches, or precedes segment {}",
                    i - 1
                )));
            }
        }
        Ok(Self { segments, n_frames })
    }

    pub fn segments(&self) -> &[TouchSegment] {
        &self.segments
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Frame indices of touch onsets.
    pub fn onsets(&self) -> Vec<usize> {
        self.segments.iter().map(|s| s.start).collect()
    }
}

/// Segments from a boolean touch mask.
pub fn segments_from_mask(mask: &[bool]) -> SegmentList {
    let mut segments = Vec::new();
    let mut start = None;
    for (i, &touch) in mask.iter().enumerate() {
        match (touch, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                segments.push(TouchSegment::new(s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        segments.push(TouchSegment::new(s, mask.len() - 1));
    }
    SegmentList { segments, n_frames: mask.len() }
}

/// Maximal runs of touch frames. Frames outside the pole-in-reach region
/// count as no-touch.
pub fn segments_from_labels(labels: &LabelArray) -> Result<SegmentList> {
    labels.check_labeled()?;
    Ok(segments_from_mask(&labels.touch_mask()))
}

/// Inverse of [`segments_from_labels`]; every frame is marked in reach.
pub fn labels_from_segments(segs: &SegmentList) -> Result<LabelArray> {
    // Re-validate: the list may have been deserialized.
    let segs = SegmentList::new(segs.segments.clone(), segs.n_frames)?;
    let mut values = vec![Label::NoTouch; segs.n_frames];
    for s in &segs.segments {
        values[s.start..=s.end].fill(Label::Touch);
    }
    LabelArray::new(values, vec![true; segs.n_frames], DEFAULT_FRAME_RATE_HZ)
}

/// Per-frame label held by at least two of the three curators. Frames where
/// no value reaches two votes stay unlabeled.
pub fn majority_vote(curations: [&LabelArray; 3]) -> Result<LabelArray> {
    let [a, b, c] = curations;
    if a.len() != b.len() || a.len() != c.len() {
        return Err(Error::ShapeMismatch(format!(
            "curations have lengths {}, {}, {}",
            a.len(),
            b.len(),
            c.len()
        )));
    }
    if a.pole_in_reach != b.pole_in_reach || a.pole_in_reach != c.pole_in_reach {
        return Err(Error::ShapeMismatch("curations disagree on the pole-in-reach mask".into()));
    }
    let values = (0..a.len())
        .map(|i| {
            let (x, y, z) = (a.values[i], b.values[i], c.values[i]);
            if x == y || x == z {
                x
            } else if y == z {
                y
            } else {
                Label::Unlabeled
            }
        })
        .collect();
    LabelArray::new(values, a.pole_in_reach.clone(), a.frame_rate_hz)
}

/// True where the two label arrays agree.
pub fn consensus_mask(a: &LabelArray, b: &LabelArray) -> Result<Vec<bool>> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!("lengths {} and {}", a.len(), b.len())));
    }
    Ok(a.values.iter().zip(&b.values).map(|(x, y)| x == y).collect())
}

/// Frames within `border` frames (inclusive) of any in-reach touch frame.
pub fn dilate_touch_mask(labels: &LabelArray, border: usize) -> Vec<bool> {
    dilate_mask(&labels.touch_mask(), border)
}

/// Dilation of a boolean mask by `border` frames on each side, in O(n).
pub fn dilate_mask(mask: &[bool], border: usize) -> Vec<bool> {
    let n = mask.len();
    // Distance to the nearest set frame, from the left and from the right.
    let mut dist = vec![usize::MAX; n];
    let mut last: Option<usize> = None;
    for i in 0..n {
        if mask[i] {
            last = Some(i);
        }
        if let Some(l) = last {
            dist[i] = i - l;
        }
    }
    last = None;
    for i in (0..n).rev() {
        if mask[i] {
            last = Some(i);
        }
        if let Some(l) = last {
            dist[i] = dist[i].min(l - i);
        }
    }
    dist.into_iter().map(|d| d <= border).collect()
}

/// One video entry of a session manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoEntry {
    pub video_id: String,
    pub n_frames: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pole_position_x: Option<f64>,
}

/// Videos belonging to one recording session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub session_id: String,
    pub videos: Vec<VideoEntry>,
    #[serde(default = "default_rate")]
    pub frame_rate_hz: f64,
}

fn default_rate() -> f64 {
    DEFAULT_FRAME_RATE_HZ
}

impl SessionManifest {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for v in &self.videos {
            if !seen.insert(v.video_id.as_str()) {
                return Err(Error::Format(format!("duplicate video_id {:?}", v.video_id)));
            }
            if v.n_frames == 0 {
                return Err(Error::Format(format!("video {:?} has zero frames", v.video_id)));
            }
        }
        if !(self.frame_rate_hz > 0.0) {
            return Err(Error::Format("frame_rate_hz must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let manifest: SessionManifest = serde_json::from_slice(&fs::read(path)?)?;
        manifest.validate()?;
        Ok(manifest)
    }
}

fn ser_reach<S: Serializer>(mask: &[bool], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(mask.iter().map(|&b| u8::from(b)))
}

fn de_reach<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<bool>, D::Error> {
    let codes = Vec::<u8>::deserialize(d)?;
    codes
        .into_iter()
        .map(|c| match c {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!("pole_in_reach value {other} is not 0 or 1"))),
        })
        .collect()
}

/// Labels of one video in a label file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoLabels {
    pub video_id: String,
    pub labels: Vec<Label>,
    #[serde(serialize_with = "ser_reach", deserialize_with = "de_reach")]
    pub pole_in_reach: Vec<bool>,
}

impl VideoLabels {
    pub fn to_label_array(&self, frame_rate_hz: f64) -> Result<LabelArray> {
        LabelArray::new(self.labels.clone(), self.pole_in_reach.clone(), frame_rate_hz)
    }

    pub fn from_label_array(video_id: impl Into<String>, labels: &LabelArray) -> Self {
        Self {
            video_id: video_id.into(),
            labels: labels.values.clone(),
            pole_in_reach: labels.pole_in_reach.clone(),
        }
    }
}

/// On-disk label file: one session, arrays per video in frame order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelFile {
    pub session_id: String,
    pub frame_rate_hz: f64,
    pub videos: Vec<VideoLabels>,
}

impl LabelFile {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for v in &self.videos {
            if !seen.insert(v.video_id.as_str()) {
                return Err(Error::Format(format!("duplicate video_id {:?}", v.video_id)));
            }
            if v.labels.len() != v.pole_in_reach.len() {
                return Err(Error::Format(format!(
                    "video {:?}: {} labels but {} pole_in_reach entries",
                    v.video_id,
                    v.labels.len(),
                    v.pole_in_reach.len()
                )));
            }
        }
        if !(self.frame_rate_hz > 0.0) {
            return Err(Error::Format("frame_rate_hz must be positive".into()));
        }
        Ok(())
    }

    pub fn video(&self, video_id: &str) -> Option<&VideoLabels> {
        self.videos.iter().find(|v| v.video_id == video_id)
    }

    pub fn label_arrays(&self) -> Result<Vec<LabelArray>> {
        self.videos.iter().map(|v| v.to_label_array(self.frame_rate_hz)).collect()
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self> {
        let file: LabelFile = serde_json::from_slice(bytes).map_err(|e| Error::Format(format!("label file: {e}")))?;
        file.validate()?;
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_slice(&fs::read(path)?)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    /// Writes through a temporary file and renames it into place.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        self.validate()?;
        write_atomic(path, &self.to_bytes()?)
    }
}

/// Write `bytes` to a sibling temp file, fsync, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidConfig(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn segs(pairs: &[(usize, usize)], n: usize) -> SegmentList {
        SegmentList::new(pairs.iter().map(|&(s, e)| TouchSegment::new(s, e)).collect(), n).unwrap()
    }

    fn brute_runs(bits: &[u8]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < bits.len() {
            if bits[i] == 1 {
                let s = i;
                while i + 1 < bits.len() && bits[i + 1] == 1 {
                    i += 1;
                }
                out.push((s, i));
            }
            i += 1;
        }
        out
    }

    #[test]
    fn run_decomposition() {
        let l = LabelArray::from_binary(&[0, 1, 1, 0, 1, 0]);
        assert_eq!(segments_from_labels(&l).unwrap(), segs(&[(1, 2), (4, 4)], 6));
        let empty = LabelArray::from_binary(&[0, 0, 0, 0]);
        assert!(segments_from_labels(&empty).unwrap().is_empty());
    }

    #[test]
    fn unlabeled_in_reach_is_rejected() {
        let l = LabelArray::parse("01u0").unwrap();
        assert!(matches!(segments_from_labels(&l), Err(Error::UnlabeledFrame { frame: 2 })));
        // Out of reach, the unlabeled frame is ignored and treated as 0.
        let l = l.with_pole_in_reach(vec![true, true, false, true]).unwrap();
        assert_eq!(segments_from_labels(&l).unwrap(), segs(&[(1, 1)], 4));
    }

    #[test]
    fn out_of_reach_frames_break_segments() {
        let l = LabelArray::parse("0111").unwrap().with_pole_in_reach(vec![true, true, false, true]).unwrap();
        assert_eq!(segments_from_labels(&l).unwrap(), segs(&[(1, 1), (3, 3)], 4));
    }

    #[test]
    fn inverse_examples() {
        let l = labels_from_segments(&segs(&[(1, 2), (4, 4)], 6)).unwrap();
        assert_eq!(l.to_binary().unwrap(), vec![0, 1, 1, 0, 1, 0]);
        let l = labels_from_segments(&segs(&[], 3)).unwrap();
        assert_eq!(l.to_binary().unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn invalid_segments_rejected() {
        let bad = |p: &[(usize, usize)], n| SegmentList::new(p.iter().map(|&(s, e)| TouchSegment::new(s, e)).collect(), n);
        assert!(matches!(bad(&[(3, 4), (1, 2)], 6), Err(Error::InvalidSegments(_))));
        assert!(matches!(bad(&[(1, 3), (3, 4)], 6), Err(Error::InvalidSegments(_))));
        assert!(matches!(bad(&[(1, 2), (3, 4)], 6), Err(Error::InvalidSegments(_))));
        assert!(matches!(bad(&[(2, 1)], 6), Err(Error::InvalidSegments(_))));
        assert!(matches!(bad(&[(2, 6)], 6), Err(Error::InvalidSegments(_))));
    }

    #[test]
    fn majority_examples_and_errors() {
        let a = LabelArray::from_binary(&[1, 0, 0]);
        let b = LabelArray::from_binary(&[1, 0, 1]);
        let c = LabelArray::from_binary(&[0, 0, 1]);
        assert_eq!(majority_vote([&a, &b, &c]).unwrap().to_binary().unwrap(), vec![1, 0, 1]);
        let short = LabelArray::from_binary(&[1, 0]);
        assert!(matches!(majority_vote([&a, &b, &short]), Err(Error::ShapeMismatch(_))));
        let u = LabelArray::parse("u01").unwrap();
        let v = LabelArray::parse("1u0").unwrap();
        let w = LabelArray::parse("01u").unwrap();
        assert_eq!(majority_vote([&u, &v, &w]).unwrap().values(), &[Label::Unlabeled; 3]);
    }

    #[test]
    fn consensus_examples() {
        let a = LabelArray::from_binary(&[1, 0, 1, 1]);
        let not_a = LabelArray::from_binary(&[0, 1, 0, 0]);
        assert!(consensus_mask(&a, &a).unwrap().iter().all(|&x| x));
        assert!(consensus_mask(&a, &not_a).unwrap().iter().all(|&x| !x));
        assert!(consensus_mask(&a, &LabelArray::from_binary(&[1])).is_err());
    }

    #[test]
    fn dilation_examples() {
        let mut bits = vec![0u8; 300];
        bits[100] = 1;
        let keep = dilate_touch_mask(&LabelArray::from_binary(&bits), 80);
        let kept: Vec<usize> = (0..300).filter(|&i| keep[i]).collect();
        assert_eq!(kept, (20..=180).collect::<Vec<_>>());
        let l = LabelArray::from_binary(&[0, 1, 1, 0, 0, 1]);
        assert_eq!(dilate_touch_mask(&l, 0), l.touch_mask());
    }

    #[test]
    fn label_file_roundtrip_with_unlabeled_frames() {
        let file = LabelFile {
            session_id: "s1".into(),
            frame_rate_hz: 1000.0,
            videos: vec![VideoLabels {
                video_id: "v0".into(),
                labels: vec![Label::NoTouch, Label::Touch, Label::Unlabeled],
                pole_in_reach: vec![false, true, true],
            }],
        };
        let bytes = file.to_bytes().unwrap();
        assert_eq!(
            std::str::from_utf8(&bytes).unwrap(),
            r#"{"session_id":"s1","frame_rate_hz":1000.0,"videos":[{"video_id":"v0","labels":[0,1,-1],"pole_in_reach":[0,1,1]}]}"#
        );
        let back = LabelFile::from_slice(&bytes).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn label_file_rejects_bad_codes() {
        let bad = br#"{"session_id":"s","frame_rate_hz":1000,"videos":[{"video_id":"v","labels":[2],"pole_in_reach":[1]}]}"#;
        assert!(matches!(LabelFile::from_slice(bad), Err(Error::Format(_))));
        let bad = br#"{"session_id":"s","frame_rate_hz":1000,"videos":[{"video_id":"v","labels":[1,0],"pole_in_reach":[1]}]}"#;
        assert!(matches!(LabelFile::from_slice(bad), Err(Error::Format(_))));
    }

    #[test]
    fn manifest_validation() {
        let m = SessionManifest {
            session_id: "s".into(),
            videos: vec![
                VideoEntry { video_id: "a".into(), n_frames: 10, pole_position_x: None },
                VideoEntry { video_id: "a".into(), n_frames: 10, pole_position_x: None },
            ],
            frame_rate_hz: 1000.0,
        };
        assert!(m.validate().is_err());
    }

    fn arb_segments() -> impl Strategy<Value = SegmentList> {
        (1usize..200, prop::collection::vec((1usize..6, 1usize..6), 0..20)).prop_map(|(tail, gaps)| {
            let mut pos = 0;
            let mut out = Vec::new();
            for (gap, len) in gaps {
                let start = pos + gap;
                out.push(TouchSegment::new(start, start + len - 1));
                pos = start + len;
            }
            SegmentList::new(out, pos + tail).unwrap()
        })
    }

    proptest! {
        #[test]
        fn segments_roundtrip(s in arb_segments()) {
            let back = segments_from_labels(&labels_from_segments(&s).unwrap()).unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn segments_match_linear_scan(bits in prop::collection::vec(0u8..2, 0..1000)) {
            let got = segments_from_labels(&LabelArray::from_binary(&bits)).unwrap();
            let got: Vec<_> = got.segments().iter().map(|s| (s.start, s.end)).collect();
            prop_assert_eq!(got, brute_runs(&bits));
        }

        #[test]
        fn majority_counts_and_is_permutation_invariant(
            rows in prop::collection::vec((0u8..2, 0u8..2, 0u8..2), 1..200)
        ) {
            let a = LabelArray::from_binary(&rows.iter().map(|r| r.0).collect::<Vec<_>>());
            let b = LabelArray::from_binary(&rows.iter().map(|r| r.1).collect::<Vec<_>>());
            let c = LabelArray::from_binary(&rows.iter().map(|r| r.2).collect::<Vec<_>>());
            let m = majority_vote([&a, &b, &c]).unwrap();
            let expected: Vec<u8> = rows.iter().map(|r| u8::from(r.0 + r.1 + r.2 >= 2)).collect();
            prop_assert_eq!(m.to_binary().unwrap(), expected);
            prop_assert_eq!(&majority_vote([&c, &a, &b]).unwrap(), &m);
            prop_assert_eq!(&majority_vote([&b, &c, &a]).unwrap(), &m);
            prop_assert_eq!(&majority_vote([&b, &a, &c]).unwrap(), &m);
        }

        #[test]
        fn consensus_matches_elementwise(pairs in prop::collection::vec((0u8..2, 0u8..2), 0..200)) {
            let a = LabelArray::from_binary(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
            let b = LabelArray::from_binary(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
            let expected: Vec<bool> = pairs.iter().map(|p| p.0 == p.1).collect();
            prop_assert_eq!(consensus_mask(&a, &b).unwrap(), expected);
        }

        #[test]
        fn dilation_matches_distance_scan(bits in prop::collection::vec(0u8..2, 0..300), k in 0usize..6) {
            let l = LabelArray::from_binary(&bits);
            let got = dilate_touch_mask(&l, k);
            for i in 0..bits.len() {
                let lo = i.saturating_sub(k);
                let hi = (i + k).min(bits.len() - 1);
                let expected = (lo..=hi).any(|j| bits[j] == 1);
                prop_assert_eq!(got[i], expected, "frame {}", i);
            }
        }

        #[test]
        fn dilation_monotone_and_contains_touches(bits in prop::collection::vec(0u8..2, 0..300), k1 in 0usize..10, extra in 0usize..10) {
            let l = LabelArray::from_binary(&bits);
            let small = dilate_touch_mask(&l, k1);
            let big = dilate_touch_mask(&l, k1 + extra);
            for i in 0..bits.len() {
                prop_assert!(!small[i] || big[i]);
                prop_assert!(bits[i] == 0 || small[i]);
            }
        }
    }
}
