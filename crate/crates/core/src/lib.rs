//! Touch-event curation toolkit.
//!
//! Consumes per-frame feature vectors produced by an upstream image model,
//! expands them with temporal transforms, trains a histogram gradient-boosted
//! tree classifier, scores predictions at the level of touch events, adapts
//! the classifier to new sessions from a small curated sample, and aligns
//! spike trains to the detected touches.
//!
//! Module map:
//!
//! * [`labels`] per-frame labels, touch segments, majority vote, dilation
//! * [`ingest`] `.fmx` feature store, `.wfrm` frame stacks, template matching
//! * [`featgen`] shift / rolling / difference / cross-feature transforms
//! * [`gbdt`] the boosted-tree learner
//! * [`metrics`] event-level error taxonomy, AUC, median smoothing
//! * [`select`] border extraction, splits, feature elimination, search
//! * [`retrain`] small-sample adaptation
//! * [`neuro`] PSTH and touch-neuron detection
//! * [`synth`] synthetic fixtures

pub mod error;
pub mod featgen;
pub mod gbdt;
pub mod hashing;
pub mod ingest;
pub mod labels;
pub mod metrics;
pub mod neuro;
pub mod retrain;
pub mod select;
pub mod synth;

pub use error::{Error, Result};
pub use ingest::FeatureMatrix;
pub use labels::{Label, LabelArray, SegmentList, TouchSegment};
