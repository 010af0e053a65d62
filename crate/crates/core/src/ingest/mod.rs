//! Input formats and image preprocessing.
//!
//! * [`FeatureMatrix`] and the `.fmx` feature store with its JSON sidecar
//! * [`FrameStack`] and the `.wfrm` frame-stack format
//! * zero-normalized template matching, window cropping, lag composition

mod fmx;
mod frames;
mod matrix;
mod ncc;

pub use fmx::{
    decode_fmx, encode_fmx, read_feature_matrix, sidecar_path, write_feature_matrix, FeatureStore, FmxSidecar,
    FMX_HEADER_LEN, FMX_MAGIC, FMX_VERSION,
};
pub use frames::{compose_lag, compose_lag_stack, crop_window, decode_wfrm, encode_wfrm, FrameStack, Image, WFRM_MAGIC};
pub use matrix::{FeatureMatrix, RowId, UNDEFINED};
pub use ncc::{extract_windows, match_stack, ncc_match, ncc_score_map, NccMatch, ScoreMap, Template};
