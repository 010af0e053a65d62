//! `.fmx` feature store.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "FMX1"
//! 4       4     u32 version (1)
//! 8       4     u32 rows
//! 12      4     u32 cols
//! 16      1     u8 dtype (1 = f32)
//! 17      3     reserved, zero
//! 20      4*r*c f32 payload, row-major
//! ```
//!
//! Row provenance, optional labels, and the feature-generation block live in
//! a JSON sidecar named `<file>.fmx.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::matrix::{FeatureMatrix, RowId};
use crate::error::{Error, Result};
use crate::featgen::FeatgenBlock;
use crate::labels::Label;

pub const FMX_MAGIC: &[u8; 4] = b"FMX1";
pub const FMX_VERSION: u32 = 1;
pub const FMX_HEADER_LEN: usize = 20;
const DTYPE_F32: u8 = 1;
const SIDECAR_FORMAT: &str = "fmx-sidecar";

pub fn encode_fmx(m: &FeatureMatrix) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.rows()).map_err(|_| Error::Size(format!("{} rows exceed u32", m.rows())))?;
    let cols = u32::try_from(m.cols()).map_err(|_| Error::Size(format!("{} cols exceed u32", m.cols())))?;
    let mut out = Vec::with_capacity(FMX_HEADER_LEN + 4 * m.data().len());
    out.extend_from_slice(FMX_MAGIC);
    out.extend_from_slice(&FMX_VERSION.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    out.push(DTYPE_F32);
    out.extend_from_slice(&[0u8; 3]);
    for v in m.data() {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    Ok(out)
}

/// Decodes the binary part; returns `(rows, cols, payload)`.
pub fn decode_fmx(bytes: &[u8]) -> Result<(usize, usize, Vec<f32>)> {
    if bytes.len() < 4 || &bytes[..4] != FMX_MAGIC {
        return Err(Error::Format("bad magic, expected FMX1".into()));
    }
    if bytes.len() < FMX_HEADER_LEN {
        return Err(Error::CorruptFile(format!("header truncated at {} bytes", bytes.len())));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != FMX_VERSION {
        return Err(Error::Format(format!("unsupported fmx version {version}")));
    }
    let rows = u32_at(8) as usize;
    let cols = u32_at(12) as usize;
    if bytes[16] != DTYPE_F32 {
        return Err(Error::Format(format!("unsupported dtype code {}", bytes[16])));
    }
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::CorruptFile("payload size overflows".into()))?;
    let payload = &bytes[FMX_HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::CorruptFile(format!(
            "payload holds {} bytes, header implies {expected}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_bits(u32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    Ok((rows, cols, data))
}

/// `<path>.json`, e.g. `train.fmx` → `train.fmx.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmxSidecar {
    pub format: String,
    pub version: u32,
    pub row_index: Vec<RowId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<Label>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub featgen: Option<FeatgenBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

/// A feature matrix together with everything its sidecar carries.
#[derive(Debug, Clone)]
pub struct FeatureStore {
    pub matrix: FeatureMatrix,
    pub labels: Option<Vec<Label>>,
    pub featgen: Option<FeatgenBlock>,
    pub provenance: Option<serde_json::Value>,
}

impl FeatureStore {
    pub fn new(matrix: FeatureMatrix) -> Self {
        Self { matrix, labels: None, featgen: None, provenance: None }
    }

    pub fn with_labels(mut self, labels: Vec<Label>) -> Self {
        self.labels = Some(labels);
        self
    }

    pub fn sidecar(&self) -> FmxSidecar {
        FmxSidecar {
            format: SIDECAR_FORMAT.into(),
            version: FMX_VERSION,
            row_index: self.matrix.row_index().to_vec(),
            labels: self.labels.clone(),
            featgen: self.featgen.clone(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(labels) = &self.labels {
            if labels.len() != self.matrix.rows() {
                return Err(Error::ShapeMismatch(format!(
                    "{} labels for {} rows",
                    labels.len(),
                    self.matrix.rows()
                )));
            }
        }
        fs::write(path, encode_fmx(&self.matrix)?)?;
        fs::write(sidecar_path(path), serde_json::to_vec(&self.sidecar())?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (rows, cols, data) = decode_fmx(&fs::read(path)?)?;
        let side_path = sidecar_path(path);
        let sidecar: FmxSidecar = serde_json::from_slice(&fs::read(&side_path)?)
            .map_err(|e| Error::Format(format!("{}: {e}", side_path.display())))?;
        if sidecar.format != SIDECAR_FORMAT || sidecar.version != FMX_VERSION {
            return Err(Error::Format(format!(
                "sidecar format {:?} v{} unsupported",
                sidecar.format, sidecar.version
            )));
        }
        if let Some(labels) = &sidecar.labels {
            if labels.len() != rows {
                return Err(Error::Format(format!("sidecar has {} labels for {rows} rows", labels.len())));
            }
        }
        let matrix = FeatureMatrix::new(rows, cols, data, sidecar.row_index)
            .map_err(|e| Error::Format(format!("sidecar does not match payload: {e}")))?;
        Ok(Self { matrix, labels: sidecar.labels, featgen: sidecar.featgen, provenance: sidecar.provenance })
    }

    /// Labels as 0/1, rejecting unlabeled rows.
    pub fn binary_labels(&self) -> Result<Vec<u8>> {
        let labels = self.labels.as_ref().ok_or_else(|| Error::MissingMetadata("feature store has no labels".into()))?;
        labels
            .iter()
            .enumerate()
            .map(|(i, l)| match l {
                Label::NoTouch => Ok(0),
                Label::Touch => Ok(1),
                Label::Unlabeled => Err(Error::UnlabeledFrame { frame: i }),
            })
            .collect()
    }
}

pub fn write_feature_matrix(m: &FeatureMatrix, path: &Path) -> Result<()> {
    FeatureStore::new(m.clone()).write(path)
}

pub fn read_feature_matrix(path: &Path) -> Result<FeatureMatrix> {
    Ok(FeatureStore::read(path)?.matrix)
}
