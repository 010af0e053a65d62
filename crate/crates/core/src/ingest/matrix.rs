use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical quiet NaN used for undefined entries.
pub const UNDEFINED: f32 = f32::from_bits(0x7FC0_0000);

/// Provenance of one matrix row.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RowId {
    pub session_id: String,
    pub video_id: String,
    pub frame_idx: u32,
}

impl RowId {
    pub fn new(session_id: impl Into<String>, video_id: impl Into<String>, frame_idx: u32) -> Self {
        Self { session_id: session_id.into(), video_id: video_id.into(), frame_idx }
    }

    fn same_video(&self, other: &RowId) -> bool {
        self.session_id == other.session_id && self.video_id == other.video_id
    }
}

/// Frames × features, row-major `f32`, NaN marks an undefined entry.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
    row_index: Vec<RowId>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>, row_index: Vec<RowId>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!("{} values for a {rows}x{cols} matrix", data.len())));
        }
        if row_index.len() != rows {
            return Err(Error::ShapeMismatch(format!("{} row ids for {rows} rows", row_index.len())));
        }
        Ok(Self { rows, cols, data, row_index })
    }

    /// Single-video matrix with row ids `(session, video, 0..rows)`.
    pub fn from_rows(session_id: &str, video_id: &str, rows: &[Vec<f32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        let row_index = (0..rows.len()).map(|i| RowId::new(session_id, video_id, i as u32)).collect();
        Self::new(rows.len(), cols, data, row_index)
    }

    pub fn empty(cols: usize) -> Self {
        Self { rows: 0, cols, data: Vec::new(), row_index: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row_index(&self) -> &[RowId] {
        &self.row_index
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f32) {
        self.data[r * self.cols + c] = v;
    }

    pub fn column(&self, c: usize) -> Vec<f32> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn is_defined_row(&self, r: usize) -> bool {
        self.row(r).iter().all(|v| !v.is_nan())
    }

    pub fn undefined_count(&self) -> usize {
        self.data.iter().filter(|v| v.is_nan()).count()
    }

    /// Bit-level equality, so undefined entries compare equal to themselves.
    pub fn bit_eq(&self, other: &FeatureMatrix) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.row_index == other.row_index
            && self.data.iter().zip(&other.data).all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            rows: rows.len(),
            cols: self.cols,
            data,
            row_index: rows.iter().map(|&r| self.row_index[r].clone()).collect(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Result<FeatureMatrix> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.cols) {
            return Err(Error::ShapeMismatch(format!("column {bad} out of range for {} columns", self.cols)));
        }
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for r in 0..self.rows {
            let row = self.row(r);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        Ok(FeatureMatrix { rows: self.rows, cols: cols.len(), data, row_index: self.row_index.clone() })
    }

    /// Row-wise concatenation.
    pub fn vstack(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
        let cols = parts.first().map_or(0, |m| m.cols);
        if parts.iter().any(|m| m.cols != cols) {
            return Err(Error::ShapeMismatch("vstack of matrices with different column counts".into()));
        }
        let mut out = FeatureMatrix::empty(cols);
        for m in parts {
            out.rows += m.rows;
            out.data.extend_from_slice(&m.data);
            out.row_index.extend_from_slice(&m.row_index);
        }
        Ok(out)
    }

    /// Contiguous row ranges sharing one `(session_id, video_id)`.
    pub fn video_groups(&self) -> Vec<Range<usize>> {
        let mut groups = Vec::new();
        let mut start = 0;
        for r in 1..=self.rows {
            if r == self.rows || !self.row_index[r].same_video(&self.row_index[start]) {
                if r > start {
                    groups.push(start..r);
                }
                start = r;
            }
        }
        groups
    }

    /// Checks that each video occupies one contiguous block of rows with
    /// strictly increasing frame indices.
    pub fn validate_provenance(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for g in self.video_groups() {
            let id = &self.row_index[g.start];
            if !seen.insert((id.session_id.as_str(), id.video_id.as_str())) {
                return Err(Error::Format(format!(
                    "video {}/{} is split across non-contiguous rows",
                    id.session_id, id.video_id
                )));
            }
            for r in g.start + 1..g.end {
                if self.row_index[r].frame_idx <= self.row_index[r - 1].frame_idx {
                    return Err(Error::Format(format!(
                        "frame indices not strictly increasing in video {} at row {r}",
                        id.video_id
                    )));
                }
            }
        }
        Ok(())
    }
}
