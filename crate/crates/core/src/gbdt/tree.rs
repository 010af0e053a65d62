use serde::{Deserialize, Serialize};

use super::bins::{BinnedMatrix, MISSING_BIN};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        /// Highest bin routed left.
        bin_threshold: u8,
        /// Values `<= threshold` go left; undefined values follow `default_left`.
        threshold: f64,
        default_left: bool,
        left: usize,
        right: usize,
        gain: f64,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Self { nodes: vec![Node::Leaf { value }] }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Leaf value reached by a raw feature row.
    pub fn predict_row(&self, row: &[f32]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, default_left, left, right, .. } => {
                    let v = row[*feature];
                    let go_left = if v.is_nan() { *default_left } else { v as f64 <= *threshold };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    /// Same traversal on bin codes.
    pub fn predict_binned(&self, m: &BinnedMatrix, r: usize) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, bin_threshold, default_left, left, right, .. } => {
                    let b = m.get(r, *feature);
                    let go_left = if b == MISSING_BIN { *default_left } else { b <= *bin_threshold };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn scale_leaves(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= factor;
            }
        }
    }

    /// Structural checks applied to loaded models: valid feature ids, child
    /// indices that point forward, finite leaves, and every node reachable once.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Format("tree has no nodes".into()));
        }
        let mut seen = vec![false; self.nodes.len()];
        seen[0] = true;
        for (i, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Leaf { value } => {
                    if !value.is_finite() {
                        return Err(Error::Format(format!("node {i}: leaf value {value} is not finite")));
                    }
                }
                Node::Split { feature, threshold, left, right, .. } => {
                    if *feature >= n_features {
                        return Err(Error::Format(format!("node {i}: feature {feature} >= {n_features}")));
                    }
                    if threshold.is_nan() {
                        return Err(Error::Format(format!("node {i}: NaN threshold")));
                    }
                    for &c in [left, right] {
                        if c <= i || c >= self.nodes.len() || seen[c] {
                            return Err(Error::Format(format!("node {i}: bad child index {c}")));
                        }
                        seen[c] = true;
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Format("tree has unreachable nodes".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> Tree {
        Tree {
            nodes: vec![
                Node::Split { feature: 1, bin_threshold: 2, threshold: 0.5, default_left: false, left: 1, right: 2, gain: 1.0 },
                Node::Leaf { value: -1.0 },
                Node::Leaf { value: 2.0 },
            ],
        }
    }

    #[test]
    fn raw_traversal() {
        let t = stump();
        assert_eq!(t.predict_row(&[9.0, 0.5]), -1.0);
        assert_eq!(t.predict_row(&[9.0, 0.6]), 2.0);
        assert_eq!(t.predict_row(&[9.0, f32::NAN]), 2.0);
        assert_eq!(t.n_leaves(), 2);
    }

    #[test]
    fn validation_catches_bad_trees() {
        stump().validate(2).unwrap();
        assert!(stump().validate(1).is_err());
        let mut cyclic = stump();
        if let Node::Split { right, .. } = &mut cyclic.nodes[0] {
            *right = 1;
        }
        assert!(cyclic.validate(2).is_err());
        let mut inf = stump();
        inf.nodes[1] = Node::Leaf { value: f64::INFINITY };
        assert!(inf.validate(2).is_err());
    }
}
