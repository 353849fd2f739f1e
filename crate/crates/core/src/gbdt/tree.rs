use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A node of a regression tree stored in preorder.
///
/// An instance goes left iff `value <= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Newton gain realized by this split on the rows that grew it.
        gain: f64,
    },
    Leaf {
        /// Newton step in log-odds, before the learning-rate shrinkage.
        value: f64,
        leaf_index: usize,
    },
}

/// One step of a root-to-leaf path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStep {
    pub feature: usize,
    pub threshold: f64,
    pub went_left: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
    num_leaves: usize,
}

impl Tree {
    /// Builds a tree from preorder nodes (root at 0, children after their parent).
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Tree> {
        let num_leaves = nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count();
        let tree = Tree { nodes, num_leaves };
        tree.validate()?;
        Ok(tree)
    }

    pub fn single_leaf(value: f64) -> Tree {
        Tree {
            nodes: vec![Node::Leaf {
                value,
                leaf_index: 0,
            }],
            num_leaves: 1,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvariantViolation(msg));
        if self.nodes.is_empty() {
            return bad("tree has no nodes".into());
        }
        let mut parents = vec![0usize; self.nodes.len()];
        let mut seen_leaf = vec![false; self.nodes.len()];
        let mut leaves = 0;
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Split {
                    threshold,
                    left,
                    right,
                    gain,
                    ..
                } => {
                    if !threshold.is_finite() {
                        return bad(format!("node {i} has a non-finite threshold"));
                    }
                    if !(gain.is_finite() && gain >= 0.0) {
                        return bad(format!("node {i} has invalid gain {gain}"));
                    }
                    for child in [left, right] {
                        if child <= i || child >= self.nodes.len() {
                            return bad(format!("node {i} has invalid child {child}"));
                        }
                        parents[child] += 1;
                    }
                }
                Node::Leaf { value, leaf_index } => {
                    if !value.is_finite() {
                        return bad(format!("leaf node {i} has a non-finite value"));
                    }
                    if leaf_index >= seen_leaf.len() || seen_leaf[leaf_index] {
                        return bad(format!("leaf index {leaf_index} repeated or out of range"));
                    }
                    seen_leaf[leaf_index] = true;
                    leaves += 1;
                }
            }
        }
        if leaves != self.num_leaves || seen_leaf[..leaves].iter().any(|s| !s) {
            return bad("leaf indices are not contiguous from 0".into());
        }
        if parents[0] != 0 || parents[1..].iter().any(|&p| p != 1) {
            return bad("nodes do not form a single tree".into());
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn num_leaves(&self) -> usize {
        self.num_leaves
    }

    pub fn is_single_leaf(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Largest feature index referenced by a split, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    /// Routes an instance to its leaf; the caller guarantees the width.
    #[inline]
    pub(crate) fn route(&self, instance: &[f64]) -> (usize, f64) {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    i = if instance[feature] <= threshold {
                        left
                    } else {
                        right
                    };
                }
                Node::Leaf { value, leaf_index } => return (leaf_index, value),
            }
        }
    }

    /// Leaf index reached by `instance`.
    pub fn apply(&self, instance: &[f64]) -> Result<usize> {
        if let Some(f) = self.max_feature() {
            if f >= instance.len() {
                return Err(Error::DimensionMismatch {
                    expected: f + 1,
                    found: instance.len(),
                });
            }
        }
        Ok(self.route(instance).0)
    }

    pub fn leaf_value(&self, leaf_index: usize) -> Option<f64> {
        self.nodes.iter().find_map(|n| match *n {
            Node::Leaf {
                value,
                leaf_index: k,
            } if k == leaf_index => Some(value),
            _ => None,
        })
    }

    pub(crate) fn scale_leaves(&mut self, factor: f64) {
        for node in &mut self.nodes {
            if let Node::Leaf { value, .. } = node {
                *value *= factor;
            }
        }
    }

    /// The splits traversed from the root to the given leaf, root first.
    pub fn path_to_leaf(&self, leaf_index: usize) -> Option<Vec<PathStep>> {
        fn go(nodes: &[Node], i: usize, target: usize, path: &mut Vec<PathStep>) -> bool {
            match nodes[i] {
                Node::Leaf { leaf_index, .. } => leaf_index == target,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    for (child, went_left) in [(left, true), (right, false)] {
                        path.push(PathStep {
                            feature,
                            threshold,
                            went_left,
                        });
                        if go(nodes, child, target, path) {
                            return true;
                        }
                        path.pop();
                    }
                    false
                }
            }
        }
        let mut path = Vec::new();
        go(&self.nodes, 0, leaf_index, &mut path).then_some(path)
    }
}
