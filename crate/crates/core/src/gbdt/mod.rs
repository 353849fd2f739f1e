//! Binary-classification gradient boosting on the logistic loss.
//!
//! Trees are grown depth-first with exact split search over the sorted unique
//! values of each candidate feature. Leaves hold Newton steps
//! `sum(y - p) / sum(p (1 - p))` and splits maximize the Newton gain. The raw
//! score of an instance is `base_score + learning_rate * v_1 + ... + learning_rate * v_N`,
//! accumulated left to right, and its probability is the clamped sigmoid of that score.

mod train;
mod tree;

pub use train::train_gbdt;
pub use tree::{Node, PathStep, Tree};

use serde::{Deserialize, Serialize};

use crate::data::{check_instance, Dataset};
use crate::error::{Error, Result};
use crate::metrics::clamp_probability;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub num_trees: usize,
    pub max_depth: usize,
    pub min_instances_per_split: usize,
    pub learning_rate: f64,
    pub row_subsample: f64,
    pub feature_subsample: f64,
    pub seed: u64,
    pub prob_clamp_epsilon: f64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            num_trees: 150,
            max_depth: 8,
            min_instances_per_split: 20,
            learning_rate: 0.01,
            row_subsample: 0.6,
            feature_subsample: 0.6,
            seed: 42,
            prob_clamp_epsilon: 1e-15,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_trees == 0 {
            return fail("num_trees must be positive".into());
        }
        if self.max_depth == 0 {
            return fail("max_depth must be positive".into());
        }
        if self.min_instances_per_split == 0 {
            return fail("min_instances_per_split must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        for (name, v) in [
            ("row_subsample", self.row_subsample),
            ("feature_subsample", self.feature_subsample),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return fail(format!("{name} must lie in (0,1], got {v}"));
            }
        }
        if !(self.prob_clamp_epsilon > 0.0 && self.prob_clamp_epsilon < 0.5) {
            return fail(format!(
                "prob_clamp_epsilon must lie in (0,0.5), got {}",
                self.prob_clamp_epsilon
            ));
        }
        Ok(())
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// A trained boosting ensemble. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    trees: Vec<Tree>,
    base_score: f64,
    config: GbdtConfig,
    feature_names: Vec<String>,
    per_feature_gain: Vec<f64>,
    /// Training logloss of the first `t` trees at index `t`; empty for hand-built models.
    training_loss: Vec<f64>,
}

impl GbdtModel {
    pub fn new(
        trees: Vec<Tree>,
        base_score: f64,
        config: GbdtConfig,
        feature_names: Vec<String>,
        per_feature_gain: Vec<f64>,
    ) -> Result<Self> {
        let model = GbdtModel {
            trees,
            base_score,
            config,
            feature_names,
            per_feature_gain,
            training_loss: Vec::new(),
        };
        model.validate()?;
        Ok(model)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvariantViolation(msg));
        self.config
            .validate()
            .map_err(|e| Error::InvariantViolation(e.to_string()))?;
        if !self.base_score.is_finite() {
            return bad("base_score is not finite".into());
        }
        if self.trees.len() > self.config.num_trees {
            return bad(format!(
                "{} trees exceed configured num_trees {}",
                self.trees.len(),
                self.config.num_trees
            ));
        }
        let width = self.feature_names.len();
        if self.per_feature_gain.len() != width {
            return bad("per_feature_gain length differs from feature count".into());
        }
        if self
            .per_feature_gain
            .iter()
            .any(|g| !(g.is_finite() && *g >= 0.0))
        {
            return bad("per_feature_gain entries must be finite and non-negative".into());
        }
        if !self.training_loss.is_empty() && self.training_loss.len() != self.trees.len() + 1 {
            return bad("training_loss length must be tree count + 1".into());
        }
        for (j, tree) in self.trees.iter().enumerate() {
            tree.validate()
                .map_err(|e| Error::InvariantViolation(format!("tree {j}: {e}")))?;
            if let Some(f) = tree.max_feature() {
                if f >= width {
                    return bad(format!("tree {j} splits on feature {f} of {width}"));
                }
            }
        }
        Ok(())
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn base_score(&self) -> f64 {
        self.base_score
    }

    pub fn config(&self) -> &GbdtConfig {
        &self.config
    }

    pub fn learning_rate(&self) -> f64 {
        self.config.learning_rate
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn per_feature_gain(&self) -> &[f64] {
        &self.per_feature_gain
    }

    pub fn training_loss(&self) -> &[f64] {
        &self.training_loss
    }

    fn probability(&self, margin: f64) -> f64 {
        clamp_probability(sigmoid(margin), self.config.prob_clamp_epsilon)
    }

    /// Raw score through the first `j` trees; no input checks.
    pub(crate) fn margin_through(&self, instance: &[f64], j: usize) -> f64 {
        let lr = self.config.learning_rate;
        let mut m = self.base_score;
        for tree in &self.trees[..j] {
            m += lr * tree.route(instance).1;
        }
        m
    }

    pub fn predict_proba(&self, instance: &[f64]) -> Result<f64> {
        check_instance(instance, self.n_features())?;
        Ok(self.probability(self.margin_through(instance, self.trees.len())))
    }

    /// Probability using only the first `j` trees, `1 <= j <= num_trees`.
    pub fn staged_proba(&self, instance: &[f64], j: usize) -> Result<f64> {
        if j == 0 || j > self.trees.len() {
            return Err(Error::IndexOutOfRange {
                index: j,
                min: 1,
                max: self.trees.len(),
            });
        }
        check_instance(instance, self.n_features())?;
        Ok(self.probability(self.margin_through(instance, j)))
    }

    /// For every tree `j`, the reached leaf index and the staged probability through tree `j`.
    pub(crate) fn staged_leaves(&self, instance: &[f64], out: &mut Vec<(usize, f64)>) {
        out.clear();
        let lr = self.config.learning_rate;
        let mut m = self.base_score;
        for tree in &self.trees {
            let (leaf, value) = tree.route(instance);
            m += lr * value;
            out.push((leaf, self.probability(m)));
        }
    }

    pub fn predict_dataset(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        if dataset.n_features() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: dataset.n_features(),
            });
        }
        Ok(dataset
            .rows()
            .map(|r| self.probability(self.margin_through(r, self.trees.len())))
            .collect())
    }

    /// Gain importances indexed by feature, normalized to sum to 1 when any gain is positive.
    pub fn normalized_importances(&self) -> Vec<f64> {
        let total: f64 = self.per_feature_gain.iter().sum();
        if total > 0.0 {
            self.per_feature_gain.iter().map(|g| g / total).collect()
        } else {
            vec![0.0; self.per_feature_gain.len()]
        }
    }

    /// `(feature_name, importance)` sorted by descending importance, ties by feature index.
    pub fn feature_importance(&self) -> Vec<(String, f64)> {
        let imp = self.normalized_importances();
        ranked_indices(&imp)
            .into_iter()
            .map(|i| (self.feature_names[i].clone(), imp[i]))
            .collect()
    }
}

/// Indices ordered by descending value, ties by ascending index.
pub(crate) fn ranked_indices(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump_model(base: f64, lr: f64) -> GbdtModel {
        let tree = Tree::from_nodes(vec![
            Node::Split {
                feature: 1,
                threshold: 0.25,
                left: 1,
                right: 2,
                gain: 3.0,
            },
            Node::Leaf {
                value: -0.8,
                leaf_index: 0,
            },
            Node::Leaf {
                value: 1.6,
                leaf_index: 1,
            },
        ])
        .unwrap();
        let config = GbdtConfig {
            num_trees: 2,
            learning_rate: lr,
            ..GbdtConfig::default()
        };
        GbdtModel::new(
            vec![tree.clone(), tree],
            base,
            config,
            vec!["a".into(), "b".into()],
            vec![0.0, 6.0],
        )
        .unwrap()
    }

    #[test]
    fn table_one_defaults() {
        let c = GbdtConfig::default();
        assert_eq!(
            (c.num_trees, c.max_depth, c.min_instances_per_split),
            (150, 8, 20)
        );
        assert_eq!(
            (c.learning_rate, c.row_subsample, c.feature_subsample),
            (0.01, 0.6, 0.6)
        );
        assert_eq!(c.prob_clamp_epsilon, 1e-15);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn config_validation() {
        let base = GbdtConfig::default();
        for bad in [
            GbdtConfig {
                num_trees: 0,
                ..base.clone()
            },
            GbdtConfig {
                max_depth: 0,
                ..base.clone()
            },
            GbdtConfig {
                learning_rate: 0.0,
                ..base.clone()
            },
            GbdtConfig {
                row_subsample: 1.2,
                ..base.clone()
            },
            GbdtConfig {
                feature_subsample: 0.0,
                ..base.clone()
            },
            GbdtConfig {
                prob_clamp_epsilon: 0.5,
                ..base.clone()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn zero_tree_models() {
        let m = GbdtModel::new(
            vec![],
            0.0,
            GbdtConfig::default(),
            vec!["x".into()],
            vec![0.0],
        )
        .unwrap();
        assert_eq!(m.predict_proba(&[3.0]).unwrap(), 0.5);
        let m = GbdtModel::new(
            vec![],
            logit(0.25),
            GbdtConfig::default(),
            vec!["x".into()],
            vec![0.0],
        )
        .unwrap();
        assert!((m.predict_proba(&[3.0]).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(
            m.staged_proba(&[3.0], 1),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn hand_routed_predictions() {
        let m = stump_model(0.1, 0.5);
        // b = 0.25 sits on the boundary and goes left
        let x = [9.0, 0.25];
        let expect1 = sigmoid(0.1 + 0.5 * -0.8);
        assert!((m.staged_proba(&x, 1).unwrap() - expect1).abs() < 1e-15);
        let expect2 = sigmoid(0.1 + 0.5 * -0.8 + 0.5 * -0.8);
        assert_eq!(m.predict_proba(&x).unwrap(), m.staged_proba(&x, 2).unwrap());
        assert!((m.predict_proba(&x).unwrap() - expect2).abs() < 1e-15);
        let y = [0.0, 1.0];
        assert!((m.predict_proba(&y).unwrap() - sigmoid(0.1 + 1.6)).abs() < 1e-15);
    }

    #[test]
    fn input_errors() {
        let m = stump_model(0.0, 0.1);
        assert!(matches!(
            m.predict_proba(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            m.predict_proba(&[1.0, f64::INFINITY]),
            Err(Error::NonFiniteFeature { col: 1, .. })
        ));
        assert!(matches!(
            m.staged_proba(&[1.0, 1.0], 3),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn clamped_probabilities() {
        let m = GbdtModel::new(
            vec![],
            1e3,
            GbdtConfig::default(),
            vec!["x".into()],
            vec![0.0],
        )
        .unwrap();
        assert_eq!(m.predict_proba(&[0.0]).unwrap(), 1.0 - 1e-15);
        let m = GbdtModel::new(
            vec![],
            -1e3,
            GbdtConfig::default(),
            vec!["x".into()],
            vec![0.0],
        )
        .unwrap();
        assert_eq!(m.predict_proba(&[0.0]).unwrap(), 1e-15);
    }

    #[test]
    fn single_split_feature_importance() {
        let m = stump_model(0.0, 0.1);
        let imp = m.feature_importance();
        assert_eq!(imp[0], ("b".to_string(), 1.0));
        assert_eq!(imp[1], ("a".to_string(), 0.0));
    }

    #[test]
    fn rejects_inconsistent_models() {
        let cfg = GbdtConfig {
            num_trees: 1,
            ..GbdtConfig::default()
        };
        let t = Tree::single_leaf(0.0);
        assert!(GbdtModel::new(
            vec![t.clone(), t.clone()],
            0.0,
            cfg.clone(),
            vec!["x".into()],
            vec![0.0]
        )
        .is_err());
        assert!(GbdtModel::new(
            vec![t.clone()],
            0.0,
            cfg.clone(),
            vec!["x".into()],
            vec![-1.0]
        )
        .is_err());
        assert!(GbdtModel::new(vec![t], 0.0, cfg, vec!["x".into()], vec![]).is_err());
    }
}
