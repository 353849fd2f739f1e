//! Level-wise cascades of boosting ensembles over leaf cross-entropy features.
//!
//! Every tree `j` of a level maps an instance to `S_jk`, the mean logistic loss of
//! the training instances that share its leaf `k`, measured with the staged
//! probability through tree `j`. The vector of those values, one per tree, is the
//! input of the next level (optionally followed by extra raw columns). Because each
//! tree's feature takes only as many values as the tree has leaves, a split of the
//! next level on that feature selects a set of leaves of the earlier tree, and a
//! root-to-leaf path selects an intersection of unions of earlier leaves.
//!
//! Levels, trees and leaves are 0-based in this API. Rendered explanations use
//! 1-based labels (`L1.T2.leaf3`).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{check_instance, Dataset};
use crate::error::{Error, Result};
use crate::gbdt::{train_gbdt, GbdtConfig, GbdtModel};
use crate::metrics::binary_cross_entropy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeafEntropy {
    pub entropy: f64,
    /// Instances of the populating dataset routed to this leaf.
    pub count: usize,
}

/// Per tree, per leaf cross-entropy values, indexed `[tree][leaf_index]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafEntropyTable {
    trees: Vec<Vec<LeafEntropy>>,
}

impl LeafEntropyTable {
    pub fn new(trees: Vec<Vec<LeafEntropy>>) -> Result<Self> {
        let table = LeafEntropyTable { trees };
        table.validate()?;
        Ok(table)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        for (j, leaves) in self.trees.iter().enumerate() {
            for (k, leaf) in leaves.iter().enumerate() {
                if !(leaf.entropy.is_finite() && leaf.entropy >= 0.0) {
                    return Err(Error::InvariantViolation(format!(
                        "entropy of tree {j} leaf {k} is {}",
                        leaf.entropy
                    )));
                }
                if leaf.count == 0 {
                    return Err(Error::InvariantViolation(format!(
                        "tree {j} leaf {k} has zero instances"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks that the table has one entry per leaf of every tree of `model`.
    pub(crate) fn check_shape(&self, model: &GbdtModel) -> Result<()> {
        if self.trees.len() != model.num_trees() {
            return Err(Error::InvariantViolation(format!(
                "entropy table covers {} trees, model has {}",
                self.trees.len(),
                model.num_trees()
            )));
        }
        for (j, (leaves, tree)) in self.trees.iter().zip(model.trees()).enumerate() {
            if leaves.len() != tree.num_leaves() {
                return Err(Error::InvariantViolation(format!(
                    "entropy table has {} leaves for tree {j}, tree has {}",
                    leaves.len(),
                    tree.num_leaves()
                )));
            }
        }
        Ok(())
    }

    pub fn num_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn tree(&self, j: usize) -> &[LeafEntropy] {
        &self.trees[j]
    }

    pub fn entropy(&self, tree: usize, leaf: usize) -> f64 {
        self.trees[tree][leaf].entropy
    }

    pub fn trees(&self) -> &[Vec<LeafEntropy>] {
        &self.trees
    }
}

/// Mean logistic loss per leaf, using the staged probability through each tree.
///
/// Counts cover every instance of `dataset`, not only the rows a tree was grown on.
pub fn compute_leaf_cross_entropy(
    model: &GbdtModel,
    dataset: &Dataset,
) -> Result<LeafEntropyTable> {
    if dataset.n_features() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            found: dataset.n_features(),
        });
    }
    let eps = model.config().prob_clamp_epsilon;
    let mut sums: Vec<Vec<f64>> = model
        .trees()
        .iter()
        .map(|t| vec![0.0; t.num_leaves()])
        .collect();
    let mut counts: Vec<Vec<usize>> = model
        .trees()
        .iter()
        .map(|t| vec![0; t.num_leaves()])
        .collect();
    let mut staged = Vec::with_capacity(model.num_trees());
    for (row, &y) in dataset.rows().zip(dataset.labels()) {
        model.staged_leaves(row, &mut staged);
        for (j, &(leaf, p)) in staged.iter().enumerate() {
            sums[j][leaf] += binary_cross_entropy(y, p, eps);
            counts[j][leaf] += 1;
        }
    }
    let mut trees = Vec::with_capacity(sums.len());
    for (j, (s, c)) in sums.into_iter().zip(counts).enumerate() {
        let mut leaves = Vec::with_capacity(s.len());
        for (k, (sum, count)) in s.into_iter().zip(c).enumerate() {
            if count == 0 {
                return Err(Error::DegenerateLeaf { tree: j, leaf: k });
            }
            leaves.push(LeafEntropy {
                entropy: sum / count as f64,
                count,
            });
        }
        trees.push(leaves);
    }
    LeafEntropyTable::new(trees)
}

/// Training recipe for one level.
///
/// For the first level `raw_features` are the raw columns the booster sees. For
/// later levels they are extra raw columns appended after the preceding level's
/// entropy features (empty for a plain cascade).
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSpec {
    pub gbdt: GbdtConfig,
    pub raw_features: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeLevel {
    raw_features: Vec<usize>,
    model: GbdtModel,
    entropy: LeafEntropyTable,
}

impl CascadeLevel {
    pub fn new(
        raw_features: Vec<usize>,
        model: GbdtModel,
        entropy: LeafEntropyTable,
    ) -> Result<Self> {
        entropy.validate()?;
        entropy.check_shape(&model)?;
        Ok(CascadeLevel {
            raw_features,
            model,
            entropy,
        })
    }

    pub fn model(&self) -> &GbdtModel {
        &self.model
    }

    pub fn entropy(&self) -> &LeafEntropyTable {
        &self.entropy
    }

    pub fn raw_features(&self) -> &[usize] {
        &self.raw_features
    }

    /// Number of entropy features this level emits (its tree count).
    pub fn output_width(&self) -> usize {
        self.model.num_trees()
    }

    pub(crate) fn transform_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.extend(self.model.trees().iter().enumerate().map(|(j, tree)| {
            let (leaf, _) = tree.route(input);
            self.entropy.entropy(j, leaf)
        }));
    }

    /// Entropy feature vector of an instance given in this level's input space.
    pub fn transform(&self, input: &[f64]) -> Result<Vec<f64>> {
        check_instance(input, self.model.n_features())?;
        let mut out = Vec::with_capacity(self.output_width());
        self.transform_into(input, &mut out);
        Ok(out)
    }

    /// Leaf index reached in every tree.
    pub fn leaves(&self, input: &[f64]) -> Vec<usize> {
        self.model
            .trees()
            .iter()
            .map(|t| t.route(input).0)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeModel {
    raw_feature_names: Vec<String>,
    levels: Vec<CascadeLevel>,
}

impl CascadeModel {
    pub fn new(raw_feature_names: Vec<String>, levels: Vec<CascadeLevel>) -> Result<Self> {
        let model = CascadeModel {
            raw_feature_names,
            levels,
        };
        model.validate()?;
        Ok(model)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvariantViolation(msg));
        if self.levels.is_empty() {
            return bad("cascade has no levels".into());
        }
        let n_raw = self.raw_feature_names.len();
        let mut prev_width = 0;
        for (l, level) in self.levels.iter().enumerate() {
            level.model.validate()?;
            level.entropy.validate()?;
            level.entropy.check_shape(&level.model)?;
            if let Some(&c) = level.raw_features.iter().find(|&&c| c >= n_raw) {
                return bad(format!("level {l} references raw column {c} of {n_raw}"));
            }
            let expected = prev_width + level.raw_features.len();
            if level.model.n_features() != expected {
                return bad(format!(
                    "level {l} booster expects {} inputs, cascade supplies {expected}",
                    level.model.n_features()
                ));
            }
            prev_width = level.output_width();
        }
        Ok(())
    }

    pub fn levels(&self) -> &[CascadeLevel] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn raw_feature_names(&self) -> &[String] {
        &self.raw_feature_names
    }

    pub fn n_raw_features(&self) -> usize {
        self.raw_feature_names.len()
    }

    /// The last level's booster, which scores instances.
    pub fn head(&self) -> &GbdtModel {
        &self.levels[self.levels.len() - 1].model
    }

    fn push_raw(raw: &[f64], cols: &[usize], out: &mut Vec<f64>) {
        out.extend(cols.iter().map(|&c| raw[c]));
    }

    /// Input of `level` for a raw instance; no checks.
    pub(crate) fn level_input_unchecked(&self, raw: &[f64], level: usize) -> Vec<f64> {
        let mut input = Vec::new();
        Self::push_raw(raw, &self.levels[0].raw_features, &mut input);
        for l in 1..=level {
            let mut next = Vec::with_capacity(self.levels[l].model.n_features());
            self.levels[l - 1].transform_into(&input, &mut next);
            Self::push_raw(raw, &self.levels[l].raw_features, &mut next);
            input = next;
        }
        input
    }

    pub fn level_input(&self, raw: &[f64], level: usize) -> Result<Vec<f64>> {
        check_instance(raw, self.n_raw_features())?;
        if level >= self.levels.len() {
            return Err(Error::IndexOutOfRange {
                index: level,
                min: 0,
                max: self.levels.len() - 1,
            });
        }
        Ok(self.level_input_unchecked(raw, level))
    }

    /// Entropy features emitted by the last level.
    pub fn output_features(&self, raw: &[f64]) -> Result<Vec<f64>> {
        check_instance(raw, self.n_raw_features())?;
        Ok(self.output_features_unchecked(raw))
    }

    pub(crate) fn output_features_unchecked(&self, raw: &[f64]) -> Vec<f64> {
        let last = self.levels.len() - 1;
        let input = self.level_input_unchecked(raw, last);
        let mut out = Vec::with_capacity(self.levels[last].output_width());
        self.levels[last].transform_into(&input, &mut out);
        out
    }

    pub fn output_width(&self) -> usize {
        self.levels[self.levels.len() - 1].output_width()
    }

    pub fn predict(&self, raw: &[f64]) -> Result<f64> {
        check_instance(raw, self.n_raw_features())?;
        let input = self.level_input_unchecked(raw, self.levels.len() - 1);
        self.head().predict_proba(&input)
    }

    pub fn predict_dataset(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        if dataset.n_features() != self.n_raw_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_raw_features(),
                found: dataset.n_features(),
            });
        }
        dataset.rows().map(|r| self.predict(r)).collect()
    }

    /// Describes the instances reaching `leaf` of `tree` at `level` in terms of
    /// the leaves of the preceding level.
    pub fn explain_leaf(&self, level: usize, tree: usize, leaf: usize) -> Result<PathExplanation> {
        if level == 0 {
            return Err(Error::NotACascadeLevel(level));
        }
        let lvl = self.levels.get(level).ok_or(Error::IndexOutOfRange {
            index: level,
            min: 1,
            max: self.levels.len() - 1,
        })?;
        let target = lvl.model.trees().get(tree).ok_or(Error::IndexOutOfRange {
            index: tree,
            min: 0,
            max: lvl.model.num_trees().saturating_sub(1),
        })?;
        let path = target.path_to_leaf(leaf).ok_or(Error::IndexOutOfRange {
            index: leaf,
            min: 0,
            max: target.num_leaves() - 1,
        })?;
        let prev = &self.levels[level - 1];
        let prev_width = prev.output_width();

        let mut splits = Vec::new();
        let mut raw_conditions = Vec::new();
        let mut terms: Vec<TreeTerm> = Vec::new();
        for step in path {
            if step.feature < prev_width {
                let j = step.feature;
                let (mut minus, mut plus) = (Vec::new(), Vec::new());
                for (k, e) in prev.entropy.tree(j).iter().enumerate() {
                    if e.entropy <= step.threshold {
                        minus.push(k);
                    } else {
                        plus.push(k);
                    }
                }
                let selected = if step.went_left { &minus } else { &plus };
                match terms.iter_mut().find(|t| t.tree == j) {
                    Some(term) => term.leaves.retain(|k| selected.contains(k)),
                    None => terms.push(TreeTerm {
                        tree: j,
                        leaves: selected.clone(),
                    }),
                }
                splits.push(EntropySplit {
                    tree: j,
                    threshold: step.threshold,
                    went_left: step.went_left,
                    minus,
                    plus,
                });
            } else {
                let raw = lvl.raw_features[step.feature - prev_width];
                raw_conditions.push(RawCondition {
                    feature: raw,
                    name: self.raw_feature_names[raw].clone(),
                    threshold: step.threshold,
                    went_left: step.went_left,
                });
            }
        }
        Ok(PathExplanation {
            level,
            tree,
            leaf,
            splits,
            terms,
            raw_conditions,
        })
    }
}

/// A split of a later level on the entropy feature of preceding tree `tree`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropySplit {
    pub tree: usize,
    pub threshold: f64,
    pub went_left: bool,
    /// Leaves whose entropy is `<= threshold`.
    pub minus: Vec<usize>,
    /// Leaves whose entropy is `> threshold`.
    pub plus: Vec<usize>,
}

/// Leaves of a preceding tree admitted by every split on it along the path.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeTerm {
    pub tree: usize,
    pub leaves: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawCondition {
    pub feature: usize,
    pub name: String,
    pub threshold: f64,
    pub went_left: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathExplanation {
    pub level: usize,
    pub tree: usize,
    pub leaf: usize,
    /// Path splits on entropy features, root first.
    pub splits: Vec<EntropySplit>,
    /// One term per constrained preceding tree, in order of first appearance on the path.
    pub terms: Vec<TreeTerm>,
    /// Path splits on injected raw columns, root first.
    pub raw_conditions: Vec<RawCondition>,
}

impl PathExplanation {
    /// Whether an instance satisfies the explanation, given the leaf it reaches in
    /// every preceding-level tree and its raw feature vector.
    pub fn admits(&self, preceding_leaves: &[usize], raw: &[f64]) -> bool {
        self.terms
            .iter()
            .all(|t| t.leaves.contains(&preceding_leaves[t.tree]))
            && self.raw_conditions.iter().all(|c| {
                let left = raw[c.feature] <= c.threshold;
                left == c.went_left
            })
    }

    /// Union-intersection form, e.g. `(L1.T2.leaf1 ∪ L1.T2.leaf3) ∩ (L1.T1.leaf2 ∪ L1.T1.leaf3)`.
    pub fn expression(&self) -> String {
        let prev = self.level; // 1-based label of the preceding level
        let mut parts: Vec<String> = self
            .terms
            .iter()
            .map(|t| {
                if t.leaves.is_empty() {
                    return "∅".to_string();
                }
                let inner = t
                    .leaves
                    .iter()
                    .map(|k| format!("L{prev}.T{}.leaf{}", t.tree + 1, k + 1))
                    .collect::<Vec<_>>()
                    .join(" ∪ ");
                format!("({inner})")
            })
            .collect();
        parts.extend(self.raw_conditions.iter().map(|c| {
            let op = if c.went_left { "<=" } else { ">" };
            format!("[{} {op} {}]", c.name, c.threshold)
        }));
        if parts.is_empty() {
            return "(all instances)".to_string();
        }
        parts.join(" ∩ ")
    }

    /// Multi-line report: one S-/S+ line per path split, then the expression.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let prev = self.level;
        let _ = writeln!(
            s,
            "leaf L{}.T{}.leaf{}",
            self.level + 1,
            self.tree + 1,
            self.leaf + 1
        );
        let fmt_set = |leaves: &[usize], tree: usize| {
            let items: Vec<String> = leaves
                .iter()
                .map(|k| format!("L{prev}.T{}.leaf{}", tree + 1, k + 1))
                .collect();
            format!("{{{}}}", items.join(", "))
        };
        for sp in &self.splits {
            let _ = writeln!(
                s,
                "split F{prev}.{} <= {}: S- = {} S+ = {} -> {}",
                sp.tree + 1,
                sp.threshold,
                fmt_set(&sp.minus, sp.tree),
                fmt_set(&sp.plus, sp.tree),
                if sp.went_left { "S-" } else { "S+" }
            );
        }
        for c in &self.raw_conditions {
            let _ = writeln!(
                s,
                "split {} <= {} -> {}",
                c.name,
                c.threshold,
                if c.went_left { "left" } else { "right" }
            );
        }
        let _ = writeln!(s, "expression {}", self.expression());
        s
    }
}

fn check_specs(specs: &[LevelSpec], n_raw: usize) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::InvalidConfig(
            "a cascade needs at least one level".into(),
        ));
    }
    if specs[0].raw_features.is_empty() {
        return Err(Error::InvalidConfig(
            "the first level needs raw input columns".into(),
        ));
    }
    for (l, spec) in specs.iter().enumerate() {
        spec.gbdt.validate()?;
        if let Some(&c) = spec.raw_features.iter().find(|&&c| c >= n_raw) {
            return Err(Error::LevelWidthMismatch {
                level: l,
                column: c,
                width: n_raw,
            });
        }
    }
    Ok(())
}

/// Trains the levels in order, each against the original labels.
pub fn train_ldctree(dataset: &Dataset, specs: &[LevelSpec]) -> Result<CascadeModel> {
    check_specs(specs, dataset.n_features())?;
    let mut input = dataset.select_columns(&specs[0].raw_features)?;
    let mut levels = Vec::with_capacity(specs.len());
    for (l, spec) in specs.iter().enumerate() {
        let model = train_gbdt(&input, &spec.gbdt)?;
        let entropy = compute_leaf_cross_entropy(&model, &input)?;
        let level = CascadeLevel::new(spec.raw_features.clone(), model, entropy)?;
        if let Some(next) = specs.get(l + 1) {
            input = next_level_input(dataset, &input, &level, l, &next.raw_features)?;
        }
        levels.push(level);
    }
    CascadeModel::new(dataset.feature_names().to_vec(), levels)
}

fn next_level_input(
    raw: &Dataset,
    input: &Dataset,
    level: &CascadeLevel,
    level_index: usize,
    extra: &[usize],
) -> Result<Dataset> {
    let width = level.output_width() + extra.len();
    let mut features = Vec::with_capacity(raw.n_rows() * width);
    for r in 0..raw.n_rows() {
        level.transform_into(input.row(r), &mut features);
        features.extend(extra.iter().map(|&c| raw.value(r, c)));
    }
    let mut names: Vec<String> = (0..level.output_width())
        .map(|j| format!("L{}.T{}", level_index + 1, j + 1))
        .collect();
    names.extend(extra.iter().map(|&c| raw.feature_names()[c].clone()));
    raw.with_features(features, names)
}
