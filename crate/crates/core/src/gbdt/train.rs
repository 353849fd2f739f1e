use rayon::prelude::*;

use super::tree::{Node, Tree};
use super::{logit, sigmoid, GbdtConfig, GbdtModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{binary_cross_entropy, clamp_probability};
use crate::rng::{fraction_count, rng_from_seed, sample_sorted};

/// Splits whose gain does not exceed this are treated as zero-gain.
const MIN_SPLIT_GAIN: f64 = 1e-12;

/// Step halvings tried before a tree that raises the training loss stops boosting.
const MAX_HALVINGS: usize = 30;

/// Below this many (rows x candidate features) a node is searched sequentially.
const PARALLEL_WORK: usize = 1 << 16;

/// Fits a boosting ensemble to `dataset`.
///
/// Each iteration draws, from one generator seeded with `config.seed`, first the
/// row subsample and then the candidate features (both without replacement).
/// Boosting stops early if a tree cannot split its root. A tree whose step would
/// raise the full training loss has its leaf values halved until it does not; if
/// that fails `MAX_HALVINGS` times boosting stops as well.
pub fn train_gbdt(dataset: &Dataset, config: &GbdtConfig) -> Result<GbdtModel> {
    config.validate()?;
    dataset.check_both_classes()?;
    let n = dataset.n_rows();
    let width = dataset.n_features();
    if width == 0 {
        return Err(Error::InsufficientFeatures(
            "dataset has no feature columns".into(),
        ));
    }
    if n > u32::MAX as usize {
        return Err(Error::InvalidDataset("too many rows".into()));
    }

    let columns: Vec<Vec<f64>> = (0..width)
        .map(|c| (0..n).map(|r| dataset.value(r, c)).collect())
        .collect();
    let presorted: Vec<Vec<u32>> = columns
        .par_iter()
        .map(|col| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            idx
        })
        .collect();

    let labels: Vec<f64> = dataset.labels().iter().map(|&y| y as f64).collect();
    let eps = config.prob_clamp_epsilon;
    let lr = config.learning_rate;
    let base_score = logit(dataset.positive_rate());
    let mut margins = vec![base_score; n];
    let mut training_loss = vec![mean_loss(dataset.labels(), &margins, eps)];

    let mut rng = rng_from_seed(config.seed);
    let n_rows = fraction_count(config.row_subsample, n);
    let n_cols = fraction_count(config.feature_subsample, width);

    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut in_sample = vec![false; n];
    let mut leaf_of = vec![0usize; n];
    let mut candidate = vec![0.0; n];
    let mut per_feature_gain = vec![0.0; width];
    let mut trees = Vec::with_capacity(config.num_trees);

    for _ in 0..config.num_trees {
        let rows = sample_sorted(&mut rng, n, n_rows);
        let features = sample_sorted(&mut rng, width, n_cols);

        in_sample.iter_mut().for_each(|s| *s = false);
        for &r in &rows {
            in_sample[r] = true;
            let p = clamp_probability(sigmoid(margins[r]), eps);
            grad[r] = p - labels[r];
            hess[r] = p * (1.0 - p);
        }
        let root_lists: Vec<Vec<u32>> = features
            .iter()
            .map(|&f| {
                presorted[f]
                    .iter()
                    .copied()
                    .filter(|&r| in_sample[r as usize])
                    .collect()
            })
            .collect();

        let mut grower = Grower {
            config,
            columns: &columns,
            features: &features,
            grad: &grad,
            hess: &hess,
            goes_left: vec![false; n],
            nodes: Vec::new(),
            next_leaf: 0,
            split_gains: Vec::new(),
        };
        grower.grow(root_lists, 0);
        let Grower {
            nodes, split_gains, ..
        } = grower;
        let mut tree = Tree::from_nodes(nodes)?;
        if tree.is_single_leaf() {
            break;
        }
        for (r, leaf) in leaf_of.iter_mut().enumerate() {
            *leaf = tree.route(dataset.row(r)).0;
        }
        let previous = *training_loss.last().expect("base loss is recorded");
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let values: Vec<f64> = (0..tree.num_leaves())
                .map(|k| tree.leaf_value(k).expect("leaf exists"))
                .collect();
            for (r, m) in candidate.iter_mut().enumerate() {
                *m = margins[r] + lr * values[leaf_of[r]];
            }
            let loss = mean_loss(dataset.labels(), &candidate, eps);
            if loss <= previous {
                accepted = Some(loss);
                break;
            }
            tree.scale_leaves(0.5);
        }
        let Some(loss) = accepted else { break };
        for (f, g) in split_gains {
            per_feature_gain[f] += g;
        }
        std::mem::swap(&mut margins, &mut candidate);
        training_loss.push(loss);
        trees.push(tree);
    }

    let mut model = GbdtModel::new(
        trees,
        base_score,
        config.clone(),
        dataset.feature_names().to_vec(),
        per_feature_gain,
    )?;
    model.training_loss = training_loss;
    Ok(model)
}

fn mean_loss(labels: &[u8], margins: &[f64], eps: f64) -> f64 {
    let total: f64 = labels
        .iter()
        .zip(margins)
        .map(|(&y, &m)| binary_cross_entropy(y, sigmoid(m), eps))
        .sum();
    total / labels.len() as f64
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    /// Number of rows (in sorted order) going left.
    left_count: usize,
    threshold: f64,
}

struct Grower<'a> {
    config: &'a GbdtConfig,
    columns: &'a [Vec<f64>],
    /// Global indices of the candidate features, ascending.
    features: &'a [usize],
    grad: &'a [f64],
    hess: &'a [f64],
    goes_left: Vec<bool>,
    nodes: Vec<Node>,
    next_leaf: usize,
    split_gains: Vec<(usize, f64)>,
}

impl Grower<'_> {
    /// `lists[k]` holds the node's rows sorted by feature `features[k]`.
    fn grow(&mut self, lists: Vec<Vec<u32>>, depth: usize) -> usize {
        let rows = &lists[0];
        let (g_sum, h_sum) = rows.iter().fold((0.0, 0.0), |(g, h), &r| {
            (g + self.grad[r as usize], h + self.hess[r as usize])
        });
        let id = self.nodes.len();

        let best =
            if depth < self.config.max_depth && rows.len() >= self.config.min_instances_per_split {
                self.best_split(&lists, g_sum, h_sum)
            } else {
                None
            };

        let Some((k, cand)) = best else {
            self.nodes.push(Node::Leaf {
                value: -g_sum / h_sum,
                leaf_index: self.next_leaf,
            });
            self.next_leaf += 1;
            return id;
        };

        let feature = self.features[k];
        for (pos, &r) in lists[k].iter().enumerate() {
            self.goes_left[r as usize] = pos < cand.left_count;
        }
        let mut left_lists = Vec::with_capacity(lists.len());
        let mut right_lists = Vec::with_capacity(lists.len());
        for list in lists {
            let (l, r): (Vec<u32>, Vec<u32>) =
                list.into_iter().partition(|&r| self.goes_left[r as usize]);
            left_lists.push(l);
            right_lists.push(r);
        }

        self.nodes.push(Node::Split {
            feature,
            threshold: cand.threshold,
            left: 0,
            right: 0,
            gain: cand.gain,
        });
        self.split_gains.push((feature, cand.gain));
        let left = self.grow(left_lists, depth + 1);
        let right = self.grow(right_lists, depth + 1);
        if let Node::Split {
            left: l, right: r, ..
        } = &mut self.nodes[id]
        {
            *l = left;
            *r = right;
        }
        id
    }

    /// Best split over candidate features; ties keep the lowest feature, then the lowest threshold.
    fn best_split(&self, lists: &[Vec<u32>], g_sum: f64, h_sum: f64) -> Option<(usize, Candidate)> {
        let search = |k: usize| self.best_for_feature(&lists[k], self.features[k], g_sum, h_sum);
        let per_feature: Vec<Option<Candidate>> = if lists[0].len() * lists.len() >= PARALLEL_WORK {
            (0..lists.len()).into_par_iter().map(search).collect()
        } else {
            (0..lists.len()).map(search).collect()
        };
        let mut best: Option<(usize, Candidate)> = None;
        for (k, cand) in per_feature.into_iter().enumerate() {
            if let Some(c) = cand {
                if best.is_none_or(|(_, b)| c.gain > b.gain) {
                    best = Some((k, c));
                }
            }
        }
        best
    }

    fn best_for_feature(
        &self,
        sorted: &[u32],
        feature: usize,
        g_sum: f64,
        h_sum: f64,
    ) -> Option<Candidate> {
        let col = &self.columns[feature];
        let parent = g_sum * g_sum / h_sum;
        let mut g_left = 0.0;
        let mut h_left = 0.0;
        let mut best: Option<Candidate> = None;
        for i in 0..sorted.len().saturating_sub(1) {
            let r = sorted[i] as usize;
            g_left += self.grad[r];
            h_left += self.hess[r];
            let here = col[r];
            let next = col[sorted[i + 1] as usize];
            if here >= next {
                continue;
            }
            let g_right = g_sum - g_left;
            let h_right = h_sum - h_left;
            let gain = 0.5 * (g_left * g_left / h_left + g_right * g_right / h_right - parent);
            if gain > MIN_SPLIT_GAIN && best.is_none_or(|b| gain > b.gain) {
                let mut threshold = here + (next - here) / 2.0;
                if threshold >= next {
                    threshold = here;
                }
                best = Some(Candidate {
                    gain,
                    left_count: i + 1,
                    threshold,
                });
            }
        }
        best
    }
}
