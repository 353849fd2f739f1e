//! Parallel cascades joined by a final booster.
//!
//! `Eldctree` gives each cascade a random subset of all raw features for its first
//! level. `Feldctree` first ranks raw features with a pre-trained booster, splits
//! them into strong (SCF) and weak (WCF) correlation features, draws first-level
//! inputs from WCF only and appends a fresh random SCF subset to the input of
//! every later level. In both modes the head booster sees only the concatenated
//! last-level entropy features of the cascades, in cascade order.
//!
//! Random streams: cascade `c` uses seed `derive_seed(seed, CASCADE, c)`. Its
//! feature draws come from a generator seeded with that value, in level order, and
//! its level `l` booster uses `derive_seed(cascade_seed, LEVEL, l)`. The head uses
//! `derive_seed(seed, HEAD, 0)` and the importance booster `derive_seed(seed, IMPORTANCE, 0)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{train_ldctree, CascadeModel, LevelSpec};
use crate::data::{check_instance, Dataset};
use crate::error::{Error, Result};
use crate::gbdt::{ranked_indices, train_gbdt, GbdtConfig, GbdtModel};
use crate::rng::{derive_seed, rng_from_seed, sample_from_pool, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMode {
    Eldctree,
    Feldctree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub num_cascades: usize,
    pub levels_per_cascade: usize,
    pub first_level_feature_fraction: f64,
    pub scf_inject_fraction: f64,
    pub scf_cumulative_threshold: f64,
    pub gbdt_config: GbdtConfig,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            num_cascades: 3,
            levels_per_cascade: 2,
            first_level_feature_fraction: 0.6,
            scf_inject_fraction: 0.6,
            scf_cumulative_threshold: 0.9,
            gbdt_config: GbdtConfig::default(),
            seed: 42,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.num_cascades == 0 {
            return fail("num_cascades must be positive".into());
        }
        if self.levels_per_cascade == 0 {
            return fail("levels_per_cascade must be positive".into());
        }
        for (name, v) in [
            (
                "first_level_feature_fraction",
                self.first_level_feature_fraction,
            ),
            ("scf_inject_fraction", self.scf_inject_fraction),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return fail(format!("{name} must lie in (0,1], got {v}"));
            }
        }
        if !(self.scf_cumulative_threshold > 0.0 && self.scf_cumulative_threshold < 1.0) {
            return fail(format!(
                "scf_cumulative_threshold must lie in (0,1), got {}",
                self.scf_cumulative_threshold
            ));
        }
        self.gbdt_config.validate()
    }

    /// Per-cascade seeds derived from the master seed.
    pub fn cascade_seeds(&self) -> Vec<u64> {
        (0..self.num_cascades as u64)
            .map(|c| derive_seed(self.seed, stream::CASCADE, c))
            .collect()
    }
}

/// Strong/weak correlation split of the raw features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePartition {
    /// `(feature_index, importance)`, descending importance.
    pub scf: Vec<(usize, f64)>,
    /// `(feature_index, importance)`, descending importance.
    pub wcf: Vec<(usize, f64)>,
    pub threshold: f64,
    /// The booster the importances were read from, when trained here.
    pub source: Option<GbdtModel>,
}

impl FeaturePartition {
    pub fn scf_indices(&self) -> Vec<usize> {
        self.scf.iter().map(|&(i, _)| i).collect()
    }

    pub fn wcf_indices(&self) -> Vec<usize> {
        self.wcf.iter().map(|&(i, _)| i).collect()
    }

    pub(crate) fn validate(&self, n_features: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvariantViolation(m));
        let mut seen = vec![false; n_features];
        for &(i, imp) in self.scf.iter().chain(&self.wcf) {
            if i >= n_features || seen[i] {
                return bad(format!("feature {i} repeated or out of range in partition"));
            }
            if !(imp.is_finite() && imp >= 0.0) {
                return bad(format!("feature {i} has invalid importance {imp}"));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return bad("partition does not cover every feature".into());
        }
        if self.scf.is_empty() || self.wcf.is_empty() {
            return bad("both SCF and WCF must be non-empty".into());
        }
        let min_scf = self.scf.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let max_wcf = self
            .wcf
            .iter()
            .map(|p| p.1)
            .fold(f64::NEG_INFINITY, f64::max);
        if min_scf < max_wcf {
            return bad("SCF is not a prefix of the importance ranking".into());
        }
        Ok(())
    }
}

/// Splits features given normalized importances (indexed by feature).
///
/// SCF is the shortest prefix of the descending ranking (ties by lower index)
/// whose cumulative importance reaches `threshold`. If that leaves WCF empty the
/// last SCF member is demoted.
pub fn partition_from_importances(importances: &[f64], threshold: f64) -> Result<FeaturePartition> {
    if importances.len() < 2 {
        return Err(Error::InsufficientFeatures(
            "partitioning needs at least two features".into(),
        ));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "SCF threshold must lie in (0,1), got {threshold}"
        )));
    }
    let order = ranked_indices(importances);
    let mut cumulative = 0.0;
    let mut cut = order.len();
    for (pos, &i) in order.iter().enumerate() {
        cumulative += importances[i];
        if cumulative >= threshold {
            cut = pos + 1;
            break;
        }
    }
    let cut = cut.min(order.len() - 1).max(1);
    let pair = |&i: &usize| (i, importances[i]);
    Ok(FeaturePartition {
        scf: order[..cut].iter().map(pair).collect(),
        wcf: order[cut..].iter().map(pair).collect(),
        threshold,
        source: None,
    })
}

/// Pre-trains a booster on all raw features and partitions them by its gain importance.
pub fn partition_features(
    dataset: &Dataset,
    config: &GbdtConfig,
    threshold: f64,
) -> Result<FeaturePartition> {
    let model = train_gbdt(dataset, config)?;
    let mut partition = partition_from_importances(&model.normalized_importances(), threshold)?;
    partition.source = Some(model);
    Ok(partition)
}

/// Feature draws and seed of one cascade, recorded for reproduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeSelection {
    pub seed: u64,
    /// Raw columns of each level: first-level inputs, then injected columns.
    pub level_features: Vec<Vec<usize>>,
}

impl CascadeSelection {
    /// Draws the raw columns of every level from the cascade's own stream.
    pub fn draw(
        seed: u64,
        mode: EnsembleMode,
        config: &EnsembleConfig,
        n_features: usize,
        partition: Option<&FeaturePartition>,
    ) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let (first_pool, inject_pool) = match (mode, partition) {
            (EnsembleMode::Eldctree, _) => ((0..n_features).collect::<Vec<_>>(), Vec::new()),
            (EnsembleMode::Feldctree, Some(p)) => {
                let mut wcf = p.wcf_indices();
                wcf.sort_unstable();
                let mut scf = p.scf_indices();
                scf.sort_unstable();
                (wcf, scf)
            }
            (EnsembleMode::Feldctree, None) => {
                return Err(Error::InvalidConfig(
                    "feldctree needs a feature partition".into(),
                ))
            }
        };
        if first_pool.is_empty() {
            return Err(Error::InsufficientFeatures(
                "first-level feature pool is empty".into(),
            ));
        }
        let mut level_features = vec![sample_from_pool(
            &mut rng,
            &first_pool,
            config.first_level_feature_fraction,
        )];
        for _ in 1..config.levels_per_cascade {
            level_features.push(sample_from_pool(
                &mut rng,
                &inject_pool,
                config.scf_inject_fraction,
            ));
        }
        Ok(CascadeSelection {
            seed,
            level_features,
        })
    }

    pub fn level_specs(&self, gbdt: &GbdtConfig) -> Vec<LevelSpec> {
        self.level_features
            .iter()
            .enumerate()
            .map(|(l, cols)| LevelSpec {
                gbdt: GbdtConfig {
                    seed: derive_seed(self.seed, stream::LEVEL, l as u64),
                    ..gbdt.clone()
                },
                raw_features: cols.clone(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    mode: EnsembleMode,
    config: EnsembleConfig,
    cascades: Vec<CascadeModel>,
    selections: Vec<CascadeSelection>,
    head: GbdtModel,
    partition: Option<FeaturePartition>,
}

impl EnsembleModel {
    pub(crate) fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvariantViolation(m));
        if self.cascades.is_empty() {
            return bad("ensemble has no cascades".into());
        }
        if self.cascades.len() != self.selections.len() {
            return bad("one feature selection per cascade is required".into());
        }
        let n_raw = self.cascades[0].n_raw_features();
        for (c, (cascade, sel)) in self.cascades.iter().zip(&self.selections).enumerate() {
            cascade.validate()?;
            if cascade.n_raw_features() != n_raw {
                return bad(format!("cascade {c} has a different raw feature space"));
            }
            let recorded: Vec<&[usize]> =
                cascade.levels().iter().map(|l| l.raw_features()).collect();
            let selected: Vec<&[usize]> = sel.level_features.iter().map(Vec::as_slice).collect();
            if recorded != selected {
                return bad(format!("cascade {c} disagrees with its recorded selection"));
            }
        }
        self.head.validate()?;
        let width: usize = self.cascades.iter().map(CascadeModel::output_width).sum();
        if self.head.n_features() != width {
            return bad(format!(
                "head expects {} inputs, cascades emit {width}",
                self.head.n_features()
            ));
        }
        match (self.mode, &self.partition) {
            (EnsembleMode::Eldctree, Some(_)) => return bad("eldctree carries no partition".into()),
            (EnsembleMode::Feldctree, None) => return bad("feldctree requires a partition".into()),
            (EnsembleMode::Feldctree, Some(p)) => {
                p.validate(n_raw)?;
                let wcf = p.wcf_indices();
                let scf = p.scf_indices();
                for (c, sel) in self.selections.iter().enumerate() {
                    if sel.level_features[0].iter().any(|f| !wcf.contains(f)) {
                        return bad(format!("cascade {c} level 1 uses a non-WCF feature"));
                    }
                    if sel.level_features[1..]
                        .iter()
                        .flatten()
                        .any(|f| !scf.contains(f))
                    {
                        return bad(format!("cascade {c} injects a non-SCF feature"));
                    }
                }
            }
            (EnsembleMode::Eldctree, None) => {}
        }
        Ok(())
    }

    pub fn mode(&self) -> EnsembleMode {
        self.mode
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn cascades(&self) -> &[CascadeModel] {
        &self.cascades
    }

    pub fn selections(&self) -> &[CascadeSelection] {
        &self.selections
    }

    pub fn head(&self) -> &GbdtModel {
        &self.head
    }

    pub fn partition(&self) -> Option<&FeaturePartition> {
        self.partition.as_ref()
    }

    pub fn n_raw_features(&self) -> usize {
        self.cascades[0].n_raw_features()
    }

    pub fn raw_feature_names(&self) -> &[String] {
        self.cascades[0].raw_feature_names()
    }

    /// Concatenated last-level entropy features of every cascade.
    pub fn head_input(&self, raw: &[f64]) -> Result<Vec<f64>> {
        check_instance(raw, self.n_raw_features())?;
        Ok(concat_outputs(&self.cascades, raw))
    }

    pub fn predict(&self, raw: &[f64]) -> Result<f64> {
        self.head.predict_proba(&self.head_input(raw)?)
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
}

fn concat_outputs(cascades: &[CascadeModel], raw: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for c in cascades {
        out.extend(c.output_features_unchecked(raw));
    }
    out
}

/// Trains one cascade from its seed alone; rerunning with a recorded seed reproduces it.
pub fn train_cascade_member(
    dataset: &Dataset,
    config: &EnsembleConfig,
    mode: EnsembleMode,
    partition: Option<&FeaturePartition>,
    seed: u64,
) -> Result<(CascadeModel, CascadeSelection)> {
    let selection = CascadeSelection::draw(seed, mode, config, dataset.n_features(), partition)?;
    let cascade = train_ldctree(dataset, &selection.level_specs(&config.gbdt_config))?;
    Ok((cascade, selection))
}

pub fn train_eldctree(dataset: &Dataset, config: &EnsembleConfig) -> Result<EnsembleModel> {
    train_with_cascade_seeds(
        dataset,
        config,
        EnsembleMode::Eldctree,
        &config.cascade_seeds(),
    )
}

pub fn train_feldctree(dataset: &Dataset, config: &EnsembleConfig) -> Result<EnsembleModel> {
    train_with_cascade_seeds(
        dataset,
        config,
        EnsembleMode::Feldctree,
        &config.cascade_seeds(),
    )
}

/// Trains an ensemble with explicit per-cascade seeds (one cascade per seed, in order).
pub fn train_with_cascade_seeds(
    dataset: &Dataset,
    config: &EnsembleConfig,
    mode: EnsembleMode,
    seeds: &[u64],
) -> Result<EnsembleModel> {
    config.validate()?;
    if seeds.is_empty() {
        return Err(Error::InvalidConfig(
            "at least one cascade seed is required".into(),
        ));
    }
    if dataset.n_features() == 0 {
        return Err(Error::InsufficientFeatures(
            "dataset has no feature columns".into(),
        ));
    }
    dataset.check_both_classes()?;

    let partition = match mode {
        EnsembleMode::Eldctree => None,
        EnsembleMode::Feldctree => {
            let importance_config = GbdtConfig {
                seed: derive_seed(config.seed, stream::IMPORTANCE, 0),
                ..config.gbdt_config.clone()
            };
            Some(partition_features(
                dataset,
                &importance_config,
                config.scf_cumulative_threshold,
            )?)
        }
    };

    let members: Vec<(CascadeModel, CascadeSelection)> = seeds
        .par_iter()
        .map(|&s| train_cascade_member(dataset, config, mode, partition.as_ref(), s))
        .collect::<Result<_>>()?;
    let (cascades, selections): (Vec<_>, Vec<_>) = members.into_iter().unzip();

    let mut names = Vec::new();
    for (c, cascade) in cascades.iter().enumerate() {
        let last = cascade.num_levels();
        names.extend((0..cascade.output_width()).map(|j| format!("C{}.L{last}.T{}", c + 1, j + 1)));
    }
    let mut features = Vec::with_capacity(dataset.n_rows() * names.len());
    for row in dataset.rows() {
        features.extend(concat_outputs(&cascades, row));
    }
    let head_input = dataset.with_features(features, names)?;
    let head_config = GbdtConfig {
        seed: derive_seed(config.seed, stream::HEAD, 0),
        ..config.gbdt_config.clone()
    };
    let head = train_gbdt(&head_input, &head_config)?;

    let model = EnsembleModel {
        mode,
        config: config.clone(),
        cascades,
        selections,
        head,
        partition,
    };
    model.validate()?;
    Ok(model)
}

/// Assembles an ensemble from already-built parts, validating every invariant.
pub fn assemble_ensemble(
    mode: EnsembleMode,
    config: EnsembleConfig,
    cascades: Vec<CascadeModel>,
    selections: Vec<CascadeSelection>,
    head: GbdtModel,
    partition: Option<FeaturePartition>,
) -> Result<EnsembleModel> {
    let model = EnsembleModel {
        mode,
        config,
        cascades,
        selections,
        head,
        partition,
    };
    model.validate()?;
    Ok(model)
}
