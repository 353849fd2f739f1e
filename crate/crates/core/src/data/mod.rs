//! Datasets: dense feature matrix, binary labels and opaque instance ids.
//!
//! Rows are stored row-major. All constructors validate the invariants the rest of
//! the crate relies on (finite values, binary labels, matching lengths, unique
//! feature names), so downstream code never re-checks them.

mod csv_io;
mod split;
mod synthetic;

pub use csv_io::{load_csv, read_csv, write_csv, write_csv_to};
pub use split::{split_by_id, unit_hash, SplitSpec};
pub use synthetic::{generate_synthetic, weak_xor_latent, SyntheticKind, SyntheticSpec};

use std::collections::HashSet;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    ids: Vec<String>,
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<u8>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from a row-major feature buffer of `ids.len() * feature_names.len()` values.
    pub fn from_flat(
        ids: Vec<String>,
        features: Vec<f64>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n_features = feature_names.len();
        let n = ids.len();
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: labels.len(),
            });
        }
        if features.len() != n * n_features {
            return Err(Error::DimensionMismatch {
                expected: n * n_features,
                found: features.len(),
            });
        }
        if let Some(row) = labels.iter().position(|&y| y > 1) {
            return Err(Error::NonBinaryLabel { row });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteFeature {
                row: pos / n_features,
                col: pos % n_features,
            });
        }
        let mut seen = HashSet::with_capacity(n_features);
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidDataset(format!(
                    "duplicate feature name `{name}`"
                )));
            }
        }
        Ok(Dataset {
            ids,
            features,
            n_features,
            labels,
            feature_names,
        })
    }

    pub fn from_rows(
        ids: Vec<String>,
        rows: &[Vec<f64>],
        labels: Vec<u8>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let width = feature_names.len();
        let mut features = Vec::with_capacity(rows.len() * width);
        for row in rows {
            if row.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    found: row.len(),
                });
            }
            features.extend_from_slice(row);
        }
        Self::from_flat(ids, features, labels, feature_names)
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.features[row * self.n_features + col]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn positive_rate(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.labels.iter().map(|&y| y as f64).sum::<f64>() / self.n_rows() as f64
    }

    /// Keeps the given rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(rows.len() * self.n_features);
        for &r in rows {
            features.extend_from_slice(self.row(r));
        }
        Dataset {
            ids: rows.iter().map(|&r| self.ids[r].clone()).collect(),
            features,
            n_features: self.n_features,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    /// Keeps the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.n_features) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                min: 0,
                max: self.n_features.saturating_sub(1),
            });
        }
        let mut features = Vec::with_capacity(self.n_rows() * cols.len());
        for row in self.rows() {
            features.extend(cols.iter().map(|&c| row[c]));
        }
        Dataset::from_flat(
            self.ids.clone(),
            features,
            self.labels.clone(),
            cols.iter()
                .map(|&c| self.feature_names[c].clone())
                .collect(),
        )
    }

    /// Replaces the feature matrix, keeping ids and labels.
    pub fn with_features(&self, features: Vec<f64>, feature_names: Vec<String>) -> Result<Dataset> {
        Dataset::from_flat(
            self.ids.clone(),
            features,
            self.labels.clone(),
            feature_names,
        )
    }

    pub(crate) fn check_both_classes(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let positives = self.labels.iter().filter(|&&y| y == 1).count();
        if positives == 0 || positives == self.n_rows() {
            return Err(Error::SingleClassDataset);
        }
        Ok(())
    }
}

pub(crate) fn check_instance(instance: &[f64], width: usize) -> Result<()> {
    if instance.len() != width {
        return Err(Error::DimensionMismatch {
            expected: width,
            found: instance.len(),
        });
    }
    if let Some(col) = instance.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteFeature { row: 0, col });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn rejects_non_finite_with_position() {
        let err = Dataset::from_flat(
            vec!["a".into(), "b".into()],
            vec![0.0, 1.0, 2.0, f64::NAN],
            vec![0, 1],
            names(2),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteFeature { row: 1, col: 1 }));
    }

    #[test]
    fn rejects_bad_labels_and_lengths() {
        assert!(matches!(
            Dataset::from_flat(vec!["a".into()], vec![0.0], vec![2], names(1)),
            Err(Error::NonBinaryLabel { row: 0 })
        ));
        assert!(matches!(
            Dataset::from_flat(vec!["a".into()], vec![0.0], vec![], names(1)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            Dataset::from_flat(
                vec!["a".into()],
                vec![0.0, 1.0],
                vec![0],
                vec!["x".into(), "x".into()]
            ),
            Err(Error::InvalidDataset(_))
        ));
    }

    #[test]
    fn subset_and_columns() {
        let ds = Dataset::from_rows(
            vec!["a".into(), "b".into(), "c".into()],
            &[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]],
            vec![0, 1, 1],
            names(2),
        )
        .unwrap();
        let s = ds.subset(&[2, 0]);
        assert_eq!(s.ids(), &["c".to_string(), "a".to_string()]);
        assert_eq!(s.row(0), &[5.0, 6.0]);
        let c = ds.select_columns(&[1]).unwrap();
        assert_eq!(c.row(1), &[4.0]);
        assert_eq!(c.feature_names(), &["f1".to_string()]);
        assert!(ds.select_columns(&[2]).is_err());
        assert!((ds.positive_rate() - 2.0 / 3.0).abs() < 1e-15);
    }
}
