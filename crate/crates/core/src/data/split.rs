//! Id-keyed train/validation/test partitioning.
//!
//! Each id is hashed together with the seed to a point in `[0, 1)` and assigned
//! by comparing that point against the cumulative fractions. Assignment depends
//! only on `(id, seed)`, never on row order or on the other rows present.

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::splitmix64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.4,
            validation_fraction: 0.2,
            test_fraction: 0.4,
        }
    }
}

impl SplitSpec {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let spec = SplitSpec {
            train_fraction: train,
            validation_fraction: validation,
            test_fraction: test,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [
            self.train_fraction,
            self.validation_fraction,
            self.test_fraction,
        ];
        if parts.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
            return Err(Error::InvalidConfig(format!(
                "split fractions must each lie in (0,1), got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// Maps `(id, seed)` to `[0, 1)`: FNV-1a over the id bytes, then splitmix64 with the seed.
pub fn unit_hash(id: &str, seed: u64) -> f64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in id.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    let mixed = splitmix64(h ^ splitmix64(seed));
    (mixed >> 11) as f64 / (1u64 << 53) as f64
}

/// Returns `(train, validation, test)`; each part keeps the dataset's row order.
pub fn split_by_id(
    dataset: &Dataset,
    spec: &SplitSpec,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    spec.validate()?;
    let cut_train = spec.train_fraction;
    let cut_validation = spec.train_fraction + spec.validation_fraction;
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (row, id) in dataset.ids().iter().enumerate() {
        let u = unit_hash(id, seed);
        let part = if u < cut_train {
            0
        } else if u < cut_validation {
            1
        } else {
            2
        };
        parts[part].push(row);
    }
    Ok((
        dataset.subset(&parts[0]),
        dataset.subset(&parts[1]),
        dataset.subset(&parts[2]),
    ))
}
