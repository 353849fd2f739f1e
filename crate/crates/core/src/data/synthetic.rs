//! Synthetic binary-classification datasets.
//!
//! Columns are laid out as `s*` (strong), then `w*` (weak), then `n*` (noise).
//!
//! * `Linear`: strong features are standard normal and the label is
//!   `Bernoulli(sigmoid(LINEAR_WEIGHT * sum(strong) + noise_level * N(0,1)))`.
//!   Weak and noise columns are uniform on `[-1, 1]` and carry no signal.
//! * `WeakXor`: weak features are uniform on `[-1, 1]`; `z` is the parity of their
//!   positive signs and the label is `Bernoulli(0.5 + 0.35 * (2z - 1))`. Any proper
//!   subset of the weak features is independent of the label, so only their
//!   combination is informative. Strong features are `(2y - 1) * STRONG_SHIFT +
//!   noise_level * N(0,1)`, individually informative and independent of the weak
//!   block given the label. Noise features are standard normal.

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, Rng};

pub const LINEAR_WEIGHT: f64 = 10.0;
pub const STRONG_SHIFT: f64 = 0.5;
pub const XOR_LIFT: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    Linear,
    WeakXor,
}

impl std::str::FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(SyntheticKind::Linear),
            "weak_xor" => Ok(SyntheticKind::WeakXor),
            other => Err(Error::InvalidSpec(format!("unknown kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub n_instances: usize,
    pub n_strong: usize,
    pub n_weak: usize,
    pub n_noise: usize,
    pub noise_level: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn weak_xor(n_instances: usize, n_strong: usize, n_weak: usize, n_noise: usize) -> Self {
        SyntheticSpec {
            kind: SyntheticKind::WeakXor,
            n_instances,
            n_strong,
            n_weak,
            n_noise,
            noise_level: 1.0,
            seed: 42,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_instances == 0 {
            return Err(Error::InvalidSpec("n_instances must be positive".into()));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "noise_level must be a finite non-negative real, got {}",
                self.noise_level
            )));
        }
        if self.n_strong + self.n_weak + self.n_noise == 0 {
            return Err(Error::InvalidSpec(
                "at least one feature is required".into(),
            ));
        }
        match self.kind {
            SyntheticKind::WeakXor if self.n_weak < 2 => {
                Err(Error::InvalidSpec("weak_xor requires n_weak >= 2".into()))
            }
            SyntheticKind::Linear if self.n_strong == 0 => {
                Err(Error::InvalidSpec("linear requires n_strong >= 1".into()))
            }
            _ => Ok(()),
        }
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let width = spec.n_strong + spec.n_weak + spec.n_noise;
    let mut rng = rng_from_seed(spec.seed);
    let mut features = Vec::with_capacity(spec.n_instances * width);
    let mut labels = Vec::with_capacity(spec.n_instances);
    let mut row = vec![0.0; width];
    for _ in 0..spec.n_instances {
        let y = match spec.kind {
            SyntheticKind::Linear => linear_row(spec, &mut rng, &mut row),
            SyntheticKind::WeakXor => weak_xor_row(spec, &mut rng, &mut row),
        };
        features.extend_from_slice(&row);
        labels.push(y);
    }
    let mut names = Vec::with_capacity(width);
    names.extend((0..spec.n_strong).map(|i| format!("s{i}")));
    names.extend((0..spec.n_weak).map(|i| format!("w{i}")));
    names.extend((0..spec.n_noise).map(|i| format!("n{i}")));
    let ids = (0..spec.n_instances).map(|i| format!("id{i}")).collect();
    Dataset::from_flat(ids, features, labels, names)
}

fn uniform_pm1(rng: &mut Rng) -> f64 {
    rng.random_range(-1.0..1.0)
}

fn normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn linear_row(spec: &SyntheticSpec, rng: &mut Rng, row: &mut [f64]) -> u8 {
    let (strong, rest) = row.split_at_mut(spec.n_strong);
    for v in strong.iter_mut() {
        *v = normal(rng);
    }
    for v in rest.iter_mut() {
        *v = uniform_pm1(rng);
    }
    let logit = LINEAR_WEIGHT * strong.iter().sum::<f64>() + spec.noise_level * normal(rng);
    let p = 1.0 / (1.0 + (-logit).exp());
    u8::from(rng.random::<f64>() < p)
}

fn weak_xor_row(spec: &SyntheticSpec, rng: &mut Rng, row: &mut [f64]) -> u8 {
    let (strong, rest) = row.split_at_mut(spec.n_strong);
    let (weak, noise) = rest.split_at_mut(spec.n_weak);
    let mut parity = false;
    for v in weak.iter_mut() {
        *v = uniform_pm1(rng);
        parity ^= *v > 0.0;
    }
    let z = if parity { 1.0 } else { 0.0 };
    let p = 0.5 + XOR_LIFT * (2.0 * z - 1.0);
    let y = u8::from(rng.random::<f64>() < p);
    let sign = 2.0 * y as f64 - 1.0;
    for v in strong.iter_mut() {
        *v = sign * STRONG_SHIFT + spec.noise_level * normal(rng);
    }
    for v in noise.iter_mut() {
        *v = normal(rng);
    }
    y
}

/// Parity of the positive signs of the weak block; the label-generating latent of `WeakXor`.
pub fn weak_xor_latent(spec: &SyntheticSpec, row: &[f64]) -> u8 {
    let weak = &row[spec.n_strong..spec.n_strong + spec.n_weak];
    u8::from(weak.iter().filter(|&&v| v > 0.0).count() % 2 == 1)
}
