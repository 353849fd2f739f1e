//! Versioned JSON model files.
//!
//! Every file is an envelope
//!
//! ```text
//! { "format_version": 1, "model_kind": "gbdt" | "ldctree" | "eldctree" | "feldctree", "payload": { ... } }
//! ```
//!
//! written pretty-printed with a trailing newline. Reals use the shortest decimal
//! form that parses back to the same bits, so a loaded model predicts exactly like
//! the saved one. Payloads are validated on load; files are external input.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::{DeserializeOwned, IgnoredAny};
use serde::{Deserialize, Serialize};

use crate::cascade::CascadeModel;
use crate::data::Dataset;
use crate::ensemble::{EnsembleMode, EnsembleModel};
use crate::error::{Error, Result};
use crate::gbdt::GbdtModel;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Gbdt,
    Ldctree,
    Eldctree,
    Feldctree,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gbdt => "gbdt",
            ModelKind::Ldctree => "ldctree",
            ModelKind::Eldctree => "eldctree",
            ModelKind::Feldctree => "feldctree",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gbdt" => Ok(ModelKind::Gbdt),
            "ldctree" => Ok(ModelKind::Ldctree),
            "eldctree" => Ok(ModelKind::Eldctree),
            "feldctree" => Ok(ModelKind::Feldctree),
            other => Err(Error::InvalidConfig(format!(
                "unknown model kind `{other}`"
            ))),
        }
    }
}

/// A model of any kind, as returned by [`load_model`].
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum AnyModel {
    Gbdt(GbdtModel),
    Cascade(CascadeModel),
    Ensemble(EnsembleModel),
}

impl AnyModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Gbdt(_) => ModelKind::Gbdt,
            AnyModel::Cascade(_) => ModelKind::Ldctree,
            AnyModel::Ensemble(m) => ensemble_kind(m),
        }
    }

    pub fn raw_feature_names(&self) -> &[String] {
        match self {
            AnyModel::Gbdt(m) => m.feature_names(),
            AnyModel::Cascade(m) => m.raw_feature_names(),
            AnyModel::Ensemble(m) => m.raw_feature_names(),
        }
    }

    pub fn predict(&self, raw: &[f64]) -> Result<f64> {
        match self {
            AnyModel::Gbdt(m) => m.predict_proba(raw),
            AnyModel::Cascade(m) => m.predict(raw),
            AnyModel::Ensemble(m) => m.predict(raw),
        }
    }

    pub fn predict_dataset(&self, dataset: &Dataset) -> Result<Vec<f64>> {
        match self {
            AnyModel::Gbdt(m) => m.predict_dataset(dataset),
            AnyModel::Cascade(m) => m.predict_dataset(dataset),
            AnyModel::Ensemble(m) => m.predict_dataset(dataset),
        }
    }

    /// Every boosting model inside, in training order (levels, cascades, head).
    pub fn boosters(&self) -> Vec<&GbdtModel> {
        match self {
            AnyModel::Gbdt(m) => vec![m],
            AnyModel::Cascade(m) => m.levels().iter().map(|l| l.model()).collect(),
            AnyModel::Ensemble(m) => {
                let mut out: Vec<&GbdtModel> = Vec::new();
                if let Some(src) = m.partition().and_then(|p| p.source.as_ref()) {
                    out.push(src);
                }
                for c in m.cascades() {
                    out.extend(c.levels().iter().map(|l| l.model()));
                }
                out.push(m.head());
                out
            }
        }
    }
}

impl From<GbdtModel> for AnyModel {
    fn from(m: GbdtModel) -> Self {
        AnyModel::Gbdt(m)
    }
}

impl From<CascadeModel> for AnyModel {
    fn from(m: CascadeModel) -> Self {
        AnyModel::Cascade(m)
    }
}

impl From<EnsembleModel> for AnyModel {
    fn from(m: EnsembleModel) -> Self {
        AnyModel::Ensemble(m)
    }
}

/// Models that can be written to a model file.
pub trait Persist: Serialize {
    fn model_kind(&self) -> ModelKind;
}

impl Persist for GbdtModel {
    fn model_kind(&self) -> ModelKind {
        ModelKind::Gbdt
    }
}

impl Persist for CascadeModel {
    fn model_kind(&self) -> ModelKind {
        ModelKind::Ldctree
    }
}

impl Persist for EnsembleModel {
    fn model_kind(&self) -> ModelKind {
        ensemble_kind(self)
    }
}

fn ensemble_kind(m: &EnsembleModel) -> ModelKind {
    match m.mode() {
        EnsembleMode::Eldctree => ModelKind::Eldctree,
        EnsembleMode::Feldctree => ModelKind::Feldctree,
    }
}

impl Serialize for AnyModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            AnyModel::Gbdt(m) => m.serialize(s),
            AnyModel::Cascade(m) => m.serialize(s),
            AnyModel::Ensemble(m) => m.serialize(s),
        }
    }
}

impl Persist for AnyModel {
    fn model_kind(&self) -> ModelKind {
        self.kind()
    }
}

#[derive(Serialize)]
struct EnvelopeOut<'a, M: Serialize> {
    format_version: u32,
    model_kind: &'static str,
    payload: &'a M,
}

#[derive(Deserialize)]
struct Header {
    format_version: u32,
    model_kind: String,
    #[allow(dead_code)]
    payload: IgnoredAny,
}

#[derive(Deserialize)]
struct EnvelopeIn<M> {
    payload: M,
}

/// Serializes a model to its file contents.
pub fn to_model_string<M: Persist>(model: &M) -> Result<String> {
    let envelope = EnvelopeOut {
        format_version: FORMAT_VERSION,
        model_kind: model.model_kind().as_str(),
        payload: model,
    };
    let mut text = serde_json::to_string_pretty(&envelope)
        .map_err(|e| Error::InvariantViolation(format!("model is not serializable: {e}")))?;
    text.push('\n');
    Ok(text)
}

pub fn save_model<M: Persist>(model: &M, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = to_model_string(model)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn byte_offset(text: &str, err: &serde_json::Error) -> usize {
    if err.line() == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(err.line() - 1)
        .map(str::len)
        .sum();
    (line_start + err.column().saturating_sub(1)).min(text.len())
}

fn parse_error(text: &str, err: serde_json::Error) -> Error {
    Error::Parse {
        offset: byte_offset(text, &err),
        message: err.to_string(),
    }
}

fn payload<M: DeserializeOwned>(text: &str) -> Result<M> {
    serde_json::from_str::<EnvelopeIn<M>>(text)
        .map(|e| e.payload)
        .map_err(|e| parse_error(text, e))
}

/// Parses and validates a model file's contents.
pub fn model_from_str(text: &str) -> Result<AnyModel> {
    let header: Header = serde_json::from_str(text).map_err(|e| parse_error(text, e))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(header.format_version));
    }
    let kind: ModelKind = header.model_kind.parse().map_err(|_| Error::Parse {
        offset: text.find("\"model_kind\"").unwrap_or(0),
        message: format!("unknown model_kind `{}`", header.model_kind),
    })?;
    let model = match kind {
        ModelKind::Gbdt => {
            let m: GbdtModel = payload(text)?;
            m.validate()?;
            AnyModel::Gbdt(m)
        }
        ModelKind::Ldctree => {
            let m: CascadeModel = payload(text)?;
            m.validate()?;
            AnyModel::Cascade(m)
        }
        ModelKind::Eldctree | ModelKind::Feldctree => {
            let m: EnsembleModel = payload(text)?;
            m.validate()?;
            if ensemble_kind(&m) != kind {
                return Err(Error::InvariantViolation(format!(
                    "model_kind `{kind}` disagrees with payload mode `{}`",
                    ensemble_kind(&m)
                )));
            }
            AnyModel::Ensemble(m)
        }
    };
    Ok(model)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<AnyModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text)
}

fn mismatch(expected: &str, found: ModelKind) -> Error {
    Error::KindMismatch {
        expected: expected.into(),
        found: found.as_str().into(),
    }
}

pub fn load_gbdt(path: impl AsRef<Path>) -> Result<GbdtModel> {
    match load_model(path)? {
        AnyModel::Gbdt(m) => Ok(m),
        other => Err(mismatch("gbdt", other.kind())),
    }
}

pub fn load_cascade(path: impl AsRef<Path>) -> Result<CascadeModel> {
    match load_model(path)? {
        AnyModel::Cascade(m) => Ok(m),
        other => Err(mismatch("ldctree", other.kind())),
    }
}

pub fn load_ensemble(path: impl AsRef<Path>) -> Result<EnsembleModel> {
    match load_model(path)? {
        AnyModel::Ensemble(m) => Ok(m),
        other => Err(mismatch("eldctree|feldctree", other.kind())),
    }
}
