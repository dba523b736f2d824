//! Checkpoints: a JSON header next to a little-endian f64 parameter blob.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::error::{FloralError, Result};
use crate::flow::{FlowMode, Normalization};
use crate::neural::{ModelSpec, Tensor, VectorFieldModel};
use crate::random_fields::KernelSpec;

pub const CHECKPOINT_FORMAT: &str = "floral-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Trained network, or one of the deterministic reference predictors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointKind {
    FilmFno,
    /// Returns the reference HF solution; a test fixture.
    Oracle,
    /// Returns the LF solution on the evaluation grid.
    LfBaseline,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub kind: CheckpointKind,
    pub mode: Option<FlowMode>,
    pub model: Option<ModelSpec>,
    pub train: Option<TrainConfig>,
    pub normalization: Option<Normalization>,
    pub prior: KernelSpec,
    pub epoch: usize,
    pub train_loss: Option<f64>,
    pub validation_loss: Option<f64>,
    /// Blob file name, relative to the header.
    pub blob: Option<String>,
    pub blob_bytes: usize,
    pub params: Vec<ParamEntry>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub model: Option<VectorFieldModel>,
}

impl Checkpoint {
    /// A parameter-free reference predictor.
    pub fn reference(kind: CheckpointKind) -> Self {
        Self {
            header: CheckpointHeader {
                format: CHECKPOINT_FORMAT.into(),
                version: CHECKPOINT_VERSION,
                kind,
                mode: None,
                model: None,
                train: None,
                normalization: None,
                prior: KernelSpec::default_prior(),
                epoch: 0,
                train_loss: None,
                validation_loss: None,
                blob: None,
                blob_bytes: 0,
                params: Vec::new(),
            },
            model: None,
        }
    }

    pub fn from_model(
        model: VectorFieldModel,
        mode: FlowMode,
        train: &TrainConfig,
        normalization: Option<Normalization>,
        epoch: usize,
        train_loss: Option<f64>,
        validation_loss: Option<f64>,
    ) -> Self {
        let mut offset = 0;
        let params = model
            .named_parameters()
            .map(|(name, p)| {
                let e = ParamEntry { name: name.to_string(), shape: p.shape().to_vec(), offset };
                offset += 8 * p.value().numel();
                e
            })
            .collect();
        Self {
            header: CheckpointHeader {
                format: CHECKPOINT_FORMAT.into(),
                version: CHECKPOINT_VERSION,
                kind: CheckpointKind::FilmFno,
                mode: Some(mode),
                model: Some(model.spec().clone()),
                train: Some(train.clone()),
                normalization,
                prior: train.prior,
                epoch,
                train_loss,
                validation_loss,
                blob: None,
                blob_bytes: offset,
                params,
            },
            model: Some(model),
        }
    }

    fn blob_path(header_path: &Path) -> PathBuf {
        header_path.with_extension("bin")
    }

    /// Writes `path` (JSON header) and, for trained models, `path` with extension `bin`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut header = self.header.clone();
        if let Some(model) = &self.model {
            let blob_path = Self::blob_path(path);
            let mut bytes = Vec::with_capacity(header.blob_bytes);
            for (_, p) in model.named_parameters() {
                for v in p.data() {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
            }
            fs::write(&blob_path, &bytes)?;
            header.blob = blob_path.file_name().map(|n| n.to_string_lossy().into_owned());
            header.blob_bytes = bytes.len();
        }
        let mut text = serde_json::to_string_pretty(&header)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let header: CheckpointHeader = serde_json::from_str(&fs::read_to_string(path)?)?;
        if header.format != CHECKPOINT_FORMAT || header.version != CHECKPOINT_VERSION {
            return Err(FloralError::Data(format!(
                "{}: not a version {CHECKPOINT_VERSION} checkpoint",
                path.display()
            )));
        }
        let model = match header.kind {
            CheckpointKind::FilmFno => {
                let spec = header.model.clone().ok_or_else(|| FloralError::Data("checkpoint lacks a model spec".into()))?;
                let blob = header.blob.as_ref().ok_or_else(|| FloralError::Data("checkpoint lacks a blob".into()))?;
                let blob_path = path.parent().unwrap_or(Path::new(".")).join(blob);
                let bytes = fs::read(&blob_path)?;
                if bytes.len() != header.blob_bytes {
                    return Err(FloralError::Data(format!(
                        "{}: expected {} bytes, found {}",
                        blob_path.display(),
                        header.blob_bytes,
                        bytes.len()
                    )));
                }
                let mut values = Vec::with_capacity(header.params.len());
                for e in &header.params {
                    let n: usize = e.shape.iter().product();
                    let end = e.offset + 8 * n;
                    if end > bytes.len() {
                        return Err(FloralError::Data(format!("parameter {} runs past the blob", e.name)));
                    }
                    let data = bytes[e.offset..end]
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                        .collect();
                    values.push((e.name.clone(), Tensor::new(e.shape.clone(), data)?));
                }
                Some(VectorFieldModel::from_parameters(spec, values)?)
            }
            _ => None,
        };
        Ok(Self { header, model })
    }
}
