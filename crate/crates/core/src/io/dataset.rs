//! Datasets on disk: a JSON manifest next to one raw little-endian f64 blob per field.
//!
//! Blobs hold `count` records back to back; each record is channel-major,
//! then row-major over the grid.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FloralError, Result};
use crate::grid::{Domain, GridFunction};
use crate::pde::{Dataset, ProblemConfig, ProblemKind, Sample};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATASET_FORMAT: &str = "floral-dataset";
pub const SCHEMA_VERSION: u32 = 1;
pub const DTYPE: &str = "f64-le";

pub const INPUT: &str = "input";
pub const LF_SOLUTION: &str = "lf_solution";
/// The LF solution resampled to the HF grid.
pub const LF_SOLUTION_HF: &str = "lf_solution_hf";
pub const HF_SOLUTION: &str = "hf_solution";
pub const GENERATED: &str = "generated";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldRole {
    Input,
    LfSolution,
    HfSolution,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDescriptor {
    pub name: String,
    pub role: FieldRole,
    pub shape: Vec<usize>,
    pub channels: usize,
    pub dtype: String,
    pub file: String,
    pub offset: usize,
    pub domain: Domain,
    /// Channel-wise statistics over all records.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FieldDescriptor {
    pub fn record_len(&self) -> usize {
        self.channels * self.shape.iter().product::<usize>()
    }
}

/// Provenance of generated ensembles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratedInfo {
    pub checkpoint: String,
    pub mode: Option<String>,
    /// Source dataset index of each group of `ensembles` consecutive records.
    pub source_indices: Vec<usize>,
    pub ensembles: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub format: String,
    pub version: u32,
    pub problem: ProblemKind,
    pub count: usize,
    pub seed: u64,
    pub config: ProblemConfig,
    pub fields: Vec<FieldDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated: Option<GeneratedInfo>,
}

impl DatasetManifest {
    pub fn field(&self, name: &str) -> Option<&FieldDescriptor> {
        self.fields.iter().find(|f| f.name == name)
    }
}

fn stats(records: &[&GridFunction]) -> (Vec<f64>, Vec<f64>) {
    let c = records[0].channels;
    let mut mean = vec![0.0; c];
    let mut std = vec![0.0; c];
    for ch in 0..c {
        let n = (records.len() * records[0].n_points()) as f64;
        let m = records.iter().flat_map(|r| r.channel(ch)).sum::<f64>() / n;
        let v = records.iter().flat_map(|r| r.channel(ch)).map(|x| (x - m).powi(2)).sum::<f64>() / n;
        mean[ch] = m;
        std[ch] = v.sqrt();
    }
    (mean, std)
}

/// Writes one field blob and returns its descriptor; all records must share a grid.
pub fn write_field(dir: &Path, name: &str, role: FieldRole, records: &[&GridFunction]) -> Result<FieldDescriptor> {
    let first = records.first().ok_or_else(|| FloralError::Data(format!("field {name} has no records")))?;
    if records.iter().any(|r| !r.same_grid(first)) {
        return Err(FloralError::Shape(format!("field {name}: records on different grids")));
    }
    let mut bytes = Vec::with_capacity(records.len() * first.len() * 8);
    for r in records {
        for v in &r.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let file = format!("{name}.bin");
    fs::write(dir.join(&file), &bytes)?;
    let (mean, std) = stats(records);
    Ok(FieldDescriptor {
        name: name.into(),
        role,
        shape: first.shape.clone(),
        channels: first.channels,
        dtype: DTYPE.into(),
        file,
        offset: 0,
        domain: first.domain.clone(),
        mean,
        std,
    })
}

pub fn write_manifest(dir: &Path, manifest: &DatasetManifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(())
}

/// Writes `dataset` into `dir` (created if needed).
pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<DatasetManifest> {
    if dataset.is_empty() {
        return Err(FloralError::Data("refusing to write an empty dataset".into()));
    }
    fs::create_dir_all(dir)?;
    let s = &dataset.samples;
    let mut fields = vec![write_field(dir, INPUT, FieldRole::Input, &s.iter().map(|x| &x.input).collect::<Vec<_>>())?];
    if dataset.has_lf() && s.iter().all(|x| x.lf.is_some()) {
        let lf: Vec<_> = s.iter().map(|x| x.lf.as_ref().expect("checked")).collect();
        let lf_hf: Vec<_> = s.iter().map(|x| x.lf_on_hf.as_ref().expect("checked")).collect();
        fields.push(write_field(dir, LF_SOLUTION, FieldRole::LfSolution, &lf)?);
        fields.push(write_field(dir, LF_SOLUTION_HF, FieldRole::LfSolution, &lf_hf)?);
    }
    fields.push(write_field(dir, HF_SOLUTION, FieldRole::HfSolution, &s.iter().map(|x| &x.hf).collect::<Vec<_>>())?);
    let manifest = DatasetManifest {
        format: DATASET_FORMAT.into(),
        version: SCHEMA_VERSION,
        problem: dataset.config.problem,
        count: s.len(),
        seed: dataset.seed,
        config: dataset.config.clone(),
        fields,
        generated: None,
    };
    write_manifest(dir, &manifest)?;
    Ok(manifest)
}

/// Reads and validates the manifest in `dir`, including every blob's length.
pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path)
        .map_err(|e| FloralError::Data(format!("cannot read {}: {e}", path.display())))?;
    let m: DatasetManifest = serde_json::from_str(&text)?;
    if m.format != DATASET_FORMAT || m.version != SCHEMA_VERSION {
        return Err(FloralError::Data(format!("{}: not a version {SCHEMA_VERSION} dataset", path.display())));
    }
    for f in &m.fields {
        if f.dtype != DTYPE {
            return Err(FloralError::Data(format!("field {}: unsupported dtype {}", f.name, f.dtype)));
        }
        let expected = f.offset + m.count * f.record_len() * 8;
        let found = fs::metadata(dir.join(&f.file))
            .map_err(|e| FloralError::Data(format!("field {}: {}: {e}", f.name, f.file)))?
            .len() as usize;
        if found != expected {
            return Err(FloralError::Data(format!(
                "field {}: {} has {found} bytes, expected {expected}",
                f.name, f.file
            )));
        }
    }
    Ok(m)
}

/// All records of one field.
pub fn read_field(dir: &Path, manifest: &DatasetManifest, name: &str) -> Result<Vec<GridFunction>> {
    let f = manifest.field(name).ok_or_else(|| FloralError::Data(format!("dataset has no field {name}")))?;
    let bytes = fs::read(dir.join(&f.file))?;
    let len = f.record_len();
    let values: Vec<f64> =
        bytes[f.offset..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    if values.len() != manifest.count * len {
        return Err(FloralError::Data(format!("field {name}: blob length does not match the manifest")));
    }
    values
        .chunks_exact(len.max(1))
        .map(|r| GridFunction::new(f.domain.clone(), f.shape.clone(), f.channels, r.to_vec()))
        .collect()
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let m = read_manifest(dir)?;
    let input = read_field(dir, &m, INPUT)?;
    let hf = read_field(dir, &m, HF_SOLUTION)?;
    let (lf, lf_hf) = match (m.field(LF_SOLUTION), m.field(LF_SOLUTION_HF)) {
        (Some(_), Some(_)) => (read_field(dir, &m, LF_SOLUTION)?, read_field(dir, &m, LF_SOLUTION_HF)?),
        _ => (Vec::new(), Vec::new()),
    };
    let mut lf = lf.into_iter();
    let mut lf_hf = lf_hf.into_iter();
    let samples = input
        .into_iter()
        .zip(hf)
        .map(|(input, hf)| Sample { input, lf: lf.next(), lf_on_hf: lf_hf.next(), hf })
        .collect();
    Ok(Dataset { config: m.config, seed: m.seed, samples })
}
