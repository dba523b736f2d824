//! On-disk formats: dataset manifests and run configurations.

pub mod config;
pub mod dataset;

pub use config::{preset, RunConfig, PRESETS};
pub use dataset::{read_dataset, read_field, read_manifest, write_dataset, DatasetManifest, FieldDescriptor, FieldRole};
