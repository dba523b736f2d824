//! Run configuration documents and the shipped presets.
//!
//! A document is a JSON object with optional `preset`, `problem` and `train`
//! keys. The sections are overlaid key by key on the preset (or on the
//! defaults of the problem), and unknown keys anywhere are rejected.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{FloralError, Result};
use crate::pde::{ProblemConfig, ProblemKind};
use crate::train::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub train: TrainConfig,
}

fn dims(problem: ProblemKind) -> usize {
    if problem == ProblemKind::Benchmark1 {
        1
    } else {
        2
    }
}

impl RunConfig {
    pub fn defaults(problem: ProblemKind) -> Self {
        Self {
            problem: ProblemConfig::defaults(problem),
            train: TrainConfig { modes_per_axis: vec![16; dims(problem)], ..TrainConfig::default() },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.train.validate()?;
        let d = dims(self.problem.problem);
        if self.train.modes_per_axis.len() != d {
            return Err(FloralError::Config(format!(
                "modes_per_axis needs {d} entries for {}, got {:?}",
                self.problem.problem.name(),
                self.train.modes_per_axis
            )));
        }
        Ok(())
    }

    /// Parses a configuration document.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text).map_err(|e| FloralError::Config(format!("config: {e}")))?;
        let Value::Object(doc) = doc else {
            return Err(FloralError::Config("config must be a JSON object".into()));
        };
        if let Some(k) = doc.keys().find(|k| !["preset", "problem", "train"].contains(&k.as_str())) {
            return Err(FloralError::Config(format!("unknown config key '{k}'")));
        }
        let base = match doc.get("preset") {
            Some(Value::String(name)) => preset(name)?,
            Some(_) => return Err(FloralError::Config("preset must be a string".into())),
            None => {
                let kind = doc.get("problem").and_then(|p| p.get("problem")).cloned().map(serde_json::from_value);
                match kind {
                    Some(k) => Self::defaults(k.map_err(|e| FloralError::Config(format!("problem: {e}")))?),
                    None => Self::defaults(ProblemKind::Benchmark1),
                }
            }
        };
        let mut problem = serde_json::to_value(&base.problem)?;
        let mut train = serde_json::to_value(&base.train)?;
        if let Some(p) = doc.get("problem") {
            overlay(&mut problem, p, "problem")?;
        }
        if let Some(t) = doc.get("train") {
            overlay(&mut train, t, "train")?;
        }
        let cfg = Self {
            problem: serde_json::from_value(problem).map_err(|e| FloralError::Config(format!("problem: {e}")))?,
            train: serde_json::from_value(train).map_err(|e| FloralError::Config(format!("train: {e}")))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// A preset name or the path of a configuration document.
    pub fn load(spec: &str) -> Result<Self> {
        if PRESETS.contains(&spec) {
            return preset(spec);
        }
        let text = std::fs::read_to_string(spec).map_err(|e| FloralError::Config(format!("{spec}: {e}")))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

fn overlay(base: &mut Value, patch: &Value, path: &str) -> Result<()> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let sub = format!("{path}.{k}");
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() => overlay(slot, v, &sub)?,
                    Some(slot) => *slot = v.clone(),
                    None => return Err(FloralError::Config(format!("unknown config key '{sub}'"))),
                }
            }
            Ok(())
        }
        (_, Value::Object(_)) => Err(FloralError::Config(format!("'{path}' is not a section"))),
        (b, p) => {
            *b = p.clone();
            Ok(())
        }
    }
}

pub const PRESETS: &[&str] = &[
    "benchmark1_n10",
    "benchmark1_n50",
    "benchmark1_n500",
    "benchmark1_n1000",
    "benchmark1_res8",
    "benchmark1_res16",
    "benchmark1_res32",
    "benchmark1_res64",
    "advection_n500",
    "advection_n1000",
    "advection_n5000",
    "burgers_n500",
    "burgers_n1000",
    "burgers_n5000",
    "darcy_n500",
    "darcy_n1000",
    "darcy_n5000",
];

/// The shipped training configurations, by name.
pub fn preset(name: &str) -> Result<RunConfig> {
    let unknown = || FloralError::Config(format!("unknown preset '{name}'; known: {}", PRESETS.join(", ")));
    let (stem, arg) = name.rsplit_once('_').ok_or_else(unknown)?;
    let row = |problem: ProblemKind, epochs, train_size, batch_size, modes: usize| {
        let mut c = RunConfig::defaults(problem);
        c.train = TrainConfig {
            epochs,
            train_size,
            validation_size: 1000,
            batch_size,
            modes_per_axis: vec![modes; dims(problem)],
            ..c.train
        };
        c
    };
    let cfg = match (stem, arg) {
        ("benchmark1", "n10") => row(ProblemKind::Benchmark1, 300, 10, 2, 64),
        ("benchmark1", "n50") => row(ProblemKind::Benchmark1, 300, 50, 4, 64),
        ("benchmark1", "n500") => row(ProblemKind::Benchmark1, 300, 500, 16, 64),
        ("benchmark1", "n1000") => row(ProblemKind::Benchmark1, 300, 1000, 64, 64),
        ("benchmark1", r) if r.starts_with("res") => {
            let n: usize = r[3..].parse().map_err(|_| unknown())?;
            if ![8, 16, 32, 64].contains(&n) {
                return Err(unknown());
            }
            let mut c = row(ProblemKind::Benchmark1, 300, 10, 2, n / 2);
            c.problem.resolution = vec![n];
            c.problem.lf_resolution = vec![n];
            c
        }
        ("advection" | "burgers" | "darcy", n) => {
            let problem = ProblemKind::parse(stem)?;
            match n {
                "n500" => row(problem, 500, 500, 16, 64),
                "n1000" => row(problem, 500, 1000, 64, 64),
                "n5000" => row(problem, 500, 5000, 128, 64),
                _ => return Err(unknown()),
            }
        }
        _ => return Err(unknown()),
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_valid() {
        for p in PRESETS {
            RunConfig::load(p).unwrap();
        }
        assert!(preset("benchmark1_res12").is_err());
        assert!(preset("nope").is_err());
    }

    #[test]
    fn table_rows() {
        let c = preset("benchmark1_n10").unwrap();
        assert_eq!((c.train.train_size, c.train.batch_size, c.train.modes_per_axis.clone(), c.train.epochs), (10, 2, vec![64], 300));
        let c = preset("benchmark1_res8").unwrap();
        assert_eq!((c.problem.resolution.clone(), c.train.modes_per_axis.clone()), (vec![8], vec![4]));
        let c = preset("burgers_n5000").unwrap();
        assert_eq!((c.train.batch_size, c.train.modes_per_axis.clone(), c.train.epochs), (128, vec![64, 64], 500));
        assert_eq!(c.problem.lf_resolution, vec![64, 64]);
    }

    #[test]
    fn overlay_on_preset() {
        let c = RunConfig::from_json(r#"{"preset": "benchmark1_n10", "train": {"epochs": 5, "architecture": {"hidden_channels": 8}}}"#).unwrap();
        assert_eq!(c.train.epochs, 5);
        assert_eq!(c.train.architecture.hidden_channels, 8);
        assert_eq!(c.train.architecture.n_layers, 4);
        assert_eq!(c.train.train_size, 10);
    }

    #[test]
    fn problem_kind_selects_defaults() {
        let c = RunConfig::from_json(r#"{"problem": {"problem": "darcy", "q_lf": 32}}"#).unwrap();
        assert_eq!(c.problem.lf_resolution, vec![32, 32]);
        assert_eq!(c.problem.q_lf, 32);
        assert_eq!(c.train.modes_per_axis.len(), 2);
    }

    #[test]
    fn unknown_keys_are_errors() {
        for doc in [
            r#"{"trian": {}}"#,
            r#"{"train": {"epoch": 3}}"#,
            r#"{"train": {"architecture": {"layers": 3}}}"#,
            r#"{"problem": {"resolutoin": [64]}}"#,
        ] {
            let e = RunConfig::from_json(doc).unwrap_err();
            assert!(matches!(e, FloralError::Config(_)), "{doc}: {e}");
        }
    }

    #[test]
    fn round_trip() {
        let c = preset("advection_n500").unwrap();
        assert_eq!(RunConfig::from_json(&c.to_json().unwrap()).unwrap(), c);
    }

    #[test]
    fn mismatched_modes_rejected() {
        assert!(RunConfig::from_json(r#"{"problem": {"problem": "burgers"}, "train": {"modes_per_axis": [8]}}"#).is_err());
    }
}
