//! On-disk run artifacts: checkpoint, per-epoch metrics, run manifest and
//! evaluation record. Floats are written as shortest round-trip decimals.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{ModelKind, RunConfig};
use crate::data::ClassSubsetSpec;
use crate::error::{Error, Result};
use crate::training::{EpochMetrics, Evaluation, TrainState};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const METRICS_JSON_FILE: &str = "metrics.json";
pub const METRICS_CSV_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "run_manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const EVALUATION_FILE: &str = "evaluation.json";
pub const CHECKPOINT_FORMAT: u32 = 1;
pub const RESAMPLING: &str = "box area-average 28x28 -> 16x16, row-major, L2-normalized";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub model: ModelKind,
    pub arch_digest: String,
    pub parameter_count: usize,
    pub classes: ClassSubsetSpec,
    pub config: RunConfig,
    pub state: TrainState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub train: usize,
    pub test: usize,
    /// Remapped class index → `[train, test]`.
    pub per_class: BTreeMap<usize, [usize; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub model: ModelKind,
    pub arch_digest: String,
    pub parameter_count: usize,
    pub config: RunConfig,
    pub datasets: DatasetCounts,
    pub preprocessing: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub model: ModelKind,
    pub arch_digest: String,
    pub classes: ClassSubsetSpec,
    pub test_images: String,
    pub num_images: usize,
    pub evaluation: Evaluation,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Serde(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn metrics_csv(history: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch,train_loss,train_acc,test_acc\n");
    for m in history {
        writeln!(out, "{},{},{},{}", m.epoch, m.train_loss, m.train_acc, m.test_acc)
            .expect("writing to a String cannot fail");
    }
    out
}

/// Writes `metrics.json` and `metrics.csv` into `dir`.
pub fn write_metrics(dir: &Path, history: &[EpochMetrics]) -> Result<()> {
    write_json(&dir.join(METRICS_JSON_FILE), &history)?;
    write_text(&dir.join(METRICS_CSV_FILE), &metrics_csv(history))
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_json(path, ckpt)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let ckpt: Checkpoint = read_json(path)?;
    if ckpt.format != CHECKPOINT_FORMAT {
        return Err(Error::Config(format!(
            "{}: unsupported checkpoint format {}",
            path.display(),
            ckpt.format
        )));
    }
    let n = ckpt.parameter_count;
    let s = &ckpt.state;
    if s.theta.len() != n || s.adam_m.len() != n || s.adam_v.len() != n {
        return Err(Error::Validation(format!(
            "{}: parameter vectors do not match parameter_count {n}",
            path.display()
        )));
    }
    Ok(ckpt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Settings;

    #[test]
    fn csv_layout() {
        let h = vec![EpochMetrics {
            epoch: 1,
            train_loss: 1.25,
            train_acc: 0.5,
            test_acc: 0.1 + 0.2,
        }];
        assert_eq!(
            metrics_csv(&h),
            "epoch,train_loss,train_acc,test_acc\n1,1.25,0.5,0.30000000000000004\n"
        );
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig::resolve(Settings::default(), None).unwrap();
        let theta = vec![0.1 + 0.2, -1e-300, std::f64::consts::PI, 5e-324];
        let mut state = TrainState::new(theta);
        state.adam_v[2] = 1.0 / 3.0;
        let ckpt = Checkpoint {
            format: CHECKPOINT_FORMAT,
            model: ModelKind::Qcnn,
            arch_digest: "abc".into(),
            parameter_count: 4,
            classes: config.classes,
            config,
            state,
        };
        let path = dir.path().join("nested").join(CHECKPOINT_FILE);
        save_checkpoint(&path, &ckpt).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), ckpt);

        let mut bad = ckpt.clone();
        bad.parameter_count = 5;
        save_checkpoint(&path, &bad).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
