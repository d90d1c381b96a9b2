//! Run configuration: command-line flags override a TOML config file, which
//! overrides built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::architecture::{ArchKind, ArchitectureConfig, Entangler};
use crate::baseline::Pooling;
use crate::data::{ClassSubsetSpec, DatasetKind};
use crate::error::{Error, Result};
use crate::training::Hyperparams;

/// Environment variable naming the directory that holds `mnist/` and
/// `fashion/` IDX files.
pub const DATA_DIR_ENV: &str = "QCNN_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "data";
pub const DEFAULT_OUT_DIR: &str = "runs/latest";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Qcnn,
    Baseline,
}

/// Every setting optional; used both as the flag set and as the config file
/// schema.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, clap::Args)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    /// Model to train or evaluate.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelKind>,
    /// Circuit family (full QCNN or the reference ablation).
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub arch: Option<ArchKind>,
    /// Two-qubit gate in the entangling steps.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entangler: Option<Entangler>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regular_layers: Option<usize>,
    /// Give every sublayer of a filter its own parameters.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unshared: Option<bool>,
    /// Simulate the decomposed circuit (CNOTs and single-qubit rotations)
    /// instead of native controlled rotations.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decomposed: Option<bool>,
    /// Pooling layer of the classical baseline.
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pooling: Option<Pooling>,
    /// Four distinct source labels, e.g. `3,4,5,6`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classes: Option<ClassSubsetSpec>,
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetKind>,
    /// Directory holding `mnist/` and `fashion/` IDX files.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_dir: Option<PathBuf>,
    /// Training images (IDX); defaults to the standard file under the data dir.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub images: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_images: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_labels: Option<PathBuf>,
    /// Keep the first N training images of each class.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
    /// Keep the first N test images of each class.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_limit: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    /// Adam learning rate.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    /// Mini-batch size.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adam_beta1: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adam_beta2: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adam_eps: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores); results do not depend on it.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Settings {
    /// Field-wise `self` if set, else `lower`.
    pub fn or(self, lower: Settings) -> Settings {
        Settings {
            model: self.model.or(lower.model),
            arch: self.arch.or(lower.arch),
            entangler: self.entangler.or(lower.entangler),
            regular_layers: self.regular_layers.or(lower.regular_layers),
            unshared: self.unshared.or(lower.unshared),
            decomposed: self.decomposed.or(lower.decomposed),
            pooling: self.pooling.or(lower.pooling),
            classes: self.classes.or(lower.classes),
            dataset: self.dataset.or(lower.dataset),
            data_dir: self.data_dir.or(lower.data_dir),
            images: self.images.or(lower.images),
            labels: self.labels.or(lower.labels),
            test_images: self.test_images.or(lower.test_images),
            test_labels: self.test_labels.or(lower.test_labels),
            limit: self.limit.or(lower.limit),
            test_limit: self.test_limit.or(lower.test_limit),
            epochs: self.epochs.or(lower.epochs),
            lr: self.lr.or(lower.lr),
            batch: self.batch.or(lower.batch),
            adam_beta1: self.adam_beta1.or(lower.adam_beta1),
            adam_beta2: self.adam_beta2.or(lower.adam_beta2),
            adam_eps: self.adam_eps.or(lower.adam_eps),
            seed: self.seed.or(lower.seed),
            workers: self.workers.or(lower.workers),
            out: self.out.or(lower.out),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Settings> {
        toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Settings> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }
}

/// A fully resolved run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model: ModelKind,
    pub arch: ArchKind,
    pub entangler: Entangler,
    pub regular_layers: usize,
    pub unshared: bool,
    #[serde(default)]
    pub decomposed: bool,
    pub pooling: Pooling,
    pub classes: ClassSubsetSpec,
    pub dataset: DatasetKind,
    pub images: PathBuf,
    pub labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
    pub limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub hyper: Hyperparams,
    pub out: PathBuf,
}

impl RunConfig {
    /// Fills unset values with defaults. `env_data_dir` stands in for
    /// `$QCNN_DATA_DIR` when no data dir is configured.
    pub fn resolve(s: Settings, env_data_dir: Option<PathBuf>) -> Result<RunConfig> {
        let defaults = Hyperparams::default();
        let dataset = s.dataset.unwrap_or(DatasetKind::Mnist);
        let data_dir = s
            .data_dir
            .or(env_data_dir)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR));
        let (train_images, train_labels) = dataset.default_paths(&data_dir, true);
        let (test_images, test_labels) = dataset.default_paths(&data_dir, false);
        let hyper = Hyperparams {
            learning_rate: s.lr.unwrap_or(defaults.learning_rate),
            epochs: s.epochs.unwrap_or(defaults.epochs),
            batch_size: s.batch.unwrap_or(defaults.batch_size),
            adam_beta1: s.adam_beta1.unwrap_or(defaults.adam_beta1),
            adam_beta2: s.adam_beta2.unwrap_or(defaults.adam_beta2),
            adam_eps: s.adam_eps.unwrap_or(defaults.adam_eps),
            seed: s.seed.unwrap_or(defaults.seed),
            workers: s.workers.unwrap_or(defaults.workers),
        };
        hyper.validate()?;
        let arch = s.arch.unwrap_or(ArchKind::Full);
        let entangler = s.entangler.unwrap_or(match arch {
            ArchKind::Full => Entangler::ParameterizedCry,
            ArchKind::Reference => Entangler::Cnot,
        });
        if arch == ArchKind::Reference && entangler != Entangler::Cnot {
            return Err(Error::Config(
                "the reference architecture uses CNOT entanglers only".into(),
            ));
        }
        let cfg = RunConfig {
            model: s.model.unwrap_or(ModelKind::Qcnn),
            arch,
            entangler,
            regular_layers: s.regular_layers.unwrap_or(8),
            unshared: s.unshared.unwrap_or(false),
            decomposed: s.decomposed.unwrap_or(false),
            pooling: s.pooling.unwrap_or_default(),
            classes: s
                .classes
                .unwrap_or(ClassSubsetSpec::new(&[0, 1, 2, 3]).expect("valid default classes")),
            dataset,
            images: s.images.unwrap_or(train_images),
            labels: s.labels.unwrap_or(train_labels),
            test_images: s.test_images.unwrap_or(test_images),
            test_labels: s.test_labels.unwrap_or(test_labels),
            limit: s.limit,
            test_limit: s.test_limit,
            hyper,
            out: s.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR)),
        };
        cfg.arch_config().validate()?;
        Ok(cfg)
    }

    pub fn arch_config(&self) -> ArchitectureConfig {
        let base = match self.arch {
            ArchKind::Full => ArchitectureConfig::default(),
            ArchKind::Reference => ArchitectureConfig::reference(),
        };
        ArchitectureConfig {
            num_regular_layers: self.regular_layers,
            entangler: self.entangler,
            share_across_sublayers: !self.unshared,
            ..base
        }
    }

    /// Settings that reproduce this configuration exactly when loaded back.
    pub fn to_settings(&self) -> Settings {
        Settings {
            model: Some(self.model),
            arch: Some(self.arch),
            entangler: Some(self.entangler),
            regular_layers: Some(self.regular_layers),
            unshared: Some(self.unshared),
            decomposed: Some(self.decomposed),
            pooling: Some(self.pooling),
            classes: Some(self.classes),
            dataset: Some(self.dataset),
            data_dir: None,
            images: Some(self.images.clone()),
            labels: Some(self.labels.clone()),
            test_images: Some(self.test_images.clone()),
            test_labels: Some(self.test_labels.clone()),
            limit: self.limit,
            test_limit: self.test_limit,
            epochs: Some(self.hyper.epochs),
            lr: Some(self.hyper.learning_rate),
            batch: Some(self.hyper.batch_size),
            adam_beta1: Some(self.hyper.adam_beta1),
            adam_beta2: Some(self.hyper.adam_beta2),
            adam_eps: Some(self.hyper.adam_eps),
            seed: Some(self.hyper.seed),
            workers: Some(self.hyper.workers),
            out: Some(self.out.clone()),
        }
    }
}
