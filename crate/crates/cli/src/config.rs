//! Experiment configuration: one TOML file, overridden by command-line
//! flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use posprobe_core::analysis::AnalysisOptions;
use posprobe_core::masking::TagScheme;
use posprobe_core::model::{EncoderConfig, HeadConfig, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Treebank code used in tables and file names.
    pub name: String,
    pub data: DataPaths,
    pub output: PathBuf,
    pub seeds: Vec<u64>,
    pub schemes: Vec<TagScheme>,
    pub jobs: usize,
    /// Tag embedding width of tag-conditioned parsers.
    pub tag_dim: usize,
    pub encoder: EncoderConfig,
    pub head: HeadConfig,
    pub train: TrainConfig,
    pub analysis: AnalysisOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "treebank".into(),
            data: DataPaths::default(),
            output: PathBuf::from("out"),
            seeds: vec![1],
            schemes: TagScheme::ALL.to_vec(),
            jobs: 1,
            tag_dim: 100,
            encoder: EncoderConfig::default(),
            head: HeadConfig::default(),
            train: TrainConfig::default(),
            analysis: AnalysisOptions::default(),
        }
    }
}

/// Flag values that override the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub schemes: Vec<TagScheme>,
    pub name: Option<String>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        match path {
            None => Ok(ExperimentConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing config {}", p.display()))
            }
        }
    }

    pub fn apply(&mut self, o: Overrides) {
        let set = |slot: &mut Option<PathBuf>, v: Option<PathBuf>| {
            if v.is_some() {
                *slot = v;
            }
        };
        set(&mut self.data.train, o.train);
        set(&mut self.data.dev, o.dev);
        set(&mut self.data.test, o.test);
        set(&mut self.data.embeddings, o.embeddings);
        if !o.seeds.is_empty() {
            self.seeds = o.seeds;
        }
        if !o.schemes.is_empty() {
            self.schemes = o.schemes;
        }
        if let Some(v) = o.out {
            self.output = v;
        }
        if let Some(v) = o.jobs {
            self.jobs = v;
        }
        if let Some(v) = o.name {
            self.name = v;
        }
        if let Some(v) = o.max_epochs {
            self.train.max_epochs = v;
        }
        if let Some(v) = o.patience {
            self.train.patience = v;
        }
        if let Some(&s) = self.seeds.first() {
            self.train.seed = s;
        }
    }

    /// Check that the listed paths exist and the settings are usable.
    pub fn validate(&self, need: &[Split]) -> anyhow::Result<()> {
        if self.seeds.is_empty() {
            bail!("at least one seed is required");
        }
        if self.jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        for &s in need {
            match self.path(s) {
                None => bail!("missing --{} path", s.flag()),
                Some(p) if !p.is_file() => bail!("--{} {} does not exist", s.flag(), p.display()),
                _ => {}
            }
        }
        if let Some(p) = &self.data.embeddings {
            if !p.is_file() {
                bail!("--embeddings {} does not exist", p.display());
            }
        }
        self.encoder.validate()?;
        Ok(())
    }

    pub fn path(&self, s: Split) -> Option<&Path> {
        match s {
            Split::Train => self.data.train.as_deref(),
            Split::Dev => self.data.dev.as_deref(),
            Split::Test => self.data.test.as_deref(),
        }
    }

    /// Training settings for one seed, with patience capped at
    /// `max_epochs`.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            patience: self.train.patience.min(self.train.max_epochs),
            ..self.train.clone()
        }
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    fn flag(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}
