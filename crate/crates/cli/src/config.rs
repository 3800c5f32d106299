//! Pipeline configuration file and flag overrides.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use vocadapt_core::{CbowConfig, Method, ProjectionConfig, Side};

use crate::error::CliError;

/// CBOW settings where every field is optional. `dim` falls back to the
/// checkpoint's embedding width in the pipeline.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct CbowSettings {
    /// Embedding dimension [default: checkpoint width in `pipeline`, else 100]
    #[arg(long)]
    pub dim: Option<usize>,
    /// Symmetric context radius [default: 5]
    #[arg(long)]
    pub window: Option<usize>,
    /// Negative samples per prediction [default: 5]
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Passes over the corpus [default: 5]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Starting learning rate, decayed linearly to zero [default: 0.05]
    #[arg(long)]
    pub initial_lr: Option<f64>,
    /// Minimum token count [default: 1]
    #[arg(long)]
    pub min_count: Option<u64>,
    /// Vocabulary size cap [default: 16000]
    #[arg(long)]
    pub max_vocab: Option<usize>,
    /// RNG seed [default: pipeline seed, else 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Frequent-token subsampling threshold, 0 disables [default: 1e-4]
    #[arg(long)]
    pub subsample_threshold: Option<f64>,
}

impl CbowSettings {
    /// Fields set in `other` take precedence.
    pub fn overridden_by(&self, other: &CbowSettings) -> CbowSettings {
        CbowSettings {
            dim: other.dim.or(self.dim),
            window: other.window.or(self.window),
            negatives: other.negatives.or(self.negatives),
            epochs: other.epochs.or(self.epochs),
            initial_lr: other.initial_lr.or(self.initial_lr),
            min_count: other.min_count.or(self.min_count),
            max_vocab: other.max_vocab.or(self.max_vocab),
            seed: other.seed.or(self.seed),
            subsample_threshold: other.subsample_threshold.or(self.subsample_threshold),
        }
    }

    pub fn resolve(&self, base: &CbowConfig) -> CbowConfig {
        CbowConfig {
            dim: self.dim.unwrap_or(base.dim),
            window: self.window.unwrap_or(base.window),
            negatives: self.negatives.unwrap_or(base.negatives),
            epochs: self.epochs.unwrap_or(base.epochs),
            initial_lr: self.initial_lr.unwrap_or(base.initial_lr),
            min_count: self.min_count.unwrap_or(base.min_count),
            max_vocab: self.max_vocab.unwrap_or(base.max_vocab),
            seed: self.seed.unwrap_or(base.seed),
            subsample_threshold: self.subsample_threshold.unwrap_or(base.subsample_threshold),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionSettings {
    /// Projection method: linear, llm or cbow-as-is [default: llm]
    #[arg(long)]
    pub method: Option<Method>,
    /// Neighbors per token for llm [default: 10]
    #[arg(long)]
    pub k: Option<usize>,
    /// Length-normalize anchors before the linear fit [default: false]
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub normalize_anchors: Option<bool>,
    /// Gram conditioning for llm [default: 1e-3 when k exceeds the dimension, else 0]
    #[arg(long)]
    pub gram_epsilon: Option<f64>,
    /// Use only the n most frequent shared tokens as linear anchors
    #[arg(long)]
    pub linear_top_n: Option<usize>,
}

impl ProjectionSettings {
    pub fn overridden_by(&self, other: &ProjectionSettings) -> ProjectionSettings {
        ProjectionSettings {
            method: other.method.or(self.method),
            k: other.k.or(self.k),
            normalize_anchors: other.normalize_anchors.or(self.normalize_anchors),
            gram_epsilon: other.gram_epsilon.or(self.gram_epsilon),
            linear_top_n: other.linear_top_n.or(self.linear_top_n),
        }
    }

    pub fn resolve(&self) -> ProjectionConfig {
        let base = ProjectionConfig::default();
        ProjectionConfig {
            method: self.method.unwrap_or(base.method),
            k: self.k.unwrap_or(base.k),
            normalize_anchors: self.normalize_anchors.unwrap_or(base.normalize_anchors),
            gram_epsilon: self.gram_epsilon.or(base.gram_epsilon),
            linear_top_n: self.linear_top_n.or(base.linear_top_n),
        }
    }
}

/// Inputs for one side of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SideConfig {
    /// Pre-trained vocabulary, one row per embedding row.
    pub vocab: PathBuf,
    /// Tokenized target-domain monolingual corpus.
    pub corpus: PathBuf,
    /// Optional anchor list overriding the shared vocabulary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchors: Option<PathBuf>,
    #[serde(default)]
    pub cbow: CbowSettings,
    #[serde(default)]
    pub projection: ProjectionSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub checkpoint: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    pub encoder: SideConfig,
    pub decoder: SideConfig,
}

impl PipelineConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config {
            path: path.to_owned(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn side(&self, side: Side) -> &SideConfig {
        match side {
            Side::Encoder => &self.encoder,
            Side::Decoder => &self.decoder,
        }
    }

    /// Applies flag overrides to both sides.
    pub fn apply_overrides(&mut self, cbow: &CbowSettings, projection: &ProjectionSettings) {
        for side in [&mut self.encoder, &mut self.decoder] {
            side.cbow = side.cbow.overridden_by(cbow);
            side.projection = side.projection.overridden_by(projection);
        }
    }

    /// Fully resolved CBOW settings for `side`. Unset `dim` follows the
    /// checkpoint width and unset `seed` the pipeline seed.
    pub fn cbow_for(&self, side: Side, width: usize) -> CbowConfig {
        let base = CbowConfig {
            dim: width,
            seed: self.seed,
            ..CbowConfig::default()
        };
        self.side(side).cbow.resolve(&base)
    }
}
