//! Experiment configuration: one JSON document, paths relative to it.

use std::path::{Path, PathBuf};

use rltlab_core::eet::{EetConfig, DEFAULT_ALPHA};
use rltlab_core::sim::CostModel;
use rltlab_core::truncate::SurpriseConfig;
use rltlab_core::MetricId;
use serde::Deserialize;

use crate::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub retrieved_run: PathBuf,
    pub reranked_run: PathBuf,
    pub qrels: PathBuf,
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
    #[serde(default = "default_work_dir")]
    pub work_dir: PathBuf,
    #[serde(default)]
    pub targets_dir: Option<PathBuf>,
    #[serde(default)]
    pub features_dir: Option<PathBuf>,
    #[serde(default)]
    pub predictions_dir: Option<PathBuf>,
    /// Prediction files produced outside the harness, e.g. by a trainer.
    #[serde(default)]
    pub external_predictions: Vec<PathBuf>,
}

fn default_work_dir() -> PathBuf {
    PathBuf::from("work")
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EetPreset {
    pub beta: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum CostSpec {
    Preset { preset: String },
    Explicit(CostModel),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: u32,
    #[serde(default = "default_dataset")]
    dataset: String,
    paths: Paths,
    #[serde(default = "default_metric")]
    metric: String,
    #[serde(default = "default_threshold")]
    relevance_threshold: u32,
    #[serde(default = "default_depth")]
    list_depth: usize,
    #[serde(default = "default_presets")]
    eet_presets: Vec<EetPreset>,
    #[serde(default = "default_cost")]
    cost_model: CostSpec,
    #[serde(default)]
    baselines: Vec<String>,
    #[serde(default = "default_grid")]
    fixed_k_grid: Vec<usize>,
    #[serde(default)]
    surprise: SurpriseConfig,
    #[serde(default = "default_folds")]
    greedy_folds: usize,
}

fn default_dataset() -> String {
    "dataset".into()
}
fn default_metric() -> String {
    "ndcg_at_10".into()
}
fn default_threshold() -> u32 {
    2
}
fn default_depth() -> usize {
    1000
}
fn default_presets() -> Vec<EetPreset> {
    rltlab_core::eet::BETA_PRESETS
        .iter()
        .map(|&beta| EetPreset {
            beta,
            alpha: DEFAULT_ALPHA,
        })
        .collect()
}
fn default_cost() -> CostSpec {
    CostSpec::Preset { preset: "llm".into() }
}
fn default_grid() -> Vec<usize> {
    vec![0, 10, 20, 100, 200, 1000]
}
fn default_folds() -> usize {
    2
}

/// A validated configuration with every path made absolute.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub paths: Paths,
    pub metric: MetricId,
    pub relevance_threshold: u32,
    pub list_depth: usize,
    pub eet_presets: Vec<EetConfig>,
    pub cost_model: CostModel,
    pub baselines: Vec<String>,
    pub fixed_k_grid: Vec<usize>,
    pub surprise: SurpriseConfig,
    pub greedy_folds: usize,
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Validation(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, &base).map_err(|e| match e {
            HarnessError::Validation(m) => invalid(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses and validates; relative paths resolve against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self, HarnessError> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
        if raw.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                raw.schema_version
            )));
        }
        let metric: MetricId = raw.metric.parse().map_err(|e| invalid(format!("metric: {e}")))?;
        if raw.relevance_threshold < 1 {
            return Err(invalid("relevance_threshold must be >= 1"));
        }
        if raw.list_depth == 0 {
            return Err(invalid("list_depth must be >= 1"));
        }
        if raw.eet_presets.is_empty() {
            return Err(invalid("eet_presets must not be empty"));
        }
        let eet_presets = raw
            .eet_presets
            .iter()
            .map(|p| EetConfig::new(p.beta, p.alpha, metric).map_err(|e| invalid(format!("eet_presets: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let cost_model = match raw.cost_model {
            CostSpec::Preset { preset } => {
                CostModel::preset(&preset).ok_or_else(|| invalid(format!("unknown cost model preset {preset:?}")))?
            }
            CostSpec::Explicit(c) => c,
        };
        if !(cost_model.per_item_latency >= 0.0 && cost_model.fixed_overhead >= 0.0) {
            return Err(invalid("cost model latencies must be non-negative"));
        }
        if raw.fixed_k_grid.is_empty() {
            return Err(invalid("fixed_k_grid must not be empty"));
        }
        raw.surprise.validate().map_err(|e| invalid(format!("surprise: {e}")))?;
        if raw.greedy_folds < 2 {
            return Err(invalid("greedy_folds must be >= 2"));
        }

        let mut paths = raw.paths;
        let abs = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        paths.retrieved_run = abs(&paths.retrieved_run);
        paths.reranked_run = abs(&paths.reranked_run);
        paths.qrels = abs(&paths.qrels);
        paths.corpus = paths.corpus.as_deref().map(abs);
        paths.embeddings = paths.embeddings.as_deref().map(abs);
        paths.work_dir = abs(&paths.work_dir);
        paths.targets_dir = paths.targets_dir.as_deref().map(abs);
        paths.features_dir = paths.features_dir.as_deref().map(abs);
        paths.predictions_dir = paths.predictions_dir.as_deref().map(abs);
        paths.external_predictions = paths.external_predictions.iter().map(|p| abs(p)).collect();

        let required = [
            ("retrieved_run", Some(&paths.retrieved_run)),
            ("reranked_run", Some(&paths.reranked_run)),
            ("qrels", Some(&paths.qrels)),
            ("corpus", paths.corpus.as_ref()),
            ("embeddings", paths.embeddings.as_ref()),
        ];
        for (name, p) in required {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(invalid(format!("paths.{name}: {} does not exist", p.display())));
                }
            }
        }
        for p in &paths.external_predictions {
            if !p.is_file() {
                return Err(invalid(format!("paths.external_predictions: {} does not exist", p.display())));
            }
        }

        let mut fixed_k_grid = raw.fixed_k_grid;
        fixed_k_grid.sort_unstable();
        fixed_k_grid.dedup();

        Ok(Self {
            dataset: raw.dataset,
            paths,
            metric,
            relevance_threshold: raw.relevance_threshold,
            list_depth: raw.list_depth,
            eet_presets,
            cost_model,
            baselines: raw.baselines,
            fixed_k_grid,
            surprise: raw.surprise,
            greedy_folds: raw.greedy_folds,
        })
    }

    pub fn sweep_path(&self) -> PathBuf {
        self.paths.work_dir.join("sweep.csv")
    }

    pub fn oracle_path(&self) -> PathBuf {
        self.paths.work_dir.join("oracle.tsv")
    }

    pub fn targets_dir(&self) -> PathBuf {
        self.paths.targets_dir.clone().unwrap_or_else(|| self.paths.work_dir.join("targets"))
    }

    pub fn features_dir(&self) -> PathBuf {
        self.paths.features_dir.clone().unwrap_or_else(|| self.paths.work_dir.join("features"))
    }

    pub fn predictions_dir(&self) -> PathBuf {
        self.paths
            .predictions_dir
            .clone()
            .unwrap_or_else(|| self.paths.work_dir.join("predictions"))
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.paths.work_dir.join("reports")
    }

    pub fn plots_dir(&self) -> PathBuf {
        self.paths.work_dir.join("plots")
    }

    pub fn diagnostics_dir(&self) -> PathBuf {
        self.paths.work_dir.join("diagnostics")
    }

    pub fn target_path(&self, preset: &EetConfig) -> PathBuf {
        self.targets_dir().join(format!("eet_{}.txt", preset.tag()))
    }

    /// The configured preset with this beta.
    pub fn preset_for_beta(&self, beta: f64) -> Result<EetConfig, HarnessError> {
        self.eet_presets
            .iter()
            .find(|p| p.beta == beta)
            .copied()
            .ok_or_else(|| invalid(format!("no eet preset with beta {beta}")))
    }
}
