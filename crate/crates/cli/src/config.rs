//! The TOML run configuration shared by every command.

use std::path::{Path, PathBuf};

use ens_lsr::ensemble::EditCosts;
use ens_lsr::task::DatasetParams;
use ens_lsr::{MappingConfig, Measure, RoadmapConfig, SimilarityConfig, Task};
use serde::Deserialize;

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub task: Task,
    pub dataset: DatasetSection,
    pub mapping: MappingSection,
    pub roadmap: RoadmapSection,
    pub planner: PlannerSection,
    pub ensemble: EnsembleSection,
    pub eval: EvalSection,
    pub io: IoSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            task: Task::Stacking,
            dataset: DatasetSection::default(),
            mapping: MappingSection::default(),
            roadmap: RoadmapSection::default(),
            planner: PlannerSection::default(),
            ensemble: EnsembleSection::default(),
            eval: EvalSection::default(),
            io: IoSection::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetSection {
    /// Defaults to 2500 for stacking and 5000 for harvesting.
    pub n_tuples: Option<usize>,
    pub frac_no_action: f64,
    pub seed: u64,
    pub walk_length: usize,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection { n_tuples: None, frac_no_action: 0.2, seed: 1, walk_length: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MappingSection {
    pub d: usize,
    pub sigma_noise: f64,
    pub p_merge: f64,
    pub p_split: f64,
    pub p_outlier: f64,
    pub subset_fraction: f64,
    pub seeds: Vec<u64>,
}

impl Default for MappingSection {
    fn default() -> Self {
        let m = MappingConfig::default();
        MappingSection {
            d: m.d,
            sigma_noise: m.sigma_noise,
            p_merge: m.p_merge,
            p_split: m.p_split,
            p_outlier: m.p_outlier,
            subset_fraction: m.subset_fraction,
            seeds: (1..=10).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoadmapSection {
    pub c_max: Vec<usize>,
    pub min_cluster_size: usize,
    pub n_eps: usize,
    /// Defaults to the task's edge direction: harvesting is directed.
    pub directed: Option<bool>,
}

impl Default for RoadmapSection {
    fn default() -> Self {
        RoadmapSection { c_max: vec![20], min_cluster_size: 1, n_eps: 50, directed: None }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerSection {
    pub max_paths: usize,
}

impl Default for PlannerSection {
    fn default() -> Self {
        PlannerSection { max_paths: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub measure: Measure,
    pub substitution_cost: f64,
    pub tau: f64,
    pub insertion_cost: f64,
    pub deletion_cost: f64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        let e = EditCosts::default();
        EnsembleSection {
            measure: Measure::Sum,
            substitution_cost: e.substitution,
            tau: e.tau,
            insertion_cost: e.insertion,
            deletion_cost: e.deletion,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub n_pairs: usize,
    pub harness_seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { n_pairs: 1000, harness_seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    pub output_dir: PathBuf,
}

impl Default for IoSection {
    fn default() -> Self {
        IoSection { output_dir: PathBuf::from("out") }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.validate().map_err(ConfigError::Invalid)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        let d = &self.dataset;
        if !(0.0..=1.0).contains(&d.frac_no_action) {
            return Err(format!("dataset.frac_no_action must lie in [0, 1], got {}", d.frac_no_action));
        }
        if d.n_tuples == Some(0) {
            return Err("dataset.n_tuples must be at least 1".into());
        }
        if d.walk_length == 0 {
            return Err("dataset.walk_length must be at least 1".into());
        }
        self.mapping_config().validate()?;
        if self.mapping.seeds.is_empty() {
            return Err("mapping.seeds must name at least one seed".into());
        }
        let mut seeds = self.mapping.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.mapping.seeds.len() {
            return Err("mapping.seeds must be distinct".into());
        }
        let r = &self.roadmap;
        if r.c_max.is_empty() || r.c_max.contains(&0) {
            return Err("roadmap.c_max must be a nonempty list of values >= 1".into());
        }
        if r.min_cluster_size == 0 {
            return Err("roadmap.min_cluster_size must be at least 1".into());
        }
        if r.n_eps == 0 {
            return Err("roadmap.n_eps must be at least 1".into());
        }
        if self.planner.max_paths == 0 {
            return Err("planner.max_paths must be at least 1".into());
        }
        let e = &self.ensemble;
        for (name, v) in [
            ("substitution_cost", e.substitution_cost),
            ("tau", e.tau),
            ("insertion_cost", e.insertion_cost),
            ("deletion_cost", e.deletion_cost),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("ensemble.{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.eval.n_pairs == 0 {
            return Err("eval.n_pairs must be at least 1".into());
        }
        Ok(())
    }

    pub fn dataset_params(&self) -> DatasetParams {
        let default_n = match self.task {
            Task::Stacking => 2500,
            Task::Harvesting => 5000,
        };
        DatasetParams {
            task: self.task,
            n_tuples: self.dataset.n_tuples.unwrap_or(default_n),
            frac_no_action: self.dataset.frac_no_action,
            seed: self.dataset.seed,
            walk_length: self.dataset.walk_length,
        }
    }

    pub fn mapping_config(&self) -> MappingConfig {
        let m = &self.mapping;
        MappingConfig {
            d: m.d,
            sigma_noise: m.sigma_noise,
            p_merge: m.p_merge,
            p_split: m.p_split,
            p_outlier: m.p_outlier,
            subset_fraction: m.subset_fraction,
        }
    }

    pub fn roadmap_config(&self, c_max: usize) -> RoadmapConfig {
        RoadmapConfig {
            c_max,
            min_cluster_size: self.roadmap.min_cluster_size,
            n_eps: self.roadmap.n_eps,
            directed: self.roadmap.directed.unwrap_or(self.task.directed()),
        }
    }

    pub fn similarity(&self) -> SimilarityConfig {
        let e = &self.ensemble;
        SimilarityConfig {
            measure: e.measure,
            edit: EditCosts {
                insertion: e.insertion_cost,
                deletion: e.deletion_cost,
                substitution: e.substitution_cost,
                tau: e.tau,
            },
        }
    }
}
