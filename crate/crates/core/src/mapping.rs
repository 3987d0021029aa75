//! Synthetic mapping modules standing in for a learned encoder/decoder pair.
//!
//! Each module places every system state at a keyed pseudo-random point of the
//! unit sphere in `R^d` and scatters individual observations around it by
//! `sigma_noise` along a keyed unit direction. Imperfection is injected on
//! purpose and keyed by the module seed, so different modules make different
//! mistakes:
//!
//! - merges: two states share one centroid;
//! - splits: a state owns a second centroid and half of its observations
//!   (by nuisance hash parity) are routed there;
//! - outliers: an observation is anchored at a random point of the sphere
//!   instead of at its state's centroid.
//!
//! Decoding returns the training observation whose encoding is nearest.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::keyed::{uniform01, unit_vector, KeyHasher};
use crate::task::{Dataset, Observation, SystemState, Task};
use crate::union_find::UnionFind;

pub const MODULE_FORMAT_VERSION: u32 = 1;

/// Point of the latent space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentVector(pub Vec<f64>);

impl LatentVector {
    pub fn zeros(d: usize) -> Self {
        LatentVector(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn squared_distance(&self, other: &LatentVector) -> f64 {
        squared_distance(&self.0, &other.0)
    }

    pub fn distance(&self, other: &LatentVector) -> f64 {
        self.squared_distance(other).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Arithmetic mean of `points`; `None` when empty.
    pub fn mean<'a>(points: impl IntoIterator<Item = &'a LatentVector>) -> Option<LatentVector> {
        let mut iter = points.into_iter();
        let mut sum = iter.next()?.0.clone();
        let mut n = 1usize;
        for p in iter {
            for (s, v) in sum.iter_mut().zip(&p.0) {
                *s += v;
            }
            n += 1;
        }
        Some(LatentVector(sum.into_iter().map(|s| s / n as f64).collect()))
    }
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MappingConfig {
    /// Latent dimension.
    pub d: usize,
    pub sigma_noise: f64,
    /// Probability that an unordered pair of dataset states shares a centroid.
    pub p_merge: f64,
    /// Probability that a state owns a second centroid.
    pub p_split: f64,
    /// Probability that an observation is anchored at a random latent point.
    pub p_outlier: f64,
    /// Fraction of the dataset tuples each module is built from.
    pub subset_fraction: f64,
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig { d: 16, sigma_noise: 0.25, p_merge: 1e-4, p_split: 0.02, p_outlier: 0.01, subset_fraction: 0.85 }
    }
}

impl MappingConfig {
    /// Error-free configuration: no noise, merges, splits or outliers, full dataset.
    pub fn noise_free() -> Self {
        MappingConfig { sigma_noise: 0.0, p_merge: 0.0, p_split: 0.0, p_outlier: 0.0, ..Default::default() }
    }

    /// Checks value ranges; the error names the offending field.
    pub fn validate(&self) -> Result<(), String> {
        if self.d == 0 {
            return Err("mapping.d must be at least 1".into());
        }
        if !(self.sigma_noise.is_finite() && self.sigma_noise >= 0.0) {
            return Err(format!("mapping.sigma_noise must be finite and >= 0, got {}", self.sigma_noise));
        }
        for (name, p) in [("p_merge", self.p_merge), ("p_split", self.p_split), ("p_outlier", self.p_outlier)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("mapping.{name} must lie in [0, 1], got {p}"));
            }
        }
        if !(self.subset_fraction > 0.0 && self.subset_fraction <= 1.0) {
            return Err(format!("mapping.subset_fraction must lie in (0, 1], got {}", self.subset_fraction));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("cannot build a mapping module from an empty dataset")]
    EmptyDataset,
    #[error("invalid mapping configuration: {0}")]
    Config(String),
    #[error("module record does not match the dataset: {0}")]
    Mismatch(String),
}

/// Persisted form of a module. Centroids are re-derived from the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModuleRecord {
    pub model_seed: u64,
    pub task: Task,
    pub d: usize,
    pub sigma_noise: f64,
    pub p_merge: f64,
    pub p_split: f64,
    pub p_outlier: f64,
    pub subset_fraction: f64,
    pub train_subset: Vec<usize>,
    pub format_version: u32,
}

/// Synthetic encoder `xi` and decoder `omega` of one ensemble member.
#[derive(Clone, Debug)]
pub struct MappingModule {
    model_seed: u64,
    config: MappingConfig,
    task: Task,
    train_subset: Vec<usize>,
    /// Merged states mapped to the state whose centroid they share.
    merge_rep: HashMap<SystemState, SystemState>,
    split: HashSet<SystemState>,
    centroid_cache: HashMap<SystemState, LatentVector>,
    train_obs: Vec<Observation>,
    train_latents: Vec<LatentVector>,
}

/// Builds the module of `model_seed`, drawing its training subset from the seed.
pub fn make_module(dataset: &Dataset, model_seed: u64, config: &MappingConfig) -> Result<MappingModule, MappingError> {
    if dataset.is_empty() {
        return Err(MappingError::EmptyDataset);
    }
    config.validate().map_err(MappingError::Config)?;
    let subset = draw_subset(dataset.len(), config.subset_fraction, model_seed);
    Ok(MappingModule::with_subset(dataset, model_seed, *config, subset))
}

fn draw_subset(n: usize, fraction: f64, model_seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(KeyHasher::new("subset").write_u64(model_seed).finish());
    idx.shuffle(&mut rng);
    let k = ((fraction * n as f64).round() as usize).clamp(1, n);
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

impl MappingModule {
    fn with_subset(dataset: &Dataset, model_seed: u64, config: MappingConfig, train_subset: Vec<usize>) -> Self {
        let states = dataset.distinct_states();
        let key = |domain: &str| KeyHasher::new(domain).write_u64(model_seed).to_owned();

        let mut merge_rep = HashMap::new();
        if config.p_merge > 0.0 {
            let mut uf = UnionFind::new(states.len());
            for i in 0..states.len() {
                for j in i + 1..states.len() {
                    let k =
                        key("merge").write_u64(states[i].canonical_key()).write_u64(states[j].canonical_key()).finish();
                    if uniform01(k) < config.p_merge {
                        uf.union(i, j);
                    }
                }
            }
            // The lowest state of each group lends its centroid to the others.
            let mut rep_of_root: HashMap<usize, usize> = HashMap::new();
            for i in 0..states.len() {
                let r = uf.find(i);
                let rep = *rep_of_root.entry(r).or_insert(i);
                if rep != i {
                    merge_rep.insert(states[i].clone(), states[rep].clone());
                }
            }
        }
        let split = states
            .iter()
            .filter(|s| uniform01(key("split").write_u64(s.canonical_key()).finish()) < config.p_split)
            .cloned()
            .collect();

        let mut module = MappingModule {
            model_seed,
            config,
            task: dataset.task(),
            train_subset,
            merge_rep,
            split,
            centroid_cache: HashMap::new(),
            train_obs: Vec::new(),
            train_latents: Vec::new(),
        };
        module.centroid_cache = states.iter().map(|s| (s.clone(), module.primary_centroid(s))).collect();
        module.train_obs = dataset.observations_of(module.train_subset.iter().copied());
        module.train_latents = module.train_obs.iter().map(|o| module.encode(o)).collect();
        module
    }

    /// Rebuilds a persisted module against the dataset it was built from.
    pub fn from_record(record: &ModuleRecord, dataset: &Dataset) -> Result<Self, MappingError> {
        if record.format_version != MODULE_FORMAT_VERSION {
            return Err(MappingError::Mismatch(format!("unsupported format version {}", record.format_version)));
        }
        if record.task != dataset.task() {
            return Err(MappingError::Mismatch(format!(
                "module is for {}, dataset is {}",
                record.task,
                dataset.task()
            )));
        }
        if dataset.is_empty() {
            return Err(MappingError::EmptyDataset);
        }
        if record.train_subset.is_empty()
            || record.train_subset.windows(2).any(|w| w[0] >= w[1])
            || record.train_subset.last().is_some_and(|&i| i >= dataset.len())
        {
            return Err(MappingError::Mismatch("train_subset must be sorted, unique and within the dataset".into()));
        }
        let config = MappingConfig {
            d: record.d,
            sigma_noise: record.sigma_noise,
            p_merge: record.p_merge,
            p_split: record.p_split,
            p_outlier: record.p_outlier,
            subset_fraction: record.subset_fraction,
        };
        config.validate().map_err(MappingError::Config)?;
        Ok(MappingModule::with_subset(dataset, record.model_seed, config, record.train_subset.clone()))
    }

    pub fn record(&self) -> ModuleRecord {
        ModuleRecord {
            model_seed: self.model_seed,
            task: self.task,
            d: self.config.d,
            sigma_noise: self.config.sigma_noise,
            p_merge: self.config.p_merge,
            p_split: self.config.p_split,
            p_outlier: self.config.p_outlier,
            subset_fraction: self.config.subset_fraction,
            train_subset: self.train_subset.clone(),
            format_version: MODULE_FORMAT_VERSION,
        }
    }

    pub fn model_seed(&self) -> u64 {
        self.model_seed
    }

    pub fn config(&self) -> &MappingConfig {
        &self.config
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn dim(&self) -> usize {
        self.config.d
    }

    /// Sorted indices of the dataset tuples this module was built from.
    pub fn train_subset(&self) -> &[usize] {
        &self.train_subset
    }

    /// Distinct observations of the training tuples, sorted by index.
    pub fn train_observations(&self) -> &[Observation] {
        &self.train_obs
    }

    /// Encodings of [`Self::train_observations`], position for position.
    pub fn train_latents(&self) -> &[LatentVector] {
        &self.train_latents
    }

    /// The state whose centroid `state` uses (itself unless merged).
    pub fn merge_representative<'a>(&'a self, state: &'a SystemState) -> &'a SystemState {
        self.merge_rep.get(state).unwrap_or(state)
    }

    pub fn is_split(&self, state: &SystemState) -> bool {
        self.split.contains(state)
    }

    /// Groups of dataset states sharing a centroid.
    pub fn merged_groups(&self) -> Vec<Vec<SystemState>> {
        let mut groups: HashMap<&SystemState, Vec<SystemState>> = HashMap::new();
        for (s, rep) in &self.merge_rep {
            groups.entry(rep).or_insert_with(|| vec![rep.clone()]).push(s.clone());
        }
        let mut out: Vec<Vec<SystemState>> = groups
            .into_values()
            .map(|mut g| {
                g.sort();
                g
            })
            .collect();
        out.sort();
        out
    }

    fn state_point(&self, domain: &str, state: &SystemState) -> LatentVector {
        let k = KeyHasher::new(domain).write_u64(self.model_seed).write_u64(state.canonical_key()).finish();
        LatentVector(unit_vector(k, self.config.d))
    }

    fn primary_centroid(&self, state: &SystemState) -> LatentVector {
        self.state_point("centroid", self.merge_representative(state))
    }

    /// Primary centroid of `state`, after merges. Unseen states get one on demand.
    pub fn centroid(&self, state: &SystemState) -> LatentVector {
        match self.centroid_cache.get(state) {
            Some(c) => c.clone(),
            None => self.primary_centroid(state),
        }
    }

    fn observation_key(&self, domain: &str, obs: &Observation) -> u64 {
        let mut h = KeyHasher::new(domain);
        h.write_u64(self.model_seed).write_u64(obs.index as u64);
        write_nuisance(&mut h, obs);
        h.finish()
    }

    pub fn is_outlier(&self, obs: &Observation) -> bool {
        self.config.p_outlier > 0.0 && uniform01(self.observation_key("outlier", obs)) < self.config.p_outlier
    }

    /// Whether `obs` is routed to its state's second centroid.
    pub fn routes_to_split(&self, obs: &Observation) -> bool {
        if !self.is_split(&obs.state) {
            return false;
        }
        let mut h = KeyHasher::new("route");
        h.write_u64(self.model_seed);
        write_nuisance(&mut h, obs);
        h.finish() & 1 == 1
    }

    /// The point `obs` is scattered around: its state centroid, split centroid or outlier anchor.
    pub fn anchor(&self, obs: &Observation) -> LatentVector {
        if self.is_outlier(obs) {
            LatentVector(unit_vector(self.observation_key("outlier-anchor", obs), self.config.d))
        } else if self.routes_to_split(obs) {
            self.state_point("split-centroid", &obs.state)
        } else {
            self.centroid(&obs.state)
        }
    }

    /// `anchor(obs) + sigma_noise * eta(obs)` with `eta` a keyed unit vector.
    pub fn encode(&self, obs: &Observation) -> LatentVector {
        let mut z = self.anchor(obs);
        if self.config.sigma_noise > 0.0 {
            let eta = unit_vector(self.observation_key("eta", obs), self.config.d);
            for (v, e) in z.0.iter_mut().zip(eta) {
                *v += self.config.sigma_noise * e;
            }
        }
        z
    }

    /// Position in [`Self::train_observations`] of the observation nearest to `z`.
    pub fn decode_position(&self, z: &LatentVector) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (i, l) in self.train_latents.iter().enumerate() {
            let d = squared_distance(&l.0, &z.0);
            if d < best.0 {
                best = (d, i);
            }
        }
        best.1
    }

    /// Training observation whose encoding is nearest to `z`; ties go to the lowest index.
    pub fn decode(&self, z: &LatentVector) -> &Observation {
        &self.train_obs[self.decode_position(z)]
    }
}

fn write_nuisance(h: &mut KeyHasher, obs: &Observation) {
    let n = &obs.nuisance;
    for j in &n.jitter {
        h.write_f64(j[0]).write_f64(j[1]);
    }
    h.write_f64(n.lighting);
    for s in &n.scale {
        h.write_f64(*s);
    }
    for o in &n.orientation {
        h.write_f64(*o);
    }
    for v in &n.variant {
        h.write_u64(u64::from(*v));
    }
}
