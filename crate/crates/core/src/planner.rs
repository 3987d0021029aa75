//! Planning with a single latent space roadmap system (S-LSR).

use std::collections::VecDeque;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::mapping::{make_module, LatentVector, MappingConfig, MappingError, MappingModule};
use crate::roadmap::{build_roadmap, Roadmap, RoadmapConfig, RoadmapError};
use crate::task::{Action, Dataset, Observation};

/// Default cap on enumerated shortest paths per query.
pub const DEFAULT_MAX_PATHS: usize = 50;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("roadmap has no nodes")]
    EmptyRoadmap,
    #[error("no path from node {src} to node {dst}")]
    NoPath { src: usize, dst: usize },
    #[error("node {0} does not exist")]
    UnknownNode(usize),
}

/// A visual action plan proposed by one ensemble member.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VisualActionPlan {
    pub member_id: usize,
    pub path_id: usize,
    pub node_sequence: Vec<usize>,
    /// Node centroids from start to goal.
    pub latent_plan: Vec<LatentVector>,
    /// Edge mean actions, one per hop.
    pub action_plan: Vec<Action>,
    /// Decoded node centroids.
    pub visual_plan: Vec<Observation>,
    /// Sorted union of the node compositions.
    pub composition_union: Vec<usize>,
    /// Composition of each node of `node_sequence`.
    #[serde(skip)]
    pub node_compositions: Vec<Arc<[usize]>>,
}

impl VisualActionPlan {
    /// Number of actions.
    pub fn len(&self) -> usize {
        self.action_plan.len()
    }

    pub fn is_zero_length(&self) -> bool {
        self.action_plan.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_zero_length()
    }
}

/// All plans of one member for one query.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanSet {
    pub member_id: usize,
    pub plans: Vec<VisualActionPlan>,
    /// The shortest-path enumeration hit its cap.
    pub truncated: bool,
}

impl PlanSet {
    pub fn empty(member_id: usize) -> Self {
        PlanSet { member_id, plans: Vec::new(), truncated: false }
    }

    pub fn len(&self) -> usize {
        self.plans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plans.is_empty()
    }
}

/// Node whose centroid is nearest to `z`; ties go to the lowest node id.
pub fn nearest_node(roadmap: &Roadmap, z: &LatentVector) -> Result<usize, PlanError> {
    let mut best: Option<(f64, usize)> = None;
    for n in &roadmap.nodes {
        let d = n.centroid.squared_distance(z);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, n.node_id));
        }
    }
    best.map(|(_, id)| id).ok_or(PlanError::EmptyRoadmap)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShortestPaths {
    /// Minimal-hop paths in lexicographic order of node ids.
    pub paths: Vec<Vec<usize>>,
    /// More than `max_paths` shortest paths exist.
    pub truncated: bool,
}

/// Every minimal-hop path from `src` to `dst` of `roadmap`, respecting edge direction.
pub fn all_shortest_paths(
    roadmap: &Roadmap,
    src: usize,
    dst: usize,
    max_paths: usize,
) -> Result<ShortestPaths, PlanError> {
    shortest_paths_in(&roadmap.successors(), src, dst, max_paths)
}

/// As [`all_shortest_paths`] over sorted successor lists.
///
/// Breadth-first layering from `src` records shortest-path predecessors; a
/// backward pass from `dst` marks the nodes lying on some shortest path, and a
/// forward depth-first walk over those nodes emits paths in lexicographic order.
pub fn shortest_paths_in(
    successors: &[Vec<usize>],
    src: usize,
    dst: usize,
    max_paths: usize,
) -> Result<ShortestPaths, PlanError> {
    let n = successors.len();
    for v in [src, dst] {
        if v >= n {
            return Err(PlanError::UnknownNode(v));
        }
    }
    if src == dst {
        return Ok(ShortestPaths { paths: vec![vec![src]], truncated: false });
    }
    let mut dist = vec![usize::MAX; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    dist[src] = 0;
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        if dist[u] >= dist[dst] {
            break;
        }
        for &v in &successors[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
            if dist[v] == dist[u] + 1 {
                preds[v].push(u);
            }
        }
    }
    if dist[dst] == usize::MAX {
        return Err(PlanError::NoPath { src, dst });
    }

    let mut useful = vec![false; n];
    useful[dst] = true;
    let mut back = vec![dst];
    while let Some(v) = back.pop() {
        for &u in &preds[v] {
            if !useful[u] {
                useful[u] = true;
                back.push(u);
            }
        }
    }

    let mut out = ShortestPaths { paths: Vec::new(), truncated: false };
    let mut path = vec![src];
    extend_paths(successors, &dist, &useful, dst, max_paths, &mut path, &mut out);
    Ok(out)
}

fn extend_paths(
    successors: &[Vec<usize>],
    dist: &[usize],
    useful: &[bool],
    dst: usize,
    max_paths: usize,
    path: &mut Vec<usize>,
    out: &mut ShortestPaths,
) {
    let u = *path.last().expect("path starts at src");
    if u == dst {
        if out.paths.len() == max_paths {
            out.truncated = true;
        } else {
            out.paths.push(path.clone());
        }
        return;
    }
    let mut next: Vec<usize> = successors[u].iter().copied().filter(|&v| useful[v] && dist[v] == dist[u] + 1).collect();
    next.sort_unstable();
    next.dedup();
    for v in next {
        if out.truncated {
            return;
        }
        path.push(v);
        extend_paths(successors, dist, useful, dst, max_paths, path, out);
        path.pop();
    }
}

/// One ensemble member: a mapping module with a roadmap built in its latent space.
#[derive(Clone, Debug)]
pub struct Slsr {
    member_id: usize,
    module: Arc<MappingModule>,
    roadmap: Roadmap,
    successors: Vec<Vec<usize>>,
    decoded: Vec<usize>,
    compositions: Vec<Arc<[usize]>>,
}

impl Slsr {
    pub fn new(member_id: usize, module: Arc<MappingModule>, roadmap: Roadmap) -> Self {
        let successors = roadmap.successors();
        let decoded = roadmap.nodes.iter().map(|n| module.decode_position(&n.centroid)).collect();
        let compositions = roadmap.nodes.iter().map(|n| Arc::from(n.composition.as_slice())).collect();
        Slsr { member_id, module, roadmap, successors, decoded, compositions }
    }

    pub fn build(
        member_id: usize,
        dataset: &Dataset,
        module: Arc<MappingModule>,
        config: &RoadmapConfig,
    ) -> Result<Self, RoadmapError> {
        let roadmap = build_roadmap(dataset, &module, config)?;
        Ok(Slsr::new(member_id, module, roadmap))
    }

    pub fn member_id(&self) -> usize {
        self.member_id
    }

    pub fn module(&self) -> &MappingModule {
        &self.module
    }

    pub fn roadmap(&self) -> &Roadmap {
        &self.roadmap
    }

    /// Shortest plans from `start` to `goal`; empty when no path exists.
    pub fn plan(&self, start: &Observation, goal: &Observation, max_paths: usize) -> PlanSet {
        let Ok(src) = nearest_node(&self.roadmap, &self.module.encode(start)) else {
            return PlanSet::empty(self.member_id);
        };
        let dst = nearest_node(&self.roadmap, &self.module.encode(goal)).expect("roadmap is nonempty");
        let Ok(found) = shortest_paths_in(&self.successors, src, dst, max_paths) else {
            return PlanSet::empty(self.member_id);
        };
        let plans = found.paths.into_iter().enumerate().map(|(j, nodes)| self.assemble(j, nodes)).collect();
        PlanSet { member_id: self.member_id, plans, truncated: found.truncated }
    }

    fn assemble(&self, path_id: usize, nodes: Vec<usize>) -> VisualActionPlan {
        let action_plan = nodes
            .windows(2)
            .map(|w| self.roadmap.edge(w[0], w[1]).expect("paths follow roadmap edges").mean_action)
            .collect();
        let node_compositions: Vec<Arc<[usize]>> = nodes.iter().map(|&n| self.compositions[n].clone()).collect();
        let mut composition_union: Vec<usize> = node_compositions.iter().flat_map(|c| c.iter().copied()).collect();
        composition_union.sort_unstable();
        composition_union.dedup();
        VisualActionPlan {
            member_id: self.member_id,
            path_id,
            latent_plan: nodes.iter().map(|&n| self.roadmap.nodes[n].centroid.clone()).collect(),
            visual_plan: nodes.iter().map(|&n| self.module.train_observations()[self.decoded[n]].clone()).collect(),
            action_plan,
            composition_union,
            node_compositions,
            node_sequence: nodes,
        }
    }
}

/// Plans of `member` between `start` and `goal`.
pub fn plan_member(member: &Slsr, start: &Observation, goal: &Observation, max_paths: usize) -> PlanSet {
    member.plan(start, goal, max_paths)
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Roadmap(#[from] RoadmapError),
}

/// One member per seed, each with its own module and training subset.
pub fn build_members(
    dataset: &Dataset,
    seeds: &[u64],
    mapping: &MappingConfig,
    roadmap: &RoadmapConfig,
) -> Result<Vec<Slsr>, BuildError> {
    seeds
        .par_iter()
        .enumerate()
        .map(|(i, &seed)| {
            let module = Arc::new(make_module(dataset, seed, mapping)?);
            Ok(Slsr::build(i, dataset, module, roadmap)?)
        })
        .collect()
}

/// One shared module with one roadmap per `c_max` value.
pub fn build_cmax_members(
    dataset: &Dataset,
    seed: u64,
    c_max_values: &[usize],
    mapping: &MappingConfig,
    roadmap: &RoadmapConfig,
) -> Result<Vec<Slsr>, BuildError> {
    let module = Arc::new(make_module(dataset, seed, mapping)?);
    c_max_values
        .par_iter()
        .enumerate()
        .map(|(i, &c_max)| Ok(Slsr::build(i, dataset, module.clone(), &RoadmapConfig { c_max, ..*roadmap })?))
        .collect()
}
