//! Latent space roadmap construction.
//!
//! Training observations are clustered by single linkage at a radius
//! `epsilon`; every cluster with at least `min_cluster_size` members becomes a
//! node and every action tuple joining two distinct surviving clusters
//! contributes its action to the edge between them. The radius is swept and
//! the roadmap with the most edges whose weakly connected component count stays
//! within `c_max` wins.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mapping::{squared_distance, LatentVector, MappingModule};
use crate::task::{Action, Dataset};
use crate::union_find::UnionFind;

pub const ROADMAP_FORMAT_VERSION: u32 = 1;

/// Smallest radius ever evaluated; keeps `epsilon > 0` when encodings coincide.
const MIN_EPSILON: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadmapConfig {
    pub c_max: usize,
    pub min_cluster_size: usize,
    pub n_eps: usize,
    pub directed: bool,
}

impl RoadmapConfig {
    pub fn new(c_max: usize, directed: bool) -> Self {
        RoadmapConfig { c_max, min_cluster_size: 1, n_eps: 50, directed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadmapNode {
    pub node_id: usize,
    pub centroid: LatentVector,
    /// Sorted indices of the training observations in this node.
    pub composition: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoadmapEdge {
    pub from: usize,
    pub to: usize,
    pub mean_action: Action,
    pub support_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Roadmap {
    pub directed: bool,
    pub c_max: usize,
    pub epsilon_used: f64,
    pub nodes: Vec<RoadmapNode>,
    /// Sorted by `(from, to)`; at most one edge per ordered node pair.
    pub edges: Vec<RoadmapEdge>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoadmapFile {
    directed: bool,
    c_max: usize,
    epsilon_used: f64,
    nodes: Vec<RoadmapNode>,
    edges: Vec<RoadmapEdge>,
    format_version: u32,
}

#[derive(Debug, Error)]
pub enum RoadmapError {
    #[error("c_max must be at least 1")]
    InvalidCmax,
    #[error("no swept epsilon satisfies the component bound")]
    NoFeasibleEpsilon,
    #[error("malformed roadmap: {0}")]
    Malformed(String),
}

impl Roadmap {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(&RoadmapFile {
            directed: self.directed,
            c_max: self.c_max,
            epsilon_used: self.epsilon_used,
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
            format_version: ROADMAP_FORMAT_VERSION,
        })
    }

    pub fn from_json(s: &str) -> Result<Self, RoadmapError> {
        let f: RoadmapFile = serde_json::from_str(s).map_err(|e| RoadmapError::Malformed(e.to_string()))?;
        if f.format_version != ROADMAP_FORMAT_VERSION {
            return Err(RoadmapError::Malformed(format!("unsupported format version {}", f.format_version)));
        }
        let n = f.nodes.len();
        if f.nodes.iter().enumerate().any(|(i, node)| node.node_id != i) {
            return Err(RoadmapError::Malformed("node ids must be 0..n in order".into()));
        }
        if f.edges.iter().any(|e| e.from >= n || e.to >= n || e.from == e.to || e.support_count == 0) {
            return Err(RoadmapError::Malformed("edge endpoints must be distinct valid nodes".into()));
        }
        Ok(Roadmap {
            directed: f.directed,
            c_max: f.c_max,
            epsilon_used: f.epsilon_used,
            nodes: f.nodes,
            edges: f.edges,
        })
    }

    pub fn edge(&self, from: usize, to: usize) -> Option<&RoadmapEdge> {
        self.edges.binary_search_by(|e| (e.from, e.to).cmp(&(from, to))).ok().map(|i| &self.edges[i])
    }

    /// Sorted successor lists following edge direction.
    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            adj[e.from].push(e.to);
        }
        adj
    }
}

/// Number of components when edge direction is ignored.
pub fn wcc_count(roadmap: &Roadmap) -> usize {
    let mut uf = UnionFind::new(roadmap.nodes.len());
    for e in &roadmap.edges {
        uf.union(e.from, e.to);
    }
    uf.set_count()
}

/// Single-linkage partition: components of the graph joining points at
/// distance `<= epsilon`. Labels are numbered by first appearance.
pub fn cluster_at(points: &[LatentVector], epsilon: f64) -> Vec<usize> {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let eps2 = epsilon * epsilon;
    let mut uf = UnionFind::new(points.len());
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i].squared_distance(&points[j]) <= eps2 {
                uf.union(i, j);
            }
        }
    }
    uf.labels()
}

/// Minimum spanning tree edges `(weight, i, j)` by Prim's algorithm, sorted by weight.
///
/// Clustering at `epsilon` equals the components of the MST edges of weight
/// `<= epsilon`, which makes the sweep linear per radius.
pub(crate) fn minimum_spanning_tree(points: &[LatentVector]) -> Vec<(f64, usize, usize)> {
    let n = points.len();
    if n < 2 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut link = vec![0usize; n];
    let mut edges = Vec::with_capacity(n - 1);
    let mut current = 0;
    in_tree[0] = true;
    for _ in 1..n {
        let cp = &points[current].0;
        let mut next = usize::MAX;
        let mut next_d = f64::INFINITY;
        for j in 0..n {
            if in_tree[j] {
                continue;
            }
            let d = squared_distance(cp, &points[j].0);
            if d < best[j] {
                best[j] = d;
                link[j] = current;
            }
            if best[j] < next_d {
                next_d = best[j];
                next = j;
            }
        }
        in_tree[next] = true;
        edges.push((next_d.sqrt(), link[next].min(next), link[next].max(next)));
        current = next;
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    edges
}

/// Linear-interpolated quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Radii evaluated by the sweep: `n` quantile levels spread evenly over the
/// 5th to 95th percentile of the spanning-tree edge lengths.
pub fn epsilon_sweep(mst_weights: &[f64], n: usize) -> Vec<f64> {
    if mst_weights.is_empty() {
        return vec![MIN_EPSILON];
    }
    let n = n.max(1);
    let mut eps: Vec<f64> = (0..n)
        .map(|k| {
            let q = if n == 1 { 0.5 } else { 0.05 + 0.9 * k as f64 / (n - 1) as f64 };
            quantile(mst_weights, q).max(MIN_EPSILON)
        })
        .collect();
    eps.dedup();
    eps
}

/// Inputs shared by every radius of one build.
struct BuildContext<'a> {
    latents: &'a [LatentVector],
    obs_index: &'a [usize],
    /// `(first position, second position, action)` of every action tuple.
    moves: Vec<(usize, usize, Action)>,
    config: RoadmapConfig,
}

impl BuildContext<'_> {
    fn assemble(&self, labels: &[usize], epsilon: f64) -> Roadmap {
        let n_clusters = labels.iter().max().map_or(0, |m| m + 1);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
        for (pos, &l) in labels.iter().enumerate() {
            members[l].push(pos);
        }
        // Labels follow first appearance over positions sorted by observation
        // index, so surviving clusters come out ordered by smallest member.
        let mut node_of_cluster = vec![usize::MAX; n_clusters];
        let mut nodes = Vec::new();
        for (cl, m) in members.iter().enumerate() {
            if m.len() < self.config.min_cluster_size.max(1) {
                continue;
            }
            node_of_cluster[cl] = nodes.len();
            nodes.push(RoadmapNode {
                node_id: nodes.len(),
                centroid: LatentVector::mean(m.iter().map(|&p| &self.latents[p])).expect("clusters are nonempty"),
                composition: m.iter().map(|&p| self.obs_index[p]).collect(),
            });
        }
        let mut acc: BTreeMap<(usize, usize), ([f64; 4], usize)> = BTreeMap::new();
        let mut add = |from: usize, to: usize, u: &Action| {
            let e = acc.entry((from, to)).or_insert(([0.0; 4], 0));
            for (s, v) in e.0.iter_mut().zip(u.to_array()) {
                *s += v;
            }
            e.1 += 1;
        };
        for (a, b, u) in &self.moves {
            let (na, nb) = (node_of_cluster[labels[*a]], node_of_cluster[labels[*b]]);
            if na == usize::MAX || nb == usize::MAX || na == nb {
                continue;
            }
            add(na, nb, u);
            if !self.config.directed {
                add(nb, na, &u.reversed());
            }
        }
        let edges = acc
            .into_iter()
            .map(|((from, to), (sum, count))| RoadmapEdge {
                from,
                to,
                mean_action: Action::from_array(sum.map(|s| s / count as f64)),
                support_count: count,
            })
            .collect();
        Roadmap { directed: self.config.directed, c_max: self.config.c_max, epsilon_used: epsilon, nodes, edges }
    }
}

/// One evaluated radius of the sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub wcc: usize,
}

/// Builds the roadmap of `module` over its training tuples.
pub fn build_roadmap(
    dataset: &Dataset,
    module: &MappingModule,
    config: &RoadmapConfig,
) -> Result<Roadmap, RoadmapError> {
    build_roadmap_traced(dataset, module, config).map(|(r, _)| r)
}

/// As [`build_roadmap`], also returning every evaluated sweep point.
pub fn build_roadmap_traced(
    dataset: &Dataset,
    module: &MappingModule,
    config: &RoadmapConfig,
) -> Result<(Roadmap, Vec<SweepPoint>), RoadmapError> {
    if config.c_max == 0 {
        return Err(RoadmapError::InvalidCmax);
    }
    let obs = module.train_observations();
    let latents = module.train_latents();
    let obs_index: Vec<usize> = obs.iter().map(|o| o.index).collect();
    let position = |index: usize| obs_index.binary_search(&index).expect("tuple observations are encoded");
    let moves = module
        .train_subset()
        .iter()
        .map(|&t| &dataset.tuples[t])
        .filter(|t| t.rho.is_action())
        .map(|t| (position(t.first.index), position(t.second.index), t.rho.u))
        .collect();
    let ctx = BuildContext { latents, obs_index: &obs_index, moves, config: *config };

    let mst = minimum_spanning_tree(latents);
    let weights: Vec<f64> = mst.iter().map(|e| e.0).collect();
    let sweep = epsilon_sweep(&weights, config.n_eps);

    let mut trace = Vec::new();
    let mut best = evaluate_sweep(&ctx, &mst, &sweep, &mut trace);
    if best.is_none() {
        // Extend towards the largest spanning-tree edge, where one cluster remains.
        let lo = *sweep.last().expect("sweep is nonempty");
        let hi = weights.last().copied().unwrap_or(MIN_EPSILON).max(lo);
        let n = config.n_eps.max(2);
        let extension: Vec<f64> = (1..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
        best = evaluate_sweep(&ctx, &mst, &extension, &mut trace);
    }
    best.map(|r| (r, trace)).ok_or(RoadmapError::NoFeasibleEpsilon)
}

fn evaluate_sweep(
    ctx: &BuildContext<'_>,
    mst: &[(f64, usize, usize)],
    radii: &[f64],
    trace: &mut Vec<SweepPoint>,
) -> Option<Roadmap> {
    let mut uf = UnionFind::new(ctx.latents.len());
    let mut next_edge = 0;
    let mut best: Option<Roadmap> = None;
    for &eps in radii {
        while next_edge < mst.len() && mst[next_edge].0 <= eps {
            uf.union(mst[next_edge].1, mst[next_edge].2);
            next_edge += 1;
        }
        let roadmap = ctx.assemble(&uf.labels(), eps);
        let wcc = wcc_count(&roadmap);
        trace.push(SweepPoint { epsilon: eps, n_nodes: roadmap.nodes.len(), n_edges: roadmap.edges.len(), wcc });
        // Radii ascend, so keeping only strict improvements prefers the smallest epsilon on ties.
        if wcc <= ctx.config.c_max && best.as_ref().is_none_or(|b| roadmap.edges.len() > b.edges.len()) {
            best = Some(roadmap);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyed::unit_vector;

    fn pts(coords: &[[f64; 2]]) -> Vec<LatentVector> {
        coords.iter().map(|c| LatentVector(c.to_vec())).collect()
    }

    #[test]
    fn close_points_share_a_cluster() {
        assert_eq!(cluster_at(&pts(&[[0.0, 0.0], [0.5, 0.0]]), 1.0), vec![0, 0]);
    }

    #[test]
    fn tiny_epsilon_gives_singletons() {
        let p = pts(&[[0.0, 0.0], [0.5, 0.0], [0.0, 0.7]]);
        assert_eq!(cluster_at(&p, 0.1), vec![0, 1, 2]);
    }

    #[test]
    fn single_linkage_chains() {
        let p: Vec<_> = (0..6).map(|i| LatentVector(vec![0.9 * i as f64, 0.0])).collect();
        assert_eq!(cluster_at(&p, 1.0), vec![0; 6]);
        // Brute-force union-find over the epsilon-ball graph.
        let mut uf = UnionFind::new(p.len());
        for i in 0..p.len() {
            for j in 0..p.len() {
                if p[i].distance(&p[j]) <= 1.0 {
                    uf.union(i, j);
                }
            }
        }
        assert_eq!(uf.set_count(), 1);
        assert!(p[0].distance(&p[5]) > 1.0);
    }

    #[test]
    fn spanning_tree_components_match_direct_clustering() {
        for seed in 0..20u64 {
            let p: Vec<_> = (0..40)
                .map(|i| {
                    let v = unit_vector(seed * 1000 + i, 4);
                    LatentVector(v.iter().map(|x| x * (1.0 + (i % 3) as f64)).collect())
                })
                .collect();
            let mst = minimum_spanning_tree(&p);
            assert_eq!(mst.len(), p.len() - 1);
            for eps in [0.2, 0.5, 0.9, 1.3, 2.0] {
                let mut uf = UnionFind::new(p.len());
                for &(w, i, j) in &mst {
                    if w <= eps {
                        uf.union(i, j);
                    }
                }
                assert_eq!(uf.labels(), cluster_at(&p, eps), "seed {seed} eps {eps}");
            }
        }
    }

    fn line_roadmap(n: usize, edges: &[(usize, usize)]) -> Roadmap {
        Roadmap {
            directed: true,
            c_max: 1,
            epsilon_used: 1.0,
            nodes: (0..n)
                .map(|i| RoadmapNode { node_id: i, centroid: LatentVector(vec![i as f64]), composition: vec![i] })
                .collect(),
            edges: edges
                .iter()
                .map(|&(from, to)| RoadmapEdge {
                    from,
                    to,
                    mean_action: Action::new([0.0; 2], [1.0, 1.0]),
                    support_count: 1,
                })
                .collect(),
        }
    }

    #[test]
    fn wcc_extremes() {
        assert_eq!(wcc_count(&line_roadmap(5, &[])), 5);
        let all: Vec<_> = (0..4).flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j))).collect();
        assert_eq!(wcc_count(&line_roadmap(4, &all)), 1);
        // Direction is ignored.
        assert_eq!(wcc_count(&line_roadmap(3, &[(0, 1), (2, 1)])), 1);
    }

    #[test]
    fn sweep_spans_percentiles() {
        let w: Vec<f64> = (0..101).map(f64::from).collect();
        let s = epsilon_sweep(&w, 50);
        assert_eq!(s.len(), 50);
        assert!((s[0] - 5.0).abs() < 1e-9 && (s[49] - 95.0).abs() < 1e-9);
        assert_eq!(epsilon_sweep(&[0.0, 0.0, 0.0], 50), vec![MIN_EPSILON]);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let r = line_roadmap(3, &[(0, 1), (1, 2)]);
        let back = Roadmap::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(back.edge(0, 1).is_some() && back.edge(1, 0).is_none());
        let bad = r.to_json().unwrap().replace(r#""to":2"#, r#""to":7"#);
        assert!(Roadmap::from_json(&bad).is_err());
    }
}
