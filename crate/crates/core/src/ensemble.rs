//! Plan similarity measures and majority-similarity plan selection.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::planner::{PlanSet, VisualActionPlan};
use crate::task::Action;

/// Plan similarity used inside the selection score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// Cosine action similarity plus Jaccard node similarity.
    #[default]
    Sum,
    Cosine,
    Jaccard,
    /// Negative euclidean distance between equal-length action plans.
    Euclid,
    /// Negative weighted edit distance between action sequences.
    Edit,
    /// Summed positionwise Jaccard of node compositions for equal-length plans.
    Indiv,
}

impl Measure {
    pub const ALL: [Measure; 6] =
        [Measure::Sum, Measure::Cosine, Measure::Jaccard, Measure::Euclid, Measure::Edit, Measure::Indiv];

    pub fn tag(self) -> &'static str {
        match self {
            Measure::Sum => "sum",
            Measure::Cosine => "cosine",
            Measure::Jaccard => "jaccard",
            Measure::Euclid => "euclid",
            Measure::Edit => "edit",
            Measure::Indiv => "indiv",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Measure::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| format!("unknown measure {s:?}; expected one of sum, cosine, jaccard, euclid, edit, indiv"))
    }
}

/// Costs of the action edit distance. Two actions match when their distance is below `tau`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EditCosts {
    pub insertion: f64,
    pub deletion: f64,
    pub substitution: f64,
    pub tau: f64,
}

impl Default for EditCosts {
    fn default() -> Self {
        EditCosts { insertion: 0.5, deletion: 1.0, substitution: 1.0, tau: 0.5 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimilarityConfig {
    pub measure: Measure,
    pub edit: EditCosts,
}

impl SimilarityConfig {
    pub fn with_measure(measure: Measure) -> Self {
        SimilarityConfig { measure, ..Default::default() }
    }
}

/// Actions flattened as `(p_x, p_y, r_x, r_y)` per step.
#[derive(Clone, Debug, PartialEq)]
pub struct CollapsedActionVector(pub Vec<f64>);

impl CollapsedActionVector {
    pub fn collapse(actions: &[Action]) -> Self {
        CollapsedActionVector(actions.iter().flat_map(Action::to_array).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Collapses both action plans and zero-pads the shorter one at the tail.
pub fn preprocess_action_pair(a: &[Action], b: &[Action]) -> (CollapsedActionVector, CollapsedActionVector) {
    let mut ca = CollapsedActionVector::collapse(a);
    let mut cb = CollapsedActionVector::collapse(b);
    let len = ca.len().max(cb.len());
    ca.0.resize(len, 0.0);
    cb.0.resize(len, 0.0);
    (ca, cb)
}

/// `(1 + cos) / 2` of two collapsed vectors of equal length.
///
/// Two zero vectors are fully similar; a zero vector against a nonzero one is
/// fully dissimilar.
pub fn action_sim_cosine(a: &CollapsedActionVector, b: &CollapsedActionVector) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    cosine_from_parts(dot(&a.0, &b.0), dot(&a.0, &a.0), dot(&b.0, &b.0))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// sqrt(fl(x * x)) == x for finite positive x, so identical vectors give exactly 1.
fn cosine_from_parts(dot: f64, norm2_a: f64, norm2_b: f64) -> f64 {
    match (norm2_a == 0.0, norm2_b == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        (false, false) => {
            let cos = (dot / (norm2_a * norm2_b).sqrt()).clamp(-1.0, 1.0);
            0.5 * (1.0 + cos)
        }
    }
}

/// `|a ∩ b| / |a ∪ b|` of two sorted, deduplicated index sets; two empty sets give 1.
pub fn node_sim_jaccard(a: &[usize], b: &[usize]) -> f64 {
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - common;
    if union == 0 {
        1.0
    } else {
        common as f64 / union as f64
    }
}

/// Negative euclidean distance between collapsed plans; `None` when the lengths differ.
pub fn action_sim_euclid(a: &[Action], b: &[Action]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    let d2: f64 = a
        .iter()
        .zip(b)
        .flat_map(|(x, y)| {
            let (x, y) = (x.to_array(), y.to_array());
            (0..4).map(move |c| (x[c] - y[c]) * (x[c] - y[c]))
        })
        .sum();
    Some(-d2.sqrt())
}

fn actions_match(a: &Action, b: &Action, tau: f64) -> bool {
    let (a, b) = (a.to_array(), b.to_array());
    let d2: f64 = (0..4).map(|c| (a[c] - b[c]) * (a[c] - b[c])).sum();
    d2.sqrt() < tau
}

/// Negative minimal cost of editing `a` into `b`.
pub fn action_sim_edit(a: &[Action], b: &[Action], costs: &EditCosts) -> f64 {
    let w = b.len() + 1;
    let mut prev: Vec<f64> = (0..w).map(|j| j as f64 * costs.insertion).collect();
    let mut cur = vec![0.0; w];
    for (i, ai) in a.iter().enumerate() {
        cur[0] = (i + 1) as f64 * costs.deletion;
        for (j, bj) in b.iter().enumerate() {
            let diag = prev[j] + if actions_match(ai, bj, costs.tau) { 0.0 } else { costs.substitution };
            cur[j + 1] = diag.min(prev[j + 1] + costs.deletion).min(cur[j] + costs.insertion);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    -prev[b.len()]
}

/// Sum of positionwise Jaccard similarities; `None` when the node counts differ.
pub fn node_sim_indiv<S: AsRef<[usize]>>(a: &[S], b: &[S]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    Some(a.iter().zip(b).map(|(x, y)| node_sim_jaccard(x.as_ref(), y.as_ref())).sum())
}

/// Similarity of two plans under one measure, with its action and node parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairSimilarity {
    pub value: f64,
    pub action: Option<f64>,
    pub node: Option<f64>,
}

/// Similarity of `a` against `b`; `None` when the measure is undefined for the pair.
pub fn plan_similarity(
    a: &VisualActionPlan,
    b: &VisualActionPlan,
    config: &SimilarityConfig,
) -> Option<PairSimilarity> {
    let action_only = |v: f64| PairSimilarity { value: v, action: Some(v), node: None };
    let node_only = |v: f64| PairSimilarity { value: v, action: None, node: Some(v) };
    match config.measure {
        Measure::Sum => {
            let (ca, cb) = preprocess_action_pair(&a.action_plan, &b.action_plan);
            let su = action_sim_cosine(&ca, &cb);
            let sn = node_sim_jaccard(&a.composition_union, &b.composition_union);
            Some(PairSimilarity { value: su + sn, action: Some(su), node: Some(sn) })
        }
        Measure::Cosine => {
            let (ca, cb) = preprocess_action_pair(&a.action_plan, &b.action_plan);
            Some(action_only(action_sim_cosine(&ca, &cb)))
        }
        Measure::Jaccard => Some(node_only(node_sim_jaccard(&a.composition_union, &b.composition_union))),
        Measure::Euclid => action_sim_euclid(&a.action_plan, &b.action_plan).map(action_only),
        Measure::Edit => Some(action_only(action_sim_edit(&a.action_plan, &b.action_plan, &config.edit))),
        Measure::Indiv => node_sim_indiv(&a.node_compositions, &b.node_compositions).map(node_only),
    }
}

/// Position of a plan within the members' plan sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PlanRef {
    /// Index into the slice of plan sets.
    pub member: usize,
    pub plan: usize,
}

/// Best match of one plan within another member's plans.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BestMatch {
    pub member: usize,
    /// `None` when that member had no plan with a defined similarity.
    pub plan: Option<usize>,
    /// Contribution to the cumulative score.
    pub value: f64,
    pub action: Option<f64>,
    pub node: Option<f64>,
}

/// One row of the score table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreRow {
    pub plan: PlanRef,
    pub score: f64,
    pub best: Vec<BestMatch>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Selection {
    /// Maximizers of the cumulative score, in member then plan order.
    pub selected: Vec<PlanRef>,
    /// Rows in member then plan order.
    pub scores: Vec<ScoreRow>,
}

impl Selection {
    pub fn plans<'a>(&self, sets: &'a [PlanSet]) -> Vec<&'a VisualActionPlan> {
        self.selected.iter().map(|r| &sets[r.member].plans[r.plan]).collect()
    }

    pub fn score_of(&self, r: PlanRef) -> Option<f64> {
        self.scores.iter().find(|row| row.plan == r).map(|row| row.score)
    }
}

/// Absolute tolerance for tying at the maximal score.
pub const SCORE_TOLERANCE: f64 = 1e-9;

enum Prepared {
    Cosine { collapsed: Vec<f64>, norm2: f64 },
    None,
}

fn prepare(plan: &VisualActionPlan, measure: Measure) -> Prepared {
    match measure {
        Measure::Sum | Measure::Cosine => {
            let collapsed = CollapsedActionVector::collapse(&plan.action_plan).0;
            let norm2 = dot(&collapsed, &collapsed);
            Prepared::Cosine { collapsed, norm2 }
        }
        _ => Prepared::None,
    }
}

fn similarity_prepared(
    a: (&VisualActionPlan, &Prepared),
    b: (&VisualActionPlan, &Prepared),
    config: &SimilarityConfig,
) -> Option<PairSimilarity> {
    match (a.1, b.1) {
        (Prepared::Cosine { collapsed: ca, norm2: na }, Prepared::Cosine { collapsed: cb, norm2: nb }) => {
            // Zero padding adds nothing to the dot product or the norms.
            let su = cosine_from_parts(dot(ca, cb), *na, *nb);
            if config.measure == Measure::Cosine {
                return Some(PairSimilarity { value: su, action: Some(su), node: None });
            }
            let sn = node_sim_jaccard(&a.0.composition_union, &b.0.composition_union);
            Some(PairSimilarity { value: su + sn, action: Some(su), node: Some(sn) })
        }
        _ => plan_similarity(a.0, b.0, config),
    }
}

/// Scores every plan against the other members' plans and keeps the best-scoring ones.
///
/// Each other member contributes its best similarity to the plan, or 0 when it
/// offers no plan with a defined similarity.
pub fn select_plans(sets: &[PlanSet], config: &SimilarityConfig) -> Selection {
    let prepared: Vec<Vec<Prepared>> =
        sets.iter().map(|s| s.plans.iter().map(|p| prepare(p, config.measure)).collect()).collect();
    let mut scores = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        for (j, plan) in set.plans.iter().enumerate() {
            let mut best = Vec::with_capacity(sets.len().saturating_sub(1));
            for (k, other) in sets.iter().enumerate() {
                if k == i {
                    continue;
                }
                let mut top: Option<(usize, PairSimilarity)> = None;
                for (l, cand) in other.plans.iter().enumerate() {
                    let Some(s) = similarity_prepared((plan, &prepared[i][j]), (cand, &prepared[k][l]), config) else {
                        continue;
                    };
                    if top.is_none_or(|(_, t)| s.value > t.value) {
                        top = Some((l, s));
                    }
                }
                best.push(match top {
                    Some((l, s)) => {
                        BestMatch { member: k, plan: Some(l), value: s.value, action: s.action, node: s.node }
                    }
                    None => BestMatch { member: k, plan: None, value: 0.0, action: None, node: None },
                });
            }
            let score = best.iter().map(|b| b.value).sum();
            scores.push(ScoreRow { plan: PlanRef { member: i, plan: j }, score, best });
        }
    }
    let max = scores.iter().map(|r| r.score).fold(f64::NEG_INFINITY, f64::max);
    let selected = scores.iter().filter(|r| r.score >= max - SCORE_TOLERANCE).map(|r| r.plan).collect();
    Selection { selected, scores }
}

/// Every plan of every member.
pub fn naive_select(sets: &[PlanSet]) -> Vec<PlanRef> {
    sets.iter().enumerate().flat_map(|(i, s)| (0..s.plans.len()).map(move |j| PlanRef { member: i, plan: j })).collect()
}
