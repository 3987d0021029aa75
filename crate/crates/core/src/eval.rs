//! Plan quality metrics and the member-count, c_max and similarity sweeps.
//!
//! Every sweep computes each member's plans once per evaluation pair and
//! judges all systems on them. Pairs run in parallel; results are collected in
//! pair order, so output never depends on the thread count.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::{naive_select, select_plans, Measure, PlanRef, SimilarityConfig};
use crate::keyed::KeyHasher;
use crate::planner::{PlanSet, Slsr};
use crate::task::{sample_eval_pair_with_id, verify_plan, Observation, SystemState, Task};

pub const CSV_HEADER: [&str; 11] = [
    "experiment",
    "system",
    "m",
    "c_max",
    "measure",
    "seed",
    "pct_all",
    "pct_any",
    "pct_exists",
    "n_pairs",
    "n_truncated",
];

/// A holdout start/goal query.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalPair {
    pub pair_id: usize,
    pub start: Observation,
    pub goal: Observation,
}

/// `n` feasible holdout pairs drawn independently per pair id.
pub fn eval_pairs(task: Task, harness_seed: u64, n: usize) -> Vec<EvalPair> {
    (0..n)
        .map(|pair_id| {
            let seed = KeyHasher::new("eval-pair").write_u64(harness_seed).write_u64(pair_id as u64).finish();
            let (start, goal) = sample_eval_pair_with_id(task, seed, pair_id);
            EvalPair { pair_id, start, goal }
        })
        .collect()
}

/// A planning system built from the evaluated members.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum System {
    /// The member at this index.
    Single(usize),
    /// Similarity selection over the first `m` members.
    Ensemble { m: usize, similarity: SimilarityConfig },
    /// All plans of the first `m` members.
    Naive { m: usize },
}

impl System {
    pub fn label(&self) -> String {
        match self {
            System::Single(i) => format!("member{i}"),
            System::Ensemble { m, similarity } => format!("ens(m={m},{})", similarity.measure),
            System::Naive { m } => format!("naive(m={m})"),
        }
    }

    fn member_count(&self) -> usize {
        match *self {
            System::Single(i) => i + 1,
            System::Ensemble { m, .. } | System::Naive { m } => m,
        }
    }
}

/// Outcome of one system on one pair.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalRecord {
    pub pair_id: usize,
    pub start_state: SystemState,
    pub goal_state: SystemState,
    pub n_plans: usize,
    pub all_correct: bool,
    pub any_correct: bool,
    pub path_found: bool,
    pub plan_lengths: Vec<usize>,
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricSummary {
    pub label: String,
    pub pct_all: f64,
    pub pct_any: f64,
    pub pct_exists: f64,
    pub n_pairs: usize,
    pub n_truncated: usize,
}

impl MetricSummary {
    pub fn from_records(label: impl Into<String>, records: &[EvalRecord]) -> Self {
        let n = records.len();
        let pct = |f: fn(&EvalRecord) -> bool| {
            if n == 0 {
                0.0
            } else {
                100.0 * records.iter().filter(|r| f(r)).count() as f64 / n as f64
            }
        };
        MetricSummary {
            label: label.into(),
            pct_all: pct(|r| r.all_correct),
            pct_any: pct(|r| r.any_correct),
            pct_exists: pct(|r| r.path_found),
            n_pairs: n,
            n_truncated: records.iter().filter(|r| r.truncated).count(),
        }
    }
}

struct PairPlans {
    sets: Vec<PlanSet>,
    correct: Vec<Vec<bool>>,
}

fn plan_pair(members: &[Slsr], pair: &EvalPair, max_paths: usize) -> PairPlans {
    let sets: Vec<PlanSet> = members.iter().map(|mbr| mbr.plan(&pair.start, &pair.goal, max_paths)).collect();
    let correct =
        sets.iter().map(|s| s.plans.iter().map(|p| verify_plan(&pair.start, &pair.goal, p)).collect()).collect();
    PairPlans { sets, correct }
}

fn judge(system: &System, plans: &PairPlans, pair: &EvalPair) -> EvalRecord {
    let (chosen, truncated): (Vec<PlanRef>, bool) = match *system {
        System::Single(i) => {
            ((0..plans.sets[i].len()).map(|j| PlanRef { member: i, plan: j }).collect(), plans.sets[i].truncated)
        }
        System::Ensemble { m, similarity } => {
            (select_plans(&plans.sets[..m], &similarity).selected, plans.sets[..m].iter().any(|s| s.truncated))
        }
        System::Naive { m } => (naive_select(&plans.sets[..m]), plans.sets[..m].iter().any(|s| s.truncated)),
    };
    let n_correct = chosen.iter().filter(|r| plans.correct[r.member][r.plan]).count();
    EvalRecord {
        pair_id: pair.pair_id,
        start_state: pair.start.state.clone(),
        goal_state: pair.goal.state.clone(),
        n_plans: chosen.len(),
        all_correct: !chosen.is_empty() && n_correct == chosen.len(),
        any_correct: n_correct > 0,
        path_found: !chosen.is_empty(),
        plan_lengths: chosen.iter().map(|r| plans.sets[r.member].plans[r.plan].len()).collect(),
        truncated,
    }
}

/// Records and summary of each system, in the order given.
///
/// Panics if a system refers to more members than `members` holds.
pub fn evaluate_systems(
    members: &[Slsr],
    pairs: &[EvalPair],
    systems: &[System],
    max_paths: usize,
) -> Vec<(Vec<EvalRecord>, MetricSummary)> {
    let needed = systems.iter().map(System::member_count).max().unwrap_or(0);
    assert!(needed <= members.len(), "system needs {needed} members, {} available", members.len());
    let members = &members[..needed];
    let per_pair: Vec<Vec<EvalRecord>> = pairs
        .par_iter()
        .map(|pair| {
            let plans = plan_pair(members, pair, max_paths);
            systems.iter().map(|s| judge(s, &plans, pair)).collect()
        })
        .collect();
    let mut by_system: Vec<Vec<EvalRecord>> = systems.iter().map(|_| Vec::with_capacity(pairs.len())).collect();
    for records in per_pair {
        for (k, r) in records.into_iter().enumerate() {
            by_system[k].push(r);
        }
    }
    by_system
        .into_iter()
        .zip(systems)
        .map(|(records, s)| {
            let summary = MetricSummary::from_records(s.label(), &records);
            (records, summary)
        })
        .collect()
}

pub fn evaluate_system(
    members: &[Slsr],
    pairs: &[EvalPair],
    system: System,
    max_paths: usize,
) -> (Vec<EvalRecord>, MetricSummary) {
    evaluate_systems(members, pairs, &[system], max_paths).pop().expect("one system in, one result out")
}

/// One line of sweep output.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub experiment: String,
    pub system: String,
    pub m: usize,
    pub c_max: String,
    pub measure: String,
    pub seed: u64,
    pub pct_all: f64,
    pub pct_any: f64,
    pub pct_exists: f64,
    pub n_pairs: usize,
    pub n_truncated: usize,
}

impl CsvRow {
    fn from_summary(
        experiment: &str,
        system: &str,
        m: usize,
        c_max: String,
        measure: &str,
        seed: u64,
        s: &MetricSummary,
    ) -> Self {
        CsvRow {
            experiment: experiment.to_string(),
            system: system.to_string(),
            m,
            c_max,
            measure: measure.to_string(),
            seed,
            pct_all: s.pct_all,
            pct_any: s.pct_any,
            pct_exists: s.pct_exists,
            n_pairs: s.n_pairs,
            n_truncated: s.n_truncated,
        }
    }
}

/// Writes the header and rows; percentages use three decimals.
pub fn write_csv<W: Write>(rows: &[CsvRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in rows {
        out.write_record([
            r.experiment.clone(),
            r.system.clone(),
            r.m.to_string(),
            r.c_max.clone(),
            r.measure.clone(),
            r.seed.to_string(),
            format!("{:.3}", r.pct_all),
            format!("{:.3}", r.pct_any),
            format!("{:.3}", r.pct_exists),
            r.n_pairs.to_string(),
            r.n_truncated.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Settings shared by all sweeps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSettings {
    /// Seed of the evaluation pairs, reported in the `seed` column.
    pub harness_seed: u64,
    pub max_paths: usize,
    pub similarity: SimilarityConfig,
}

const NO_MEASURE: &str = "none";

fn cmax_label(members: &[Slsr]) -> String {
    let first = members.first().map(|m| m.roadmap().c_max);
    if members.iter().all(|m| Some(m.roadmap().c_max) == first) {
        first.map_or_else(String::new, |c| c.to_string())
    } else {
        "all".to_string()
    }
}

fn member_counts(n: usize) -> std::ops::RangeInclusive<usize> {
    n.min(3)..=n
}

/// Ensemble, naive and individual mean/min/max rows for every `m` from 3 to the member count.
pub fn sweep_members(members: &[Slsr], pairs: &[EvalPair], settings: &SweepSettings) -> Vec<CsvRow> {
    let ms: Vec<usize> = member_counts(members.len()).collect();
    let mut systems: Vec<System> = (0..members.len()).map(System::Single).collect();
    for &m in &ms {
        systems.push(System::Ensemble { m, similarity: settings.similarity });
        systems.push(System::Naive { m });
    }
    let results = evaluate_systems(members, pairs, &systems, settings.max_paths);
    let singles: Vec<&MetricSummary> = results[..members.len()].iter().map(|(_, s)| s).collect();
    let mut rows = Vec::new();
    let measure = settings.similarity.measure.tag();
    for (k, &m) in ms.iter().enumerate() {
        let c_max = cmax_label(&members[..m]);
        let (ens, naive) = (&results[members.len() + 2 * k].1, &results[members.len() + 2 * k + 1].1);
        let row = |system: &str, measure: &str, s: &MetricSummary| {
            CsvRow::from_summary("members", system, m, c_max.clone(), measure, settings.harness_seed, s)
        };
        rows.push(row("ens", measure, ens));
        rows.push(row("naive", NO_MEASURE, naive));
        for (name, stat) in individual_stats(&singles[..m]) {
            rows.push(row(name, NO_MEASURE, &stat));
        }
    }
    rows
}

fn individual_stats(singles: &[&MetricSummary]) -> [(&'static str, MetricSummary); 3] {
    let n = singles.len() as f64;
    let column = |f: fn(&MetricSummary) -> f64| singles.iter().map(|s| f(s)).collect::<Vec<f64>>();
    let cols =
        [column(|s| s.pct_all), column(|s| s.pct_any), column(|s| s.pct_exists), column(|s| s.n_truncated as f64)];
    let stat = |label: &str, agg: &dyn Fn(&[f64]) -> f64| MetricSummary {
        label: label.to_string(),
        pct_all: agg(&cols[0]),
        pct_any: agg(&cols[1]),
        pct_exists: agg(&cols[2]),
        n_pairs: singles.first().map_or(0, |s| s.n_pairs),
        n_truncated: agg(&cols[3]).round() as usize,
    };
    [
        ("individual_mean", stat("individual_mean", &|c| c.iter().sum::<f64>() / n)),
        ("individual_min", stat("individual_min", &|c| c.iter().copied().fold(f64::INFINITY, f64::min))),
        ("individual_max", stat("individual_max", &|c| c.iter().copied().fold(f64::NEG_INFINITY, f64::max))),
    ]
}

/// One row per member (each with its own `c_max`) plus the ensemble over all of them.
pub fn sweep_cmax(members: &[Slsr], pairs: &[EvalPair], settings: &SweepSettings) -> Vec<CsvRow> {
    let mut systems: Vec<System> = (0..members.len()).map(System::Single).collect();
    systems.push(System::Ensemble { m: members.len(), similarity: settings.similarity });
    let results = evaluate_systems(members, pairs, &systems, settings.max_paths);
    let mut rows: Vec<CsvRow> = members
        .iter()
        .zip(&results)
        .map(|(mbr, (_, s))| {
            let c_max = mbr.roadmap().c_max.to_string();
            CsvRow::from_summary("cmax", "individual", 1, c_max, NO_MEASURE, settings.harness_seed, s)
        })
        .collect();
    let ens = &results[members.len()].1;
    rows.push(CsvRow::from_summary(
        "cmax",
        "ens",
        members.len(),
        cmax_label(members),
        settings.similarity.measure.tag(),
        settings.harness_seed,
        ens,
    ));
    rows
}

/// Ensemble rows for every measure and every `m` from 3 to the member count.
pub fn sweep_similarity(members: &[Slsr], pairs: &[EvalPair], settings: &SweepSettings) -> Vec<CsvRow> {
    let mut systems = Vec::new();
    for m in member_counts(members.len()) {
        for measure in Measure::ALL {
            systems.push(System::Ensemble { m, similarity: SimilarityConfig { measure, ..settings.similarity } });
        }
    }
    let results = evaluate_systems(members, pairs, &systems, settings.max_paths);
    systems
        .iter()
        .zip(&results)
        .map(|(sys, (_, s))| {
            let System::Ensemble { m, similarity } = sys else { unreachable!("only ensembles are swept") };
            CsvRow::from_summary(
                "similarity",
                "ens",
                *m,
                cmax_label(&members[..*m]),
                similarity.measure.tag(),
                settings.harness_seed,
                s,
            )
        })
        .collect()
}

/// Ranks starting at 1, ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation; `None` when either series is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}
