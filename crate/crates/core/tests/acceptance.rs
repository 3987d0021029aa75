//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;
use std::time::{Duration, Instant};

use ens_lsr::ensemble::{
    action_sim_cosine, action_sim_edit, node_sim_jaccard, preprocess_action_pair, EditCosts, PlanRef,
};
use ens_lsr::eval::{eval_pairs, evaluate_system, evaluate_systems, spearman, sweep_cmax, sweep_members, write_csv};
use ens_lsr::eval::{CsvRow, SweepSettings, System};
use ens_lsr::planner::{all_shortest_paths, build_cmax_members, build_members, PlanError, DEFAULT_MAX_PATHS};
use ens_lsr::roadmap::{wcc_count, RoadmapEdge, RoadmapNode};
use ens_lsr::task::{generate_dataset, DatasetParams};
use ens_lsr::{
    build_roadmap, make_module, select_plans, Action, Dataset, LatentVector, MappingConfig, Measure, PlanSet, Roadmap,
    RoadmapConfig, SimilarityConfig, Slsr, SystemState, Task, VisualActionPlan,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Score-table agreement with the reference reimplementation.
const SCORE_TOLERANCE: f64 = 1e-12;
/// Band for the mean individual `% all` on stacking.
const INDIVIDUAL_BAND: (f64, f64) = (55.0, 80.0);
/// Allowed shortfall of the ensemble against the best individual, in points.
const BEST_INDIVIDUAL_SLACK: f64 = 1.0;
const N_PAIRS: usize = 1000;
const HARNESS_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const STACKING_TUPLES: usize = 2500;
const HARVESTING_TUPLES: usize = 5000;
const STACKING_C_MAX: usize = 20;
const MEMBER_SEEDS: [u64; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
const CMAX_GRID: [usize; 10] = [1, 10, 20, 30, 40, 50, 60, 70, 80, 90];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, budget_s: f64) -> bool {
    elapsed.as_secs_f64() < budget_s
}

// ---------------------------------------------------------------- plan fixtures

fn random_action(rng: &mut impl Rng, task: Task) -> Action {
    if rng.random_bool(0.05) {
        return Action::new([0.0, 0.0], [0.0, 0.0]);
    }
    let (w, h) = task.grid_size();
    let b = task.jitter_bound();
    let mut coord = |n: i32| rng.random_range(0..n) as f64 + rng.random_range(-b..=b);
    let pick = [coord(w), coord(h)];
    let release = [coord(w), coord(h)];
    Action::new(pick, release)
}

fn random_composition(rng: &mut impl Rng, universe: usize) -> Vec<usize> {
    let k = rng.random_range(1..=6);
    let set: BTreeSet<usize> = (0..k).map(|_| rng.random_range(0..universe)).collect();
    set.into_iter().collect()
}

fn plan_from_parts(member: usize, actions: Vec<Action>, nodes: Vec<Vec<usize>>) -> VisualActionPlan {
    let union: BTreeSet<usize> = nodes.iter().flatten().copied().collect();
    VisualActionPlan {
        member_id: member,
        path_id: 0,
        node_sequence: (0..nodes.len()).collect(),
        latent_plan: Vec::new(),
        action_plan: actions,
        visual_plan: Vec::new(),
        composition_union: union.into_iter().collect(),
        node_compositions: nodes.into_iter().map(Arc::from).collect(),
    }
}

fn random_plan(rng: &mut impl Rng, task: Task, max_len: usize, universe: usize) -> VisualActionPlan {
    let len = rng.random_range(0..=max_len);
    let actions = (0..len).map(|_| random_action(rng, task)).collect();
    let nodes = (0..=len).map(|_| random_composition(rng, universe)).collect();
    plan_from_parts(0, actions, nodes)
}

// ---------------------------------------------------------------- criterion 1

fn similarity_axioms() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut violations = Vec::new();
    let mut n = 0;
    for task in [Task::Stacking, Task::Harvesting] {
        for _ in 0..1000 {
            let a = random_plan(&mut rng, task, 6, 40);
            let b = if rng.random_bool(0.1) { a.clone() } else { random_plan(&mut rng, task, 6, 40) };
            let su = |x: &VisualActionPlan, y: &VisualActionPlan| {
                let (cx, cy) = preprocess_action_pair(&x.action_plan, &y.action_plan);
                action_sim_cosine(&cx, &cy)
            };
            let sn = |x: &VisualActionPlan, y: &VisualActionPlan| {
                node_sim_jaccard(&x.composition_union, &y.composition_union)
            };
            let (uab, uba, nab, nba) = (su(&a, &b), su(&b, &a), sn(&a, &b), sn(&b, &a));
            let checks = [
                ("s^u range", (0.0..=1.0).contains(&uab)),
                ("s^n range", (0.0..=1.0).contains(&nab)),
                ("s^u symmetry", uab == uba),
                ("s^n symmetry", nab == nba),
                ("s^u self", su(&a, &a) == 1.0 && su(&b, &b) == 1.0),
                ("s^n self", sn(&a, &a) == 1.0 && sn(&b, &b) == 1.0),
            ];
            for (name, ok) in checks {
                if !ok {
                    violations.push(format!("{task} pair {n}: {name}"));
                }
            }
            n += 1;
        }
    }
    let el = t.elapsed();
    outcome(
        violations.is_empty() && within(el, 5.0),
        format!("{n} pairs, {} violations {:?}, {:.2}s (< 5s)", violations.len(), violations.first(), el.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- criterion 2

fn edit_oracle(a: &[Action], b: &[Action], c: &EditCosts) -> f64 {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len() as f64 * c.insertion,
        (_, None) => a.len() as f64 * c.deletion,
        (Some((x, ra)), Some((y, rb))) => {
            let d = x.to_array().iter().zip(y.to_array()).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
            let sub = if d < c.tau { 0.0 } else { c.substitution };
            let keep = edit_oracle(ra, rb, c) + sub;
            let del = edit_oracle(ra, b, c) + c.deletion;
            let ins = edit_oracle(a, rb, c) + c.insertion;
            keep.min(del).min(ins)
        }
    }
}

fn pooled_actions(rng: &mut impl Rng, pool: &[Action], len: usize) -> Vec<Action> {
    (0..len)
        .map(|_| {
            let base = pool[rng.random_range(0..pool.len())].to_array();
            let s = 0.3;
            Action::from_array(base.map(|v| v + rng.random_range(-s..=s)))
        })
        .collect()
}

fn edit_dp_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let cost_sets = [EditCosts::default(), EditCosts { insertion: 0.25, deletion: 0.75, substitution: 1.5, tau: 0.5 }];
    let mut mismatches = 0;
    for i in 0..500 {
        let pool: Vec<Action> = (0..3).map(|_| random_action(&mut rng, Task::Stacking)).collect();
        let (la, lb) = (rng.random_range(0..=5), rng.random_range(0..=5));
        let a = pooled_actions(&mut rng, &pool, la);
        let b = pooled_actions(&mut rng, &pool, lb);
        let c = &cost_sets[i % 2];
        if action_sim_edit(&a, &b, c) != -edit_oracle(&a, &b, c) {
            mismatches += 1;
        }
    }
    let el = t.elapsed();
    outcome(
        mismatches == 0 && within(el, 5.0),
        format!("500 pairs, {mismatches} mismatches, {:.2}s (< 5s)", el.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- criterion 3

fn jaccard_ref(a: &[usize], b: &[usize]) -> f64 {
    let (sa, sb): (BTreeSet<_>, BTreeSet<_>) = (a.iter().collect(), b.iter().collect());
    let union = sa.union(&sb).count();
    if union == 0 {
        1.0
    } else {
        sa.intersection(&sb).count() as f64 / union as f64
    }
}

fn cosine_ref(a: &[Action], b: &[Action]) -> f64 {
    let len = a.len().max(b.len());
    let flat = |p: &[Action]| {
        let mut v: Vec<f64> = p.iter().flat_map(|x| x.to_array()).collect();
        v.resize(4 * len, 0.0);
        v
    };
    let (va, vb) = (flat(a), flat(b));
    let na = va.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 && nb == 0.0 {
        return 1.0;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
    0.5 * (1.0 + (dot / (na * nb)).clamp(-1.0, 1.0))
}

fn similarity_ref(a: &VisualActionPlan, b: &VisualActionPlan, cfg: &SimilarityConfig) -> Option<f64> {
    match cfg.measure {
        Measure::Sum => {
            Some(cosine_ref(&a.action_plan, &b.action_plan) + jaccard_ref(&a.composition_union, &b.composition_union))
        }
        Measure::Cosine => Some(cosine_ref(&a.action_plan, &b.action_plan)),
        Measure::Jaccard => Some(jaccard_ref(&a.composition_union, &b.composition_union)),
        Measure::Euclid => (a.action_plan.len() == b.action_plan.len()).then(|| {
            let d2: f64 = a
                .action_plan
                .iter()
                .zip(&b.action_plan)
                .flat_map(|(x, y)| x.to_array().into_iter().zip(y.to_array()).map(|(p, q)| (p - q) * (p - q)))
                .sum();
            -d2.sqrt()
        }),
        Measure::Edit => Some(-edit_oracle(&a.action_plan, &b.action_plan, &cfg.edit)),
        Measure::Indiv => (a.node_compositions.len() == b.node_compositions.len())
            .then(|| a.node_compositions.iter().zip(&b.node_compositions).map(|(x, y)| jaccard_ref(x, y)).sum()),
    }
}

/// Direct transcription of the selection loop: score table and maximizers.
fn select_ref(sets: &[PlanSet], cfg: &SimilarityConfig) -> (Vec<(PlanRef, f64)>, Vec<PlanRef>) {
    let mut table = Vec::new();
    for i in 0..sets.len() {
        for j in 0..sets[i].plans.len() {
            let mut c = 0.0;
            for k in 0..sets.len() {
                if k == i {
                    continue;
                }
                let mut s: Vec<f64> = Vec::new();
                for l in 0..sets[k].plans.len() {
                    if let Some(v) = similarity_ref(&sets[i].plans[j], &sets[k].plans[l], cfg) {
                        s.push(v);
                    }
                }
                if !s.is_empty() {
                    let mut best = s[0];
                    for &v in &s[1..] {
                        if v > best {
                            best = v;
                        }
                    }
                    c += best;
                }
            }
            table.push((PlanRef { member: i, plan: j }, c));
        }
    }
    let mut selected = Vec::new();
    if let Some(max) = table.iter().map(|e| e.1).reduce(f64::max) {
        selected = table.iter().filter(|e| e.1 >= max - 1e-9).map(|e| e.0).collect();
    }
    (table, selected)
}

fn random_ensemble(rng: &mut impl Rng) -> Vec<PlanSet> {
    let m = rng.random_range(1..=6);
    let task = if rng.random_bool(0.5) { Task::Stacking } else { Task::Harvesting };
    let pool: Vec<VisualActionPlan> = (0..rng.random_range(1..=6)).map(|_| random_plan(rng, task, 4, 25)).collect();
    (0..m)
        .map(|i| {
            let q = rng.random_range(0..=5);
            let plans = (0..q)
                .map(|j| {
                    let mut p = if rng.random_bool(0.7) {
                        pool[rng.random_range(0..pool.len())].clone()
                    } else {
                        random_plan(rng, task, 4, 25)
                    };
                    p.member_id = i;
                    p.path_id = j;
                    p
                })
                .collect();
            PlanSet { member_id: i, plans, truncated: false }
        })
        .collect()
}

fn selection_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut problems = Vec::new();
    let mut max_dev: f64 = 0.0;
    for e in 0..200 {
        let sets = random_ensemble(&mut rng);
        for measure in Measure::ALL {
            let cfg = SimilarityConfig::with_measure(measure);
            let got = select_plans(&sets, &cfg);
            let (table, selected) = select_ref(&sets, &cfg);
            if got.scores.len() != table.len() {
                problems.push(format!("ensemble {e} {measure}: table size"));
                continue;
            }
            for (row, (r, c)) in got.scores.iter().zip(&table) {
                max_dev = max_dev.max((row.score - c).abs());
                if row.plan != *r || (row.score - c).abs() > SCORE_TOLERANCE {
                    problems.push(format!("ensemble {e} {measure}: score {:?}", r));
                }
            }
            if got.selected != selected {
                problems.push(format!("ensemble {e} {measure}: selected set"));
            }
        }
    }
    let el = t.elapsed();
    outcome(
        problems.is_empty() && within(el, 10.0),
        format!(
            "200 ensembles x 6 measures, max score deviation {max_dev:.1e} (<= {SCORE_TOLERANCE:.0e}), {} problems {:?}, {:.2}s (< 10s)",
            problems.len(),
            problems.first(),
            el.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- criterion 4

fn graph_roadmap(n: usize, arcs: &[(usize, usize)], directed: bool) -> Roadmap {
    let mut all: BTreeSet<(usize, usize)> = arcs.iter().copied().collect();
    if !directed {
        all.extend(arcs.iter().map(|&(a, b)| (b, a)));
    }
    Roadmap {
        directed,
        c_max: n.max(1),
        epsilon_used: 1.0,
        nodes: (0..n)
            .map(|i| RoadmapNode { node_id: i, centroid: LatentVector(vec![i as f64]), composition: vec![i] })
            .collect(),
        edges: all
            .into_iter()
            .map(|(from, to)| RoadmapEdge { from, to, mean_action: Action::new([0.0; 2], [0.0; 2]), support_count: 1 })
            .collect(),
    }
}

/// Every simple path with exactly `hops` arcs from `path`'s last node to `dst`.
fn simple_paths(adj: &[Vec<bool>], path: &mut Vec<usize>, dst: usize, hops: usize, out: &mut Vec<Vec<usize>>) {
    let u = *path.last().unwrap();
    if path.len() == hops + 1 {
        if u == dst {
            out.push(path.clone());
        }
        return;
    }
    for v in 0..adj.len() {
        if adj[u][v] && !path.contains(&v) {
            path.push(v);
            simple_paths(adj, path, dst, hops, out);
            path.pop();
        }
    }
}

fn shortest_path_oracle() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut mismatches = Vec::new();
    let mut queries = 0;
    for g in 0..300 {
        let directed = g % 2 == 0;
        let n = rng.random_range(1..=12);
        let density = rng.random_range(0.1..0.5);
        let mut arcs = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if a != b && (directed || a < b) && rng.random_bool(density) {
                    arcs.push((a, b));
                }
            }
        }
        let roadmap = graph_roadmap(n, &arcs, directed);
        let mut adj = vec![vec![false; n]; n];
        for e in &roadmap.edges {
            adj[e.from][e.to] = true;
        }
        for _ in 0..4 {
            let (src, dst) = (rng.random_range(0..n), rng.random_range(0..n));
            queries += 1;
            let mut expected = Vec::new();
            for hops in 0..n {
                simple_paths(&adj, &mut vec![src], dst, hops, &mut expected);
                if !expected.is_empty() {
                    break;
                }
            }
            let got = all_shortest_paths(&roadmap, src, dst, usize::MAX);
            let ok = match got {
                Ok(sp) => {
                    let mut sorted = expected.clone();
                    sorted.sort();
                    !sp.truncated && sp.paths == sorted
                }
                Err(PlanError::NoPath { .. }) => expected.is_empty(),
                Err(_) => false,
            };
            if !ok {
                mismatches.push(format!("graph {g} {src}->{dst}"));
            }
        }
    }
    let el = t.elapsed();
    outcome(
        mismatches.is_empty() && within(el, 10.0),
        format!(
            "300 graphs, {queries} queries, {} mismatches {:?}, {:.2}s (< 10s)",
            mismatches.len(),
            mismatches.first(),
            el.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- criterion 5

fn noise_free_bijection(dataset: &Dataset, module_seed: u64) -> Result<(), String> {
    let module = make_module(dataset, module_seed, &MappingConfig::noise_free()).map_err(|e| e.to_string())?;
    let task = dataset.task();
    let cfg = RoadmapConfig { c_max: 10_000, min_cluster_size: 1, n_eps: 50, directed: task.directed() };
    let roadmap = build_roadmap(dataset, &module, &cfg).map_err(|e| e.to_string())?;
    let obs = module.train_observations();
    let state_of = |index: usize| &obs[obs.binary_search_by_key(&index, |o| o.index).unwrap()].state;

    let mut node_state: Vec<&SystemState> = Vec::new();
    for node in &roadmap.nodes {
        let states: HashSet<&SystemState> = node.composition.iter().map(|&i| state_of(i)).collect();
        if states.len() != 1 {
            return Err(format!("node {} mixes {} states", node.node_id, states.len()));
        }
        node_state.push(states.into_iter().next().unwrap());
    }
    let node_states: HashSet<&SystemState> = node_state.iter().copied().collect();
    let train_states: HashSet<&SystemState> = obs.iter().map(|o| &o.state).collect();
    if node_states.len() != node_state.len() || node_states != train_states {
        return Err(format!("{} nodes for {} training states", roadmap.nodes.len(), train_states.len()));
    }
    let edge_states: HashSet<(&SystemState, &SystemState)> =
        roadmap.edges.iter().map(|e| (node_state[e.from], node_state[e.to])).collect();
    let mut transitions = HashSet::new();
    for &t in module.train_subset() {
        let tuple = &dataset.tuples[t];
        if tuple.rho.is_action() {
            transitions.insert((&tuple.first.state, &tuple.second.state));
            if !task.directed() {
                transitions.insert((&tuple.second.state, &tuple.first.state));
            }
        }
    }
    if edge_states.len() != roadmap.edges.len() || edge_states != transitions {
        return Err(format!("{} edges for {} training transitions", roadmap.edges.len(), transitions.len()));
    }
    Ok(())
}

fn roadmap_constraint() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut violations = Vec::new();
    for k in 0..100 {
        let task = if k % 2 == 0 { Task::Stacking } else { Task::Harvesting };
        let dataset = generate_dataset(&DatasetParams::new(task, rng.random_range(100..=400), rng.random()));
        let mapping = MappingConfig {
            sigma_noise: rng.random_range(0.0..0.6),
            p_merge: rng.random_range(0.0..0.01),
            p_split: rng.random_range(0.0..0.2),
            p_outlier: rng.random_range(0.0..0.1),
            ..MappingConfig::default()
        };
        let module = make_module(&dataset, rng.random(), &mapping).unwrap();
        let cfg = RoadmapConfig {
            c_max: rng.random_range(1..=40),
            min_cluster_size: rng.random_range(1..=3),
            n_eps: rng.random_range(5..=50),
            directed: task.directed(),
        };
        match build_roadmap(&dataset, &module, &cfg) {
            Ok(r) if wcc_count(&r) <= cfg.c_max => {}
            Ok(r) => violations.push(format!("config {k}: wcc {} > c_max {}", wcc_count(&r), cfg.c_max)),
            Err(e) => violations.push(format!("config {k}: {e}")),
        }
    }
    let mut bijection = Vec::new();
    for task in [Task::Stacking, Task::Harvesting] {
        for seed in [1u64, 2, 3] {
            let dataset = generate_dataset(&DatasetParams::new(task, 1500, seed));
            if let Err(e) = noise_free_bijection(&dataset, seed + 10) {
                bijection.push(format!("{task} seed {seed}: {e}"));
            }
        }
    }
    let el = t.elapsed();
    outcome(
        violations.is_empty() && bijection.is_empty() && within(el, 60.0),
        format!(
            "100 configs: {} violations {:?}; noise-free bijection on 6 datasets: {} failures {:?}; {:.1}s (< 60s)",
            violations.len(),
            violations.first(),
            bijection.len(),
            bijection.first(),
            el.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- criterion 6

fn degenerate_end_to_end() -> Outcome {
    let t = Instant::now();
    let dataset = generate_dataset(&DatasetParams::new(Task::Stacking, STACKING_TUPLES, 1));
    let members =
        build_members(&dataset, &[1], &MappingConfig::noise_free(), &RoadmapConfig::new(STACKING_C_MAX, false))
            .unwrap();
    let pairs = eval_pairs(Task::Stacking, 0, 200);
    let (_, s) = evaluate_system(&members, &pairs, System::Single(0), DEFAULT_MAX_PATHS);
    let el = t.elapsed();
    outcome(
        s.pct_all == 100.0 && s.pct_exists == 100.0 && within(el, 30.0),
        format!(
            "pct_all {:.1}, pct_exists {:.1} over 200 pairs, {:.1}s (< 30s)",
            s.pct_all,
            s.pct_exists,
            el.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- shared builds

struct Experiments {
    stacking: Vec<Slsr>,
    harvesting: Vec<Slsr>,
    stacking_build: Duration,
}

fn settings(harness_seed: u64) -> SweepSettings {
    SweepSettings { harness_seed, max_paths: DEFAULT_MAX_PATHS, similarity: SimilarityConfig::default() }
}

fn build_experiments() -> Experiments {
    let t = Instant::now();
    let stacking_data = generate_dataset(&DatasetParams::new(Task::Stacking, STACKING_TUPLES, 1));
    let stacking = build_members(
        &stacking_data,
        &MEMBER_SEEDS,
        &MappingConfig::default(),
        &RoadmapConfig::new(STACKING_C_MAX, false),
    )
    .unwrap();
    let stacking_build = t.elapsed();
    let harvesting_data = generate_dataset(&DatasetParams::new(Task::Harvesting, HARVESTING_TUPLES, 1));
    let harvesting =
        build_cmax_members(&harvesting_data, 1, &CMAX_GRID, &MappingConfig::default(), &RoadmapConfig::new(1, true))
            .unwrap();
    Experiments { stacking, harvesting, stacking_build }
}

// ---------------------------------------------------------------- criterion 7

fn existence_identity(x: &Experiments) -> Outcome {
    let mut violations = 0;
    let mut checked = 0;
    for (task, members) in [(Task::Stacking, &x.stacking), (Task::Harvesting, &x.harvesting)] {
        let pairs = eval_pairs(task, 0, N_PAIRS);
        let mut systems: Vec<System> = (0..members.len()).map(System::Single).collect();
        systems.push(System::Ensemble { m: members.len(), similarity: SimilarityConfig::default() });
        let results = evaluate_systems(members, &pairs, &systems, DEFAULT_MAX_PATHS);
        let (ens, singles) = results.split_last().unwrap();
        for p in 0..pairs.len() {
            let any_member = singles.iter().any(|(records, _)| records[p].path_found);
            if ens.0[p].path_found != any_member {
                violations += 1;
            }
            checked += 1;
        }
    }
    outcome(
        violations == 0,
        format!("{checked} pairs (stacking m=10 and harvesting c_max grid), {violations} violations"),
    )
}

// ---------------------------------------------------------------- criterion 8

fn row<'a>(rows: &'a [CsvRow], system: &str, m: usize) -> &'a CsvRow {
    rows.iter().find(|r| r.system == system && r.m == m).unwrap_or_else(|| panic!("missing row {system} m={m}"))
}

fn member_trend(x: &Experiments) -> Outcome {
    let t = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in HARNESS_SEEDS {
        let rows = sweep_members(&x.stacking, &eval_pairs(Task::Stacking, seed, N_PAIRS), &settings(seed));
        let (ens, naive, mean, best) = (
            row(&rows, "ens", 10),
            row(&rows, "naive", 10),
            row(&rows, "individual_mean", 10),
            row(&rows, "individual_max", 10),
        );
        let ok = (INDIVIDUAL_BAND.0..=INDIVIDUAL_BAND.1).contains(&mean.pct_all)
            && ens.pct_all >= best.pct_all - BEST_INDIVIDUAL_SLACK
            && ens.pct_all >= naive.pct_all;
        pass &= ok;
        parts.push(format!(
            "seed {seed}: ens {:.1} best {:.1} mean {:.1} naive {:.1}",
            ens.pct_all, best.pct_all, mean.pct_all, naive.pct_all
        ));
    }
    let el = t.elapsed() + x.stacking_build;
    outcome(pass && within(el, 600.0), format!("{}; {:.1}s (< 600s)", parts.join("; "), el.as_secs_f64()))
}

// ---------------------------------------------------------------- criterion 9

fn cmax_trend(x: &Experiments) -> Outcome {
    let t = Instant::now();
    let pairs = eval_pairs(Task::Harvesting, 0, N_PAIRS);
    let rows = sweep_cmax(&x.harvesting, &pairs, &settings(0));
    let individual: Vec<&CsvRow> = rows.iter().filter(|r| r.system == "individual").collect();
    let ens = row(&rows, "ens", x.harvesting.len());
    let c: Vec<f64> = individual.iter().map(|r| r.c_max.parse::<f64>().unwrap()).collect();
    let exists: Vec<f64> = individual.iter().map(|r| r.pct_exists).collect();
    // A constant series never increases.
    let rho = spearman(&c, &exists).unwrap_or(0.0);
    let ens_dominates = individual.iter().all(|r| ens.pct_exists >= r.pct_exists);
    let (records, first) = evaluate_system(&x.harvesting, &pairs, System::Single(0), DEFAULT_MAX_PATHS);
    let zero_length_failures = records.iter().filter(|r| !r.all_correct && r.plan_lengths.contains(&0)).count();
    let el = t.elapsed();
    outcome(
        rho <= 0.0
            && ens_dominates
            && zero_length_failures > 0
            && first.pct_exists > first.pct_all
            && within(el, 600.0),
        format!(
            "spearman(c_max, exists) {rho:.3}; exists {:?}; ens exists {:.1}; c_max=1 all {:.1} exists {:.1} with {zero_length_failures} zero-length failures; {:.1}s (< 600s)",
            exists,
            ens.pct_exists,
            first.pct_all,
            first.pct_exists,
            el.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- criterion 10

fn performance_budget(x: &Experiments) -> Outcome {
    let csv_of = |members: &[Slsr]| {
        let rows = sweep_members(members, &eval_pairs(Task::Stacking, 0, N_PAIRS), &settings(0));
        let mut out = Vec::new();
        write_csv(&rows, &mut out).unwrap();
        out
    };
    let t = Instant::now();
    let first = csv_of(&x.stacking);
    let el = t.elapsed() + x.stacking_build;
    let second = csv_of(&x.stacking);
    outcome(
        first == second && within(el, 60.0),
        format!(
            "build + m=10 sweep over {N_PAIRS} pairs {:.1}s (< 60s), reruns byte-identical: {}",
            el.as_secs_f64(),
            first == second
        ),
    )
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |n: u32, name: &'static str, o: Outcome| {
        println!("criterion {n:>2} {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    report(1, "similarity axioms", similarity_axioms());
    report(2, "edit distance DP oracle", edit_dp_oracle());
    report(3, "selection oracle", selection_oracle());
    report(4, "shortest-path oracle", shortest_path_oracle());
    report(5, "roadmap constraint and noise-free bijection", roadmap_constraint());
    report(6, "degenerate end-to-end", degenerate_end_to_end());
    let x = build_experiments();
    report(7, "ensemble existence identity", existence_identity(&x));
    report(8, "member-count trend", member_trend(&x));
    report(9, "c_max trend", cmax_trend(&x));
    report(10, "performance budget and determinism", performance_budget(&x));
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
