//! Ground-truth state graph, holdout pair sampling and plan verification.

use std::collections::{HashMap, VecDeque};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{apply_action, Action, CellCoord, Observation, SystemState, Task, N_OBJECTS};
use crate::planner::VisualActionPlan;

/// Holdout observations carry indices at or above this value, far from any training index.
pub const HOLDOUT_INDEX_BASE: usize = 1_000_000;

/// Every valid state of a task and its rule-abiding transitions.
#[derive(Debug)]
pub struct StateSpace {
    task: Task,
    states: Vec<SystemState>,
    index: HashMap<SystemState, usize>,
    successors: Vec<Vec<(usize, (CellCoord, CellCoord))>>,
}

impl StateSpace {
    /// Shared, lazily enumerated state space of `task`.
    pub fn of(task: Task) -> &'static StateSpace {
        static STACKING: OnceLock<StateSpace> = OnceLock::new();
        static HARVESTING: OnceLock<StateSpace> = OnceLock::new();
        match task {
            Task::Stacking => STACKING.get_or_init(|| StateSpace::enumerate(task)),
            Task::Harvesting => HARVESTING.get_or_init(|| StateSpace::enumerate(task)),
        }
    }

    fn enumerate(task: Task) -> StateSpace {
        let cells = task.cells();
        let mut states = Vec::new();
        let mut chosen = Vec::with_capacity(N_OBJECTS);
        fn rec(cells: &[CellCoord], chosen: &mut Vec<CellCoord>, task: Task, out: &mut Vec<SystemState>) {
            if chosen.len() == N_OBJECTS {
                if let Ok(s) = SystemState::new(task, chosen) {
                    out.push(s);
                }
                return;
            }
            for &c in cells {
                if !chosen.contains(&c) {
                    chosen.push(c);
                    rec(cells, chosen, task, out);
                    chosen.pop();
                }
            }
        }
        rec(&cells, &mut chosen, task, &mut states);
        states.sort();
        states.dedup();
        let index: HashMap<_, _> = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let successors = states
            .iter()
            .map(|s| s.valid_moves().into_iter().map(|(f, t)| (index[&s.moved(f, t)], (f, t))).collect())
            .collect();
        StateSpace { task, states, index, successors }
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn states(&self) -> &[SystemState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: &SystemState) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn successors(&self, i: usize) -> &[(usize, (CellCoord, CellCoord))] {
        &self.successors[i]
    }

    /// Breadth-first shortest move sequence from `start` to `goal`.
    pub fn shortest_moves(&self, start: &SystemState, goal: &SystemState) -> Option<Vec<(CellCoord, CellCoord)>> {
        let s = self.index_of(start)?;
        let g = self.index_of(goal)?;
        let mut parent: Vec<Option<(usize, (CellCoord, CellCoord))>> = vec![None; self.len()];
        let mut seen = vec![false; self.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            if u == g {
                let mut moves = Vec::new();
                let mut cur = g;
                while let Some((p, mv)) = parent[cur] {
                    moves.push(mv);
                    cur = p;
                }
                moves.reverse();
                return Some(moves);
            }
            for &(v, mv) in &self.successors[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent[v] = Some((u, mv));
                    queue.push_back(v);
                }
            }
        }
        None
    }
}

/// Whether `goal` can be reached from `start` under the task rules.
pub fn is_reachable(start: &SystemState, goal: &SystemState) -> bool {
    start.task() == goal.task() && StateSpace::of(start.task()).shortest_moves(start, goal).is_some()
}

/// A shortest cell-center action sequence from `start` to `goal`, if one exists.
pub fn ground_truth_actions(start: &SystemState, goal: &SystemState) -> Option<Vec<Action>> {
    if start.task() != goal.task() {
        return None;
    }
    let moves = StateSpace::of(start.task()).shortest_moves(start, goal)?;
    Some(moves.into_iter().map(|(f, t)| Action::between(f, t)).collect())
}

/// Replays `actions` from `start`; true iff every snapped step is valid and the
/// final state is `goal`.
pub fn verify_actions(start: &SystemState, goal: &SystemState, actions: &[Action]) -> bool {
    let mut state = start.clone();
    for a in actions {
        match apply_action(&state, a) {
            Ok(next) => state = next,
            Err(_) => return false,
        }
    }
    state == *goal
}

/// Ground-truth judgement of a visual action plan.
pub fn verify_plan(start: &Observation, goal: &Observation, plan: &VisualActionPlan) -> bool {
    verify_actions(&start.state, &goal.state, &plan.action_plan)
}

/// Draws a feasible holdout `(start, goal)` pair with distinct states.
///
/// Both observations get indices derived from `pair_id` above [`HOLDOUT_INDEX_BASE`].
pub fn sample_eval_pair(task: Task, seed: u64) -> (Observation, Observation) {
    sample_eval_pair_with_id(task, seed, 0)
}

pub fn sample_eval_pair_with_id(task: Task, seed: u64, pair_id: usize) -> (Observation, Observation) {
    let space = StateSpace::of(task);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let s = &space.states()[rng.random_range(0..space.len())];
        let g = &space.states()[rng.random_range(0..space.len())];
        if s == g || space.shortest_moves(s, g).is_none() {
            continue;
        }
        let start = Observation::sample(HOLDOUT_INDEX_BASE + 2 * pair_id, s.clone(), &mut rng);
        let goal = Observation::sample(HOLDOUT_INDEX_BASE + 2 * pair_id + 1, g.clone(), &mut rng);
        return (start, goal);
    }
}
