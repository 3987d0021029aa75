//! Training dataset generation and its JSON-lines file format.
//!
//! The first line is a header `{task, seed, n_tuples, format_version}`; each
//! following line is one tuple record
//! `{i_index, j_index, i_state, j_state, i_nuisance, j_nuisance, a, u}`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Action, ActionInfo, CellCoord, Nuisance, Observation, StateSpace, SystemState, Task, TransitionTuple};

pub const DATASET_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetParams {
    pub task: Task,
    pub n_tuples: usize,
    pub frac_no_action: f64,
    pub seed: u64,
    /// Actions per random walk before a new walk starts.
    pub walk_length: usize,
}

impl DatasetParams {
    pub fn new(task: Task, n_tuples: usize, seed: u64) -> Self {
        DatasetParams { task, n_tuples, frac_no_action: 0.2, seed, walk_length: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetHeader {
    pub task: Task,
    pub seed: u64,
    pub n_tuples: usize,
    pub format_version: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub tuples: Vec<TransitionTuple>,
}

impl Dataset {
    pub fn task(&self) -> Task {
        self.header.task
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    /// Distinct observations of the given tuples, sorted by index.
    pub fn observations_of(&self, tuple_indices: impl IntoIterator<Item = usize>) -> Vec<Observation> {
        let mut by_index = BTreeMap::new();
        for t in tuple_indices {
            let tuple = &self.tuples[t];
            by_index.entry(tuple.first.index).or_insert_with(|| tuple.first.clone());
            by_index.entry(tuple.second.index).or_insert_with(|| tuple.second.clone());
        }
        by_index.into_values().collect()
    }

    /// Distinct states appearing anywhere in the dataset, sorted.
    pub fn distinct_states(&self) -> Vec<SystemState> {
        let mut states: Vec<SystemState> =
            self.tuples.iter().flat_map(|t| [t.first.state.clone(), t.second.state.clone()]).collect();
        states.sort();
        states.dedup();
        states
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record on line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("unsupported dataset format version {0}")]
    Version(u32),
}

/// Generates `n_tuples` transition tuples by seeded random walks.
///
/// Walks start preferentially at states no walk has visited yet so that the
/// state space is covered early. Each step is a no-action pair with
/// probability `frac_no_action`, otherwise a uniformly chosen valid move.
pub fn generate_dataset(params: &DatasetParams) -> Dataset {
    assert!(params.n_tuples > 0, "n_tuples must be positive");
    assert!((0.0..1.0).contains(&params.frac_no_action), "frac_no_action must lie in [0, 1)");
    let task = params.task;
    let space = StateSpace::of(task);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut visited = vec![false; space.len()];
    let mut next_index = 0usize;
    let mut fresh = |state: SystemState, rng: &mut ChaCha8Rng| {
        let obs = Observation::sample(next_index, state, rng);
        next_index += 1;
        obs
    };
    let mut tuples = Vec::with_capacity(params.n_tuples);
    let mut walk: Option<(Observation, usize)> = None;
    while tuples.len() < params.n_tuples {
        let (current, steps) = match walk.take() {
            Some((obs, steps)) if steps < params.walk_length.max(1) => (obs, steps),
            _ => {
                let unvisited: Vec<usize> = (0..space.len()).filter(|&i| !visited[i]).collect();
                let pick = if unvisited.is_empty() {
                    rng.random_range(0..space.len())
                } else {
                    unvisited[rng.random_range(0..unvisited.len())]
                };
                visited[pick] = true;
                (fresh(space.states()[pick].clone(), &mut rng), 0)
            }
        };
        if rng.random::<f64>() < params.frac_no_action {
            let twin = fresh(current.state.clone(), &mut rng);
            tuples.push(TransitionTuple { first: current.clone(), second: twin, rho: ActionInfo::no_action() });
            walk = Some((current, steps));
            continue;
        }
        let si = space.index_of(&current.state).expect("walk states are valid");
        let succ = space.successors(si);
        if succ.is_empty() {
            continue;
        }
        let (next_i, (from, to)) = succ[rng.random_range(0..succ.len())];
        visited[next_i] = true;
        let next = fresh(space.states()[next_i].clone(), &mut rng);
        let pick = current.object_position(from).expect("pick cell is occupied");
        let release = next.object_position(to).expect("release cell is occupied after the move");
        tuples.push(TransitionTuple {
            first: current,
            second: next.clone(),
            rho: ActionInfo::moved(Action::new(pick, release)),
        });
        walk = Some((next, steps + 1));
    }
    Dataset {
        header: DatasetHeader {
            task,
            seed: params.seed,
            n_tuples: params.n_tuples,
            format_version: DATASET_FORMAT_VERSION,
        },
        tuples,
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TupleRecord {
    i_index: usize,
    j_index: usize,
    i_state: Vec<CellCoord>,
    j_state: Vec<CellCoord>,
    i_nuisance: Nuisance,
    j_nuisance: Nuisance,
    a: u8,
    u: [f64; 4],
}

pub fn write_dataset<W: Write>(dataset: &Dataset, mut w: W) -> std::io::Result<()> {
    serde_json::to_writer(&mut w, &dataset.header)?;
    w.write_all(b"\n")?;
    for t in &dataset.tuples {
        let rec = TupleRecord {
            i_index: t.first.index,
            j_index: t.second.index,
            i_state: t.first.state.assignment().to_vec(),
            j_state: t.second.state.assignment().to_vec(),
            i_nuisance: t.first.nuisance.clone(),
            j_nuisance: t.second.nuisance.clone(),
            a: t.rho.a,
            u: t.rho.u.to_array(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<Dataset, DatasetError> {
    let mut lines = r.lines().enumerate();
    let malformed = |line: usize, message: String| DatasetError::Malformed { line: line + 1, message };
    let (n, first) = lines.next().ok_or_else(|| malformed(0, "missing header".into()))?;
    let header: DatasetHeader = serde_json::from_str(&first?).map_err(|e| malformed(n, e.to_string()))?;
    if header.format_version != DATASET_FORMAT_VERSION {
        return Err(DatasetError::Version(header.format_version));
    }
    let task = header.task;
    let mut tuples = Vec::with_capacity(header.n_tuples);
    for (n, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TupleRecord = serde_json::from_str(&line).map_err(|e| malformed(n, e.to_string()))?;
        let state = |cells: &[CellCoord]| SystemState::new(task, cells).map_err(|e| malformed(n, e.to_string()));
        let rho = match rec.a {
            0 => ActionInfo { a: 0, u: Action::from_array(rec.u) },
            1 => ActionInfo::moved(Action::from_array(rec.u)),
            other => return Err(malformed(n, format!("action indicator must be 0 or 1, got {other}"))),
        };
        let tuple = TransitionTuple {
            first: Observation { index: rec.i_index, state: state(&rec.i_state)?, nuisance: rec.i_nuisance },
            second: Observation { index: rec.j_index, state: state(&rec.j_state)?, nuisance: rec.j_nuisance },
            rho,
        };
        if !tuple.is_consistent() {
            return Err(malformed(n, "tuple states do not follow from its action".into()));
        }
        tuples.push(tuple);
    }
    if tuples.len() != header.n_tuples {
        return Err(DatasetError::Malformed {
            line: 1,
            message: format!("header announces {} tuples, file has {}", header.n_tuples, tuples.len()),
        });
    }
    Ok(Dataset { header, tuples })
}
