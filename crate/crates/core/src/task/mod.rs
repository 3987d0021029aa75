//! Box stacking and grape harvesting task simulators.
//!
//! Both tasks place four objects on a small grid of cells whose centers sit
//! at integer coordinates. Stacking uses a 3x3 column/level grid with gravity
//! and fully reversible moves. Harvesting uses two columns of four slots
//! (`x = 0` vine, `x = 1` box) with two white and two black bunches; bunches
//! only ever move into the box.

mod dataset;
mod oracle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{
    generate_dataset, read_dataset, write_dataset, Dataset, DatasetError, DatasetHeader, DatasetParams,
    DATASET_FORMAT_VERSION,
};
pub use oracle::{
    ground_truth_actions, is_reachable, sample_eval_pair, sample_eval_pair_with_id, verify_actions, verify_plan,
    StateSpace, HOLDOUT_INDEX_BASE,
};

/// Number of objects in either task.
pub const N_OBJECTS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Stacking,
    Harvesting,
}

impl Task {
    /// Every cell of the task grid, in `(x, y)` order.
    pub fn cells(self) -> Vec<CellCoord> {
        let (nx, ny) = self.grid_size();
        (0..nx).flat_map(|x| (0..ny).map(move |y| CellCoord { x, y })).collect()
    }

    /// Columns and rows (stacking) or columns and slots (harvesting).
    pub fn grid_size(self) -> (i32, i32) {
        match self {
            Task::Stacking => (3, 3),
            Task::Harvesting => (2, 4),
        }
    }

    pub fn contains(self, cell: CellCoord) -> bool {
        let (nx, ny) = self.grid_size();
        (0..nx).contains(&cell.x) && (0..ny).contains(&cell.y)
    }

    /// Maximum positional jitter as a fraction of the cell pitch.
    pub fn jitter_bound(self) -> f64 {
        match self {
            Task::Stacking => 0.15,
            Task::Harvesting => 0.125,
        }
    }

    /// Harvesting moves cannot be undone, so its roadmaps are directed.
    pub fn directed(self) -> bool {
        matches!(self, Task::Harvesting)
    }

    pub(crate) fn tag(self) -> u64 {
        match self {
            Task::Stacking => 1,
            Task::Harvesting => 2,
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Stacking => "stacking",
            Task::Harvesting => "harvesting",
        })
    }
}

impl std::str::FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stacking" => Ok(Task::Stacking),
            "harvesting" => Ok(Task::Harvesting),
            other => Err(format!("unknown task `{other}` (expected `stacking` or `harvesting`)")),
        }
    }
}

/// Grid cell. Serialized as `[x, y]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct CellCoord {
    pub x: i32,
    pub y: i32,
}

impl CellCoord {
    pub const fn new(x: i32, y: i32) -> Self {
        CellCoord { x, y }
    }

    pub fn center(self) -> [f64; 2] {
        [f64::from(self.x), f64::from(self.y)]
    }
}

impl From<[i32; 2]> for CellCoord {
    fn from([x, y]: [i32; 2]) -> Self {
        CellCoord { x, y }
    }
}

impl From<CellCoord> for [i32; 2] {
    fn from(c: CellCoord) -> Self {
        [c.x, c.y]
    }
}

/// Harvesting bunch variety. Objects 0 and 1 are white, 2 and 3 black.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variety {
    White,
    Black,
}

pub fn variety(object: usize) -> Variety {
    if object < 2 {
        Variety::White
    } else {
        Variety::Black
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TaskError {
    #[error("invalid action: pick {pick:?} release {release:?} is not allowed in this state")]
    InvalidAction { pick: [f64; 2], release: [f64; 2] },
    #[error("invalid state: {0}")]
    InvalidState(String),
}

/// Ground-truth arrangement of the task objects.
///
/// For harvesting the two bunches of each variety are interchangeable, so the
/// assignment is kept canonical: within a variety the lower object id holds the
/// lower cell. Equality therefore compares per-cell varieties.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawState", into = "RawState")]
pub struct SystemState {
    task: Task,
    assignment: [CellCoord; N_OBJECTS],
}

#[derive(Serialize, Deserialize)]
struct RawState {
    task: Task,
    assignment: Vec<CellCoord>,
}

impl TryFrom<RawState> for SystemState {
    type Error = TaskError;

    fn try_from(raw: RawState) -> Result<Self, Self::Error> {
        SystemState::new(raw.task, &raw.assignment)
    }
}

impl From<SystemState> for RawState {
    fn from(s: SystemState) -> Self {
        RawState { task: s.task, assignment: s.assignment.to_vec() }
    }
}

impl SystemState {
    /// Validates the assignment against the task's placement rules.
    pub fn new(task: Task, assignment: &[CellCoord]) -> Result<Self, TaskError> {
        let cells: [CellCoord; N_OBJECTS] = assignment
            .try_into()
            .map_err(|_| TaskError::InvalidState(format!("expected {N_OBJECTS} objects, got {}", assignment.len())))?;
        for (i, c) in cells.iter().enumerate() {
            if !task.contains(*c) {
                return Err(TaskError::InvalidState(format!("object {i} at {c:?} is outside the grid")));
            }
            if cells[..i].contains(c) {
                return Err(TaskError::InvalidState(format!("two objects share cell {c:?}")));
            }
        }
        if task == Task::Stacking {
            for c in &cells {
                if c.y > 0 && !cells.contains(&CellCoord::new(c.x, c.y - 1)) {
                    return Err(TaskError::InvalidState(format!("box at {c:?} is floating")));
                }
            }
        }
        Ok(SystemState { task, assignment: cells }.canonical())
    }

    fn canonical(mut self) -> Self {
        if self.task == Task::Harvesting {
            for pair in [0, 2] {
                if self.assignment[pair] > self.assignment[pair + 1] {
                    self.assignment.swap(pair, pair + 1);
                }
            }
        }
        self
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn assignment(&self) -> &[CellCoord; N_OBJECTS] {
        &self.assignment
    }

    pub fn occupant(&self, cell: CellCoord) -> Option<usize> {
        self.assignment.iter().position(|c| *c == cell)
    }

    pub fn is_occupied(&self, cell: CellCoord) -> bool {
        self.occupant(cell).is_some()
    }

    /// Stable 64-bit encoding of the state, independent of process and platform.
    pub fn canonical_key(&self) -> u64 {
        let mut k = self.task.tag();
        for c in &self.assignment {
            k = k * 16 + c.x as u64;
            k = k * 16 + c.y as u64;
        }
        k
    }

    /// Whether moving the object in `from` to `to` obeys the task rules.
    pub fn is_valid_move(&self, from: CellCoord, to: CellCoord) -> bool {
        if from == to || !self.task.contains(from) || !self.task.contains(to) {
            return false;
        }
        if !self.is_occupied(from) || self.is_occupied(to) {
            return false;
        }
        match self.task {
            Task::Stacking => {
                let above = CellCoord::new(from.x, from.y + 1);
                if self.task.contains(above) && self.is_occupied(above) {
                    return false;
                }
                let below = CellCoord::new(to.x, to.y - 1);
                to.y == 0 || (below != from && self.is_occupied(below))
            }
            Task::Harvesting => to.x == 1,
        }
    }

    /// All rule-abiding `(pick cell, release cell)` pairs, pick-major in cell order.
    pub fn valid_moves(&self) -> Vec<(CellCoord, CellCoord)> {
        let cells = self.task.cells();
        let mut out = Vec::new();
        for &from in &cells {
            for &to in &cells {
                if self.is_valid_move(from, to) {
                    out.push((from, to));
                }
            }
        }
        out
    }

    /// Moves the object in `from` to `to` without checking the rules.
    pub(crate) fn moved(&self, from: CellCoord, to: CellCoord) -> SystemState {
        let mut next = self.clone();
        let obj = self.occupant(from).expect("move source must be occupied");
        next.assignment[obj] = to;
        next.canonical()
    }
}

/// Continuous pick-and-place action in cell-grid coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub pick: [f64; 2],
    pub release: [f64; 2],
}

impl Action {
    pub fn new(pick: [f64; 2], release: [f64; 2]) -> Self {
        Action { pick, release }
    }

    pub fn between(from: CellCoord, to: CellCoord) -> Self {
        Action { pick: from.center(), release: to.center() }
    }

    /// The action undoing this one: pick where this one released.
    pub fn reversed(&self) -> Self {
        Action { pick: self.release, release: self.pick }
    }

    /// `(p_x, p_y, r_x, r_y)`.
    pub fn to_array(&self) -> [f64; 4] {
        [self.pick[0], self.pick[1], self.release[0], self.release[1]]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Action { pick: [a[0], a[1]], release: [a[2], a[3]] }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Action indicator `a` and action `u`; `u` is ignored when `a == 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionInfo {
    pub a: u8,
    pub u: Action,
}

impl ActionInfo {
    pub fn moved(u: Action) -> Self {
        ActionInfo { a: 1, u }
    }

    pub fn no_action() -> Self {
        ActionInfo { a: 0, u: Action::new([0.0; 2], [0.0; 2]) }
    }

    pub fn is_action(&self) -> bool {
        self.a == 1
    }
}

/// Rounds a coordinate to the nearest integer, halves going down.
fn snap_coord(v: f64) -> Option<i32> {
    if !v.is_finite() {
        return None;
    }
    let n = (v - 0.5).ceil();
    if n.abs() > 1e6 {
        return None;
    }
    Some(n as i32)
}

/// Rounds pick and release to the nearest cell centers; `None` when either
/// falls outside the grid.
pub fn snap(task: Task, action: &Action) -> Option<(CellCoord, CellCoord)> {
    let cell = |p: [f64; 2]| -> Option<CellCoord> {
        let c = CellCoord::new(snap_coord(p[0])?, snap_coord(p[1])?);
        task.contains(c).then_some(c)
    };
    Some((cell(action.pick)?, cell(action.release)?))
}

/// Discrete actions (cell centers) permitted in `state`.
pub fn valid_actions(state: &SystemState) -> Vec<Action> {
    state.valid_moves().into_iter().map(|(f, t)| Action::between(f, t)).collect()
}

/// Executes `action` after snapping it to cell centers.
pub fn apply_action(state: &SystemState, action: &Action) -> Result<SystemState, TaskError> {
    let invalid = || TaskError::InvalidAction { pick: action.pick, release: action.release };
    let (from, to) = snap(state.task, action).ok_or_else(invalid)?;
    if !state.is_valid_move(from, to) {
        return Err(invalid());
    }
    Ok(state.moved(from, to))
}

/// Task-irrelevant variation of an observation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Nuisance {
    /// Per-object positional offset from the cell center, indexed by object id.
    pub jitter: Vec<[f64; 2]>,
    pub lighting: f64,
    /// Harvesting only: per-bunch scale factor in `[0.9, 1.1]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scale: Vec<f64>,
    /// Harvesting only: per-bunch orientation in degrees.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub orientation: Vec<f64>,
    /// Harvesting only: which of the two bunch models is shown.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variant: Vec<bool>,
}

impl Nuisance {
    pub(crate) fn sample<R: rand::Rng>(task: Task, rng: &mut R) -> Self {
        let b = task.jitter_bound();
        let jitter = (0..N_OBJECTS).map(|_| [rng.random_range(-b..=b), rng.random_range(-b..=b)]).collect();
        let lighting = rng.random_range(0.0..1.0);
        match task {
            Task::Stacking => Nuisance { jitter, lighting, scale: vec![], orientation: vec![], variant: vec![] },
            Task::Harvesting => Nuisance {
                jitter,
                lighting,
                scale: (0..N_OBJECTS).map(|_| rng.random_range(0.9..=1.1)).collect(),
                orientation: (0..N_OBJECTS).map(|_| rng.random_range(-180.0..=180.0)).collect(),
                variant: (0..N_OBJECTS).map(|_| rng.random_bool(0.5)).collect(),
            },
        }
    }

    /// No jitter, zero lighting, unit scale, zero orientation, first model variant.
    pub fn nominal(task: Task) -> Self {
        let jitter = vec![[0.0, 0.0]; N_OBJECTS];
        match task {
            Task::Stacking => Nuisance { jitter, lighting: 0.0, scale: vec![], orientation: vec![], variant: vec![] },
            Task::Harvesting => Nuisance {
                jitter,
                lighting: 0.0,
                scale: vec![1.0; N_OBJECTS],
                orientation: vec![0.0; N_OBJECTS],
                variant: vec![false; N_OBJECTS],
            },
        }
    }

    /// Checks the per-task magnitude bounds.
    pub fn within_bounds(&self, task: Task) -> bool {
        let b = task.jitter_bound() + 1e-12;
        let jitter_ok = self.jitter.len() == N_OBJECTS && self.jitter.iter().flatten().all(|v| v.abs() <= b);
        let extras_ok = match task {
            Task::Stacking => self.scale.is_empty() && self.orientation.is_empty() && self.variant.is_empty(),
            Task::Harvesting => {
                self.scale.len() == N_OBJECTS
                    && self.orientation.len() == N_OBJECTS
                    && self.variant.len() == N_OBJECTS
                    && self.scale.iter().all(|s| (0.9 - 1e-12..=1.1 + 1e-12).contains(s))
                    && self.orientation.iter().all(|o| o.abs() <= 180.0)
            }
        };
        jitter_ok && extras_ok && self.lighting.is_finite()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub index: usize,
    pub state: SystemState,
    pub nuisance: Nuisance,
}

impl Observation {
    pub fn sample<R: rand::Rng>(index: usize, state: SystemState, rng: &mut R) -> Self {
        let nuisance = Nuisance::sample(state.task(), rng);
        Observation { index, state, nuisance }
    }

    /// Observed position of the object in `cell` (center plus jitter).
    pub fn object_position(&self, cell: CellCoord) -> Option<[f64; 2]> {
        let obj = self.state.occupant(cell)?;
        let j = self.nuisance.jitter.get(obj).copied().unwrap_or([0.0, 0.0]);
        let c = cell.center();
        Some([c[0] + j[0], c[1] + j[1]])
    }
}

/// The dataset atom `(O_i, O_j, rho)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionTuple {
    pub first: Observation,
    pub second: Observation,
    pub rho: ActionInfo,
}

impl TransitionTuple {
    /// The action tuple invariant: `second` follows from `first` under the snapped action,
    /// or both show the same state when no action took place.
    pub fn is_consistent(&self) -> bool {
        if self.rho.is_action() {
            apply_action(&self.first.state, &self.rho.u).is_ok_and(|s| s == self.second.state)
        } else {
            self.first.state == self.second.state
        }
    }
}
