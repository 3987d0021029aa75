//! Ensemble latent space roadmap (ENS-LSR) visual action planning.
//!
//! Several imperfect roadmap planners each propose shortest plans between a
//! start and a goal observation. The ensemble scores every plan by how well
//! the other planners corroborate it and keeps the best-scoring plans.
//!
//! - [`task`]: box stacking and grape harvesting simulators, datasets and the
//!   ground-truth plan oracle.
//! - [`mapping`]: deterministic synthetic encoders/decoders with injected errors.
//! - [`roadmap`]: clustering and action-averaged roadmap construction.
//! - [`planner`]: single-member planning over a roadmap.
//! - [`ensemble`]: plan similarity measures and majority-similarity selection.
//! - [`eval`]: metrics and experiment sweeps with CSV output.

pub mod ensemble;
pub mod eval;
pub(crate) mod keyed;
pub mod mapping;
pub mod planner;
pub mod roadmap;
pub mod task;
pub(crate) mod union_find;

pub use ensemble::{naive_select, select_plans, Measure, Selection, SimilarityConfig};
pub use mapping::{make_module, LatentVector, MappingConfig, MappingModule};
pub use planner::{plan_member, PlanSet, Slsr, VisualActionPlan};
pub use roadmap::{build_roadmap, Roadmap, RoadmapConfig};
pub use task::{Action, Dataset, Observation, SystemState, Task};
