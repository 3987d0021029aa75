//! `ens-lsr`: dataset generation, roadmap building, planning and evaluation sweeps.

mod config;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use ens_lsr::ensemble::{naive_select, select_plans, PlanRef, ScoreRow};
use ens_lsr::eval::{eval_pairs, sweep_cmax, sweep_members, sweep_similarity, write_csv, SweepSettings};
use ens_lsr::mapping::ModuleRecord;
use ens_lsr::roadmap::wcc_count;
use ens_lsr::task::{generate_dataset, read_dataset, write_dataset, Nuisance, HOLDOUT_INDEX_BASE};
use ens_lsr::{make_module, Dataset, MappingModule, Observation, PlanSet, Roadmap, Slsr, SystemState};
use serde::{Deserialize, Serialize};

use config::{ConfigError, RunConfig};

const DATASET_FILE: &str = "dataset.jsonl";

#[derive(Parser)]
#[command(name = "ens-lsr", version, about = "Ensemble latent space roadmap planning experiments")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "ENS_LSR_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a training dataset.
    GenDataset {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides dataset.n_tuples.
        #[arg(long)]
        n_tuples: Option<usize>,
        /// Overrides dataset.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Build one mapping module per seed and one roadmap per (seed, c_max).
    Build {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Defaults to io.output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan between two observations with every built member.
    Plan {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        start: PathBuf,
        #[arg(long)]
        goal: PathBuf,
        /// Supplies planner and similarity settings; defaults apply without it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print every member's plans without selection.
        #[arg(long)]
        naive: bool,
        /// Print the full score table.
        #[arg(long)]
        trace: bool,
    },
    /// Run an evaluation sweep and write its CSV.
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// Defaults to io.output_dir.
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long, value_enum)]
        sweep: Sweep,
        /// Defaults to `<io.output_dir>/<sweep>.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides eval.n_pairs.
        #[arg(long)]
        pairs: Option<usize>,
        /// Overrides eval.harness_seed.
        #[arg(long)]
        harness_seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Sweep {
    Members,
    Cmax,
    Similarity,
}

impl Sweep {
    fn name(self) -> &'static str {
        match self {
            Sweep::Members => "members",
            Sweep::Cmax => "cmax",
            Sweep::Similarity => "similarity",
        }
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("no member found a plan")]
    NoPlan,
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::NoPlan => 4,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Io(e.to_string()),
            ConfigError::Invalid(_) => CliError::Config(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::GenDataset { config, out, n_tuples, seed } => gen_dataset(&config, &out, n_tuples, seed),
        Command::Build { config, dataset, out } => build(&config, &dataset, out),
        Command::Plan { models, start, goal, config, naive, trace } => {
            plan(&models, &start, &goal, config.as_deref(), naive, trace)
        }
        Command::Eval { config, models, sweep, out, pairs, harness_seed } => {
            eval(&config, models, sweep, out, pairs, harness_seed)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn gen_dataset(config: &Path, out: &Path, n_tuples: Option<usize>, seed: Option<u64>) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let mut params = cfg.dataset_params();
    if let Some(n) = n_tuples {
        if n == 0 {
            return Err(CliError::Config("--n-tuples must be at least 1".into()));
        }
        params.n_tuples = n;
    }
    if let Some(s) = seed {
        params.seed = s;
    }
    let dataset = generate_dataset(&params);
    let file = File::create(out).map_err(|e| io_err(out, e))?;
    let mut w = BufWriter::new(file);
    write_dataset(&dataset, &mut w).map_err(|e| io_err(out, e))?;
    w.flush().map_err(|e| io_err(out, e))
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    read_dataset(BufReader::new(file)).map_err(|e| io_err(path, e))
}

fn module_file(dir: &Path, seed: u64) -> PathBuf {
    dir.join(format!("module_seed{seed}.json"))
}

fn roadmap_file(dir: &Path, seed: u64, c_max: usize) -> PathBuf {
    dir.join(format!("roadmap_seed{seed}_cmax{c_max}.json"))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn build(config: &Path, dataset_path: &Path, out: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let out = &out.unwrap_or_else(|| cfg.io.output_dir.clone());
    let dataset = load_dataset(dataset_path)?;
    if dataset.task() != cfg.task {
        return Err(CliError::Config(format!(
            "config task {} does not match dataset task {}",
            cfg.task,
            dataset.task()
        )));
    }
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let copy = out.join(DATASET_FILE);
    if fs::canonicalize(dataset_path).ok() != fs::canonicalize(&copy).ok() {
        fs::copy(dataset_path, &copy).map_err(|e| io_err(&copy, e))?;
    }
    let mapping = cfg.mapping_config();
    for &seed in &cfg.mapping.seeds {
        let module = make_module(&dataset, seed, &mapping).map_err(|e| CliError::Config(e.to_string()))?;
        let record = serde_json::to_string(&module.record()).expect("module records serialize");
        write_text(&module_file(out, seed), &record)?;
        for &c_max in &cfg.roadmap.c_max {
            let roadmap = ens_lsr::build_roadmap(&dataset, &module, &cfg.roadmap_config(c_max))
                .map_err(|e| CliError::Config(e.to_string()))?;
            let path = roadmap_file(out, seed, c_max);
            write_text(&path, &roadmap.to_json().expect("roadmaps serialize"))?;
            let reread = read_roadmap(&path)?;
            if wcc_count(&reread) > c_max {
                return Err(CliError::Io(format!("{}: written roadmap violates c_max = {c_max}", path.display())));
            }
        }
    }
    Ok(())
}

fn read_roadmap(path: &Path) -> Result<Roadmap, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Roadmap::from_json(&text).map_err(|e| io_err(path, e))
}

fn read_module(dir: &Path, seed: u64, dataset: &Dataset) -> Result<MappingModule, CliError> {
    let path = module_file(dir, seed);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let record: ModuleRecord = serde_json::from_str(&text).map_err(|e| io_err(&path, e))?;
    MappingModule::from_record(&record, dataset).map_err(|e| io_err(&path, e))
}

/// A loaded member with the seed and c_max it was built with.
struct Loaded {
    seed: u64,
    c_max: usize,
    member: Slsr,
}

/// Loads the members for the given `(seed, c_max)` combinations, sharing modules per seed.
fn load_members(dir: &Path, combos: &[(u64, usize)]) -> Result<Vec<Loaded>, CliError> {
    let dataset = load_dataset(&dir.join(DATASET_FILE))?;
    let mut modules: Vec<(u64, Arc<MappingModule>)> = Vec::new();
    let mut out = Vec::with_capacity(combos.len());
    for (i, &(seed, c_max)) in combos.iter().enumerate() {
        let module = match modules.iter().find(|(s, _)| *s == seed) {
            Some((_, m)) => m.clone(),
            None => {
                let m = Arc::new(read_module(dir, seed, &dataset)?);
                modules.push((seed, m.clone()));
                m
            }
        };
        let roadmap = read_roadmap(&roadmap_file(dir, seed, c_max))?;
        out.push(Loaded { seed, c_max, member: Slsr::new(i, module, roadmap) });
    }
    Ok(out)
}

/// Every `(seed, c_max)` with a roadmap file in `dir`, sorted.
fn discover_members(dir: &Path) -> Result<Vec<(u64, usize)>, CliError> {
    let mut combos = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let name = entry.map_err(|e| io_err(dir, e))?.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(rest) = name.strip_prefix("roadmap_seed").and_then(|r| r.strip_suffix(".json")) else { continue };
        let Some((seed, c_max)) = rest.split_once("_cmax") else { continue };
        if let (Ok(seed), Ok(c_max)) = (seed.parse(), c_max.parse()) {
            combos.push((seed, c_max));
        }
    }
    combos.sort_unstable();
    if combos.is_empty() {
        return Err(CliError::Io(format!("{}: no roadmap files found", dir.display())));
    }
    Ok(combos)
}

/// Either a full observation or a bare state shown with nominal nuisances.
#[derive(Deserialize)]
#[serde(untagged)]
enum ObservationInput {
    Observation(Observation),
    State(SystemState),
}

fn read_observation(path: &Path, index: usize) -> Result<Observation, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let input: ObservationInput = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: expected an observation or a state: {e}", path.display())))?;
    Ok(match input {
        ObservationInput::Observation(o) => o,
        ObservationInput::State(state) => {
            let nuisance = Nuisance::nominal(state.task());
            Observation { index, state, nuisance }
        }
    })
}

#[derive(Serialize)]
struct PrintedPlan {
    seed: u64,
    c_max: usize,
    path_id: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    node_sequence: Vec<usize>,
    actions: Vec<[f64; 4]>,
    states: Vec<SystemState>,
}

#[derive(Serialize)]
struct PlanOutput {
    selection: &'static str,
    n_members: usize,
    n_proposed: usize,
    plans: Vec<PrintedPlan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<Vec<ScoreRow>>,
}

fn plan(
    models: &Path,
    start: &Path,
    goal: &Path,
    config: Option<&Path>,
    naive: bool,
    trace: bool,
) -> Result<(), CliError> {
    let cfg = match config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let start = read_observation(start, HOLDOUT_INDEX_BASE)?;
    let goal = read_observation(goal, HOLDOUT_INDEX_BASE + 1)?;
    if start.state.task() != goal.state.task() {
        return Err(CliError::Config("start and goal belong to different tasks".into()));
    }
    let members = load_members(models, &discover_members(models)?)?;
    if members[0].member.module().task() != start.state.task() {
        return Err(CliError::Config("observations do not match the models' task".into()));
    }
    let sets: Vec<PlanSet> = members.iter().map(|m| m.member.plan(&start, &goal, cfg.planner.max_paths)).collect();
    let (chosen, scores): (Vec<PlanRef>, Option<Vec<ScoreRow>>) = if naive {
        (naive_select(&sets), None)
    } else {
        let sel = select_plans(&sets, &cfg.similarity());
        (sel.selected, Some(sel.scores))
    };
    if chosen.is_empty() {
        return Err(CliError::NoPlan);
    }
    let plans = chosen
        .iter()
        .map(|r| {
            let p = &sets[r.member].plans[r.plan];
            PrintedPlan {
                seed: members[r.member].seed,
                c_max: members[r.member].c_max,
                path_id: p.path_id,
                score: scores.as_ref().and_then(|s| s.iter().find(|row| row.plan == *r).map(|row| row.score)),
                node_sequence: p.node_sequence.clone(),
                actions: p.action_plan.iter().map(|a| a.to_array()).collect(),
                states: p.visual_plan.iter().map(|o| o.state.clone()).collect(),
            }
        })
        .collect();
    let output = PlanOutput {
        selection: if naive { "naive" } else { "ensemble" },
        n_members: members.len(),
        n_proposed: sets.iter().map(PlanSet::len).sum(),
        plans,
        trace: if trace { scores } else { None },
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    serde_json::to_writer_pretty(&mut lock, &output).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(lock).map_err(|e| CliError::Io(e.to_string()))
}

fn eval(
    config: &Path,
    models: Option<PathBuf>,
    sweep: Sweep,
    out: Option<PathBuf>,
    pairs: Option<usize>,
    harness_seed: Option<u64>,
) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let models = &models.unwrap_or_else(|| cfg.io.output_dir.clone());
    let out = &out.unwrap_or_else(|| cfg.io.output_dir.join(format!("{}.csv", sweep.name())));
    let n_pairs = pairs.unwrap_or(cfg.eval.n_pairs);
    if n_pairs == 0 {
        return Err(CliError::Config("--pairs must be at least 1".into()));
    }
    let combos: Vec<(u64, usize)> = match sweep {
        Sweep::Members | Sweep::Similarity => cfg.mapping.seeds.iter().map(|&s| (s, cfg.roadmap.c_max[0])).collect(),
        Sweep::Cmax => cfg.roadmap.c_max.iter().map(|&c| (cfg.mapping.seeds[0], c)).collect(),
    };
    let members: Vec<Slsr> = load_members(models, &combos)?.into_iter().map(|l| l.member).collect();
    if members[0].module().task() != cfg.task {
        return Err(CliError::Config(format!("config task {} does not match the models' task", cfg.task)));
    }
    let settings = SweepSettings {
        harness_seed: harness_seed.unwrap_or(cfg.eval.harness_seed),
        max_paths: cfg.planner.max_paths,
        similarity: cfg.similarity(),
    };
    let eval_set = eval_pairs(cfg.task, settings.harness_seed, n_pairs);
    let rows = match sweep {
        Sweep::Members => sweep_members(&members, &eval_set, &settings),
        Sweep::Cmax => sweep_cmax(&members, &eval_set, &settings),
        Sweep::Similarity => sweep_similarity(&members, &eval_set, &settings),
    };
    let file = File::create(out).map_err(|e| io_err(out, e))?;
    write_csv(&rows, BufWriter::new(file)).map_err(|e| io_err(out, e))
}
