//! Calibration run: individual, ensemble and naive `% all` on stacking and the
//! harvesting c_max sweep for one mapping configuration.
//!
//! Usage: `tune [sigma_noise p_merge p_split p_outlier [c_max [n_pairs]]]`

use std::time::Instant;

use ens_lsr::eval::{eval_pairs, sweep_cmax, sweep_members, SweepSettings};
use ens_lsr::planner::{build_cmax_members, build_members, DEFAULT_MAX_PATHS};
use ens_lsr::task::{generate_dataset, DatasetParams};
use ens_lsr::{MappingConfig, RoadmapConfig, SimilarityConfig, Task};

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let mut mapping = MappingConfig::default();
    if args.len() >= 4 {
        (mapping.sigma_noise, mapping.p_merge, mapping.p_split, mapping.p_outlier) =
            (args[0], args[1], args[2], args[3]);
    }
    let c_max = args.get(4).map_or(20, |&c| c as usize);
    let n_pairs = args.get(5).map_or(300, |&n| n as usize);
    println!("mapping {mapping:?} c_max {c_max} pairs {n_pairs}");

    let t = Instant::now();
    let dataset = generate_dataset(&DatasetParams::new(Task::Stacking, 2500, 1));
    let seeds: Vec<u64> = (1..=10).collect();
    let members = build_members(&dataset, &seeds, &mapping, &RoadmapConfig::new(c_max, false)).unwrap();
    for m in &members {
        let r = m.roadmap();
        print!("[{} nodes {} edges eps {:.3}] ", r.nodes.len(), r.edges.len(), r.epsilon_used);
    }
    println!();
    for harness_seed in 0..3 {
        let settings =
            SweepSettings { harness_seed, max_paths: DEFAULT_MAX_PATHS, similarity: SimilarityConfig::default() };
        let rows = sweep_members(&members, &eval_pairs(Task::Stacking, harness_seed, n_pairs), &settings);
        for r in rows.iter().filter(|r| r.m == 3 || r.m == 10) {
            print!("m{} {} all {:.1} exists {:.1} | ", r.m, r.system, r.pct_all, r.pct_exists);
        }
        println!();
    }
    println!("stacking {:.1}s", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let dataset = generate_dataset(&DatasetParams::new(Task::Harvesting, 5000, 1));
    let cmaxes: Vec<usize> = std::iter::once(1).chain((1..10).map(|k| 10 * k)).collect();
    let members = build_cmax_members(&dataset, 1, &cmaxes, &mapping, &RoadmapConfig::new(1, true)).unwrap();
    let settings =
        SweepSettings { harness_seed: 0, max_paths: DEFAULT_MAX_PATHS, similarity: SimilarityConfig::default() };
    for (r, m) in sweep_cmax(&members, &eval_pairs(Task::Harvesting, 0, n_pairs), &settings)
        .iter()
        .zip(members.iter().map(Some).chain([None]))
    {
        let shape = m
            .map(|m| format!("{} nodes {} edges", m.roadmap().nodes.len(), m.roadmap().edges.len()))
            .unwrap_or_default();
        println!(
            "c_max {} {}: all {:.1} any {:.1} exists {:.1} {shape}",
            r.c_max, r.system, r.pct_all, r.pct_any, r.pct_exists
        );
    }
    println!("harvesting {:.1}s", t.elapsed().as_secs_f64());
}
