//! Seeded experiment sweeps: generate instances, run the heuristic and the
//! power solver (plus the exhaustive oracle where asked), aggregate, and
//! emit CSV/JSON tables.

mod config;
pub mod files;
mod output;

pub use config::{
    parse_config, parse_config_text, CompScenario, ExperimentId, ExperimentSpec, SweepVar,
    TaskBounds,
};
pub use output::{render_instances_csv, render_json, render_summary_csv, write_result_files};

use crate::channel::{generate_scenario, ChannelMatrix};
use crate::heuristic::{run_heuristic, HeuristicOptions};
use crate::model::{default_num_clusters, evaluate, SystemConfig, TaskSpec};
use crate::oracle::{enumerate_optimal, TinyInstanceLimit};
use crate::power::{solve_all, SolverOptions};
use crate::seed::{derive_seed, stream};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid experiment: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One experiment family: a u_max value (fig2), a computing scenario
/// (fig4/fig5), or nothing.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    None,
    UserCap(usize),
    Computing(CompScenario),
}

impl Family {
    pub fn label(&self) -> Option<String> {
        match self {
            Family::None => None,
            Family::UserCap(u) => Some(u.to_string()),
            Family::Computing(s) => Some(s.label()),
        }
    }
}

/// Flat per-instance record; per-experiment writers pick their columns.
#[derive(Debug, Clone, Serialize)]
pub struct InstanceRow {
    pub sweep_value: f64,
    pub family: Option<String>,
    pub replication: usize,
    pub seed: u64,
    /// Every user met its deadline end to end.
    pub feasible: bool,
    pub energy_mj: f64,
    pub mean_comp_time_ms: f64,
    pub fairness_index: Option<f64>,
    pub spectral_eff_bps_hz: f64,
    pub oracle_energy_mj: Option<f64>,
    pub gap_pct: Option<f64>,
}

/// Aggregate over the feasible replications of one sweep point.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub sweep_value: f64,
    pub family: Option<String>,
    pub n: usize,
    pub n_feasible: usize,
    pub mean_energy_mj: f64,
    pub std_energy_mj: f64,
    pub mean_comp_time_ms: f64,
    pub mean_fairness: Option<f64>,
    pub mean_spectral_eff: f64,
    pub mean_oracle_energy_mj: Option<f64>,
    pub median_gap_pct: Option<f64>,
    pub max_gap_pct: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ResultTable {
    pub id: ExperimentId,
    pub sweep: SweepVar,
    pub master_seed: u64,
    pub instances: Vec<InstanceRow>,
    pub summary: Vec<SummaryRow>,
}

/// System config for one (sweep value, family) cell.
fn instance_config(spec: &ExperimentSpec, value: f64, family: &Family) -> SystemConfig {
    let mut cfg = spec.base.clone();
    match spec.sweep {
        SweepVar::NumUsers => cfg.num_users = value.round() as usize,
        SweepVar::NumFreqRbs => cfg.num_freq_rbs = value.round() as usize,
        SweepVar::AvgInputBits => {}
    }
    match family {
        Family::None => {}
        Family::UserCap(u) => cfg.max_users_per_rb = *u,
        Family::Computing(s) => {
            cfg.num_comp_rbs = s.num_comp_rbs;
            cfg.comp_rb_capacity_cps = s.capacity_cps;
        }
    }
    if spec.auto_clusters {
        cfg.num_clusters = default_num_clusters(cfg.num_users, cfg.max_users_per_rb);
    }
    cfg
}

/// Task bounds for one sweep value (the input sweep recenters the range).
fn instance_bounds(spec: &ExperimentSpec, value: f64) -> TaskBounds {
    let mut bounds = spec.tasks.clone();
    if spec.sweep == SweepVar::AvgInputBits {
        let half = (bounds.input_bits.1 - bounds.input_bits.0) / 2.0;
        bounds.input_bits = ((value - half).max(1.0), value + half);
    }
    bounds
}

/// Draws one instance's tasks from its dedicated stream.
pub fn generate_tasks(bounds: &TaskBounds, num_users: usize, instance_seed: u64) -> Vec<TaskSpec> {
    let mut rng = stream(instance_seed, "tasks", &[]);
    let mut draw = |(lo, hi): (f64, f64)| lo + (hi - lo) * rng.gen::<f64>();
    (0..num_users)
        .map(|_| TaskSpec {
            workload_cycles: draw(bounds.workload_cycles),
            input_bits: draw(bounds.input_bits),
            deadline_s: draw(bounds.deadline_s),
            power_budget_w: bounds.power_budget_w,
        })
        .collect()
}

/// Builds the channel matrix and tasks for one instance seed.
pub fn generate_instance(
    spec: &ExperimentSpec,
    cfg: &SystemConfig,
    bounds: &TaskBounds,
    instance_seed: u64,
) -> Result<(ChannelMatrix, Vec<TaskSpec>), ExperimentError> {
    let scenario = generate_scenario(cfg, instance_seed)
        .map_err(|e| ExperimentError::Validation(e.to_string()))?;
    let channels = spec.channel.generate(&scenario, cfg, instance_seed);
    let tasks = generate_tasks(bounds, cfg.num_users, instance_seed);
    Ok((channels, tasks))
}

fn run_one(
    spec: &ExperimentSpec,
    value: f64,
    family: &Family,
    sweep_idx: usize,
    replication: usize,
    master_seed: u64,
    with_oracle: bool,
) -> Result<InstanceRow, ExperimentError> {
    let cfg = instance_config(spec, value, family);
    cfg.validate().map_err(|e| ExperimentError::Validation(e.to_string()))?;
    let bounds = instance_bounds(spec, value);
    // Family deliberately left out: families at the same sweep point share
    // their instance draws, making family comparisons paired.
    let instance_seed =
        derive_seed(master_seed, "instance", &[sweep_idx as u64, replication as u64]);
    let (channels, tasks) = generate_instance(spec, &cfg, &bounds, instance_seed)?;

    let heur = run_heuristic(&channels, &tasks, &cfg, &HeuristicOptions::default())
        .map_err(|e| ExperimentError::Validation(e.to_string()))?;
    let solver_opts = SolverOptions::default();
    let solved = solve_all(&heur.assignment, &channels, &tasks, &cfg, &solver_opts);
    let report = evaluate(&solved.assignment, &channels, &tasks, &cfg);

    let (oracle_energy_mj, gap_pct) = if with_oracle {
        match enumerate_optimal(&channels, &tasks, &cfg, &TinyInstanceLimit::default(), &solver_opts)
        {
            Ok(oracle) => {
                let oracle_mj = oracle.total_energy_j * 1e3;
                let gap = if report.total_energy_j.is_finite() && oracle.total_energy_j > 0.0 {
                    Some(
                        (report.total_energy_j - oracle.total_energy_j) / oracle.total_energy_j
                            * 100.0,
                    )
                } else {
                    None
                };
                (Some(oracle_mj), gap)
            }
            Err(_) => (None, None),
        }
    } else {
        (None, None)
    };

    Ok(InstanceRow {
        sweep_value: value,
        family: family.label(),
        replication,
        seed: instance_seed,
        feasible: report.all_feasible(),
        energy_mj: report.total_energy_j * 1e3,
        mean_comp_time_ms: report.mean_computing_time_s() * 1e3,
        fairness_index: report.fairness_index,
        spectral_eff_bps_hz: report.spectral_efficiency,
        oracle_energy_mj,
        gap_pct,
    })
}

fn families(spec: &ExperimentSpec) -> Vec<Family> {
    match spec.id {
        ExperimentId::Fig2 => spec.umax_values.iter().map(|&u| Family::UserCap(u)).collect(),
        ExperimentId::Fig4 | ExperimentId::Fig5 => {
            spec.comp_scenarios.iter().map(|s| Family::Computing(*s)).collect()
        }
        _ => vec![Family::None],
    }
}

fn summarize(rows: &[InstanceRow], value: f64, family: &Family) -> SummaryRow {
    let cell: Vec<&InstanceRow> = rows
        .iter()
        .filter(|r| r.sweep_value == value && r.family == family.label())
        .collect();
    let feasible: Vec<&&InstanceRow> = cell.iter().filter(|r| r.feasible).collect();
    let mean = |xs: &[f64]| -> f64 {
        if xs.is_empty() {
            f64::NAN
        } else {
            xs.iter().sum::<f64>() / xs.len() as f64
        }
    };
    let std = |xs: &[f64]| -> f64 {
        if xs.len() < 2 {
            0.0
        } else {
            let m = mean(xs);
            (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
        }
    };
    let energies: Vec<f64> = feasible.iter().map(|r| r.energy_mj).collect();
    let comp_times: Vec<f64> = feasible.iter().map(|r| r.mean_comp_time_ms).collect();
    let fairness: Vec<f64> = feasible.iter().filter_map(|r| r.fairness_index).collect();
    let ses: Vec<f64> = feasible.iter().map(|r| r.spectral_eff_bps_hz).collect();
    let oracle: Vec<f64> = feasible.iter().filter_map(|r| r.oracle_energy_mj).collect();
    let mut gaps: Vec<f64> = feasible.iter().filter_map(|r| r.gap_pct).collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).expect("finite gaps"));
    let median_gap = if gaps.is_empty() {
        None
    } else if gaps.len() % 2 == 1 {
        Some(gaps[gaps.len() / 2])
    } else {
        Some((gaps[gaps.len() / 2 - 1] + gaps[gaps.len() / 2]) / 2.0)
    };
    SummaryRow {
        sweep_value: value,
        family: family.label(),
        n: cell.len(),
        n_feasible: feasible.len(),
        mean_energy_mj: mean(&energies),
        std_energy_mj: std(&energies),
        mean_comp_time_ms: mean(&comp_times),
        mean_fairness: if fairness.is_empty() { None } else { Some(mean(&fairness)) },
        mean_spectral_eff: mean(&ses),
        mean_oracle_energy_mj: if oracle.is_empty() { None } else { Some(mean(&oracle)) },
        median_gap_pct: median_gap,
        max_gap_pct: gaps.last().copied(),
    }
}

/// Runs the whole sweep. Replications execute in parallel; rows come back
/// in deterministic (sweep, family, replication) order regardless of the
/// thread count.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ResultTable, ExperimentError> {
    spec.validate()?;
    let master_seed = spec.seed.unwrap_or(0);
    let with_oracle = spec.id == ExperimentId::Fig1;
    let family_list = families(spec);

    let mut jobs = Vec::new();
    for (si, &value) in spec.values.iter().enumerate() {
        for family in &family_list {
            for rep in 0..spec.replications {
                jobs.push((si, value, family.clone(), rep));
            }
        }
    }
    let instances: Result<Vec<InstanceRow>, ExperimentError> = jobs
        .par_iter()
        .map(|(si, value, family, rep)| {
            run_one(spec, *value, family, *si, *rep, master_seed, with_oracle)
        })
        .collect();
    let instances = instances?;

    let mut summary = Vec::new();
    for &value in &spec.values {
        for family in &family_list {
            summary.push(summarize(&instances, value, family));
        }
    }
    Ok(ResultTable { id: spec.id, sweep: spec.sweep, master_seed, instances, summary })
}
