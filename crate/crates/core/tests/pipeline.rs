//! Cross-module integration properties: heuristic output feeding the power
//! solver, solver improvements over equal split, and end-to-end evaluation.

use noma_mec::channel::{generate_scenario, ChannelMatrix, ChannelModel};
use noma_mec::heuristic::{run_heuristic, HeuristicOptions};
use noma_mec::model::{evaluate, SystemConfig, TaskSpec};
use noma_mec::power::{
    cluster_problem_from_assignment, solve_all, solve_cluster, ClusterStatus, SolverOptions,
};
use noma_mec::seed::stream;
use rand::Rng;

fn config(num_users: usize, num_clusters: usize, u_max: usize, num_freq_rbs: usize) -> SystemConfig {
    SystemConfig {
        num_users,
        num_freq_rbs,
        rb_bandwidth_hz: 180e3,
        num_comp_rbs: 30,
        comp_rb_capacity_cps: 10e9,
        max_users_per_rb: u_max,
        num_clusters,
        noise_psd_dbm_per_hz: -173.0,
        cell_radius_m: 1000.0,
    }
}

fn instance(seed: u64, cfg: &SystemConfig) -> (ChannelMatrix, Vec<TaskSpec>) {
    let scenario = generate_scenario(cfg, seed).unwrap();
    let channels = ChannelModel::default().generate(&scenario, cfg, seed);
    let mut rng = stream(seed, "tasks", &[]);
    let tasks = (0..cfg.num_users)
        .map(|_| TaskSpec {
            workload_cycles: 0.5e9 + 0.5e9 * rng.gen::<f64>(),
            input_bits: 5000.0 + 2000.0 * rng.gen::<f64>(),
            deadline_s: 0.4 + 0.1 * rng.gen::<f64>(),
            power_budget_w: 1.0,
        })
        .collect();
    (channels, tasks)
}

/// Regression property over 100 seeded instances: optimizing powers never
/// costs more energy than the heuristic's equal split. Clusters the
/// high-SINR program cannot solve keep their equal split, so the pipeline
/// total can only fall or stay put.
#[test]
fn power_solve_never_increases_total_energy() {
    let mut compared = 0;
    for seed in 0..100u64 {
        let cfg = config(6, 2, 3, 8);
        let (channels, tasks) = instance(seed, &cfg);
        let heur = run_heuristic(&channels, &tasks, &cfg, &HeuristicOptions::default()).unwrap();
        if !heur.shortfalls.is_empty() {
            continue;
        }
        let before = evaluate(&heur.assignment, &channels, &tasks, &cfg).total_energy_j;
        let solved = solve_all(&heur.assignment, &channels, &tasks, &cfg, &SolverOptions::default());
        let after = evaluate(&solved.assignment, &channels, &tasks, &cfg).total_energy_j;
        assert!(
            after <= before * (1.0 + 1e-9),
            "seed {seed}: solve raised energy {before} -> {after}"
        );
        compared += 1;
    }
    assert!(compared >= 90, "only {compared} instances were comparable");
}

/// Solving clusters in any order yields bit-identical powers: the solves
/// are independent.
#[test]
fn cluster_solve_order_is_irrelevant() {
    let cfg = config(6, 3, 2, 9);
    let (channels, tasks) = instance(7, &cfg);
    let heur = run_heuristic(&channels, &tasks, &cfg, &HeuristicOptions::default()).unwrap();
    let solver = SolverOptions::default();

    let solve_into = |assignment: &mut noma_mec::model::Assignment, i: usize| {
        let problem =
            cluster_problem_from_assignment(&heur.assignment, &channels, &tasks, &cfg, i).unwrap();
        if let Ok(sol) = solve_cluster(&problem, &solver) {
            for (j, &u) in heur.assignment.cluster_members(i).iter().enumerate() {
                for (k, &r) in heur.assignment.cluster_rbs(i).iter().enumerate() {
                    assignment.powers[u][r] = sol.powers_w[j][k];
                }
            }
        }
    };
    let mut forward = heur.assignment.clone();
    for i in 0..cfg.num_clusters {
        solve_into(&mut forward, i);
    }
    let mut backward = heur.assignment.clone();
    for i in (0..cfg.num_clusters).rev() {
        solve_into(&mut backward, i);
    }
    assert_eq!(forward.powers, backward.powers);
    assert_ne!(forward.powers, heur.assignment.powers, "no cluster solved at all");
}

/// A cluster whose RB set is empty is flagged and left untouched.
#[test]
fn rbless_cluster_is_flagged_not_modified() {
    let cfg = config(4, 2, 2, 4);
    let (channels, tasks) = instance(13, &cfg);
    let heur = run_heuristic(&channels, &tasks, &cfg, &HeuristicOptions::default()).unwrap();
    // Strip cluster 1's RBs to fake a starved cluster.
    let mut crippled = heur.assignment.clone();
    let stolen = crippled.cluster_rbs(1);
    for r in stolen {
        crippled.freq_map[r] = Some(0);
    }
    for &u in &crippled.cluster_members(1) {
        for p in crippled.powers[u].iter_mut() {
            *p = 0.0;
        }
    }
    let solved = solve_all(&crippled, &channels, &tasks, &cfg, &SolverOptions::default());
    assert_eq!(solved.statuses[1], ClusterStatus::NoRbs);
    for &u in &crippled.cluster_members(1) {
        assert_eq!(solved.assignment.powers[u], crippled.powers[u]);
    }
}

/// The full pipeline (heuristic + solver, equal-split fallback) meets
/// every deadline whenever the heuristic met the minimum rates.
#[test]
fn pipeline_meets_deadlines_end_to_end() {
    let mut checked = 0;
    for seed in 200..220u64 {
        let cfg = config(6, 2, 3, 10);
        let (channels, tasks) = instance(seed, &cfg);
        let heur = run_heuristic(&channels, &tasks, &cfg, &HeuristicOptions::default()).unwrap();
        if !heur.shortfalls.is_empty() {
            continue;
        }
        let solved = solve_all(&heur.assignment, &channels, &tasks, &cfg, &SolverOptions::default());
        let report = evaluate(&solved.assignment, &channels, &tasks, &cfg);
        assert!(report.all_feasible(), "seed {seed}: infeasible after full pipeline");
        assert!(report.audit.structural_passed());
        checked += 1;
    }
    assert!(checked >= 15, "only {checked}/20 instances had satisfiable rates");
}
