use noma_mec::channel::{generate_scenario, ChannelModel};
use noma_mec::heuristic::{run_heuristic, HeuristicOptions};
use noma_mec::model::{evaluate, SystemConfig, TaskSpec, default_num_clusters};
use noma_mec::power::{solve_all, ClusterStatus, SolverOptions};
use noma_mec::seed::stream;
use rand::Rng;

fn main() {
    for (users, m_f, u_max) in [(6usize, 8usize, 3usize), (6, 12, 2), (6, 6, 1), (10, 12, 3), (4, 4, 2)] {
        let cfg = SystemConfig {
            num_users: users, num_freq_rbs: m_f, rb_bandwidth_hz: 180e3,
            num_comp_rbs: 30, comp_rb_capacity_cps: 10e9,
            max_users_per_rb: u_max, num_clusters: default_num_clusters(users, u_max),
            noise_psd_dbm_per_hz: -173.0, cell_radius_m: 1000.0,
        };
        let mut solved = 0; let mut infeasible = 0; let mut other = 0; let mut shortfall = 0;
        let mut feasible_rows = 0;
        for seed in 0..50u64 {
            let sc = generate_scenario(&cfg, seed).unwrap();
            let ch = ChannelModel::default().generate(&sc, &cfg, seed);
            let mut rng = stream(seed, "tasks", &[]);
            let tasks: Vec<TaskSpec> = (0..users).map(|_| TaskSpec {
                workload_cycles: 0.5e9 + 0.5e9*rng.gen::<f64>(),
                input_bits: 5000.0 + 2000.0*rng.gen::<f64>(),
                deadline_s: 0.4 + 0.1*rng.gen::<f64>(),
                power_budget_w: 1.0,
            }).collect();
            let h = run_heuristic(&ch, &tasks, &cfg, &HeuristicOptions::default()).unwrap();
            if !h.shortfalls.is_empty() { shortfall += 1; }
            let out = solve_all(&h.assignment, &ch, &tasks, &cfg, &SolverOptions::default());
            for s in &out.statuses {
                match s {
                    ClusterStatus::Solved{..} => solved += 1,
                    ClusterStatus::Infeasible => infeasible += 1,
                    _ => other += 1,
                }
            }
            let rep = evaluate(&out.assignment, &ch, &tasks, &cfg);
            if rep.all_feasible() { feasible_rows += 1; }
        }
        println!("U={users} Mf={m_f} umax={u_max}: clusters solved={solved} infeasible={infeasible} other={other} | instances shortfall={shortfall} feasible={feasible_rows}/50");
    }
}
