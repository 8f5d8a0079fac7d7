use noma_mec::channel::{generate_scenario, ChannelModel};
use noma_mec::heuristic::{run_heuristic, HeuristicOptions};
use noma_mec::model::{default_num_clusters, evaluate, jain_fairness, SystemConfig, TaskSpec};
use noma_mec::power::{solve_all, SolverOptions};
use noma_mec::seed::{derive_seed, stream};
use rand::Rng;

fn tasks_for(seed: u64, n: usize) -> Vec<TaskSpec> {
    let mut rng = stream(seed, "tasks", &[]);
    (0..n).map(|_| TaskSpec {
        workload_cycles: 0.5e9 + 0.5e9*rng.gen::<f64>(),
        input_bits: 5000.0 + 2000.0*rng.gen::<f64>(),
        deadline_s: 0.4 + 0.1*rng.gen::<f64>(),
        power_budget_w: 1.0,
    }).collect()
}

fn energy_cell(u_max: usize, m_f: usize, seed: u64, tasks: &[TaskSpec]) -> Option<f64> {
    let cfg = SystemConfig {
        num_users: 6, num_freq_rbs: m_f, rb_bandwidth_hz: 180e3,
        num_comp_rbs: 30, comp_rb_capacity_cps: 10e9,
        max_users_per_rb: u_max, num_clusters: default_num_clusters(6, u_max),
        noise_psd_dbm_per_hz: -173.0, cell_radius_m: 1000.0,
    };
    let sc = generate_scenario(&cfg, seed).unwrap();
    let ch = ChannelModel::default().generate(&sc, &cfg, seed);
    let h = run_heuristic(&ch, &tasks, &cfg, &HeuristicOptions::default()).unwrap();
    let out = solve_all(&h.assignment, &ch, &tasks, &cfg, &SolverOptions::default());
    let rep = evaluate(&out.assignment, &ch, &tasks, &cfg);
    (h.shortfalls.is_empty() && rep.all_feasible()).then_some(rep.total_energy_j * 1e3)
}

fn main() {
    // Criterion 2/3 analog: common feasible subset across all 12 cells.
    let m_fs = [6usize, 8, 10, 12];
    let umaxes = [1usize, 2, 3];
    let mut table: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); m_fs.len()]; umaxes.len()];
    let mut kept = 0;
    for rep in 0..50u64 {
        let seed = derive_seed(2024, "instance", &[rep]);
        let tasks = tasks_for(seed, 6);
        let mut cells = Vec::new();
        let mut ok = true;
        for &u in &umaxes { for &m in &m_fs {
            match energy_cell(u, m, seed, &tasks) { Some(e) => cells.push(e), None => { ok = false; } }
        }}
        if !ok { continue; }
        kept += 1;
        let mut it = cells.into_iter();
        for ui in 0..umaxes.len() { for mi in 0..m_fs.len() {
            table[ui][mi].push(it.next().unwrap());
        }}
    }
    println!("common subset n={kept}");
    for (ui, &u) in umaxes.iter().enumerate() {
        let means: Vec<String> = (0..m_fs.len()).map(|mi| {
            let v = &table[ui][mi];
            format!("{:.2}", v.iter().sum::<f64>()/v.len() as f64)
        }).collect();
        println!("umax={u}: {}", means.join("  "));
    }

    // Criterion 4 analog: fairness of fine vs coarse computing granularity.
    println!("--- fairness (fig5 analog, heuristic only) ---");
    let scenarios = [(30usize, 3e9), (90, 1e9), (30, 4e9), (120, 1e9)];
    for users in [6usize, 9, 12] {
        let mut means = vec![0.0f64; scenarios.len()];
        let mut n = 0usize;
        for rep in 0..50u64 {
            let seed = derive_seed(77, "instance", &[rep]);
            let tasks = tasks_for(seed, users);
            let mut vals = Vec::new();
            for &(m_c, cap) in &scenarios {
                let cfg = SystemConfig {
                    num_users: users, num_freq_rbs: 12, rb_bandwidth_hz: 180e3,
                    num_comp_rbs: m_c, comp_rb_capacity_cps: cap,
                    max_users_per_rb: 3, num_clusters: default_num_clusters(users, 3),
                    noise_psd_dbm_per_hz: -173.0, cell_radius_m: 1000.0,
                };
                let sc = generate_scenario(&cfg, seed).unwrap();
                let ch = ChannelModel::default().generate(&sc, &cfg, seed);
                let h = run_heuristic(&ch, &tasks, &cfg, &HeuristicOptions::default()).unwrap();
                let q: Vec<f64> = (0..users).map(|u| {
                    let x = h.assignment.comp_rbs_of(u) as f64;
                    tasks[u].workload_cycles / (x * cfg.comp_rb_capacity_cps)
                }).collect();
                vals.push(jain_fairness(&q).unwrap());
            }
            n += 1;
            for (i, v) in vals.into_iter().enumerate() { means[i] += v; }
        }
        let labels = ["30x3", "90x1", "30x4", "120x1"];
        let strs: Vec<String> = means.iter().zip(labels).map(|(m, l)| format!("{l}={:.4}", m/n as f64)).collect();
        println!("U={users}: {}", strs.join("  "));
    }
}
