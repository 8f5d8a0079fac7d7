//! Greedy user clustering and RB allocation.
//!
//! Three sequential phases produce a complete assignment except for final
//! powers:
//!
//! 1. users sorted by average channel gain; the strongest users take the
//!    lowest (first-decoded) order index of each cluster, block by block;
//! 2. computing RBs: first the minimum count per user that beats the
//!    deadline, then spares go wherever they shave the most off the implied
//!    minimum-rate requirement;
//! 3. frequency RBs: first enough RBs per cluster to satisfy every member's
//!    minimum rate, then spares go to the cluster with the largest implied
//!    energy gain. Throughout, each user's power budget is split equally
//!    across its cluster's RBs.

use crate::channel::ChannelMatrix;
use crate::model::{
    cluster_rates, Assignment, ClusterSlot, ModelError, SystemConfig, TaskSpec,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HeuristicError {
    #[error(transparent)]
    Config(#[from] ModelError),
    #[error("computing RBs exhausted before user {user} could meet its deadline")]
    InsufficientComputingRbs { user: usize },
}

/// How member powers react when a cluster gains an RB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PowerUpdateRule {
    /// Re-split the full budget over the updated RB set:
    /// `p = budget / |rb_set|`. The default.
    #[default]
    Resplit,
    /// Literal compound division: every allocation divides all member
    /// powers by `|rb_set| + 1`, so after `m` allocations each RB carries
    /// `budget / (m + 1)!`. Kept for comparison; it decays powers
    /// geometrically instead of holding the budget.
    LiteralCompound,
}

#[derive(Debug, Clone, Default)]
pub struct HeuristicOptions {
    pub power_rule: PowerUpdateRule,
}

/// Users per cluster, listed in decode order (position = order index).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterLayout {
    pub members: Vec<Vec<usize>>,
}

impl ClusterLayout {
    pub fn slot_of(&self, user: usize) -> Option<ClusterSlot> {
        for (i, members) in self.members.iter().enumerate() {
            if let Some(j) = members.iter().position(|&u| u == user) {
                return Some(ClusterSlot { cluster: i, order: j });
            }
        }
        None
    }
}

/// A user whose minimum rate was still unmet when frequency RBs ran out.
#[derive(Debug, Clone)]
pub struct RateShortfall {
    pub user: usize,
    pub required_bps: f64,
    pub achieved_bps: f64,
}

/// Result of the full pipeline: the assignment plus diagnostics.
#[derive(Debug, Clone)]
pub struct HeuristicOutcome {
    pub assignment: Assignment,
    pub layout: ClusterLayout,
    /// Nonempty when stage 1 exhausted the spectrum with unmet minimum
    /// rates; the assignment is still complete for diagnosis.
    pub shortfalls: Vec<RateShortfall>,
}

/// Minimum data rate implied by the deadline once `computing_time_s` of it
/// is spent at the cloudlet.
fn required_rate_bps(task: &TaskSpec, computing_time_s: f64) -> f64 {
    task.input_bits / (task.deadline_s - computing_time_s)
}

fn computing_time_s(task: &TaskSpec, rbs: u32, config: &SystemConfig) -> f64 {
    task.workload_cycles / (rbs as f64 * config.comp_rb_capacity_cps)
}

/// Phase 1: sort by average gain, deal users block-wise onto order indices.
pub fn cluster_users(
    channels: &ChannelMatrix,
    config: &SystemConfig,
) -> Result<ClusterLayout, HeuristicError> {
    config.validate()?;
    let mut order: Vec<usize> = (0..config.num_users).collect();
    // Stable: equal averages keep user-index order.
    order.sort_by(|&a, &b| {
        channels.avg_gains[b]
            .partial_cmp(&channels.avg_gains[a])
            .expect("finite gains")
    });
    let n = config.num_clusters;
    let mut members = vec![Vec::new(); n];
    for block in 0..config.max_users_per_rb {
        let start = block * n;
        if start >= config.num_users {
            break;
        }
        let end = ((block + 1) * n).min(config.num_users);
        for (cluster, &user) in order[start..end].iter().enumerate() {
            members[cluster].push(user);
        }
    }
    Ok(ClusterLayout { members })
}

/// Drop in the minimum-rate requirement if the slot gains one more RB.
fn computing_marginal(task: &TaskSpec, current_rbs: u32, config: &SystemConfig) -> f64 {
    let now = required_rate_bps(task, computing_time_s(task, current_rbs, config));
    let next = required_rate_bps(task, computing_time_s(task, current_rbs + 1, config));
    now - next
}

/// Phase 2: minimum computing RBs per slot, then greedy spares.
pub fn allocate_computing_rbs(
    layout: &ClusterLayout,
    tasks: &[TaskSpec],
    config: &SystemConfig,
) -> Result<Vec<Vec<u32>>, HeuristicError> {
    let mut alloc = vec![vec![0u32; config.max_users_per_rb]; config.num_clusters];
    let mut budget = config.num_comp_rbs as i64;
    for (i, members) in layout.members.iter().enumerate() {
        for (j, &user) in members.iter().enumerate() {
            loop {
                alloc[i][j] += 1;
                budget -= 1;
                if budget < 0 {
                    return Err(HeuristicError::InsufficientComputingRbs { user });
                }
                let q = computing_time_s(&tasks[user], alloc[i][j], config);
                if q < tasks[user].deadline_s {
                    break;
                }
            }
        }
    }
    while budget > 0 {
        // `>=` on purpose: among equal marginals the last-scanned slot wins.
        let mut best = 0.0f64;
        let mut best_slot = (0usize, 0usize);
        for (i, members) in layout.members.iter().enumerate() {
            for (j, &user) in members.iter().enumerate() {
                let marginal = computing_marginal(&tasks[user], alloc[i][j], config);
                if marginal >= best {
                    best = marginal;
                    best_slot = (i, j);
                }
            }
        }
        alloc[best_slot.0][best_slot.1] += 1;
        budget -= 1;
    }
    Ok(alloc)
}

/// Per-cluster interim power level: each member transmits
/// `budget * scale` on every RB of its cluster.
#[derive(Debug, Clone)]
pub(crate) struct PowerScale {
    rule: PowerUpdateRule,
    /// Literal mode: running divisor (grows factorially).
    divisor: f64,
    rb_count: usize,
}

impl PowerScale {
    fn new(rule: PowerUpdateRule) -> Self {
        PowerScale { rule, divisor: 1.0, rb_count: 0 }
    }

    fn on_allocation(&mut self) {
        self.rb_count += 1;
        self.divisor *= (self.rb_count + 1) as f64;
    }

    fn scale(&self) -> f64 {
        match self.rule {
            PowerUpdateRule::Resplit => {
                if self.rb_count == 0 {
                    0.0
                } else {
                    1.0 / self.rb_count as f64
                }
            }
            PowerUpdateRule::LiteralCompound => 1.0 / self.divisor,
        }
    }

    /// Scale the members would have if the cluster held one more RB.
    fn candidate_scale(&self) -> f64 {
        match self.rule {
            PowerUpdateRule::Resplit => 1.0 / (self.rb_count + 1) as f64,
            PowerUpdateRule::LiteralCompound => 1.0 / self.divisor,
        }
    }
}

/// Exact SIC rates of one cluster over `rbs` with every member at
/// `budget * scale` per RB.
fn rates_at_scale(
    members: &[usize],
    rbs: &[usize],
    scale: f64,
    channels: &ChannelMatrix,
    tasks: &[TaskSpec],
    config: &SystemConfig,
) -> Vec<f64> {
    let gains: Vec<Vec<f64>> = members
        .iter()
        .map(|&u| rbs.iter().map(|&r| channels.gains[u][r]).collect())
        .collect();
    let powers: Vec<Vec<f64>> = members
        .iter()
        .map(|&u| vec![tasks[u].power_budget_w * scale; rbs.len()])
        .collect();
    cluster_rates(&gains, &powers, config.noise_power_w(), config.rb_bandwidth_hz)
}

/// Implied-energy score of granting `rb` to a cluster: the drop in
/// `sum_u (L_u / R_u) * budget_u` between the current set and the candidate
/// set, rates taken at the corresponding equal-split powers.
pub(crate) fn stage2_score(
    members: &[usize],
    rbs: &[usize],
    scale: &PowerScale,
    rb: usize,
    channels: &ChannelMatrix,
    tasks: &[TaskSpec],
    config: &SystemConfig,
) -> f64 {
    let current = rates_at_scale(members, rbs, scale.scale(), channels, tasks, config);
    let mut candidate_rbs = rbs.to_vec();
    candidate_rbs.push(rb);
    let candidate = rates_at_scale(
        members,
        &candidate_rbs,
        scale.candidate_scale(),
        channels,
        tasks,
        config,
    );
    members
        .iter()
        .zip(current.iter().zip(candidate.iter()))
        .map(|(&u, (&r_now, &r_then))| {
            let t_now = if r_now > 0.0 { tasks[u].input_bits / r_now } else { f64::INFINITY };
            let t_then = if r_then > 0.0 { tasks[u].input_bits / r_then } else { f64::INFINITY };
            let diff = if t_now == t_then { 0.0 } else { t_now - t_then };
            diff * tasks[u].power_budget_w
        })
        .sum()
}

/// Phase 3 output.
#[derive(Debug, Clone)]
pub struct FrequencyAllocation {
    pub freq_map: Vec<Option<usize>>,
    /// Interim powers: `budget * scale` on the cluster's RBs, 0 elsewhere.
    pub powers: Vec<Vec<f64>>,
    pub rb_sets: Vec<Vec<usize>>,
    pub shortfalls: Vec<RateShortfall>,
}

/// Phase 3: satisfy minimum rates cluster by cluster, then spend spare RBs
/// where the implied energy falls the most.
pub fn allocate_frequency_rbs(
    layout: &ClusterLayout,
    comp_alloc: &[Vec<u32>],
    channels: &ChannelMatrix,
    tasks: &[TaskSpec],
    config: &SystemConfig,
    options: &HeuristicOptions,
) -> FrequencyAllocation {
    let n = config.num_clusters;
    let mut freq_map: Vec<Option<usize>> = vec![None; config.num_freq_rbs];
    let mut rb_sets: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut scales: Vec<PowerScale> = (0..n).map(|_| PowerScale::new(options.power_rule)).collect();

    let min_rate = |i: usize, j: usize, user: usize| {
        required_rate_bps(&tasks[user], computing_time_s(&tasks[user], comp_alloc[i][j], config))
    };
    let cluster_satisfied = |i: usize, rb_sets: &[Vec<usize>], scales: &[PowerScale]| {
        let rates = rates_at_scale(&layout.members[i], &rb_sets[i], scales[i].scale(), channels, tasks, config);
        layout.members[i]
            .iter()
            .enumerate()
            .all(|(j, &u)| rates[j] >= min_rate(i, j, u))
    };

    // Stage 1: while some cluster misses a minimum rate, give the next RB
    // to the unsatisfied cluster with the best current sum-rate.
    let mut unsatisfied: Vec<usize> =
        (0..n).filter(|&i| !layout.members[i].is_empty()).collect();
    let mut next_rb = 0usize;
    while !unsatisfied.is_empty() && next_rb < config.num_freq_rbs {
        let mut best_cluster = unsatisfied[0];
        let mut best_sum = f64::NEG_INFINITY;
        for &i in &unsatisfied {
            let sum: f64 = rates_at_scale(
                &layout.members[i],
                &rb_sets[i],
                scales[i].scale(),
                channels,
                tasks,
                config,
            )
            .iter()
            .sum();
            if sum > best_sum {
                best_sum = sum;
                best_cluster = i;
            }
        }
        rb_sets[best_cluster].push(next_rb);
        freq_map[next_rb] = Some(best_cluster);
        scales[best_cluster].on_allocation();
        next_rb += 1;
        if cluster_satisfied(best_cluster, &rb_sets, &scales) {
            unsatisfied.retain(|&i| i != best_cluster);
        }
    }

    let mut shortfalls = Vec::new();
    for &i in &unsatisfied {
        let rates = rates_at_scale(
            &layout.members[i],
            &rb_sets[i],
            scales[i].scale(),
            channels,
            tasks,
            config,
        );
        for (j, &user) in layout.members[i].iter().enumerate() {
            let required = min_rate(i, j, user);
            if rates[j] < required {
                shortfalls.push(RateShortfall {
                    user,
                    required_bps: required,
                    achieved_bps: rates[j],
                });
            }
        }
    }

    // Stage 2: remaining RBs go to the cluster with the best implied-energy
    // score; ties break toward the lowest cluster index.
    if shortfalls.is_empty() {
        for rb in next_rb..config.num_freq_rbs {
            let mut best_cluster = 0usize;
            let mut best_score = f64::NEG_INFINITY;
            for i in 0..n {
                if layout.members[i].is_empty() {
                    continue;
                }
                let score =
                    stage2_score(&layout.members[i], &rb_sets[i], &scales[i], rb, channels, tasks, config);
                if score > best_score {
                    best_score = score;
                    best_cluster = i;
                }
            }
            rb_sets[best_cluster].push(rb);
            freq_map[rb] = Some(best_cluster);
            scales[best_cluster].on_allocation();
        }
    }

    let mut powers = vec![vec![0.0; config.num_freq_rbs]; config.num_users];
    for i in 0..n {
        let scale = scales[i].scale();
        for &u in &layout.members[i] {
            for &r in &rb_sets[i] {
                powers[u][r] = tasks[u].power_budget_w * scale;
            }
        }
    }

    FrequencyAllocation { freq_map, powers, rb_sets, shortfalls }
}

/// Runs all three phases and assembles the assignment.
pub fn run_heuristic(
    channels: &ChannelMatrix,
    tasks: &[TaskSpec],
    config: &SystemConfig,
    options: &HeuristicOptions,
) -> Result<HeuristicOutcome, HeuristicError> {
    for (u, t) in tasks.iter().enumerate() {
        t.validate(u)?;
    }
    let layout = cluster_users(channels, config)?;
    let comp_alloc = allocate_computing_rbs(&layout, tasks, config)?;
    let freq = allocate_frequency_rbs(&layout, &comp_alloc, channels, tasks, config, options);

    let mut cluster_order = vec![None; config.num_users];
    for (i, members) in layout.members.iter().enumerate() {
        for (j, &u) in members.iter().enumerate() {
            cluster_order[u] = Some(ClusterSlot { cluster: i, order: j });
        }
    }
    let assignment = Assignment {
        cluster_order,
        freq_map: freq.freq_map,
        comp_alloc,
        powers: freq.powers,
    };
    Ok(HeuristicOutcome { assignment, layout, shortfalls: freq.shortfalls })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelMatrix;
    use crate::model::audit_constraints;
    use crate::seed::stream;
    use rand::Rng;

    fn config(num_users: usize, num_clusters: usize, u_max: usize) -> SystemConfig {
        SystemConfig {
            num_users,
            num_freq_rbs: 4,
            rb_bandwidth_hz: 180e3,
            num_comp_rbs: 16,
            comp_rb_capacity_cps: 10e9,
            max_users_per_rb: u_max,
            num_clusters,
            noise_psd_dbm_per_hz: -173.0,
            cell_radius_m: 1000.0,
        }
    }

    fn flat_tasks(n: usize) -> Vec<TaskSpec> {
        (0..n)
            .map(|_| TaskSpec {
                workload_cycles: 0.8e9,
                input_bits: 6000.0,
                deadline_s: 0.45,
                power_budget_w: 1.0,
            })
            .collect()
    }

    fn matrix_with_averages(avgs: &[f64], num_rbs: usize) -> ChannelMatrix {
        ChannelMatrix::from_gains(avgs.iter().map(|&a| vec![a; num_rbs]).collect())
    }

    #[test]
    fn clustering_deals_blocks_by_descending_gain() {
        // Averages 4,3,2,1 for users 0..4: strongest pair takes order 0.
        let cfg = config(4, 2, 2);
        let ch = matrix_with_averages(&[4.0, 3.0, 2.0, 1.0], 4);
        let layout = cluster_users(&ch, &cfg).unwrap();
        assert_eq!(layout.members, vec![vec![0, 2], vec![1, 3]]);
    }

    #[test]
    fn clustering_partial_block_fills_low_clusters() {
        let cfg = config(5, 2, 3);
        let ch = matrix_with_averages(&[5.0, 4.0, 3.0, 2.0, 1.0], 4);
        let layout = cluster_users(&ch, &cfg).unwrap();
        assert_eq!(layout.members, vec![vec![0, 2, 4], vec![1, 3]]);
    }

    #[test]
    fn clustering_equal_gains_is_stable() {
        let cfg = config(4, 2, 2);
        let ch = matrix_with_averages(&[1.0; 4], 4);
        let layout = cluster_users(&ch, &cfg).unwrap();
        assert_eq!(layout.members, vec![vec![0, 2], vec![1, 3]]);
    }

    #[test]
    fn clustering_rejects_bad_config() {
        let ch = matrix_with_averages(&[1.0; 4], 4);
        let bad = config(4, 3, 2); // 3 > floor(4/2)
        assert!(cluster_users(&ch, &bad).is_err());
    }

    #[test]
    fn lower_order_has_weakly_higher_average_gain() {
        let mut rng = stream(99, "test", &[]);
        for _ in 0..20 {
            let gains: Vec<Vec<f64>> =
                (0..6).map(|_| (0..4).map(|_| rng.gen::<f64>() + 1e-6).collect()).collect();
            let ch = ChannelMatrix::from_gains(gains);
            let cfg = config(6, 2, 3);
            let layout = cluster_users(&ch, &cfg).unwrap();
            for members in &layout.members {
                for w in members.windows(2) {
                    assert!(ch.avg_gains[w[0]] >= ch.avg_gains[w[1]]);
                }
            }
        }
    }

    #[test]
    fn phase1_minimum_is_smallest_strict_count() {
        let cfg = config(2, 1, 2);
        let ch = matrix_with_averages(&[2.0, 1.0], 4);
        // workload / C = 0.08 s < 0.45 s: one RB suffices.
        let alloc = allocate_computing_rbs(
            &cluster_users(&ch, &cfg).unwrap(),
            &flat_tasks(2),
            &cfg,
        )
        .unwrap();
        // Both slots got their minimum (1) plus greedy spares; totals 16.
        let total: u32 = alloc.iter().flatten().sum();
        assert_eq!(total, cfg.num_comp_rbs as u32);
        assert!(alloc[0][0] >= 1 && alloc[0][1] >= 1);
    }

    #[test]
    fn phase1_strictness_at_exact_deadline() {
        // workload / (1 * C) == deadline exactly: Q < D fails, so x = 2.
        let mut cfg = config(2, 1, 2);
        cfg.num_comp_rbs = 4;
        let mut tasks = flat_tasks(2);
        tasks[0].workload_cycles = tasks[0].deadline_s * cfg.comp_rb_capacity_cps;
        tasks[1].workload_cycles = tasks[1].deadline_s * cfg.comp_rb_capacity_cps;
        let ch = matrix_with_averages(&[2.0, 1.0], 4);
        let layout = cluster_users(&ch, &cfg).unwrap();
        let alloc = allocate_computing_rbs(&layout, &tasks, &cfg).unwrap();
        assert!(alloc[0][0] >= 2 && alloc[0][1] >= 2);
    }

    #[test]
    fn phase1_exhaustion_names_first_unsatisfiable_user() {
        let mut cfg = config(2, 1, 2);
        cfg.num_comp_rbs = 1;
        let mut tasks = flat_tasks(2);
        // Needs 2 RBs to fit the deadline.
        tasks[0].workload_cycles = 0.6 * cfg.comp_rb_capacity_cps;
        tasks[1].workload_cycles = 0.6 * cfg.comp_rb_capacity_cps;
        let ch = matrix_with_averages(&[2.0, 1.0], 4);
        let layout = cluster_users(&ch, &cfg).unwrap();
        match allocate_computing_rbs(&layout, &tasks, &cfg) {
            Err(HeuristicError::InsufficientComputingRbs { user }) => assert_eq!(user, 0),
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn computing_marginal_is_always_positive() {
        let cfg = config(2, 1, 2);
        let task = &flat_tasks(1)[0];
        for x in 1..40 {
            assert!(computing_marginal(task, x, &cfg) > 0.0);
        }
    }

    #[test]
    fn spare_goes_to_smaller_slot_after_tie_break() {
        // Identical tasks, two slots, two spares. The first spare ties and
        // goes to the last-scanned slot; the second must go to the other
        // slot, which now holds fewer RBs and offers the larger marginal.
        let mut cfg = config(2, 1, 2);
        let tasks = flat_tasks(2);
        // Minimum is 1 RB each; leave exactly 2 spares.
        cfg.num_comp_rbs = 4;
        let ch = matrix_with_averages(&[2.0, 1.0], 4);
        let layout = cluster_users(&ch, &cfg).unwrap();
        let alloc = allocate_computing_rbs(&layout, &tasks, &cfg).unwrap();
        assert_eq!(alloc[0][0], 2);
        assert_eq!(alloc[0][1], 2);
    }

    #[test]
    fn budget_is_conserved() {
        let cfg = config(6, 2, 3);
        let ch = matrix_with_averages(&[6.0, 5.0, 4.0, 3.0, 2.0, 1.0], 4);
        let layout = cluster_users(&ch, &cfg).unwrap();
        let alloc = allocate_computing_rbs(&layout, &flat_tasks(6), &cfg).unwrap();
        let total: u32 = alloc.iter().flatten().sum();
        assert_eq!(total, cfg.num_comp_rbs as u32);
    }

    /// Realistic random instance: positions drive gains through the real
    /// channel model.
    fn random_instance(seed: u64, cfg: &SystemConfig) -> (ChannelMatrix, Vec<TaskSpec>) {
        let scenario = crate::channel::generate_scenario(cfg, seed).unwrap();
        let ch = crate::channel::ChannelModel::default().generate(&scenario, cfg, seed);
        let mut rng = stream(seed, "tasks", &[]);
        let tasks = (0..cfg.num_users)
            .map(|_| TaskSpec {
                workload_cycles: 0.5e9 + 0.5e9 * rng.gen::<f64>(),
                input_bits: 5000.0 + 2000.0 * rng.gen::<f64>(),
                deadline_s: 0.4 + 0.1 * rng.gen::<f64>(),
                power_budget_w: 1.0,
            })
            .collect();
        (ch, tasks)
    }

    #[test]
    fn single_cluster_receives_every_rb_at_equal_split() {
        let cfg = config(2, 1, 2);
        let (ch, tasks) = random_instance(17, &cfg);
        let out = run_heuristic(&ch, &tasks, &cfg, &HeuristicOptions::default()).unwrap();
        assert!(out.shortfalls.is_empty());
        for r in 0..cfg.num_freq_rbs {
            assert_eq!(out.assignment.freq_map[r], Some(0));
        }
        let expected = 1.0 / cfg.num_freq_rbs as f64;
        for u in 0..2 {
            for r in 0..cfg.num_freq_rbs {
                assert!((out.assignment.powers[u][r] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn stage2_score_nonnegative_when_rates_improve() {
        let cfg = config(4, 2, 2);
        let (ch, tasks) = random_instance(23, &cfg);
        let layout = cluster_users(&ch, &cfg).unwrap();
        let mut scale = PowerScale::new(PowerUpdateRule::Resplit);
        scale.on_allocation(); // cluster currently holds RB 0
        let members = &layout.members[0];
        let before = rates_at_scale(members, &[0], scale.scale(), &ch, &tasks, &cfg);
        let after = rates_at_scale(members, &[0, 1], scale.candidate_scale(), &ch, &tasks, &cfg);
        let score = stage2_score(members, &[0], &scale, 1, &ch, &tasks, &cfg);
        if after.iter().zip(before.iter()).all(|(a, b)| a >= b) {
            assert!(score >= 0.0);
        }
    }

    #[test]
    fn stage2_prefers_the_cluster_that_gains_most() {
        // Average gains descend 0 > 1 > 2 > 3, so dealing puts {0,2} in
        // cluster 0 and {1,3} in cluster 1. Cluster 0's members are strong
        // on RBs 0-1, cluster 1's on RB 2. Tiny inputs keep minimum rates
        // low, so stage 1 hands RB 0 to cluster 0 and RB 1 to cluster 1;
        // the spare RB 2 must then go to cluster 1, which exploits it best.
        let mut cfg = config(4, 2, 2);
        cfg.num_freq_rbs = 3;
        cfg.num_comp_rbs = 8;
        let w = 1e-13;
        let gains = vec![
            vec![1.2e-9, 1.2e-9, w],
            vec![w, w, 2.1e-9],
            vec![0.9e-9, 0.9e-9, w],
            vec![w, w, 1.5e-9],
        ];
        let ch = ChannelMatrix::from_gains(gains);
        let mut tasks = flat_tasks(4);
        for t in &mut tasks {
            t.input_bits = 100.0; // easy minimum rates
        }
        let layout = cluster_users(&ch, &cfg).unwrap();
        assert_eq!(layout.members, vec![vec![0, 2], vec![1, 3]]);
        let out = run_heuristic(&ch, &tasks, &cfg, &HeuristicOptions::default()).unwrap();
        assert!(out.shortfalls.is_empty());
        assert_eq!(out.assignment.freq_map[0], Some(0));
        assert_eq!(out.assignment.freq_map[1], Some(1));
        assert_eq!(out.assignment.freq_map[2], Some(1));
    }

    #[test]
    fn rb_exhaustion_reports_shortfalls_but_returns_assignment() {
        let mut cfg = config(4, 2, 2);
        cfg.num_freq_rbs = 2;
        let (ch, mut tasks) = random_instance(31, &cfg);
        for t in &mut tasks {
            t.input_bits = 1e12; // unmeetable rates
        }
        let out = run_heuristic(&ch, &tasks, &cfg, &HeuristicOptions::default()).unwrap();
        assert!(!out.shortfalls.is_empty());
        // Every RB was still handed out before giving up.
        assert!(out.assignment.freq_map.iter().all(Option::is_some));
    }

    #[test]
    fn heuristic_output_passes_structural_audit() {
        for seed in 0..30u64 {
            let cfg = config(6, 2, 3);
            let (ch, tasks) = random_instance(seed, &cfg);
            let out = run_heuristic(&ch, &tasks, &cfg, &HeuristicOptions::default()).unwrap();
            let audit = audit_constraints(&out.assignment, &ch, &tasks, &cfg);
            assert!(audit.structural_passed(), "seed {seed}: {:?}", audit.checks);
        }
    }

    #[test]
    fn heuristic_is_deterministic() {
        let cfg = config(6, 3, 2);
        let (ch, tasks) = random_instance(41, &cfg);
        let a = run_heuristic(&ch, &tasks, &cfg, &HeuristicOptions::default()).unwrap();
        let b = run_heuristic(&ch, &tasks, &cfg, &HeuristicOptions::default()).unwrap();
        assert_eq!(a.assignment, b.assignment);
    }

    #[test]
    fn equal_split_law_holds_per_cluster() {
        let cfg = config(6, 2, 3);
        let (ch, tasks) = random_instance(53, &cfg);
        let out = run_heuristic(&ch, &tasks, &cfg, &HeuristicOptions::default()).unwrap();
        for i in 0..cfg.num_clusters {
            let rbs = out.assignment.cluster_rbs(i);
            if rbs.is_empty() {
                continue;
            }
            for &u in &out.assignment.cluster_members(i) {
                let expected = tasks[u].power_budget_w / rbs.len() as f64;
                for &r in &rbs {
                    assert!((out.assignment.powers[u][r] - expected).abs() < 1e-12);
                }
                // zero off-cluster
                for r in 0..cfg.num_freq_rbs {
                    if !rbs.contains(&r) {
                        assert_eq!(out.assignment.powers[u][r], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn literal_rule_decays_factorially() {
        let cfg = config(2, 1, 2);
        let (ch, tasks) = random_instance(61, &cfg);
        let opts = HeuristicOptions { power_rule: PowerUpdateRule::LiteralCompound };
        let out = run_heuristic(&ch, &tasks, &cfg, &opts).unwrap();
        let rbs = out.assignment.cluster_rbs(0);
        let m = rbs.len();
        // divisor = (m+1)!
        let divisor: f64 = (2..=m + 1).map(|k| k as f64).product();
        for &r in &rbs {
            assert!((out.assignment.powers[0][r] - 1.0 / divisor).abs() < 1e-12);
        }
        let resplit = run_heuristic(&ch, &tasks, &cfg, &HeuristicOptions::default()).unwrap();
        assert_ne!(out.assignment.powers, resplit.assignment.powers);
    }
}
