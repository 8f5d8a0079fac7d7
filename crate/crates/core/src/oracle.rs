//! Brute-force baselines: exhaustive enumeration of the discrete decisions
//! (clustering, RB maps, computing splits) with a convex power solve per
//! configuration, and an exhaustive power grid for solver cross-checks.
//!
//! Enumeration is exact over the discrete space; per-configuration powers
//! come from the same interior-point solve the pipeline uses, so the
//! reported optimum is exact up to solver tolerance under the high-SINR
//! power model. Per-cluster solves are memoized by (members, computing
//! split, RB set), which is what makes tiny instances tractable.

use crate::channel::ChannelMatrix;
use crate::model::{Assignment, ClusterSlot, SystemConfig, TaskSpec};
use crate::power::{
    solve_cluster, verify_exact, ClusterProblem, MemberSpec, SolverOptions,
};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance exceeds the tiny-instance limit: {reason}")]
    TooLarge { reason: String },
    #[error("no feasible configuration exists for this instance")]
    NoFeasibleConfiguration,
    #[error("grid oracle limited to 4 dimensions, got {dims}")]
    DimensionTooHigh { dims: usize },
    #[error("no grid point satisfies every minimum rate")]
    GridInfeasible { entries: Vec<GridCertificateEntry> },
}

/// Per-member evidence accompanying a grid infeasibility.
#[derive(Debug, Clone)]
pub struct GridCertificateEntry {
    pub user: usize,
    pub required_bps: f64,
    /// Interference-free full-budget rate: an upper bound on anything the
    /// grid could have achieved.
    pub rate_upper_bound_bps: f64,
}

/// Enumeration guard rails.
#[derive(Debug, Clone)]
pub struct TinyInstanceLimit {
    pub max_users: usize,
    pub max_freq_rbs: usize,
    pub max_comp_rbs: usize,
    /// Hard cap on the configuration count.
    pub max_configurations: u128,
}

impl Default for TinyInstanceLimit {
    fn default() -> Self {
        TinyInstanceLimit {
            max_users: 6,
            max_freq_rbs: 4,
            max_comp_rbs: 8,
            max_configurations: 10_000_000,
        }
    }
}

/// Result of the exhaustive search.
#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub assignment: Assignment,
    pub total_energy_j: f64,
    /// Discrete configurations visited (valid clustering x RB map x split).
    pub configurations_visited: u128,
    /// Distinct per-cluster power solves performed.
    pub cluster_solves: usize,
}

/// Smallest computing-RB count that strictly beats the deadline.
fn min_comp_rbs(task: &TaskSpec, config: &SystemConfig) -> u32 {
    let mut x = 1u32;
    while task.workload_cycles / (x as f64 * config.comp_rb_capacity_cps) >= task.deadline_s {
        x += 1;
    }
    x
}

/// Independent closed-form count of the discrete configuration space:
/// ordered set partitions x RB assignments x bounded computing splits.
pub fn count_configurations(tasks: &[TaskSpec], config: &SystemConfig) -> u128 {
    let users = config.num_users;
    let n = config.num_clusters;
    let u_max = config.max_users_per_rb;
    let min_size = u_max.min(2);

    // Ordered set partitions: U! per valid size composition.
    let mut factorial: u128 = 1;
    for i in 2..=users {
        factorial *= i as u128;
    }
    // DP over clusters: number of size compositions summing to `users`.
    let mut comps = vec![0u128; users + 1];
    comps[0] = 1;
    for _ in 0..n {
        let mut next = vec![0u128; users + 1];
        for total in 0..=users {
            if comps[total] == 0 {
                continue;
            }
            for size in min_size..=u_max {
                if total + size <= users {
                    next[total + size] += comps[total];
                }
            }
        }
        comps = next;
    }
    let clusterings = factorial * comps[users];

    let beta: u128 = ((n + 1) as u128).pow(config.num_freq_rbs as u32);

    // Computing splits: each user needs at least its minimum; the spare
    // budget spreads over all users in every way (sum <= M_c).
    let total_min: u64 = tasks.iter().map(|t| min_comp_rbs(t, config) as u64).sum();
    if total_min > config.num_comp_rbs as u64 {
        return 0;
    }
    let spare = (config.num_comp_rbs as u64 - total_min) as usize;
    let mut splits = vec![0u128; spare + 1];
    splits[0] = 1;
    for _ in 0..users {
        let mut next = vec![0u128; spare + 1];
        for used in 0..=spare {
            if splits[used] == 0 {
                continue;
            }
            for extra in 0..=(spare - used) {
                next[used + extra] += splits[used];
            }
        }
        splits = next;
    }
    let split_count: u128 = splits.iter().sum();

    clusterings * beta * split_count
}

/// All ways to put `users` into `n` labeled clusters with sizes in
/// `[min_size, u_max]`, members ordered (every permutation enumerated).
fn enumerate_clusterings(
    users: usize,
    n: usize,
    u_max: usize,
    min_size: usize,
) -> Vec<Vec<Vec<usize>>> {
    let mut result = Vec::new();
    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); n];

    fn assign_sets(
        user: usize,
        users: usize,
        u_max: usize,
        min_size: usize,
        sets: &mut Vec<Vec<usize>>,
        result: &mut Vec<Vec<Vec<usize>>>,
    ) {
        if user == users {
            if sets.iter().all(|s| s.len() >= min_size) {
                expand_orders(sets, result);
            }
            return;
        }
        let deficit: usize = sets.iter().map(|s| min_size.saturating_sub(s.len())).sum();
        let remaining = users - user;
        if deficit > remaining {
            return;
        }
        for i in 0..sets.len() {
            if sets[i].len() < u_max {
                sets[i].push(user);
                assign_sets(user + 1, users, u_max, min_size, sets, result);
                sets[i].pop();
            }
        }
    }

    /// Cross product of per-cluster permutations.
    fn expand_orders(sets: &[Vec<usize>], result: &mut Vec<Vec<Vec<usize>>>) {
        let perms_per_cluster: Vec<Vec<Vec<usize>>> =
            sets.iter().map(|s| permutations(s)).collect();
        let mut choice = vec![0usize; sets.len()];
        loop {
            result.push(
                choice.iter().enumerate().map(|(i, &c)| perms_per_cluster[i][c].clone()).collect(),
            );
            let mut pos = sets.len();
            loop {
                if pos == 0 {
                    return;
                }
                pos -= 1;
                choice[pos] += 1;
                if choice[pos] < perms_per_cluster[pos].len() {
                    break;
                }
                choice[pos] = 0;
            }
        }
    }

    fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
        if items.is_empty() {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        for (i, &head) in items.iter().enumerate() {
            let mut rest = items.to_vec();
            rest.remove(i);
            for mut tail in permutations(&rest) {
                tail.insert(0, head);
                out.push(tail);
            }
        }
        out
    }

    assign_sets(0, users, u_max, min_size, &mut sets, &mut result);
    result
}

/// Memoization key: packed members, packed split, RB bitmask.
type ClusterKey = (u64, u64, u16);

fn pack_members(members: &[usize]) -> u64 {
    let mut key = members.len() as u64;
    for &u in members {
        key = (key << 4) | (u as u64 + 1);
    }
    key
}

fn pack_split(split: &[u32]) -> u64 {
    let mut key = 0u64;
    for &x in split {
        key = (key << 8) | x as u64;
    }
    key
}

/// Exhaustive minimum-energy search over clustering, RB allocation and
/// computing split, powers solved per cluster.
pub fn enumerate_optimal(
    channels: &ChannelMatrix,
    tasks: &[TaskSpec],
    config: &SystemConfig,
    limit: &TinyInstanceLimit,
    solver: &SolverOptions,
) -> Result<OracleOutcome, OracleError> {
    let too_large = |reason: String| Err(OracleError::TooLarge { reason });
    if config.num_users > limit.max_users {
        return too_large(format!("{} users > {}", config.num_users, limit.max_users));
    }
    if config.num_freq_rbs > limit.max_freq_rbs {
        return too_large(format!("{} frequency RBs > {}", config.num_freq_rbs, limit.max_freq_rbs));
    }
    if config.num_comp_rbs > limit.max_comp_rbs {
        return too_large(format!("{} computing RBs > {}", config.num_comp_rbs, limit.max_comp_rbs));
    }
    if config.num_users > 15 || config.num_freq_rbs > 16 {
        return too_large("packing supports at most 15 users / 16 RBs".into());
    }
    let predicted = count_configurations(tasks, config);
    if predicted > limit.max_configurations {
        return too_large(format!(
            "{predicted} configurations > {}",
            limit.max_configurations
        ));
    }

    let n = config.num_clusters;
    let u_max = config.max_users_per_rb;
    let min_size = u_max.min(2);
    let noise_w = config.noise_power_w();
    let mins: Vec<u32> = tasks.iter().map(|t| min_comp_rbs(t, config)).collect();

    let mut memo: HashMap<ClusterKey, Option<(f64, Vec<Vec<f64>>)>> = HashMap::new();
    let mut solves = 0usize;
    let mut visited: u128 = 0;
    let mut best: Option<(f64, Assignment)> = None;

    let beta_total = (n as u64 + 1).pow(config.num_freq_rbs as u32);

    for clustering in enumerate_clusterings(config.num_users, n, u_max, min_size) {
        // Per-cluster computing splits: every member at least its minimum,
        // total within budget.
        let splits = enumerate_splits(&clustering, &mins, config.num_comp_rbs as u32);
        for split in &splits {
            // Fixed (members, x): the per-cluster key prefix and min rates.
            let member_keys: Vec<u64> =
                clustering.iter().map(|members| pack_members(members)).collect();
            let split_keys: Vec<u64> = split.iter().map(|s| pack_split(s)).collect();
            for beta_code in 0..beta_total {
                visited += 1;
                // Decode the RB map: digit r in base (n+1); 0 = unallocated.
                let mut masks = vec![0u16; n];
                let mut code = beta_code;
                for r in 0..config.num_freq_rbs {
                    let digit = (code % (n as u64 + 1)) as usize;
                    code /= n as u64 + 1;
                    if digit > 0 {
                        masks[digit - 1] |= 1 << r;
                    }
                }
                let mut total = 0.0f64;
                let mut feasible = true;
                for i in 0..n {
                    let key = (member_keys[i], split_keys[i], masks[i]);
                    let entry = memo.entry(key).or_insert_with(|| {
                        solve_one_cluster(
                            &clustering[i],
                            &split[i],
                            masks[i],
                            channels,
                            tasks,
                            config,
                            noise_w,
                            solver,
                            &mut solves,
                        )
                    });
                    match entry {
                        Some((energy, _)) => total += *energy,
                        None => {
                            feasible = false;
                            break;
                        }
                    }
                }
                if !feasible {
                    continue;
                }
                let better = match &best {
                    Some((e, _)) => total < *e,
                    None => true,
                };
                if better {
                    let assignment = build_assignment(
                        &clustering,
                        split,
                        &masks,
                        &memo,
                        &member_keys,
                        &split_keys,
                        config,
                    );
                    best = Some((total, assignment));
                }
            }
        }
    }

    debug_assert_eq!(visited, predicted, "enumeration disagrees with the closed-form count");
    match best {
        Some((energy, assignment)) => Ok(OracleOutcome {
            assignment,
            total_energy_j: energy,
            configurations_visited: visited,
            cluster_solves: solves,
        }),
        None => Err(OracleError::NoFeasibleConfiguration),
    }
}

/// All per-cluster computing splits: member j of cluster i gets at least
/// its minimum, and the grand total stays within `budget`.
fn enumerate_splits(
    clustering: &[Vec<usize>],
    mins: &[u32],
    budget: u32,
) -> Vec<Vec<Vec<u32>>> {
    // Flatten the slots, enumerate extras over them, then reshape.
    let slots: Vec<usize> = clustering.iter().flatten().cloned().collect();
    let base: u32 = slots.iter().map(|&u| mins[u]).sum();
    if base > budget {
        return Vec::new();
    }
    let spare = budget - base;
    let mut flat: Vec<Vec<u32>> = Vec::new();
    let mut current = vec![0u32; slots.len()];
    fn recurse(pos: usize, left: u32, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if pos == current.len() {
            out.push(current.clone());
            return;
        }
        for extra in 0..=left {
            current[pos] = extra;
            recurse(pos + 1, left - extra, current, out);
        }
        current[pos] = 0;
    }
    recurse(0, spare, &mut current, &mut flat);

    flat.into_iter()
        .map(|extras| {
            let mut idx = 0;
            clustering
                .iter()
                .map(|members| {
                    members
                        .iter()
                        .map(|&u| {
                            let x = mins[u] + extras[idx];
                            idx += 1;
                            x
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn solve_one_cluster(
    members: &[usize],
    split: &[u32],
    mask: u16,
    channels: &ChannelMatrix,
    tasks: &[TaskSpec],
    config: &SystemConfig,
    noise_w: f64,
    solver: &SolverOptions,
    solves: &mut usize,
) -> Option<(f64, Vec<Vec<f64>>)> {
    let rbs: Vec<usize> = (0..config.num_freq_rbs).filter(|r| mask & (1 << r) != 0).collect();
    if rbs.is_empty() {
        return None;
    }
    let mut specs = Vec::with_capacity(members.len());
    for (j, &u) in members.iter().enumerate() {
        let q_time = tasks[u].workload_cycles / (split[j] as f64 * config.comp_rb_capacity_cps);
        let headroom = tasks[u].deadline_s - q_time;
        if !(headroom > 0.0) {
            return None;
        }
        specs.push(MemberSpec {
            user: u,
            min_rate_bps: tasks[u].input_bits / headroom,
            power_budget_w: tasks[u].power_budget_w,
        });
    }
    let cluster = ClusterProblem {
        members: specs,
        rb_ids: rbs.clone(),
        gains: members
            .iter()
            .map(|&u| rbs.iter().map(|&r| channels.gains[u][r]).collect())
            .collect(),
        noise_w,
        rb_bandwidth_hz: config.rb_bandwidth_hz,
    };
    *solves += 1;
    // Same power rule as the pipeline: optimize, and where the high-SINR
    // program has no feasible point fall back to the equal budget split if
    // that meets every exact minimum rate. Matching rules keep the
    // oracle's search space a superset of the pipeline's outcome, so
    // oracle energy <= heuristic energy holds unconditionally.
    let powers = match solve_cluster(&cluster, solver) {
        Ok(solution) => {
            verify_exact(&cluster, &solution.powers_w).ok()?;
            solution.powers_w
        }
        Err(_) => {
            let q = rbs.len() as f64;
            let equal_split: Vec<Vec<f64>> = cluster
                .members
                .iter()
                .map(|m| vec![m.power_budget_w / q; rbs.len()])
                .collect();
            let rates = cluster.exact_rates(&equal_split);
            let meets_all = rates
                .iter()
                .zip(cluster.members.iter())
                .all(|(&r, m)| r >= m.min_rate_bps);
            if !meets_all {
                return None;
            }
            equal_split
        }
    };
    let rates = cluster.exact_rates(&powers);
    let mut energy = 0.0;
    for (j, &u) in members.iter().enumerate() {
        let member_power: f64 = powers[j].iter().sum();
        energy += tasks[u].input_bits / rates[j] * member_power;
    }
    Some((energy, powers))
}

fn build_assignment(
    clustering: &[Vec<usize>],
    split: &[Vec<u32>],
    masks: &[u16],
    memo: &HashMap<ClusterKey, Option<(f64, Vec<Vec<f64>>)>>,
    member_keys: &[u64],
    split_keys: &[u64],
    config: &SystemConfig,
) -> Assignment {
    let mut assignment = Assignment::empty(config);
    for (i, members) in clustering.iter().enumerate() {
        let rbs: Vec<usize> =
            (0..config.num_freq_rbs).filter(|r| masks[i] & (1 << r) != 0).collect();
        for &r in &rbs {
            assignment.freq_map[r] = Some(i);
        }
        let powers = match memo.get(&(member_keys[i], split_keys[i], masks[i])) {
            Some(Some((_, p))) => p.clone(),
            _ => unreachable!("best configuration must be memoized"),
        };
        for (j, &u) in members.iter().enumerate() {
            assignment.cluster_order[u] = Some(ClusterSlot { cluster: i, order: j });
            assignment.comp_alloc[i][j] = split[i][j];
            for (k, &r) in rbs.iter().enumerate() {
                assignment.powers[u][r] = powers[j][k];
            }
        }
    }
    assignment
}

/// Exhaustive grid minimum of total power for one cluster.
#[derive(Debug, Clone)]
pub struct GridOutcome {
    /// `[member][rb]`, watts.
    pub powers_w: Vec<Vec<f64>>,
    pub objective_w: f64,
    pub feasible_points: u64,
}

/// Brute-force power search over `[0, budget]^dims` with exact rates.
pub fn grid_power_oracle(
    cluster: &ClusterProblem,
    grid_points_per_dim: usize,
) -> Result<GridOutcome, OracleError> {
    let (m, q) = (cluster.num_members(), cluster.num_rbs());
    let dims = m * q;
    if dims > 4 {
        return Err(OracleError::DimensionTooHigh { dims });
    }
    assert!(grid_points_per_dim >= 2);
    let axis = |member: usize, t: usize| -> f64 {
        cluster.members[member].power_budget_w * t as f64 / (grid_points_per_dim - 1) as f64
    };
    let mut index = vec![0usize; dims];
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    let mut feasible_points = 0u64;
    let mut powers = vec![vec![0.0; q]; m];
    loop {
        for d in 0..dims {
            powers[d / q][d % q] = axis(d / q, index[d]);
        }
        let within_budget = (0..m).all(|u| {
            powers[u].iter().sum::<f64>()
                <= cluster.members[u].power_budget_w * (1.0 + 1e-12)
        });
        if within_budget {
            let rates = cluster.exact_rates(&powers);
            if rates
                .iter()
                .zip(cluster.members.iter())
                .all(|(&r, mem)| r >= mem.min_rate_bps)
            {
                feasible_points += 1;
                let objective: f64 = powers.iter().flatten().sum();
                let better = match &best {
                    Some((b, _)) => objective < *b,
                    None => true,
                };
                if better {
                    best = Some((objective, powers.clone()));
                }
            }
        }
        // Advance the mixed-radix counter.
        let mut pos = dims;
        loop {
            if pos == 0 {
                return match best {
                    Some((objective_w, powers_w)) => {
                        Ok(GridOutcome { powers_w, objective_w, feasible_points })
                    }
                    None => Err(OracleError::GridInfeasible {
                        entries: grid_certificate(cluster),
                    }),
                };
            }
            pos -= 1;
            index[pos] += 1;
            if index[pos] < grid_points_per_dim {
                break;
            }
            index[pos] = 0;
        }
    }
}

fn grid_certificate(cluster: &ClusterProblem) -> Vec<GridCertificateEntry> {
    cluster
        .members
        .iter()
        .enumerate()
        .map(|(u, mem)| {
            // Interference-free rate with the full budget on every RB: a
            // hard upper bound on any feasible point's rate.
            let ub: f64 = cluster.gains[u]
                .iter()
                .map(|&g| {
                    cluster.rb_bandwidth_hz
                        * (1.0 + g * mem.power_budget_w / cluster.noise_w).log2()
                })
                .sum();
            GridCertificateEntry {
                user: mem.user,
                required_bps: mem.min_rate_bps,
                rate_upper_bound_bps: ub,
            }
        })
        .collect()
}
