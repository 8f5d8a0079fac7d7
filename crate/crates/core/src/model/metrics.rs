//! Closed-form per-user metrics: achievable rate under SIC, transmission
//! time, energy, computing time, Jain fairness and spectral efficiency.

use super::{audit_constraints, Assignment, ConstraintAudit, ModelError, SystemConfig, TaskSpec};
use crate::channel::ChannelMatrix;

/// Rates of one cluster's members under SIC decoding.
///
/// `gains` and `powers` are indexed `[member][rb]` over the cluster's own
/// RB set, with member 0 decoded first. Member `j` is decoded against the
/// residual interference of members `j+1..`, the already-decoded signals
/// having been cancelled:
///
/// ```text
/// rate_j = sum_rb B * log2(1 + g[j]p[j] / (noise + sum_{l>j} g[l]p[l]))
/// ```
pub fn cluster_rates(
    gains: &[Vec<f64>],
    powers: &[Vec<f64>],
    noise_w: f64,
    rb_bandwidth_hz: f64,
) -> Vec<f64> {
    let m = gains.len();
    let q = gains.first().map_or(0, Vec::len);
    let mut rates = vec![0.0; m];
    for j in 0..m {
        let mut rate = 0.0;
        for k in 0..q {
            let mut interference = 0.0;
            for l in (j + 1)..m {
                interference += gains[l][k] * powers[l][k];
            }
            let sinr = gains[j][k] * powers[j][k] / (noise_w + interference);
            rate += rb_bandwidth_hz * (1.0 + sinr).log2();
        }
        rates[j] = rate;
    }
    rates
}

/// Gains and powers of `cluster`'s members over its allocated RBs, in
/// decode order. Returns `(members, gains, powers, rbs)`.
fn cluster_view(
    assignment: &Assignment,
    channels: &ChannelMatrix,
    cluster: usize,
) -> (Vec<usize>, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<usize>) {
    let members = assignment.cluster_members(cluster);
    let rbs = assignment.cluster_rbs(cluster);
    let gains = members
        .iter()
        .map(|&u| rbs.iter().map(|&r| channels.gains[u][r]).collect())
        .collect();
    let powers = members
        .iter()
        .map(|&u| rbs.iter().map(|&r| assignment.powers[u][r]).collect())
        .collect();
    (members, gains, powers, rbs)
}

/// Achievable uplink rate of `user` in bits/s.
///
/// Sums the SIC rate over every RB allocated to the user's cluster; a
/// cluster that holds no RBs yields rate 0 (reported, not an error).
pub fn achievable_rate(
    user: usize,
    assignment: &Assignment,
    channels: &ChannelMatrix,
    config: &SystemConfig,
) -> Result<f64, ModelError> {
    let slot = assignment.cluster_order[user].ok_or(ModelError::UnassignedUser(user))?;
    let (members, gains, powers, _) = cluster_view(assignment, channels, slot.cluster);
    let rates = cluster_rates(&gains, &powers, config.noise_power_w(), config.rb_bandwidth_hz);
    let pos = members.iter().position(|&u| u == user).expect("member of own cluster");
    Ok(rates[pos])
}

/// Uplink transmission time `input_bits / rate`, seconds.
pub fn transmission_time(user: usize, rate_bps: f64, task: &TaskSpec) -> Result<f64, ModelError> {
    if !(rate_bps > 0.0) {
        return Err(ModelError::InfeasibleRate { user, rate_bps });
    }
    Ok(task.input_bits / rate_bps)
}

/// Transmission energy `T * total power`, joules. Zero power transmits
/// nothing and costs nothing, whatever `transmission_time_s` says.
pub fn energy(user: usize, assignment: &Assignment, transmission_time_s: f64) -> f64 {
    let total_power = assignment.total_power_w(user);
    if total_power == 0.0 {
        0.0
    } else {
        transmission_time_s * total_power
    }
}

/// Cloudlet execution time `workload / (x * C)`, seconds.
pub fn computing_time(
    user: usize,
    assignment: &Assignment,
    task: &TaskSpec,
    config: &SystemConfig,
) -> Result<f64, ModelError> {
    if assignment.cluster_order[user].is_none() {
        return Err(ModelError::UnassignedUser(user));
    }
    let x = assignment.comp_rbs_of(user);
    if x == 0 {
        return Err(ModelError::NoComputingResource(user));
    }
    Ok(task.workload_cycles / (x as f64 * config.comp_rb_capacity_cps))
}

/// Jain's fairness index `(sum x)^2 / (n * sum x^2)`, in (0, 1].
pub fn jain_fairness(values: &[f64]) -> Result<f64, ModelError> {
    if values.is_empty() || values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(ModelError::FairnessDomain);
    }
    let sum: f64 = values.iter().sum();
    let sum_sq: f64 = values.iter().map(|v| v * v).sum();
    Ok(sum * sum / (values.len() as f64 * sum_sq))
}

/// Aggregate throughput per occupied bandwidth, bits/s/Hz. Unassigned
/// users contribute zero rate.
pub fn spectral_efficiency(
    assignment: &Assignment,
    channels: &ChannelMatrix,
    config: &SystemConfig,
) -> f64 {
    let total_rate: f64 = (0..config.num_users)
        .map(|u| achievable_rate(u, assignment, channels, config).unwrap_or(0.0))
        .sum();
    total_rate / (config.num_freq_rbs as f64 * config.rb_bandwidth_hz)
}

/// Per-user rates, times and energies for one user.
#[derive(Debug, Clone)]
pub struct UserMetrics {
    pub rate_bps: f64,
    pub transmission_time_s: f64,
    pub computing_time_s: f64,
    pub energy_j: f64,
    /// Whole task fits the deadline: assigned, positive rate, T + Q <= D.
    pub feasible: bool,
}

/// Full evaluation of an assignment: per-user metrics, totals and the
/// constraint audit.
#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub per_user: Vec<UserMetrics>,
    pub total_energy_j: f64,
    pub spectral_efficiency: f64,
    /// Jain index over computing times; `None` when some user has no
    /// computing resource (the index is undefined then).
    pub fairness_index: Option<f64>,
    pub audit: ConstraintAudit,
}

impl EvaluationReport {
    pub fn all_feasible(&self) -> bool {
        self.per_user.iter().all(|m| m.feasible)
    }

    /// Mean computing time across users, seconds.
    pub fn mean_computing_time_s(&self) -> f64 {
        let n = self.per_user.len().max(1) as f64;
        self.per_user.iter().map(|m| m.computing_time_s).sum::<f64>() / n
    }
}

/// Evaluates an assignment end to end. Infeasibilities surface as infinite
/// times/energies and cleared `feasible` flags, never as errors.
pub fn evaluate(
    assignment: &Assignment,
    channels: &ChannelMatrix,
    tasks: &[TaskSpec],
    config: &SystemConfig,
) -> EvaluationReport {
    let mut per_user = Vec::with_capacity(config.num_users);
    for (u, task) in tasks.iter().enumerate() {
        let rate = achievable_rate(u, assignment, channels, config).unwrap_or(0.0);
        let q = computing_time(u, assignment, task, config).unwrap_or(f64::INFINITY);
        let t = transmission_time(u, rate, task).unwrap_or(f64::INFINITY);
        let e = energy(u, assignment, t);
        // Tiny relative slack so a deadline met with equality by the
        // power solver is not rejected over float rounding.
        let feasible = rate > 0.0 && t + q <= task.deadline_s * (1.0 + 1e-9);
        per_user.push(UserMetrics {
            rate_bps: rate,
            transmission_time_s: t,
            computing_time_s: q,
            energy_j: e,
            feasible,
        });
    }
    let total_energy_j = per_user.iter().map(|m| m.energy_j).sum();
    let se = spectral_efficiency(assignment, channels, config);
    let q_values: Vec<f64> = per_user.iter().map(|m| m.computing_time_s).collect();
    let fairness_index = jain_fairness(&q_values).ok();
    let audit = audit_constraints(assignment, channels, tasks, config);
    EvaluationReport {
        per_user,
        total_energy_j,
        spectral_efficiency: se,
        fairness_index,
        audit,
    }
}
