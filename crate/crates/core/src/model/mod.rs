//! Domain types and the closed-form physics/economics of the system:
//! achievable rates, transmission/computing times, energies, the feasibility
//! audit and the evaluation metrics.
//!
//! Index conventions used throughout the crate: users, clusters, frequency
//! RBs are 0-based; the SIC order index is 0-based with order 0 decoded
//! first (order 0 sees interference from every later order on the same RB).

mod audit;
mod metrics;

pub use audit::{audit_constraints, ConstraintAudit, ConstraintCheck, ConstraintId};
pub use metrics::{
    achievable_rate, cluster_rates, computing_time, energy, evaluate, jain_fairness,
    spectral_efficiency, transmission_time, EvaluationReport, UserMetrics,
};

use crate::units::dbm_to_watts;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid task for user {user}: {reason}")]
    InvalidTask { user: usize, reason: String },
    #[error("user {0} is not assigned to any cluster")]
    UnassignedUser(usize),
    #[error("user {user} has infeasible rate {rate_bps} bits/s")]
    InfeasibleRate { user: usize, rate_bps: f64 },
    #[error("user {0} has no computing RBs allocated")]
    NoComputingResource(usize),
    #[error("fairness index needs a nonempty, strictly positive input")]
    FairnessDomain,
}

/// Global scalars of one cell: RB counts, bandwidth, cloudlet capacity,
/// cluster limits, noise density.
#[derive(Debug, Clone, Serialize)]
pub struct SystemConfig {
    pub num_users: usize,
    pub num_freq_rbs: usize,
    /// Bandwidth of one frequency RB, Hz.
    pub rb_bandwidth_hz: f64,
    pub num_comp_rbs: usize,
    /// Capacity of one computing RB, CPU cycles per second.
    pub comp_rb_capacity_cps: f64,
    /// Maximum number of users allowed to share a frequency RB.
    pub max_users_per_rb: usize,
    pub num_clusters: usize,
    /// Noise power spectral density, dBm/Hz.
    pub noise_psd_dbm_per_hz: f64,
    pub cell_radius_m: f64,
}

impl SystemConfig {
    /// Noise power over one RB, watts.
    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_per_hz) * self.rb_bandwidth_hz
    }

    /// Checks the structural invariants.
    ///
    /// With `max_users_per_rb == 1` the scheme degenerates to orthogonal
    /// access: every user is its own cluster, so `num_clusters` must equal
    /// `num_users` and the two-users-per-cluster rule is waived. Otherwise
    /// clusters must be able to hold everyone (`N * u_max >= U`) while
    /// keeping at least two users per cluster possible (`N <= U/2`).
    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |m: String| Err(ModelError::InvalidConfig(m));
        if self.num_users < 1 {
            return err("num_users must be >= 1".into());
        }
        if self.num_freq_rbs < 1 || self.num_comp_rbs < 1 {
            return err("RB counts must be >= 1".into());
        }
        if self.max_users_per_rb < 1 || self.num_clusters < 1 {
            return err("max_users_per_rb and num_clusters must be >= 1".into());
        }
        if !(self.rb_bandwidth_hz > 0.0) {
            return err("rb_bandwidth_hz must be > 0".into());
        }
        if !(self.comp_rb_capacity_cps > 0.0) {
            return err("comp_rb_capacity_cps must be > 0".into());
        }
        if !(self.cell_radius_m > 0.0) {
            return err("cell_radius_m must be > 0".into());
        }
        if !self.noise_psd_dbm_per_hz.is_finite() {
            return err("noise_psd_dbm_per_hz must be finite".into());
        }
        let (n, u, umax) = (self.num_clusters, self.num_users, self.max_users_per_rb);
        if n * umax < u {
            return err(format!(
                "num_clusters * max_users_per_rb = {} cannot hold {} users",
                n * umax,
                u
            ));
        }
        if umax == 1 {
            if n != u {
                return err(format!(
                    "max_users_per_rb = 1 requires num_clusters = num_users, got {n}"
                ));
            }
        } else if n > u / 2 {
            return err(format!(
                "num_clusters = {n} exceeds floor(num_users/2) = {}",
                u / 2
            ));
        }
        Ok(())
    }
}

/// Cluster count used when a configuration leaves it unspecified: the fewest
/// clusters that can hold all users, i.e. `ceil(U / u_max)`. Whenever the
/// two bounds of [`SystemConfig::validate`] can hold at all, this count
/// satisfies both; with `u_max == 1` it degenerates to `U` singleton
/// clusters (orthogonal access).
pub fn default_num_clusters(num_users: usize, max_users_per_rb: usize) -> usize {
    num_users.div_ceil(max_users_per_rb).max(1)
}

/// One user's offload task.
#[derive(Debug, Clone, Serialize)]
pub struct TaskSpec {
    /// CPU cycles required to execute the task.
    pub workload_cycles: f64,
    /// Bits to transfer uplink before execution can start.
    pub input_bits: f64,
    /// Hard completion deadline, seconds.
    pub deadline_s: f64,
    /// Transmit power budget, watts.
    pub power_budget_w: f64,
}

impl TaskSpec {
    pub fn validate(&self, user: usize) -> Result<(), ModelError> {
        let fields = [
            ("workload_cycles", self.workload_cycles),
            ("input_bits", self.input_bits),
            ("deadline_s", self.deadline_s),
            ("power_budget_w", self.power_budget_w),
        ];
        for (name, v) in fields {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ModelError::InvalidTask {
                    user,
                    reason: format!("{name} must be strictly positive, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// A user's position in a cluster: which cluster and which SIC decode order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClusterSlot {
    pub cluster: usize,
    /// 0 is decoded first and therefore sees the most interference.
    pub order: usize,
}

/// The full decision vector: cluster/order map, frequency-RB map, computing
/// RB counts and transmit powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Per user: the (cluster, order) slot, if assigned.
    pub cluster_order: Vec<Option<ClusterSlot>>,
    /// Per frequency RB: the owning cluster, if allocated.
    pub freq_map: Vec<Option<usize>>,
    /// Computing RBs granted to each (cluster, order) slot.
    pub comp_alloc: Vec<Vec<u32>>,
    /// Transmit power in watts per (user, frequency RB).
    pub powers: Vec<Vec<f64>>,
}

impl Assignment {
    /// An all-empty assignment shaped for `config`.
    pub fn empty(config: &SystemConfig) -> Self {
        Assignment {
            cluster_order: vec![None; config.num_users],
            freq_map: vec![None; config.num_freq_rbs],
            comp_alloc: vec![vec![0; config.max_users_per_rb]; config.num_clusters],
            powers: vec![vec![0.0; config.num_freq_rbs]; config.num_users],
        }
    }

    /// Users of `cluster` sorted by decode order (order 0 first).
    pub fn cluster_members(&self, cluster: usize) -> Vec<usize> {
        let mut members: Vec<(usize, usize)> = self
            .cluster_order
            .iter()
            .enumerate()
            .filter_map(|(u, slot)| match slot {
                Some(s) if s.cluster == cluster => Some((s.order, u)),
                _ => None,
            })
            .collect();
        members.sort_unstable();
        members.into_iter().map(|(_, u)| u).collect()
    }

    /// Frequency RBs owned by `cluster`, ascending.
    pub fn cluster_rbs(&self, cluster: usize) -> Vec<usize> {
        self.freq_map
            .iter()
            .enumerate()
            .filter_map(|(r, c)| (*c == Some(cluster)).then_some(r))
            .collect()
    }

    /// Total transmit power of `user` across all RBs, watts.
    pub fn total_power_w(&self, user: usize) -> f64 {
        self.powers[user].iter().sum()
    }

    /// Computing RBs granted to `user`, 0 when unassigned.
    pub fn comp_rbs_of(&self, user: usize) -> u32 {
        match self.cluster_order[user] {
            Some(slot) => self.comp_alloc[slot.cluster][slot.order],
            None => 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config() -> SystemConfig {
        SystemConfig {
            num_users: 6,
            num_freq_rbs: 4,
            rb_bandwidth_hz: 180e3,
            num_comp_rbs: 8,
            comp_rb_capacity_cps: 10e9,
            max_users_per_rb: 3,
            num_clusters: 2,
            noise_psd_dbm_per_hz: -173.0,
            cell_radius_m: 1000.0,
        }
    }

    #[test]
    fn valid_config_passes() {
        base_config().validate().unwrap();
    }

    #[test]
    fn cluster_bounds_enforced() {
        let mut cfg = base_config();
        cfg.num_clusters = 4; // > floor(6/2)
        assert!(cfg.validate().is_err());
        cfg.num_clusters = 1; // 1 * 3 < 6
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn oma_requires_singleton_clusters() {
        let mut cfg = base_config();
        cfg.max_users_per_rb = 1;
        cfg.num_clusters = 3;
        assert!(cfg.validate().is_err());
        cfg.num_clusters = 6;
        cfg.validate().unwrap();
    }

    #[test]
    fn default_cluster_count() {
        assert_eq!(default_num_clusters(10, 3), 4);
        assert_eq!(default_num_clusters(10, 2), 5);
        assert_eq!(default_num_clusters(6, 3), 2);
        assert_eq!(default_num_clusters(6, 1), 6);
        assert_eq!(default_num_clusters(2, 2), 1);
    }

    #[test]
    fn noise_power_matches_psd_times_bandwidth() {
        let cfg = base_config();
        let expected = 10f64.powf((-173.0 - 30.0) / 10.0) * 180e3;
        assert!((cfg.noise_power_w() - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn task_validation_rejects_nonpositive() {
        let t = TaskSpec {
            workload_cycles: 1e9,
            input_bits: 6000.0,
            deadline_s: 0.45,
            power_budget_w: 1.0,
        };
        t.validate(0).unwrap();
        let bad = TaskSpec { input_bits: 0.0, ..t };
        assert!(bad.validate(0).is_err());
    }

    #[test]
    fn member_and_rb_lookups() {
        let cfg = base_config();
        let mut a = Assignment::empty(&cfg);
        a.cluster_order[2] = Some(ClusterSlot { cluster: 1, order: 1 });
        a.cluster_order[5] = Some(ClusterSlot { cluster: 1, order: 0 });
        a.freq_map[3] = Some(1);
        a.freq_map[0] = Some(0);
        assert_eq!(a.cluster_members(1), vec![5, 2]);
        assert_eq!(a.cluster_rbs(1), vec![3]);
        assert_eq!(a.cluster_rbs(0), vec![0]);
    }
}
