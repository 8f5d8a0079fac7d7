//! Feasibility audit of a full assignment against the problem constraints
//! C1-C12. Violations are report entries, never errors, so any assignment
//! (including a deliberately broken one) can be audited.

use super::{achievable_rate, Assignment, SystemConfig, TaskSpec};
use crate::channel::ChannelMatrix;
use serde::Serialize;
use std::fmt;

/// Relative slack for float comparisons on power/rate budgets.
const REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConstraintId {
    /// Computing-aware minimum data rate: `R >= L / (D - Q)`.
    C1,
    /// Computing time within the deadline: `Q < D` (strict, so the C1
    /// denominator stays positive).
    C2,
    /// Every user sits in exactly one (cluster, order) slot.
    C3,
    /// Every cluster hosts at least two users (one when `u_max == 1`,
    /// where sharing is impossible by definition).
    C4,
    /// Every frequency RB belongs to at most one cluster.
    C5,
    /// Total computing RBs within the cloudlet budget.
    C6,
    /// Order indices within a cluster are packed from 0 up, one user per
    /// slot.
    C7,
    /// Per-user total transmit power within budget.
    C8,
    /// Transmit powers nonnegative (and finite).
    C9,
    /// Cluster/order indicators are binary.
    C10,
    /// RB/cluster indicators are binary.
    C11,
    /// Computing RB counts are integers.
    C12,
}

impl ConstraintId {
    pub const ALL: [ConstraintId; 12] = [
        ConstraintId::C1,
        ConstraintId::C2,
        ConstraintId::C3,
        ConstraintId::C4,
        ConstraintId::C5,
        ConstraintId::C6,
        ConstraintId::C7,
        ConstraintId::C8,
        ConstraintId::C9,
        ConstraintId::C10,
        ConstraintId::C11,
        ConstraintId::C12,
    ];
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Outcome of one constraint: pass/fail plus the violating entities.
#[derive(Debug, Clone, Serialize)]
pub struct ConstraintCheck {
    pub id: ConstraintId,
    pub passed: bool,
    pub violations: Vec<String>,
}

/// The twelve checks, in constraint order.
#[derive(Debug, Clone, Serialize)]
pub struct ConstraintAudit {
    pub checks: Vec<ConstraintCheck>,
}

impl ConstraintAudit {
    pub fn check(&self, id: ConstraintId) -> &ConstraintCheck {
        self.checks.iter().find(|c| c.id == id).expect("all ids present")
    }

    pub fn passed(&self, id: ConstraintId) -> bool {
        self.check(id).passed
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// C3-C12: everything a scheduler controls directly. C1/C2 depend on
    /// whether the instance is feasible at all, so they are reported but
    /// excluded here.
    pub fn structural_passed(&self) -> bool {
        self.checks
            .iter()
            .filter(|c| !matches!(c.id, ConstraintId::C1 | ConstraintId::C2))
            .all(|c| c.passed)
    }
}

fn computing_time_or_inf(
    assignment: &Assignment,
    tasks: &[TaskSpec],
    config: &SystemConfig,
    user: usize,
) -> f64 {
    let x = assignment.comp_rbs_of(user);
    if assignment.cluster_order[user].is_none() || x == 0 {
        f64::INFINITY
    } else {
        tasks[user].workload_cycles / (x as f64 * config.comp_rb_capacity_cps)
    }
}

/// Evaluates all twelve constraints for `assignment`.
pub fn audit_constraints(
    assignment: &Assignment,
    channels: &ChannelMatrix,
    tasks: &[TaskSpec],
    config: &SystemConfig,
) -> ConstraintAudit {
    let users = config.num_users;
    let mut checks = Vec::with_capacity(12);
    let mut push = |id: ConstraintId, violations: Vec<String>| {
        checks.push(ConstraintCheck { id, passed: violations.is_empty(), violations });
    };

    // C1: minimum data rate derived from the residual deadline.
    let mut v1 = Vec::new();
    for u in 0..users {
        let q = computing_time_or_inf(assignment, tasks, config, u);
        let headroom = tasks[u].deadline_s - q;
        if !(headroom > 0.0) {
            v1.push(format!("user {u}: no rate can meet the deadline (Q = {q:.6} s)"));
            continue;
        }
        let required = tasks[u].input_bits / headroom;
        let rate = achievable_rate(u, assignment, channels, config).unwrap_or(0.0);
        if rate < required * (1.0 - REL_TOL) {
            v1.push(format!("user {u}: rate {rate:.3} bit/s < required {required:.3} bit/s"));
        }
    }
    push(ConstraintId::C1, v1);

    // C2: computing time strictly under the deadline.
    let mut v2 = Vec::new();
    for u in 0..users {
        let q = computing_time_or_inf(assignment, tasks, config, u);
        if !(q < tasks[u].deadline_s) {
            v2.push(format!("user {u}: Q = {q:.6} s, deadline {} s", tasks[u].deadline_s));
        }
    }
    push(ConstraintId::C2, v2);

    // C3: every user in exactly one valid slot.
    let mut v3 = Vec::new();
    for u in 0..users {
        match assignment.cluster_order[u] {
            None => v3.push(format!("user {u}: unassigned")),
            Some(s) if s.cluster >= config.num_clusters => {
                v3.push(format!("user {u}: cluster {} out of range", s.cluster))
            }
            Some(s) if s.order >= config.max_users_per_rb => {
                v3.push(format!("user {u}: order {} out of range", s.order))
            }
            Some(_) => {}
        }
    }
    push(ConstraintId::C3, v3);

    // C4: minimum cluster occupancy.
    let min_size = config.max_users_per_rb.min(2);
    let mut v4 = Vec::new();
    for i in 0..config.num_clusters {
        let size = assignment.cluster_members(i).len();
        if size < min_size {
            v4.push(format!("cluster {i}: {size} member(s), needs {min_size}"));
        }
    }
    push(ConstraintId::C4, v4);

    // C5: RB-to-cluster map well formed (at most one owner holds by type).
    let mut v5 = Vec::new();
    for (r, owner) in assignment.freq_map.iter().enumerate() {
        if let Some(c) = owner {
            if *c >= config.num_clusters {
                v5.push(format!("RB {r}: cluster {c} out of range"));
            }
        }
    }
    push(ConstraintId::C5, v5);

    // C6: computing budget.
    let total_x: u64 = assignment.comp_alloc.iter().flatten().map(|&x| x as u64).sum();
    let mut v6 = Vec::new();
    if total_x > config.num_comp_rbs as u64 {
        v6.push(format!("total computing RBs {total_x} > budget {}", config.num_comp_rbs));
    }
    push(ConstraintId::C6, v6);

    // C7: packed orders, one user per slot.
    let mut v7 = Vec::new();
    for i in 0..config.num_clusters {
        let mut occupancy = vec![0usize; config.max_users_per_rb];
        for u in 0..users {
            if let Some(s) = assignment.cluster_order[u] {
                if s.cluster == i && s.order < occupancy.len() {
                    occupancy[s.order] += 1;
                }
            }
        }
        for (j, &n) in occupancy.iter().enumerate() {
            if n > 1 {
                v7.push(format!("cluster {i}: order {j} held by {n} users"));
            }
            if j > 0 && n > 0 && occupancy[j - 1] == 0 {
                v7.push(format!("cluster {i}: order {j} occupied but order {} empty", j - 1));
            }
        }
    }
    push(ConstraintId::C7, v7);

    // C8: per-user power budget.
    let mut v8 = Vec::new();
    for u in 0..users {
        let total = assignment.total_power_w(u);
        let budget = tasks[u].power_budget_w;
        if total > budget * (1.0 + REL_TOL) {
            v8.push(format!("user {u}: total power {total:.6e} W > budget {budget:.6e} W"));
        }
    }
    push(ConstraintId::C8, v8);

    // C9: nonnegative finite powers.
    let mut v9 = Vec::new();
    for u in 0..users {
        for (r, &p) in assignment.powers[u].iter().enumerate() {
            if !(p >= 0.0) || !p.is_finite() {
                v9.push(format!("user {u} RB {r}: power {p}"));
            }
        }
    }
    push(ConstraintId::C9, v9);

    // C10-C12 hold by construction of the assignment types.
    push(ConstraintId::C10, Vec::new());
    push(ConstraintId::C11, Vec::new());
    push(ConstraintId::C12, Vec::new());

    ConstraintAudit { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelMatrix;
    use crate::model::ClusterSlot;

    fn config() -> SystemConfig {
        SystemConfig {
            num_users: 4,
            num_freq_rbs: 3,
            rb_bandwidth_hz: 1.0,
            num_comp_rbs: 4,
            comp_rb_capacity_cps: 10e9,
            max_users_per_rb: 2,
            num_clusters: 2,
            noise_psd_dbm_per_hz: 30.0,
            cell_radius_m: 1000.0,
        }
    }

    fn tasks(n: usize) -> Vec<TaskSpec> {
        (0..n)
            .map(|_| TaskSpec {
                workload_cycles: 1e9,
                input_bits: 6000.0,
                deadline_s: 0.45,
                power_budget_w: 1.0,
            })
            .collect()
    }

    fn channels(cfg: &SystemConfig) -> ChannelMatrix {
        ChannelMatrix::from_gains(vec![vec![1.0; cfg.num_freq_rbs]; cfg.num_users])
    }

    #[test]
    fn empty_assignment_fails_c3_for_every_user() {
        let cfg = config();
        let a = Assignment::empty(&cfg);
        let audit = audit_constraints(&a, &channels(&cfg), &tasks(4), &cfg);
        let c3 = audit.check(ConstraintId::C3);
        assert!(!c3.passed);
        assert_eq!(c3.violations.len(), 4);
    }

    #[test]
    fn singleton_cluster_fails_c4() {
        let cfg = config();
        let mut a = Assignment::empty(&cfg);
        a.cluster_order[0] = Some(ClusterSlot { cluster: 0, order: 0 });
        a.cluster_order[1] = Some(ClusterSlot { cluster: 0, order: 1 });
        a.cluster_order[2] = Some(ClusterSlot { cluster: 1, order: 0 });
        // cluster 1 keeps a single member; user 3 left out on purpose.
        let audit = audit_constraints(&a, &channels(&cfg), &tasks(4), &cfg);
        let c4 = audit.check(ConstraintId::C4);
        assert!(!c4.passed);
        assert!(c4.violations.iter().any(|v| v.contains("cluster 1")));
    }

    #[test]
    fn computing_overrun_fails_c6() {
        let cfg = config();
        let mut a = Assignment::empty(&cfg);
        a.comp_alloc[0][0] = 3;
        a.comp_alloc[1][0] = 2; // 5 > 4
        let audit = audit_constraints(&a, &channels(&cfg), &tasks(4), &cfg);
        assert!(!audit.passed(ConstraintId::C6));
        a.comp_alloc[1][0] = 1;
        let audit = audit_constraints(&a, &channels(&cfg), &tasks(4), &cfg);
        assert!(audit.passed(ConstraintId::C6));
    }

    #[test]
    fn unpacked_orders_and_shared_slots_fail_c7() {
        let cfg = config();
        let mut a = Assignment::empty(&cfg);
        a.cluster_order[0] = Some(ClusterSlot { cluster: 0, order: 1 }); // hole at 0
        let audit = audit_constraints(&a, &channels(&cfg), &tasks(4), &cfg);
        assert!(!audit.passed(ConstraintId::C7));

        let mut b = Assignment::empty(&cfg);
        b.cluster_order[0] = Some(ClusterSlot { cluster: 0, order: 0 });
        b.cluster_order[1] = Some(ClusterSlot { cluster: 0, order: 0 });
        let audit = audit_constraints(&b, &channels(&cfg), &tasks(4), &cfg);
        assert!(!audit.passed(ConstraintId::C7));
    }

    #[test]
    fn power_budget_and_sign_checks() {
        let cfg = config();
        let mut a = Assignment::empty(&cfg);
        a.powers[0][0] = 0.7;
        a.powers[0][1] = 0.7; // 1.4 > 1.0
        let audit = audit_constraints(&a, &channels(&cfg), &tasks(4), &cfg);
        assert!(!audit.passed(ConstraintId::C8));
        a.powers[0][1] = -0.1;
        let audit = audit_constraints(&a, &channels(&cfg), &tasks(4), &cfg);
        assert!(!audit.passed(ConstraintId::C9));
    }

    #[test]
    fn oma_waives_the_two_user_rule() {
        let mut cfg = config();
        cfg.max_users_per_rb = 1;
        cfg.num_clusters = 4;
        let mut a = Assignment::empty(&cfg);
        for u in 0..4 {
            a.cluster_order[u] = Some(ClusterSlot { cluster: u, order: 0 });
        }
        let audit = audit_constraints(&a, &channels(&cfg), &tasks(4), &cfg);
        assert!(audit.passed(ConstraintId::C4));
    }
}
