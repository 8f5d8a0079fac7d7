//! Log-domain formulation of the per-cluster power-control problem.
//!
//! With `p = e^S` the per-RB rate bound under the high-SINR approximation
//! `log(1+x) ~ log(x)` becomes
//!
//! ```text
//! Z <= -(B/ln2) * phi,   phi = -S_u + ln(noise/h_u + sum_{v>u} (h_v/h_u) e^{S_v})
//! ```
//!
//! which is affine-minus-log-sum-exp, hence concave in `S`; every constraint
//! of the reformulated program is convex. The solver works in `S` only:
//! the rate variables are recovered from the tight bounds afterwards.

use super::PowerError;
use crate::model::cluster_rates;
use nalgebra::DMatrix;

const LN_2: f64 = std::f64::consts::LN_2;

/// One cluster member, in decode order context.
#[derive(Debug, Clone)]
pub struct MemberSpec {
    pub user: usize,
    /// Minimum data rate implied by the deadline, bits/s.
    pub min_rate_bps: f64,
    pub power_budget_w: f64,
}

/// Everything the power solver needs to know about one cluster.
#[derive(Debug, Clone)]
pub struct ClusterProblem {
    /// Members ordered by decode order (index 0 decoded first).
    pub members: Vec<MemberSpec>,
    /// Original frequency-RB indices, for expanding solutions back.
    pub rb_ids: Vec<usize>,
    /// Linear gains `[member][rb]` over `rb_ids`.
    pub gains: Vec<Vec<f64>>,
    pub noise_w: f64,
    pub rb_bandwidth_hz: f64,
}

impl ClusterProblem {
    pub fn num_members(&self) -> usize {
        self.members.len()
    }

    pub fn num_rbs(&self) -> usize {
        self.rb_ids.len()
    }

    pub fn validate(&self) -> Result<(), PowerError> {
        if self.members.is_empty() {
            return Err(PowerError::Invalid("cluster has no members".into()));
        }
        if self.rb_ids.is_empty() {
            return Err(PowerError::Invalid("cluster has no frequency RBs".into()));
        }
        if !(self.noise_w > 0.0) || !(self.rb_bandwidth_hz > 0.0) {
            return Err(PowerError::Invalid("noise and bandwidth must be positive".into()));
        }
        for (i, m) in self.members.iter().enumerate() {
            if !(m.min_rate_bps > 0.0) || !m.min_rate_bps.is_finite() {
                return Err(PowerError::Invalid(format!(
                    "member {i} (user {}): min rate must be finite and positive",
                    m.user
                )));
            }
            if !(m.power_budget_w > 0.0) {
                return Err(PowerError::Invalid(format!(
                    "member {i} (user {}): power budget must be positive",
                    m.user
                )));
            }
        }
        for row in &self.gains {
            if row.len() != self.rb_ids.len() {
                return Err(PowerError::Invalid("gain matrix shape mismatch".into()));
            }
            if row.iter().any(|&g| !(g > 0.0)) {
                return Err(PowerError::Invalid("gains must be strictly positive".into()));
            }
        }
        if self.gains.len() != self.members.len() {
            return Err(PowerError::Invalid("gain matrix shape mismatch".into()));
        }
        Ok(())
    }

    /// Exact SIC rates (no approximation) at the given member powers.
    pub fn exact_rates(&self, powers: &[Vec<f64>]) -> Vec<f64> {
        cluster_rates(&self.gains, powers, self.noise_w, self.rb_bandwidth_hz)
    }
}

/// The constraints of the reformulated program, in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum P3Constraint {
    /// `R_u >= min rate`.
    MinRate { member: usize },
    /// `sum_rb e^{S} <= budget`.
    PowerBudget { member: usize },
    /// `Z <= rate bound` on one (member, RB).
    RbRate { member: usize, rb: usize },
    /// `R_u = sum_rb Z` (equality).
    RateCoupling { member: usize },
}

/// A candidate point of the full program: log-powers, per-RB rates and
/// user rates, all flat member-major.
#[derive(Debug, Clone)]
pub struct P3Point {
    pub log_powers: Vec<f64>,
    pub rb_rates: Vec<f64>,
    pub user_rates: Vec<f64>,
}

/// Convex program description for one cluster, plus the smooth geometry
/// the barrier solver consumes.
#[derive(Debug, Clone)]
pub struct ConvexProblem {
    pub cluster: ClusterProblem,
    constraints: Vec<P3Constraint>,
    /// Per member: `min_rate * ln2 / B` (the rate constraint in nats/RB-sum
    /// units, which is what the log-domain geometry works in).
    rho_scaled: Vec<f64>,
    /// Per (member, rb): `noise / gain`.
    noise_over_gain: Vec<Vec<f64>>,
}

impl ConvexProblem {
    pub fn new(cluster: ClusterProblem) -> Result<Self, PowerError> {
        cluster.validate()?;
        let (m, q) = (cluster.num_members(), cluster.num_rbs());
        let mut constraints = Vec::with_capacity(m * (3 + q));
        for u in 0..m {
            constraints.push(P3Constraint::MinRate { member: u });
        }
        for u in 0..m {
            constraints.push(P3Constraint::PowerBudget { member: u });
        }
        for u in 0..m {
            for k in 0..q {
                constraints.push(P3Constraint::RbRate { member: u, rb: k });
            }
        }
        for u in 0..m {
            constraints.push(P3Constraint::RateCoupling { member: u });
        }
        let rho_scaled = cluster
            .members
            .iter()
            .map(|mem| mem.min_rate_bps * LN_2 / cluster.rb_bandwidth_hz)
            .collect();
        let noise_over_gain = cluster
            .gains
            .iter()
            .map(|row| row.iter().map(|&g| cluster.noise_w / g).collect())
            .collect();
        Ok(ConvexProblem { cluster, constraints, rho_scaled, noise_over_gain })
    }

    pub fn num_members(&self) -> usize {
        self.cluster.num_members()
    }

    pub fn num_rbs(&self) -> usize {
        self.cluster.num_rbs()
    }

    pub fn constraints(&self) -> &[P3Constraint] {
        &self.constraints
    }

    /// `|members| * (2 + |rbs|) + |members|`: min-rate, budget and per-RB
    /// rate inequalities plus the rate-coupling equalities.
    pub fn constraint_count(&self) -> usize {
        self.constraints.len()
    }

    pub(crate) fn idx(&self, member: usize, rb: usize) -> usize {
        member * self.num_rbs() + rb
    }

    /// Total transmit power at `s`, watts.
    pub fn objective_w(&self, s: &[f64]) -> f64 {
        s.iter().map(|&v| v.exp()).sum()
    }

    /// `phi_{u,k}(s)`: negative log of the approximated per-RB SINR, nats.
    pub(crate) fn phi(&self, u: usize, k: usize, s: &[f64]) -> f64 {
        -s[self.idx(u, k)] + self.interference_term(u, k, s).ln()
    }

    /// `noise/h + sum_{v>u} (h_v/h_u) e^{S_v}` at RB `k`.
    fn interference_term(&self, u: usize, k: usize, s: &[f64]) -> f64 {
        let m = self.num_members();
        let mut w = self.noise_over_gain[u][k];
        for v in (u + 1)..m {
            w += self.cluster.gains[v][k] / self.cluster.gains[u][k] * s[self.idx(v, k)].exp();
        }
        w
    }

    /// Approximated rate of member `u` at `s`, bits/s.
    pub fn approx_rate_bps(&self, u: usize, s: &[f64]) -> f64 {
        let q = self.num_rbs();
        let sum_phi: f64 = (0..q).map(|k| self.phi(u, k, s)).sum();
        -self.cluster.rb_bandwidth_hz / LN_2 * sum_phi
    }

    /// Approximated per-RB rate bound (the tight value of the rate
    /// variable), bits/s.
    pub fn rb_rate_bound_bps(&self, u: usize, k: usize, s: &[f64]) -> f64 {
        -self.cluster.rb_bandwidth_hz / LN_2 * self.phi(u, k, s)
    }

    /// Min-rate constraint in solver units: `rho + sum_k phi <= 0`.
    pub(crate) fn min_rate_violation(&self, u: usize, s: &[f64]) -> f64 {
        let q = self.num_rbs();
        self.rho_scaled[u] + (0..q).map(|k| self.phi(u, k, s)).sum::<f64>()
    }

    /// Power-budget constraint in log form: `lse(S_u) - ln budget <= 0`.
    pub(crate) fn budget_violation(&self, u: usize, s: &[f64]) -> f64 {
        let q = self.num_rbs();
        let row: Vec<f64> = (0..q).map(|k| s[self.idx(u, k)]).collect();
        log_sum_exp(&row) - self.cluster.members[u].power_budget_w.ln()
    }

    /// Writes the raw gradient of the min-rate constraint (S coordinates
    /// only) into `out`, which must be zeroed by the caller.
    pub(crate) fn min_rate_grad(&self, u: usize, s: &[f64], out: &mut [f64]) {
        let (m, q) = (self.num_members(), self.num_rbs());
        for k in 0..q {
            out[self.idx(u, k)] -= 1.0;
            let w = self.interference_term(u, k, s);
            for v in (u + 1)..m {
                let term =
                    self.cluster.gains[v][k] / self.cluster.gains[u][k] * s[self.idx(v, k)].exp();
                out[self.idx(v, k)] += term / w;
            }
        }
    }

    /// Accumulates `w * hess(min-rate_u)` (curvature only, no rank-one
    /// gradient term) into `hess`.
    pub(crate) fn min_rate_hess_accum(&self, u: usize, s: &[f64], w: f64, hess: &mut DMatrix<f64>) {
        let (m, q) = (self.num_members(), self.num_rbs());
        for k in 0..q {
            let total = self.interference_term(u, k, s);
            // Softmax weights of the interferers at this RB; the hessian of
            // ln(c + sum w_v e^{x_v}) is diag(omega) - omega omegaT.
            let mut omegas: Vec<(usize, f64)> = Vec::with_capacity(m - u - 1);
            for v in (u + 1)..m {
                let term =
                    self.cluster.gains[v][k] / self.cluster.gains[u][k] * s[self.idx(v, k)].exp();
                omegas.push((self.idx(v, k), term / total));
            }
            for &(i, oi) in &omegas {
                for &(j, oj) in &omegas {
                    let d = if i == j { oi } else { 0.0 };
                    hess[(i, j)] += w * (d - oi * oj);
                }
            }
        }
    }

    /// Raw gradient of the budget constraint into zeroed `out`.
    pub(crate) fn budget_grad(&self, u: usize, s: &[f64], out: &mut [f64]) {
        for (k, pi) in self.budget_softmax(u, s).into_iter().enumerate() {
            out[self.idx(u, k)] += pi;
        }
    }

    /// Accumulates `w * hess(budget_u)` into `hess`.
    pub(crate) fn budget_hess_accum(&self, u: usize, s: &[f64], w: f64, hess: &mut DMatrix<f64>) {
        let q = self.num_rbs();
        let pis = self.budget_softmax(u, s);
        for k in 0..q {
            for l in 0..q {
                let d = if k == l { pis[k] } else { 0.0 };
                hess[(self.idx(u, k), self.idx(u, l))] += w * (d - pis[k] * pis[l]);
            }
        }
    }

    fn budget_softmax(&self, u: usize, s: &[f64]) -> Vec<f64> {
        let q = self.num_rbs();
        let row: Vec<f64> = (0..q).map(|k| s[self.idx(u, k)]).collect();
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let expd: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
        let total: f64 = expd.iter().sum();
        expd.into_iter().map(|e| e / total).collect()
    }

    /// Accumulates `w1 * grad(min-rate_u)` into `grad` and
    /// `w1 * hess + w2 * grad gradT` into `hess`.
    pub(crate) fn min_rate_derivs_accum(
        &self,
        u: usize,
        s: &[f64],
        w1: f64,
        w2: f64,
        grad: &mut [f64],
        hess: &mut DMatrix<f64>,
    ) {
        let mut g = vec![0.0; s.len()];
        self.min_rate_grad(u, s, &mut g);
        for (gi, out) in g.iter().zip(grad.iter_mut()) {
            *out += w1 * gi;
        }
        self.min_rate_hess_accum(u, s, w1, hess);
        rank_one_update(hess, &g, w2);
    }

    /// Same accumulation contract for the budget constraint of member `u`.
    pub(crate) fn budget_derivs_accum(
        &self,
        u: usize,
        s: &[f64],
        w1: f64,
        w2: f64,
        grad: &mut [f64],
        hess: &mut DMatrix<f64>,
    ) {
        let mut g = vec![0.0; s.len()];
        self.budget_grad(u, s, &mut g);
        for (gi, out) in g.iter().zip(grad.iter_mut()) {
            *out += w1 * gi;
        }
        self.budget_hess_accum(u, s, w1, hess);
        rank_one_update(hess, &g, w2);
    }

    /// Feasibility of a full (S, Z, R) point up to relative tolerance.
    pub fn point_feasible(&self, point: &P3Point, rel_tol: f64) -> bool {
        let (m, q) = (self.num_members(), self.num_rbs());
        if point.log_powers.len() != m * q
            || point.rb_rates.len() != m * q
            || point.user_rates.len() != m
        {
            return false;
        }
        let scale = |v: f64| v.abs().max(1.0);
        for u in 0..m {
            let rho = self.cluster.members[u].min_rate_bps;
            if point.user_rates[u] < rho - rel_tol * scale(rho) {
                return false;
            }
            let total: f64 = (0..q).map(|k| point.log_powers[self.idx(u, k)].exp()).sum();
            let budget = self.cluster.members[u].power_budget_w;
            if total > budget * (1.0 + rel_tol) {
                return false;
            }
            let mut z_sum = 0.0;
            for k in 0..q {
                let z = point.rb_rates[self.idx(u, k)];
                let bound = self.rb_rate_bound_bps(u, k, &point.log_powers);
                if z > bound + rel_tol * scale(bound) {
                    return false;
                }
                z_sum += z;
            }
            if (z_sum - point.user_rates[u]).abs()
                > rel_tol * scale(point.user_rates[u]).max(scale(z_sum))
            {
                return false;
            }
        }
        true
    }
}

/// `ln(sum exp(v))` with max subtraction.
pub(crate) fn log_sum_exp(vals: &[f64]) -> f64 {
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + vals.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

pub(crate) fn rank_one_update(hess: &mut DMatrix<f64>, g: &[f64], w: f64) {
    if w == 0.0 {
        return;
    }
    for (i, &gi) in g.iter().enumerate() {
        if gi == 0.0 {
            continue;
        }
        for (j, &gj) in g.iter().enumerate() {
            if gj != 0.0 {
                hess[(i, j)] += w * gi * gj;
            }
        }
    }
}
