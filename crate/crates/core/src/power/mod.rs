//! Per-cluster transmit-power minimization.
//!
//! For a cluster with fixed membership, RB set and computing allocation,
//! the problem is: minimize total transmit power subject to each member's
//! deadline-implied minimum rate, its power budget and nonnegativity. In
//! log-domain variables `p = e^S` with the high-SINR approximation the
//! program is convex; it is solved with a log-barrier interior method and
//! the result is then re-verified against the exact (unapproximated) rate,
//! which can only be larger.

mod barrier;
mod problem;

pub use barrier::TraceRow;
pub use problem::{ClusterProblem, ConvexProblem, MemberSpec, P3Constraint, P3Point};

use crate::channel::ChannelMatrix;
use crate::model::{Assignment, SystemConfig, TaskSpec};
use barrier::{BarrierFailure, BarrierOptions, ConvexProgram};
use nalgebra::DMatrix;
use problem::rank_one_update;
use rayon::prelude::*;
use std::io::Write;
use thiserror::Error;

/// Per-user evidence that no power vector can meet every minimum rate.
#[derive(Debug, Clone)]
pub struct CertificateEntry {
    pub user: usize,
    pub required_bps: f64,
    /// Best approximated rate found for this user by the feasibility phase.
    pub achievable_bps: f64,
}

#[derive(Debug, Clone)]
pub struct InfeasibilityCertificate {
    pub entries: Vec<CertificateEntry>,
}

impl std::fmt::Display for InfeasibilityCertificate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for e in &self.entries {
            writeln!(
                f,
                "user {}: requires {:.3} bit/s, best achievable {:.3} bit/s",
                e.user, e.required_bps, e.achievable_bps
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PowerError {
    #[error("user {user}: computing time reaches the deadline, no rate requirement exists")]
    InfeasibleDeadline { user: usize },
    #[error("power problem infeasible:\n{0}")]
    Infeasible(InfeasibilityCertificate),
    #[error("solver did not converge: kkt residual {kkt_residual:.3e} after {newton_iterations} Newton steps")]
    NoConvergence {
        kkt_residual: f64,
        newton_iterations: usize,
        last_powers: Vec<Vec<f64>>,
    },
    #[error("exact-rate verification failed for user {user}: margin {margin_bps:.3} bit/s")]
    NegativeMargin { user: usize, margin_bps: f64 },
    #[error("invalid cluster problem: {0}")]
    Invalid(String),
}

/// Solver knobs. The contract is the KKT residual and the relative
/// optimality gap, not the path taken.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Maximum acceptable KKT residual at the returned point.
    pub tol_kkt: f64,
    /// Feasibility tolerance (relative) used in verification checks.
    pub tol_feas: f64,
    /// Relative duality-gap target driving the barrier schedule.
    pub rel_gap: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub barrier_growth: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_kkt: 1e-6,
            tol_feas: 1e-8,
            rel_gap: 1e-9,
            max_outer: 500,
            max_inner: 100,
            barrier_growth: 20.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverDiagnostics {
    pub outer_iterations: usize,
    pub newton_iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

/// Converged log-domain solution plus the recovered powers and rates.
#[derive(Debug, Clone)]
pub struct LogDomainSolution {
    /// `S` values, `[member][rb]`.
    pub log_powers: Vec<Vec<f64>>,
    /// Tight per-RB rate variables, bits/s.
    pub rb_rates: Vec<Vec<f64>>,
    /// Per-member totals of `rb_rates`, bits/s.
    pub user_rates: Vec<f64>,
    /// `e^S`, watts.
    pub powers_w: Vec<Vec<f64>>,
    pub total_power_w: f64,
    pub diagnostics: SolverDiagnostics,
}

/// Log-power of a transmit power (the variable change `S = ln p`).
pub fn power_to_log(p_w: f64) -> f64 {
    p_w.ln()
}

/// Inverse of [`power_to_log`]; always positive.
pub fn log_to_power(s: f64) -> f64 {
    s.exp()
}

/// Builds the convex program description for one cluster.
pub fn build_convex_problem(cluster: ClusterProblem) -> Result<ConvexProblem, PowerError> {
    ConvexProblem::new(cluster)
}

/// Extracts the power subproblem of `cluster` from a full assignment.
pub fn cluster_problem_from_assignment(
    assignment: &Assignment,
    channels: &ChannelMatrix,
    tasks: &[TaskSpec],
    config: &SystemConfig,
    cluster: usize,
) -> Result<ClusterProblem, PowerError> {
    let users = assignment.cluster_members(cluster);
    if users.is_empty() {
        return Err(PowerError::Invalid(format!("cluster {cluster} has no members")));
    }
    let rb_ids = assignment.cluster_rbs(cluster);
    let mut members = Vec::with_capacity(users.len());
    for &u in &users {
        let x = assignment.comp_rbs_of(u);
        if x == 0 {
            return Err(PowerError::InfeasibleDeadline { user: u });
        }
        let q_time = tasks[u].workload_cycles / (x as f64 * config.comp_rb_capacity_cps);
        let headroom = tasks[u].deadline_s - q_time;
        if !(headroom > 0.0) {
            return Err(PowerError::InfeasibleDeadline { user: u });
        }
        members.push(MemberSpec {
            user: u,
            min_rate_bps: tasks[u].input_bits / headroom,
            power_budget_w: tasks[u].power_budget_w,
        });
    }
    let gains = users
        .iter()
        .map(|&u| rb_ids.iter().map(|&r| channels.gains[u][r]).collect())
        .collect();
    Ok(ClusterProblem {
        members,
        rb_ids,
        gains,
        noise_w: config.noise_power_w(),
        rb_bandwidth_hz: config.rb_bandwidth_hz,
    })
}

/// Phase-2 program: variables `S`, constraints `[min-rate x m, budget x m]`.
struct RateProgram<'a> {
    p: &'a ConvexProblem,
}

impl ConvexProgram for RateProgram<'_> {
    fn dim(&self) -> usize {
        self.p.num_members() * self.p.num_rbs()
    }
    fn num_constraints(&self) -> usize {
        2 * self.p.num_members()
    }
    fn objective(&self, x: &[f64]) -> f64 {
        self.p.objective_w(x)
    }
    fn objective_derivs(&self, x: &[f64], grad: &mut [f64], hess: &mut DMatrix<f64>) {
        hess.fill(0.0);
        for (i, &s) in x.iter().enumerate() {
            let e = s.exp();
            grad[i] = e;
            hess[(i, i)] = e;
        }
    }
    fn constraint(&self, i: usize, x: &[f64]) -> f64 {
        let m = self.p.num_members();
        if i < m {
            self.p.min_rate_violation(i, x)
        } else {
            self.p.budget_violation(i - m, x)
        }
    }
    fn constraint_derivs_accum(
        &self,
        i: usize,
        x: &[f64],
        w1: f64,
        w2: f64,
        grad: &mut [f64],
        hess: &mut DMatrix<f64>,
    ) {
        let m = self.p.num_members();
        if i < m {
            self.p.min_rate_derivs_accum(i, x, w1, w2, grad, hess);
        } else {
            self.p.budget_derivs_accum(i - m, x, w1, w2, grad, hess);
        }
    }
}

/// Phase-1 program: variables `(S, slack)`, minimize the slack that bounds
/// every min-rate violation; budgets stay hard.
struct FeasibilityProgram<'a> {
    p: &'a ConvexProblem,
}

impl FeasibilityProgram<'_> {
    fn s_dim(&self) -> usize {
        self.p.num_members() * self.p.num_rbs()
    }
}

impl ConvexProgram for FeasibilityProgram<'_> {
    fn dim(&self) -> usize {
        self.s_dim() + 1
    }
    fn num_constraints(&self) -> usize {
        2 * self.p.num_members()
    }
    fn objective(&self, x: &[f64]) -> f64 {
        x[self.s_dim()]
    }
    fn objective_derivs(&self, _x: &[f64], grad: &mut [f64], hess: &mut DMatrix<f64>) {
        hess.fill(0.0);
        grad.fill(0.0);
        let last = grad.len() - 1;
        grad[last] = 1.0;
    }
    fn constraint(&self, i: usize, x: &[f64]) -> f64 {
        let m = self.p.num_members();
        let s = &x[..self.s_dim()];
        if i < m {
            self.p.min_rate_violation(i, s) - x[self.s_dim()]
        } else {
            self.p.budget_violation(i - m, s)
        }
    }
    fn constraint_derivs_accum(
        &self,
        i: usize,
        x: &[f64],
        w1: f64,
        w2: f64,
        grad: &mut [f64],
        hess: &mut DMatrix<f64>,
    ) {
        let m = self.p.num_members();
        let sd = self.s_dim();
        let s = &x[..sd];
        // The curvature helpers only touch S coordinates, so the larger
        // (S, slack) Hessian can be passed straight through.
        let mut raw = vec![0.0; sd + 1];
        if i < m {
            self.p.min_rate_grad(i, s, &mut raw[..sd]);
            raw[sd] = -1.0;
            self.p.min_rate_hess_accum(i, s, w1, hess);
        } else {
            self.p.budget_grad(i - m, s, &mut raw[..sd]);
            self.p.budget_hess_accum(i - m, s, w1, hess);
        }
        for (gi, out) in raw.iter().zip(grad.iter_mut()) {
            *out += w1 * gi;
        }
        rank_one_update(hess, &raw, w2);
    }
}

/// Strictly budget-feasible equal-split start: `0.99 * budget / q` per RB.
fn equal_split_start(p: &ConvexProblem) -> Vec<f64> {
    let (m, q) = (p.num_members(), p.num_rbs());
    let mut s = vec![0.0; m * q];
    for u in 0..m {
        let level = (0.99 * p.cluster.members[u].power_budget_w / q as f64).ln();
        for k in 0..q {
            s[u * q + k] = level;
        }
    }
    s
}

fn certificate(p: &ConvexProblem, s: &[f64]) -> InfeasibilityCertificate {
    let entries = p
        .cluster
        .members
        .iter()
        .enumerate()
        .map(|(u, mem)| CertificateEntry {
            user: mem.user,
            required_bps: mem.min_rate_bps,
            achievable_bps: p.approx_rate_bps(u, s),
        })
        .collect();
    InfeasibilityCertificate { entries }
}

/// Margin the feasibility phase must clear for a point to count as
/// strictly feasible.
const PHASE1_MARGIN: f64 = 1e-9;

fn find_strictly_feasible(
    p: &ConvexProblem,
    opts: &SolverOptions,
) -> Result<Vec<f64>, PowerError> {
    let s0 = equal_split_start(p);
    let m = p.num_members();
    if (0..m).all(|u| p.min_rate_violation(u, &s0) < -PHASE1_MARGIN) {
        return Ok(s0);
    }
    let program = FeasibilityProgram { p };
    let worst = (0..m)
        .map(|u| p.min_rate_violation(u, &s0))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut x0 = s0;
    x0.push(worst + 1.0);
    let b_opts = BarrierOptions {
        rel_gap: 1e-6,
        max_outer: opts.max_outer,
        max_inner: opts.max_inner,
        growth: opts.barrier_growth,
        inner_tol: 1e-10,
        stop_below: Some(-PHASE1_MARGIN),
    };
    let sd = x0.len() - 1;
    match barrier::minimize(&program, &x0, &b_opts) {
        Ok(out) if out.objective <= -PHASE1_MARGIN => Ok(out.x[..sd].to_vec()),
        Ok(out) => Err(PowerError::Infeasible(certificate(p, &out.x[..sd]))),
        Err(BarrierFailure::NoConvergence(best)) if best.objective <= -PHASE1_MARGIN => {
            Ok(best.x[..sd].to_vec())
        }
        Err(BarrierFailure::NoConvergence(best)) => {
            Err(PowerError::Infeasible(certificate(p, &best.x[..sd])))
        }
        Err(BarrierFailure::NotStrictlyFeasible { constraint, value }) => Err(PowerError::Invalid(
            format!("feasibility start violates constraint {constraint}: {value}"),
        )),
    }
}

/// Solves the cluster power problem to the configured tolerances.
pub fn solve_cluster(
    cluster: &ClusterProblem,
    opts: &SolverOptions,
) -> Result<LogDomainSolution, PowerError> {
    let p = ConvexProblem::new(cluster.clone())?;
    let start = find_strictly_feasible(&p, opts)?;
    let program = RateProgram { p: &p };
    let b_opts = BarrierOptions {
        rel_gap: opts.rel_gap,
        max_outer: opts.max_outer,
        max_inner: opts.max_inner,
        growth: opts.barrier_growth,
        inner_tol: 1e-13,
        stop_below: None,
    };
    let (m, q) = (p.num_members(), p.num_rbs());
    let expand = |x: &[f64]| -> Vec<Vec<f64>> {
        (0..m).map(|u| (0..q).map(|k| x[u * q + k].exp()).collect()).collect()
    };
    match barrier::minimize(&program, &start, &b_opts) {
        Ok(out) => {
            if out.kkt_residual > opts.tol_kkt {
                return Err(PowerError::NoConvergence {
                    kkt_residual: out.kkt_residual,
                    newton_iterations: out.newton_iterations,
                    last_powers: expand(&out.x),
                });
            }
            let log_powers: Vec<Vec<f64>> =
                (0..m).map(|u| (0..q).map(|k| out.x[u * q + k]).collect()).collect();
            let rb_rates: Vec<Vec<f64>> = (0..m)
                .map(|u| (0..q).map(|k| p.rb_rate_bound_bps(u, k, &out.x)).collect())
                .collect();
            let user_rates: Vec<f64> = rb_rates.iter().map(|row| row.iter().sum()).collect();
            let powers_w = expand(&out.x);
            let total_power_w = powers_w.iter().flatten().sum();
            Ok(LogDomainSolution {
                log_powers,
                rb_rates,
                user_rates,
                powers_w,
                total_power_w,
                diagnostics: SolverDiagnostics {
                    outer_iterations: out.outer_iterations,
                    newton_iterations: out.newton_iterations,
                    kkt_residual: out.kkt_residual,
                    converged: out.converged,
                    trace: out.trace,
                },
            })
        }
        Err(BarrierFailure::NoConvergence(best)) => Err(PowerError::NoConvergence {
            kkt_residual: best.kkt_residual,
            newton_iterations: best.newton_iterations,
            last_powers: expand(&best.x),
        }),
        Err(BarrierFailure::NotStrictlyFeasible { constraint, value }) => Err(
            PowerError::Invalid(format!("phase-2 start violates constraint {constraint}: {value}")),
        ),
    }
}

/// Exact-rate feasibility report for a solved cluster.
#[derive(Debug, Clone)]
pub struct ExactFeasibility {
    /// Exact rates (no approximation), bits/s per member.
    pub rates_bps: Vec<f64>,
    /// `rate - min_rate` per member; all nonnegative on success.
    pub margins_bps: Vec<f64>,
}

/// Recomputes rates with the exact formula and reports per-member margins.
///
/// `log(1+x) > log(x)`, so any approximation-feasible power vector must be
/// exact-feasible; a negative margin signals an internal bug, not an
/// unlucky instance.
pub fn verify_exact(
    cluster: &ClusterProblem,
    powers: &[Vec<f64>],
) -> Result<ExactFeasibility, PowerError> {
    let rates = cluster.exact_rates(powers);
    let mut margins = Vec::with_capacity(rates.len());
    for (i, member) in cluster.members.iter().enumerate() {
        let margin = rates[i] - member.min_rate_bps;
        if margin < -1e-9 * member.min_rate_bps.max(1.0) {
            return Err(PowerError::NegativeMargin { user: member.user, margin_bps: margin });
        }
        margins.push(margin);
    }
    Ok(ExactFeasibility { rates_bps: rates, margins_bps: margins })
}

/// Why a cluster kept its equal-split powers (or did not).
#[derive(Debug, Clone, PartialEq)]
pub enum ClusterStatus {
    Solved { total_power_w: f64, kkt_residual: f64 },
    EmptyCluster,
    /// No frequency RBs allocated; nothing to optimize.
    NoRbs,
    InfeasibleDeadline { user: usize },
    /// The feasibility phase certified there is no feasible power vector.
    Infeasible,
    NoConvergence,
    /// Exact-rate verification contradicted the solver (should not happen).
    VerificationFailed,
}

#[derive(Debug, Clone)]
pub struct SolveAllOutcome {
    pub assignment: Assignment,
    pub statuses: Vec<ClusterStatus>,
}

impl SolveAllOutcome {
    pub fn all_solved(&self) -> bool {
        self.statuses
            .iter()
            .all(|s| matches!(s, ClusterStatus::Solved { .. } | ClusterStatus::EmptyCluster))
    }
}

/// Optimizes every cluster independently, replacing the equal-split powers
/// where a solve succeeds and flagging the clusters where it does not.
pub fn solve_all(
    assignment: &Assignment,
    channels: &ChannelMatrix,
    tasks: &[TaskSpec],
    config: &SystemConfig,
    opts: &SolverOptions,
) -> SolveAllOutcome {
    type ClusterPowers = (Vec<usize>, Vec<usize>, Vec<Vec<f64>>);
    let per_cluster: Vec<(ClusterStatus, Option<ClusterPowers>)> = (0..config.num_clusters)
        .into_par_iter()
        .map(|i| {
            let members = assignment.cluster_members(i);
            if members.is_empty() {
                return (ClusterStatus::EmptyCluster, None);
            }
            let rbs = assignment.cluster_rbs(i);
            if rbs.is_empty() {
                return (ClusterStatus::NoRbs, None);
            }
            let cluster = match cluster_problem_from_assignment(assignment, channels, tasks, config, i)
            {
                Ok(c) => c,
                Err(PowerError::InfeasibleDeadline { user }) => {
                    return (ClusterStatus::InfeasibleDeadline { user }, None)
                }
                Err(_) => return (ClusterStatus::Infeasible, None),
            };
            match solve_cluster(&cluster, opts) {
                Ok(solution) => match verify_exact(&cluster, &solution.powers_w) {
                    Ok(_) => (
                        ClusterStatus::Solved {
                            total_power_w: solution.total_power_w,
                            kkt_residual: solution.diagnostics.kkt_residual,
                        },
                        Some((members, rbs, solution.powers_w)),
                    ),
                    Err(_) => (ClusterStatus::VerificationFailed, None),
                },
                Err(PowerError::Infeasible(_)) => (ClusterStatus::Infeasible, None),
                Err(PowerError::InfeasibleDeadline { user }) => {
                    (ClusterStatus::InfeasibleDeadline { user }, None)
                }
                Err(PowerError::NoConvergence { .. }) => (ClusterStatus::NoConvergence, None),
                Err(_) => (ClusterStatus::Infeasible, None),
            }
        })
        .collect();

    let mut result = assignment.clone();
    let mut statuses = Vec::with_capacity(per_cluster.len());
    for (status, data) in per_cluster {
        if let Some((members, rbs, powers)) = &data {
            for (mi, &u) in members.iter().enumerate() {
                for p in result.powers[u].iter_mut() {
                    *p = 0.0;
                }
                for (ki, &r) in rbs.iter().enumerate() {
                    result.powers[u][r] = powers[mi][ki];
                }
            }
        }
        statuses.push(status);
    }
    SolveAllOutcome { assignment: result, statuses }
}

/// Dumps a solver trace as `iteration,objective_w,kkt_residual` CSV.
pub fn write_trace_csv<W: Write>(trace: &[TraceRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "iteration,objective_w,kkt_residual")?;
    for row in trace {
        writeln!(out, "{},{},{}", row.outer, row.objective, row.kkt_residual)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream;
    use rand::Rng;

    fn single_user_cluster(noise_w: f64, gain: f64, min_rate_bps: f64, bw: f64) -> ClusterProblem {
        ClusterProblem {
            members: vec![MemberSpec { user: 0, min_rate_bps, power_budget_w: 1.0 }],
            rb_ids: vec![0],
            gains: vec![vec![gain]],
            noise_w,
            rb_bandwidth_hz: bw,
        }
    }

    /// Closed form of the approximated 1-user 1-RB problem.
    fn closed_form_power(noise_w: f64, gain: f64, min_rate_bps: f64, bw: f64) -> f64 {
        noise_w * 2f64.powf(min_rate_bps / bw) / gain
    }

    #[test]
    fn single_user_matches_closed_form() {
        let (noise, gain, bw) = (1e-15, 1e-10, 180e3);
        let min_rate = 8.0 * bw; // SINR* = 256, comfortably high-SINR
        let cluster = single_user_cluster(noise, gain, min_rate, bw);
        let sol = solve_cluster(&cluster, &SolverOptions::default()).unwrap();
        let expected = closed_form_power(noise, gain, min_rate, bw);
        let rel = (sol.powers_w[0][0] - expected).abs() / expected;
        assert!(rel < 1e-6, "rel err {rel}");
        assert!(sol.diagnostics.kkt_residual < 1e-6);
    }

    #[test]
    fn doubling_noise_doubles_power() {
        let (gain, bw) = (1e-10, 180e3);
        let min_rate = 7.0 * bw;
        let a = solve_cluster(&single_user_cluster(1e-15, gain, min_rate, bw), &SolverOptions::default())
            .unwrap();
        let b = solve_cluster(&single_user_cluster(2e-15, gain, min_rate, bw), &SolverOptions::default())
            .unwrap();
        let ratio = b.powers_w[0][0] / a.powers_w[0][0];
        assert!((ratio - 2.0).abs() < 1e-6, "ratio {ratio}");
    }

    #[test]
    fn log_mapping_is_exact_at_unity_and_bijective() {
        assert_eq!(power_to_log(1.0), 0.0);
        assert_eq!(log_to_power(0.0), 1.0);
        // Round trip across 10 decades.
        for i in 0..100 {
            let p = 1e-9 * 10f64.powf(i as f64 / 10.0);
            let back = log_to_power(power_to_log(p));
            assert!((back - p).abs() / p < 1e-12);
        }
    }

    #[test]
    fn verify_exact_reports_positive_margins() {
        let (noise, gain, bw) = (1e-15, 1e-10, 180e3);
        let cluster = single_user_cluster(noise, gain, 6.0 * bw, bw);
        let sol = solve_cluster(&cluster, &SolverOptions::default()).unwrap();
        let report = verify_exact(&cluster, &sol.powers_w).unwrap();
        assert!(report.margins_bps[0] >= 0.0);
        // log2(1 + SINR) vs log2(SINR) at SINR = 64: margin must be small
        // but strictly positive.
        assert!(report.margins_bps[0] > 0.0);
    }

    #[test]
    fn approximation_gap_at_sinr_100_is_about_0_2_percent() {
        let gap = (101f64.log2() - 100f64.log2()) / 101f64.log2();
        assert!(gap > 0.001 && gap < 0.003, "gap {gap}");
    }

    #[test]
    fn margins_shrink_as_min_rate_grows() {
        let (noise, gain, bw) = (1e-15, 1e-10, 180e3);
        let mut last_margin = f64::INFINITY;
        for mult in [5.0, 6.0, 7.0, 8.0, 9.0] {
            let cluster = single_user_cluster(noise, gain, mult * bw, bw);
            let sol = solve_cluster(&cluster, &SolverOptions::default()).unwrap();
            let report = verify_exact(&cluster, &sol.powers_w).unwrap();
            assert!(report.margins_bps[0] < last_margin);
            last_margin = report.margins_bps[0];
        }
    }

    fn two_user_cluster(min0: f64, min1: f64) -> ClusterProblem {
        ClusterProblem {
            members: vec![
                MemberSpec { user: 0, min_rate_bps: min0, power_budget_w: 1.0 },
                MemberSpec { user: 1, min_rate_bps: min1, power_budget_w: 1.0 },
            ],
            rb_ids: vec![0, 1],
            gains: vec![vec![3e-10, 2e-10], vec![8e-11, 9e-11]],
            noise_w: 1e-15,
            rb_bandwidth_hz: 180e3,
        }
    }

    #[test]
    fn objective_monotone_in_min_rate() {
        let opts = SolverOptions::default();
        let mut last = 0.0;
        for mult in [1.0, 1.5, 2.0, 2.5] {
            let cluster = two_user_cluster(mult * 5e5, 4e5);
            let sol = solve_cluster(&cluster, &opts).unwrap();
            assert!(
                sol.total_power_w > last,
                "objective fell when a min rate grew: {} vs {last}",
                sol.total_power_w
            );
            last = sol.total_power_w;
        }
    }

    #[test]
    fn min_rate_binds_at_optimum() {
        let cluster = two_user_cluster(6e5, 4e5);
        let sol = solve_cluster(&cluster, &SolverOptions::default()).unwrap();
        for (u, member) in cluster.members.iter().enumerate() {
            let rel_slack = (sol.user_rates[u] - member.min_rate_bps) / member.min_rate_bps;
            assert!(rel_slack >= -1e-9, "user {u} below min rate");
            assert!(rel_slack < 1e-4, "user {u} slack {rel_slack} too loose");
        }
    }

    #[test]
    fn rate_coupling_is_tight_by_construction() {
        let cluster = two_user_cluster(6e5, 4e5);
        let p = build_convex_problem(cluster.clone()).unwrap();
        let sol = solve_cluster(&cluster, &SolverOptions::default()).unwrap();
        let flat: Vec<f64> = sol.log_powers.iter().flatten().cloned().collect();
        for u in 0..2 {
            for k in 0..2 {
                let bound = p.rb_rate_bound_bps(u, k, &flat);
                assert!((sol.rb_rates[u][k] - bound).abs() <= 1e-9 * bound.abs().max(1.0));
            }
            assert!(
                (sol.user_rates[u] - sol.rb_rates[u].iter().sum::<f64>()).abs()
                    <= 1e-9 * sol.user_rates[u].abs().max(1.0)
            );
        }
    }

    #[test]
    fn infeasible_cluster_yields_certificate() {
        // Demand far beyond what 1 W can deliver.
        let cluster = single_user_cluster(1e-10, 1e-12, 1e7, 180e3);
        match solve_cluster(&cluster, &SolverOptions::default()) {
            Err(PowerError::Infeasible(cert)) => {
                assert_eq!(cert.entries.len(), 1);
                assert!(cert.entries[0].achievable_bps < cert.entries[0].required_bps);
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn phase1_recovers_from_infeasible_equal_split() {
        // Equal split violates user 0's min rate because user 1 interferes;
        // a feasible point exists with user 1 quieter. Gains close, rates
        // asymmetric.
        let cluster = ClusterProblem {
            members: vec![
                MemberSpec { user: 0, min_rate_bps: 1.6e6, power_budget_w: 1.0 },
                MemberSpec { user: 1, min_rate_bps: 1e5, power_budget_w: 1.0 },
            ],
            rb_ids: vec![0],
            gains: vec![vec![1e-10], vec![9e-11]],
            noise_w: 1e-15,
            rb_bandwidth_hz: 180e3,
        };
        let p = build_convex_problem(cluster.clone()).unwrap();
        let s0 = equal_split_start(&p);
        assert!(p.min_rate_violation(0, &s0) > 0.0, "test needs an infeasible start");
        let sol = solve_cluster(&cluster, &SolverOptions::default()).unwrap();
        verify_exact(&cluster, &sol.powers_w).unwrap();
    }

    #[test]
    fn convex_combinations_of_feasible_points_stay_feasible() {
        // High-SINR cluster with trivial min rates and a weak interferer,
        // so random boxes of points are feasible and the sampled convexity
        // witness is sharp.
        let cluster = ClusterProblem {
            members: vec![
                MemberSpec { user: 0, min_rate_bps: 1e-3, power_budget_w: 1.0 },
                MemberSpec { user: 1, min_rate_bps: 1e-3, power_budget_w: 1.0 },
            ],
            rb_ids: vec![0, 1],
            gains: vec![vec![2e-6, 2e-6], vec![1e-12, 1e-12]],
            noise_w: 1e-16,
            rb_bandwidth_hz: 180e3,
        };
        let p = build_convex_problem(cluster).unwrap();
        let mut rng = stream(7, "witness", &[]);
        let random_point = |rng: &mut rand_chacha::ChaCha8Rng| -> P3Point {
            let mut log_powers = vec![0.0; 4];
            for v in log_powers.iter_mut() {
                // p in [0.01, 0.4] per RB: budget-feasible with margin.
                *v = (0.01 + 0.39 * rng.gen::<f64>()).ln();
            }
            let mut rb_rates = vec![0.0; 4];
            for u in 0..2 {
                for k in 0..2 {
                    let bound = p.rb_rate_bound_bps(u, k, &log_powers);
                    assert!(bound > 0.0);
                    rb_rates[u * 2 + k] = bound * (0.5 + 0.5 * rng.gen::<f64>());
                }
            }
            let user_rates = vec![rb_rates[0] + rb_rates[1], rb_rates[2] + rb_rates[3]];
            P3Point { log_powers, rb_rates, user_rates }
        };
        for trial in 0..1000 {
            let a = random_point(&mut rng);
            let b = random_point(&mut rng);
            assert!(p.point_feasible(&a, 1e-8), "trial {trial}: endpoint a");
            assert!(p.point_feasible(&b, 1e-8), "trial {trial}: endpoint b");
            let theta: f64 = rng.gen();
            let mix = |x: &[f64], y: &[f64]| -> Vec<f64> {
                x.iter().zip(y).map(|(xi, yi)| theta * xi + (1.0 - theta) * yi).collect()
            };
            let combo = P3Point {
                log_powers: mix(&a.log_powers, &b.log_powers),
                rb_rates: mix(&a.rb_rates, &b.rb_rates),
                user_rates: mix(&a.user_rates, &b.user_rates),
            };
            assert!(p.point_feasible(&combo, 1e-8), "trial {trial}: convex combination");
        }
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let cluster = single_user_cluster(1e-15, 1e-10, 6.0 * 180e3, 180e3);
        let sol = solve_cluster(&cluster, &SolverOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&sol.diagnostics.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iteration,objective_w,kkt_residual\n"));
        assert!(text.lines().count() > 1);
    }
}
