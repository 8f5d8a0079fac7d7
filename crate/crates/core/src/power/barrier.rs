//! Dense log-barrier interior-point minimizer for small smooth convex
//! programs (tens of variables). Damped Newton inner iterations with
//! feasibility-preserving backtracking, multiplicative barrier schedule,
//! KKT residual reporting.

use nalgebra::{Cholesky, DMatrix, DVector};

/// A smooth convex program: one objective, `num_constraints` smooth convex
/// inequalities `g_i(x) <= 0`.
pub(crate) trait ConvexProgram {
    fn dim(&self) -> usize;
    fn num_constraints(&self) -> usize;
    fn objective(&self, x: &[f64]) -> f64;
    /// Overwrites `grad` and `hess` with the objective derivatives.
    fn objective_derivs(&self, x: &[f64], grad: &mut [f64], hess: &mut DMatrix<f64>);
    fn constraint(&self, i: usize, x: &[f64]) -> f64;
    /// Accumulates `w1 * grad(g_i)` into `grad` and
    /// `w1 * hess(g_i) + w2 * grad(g_i) grad(g_i)^T` into `hess`.
    fn constraint_derivs_accum(
        &self,
        i: usize,
        x: &[f64],
        w1: f64,
        w2: f64,
        grad: &mut [f64],
        hess: &mut DMatrix<f64>,
    );
}

#[derive(Debug, Clone)]
pub(crate) struct BarrierOptions {
    /// Stop when `num_constraints / t <= rel_gap * max(|f|, floor)`.
    pub rel_gap: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Barrier parameter growth per outer iteration.
    pub growth: f64,
    /// Newton decrement target: stop centering at `lambda^2/2 <= inner_tol`.
    /// The stationarity part of the KKT residual lands near
    /// `sqrt(2 * inner_tol)`, so this must sit well below `tol_kkt^2`.
    pub inner_tol: f64,
    /// Early exit as soon as the objective drops below this (phase-1 use).
    pub stop_below: Option<f64>,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        BarrierOptions {
            rel_gap: 1e-9,
            max_outer: 500,
            max_inner: 100,
            growth: 20.0,
            inner_tol: 1e-13,
            stop_below: None,
        }
    }
}

/// One row of the convergence trace (per outer iteration).
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub outer: usize,
    pub objective: f64,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct BarrierOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    pub outer_iterations: usize,
    pub newton_iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone)]
pub(crate) enum BarrierFailure {
    /// The starting point violates strict feasibility.
    NotStrictlyFeasible { constraint: usize, value: f64 },
    /// Iteration caps hit before the gap target; carries the best iterate.
    NoConvergence(Box<BarrierOutcome>),
}

fn barrier_value(program: &impl ConvexProgram, x: &[f64], t: f64) -> Option<f64> {
    let mut value = t * program.objective(x);
    for i in 0..program.num_constraints() {
        let g = program.constraint(i, x);
        if g >= 0.0 {
            return None;
        }
        value -= (-g).ln();
    }
    Some(value)
}

/// KKT residual at `x`: scaled stationarity under least-squares
/// multipliers, complementarity, and the relative duality-gap surrogate.
///
/// Multipliers are free certificates, so the reported residual uses the
/// best nonnegative set rather than the raw barrier values `1/(-t g_i)`,
/// whose evaluation noise dominates once the active `g_i` are tiny.
fn kkt_residual(program: &impl ConvexProgram, x: &[f64], t: f64) -> (f64, Vec<f64>) {
    let n = program.dim();
    let ncons = program.num_constraints();
    let mut grad_f = vec![0.0; n];
    let mut hess_scratch = DMatrix::zeros(n, n);
    program.objective_derivs(x, &mut grad_f, &mut hess_scratch);

    // Constraint Jacobian, one row per constraint.
    let mut jac = DMatrix::zeros(ncons, n);
    let mut scratch = DMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(ncons);
    for i in 0..ncons {
        values.push(program.constraint(i, x));
        let mut row = vec![0.0; n];
        program.constraint_derivs_accum(i, x, 1.0, 0.0, &mut row, &mut scratch);
        for (j, v) in row.into_iter().enumerate() {
            jac[(i, j)] = v;
        }
    }

    let barrier_multipliers: Vec<f64> = values
        .iter()
        .map(|&g| 1.0 / (t * (-g).max(f64::MIN_POSITIVE)))
        .collect();

    // Alternative certificate: least-squares multipliers over the
    // near-active constraints only (clamped nonnegative). The raw barrier
    // multipliers inherit the evaluation noise of the tiny active g_i, so
    // whichever certificate scores better is reported.
    let active: Vec<usize> = (0..ncons).filter(|&i| values[i] >= -1e-3).collect();
    let ls_multipliers: Option<Vec<f64>> = if active.is_empty() {
        None
    } else {
        let na = active.len();
        let gf = DVector::from_column_slice(&grad_f);
        let mut jac_a = DMatrix::zeros(na, n);
        for (row, &i) in active.iter().enumerate() {
            for j in 0..n {
                jac_a[(row, j)] = jac[(i, j)];
            }
        }
        let mut normal = &jac_a * jac_a.transpose();
        let trace: f64 = (0..na).map(|i| normal[(i, i)]).sum();
        let ridge = 1e-12 * (trace / na as f64).max(1e-30);
        for i in 0..na {
            normal[(i, i)] += ridge;
        }
        let rhs = -(&jac_a * &gf);
        Cholesky::new(normal).map(|ch| {
            let solution = ch.solve(&rhs);
            let mut lambdas = vec![0.0; ncons];
            for (row, &i) in active.iter().enumerate() {
                lambdas[i] = solution[row].max(0.0);
            }
            lambdas
        })
    };

    let obj = program.objective(x).abs().max(f64::MIN_POSITIVE);
    let grad_scale = grad_f.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let score = |lambdas: &[f64]| -> f64 {
        let mut stationarity = grad_f.clone();
        for (i, &l) in lambdas.iter().enumerate() {
            for j in 0..n {
                stationarity[j] += l * jac[(i, j)];
            }
        }
        let r_stat =
            stationarity.iter().fold(0.0f64, |a, &b| a.max(b.abs())) / grad_scale.max(1.0);
        let r_comp = lambdas
            .iter()
            .zip(values.iter())
            .fold(0.0f64, |a, (&l, &g)| a.max((l * g).abs()))
            / obj.max(1.0);
        r_stat.max(r_comp)
    };

    let barrier_score = score(&barrier_multipliers);
    let (best_score, multipliers) = match ls_multipliers {
        Some(ls) => {
            let ls_score = score(&ls);
            if ls_score < barrier_score {
                (ls_score, ls)
            } else {
                (barrier_score, barrier_multipliers)
            }
        }
        None => (barrier_score, barrier_multipliers),
    };
    let r_gap = ncons as f64 / (t * obj);
    (best_score.max(r_gap), multipliers)
}

/// Newton minimization of the barrier objective at fixed `t`.
/// Returns the Newton step count.
fn center(
    program: &impl ConvexProgram,
    x: &mut Vec<f64>,
    t: f64,
    opts: &BarrierOptions,
) -> usize {
    let n = program.dim();
    let ncons = program.num_constraints();
    let mut steps = 0;
    for _ in 0..opts.max_inner {
        let mut grad = vec![0.0; n];
        let mut hess = DMatrix::zeros(n, n);
        program.objective_derivs(x, &mut grad, &mut hess);
        for v in grad.iter_mut() {
            *v *= t;
        }
        hess *= t;
        for i in 0..ncons {
            let g = program.constraint(i, x);
            let w1 = -1.0 / g;
            let w2 = 1.0 / (g * g);
            program.constraint_derivs_accum(i, x, w1, w2, &mut grad, &mut hess);
        }
        // Newton direction, with a ridge fallback if the Hessian is
        // numerically semidefinite.
        let rhs = DVector::from_column_slice(&grad);
        let mut ridge = 0.0;
        let direction = loop {
            let mut h = hess.clone();
            if ridge > 0.0 {
                for d in 0..n {
                    h[(d, d)] += ridge;
                }
            }
            match Cholesky::new(h.clone()) {
                Some(ch) => {
                    let mut d = -ch.solve(&rhs);
                    // One step of iterative refinement: at large barrier
                    // parameters the system is ill-conditioned enough that
                    // the raw solve limits the final KKT residual.
                    let residual = &h * &d + &rhs;
                    d -= ch.solve(&residual);
                    break d;
                }
                None => {
                    let trace: f64 = (0..n).map(|d| hess[(d, d)]).sum();
                    ridge = if ridge == 0.0 {
                        1e-12 * (trace / n as f64).max(1.0)
                    } else {
                        ridge * 10.0
                    };
                    if !ridge.is_finite() || ridge > 1e30 {
                        return steps;
                    }
                }
            }
        };
        let decrement_sq: f64 = -grad
            .iter()
            .zip(direction.iter())
            .map(|(g, d)| g * d)
            .sum::<f64>();
        let psi = barrier_value(program, x, t).expect("iterate stays feasible");
        if decrement_sq / 2.0 <= opts.inner_tol {
            break;
        }
        // Backtracking: stay strictly feasible and get Armijo decrease.
        // When t is large, |psi| dwarfs the achievable decrease, so the
        // acceptance test carries an explicit float-noise allowance.
        let noise = 1e-14 * (1.0 + psi.abs());
        let slope: f64 = grad.iter().zip(direction.iter()).map(|(g, d)| g * d).sum();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let candidate: Vec<f64> =
                x.iter().zip(direction.iter()).map(|(xi, di)| xi + alpha * di).collect();
            if let Some(value) = barrier_value(program, &candidate, t) {
                if value <= psi + 0.25 * alpha * slope + noise {
                    *x = candidate;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        steps += 1;
        if !accepted {
            break;
        }
    }
    steps
}

pub(crate) fn minimize(
    program: &impl ConvexProgram,
    x0: &[f64],
    opts: &BarrierOptions,
) -> Result<BarrierOutcome, BarrierFailure> {
    for i in 0..program.num_constraints() {
        let g = program.constraint(i, x0);
        if g >= 0.0 {
            return Err(BarrierFailure::NotStrictlyFeasible { constraint: i, value: g });
        }
    }
    let ncons = program.num_constraints() as f64;
    let mut x = x0.to_vec();
    let mut t = (ncons / program.objective(&x).abs().max(1e-12)).max(1.0);
    let mut newton_total = 0;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut outer = 0;
    while outer < opts.max_outer {
        outer += 1;
        newton_total += center(program, &mut x, t, opts);
        let objective = program.objective(&x);
        let (kkt, _) = kkt_residual(program, &x, t);
        trace.push(TraceRow { outer, objective, kkt_residual: kkt });
        if let Some(threshold) = opts.stop_below {
            if objective <= threshold {
                converged = true;
                break;
            }
        }
        let gap = ncons / t;
        if gap <= opts.rel_gap * objective.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
        if t > 1e250 {
            break;
        }
        // Never push t far past what the gap target needs: overshooting
        // makes the Newton system needlessly ill-conditioned and the
        // stationarity residual starts to climb back up.
        let t_needed = ncons / (opts.rel_gap * objective.abs().max(f64::MIN_POSITIVE));
        t = (t * opts.growth).min((t_needed * 1.05).max(t * 1.5));
    }
    let objective = program.objective(&x);
    let (kkt, _multipliers) = kkt_residual(program, &x, t);
    let outcome = BarrierOutcome {
        x,
        objective,
        outer_iterations: outer,
        newton_iterations: newton_total,
        kkt_residual: kkt,
        converged,
        trace,
    };
    if converged {
        Ok(outcome)
    } else {
        Err(BarrierFailure::NoConvergence(Box::new(outcome)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// minimize x1 + x2 s.t. x1 >= 1, x2 >= 2 (as -x + c <= 0).
    struct Affine;

    impl ConvexProgram for Affine {
        fn dim(&self) -> usize {
            2
        }
        fn num_constraints(&self) -> usize {
            2
        }
        fn objective(&self, x: &[f64]) -> f64 {
            x[0] + x[1]
        }
        fn objective_derivs(&self, _x: &[f64], grad: &mut [f64], hess: &mut DMatrix<f64>) {
            grad[0] = 1.0;
            grad[1] = 1.0;
            hess.fill(0.0);
        }
        fn constraint(&self, i: usize, x: &[f64]) -> f64 {
            let bound = [1.0, 2.0][i];
            bound - x[i]
        }
        fn constraint_derivs_accum(
            &self,
            i: usize,
            _x: &[f64],
            w1: f64,
            w2: f64,
            grad: &mut [f64],
            hess: &mut DMatrix<f64>,
        ) {
            grad[i] += -w1;
            hess[(i, i)] += w2;
        }
    }

    #[test]
    fn solves_separable_affine_program() {
        let out = minimize(&Affine, &[5.0, 5.0], &BarrierOptions::default()).unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() < 1e-6);
        assert!((out.x[1] - 2.0).abs() < 1e-6);
        assert!(out.kkt_residual < 1e-6);
    }

    #[test]
    fn rejects_infeasible_start() {
        let r = minimize(&Affine, &[0.5, 5.0], &BarrierOptions::default());
        assert!(matches!(r, Err(BarrierFailure::NotStrictlyFeasible { constraint: 0, .. })));
    }

    /// minimize e^{x} + e^{y} s.t. x + y >= 0 — optimum at x = y = 0.
    struct ExpSum;

    impl ConvexProgram for ExpSum {
        fn dim(&self) -> usize {
            2
        }
        fn num_constraints(&self) -> usize {
            1
        }
        fn objective(&self, x: &[f64]) -> f64 {
            x[0].exp() + x[1].exp()
        }
        fn objective_derivs(&self, x: &[f64], grad: &mut [f64], hess: &mut DMatrix<f64>) {
            grad[0] = x[0].exp();
            grad[1] = x[1].exp();
            hess.fill(0.0);
            hess[(0, 0)] = x[0].exp();
            hess[(1, 1)] = x[1].exp();
        }
        fn constraint(&self, _i: usize, x: &[f64]) -> f64 {
            -(x[0] + x[1])
        }
        fn constraint_derivs_accum(
            &self,
            _i: usize,
            _x: &[f64],
            w1: f64,
            w2: f64,
            grad: &mut [f64],
            hess: &mut DMatrix<f64>,
        ) {
            grad[0] += -w1;
            grad[1] += -w1;
            for a in 0..2 {
                for b in 0..2 {
                    hess[(a, b)] += w2;
                }
            }
        }
    }

    #[test]
    fn solves_exponential_program() {
        let out = minimize(&ExpSum, &[2.0, 1.0], &BarrierOptions::default()).unwrap();
        assert!(out.converged);
        assert!((out.x[0]).abs() < 1e-5);
        assert!((out.x[1]).abs() < 1e-5);
        assert!((out.objective - 2.0).abs() < 1e-6);
    }

    #[test]
    fn early_stop_triggers() {
        let opts = BarrierOptions { stop_below: Some(3.5), ..BarrierOptions::default() };
        let out = minimize(&ExpSum, &[2.0, 1.0], &opts).unwrap();
        assert!(out.converged);
        assert!(out.objective <= 3.5);
    }
}
