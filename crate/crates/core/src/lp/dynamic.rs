//! The dynamic fluid LP `LP({mu_t}, {C_t}, T)`.
//!
//! The program is block-angular: `T` simplex blocks coupled by `d` budget rows.
//! It is solved through its Lagrangian dual
//!
//! ```text
//! g(q) = B'q + sum_t max_i (mu_{t,i} - q'C_{t,.,i}),   q >= 0
//! ```
//!
//! where the null arm keeps every inner maximum nonnegative. Rounds with
//! identical means are grouped first; an optimal solution can always use the
//! same distribution inside a group.
//!
//! * `d = 1`: exact breakpoint search on the piecewise-linear `g`.
//! * any `d`: Dantzig-Wolfe column generation. The master LP mixes pure
//!   per-group arm choices under the budget rows; its duals are the prices `q`
//!   and pricing is the inner maximum above. It stops when the reduced profit
//!   (which equals the duality gap `g(q) - master`) falls below tolerance.

use crate::error::{invalid, Error, Result};
use crate::instance::{BwkInstance, RoundGroups};

use super::simplex::{LinearProgram, Relation};
use super::{DynamicLpSolution, LpOptions, LpStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicMethod {
    /// Breakpoint search for one resource, column generation otherwise.
    Auto,
    Breakpoint,
    ColumnGeneration,
}

pub fn solve_dynamic_lp(instance: &BwkInstance) -> Result<DynamicLpSolution> {
    solve_dynamic_lp_with(instance, DynamicMethod::Auto, &LpOptions::default())
}

pub fn solve_dynamic_lp_with(
    instance: &BwkInstance,
    method: DynamicMethod,
    opts: &LpOptions,
) -> Result<DynamicLpSolution> {
    let problem = Grouped::new(instance);
    let (x_groups, q) = match method {
        DynamicMethod::Breakpoint => breakpoint(&problem)?,
        DynamicMethod::ColumnGeneration => column_generation(&problem, opts)?,
        DynamicMethod::Auto if problem.d == 1 => breakpoint(&problem)?,
        DynamicMethod::Auto => column_generation(&problem, opts)?,
    };
    let alphas_g: Vec<f64> = (0..problem.len())
        .map(|g| problem.inner_max(g, &q).0)
        .collect();
    let mut xs = Vec::with_capacity(instance.horizon());
    let mut value = 0.0;
    let mut dual_alphas = Vec::with_capacity(instance.horizon());
    for &g in &problem.groups.group_of {
        let x = x_groups[g].clone();
        value += problem
            .mu(g)
            .iter()
            .zip(&x)
            .map(|(a, b)| a * b)
            .sum::<f64>();
        xs.push(x);
        dual_alphas.push(alphas_g[g]);
    }
    let sol = DynamicLpSolution {
        xs,
        value,
        dual_q: q,
        dual_alphas,
        status: LpStatus::Optimal,
    };
    let gap = sol.dual_objective(instance.budgets()) - sol.value;
    let t = instance.horizon() as f64;
    if gap.abs() > opts.gap_tol * t.max(1.0) {
        return Err(Error::NumericFailure(format!(
            "dynamic LP duality gap {gap:.3e} exceeds {:.3e}",
            opts.gap_tol * t
        )));
    }
    Ok(sol)
}

/// Reference solve of the full `T*m`-variable LP on a dense tableau.
pub fn solve_dynamic_lp_dense(instance: &BwkInstance) -> Result<DynamicLpSolution> {
    let t = instance.horizon();
    let m = instance.num_arms();
    let d = instance.num_resources();
    let n = t * m;
    if n > 5_000 {
        return Err(Error::TooLarge {
            what: "dense dynamic LP variables",
            size: n,
            cap: 5_000,
        });
    }
    let mut objective = Vec::with_capacity(n);
    for round in 0..t {
        objective.extend_from_slice(instance.mu(round));
    }
    let mut lp = LinearProgram::maximize(objective);
    for j in 0..d {
        let mut row = vec![0.0; n];
        for round in 0..t {
            for i in 0..m {
                row[round * m + i] = instance.c(round, j, i);
            }
        }
        lp.add_row(row, Relation::Le, instance.budgets()[j]);
    }
    for round in 0..t {
        let mut row = vec![0.0; n];
        row[round * m..(round + 1) * m].fill(1.0);
        lp.add_row(row, Relation::Eq, 1.0);
    }
    let sol = lp.solve()?;
    let xs = (0..t)
        .map(|round| sol.x[round * m..(round + 1) * m].to_vec())
        .collect();
    Ok(DynamicLpSolution {
        xs,
        value: sol.objective,
        dual_q: sol.duals[..d].iter().map(|q| q.max(0.0)).collect(),
        dual_alphas: sol.duals[d..].to_vec(),
        status: LpStatus::Optimal,
    })
}

struct Grouped<'a> {
    inst: &'a BwkInstance,
    groups: RoundGroups,
    m: usize,
    d: usize,
}

impl<'a> Grouped<'a> {
    fn new(inst: &'a BwkInstance) -> Self {
        Self {
            groups: inst.round_groups(),
            m: inst.num_arms(),
            d: inst.num_resources(),
            inst,
        }
    }

    fn len(&self) -> usize {
        self.groups.len()
    }

    fn count(&self, g: usize) -> f64 {
        self.groups.counts[g] as f64
    }

    fn mu(&self, g: usize) -> &[f64] {
        self.inst.mu(self.groups.representative[g])
    }

    fn c(&self, g: usize, j: usize, i: usize) -> f64 {
        self.inst.c(self.groups.representative[g], j, i)
    }

    fn price(&self, g: usize, i: usize, q: &[f64]) -> f64 {
        (0..self.d).map(|j| q[j] * self.c(g, j, i)).sum()
    }

    /// `max(0, max_i mu_i - q'C_i)` and the maximizing arm (lowest index on ties,
    /// null arm when nothing is strictly profitable).
    fn inner_max(&self, g: usize, q: &[f64]) -> (f64, usize) {
        let null = self.m - 1;
        let mut best = (0.0, null);
        for i in 0..self.m {
            let v = self.mu(g)[i] - self.price(g, i, q);
            if v > best.0 {
                best = (v, i);
            }
        }
        best
    }

    fn dual_value(&self, q: &[f64]) -> f64 {
        let mut v: f64 = self.inst.budgets().iter().zip(q).map(|(b, q)| b * q).sum();
        for g in 0..self.len() {
            v += self.count(g) * self.inner_max(g, q).0;
        }
        v
    }
}

fn unit(m: usize, i: usize) -> Vec<f64> {
    let mut x = vec![0.0; m];
    x[i] = 1.0;
    x
}

/// Exact minimization of the one-dimensional dual over its breakpoints.
fn breakpoint(p: &Grouped) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if p.d != 1 {
        return Err(invalid("breakpoint search needs exactly one resource"));
    }
    let budget = p.inst.budgets()[0];
    let mut candidates = vec![0.0];
    for g in 0..p.len() {
        let mu = p.mu(g);
        for a in 0..p.m {
            for b in (a + 1)..p.m {
                let (ca, cb) = (p.c(g, 0, a), p.c(g, 0, b));
                if ca != cb {
                    let q = (mu[a] - mu[b]) / (ca - cb);
                    if q > 0.0 && q.is_finite() {
                        candidates.push(q);
                    }
                }
            }
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    // Active arms at q: the ones within tolerance of the inner maximum.
    let active_extremes = |g: usize, q: f64| -> (usize, usize) {
        let phi = p.inner_max(g, &[q]).0;
        let tol = 1e-12 * (1.0 + q);
        let mut lo: Option<usize> = None;
        let mut hi: Option<usize> = None;
        for i in 0..p.m {
            let v = p.mu(g)[i] - q * p.c(g, 0, i);
            if v >= phi - tol {
                let c = p.c(g, 0, i);
                if lo.is_none_or(|k| c < p.c(g, 0, k)) {
                    lo = Some(i);
                }
                if hi.is_none_or(|k| c > p.c(g, 0, k)) {
                    hi = Some(i);
                }
            }
        }
        (lo.unwrap_or(p.m - 1), hi.unwrap_or(p.m - 1))
    };
    let right_slope = |q: f64| -> f64 {
        let used: f64 = (0..p.len())
            .map(|g| p.count(g) * p.c(g, 0, active_extremes(g, q).0))
            .sum();
        budget - used
    };
    let slope_tol = 1e-9 * (1.0 + budget);
    // Convexity makes the right derivative nondecreasing in q.
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    if right_slope(candidates[hi]) < -slope_tol {
        return Err(Error::NumericFailure(
            "dual slope negative at the last breakpoint".into(),
        ));
    }
    while lo < hi {
        let mid = (lo + hi) / 2;
        if right_slope(candidates[mid]) >= -slope_tol {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let q = candidates[lo];

    // Mix the low- and high-consumption active arms so the budget is met exactly
    // when the price is positive.
    let picks: Vec<(usize, usize)> = (0..p.len()).map(|g| active_extremes(g, q)).collect();
    let low: f64 = picks
        .iter()
        .enumerate()
        .map(|(g, &(a, _))| p.count(g) * p.c(g, 0, a))
        .sum();
    let high: f64 = picks
        .iter()
        .enumerate()
        .map(|(g, &(_, b))| p.count(g) * p.c(g, 0, b))
        .sum();
    let theta = if q > 0.0 && high > low {
        ((budget - low) / (high - low)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let xs = picks
        .iter()
        .map(|&(a, b)| {
            let mut x = vec![0.0; p.m];
            x[a] += 1.0 - theta;
            x[b] += theta;
            x
        })
        .collect();
    Ok((xs, vec![q]))
}

struct Column {
    arms: Vec<usize>,
    value: f64,
    usage: Vec<f64>,
}

impl Column {
    fn new(p: &Grouped, arms: Vec<usize>) -> Self {
        let mut value = 0.0;
        let mut usage = vec![0.0; p.d];
        for (g, &i) in arms.iter().enumerate() {
            value += p.count(g) * p.mu(g)[i];
            for (j, u) in usage.iter_mut().enumerate() {
                *u += p.count(g) * p.c(g, j, i);
            }
        }
        Self { arms, value, usage }
    }
}

fn column_generation(p: &Grouped, opts: &LpOptions) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let t = p.inst.horizon() as f64;
    let tol = 1e-10 * t.max(1.0);
    let mut columns = vec![Column::new(p, vec![p.m - 1; p.len()])];
    let greedy: Vec<usize> = (0..p.len())
        .map(|g| p.inner_max(g, &vec![0.0; p.d]).1)
        .collect();
    columns.push(Column::new(p, greedy));

    for _ in 0..opts.max_column_generation {
        let mut master = LinearProgram::maximize(columns.iter().map(|c| c.value).collect());
        for j in 0..p.d {
            master.add_row(
                columns.iter().map(|c| c.usage[j]).collect(),
                Relation::Le,
                p.inst.budgets()[j],
            );
        }
        master.add_row(vec![1.0; columns.len()], Relation::Eq, 1.0);
        let sol = master.solve_with(&opts.simplex)?;
        let q: Vec<f64> = sol.duals[..p.d].iter().map(|v| v.max(0.0)).collect();
        let pi = sol.duals[p.d];

        let arms: Vec<usize> = (0..p.len()).map(|g| p.inner_max(g, &q).1).collect();
        let reduced: f64 = (0..p.len())
            .map(|g| p.count(g) * p.inner_max(g, &q).0)
            .sum::<f64>()
            - pi;
        if reduced <= tol || columns.iter().any(|c| c.arms == arms) {
            let gap = p.dual_value(&q) - sol.objective;
            if gap > opts.gap_tol * t.max(1.0) {
                return Err(Error::NumericFailure(format!(
                    "column generation stalled with duality gap {gap:.3e}"
                )));
            }
            let mut xs = vec![vec![0.0; p.m]; p.len()];
            for (lambda, col) in sol.x.iter().zip(&columns) {
                if *lambda > 0.0 {
                    for (g, &i) in col.arms.iter().enumerate() {
                        xs[g][i] += lambda;
                    }
                }
            }
            for x in &mut xs {
                let s: f64 = x.iter().sum();
                if s > 0.0 {
                    x.iter_mut().for_each(|v| *v /= s);
                } else {
                    *x = unit(p.m, p.m - 1);
                }
            }
            return Ok((xs, q));
        }
        columns.push(Column::new(p, arms));
    }
    Err(Error::NumericFailure(format!(
        "column generation did not converge in {} iterations",
        opts.max_column_generation
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::OutcomeModel;
    use crate::lp::solve_single_step_lp;

    fn two_phase(t: usize) -> BwkInstance {
        let half = t / 2;
        let mut mus = Vec::new();
        let mut cs = Vec::new();
        for round in 0..t {
            mus.push(vec![0.5, 0.5]);
            if round < half {
                cs.push(vec![vec![0.5, 1.0]]);
            } else {
                cs.push(vec![vec![1.0, 0.5]]);
            }
        }
        BwkInstance::from_rounds(
            vec![t as f64 / 2.0],
            &mus,
            &cs,
            OutcomeModel::Deterministic,
            "",
        )
        .unwrap()
    }

    #[test]
    fn breakpoint_and_column_generation_agree_with_dense() {
        let inst = two_phase(20);
        let dense = solve_dynamic_lp_dense(&inst).unwrap();
        let opts = LpOptions::default();
        let bp = solve_dynamic_lp_with(&inst, DynamicMethod::Breakpoint, &opts).unwrap();
        let cg = solve_dynamic_lp_with(&inst, DynamicMethod::ColumnGeneration, &opts).unwrap();
        assert!((dense.value - 10.0).abs() < 1e-9);
        assert!((bp.value - 10.0).abs() < 1e-9);
        assert!((cg.value - 10.0).abs() < 1e-9);
    }

    #[test]
    fn stationary_value_is_horizon_times_single_step() {
        let mus = vec![vec![0.9, 0.3]; 12];
        let cs = vec![vec![vec![0.8, 0.1], vec![0.2, 0.7]]; 12];
        let inst =
            BwkInstance::from_rounds(vec![3.0, 4.0], &mus, &cs, OutcomeModel::Deterministic, "")
                .unwrap();
        let single =
            solve_single_step_lp(inst.mu(0), inst.c_matrix(0), &inst.per_round_budget()).unwrap();
        let dynamic = solve_dynamic_lp(&inst).unwrap();
        assert!((dynamic.value - 12.0 * single.value).abs() < 1e-9);
    }

    #[test]
    fn primal_solution_is_feasible() {
        let inst = two_phase(40);
        let sol = solve_dynamic_lp(&inst).unwrap();
        let used: f64 = sol
            .xs
            .iter()
            .enumerate()
            .map(|(t, x)| (0..3).map(|i| inst.c(t, 0, i) * x[i]).sum::<f64>())
            .sum();
        assert!(used <= inst.budgets()[0] + 1e-9);
        for x in &sol.xs {
            assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
