//! Fluid LP benchmarks with dual prices.
//!
//! The single-step LP is
//!
//! ```text
//! LP(mu, C) = max mu'x  s.t.  C x <= b,  x in simplex
//! ```
//!
//! and its dual `min b'q + alpha  s.t.  mu - C'q - alpha*1 <= 0, q >= 0`.
//! The dynamic LP couples `T` such problems through the total budget `B`.

mod dynamic;
mod sandwich;
pub mod simplex;

use serde::{Deserialize, Serialize};

pub use dynamic::{solve_dynamic_lp, solve_dynamic_lp_dense, solve_dynamic_lp_with, DynamicMethod};
pub use sandwich::{check_lp_sandwich, check_lp_sandwich_with, SandwichReport, SandwichViolation};
pub use simplex::{LinearProgram, Relation, SimplexOptions, SimplexSolution};

use crate::error::{invalid, Error, Result};
use crate::instance::BwkInstance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    InfeasibleGuard,
    NumericFailure,
}

/// Optimal solution of a single-step (or static) LP and its dual prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub dual_q: Vec<f64>,
    pub dual_alpha: f64,
    pub status: LpStatus,
}

/// Optimal solution of the dynamic LP over the whole horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicLpSolution {
    /// One arm distribution per round.
    pub xs: Vec<Vec<f64>>,
    pub value: f64,
    pub dual_q: Vec<f64>,
    pub dual_alphas: Vec<f64>,
    pub status: LpStatus,
}

#[derive(Debug, Clone)]
pub struct LpOptions {
    /// Absolute tolerance for feasibility checks.
    pub feasibility_tol: f64,
    /// Relative duality-gap tolerance (times the horizon) for the dynamic LP.
    pub gap_tol: f64,
    /// Column-generation iteration cap for the dynamic LP.
    pub max_column_generation: usize,
    pub simplex: SimplexOptions,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            gap_tol: 1e-6,
            max_column_generation: 20_000,
            simplex: SimplexOptions::default(),
        }
    }
}

impl DynamicLpSolution {
    /// `B'q + sum(alpha)`, the dual objective at the returned prices.
    pub fn dual_objective(&self, budgets: &[f64]) -> f64 {
        budgets
            .iter()
            .zip(&self.dual_q)
            .map(|(b, q)| b * q)
            .sum::<f64>()
            + self.dual_alphas.iter().sum::<f64>()
    }
}

/// Solves `max mu'x s.t. C x <= b, x in simplex`.
///
/// `c` is `d x m` row-major. The caller provides the null arm (zero reward,
/// zero consumption) so that the program is feasible for any `b >= 0`.
pub fn solve_single_step_lp(mu: &[f64], c: &[f64], b: &[f64]) -> Result<LpSolution> {
    solve_single_step_lp_with(mu, c, b, &LpOptions::default())
}

pub fn solve_single_step_lp_with(
    mu: &[f64],
    c: &[f64],
    b: &[f64],
    opts: &LpOptions,
) -> Result<LpSolution> {
    let m = mu.len();
    let d = b.len();
    if m == 0 {
        return Err(invalid("single-step LP needs at least one arm"));
    }
    if c.len() != d * m {
        return Err(invalid(format!("consumption matrix must be {d}x{m}")));
    }
    if mu.iter().chain(c).chain(b).any(|v| !v.is_finite()) {
        return Err(invalid("non-finite LP input"));
    }
    let mut lp = LinearProgram::maximize(mu.to_vec());
    for j in 0..d {
        lp.add_row(c[j * m..(j + 1) * m].to_vec(), Relation::Le, b[j]);
    }
    lp.add_row(vec![1.0; m], Relation::Eq, 1.0);
    let sol = match lp.solve_with(&opts.simplex) {
        Ok(s) => s,
        Err(Error::Infeasible) => {
            return Ok(LpSolution {
                x: vec![0.0; m],
                value: 0.0,
                dual_q: vec![0.0; d],
                dual_alpha: 0.0,
                status: LpStatus::InfeasibleGuard,
            })
        }
        Err(e) => return Err(e),
    };
    let mut x = sol.x;
    let total: f64 = x.iter().sum();
    if total > 0.0 {
        x.iter_mut().for_each(|v| *v /= total);
    }
    Ok(LpSolution {
        x,
        value: sol.objective,
        dual_q: sol.duals[..d].iter().map(|q| q.max(0.0)).collect(),
        dual_alpha: sol.duals[d],
        status: LpStatus::Optimal,
    })
}

/// The static-distribution benchmark `T * LP(mu_bar, C_bar)`.
///
/// The returned `dual_q` are the per-unit prices of the averaged problem and
/// `dual_alpha` is scaled by `T`, so `value == B'q + alpha` still holds.
pub fn solve_static_lp(instance: &BwkInstance) -> Result<LpSolution> {
    let (mu_bar, c_bar) = instance.averages();
    let b = instance.per_round_budget();
    let mut sol = solve_single_step_lp(&mu_bar, &c_bar, &b)?;
    let t = instance.horizon() as f64;
    sol.value *= t;
    sol.dual_alpha *= t;
    Ok(sol)
}

/// Single-step LP of one round of an instance.
pub fn solve_round_lp(instance: &BwkInstance, round: usize) -> Result<LpSolution> {
    instance.check_round(round)?;
    solve_single_step_lp(
        instance.mu(round),
        instance.c_matrix(round),
        &instance.per_round_budget(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_certificate(mu: &[f64], c: &[f64], b: &[f64], s: &LpSolution) {
        let m = mu.len();
        let total: f64 = s.x.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        for (j, bj) in b.iter().enumerate() {
            let used: f64 = (0..m).map(|i| c[j * m + i] * s.x[i]).sum();
            assert!(used <= bj + 1e-9);
            if s.dual_q[j] > 1e-9 {
                assert!(used >= bj - 1e-9, "complementary slackness on resource {j}");
            }
        }
        let primal: f64 = mu.iter().zip(&s.x).map(|(a, b)| a * b).sum();
        assert!((primal - s.value).abs() < 1e-9 * m as f64);
        let dual: f64 = b.iter().zip(&s.dual_q).map(|(a, b)| a * b).sum::<f64>() + s.dual_alpha;
        assert!((dual - s.value).abs() < 1e-9);
        assert!(s.dual_alpha >= -1e-12);
        assert!(s.dual_q.iter().all(|q| *q >= 0.0));
    }

    #[test]
    fn example_one_first_half_plays_first_arm() {
        let mu = [0.5, 0.5, 0.0];
        let c = [0.5, 1.0, 0.0];
        let s = solve_single_step_lp(&mu, &c, &[0.5]).unwrap();
        assert!((s.value - 0.5).abs() < 1e-12);
        assert!((s.x[0] - 1.0).abs() < 1e-12);
        check_certificate(&mu, &c, &[0.5], &s);
    }

    #[test]
    fn zero_reward_has_zero_value() {
        let mu = [0.0, 0.0, 0.0];
        let c = [0.3, 0.9, 0.0, 0.2, 0.1, 0.0];
        let s = solve_single_step_lp(&mu, &c, &[0.4, 0.2]).unwrap();
        assert_eq!(s.value, 0.0);
        check_certificate(&mu, &c, &[0.4, 0.2], &s);
    }

    // Oracle: exhaustive search over the simplex grid with step 1/400.
    fn grid_oracle(mu: &[f64; 3], c: &[f64; 3], b: f64) -> f64 {
        let n = 400;
        let mut best = f64::NEG_INFINITY;
        for a in 0..=n {
            for k in 0..=(n - a) {
                let x = [
                    a as f64 / n as f64,
                    k as f64 / n as f64,
                    (n - a - k) as f64 / n as f64,
                ];
                let used: f64 = c.iter().zip(&x).map(|(p, q)| p * q).sum();
                if used <= b + 1e-12 {
                    best = best.max(mu.iter().zip(&x).map(|(p, q)| p * q).sum());
                }
            }
        }
        best
    }

    #[test]
    fn mixed_solution_matches_grid_oracle() {
        let mu = [1.0, 0.6, 0.0];
        let c = [1.0, 0.2, 0.0];
        let oracle = grid_oracle(&mu, &c, 0.4);
        assert!((oracle - 0.7).abs() < 1e-12);
        let s = solve_single_step_lp(&mu, &c, &[0.4]).unwrap();
        assert!((s.value - 0.7).abs() < 1e-12);
        assert!((s.x[0] - 0.25).abs() < 1e-12 && (s.x[1] - 0.75).abs() < 1e-12);
        check_certificate(&mu, &c, &[0.4], &s);
    }

    #[test]
    fn zero_budget_falls_back_to_null_arm() {
        let mu = [0.9, 0.4, 0.0];
        let c = [0.5, 0.1, 0.0];
        let s = solve_single_step_lp(&mu, &c, &[0.0]).unwrap();
        assert_eq!(s.value, 0.0);
        assert!((s.x[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(solve_single_step_lp(&[0.5, 0.0], &[0.1], &[0.5]).is_err());
        assert!(solve_single_step_lp(&[], &[], &[0.5]).is_err());
    }
}
