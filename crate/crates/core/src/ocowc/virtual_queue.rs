use serde::{Deserialize, Serialize};

use super::{oco_benchmarks, OcoInstance};
use crate::error::{invalid, Result};

/// Step parameters: `x_t = proj(x_{t-1} - (beta grad f + sum_i Q_i grad g_i) / (2 alpha))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VqParams {
    pub beta: f64,
    pub alpha: f64,
}

impl VqParams {
    /// `beta = 1 / sqrt(T)`, `alpha = 1 / T`.
    pub fn literal(horizon: usize) -> Self {
        let t = horizon as f64;
        Self {
            beta: 1.0 / t.sqrt(),
            alpha: 1.0 / t,
        }
    }

    /// `beta = sqrt(T)`, `alpha = T`.
    pub fn regularized(horizon: usize) -> Self {
        let t = horizon as f64;
        Self {
            beta: t.sqrt(),
            alpha: t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcoRunLog {
    /// Decisions `x_1 .. x_T`, `T x n` row-major.
    pub xs: Vec<f64>,
    /// Queue lengths `Q(1) .. Q(T)`, `T x d` row-major.
    pub queues: Vec<f64>,
    /// `sum_t f_t(x_t)`.
    pub cost: f64,
    /// `sum_t g_{t,i}(x_t)` on the revealed constraints.
    pub constraint_totals: Vec<f64>,
    /// `cost - opt`.
    pub reg1: f64,
    /// `cost - opt_restricted`.
    pub reg1_restricted: f64,
    /// `sum_i max(0, constraint_totals_i)`.
    pub reg2: f64,
    pub opt: f64,
    pub opt_restricted: f64,
}

/// Runs the virtual-queue method from `x0`.
///
/// `x_1 = x_0`; `Q(1) = Q(2) = 0` and for `t >= 3`
/// `Q(t) = max(0, Q(t-1) + g_{t-2}(x_{t-2}) + grad g_{t-2}'(x_{t-1} - x_{t-2}))`.
pub fn run_virtual_queue(
    instance: &OcoInstance,
    x0: &[f64],
    params: VqParams,
) -> Result<OcoRunLog> {
    let n = instance.dim();
    let d = instance.num_constraints();
    let horizon = instance.horizon();
    if x0.len() != n {
        return Err(invalid("x0 has the wrong dimension"));
    }
    if !(params.beta.is_finite()
        && params.alpha.is_finite()
        && params.alpha > 0.0
        && params.beta >= 0.0)
    {
        return Err(invalid("need alpha > 0 and beta >= 0"));
    }
    let bench = oco_benchmarks(instance)?;
    let mut x = x0.to_vec();
    instance.domain().project(&mut x);
    let mut xs = Vec::with_capacity(horizon * n);
    let mut queues = Vec::with_capacity(horizon * d);
    let mut q = vec![0.0; d];
    let mut grad = vec![0.0; n];
    let mut step = vec![0.0; n];
    for t in 0..horizon {
        if t >= 1 {
            if t >= 2 {
                let (prev, last) = (&xs[(t - 2) * n..(t - 1) * n], &xs[(t - 1) * n..t * n]);
                for (i, qi) in q.iter_mut().enumerate() {
                    let g = instance.realized_constraint(t - 2, i);
                    let lin = g.eval(prev)
                        + g.a
                            .iter()
                            .zip(last.iter().zip(prev))
                            .map(|(a, (u, v))| a * (u - v))
                            .sum::<f64>();
                    *qi = (*qi + lin).max(0.0);
                }
            }
            let last = &xs[(t - 1) * n..t * n];
            instance.cost(t - 1).gradient(last, &mut grad);
            for k in 0..n {
                step[k] = params.beta * grad[k];
            }
            for (i, qi) in q.iter().enumerate() {
                let g = instance.realized_constraint(t - 1, i);
                for k in 0..n {
                    step[k] += qi * g.a[k];
                }
            }
            for k in 0..n {
                x[k] = last[k] - step[k] / (2.0 * params.alpha);
            }
            instance.domain().project(&mut x);
        }
        xs.extend_from_slice(&x);
        queues.extend_from_slice(&q);
    }
    let mut cost = 0.0;
    let mut totals = vec![0.0; d];
    for t in 0..horizon {
        let xt = &xs[t * n..(t + 1) * n];
        cost += instance.cost(t).eval(xt);
        for (i, tot) in totals.iter_mut().enumerate() {
            *tot += instance.realized_constraint(t, i).eval(xt);
        }
    }
    let reg2 = totals.iter().map(|v| v.max(0.0)).sum();
    Ok(OcoRunLog {
        xs,
        queues,
        cost,
        constraint_totals: totals,
        reg1: cost - bench.opt.value,
        reg1_restricted: cost - bench.opt_restricted.value,
        reg2,
        opt: bench.opt.value,
        opt_restricted: bench.opt_restricted.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ocowc::{build_oco_lower_bound, Affine, CostFn, Domain};

    #[test]
    fn first_steps_follow_the_recursion() {
        let inst = build_oco_lower_bound(8, 1.0, 0.5, 0.25).unwrap();
        let p = VqParams {
            beta: 1.0,
            alpha: 4.0,
        };
        let log = run_virtual_queue(&inst, &[0.0], p).unwrap();
        assert_eq!(log.xs[0], 0.0);
        assert_eq!(&log.queues[..2], &[0.0, 0.0]);
        // x_2 = x_1 + 1 / 8.
        assert!((log.xs[1] - 0.125).abs() < 1e-15);
        // Q(3) = g_1(x_1) + slope (x_2 - x_1) = -0.25 + 0.75 * 0.125 < 0.
        assert_eq!(log.queues[2], 0.0);
        assert!((log.xs[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn queue_is_nonnegative_and_iterates_feasible() {
        let inst = build_oco_lower_bound(2000, 1.0, 0.1, 0.05).unwrap();
        let log = run_virtual_queue(&inst, &[0.5], VqParams::regularized(2000)).unwrap();
        assert!(log.queues.iter().all(|q| *q >= 0.0));
        assert!(log.xs.iter().all(|x| (0.0..=1.0).contains(x)));
        assert!(log.reg2 >= 0.0);
    }

    #[test]
    fn unconstrained_descent_reaches_minimizer() {
        let t = 500;
        let costs = vec![
            CostFn::Quadratic {
                p: vec![1.0],
                a: vec![-1.0],
                c: 0.0
            };
            t
        ];
        let cons = vec![vec![Affine::new(vec![0.0], -1.0)]; t];
        let inst = OcoInstance::new(
            Domain::Box {
                lower: vec![-2.0],
                upper: vec![2.0],
            },
            costs,
            cons,
            None,
            "",
        )
        .unwrap();
        let log = run_virtual_queue(
            &inst,
            &[-2.0],
            VqParams {
                beta: 1.0,
                alpha: 1.0,
            },
        )
        .unwrap();
        assert!((log.xs[t - 1] - 0.5).abs() < 1e-9);
        assert_eq!(log.reg2, 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let inst = build_oco_lower_bound(4, 1.0, 0.5, 0.25).unwrap();
        assert!(run_virtual_queue(&inst, &[0.0, 0.0], VqParams::literal(4)).is_err());
        assert!(run_virtual_queue(
            &inst,
            &[0.0],
            VqParams {
                beta: 1.0,
                alpha: 0.0
            }
        )
        .is_err());
    }
}
