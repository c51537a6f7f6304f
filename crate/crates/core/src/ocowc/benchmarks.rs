use serde::{Deserialize, Serialize};

use super::{dot, Affine, CostFn, Domain, OcoInstance};
use crate::error::{invalid, Error, Result};
use crate::lp::{LinearProgram, Relation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOptions {
    /// Grid points per axis for non-affine or ball instances; `None` uses
    /// 1001 for `n <= 2` and 201 for `n = 3`.
    pub grid_per_axis: Option<usize>,
    /// Cap on grid points times restricted constraint groups.
    pub max_grid_work: usize,
    /// Cap on simplex tableau cells.
    pub max_tableau_cells: usize,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            grid_per_axis: None,
            max_grid_work: 200_000_000,
            max_tableau_cells: 4_000_000,
        }
    }
}

/// A fixed-action comparator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparator {
    /// `sum_t f_t(x)` at the minimizer.
    pub value: f64,
    pub x: Vec<f64>,
    /// Optimal multipliers when solved exactly: one per constraint for the
    /// aggregate program, `T x d` per-round multipliers for the restricted one.
    pub duals: Option<Vec<f64>>,
    /// Largest uniform slack `s` with all constraints `<= -s` on the domain.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcoBenchmarks {
    /// `min sum_t f_t(x)` s.t. `sum_t g_{t,i}(x) <= 0`.
    pub opt: Comparator,
    /// `min sum_t f_t(x)` s.t. `g_{t,i}(x) <= 0` for every round.
    pub opt_restricted: Comparator,
    /// Per-round decisions with the aggregate constraints (affine box instances only).
    pub per_round_opt: Option<f64>,
    /// Per-round decisions with every round's constraints.
    pub per_round_opt_restricted: Option<f64>,
    /// `max(|q*|_inf, |q*'|_inf)` when both programs were solved exactly.
    pub qbar: Option<f64>,
    pub exact: bool,
}

pub fn oco_benchmarks(instance: &OcoInstance) -> Result<OcoBenchmarks> {
    oco_benchmarks_with(instance, &BenchmarkOptions::default())
}

pub fn oco_benchmarks_with(
    instance: &OcoInstance,
    opts: &BenchmarkOptions,
) -> Result<OcoBenchmarks> {
    let exact = instance.is_affine() && matches!(instance.domain(), Domain::Box { .. });
    if exact {
        let opt = static_lp(instance, false, opts)?;
        let opt_restricted = static_lp(instance, true, opts)?;
        let qbar = opt
            .duals
            .iter()
            .chain(opt_restricted.duals.iter())
            .flatten()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        let per_round_opt = per_round_aggregate(instance, opts).ok();
        let per_round_opt_restricted = per_round_restricted(instance).ok();
        Ok(OcoBenchmarks {
            opt,
            opt_restricted,
            per_round_opt,
            per_round_opt_restricted,
            qbar: Some(qbar),
            exact,
        })
    } else {
        let (opt, opt_restricted) = grid_benchmarks(instance, opts)?;
        Ok(OcoBenchmarks {
            opt,
            opt_restricted,
            per_round_opt: None,
            per_round_opt_restricted: None,
            qbar: None,
            exact,
        })
    }
}

fn box_bounds(instance: &OcoInstance) -> (&[f64], &[f64]) {
    match instance.domain() {
        Domain::Box { lower, upper } => (lower, upper),
        Domain::Ball { .. } => unreachable!("box domain expected"),
    }
}

/// `g(x)` with `x = l + y` as `(a, c + a'l)`.
fn shifted(g: &Affine, lower: &[f64]) -> (Vec<f64>, f64) {
    (g.a.clone(), g.c + dot(&g.a, lower))
}

fn mean_cost(instance: &OcoInstance) -> Affine {
    let n = instance.dim();
    let mut a = vec![0.0; n];
    let mut c = 0.0;
    for (t, k) in instance.round_groups() {
        if let CostFn::Affine(f) = instance.cost(t) {
            for (acc, v) in a.iter_mut().zip(&f.a) {
                *acc += k as f64 * v;
            }
            c += k as f64 * f.c;
        }
    }
    let tf = instance.horizon() as f64;
    Affine {
        a: a.iter().map(|v| v / tf).collect(),
        c: c / tf,
    }
}

/// Constraint rows `(i, representative round, count)` of the restricted program.
fn restricted_rows(instance: &OcoInstance) -> Vec<(usize, usize, usize)> {
    (0..instance.num_constraints())
        .flat_map(|i| {
            instance
                .constraint_groups(i)
                .into_iter()
                .map(move |(t, k)| (i, t, k))
        })
        .collect()
}

fn check_cells(rows: usize, cols: usize, opts: &BenchmarkOptions) -> Result<()> {
    let cells = (rows + 1) * (cols + 2 * rows + 1);
    if cells > opts.max_tableau_cells {
        return Err(Error::TooLarge {
            what: "benchmark tableau",
            size: cells,
            cap: opts.max_tableau_cells,
        });
    }
    Ok(())
}

/// Static program on a box with affine costs, time-averaged for conditioning.
fn static_lp(
    instance: &OcoInstance,
    restricted: bool,
    opts: &BenchmarkOptions,
) -> Result<Comparator> {
    let (lower, upper) = box_bounds(instance);
    let n = instance.dim();
    let d = instance.num_constraints();
    let tf = instance.horizon() as f64;
    let f = mean_cost(instance);
    let rows: Vec<(Vec<f64>, f64, usize, usize, usize)> = if restricted {
        restricted_rows(instance)
            .into_iter()
            .map(|(i, t, k)| {
                let (a, c) = shifted(instance.constraint(t, i), lower);
                (a, c, i, t, k)
            })
            .collect()
    } else {
        (0..d)
            .map(|i| {
                let (a, c) = shifted(&instance.mean_constraint(i), lower);
                (a, c, i, 0, 0)
            })
            .collect()
    };
    check_cells(rows.len() + n, n, opts)?;
    let mut lp = LinearProgram::maximize(f.a.iter().map(|v| -v).collect());
    for k in 0..n {
        let mut row = vec![0.0; n];
        row[k] = 1.0;
        lp.add_row(row, Relation::Le, upper[k] - lower[k]);
    }
    for (a, c, ..) in &rows {
        lp.add_row(a.clone(), Relation::Le, -c);
    }
    let sol = lp.solve()?;
    let x: Vec<f64> = sol.x.iter().zip(lower).map(|(y, l)| y + l).collect();
    let value = tf * f.eval(&x);
    let duals = if restricted {
        let mut per_round = vec![0.0; instance.horizon() * d];
        for (r, (_, _, i, t0, k)) in rows.iter().enumerate() {
            let share = tf * sol.duals[n + r] / *k as f64;
            let key = instance.constraint(*t0, *i);
            for t in 0..instance.horizon() {
                if instance.constraint(t, *i) == key {
                    per_round[t * d + i] = share;
                }
            }
        }
        per_round
    } else {
        sol.duals[n..].to_vec()
    };
    let slack = box_slack(instance, restricted, opts)?;
    Ok(Comparator {
        value,
        x,
        duals: Some(duals),
        slack,
    })
}

/// `max s` s.t. every constraint `+ s <= 0` on the box, with `s <= 1`.
fn box_slack_on(
    instance: &OcoInstance,
    lower: &[f64],
    upper: &[f64],
    restricted: bool,
    opts: &BenchmarkOptions,
) -> Result<f64> {
    let n = instance.dim();
    let gs: Vec<Affine> = if restricted {
        restricted_rows(instance)
            .into_iter()
            .map(|(i, t, _)| instance.constraint(t, i).clone())
            .collect()
    } else {
        (0..instance.num_constraints())
            .map(|i| instance.mean_constraint(i))
            .collect()
    };
    check_cells(gs.len() + n + 1, n + 2, opts)?;
    // Variables: y (n), s_plus, s_minus.
    let mut obj = vec![0.0; n + 2];
    obj[n] = 1.0;
    obj[n + 1] = -1.0;
    let mut lp = LinearProgram::maximize(obj);
    for k in 0..n {
        let mut row = vec![0.0; n + 2];
        row[k] = 1.0;
        lp.add_row(row, Relation::Le, upper[k] - lower[k]);
    }
    let mut cap = vec![0.0; n + 2];
    cap[n] = 1.0;
    lp.add_row(cap, Relation::Le, 1.0);
    for g in &gs {
        let (a, c) = shifted(g, lower);
        let mut row = a;
        row.push(1.0);
        row.push(-1.0);
        lp.add_row(row, Relation::Le, -c);
    }
    Ok(lp.solve()?.objective)
}

fn box_slack(instance: &OcoInstance, restricted: bool, opts: &BenchmarkOptions) -> Result<f64> {
    let (lower, upper) = box_bounds(instance);
    box_slack_on(instance, lower, upper, restricted, opts)
}

/// Slack of the aggregate and restricted programs.
///
/// Exact on boxes. On a ball the inscribed cube gives a lower bound, refined
/// on a grid when that bound is negative and `n <= 3`.
pub(crate) fn slater_slack(instance: &OcoInstance) -> Result<(f64, f64)> {
    let opts = BenchmarkOptions::default();
    match instance.domain() {
        Domain::Box { lower, upper } => Ok((
            box_slack_on(instance, lower, upper, false, &opts)?,
            box_slack_on(instance, lower, upper, true, &opts)?,
        )),
        Domain::Ball { center, radius } => {
            let n = instance.dim();
            let half = radius / (n as f64).sqrt();
            let lower: Vec<f64> = center.iter().map(|c| c - half).collect();
            let upper: Vec<f64> = center.iter().map(|c| c + half).collect();
            let mut out = [0.0; 2];
            for (k, restricted) in [false, true].into_iter().enumerate() {
                let s = box_slack_on(instance, &lower, &upper, restricted, &opts)?;
                out[k] = if s >= 0.0 || n > 3 {
                    s
                } else {
                    let per_axis = if n <= 2 { 201 } else { 41 };
                    let gs = constraint_set(instance, restricted);
                    let mut best = f64::NEG_INFINITY;
                    for_each_grid_point(instance.domain(), per_axis, |x| {
                        let worst = gs
                            .iter()
                            .map(|g| g.eval(x))
                            .fold(f64::NEG_INFINITY, f64::max);
                        best = best.max(-worst);
                    });
                    best.max(s)
                };
            }
            Ok((out[0], out[1]))
        }
    }
}

fn constraint_set(instance: &OcoInstance, restricted: bool) -> Vec<Affine> {
    if restricted {
        restricted_rows(instance)
            .into_iter()
            .map(|(i, t, _)| instance.constraint(t, i).clone())
            .collect()
    } else {
        (0..instance.num_constraints())
            .map(|i| instance.mean_constraint(i))
            .collect()
    }
}

/// Calls `visit` on every point of a regular grid over the domain's bounding box
/// that lies in the domain.
fn for_each_grid_point(domain: &Domain, per_axis: usize, mut visit: impl FnMut(&[f64])) {
    let (lo, hi): (Vec<f64>, Vec<f64>) = match domain {
        Domain::Box { lower, upper } => (lower.clone(), upper.clone()),
        Domain::Ball { center, radius } => (
            center.iter().map(|c| c - radius).collect(),
            center.iter().map(|c| c + radius).collect(),
        ),
    };
    let n = lo.len();
    let steps = per_axis.max(2) - 1;
    let mut idx = vec![0usize; n];
    let mut x = lo.clone();
    loop {
        for k in 0..n {
            x[k] = if idx[k] == steps {
                hi[k]
            } else {
                lo[k] + (hi[k] - lo[k]) * idx[k] as f64 / steps as f64
            };
        }
        if domain.contains(&x, 1e-12) {
            visit(&x);
        }
        let mut k = 0;
        loop {
            if k == n {
                return;
            }
            idx[k] += 1;
            if idx[k] <= steps {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Sum of the cost functions as one quadratic `(P, a, c)`.
fn total_cost(instance: &OcoInstance) -> (Vec<f64>, Vec<f64>, f64) {
    let n = instance.dim();
    let mut p = vec![0.0; n * n];
    let mut a = vec![0.0; n];
    let mut c = 0.0;
    for (t, k) in instance.round_groups() {
        let w = k as f64;
        match instance.cost(t) {
            CostFn::Affine(f) => {
                a.iter_mut().zip(&f.a).for_each(|(acc, v)| *acc += w * v);
                c += w * f.c;
            }
            CostFn::Quadratic {
                p: pt,
                a: at,
                c: ct,
            } => {
                p.iter_mut().zip(pt).for_each(|(acc, v)| *acc += w * v);
                a.iter_mut().zip(at).for_each(|(acc, v)| *acc += w * v);
                c += w * ct;
            }
        }
    }
    (p, a, c)
}

fn grid_benchmarks(
    instance: &OcoInstance,
    opts: &BenchmarkOptions,
) -> Result<(Comparator, Comparator)> {
    let n = instance.dim();
    if n > 3 {
        return Err(invalid("grid benchmarks support at most three dimensions"));
    }
    let per_axis = opts
        .grid_per_axis
        .unwrap_or(if n <= 2 { 1001 } else { 201 });
    let restricted = constraint_set(instance, true);
    let aggregate = constraint_set(instance, false);
    let work = per_axis
        .pow(n as u32)
        .saturating_mul(restricted.len() + aggregate.len());
    if work > opts.max_grid_work {
        return Err(Error::TooLarge {
            what: "benchmark grid",
            size: work,
            cap: opts.max_grid_work,
        });
    }
    let (p, a, c) = total_cost(instance);
    let cost = CostFn::Quadratic { p, a, c };
    let tol = 1e-12;
    let mut best = [(f64::INFINITY, Vec::new()), (f64::INFINITY, Vec::new())];
    let mut slack = [f64::NEG_INFINITY; 2];
    for_each_grid_point(instance.domain(), per_axis, |x| {
        let value = cost.eval(x);
        for (k, gs) in [&aggregate, &restricted].into_iter().enumerate() {
            let worst = gs
                .iter()
                .map(|g| g.eval(x))
                .fold(f64::NEG_INFINITY, f64::max);
            slack[k] = slack[k].max(-worst);
            if worst <= tol && value < best[k].0 {
                best[k] = (value, x.to_vec());
            }
        }
    });
    let [(v0, x0), (v1, x1)] = best;
    if !v0.is_finite() || !v1.is_finite() {
        return Err(Error::Infeasible);
    }
    Ok((
        Comparator {
            value: v0,
            x: x0,
            duals: None,
            slack: slack[0].min(1.0),
        },
        Comparator {
            value: v1,
            x: x1,
            duals: None,
            slack: slack[1].min(1.0),
        },
    ))
}

/// `min sum_t f_t(x_t)` s.t. `sum_t g_{t,i}(x_t) <= 0`, one decision per group
/// of identical rounds, time-averaged.
fn per_round_aggregate(instance: &OcoInstance, opts: &BenchmarkOptions) -> Result<f64> {
    let (lower, upper) = box_bounds(instance);
    let n = instance.dim();
    let d = instance.num_constraints();
    let groups = instance.round_groups();
    let tf = instance.horizon() as f64;
    let vars = groups.len() * n;
    check_cells(vars + d, vars, opts)?;
    let mut obj = vec![0.0; vars];
    let mut offset = 0.0;
    for (g, &(t, k)) in groups.iter().enumerate() {
        let CostFn::Affine(f) = instance.cost(t) else {
            unreachable!()
        };
        let (a, c) = shifted(f, lower);
        for j in 0..n {
            obj[g * n + j] = -(k as f64) * a[j] / tf;
        }
        offset += k as f64 * c / tf;
    }
    let mut lp = LinearProgram::maximize(obj);
    for g in 0..groups.len() {
        for j in 0..n {
            let mut row = vec![0.0; vars];
            row[g * n + j] = 1.0;
            lp.add_row(row, Relation::Le, upper[j] - lower[j]);
        }
    }
    for i in 0..d {
        let mut row = vec![0.0; vars];
        let mut rhs = 0.0;
        for (g, &(t, k)) in groups.iter().enumerate() {
            let (a, c) = shifted(instance.constraint(t, i), lower);
            for j in 0..n {
                row[g * n + j] = k as f64 * a[j] / tf;
            }
            rhs -= k as f64 * c / tf;
        }
        lp.add_row(row, Relation::Le, rhs);
    }
    let sol = lp.solve()?;
    Ok(tf * (offset - sol.objective))
}

/// `sum_t min { f_t(x) : x in X, g_t(x) <= 0 }`.
fn per_round_restricted(instance: &OcoInstance) -> Result<f64> {
    let (lower, upper) = box_bounds(instance);
    let n = instance.dim();
    let mut total = 0.0;
    for (t, k) in instance.round_groups() {
        let CostFn::Affine(f) = instance.cost(t) else {
            unreachable!()
        };
        let (a, c) = shifted(f, lower);
        let mut lp = LinearProgram::maximize(a.iter().map(|v| -v).collect());
        for j in 0..n {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            lp.add_row(row, Relation::Le, upper[j] - lower[j]);
        }
        for i in 0..instance.num_constraints() {
            let (ga, gc) = shifted(instance.constraint(t, i), lower);
            lp.add_row(ga, Relation::Le, -gc);
        }
        total += k as f64 * (c - lp.solve()?.objective);
    }
    Ok(total)
}
