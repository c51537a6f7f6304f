//! Non-stationarity measures of an instance, computed on the stored means.
//!
//! Local budgets sum adjacent-round changes, global budgets sum deviations
//! from the time average. The matrix norm used for consumption is the
//! operator 1-norm, i.e. the largest absolute column sum, with columns indexed
//! by arm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::BwkInstance;
use crate::lp::{LinearProgram, Relation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonstationarityReport {
    pub v1: f64,
    pub v2_per_resource: Vec<f64>,
    pub v2: f64,
    pub w1: f64,
    pub w2: f64,
    /// `None` when the refined measures exceed the LP size cap.
    pub refined: Option<RefinedBudgets>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedBudgets {
    pub w1_min: f64,
    pub mu_star: Vec<f64>,
    pub w2_min: f64,
    /// `d x m`, row-major.
    pub c_star: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RefinedOptions {
    /// Cap on `rows * columns` of either auxiliary LP tableau.
    pub max_tableau_cells: usize,
}

impl Default for RefinedOptions {
    fn default() -> Self {
        Self {
            max_tableau_cells: 4_000_000,
        }
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Largest over arms of the absolute column sum of `a - b` (`d x m` matrices).
fn col_norm_diff(a: &[f64], b: &[f64], m: usize) -> f64 {
    let d = a.len() / m;
    (0..m)
        .map(|i| {
            (0..d)
                .map(|j| (a[j * m + i] - b[j * m + i]).abs())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// `(V1, [V2_j], V2)`.
pub fn local_budgets(instance: &BwkInstance) -> (f64, Vec<f64>, f64) {
    let m = instance.num_arms();
    let d = instance.num_resources();
    let mut v1 = 0.0;
    let mut v2 = vec![0.0; d];
    for round in 1..instance.horizon() {
        v1 += sup_diff(instance.mu(round - 1), instance.mu(round));
        let (prev, cur) = (instance.c_matrix(round - 1), instance.c_matrix(round));
        for (j, acc) in v2.iter_mut().enumerate() {
            *acc += sup_diff(&prev[j * m..(j + 1) * m], &cur[j * m..(j + 1) * m]);
        }
    }
    let v2_max = v2.iter().cloned().fold(0.0, f64::max);
    (v1, v2, v2_max)
}

/// `(W1, W2)`.
pub fn global_budgets(instance: &BwkInstance) -> (f64, f64) {
    let (mu_bar, c_bar) = instance.averages();
    let m = instance.num_arms();
    let groups = instance.round_groups();
    let mut w1 = 0.0;
    let mut w2 = 0.0;
    for (g, &round) in groups.representative.iter().enumerate() {
        let n = groups.counts[g] as f64;
        w1 += n * sup_diff(instance.mu(round), &mu_bar);
        w2 += n * col_norm_diff(instance.c_matrix(round), &c_bar, m);
    }
    (w1, w2)
}

/// Exact `W1_min`, `W2_min` and their minimizers by auxiliary LPs.
///
/// `W1_min = min_mu sum_t |mu_t - mu|_inf` is solved as
/// `min sum_t s_t  s.t.  -s_t <= mu_{t,i} - mu_i <= s_t`; `W2_min` is the
/// same with per-arm absolute column sums. Rounds with identical means share
/// one slack with weight equal to their count. The null arm is fixed at zero.
pub fn refined_budgets(instance: &BwkInstance) -> Result<RefinedBudgets> {
    refined_budgets_with(instance, &RefinedOptions::default())
}

pub fn refined_budgets_with(
    instance: &BwkInstance,
    opts: &RefinedOptions,
) -> Result<RefinedBudgets> {
    let m = instance.num_arms();
    let d = instance.num_resources();
    let actual = m - 1;
    let groups = instance.round_groups();
    let g_len = groups.len();
    let weight = |g: usize| groups.counts[g] as f64;

    // W1_min: variables [mu_0..mu_{a-1}, s_0..s_{G-1}].
    let (w1_min, mut mu_star) = if actual == 0 {
        (0.0, vec![])
    } else {
        let n = actual + g_len;
        let rows = 2 * g_len * actual;
        check_cap(rows, n, opts)?;
        let mut obj = vec![0.0; n];
        for g in 0..g_len {
            obj[actual + g] = -weight(g);
        }
        let mut lp = LinearProgram::maximize(obj);
        for (g, &round) in groups.representative.iter().enumerate() {
            for i in 0..actual {
                let v = instance.mu(round)[i];
                // mu_{g,i} - mu_i <= s_g  ->  -mu_i - s_g <= -mu_{g,i}
                let mut row = vec![0.0; n];
                row[i] = -1.0;
                row[actual + g] = -1.0;
                lp.add_row(row, Relation::Le, -v);
                // mu_i - mu_{g,i} <= s_g
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                row[actual + g] = -1.0;
                lp.add_row(row, Relation::Le, v);
            }
        }
        let sol = lp.solve()?;
        let centre = (0..actual)
            .map(|i| {
                clamp_to_range(
                    sol.x[i],
                    groups.representative.iter().map(|&r| instance.mu(r)[i]),
                )
            })
            .collect();
        (-sol.objective, centre)
    };
    mu_star.push(0.0);

    // W2_min: variables [C_{j,i} (d*a), s_g (G), u_{g,j,i} (G*d*a) when d > 1].
    let (w2_min, c_star) = if actual == 0 {
        (0.0, vec![0.0; d * m])
    } else {
        let da = d * actual;
        let use_u = d > 1;
        let n = da + g_len + if use_u { g_len * da } else { 0 };
        let rows = if use_u {
            g_len * actual + 2 * g_len * da
        } else {
            2 * g_len * actual
        };
        check_cap(rows, n, opts)?;
        let mut obj = vec![0.0; n];
        for g in 0..g_len {
            obj[da + g] = -weight(g);
        }
        let mut lp = LinearProgram::maximize(obj);
        let cvar = |j: usize, i: usize| j * actual + i;
        let uvar = |g: usize, j: usize, i: usize| da + g_len + g * da + j * actual + i;
        for (g, &round) in groups.representative.iter().enumerate() {
            for i in 0..actual {
                if use_u {
                    // sum_j u_{g,j,i} <= s_g
                    let mut row = vec![0.0; n];
                    for j in 0..d {
                        row[uvar(g, j, i)] = 1.0;
                    }
                    row[da + g] = -1.0;
                    lp.add_row(row, Relation::Le, 0.0);
                }
                for j in 0..d {
                    let v = instance.c(round, j, i);
                    let bound = if use_u { uvar(g, j, i) } else { da + g };
                    let mut row = vec![0.0; n];
                    row[cvar(j, i)] = -1.0;
                    row[bound] = -1.0;
                    lp.add_row(row, Relation::Le, -v);
                    let mut row = vec![0.0; n];
                    row[cvar(j, i)] = 1.0;
                    row[bound] = -1.0;
                    lp.add_row(row, Relation::Le, v);
                }
            }
        }
        let sol = lp.solve()?;
        let mut c_star = vec![0.0; d * m];
        for j in 0..d {
            for i in 0..actual {
                let values = groups.representative.iter().map(|&r| instance.c(r, j, i));
                c_star[j * m + i] = clamp_to_range(sol.x[cvar(j, i)], values);
            }
        }
        (-sol.objective, c_star)
    };

    Ok(RefinedBudgets {
        w1_min: w1_min.max(0.0),
        mu_star,
        w2_min: w2_min.max(0.0),
        c_star,
    })
}

/// Projects a minimizer coordinate onto the range of the data; this never
/// increases any term of the objective.
fn clamp_to_range(v: f64, values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| {
        (l.min(x), h.max(x))
    });
    v.clamp(lo, hi)
}

fn check_cap(rows: usize, cols: usize, opts: &RefinedOptions) -> Result<()> {
    // Slack columns double the width of the tableau.
    let cells = rows * (cols + rows);
    if cells > opts.max_tableau_cells {
        return Err(Error::TooLarge {
            what: "refined-measure LP tableau cells",
            size: cells,
            cap: opts.max_tableau_cells,
        });
    }
    Ok(())
}

/// All measures; the refined ones are omitted when too large.
pub fn nonstationarity_report(instance: &BwkInstance) -> Result<NonstationarityReport> {
    let (v1, v2_per_resource, v2) = local_budgets(instance);
    let (w1, w2) = global_budgets(instance);
    let refined = match refined_budgets(instance) {
        Ok(r) => Some(r),
        Err(Error::TooLarge { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(NonstationarityReport {
        v1,
        v2_per_resource,
        v2,
        w1,
        w2,
        refined,
    })
}
