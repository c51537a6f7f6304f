//! Dense two-phase primal simplex.
//!
//! Solves `max c'x  s.t.  a_i'x (<=|>=|=) b_i,  x >= 0` on a full tableau.
//! Entering columns follow Dantzig's rule until a run of degenerate pivots is
//! seen, after which the solver switches to Bland's rule for the rest of the
//! solve. Leaving-row ties always go to the lowest basic column index.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl Relation {
    fn flipped(self) -> Self {
        match self {
            Relation::Le => Relation::Ge,
            Relation::Ge => Relation::Le,
            Relation::Eq => Relation::Eq,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Optimality and feasibility tolerance.
    pub tolerance: f64,
    /// Iteration cap per phase; `None` uses `50 * (rows + columns)`.
    pub max_iterations: Option<usize>,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_switch: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_iterations: None,
            degenerate_switch: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    num_vars: usize,
    objective: Vec<f64>,
    rows: Vec<Vec<f64>>,
    relations: Vec<Relation>,
    rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SimplexSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per row, signed so that `objective == sum(duals * rhs)`.
    /// `Le` rows have nonnegative duals, `Ge` rows nonpositive ones.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl LinearProgram {
    /// A maximization problem over `num_vars` nonnegative variables.
    pub fn maximize(objective: Vec<f64>) -> Self {
        Self {
            num_vars: objective.len(),
            objective,
            rows: Vec::new(),
            relations: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn add_row(&mut self, coefficients: Vec<f64>, relation: Relation, rhs: f64) -> usize {
        assert_eq!(
            coefficients.len(),
            self.num_vars,
            "row length must match variable count"
        );
        self.rows.push(coefficients);
        self.relations.push(relation);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn solve(&self) -> Result<SimplexSolution> {
        self.solve_with(&SimplexOptions::default())
    }

    pub fn solve_with(&self, opts: &SimplexOptions) -> Result<SimplexSolution> {
        if self
            .objective
            .iter()
            .chain(self.rhs.iter())
            .chain(self.rows.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidInput(
                "linear program has non-finite coefficients".into(),
            ));
        }
        Tableau::build(self, opts).run()
    }
}

struct Tableau<'a> {
    opts: &'a SimplexOptions,
    n: usize,
    rows: usize,
    cols: usize,
    width: usize,
    data: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    artificial: Vec<bool>,
    /// Column holding `+e_i` in the initial tableau for every row.
    unit_col: Vec<usize>,
    sign: Vec<f64>,
    cost: Vec<f64>,
    iterations: usize,
    bland: bool,
}

impl<'a> Tableau<'a> {
    fn build(lp: &LinearProgram, opts: &'a SimplexOptions) -> Self {
        let n = lp.num_vars;
        let m = lp.rows.len();
        let mut relations = Vec::with_capacity(m);
        let mut sign = Vec::with_capacity(m);
        for (rel, b) in lp.relations.iter().zip(&lp.rhs) {
            if *b < 0.0 {
                relations.push(rel.flipped());
                sign.push(-1.0);
            } else {
                relations.push(*rel);
                sign.push(1.0);
            }
        }
        let surplus: Vec<usize> = (0..m).filter(|&i| relations[i] == Relation::Ge).collect();
        let cols = n + m + surplus.len();
        let width = cols + 1;
        let mut data = vec![0.0; m * width];
        let mut artificial = vec![false; cols];
        let mut unit_col = Vec::with_capacity(m);
        for i in 0..m {
            let row = &mut data[i * width..(i + 1) * width];
            for (dst, a) in row[..n].iter_mut().zip(&lp.rows[i]) {
                *dst = sign[i] * a;
            }
            row[n + i] = 1.0;
            row[cols] = sign[i] * lp.rhs[i];
            unit_col.push(n + i);
            if relations[i] != Relation::Le {
                artificial[n + i] = true;
            }
        }
        for (k, &i) in surplus.iter().enumerate() {
            data[i * width + n + m + k] = -1.0;
        }
        let mut cost = vec![0.0; cols];
        cost[..n].copy_from_slice(&lp.objective);
        Tableau {
            opts,
            n,
            rows: m,
            cols,
            width,
            data,
            obj: vec![0.0; width],
            basis: unit_col.clone(),
            artificial,
            unit_col,
            sign,
            cost,
            iterations: 0,
            bland: false,
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    fn reprice(&mut self, cost: &[f64]) {
        for j in 0..self.width {
            let mut z = 0.0;
            for i in 0..self.rows {
                let cb = cost[self.basis[i]];
                if cb != 0.0 {
                    z += cb * self.at(i, j);
                }
            }
            self.obj[j] = if j < self.cols { z - cost[j] } else { z };
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.data[r * w + c];
        for v in &mut self.data[r * w..(r + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.data[r * w..(r + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.data[i * w + c];
            if f != 0.0 {
                for (v, pr) in self.data[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
                self.data[i * w + c] = 0.0;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (v, pr) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    fn entering(&self, allow_artificial: bool) -> Option<usize> {
        let tol = self.opts.tolerance;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.cols {
            if !allow_artificial && self.artificial[j] {
                continue;
            }
            let d = self.obj[j];
            if d < -tol {
                if self.bland {
                    return Some(j);
                }
                if best.is_none_or(|(_, bd)| d < bd) {
                    best = Some((j, d));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    fn leaving(&self, c: usize) -> Option<usize> {
        let piv_tol = 1e-11;
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.rows {
            let a = self.at(i, c);
            if a > piv_tol {
                let ratio = self.at(i, self.cols) / a;
                match best {
                    None => best = Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                        if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                            best = Some((i, ratio));
                        }
                    }
                }
            }
        }
        best.map(|(i, _)| i)
    }

    fn iterate(&mut self, allow_artificial: bool) -> Result<()> {
        let cap = self
            .opts
            .max_iterations
            .unwrap_or(50 * (self.rows + self.cols).max(1));
        let mut degenerate_run = 0usize;
        let mut local = 0usize;
        while let Some(c) = self.entering(allow_artificial) {
            let r = self.leaving(c).ok_or(Error::Unbounded)?;
            let step = self.at(r, self.cols) / self.at(r, c);
            if step.abs() <= self.opts.tolerance {
                degenerate_run += 1;
                if degenerate_run >= self.opts.degenerate_switch {
                    self.bland = true;
                }
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, c);
            self.iterations += 1;
            local += 1;
            if local > cap {
                return Err(Error::NumericFailure(format!(
                    "simplex exceeded {cap} iterations"
                )));
            }
        }
        Ok(())
    }

    fn run(mut self) -> Result<SimplexSolution> {
        let tol = self.opts.tolerance;
        if self.artificial.iter().any(|a| *a) {
            let phase_one: Vec<f64> = self
                .artificial
                .iter()
                .map(|a| if *a { -1.0 } else { 0.0 })
                .collect();
            self.reprice(&phase_one);
            self.iterate(true)?;
            let scale = 1.0
                + (0..self.rows)
                    .map(|i| self.at(i, self.cols).abs())
                    .fold(0.0, f64::max);
            if -self.obj[self.cols] > tol * scale {
                return Err(Error::Infeasible);
            }
            // Drive zero-level artificials out of the basis where possible.
            for r in 0..self.rows {
                if self.artificial[self.basis[r]] {
                    let col = (0..self.cols)
                        .filter(|&j| !self.artificial[j])
                        .max_by(|&a, &b| self.at(r, a).abs().total_cmp(&self.at(r, b).abs()));
                    if let Some(j) = col {
                        if self.at(r, j).abs() > 1e-9 {
                            self.pivot(r, j);
                        }
                    }
                }
            }
            self.bland = false;
        }
        let cost = self.cost.clone();
        self.reprice(&cost);
        self.iterate(false)?;

        let mut x = vec![0.0; self.n];
        for i in 0..self.rows {
            let b = self.basis[i];
            if b < self.n {
                x[b] = self.at(i, self.cols).max(0.0);
            }
        }
        let duals = (0..self.rows)
            .map(|i| self.sign[i] * self.obj[self.unit_col[i]])
            .collect();
        Ok(SimplexSolution {
            objective: self.obj[self.cols],
            x,
            duals,
            iterations: self.iterations,
        })
    }
}
