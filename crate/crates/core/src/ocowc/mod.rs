//! Online convex optimization with constraints.
//!
//! Costs are affine or convex quadratic and constraints are affine, over a
//! box or a Euclidean ball. Rounds are indexed from 0.

mod benchmarks;
mod virtual_queue;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use benchmarks::{
    oco_benchmarks, oco_benchmarks_with, BenchmarkOptions, Comparator, OcoBenchmarks,
};
pub use virtual_queue::{run_virtual_queue, OcoRunLog, VqParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { lower, .. } => lower.len(),
            Domain::Ball { center, .. } => center.len(),
        }
    }

    pub fn project(&self, y: &mut [f64]) {
        match self {
            Domain::Box { lower, upper } => {
                for ((v, l), u) in y.iter_mut().zip(lower).zip(upper) {
                    *v = v.clamp(*l, *u);
                }
            }
            Domain::Ball { center, radius } => {
                let dist = y
                    .iter()
                    .zip(center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if dist > *radius {
                    let s = radius / dist;
                    for (v, c) in y.iter_mut().zip(center) {
                        *v = c + (*v - c) * s;
                    }
                }
            }
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            Domain::Box { lower, upper } => x
                .iter()
                .zip(lower)
                .zip(upper)
                .all(|((v, l), u)| *v >= l - tol && *v <= u + tol),
            Domain::Ball { center, radius } => {
                x.iter()
                    .zip(center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
                    <= radius + tol
            }
        }
    }

    /// `sup_{x in X} |a'x + c|`.
    pub fn sup_abs_affine(&self, f: &Affine) -> f64 {
        match self {
            Domain::Box { lower, upper } => {
                let mut hi = f.c;
                let mut lo = f.c;
                for ((a, l), u) in f.a.iter().zip(lower).zip(upper) {
                    hi += (a * l).max(a * u);
                    lo += (a * l).min(a * u);
                }
                hi.abs().max(lo.abs())
            }
            Domain::Ball { center, radius } => {
                let norm = f.a.iter().map(|a| a * a).sum::<f64>().sqrt();
                (f.c + dot(&f.a, center)).abs() + radius * norm
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Domain::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(invalid("box bounds must be non-empty and of equal length"));
                }
                if lower
                    .iter()
                    .zip(upper)
                    .any(|(l, u)| !(l.is_finite() && u.is_finite() && l <= u))
                {
                    return Err(invalid("box bounds must be finite with lower <= upper"));
                }
            }
            Domain::Ball { center, radius } => {
                if center.is_empty() || center.iter().any(|c| !c.is_finite()) {
                    return Err(invalid("ball center must be non-empty and finite"));
                }
                if !(radius.is_finite() && *radius >= 0.0) {
                    return Err(invalid("ball radius must be finite and nonnegative"));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `a'x + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub a: Vec<f64>,
    pub c: f64,
}

impl Affine {
    pub fn new(a: Vec<f64>, c: f64) -> Self {
        Self { a, c }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) + self.c
    }

    fn key(&self) -> Vec<u64> {
        self.a
            .iter()
            .chain(std::iter::once(&self.c))
            .map(|v| v.to_bits())
            .collect()
    }
}

/// Convex cost: affine, or `x'Px + a'x + c` with `P` symmetric PSD (`n x n`, row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostFn {
    Affine(Affine),
    Quadratic { p: Vec<f64>, a: Vec<f64>, c: f64 },
}

impl CostFn {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            CostFn::Affine(f) => f.eval(x),
            CostFn::Quadratic { p, a, c } => {
                let n = x.len();
                let mut q = 0.0;
                for i in 0..n {
                    q += x[i] * dot(&p[i * n..(i + 1) * n], x);
                }
                q + dot(a, x) + c
            }
        }
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        match self {
            CostFn::Affine(f) => out.copy_from_slice(&f.a),
            CostFn::Quadratic { p, a, .. } => {
                let n = x.len();
                for i in 0..n {
                    out[i] = 2.0 * dot(&p[i * n..(i + 1) * n], x) + a[i];
                }
            }
        }
    }

    pub fn is_affine(&self) -> bool {
        matches!(self, CostFn::Affine(_))
    }

    fn key(&self) -> Vec<u64> {
        match self {
            CostFn::Affine(f) => f.key(),
            CostFn::Quadratic { p, a, c } => p
                .iter()
                .chain(a)
                .chain(std::iter::once(c))
                .map(|v| v.to_bits())
                .collect(),
        }
    }
}

/// Zero-mean uniform noise on the constant term of every constraint,
/// drawn once from `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintNoise {
    pub amplitude: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcoInstance {
    domain: Domain,
    costs: Vec<CostFn>,
    /// Expected constraint functions, `T x d`.
    constraints: Vec<Vec<Affine>>,
    noise: Option<ConstraintNoise>,
    /// Realized constant-term offsets, `T x d`; empty without noise.
    #[serde(skip)]
    offsets: Vec<f64>,
    label: String,
}

impl OcoInstance {
    /// Validates the instance and checks that both benchmark programs are feasible.
    pub fn new(
        domain: Domain,
        costs: Vec<CostFn>,
        constraints: Vec<Vec<Affine>>,
        noise: Option<ConstraintNoise>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let mut inst = Self {
            domain,
            costs,
            constraints,
            noise,
            offsets: Vec::new(),
            label: label.into(),
        };
        inst.validate()?;
        inst.realize_noise();
        let slack = benchmarks::slater_slack(&inst)?;
        for (program, s) in [("aggregate", slack.0), ("restricted", slack.1)] {
            if s < -1e-9 {
                return Err(Error::SlaterViolated { program, slack: s });
            }
        }
        Ok(inst)
    }

    fn validate(&self) -> Result<()> {
        self.domain.validate()?;
        let n = self.domain.dim();
        let t = self.costs.len();
        if t == 0 || self.constraints.len() != t {
            return Err(invalid("need one cost and one constraint list per round"));
        }
        let d = self.constraints[0].len();
        if d == 0 {
            return Err(invalid("need at least one constraint per round"));
        }
        for f in &self.costs {
            match f {
                CostFn::Affine(f) => check_affine(f, n)?,
                CostFn::Quadratic { p, a, c } => {
                    if p.len() != n * n || a.len() != n || !c.is_finite() {
                        return Err(invalid("quadratic cost has wrong dimensions"));
                    }
                    if p.iter().chain(a).any(|v| !v.is_finite()) {
                        return Err(invalid("non-finite cost coefficient"));
                    }
                    if !is_psd(p, n) {
                        return Err(invalid(
                            "quadratic cost must be symmetric positive semidefinite",
                        ));
                    }
                }
            }
        }
        for round in &self.constraints {
            if round.len() != d {
                return Err(invalid("every round needs the same number of constraints"));
            }
            for g in round {
                check_affine(g, n)?;
            }
        }
        if let Some(noise) = &self.noise {
            if !(noise.amplitude.is_finite() && noise.amplitude >= 0.0) {
                return Err(invalid("noise amplitude must be finite and nonnegative"));
            }
        }
        Ok(())
    }

    fn realize_noise(&mut self) {
        self.offsets = match self.noise {
            Some(ConstraintNoise { amplitude, seed }) if amplitude > 0.0 => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..self.horizon() * self.num_constraints())
                    .map(|_| rng.gen_range(-amplitude..=amplitude))
                    .collect()
            }
            _ => Vec::new(),
        };
    }

    pub fn horizon(&self) -> usize {
        self.costs.len()
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints[0].len()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn cost(&self, round: usize) -> &CostFn {
        &self.costs[round]
    }

    /// Expected constraint `i` of `round`.
    pub fn constraint(&self, round: usize, i: usize) -> &Affine {
        &self.constraints[round][i]
    }

    /// Constraint `i` of `round` as revealed to the player.
    pub fn realized_constraint(&self, round: usize, i: usize) -> Affine {
        let mut g = self.constraints[round][i].clone();
        if !self.offsets.is_empty() {
            g.c += self.offsets[round * self.num_constraints() + i];
        }
        g
    }

    pub fn is_stochastic(&self) -> bool {
        !self.offsets.is_empty()
    }

    pub fn is_affine(&self) -> bool {
        self.costs.iter().all(CostFn::is_affine)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Copy with constraint noise; the expected functions are unchanged.
    pub fn with_noise(&self, noise: ConstraintNoise) -> Result<Self> {
        let mut out = self.clone();
        out.noise = Some(noise);
        out.validate()?;
        out.realize_noise();
        Ok(out)
    }

    /// Rounds with bit-identical cost and expected constraints: `(representative, count)`.
    pub(crate) fn round_groups(&self) -> Vec<(usize, usize)> {
        group_by_key((0..self.horizon()).map(|t| {
            let mut k = self.costs[t].key();
            for g in &self.constraints[t] {
                k.extend(g.key());
            }
            k
        }))
    }

    /// Rounds with bit-identical expected constraint `i`.
    pub(crate) fn constraint_groups(&self, i: usize) -> Vec<(usize, usize)> {
        group_by_key((0..self.horizon()).map(|t| self.constraints[t][i].key()))
    }

    /// Time average of expected constraint `i`.
    pub fn mean_constraint(&self, i: usize) -> Affine {
        let n = self.dim();
        let mut a = vec![0.0; n];
        let mut c = 0.0;
        let groups = self.constraint_groups(i);
        if groups.len() == 1 {
            return self.constraints[0][i].clone();
        }
        for (t, k) in groups {
            let g = &self.constraints[t][i];
            for (acc, v) in a.iter_mut().zip(&g.a) {
                *acc += k as f64 * v;
            }
            c += k as f64 * g.c;
        }
        let tf = self.horizon() as f64;
        Affine {
            a: a.iter().map(|v| v / tf).collect(),
            c: c / tf,
        }
    }
}

fn group_by_key(keys: impl Iterator<Item = Vec<u64>>) -> Vec<(usize, usize)> {
    let mut index = std::collections::HashMap::new();
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (t, key) in keys.enumerate() {
        let next = out.len();
        let g = *index.entry(key).or_insert(next);
        if g == next {
            out.push((t, 0));
        }
        out[g].1 += 1;
    }
    out
}

fn check_affine(f: &Affine, n: usize) -> Result<()> {
    if f.a.len() != n || !f.c.is_finite() || f.a.iter().any(|v| !v.is_finite()) {
        return Err(invalid(
            "affine function has wrong dimension or non-finite coefficients",
        ));
    }
    Ok(())
}

/// Symmetric PSD test by Cholesky with a small diagonal shift.
fn is_psd(p: &[f64], n: usize) -> bool {
    for i in 0..n {
        for j in 0..i {
            if (p[i * n + j] - p[j * n + i]).abs() > 1e-12 * (1.0 + p[i * n + j].abs()) {
                return false;
            }
        }
    }
    let scale = p.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let shift = 1e-10 * scale;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = p[i * n + j] + if i == j { shift } else { 0.0 };
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    true
}

/// `W = sum_t sum_j sup_X |g_{t,j} - g_bar_j|` on the expected constraints.
pub fn oco_nonstationarity(instance: &OcoInstance) -> f64 {
    let n = instance.dim();
    let mut w = 0.0;
    for i in 0..instance.num_constraints() {
        let mean = instance.mean_constraint(i);
        for (t, k) in instance.constraint_groups(i) {
            let g = instance.constraint(t, i);
            let diff = Affine {
                a: (0..n).map(|k| g.a[k] - mean.a[k]).collect(),
                c: g.c - mean.c,
            };
            w += k as f64 * instance.domain().sup_abs_affine(&diff);
        }
    }
    w
}

/// `f_t(x) = -r x`, `g_t(x) = (b + delta 1{t <= T/2}) x - b/2` on `[0, 1]`.
pub fn build_oco_lower_bound(
    horizon: usize,
    reward: f64,
    budget: f64,
    delta: f64,
) -> Result<OcoInstance> {
    if horizon < 2 || horizon % 2 != 0 {
        return Err(invalid("horizon must be even and at least 2"));
    }
    if !(budget > 0.0 && delta >= 0.0 && reward.is_finite()) {
        return Err(invalid("need b > 0 and delta >= 0"));
    }
    let half = horizon / 2;
    let costs = vec![CostFn::Affine(Affine::new(vec![-reward], 0.0)); horizon];
    let constraints = (0..horizon)
        .map(|t| {
            let slope = if t < half { budget + delta } else { budget };
            vec![Affine::new(vec![slope], -budget / 2.0)]
        })
        .collect();
    OcoInstance::new(
        Domain::Box {
            lower: vec![0.0],
            upper: vec![1.0],
        },
        costs,
        constraints,
        None,
        "oco-lower-bound",
    )
}

/// Random affine instance on `[0, 1]^n` whose constraints are all strictly
/// satisfied at an interior anchor point.
pub fn random_affine_instance<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<OcoInstance> {
    let anchor: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..0.8)).collect();
    let costs = (0..horizon)
        .map(|_| {
            CostFn::Affine(Affine::new(
                (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                rng.gen_range(-0.5..0.5),
            ))
        })
        .collect();
    let constraints = (0..horizon)
        .map(|_| {
            (0..d)
                .map(|_| {
                    let a: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    let c = -dot(&a, &anchor) - rng.gen_range(0.05..0.5);
                    Affine::new(a, c)
                })
                .collect()
        })
        .collect();
    OcoInstance::new(
        Domain::Box {
            lower: vec![0.0; n],
            upper: vec![1.0; n],
        },
        costs,
        constraints,
        None,
        "random-affine",
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projections() {
        let b = Domain::Box {
            lower: vec![0.0, -1.0],
            upper: vec![1.0, 1.0],
        };
        let mut y = vec![2.0, -3.0];
        b.project(&mut y);
        assert_eq!(y, vec![1.0, -1.0]);
        let ball = Domain::Ball {
            center: vec![1.0, 1.0],
            radius: 2.0,
        };
        let mut y = vec![1.0, 5.0];
        ball.project(&mut y);
        assert!((y[0] - 1.0).abs() < 1e-15 && (y[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn sup_norms() {
        let b = Domain::Box {
            lower: vec![0.0, -1.0],
            upper: vec![1.0, 1.0],
        };
        let f = Affine::new(vec![2.0, -1.0], -0.5);
        // Extremes: 2 + 1 - 0.5 = 2.5 and 0 - 1 - 0.5 = -1.5.
        assert_eq!(b.sup_abs_affine(&f), 2.5);
        let ball = Domain::Ball {
            center: vec![0.0, 0.0],
            radius: 1.0,
        };
        assert!((ball.sup_abs_affine(&Affine::new(vec![3.0, 4.0], 1.0)) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_w_closed_form() {
        let inst = build_oco_lower_bound(1000, 1.0, 0.1, 0.01).unwrap();
        assert!((oco_nonstationarity(&inst) - 1000.0 * 0.01 / 2.0).abs() < 1e-9);
    }

    #[test]
    fn constant_constraints_have_zero_w() {
        let costs = vec![CostFn::Affine(Affine::new(vec![1.0], 0.0)); 7];
        let cons = vec![vec![Affine::new(vec![0.3], -0.1)]; 7];
        let inst = OcoInstance::new(
            Domain::Box {
                lower: vec![0.0],
                upper: vec![1.0],
            },
            costs,
            cons,
            None,
            "",
        )
        .unwrap();
        assert_eq!(oco_nonstationarity(&inst), 0.0);
    }

    #[test]
    fn w_matches_grid_oracle() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inst = random_affine_instance(1, 2, 10, &mut rng).unwrap();
        let mut oracle = 0.0;
        for i in 0..2 {
            let mean_a: f64 = (0..10).map(|t| inst.constraint(t, i).a[0]).sum::<f64>() / 10.0;
            let mean_c: f64 = (0..10).map(|t| inst.constraint(t, i).c).sum::<f64>() / 10.0;
            for t in 0..10 {
                let g = inst.constraint(t, i);
                let mut best: f64 = 0.0;
                for k in 0..=100_000 {
                    let x = k as f64 / 100_000.0;
                    best = best.max(((g.a[0] - mean_a) * x + g.c - mean_c).abs());
                }
                oracle += best;
            }
        }
        assert!((oco_nonstationarity(&inst) - oracle).abs() < 1e-6);
    }

    #[test]
    fn rejects_infeasible_and_non_convex() {
        let costs = vec![CostFn::Affine(Affine::new(vec![1.0], 0.0)); 2];
        let cons = vec![vec![Affine::new(vec![0.0], 1.0)]; 2];
        let err = OcoInstance::new(
            Domain::Box {
                lower: vec![0.0],
                upper: vec![1.0],
            },
            costs,
            cons,
            None,
            "",
        );
        assert!(matches!(err, Err(Error::SlaterViolated { .. })));
        let costs = vec![CostFn::Quadratic {
            p: vec![-1.0],
            a: vec![0.0],
            c: 0.0,
        }];
        let cons = vec![vec![Affine::new(vec![0.0], -1.0)]];
        assert!(OcoInstance::new(
            Domain::Box {
                lower: vec![0.0],
                upper: vec![1.0]
            },
            costs,
            cons,
            None,
            ""
        )
        .is_err());
    }

    #[test]
    fn noise_is_seeded_and_mean_preserving() {
        let base = build_oco_lower_bound(100, 1.0, 0.1, 0.01).unwrap();
        let a = base
            .with_noise(ConstraintNoise {
                amplitude: 0.05,
                seed: 4,
            })
            .unwrap();
        let b = base
            .with_noise(ConstraintNoise {
                amplitude: 0.05,
                seed: 4,
            })
            .unwrap();
        assert!(a.is_stochastic());
        assert_eq!(a.realized_constraint(3, 0), b.realized_constraint(3, 0));
        assert_ne!(a.realized_constraint(3, 0), base.realized_constraint(3, 0));
        assert_eq!(a.constraint(3, 0), base.constraint(3, 0));
        assert_eq!(oco_nonstationarity(&a), oco_nonstationarity(&base));
    }
}
