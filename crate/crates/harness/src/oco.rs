//! Virtual-queue runs over a list of horizons.

use std::io::Write;

use nsbwk_core::ocowc::{
    build_oco_lower_bound, oco_benchmarks, oco_nonstationarity, random_affine_instance, run_virtual_queue, Affine,
    ConstraintNoise, CostFn, Domain, OcoInstance, OcoRunLog, VqParams,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::{parse_toml, read_toml, OutputSpec};
use crate::error::{config_err, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OcoInstanceSpec {
    /// `f_t(x) = -r x`, `g_t(x) = (b + delta 1{t <= T/2}) x - b/2` on `[0, 1]`.
    LowerBound { reward: f64, budget: f64, delta: f64 },
    /// Random affine instance on `[0, 1]^n`, seeded.
    Random { n: usize, d: usize, seed: u64 },
    /// Explicit functions; the horizon is the number of rounds given.
    Inline { domain: Domain, costs: Vec<CostFn>, constraints: Vec<Vec<Affine>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    #[default]
    Literal,
    Regularized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcoConfig {
    pub name: String,
    pub instance: OcoInstanceSpec,
    /// Ignored by inline instances.
    #[serde(default)]
    pub horizons: Vec<usize>,
    #[serde(default)]
    pub preset: Preset,
    /// Explicit step parameters; override the preset.
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Starting point; defaults to the domain's lower corner or center.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub noise: Option<ConstraintNoise>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl OcoConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Self = parse_toml(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let c: Self = read_toml(path)?;
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if !matches!(self.instance, OcoInstanceSpec::Inline { .. }) && self.horizons.is_empty() {
            return Err(config_err("horizons must be non-empty"));
        }
        for t in self.horizon_list() {
            let inst = self.build(t).map_err(|e| config_err(e.to_string()))?;
            if let Some(x0) = &self.x0 {
                if x0.len() != inst.dim() || !inst.domain().contains(x0, 1e-12) {
                    return Err(config_err("x0 must lie in the domain"));
                }
            }
        }
        Ok(())
    }

    pub fn horizon_list(&self) -> Vec<usize> {
        match &self.instance {
            OcoInstanceSpec::Inline { costs, .. } => vec![costs.len()],
            _ => self.horizons.clone(),
        }
    }

    pub fn build(&self, horizon: usize) -> Result<OcoInstance> {
        let inst = match &self.instance {
            OcoInstanceSpec::LowerBound { reward, budget, delta } => {
                build_oco_lower_bound(horizon, *reward, *budget, *delta)?
            }
            OcoInstanceSpec::Random { n, d, seed } => {
                random_affine_instance(*n, *d, horizon, &mut ChaCha8Rng::seed_from_u64(*seed))?
            }
            OcoInstanceSpec::Inline { domain, costs, constraints } => {
                OcoInstance::new(domain.clone(), costs.clone(), constraints.clone(), None, "inline")?
            }
        };
        Ok(match self.noise {
            Some(n) => inst.with_noise(n)?,
            None => inst,
        })
    }

    pub fn params(&self, horizon: usize) -> VqParams {
        let base = match self.preset {
            Preset::Literal => VqParams::literal(horizon),
            Preset::Regularized => VqParams::regularized(horizon),
        };
        VqParams { beta: self.beta.unwrap_or(base.beta), alpha: self.alpha.unwrap_or(base.alpha) }
    }

    fn start(&self, inst: &OcoInstance) -> Vec<f64> {
        self.x0.clone().unwrap_or_else(|| match inst.domain() {
            Domain::Box { lower, .. } => lower.clone(),
            Domain::Ball { center, .. } => center.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcoResult {
    pub horizon: usize,
    pub params: VqParams,
    pub w: f64,
    pub qbar: Option<f64>,
    pub per_round_opt: Option<f64>,
    pub per_round_opt_restricted: Option<f64>,
    pub log: OcoRunLog,
}

pub fn run_oco(config: &OcoConfig) -> Result<Vec<OcoResult>> {
    config
        .horizon_list()
        .into_iter()
        .map(|t| {
            let inst = config.build(t)?;
            let params = config.params(t);
            let log = run_virtual_queue(&inst, &config.start(&inst), params)?;
            let bench = oco_benchmarks(&inst)?;
            Ok(OcoResult {
                horizon: t,
                params,
                w: oco_nonstationarity(&inst),
                qbar: bench.qbar,
                per_round_opt: bench.per_round_opt,
                per_round_opt_restricted: bench.per_round_opt_restricted,
                log,
            })
        })
        .collect()
}

/// `round,x_1..x_n,q_1..q_d` for one run.
pub fn write_trace_csv<W: Write>(log: &OcoRunLog, n: usize, d: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["round".to_string()];
    header.extend((1..=n).map(|k| format!("x_{k}")));
    header.extend((1..=d).map(|i| format!("q_{i}")));
    w.write_record(&header)?;
    let rounds = log.xs.len() / n;
    for t in 0..rounds {
        let mut rec = vec![(t + 1).to_string()];
        rec.extend(log.xs[t * n..(t + 1) * n].iter().map(|v| format!("{v}")));
        rec.extend(log.queues[t * d..(t + 1) * d].iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_oco_summary_csv<W: Write>(results: &[OcoResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["horizon", "beta", "alpha", "cost", "opt", "opt_restricted", "reg1", "reg1_restricted", "reg2", "w", "qbar"])?;
    for r in results {
        w.write_record([
            r.horizon.to_string(),
            format!("{}", r.params.beta),
            format!("{}", r.params.alpha),
            format!("{}", r.log.cost),
            format!("{}", r.log.opt),
            format!("{}", r.log.opt_restricted),
            format!("{}", r.log.reg1),
            format!("{}", r.log.reg1_restricted),
            format!("{}", r.log.reg2),
            format!("{}", r.w),
            r.qbar.map(|q| format!("{q}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
