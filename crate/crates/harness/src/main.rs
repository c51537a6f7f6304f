use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nsbwk_core::lp::{check_lp_sandwich_with, solve_dynamic_lp, solve_static_lp};
use nsbwk_core::measures::nonstationarity_report;
use nsbwk_harness::config::OutputFormat;
use nsbwk_harness::lowerbound::{run_lower_bound_sweep, write_lower_bound_csv, LowerBoundConfig};
use nsbwk_harness::oco::{run_oco, write_oco_summary_csv, write_trace_csv, OcoConfig};
use nsbwk_harness::{emit_outputs, run_experiment, ExperimentConfig, HarnessError, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "nsbwk", version, about = "Non-stationary bandits with knapsacks: simulations and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Master seed; trial k uses seed + k.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
    /// Relative tolerance of the benchmark sandwich check.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tolerance: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Run a multi-trial simulation and write CSV/SVG outputs.
    Simulate { config: PathBuf },
    /// Static and dynamic LP values with the sandwich report.
    Benchmark { config: PathBuf },
    /// Non-stationarity measures of the configured instance.
    Measures { config: PathBuf },
    /// Virtual-queue runs for online convex optimization with constraints.
    Oco { config: PathBuf },
    /// SW-UCB horizon sweeps on the lower-bound families.
    Lowerbound { config: PathBuf },
}

fn out_dir(cli: &Cli, configured: &Option<PathBuf>) -> PathBuf {
    cli.out_dir.clone().or_else(|| configured.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn load_experiment(cli: &Cli, path: &Path) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_json(v: &serde_json::Value) {
    let text = serde_json::to_string_pretty(v).expect("json values serialize");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn simulate(cli: &Cli, path: &Path) -> Result<()> {
    let cfg = load_experiment(cli, path)?;
    let table = run_experiment(&cfg)?;
    let dir = out_dir(cli, &cfg.output.dir);
    for p in emit_outputs(&table, &dir, cfg.output.format)? {
        eprintln!("wrote {}", p.display());
    }
    for c in &table.cells {
        let sweep = c.sweep_value.map(|v| format!(" {}={v}", table.sweep_parameter.as_deref().unwrap_or(""))).unwrap_or_default();
        println!(
            "{}{sweep}: benchmark {:.3} mean reward {:.3} (sd {:.3}) mean tau {:.1} mean regret {:.3}",
            c.policy, c.benchmark, c.mean_reward, c.std_reward, c.mean_tau, c.mean_regret
        );
    }
    if let Some(c) = table.failed_cells().next() {
        return Err(HarnessError::Solver(nsbwk_core::Error::NumericFailure(format!("cell {} failed: {:?}", c.policy, c.status))));
    }
    Ok(())
}

fn benchmark(cli: &Cli, path: &Path) -> Result<()> {
    let cfg = load_experiment(cli, path)?;
    let mut out = Vec::new();
    for (sweep, spec) in cfg.cells()? {
        let inst = spec.build(0)?;
        let report = check_lp_sandwich_with(&inst, cli.tolerance)?;
        out.push(json!({
            "sweep_value": sweep,
            "static_lp": solve_static_lp(&inst)?.value,
            "dynamic_lp": solve_dynamic_lp(&inst)?.value,
            "sandwich_holds": report.holds(),
            "sandwich": report,
        }));
    }
    print_json(&json!({ "experiment": cfg.name, "cells": out }));
    Ok(())
}

fn measures(cli: &Cli, path: &Path) -> Result<()> {
    let cfg = load_experiment(cli, path)?;
    let mut out = Vec::new();
    for (sweep, spec) in cfg.cells()? {
        let inst = spec.build(0)?;
        out.push(json!({ "sweep_value": sweep, "report": nonstationarity_report(&inst)? }));
    }
    print_json(&json!({ "experiment": cfg.name, "cells": out }));
    Ok(())
}

fn oco(cli: &Cli, path: &Path) -> Result<()> {
    let cfg = OcoConfig::load(path)?;
    let results = run_oco(&cfg)?;
    let dir = out_dir(cli, &cfg.output.dir);
    let format = cli.format.unwrap_or(cfg.output.format);
    if format.csv() {
        std::fs::create_dir_all(&dir)?;
        let summary = dir.join(format!("{}_summary.csv", cfg.name));
        write_oco_summary_csv(&results, std::fs::File::create(&summary)?)?;
        for r in &results {
            let inst = cfg.build(r.horizon)?;
            let trace = dir.join(format!("{}_T{}.csv", cfg.name, r.horizon));
            let file = std::io::BufWriter::new(std::fs::File::create(&trace)?);
            write_trace_csv(&r.log, inst.dim(), inst.num_constraints(), file)?;
        }
        eprintln!("wrote {}", summary.display());
    }
    let rows: Vec<_> = results
        .iter()
        .map(|r| {
            json!({
                "horizon": r.horizon,
                "beta": r.params.beta,
                "alpha": r.params.alpha,
                "opt": r.log.opt,
                "opt_restricted": r.log.opt_restricted,
                "per_round_opt": r.per_round_opt,
                "per_round_opt_restricted": r.per_round_opt_restricted,
                "reg1": r.log.reg1,
                "reg1_restricted": r.log.reg1_restricted,
                "reg2": r.log.reg2,
                "reg2_over_sqrt_t": r.log.reg2 / (r.horizon as f64).sqrt(),
                "w": r.w,
                "qbar": r.qbar,
            })
        })
        .collect();
    print_json(&json!({ "experiment": cfg.name, "runs": rows }));
    Ok(())
}

fn lowerbound(cli: &Cli, path: &Path) -> Result<()> {
    let mut cfg = LowerBoundConfig::load(path)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(t) = cli.trials {
        cfg.trials = t;
    }
    let sweep = run_lower_bound_sweep(&cfg)?;
    if cli.format.unwrap_or(cfg.output.format).csv() {
        let dir = out_dir(cli, &cfg.output.dir);
        std::fs::create_dir_all(&dir)?;
        let file = dir.join(format!("{}.csv", cfg.name));
        write_lower_bound_csv(&sweep, std::io::BufWriter::new(std::fs::File::create(&file)?))?;
        eprintln!("wrote {}", file.display());
    }
    print_json(&json!({
        "experiment": sweep.name,
        "summary": sweep.summary,
        "regret_slope": sweep.regret_slope,
        "shortfall_slope": sweep.shortfall_slope,
    }));
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.trials == Some(0) {
        eprintln!("error: --trials must be at least 1");
        return ExitCode::from(1);
    }
    let result = match &cli.command {
        Command::Simulate { config } => simulate(&cli, config),
        Command::Benchmark { config } => benchmark(&cli, config),
        Command::Measures { config } => measures(&cli, config),
        Command::Oco { config } => oco(&cli, config),
        Command::Lowerbound { config } => lowerbound(&cli, config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
