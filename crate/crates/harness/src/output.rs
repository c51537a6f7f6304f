//! CSV and SVG emission.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::config::OutputFormat;
use crate::error::{config_err, Result};
use crate::experiment::{AggregateTable, CellStatus};
use crate::svg::{Chart, Series};

/// One row of the long-format CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct LongRow {
    pub experiment: String,
    pub policy: String,
    pub sweep_value: Option<f64>,
    pub trial: usize,
    pub round: usize,
    pub cum_reward: f64,
    pub cum_consumption: Vec<f64>,
    pub tau: usize,
    pub regret: f64,
}

/// `f64` in shortest round-trip form.
fn num(v: f64) -> String {
    format!("{v}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn long_header(num_resources: usize) -> Vec<String> {
    let mut h: Vec<String> = ["experiment", "policy", "sweep_value", "trial", "round", "cum_reward"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend((1..=num_resources).map(|j| format!("cum_consumption_{j}")));
    h.push("tau".into());
    h.push("regret".into());
    h
}

impl AggregateTable {
    pub fn long_rows(&self) -> Vec<LongRow> {
        let mut rows = Vec::new();
        for cell in &self.cells {
            for t in &cell.trials {
                for (k, &round) in t.rounds.iter().enumerate() {
                    rows.push(LongRow {
                        experiment: self.experiment.clone(),
                        policy: cell.policy.clone(),
                        sweep_value: cell.sweep_value,
                        trial: t.trial,
                        round,
                        cum_reward: t.cum_reward[k],
                        cum_consumption: t.cum_consumption[k].clone(),
                        tau: t.tau,
                        regret: t.regret,
                    });
                }
            }
        }
        rows
    }
}

pub fn write_long_csv<W: Write>(table: &AggregateTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(long_header(table.num_resources))?;
    for r in table.long_rows() {
        let mut rec = vec![r.experiment, r.policy, opt_num(r.sweep_value), r.trial.to_string(), r.round.to_string(), num(r.cum_reward)];
        rec.extend(r.cum_consumption.iter().map(|v| num(*v)));
        rec.push(r.tau.to_string());
        rec.push(num(r.regret));
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_long_csv<R: Read>(input: R) -> Result<Vec<LongRow>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    let width = header.len();
    if width < 8 {
        return Err(config_err("long CSV has too few columns"));
    }
    let d = width - 8;
    let parse_f = |s: &str| s.parse::<f64>().map_err(|e| config_err(format!("bad number `{s}`: {e}")));
    let parse_u = |s: &str| s.parse::<usize>().map_err(|e| config_err(format!("bad integer `{s}`: {e}")));
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        rows.push(LongRow {
            experiment: rec[0].to_string(),
            policy: rec[1].to_string(),
            sweep_value: if rec[2].is_empty() { None } else { Some(parse_f(&rec[2])?) },
            trial: parse_u(&rec[3])?,
            round: parse_u(&rec[4])?,
            cum_reward: parse_f(&rec[5])?,
            cum_consumption: (0..d).map(|j| parse_f(&rec[6 + j])).collect::<Result<_>>()?,
            tau: parse_u(&rec[6 + d])?,
            regret: parse_f(&rec[7 + d])?,
        });
    }
    Ok(rows)
}

pub fn write_summary_csv<W: Write>(table: &AggregateTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "experiment",
        "policy",
        "sweep_value",
        "trials",
        "benchmark",
        "mean_reward",
        "std_reward",
        "mean_tau",
        "mean_regret",
        "std_regret",
        "status",
    ])?;
    for c in &table.cells {
        let status = match &c.status {
            CellStatus::Ok => "ok".to_string(),
            CellStatus::Failed(m) => format!("failed: {m}"),
        };
        w.write_record([
            table.experiment.clone(),
            c.policy.clone(),
            opt_num(c.sweep_value),
            c.trials.len().to_string(),
            num(c.benchmark),
            num(c.mean_reward),
            num(c.std_reward),
            num(c.mean_tau),
            num(c.mean_regret),
            num(c.std_regret),
            status,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Cumulative reward against round, or mean regret against the sweep value.
pub fn chart(table: &AggregateTable) -> Chart {
    let mut policies: Vec<&str> = Vec::new();
    for c in &table.cells {
        if !policies.contains(&c.policy.as_str()) {
            policies.push(&c.policy);
        }
    }
    match &table.sweep_parameter {
        Some(param) => Chart {
            title: format!("{}: regret vs {param}", table.experiment),
            x_label: param.clone(),
            y_label: "mean regret".into(),
            series: policies
                .iter()
                .map(|p| Series {
                    name: p.to_string(),
                    points: table
                        .cells
                        .iter()
                        .filter(|c| c.policy == *p && c.status == CellStatus::Ok)
                        .map(|c| (c.sweep_value.unwrap_or(f64::NAN), c.mean_regret))
                        .collect(),
                })
                .collect(),
            reference: None,
            markers: true,
        },
        None => {
            let benchmark = table.cells.iter().find(|c| c.status == CellStatus::Ok).map(|c| c.benchmark);
            Chart {
                title: format!("{}: cumulative reward", table.experiment),
                x_label: "round".into(),
                y_label: "mean cumulative reward".into(),
                series: table
                    .cells
                    .iter()
                    .filter(|c| c.status == CellStatus::Ok)
                    .map(|c| {
                        let n = c.mean_curve.len();
                        let stride = n.div_ceil(1000).max(1);
                        let mut points: Vec<(f64, f64)> =
                            (0..n).step_by(stride).map(|t| ((t + 1) as f64, c.mean_curve[t])).collect();
                        if n > 0 && (n - 1) % stride != 0 {
                            points.push((n as f64, c.mean_curve[n - 1]));
                        }
                        Series { name: c.policy.clone(), points }
                    })
                    .collect(),
                reference: benchmark.map(|b| (b, "benchmark".to_string())),
                markers: false,
            }
        }
    }
}

/// Writes `<name>.csv`, `<name>_summary.csv` and `<name>.svg` under `dir`.
pub fn emit_outputs(table: &AggregateTable, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
    if table.cells.is_empty() {
        return Err(config_err("nothing to emit"));
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if format.csv() {
        let long = dir.join(format!("{}.csv", table.experiment));
        write_long_csv(table, std::io::BufWriter::new(std::fs::File::create(&long)?))?;
        let summary = dir.join(format!("{}_summary.csv", table.experiment));
        write_summary_csv(table, std::fs::File::create(&summary)?)?;
        written.push(long);
        written.push(summary);
    }
    if format.svg() {
        let path = dir.join(format!("{}.svg", table.experiment));
        std::fs::write(&path, chart(table).render())?;
        written.push(path);
    }
    Ok(written)
}
