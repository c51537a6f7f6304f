//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use nsbwk_core::algorithms::{run_policy_with, SwUcb, SwUcbConfig};
use nsbwk_core::environments::{build_example, ExampleParams};
use nsbwk_core::lp::{check_lp_sandwich_with, solve_dynamic_lp};
use nsbwk_core::measures::{global_budgets, local_budgets, refined_budgets};
use nsbwk_core::ocowc::{
    build_oco_lower_bound, oco_benchmarks, oco_nonstationarity, random_affine_instance, run_virtual_queue, VqParams,
};
use nsbwk_core::{BwkInstance, OutcomeModel};
use nsbwk_harness::lowerbound::{run_lower_bound_sweep, LowerBoundConfig};
use nsbwk_harness::{emit_outputs, run_experiment, ExperimentConfig, OutputFormat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = (bool, String);

fn example(id: u32, edit: impl FnOnce(&mut ExampleParams)) -> BwkInstance {
    let mut p = ExampleParams::default();
    edit(&mut p);
    build_example(id, &p).unwrap()
}

fn c1_benchmark_exactness() -> Check {
    let mut ok = true;
    let mut parts = Vec::new();
    for (id, expected) in [(1, 5000.0), (2, 5000.0), (3, 2500.0), (4, 3750.0)] {
        let inst = example(id, |_| {});
        let start = Instant::now();
        let value = solve_dynamic_lp(&inst).unwrap().value;
        let secs = start.elapsed().as_secs_f64();
        let rel = (value - expected).abs() / expected;
        ok &= rel <= 1e-6 && secs < 10.0;
        parts.push(format!("ex{id} {value:.6} (rel err {rel:.1e}, {secs:.2}s)"));
    }
    (ok, parts.join("; "))
}

fn random_bwk(rng: &mut ChaCha8Rng) -> BwkInstance {
    let arms = rng.gen_range(1..=3);
    let d = rng.gen_range(1..=2);
    let t = rng.gen_range(2..=50);
    let rewards: Vec<Vec<f64>> = (0..t).map(|_| (0..arms).map(|_| rng.gen::<f64>()).collect()).collect();
    let cons: Vec<Vec<Vec<f64>>> =
        (0..t).map(|_| (0..d).map(|_| (0..arms).map(|_| rng.gen::<f64>()).collect()).collect()).collect();
    let budgets = (0..d).map(|_| rng.gen_range(0.1..1.0) * t as f64).collect();
    BwkInstance::from_rounds(budgets, &rewards, &cons, OutcomeModel::Deterministic, "random").unwrap()
}

fn c2_lp_sandwich() -> Check {
    let mut instances: Vec<BwkInstance> = (1..=4).map(|id| example(id, |_| {})).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    instances.extend((0..50).map(|_| random_bwk(&mut rng)));
    let mut violations = 0;
    let mut worst_price = 0.0f64;
    for inst in &instances {
        let report = check_lp_sandwich_with(inst, 1e-6).unwrap();
        violations += report.violations.len();
        worst_price = worst_price.max(report.qbar_effective / report.price_bound);
    }
    (
        violations == 0,
        format!("{} instances, {violations} violations, max qbar / (1/b) = {worst_price:.4}", instances.len()),
    )
}

fn c3_refined_closed_form() -> Check {
    let t = 100;
    let mut worst = 0.0f64;
    for k in 1..t {
        let mus: Vec<Vec<f64>> = (0..t).map(|s| vec![if s < k { 1.0 } else { 0.0 }]).collect();
        let cs = vec![vec![vec![0.5]]; t];
        let inst = BwkInstance::from_rounds(vec![1.0], &mus, &cs, OutcomeModel::Deterministic, "").unwrap();
        let got = refined_budgets(&inst).unwrap().w1_min;
        worst = worst.max((got - k.min(t - k) as f64).abs());
    }
    (worst <= 1e-9, format!("max |W1min - min(k, T-k)| over k = 1..99: {worst:.1e}"))
}

fn experiment(text: &str) -> nsbwk_harness::AggregateTable {
    run_experiment(&ExperimentConfig::from_toml(text).unwrap()).unwrap()
}

fn example_config(name: &str, id: u32, policies: &[&str], extra: &str) -> String {
    let mut s = format!(
        "name = \"{name}\"\ntrials = 100\nseed = 0\n[instance]\nbuilder = \"example\"\nid = {id}\nhorizon = 10000\n"
    );
    for p in policies {
        s.push_str(&format!("[[policies]]\nkind = \"{p}\"\n"));
    }
    s.push_str(extra);
    s
}

fn c4_reward_ordering() -> Check {
    let all = ["sw_ucb", "naive_ucb", "lagrange"];
    let start = Instant::now();
    let t1 = experiment(&example_config("ex1", 1, &all, ""));
    let secs1 = start.elapsed().as_secs_f64();
    let r = |t: &nsbwk_harness::AggregateTable, p: &str| t.cell(p, None).unwrap().mean_reward;
    let (sw, naive, lag) = (r(&t1, "sw_ucb"), r(&t1, "naive_ucb"), r(&t1, "lagrange"));
    let close = (sw - naive).abs() <= 0.10 * sw.max(naive);
    let above = sw > lag && naive > lag;
    let start = Instant::now();
    let t2 = experiment(&example_config("ex2", 2, &all, ""));
    let secs2 = start.elapsed().as_secs_f64();
    let opt = t2.cell("sw_ucb", None).unwrap().benchmark;
    let margin = (r(&t2, "sw_ucb") - r(&t2, "naive_ucb")) / opt;
    let ok = close && above && margin >= 0.05 && secs1 < 300.0 && secs2 < 300.0;
    (
        ok,
        format!(
            "ex1 sw {sw:.1} naive {naive:.1} lagrange {lag:.1} (within 10%: {close}, both above lagrange: {above}); \
             ex2 (sw - naive) / OPT = {margin:.4} (>= 0.05: {})",
            margin >= 0.05
        ),
    )
}

/// Average regret per distinct measure value, ordered by that value, and the
/// number of decreases between consecutive levels.
fn inversions(mut points: Vec<(f64, f64)>) -> (usize, Vec<(f64, f64)>) {
    points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut levels: Vec<(f64, f64, usize)> = Vec::new();
    for (x, y) in points {
        match levels.last_mut() {
            Some(l) if (l.0 - x).abs() <= 1e-9 * x.abs().max(1.0) => {
                l.1 += y;
                l.2 += 1;
            }
            _ => levels.push((x, y, 1)),
        }
    }
    let avg: Vec<(f64, f64)> = levels.iter().map(|l| (l.0, l.1 / l.2 as f64)).collect();
    let count = avg.windows(2).filter(|w| w[1].1 < w[0].1).count();
    (count, avg)
}

fn c5_regret_trends() -> Check {
    let alphas = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
    let sweep = format!("[sweep]\nparameter = \"alpha\"\nvalues = {alphas:?}\n");
    let t3 = experiment(&example_config("ex3", 3, &["sw_ucb", "lagrange"], &sweep));
    let w_of = |a: f64| {
        let (w1, w2) = global_budgets(&example(3, |p| p.alpha = a));
        w1 + w2
    };
    let sw3: Vec<(f64, f64)> =
        alphas.iter().map(|&a| (w_of(a), t3.cell("sw_ucb", Some(a)).unwrap().mean_regret)).collect();
    let (inv3, levels3) = inversions(sw3);
    let lag: Vec<f64> = alphas.iter().map(|&a| t3.cell("lagrange", Some(a)).unwrap().mean_regret).collect();
    let (lo, hi) = lag.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    let spread = (hi - lo) / hi;

    let periods = [1.0, 2.0, 5.0, 10.0, 25.0, 50.0, 125.0];
    let sweep = format!("[sweep]\nparameter = \"periods\"\nvalues = {periods:?}\n");
    let t4 = experiment(&example_config("ex4", 4, &["sw_ucb"], &sweep));
    let v_of = |p: f64| {
        let (v1, _, v2) = local_budgets(&example(4, |e| e.periods = p as usize));
        v1 + v2
    };
    let sw4: Vec<(f64, f64)> =
        periods.iter().map(|&p| (v_of(p), t4.cell("sw_ucb", Some(p)).unwrap().mean_regret)).collect();
    let (inv4, levels4) = inversions(sw4);

    let fmt = |l: &[(f64, f64)]| l.iter().map(|(x, y)| format!("{x:.1}:{y:.1}")).collect::<Vec<_>>().join(" ");
    let ok = inv3 <= 1 && spread < 0.30 && inv4 <= 1;
    (
        ok,
        format!(
            "ex3 sw regret by W [{}] inversions {inv3} (<= 1: {}); lagrange spread {spread:.3} (< 0.30: {}); \
             ex4 sw regret by V [{}] inversions {inv4} (<= 1: {})",
            fmt(&levels3),
            inv3 <= 1,
            spread < 0.30,
            fmt(&levels4),
            inv4 <= 1
        ),
    )
}

fn c6_concentration() -> Check {
    let t = 200;
    let mu = [0.7, 0.4];
    let c = [0.6, 0.3];
    let inst = BwkInstance::from_rounds(
        vec![0.5 * t as f64],
        &vec![mu.to_vec(); t],
        &vec![vec![c.to_vec()]; t],
        OutcomeModel::Bernoulli,
        "",
    )
    .unwrap();
    let m = inst.num_arms();
    let seeds = 1000;
    let mut failures = 0;
    for seed in 0..seeds {
        let mut policy = SwUcb::new(&inst, SwUcbConfig::hoeffding(t, t)).unwrap();
        let mut failed = false;
        run_policy_with(&inst, &mut policy, &mut ChaCha8Rng::seed_from_u64(seed), |_, p: &SwUcb| {
            for i in 0..2 {
                failed |= p.ucb()[i] < mu[i] || p.lcb()[i] > c[i];
            }
            debug_assert_eq!(p.lcb().len(), m);
        })
        .unwrap();
        failures += failed as usize;
    }
    let rate = failures as f64 / seeds as f64;
    (rate <= 0.01, format!("{failures} of {seeds} runs with a bound violation (rate {rate:.4})"))
}

fn c7_stopping_time() -> Check {
    let cfg = LowerBoundConfig::from_toml(
        "name = \"c7\"\nkind = \"v2\"\narms = 2\nbudget_rate = 0.25\nvariation = 1.0\nhorizons = [1000, 2000, 4000]\ntrials = 50\n",
    )
    .unwrap();
    let sweep = run_lower_bound_sweep(&cfg).unwrap();
    let means: Vec<String> = sweep.summary.iter().map(|s| format!("T={} {:.1}", s.horizon, s.mean_shortfall)).collect();
    (
        sweep.shortfall_slope < 1.0,
        format!("mean T - tau [{}], log-log slope {:.3} (< 1)", means.join(", "), sweep.shortfall_slope),
    )
}

fn c8_regret_scaling() -> Check {
    let cfg = LowerBoundConfig::from_toml(
        "name = \"c8\"\nkind = \"v1\"\narms = 2\nvariation = 1.0\nhorizons = [2000, 4000, 8000]\ntrials = 50\n",
    )
    .unwrap();
    let sweep = run_lower_bound_sweep(&cfg).unwrap();
    let means: Vec<String> = sweep
        .summary
        .iter()
        .map(|s| format!("T={} regret {:.1} V1 {:.2}", s.horizon, s.mean_regret, s.mean_v1))
        .collect();
    (
        sweep.regret_slope <= 0.75,
        format!("[{}], exponent {:.3} (<= 0.75)", means.join(", "), sweep.regret_slope),
    )
}

fn c9_oco_benchmarks() -> Check {
    let (t, r, b, delta) = (10_000usize, 1.0, 0.1, 0.01);
    let inst = build_oco_lower_bound(t, r, b, delta).unwrap();
    let bench = oco_benchmarks(&inst).unwrap();
    let tf = t as f64;
    let opt = bench.per_round_opt.unwrap();
    let opt_r = bench.per_round_opt_restricted.unwrap();
    let want = -tf * r / 2.0;
    let want_r = -(tf / 4.0 * r * b / (b + delta) + tf / 4.0 * r);
    let exact = (opt - want).abs() <= 1e-9 * tf && (opt_r - want_r).abs() <= 1e-9 * tf;

    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let mut bad = 0;
    let mut tightest = f64::INFINITY;
    for _ in 0..50 {
        let n = rng.gen_range(1..=3);
        let d = rng.gen_range(1..=3);
        let horizon = rng.gen_range(5..=30);
        let inst = random_affine_instance(n, d, horizon, &mut rng).unwrap();
        let bench = oco_benchmarks(&inst).unwrap();
        let gap = bench.opt_restricted.value - bench.opt.value;
        let bound = bench.qbar.unwrap() * oco_nonstationarity(&inst);
        let tol = 1e-9 * horizon as f64;
        if gap < -tol || gap > bound + tol {
            bad += 1;
        }
        tightest = tightest.min(bound - gap);
    }
    (
        exact && bad == 0,
        format!(
            "OPT {opt} (want {want}), OPT' {opt_r:.6} (want {want_r:.6}); sandwich failures {bad}/50, min slack {tightest:.3e}"
        ),
    )
}

/// Frozen constant of the cost-regret bound.
const REG1_CONSTANT: f64 = 1.0;

fn c10_oco_scaling() -> Check {
    let (r, b, delta) = (1.0, 0.1, 0.01);
    let qbar = r / b;
    let mut ratios = Vec::new();
    let mut reg1_ok = true;
    let mut parts = Vec::new();
    for t in [1000usize, 4000, 16_000] {
        let inst = build_oco_lower_bound(t, r, b, delta).unwrap();
        let log = run_virtual_queue(&inst, &[0.0], VqParams::literal(t)).unwrap();
        let st = (t as f64).sqrt();
        let w = oco_nonstationarity(&inst);
        reg1_ok &= log.reg1 <= REG1_CONSTANT * st + qbar * w;
        ratios.push(log.reg2 / st);
        parts.push(format!("T={t} Reg2/sqrtT {:.5} Reg1 {:.3} bound {:.1}", log.reg2 / st, log.reg1, REG1_CONSTANT * st + qbar * w));
    }
    let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut alt = Vec::new();
    for t in [1000usize, 4000, 16_000] {
        let inst = build_oco_lower_bound(t, r, b, delta).unwrap();
        let log = run_virtual_queue(&inst, &[0.0], VqParams::regularized(t)).unwrap();
        alt.push(log.reg2 / (t as f64).sqrt());
    }
    let alt_spread = alt.iter().cloned().fold(0.0, f64::max) / alt.iter().cloned().fold(f64::INFINITY, f64::min);
    (
        spread <= 4.0 && reg1_ok,
        format!(
            "literal preset: [{}]; Reg2/sqrtT max/min {spread:.2} (<= 4); Reg1 bound holds: {reg1_ok}; \
             regularized preset Reg2/sqrtT max/min {alt_spread:.2}",
            parts.join(", ")
        ),
    )
}

const DETERMINISM_CONFIG: &str = "name = \"det\"\ntrials = 24\nseed = 5\n[instance]\nbuilder = \"example\"\nid = 2\nhorizon = 2000\noutcome_model = \"bernoulli\"\n";

fn c11_determinism() -> Check {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("det.toml");
    std::fs::write(&cfg_path, DETERMINISM_CONFIG).unwrap();
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "4", "4"].iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let status = Command::new(env!("CARGO_BIN_EXE_nsbwk"))
            .args(["simulate", cfg_path.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "--format", "csv"])
            .env("RAYON_NUM_THREADS", threads)
            .output()
            .unwrap();
        assert!(status.status.success());
        outputs.push((std::fs::read(out.join("det.csv")).unwrap(), std::fs::read(out.join("det_summary.csv")).unwrap()));
    }
    let table = run_experiment(&ExperimentConfig::from_toml(DETERMINISM_CONFIG).unwrap()).unwrap();
    let lib_dir = dir.path().join("lib");
    emit_outputs(&table, &lib_dir, OutputFormat::Csv).unwrap();
    outputs.push((std::fs::read(lib_dir.join("det.csv")).unwrap(), std::fs::read(lib_dir.join("det_summary.csv")).unwrap()));
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    (same, format!("{} runs (1 and 4 threads, CLI and library), {} CSV bytes each, identical: {same}", outputs.len(), outputs[0].0.len()))
}

fn main() {
    let criteria: Vec<(u32, &str, fn() -> Check)> = vec![
        (1, "benchmark exactness", c1_benchmark_exactness),
        (2, "LP sandwich", c2_lp_sandwich),
        (3, "refined measure closed form", c3_refined_closed_form),
        (4, "cumulative reward ordering", c4_reward_ordering),
        (5, "regret trends in W and V", c5_regret_trends),
        (6, "estimator concentration", c6_concentration),
        (7, "stopping-time scaling", c7_stopping_time),
        (8, "regret scaling", c8_regret_scaling),
        (9, "OCO benchmarks", c9_oco_benchmarks),
        (10, "OCO regret scaling", c10_oco_scaling),
        (11, "determinism", c11_determinism),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, check) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(e) => {
                let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
                (false, format!("panicked: {}", msg.unwrap_or_default()))
            }
        };
        let secs = start.elapsed().as_secs_f64();
        println!("criterion {id:>2} {}: {name} [{secs:.1}s] {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
