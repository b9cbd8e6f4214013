//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the test
//! fails if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use spotscale::characterize::{characterize, initial_pod_count};
use spotscale::forecast::{fit, predict_hours, SECONDS_PER_HOUR};
use spotscale::optimize::{allocation_cost, brute_force, nsga2, Nsga2Params, PriceSource};
use spotscale::sim::{compare, run, Policy, Scenario, SimResult};
use spotscale::{
    Allocation, Catalog, InstanceTypeSpec, LoadSample, LoadTestSeries, NodeOverhead, OptimizationProblem, PodSpec,
    PriceQuote, PriceSeries, SloSpec, Thresholds,
};
use spotscale_cli::{dispatch, MANIFEST_FILE};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    check(
        elapsed.as_secs_f64() < limit_s,
        format!("took {:.2}s, limit {limit_s}s", elapsed.as_secs_f64()),
    )
}

fn quote(prices: &[(&str, f64)]) -> PriceQuote {
    let map = prices.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    PriceQuote::new(map, PriceSource::Trace).unwrap()
}

const HOURS_PER_MONTH: f64 = 730.0;

// Published hourly cost table: the multi-type spot cluster against a
// six-node single-type group behind a managed control plane.
fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let ours = Allocation::from_counts([("t3.medium", 8), ("c6a.large", 2), ("t4g.large", 1), ("c6g.xlarge", 1)]);
    let spot = quote(&[("t3.medium", 0.0166), ("c6a.large", 0.0305), ("t4g.large", 0.0268), ("c6g.xlarge", 0.0544)]);
    // two elastic IPs, an on-demand t3.medium and a t2.micro
    let fixed = 0.01 + 0.0416 + 0.0116;
    let ours_hr = allocation_cost(&ours, &spot, fixed).map_err(|e| e.to_string())?;

    let base = Allocation::from_counts([("t4g.large", 1), ("c6g.xlarge", 6)]);
    let base_prices = quote(&[("t4g.large", 0.026), ("c6g.xlarge", 0.0544)]);
    let base_hr = allocation_cost(&base, &base_prices, 0.10).map_err(|e| e.to_string())?;

    let ours_month = ours_hr * HOURS_PER_MONTH;
    let base_month = base_hr * HOURS_PER_MONTH;
    let savings = 100.0 * (1.0 - ours_month / base_month);
    check((ours_hr - 0.3382).abs() <= 1e-4, format!("hourly {ours_hr}"))?;
    check((ours_month - 246.88).abs() <= 0.02, format!("monthly {ours_month}"))?;
    check((base_hr - 0.4524).abs() <= 1e-3, format!("baseline hourly {base_hr}"))?;
    check((base_month - 330.25).abs() <= 0.02, format!("baseline monthly {base_month}"))?;
    check((savings - 25.2).abs() <= 0.1, format!("savings {savings}"))?;
    within(t0.elapsed(), 1.0)?;
    Ok(format!("hourly {ours_hr:.4} vs {base_hr:.4}, monthly {ours_month:.2} vs {base_month:.2}, savings {savings:.2}%"))
}

fn random_problem(rng: &mut ChaCha8Rng) -> OptimizationProblem {
    loop {
        let n = rng.random_range(1..=4);
        let types: Vec<InstanceTypeSpec> = (0..n)
            .map(|i| InstanceTypeSpec {
                name: format!("f{i}.x"),
                family: format!("f{i}"),
                vcpu: rng.random_range(1..=8),
                mem_mib: 1024 * rng.random_range(2..=16),
                on_demand_usd_hr: 0.2,
                zones: vec!["z".into()],
            })
            .collect();
        let prices: BTreeMap<String, f64> = types
            .iter()
            .map(|t| (t.name.clone(), rng.random_range(1..=200) as f64 / 1000.0))
            .collect();
        let catalog = Catalog::new(types, NodeOverhead::none()).unwrap();
        let pod = PodSpec::new(250 * rng.random_range(1..=6), 256 * rng.random_range(1..=8)).unwrap();
        let max = rng.random_range(1..=5);
        let capacity: u32 = catalog
            .types()
            .iter()
            .map(|t| catalog.pods_per_node(&t.name, &pod).unwrap() * max)
            .sum();
        if capacity == 0 {
            continue;
        }
        let required = rng.random_range(1..=capacity);
        let prices = PriceQuote::new(prices, PriceSource::Trace).unwrap();
        return OptimizationProblem::builder(catalog, pod, required, prices).max_per_type(max).build().unwrap();
    }
}

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let trials = 50;
    let (mut same_front, mut same_min) = (0, 0);
    for i in 0..trials {
        let p = random_problem(&mut rng);
        let exact = brute_force(&p).map_err(|e| e.to_string())?;
        let params = Nsga2Params {
            seed: i,
            ..Nsga2Params::default()
        };
        let Ok(approx) = nsga2(&p, &params) else {
            continue;
        };
        if approx.allocations() == exact.allocations() {
            same_front += 1;
        }
        let (a, e) = (approx.min_cost().unwrap(), exact.min_cost().unwrap());
        if (a.objectives.cost_usd_hr - e.objectives.cost_usd_hr).abs() < 1e-12 {
            same_min += 1;
        }
    }
    let detail = format!("front equal {same_front}/{trials}, min-cost equal {same_min}/{trials}");
    check(same_front * 100 >= 95 * trials, detail.clone())?;
    check(same_min == trials, detail.clone())?;
    within(t0.elapsed(), 30.0)?;
    Ok(detail)
}

fn bundled_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/reconstructed-24h")
}

fn bundled_catalog() -> Catalog {
    spotscale::domain::load_catalog(&fs::read_to_string(bundled_dir().join("catalog.csv")).unwrap()).unwrap()
}

fn median_time(reps: usize, mut f: impl FnMut()) -> f64 {
    let mut v: Vec<f64> = (0..reps)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed().as_secs_f64()
        })
        .collect();
    v.sort_by(f64::total_cmp);
    v[reps / 2]
}

fn criterion_3() -> Outcome {
    let catalog = bundled_catalog();
    let prices = quote(&[("t3.medium", 0.0166), ("c6a.large", 0.0305), ("t4g.large", 0.0268), ("c6g.xlarge", 0.0544)]);
    let mut nsga_t = Vec::new();
    let mut brute_t = Vec::new();
    for required in [10u32, 25, 50, 100] {
        let p = OptimizationProblem::builder(catalog.clone(), PodSpec::default(), required, prices.clone())
            .max_per_type(required / 2)
            .build()
            .map_err(|e| e.to_string())?;
        nsga_t.push(median_time(3, || {
            nsga2(&p, &Nsga2Params::default()).unwrap();
        }));
        brute_t.push(median_time(if required >= 100 { 1 } else { 3 }, || {
            brute_force(&p).unwrap();
        }));
    }
    let detail = format!(
        "nsga2 ms {:?}, brute ms {:?}",
        nsga_t.iter().map(|t| (t * 1e3).round()).collect::<Vec<_>>(),
        brute_t.iter().map(|t| (t * 1e3).round()).collect::<Vec<_>>()
    );
    check(nsga_t[3] <= 2.0 * nsga_t[0], format!("nsga2 grew more than 2x: {detail}"))?;
    check(brute_t.windows(2).all(|w| w[1] > w[0]), format!("brute not increasing: {detail}"))?;
    Ok(detail)
}

fn criterion_4() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10_000 {
        let slo = rng.random_range(0.01..1e6);
        let r = rng.random_range(0.01..1e4);
        let n = initial_pod_count(&SloSpec::new(slo).unwrap(), r).map_err(|e| e.to_string())?;
        check(n as f64 * r >= slo, format!("{n} pods at {r} short of {slo}"))?;
        check(n == 1 || (n - 1) as f64 * r < slo, format!("{n} pods at {r} not minimal for {slo}"))?;
    }
    let a = initial_pod_count(&SloSpec::new(50.0).unwrap(), 62.5).unwrap();
    let b = initial_pod_count(&SloSpec::new(50.0).unwrap(), 12.5).unwrap();
    check((a, b) == (1, 4), format!("got {a} and {b}"))?;
    within(t0.elapsed(), 1.0)?;
    Ok("10000 random inputs minimal and sufficient; 50/62.5 -> 1, 50/12.5 -> 4".into())
}

/// Load test with a knee at sample `k`: CPU rises to `k`, then falls by more
/// than the collapse threshold per step while failures climb.
fn planted_curve(rng: &mut ChaCha8Rng, noise: f64) -> (LoadTestSeries, f64, f64) {
    let n = rng.random_range(8..=20);
    let k = rng.random_range(2..n - 2);
    let step = rng.random_range(1..=10) as f64 * 10.0;
    let slope = rng.random_range(5.0..8.0);
    let start = rng.random_range(5.0..15.0);
    let drop = rng.random_range(8.0..12.0);
    let gauss = Normal::new(0.0, noise.max(1e-300)).unwrap();
    let samples = (0..n)
        .map(|i| {
            let clean = if i <= k {
                start + slope * i as f64
            } else {
                start + slope * k as f64 - drop * (i - k) as f64
            };
            let jitter = if noise > 0.0 { gauss.sample(rng) } else { 0.0 };
            LoadSample {
                rps: step * (i + 1) as f64,
                cpu_percent: (clean + jitter).max(0.0),
                failure_rate_percent: if i <= k { 0.0 } else { 3.0 * (i - k) as f64 },
            }
        })
        .collect();
    (LoadTestSeries::new(samples).unwrap(), step * (k + 1) as f64, step)
}

fn criterion_5() -> Outcome {
    let t0 = Instant::now();
    let slo = SloSpec::new(1000.0).unwrap();
    let th = Thresholds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut exact = 0;
    for _ in 0..100 {
        let (s, knee, _) = planted_curve(&mut rng, 0.0);
        let r = characterize(&s, &slo, &th).map_err(|e| e.to_string())?;
        exact += usize::from(r.max_rps_per_pod == knee);
    }
    let mut near = 0;
    for _ in 0..100 {
        let (s, knee, step) = planted_curve(&mut rng, 2.0);
        if let Ok(r) = characterize(&s, &slo, &th) {
            near += usize::from((r.max_rps_per_pod - knee).abs() <= step + 1e-9);
        }
    }
    let detail = format!("noise-free exact {exact}/100, noisy within one step {near}/100");
    check(exact == 100, detail.clone())?;
    check(near >= 95, detail.clone())?;
    within(t0.elapsed(), 5.0)?;
    Ok(detail)
}

const BASE_HOUR: i64 = 473_352; // 2024-01-01T00:00:00Z

fn series(values: &[f64]) -> PriceSeries {
    let pts = values
        .iter()
        .enumerate()
        .map(|(i, &v)| ((BASE_HOUR + i as i64) * SECONDS_PER_HOUR, v))
        .collect();
    PriceSeries::new("a.x", "z", pts).unwrap()
}

fn criterion_6() -> Outcome {
    let t0 = Instant::now();
    let fit_hours = 28 * 24;
    let held = 7 * 24;

    let flat = fit(&series(&vec![0.0305; fit_hours])).map_err(|e| e.to_string())?;
    let f = predict_hours(&flat, BASE_HOUR + fit_hours as i64, held as u32);
    let flat_err = f.points.iter().map(|p| (p.mean - 0.0305).abs()).fold(0.0, f64::max);
    check(flat_err < 1e-12, format!("constant series error {flat_err}"))?;

    let slope = 2.5e-6;
    let line: Vec<f64> = (0..fit_hours).map(|h| 0.02 + slope * h as f64).collect();
    let m = fit(&series(&line)).map_err(|e| e.to_string())?;
    check((m.slope - slope).abs() < 1e-9, format!("slope {} vs {slope}", m.slope))?;

    let sigma = 5e-4;
    let gauss = Normal::new(0.0, sigma).unwrap();
    let (mut covered, mut total, mut worst) = (0usize, 0usize, 0.0f64);
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let truth = |h: usize| {
            let hod = ((BASE_HOUR as usize + h) % 24) as f64;
            0.03 + 1e-6 * h as f64 + 0.003 * (std::f64::consts::TAU * hod / 24.0).sin()
        };
        let all: Vec<f64> = (0..fit_hours + held).map(|h| truth(h) + gauss.sample(&mut rng)).collect();
        let m = fit(&series(&all[..fit_hours])).map_err(|e| e.to_string())?;
        let f = predict_hours(&m, BASE_HOUR + fit_hours as i64, held as u32);
        let actual = &all[fit_hours..];
        let sse: f64 = f.points.iter().zip(actual).map(|(p, a)| (p.mean - a).powi(2)).sum();
        let rmse = (sse / held as f64).sqrt();
        worst = worst.max(rmse / sigma);
        check(rmse <= 1.5 * sigma, format!("seed {seed}: held-out rmse {rmse} > 1.5 sigma"))?;
        covered += f.points.iter().zip(actual).filter(|(p, a)| p.lower95 <= **a && **a <= p.upper95).count();
        total += held;
    }
    let coverage = covered as f64 / total as f64;
    check((0.85..=0.99).contains(&coverage), format!("coverage {coverage}"))?;
    within(t0.elapsed(), 20.0)?;
    Ok(format!("exact on constant and linear series; worst rmse {worst:.3} sigma, coverage {coverage:.3}"))
}

const POOL: [(&str, u32, u64, f64); 4] = [
    ("t3.medium", 2, 4096, 0.0416),
    ("c6a.large", 2, 4096, 0.0765),
    ("t4g.large", 2, 8192, 0.0672),
    ("c6g.xlarge", 4, 8192, 0.136),
];

fn scenario_text(rng: &mut ChaCha8Rng, hours: i64, workload: &str, extra: &str) -> String {
    let n = rng.random_range(2..=4);
    let mut rows = String::new();
    let mut base = String::new();
    for &(name, vcpu, mem, od) in &POOL[..n] {
        let family = name.split('.').next().unwrap();
        rows.push_str(&format!("{name},{family},{vcpu},{mem},{od},z1;z2\n"));
        base.push_str(&format!("\"{name}\" = {}\n", od * rng.random_range(0.25..0.6)));
    }
    format!(
        r#"duration_s = {duration}
[catalog]
csv = """
name,family,vcpu,mem_mib,on_demand_usd_hr,zones
{rows}"""
[prices]
kind = "synthetic"
history_hours = {history}
trend_per_hour = {trend}
seasonal_amplitude = {amp}
noise_sigma = {noise}
seed = {seed}
[prices.base]
{base}
[workload]
points = {workload}
[slo]
min_rps = 100
[pod]
cpu_millicores = 500
mem_mib = 1024
max_rps_per_pod = 60
[optimizer]
algo = "{algo}"
max_per_type = 12
{extra}
"#,
        duration = 3600 * hours,
        history = [0, 48, 240][rng.random_range(0..3)],
        trend = rng.random_range(-1e-3..1e-3),
        amp = rng.random_range(0.0..0.08),
        noise = rng.random_range(0.0..0.03),
        seed = rng.random_range(0..1000),
        algo = ["nsga2", "greedy", "brute_force"][rng.random_range(0..3)],
    )
}

fn load(text: &str) -> Result<Scenario, String> {
    Scenario::from_toml(text, Path::new(".")).map_err(|e| format!("{e}\n{text}"))
}

/// Step integral of the node prices over each billed interval, plus the
/// fixed overhead, computed from the scenario alone.
fn cost_oracle(s: &Scenario, r: &SimResult) -> f64 {
    let price_at = |ty: &str, t: i64| {
        let abs = s.start + t;
        let pts = &s.prices[ty].points;
        pts.iter().take_while(|p| p.0 <= abs).last().unwrap_or(&pts[0]).1
    };
    let nodes: f64 = r
        .nodes
        .iter()
        .filter_map(|n| {
            let (from, to) = (n.ready_at?, n.ended_at.unwrap_or(r.duration_s));
            if r.on_demand_pricing {
                return Some(s.catalog.get(&n.instance_type).unwrap().on_demand_usd_hr * (to - from) as f64 / 3600.0);
            }
            let mut cuts = vec![from, to];
            cuts.extend(
                s.prices[&n.instance_type]
                    .points
                    .iter()
                    .map(|p| p.0 - s.start)
                    .filter(|&t| t > from && t < to),
            );
            cuts.sort();
            Some(
                cuts.windows(2)
                    .map(|w| price_at(&n.instance_type, w[0]) * (w[1] - w[0]) as f64 / 3600.0)
                    .sum::<f64>(),
            )
        })
        .sum();
    nodes + r.fixed_overhead_usd_hr * r.duration_s as f64 / 3600.0
}

fn criterion_7() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let policies = [Policy::Elastic, Policy::BaselineSingleType(None), Policy::BaselineOnDemand(None)];
    let mut worst = 0.0f64;
    for i in 0..20 {
        let hours = rng.random_range(4..=12);
        let steps: Vec<String> = (0..hours)
            .map(|h| format!("[{}, {:.1}]", h * 3600, rng.random_range(100.0..1500.0)))
            .collect();
        let extra = format!(
            "[terminations]\nrate_per_node_hour = {}\nseed = {}",
            rng.random_range(0.0..0.2),
            rng.random_range(0..100)
        );
        let text = scenario_text(&mut rng, hours, &format!("[{}]", steps.join(", ")), &extra);
        let s = load(&text)?;
        let policy = &policies[i % 3];
        let r = run(&s, policy, i as u64).map_err(|e| format!("{policy}: {e}"))?;
        let sum: f64 = r.cost_by_type.values().sum();
        let oracle = cost_oracle(&s, &r);
        let err = (oracle - r.total_cost_usd).abs().max((sum - r.total_cost_usd).abs()) / r.total_cost_usd;
        worst = worst.max(err);
        check(err <= 1e-9, format!("scenario {i} ({policy}): relative cost error {err}"))?;
    }

    let (mut graceful, mut runs) = (0, 0);
    for i in 0..20u64 {
        let rps = rng.random_range(60.0..250.0);
        let events: Vec<String> = (1..=3)
            .map(|k| format!("[{}, \"{}\"]", k * 3600 + rng.random_range(0..600), ["oldest", "newest", "busiest"][rng.random_range(0..3)]))
            .collect();
        let extra = format!("min_nodes = {}\n[terminations]\nevents = [{}]", rng.random_range(4..=6), events.join(", "));
        let text = scenario_text(&mut rng, 6, &format!("[[0, {rps:.1}]]"), &extra);
        let s = load(&text)?;
        for policy in [Policy::Elastic, Policy::BaselineSingleType(None)] {
            let r = run(&s, &policy, i).map_err(|e| format!("{policy}: {e}"))?;
            let mut all_spare = true;
            for rec in &r.reschedules {
                if rec.spare_slots >= rec.victim_pods {
                    graceful += 1;
                    check(rec.unplaced == 0, format!("scenario {i} ({policy}) left pods unplaced: {rec:?}"))?;
                    check(rec.pods_after == rec.pods_before, format!("scenario {i} ({policy}) lost pods: {rec:?}"))?;
                } else {
                    all_spare = false;
                }
            }
            if all_spare {
                runs += 1;
                check(r.slo_violation_s == 0, format!("scenario {i} ({policy}): {}s of violation", r.slo_violation_s))?;
            }
        }
    }
    check(graceful >= 20, format!("only {graceful} notices had spare capacity"))?;
    within(t0.elapsed(), 30.0)?;
    Ok(format!(
        "cost identity worst {worst:.1e} over 20 runs; {graceful} notices with spare capacity all placed, {runs} runs with zero violation"
    ))
}

fn criterion_8() -> Outcome {
    let t0 = Instant::now();
    let s = Scenario::from_file(&bundled_dir().join("scenario.toml")).map_err(|e| e.to_string())?;
    let report = compare(&s, 0).map_err(|e| e.to_string())?;
    let e = &report.elastic;
    let single = report
        .baselines
        .iter()
        .find(|b| b.policy.starts_with("baseline_single_type"))
        .ok_or("no single-type baseline")?;
    let savings = 100.0 * (1.0 - e.total_cost_usd / single.total_cost_usd);
    let detail = format!(
        "elastic {:.4} vs single-type {:.4}, savings {savings:.2}% ({} 20%), elastic violation {}s",
        e.total_cost_usd,
        single.total_cost_usd,
        if savings >= 20.0 { "at least" } else { "below" },
        e.slo_violation_s
    );
    check(e.total_cost_usd < single.total_cost_usd, detail.clone())?;
    check(e.slo_violation_s == 0, detail.clone())?;
    within(t0.elapsed(), 60.0)?;
    Ok(detail)
}

fn cli(args: &[&str]) -> Result<(), String> {
    let (mut o, mut e) = (Vec::new(), Vec::new());
    let code = dispatch(std::iter::once("spotscale").chain(args.iter().copied()), &mut o, &mut e);
    check(code == 0, format!("{args:?} exited {code}: {}", String::from_utf8_lossy(&e)))
}

/// sha256 of every output file except the manifest, keyed by relative path.
fn digest_dir(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != MANIFEST_FILE {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, hex::encode(Sha256::digest(fs::read(&p).unwrap())));
            }
        }
    }
    out
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = tmp.path();
    let mut lt = String::from("rps,cpu_percent,failure_rate_percent\n");
    for (i, (cpu, fail)) in [10, 24, 38, 52, 66, 80, 74, 68, 64, 60].iter().zip([0, 0, 0, 0, 0, 0, 3, 6, 9, 12]).enumerate() {
        lt.push_str(&format!("{},{cpu},{fail}\n", 10 * (i + 1)));
    }
    fs::write(d.join("loadtest.csv"), lt).unwrap();
    let mut hist = String::from("timestamp,instance_type,zone,usd_per_hour\n");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for h in 0..24 * 30 {
        let ts = chrono::DateTime::from_timestamp((BASE_HOUR + h) * SECONDS_PER_HOUR, 0).unwrap();
        for (ty, base) in [("t3.medium", 0.0166), ("c6a.large", 0.0305), ("t4g.large", 0.0268), ("c6g.xlarge", 0.0544)] {
            let p = base * (1.0 + 0.05 * ((h % 24) as f64 / 24.0 * std::f64::consts::TAU).sin() + rng.random_range(-0.02..0.02));
            hist.push_str(&format!("{},{ty},us-east-1a,{p:.6}\n", ts.format("%Y-%m-%dT%H:%M:%SZ")));
        }
    }
    fs::write(d.join("history.csv"), hist).unwrap();
    let p = |name: &str| d.join(name).to_string_lossy().into_owned();
    let catalog = bundled_dir().join("catalog.csv").to_string_lossy().into_owned();
    let scenario = bundled_dir().join("scenario.toml").to_string_lossy().into_owned();
    let (lt, hist) = (p("loadtest.csv"), p("history.csv"));

    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("characterize", vec!["characterize", "--loadtest", &lt, "--slo-rps", "1000"]),
        ("forecast", vec!["forecast", "--history", &hist, "--type", "t3.medium", "--zone", "us-east-1a", "--horizon", "24"]),
        ("optimize", vec![
            "optimize", "--catalog", &catalog, "--pods", "40", "--prices", &hist, "--forecast", "--algo", "nsga2",
            "--max-per-type", "12", "--seed", "11",
        ]),
        ("simulate", vec!["simulate", "--scenario", &scenario, "--policy", "elastic", "--seed", "3"]),
        ("compare", vec!["compare", "--scenario", &scenario, "--seed", "3"]),
    ];
    let mut lines = Vec::new();
    for (name, args) in commands {
        let first = d.join(format!("{name}-0"));
        let mut argv = args.clone();
        let first_s = first.to_string_lossy().into_owned();
        argv.extend(["--out", &first_s, "--quiet"]);
        cli(&argv)?;
        let reference = digest_dir(&first);
        check(!reference.is_empty(), format!("{name} wrote no outputs"))?;
        let manifest = first.join(MANIFEST_FILE).to_string_lossy().into_owned();
        for k in 1..=3 {
            let again = d.join(format!("{name}-{k}")).to_string_lossy().into_owned();
            cli(&["rerun", "--manifest", &manifest, "--out", &again, "--quiet"])?;
            let got = digest_dir(Path::new(&again));
            check(got == reference, format!("{name} rerun {k} differs"))?;
        }
        lines.push(format!("{name} ({} files)", reference.len()));
    }
    Ok(format!("3 reruns byte-identical: {}", lines.join(", ")))
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 9] = [
        (1, "cost table reproduction", criterion_1),
        (2, "nsga2 front matches exhaustive search", criterion_2),
        (3, "optimizer scaling", criterion_3),
        (4, "initial pod count", criterion_4),
        (5, "load-curve knee detection", criterion_5),
        (6, "price forecaster", criterion_6),
        (7, "simulator cost conservation and graceful termination", criterion_7),
        (8, "bundled scenario savings", criterion_8),
        (9, "rerun determinism", criterion_9),
    ];
    let mut failed = Vec::new();
    for (n, name, f) in criteria {
        match f() {
            Ok(detail) => println!("criterion {n} ({name}): PASS: {detail}"),
            Err(detail) => {
                println!("criterion {n} ({name}): FAIL: {detail}");
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
