use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::DateTime;

use spotscale::autoscale::AutoscaleError;
use spotscale::characterize::{self, CharacterizeError, Thresholds};
use spotscale::domain::{self, DomainError, PodSpec, PriceSeries, SloSpec};
use spotscale::forecast::{self, ForecastError};
use spotscale::optimize::{
    brute_force, greedy, nsga2, select_allocation, FrontMember, Nsga2Params, OptimizationProblem, OptimizeError,
    ParetoFront, PriceQuote, PriceSource, SelectionPolicy,
};
use spotscale::sim::{self, Policy, Scenario, SimError};

use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::report::{self, money, unit_price};
use crate::{CliError, Command, Global, OptimizeArgs};

const FORECAST_WINDOW_S: i64 = 90 * 24 * 3600;

impl From<DomainError> for CliError {
    fn from(e: DomainError) -> Self {
        let cat = match e {
            DomainError::Parse { .. } | DomainError::Ordering { .. } => "parse",
            DomainError::Validation(_) => "validation",
        };
        CliError::new(cat, e.to_string())
    }
}

impl From<CharacterizeError> for CliError {
    fn from(e: CharacterizeError) -> Self {
        let cat = match e {
            CharacterizeError::NoSustainableLoad => "infeasible",
            CharacterizeError::InvalidInput(_) => "validation",
        };
        CliError::new(cat, e.to_string())
    }
}

impl From<ForecastError> for CliError {
    fn from(e: ForecastError) -> Self {
        CliError::new("validation", e.to_string())
    }
}

impl From<OptimizeError> for CliError {
    fn from(e: OptimizeError) -> Self {
        let cat = match e {
            OptimizeError::Infeasible(_) | OptimizeError::NoFeasibleFound { .. } | OptimizeError::EmptyFront => "infeasible",
            OptimizeError::UnpricedType(_) | OptimizeError::SearchSpaceTooLarge { .. } | OptimizeError::InvalidProblem(_) => {
                "validation"
            }
        };
        let detail = match e {
            OptimizeError::Infeasible(m) => m,
            other => other.to_string(),
        };
        CliError::new(cat, detail)
    }
}

impl From<AutoscaleError> for CliError {
    fn from(e: AutoscaleError) -> Self {
        CliError::new("validation", e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Io(d) => CliError::new("io", d),
            SimError::Infeasible(m) => CliError::new("infeasible", m),
            SimError::Domain(d) => d.into(),
            SimError::Characterize(c) => c.into(),
            SimError::Optimize(o) => o.into(),
            SimError::Autoscale(a) => a.into(),
            SimError::Scenario(_) | SimError::OutOfRange { .. } => CliError::new("validation", e.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

fn canonical(path: &Path) -> Result<PathBuf, CliError> {
    std::fs::canonicalize(path).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))
}

/// Resolves input paths so the manifest is independent of the working
/// directory. Returns the command and its input files.
fn resolve(cmd: &Command) -> Result<(Command, Vec<PathBuf>), CliError> {
    let mut cmd = cmd.clone();
    let inputs = match &mut cmd {
        Command::Characterize(a) => {
            a.loadtest = canonical(&a.loadtest)?;
            vec![a.loadtest.clone()]
        }
        Command::Forecast(a) => {
            a.history = canonical(&a.history)?;
            vec![a.history.clone()]
        }
        Command::Optimize(a) => {
            a.catalog = canonical(&a.catalog)?;
            let mut v = vec![a.catalog.clone()];
            if a.prices != "on-demand" {
                let p = canonical(Path::new(&a.prices))?;
                a.prices = p.to_string_lossy().into_owned();
                v.push(p);
            }
            v
        }
        Command::Simulate(a) => {
            a.scenario = canonical(&a.scenario)?;
            vec![a.scenario.clone()]
        }
        Command::Compare(a) => {
            a.scenario = canonical(&a.scenario)?;
            vec![a.scenario.clone()]
        }
        Command::Rerun(_) => Vec::new(),
    };
    Ok((cmd, inputs))
}

pub fn execute(cmd: &Command, g: &Global, stdout: &mut dyn Write) -> Result<(), CliError> {
    if let Command::Rerun(a) = cmd {
        let m = RunManifest::load(&a.manifest)?;
        m.verify()?;
        let out = g
            .out
            .clone()
            .or_else(|| a.manifest.parent().map(Path::to_path_buf))
            .unwrap_or_else(|| PathBuf::from("."));
        let g = Global {
            seed: m.seed,
            out: Some(out),
            quiet: g.quiet,
        };
        return execute(&m.command, &g, stdout);
    }

    let (cmd, inputs) = resolve(cmd)?;
    let mut text = String::new();
    let outcome = match &cmd {
        Command::Characterize(a) => characterize_cmd(a, g, &mut text),
        Command::Forecast(a) => forecast_cmd(a, g, &mut text),
        Command::Optimize(a) => optimize_cmd(a, g, &mut text),
        Command::Simulate(a) => simulate_cmd(&a.scenario, &a.policy, g, &mut text),
        Command::Compare(a) => compare_cmd(&a.scenario, g, &mut text),
        Command::Rerun(_) => unreachable!("handled above"),
    };
    if !g.quiet {
        stdout
            .write_all(text.as_bytes())
            .map_err(|e| CliError::new("io", format!("stdout: {e}")))?;
    }
    if let Some(dir) = &g.out {
        let m = RunManifest::new(&cmd, g.seed, &inputs)?;
        report::write(dir, MANIFEST_FILE, &m.to_toml()?)?;
    }
    outcome
}

fn require_out(g: &Global, what: &str) -> Result<PathBuf, CliError> {
    g.out
        .clone()
        .ok_or_else(|| CliError::new("usage", format!("{what} needs --out <dir>")))
}

fn characterize_cmd(a: &crate::CharacterizeArgs, g: &Global, text: &mut String) -> Result<(), CliError> {
    let series = domain::load_loadtest::<f64>(&read(&a.loadtest)?)?;
    let slo = SloSpec::new(a.slo_rps)?;
    let th = Thresholds {
        failure_threshold_pct: a.failure_threshold,
        cpu_drop_pct: a.cpu_drop,
    };
    let r = characterize::characterize(&series, &slo, &th)?;
    let _ = writeln!(text, "samples: {}", series.len());
    let _ = writeln!(
        text,
        "inflection at sample {} (failure threshold {}%, cpu drop {} pp)",
        r.inflection_index, r.failure_threshold_used, a.cpu_drop
    );
    let _ = writeln!(text, "max rps per pod: {}", r.max_rps_per_pod);
    let _ = writeln!(text, "initial pods for {} rps: {}", a.slo_rps, r.initial_pods);
    let row = format!("max_rps,initial_pods\n{},{}\n", r.max_rps_per_pod, r.initial_pods);
    text.push_str(&row);
    if let Some(dir) = &g.out {
        report::write(dir, "characterization.csv", &row)?;
    }
    Ok(())
}

fn iso(ts: i64) -> String {
    DateTime::from_timestamp(ts, 0)
        .map(|d| d.format("%Y-%m-%dT%H:%M:%SZ").to_string())
        .unwrap_or_else(|| ts.to_string())
}

fn forecast_cmd(a: &crate::ForecastArgs, g: &Global, text: &mut String) -> Result<(), CliError> {
    let all = domain::load_price_history::<f64>(&read(&a.history)?)?;
    let series = all
        .iter()
        .find(|s| s.instance_type == a.instance_type && s.zone == a.zone)
        .ok_or_else(|| CliError::new("validation", format!("no price series for {}/{}", a.instance_type, a.zone)))?;
    let model = forecast::fit(series)?;
    let fc = forecast::predict(&model, a.horizon)?;
    let mut rows = String::from("timestamp,mean,lower95,upper95\n");
    for p in &fc.points {
        let _ = writeln!(rows, "{},{},{},{}", iso(p.timestamp), unit_price(p.mean), unit_price(p.lower95), unit_price(p.upper95));
    }
    text.push_str(&rows);
    if let Some(dir) = &g.out {
        report::write(dir, "forecast.csv", &rows)?;
        let params = report::key_values(&[
            ("instance_type", model.instance_type.clone()),
            ("zone", model.zone.clone()),
            ("slope_usd_hr_per_hour", format!("{:.9}", model.slope)),
            ("residual_sigma", unit_price(model.residual_sigma)),
            ("fitted_from", iso(model.fitted_range.0)),
            ("fitted_to", iso(model.fitted_range.1)),
        ]);
        report::write(dir, "model.csv", &params)?;
    }
    Ok(())
}

/// Trailing-window forecast of the next hour's mean for one series.
fn next_hour_mean(series: &PriceSeries<f64>, at: i64) -> Result<f64, CliError> {
    let lo = series.points.partition_point(|p| p.0 < at - FORECAST_WINDOW_S);
    let hi = series.points.partition_point(|p| p.0 <= at);
    let window = PriceSeries::new(series.instance_type.clone(), series.zone.clone(), series.points[lo..hi].to_vec())?;
    let model = forecast::fit(&window)?;
    Ok(forecast::predict_hours(&model, at.div_euclid(3600) + 1, 1).points[0].mean)
}

fn quote(a: &OptimizeArgs, catalog: &domain::Catalog<f64>) -> Result<PriceQuote<f64>, CliError> {
    if a.prices == "on-demand" {
        return Ok(PriceQuote::on_demand(catalog)?);
    }
    let all = domain::load_price_history::<f64>(&read(Path::new(&a.prices))?)?;
    let at = match &a.at {
        Some(s) => Some(domain::parse_timestamp(s).ok_or_else(|| CliError::new("validation", format!("invalid --at '{s}'")))?),
        None => None,
    };
    let mut prices: BTreeMap<String, f64> = BTreeMap::new();
    for s in &all {
        if catalog.get(&s.instance_type).is_none() {
            continue;
        }
        let t = at.unwrap_or_else(|| s.points.last().map(|p| p.0).unwrap_or(0));
        let p = if a.forecast {
            next_hour_mean(s, t)?
        } else {
            s.price_at(t).unwrap_or(f64::NAN)
        };
        // cheapest zone wins
        let e = prices.entry(s.instance_type.clone()).or_insert(p);
        *e = e.min(p);
    }
    let source = if a.forecast { PriceSource::SpotForecast } else { PriceSource::Trace };
    Ok(PriceQuote::new(prices, source)?)
}

fn front_csv(front: &ParetoFront<f64>) -> String {
    let mut s = String::from("cost_usd_hr,node_count,allocation\n");
    for m in front.members() {
        let _ = writeln!(s, "{},{},{}", money(m.objectives.cost_usd_hr), m.objectives.node_count, m.allocation);
    }
    s
}

fn optimize_cmd(a: &OptimizeArgs, g: &Global, text: &mut String) -> Result<(), CliError> {
    let catalog = domain::load_catalog::<f64>(&read(&a.catalog)?)?;
    let pod = PodSpec::new(a.pod_cpu, a.pod_mem)?;
    let prices = quote(a, &catalog)?;
    let run = || -> Result<ParetoFront<f64>, CliError> {
        let problem = OptimizationProblem::builder(catalog.clone(), pod, a.pods, prices.clone())
            .exclude(a.exclude.iter().cloned())
            .max_per_type(a.max_per_type)
            .fixed_overhead(a.fixed_overhead)
            .build()?;
        Ok(match a.algo.as_str() {
            "brute" => brute_force(&problem)?,
            "greedy" => {
                let (allocation, objectives) = greedy(&problem)?;
                ParetoFront::from_candidates([FrontMember { allocation, objectives }])
            }
            "nsga2" => nsga2(
                &problem,
                &Nsga2Params {
                    population: a.population,
                    generations: a.generations,
                    seed: g.seed,
                    ..Nsga2Params::default()
                },
            )?,
            other => {
                return Err(CliError::new(
                    "validation",
                    format!("unknown algorithm '{other}' (expected brute, greedy or nsga2)"),
                ))
            }
        })
    };
    let policy = SelectionPolicy {
        min_nodes: a.min_nodes,
        ..SelectionPolicy::default()
    };
    let selected = run().and_then(|front| {
        let sel = select_allocation(&front, &policy, &catalog)?;
        Ok((front, sel))
    });
    match selected {
        Ok((front, sel)) => {
            let rows = front_csv(&front);
            text.push_str(&rows);
            let m = front.members().iter().find(|m| m.allocation == sel).expect("selection comes from the front");
            let sel_row = format!(
                "cost_usd_hr,node_count,allocation\n{},{},{}\n",
                money(m.objectives.cost_usd_hr),
                m.objectives.node_count,
                sel
            );
            let _ = writeln!(text, "selected: {sel}");
            if let Some(dir) = &g.out {
                report::write(dir, "front.csv", &rows)?;
                report::write(dir, "selected.csv", &sel_row)?;
                report::write(dir, "summary.csv", &report::key_values(&[("status", "ok".into()), ("front_size", front.len().to_string())]))?;
            }
            Ok(())
        }
        Err(e) => {
            if let Some(dir) = &g.out {
                let status = if e.code == 2 { "infeasible" } else { "error" };
                report::write(dir, "summary.csv", &report::key_values(&[("status", status.into()), ("detail", e.detail.clone())]))?;
            }
            Err(e)
        }
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    Ok(Scenario::from_file(path)?)
}

fn human_summary(text: &mut String, r: &sim::SimResult) {
    let _ = writeln!(
        text,
        "{}: total {} usd, slo violation {} s, terminations {}/{} handled, {} reoptimizations",
        r.policy,
        money(r.total_cost_usd),
        r.slo_violation_s,
        r.terminations_handled,
        r.terminations_injected,
        r.reoptimizations
    );
}

fn simulate_cmd(scenario: &Path, policy: &str, g: &Global, text: &mut String) -> Result<(), CliError> {
    let out = require_out(g, "simulate")?;
    let policy: Policy = policy.parse().map_err(|e: String| CliError::new("validation", e))?;
    let s = load_scenario(scenario)?;
    let r = sim::run(&s, &policy, g.seed)?;
    report::emit_sim(&out, &r)?;
    human_summary(text, &r);
    Ok(())
}

fn compare_cmd(scenario: &Path, g: &Global, text: &mut String) -> Result<(), CliError> {
    let out = require_out(g, "compare")?;
    let s = load_scenario(scenario)?;
    let report = sim::compare(&s, g.seed)?;
    let mut savings = String::from("policy,total_cost_usd,slo_violation_s,savings_pct\n");
    let _ = writeln!(
        savings,
        "{},{},{},0.00",
        report.elastic.policy,
        money(report.elastic.total_cost_usd),
        report.elastic.slo_violation_s
    );
    for r in std::iter::once(&report.elastic).chain(&report.baselines) {
        let dir = out.join(r.policy.split(':').next().unwrap_or(&r.policy));
        report::emit_sim(&dir, r)?;
        human_summary(text, r);
    }
    for (b, (_, pct)) in report.baselines.iter().zip(report.savings()) {
        let _ = writeln!(savings, "{},{},{},{}", b.policy, money(b.total_cost_usd), b.slo_violation_s, spotscale::format_money(pct * 100.0, 2));
        let _ = writeln!(text, "savings vs {}: {}%", b.policy, spotscale::format_money(pct * 100.0, 2));
    }
    report::write(&out, "savings.csv", &savings)
}
