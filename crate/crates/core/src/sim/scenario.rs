//! Scenario documents (TOML) and their resolution into a runnable [`Scenario`].
//!
//! ```toml
//! duration_s = 86400
//! start = "2024-03-01T00:00:00Z"      # wall-clock instant of sim time 0
//!
//! [catalog]
//! file = "catalog.csv"                # or `csv = """..."""`
//! overhead_cpu_fraction = 0.10
//! overhead_mem_mib = 512
//!
//! [prices]
//! kind = "synthetic"                  # or "trace" with `file = "prices.csv"`
//! base_fraction = 0.4                 # of on-demand, for types without a base
//! trend_per_hour = 0.0                # relative drift per hour
//! seasonal_amplitude = 0.05           # relative daily swing
//! noise_sigma = 0.01                  # relative Gaussian noise
//! seed = 1
//! history_hours = 2160
//! [prices.base]
//! "t3.medium" = 0.0166
//!
//! [workload]
//! points = [[0, 1800.0], [3600, 2100.0]]   # or `file = "workload.csv"`
//!
//! [slo]
//! min_rps = 1000
//!
//! [pod]
//! cpu_millicores = 500
//! mem_mib = 1024
//! max_rps_per_pod = 60                # or `loadtest = "loadtest.csv"`
//!
//! [scaler]                            # every key optional
//! [optimizer]                         # every key optional
//! [baseline]                          # every key optional
//!
//! [terminations]
//! events = [[3600, "type:t3.medium"], [7200, "busiest"]]
//! # or: rate_per_node_hour = 0.02, seed = 3
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use super::SimError;
use crate::autoscale::ScalerConfig;
use crate::characterize::{self, Thresholds};
use crate::domain::{self, Catalog, NodeOverhead, PodSpec, PriceSeries, SloSpec};
use crate::optimize::{Nsga2Params, SelectionPolicy, DEFAULT_MAX_PER_TYPE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    BruteForce,
    Greedy,
    Nsga2,
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "brute" | "brute_force" => Ok(Algorithm::BruteForce),
            "greedy" => Ok(Algorithm::Greedy),
            "nsga2" => Ok(Algorithm::Nsga2),
            other => Err(format!("unknown algorithm '{other}' (expected brute, greedy or nsga2)")),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::BruteForce => "brute",
            Algorithm::Greedy => "greedy",
            Algorithm::Nsga2 => "nsga2",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSettings {
    pub algorithm: Algorithm,
    pub nsga: Nsga2Params,
    pub max_per_type: u32,
    pub fixed_overhead_usd_hr: f64,
    pub selection: SelectionPolicy,
    /// Price the optimizer with hourly forecasts rather than the live price.
    pub use_forecast: bool,
    pub bid_margin: f64,
    pub bid_cap: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            algorithm: Algorithm::Nsga2,
            nsga: Nsga2Params::default(),
            max_per_type: DEFAULT_MAX_PER_TYPE,
            fixed_overhead_usd_hr: 0.0632,
            selection: SelectionPolicy::default(),
            use_forecast: true,
            bid_margin: 0.05,
            bid_cap: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineSettings {
    /// Node group type for the single-type baseline; `None` picks the
    /// type with the most pod slots.
    pub instance_type: Option<String>,
    /// Node group type for the on-demand baseline; `None` picks the
    /// cheapest on-demand price per pod slot.
    pub on_demand_type: Option<String>,
    pub overhead_usd_hr: f64,
}

impl Default for BaselineSettings {
    fn default() -> Self {
        BaselineSettings {
            instance_type: None,
            on_demand_type: None,
            overhead_usd_hr: 0.10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeSelector {
    Node(u64),
    /// Oldest serving node of the type.
    Type(String),
    Oldest,
    Newest,
    /// Node hosting the most pods.
    Busiest,
}

impl std::str::FromStr for NodeSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(id) = s.strip_prefix("node:") {
            return id.parse().map(NodeSelector::Node).map_err(|_| format!("bad node id in '{s}'"));
        }
        if let Some(t) = s.strip_prefix("type:") {
            return Ok(NodeSelector::Type(t.to_owned()));
        }
        match s {
            "oldest" | "any" => Ok(NodeSelector::Oldest),
            "newest" => Ok(NodeSelector::Newest),
            "busiest" => Ok(NodeSelector::Busiest),
            _ => Err(format!("unknown node selector '{s}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum TerminationSpec {
    #[default]
    None,
    Explicit(Vec<(i64, NodeSelector)>),
    Stochastic { rate_per_node_hour: f64, seed: u64 },
}

/// Parameters of the synthetic spot-price generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPrices {
    pub base: BTreeMap<String, f64>,
    pub base_fraction: f64,
    pub trend_per_hour: f64,
    pub seasonal_amplitude: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub history_hours: u32,
}

impl Default for SyntheticPrices {
    fn default() -> Self {
        SyntheticPrices {
            base: BTreeMap::new(),
            base_fraction: 0.4,
            trend_per_hour: 0.0,
            seasonal_amplitude: 0.0,
            noise_sigma: 0.0,
            seed: 0,
            history_hours: 90 * 24,
        }
    }
}

impl SyntheticPrices {
    /// Hourly series per catalog type covering
    /// `[start - history_hours, start + duration_s]`. Price is
    /// `base × (1 + trend·h + amplitude·sin(2π·hod/24 + phase) + noise)`
    /// with `h` hours since `start`, floored at 5% of base.
    pub fn generate(&self, catalog: &Catalog<f64>, start: i64, duration_s: i64) -> Vec<PriceSeries<f64>> {
        let n = catalog.types().len().max(1) as f64;
        let first_hour = start.div_euclid(3600) - self.history_hours as i64;
        let last_hour = (start + duration_s).div_euclid(3600);
        catalog
            .types()
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let base = self.base.get(&t.name).copied().unwrap_or(t.on_demand_usd_hr * self.base_fraction);
                let phase = 2.0 * PI * i as f64 / n;
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(i as u64));
                let noise = Normal::new(0.0, self.noise_sigma.max(0.0)).expect("sigma >= 0");
                let points = (first_hour..=last_hour)
                    .map(|hour| {
                        let h = (hour * 3600 - start) as f64 / 3600.0;
                        let hod = hour.rem_euclid(24) as f64;
                        let e = if self.noise_sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
                        let rel = 1.0 + self.trend_per_hour * h + self.seasonal_amplitude * (2.0 * PI * hod / 24.0 + phase).sin() + e;
                        (hour * 3600, base * rel.max(0.05))
                    })
                    .collect();
                PriceSeries::new(t.name.clone(), t.zones[0].clone(), points).expect("generated series is ordered and positive")
            })
            .collect()
    }
}

/// A fully resolved simulation input.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub catalog: Catalog<f64>,
    /// Spot price per instance type (one zone each), in absolute time.
    pub prices: BTreeMap<String, PriceSeries<f64>>,
    /// Wall-clock unix time of simulated t = 0.
    pub start: i64,
    pub duration_s: i64,
    /// (sim seconds, offered rps), step-interpolated.
    pub workload: Vec<(i64, f64)>,
    pub slo: SloSpec<f64>,
    pub pod: PodSpec,
    pub max_rps_per_pod: f64,
    pub scaler: ScalerConfig<f64>,
    pub optimizer: OptimizerSettings,
    pub baseline: BaselineSettings,
    pub terminations: TerminationSpec,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), SimError> {
        let err = |m: String| Err(SimError::Scenario(m));
        if self.duration_s <= 0 {
            return err("duration_s must be > 0".into());
        }
        match self.workload.first() {
            None => return err("workload trace is empty".into()),
            Some(&(t, _)) if t > 0 => return err("workload trace must start at or before t = 0".into()),
            _ => {}
        }
        if self.workload.windows(2).any(|w| w[1].0 <= w[0].0) {
            return err("workload times must strictly increase".into());
        }
        if self.workload.iter().any(|&(_, r)| !(r >= 0.0) || !r.is_finite()) {
            return err("offered rps must be >= 0".into());
        }
        if self.workload.last().map(|w| w.0).unwrap_or(0) > self.duration_s {
            return err("duration_s does not cover the workload trace".into());
        }
        if !(self.max_rps_per_pod > 0.0) {
            return err("max_rps_per_pod must be > 0".into());
        }
        for t in self.catalog.types() {
            if !self.prices.contains_key(&t.name) {
                return err(format!("no price series for instance type '{}'", t.name));
            }
        }
        self.scaler.validate().map_err(|e| SimError::Scenario(e.to_string()))?;
        if self.catalog.types().iter().all(|t| domain::pods_per_node(t, &self.pod, &self.catalog.overhead()) == 0) {
            return Err(SimError::Infeasible("pod fits on no catalog instance type".into()));
        }
        for name in [&self.baseline.instance_type, &self.baseline.on_demand_type].into_iter().flatten() {
            if self.catalog.get(name).is_none() {
                return err(format!("baseline type '{name}' is not in the catalog"));
            }
        }
        if let TerminationSpec::Stochastic { rate_per_node_hour, .. } = self.terminations {
            if !(rate_per_node_hour >= 0.0) {
                return err("termination rate must be >= 0".into());
            }
        }
        Ok(())
    }

    /// Spot price of `instance_type` at simulated time `t`.
    pub fn price_at(&self, instance_type: &str, t: i64) -> f64 {
        self.prices
            .get(instance_type)
            .and_then(|s| s.price_at(self.start + t))
            .unwrap_or(f64::NAN)
    }

    /// Loads and resolves a scenario file; relative paths inside it are
    /// taken relative to the file's directory.
    pub fn from_file(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &dir)
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, SimError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| SimError::Scenario(e.to_string()))?;
        raw.resolve(base_dir)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    duration_s: i64,
    start: Option<String>,
    catalog: RawCatalog,
    prices: RawPrices,
    workload: RawWorkload,
    slo: RawSlo,
    pod: RawPod,
    #[serde(default)]
    scaler: RawScaler,
    #[serde(default)]
    optimizer: RawOptimizer,
    #[serde(default)]
    baseline: RawBaseline,
    #[serde(default)]
    terminations: RawTerminations,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCatalog {
    file: Option<PathBuf>,
    csv: Option<String>,
    overhead_cpu_fraction: Option<f64>,
    overhead_mem_mib: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrices {
    kind: String,
    file: Option<PathBuf>,
    #[serde(default)]
    base: BTreeMap<String, f64>,
    base_fraction: Option<f64>,
    trend_per_hour: Option<f64>,
    seasonal_amplitude: Option<f64>,
    noise_sigma: Option<f64>,
    seed: Option<u64>,
    history_hours: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWorkload {
    points: Option<Vec<(i64, f64)>>,
    file: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSlo {
    min_rps: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPod {
    cpu_millicores: u32,
    mem_mib: u64,
    max_rps_per_pod: Option<f64>,
    loadtest: Option<PathBuf>,
    failure_threshold: Option<f64>,
    cpu_drop: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScaler {
    scale_up_util: Option<f64>,
    scale_down_util: Option<f64>,
    target_util: Option<f64>,
    poll_interval_s: Option<i64>,
    sustain_polls: Option<u32>,
    provisioning_delay_s: Option<i64>,
    termination_notice_s: Option<i64>,
    exclusion_cooldown_s: Option<i64>,
    min_pods: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    algo: Option<String>,
    population: Option<usize>,
    generations: Option<usize>,
    crossover_p: Option<f64>,
    mutation_p: Option<f64>,
    max_per_type: Option<u32>,
    fixed_overhead_usd_hr: Option<f64>,
    min_nodes: Option<u32>,
    prefer_diversity: Option<bool>,
    use_forecast: Option<bool>,
    bid_margin: Option<f64>,
    bid_cap: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBaseline {
    instance_type: Option<String>,
    on_demand_type: Option<String>,
    overhead_usd_hr: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerminations {
    events: Option<Vec<(i64, String)>>,
    rate_per_node_hour: Option<f64>,
    seed: Option<u64>,
}

fn read(base: &Path, file: &Path) -> Result<String, SimError> {
    let p = base.join(file);
    std::fs::read_to_string(&p).map_err(|e| SimError::Io(format!("{}: {e}", p.display())))
}

impl RawScenario {
    fn resolve(self, dir: &Path) -> Result<Scenario, SimError> {
        let start = match &self.start {
            Some(s) => domain::parse_timestamp(s).ok_or_else(|| SimError::Scenario(format!("invalid start '{s}'")))?,
            None => 0,
        };

        let catalog_text = match (&self.catalog.file, &self.catalog.csv) {
            (Some(f), None) => read(dir, f)?,
            (None, Some(c)) => c.clone(),
            _ => return Err(SimError::Scenario("[catalog] needs exactly one of `file` or `csv`".into())),
        };
        let defaults = NodeOverhead::<f64>::default();
        let catalog = domain::load_catalog::<f64>(&catalog_text)?.with_overhead(NodeOverhead {
            cpu_fraction: self.catalog.overhead_cpu_fraction.unwrap_or(defaults.cpu_fraction),
            mem_mib: self.catalog.overhead_mem_mib.unwrap_or(defaults.mem_mib),
        })?;

        let p = &self.prices;
        let prices: BTreeMap<String, PriceSeries<f64>> = match p.kind.as_str() {
            "trace" => {
                let f = p.file.as_ref().ok_or_else(|| SimError::Scenario("trace prices need `file`".into()))?;
                let all = domain::load_price_history::<f64>(&read(dir, f)?)?;
                let mut out = BTreeMap::new();
                for t in catalog.types() {
                    let mut candidates = all.iter().filter(|s| s.instance_type == t.name);
                    let chosen = all
                        .iter()
                        .find(|s| s.instance_type == t.name && s.zone == t.zones[0])
                        .or_else(|| candidates.next());
                    if let Some(s) = chosen {
                        out.insert(t.name.clone(), s.clone());
                    }
                }
                out
            }
            "synthetic" => {
                let gen = SyntheticPrices {
                    base: p.base.clone(),
                    base_fraction: p.base_fraction.unwrap_or(0.4),
                    trend_per_hour: p.trend_per_hour.unwrap_or(0.0),
                    seasonal_amplitude: p.seasonal_amplitude.unwrap_or(0.0),
                    noise_sigma: p.noise_sigma.unwrap_or(0.0),
                    seed: p.seed.unwrap_or(0),
                    history_hours: p.history_hours.unwrap_or(90 * 24),
                };
                gen.generate(&catalog, start, self.duration_s)
                    .into_iter()
                    .map(|s| (s.instance_type.clone(), s))
                    .collect()
            }
            other => return Err(SimError::Scenario(format!("unknown price kind '{other}'"))),
        };

        let workload = match (self.workload.points, &self.workload.file) {
            (Some(points), None) => points,
            (None, Some(f)) => parse_workload_csv(&read(dir, f)?)?,
            _ => return Err(SimError::Scenario("[workload] needs exactly one of `points` or `file`".into())),
        };

        let slo = SloSpec::new(self.slo.min_rps)?;
        let pod = PodSpec::new(self.pod.cpu_millicores, self.pod.mem_mib)?;
        let max_rps_per_pod = match (self.pod.max_rps_per_pod, &self.pod.loadtest) {
            (Some(r), None) => r,
            (None, Some(f)) => {
                let series = domain::load_loadtest::<f64>(&read(dir, f)?)?;
                let d = Thresholds::<f64>::default();
                characterize::max_rps_per_pod(
                    &series,
                    self.pod.failure_threshold.unwrap_or(d.failure_threshold_pct),
                    self.pod.cpu_drop.unwrap_or(d.cpu_drop_pct),
                )?
                .0
            }
            _ => return Err(SimError::Scenario("[pod] needs exactly one of `max_rps_per_pod` or `loadtest`".into())),
        };
        let min_pods_default = characterize::initial_pod_count(&slo, max_rps_per_pod)?;

        let s = self.scaler;
        let d = ScalerConfig::<f64>::default();
        let scaler = ScalerConfig {
            scale_up_util: s.scale_up_util.unwrap_or(d.scale_up_util),
            scale_down_util: s.scale_down_util.unwrap_or(d.scale_down_util),
            target_util: s.target_util.unwrap_or(d.target_util),
            poll_interval_s: s.poll_interval_s.unwrap_or(d.poll_interval_s),
            sustain_polls: s.sustain_polls.unwrap_or(d.sustain_polls),
            provisioning_delay_s: s.provisioning_delay_s.unwrap_or(d.provisioning_delay_s),
            termination_notice_s: s.termination_notice_s.unwrap_or(d.termination_notice_s),
            exclusion_cooldown_s: s.exclusion_cooldown_s.unwrap_or(d.exclusion_cooldown_s),
            min_pods: s.min_pods.unwrap_or(min_pods_default),
        };

        let o = self.optimizer;
        let d = OptimizerSettings::default();
        let optimizer = OptimizerSettings {
            algorithm: match o.algo {
                Some(a) => a.parse().map_err(SimError::Scenario)?,
                None => d.algorithm,
            },
            nsga: Nsga2Params {
                population: o.population.unwrap_or(d.nsga.population),
                generations: o.generations.unwrap_or(d.nsga.generations),
                crossover_p: o.crossover_p.unwrap_or(d.nsga.crossover_p),
                mutation_p: o.mutation_p,
                seed: 0,
            },
            max_per_type: o.max_per_type.unwrap_or(d.max_per_type),
            fixed_overhead_usd_hr: o.fixed_overhead_usd_hr.unwrap_or(d.fixed_overhead_usd_hr),
            selection: SelectionPolicy {
                min_nodes: o.min_nodes.unwrap_or(d.selection.min_nodes),
                prefer_diversity: o.prefer_diversity.unwrap_or(d.selection.prefer_diversity),
            },
            use_forecast: o.use_forecast.unwrap_or(d.use_forecast),
            bid_margin: o.bid_margin.unwrap_or(d.bid_margin),
            bid_cap: o.bid_cap.unwrap_or(d.bid_cap),
        };

        let b = self.baseline;
        let baseline = BaselineSettings {
            instance_type: b.instance_type,
            on_demand_type: b.on_demand_type,
            overhead_usd_hr: b.overhead_usd_hr.unwrap_or(BaselineSettings::default().overhead_usd_hr),
        };

        let t = self.terminations;
        let terminations = match (t.events, t.rate_per_node_hour) {
            (Some(_), Some(_)) => {
                return Err(SimError::Scenario("[terminations] takes `events` or `rate_per_node_hour`, not both".into()))
            }
            (Some(events), None) => TerminationSpec::Explicit(
                events
                    .into_iter()
                    .map(|(time, sel)| sel.parse().map(|s| (time, s)).map_err(SimError::Scenario))
                    .collect::<Result<_, _>>()?,
            ),
            (None, Some(rate)) => TerminationSpec::Stochastic {
                rate_per_node_hour: rate,
                seed: t.seed.unwrap_or(0),
            },
            (None, None) => TerminationSpec::None,
        };

        let scenario = Scenario {
            catalog,
            prices,
            start,
            duration_s: self.duration_s,
            workload,
            slo,
            pod,
            max_rps_per_pod,
            scaler,
            optimizer,
            baseline,
            terminations,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}

/// `time_s,offered_rps` rows.
fn parse_workload_csv(text: &str) -> Result<Vec<(i64, f64)>, SimError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if i == 0 {
            if line != "time_s,offered_rps" {
                return Err(SimError::Scenario("workload file must start with `time_s,offered_rps`".into()));
            }
            continue;
        }
        let (t, r) = line
            .split_once(',')
            .ok_or_else(|| SimError::Scenario(format!("workload line {}: expected two fields", i + 1)))?;
        let t = t.trim().parse().map_err(|_| SimError::Scenario(format!("workload line {}: bad time", i + 1)))?;
        let r = r.trim().parse().map_err(|_| SimError::Scenario(format!("workload line {}: bad rps", i + 1)))?;
        out.push((t, r));
    }
    Ok(out)
}
