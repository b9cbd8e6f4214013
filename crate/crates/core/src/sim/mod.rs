//! Deterministic discrete-event simulation of a spot cluster under a
//! scaling policy, with per-second cost accounting.
//!
//! The simulator is concrete over `f64`.

mod engine;
mod scenario;

use std::collections::BTreeMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::autoscale::AutoscaleError;
use crate::characterize::CharacterizeError;
use crate::domain::DomainError;
use crate::optimize::OptimizeError;

pub use engine::run;
pub use scenario::{
    Algorithm, BaselineSettings, NodeSelector, OptimizerSettings, Scenario, SyntheticPrices, TerminationSpec,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("{0}")]
    Io(String),
    #[error("time {t} precedes the workload trace (starts at {start})")]
    OutOfRange { t: i64, start: i64 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Characterize(#[from] CharacterizeError),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    Autoscale(#[from] AutoscaleError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Policy {
    /// Forecast-priced multi-type optimization with the elastic scaler.
    Elastic,
    /// Homogeneous node group on spot prices; `None` uses the scenario's
    /// baseline type.
    BaselineSingleType(Option<String>),
    /// Homogeneous node group at on-demand prices, never interrupted.
    BaselineOnDemand(Option<String>),
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Elastic => f.write_str("elastic"),
            Policy::BaselineSingleType(None) => f.write_str("baseline_single_type"),
            Policy::BaselineSingleType(Some(t)) => write!(f, "baseline_single_type:{t}"),
            Policy::BaselineOnDemand(None) => f.write_str("baseline_on_demand"),
            Policy::BaselineOnDemand(Some(t)) => write!(f, "baseline_on_demand:{t}"),
        }
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (head, ty) = match s.split_once(':') {
            Some((h, t)) if !t.is_empty() => (h, Some(t.to_owned())),
            Some(_) => return Err(format!("empty instance type in policy '{s}'")),
            None => (s, None),
        };
        match (head, ty) {
            ("elastic", None) => Ok(Policy::Elastic),
            ("baseline_single_type" | "baseline", t) => Ok(Policy::BaselineSingleType(t)),
            ("baseline_on_demand", t) => Ok(Policy::BaselineOnDemand(t)),
            _ => Err(format!(
                "unknown policy '{s}' (expected elastic, baseline_single_type[:type] or baseline_on_demand[:type])"
            )),
        }
    }
}

/// Events in queue priority order (earlier variants win at equal times).
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    NodeTerminated { node: u64 },
    TerminationNotice { target: NodeSelector },
    PriceUpdate { instance_type: String },
    WorkloadChange { offered_rps: f64 },
    ProvisioningComplete { node: u64 },
    ScalerPoll,
}

impl Event {
    pub fn priority(&self) -> u8 {
        match self {
            Event::NodeTerminated { .. } => 0,
            Event::TerminationNotice { .. } => 1,
            Event::PriceUpdate { .. } => 2,
            Event::WorkloadChange { .. } => 3,
            Event::ProvisioningComplete { .. } => 4,
            Event::ScalerPoll => 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Event::NodeTerminated { .. } => "node_terminated",
            Event::TerminationNotice { .. } => "termination_notice",
            Event::PriceUpdate { .. } => "price_update",
            Event::WorkloadChange { .. } => "workload_change",
            Event::ProvisioningComplete { .. } => "provisioning_complete",
            Event::ScalerPoll => "scaler_poll",
        }
    }
}

/// One processed event. `node` is the node acted on, when there is one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventRecord {
    pub time: i64,
    pub seq: u64,
    pub kind: &'static str,
    pub node: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub time: i64,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesPoint {
    pub time: i64,
    /// Ready nodes, draining ones included.
    pub nodes: u32,
    pub pods: u32,
    pub required_pods: u32,
    pub util: f64,
    pub accrued_cost_usd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: u64,
    pub instance_type: String,
    pub zone: String,
    pub launched_at: i64,
    /// When billing started (provisioning completed); `None` if cancelled.
    pub ready_at: Option<i64>,
    /// When billing stopped; `None` if still running at the end.
    pub ended_at: Option<i64>,
    pub cost_usd: f64,
}

/// Outcome of one handled termination notice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RescheduleRecord {
    pub time: i64,
    pub node: u64,
    /// Pods on the victim when the notice arrived.
    pub victim_pods: u32,
    /// Free pod slots on the other serving nodes at that moment.
    pub spare_slots: u32,
    pub placed: u32,
    pub unplaced: u32,
    pub pods_before: u32,
    pub pods_after: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub policy: String,
    pub seed: u64,
    pub duration_s: i64,
    /// Nodes were billed at on-demand prices rather than the spot trace.
    pub on_demand_pricing: bool,
    pub fixed_overhead_usd_hr: f64,
    pub total_cost_usd: f64,
    /// Per instance type, plus [`OVERHEAD_KEY`] for the fixed overhead.
    pub cost_by_type: BTreeMap<String, f64>,
    pub slo_violation_s: i64,
    pub terminations_injected: u32,
    pub terminations_handled: u32,
    pub reoptimizations: u32,
    pub reschedules: Vec<RescheduleRecord>,
    pub decisions: Vec<Decision>,
    pub series: Vec<SeriesPoint>,
    pub nodes: Vec<NodeRecord>,
    pub events: Vec<EventRecord>,
}

pub const OVERHEAD_KEY: &str = "overhead";

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub elastic: SimResult,
    pub baselines: Vec<SimResult>,
}

impl ComparisonReport {
    /// `(policy, 1 - cost_elastic / cost_policy)` per baseline.
    pub fn savings(&self) -> Vec<(String, f64)> {
        self.baselines
            .iter()
            .map(|b| (b.policy.clone(), 1.0 - self.elastic.total_cost_usd / b.total_cost_usd))
            .collect()
    }
}

/// Pods needed to serve `offered_rps`: `ceil(offered / max_rps_per_pod)`,
/// zero for zero load.
pub fn pods_for_rate(offered_rps: f64, max_rps_per_pod: f64) -> u32 {
    if !(offered_rps > 0.0) {
        return 0;
    }
    let mut n = (offered_rps / max_rps_per_pod).ceil().max(1.0) as u32;
    while (n as f64) * max_rps_per_pod < offered_rps {
        n += 1;
    }
    while n > 1 && ((n - 1) as f64) * max_rps_per_pod >= offered_rps {
        n -= 1;
    }
    n
}

/// Offered load at `t` under zero-order hold.
pub fn offered_at(t: i64, trace: &[(i64, f64)]) -> Result<f64, SimError> {
    let idx = trace.partition_point(|&(ts, _)| ts <= t);
    if idx == 0 {
        return Err(SimError::OutOfRange {
            t,
            start: trace.first().map(|p| p.0).unwrap_or(0),
        });
    }
    Ok(trace[idx - 1].1)
}

pub fn required_pods_at(t: i64, trace: &[(i64, f64)], max_rps_per_pod: f64) -> Result<u32, SimError> {
    if !(max_rps_per_pod > 0.0) {
        return Err(SimError::Scenario("max_rps_per_pod must be > 0".into()));
    }
    Ok(pods_for_rate(offered_at(t, trace)?, max_rps_per_pod))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TerminationNotice {
    pub time: i64,
    pub node: u64,
}

pub(crate) fn mix_seed(a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(a << 6).wrapping_add(a >> 2);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Poisson termination notices for each `(node, alive_from)` up to
/// `horizon`, with exponential inter-arrival times of mean
/// `1 / rate_per_node_hour` hours. Each node draws from its own stream so
/// the result does not depend on the order of `nodes`.
pub fn inject_terminations(nodes: &[(u64, i64)], rate_per_node_hour: f64, seed: u64, horizon: i64) -> Vec<TerminationNotice> {
    let mut out = Vec::new();
    if !(rate_per_node_hour > 0.0) {
        return out;
    }
    let exp = Exp::new(rate_per_node_hour / 3600.0).expect("rate > 0");
    for &(node, from) in nodes {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, node));
        let mut t = from as f64;
        loop {
            t += exp.sample(&mut rng);
            let at = t.ceil() as i64;
            if at >= horizon {
                break;
            }
            out.push(TerminationNotice { time: at, node });
        }
    }
    out.sort();
    out
}

/// Runs the elastic policy and both baselines on the same scenario and seed.
pub fn compare(scenario: &Scenario, seed: u64) -> Result<ComparisonReport, SimError> {
    Ok(ComparisonReport {
        elastic: run(scenario, &Policy::Elastic, seed)?,
        baselines: vec![
            run(scenario, &Policy::BaselineSingleType(None), seed)?,
            run(scenario, &Policy::BaselineOnDemand(None), seed)?,
        ],
    })
}
