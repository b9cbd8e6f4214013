//! Elastic scaler: utilization-band triggers with HPA-style pod targets,
//! allocation diffing and graceful handling of spot termination notices.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::domain::Allocation;
use crate::scalar::{ceil_count, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AutoscaleError {
    #[error("unknown node {0}")]
    UnknownNode(u64),
    #[error("node {0} is already draining")]
    AlreadyDraining(u64),
    #[error("invalid scaler config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalerConfig<T> {
    pub scale_up_util: T,
    pub scale_down_util: T,
    pub target_util: T,
    pub poll_interval_s: i64,
    pub sustain_polls: u32,
    pub provisioning_delay_s: i64,
    pub termination_notice_s: i64,
    pub exclusion_cooldown_s: i64,
    pub min_pods: u32,
}

impl<T: Scalar> Default for ScalerConfig<T> {
    fn default() -> Self {
        ScalerConfig {
            scale_up_util: T::lit(0.80),
            scale_down_util: T::lit(0.30),
            target_util: T::lit(0.65),
            poll_interval_s: 30,
            sustain_polls: 2,
            provisioning_delay_s: 420,
            termination_notice_s: 120,
            exclusion_cooldown_s: 3600,
            min_pods: 1,
        }
    }
}

impl<T: Scalar> ScalerConfig<T> {
    pub fn validate(&self) -> Result<(), AutoscaleError> {
        let bad = |m: &str| Err(AutoscaleError::InvalidConfig(m.into()));
        if !(T::zero() < self.scale_down_util
            && self.scale_down_util < self.target_util
            && self.target_util < self.scale_up_util
            && self.scale_up_util < T::one())
        {
            return bad("need 0 < scale_down_util < target_util < scale_up_util < 1");
        }
        if self.poll_interval_s <= 0
            || self.provisioning_delay_s <= 0
            || self.termination_notice_s <= 0
            || self.exclusion_cooldown_s <= 0
        {
            return bad("intervals and delays must be > 0");
        }
        if self.sustain_polls == 0 {
            return bad("sustain_polls must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeState {
    pub id: u64,
    pub instance_type: String,
    pub zone: String,
    pub launched_at: i64,
    pub draining: bool,
    /// Pod slots on this node.
    pub capacity: u32,
    /// Pods currently scheduled here.
    pub pods: u32,
}

impl NodeState {
    pub fn free(&self) -> u32 {
        self.capacity.saturating_sub(self.pods)
    }
}

/// Snapshot of the (ready) cluster handed to the scaler.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState<T> {
    pub now: i64,
    pub nodes: Vec<NodeState>,
    pub pods_running: u32,
    pub avg_cpu_util: T,
    /// Instance type → time at which its exclusion lapses.
    pub excluded_types: BTreeMap<String, i64>,
}

impl<T: Scalar> ClusterState<T> {
    pub fn node(&self, id: u64) -> Option<&NodeState> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn serving_nodes(&self) -> impl Iterator<Item = &NodeState> {
        self.nodes.iter().filter(|n| !n.draining)
    }

    pub fn capacity_pods(&self) -> u64 {
        self.serving_nodes().map(|n| n.capacity as u64).sum()
    }

    /// Allocation formed by the non-draining nodes.
    pub fn allocation(&self) -> Allocation {
        let mut a = Allocation::new();
        for n in self.serving_nodes() {
            a.add(n.instance_type.clone(), 1);
        }
        a
    }

    pub fn active_exclusions(&self) -> BTreeSet<String> {
        self.excluded_types
            .iter()
            .filter(|(_, &until)| until > self.now)
            .map(|(t, _)| t.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReoptimizeRequest {
    pub required_pods: u32,
    pub excluded_types: BTreeSet<String>,
}

/// Where a drained node's pods go.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReschedulePlan {
    pub victim: u64,
    /// (target node id, pods moved there), in placement order.
    pub assignments: Vec<(u64, u32)>,
    pub unplaced: u32,
}

impl ReschedulePlan {
    pub fn placed(&self) -> u32 {
        self.assignments.iter().map(|&(_, n)| n).sum()
    }

    pub fn is_complete(&self) -> bool {
        self.unplaced == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScalerDecision {
    NoOp,
    Reoptimize(ReoptimizeRequest),
    Reschedule {
        plan: ReschedulePlan,
        reoptimize: Option<ReoptimizeRequest>,
    },
}

/// `max(min_pods, ceil(current × util / target))`.
pub fn hpa_desired_pods<T: Scalar>(current_pods: u32, avg_util: T, target_util: T, min_pods: u32) -> u32 {
    let ratio = avg_util / target_util;
    // exact ratio of 1 keeps the replica count
    let want = if ratio == T::one() {
        current_pods as u64
    } else {
        ceil_count(T::from_count(current_pods as u64) * ratio)
    };
    (want.min(u32::MAX as u64) as u32).max(min_pods)
}

/// Which side of the band a utilization reading falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Above,
    Inside,
    Below,
}

pub fn band<T: Scalar>(util: T, config: &ScalerConfig<T>) -> Band {
    if util > config.scale_up_util {
        Band::Above
    } else if util < config.scale_down_util {
        Band::Below
    } else {
        Band::Inside
    }
}

/// Decides whether a sustained band breach warrants reoptimizing.
/// `consecutive_breaches` counts polls (including this one) outside the band.
pub fn evaluate<T: Scalar>(state: &ClusterState<T>, config: &ScalerConfig<T>, consecutive_breaches: u32) -> ScalerDecision {
    if band(state.avg_cpu_util, config) == Band::Inside || consecutive_breaches < config.sustain_polls {
        return ScalerDecision::NoOp;
    }
    let current = state.pods_running.max(1);
    let desired = hpa_desired_pods(current, state.avg_cpu_util, config.target_util, config.min_pods);
    if desired == state.pods_running && state.capacity_pods() >= desired as u64 {
        return ScalerDecision::NoOp;
    }
    ScalerDecision::Reoptimize(ReoptimizeRequest {
        required_pods: desired,
        excluded_types: state.active_exclusions(),
    })
}

/// First-fit-decreasing: items sorted largest first, each placed in the
/// first bin (in the given order) with room. Returns per-item bin ids;
/// `None` marks items that did not fit.
pub fn first_fit_decreasing(items: &[u32], bins: &[(u64, u32)]) -> Vec<Option<u64>> {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.sort_by(|&a, &b| items[b].cmp(&items[a]).then(a.cmp(&b)));
    let mut free: Vec<u32> = bins.iter().map(|b| b.1).collect();
    let mut out = vec![None; items.len()];
    for i in order {
        if let Some(j) = free.iter().position(|&f| f >= items[i]) {
            free[j] -= items[i];
            out[i] = Some(bins[j].0);
        }
    }
    out
}

/// Marks `node_id` draining and plans where its pods go. When some pods
/// cannot be placed the node's type is excluded for the cooldown and a
/// reoptimization for the current pod count is attached.
pub fn handle_termination_notice<T: Scalar>(
    state: &mut ClusterState<T>,
    node_id: u64,
    config: &ScalerConfig<T>,
) -> Result<ScalerDecision, AutoscaleError> {
    let idx = state
        .nodes
        .iter()
        .position(|n| n.id == node_id)
        .ok_or(AutoscaleError::UnknownNode(node_id))?;
    if state.nodes[idx].draining {
        return Err(AutoscaleError::AlreadyDraining(node_id));
    }
    state.nodes[idx].draining = true;
    let victim = state.nodes[idx].clone();

    let bins: Vec<(u64, u32)> = state.serving_nodes().map(|n| (n.id, n.free())).collect();
    let items = vec![1u32; victim.pods as usize];
    let placement = first_fit_decreasing(&items, &bins);

    let mut assignments: Vec<(u64, u32)> = Vec::new();
    for target in placement.iter().flatten() {
        match assignments.last_mut() {
            Some((id, n)) if id == target => *n += 1,
            _ => assignments.push((*target, 1)),
        }
    }
    let unplaced = placement.iter().filter(|p| p.is_none()).count() as u32;
    let plan = ReschedulePlan {
        victim: node_id,
        assignments,
        unplaced,
    };

    let reoptimize = if unplaced > 0 {
        let until = state.now + config.exclusion_cooldown_s;
        let entry = state.excluded_types.entry(victim.instance_type.clone()).or_insert(until);
        *entry = (*entry).max(until);
        Some(ReoptimizeRequest {
            required_pods: state.pods_running.max(config.min_pods),
            excluded_types: state.active_exclusions(),
        })
    } else {
        None
    };
    Ok(ScalerDecision::Reschedule { plan, reoptimize })
}

/// Per-type differences: what to launch and what to release.
pub fn allocation_diff(current: &Allocation, target: &Allocation) -> (Allocation, Allocation) {
    let mut attach = Allocation::new();
    let mut detach = Allocation::new();
    let names: BTreeSet<&str> = current.iter().chain(target.iter()).map(|(k, _)| k).collect();
    for name in names {
        let (c, t) = (current.count(name), target.count(name));
        if t > c {
            attach.add(name, t - c);
        } else if c > t {
            detach.add(name, c - t);
        }
    }
    (attach, detach)
}

/// Picks concrete nodes for a detach set: newest non-draining nodes of each
/// type first. Each node id appears at most once.
pub fn select_detach_nodes<T: Scalar>(state: &ClusterState<T>, detach: &Allocation) -> Vec<u64> {
    let mut picked = Vec::new();
    for (name, count) in detach.iter() {
        let mut nodes: Vec<&NodeState> = state.serving_nodes().filter(|n| n.instance_type == name).collect();
        nodes.sort_by(|a, b| b.launched_at.cmp(&a.launched_at).then(b.id.cmp(&a.id)));
        picked.extend(nodes.into_iter().take(count as usize).map(|n| n.id));
    }
    picked
}

/// Stateful wrapper around [`evaluate`]: tracks consecutive breaches and
/// suppresses repeat triggers for the same band while a previous
/// reoptimization is still provisioning.
#[derive(Debug, Clone)]
pub struct ElasticScaler<T> {
    config: ScalerConfig<T>,
    streak: u32,
    last_band: Band,
    in_flight: Option<(Band, i64)>,
}

impl<T: Scalar> ElasticScaler<T> {
    pub fn new(config: ScalerConfig<T>) -> Result<Self, AutoscaleError> {
        config.validate()?;
        Ok(ElasticScaler {
            config,
            streak: 0,
            last_band: Band::Inside,
            in_flight: None,
        })
    }

    pub fn config(&self) -> &ScalerConfig<T> {
        &self.config
    }

    pub fn poll(&mut self, state: &ClusterState<T>) -> ScalerDecision {
        let b = band(state.avg_cpu_util, &self.config);
        self.streak = if b == Band::Inside {
            0
        } else if b == self.last_band {
            self.streak + 1
        } else {
            1
        };
        self.last_band = b;
        if let Some((_, until)) = self.in_flight {
            if state.now >= until {
                self.in_flight = None;
            }
        }
        let decision = evaluate(state, &self.config, self.streak);
        if let ScalerDecision::Reoptimize(_) = decision {
            if matches!(self.in_flight, Some((fb, _)) if fb == b) {
                return ScalerDecision::NoOp;
            }
            self.in_flight = Some((b, state.now + self.config.provisioning_delay_s));
        }
        decision
    }

    /// Records an externally triggered reoptimization (termination
    /// handling) so polls do not immediately pile another one on top.
    pub fn note_reoptimize(&mut self, now: i64) {
        self.in_flight = Some((Band::Above, now + self.config.provisioning_delay_s));
    }
}
