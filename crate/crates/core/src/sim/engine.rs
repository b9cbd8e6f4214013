use std::collections::{BTreeMap, BTreeSet};

use super::scenario::{Algorithm, NodeSelector, Scenario, TerminationSpec};
use super::{
    inject_terminations, mix_seed, offered_at, pods_for_rate, Decision, Event, EventRecord, NodeRecord, Policy,
    RescheduleRecord, SeriesPoint, SimError, SimResult, OVERHEAD_KEY,
};
use crate::autoscale::{allocation_diff, handle_termination_notice, ClusterState, ElasticScaler, NodeState, ScalerDecision};
use crate::domain::{Allocation, PriceSeries};
use crate::forecast::{self, SECONDS_PER_HOUR};
use crate::optimize::{
    brute_force, capacity_pods, greedy, nsga2, select_allocation, FrontMember, OptimizationProblem, Nsga2Params,
    ParetoFront, PriceQuote, PriceSource,
};

const FORECAST_WINDOW_S: i64 = 90 * 24 * SECONDS_PER_HOUR;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Provisioning,
    Ready,
    Draining,
    Gone,
}

#[derive(Debug, Clone)]
struct Node {
    id: u64,
    instance_type: String,
    zone: String,
    launched_at: i64,
    ready_at: Option<i64>,
    ended_at: Option<i64>,
    status: Status,
    capacity: u32,
    pods: u32,
    cost: f64,
}

impl Node {
    fn billed(&self) -> bool {
        matches!(self.status, Status::Ready | Status::Draining)
    }
}

struct Engine<'a> {
    sc: &'a Scenario,
    policy: Policy,
    /// Node group type for the baselines.
    group_type: Option<String>,
    on_demand: bool,
    overhead: f64,
    seed: u64,
    now: i64,
    last: i64,
    seq: u64,
    queue: BTreeMap<(i64, u8, u64), Event>,
    nodes: BTreeMap<u64, Node>,
    next_id: u64,
    desired: u32,
    offered: f64,
    scaler: ElasticScaler<f64>,
    exclusions: BTreeMap<String, i64>,
    /// Nodes to release once every node in the set has left provisioning.
    releases: Vec<(u64, BTreeSet<u64>)>,
    quote_hour: Option<i64>,
    quote: BTreeMap<String, f64>,
    cost_by_type: BTreeMap<String, f64>,
    slo_violation_s: i64,
    injected: u32,
    handled: u32,
    reoptimizations: u32,
    reschedules: Vec<RescheduleRecord>,
    decisions: Vec<Decision>,
    series: Vec<SeriesPoint>,
    events: Vec<EventRecord>,
}

/// Runs `policy` over `scenario`. Identical inputs give identical results.
pub fn run(scenario: &Scenario, policy: &Policy, seed: u64) -> Result<SimResult, SimError> {
    scenario.validate()?;
    let mut e = Engine::new(scenario, policy, seed)?;
    e.bootstrap();
    e.event_loop();
    Ok(e.finish())
}

fn default_group_type(sc: &Scenario, on_demand: bool) -> Option<String> {
    let pod = &sc.pod;
    let fits: Vec<(&str, u32, f64)> = sc
        .catalog
        .types()
        .iter()
        .filter_map(|t| {
            let ppn = sc.catalog.pods_per_node(&t.name, pod)?;
            (ppn > 0).then_some((t.name.as_str(), ppn, t.on_demand_usd_hr))
        })
        .collect();
    let pick = if on_demand {
        // cheapest on-demand price per pod slot
        fits.iter().min_by(|a, b| (a.2 / a.1 as f64).total_cmp(&(b.2 / b.1 as f64)).then(a.0.cmp(b.0)))
    } else {
        // most pod slots, then cheaper on-demand price
        fits.iter().min_by(|a, b| b.1.cmp(&a.1).then(a.2.total_cmp(&b.2)).then(a.0.cmp(b.0)))
    };
    pick.map(|p| p.0.to_owned())
}

impl<'a> Engine<'a> {
    fn new(sc: &'a Scenario, policy: &Policy, seed: u64) -> Result<Self, SimError> {
        let (group_type, on_demand, overhead) = match policy {
            Policy::Elastic => (None, false, sc.optimizer.fixed_overhead_usd_hr),
            Policy::BaselineSingleType(t) => (
                t.clone().or_else(|| sc.baseline.instance_type.clone()).or_else(|| default_group_type(sc, false)),
                false,
                sc.baseline.overhead_usd_hr,
            ),
            Policy::BaselineOnDemand(t) => (
                t.clone().or_else(|| sc.baseline.on_demand_type.clone()).or_else(|| default_group_type(sc, true)),
                true,
                sc.baseline.overhead_usd_hr,
            ),
        };
        if *policy != Policy::Elastic {
            let name = group_type.as_deref().unwrap_or("");
            match sc.catalog.pods_per_node(name, &sc.pod) {
                None => return Err(SimError::Scenario(format!("baseline type '{name}' is not in the catalog"))),
                Some(0) => return Err(SimError::Infeasible(format!("pod does not fit on baseline type '{name}'"))),
                Some(_) => {}
            }
        }
        Ok(Engine {
            sc,
            policy: policy.clone(),
            group_type,
            on_demand,
            overhead,
            seed,
            now: 0,
            last: 0,
            seq: 0,
            queue: BTreeMap::new(),
            nodes: BTreeMap::new(),
            next_id: 1,
            desired: 0,
            offered: 0.0,
            scaler: ElasticScaler::new(sc.scaler.clone())?,
            exclusions: BTreeMap::new(),
            releases: Vec::new(),
            quote_hour: None,
            quote: BTreeMap::new(),
            cost_by_type: BTreeMap::new(),
            slo_violation_s: 0,
            injected: 0,
            handled: 0,
            reoptimizations: 0,
            reschedules: Vec::new(),
            decisions: Vec::new(),
            series: Vec::new(),
            events: Vec::new(),
        })
    }

    fn push(&mut self, time: i64, ev: Event) {
        self.queue.insert((time, ev.priority(), self.seq), ev);
        self.seq += 1;
    }

    fn log(&mut self, kind: &str, detail: String) {
        self.decisions.push(Decision {
            time: self.now,
            kind: kind.to_owned(),
            detail,
        });
    }

    fn bootstrap(&mut self) {
        let sc = self.sc;
        let duration = sc.duration_s;
        let mut t = 0;
        while t < duration {
            self.push(t, Event::ScalerPoll);
            t += sc.scaler.poll_interval_s;
        }
        for &(t, rps) in &sc.workload {
            if t > 0 && t < duration {
                self.push(t, Event::WorkloadChange { offered_rps: rps });
            }
        }
        if !self.on_demand {
            for (name, series) in &sc.prices {
                for &(ts, _) in &series.points {
                    let t = ts - sc.start;
                    if t > 0 && t < duration {
                        self.push(t, Event::PriceUpdate { instance_type: name.clone() });
                    }
                }
            }
            if let TerminationSpec::Explicit(list) = &sc.terminations {
                for (t, sel) in list {
                    if *t >= 0 && *t < duration {
                        self.push(*t, Event::TerminationNotice { target: sel.clone() });
                    }
                }
            }
        }

        self.offered = offered_at(0, &sc.workload).expect("validated workload starts at or before 0");
        let cfg = &sc.scaler;
        self.desired = pods_for_rate(self.offered, sc.max_rps_per_pod * cfg.target_util).max(cfg.min_pods);
        if self.policy == Policy::Elastic {
            self.refresh_quote();
        }
        if let Some(target) = self.target_for(self.desired) {
            self.log_target("deploy", &target);
            self.apply_target(&target, 0);
        }
    }

    fn event_loop(&mut self) {
        while let Some(((t, _, seq), ev)) = self.queue.pop_first() {
            if t >= self.sc.duration_s {
                break;
            }
            self.accrue(t);
            self.now = t;
            let kind = ev.kind();
            let node = self.handle(ev);
            self.events.push(EventRecord { time: t, seq, kind, node });
        }
        self.accrue(self.sc.duration_s);
        self.now = self.sc.duration_s;
    }

    fn handle(&mut self, ev: Event) -> Option<u64> {
        match ev {
            Event::NodeTerminated { node } => {
                if let Some(n) = self.nodes.get_mut(&node) {
                    n.status = Status::Gone;
                    n.ended_at = Some(self.now);
                    n.pods = 0;
                }
                self.check_releases();
                self.reconcile();
                Some(node)
            }
            Event::TerminationNotice { target } => self.termination_notice(&target),
            Event::PriceUpdate { .. } => None,
            Event::WorkloadChange { offered_rps } => {
                self.offered = offered_rps;
                None
            }
            Event::ProvisioningComplete { node } => {
                let ready = match self.nodes.get_mut(&node) {
                    Some(n) if n.status == Status::Provisioning => {
                        n.status = Status::Ready;
                        n.ready_at = Some(self.now);
                        true
                    }
                    _ => false,
                };
                if !ready {
                    return Some(node);
                }
                if let TerminationSpec::Stochastic { rate_per_node_hour, seed } = self.sc.terminations {
                    if !self.on_demand {
                        let seed = mix_seed(seed, self.seed);
                        if let Some(n) = inject_terminations(&[(node, self.now)], rate_per_node_hour, seed, self.sc.duration_s).first() {
                            self.push(n.time, Event::TerminationNotice { target: NodeSelector::Node(node) });
                        }
                    }
                }
                self.check_releases();
                self.reconcile();
                Some(node)
            }
            Event::ScalerPoll => {
                if self.policy == Policy::Elastic {
                    self.refresh_quote();
                }
                let snapshot = self.snapshot();
                if let ScalerDecision::Reoptimize(req) = self.scaler.poll(&snapshot) {
                    self.desired = req.required_pods;
                    self.reoptimize("scale");
                }
                self.series.push(SeriesPoint {
                    time: self.now,
                    nodes: self.nodes.values().filter(|n| n.billed()).count() as u32,
                    pods: self.running_pods(),
                    required_pods: self.required_now(),
                    util: self.util(),
                    accrued_cost_usd: self.cost_by_type.values().sum(),
                });
                None
            }
        }
    }

    fn required_now(&self) -> u32 {
        pods_for_rate(self.offered, self.sc.max_rps_per_pod)
    }

    fn running_pods(&self) -> u32 {
        self.nodes.values().filter(|n| n.billed()).map(|n| n.pods).sum()
    }

    fn util(&self) -> f64 {
        let pods = self.running_pods();
        if pods == 0 {
            return if self.offered > 0.0 { 1.0 } else { 0.0 };
        }
        (self.offered / (pods as f64 * self.sc.max_rps_per_pod)).min(1.0)
    }

    fn unit_price(&self, instance_type: &str, t: i64) -> f64 {
        if self.on_demand {
            self.sc.catalog.get(instance_type).map(|s| s.on_demand_usd_hr).unwrap_or(f64::NAN)
        } else {
            self.sc.price_at(instance_type, t)
        }
    }

    /// Bills `[last, to)` at the prices in force at `last`; prices only
    /// change at queued events, so they are constant over the interval.
    fn accrue(&mut self, to: i64) {
        let dt = to - self.last;
        if dt <= 0 {
            return;
        }
        let at = self.last;
        let billed: Vec<(u64, f64)> = self
            .nodes
            .values()
            .filter(|n| n.billed())
            .map(|n| (n.id, self.unit_price(&n.instance_type, at)))
            .collect();
        for (id, price) in billed {
            let c = price * dt as f64 / 3600.0;
            let n = self.nodes.get_mut(&id).expect("billed node exists");
            n.cost += c;
            *self.cost_by_type.entry(n.instance_type.clone()).or_insert(0.0) += c;
        }
        *self.cost_by_type.entry(OVERHEAD_KEY.to_owned()).or_insert(0.0) += self.overhead * dt as f64 / 3600.0;
        if self.running_pods() < self.required_now() {
            self.slo_violation_s += dt;
        }
        self.last = to;
    }

    fn snapshot(&self) -> ClusterState<f64> {
        ClusterState {
            now: self.now,
            nodes: self
                .nodes
                .values()
                .filter(|n| n.billed())
                .map(|n| NodeState {
                    id: n.id,
                    instance_type: n.instance_type.clone(),
                    zone: n.zone.clone(),
                    launched_at: n.launched_at,
                    draining: n.status == Status::Draining,
                    capacity: n.capacity,
                    pods: n.pods,
                })
                .collect(),
            pods_running: self.running_pods(),
            avg_cpu_util: self.util(),
            excluded_types: self.exclusions.clone(),
        }
    }

    /// Moves pods so the running count tracks `desired`: surplus pods leave
    /// the newest nodes first, pending pods fill the oldest ready nodes.
    fn reconcile(&mut self) {
        let running = self.running_pods();
        if running > self.desired {
            let mut excess = running - self.desired;
            let mut order: Vec<&Node> = self.nodes.values().filter(|n| n.billed() && n.pods > 0).collect();
            order.sort_by(|a, b| {
                (a.status == Status::Ready)
                    .cmp(&(b.status == Status::Ready))
                    .then(b.ready_at.cmp(&a.ready_at))
                    .then(b.id.cmp(&a.id))
            });
            // draining nodes sort first: their pods go before anyone else's
            let ids: Vec<u64> = order.iter().map(|n| n.id).collect();
            for id in ids {
                let n = self.nodes.get_mut(&id).expect("node exists");
                let k = n.pods.min(excess);
                n.pods -= k;
                excess -= k;
                if excess == 0 {
                    break;
                }
            }
        } else if running < self.desired {
            let mut need = self.desired - running;
            let mut order: Vec<&Node> = self.nodes.values().filter(|n| n.status == Status::Ready && n.pods < n.capacity).collect();
            order.sort_by(|a, b| a.ready_at.cmp(&b.ready_at).then(a.id.cmp(&b.id)));
            let ids: Vec<u64> = order.iter().map(|n| n.id).collect();
            for id in ids {
                let n = self.nodes.get_mut(&id).expect("node exists");
                let k = (n.capacity - n.pods).min(need);
                n.pods += k;
                need -= k;
                if need == 0 {
                    break;
                }
            }
        }
    }

    fn launch(&mut self, instance_type: &str, delay: i64) -> u64 {
        let spec = self.sc.catalog.get(instance_type).expect("target types come from the catalog");
        let existing = self.nodes.values().filter(|n| n.instance_type == instance_type).count();
        let zone = spec.zones[existing % spec.zones.len()].clone();
        let capacity = self.sc.catalog.pods_per_node(instance_type, &self.sc.pod).unwrap_or(0);
        let id = self.next_id;
        self.next_id += 1;
        self.nodes.insert(
            id,
            Node {
                id,
                instance_type: instance_type.to_owned(),
                zone,
                launched_at: self.now,
                ready_at: None,
                ended_at: None,
                status: Status::Provisioning,
                capacity,
                pods: 0,
                cost: 0.0,
            },
        );
        self.push(self.now + delay, Event::ProvisioningComplete { node: id });
        id
    }

    fn release(&mut self, id: u64) {
        if let Some(n) = self.nodes.get_mut(&id) {
            if n.billed() {
                n.status = Status::Gone;
                n.ended_at = Some(self.now);
                n.pods = 0;
                let detail = format!("node {} ({})", id, n.instance_type);
                self.log("release", detail);
            }
        }
    }

    fn check_releases(&mut self) {
        let nodes = &self.nodes;
        let (due, waiting): (Vec<_>, Vec<_>) = std::mem::take(&mut self.releases).into_iter().partition(|(_, deps)| {
            deps.iter().all(|d| nodes.get(d).is_none_or(|n| n.status != Status::Provisioning))
        });
        self.releases = waiting;
        for (id, _) in due {
            self.release(id);
        }
    }

    /// Diffs the live allocation against `target`, launches what is
    /// missing and releases the surplus once the launches are ready.
    fn apply_target(&mut self, target: &Allocation, delay: i64) {
        let pending_release: BTreeSet<u64> = self.releases.iter().map(|r| r.0).collect();
        let live: Vec<&Node> = self
            .nodes
            .values()
            .filter(|n| matches!(n.status, Status::Provisioning | Status::Ready) && !pending_release.contains(&n.id))
            .collect();
        let mut current = Allocation::new();
        for n in &live {
            current.add(n.instance_type.clone(), 1);
        }
        let (attach, detach) = allocation_diff(&current, target);

        let mut cancel = Vec::new();
        let mut retire = Vec::new();
        for (name, count) in detach.iter() {
            let mut of_type: Vec<&&Node> = live.iter().filter(|n| n.instance_type == name).collect();
            // not-yet-ready nodes go first, then the newest ready ones
            of_type.sort_by(|a, b| {
                (b.status == Status::Provisioning)
                    .cmp(&(a.status == Status::Provisioning))
                    .then(b.ready_at.cmp(&a.ready_at))
                    .then(b.launched_at.cmp(&a.launched_at))
                    .then(b.id.cmp(&a.id))
            });
            for n in of_type.into_iter().take(count as usize) {
                if n.status == Status::Provisioning {
                    cancel.push(n.id);
                } else {
                    retire.push(n.id);
                }
            }
        }
        for id in cancel {
            let n = self.nodes.get_mut(&id).expect("node exists");
            n.status = Status::Gone;
            let detail = format!("node {} ({}) before it became ready", id, n.instance_type);
            self.log("cancel", detail);
        }

        let mut launched = BTreeSet::new();
        for (name, count) in attach.iter() {
            for _ in 0..count {
                launched.insert(self.launch(name, delay));
            }
        }
        for id in retire {
            self.releases.push((id, launched.clone()));
        }
        self.check_releases();
    }

    fn log_target(&mut self, kind: &str, target: &Allocation) {
        let cap = capacity_pods(target, &self.sc.catalog, &self.sc.pod);
        let detail = format!("desired_pods={} target={} capacity_pods={}", self.desired, target, cap);
        self.log(kind, detail);
    }

    fn reoptimize(&mut self, kind: &str) {
        if let Some(target) = self.target_for(self.desired) {
            self.log_target(kind, &target);
            self.apply_target(&target, self.sc.scaler.provisioning_delay_s);
            self.reoptimizations += 1;
        }
        self.reconcile();
    }

    fn termination_notice(&mut self, target: &NodeSelector) -> Option<u64> {
        let ready = self.nodes.values().filter(|n| n.status == Status::Ready);
        let victim = match target {
            NodeSelector::Node(id) => ready.filter(|n| n.id == *id).map(|n| n.id).next(),
            NodeSelector::Type(t) => ready
                .filter(|n| &n.instance_type == t)
                .min_by_key(|n| (n.ready_at, n.id))
                .map(|n| n.id),
            NodeSelector::Oldest => ready.min_by_key(|n| (n.ready_at, n.id)).map(|n| n.id),
            NodeSelector::Newest => ready.max_by_key(|n| (n.ready_at, n.id)).map(|n| n.id),
            NodeSelector::Busiest => ready.max_by_key(|n| (n.pods, std::cmp::Reverse(n.id))).map(|n| n.id),
        };
        let Some(id) = victim else {
            self.log("notice_ignored", format!("no ready node matches {target:?}"));
            return None;
        };
        self.injected += 1;

        let victim_pods = self.nodes[&id].pods;
        let spare_slots = self
            .nodes
            .values()
            .filter(|n| n.status == Status::Ready && n.id != id)
            .map(|n| n.capacity - n.pods)
            .sum();
        let mut state = self.snapshot();
        let decision = handle_termination_notice(&mut state, id, &self.sc.scaler).expect("victim is a ready node");
        let ScalerDecision::Reschedule { plan, reoptimize } = decision else {
            unreachable!("termination handling always plans a reschedule")
        };
        let before = self.running_pods();
        for &(to, k) in &plan.assignments {
            self.nodes.get_mut(&to).expect("plan targets live nodes").pods += k;
        }
        let v = self.nodes.get_mut(&id).expect("victim exists");
        v.pods -= plan.placed();
        v.status = Status::Draining;
        let victim_type = v.instance_type.clone();
        self.reschedules.push(RescheduleRecord {
            time: self.now,
            node: id,
            victim_pods,
            spare_slots,
            placed: plan.placed(),
            unplaced: plan.unplaced,
            pods_before: before,
            pods_after: self.running_pods(),
        });
        self.releases.retain(|r| r.0 != id);
        self.exclusions = state.excluded_types;
        if plan.is_complete() {
            self.handled += 1;
        }
        self.log(
            "reschedule",
            format!("node {id} ({victim_type}) placed={} unplaced={}", plan.placed(), plan.unplaced),
        );
        self.push(self.now + self.sc.scaler.termination_notice_s, Event::NodeTerminated { node: id });

        match self.policy {
            Policy::Elastic => {
                if reoptimize.is_some() {
                    self.scaler.note_reoptimize(self.now);
                    self.reoptimize("replace");
                }
            }
            // the node group replaces lost capacity like a cluster autoscaler
            _ => self.reoptimize("replace"),
        }
        self.reconcile();
        Some(id)
    }

    fn live_price(&self, name: &str) -> f64 {
        self.sc.price_at(name, self.now)
    }

    /// Refits each type's forecast once per simulated hour on the trailing
    /// window and quotes the next hour's mean.
    fn refresh_quote(&mut self) {
        let abs = self.sc.start + self.now;
        let hour = abs.div_euclid(SECONDS_PER_HOUR);
        if self.quote_hour == Some(hour) {
            return;
        }
        self.quote_hour = Some(hour);
        let opt = &self.sc.optimizer;
        for t in self.sc.catalog.types() {
            let live = self.live_price(&t.name);
            if !opt.use_forecast {
                self.quote.insert(t.name.clone(), live);
                continue;
            }
            let series = &self.sc.prices[&t.name];
            let lo = series.points.partition_point(|p| p.0 < abs - FORECAST_WINDOW_S);
            let hi = series.points.partition_point(|p| p.0 <= abs);
            let window = PriceSeries::new(series.instance_type.clone(), series.zone.clone(), series.points[lo..hi].to_vec());
            let fitted = window.map_err(|e| e.to_string()).and_then(|w| forecast::fit(&w).map_err(|e| e.to_string()));
            let (price, detail) = match fitted {
                Ok(model) => {
                    let p = forecast::predict_hours(&model, hour + 1, 1).points[0];
                    let bid = forecast::bid_price(p.upper95, t.on_demand_usd_hr, opt.bid_margin, opt.bid_cap);
                    let bid = bid.map(|b| format!("{b:.6}")).unwrap_or_else(|e| e.to_string());
                    let price = if p.mean > 0.0 { p.mean } else { live };
                    (price, format!("{} mean={:.6} upper95={:.6} bid={}", t.name, p.mean, p.upper95, bid))
                }
                Err(e) => (live, format!("{}: {e}; quoting live price {live:.6}", t.name)),
            };
            self.quote.insert(t.name.clone(), price);
            self.log("refit", detail);
        }
    }

    fn target_for(&mut self, required: u32) -> Option<Allocation> {
        if let Some(name) = &self.group_type {
            let ppn = self.sc.catalog.pods_per_node(name, &self.sc.pod).unwrap_or(1).max(1);
            return Some(Allocation::from_counts([(name.clone(), required.div_ceil(ppn))]));
        }
        if required == 0 {
            return Some(Allocation::new());
        }
        let opt = &self.sc.optimizer;
        let source = if opt.use_forecast { PriceSource::SpotForecast } else { PriceSource::Trace };
        let quote = PriceQuote::new(self.quote.clone(), source).ok()?;
        let excluded: BTreeSet<String> = self
            .exclusions
            .iter()
            .filter(|(_, &until)| until > self.now)
            .map(|(t, _)| t.clone())
            .collect();
        let build = |excl: &BTreeSet<String>| {
            OptimizationProblem::builder(self.sc.catalog.clone(), self.sc.pod, required, quote.clone())
                .exclude(excl.iter().cloned())
                .max_per_type(opt.max_per_type)
                .fixed_overhead(opt.fixed_overhead_usd_hr)
                .build()
        };
        let problem = match build(&excluded) {
            Ok(p) => p,
            Err(e) if !excluded.is_empty() => {
                self.log("optimizer_fallback", format!("{e}; retrying without exclusions"));
                build(&BTreeSet::new()).ok()?
            }
            Err(e) => {
                self.log("optimizer_failed", e.to_string());
                return None;
            }
        };
        let run_seed = mix_seed(self.seed, self.reoptimizations as u64);
        let front = match opt.algorithm {
            Algorithm::Nsga2 => nsga2(
                &problem,
                &Nsga2Params {
                    seed: run_seed,
                    ..opt.nsga.clone()
                },
            ),
            Algorithm::BruteForce => brute_force(&problem),
            Algorithm::Greedy => Err(crate::optimize::OptimizeError::EmptyFront),
        };
        let front = match front {
            Ok(f) => f,
            Err(e) => {
                if opt.algorithm != Algorithm::Greedy {
                    self.log("optimizer_fallback", format!("{e}; using greedy"));
                }
                match greedy(&problem) {
                    Ok((allocation, objectives)) => ParetoFront::from_candidates([FrontMember { allocation, objectives }]),
                    Err(e) => {
                        self.log("optimizer_failed", e.to_string());
                        return None;
                    }
                }
            }
        };
        select_allocation(&front, &opt.selection, &self.sc.catalog).ok()
    }

    fn finish(self) -> SimResult {
        let total = self.cost_by_type.values().sum();
        SimResult {
            policy: self.policy.to_string(),
            seed: self.seed,
            duration_s: self.sc.duration_s,
            on_demand_pricing: self.on_demand,
            fixed_overhead_usd_hr: self.overhead,
            total_cost_usd: total,
            cost_by_type: self.cost_by_type,
            slo_violation_s: self.slo_violation_s,
            terminations_injected: self.injected,
            terminations_handled: self.handled,
            reoptimizations: self.reoptimizations,
            reschedules: self.reschedules,
            decisions: self.decisions,
            series: self.series,
            nodes: self
                .nodes
                .into_values()
                .map(|n| NodeRecord {
                    id: n.id,
                    instance_type: n.instance_type,
                    zone: n.zone,
                    launched_at: n.launched_at,
                    ready_at: n.ready_at,
                    ended_at: n.ended_at,
                    cost_usd: n.cost,
                })
                .collect(),
            events: self.events,
        }
    }
}
