//! Node-combination optimization: cost model, capacity check, Pareto
//! machinery and three search strategies (exhaustive, greedy, NSGA-II).
//!
//! Objectives are hourly cost (minimize) and node count (maximize). A
//! combination is feasible when its pod capacity covers the workload.

mod brute;
mod greedy;
mod nsga2;
mod select;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::domain::{pods_per_node, Allocation, Catalog, PodSpec};
use crate::scalar::Scalar;

pub use brute::{brute_force, brute_force_with_cap, DEFAULT_ENUMERATION_CAP};
pub use greedy::greedy;
pub use nsga2::{nsga2, Nsga2Params};
pub use select::{select_allocation, SelectionPolicy};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OptimizeError {
    #[error("no price for instance type '{0}'")]
    UnpricedType(String),
    #[error("search space of {size} combinations exceeds the cap of {cap}")]
    SearchSpaceTooLarge { size: u128, cap: u128 },
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("no feasible allocation found after {generations} generations")]
    NoFeasibleFound { generations: usize },
    #[error("pareto front is empty")]
    EmptyFront,
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriceSource {
    SpotForecast,
    Trace,
    OnDemand,
}

impl fmt::Display for PriceSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriceSource::SpotForecast => "spot-forecast",
            PriceSource::Trace => "trace",
            PriceSource::OnDemand => "on-demand",
        })
    }
}

/// Hourly price of each instance type.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceQuote<T> {
    prices: BTreeMap<String, T>,
    pub source: PriceSource,
}

impl<T: Scalar> PriceQuote<T> {
    pub fn new(prices: BTreeMap<String, T>, source: PriceSource) -> Result<Self, OptimizeError> {
        if let Some((name, _)) = prices.iter().find(|(_, p)| !(**p > T::zero()) || !p.is_finite()) {
            return Err(OptimizeError::InvalidProblem(format!("price for '{name}' must be > 0")));
        }
        Ok(PriceQuote { prices, source })
    }

    pub fn on_demand(catalog: &Catalog<T>) -> Result<Self, OptimizeError> {
        Self::new(
            catalog
                .types()
                .iter()
                .map(|t| (t.name.clone(), t.on_demand_usd_hr))
                .collect(),
            PriceSource::OnDemand,
        )
    }

    pub fn get(&self, name: &str) -> Option<T> {
        self.prices.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, T)> {
        self.prices.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// `fixed_overhead + Σ price_i × count_i`, summed in type-name order.
pub fn allocation_cost<T: Scalar>(alloc: &Allocation, prices: &PriceQuote<T>, fixed_overhead: T) -> Result<T, OptimizeError> {
    let mut cost = T::zero();
    for (name, n) in alloc.iter() {
        let p = prices.get(name).ok_or_else(|| OptimizeError::UnpricedType(name.to_owned()))?;
        cost += p * T::from_count(n as u64);
    }
    Ok(cost + fixed_overhead)
}

/// Total pods the allocation can host. Types missing from the catalog hold none.
pub fn capacity_pods<T: Scalar>(alloc: &Allocation, catalog: &Catalog<T>, pod: &PodSpec) -> u64 {
    alloc
        .iter()
        .map(|(name, n)| catalog.pods_per_node(name, pod).unwrap_or(0) as u64 * n as u64)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveVector<T> {
    pub cost_usd_hr: T,
    pub node_count: u32,
    pub feasible: bool,
    pub shortfall_pods: u64,
}

impl<T: Scalar> ObjectiveVector<T> {
    pub fn new(cost_usd_hr: T, node_count: u32, shortfall_pods: u64) -> Self {
        ObjectiveVector {
            cost_usd_hr,
            node_count,
            feasible: shortfall_pods == 0,
            shortfall_pods,
        }
    }
}

/// Constrained domination: feasible beats infeasible, infeasibles compare
/// by shortfall, feasibles by Pareto dominance on (cost ↓, nodes ↑).
pub fn dominates<T: Scalar>(a: &ObjectiveVector<T>, b: &ObjectiveVector<T>) -> bool {
    match (a.feasible, b.feasible) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.shortfall_pods < b.shortfall_pods,
        (true, true) => {
            a.cost_usd_hr <= b.cost_usd_hr
                && a.node_count >= b.node_count
                && (a.cost_usd_hr < b.cost_usd_hr || a.node_count > b.node_count)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontMember<T> {
    pub allocation: Allocation,
    pub objectives: ObjectiveVector<T>,
}

fn member_order<T: Scalar>(a: &FrontMember<T>, b: &FrontMember<T>) -> Ordering {
    a.objectives
        .cost_usd_hr
        .partial_cmp(&b.objectives.cost_usd_hr)
        .unwrap_or(Ordering::Equal)
        .then(b.objectives.node_count.cmp(&a.objectives.node_count))
        .then_with(|| a.allocation.cmp(&b.allocation))
}

/// Mutually non-dominated feasible allocations ordered by cost ascending,
/// then node count descending, then allocation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParetoFront<T> {
    members: Vec<FrontMember<T>>,
}

impl<T: Scalar> ParetoFront<T> {
    /// Keeps the feasible, non-dominated, distinct candidates.
    pub fn from_candidates(candidates: impl IntoIterator<Item = FrontMember<T>>) -> Self {
        let mut pool: Vec<FrontMember<T>> = candidates.into_iter().filter(|m| m.objectives.feasible).collect();
        pool.sort_by(member_order);
        pool.dedup_by(|a, b| a.allocation == b.allocation);
        let members = pool
            .iter()
            .filter(|m| !pool.iter().any(|o| dominates(&o.objectives, &m.objectives)))
            .cloned()
            .collect();
        ParetoFront { members }
    }

    pub fn members(&self) -> &[FrontMember<T>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn allocations(&self) -> BTreeSet<Allocation> {
        self.members.iter().map(|m| m.allocation.clone()).collect()
    }

    pub fn min_cost(&self) -> Option<&FrontMember<T>> {
        self.members.first()
    }
}

/// One searchable instance type: not excluded and able to host at least one pod.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<T> {
    pub name: String,
    pub pods_per_node: u32,
    pub price: T,
}

/// A sizing request: place `required_pods` homogeneous pods on a multiset of
/// instance types drawn from the catalog, at most `max_per_type` each.
#[derive(Debug, Clone)]
pub struct OptimizationProblem<T> {
    catalog: Catalog<T>,
    pod: PodSpec,
    required_pods: u32,
    prices: PriceQuote<T>,
    excluded: BTreeSet<String>,
    max_per_type: u32,
    fixed_overhead_usd_hr: T,
    candidates: Vec<Candidate<T>>,
}

pub const DEFAULT_MAX_PER_TYPE: u32 = 10;

/// Collects problem settings before validation.
#[derive(Debug, Clone)]
pub struct ProblemBuilder<T> {
    catalog: Catalog<T>,
    pod: PodSpec,
    required_pods: u32,
    prices: PriceQuote<T>,
    excluded: BTreeSet<String>,
    max_per_type: u32,
    fixed_overhead_usd_hr: T,
}

impl<T: Scalar> ProblemBuilder<T> {
    pub fn exclude<I, S>(mut self, types: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.excluded.extend(types.into_iter().map(Into::into));
        self
    }

    pub fn max_per_type(mut self, n: u32) -> Self {
        self.max_per_type = n;
        self
    }

    pub fn fixed_overhead(mut self, usd_hr: T) -> Self {
        self.fixed_overhead_usd_hr = usd_hr;
        self
    }

    pub fn build(self) -> Result<OptimizationProblem<T>, OptimizeError> {
        if self.required_pods < 1 {
            return Err(OptimizeError::InvalidProblem("required_pods must be >= 1".into()));
        }
        if !(self.fixed_overhead_usd_hr >= T::zero()) {
            return Err(OptimizeError::InvalidProblem("fixed overhead must be >= 0".into()));
        }
        if let Some(name) = self.excluded.iter().find(|n| self.catalog.get(n).is_none()) {
            return Err(OptimizeError::InvalidProblem(format!("excluded type '{name}' is not in the catalog")));
        }
        let mut candidates = Vec::new();
        for t in self.catalog.types() {
            let price = self.prices.get(&t.name).ok_or_else(|| OptimizeError::UnpricedType(t.name.clone()))?;
            let fit = pods_per_node(t, &self.pod, &self.catalog.overhead());
            if fit > 0 && !self.excluded.contains(&t.name) {
                candidates.push(Candidate {
                    name: t.name.clone(),
                    pods_per_node: fit,
                    price,
                });
            }
        }
        if candidates.is_empty() {
            return Err(OptimizeError::Infeasible(
                "pod fits on no non-excluded instance type".into(),
            ));
        }
        // name order matches Allocation iteration, so evaluate() and
        // allocation_cost() sum identically
        candidates.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(OptimizationProblem {
            catalog: self.catalog,
            pod: self.pod,
            required_pods: self.required_pods,
            prices: self.prices,
            excluded: self.excluded,
            max_per_type: self.max_per_type,
            fixed_overhead_usd_hr: self.fixed_overhead_usd_hr,
            candidates,
        })
    }
}

impl<T: Scalar> OptimizationProblem<T> {
    pub fn builder(catalog: Catalog<T>, pod: PodSpec, required_pods: u32, prices: PriceQuote<T>) -> ProblemBuilder<T> {
        ProblemBuilder {
            catalog,
            pod,
            required_pods,
            prices,
            excluded: BTreeSet::new(),
            max_per_type: DEFAULT_MAX_PER_TYPE,
            fixed_overhead_usd_hr: T::zero(),
        }
    }

    pub fn catalog(&self) -> &Catalog<T> {
        &self.catalog
    }

    pub fn pod(&self) -> &PodSpec {
        &self.pod
    }

    pub fn required_pods(&self) -> u32 {
        self.required_pods
    }

    pub fn prices(&self) -> &PriceQuote<T> {
        &self.prices
    }

    pub fn excluded(&self) -> &BTreeSet<String> {
        &self.excluded
    }

    pub fn max_per_type(&self) -> u32 {
        self.max_per_type
    }

    pub fn fixed_overhead(&self) -> T {
        self.fixed_overhead_usd_hr
    }

    pub fn candidates(&self) -> &[Candidate<T>] {
        &self.candidates
    }

    /// Objectives of a count vector indexed like [`Self::candidates`].
    pub fn evaluate(&self, counts: &[u32]) -> ObjectiveVector<T> {
        let mut cost = T::zero();
        let mut nodes = 0u32;
        let mut capacity = 0u64;
        for (c, &n) in self.candidates.iter().zip(counts) {
            if n > 0 {
                cost += c.price * T::from_count(n as u64);
                nodes += n;
                capacity += c.pods_per_node as u64 * n as u64;
            }
        }
        let shortfall = (self.required_pods as u64).saturating_sub(capacity);
        ObjectiveVector::new(cost + self.fixed_overhead_usd_hr, nodes, shortfall)
    }

    pub fn to_allocation(&self, counts: &[u32]) -> Allocation {
        Allocation::from_counts(self.candidates.iter().zip(counts).map(|(c, &n)| (c.name.clone(), n)))
    }

    pub fn member(&self, counts: &[u32]) -> FrontMember<T> {
        FrontMember {
            allocation: self.to_allocation(counts),
            objectives: self.evaluate(counts),
        }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use crate::domain::{InstanceTypeSpec, NodeOverhead};

    /// Type `name` with `vcpu` whole cores and no overhead, so that a
    /// 1000m/1024MiB pod fits exactly `vcpu` times.
    pub fn ty(name: &str, vcpu: u32, on_demand: f64) -> InstanceTypeSpec<f64> {
        let family = name.split('.').next().unwrap().to_owned();
        InstanceTypeSpec {
            name: name.into(),
            family,
            vcpu,
            mem_mib: vcpu as u64 * 1024,
            on_demand_usd_hr: on_demand,
            zones: vec![format!("{name}-zone")],
        }
    }

    pub fn unit_pod() -> PodSpec {
        PodSpec::new(1000, 1024).unwrap()
    }

    /// Type `a.x` fits 2 pods at 0.010/h, `b.x` fits 5 pods at 0.015/h.
    pub fn two_type(required: u32, max_per_type: u32) -> OptimizationProblem<f64> {
        let catalog = Catalog::new(vec![ty("a.x", 2, 0.05), ty("b.x", 5, 0.08)], NodeOverhead::none()).unwrap();
        let prices = PriceQuote::new(
            [("a.x".to_owned(), 0.010), ("b.x".to_owned(), 0.015)].into_iter().collect(),
            PriceSource::Trace,
        )
        .unwrap();
        OptimizationProblem::builder(catalog, unit_pod(), required, prices)
            .max_per_type(max_per_type)
            .build()
            .unwrap()
    }
}
