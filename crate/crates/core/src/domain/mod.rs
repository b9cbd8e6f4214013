//! Core data types shared by every module: instance catalog, pod shape,
//! allocations, price traces and load-test exports.
//!
//! Values are validated on construction and immutable afterwards.

mod io;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;

pub use io::{load_catalog, load_loadtest, load_price_history, parse_timestamp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },
    #[error("{0}")]
    Validation(String),
    #[error("{series}: timestamp {timestamp} does not increase (line {line})")]
    Ordering {
        series: String,
        timestamp: i64,
        line: u64,
    },
}

impl DomainError {
    pub(crate) fn parse(line: u64, reason: impl Into<String>) -> Self {
        DomainError::Parse {
            line,
            reason: reason.into(),
        }
    }

    pub(crate) fn validation(reason: impl Into<String>) -> Self {
        DomainError::Validation(reason.into())
    }
}

/// One purchasable node shape.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceTypeSpec<T> {
    pub name: String,
    pub family: String,
    pub vcpu: u32,
    pub mem_mib: u64,
    pub on_demand_usd_hr: T,
    pub zones: Vec<String>,
}

impl<T: Scalar> InstanceTypeSpec<T> {
    pub fn validate(&self) -> Result<(), DomainError> {
        if self.name.is_empty() {
            return Err(DomainError::validation("empty type name"));
        }
        if self.vcpu < 1 {
            return Err(DomainError::validation(format!("{}: vcpu must be >= 1", self.name)));
        }
        if self.mem_mib < 256 {
            return Err(DomainError::validation(format!(
                "{}: mem_mib must be >= 256",
                self.name
            )));
        }
        if !(self.on_demand_usd_hr >= T::zero()) || !self.on_demand_usd_hr.is_finite() {
            return Err(DomainError::validation(format!(
                "{}: on-demand price must be a non-negative number",
                self.name
            )));
        }
        if self.zones.is_empty() || self.zones.iter().any(|z| z.is_empty()) {
            return Err(DomainError::validation(format!("{}: zones must be non-empty", self.name)));
        }
        if self.family.is_empty() || !self.name.starts_with(&self.family) {
            return Err(DomainError::validation(format!(
                "{}: family '{}' is not a prefix of the name",
                self.name, self.family
            )));
        }
        Ok(())
    }
}

/// Capacity withheld from every node for the kubelet, OS and daemons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeOverhead<T> {
    pub cpu_fraction: T,
    pub mem_mib: u64,
}

impl<T: Scalar> Default for NodeOverhead<T> {
    fn default() -> Self {
        NodeOverhead {
            cpu_fraction: T::lit(0.10),
            mem_mib: 512,
        }
    }
}

impl<T: Scalar> NodeOverhead<T> {
    pub fn none() -> Self {
        NodeOverhead {
            cpu_fraction: T::zero(),
            mem_mib: 0,
        }
    }

    /// Allocatable (millicores, MiB) of a node after the reserve. The CPU
    /// reserve is rounded to the nearest millicore.
    pub fn allocatable<U>(&self, spec: &InstanceTypeSpec<U>) -> (u64, u64) {
        let raw_milli = spec.vcpu as u64 * 1000;
        let reserved = (T::from_count(raw_milli) * self.cpu_fraction)
            .round()
            .to_u64()
            .unwrap_or(u64::MAX);
        (
            raw_milli.saturating_sub(reserved),
            spec.mem_mib.saturating_sub(self.mem_mib),
        )
    }
}

/// The set of instance types the optimizer may choose from.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog<T> {
    types: Vec<InstanceTypeSpec<T>>,
    overhead: NodeOverhead<T>,
}

impl<T: Scalar> Catalog<T> {
    pub fn new(types: Vec<InstanceTypeSpec<T>>, overhead: NodeOverhead<T>) -> Result<Self, DomainError> {
        if types.is_empty() {
            return Err(DomainError::validation("catalog has no instance types"));
        }
        if !(overhead.cpu_fraction >= T::zero() && overhead.cpu_fraction < T::one()) {
            return Err(DomainError::validation("overhead cpu fraction must be in [0, 1)"));
        }
        let mut seen = BTreeSet::new();
        for t in &types {
            t.validate()?;
            if !seen.insert(t.name.as_str()) {
                return Err(DomainError::validation(format!("duplicate type '{}'", t.name)));
            }
            let (cpu, mem) = overhead.allocatable(t);
            if cpu == 0 || mem == 0 {
                return Err(DomainError::validation(format!(
                    "{}: overhead leaves no allocatable capacity",
                    t.name
                )));
            }
        }
        Ok(Catalog { types, overhead })
    }

    pub fn types(&self) -> &[InstanceTypeSpec<T>] {
        &self.types
    }

    pub fn overhead(&self) -> NodeOverhead<T> {
        self.overhead
    }

    pub fn with_overhead(self, overhead: NodeOverhead<T>) -> Result<Self, DomainError> {
        Catalog::new(self.types, overhead)
    }

    pub fn get(&self, name: &str) -> Option<&InstanceTypeSpec<T>> {
        self.types.iter().find(|t| t.name == name)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.types.iter().position(|t| t.name == name)
    }

    pub fn pods_per_node(&self, name: &str, pod: &PodSpec) -> Option<u32> {
        self.get(name).map(|t| pods_per_node(t, pod, &self.overhead))
    }

    /// Renders the catalog in the same CSV grammar accepted by [`load_catalog`].
    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,family,vcpu,mem_mib,on_demand_usd_hr,zones\n");
        for t in &self.types {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                t.name,
                t.family,
                t.vcpu,
                t.mem_mib,
                t.on_demand_usd_hr,
                t.zones.join(";")
            ));
        }
        out
    }
}

/// Resource request of one (homogeneous) pod.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PodSpec {
    pub cpu_millicores: u32,
    pub mem_mib: u64,
}

impl PodSpec {
    pub fn new(cpu_millicores: u32, mem_mib: u64) -> Result<Self, DomainError> {
        if cpu_millicores == 0 || mem_mib == 0 {
            return Err(DomainError::validation("pod cpu and memory must both be > 0"));
        }
        Ok(PodSpec {
            cpu_millicores,
            mem_mib,
        })
    }
}

impl Default for PodSpec {
    /// Half a vCPU and 1 GiB.
    fn default() -> Self {
        PodSpec {
            cpu_millicores: 500,
            mem_mib: 1024,
        }
    }
}

/// Service level objective: the minimum request rate the service must sustain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SloSpec<T> {
    pub min_rps: T,
}

impl<T: Scalar> SloSpec<T> {
    pub fn new(min_rps: T) -> Result<Self, DomainError> {
        if !(min_rps > T::zero()) || !min_rps.is_finite() {
            return Err(DomainError::validation("slo min_rps must be > 0"));
        }
        Ok(SloSpec { min_rps })
    }
}

/// How many homogeneous pods fit on one node of `spec` after `overhead`.
pub fn pods_per_node<T: Scalar, U>(spec: &InstanceTypeSpec<U>, pod: &PodSpec, overhead: &NodeOverhead<T>) -> u32 {
    let (cpu, mem) = overhead.allocatable(spec);
    let by_cpu = cpu / pod.cpu_millicores.max(1) as u64;
    let by_mem = mem / pod.mem_mib.max(1);
    by_cpu.min(by_mem).min(u32::MAX as u64) as u32
}

/// A multiset of instance types. Zero counts are never stored, so two
/// allocations compare equal iff they hold the same nodes.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Allocation {
    counts: BTreeMap<String, u32>,
}

impl Allocation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts<I, S>(counts: I) -> Self
    where
        I: IntoIterator<Item = (S, u32)>,
        S: Into<String>,
    {
        let mut a = Allocation::new();
        for (name, n) in counts {
            a.add(name, n);
        }
        a
    }

    pub fn add(&mut self, name: impl Into<String>, n: u32) {
        if n == 0 {
            return;
        }
        *self.counts.entry(name.into()).or_insert(0) += n;
    }

    /// Removes up to `n` nodes of `name`, returning how many were removed.
    pub fn remove(&mut self, name: &str, n: u32) -> u32 {
        let Some(c) = self.counts.get_mut(name) else {
            return 0;
        };
        let taken = n.min(*c);
        *c -= taken;
        if *c == 0 {
            self.counts.remove(name);
        }
        taken
    }

    pub fn count(&self, name: &str) -> u32 {
        self.counts.get(name).copied().unwrap_or(0)
    }

    pub fn total_nodes(&self) -> u32 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.counts.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Checks every key against the catalog.
    pub fn validate<T: Scalar>(&self, catalog: &Catalog<T>) -> Result<(), DomainError> {
        match self.counts.keys().find(|k| catalog.get(k).is_none()) {
            Some(k) => Err(DomainError::validation(format!("unknown instance type '{k}'"))),
            None => Ok(()),
        }
    }

    /// Parses the `type:count;type:count` rendering produced by `Display`.
    pub fn parse(text: &str) -> Result<Self, DomainError> {
        let mut a = Allocation::new();
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, n) = part
                .rsplit_once(':')
                .ok_or_else(|| DomainError::validation(format!("bad allocation entry '{part}'")))?;
            let n: u32 = n
                .parse()
                .map_err(|_| DomainError::validation(format!("bad count in '{part}'")))?;
            a.add(name, n);
        }
        Ok(a)
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, v) in &self.counts {
            if !first {
                f.write_str(";")?;
            }
            first = false;
            write!(f, "{k}:{v}")?;
        }
        Ok(())
    }
}

/// Price observations for one (instance type, zone) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries<T> {
    pub instance_type: String,
    pub zone: String,
    /// (unix seconds, usd per hour), strictly increasing in time.
    pub points: Vec<(i64, T)>,
}

impl<T: Scalar> PriceSeries<T> {
    pub fn new(instance_type: impl Into<String>, zone: impl Into<String>, points: Vec<(i64, T)>) -> Result<Self, DomainError> {
        let s = PriceSeries {
            instance_type: instance_type.into(),
            zone: zone.into(),
            points,
        };
        for w in s.points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(DomainError::Ordering {
                    series: s.key(),
                    timestamp: w[1].0,
                    line: 0,
                });
            }
        }
        if let Some((t, _)) = s.points.iter().find(|(_, p)| !(*p > T::zero()) || !p.is_finite()) {
            return Err(DomainError::validation(format!("{}: non-positive price at {t}", s.key())));
        }
        Ok(s)
    }

    pub fn key(&self) -> String {
        format!("{}/{}", self.instance_type, self.zone)
    }

    /// Zero-order hold: the latest price at or before `t`, or the first
    /// price when `t` precedes the series.
    pub fn price_at(&self, t: i64) -> Option<T> {
        let idx = self.points.partition_point(|(ts, _)| *ts <= t);
        match idx {
            0 => self.points.first().map(|p| p.1),
            i => Some(self.points[i - 1].1),
        }
    }

    pub fn min_price(&self) -> Option<T> {
        self.points.iter().map(|p| p.1).reduce(T::min)
    }
}

/// One row of a load-test export.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadSample<T> {
    pub rps: T,
    pub cpu_percent: T,
    pub failure_rate_percent: T,
}

/// Load-test samples ordered by strictly increasing request rate.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadTestSeries<T> {
    samples: Vec<LoadSample<T>>,
}

impl<T: Scalar> LoadTestSeries<T> {
    pub fn new(mut samples: Vec<LoadSample<T>>) -> Result<Self, DomainError> {
        if samples.len() < 3 {
            return Err(DomainError::validation("need >= 3 samples"));
        }
        let hundred = T::lit(100.0);
        for s in &samples {
            if !s.rps.is_finite() || s.rps < T::zero() {
                return Err(DomainError::validation("rps must be a non-negative number"));
            }
            if !s.cpu_percent.is_finite() || s.cpu_percent < T::zero() {
                return Err(DomainError::validation("cpu_percent must be >= 0"));
            }
            if !(s.failure_rate_percent >= T::zero() && s.failure_rate_percent <= hundred) {
                return Err(DomainError::validation(format!(
                    "failure rate {} outside [0, 100]",
                    s.failure_rate_percent
                )));
            }
        }
        samples.sort_by(|a, b| a.rps.partial_cmp(&b.rps).expect("finite rps"));
        if samples.windows(2).any(|w| w[1].rps <= w[0].rps) {
            return Err(DomainError::validation("rps values must be distinct"));
        }
        Ok(LoadTestSeries { samples })
    }

    pub fn samples(&self) -> &[LoadSample<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}
