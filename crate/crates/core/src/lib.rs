//! Cost-optimal spot-instance cluster sizing and autoscaling.
//!
//! The pipeline runs from a single-pod load test to a cluster plan:
//!
//! * [`characterize`] finds a pod's sustainable request rate and the pod
//!   count needed for an SLO,
//! * [`forecast`] predicts spot prices per instance type and derives bids,
//! * [`optimize`] searches node combinations for the cost / node-count
//!   Pareto front and picks one,
//! * [`autoscale`] reacts to utilization swings and spot terminations,
//! * [`sim`] replays price and workload traces through a policy and does
//!   the cost accounting.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases at
//! the crate root fix the scalar to `f64`, which the simulator uses.

// `!(x > 0)` is used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autoscale;
pub mod characterize;
pub mod domain;
pub mod forecast;
pub mod optimize;
pub mod scalar;
pub mod sim;

pub use scalar::{format_money, round_half_even, Scalar};

pub use domain::{Allocation, PodSpec};

pub type InstanceTypeSpec = domain::InstanceTypeSpec<f64>;
pub type NodeOverhead = domain::NodeOverhead<f64>;
pub type Catalog = domain::Catalog<f64>;
pub type SloSpec = domain::SloSpec<f64>;
pub type PriceSeries = domain::PriceSeries<f64>;
pub type LoadSample = domain::LoadSample<f64>;
pub type LoadTestSeries = domain::LoadTestSeries<f64>;

pub type Thresholds = characterize::Thresholds<f64>;
pub type CharacterizationReport = characterize::CharacterizationReport<f64>;

pub type ForecastModel = forecast::ForecastModel<f64>;
pub type PriceForecast = forecast::PriceForecast<f64>;

pub type PriceQuote = optimize::PriceQuote<f64>;
pub type OptimizationProblem = optimize::OptimizationProblem<f64>;
pub type ObjectiveVector = optimize::ObjectiveVector<f64>;
pub type ParetoFront = optimize::ParetoFront<f64>;

pub type ScalerConfig = autoscale::ScalerConfig<f64>;
pub type ClusterState = autoscale::ClusterState<f64>;
