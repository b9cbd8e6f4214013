//! Metric analysis of single-pod load tests and the SLO-driven pod count.
//!
//! A pod's sustainable capacity is the last load-test sample before either
//! failures exceed a threshold or CPU usage starts falling away from its
//! running peak. Both signals mark the point where the pod begins to crash.

use thiserror::Error;

use crate::domain::{LoadTestSeries, SloSpec};
use crate::scalar::{ceil_count, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CharacterizeError {
    #[error("first load-test sample already violates the failure threshold")]
    NoSustainableLoad,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Detection thresholds, both in percentage points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds<T> {
    pub failure_threshold_pct: T,
    pub cpu_drop_pct: T,
}

impl<T: Scalar> Default for Thresholds<T> {
    fn default() -> Self {
        Thresholds {
            failure_threshold_pct: T::lit(2.0),
            cpu_drop_pct: T::lit(5.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacterizationReport<T> {
    pub max_rps_per_pod: T,
    pub inflection_index: usize,
    pub initial_pods: u32,
    pub failure_threshold_used: T,
}

/// Returns the rps of the last sample `i` such that every sample up to and
/// including `i` has failures within threshold and CPU no more than
/// `cpu_drop_pct` below the running CPU maximum. Also returns `i`.
pub fn max_rps_per_pod<T: Scalar>(
    series: &LoadTestSeries<T>,
    failure_threshold_pct: T,
    cpu_drop_pct: T,
) -> Result<(T, usize), CharacterizeError> {
    if !(failure_threshold_pct > T::zero()) || !(cpu_drop_pct > T::zero()) {
        return Err(CharacterizeError::InvalidInput(
            "thresholds must be > 0".into(),
        ));
    }
    let mut peak_cpu = T::neg_infinity();
    let mut last_ok = None;
    for (i, s) in series.samples().iter().enumerate() {
        peak_cpu = peak_cpu.max(s.cpu_percent);
        let failing = s.failure_rate_percent > failure_threshold_pct;
        let collapsing = s.cpu_percent < peak_cpu - cpu_drop_pct;
        if failing || collapsing {
            break;
        }
        last_ok = Some(i);
    }
    let i = last_ok.ok_or(CharacterizeError::NoSustainableLoad)?;
    Ok((series.samples()[i].rps, i))
}

/// `ceil(slo.min_rps / max_rps_per_pod)`, never below one.
pub fn initial_pod_count<T: Scalar>(slo: &SloSpec<T>, max_rps_per_pod: T) -> Result<u32, CharacterizeError> {
    if !(max_rps_per_pod > T::zero()) || !max_rps_per_pod.is_finite() {
        return Err(CharacterizeError::InvalidInput(
            "max_rps_per_pod must be > 0".into(),
        ));
    }
    let mut n = ceil_count(slo.min_rps / max_rps_per_pod).max(1);
    // The quotient can round down across an integer boundary.
    while T::from_count(n) * max_rps_per_pod < slo.min_rps {
        n += 1;
    }
    u32::try_from(n).map_err(|_| CharacterizeError::InvalidInput("pod count overflows".into()))
}

pub fn characterize<T: Scalar>(
    series: &LoadTestSeries<T>,
    slo: &SloSpec<T>,
    thresholds: &Thresholds<T>,
) -> Result<CharacterizationReport<T>, CharacterizeError> {
    let (max_rps, idx) = max_rps_per_pod(series, thresholds.failure_threshold_pct, thresholds.cpu_drop_pct)?;
    let initial_pods = initial_pod_count(slo, max_rps)?;
    Ok(CharacterizationReport {
        max_rps_per_pod: max_rps,
        inflection_index: idx,
        initial_pods,
        failure_threshold_used: thresholds.failure_threshold_pct,
    })
}
