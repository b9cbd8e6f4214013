use std::cmp::Ordering;

use super::{FrontMember, ObjectiveVector, OptimizationProblem, OptimizeError};
use crate::domain::Allocation;
use crate::scalar::Scalar;

/// Adds one node at a time of the type with the lowest price per pod slot
/// (ties: more slots, then name) until the workload fits.
pub fn greedy<T: Scalar>(problem: &OptimizationProblem<T>) -> Result<(Allocation, ObjectiveVector<T>), OptimizeError> {
    let counts = greedy_counts(problem)?;
    let FrontMember { allocation, objectives } = problem.member(&counts);
    Ok((allocation, objectives))
}

pub(super) fn greedy_counts<T: Scalar>(problem: &OptimizationProblem<T>) -> Result<Vec<u32>, OptimizeError> {
    let cands = problem.candidates();
    let mut order: Vec<usize> = (0..cands.len()).collect();
    order.sort_by(|&a, &b| {
        let (ca, cb) = (&cands[a], &cands[b]);
        let ua = ca.price / T::from_count(ca.pods_per_node as u64);
        let ub = cb.price / T::from_count(cb.pods_per_node as u64);
        ua.partial_cmp(&ub)
            .unwrap_or(Ordering::Equal)
            .then(cb.pods_per_node.cmp(&ca.pods_per_node))
            .then_with(|| ca.name.cmp(&cb.name))
    });

    let required = problem.required_pods() as u64;
    let mut counts = vec![0u32; cands.len()];
    let mut capacity = 0u64;
    // The preferred type never changes while it has headroom, so each step
    // picks the first non-exhausted type in `order`.
    for &i in &order {
        while capacity < required && counts[i] < problem.max_per_type() {
            counts[i] += 1;
            capacity += cands[i].pods_per_node as u64;
        }
        if capacity >= required {
            return Ok(counts);
        }
    }
    Err(OptimizeError::Infeasible(format!(
        "per-type caps exhausted at {capacity} of {required} pods"
    )))
}
