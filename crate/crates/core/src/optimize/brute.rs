use super::{dominates, FrontMember, ObjectiveVector, OptimizationProblem, OptimizeError, ParetoFront};
use crate::scalar::Scalar;

pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// Exact front by enumerating every count vector in `[0, max_per_type]^k`.
pub fn brute_force<T: Scalar>(problem: &OptimizationProblem<T>) -> Result<ParetoFront<T>, OptimizeError> {
    brute_force_with_cap(problem, DEFAULT_ENUMERATION_CAP)
}

pub fn brute_force_with_cap<T: Scalar>(problem: &OptimizationProblem<T>, cap: u128) -> Result<ParetoFront<T>, OptimizeError> {
    let k = problem.candidates().len();
    let max = problem.max_per_type();
    let size = (max as u128 + 1).checked_pow(k as u32).unwrap_or(u128::MAX);
    if size > cap {
        return Err(OptimizeError::SearchSpaceTooLarge { size, cap });
    }

    // Running non-dominated set; small compared to the space.
    let mut front: Vec<(Vec<u32>, ObjectiveVector<T>)> = Vec::new();
    let mut counts = vec![0u32; k];
    loop {
        let obj = problem.evaluate(&counts);
        if obj.feasible && !front.iter().any(|(_, o)| dominates(o, &obj)) {
            front.retain(|(_, o)| !dominates(&obj, o));
            front.push((counts.clone(), obj));
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == k {
                return Ok(ParetoFront::from_candidates(
                    front.into_iter().map(|(c, objectives)| FrontMember {
                        allocation: problem.to_allocation(&c),
                        objectives,
                    }),
                ));
            }
            if counts[i] < max {
                counts[i] += 1;
                break;
            }
            counts[i] = 0;
            i += 1;
        }
    }
}
