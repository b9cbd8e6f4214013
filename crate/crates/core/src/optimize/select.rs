use std::cmp::Ordering;
use std::collections::BTreeSet;

use super::{FrontMember, OptimizeError, ParetoFront};
use crate::domain::{Allocation, Catalog};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SelectionPolicy {
    pub min_nodes: u32,
    pub prefer_diversity: bool,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        SelectionPolicy {
            min_nodes: 1,
            prefer_diversity: true,
        }
    }
}

fn families<T>(alloc: &Allocation, catalog: &Catalog<T>) -> usize
where
    T: Scalar,
{
    alloc
        .iter()
        .filter_map(|(name, _)| catalog.get(name).map(|t| t.family.as_str()))
        .collect::<BTreeSet<_>>()
        .len()
}

fn zones<T: Scalar>(alloc: &Allocation, catalog: &Catalog<T>) -> usize {
    alloc
        .iter()
        .filter_map(|(name, _)| catalog.get(name))
        .flat_map(|t| t.zones.iter().map(String::as_str))
        .collect::<BTreeSet<_>>()
        .len()
}

/// Cheapest front member with at least `min_nodes` nodes (or the whole
/// front when none qualify). Cost ties prefer more families, more zones,
/// more nodes, then the lexicographically smaller allocation.
pub fn select_allocation<T: Scalar>(
    front: &ParetoFront<T>,
    policy: &SelectionPolicy,
    catalog: &Catalog<T>,
) -> Result<Allocation, OptimizeError> {
    if front.is_empty() {
        return Err(OptimizeError::EmptyFront);
    }
    let mut pool: Vec<&FrontMember<T>> = front
        .members()
        .iter()
        .filter(|m| m.objectives.node_count >= policy.min_nodes)
        .collect();
    if pool.is_empty() {
        pool = front.members().iter().collect();
    }
    let key = |m: &FrontMember<T>| {
        if policy.prefer_diversity {
            (families(&m.allocation, catalog), zones(&m.allocation, catalog))
        } else {
            (0, 0)
        }
    };
    pool.into_iter()
        .min_by(|a, b| {
            a.objectives
                .cost_usd_hr
                .partial_cmp(&b.objectives.cost_usd_hr)
                .unwrap_or(Ordering::Equal)
                .then_with(|| key(b).cmp(&key(a)))
                .then(b.objectives.node_count.cmp(&a.objectives.node_count))
                .then_with(|| a.allocation.cmp(&b.allocation))
        })
        .map(|m| m.allocation.clone())
        .ok_or(OptimizeError::EmptyFront)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::ty;
    use super::super::ObjectiveVector;
    use super::*;
    use crate::domain::NodeOverhead;
    use proptest::prelude::*;

    fn catalog() -> Catalog<f64> {
        Catalog::new(
            vec![ty("a.x", 2, 0.1), ty("b.x", 5, 0.1), ty("a.y", 2, 0.1)],
            NodeOverhead::none(),
        )
        .unwrap()
    }

    fn member(alloc: &[(&str, u32)], cost: f64) -> FrontMember<f64> {
        let allocation = Allocation::from_counts(alloc.iter().map(|(k, v)| (k.to_string(), *v)));
        let n = allocation.total_nodes();
        FrontMember {
            allocation,
            objectives: ObjectiveVector::new(cost, n, 0),
        }
    }

    fn front() -> ParetoFront<f64> {
        ParetoFront::from_candidates(vec![
            member(&[("b.x", 1)], 0.015),
            member(&[("a.x", 1), ("b.x", 1)], 0.025),
            member(&[("a.x", 3)], 0.030),
        ])
    }

    #[test]
    fn cheapest_by_default() {
        let p = SelectionPolicy::default();
        assert_eq!(select_allocation(&front(), &p, &catalog()).unwrap().to_string(), "b.x:1");
    }

    #[test]
    fn min_nodes_filter() {
        let p = SelectionPolicy {
            min_nodes: 2,
            prefer_diversity: true,
        };
        assert_eq!(select_allocation(&front(), &p, &catalog()).unwrap().to_string(), "a.x:1;b.x:1");
        let p = SelectionPolicy {
            min_nodes: 50,
            prefer_diversity: true,
        };
        assert_eq!(select_allocation(&front(), &p, &catalog()).unwrap().to_string(), "b.x:1");
    }

    #[test]
    fn family_tie_break() {
        // a.x and a.y share family "a"; a.x + b.x spans two families
        let f = ParetoFront::from_candidates(vec![member(&[("a.x", 1), ("a.y", 1)], 0.02), member(&[("a.x", 1), ("b.x", 1)], 0.02)]);
        let got = select_allocation(&f, &SelectionPolicy::default(), &catalog()).unwrap();
        assert_eq!(got.to_string(), "a.x:1;b.x:1");
        let plain = SelectionPolicy {
            min_nodes: 1,
            prefer_diversity: false,
        };
        assert_eq!(select_allocation(&f, &plain, &catalog()).unwrap().to_string(), "a.x:1;a.y:1");
    }

    #[test]
    fn empty_front() {
        assert_eq!(
            select_allocation(&ParetoFront::<f64>::default(), &SelectionPolicy::default(), &catalog()),
            Err(OptimizeError::EmptyFront)
        );
    }

    proptest! {
        #[test]
        fn order_independent(perm in Just(vec![0usize, 1, 2, 3]).prop_shuffle(), min_nodes in 0u32..4) {
            let ms = [
                member(&[("b.x", 1)], 0.02),
                member(&[("a.x", 1)], 0.02),
                member(&[("a.x", 1), ("b.x", 1)], 0.03),
                member(&[("a.y", 3)], 0.04),
            ];
            let policy = SelectionPolicy { min_nodes, prefer_diversity: true };
            // from_candidates sorts, so feed a raw front through its members
            let base = ParetoFront { members: ms.to_vec() };
            let shuffled = ParetoFront { members: perm.iter().map(|&i| ms[i].clone()).collect() };
            prop_assert_eq!(
                select_allocation(&base, &policy, &catalog()).unwrap(),
                select_allocation(&shuffled, &policy, &catalog()).unwrap()
            );
        }
    }
}
