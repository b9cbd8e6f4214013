//! NSGA-II over integer count vectors.
//!
//! Gene `i` is the node count of candidate type `i`, kept in
//! `[0, max_per_type]`. Ranking uses constrained domination so feasible
//! vectors always outrank infeasible ones.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::greedy::greedy_counts;
use super::{dominates, ObjectiveVector, OptimizationProblem, OptimizeError, ParetoFront};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Nsga2Params {
    pub population: usize,
    pub generations: usize,
    pub crossover_p: f64,
    /// Per-gene mutation probability; `None` means `1 / genes`.
    pub mutation_p: Option<f64>,
    pub seed: u64,
}

impl Default for Nsga2Params {
    fn default() -> Self {
        Nsga2Params {
            population: 64,
            generations: 100,
            crossover_p: 0.9,
            mutation_p: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
struct Individual<T> {
    genes: Vec<u32>,
    obj: ObjectiveVector<T>,
    rank: usize,
    crowding: f64,
}

pub fn nsga2<T: Scalar>(problem: &OptimizationProblem<T>, params: &Nsga2Params) -> Result<ParetoFront<T>, OptimizeError> {
    let n = params.population;
    if n < 4 || !n.is_multiple_of(2) {
        return Err(OptimizeError::InvalidProblem(format!("population must be even and >= 4, got {n}")));
    }
    if !(0.0..=1.0).contains(&params.crossover_p) {
        return Err(OptimizeError::InvalidProblem("crossover_p must be in [0, 1]".into()));
    }
    let k = problem.candidates().len();
    let max = problem.max_per_type();
    let mutation_p = params.mutation_p.unwrap_or(1.0 / k as f64);
    if !(0.0..=1.0).contains(&mutation_p) {
        return Err(OptimizeError::InvalidProblem("mutation_p must be in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let make = |genes: Vec<u32>| Individual {
        obj: problem.evaluate(&genes),
        genes,
        rank: 0,
        crowding: 0.0,
    };

    let mut pop: Vec<Individual<T>> = Vec::with_capacity(2 * n);
    if let Ok(g) = greedy_counts(problem) {
        pop.push(make(g));
    }
    while pop.len() < n {
        let genes = (0..k).map(|_| rng.random_range(0..=max)).collect();
        pop.push(make(genes));
    }
    let mut pop = survive(pop, n);

    for _ in 0..params.generations {
        let mut offspring = Vec::with_capacity(n);
        while offspring.len() < n {
            let p1 = tournament(&pop, &mut rng);
            let p2 = tournament(&pop, &mut rng);
            let (mut c1, mut c2) = (pop[p1].genes.clone(), pop[p2].genes.clone());
            if rng.random_bool(params.crossover_p) {
                for i in 0..k {
                    if rng.random_bool(0.5) {
                        std::mem::swap(&mut c1[i], &mut c2[i]);
                    }
                }
            }
            for child in [&mut c1, &mut c2] {
                mutate(child, max, mutation_p, &mut rng);
            }
            offspring.push(make(c1));
            offspring.push(make(c2));
        }
        pop.extend(offspring);
        pop = survive(pop, n);
    }

    let front = ParetoFront::from_candidates(pop.iter().map(|ind| problem.member(&ind.genes)));
    if front.is_empty() {
        return Err(OptimizeError::NoFeasibleFound {
            generations: params.generations,
        });
    }
    Ok(front)
}

fn mutate(genes: &mut [u32], max: u32, p: f64, rng: &mut ChaCha8Rng) {
    for g in genes.iter_mut() {
        if rng.random_bool(p) {
            *g = if rng.random_bool(0.5) {
                (*g + 1).min(max)
            } else {
                g.saturating_sub(1)
            };
        }
    }
}

/// Binary tournament on (rank ↑, crowding ↓).
fn tournament<T>(pop: &[Individual<T>], rng: &mut ChaCha8Rng) -> usize {
    let a = rng.random_range(0..pop.len());
    let b = rng.random_range(0..pop.len());
    if crowded_cmp(&pop[b], &pop[a]) == Ordering::Less {
        b
    } else {
        a
    }
}

fn crowded_cmp<T>(a: &Individual<T>, b: &Individual<T>) -> Ordering {
    a.rank
        .cmp(&b.rank)
        .then(b.crowding.partial_cmp(&a.crowding).unwrap_or(Ordering::Equal))
}

/// Elitist reduction to `n` individuals. Distinct genomes are ranked first;
/// repeated genomes only fill leftover slots so the population keeps spread.
fn survive<T: Scalar>(pool: Vec<Individual<T>>, n: usize) -> Vec<Individual<T>> {
    let mut seen = HashSet::new();
    let (mut unique, mut dupes): (Vec<_>, Vec<_>) = (Vec::new(), Vec::new());
    for ind in pool {
        if seen.insert(ind.genes.clone()) {
            unique.push(ind);
        } else {
            dupes.push(ind);
        }
    }

    let fronts = non_dominated_sort(&unique);
    let mut next: Vec<Individual<T>> = Vec::with_capacity(n);
    let mut slots: Vec<Option<Individual<T>>> = unique.into_iter().map(Some).collect();
    for (rank, front) in fronts.iter().enumerate() {
        let mut members: Vec<Individual<T>> = front
            .iter()
            .map(|&i| {
                let mut ind = slots[i].take().expect("index appears in one front");
                ind.rank = rank;
                ind
            })
            .collect();
        assign_crowding(&mut members);
        if next.len() + members.len() <= n {
            next.extend(members);
        } else {
            members.sort_by(crowded_cmp);
            let room = n - next.len();
            next.extend(members.into_iter().take(room));
        }
        if next.len() == n {
            return next;
        }
    }
    let worst = fronts.len();
    for mut ind in dupes.into_iter().take(n - next.len()) {
        ind.rank = worst;
        ind.crowding = 0.0;
        next.push(ind);
    }
    next
}

/// Fast non-dominated sort; returns index lists per front, best first.
fn non_dominated_sort<T: Scalar>(pop: &[Individual<T>]) -> Vec<Vec<usize>> {
    let m = pop.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut dom_count = vec![0usize; m];
    for i in 0..m {
        for j in (i + 1)..m {
            if dominates(&pop[i].obj, &pop[j].obj) {
                dominated_by_me[i].push(j);
                dom_count[j] += 1;
            } else if dominates(&pop[j].obj, &pop[i].obj) {
                dominated_by_me[j].push(i);
                dom_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..m).filter(|&i| dom_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                dom_count[j] -= 1;
                if dom_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

fn assign_crowding<T: Scalar>(front: &mut [Individual<T>]) {
    let len = front.len();
    for ind in front.iter_mut() {
        ind.crowding = 0.0;
    }
    if len <= 2 {
        for ind in front.iter_mut() {
            ind.crowding = f64::INFINITY;
        }
        return;
    }
    let objectives: [fn(&ObjectiveVector<T>) -> f64; 2] = [|o| o.cost_usd_hr.as_f64(), |o| o.node_count as f64];
    for f in objectives {
        let mut idx: Vec<usize> = (0..len).collect();
        // stable sort keeps ties in population order for determinism
        idx.sort_by(|&a, &b| f(&front[a].obj).partial_cmp(&f(&front[b].obj)).unwrap_or(Ordering::Equal));
        let lo = f(&front[idx[0]].obj);
        let hi = f(&front[idx[len - 1]].obj);
        front[idx[0]].crowding = f64::INFINITY;
        front[idx[len - 1]].crowding = f64::INFINITY;
        if hi > lo {
            for w in 1..len - 1 {
                let gap = f(&front[idx[w + 1]].obj) - f(&front[idx[w - 1]].obj);
                front[idx[w]].crowding += gap / (hi - lo);
            }
        }
    }
}
