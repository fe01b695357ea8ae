use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::time::{Duration, Instant};

use serde::Serialize;

use super::{
    members, pricing, pricing_heuristic, solve_rlmp, BnpInstance, Branching, Column, CostCache, Mask, PricingMode,
    PRUNE_TOLERANCE,
};
use crate::assignment::PilotAssignment;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const INTEGRALITY: f64 = 1e-6;

#[derive(Clone, Debug, Default, Serialize)]
pub struct TreeStats {
    pub nodes: usize,
    pub pruned: usize,
    pub max_depth: usize,
    pub columns_generated: usize,
    pub pricing_calls: usize,
    pub lp_solves: usize,
    /// Exact pricing everywhere and the tree was closed within budget.
    pub certified: bool,
    pub timed_out: bool,
    /// `(parent bound, node bound)` for every processed non-root node.
    pub bound_pairs: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct BnpOutcome<T> {
    pub assignment: PilotAssignment<T>,
    pub objective: T,
    pub root_bound: T,
    /// Chosen columns in pilot order.
    pub columns: Vec<Column<T>>,
    pub stats: TreeStats,
}

/// Most fractional user pair by joint coverage `q`, maximizing `min(q, 1-q)`.
/// Errors when no pair is fractional.
pub fn branch_pair<T: Scalar>(lambda: &[T], columns: &[Column<T>], users: usize) -> Result<(usize, usize)> {
    let mut q = vec![T::zero(); users * users];
    for (c, &l) in columns.iter().zip(lambda) {
        if l <= T::zero() {
            continue;
        }
        let ms = members(c.mask);
        for (i, &p) in ms.iter().enumerate() {
            for &r in &ms[i + 1..] {
                q[p * users + r] += l;
            }
        }
    }
    let tol = T::of(INTEGRALITY);
    let mut best: Option<(T, (usize, usize))> = None;
    for p in 0..users {
        for r in p + 1..users {
            let v = q[p * users + r];
            if v > tol && v < T::one() - tol {
                let score = v.min(T::one() - v);
                if best.is_none_or(|(s, _)| score > s) {
                    best = Some((score, (p, r)));
                }
            }
        }
    }
    best.map(|(_, pair)| pair)
        .ok_or_else(|| Error::Data("no fractional pair: solution is integral".into()))
}

struct Node {
    bound: f64,
    seq: usize,
    branching: Branching,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then(other.seq.cmp(&self.seq))
    }
}

struct Solver<'a, T> {
    inst: &'a BnpInstance<T>,
    cache: CostCache<T>,
    pool: Vec<Column<T>>,
    index: HashMap<Mask, usize>,
    mode: PricingMode,
    stats: TreeStats,
    deadline: Instant,
    max_pricing_calls: Option<usize>,
}

/// Limits for [`bnp_solve_with`]. A pricing-call limit stops the search at
/// the same point on every machine; the wall-clock budget does not.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BnpOptions {
    pub time_budget: Duration,
    pub max_pricing_calls: Option<usize>,
}

impl Default for BnpOptions {
    fn default() -> Self {
        BnpOptions {
            time_budget: Duration::from_secs(10),
            max_pricing_calls: None,
        }
    }
}

impl<T: Scalar> Solver<'_, T> {
    fn out_of_budget(&mut self) -> bool {
        if Instant::now() > self.deadline || self.max_pricing_calls.is_some_and(|m| self.stats.pricing_calls >= m) {
            self.stats.timed_out = true;
        }
        self.stats.timed_out
    }

    fn add(&mut self, mask: Mask) -> usize {
        if let Some(&j) = self.index.get(&mask) {
            return j;
        }
        let cost = self.cache.cost(self.inst, mask);
        self.pool.push(Column { mask, cost });
        self.index.insert(mask, self.pool.len() - 1);
        self.pool.len() - 1
    }

    /// Column generation to convergence at one node.
    fn node_lp(&mut self, branching: &Branching) -> Result<super::RlmpSolution<T>> {
        let penalty = self.inst.artificial_penalty();
        loop {
            let sol = solve_rlmp(self.inst.users(), self.inst.pilots, &self.pool, branching, penalty)?;
            self.stats.lp_solves += 1;
            if self.out_of_budget() {
                return Ok(sol);
            }
            self.stats.pricing_calls += 1;
            let found = match self.mode {
                PricingMode::Exhaustive => pricing(self.inst, &sol.duals, branching, &mut self.cache).into_iter().collect(),
                PricingMode::Greedy => pricing_heuristic(self.inst, &sol.duals, branching, &mut self.cache),
            };
            let before = self.pool.len();
            for c in &found {
                if !self.index.contains_key(&c.mask) {
                    self.add(c.mask);
                    self.stats.columns_generated += 1;
                }
            }
            if self.pool.len() == before {
                if !found.is_empty() {
                    log::warn!("pricing returned only pooled columns; stopping generation");
                }
                return Ok(sol);
            }
        }
    }

    /// Initial partition: users sorted by cluster and dealt round-robin, so
    /// no pilot receives two users of one cluster.
    fn seed_partition(&self) -> Vec<Mask> {
        let mut order: Vec<usize> = (0..self.inst.users()).collect();
        order.sort_by_key(|&u| (self.inst.clusters[u], u));
        let mut blocks = vec![0; self.inst.pilots];
        for (i, u) in order.into_iter().enumerate() {
            blocks[i % self.inst.pilots] |= 1 << u;
        }
        blocks
    }
}

/// Best-first branch-and-price with same/different branching on user pairs.
pub fn bnp_solve<T: Scalar>(instance: &BnpInstance<T>, time_budget: Duration) -> Result<BnpOutcome<T>> {
    bnp_solve_with(
        instance,
        &BnpOptions {
            time_budget,
            max_pricing_calls: None,
        },
    )
}

pub fn bnp_solve_with<T: Scalar>(instance: &BnpInstance<T>, options: &BnpOptions) -> Result<BnpOutcome<T>> {
    instance.validate()?;
    let n = instance.users();
    let start = Instant::now();
    let mut s = Solver {
        inst: instance,
        cache: CostCache::new(),
        pool: Vec::new(),
        index: HashMap::new(),
        mode: PricingMode::for_instance(instance),
        stats: TreeStats::default(),
        deadline: start + options.time_budget,
        max_pricing_calls: options.max_pricing_calls,
    };

    let mut incumbent: Option<(T, Vec<usize>)> = None;
    let seed = s.seed_partition();
    if seed.iter().all(|&m| s.cache.cost(instance, m) > -instance.big_m) {
        let cols: Vec<usize> = seed.iter().map(|&m| s.add(m)).collect();
        let v = cols.iter().map(|&j| s.pool[j].cost).sum();
        incumbent = Some((v, cols));
    }

    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::INFINITY,
        seq: 0,
        branching: Branching::default(),
    });
    let mut seq = 1;
    let mut root_bound = None;
    let prune = T::of(PRUNE_TOLERANCE);
    let tol = T::of(INTEGRALITY);

    while let Some(node) = heap.pop() {
        if s.out_of_budget() {
            break;
        }
        if let Some((v, _)) = &incumbent {
            if T::of(node.bound) <= *v + prune {
                s.stats.pruned += 1;
                continue;
            }
        }
        s.stats.nodes += 1;
        s.stats.max_depth = s.stats.max_depth.max(node.branching.depth());
        let sol = s.node_lp(&node.branching)?;
        if s.stats.timed_out && root_bound.is_none() {
            break;
        }
        let bound = sol.objective;
        if node.bound.is_finite() {
            s.stats.bound_pairs.push((node.bound, bound.as_f64()));
        }
        root_bound.get_or_insert(bound);
        if s.stats.timed_out {
            break;
        }
        if let Some((v, _)) = &incumbent {
            if bound <= *v + prune {
                s.stats.pruned += 1;
                continue;
            }
        }
        let fractional = sol.lambda.iter().any(|&l| l > tol && l < T::one() - tol);
        let artificial = sol.uses_artificials(tol);
        if !fractional {
            if artificial {
                s.stats.pruned += 1;
                continue;
            }
            let chosen: Vec<usize> = (0..s.pool.len()).filter(|&j| sol.lambda[j] > T::one() - tol).collect();
            if chosen.iter().any(|&j| s.pool[j].cost <= -instance.big_m) {
                s.stats.pruned += 1;
                continue;
            }
            let v: T = chosen.iter().map(|&j| s.pool[j].cost).sum();
            if incumbent.as_ref().is_none_or(|(b, _)| v > *b) {
                incumbent = Some((v, chosen));
            }
            continue;
        }
        let (p, r) = match branch_pair(&sol.lambda, &s.pool, n) {
            Ok(pair) => pair,
            Err(e) => {
                log::warn!("node left unbranched: {e}");
                continue;
            }
        };
        for child in [node.branching.with_same(p, r), node.branching.with_diff(p, r)] {
            heap.push(Node {
                bound: bound.as_f64(),
                seq,
                branching: child,
            });
            seq += 1;
        }
    }

    s.stats.certified = s.mode == PricingMode::Exhaustive && !s.stats.timed_out;
    let root_bound = root_bound.unwrap_or(T::infinity());
    let Some((objective, mut chosen)) = incumbent else {
        return Err(if s.stats.timed_out {
            Error::Budget("no feasible partition found in time".into())
        } else {
            Error::Infeasible("no partition into P co-pilot sets meets the cluster and SINR constraints".into())
        });
    };
    chosen.sort_unstable();
    let columns: Vec<Column<T>> = chosen.iter().map(|&j| s.pool[j]).collect();
    let mut table = vec![None; n];
    for (q, c) in columns.iter().enumerate() {
        for u in c.members() {
            table[u] = Some(q);
        }
    }
    log::debug!("bnp: {:?} in {:?}", s.stats, start.elapsed());
    Ok(BnpOutcome {
        assignment: PilotAssignment::new(table, instance.pilots, "bnp")?,
        objective,
        root_bound,
        columns,
        stats: s.stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnp::{exhaustive_oracle, mask_of};
    use crate::bnp::tests::instance_from_points;
    use crate::geometry::Point;
    use rand::{Rng, SeedableRng};

    fn col(users: &[usize]) -> Column<f64> {
        Column { mask: mask_of(users), cost: 1.0 }
    }

    #[test]
    fn branch_pair_on_tiny_pool() {
        // users 1,2,3 in the text are 0,1,2 here
        let pool = [col(&[0, 1]), col(&[0, 2])];
        assert_eq!(branch_pair(&[0.5, 0.5], &pool, 3).unwrap(), (0, 1));
        assert!(branch_pair(&[1.0, 0.0], &pool, 3).is_err());
    }

    fn random_instance(rng: &mut impl Rng, n: usize, pilots: usize) -> BnpInstance<f64> {
        let rrhs: Vec<_> = (0..6).map(|_| Point::new(rng.random_range(-300.0..300.0), rng.random_range(-300.0..300.0))).collect();
        let users: Vec<_> = (0..n).map(|_| Point::new(rng.random_range(-300.0..300.0), rng.random_range(-300.0..300.0))).collect();
        let clusters = (0..n).map(|u| u / pilots).collect();
        instance_from_points(&rrhs, &users, pilots, clusters)
    }

    #[test]
    fn four_users_match_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let mut inst = random_instance(&mut rng, 4, 2);
            inst.clusters = vec![0, 1, 2, 3];
            let o = exhaustive_oracle(&inst).unwrap();
            match bnp_solve(&inst, Duration::from_secs(10)) {
                Ok(b) => {
                    assert_eq!(b.objective, o.objective);
                    assert!(b.stats.certified);
                }
                Err(Error::Infeasible(_)) => assert!(o.objective < 0.0),
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn six_users_three_pilots_match_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let inst = random_instance(&mut rng, 6, 3);
            let o = exhaustive_oracle(&inst).unwrap();
            match bnp_solve(&inst, Duration::from_secs(10)) {
                Ok(b) => {
                    assert!((b.objective - o.objective).abs() <= 1e-9, "{} vs {}", b.objective, o.objective);
                    assert!(b.root_bound >= b.objective - 1e-9);
                }
                Err(Error::Infeasible(_)) => assert!(o.objective < 0.0),
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn zero_budget_is_not_certified() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let inst = random_instance(&mut rng, 8, 2);
        match bnp_solve(&inst, Duration::ZERO) {
            Ok(b) => assert!(!b.stats.certified),
            Err(e) => assert!(matches!(e, Error::Budget(_))),
        }
    }
}
