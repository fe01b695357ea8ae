use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{BnpInstance, Branching, Column, CostCache, DualPrices, Mask, PRICING_TOLERANCE};
use crate::scalar::Scalar;

/// Exact pricing is used while the number of candidate sets stays below this.
pub const EXHAUSTIVE_SET_LIMIT: f64 = 2e5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PricingMode {
    Exhaustive,
    Greedy,
}

impl PricingMode {
    /// Exhaustive when the count of one-per-cluster sets is small enough.
    pub fn for_instance<T: Scalar>(instance: &BnpInstance<T>) -> Self {
        let mut sizes: HashMap<usize, usize> = HashMap::new();
        for &c in &instance.clusters {
            *sizes.entry(c).or_default() += 1;
        }
        let sets: f64 = sizes.values().map(|&s| (s + 1) as f64).product();
        if sets <= EXHAUSTIVE_SET_LIMIT {
            PricingMode::Exhaustive
        } else {
            PricingMode::Greedy
        }
    }
}

struct Search<'a, T> {
    inst: &'a BnpInstance<T>,
    duals: &'a DualPrices<T>,
    branching: &'a Branching,
    cache: &'a mut CostCache<T>,
    /// Users grouped by cluster, clusters in order of first appearance.
    groups: Vec<Vec<usize>>,
    best: Option<(T, Column<T>)>,
    reverse: bool,
}

impl<T: Scalar> Search<'_, T> {
    fn visit(&mut self, mask: Mask) {
        if mask.count_ones() < 2 || !self.branching.allows(mask) {
            return;
        }
        let cost = self.cache.cost(self.inst, mask);
        if cost <= -self.inst.big_m {
            return;
        }
        let col = Column { mask, cost };
        let rc = self.duals.reduced_cost(&col);
        let better = match &self.best {
            None => true,
            Some((b, c)) => rc > *b || (rc == *b && mask < c.mask),
        };
        if better {
            self.best = Some((rc, col));
        }
    }

    fn dfs(&mut self, g: usize, mask: Mask) {
        if g == self.groups.len() {
            self.visit(mask);
            return;
        }
        let n = self.groups[g].len();
        for step in 0..=n {
            // step n means "no member of this cluster"
            let pick = if self.reverse { n - step } else { step };
            if pick == n {
                self.dfs(g + 1, mask);
            } else {
                let u = self.groups[g][pick];
                let next = mask | 1 << u;
                if self.branching.diff.iter().any(|&(p, r)| next >> p & 1 == 1 && next >> r & 1 == 1) {
                    continue;
                }
                self.dfs(g + 1, next);
            }
        }
    }
}

fn cluster_groups<T: Scalar>(inst: &BnpInstance<T>) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = Vec::new();
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for (u, &c) in inst.clusters.iter().enumerate() {
        groups.entry(c).or_insert_with(|| {
            order.push(c);
            Vec::new()
        });
        groups.get_mut(&c).unwrap().push(u);
    }
    order.into_iter().map(|c| groups.remove(&c).unwrap()).collect()
}

fn exhaustive<T: Scalar>(
    inst: &BnpInstance<T>,
    duals: &DualPrices<T>,
    branching: &Branching,
    cache: &mut CostCache<T>,
    reverse: bool,
) -> Option<(T, Column<T>)> {
    let mut s = Search {
        inst,
        duals,
        branching,
        cache,
        groups: cluster_groups(inst),
        best: None,
        reverse,
    };
    if reverse {
        s.groups.reverse();
    }
    s.dfs(0, 0);
    s.best
}

/// Best column over every set with one user per cluster, at least two users
/// and respecting `branching`. Returns it only if its reduced cost is positive.
pub fn pricing<T: Scalar>(
    instance: &BnpInstance<T>,
    duals: &DualPrices<T>,
    branching: &Branching,
    cache: &mut CostCache<T>,
) -> Option<Column<T>> {
    exhaustive(instance, duals, branching, cache, false)
        .filter(|(rc, _)| *rc > T::of(PRICING_TOLERANCE))
        .map(|(_, c)| c)
}

/// Greedy growth from every user as a seed; no optimality guarantee.
/// Returns the distinct improving columns found, best first.
pub fn pricing_heuristic<T: Scalar>(
    instance: &BnpInstance<T>,
    duals: &DualPrices<T>,
    branching: &Branching,
    cache: &mut CostCache<T>,
) -> Vec<Column<T>> {
    let n = instance.users();
    let tol = T::of(PRICING_TOLERANCE);
    let mut found: Vec<(T, Column<T>)> = Vec::new();
    for a in 0..n {
        let mut mask: Mask = 1 << a;
        // Same-pairs are closed over before evaluation.
        if !close_same(&mut mask, branching) || !instance.cluster_feasible(mask) {
            continue;
        }
        let mut best: Option<(T, Column<T>)> = None;
        let mut current: Option<T> = None;
        loop {
            let mut step: Option<(T, Column<T>)> = None;
            for u in 0..n {
                if mask >> u & 1 == 1 {
                    continue;
                }
                let mut next = mask | 1 << u;
                if !close_same(&mut next, branching) || !branching.allows(next) || !instance.cluster_feasible(next) {
                    continue;
                }
                let cost = cache.cost(instance, next);
                if cost <= -instance.big_m {
                    continue;
                }
                let col = Column { mask: next, cost };
                let rc = duals.reduced_cost(&col);
                if step.as_ref().is_none_or(|(s, _)| rc > *s) {
                    step = Some((rc, col));
                }
            }
            let Some((rc, col)) = step else { break };
            if current.is_some_and(|c| rc <= c) {
                break;
            }
            mask = col.mask;
            current = Some(rc);
            if best.as_ref().is_none_or(|(b, _)| rc > *b) {
                best = Some((rc, col));
            }
        }
        if let Some((rc, col)) = best {
            if rc > tol && !found.iter().any(|(_, c)| c.mask == col.mask) {
                found.push((rc, col));
            }
        }
    }
    found.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.mask.cmp(&b.1.mask)));
    found.into_iter().map(|(_, c)| c).collect()
}

fn close_same(mask: &mut Mask, branching: &Branching) -> bool {
    loop {
        let before = *mask;
        for &(p, r) in &branching.same {
            if *mask >> p & 1 == 1 || *mask >> r & 1 == 1 {
                *mask |= 1 << p | 1 << r;
            }
        }
        if *mask == before {
            return true;
        }
    }
}

#[cfg(test)]
pub(crate) fn pricing_reversed<T: Scalar>(
    instance: &BnpInstance<T>,
    duals: &DualPrices<T>,
    branching: &Branching,
    cache: &mut CostCache<T>,
) -> Option<(T, Column<T>)> {
    exhaustive(instance, duals, branching, cache, true)
}
