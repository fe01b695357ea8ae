//! Sum-SE pilot assignment by branch-and-price over co-pilot sets.
//!
//! A column is a set of at least two users sharing one pilot. The master
//! problem picks exactly `P` disjoint columns covering every user.

mod master;
mod oracle;
mod pricing;
mod tree;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::channel::GroupChannel;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

pub use master::{solve_rlmp, RlmpSolution};
pub use oracle::{exhaustive_oracle, OracleResult, ORACLE_MAX_USERS};
pub use pricing::{pricing, pricing_heuristic, PricingMode, EXHAUSTIVE_SET_LIMIT};
pub use tree::{bnp_solve, bnp_solve_with, branch_pair, BnpOptions, BnpOutcome, TreeStats};

/// Reduced costs at or below this are treated as non-improving.
pub const PRICING_TOLERANCE: f64 = 1e-7;
/// Nodes whose bound does not beat the incumbent by this much are pruned.
pub const PRUNE_TOLERANCE: f64 = 1e-6;

/// Bitmask of users; bit `k` is user `k`.
pub type Mask = u64;

pub fn mask_of(users: &[usize]) -> Mask {
    users.iter().fold(0, |m, &u| m | 1 << u)
}

pub fn members(mask: Mask) -> Vec<usize> {
    (0..64).filter(|&k| mask >> k & 1 == 1).collect()
}

#[derive(Clone, Debug)]
pub struct BnpInstance<T> {
    /// Large-scale gains, RRHs × users.
    pub beta: Matrix<T>,
    pub pilots: usize,
    /// Linear SINR floor.
    pub sinr_floor: T,
    pub big_m: T,
    pub clusters: Vec<usize>,
    pub pilot_energy: T,
}

impl<T: Scalar> BnpInstance<T> {
    pub fn new(beta: Matrix<T>, pilots: usize, clusters: Vec<usize>, pilot_energy: T) -> Result<Self> {
        let inst = BnpInstance {
            beta,
            pilots,
            sinr_floor: T::one(),
            big_m: T::of(1e6),
            clusters,
            pilot_energy,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn with_sinr_floor_db(mut self, db: T) -> Self {
        self.sinr_floor = T::of(10.0).powf(db / T::of(10.0));
        self
    }

    pub fn with_big_m(mut self, big_m: T) -> Self {
        self.big_m = big_m;
        self
    }

    pub fn users(&self) -> usize {
        self.beta.cols()
    }

    pub fn rrhs(&self) -> usize {
        self.beta.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.users();
        if self.pilots == 0 {
            return Err(Error::param("pilots", "must be >= 1"));
        }
        if n > 64 {
            return Err(Error::param("users", format!("at most 64 supported, got {n}")));
        }
        if n < 2 * self.pilots {
            return Err(Error::Infeasible(format!(
                "{n} users cannot fill {} pilots with at least two users each",
                self.pilots
            )));
        }
        if self.rrhs() == 0 {
            return Err(Error::param("beta", "needs at least one RRH"));
        }
        if self.beta.row(0).is_empty() || (0..self.rrhs()).any(|m| self.beta.row(m).iter().any(|b| !(*b > T::zero()))) {
            return Err(Error::param("beta", "gains must be positive"));
        }
        if self.clusters.len() != n {
            return Err(Error::param("clusters", format!("{} labels for {n} users", self.clusters.len())));
        }
        let mut sizes: HashMap<usize, usize> = HashMap::new();
        for &c in &self.clusters {
            *sizes.entry(c).or_default() += 1;
        }
        if let Some((c, s)) = sizes.into_iter().find(|&(_, s)| s > self.pilots) {
            return Err(Error::Infeasible(format!("cluster {c} holds {s} users but only {} pilots exist", self.pilots)));
        }
        if !(self.big_m > T::zero()) {
            return Err(Error::param("big_m", "must be > 0"));
        }
        if !(self.pilot_energy > T::zero()) {
            return Err(Error::param("pilot_energy", "must be > 0"));
        }
        if !(self.sinr_floor >= T::zero()) {
            return Err(Error::param("sinr_floor", "must be >= 0"));
        }
        Ok(())
    }

    /// True when no two members share a cluster.
    pub fn cluster_feasible(&self, mask: Mask) -> bool {
        let mut seen = std::collections::HashSet::new();
        members(mask).into_iter().all(|u| seen.insert(self.clusters[u]))
    }

    /// Uncapped SINR of every member of the set, in member order.
    pub fn set_sinr(&self, mask: Mask) -> Result<Vec<T>> {
        let ms = members(mask);
        let beta = Matrix::from_fn(self.rrhs(), ms.len(), |m, k| self.beta[(m, ms[k])]);
        let ch = GroupChannel::from_beta(beta, self.pilot_energy, self.pilots)?;
        Ok((0..ms.len()).map(|k| ch.sinr(k)).collect())
    }

    /// Penalty on artificial columns; exceeds any mix of real columns.
    pub(crate) fn artificial_penalty(&self) -> T {
        self.big_m * T::of_usize(self.users() + self.pilots + 1)
    }
}

/// Sum of `log2(1 + SINR)` over the set, or `-big_m` when the set breaks the
/// cluster rule or any member falls below the SINR floor.
pub fn column_cost<T: Scalar>(instance: &BnpInstance<T>, mask: Mask) -> T {
    if mask.count_ones() < 2 || !instance.cluster_feasible(mask) {
        return -instance.big_m;
    }
    match instance.set_sinr(mask) {
        Ok(s) if s.iter().all(|&g| g >= instance.sinr_floor) => s.into_iter().map(|g| (T::one() + g).log2()).sum(),
        _ => -instance.big_m,
    }
}

/// Memoized [`column_cost`].
#[derive(Clone, Debug, Default)]
pub struct CostCache<T> {
    map: HashMap<Mask, T>,
}

impl<T: Scalar> CostCache<T> {
    pub fn new() -> Self {
        CostCache { map: HashMap::new() }
    }

    pub fn cost(&mut self, instance: &BnpInstance<T>, mask: Mask) -> T {
        *self.map.entry(mask).or_insert_with(|| column_cost(instance, mask))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column<T> {
    pub mask: Mask,
    pub cost: T,
}

impl<T: Scalar> Column<T> {
    pub fn members(&self) -> Vec<usize> {
        members(self.mask)
    }

    pub fn contains(&self, user: usize) -> bool {
        self.mask >> user & 1 == 1
    }
}

/// Same/different constraints accumulated along a branch.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branching {
    pub same: Vec<(usize, usize)>,
    pub diff: Vec<(usize, usize)>,
}

impl Branching {
    pub fn allows(&self, mask: Mask) -> bool {
        let has = |u: usize| mask >> u & 1 == 1;
        self.same.iter().all(|&(p, r)| has(p) == has(r)) && self.diff.iter().all(|&(p, r)| !(has(p) && has(r)))
    }

    pub fn with_same(&self, p: usize, r: usize) -> Self {
        let mut b = self.clone();
        b.same.push((p, r));
        b
    }

    pub fn with_diff(&self, p: usize, r: usize) -> Self {
        let mut b = self.clone();
        b.diff.push((p, r));
        b
    }

    /// No pair is both forced together and apart.
    pub fn is_consistent(&self) -> bool {
        let key = |(a, b): (usize, usize)| (a.min(b), a.max(b));
        self.same.iter().all(|&s| !self.diff.iter().any(|&d| key(s) == key(d)))
    }

    pub fn depth(&self) -> usize {
        self.same.len() + self.diff.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualPrices<T> {
    pub users: Vec<T>,
    pub cardinality: T,
}

impl<T: Scalar> DualPrices<T> {
    pub fn reduced_cost(&self, column: &Column<T>) -> T {
        column.cost - members(column.mask).into_iter().map(|u| self.users[u]).sum::<T>() - self.cardinality
    }
}
