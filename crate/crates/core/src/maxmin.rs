//! Max-min distance partitioning: bisection on the minimum co-pilot distance
//! with an exact colouring search as the feasibility oracle.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::assignment::PilotAssignment;
use crate::error::{Error, Result};
use crate::geometry::{Point, PointSet};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct PartitionInstance<T> {
    pub users: Vec<Point<T>>,
    pub partitions: usize,
    pub size_floor: usize,
    /// Bisection stops once the bracket is narrower than this, in meters.
    pub epsilon: T,
    /// Upper end of the initial bracket.
    pub diameter: T,
    /// Wall-clock limit for one feasibility search.
    pub time_budget: Duration,
}

impl<T: Scalar> PartitionInstance<T> {
    pub fn new(users: &PointSet<T>, partitions: usize) -> Self {
        PartitionInstance {
            users: users.points().to_vec(),
            partitions,
            size_floor: 2,
            epsilon: T::one(),
            diameter: users.window().diameter(),
            time_budget: Duration::from_secs(10),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.partitions == 0 {
            return Err(Error::param("partitions", "must be >= 1"));
        }
        if !(self.epsilon > T::zero()) {
            return Err(Error::param("epsilon", format!("must be > 0, got {}", self.epsilon)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionStatus {
    OptimalWithinEpsilon,
    /// Some feasibility search ran out of time and was treated as infeasible.
    Approximate,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionResult<T> {
    /// Partition index per user; empty when infeasible.
    pub membership: Vec<usize>,
    /// Minimum co-pilot distance achieved by `membership`.
    pub t_star: T,
    /// Final bisection bracket.
    pub lower: T,
    pub upper: T,
    pub status: PartitionStatus,
    pub feasibility_calls: usize,
}

impl<T: Scalar> PartitionResult<T> {
    pub fn to_assignment(&self, partitions: usize) -> Result<PilotAssignment<T>> {
        PilotAssignment::new(self.membership.iter().map(|&k| Some(k)).collect(), partitions, "maxmin")
    }
}

/// Smallest distance between two users sharing a partition; `+∞` when every
/// partition holds at most one user.
pub fn min_copilot_distance<T: Scalar>(membership: &[usize], users: &[Point<T>]) -> T {
    let mut best = T::infinity();
    for i in 0..membership.len() {
        for j in i + 1..membership.len() {
            if membership[i] == membership[j] {
                best = best.min(users[i].distance(&users[j]));
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Feasibility {
    Feasible(Vec<usize>),
    Infeasible,
    /// The search hit its time budget.
    Unresolved,
}

/// Searches for a partition into exactly `partitions` groups, each with at
/// least `size_floor` users, such that no two users closer than `t` share a
/// group.
pub fn feasibility<T: Scalar>(instance: &PartitionInstance<T>, t: T) -> Feasibility {
    let n = instance.users.len();
    let p = instance.partitions;
    if p == 0 || n < p * instance.size_floor.max(1) {
        return Feasibility::Infeasible;
    }
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if instance.users[i].distance(&instance.users[j]) < t {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    let mut search = Colouring {
        adj,
        p,
        floor: instance.size_floor.max(1),
        colour: vec![usize::MAX; n],
        blocked: vec![vec![0u32; p]; n],
        size: vec![0; p],
        opened: 0,
        nodes: 0,
        deadline: Instant::now() + instance.time_budget,
        timed_out: false,
    };
    if search.run(0) {
        Feasibility::Feasible(search.colour)
    } else if search.timed_out {
        Feasibility::Unresolved
    } else {
        Feasibility::Infeasible
    }
}

struct Colouring {
    adj: Vec<Vec<usize>>,
    p: usize,
    floor: usize,
    colour: Vec<usize>,
    /// `blocked[v][k]`: coloured neighbours of `v` holding colour `k`.
    blocked: Vec<Vec<u32>>,
    size: Vec<usize>,
    opened: usize,
    nodes: u64,
    deadline: Instant,
    timed_out: bool,
}

impl Colouring {
    fn saturation(&self, v: usize) -> usize {
        self.blocked[v].iter().filter(|&&c| c > 0).count()
    }

    /// DSATUR choice: most distinct blocked colours, then most uncoloured
    /// neighbours, then lowest index.
    fn pick(&self) -> usize {
        let mut best = usize::MAX;
        let mut key = (0usize, 0usize);
        for v in 0..self.colour.len() {
            if self.colour[v] != usize::MAX {
                continue;
            }
            let deg = self.adj[v].iter().filter(|&&u| self.colour[u] == usize::MAX).count();
            let k = (self.saturation(v), deg);
            if best == usize::MAX || k > key {
                best = v;
                key = k;
            }
        }
        best
    }

    fn set(&mut self, v: usize, k: usize) {
        self.colour[v] = k;
        self.size[k] += 1;
        for i in 0..self.adj[v].len() {
            let u = self.adj[v][i];
            self.blocked[u][k] += 1;
        }
    }

    fn unset(&mut self, v: usize, k: usize) {
        self.colour[v] = usize::MAX;
        self.size[k] -= 1;
        for i in 0..self.adj[v].len() {
            let u = self.adj[v][i];
            self.blocked[u][k] -= 1;
        }
    }

    /// Can the remaining vertices still lift every group to the size floor?
    fn floors_reachable(&self, remaining: usize) -> bool {
        let deficit: Vec<usize> = self.size.iter().map(|&s| self.floor.saturating_sub(s)).collect();
        let total: usize = deficit.iter().sum();
        if total == 0 {
            return true;
        }
        if total > remaining {
            return false;
        }
        let free: Vec<usize> = (0..self.colour.len()).filter(|&v| self.colour[v] == usize::MAX).collect();
        for (k, &d) in deficit.iter().enumerate() {
            if d > 0 && free.iter().filter(|&&v| self.blocked[v][k] == 0).count() < d {
                return false;
            }
        }
        // Bipartite matching of missing slots to free vertices.
        let slots: Vec<usize> = deficit
            .iter()
            .enumerate()
            .flat_map(|(k, &d)| std::iter::repeat_n(k, d))
            .collect();
        let mut owner = vec![usize::MAX; self.colour.len()];
        for s in 0..slots.len() {
            let mut seen = vec![false; self.colour.len()];
            if !self.augment(s, &slots, &free, &mut owner, &mut seen) {
                return false;
            }
        }
        true
    }

    fn augment(&self, s: usize, slots: &[usize], free: &[usize], owner: &mut [usize], seen: &mut [bool]) -> bool {
        for &v in free {
            if seen[v] || self.blocked[v][slots[s]] > 0 {
                continue;
            }
            seen[v] = true;
            if owner[v] == usize::MAX || self.augment(owner[v], slots, free, owner, seen) {
                owner[v] = s;
                return true;
            }
        }
        false
    }

    fn run(&mut self, coloured: usize) -> bool {
        let n = self.colour.len();
        if coloured == n {
            return self.size.iter().all(|&s| s >= self.floor);
        }
        self.nodes += 1;
        if self.nodes % 256 == 0 && Instant::now() > self.deadline {
            self.timed_out = true;
        }
        if self.timed_out {
            return false;
        }
        let v = self.pick();
        // Groups are opened in index order so relabellings are never revisited.
        let limit = (self.opened + 1).min(self.p);
        for k in 0..limit {
            if self.blocked[v][k] > 0 {
                continue;
            }
            let opened_before = self.opened;
            if k == self.opened {
                self.opened += 1;
            }
            self.set(v, k);
            if self.floors_reachable(n - coloured - 1) && self.run(coloured + 1) {
                return true;
            }
            self.unset(v, k);
            self.opened = opened_before;
            if self.timed_out {
                return false;
            }
        }
        false
    }
}

/// Bisection on the inhibition distance, keeping the last feasible partition.
pub fn maxmin_assign<T: Scalar>(instance: &PartitionInstance<T>) -> Result<PartitionResult<T>> {
    instance.validate()?;
    let n = instance.users.len();
    let infeasible = |calls| PartitionResult {
        membership: Vec::new(),
        t_star: T::zero(),
        lower: T::zero(),
        upper: T::zero(),
        status: PartitionStatus::Infeasible,
        feasibility_calls: calls,
    };
    if n < instance.partitions * instance.size_floor.max(1) {
        return Ok(infeasible(0));
    }
    let mut calls = 1;
    let mut best = match feasibility(instance, T::zero()) {
        Feasibility::Feasible(m) => m,
        _ => return Ok(infeasible(calls)),
    };
    let mut lo = min_copilot_distance(&best, &instance.users);
    let mut hi = instance.diameter.max(lo);
    let mut approximate = false;
    while hi - lo >= instance.epsilon && lo.is_finite() {
        let mid = (lo + hi) / T::of(2.0);
        calls += 1;
        match feasibility(instance, mid) {
            Feasibility::Feasible(m) => {
                // The found partition may already clear more than `mid`.
                lo = min_copilot_distance(&m, &instance.users).max(mid);
                best = m;
            }
            Feasibility::Infeasible => hi = mid,
            Feasibility::Unresolved => {
                approximate = true;
                hi = mid;
            }
        }
    }
    Ok(PartitionResult {
        t_star: min_copilot_distance(&best, &instance.users),
        membership: best,
        lower: lo,
        upper: hi.max(lo),
        status: if approximate {
            PartitionStatus::Approximate
        } else {
            PartitionStatus::OptimalWithinEpsilon
        },
        feasibility_calls: calls,
    })
}
