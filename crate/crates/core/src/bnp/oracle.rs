use super::{BnpInstance, CostCache, Mask};
use crate::assignment::PilotAssignment;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const ORACLE_MAX_USERS: usize = 14;

#[derive(Clone, Debug)]
pub struct OracleResult<T> {
    pub assignment: PilotAssignment<T>,
    pub objective: T,
    /// Number of partitions evaluated.
    pub candidates: usize,
}

struct Enum<'a, T> {
    inst: &'a BnpInstance<T>,
    cache: CostCache<T>,
    blocks: Vec<Mask>,
    best: Option<(T, Vec<Mask>)>,
    candidates: usize,
}

impl<T: Scalar> Enum<'_, T> {
    fn rec(&mut self, u: usize) {
        let n = self.inst.users();
        let p = self.inst.pilots;
        let remaining = n - u;
        let open = self.blocks.len();
        // Users still needed: fill undersized blocks and create missing ones.
        let short: usize = self.blocks.iter().map(|b| 2usize.saturating_sub(b.count_ones() as usize)).sum();
        if short + 2 * (p - open) > remaining {
            return;
        }
        if u == n {
            self.candidates += 1;
            let total: T = self.blocks.clone().into_iter().map(|b| self.cache.cost(self.inst, b)).sum();
            if self.best.as_ref().is_none_or(|(v, _)| total > *v) {
                self.best = Some((total, self.blocks.clone()));
            }
            return;
        }
        for k in 0..open {
            self.blocks[k] |= 1 << u;
            self.rec(u + 1);
            self.blocks[k] &= !(1 << u);
        }
        if open < p {
            self.blocks.push(1 << u);
            self.rec(u + 1);
            self.blocks.pop();
        }
    }
}

/// Best partition of all users into exactly `P` sets of at least two, by
/// full enumeration. Sets appear as pilots in order of their lowest user.
pub fn exhaustive_oracle<T: Scalar>(instance: &BnpInstance<T>) -> Result<OracleResult<T>> {
    instance.validate()?;
    let n = instance.users();
    if n > ORACLE_MAX_USERS {
        return Err(Error::param("users", format!("oracle handles at most {ORACLE_MAX_USERS}, got {n}")));
    }
    let mut e = Enum {
        inst: instance,
        cache: CostCache::new(),
        blocks: Vec::new(),
        best: None,
        candidates: 0,
    };
    e.rec(0);
    let (objective, blocks) = e.best.ok_or_else(|| Error::Infeasible("no partition found".into()))?;
    let mut table = vec![None; n];
    for (q, b) in blocks.iter().enumerate() {
        for (u, slot) in table.iter_mut().enumerate() {
            if b >> u & 1 == 1 {
                *slot = Some(q);
            }
        }
    }
    Ok(OracleResult {
        assignment: PilotAssignment::new(table, instance.pilots, "oracle")?,
        objective,
        candidates: e.candidates,
    })
}
