//! Pilot assignment tables and the inhibition-based schemes.

mod distributed;
mod rsa;

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointSet;
use crate::rng::{stream_rng, streams};
use crate::scalar::Scalar;

pub use distributed::{assign_distributed, SensingConfig};
pub use rsa::{assign_regenerative, assign_rsa};

/// Per-user pilot, zero-based internally (`Some(0)` is the first pilot).
/// Serialized one-based with `unassigned` for users left without a pilot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PilotAssignment<T> {
    pilots: Vec<Option<usize>>,
    pilot_count: usize,
    inhibition_radius: Option<T>,
    scheme: String,
}

impl<T: Scalar> PilotAssignment<T> {
    pub fn new(pilots: Vec<Option<usize>>, pilot_count: usize, scheme: impl Into<String>) -> Result<Self> {
        if pilot_count == 0 {
            return Err(Error::param("pilots", "must be >= 1"));
        }
        if let Some(p) = pilots.iter().flatten().find(|&&p| p >= pilot_count) {
            return Err(Error::Data(format!("pilot index {p} outside 0..{pilot_count}")));
        }
        Ok(PilotAssignment {
            pilots,
            pilot_count,
            inhibition_radius: None,
            scheme: scheme.into(),
        })
    }

    pub fn with_inhibition_radius(mut self, r: T) -> Self {
        self.inhibition_radius = Some(r);
        self
    }

    #[inline]
    pub fn pilot(&self, user: usize) -> Option<usize> {
        self.pilots[user]
    }

    #[inline]
    pub fn is_assigned(&self, user: usize) -> bool {
        self.pilots[user].is_some()
    }

    pub fn pilots(&self) -> &[Option<usize>] {
        &self.pilots
    }

    pub fn pilot_count(&self) -> usize {
        self.pilot_count
    }

    pub fn inhibition_radius(&self) -> Option<T> {
        self.inhibition_radius
    }

    pub fn scheme(&self) -> &str {
        &self.scheme
    }

    pub fn len(&self) -> usize {
        self.pilots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pilots.is_empty()
    }

    pub fn assigned_count(&self) -> usize {
        self.pilots.iter().filter(|p| p.is_some()).count()
    }

    /// Users on each pilot, in index order.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut g = vec![Vec::new(); self.pilot_count];
        for (k, p) in self.pilots.iter().enumerate() {
            if let Some(p) = p {
                g[*p].push(k);
            }
        }
        g
    }

    /// First pair of co-pilot users closer than `radius`, if any.
    pub fn hard_core_violation(&self, users: &PointSet<T>, radius: T) -> Option<(usize, usize)> {
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                if self.pilots[i].is_some()
                    && self.pilots[i] == self.pilots[j]
                    && users.point(i).distance(&users.point(j)) < radius
                {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// Writes `user_index,x,y,pilot` rows with metadata comments.
    pub fn write_csv<W: Write>(&self, mut out: W, users: &PointSet<T>, seed: u64) -> Result<()> {
        if users.len() != self.len() {
            return Err(Error::Data("assignment and user set differ in length".into()));
        }
        writeln!(out, "# scheme={}", self.scheme)?;
        writeln!(out, "# P={}", self.pilot_count)?;
        if let Some(r) = self.inhibition_radius {
            writeln!(out, "# R_inh={r}")?;
        }
        writeln!(out, "# seed={seed}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["user_index", "x", "y", "pilot"])?;
        for (k, p) in self.pilots.iter().enumerate() {
            let pt = users.point(k);
            let pilot = p.map(|p| (p + 1).to_string()).unwrap_or_else(|| "unassigned".into());
            w.write_record([k.to_string(), pt.x.to_string(), pt.y.to_string(), pilot])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Uniform index into `0..len` from a unit draw.
#[inline]
pub(crate) fn pick(u: f64, len: usize) -> usize {
    ((u * len as f64) as usize).min(len - 1)
}

/// Independent uniform pilot per user; nobody is left unassigned.
pub fn assign_random<T: Scalar>(user_count: usize, pilots: usize, seed: u64) -> Result<PilotAssignment<T>> {
    if pilots == 0 {
        return Err(Error::param("pilots", "must be >= 1"));
    }
    let mut rng = stream_rng(seed, streams::RANDOM_ASSIGNMENT);
    let table = (0..user_count).map(|_| Some(rng.random_range(0..pilots))).collect();
    PilotAssignment::new(table, pilots, "random")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_with_one_pilot() {
        let a: PilotAssignment<f64> = assign_random(50, 1, 3).unwrap();
        assert!(a.pilots().iter().all(|p| *p == Some(0)));
    }

    #[test]
    fn random_is_deterministic_and_uniform() {
        let a: PilotAssignment<f64> = assign_random(1_000_000, 8, 5).unwrap();
        let b: PilotAssignment<f64> = assign_random(1_000_000, 8, 5).unwrap();
        assert_eq!(a, b);
        let mut counts = [0usize; 8];
        for p in a.pilots().iter().flatten() {
            counts[*p] += 1;
        }
        for c in counts {
            let f = c as f64 / 1e6;
            assert!((f - 0.125).abs() / 0.125 < 0.01, "{f}");
        }
    }

    #[test]
    fn zero_pilots_rejected() {
        assert!(assign_random::<f64>(3, 0, 0).is_err());
        assert!(PilotAssignment::<f64>::new(vec![Some(2)], 2, "x").is_err());
    }

    #[test]
    fn groups_partition_assigned_users() {
        let a = PilotAssignment::<f64>::new(vec![Some(1), None, Some(0), Some(1)], 2, "x").unwrap();
        assert_eq!(a.groups(), vec![vec![2], vec![0, 3]]);
        assert_eq!(a.assigned_count(), 3);
    }
}
