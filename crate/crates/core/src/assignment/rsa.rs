use rand::Rng;

use super::{pick, PilotAssignment};
use crate::error::{Error, Result};
use crate::geometry::{PointSet, SpatialGrid};
use crate::rng::{stream_rng, streams};
use crate::scalar::Scalar;

fn check(pilots: usize, radius: f64) -> Result<()> {
    if pilots == 0 {
        return Err(Error::param("pilots", "must be >= 1"));
    }
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::param("inhibition_radius", format!("must be finite and >= 0, got {radius}")));
    }
    Ok(())
}

/// Randomized sequential assignment: users arrive in increasing mark order
/// and each takes a uniformly random pilot not held by an earlier user closer
/// than `radius`. Users that find every pilot blocked stay unassigned.
pub fn assign_rsa<T: Scalar>(users: &PointSet<T>, pilots: usize, radius: T, seed: u64) -> Result<PilotAssignment<T>> {
    check(pilots, radius.as_f64())?;
    if users.marks().is_none() {
        return Err(Error::Data("randomized assignment needs marked users".into()));
    }
    let n = users.len();
    let mut choice_rng = stream_rng(seed, streams::PILOT_CHOICE);
    let draws: Vec<f64> = (0..n).map(|_| choice_rng.random()).collect();

    let mut table = vec![None; n];
    let mut grid = SpatialGrid::empty(users.window(), radius, n);
    let mut blocked = vec![false; pilots];
    let mut free = Vec::with_capacity(pilots);
    let r2 = radius * radius;
    for k in users.arrival_order() {
        let p = users.point(k);
        blocked.iter_mut().for_each(|b| *b = false);
        grid.for_each_candidate(&p, radius, |j| {
            if users.point(j).distance_sq(&p) < r2 {
                if let Some(q) = table[j] {
                    blocked[q] = true;
                }
            }
        });
        free.clear();
        free.extend((0..pilots).filter(|&q| !blocked[q]));
        if !free.is_empty() {
            table[k] = Some(free[pick(draws[k], free.len())]);
            grid.insert(k, &p);
        }
    }
    Ok(PilotAssignment::new(table, pilots, "rsa")?.with_inhibition_radius(radius))
}

/// Pilot-by-pilot sequential packing: pass `q` visits the still-unassigned
/// users in arrival order and gives pilot `q` to each one with no earlier
/// pilot-`q` holder closer than `radius`.
pub fn assign_regenerative<T: Scalar>(users: &PointSet<T>, pilots: usize, radius: T) -> Result<PilotAssignment<T>> {
    check(pilots, radius.as_f64())?;
    let n = users.len();
    let mut table = vec![None; n];
    let mut pending = users.arrival_order();
    let r2 = radius * radius;
    for q in 0..pilots {
        if pending.is_empty() {
            break;
        }
        let mut grid = SpatialGrid::empty(users.window(), radius, pending.len());
        let mut rest = Vec::with_capacity(pending.len());
        for &k in &pending {
            let p = users.point(k);
            let mut clash = false;
            grid.for_each_candidate(&p, radius, |j| {
                clash |= users.point(j).distance_sq(&p) < r2;
            });
            if clash {
                rest.push(k);
            } else {
                table[k] = Some(q);
                grid.insert(k, &p);
            }
        }
        pending = rest;
    }
    Ok(PilotAssignment::new(table, pilots, "regenerative")?.with_inhibition_radius(radius))
}
