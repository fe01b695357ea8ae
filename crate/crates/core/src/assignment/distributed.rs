use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{pick, PilotAssignment};
use crate::channel::{GainModel, PathlossParams};
use crate::error::{Error, Result};
use crate::geometry::PointSet;
use crate::rng::{stream_rng, streams};
use crate::scalar::Scalar;

/// Power-sensing parameters: a pilot is usable when the large-scale power
/// already received on it stays at or below `threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensingConfig<T> {
    pub threshold: T,
    pub pilot_energy: T,
}

impl<T: Scalar> SensingConfig<T> {
    /// Threshold equal to the power of one user at distance `radius`, so a
    /// lone interferer blocks exactly when it is inside the radius.
    pub fn from_radius(radius: T, pilot_energy: T, params: &PathlossParams<T>) -> Self {
        SensingConfig {
            threshold: pilot_energy * GainModel::new(params).gain_at(radius),
            pilot_energy,
        }
    }
}

/// Threshold-sensing assignment: each arriving user measures, per pilot, the
/// summed large-scale power of the earlier holders and picks uniformly among
/// pilots at or below the threshold.
pub fn assign_distributed<T: Scalar>(
    users: &PointSet<T>,
    pilots: usize,
    config: &SensingConfig<T>,
    params: &PathlossParams<T>,
    seed: u64,
) -> Result<PilotAssignment<T>> {
    if pilots == 0 {
        return Err(Error::param("pilots", "must be >= 1"));
    }
    if !(config.threshold > T::zero()) {
        return Err(Error::param("threshold", format!("must be > 0, got {}", config.threshold)));
    }
    let n = users.len();
    let gains = GainModel::new(params);
    let mut choice_rng = stream_rng(seed, streams::PILOT_CHOICE);
    let draws: Vec<f64> = (0..n).map(|_| choice_rng.random()).collect();

    let mut table = vec![None; n];
    let mut holders: Vec<Vec<usize>> = vec![Vec::new(); pilots];
    let mut free = Vec::with_capacity(pilots);
    for k in users.arrival_order() {
        let p = users.point(k);
        free.clear();
        for (q, held) in holders.iter().enumerate() {
            let power: T = held
                .iter()
                .map(|&j| config.pilot_energy * gains.gain(&p, &users.point(j)))
                .sum();
            if power <= config.threshold {
                free.push(q);
            }
        }
        if !free.is_empty() {
            let q = free[pick(draws[k], free.len())];
            table[k] = Some(q);
            holders[q].push(k);
        }
    }
    PilotAssignment::new(table, pilots, "distributed")
}
