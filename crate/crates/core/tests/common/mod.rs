#![allow(dead_code)]

use pilotgrid::bnp::BnpInstance;
use pilotgrid::channel::{GainModel, PathlossParams, SeConfig};
use pilotgrid::experiment::gain_matrix;
use pilotgrid::geometry::{sample_uniform, CircularWindow, Point, PointSet};
use pilotgrid::rng::derive_seed;
use pilotgrid::spectral::{cluster_users, ClusterOptions};

/// Every partition of `0..n` into exactly `p` blocks of at least two users,
/// as membership vectors in restricted-growth form.
pub fn partitions(n: usize, p: usize) -> Vec<Vec<usize>> {
    fn rec(u: usize, n: usize, p: usize, cur: &mut Vec<usize>, sizes: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if u == n {
            if sizes.len() == p && sizes.iter().all(|&s| s >= 2) {
                out.push(cur.clone());
            }
            return;
        }
        let open = sizes.len();
        for b in 0..=open.min(p - 1) {
            if b == open {
                sizes.push(0);
            }
            sizes[b] += 1;
            cur.push(b);
            rec(u + 1, n, p, cur, sizes, out);
            cur.pop();
            sizes[b] -= 1;
            if b == open {
                sizes.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(0, n, p, &mut Vec::new(), &mut Vec::new(), &mut out);
    out
}

/// Smallest distance between two users sharing a block.
pub fn min_block_distance(membership: &[usize], users: &[Point<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..users.len() {
        for j in i + 1..users.len() {
            if membership[i] == membership[j] {
                best = best.min(users[i].distance(&users[j]));
            }
        }
    }
    best
}

/// Brute-force max-min co-pilot distance.
pub fn brute_force_maxmin(users: &[Point<f64>], p: usize) -> Option<f64> {
    partitions(users.len(), p)
        .iter()
        .map(|m| min_block_distance(m, users))
        .max_by(|a, b| a.total_cmp(b))
}

/// Simple sequential inhibition with the given arrival order.
pub fn sequential_inhibition(points: &[Point<f64>], order: &[usize], radius: f64) -> Vec<bool> {
    let mut kept = vec![false; points.len()];
    let mut accepted: Vec<usize> = Vec::new();
    for &i in order {
        if accepted.iter().all(|&j| points[i].distance(&points[j]) >= radius) {
            kept[i] = true;
            accepted.push(i);
        }
    }
    kept
}

pub struct SmallInstance {
    pub rrhs: PointSet<f64>,
    pub users: PointSet<f64>,
    pub instance: BnpInstance<f64>,
}

/// Uniform users and RRHs on a 400 m disk, spectrally clustered with at
/// most `pilots` users per cluster.
pub fn small_bnp_instance(users: usize, rrhs: usize, pilots: usize, seed: u64, sinr_floor: f64) -> SmallInstance {
    let disk = CircularWindow::centered(400.0).unwrap();
    let r = sample_uniform(rrhs, &disk, derive_seed(seed, 1));
    let u = sample_uniform(users, &disk, derive_seed(seed, 2));
    let se = SeConfig::<f64>::for_pilots(pilots, 80.0);
    let beta = gain_matrix(r.points(), u.points(), &GainModel::new(&PathlossParams::default()));
    let opts = ClusterOptions {
        max_cluster_users: Some(pilots),
        ..ClusterOptions::default()
    };
    let clusters = cluster_users(&beta, pilots, derive_seed(seed, 3), &opts).unwrap();
    let mut instance = BnpInstance::new(beta, pilots, clusters.user_membership, se.pilot_energy).unwrap();
    instance.sinr_floor = sinr_floor;
    SmallInstance { rrhs: r, users: u, instance }
}
