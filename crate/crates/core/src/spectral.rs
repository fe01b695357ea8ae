//! Normalized-cut co-clustering of users and RRHs on the bipartite gain graph.

use log::{debug, warn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::rng::{stream_rng, streams};
use crate::scalar::Scalar;

/// Complete bipartite graph between users and RRHs weighted by large-scale
/// gain. Vertices are numbered users first, then RRHs.
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteGainGraph<T> {
    /// Users × RRHs.
    weights: Matrix<T>,
}

impl<T: Scalar> BipartiteGainGraph<T> {
    /// `beta` is RRHs × users, as stored in the channel state.
    pub fn build(beta: &Matrix<T>) -> Result<Self> {
        if let Some(b) = (0..beta.rows()).flat_map(|i| beta.row(i).iter()).find(|b| !(**b > T::zero()) || !b.is_finite()) {
            return Err(Error::Data(format!("gains must be finite and > 0, found {b}")));
        }
        Ok(BipartiteGainGraph {
            weights: beta.transpose(),
        })
    }

    pub fn users(&self) -> usize {
        self.weights.rows()
    }

    pub fn rrhs(&self) -> usize {
        self.weights.cols()
    }

    pub fn vertices(&self) -> usize {
        self.users() + self.rrhs()
    }

    /// Edge weight between vertices `i` and `j`.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> T {
        let nu = self.users();
        match (i < nu, j < nu) {
            (true, false) => self.weights[(i, j - nu)],
            (false, true) => self.weights[(j, i - nu)],
            _ => T::zero(),
        }
    }

    pub fn adjacency(&self) -> Matrix<T> {
        let n = self.vertices();
        Matrix::from_fn(n, n, |i, j| self.weight(i, j))
    }

    pub fn degrees(&self) -> Vec<T> {
        let mut d = vec![T::zero(); self.vertices()];
        let nu = self.users();
        for u in 0..nu {
            for r in 0..self.rrhs() {
                let w = self.weights[(u, r)];
                d[u] += w;
                d[nu + r] += w;
            }
        }
        d
    }

    pub fn laplacian(&self) -> Matrix<T> {
        let d = self.degrees();
        let n = self.vertices();
        Matrix::from_fn(n, n, |i, j| if i == j { d[i] } else { -self.weight(i, j) })
    }

    /// `D^{-1/2} L D^{-1/2}`, with unit diagonal.
    pub fn normalized_laplacian(&self) -> Matrix<T> {
        let d = self.degrees();
        let n = self.vertices();
        Matrix::from_fn(n, n, |i, j| {
            if i == j {
                T::one()
            } else {
                let w = self.weight(i, j);
                if w == T::zero() {
                    T::zero()
                } else {
                    -w / (d[i] * d[j]).sqrt()
                }
            }
        })
    }
}

/// Half the sum over clusters of cut weight divided by cluster volume.
/// Empty clusters are skipped.
pub fn ncut_value<T: Scalar>(graph: &BipartiteGainGraph<T>, membership: &[usize]) -> Result<T> {
    if membership.len() != graph.vertices() {
        return Err(Error::Data(format!(
            "membership covers {} of {} vertices",
            membership.len(),
            graph.vertices()
        )));
    }
    let k = membership.iter().copied().max().map_or(0, |m| m + 1);
    let d = graph.degrees();
    let mut cut = vec![T::zero(); k];
    let mut vol = vec![T::zero(); k];
    let mut seen = vec![false; k];
    let nu = graph.users();
    for (v, &c) in membership.iter().enumerate() {
        vol[c] += d[v];
        seen[c] = true;
    }
    for u in 0..nu {
        for r in 0..graph.rrhs() {
            let (a, b) = (membership[u], membership[nu + r]);
            if a != b {
                let w = graph.weights[(u, r)];
                cut[a] += w;
                cut[b] += w;
            }
        }
    }
    let mut total = T::zero();
    for c in 0..k {
        if !seen[c] {
            warn!("cluster {c} is empty; skipped in Ncut");
            continue;
        }
        total += cut[c] / vol[c];
    }
    Ok(total / T::of(2.0))
}

#[derive(Clone, Debug)]
pub struct Embedding<T> {
    /// Vertices × K, columns orthonormal.
    pub vectors: Matrix<T>,
    pub eigenvalues: Vec<T>,
    /// Full ascending spectrum of the normalized Laplacian.
    pub spectrum: Vec<T>,
}

/// Eigenvectors of the normalized Laplacian for the `k` smallest
/// eigenvalues, skipping the null vector unless `include_null` is set.
pub fn normalized_spectral_embedding<T: Scalar>(graph: &BipartiteGainGraph<T>, k: usize, include_null: bool) -> Result<Embedding<T>> {
    let n = graph.vertices();
    let skip = usize::from(!include_null);
    if k == 0 || k + skip > n {
        return Err(Error::param("k", format!("must be in 1..={} for {n} vertices", n - skip)));
    }
    let s = graph.normalized_laplacian();
    let eig = symmetric_eigen(&s)?;
    let vectors = Matrix::from_fn(n, k, |i, j| eig.vectors[(i, j + skip)]);
    Ok(Embedding {
        vectors,
        eigenvalues: eig.values[skip..skip + k].to_vec(),
        spectrum: eig.values,
    })
}

/// Scales each row to unit Euclidean norm.
pub fn row_normalize<T: Scalar>(z: &Matrix<T>) -> Result<Matrix<T>> {
    let mut out = z.clone();
    for i in 0..z.rows() {
        let norm = z.row(i).iter().map(|&x| x * x).sum::<T>().sqrt();
        if !(norm > T::zero()) {
            return Err(Error::Numerical(format!("row {i} of the embedding is zero")));
        }
        out.row_mut(i).iter_mut().for_each(|x| *x /= norm);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            restarts: 10,
            max_iterations: 300,
            tolerance: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansResult<T> {
    pub membership: Vec<usize>,
    pub objective: T,
    /// Objective after each Lloyd iteration of the winning restart.
    pub history: Vec<T>,
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

fn seed_centres<T: Scalar>(rows: &Matrix<T>, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<T>> {
    let n = rows.rows();
    let mut centres = vec![rows.row(rng.random_range(0..n)).to_vec()];
    let mut d2: Vec<T> = (0..n).map(|i| sq_dist(rows.row(i), &centres[0])).collect();
    while centres.len() < k {
        let total: T = d2.iter().copied().sum();
        let next = if total > T::zero() {
            let target = T::of(rng.random::<f64>()) * total;
            let mut acc = T::zero();
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centres.push(rows.row(next).to_vec());
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(rows.row(i), centres.last().unwrap()));
        }
    }
    centres
}

fn lloyd<T: Scalar>(rows: &Matrix<T>, mut centres: Vec<Vec<T>>, opts: &KMeansOptions) -> KMeansResult<T> {
    let (n, dim, k) = (rows.rows(), rows.cols(), centres.len());
    let mut membership = vec![0usize; n];
    let mut history = Vec::new();
    let mut prev = T::infinity();
    for _ in 0..opts.max_iterations.max(1) {
        let mut objective = T::zero();
        for i in 0..n {
            let (best, d) = (0..k)
                .map(|c| (c, sq_dist(rows.row(i), &centres[c])))
                .fold((0, T::infinity()), |a, b| if b.1 < a.1 { b } else { a });
            membership[i] = best;
            objective += d;
        }
        history.push(objective);
        let mut sums = vec![vec![T::zero(); dim]; k];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[membership[i]] += 1;
            for (s, &x) in sums[membership[i]].iter_mut().zip(rows.row(i)) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let cnt = T::of_usize(counts[c]);
                centres[c] = sums[c].iter().map(|&s| s / cnt).collect();
            } else {
                // Re-seed an empty cluster at the point worst served by its centre.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(rows.row(a), &centres[membership[a]])
                            .partial_cmp(&sq_dist(rows.row(b), &centres[membership[b]]))
                            .unwrap()
                    })
                    .unwrap();
                centres[c] = rows.row(far).to_vec();
            }
        }
        let done = prev.is_finite() && (prev - objective).abs() <= T::of(opts.tolerance) * prev.max(T::min_positive_value());
        prev = objective;
        if done {
            break;
        }
    }
    // Final assignment against the final centres.
    let mut objective = T::zero();
    for i in 0..n {
        let (best, d) = (0..k)
            .map(|c| (c, sq_dist(rows.row(i), &centres[c])))
            .fold((0, T::infinity()), |a, b| if b.1 < a.1 { b } else { a });
        membership[i] = best;
        objective += d;
    }
    if history.last().is_none_or(|&h| objective < h) {
        history.push(objective);
    }
    KMeansResult {
        membership,
        objective,
        history,
    }
}

/// k-means++ seeded Lloyd iterations; best objective over the restarts.
pub fn kmeans<T: Scalar>(rows: &Matrix<T>, k: usize, seed: u64, opts: &KMeansOptions) -> Result<KMeansResult<T>> {
    let n = rows.rows();
    if k == 0 || k > n {
        return Err(Error::param("k", format!("must be in 1..={n}, got {k}")));
    }
    let mut rng = stream_rng(seed, streams::KMEANS);
    let mut best: Option<KMeansResult<T>> = None;
    for _ in 0..opts.restarts.max(1) {
        let centres = seed_centres(rows, k, &mut rng);
        let r = lloyd(rows, centres, opts);
        if best.as_ref().is_none_or(|b| r.objective < b.objective) {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterOptions {
    /// Fixed cluster count; defaults to `max(P, ceil(N_u / P))`.
    pub k_override: Option<usize>,
    pub include_null_vector: bool,
    pub kmeans: KMeansOptions,
    /// Largest number of users allowed in one cluster, usually `P`.
    pub max_cluster_users: Option<usize>,
    pub max_reruns: usize,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            k_override: None,
            include_null_vector: false,
            kmeans: KMeansOptions::default(),
            max_cluster_users: None,
            max_reruns: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult<T> {
    pub user_membership: Vec<usize>,
    pub rrh_membership: Vec<usize>,
    /// Number of cluster labels in use across users and RRHs.
    pub k: usize,
    pub ncut: T,
    /// Re-runs with a larger `k` forced by oversized clusters.
    pub reruns: usize,
    /// Whether oversized clusters had to be split after the re-runs.
    pub split: bool,
}

impl<T: Scalar> ClusterResult<T> {
    pub fn users_in(&self, cluster: usize) -> Vec<usize> {
        (0..self.user_membership.len()).filter(|&u| self.user_membership[u] == cluster).collect()
    }

    /// Clusters that contain at least one user.
    pub fn user_clusters(&self) -> Vec<Vec<usize>> {
        let k = self.user_membership.iter().copied().max().map_or(0, |m| m + 1);
        let mut out = vec![Vec::new(); k];
        for (u, &c) in self.user_membership.iter().enumerate() {
            out[c].push(u);
        }
        out.retain(|c| !c.is_empty());
        out
    }
}

pub fn default_cluster_count(users: usize, pilots: usize) -> usize {
    pilots.max(users.div_ceil(pilots.max(1)))
}

/// Spectral embedding, row normalization and k-means on all vertices.
pub fn cluster_users<T: Scalar>(beta: &Matrix<T>, pilots: usize, seed: u64, opts: &ClusterOptions) -> Result<ClusterResult<T>> {
    let graph = BipartiteGainGraph::build(beta)?;
    let nu = graph.users();
    let n = graph.vertices();
    if nu == 0 {
        return Ok(ClusterResult {
            user_membership: Vec::new(),
            rrh_membership: vec![0; graph.rrhs()],
            k: 1,
            ncut: T::zero(),
            reruns: 0,
            split: false,
        });
    }
    let skip = usize::from(!opts.include_null_vector);
    let limit = opts.max_cluster_users.unwrap_or(usize::MAX);
    let mut k = opts.k_override.unwrap_or_else(|| default_cluster_count(nu, pilots)).max(1);
    let mut reruns = 0;
    let mut membership;
    loop {
        membership = if k == 1 {
            vec![0; n]
        } else {
            let kk = k.min(n - skip);
            let emb = normalized_spectral_embedding(&graph, kk, opts.include_null_vector)?;
            let rows = row_normalize(&emb.vectors)?;
            kmeans(&rows, kk.min(n), seed, &opts.kmeans)?.membership
        };
        let oversized = largest_user_cluster(&membership[..nu]) > limit;
        if !oversized || opts.k_override.is_some() || reruns >= opts.max_reruns || k + skip >= n {
            break;
        }
        reruns += 1;
        k += 1;
        debug!("cluster exceeds {limit} users; re-running with k = {k}");
    }
    let mut split = false;
    if opts.k_override.is_none() && largest_user_cluster(&membership[..nu]) > limit {
        split = true;
        split_oversized(&graph, &mut membership, limit, seed, &opts.kmeans)?;
    }
    compact_labels(&mut membership);
    let ncut = ncut_value(&graph, &membership)?;
    let k_used = membership.iter().copied().max().map_or(0, |m| m + 1);
    Ok(ClusterResult {
        user_membership: membership[..nu].to_vec(),
        rrh_membership: membership[nu..].to_vec(),
        k: k_used,
        ncut,
        reruns,
        split,
    })
}

fn largest_user_cluster(users: &[usize]) -> usize {
    let k = users.iter().copied().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    users.iter().for_each(|&c| counts[c] += 1);
    counts.into_iter().max().unwrap_or(0)
}

fn compact_labels(membership: &mut [usize]) {
    let mut map = std::collections::BTreeMap::new();
    for c in membership.iter_mut() {
        let next = map.len();
        *c = *map.entry(*c).or_insert(next);
    }
}

/// Repeatedly bisects the largest user cluster with plain k-means on the
/// users' gain profiles until every cluster fits.
fn split_oversized<T: Scalar>(graph: &BipartiteGainGraph<T>, membership: &mut [usize], limit: usize, seed: u64, opts: &KMeansOptions) -> Result<()> {
    let nu = graph.users();
    let limit = limit.max(1);
    loop {
        let k = membership.iter().copied().max().map_or(0, |m| m + 1);
        let mut groups = vec![Vec::new(); k];
        for u in 0..nu {
            groups[membership[u]].push(u);
        }
        let Some((_, big)) = groups.iter().enumerate().filter(|(_, g)| g.len() > limit).max_by_key(|(_, g)| g.len()) else {
            return Ok(());
        };
        let big = big.clone();
        // Gains in dB, normalized per user, so the split reflects position.
        let rows = Matrix::from_fn(big.len(), graph.rrhs(), |i, r| graph.weights[(big[i], r)].log10());
        let rows = row_normalize(&center_rows(&rows)).unwrap_or(rows);
        let parts = kmeans(&rows, 2, seed ^ big.len() as u64, opts)?.membership;
        let moved: Vec<usize> = (0..big.len()).filter(|&i| parts[i] == 1).collect();
        let moved = if moved.is_empty() || moved.len() == big.len() {
            (big.len() / 2..big.len()).collect()
        } else {
            moved
        };
        for i in moved {
            membership[big[i]] = k;
        }
    }
}

fn center_rows<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    let mut out = m.clone();
    for i in 0..m.rows() {
        let mean = m.row(i).iter().copied().sum::<T>() / T::of_usize(m.cols().max(1));
        out.row_mut(i).iter_mut().for_each(|x| *x -= mean);
    }
    out
}
