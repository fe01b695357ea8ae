use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Scheme};
use crate::assignment::{assign_distributed, assign_random, assign_regenerative, assign_rsa, PilotAssignment, SensingConfig};
use crate::bnp::{bnp_solve_with, BnpInstance, BnpOptions};
use crate::channel::{user_sinr, GainModel, GroupChannel, SeConfig};
use crate::error::{Error, Result};
use crate::geometry::{assign_marks, sample_ppp, CircularWindow, Point, PointSet};
use crate::linalg::Matrix;
use crate::maxmin::{maxmin_assign, PartitionInstance, PartitionStatus};
use crate::rng::{derive_seed, streams};
use crate::spectral::{cluster_users, ClusterOptions};

/// One trial of one scheme. The column set is the same for every scheme.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub trial: usize,
    pub seed: u64,
    pub scheme: Scheme,
    pub user_density: f64,
    pub rrh_density: f64,
    pub pilots: usize,
    /// Empty for schemes without a radius.
    pub inhibition_radius: Option<f64>,
    pub users: usize,
    pub rrhs: usize,
    pub typical_assigned: bool,
    pub typical_se: f64,
    /// Over users inside the measurement window, the typical user included.
    pub sum_se: Option<f64>,
    /// Assigned users per m² in the measurement window, typical user excluded.
    pub assigned_density: f64,
    pub status: String,
    pub runtime_ms: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    /// Half-width of the normal-approximation 95% interval.
    pub half_width: f64,
}

impl MeanCi {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        if values.is_empty() {
            return MeanCi { mean: f64::NAN, half_width: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        MeanCi {
            mean,
            half_width: 1.96 * (var / n).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scheme: Scheme,
    pub inhibition_radius: Option<f64>,
    pub trials: usize,
    pub typical_se: MeanCi,
    pub assignment_frequency: MeanCi,
    pub sum_se: Option<MeanCi>,
    pub assigned_density: MeanCi,
}

impl Summary {
    pub fn of(rows: &[ResultRow]) -> Option<Self> {
        let first = rows.first()?;
        let col = |f: &dyn Fn(&ResultRow) -> f64| MeanCi::of(&rows.iter().map(f).collect::<Vec<_>>());
        let sums: Option<Vec<f64>> = rows.iter().map(|r| r.sum_se).collect();
        Some(Summary {
            scheme: first.scheme,
            inhibition_radius: first.inhibition_radius,
            trials: rows.len(),
            typical_se: col(&|r| r.typical_se),
            assignment_frequency: col(&|r| if r.typical_assigned { 1.0 } else { 0.0 }),
            sum_se: sums.map(|s| MeanCi::of(&s)),
            assigned_density: col(&|r| r.assigned_density),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Dataset {
    pub config: ExperimentConfig,
    pub rows: Vec<ResultRow>,
    pub summaries: Vec<Summary>,
}

/// Seed of trial `i`; shared by every scheme so cross-scheme comparisons are paired.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    derive_seed(derive_seed(base, streams::TRIAL), trial as u64)
}

/// RRHs and users of one trial. The typical user sits at index 0, at the
/// origin, with a random mark like everyone else.
pub fn realization(cfg: &ExperimentConfig, seed: u64) -> Result<(PointSet<f64>, PointSet<f64>)> {
    let window = CircularWindow::centered(cfg.generation_radius)?;
    let rrhs = sample_ppp(cfg.rrh_density, &window, derive_seed(seed, streams::RRHS))?;
    let mut users = sample_ppp(cfg.user_density, &window, derive_seed(seed, streams::USERS))?;
    users.plant_front(Point::origin())?;
    Ok((rrhs, assign_marks(users, derive_seed(seed, streams::MARKS))))
}

pub fn gain_matrix(rrhs: &[Point<f64>], users: &[Point<f64>], gains: &GainModel<f64>) -> Matrix<f64> {
    Matrix::from_fn(rrhs.len(), users.len(), |m, k| gains.gain(&rrhs[m], &users[k]))
}

/// Runs `scheme` on a realization. The second value is a status label.
pub fn assign_scheme(
    cfg: &ExperimentConfig,
    scheme: Scheme,
    radius: f64,
    rrhs: &PointSet<f64>,
    users: &PointSet<f64>,
    seed: u64,
) -> Result<(PilotAssignment<f64>, String)> {
    let p = cfg.pilots;
    let seed = derive_seed(seed, streams::SCHEME);
    let ok = |a: PilotAssignment<f64>| Ok((a, "ok".to_string()));
    match scheme {
        Scheme::Rsa => ok(assign_rsa(users, p, radius, seed)?),
        Scheme::Regenerative => ok(assign_regenerative(users, p, radius)?),
        Scheme::DistributedRsa => {
            let pl = cfg.pathloss();
            let sensing = SensingConfig::from_radius(radius, cfg.se_config().pilot_energy, &pl);
            ok(assign_distributed(users, p, &sensing, &pl, seed)?)
        }
        Scheme::Random => ok(assign_random(users.len(), p, seed)?),
        Scheme::Maxmin => {
            let mut inst = PartitionInstance::new(users, p);
            inst.epsilon = cfg.maxmin_epsilon;
            inst.time_budget = Duration::from_secs_f64(cfg.time_budget_s);
            let r = maxmin_assign(&inst)?;
            if r.status == PartitionStatus::Infeasible {
                return Err(Error::Infeasible(format!("{} users cannot be split into {p} sets of two", users.len())));
            }
            let status = if r.status == PartitionStatus::Approximate { "approximate" } else { "ok" };
            Ok((r.to_assignment(p)?, status.to_string()))
        }
        Scheme::Bnp => {
            let beta = gain_matrix(rrhs.points(), users.points(), &GainModel::new(&cfg.pathloss()));
            let opts = ClusterOptions {
                k_override: cfg.clusters,
                max_cluster_users: Some(p),
                ..ClusterOptions::default()
            };
            let clusters = cluster_users(&beta, p, seed, &opts)?;
            let inst = BnpInstance::new(beta, p, clusters.user_membership, cfg.se_config().pilot_energy)?
                .with_sinr_floor_db(cfg.sinr_floor_db)
                .with_big_m(cfg.big_m);
            let out = bnp_solve_with(
                &inst,
                &BnpOptions {
                    time_budget: Duration::from_secs_f64(cfg.time_budget_s),
                    max_pricing_calls: cfg.max_pricing_calls,
                },
            )?;
            let status = if out.stats.certified {
                "certified"
            } else if out.stats.timed_out {
                "budget-exceeded"
            } else {
                "heuristic"
            };
            Ok((out.assignment, status.to_string()))
        }
    }
}

/// Sum of capped SE over users inside `measure`, one co-pilot group at a time.
pub fn window_sum_se(
    rrhs: &[Point<f64>],
    users: &PointSet<f64>,
    assignment: &PilotAssignment<f64>,
    se: &SeConfig<f64>,
    measure: &CircularWindow<f64>,
) -> Result<f64> {
    let gains = GainModel::new(&se.pathloss);
    let mut total = 0.0;
    for group in assignment.groups() {
        if !group.iter().any(|&k| measure.contains(&users.point(k))) {
            continue;
        }
        let members: Vec<Point<f64>> = group.iter().map(|&k| users.point(k)).collect();
        let ch = GroupChannel::new(rrhs, &members, &gains, se.pilot_energy, assignment.pilot_count())?;
        for (i, &k) in group.iter().enumerate() {
            if measure.contains(&users.point(k)) {
                total += se.capped_se(ch.sinr(i));
            }
        }
    }
    Ok(total)
}

pub fn run_trial(cfg: &ExperimentConfig, scheme: Scheme, radius: f64, trial: usize) -> Result<ResultRow> {
    let seed = trial_seed(cfg.seed, trial);
    let (rrhs, users) = realization(cfg, seed)?;
    let start = Instant::now();
    let (asg, status) = assign_scheme(cfg, scheme, radius, &rrhs, &users, seed)?;
    let elapsed = start.elapsed();
    let se = cfg.se_config();
    let typical = user_sinr(rrhs.points(), users.points(), &asg, 0, &se)?;
    let measure = CircularWindow::centered(cfg.measurement_radius)?;
    let sum_se = if cfg.skip_sum_se {
        None
    } else {
        Some(window_sum_se(rrhs.points(), &users, &asg, &se, &measure)?)
    };
    let assigned = (1..users.len())
        .filter(|&k| asg.is_assigned(k) && measure.contains(&users.point(k)))
        .count();
    Ok(ResultRow {
        trial,
        seed,
        scheme,
        user_density: cfg.user_density,
        rrh_density: cfg.rrh_density,
        pilots: cfg.pilots,
        inhibition_radius: scheme.uses_radius().then_some(radius),
        users: users.len(),
        rrhs: rrhs.len(),
        typical_assigned: typical.is_some(),
        typical_se: typical.map_or(0.0, |s| se.capped_se(s)),
        sum_se,
        assigned_density: assigned as f64 / measure.area(),
        status,
        runtime_ms: cfg.record_timing.then(|| elapsed.as_secs_f64() * 1e3),
    })
}

/// Runs every trial for each configured radius (one pass when the scheme has
/// no radius). Row order is fixed by (radius, trial).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Dataset> {
    cfg.validate()?;
    let radii = if cfg.scheme.uses_radius() { cfg.radii() } else { vec![cfg.inhibition_radius] };
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for r in radii {
        let batch: Vec<ResultRow> = (0..cfg.trials())
            .into_par_iter()
            .map(|t| run_trial(cfg, cfg.scheme, r, t))
            .collect::<Result<_>>()?;
        summaries.extend(Summary::of(&batch));
        rows.extend(batch);
    }
    Ok(Dataset {
        config: cfg.clone(),
        rows,
        summaries,
    })
}

/// Mean typical-user SE of RSA for each radius, on shared trial seeds.
pub fn rinh_curve(cfg: &ExperimentConfig, grid: &[f64]) -> Result<Vec<(f64, MeanCi)>> {
    grid.iter()
        .map(|&r| {
            let se: Vec<f64> = (0..cfg.trials())
                .into_par_iter()
                .map(|t| run_trial(cfg, Scheme::Rsa, r, t).map(|row| row.typical_se))
                .collect::<Result<_>>()?;
            Ok((r, MeanCi::of(&se)))
        })
        .collect()
}

/// Grid radius with the highest mean RSA typical-user SE; ties go to the
/// smallest radius.
pub fn best_rinh(cfg: &ExperimentConfig, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::param("grid", "must not be empty"));
    }
    let mut curve = rinh_curve(cfg, grid)?;
    curve.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = curve[0];
    for c in &curve[1..] {
        if c.1.mean > best.1.mean {
            best = *c;
        }
    }
    Ok(best.0)
}
