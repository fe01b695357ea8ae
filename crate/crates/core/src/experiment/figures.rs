use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Scheme};
use super::output;
use super::run::{best_rinh, gain_matrix, rinh_curve, run_trial, trial_seed, MeanCi};
use crate::assignment::{assign_regenerative, assign_rsa};
use crate::bnp::{bnp_solve_with, BnpInstance, BnpOptions};
use crate::channel::{se_metrics, GainModel, PathlossParams, SeConfig};
use crate::error::{Error, Result};
use crate::geometry::{assign_marks, sample_ppp, sample_uniform, CircularWindow, Point};
use crate::rng::{derive_seed, streams};
use crate::spectral::{cluster_users, ClusterOptions};
use crate::theory::{assignment_probability, sequential_densities, AssignmentProbabilityInputs};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    Fig3Left,
    Fig3Center,
    Fig3Right,
    Fig4Ratios,
    Fig5Cdf,
}

impl Figure {
    pub const ALL: [Figure; 5] = [
        Figure::Fig3Left,
        Figure::Fig3Center,
        Figure::Fig3Right,
        Figure::Fig4Ratios,
        Figure::Fig5Cdf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig3Left => "fig3-left",
            Figure::Fig3Center => "fig3-center",
            Figure::Fig3Right => "fig3-right",
            Figure::Fig4Ratios => "fig4-ratios",
            Figure::Fig5Cdf => "fig5-cdf",
        }
    }

    fn default_trials(self, certified: bool) -> usize {
        match self {
            Figure::Fig3Left => 50,
            Figure::Fig3Center => 500,
            Figure::Fig3Right => 100,
            Figure::Fig4Ratios => 10,
            Figure::Fig5Cdf if certified => 20,
            Figure::Fig5Cdf => 10,
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| {
            let names: Vec<_> = Figure::ALL.iter().map(|f| f.name()).collect();
            Error::Config(format!("unknown figure `{s}`; valid names: {}", names.join(", ")))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureOptions {
    pub trials: Option<usize>,
    pub seed: u64,
    /// Fig. 5 only: shrink to oracle-checkable instances.
    pub certified: bool,
    pub time_budget_s: f64,
    /// BnP work limit, so truncated searches stop at a reproducible point.
    pub max_pricing_calls: Option<usize>,
}

impl Default for FigureOptions {
    fn default() -> Self {
        FigureOptions {
            trials: None,
            seed: 1,
            certified: false,
            time_budget_s: 60.0,
            max_pricing_calls: Some(500),
        }
    }
}

pub const DENSITY_GRID: [f64; 3] = [1e-5, 1e-4, 1e-3];
pub const RADIUS_GRID: [f64; 2] = [100.0, 200.0];
pub const PILOT_GRID: [usize; 5] = [1, 2, 4, 8, 16];
pub const RINH_GRID: [f64; 9] = [25.0, 50.0, 100.0, 150.0, 200.0, 250.0, 300.0, 400.0, 500.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Packing {
    Sequential,
    Regenerative,
}

/// Assigned-user density per trial in the measurement window, for a PPP of
/// users without a planted typical user. Trial `t` uses the same users for
/// both packings.
pub fn density_trials(
    user_density: f64,
    radius: f64,
    pilots: usize,
    trials: usize,
    seed: u64,
    generation_radius: f64,
    measurement_radius: f64,
    packing: Packing,
) -> Result<Vec<f64>> {
    let window = CircularWindow::centered(generation_radius)?;
    let measure = CircularWindow::centered(measurement_radius)?;
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = trial_seed(seed, t);
            let users = assign_marks(sample_ppp(user_density, &window, derive_seed(s, streams::USERS))?, derive_seed(s, streams::MARKS));
            let a = match packing {
                Packing::Sequential => assign_rsa(&users, pilots, radius, derive_seed(s, streams::SCHEME))?,
                Packing::Regenerative => assign_regenerative(&users, pilots, radius)?,
            };
            let n = (0..users.len())
                .filter(|&k| a.is_assigned(k) && measure.contains(&users.point(k)))
                .count();
            Ok(n as f64 / measure.area())
        })
        .collect()
}

/// Whether a user planted at the origin gets a pilot, per trial.
pub fn typical_assignment_trials(
    user_density: f64,
    radius: f64,
    pilots: usize,
    trials: usize,
    seed: u64,
    generation_radius: f64,
) -> Result<Vec<bool>> {
    let window = CircularWindow::centered(generation_radius)?;
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = trial_seed(seed, t);
            let mut users = sample_ppp(user_density, &window, derive_seed(s, streams::USERS))?;
            users.plant_front(Point::origin())?;
            let users = assign_marks(users, derive_seed(s, streams::MARKS));
            Ok(assign_rsa(&users, pilots, radius, derive_seed(s, streams::SCHEME))?.is_assigned(0))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub user_density: f64,
    pub inhibition_radius: f64,
    pub pilots: usize,
    pub copilot_density_theory: f64,
    pub copilot_density_sim: f64,
    pub copilot_density_ci: f64,
    pub assigned_density_theory: f64,
    pub assigned_density_sim: f64,
    pub trials: usize,
}

pub fn fig3_left(trials: usize, seed: u64) -> Result<Vec<DensityRow>> {
    let mut rows = Vec::new();
    for &lu in &DENSITY_GRID {
        for &r in &RADIUS_GRID {
            for p in 1..=16 {
                let th = sequential_densities(lu, r, p)?;
                let sim = MeanCi::of(&density_trials(lu, r, p, trials, seed, 1500.0, 600.0, Packing::Sequential)?);
                let pf = p as f64;
                rows.push(DensityRow {
                    user_density: lu,
                    inhibition_radius: r,
                    pilots: p,
                    copilot_density_theory: th.per_pilot,
                    copilot_density_sim: sim.mean / pf,
                    copilot_density_ci: sim.half_width / pf,
                    assigned_density_theory: th.assigned,
                    assigned_density_sim: sim.mean,
                    trials,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRow {
    pub user_density: f64,
    pub inhibition_radius: f64,
    pub pilots: usize,
    pub probability_theory: f64,
    pub probability_sim: f64,
    pub probability_ci: f64,
    pub trials: usize,
}

pub fn probability_row(user_density: f64, radius: f64, pilots: usize, trials: usize, seed: u64) -> Result<ProbabilityRow> {
    let theory = assignment_probability(&AssignmentProbabilityInputs {
        user_density,
        inhibition_radius: radius,
        pilots,
        observation_radius: 1500.0,
    })?;
    let hits: Vec<f64> = typical_assignment_trials(user_density, radius, pilots, trials, seed, 1500.0)?
        .into_iter()
        .map(|b| if b { 1.0 } else { 0.0 })
        .collect();
    let sim = MeanCi::of(&hits);
    Ok(ProbabilityRow {
        user_density,
        inhibition_radius: radius,
        pilots,
        probability_theory: theory,
        probability_sim: sim.mean,
        probability_ci: sim.half_width,
        trials,
    })
}

pub fn fig3_center(trials: usize, seed: u64) -> Result<Vec<ProbabilityRow>> {
    let mut rows = Vec::new();
    for &lu in &DENSITY_GRID {
        for &r in &RADIUS_GRID {
            for &p in &PILOT_GRID {
                rows.push(probability_row(lu, r, p, trials, seed)?);
            }
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeCurveRow {
    pub user_density: f64,
    pub scheme: Scheme,
    /// Empty for the random baseline.
    pub inhibition_radius: Option<f64>,
    pub mean_se: f64,
    pub ci: f64,
    pub trials: usize,
}

fn se_base(user_density: f64, rrh_density: f64, pilots: usize, trials: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        user_density,
        rrh_density,
        pilots,
        trials: Some(trials),
        seed,
        skip_sum_se: true,
        ..ExperimentConfig::default()
    }
}

fn mean_typical_se(cfg: &ExperimentConfig, scheme: Scheme, radius: f64) -> Result<MeanCi> {
    let se: Vec<f64> = (0..cfg.trials())
        .into_par_iter()
        .map(|t| run_trial(cfg, scheme, radius, t).map(|r| r.typical_se))
        .collect::<Result<_>>()?;
    Ok(MeanCi::of(&se))
}

/// Mean typical-user SE of RSA across radii plus the random baseline.
pub fn se_versus_radius(user_density: f64, rrh_density: f64, pilots: usize, grid: &[f64], trials: usize, seed: u64) -> Result<Vec<SeCurveRow>> {
    let cfg = se_base(user_density, rrh_density, pilots, trials, seed);
    let mut rows: Vec<SeCurveRow> = rinh_curve(&cfg, grid)?
        .into_iter()
        .map(|(r, m)| SeCurveRow {
            user_density,
            scheme: Scheme::Rsa,
            inhibition_radius: Some(r),
            mean_se: m.mean,
            ci: m.half_width,
            trials,
        })
        .collect();
    let random = mean_typical_se(&cfg, Scheme::Random, 0.0)?;
    rows.push(SeCurveRow {
        user_density,
        scheme: Scheme::Random,
        inhibition_radius: None,
        mean_se: random.mean,
        ci: random.half_width,
        trials,
    });
    Ok(rows)
}

pub fn fig3_right(trials: usize, seed: u64) -> Result<Vec<SeCurveRow>> {
    let mut rows = Vec::new();
    for &lu in &DENSITY_GRID {
        rows.extend(se_versus_radius(lu, 1e-4, 16, &RINH_GRID, trials, seed)?);
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub user_density: f64,
    pub pilots: usize,
    pub rrh_density: f64,
    pub best_rinh: f64,
    pub rsa_se: f64,
    pub maxmin_se: f64,
    pub random_se: f64,
    pub maxmin_ratio: f64,
    pub random_ratio: f64,
    pub trials: usize,
}

pub const FIG4_PANELS: [(f64, usize); 3] = [(1e-5, 16), (1e-4, 16), (1e-5, 8)];
pub const FIG4_RRH_DENSITIES: [f64; 4] = [1e-5, 3e-5, 1e-4, 3e-4];

/// Ratios of mean typical-user SE to RSA at its best radius, on paired trials.
pub fn ratio_row(user_density: f64, pilots: usize, rrh_density: f64, trials: usize, seed: u64, time_budget_s: f64) -> Result<RatioRow> {
    let mut cfg = se_base(user_density, rrh_density, pilots, trials, seed);
    cfg.time_budget_s = time_budget_s;
    let r = best_rinh(&cfg, &RINH_GRID)?;
    let rsa = mean_typical_se(&cfg, Scheme::Rsa, r)?.mean;
    let maxmin = mean_typical_se(&cfg, Scheme::Maxmin, r)?.mean;
    let random = mean_typical_se(&cfg, Scheme::Random, r)?.mean;
    Ok(RatioRow {
        user_density,
        pilots,
        rrh_density,
        best_rinh: r,
        rsa_se: rsa,
        maxmin_se: maxmin,
        random_se: random,
        maxmin_ratio: maxmin / rsa,
        random_ratio: random / rsa,
        trials,
    })
}

pub fn fig4_ratios(trials: usize, seed: u64, time_budget_s: f64) -> Result<Vec<RatioRow>> {
    let mut rows = Vec::new();
    for &(lu, p) in &FIG4_PANELS {
        for &lr in &FIG4_RRH_DENSITIES {
            rows.push(ratio_row(lu, p, lr, trials, seed, time_budget_s)?);
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SumSeRow {
    pub users: usize,
    pub rrhs: usize,
    pub pilots: usize,
    pub inhibition_radius: f64,
    pub trial: usize,
    pub seed: u64,
    pub rsa_sum_se: f64,
    pub bnp_sum_se: f64,
    pub ratio: f64,
    /// Empirical CDF of `ratio` within its configuration.
    pub cdf: f64,
    pub certified: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallSystem {
    pub users: usize,
    pub rrhs: usize,
    pub pilots: usize,
    pub disk_radius: f64,
    pub pilot_snr_db: f64,
    /// Linear SINR floor for BnP columns.
    pub sinr_floor: f64,
}

impl SmallSystem {
    pub fn new(users: usize, rrhs: usize, pilots: usize) -> Self {
        SmallSystem {
            users,
            rrhs,
            pilots,
            disk_radius: 400.0,
            pilot_snr_db: 80.0,
            sinr_floor: 0.0,
        }
    }

    fn se(&self) -> SeConfig<f64> {
        SeConfig::for_pilots(self.pilots, self.pilot_snr_db)
    }
}

/// Sum SE of RSA (fixed radius) and BnP on one uniform small-system draw.
/// Returns `(rsa, bnp, certified)`.
pub fn small_system_trial(sys: &SmallSystem, radius: f64, seed: u64, limits: &BnpOptions) -> Result<(f64, f64, bool)> {
    let disk = CircularWindow::centered(sys.disk_radius)?;
    let rrhs = sample_uniform(sys.rrhs, &disk, derive_seed(seed, streams::RRHS));
    let users = assign_marks(sample_uniform(sys.users, &disk, derive_seed(seed, streams::USERS)), derive_seed(seed, streams::MARKS));
    let se = sys.se();
    let rsa = assign_rsa(&users, sys.pilots, radius, derive_seed(seed, streams::SCHEME))?;
    let rsa_se = se_metrics(&rrhs, &users, &rsa, &se, None)?.sum_se;

    let beta = gain_matrix(rrhs.points(), users.points(), &GainModel::new(&PathlossParams::default()));
    let opts = ClusterOptions {
        max_cluster_users: Some(sys.pilots),
        ..ClusterOptions::default()
    };
    let clusters = cluster_users(&beta, sys.pilots, derive_seed(seed, streams::KMEANS), &opts)?;
    let mut inst = BnpInstance::new(beta, sys.pilots, clusters.user_membership, se.pilot_energy)?;
    inst.sinr_floor = sys.sinr_floor;
    let out = bnp_solve_with(&inst, limits)?;
    let bnp_se = se_metrics(&rrhs, &users, &out.assignment, &se, None)?.sum_se;
    Ok((rsa_se, bnp_se, out.stats.certified))
}

/// RSA radius maximizing mean sum SE over the configuration's trials.
fn small_system_radius(sys: &SmallSystem, trials: usize, seed: u64) -> Result<f64> {
    let disk = CircularWindow::centered(sys.disk_radius)?;
    let se = sys.se();
    let mut best = (f64::NEG_INFINITY, RINH_GRID[0]);
    for &r in &RINH_GRID {
        let total: f64 = (0..trials)
            .into_par_iter()
            .map(|t| {
                let s = trial_seed(seed, t);
                let rrhs = sample_uniform(sys.rrhs, &disk, derive_seed(s, streams::RRHS));
                let users = assign_marks(sample_uniform(sys.users, &disk, derive_seed(s, streams::USERS)), derive_seed(s, streams::MARKS));
                let a = assign_rsa(&users, sys.pilots, r, derive_seed(s, streams::SCHEME))?;
                Ok(se_metrics(&rrhs, &users, &a, &se, None)?.sum_se)
            })
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .sum();
        if total > best.0 {
            best = (total, r);
        }
    }
    Ok(best.1)
}

pub fn sum_se_ratios(sys: &SmallSystem, trials: usize, seed: u64, limits: &BnpOptions) -> Result<Vec<SumSeRow>> {
    let radius = small_system_radius(sys, trials, seed)?;
    let mut rows: Vec<SumSeRow> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = trial_seed(seed, t);
            let (rsa, bnp, certified) = small_system_trial(sys, radius, s, limits)?;
            Ok(SumSeRow {
                users: sys.users,
                rrhs: sys.rrhs,
                pilots: sys.pilots,
                inhibition_radius: radius,
                trial: t,
                seed: s,
                rsa_sum_se: rsa,
                bnp_sum_se: bnp,
                ratio: rsa / bnp,
                cdf: 0.0,
                certified,
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by(|a, b| a.ratio.total_cmp(&b.ratio).then(a.trial.cmp(&b.trial)));
    let n = rows.len() as f64;
    for (i, r) in rows.iter_mut().enumerate() {
        r.cdf = (i + 1) as f64 / n;
    }
    Ok(rows)
}

/// Configurations of both panels: RRH count varied at fixed pilots, then
/// pilots varied at fixed RRH count.
pub fn fig5_systems(certified: bool) -> Vec<SmallSystem> {
    let (users, pilots, pilot_sweep) = if certified { (12, 3, vec![2, 3, 4]) } else { (48, 10, vec![6, 8, 10, 12]) };
    let mut v: Vec<SmallSystem> = [5, 10, 20].into_iter().map(|nr| SmallSystem::new(users, nr, pilots)).collect();
    v.extend(pilot_sweep.into_iter().map(|p| SmallSystem::new(users, 10, p)));
    v
}

pub fn fig5_cdf(trials: usize, seed: u64, certified: bool, limits: &BnpOptions) -> Result<Vec<SumSeRow>> {
    let mut rows = Vec::new();
    for sys in fig5_systems(certified) {
        rows.extend(sum_se_ratios(&sys, trials, seed, limits)?);
    }
    Ok(rows)
}

/// Writes `<out>/<name>.csv` and returns its path.
pub fn reproduce_figure(figure: Figure, opts: &FigureOptions, out_dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)?;
    let trials = opts.trials.unwrap_or(figure.default_trials(opts.certified));
    if trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    let path = out_dir.join(format!("{}.csv", figure.name()));
    let echo = format!(
        "figure = {}\ntrials = {trials}\ncertified = {}\ntime_budget_s = {}\nmax_pricing_calls = {}\n",
        figure.name(),
        opts.certified,
        opts.time_budget_s,
        opts.max_pricing_calls.map_or("none".to_string(), |m| m.to_string())
    );
    let file = BufWriter::new(File::create(&path)?);
    let seed = opts.seed;
    match figure {
        Figure::Fig3Left => output::write_csv(file, seed, &echo, &fig3_left(trials, seed)?)?,
        Figure::Fig3Center => output::write_csv(file, seed, &echo, &fig3_center(trials, seed)?)?,
        Figure::Fig3Right => output::write_csv(file, seed, &echo, &fig3_right(trials, seed)?)?,
        Figure::Fig4Ratios => output::write_csv(file, seed, &echo, &fig4_ratios(trials, seed, opts.time_budget_s)?)?,
        Figure::Fig5Cdf => output::write_csv(
            file,
            seed,
            &echo,
            &fig5_cdf(
                trials,
                seed,
                opts.certified,
                &BnpOptions {
                    time_budget: Duration::from_secs_f64(opts.time_budget_s),
                    max_pricing_calls: opts.max_pricing_calls,
                },
            )?,
        )?,
    }
    Ok(path)
}
