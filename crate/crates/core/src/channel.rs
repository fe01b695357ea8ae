//! Large-scale channel model, MMSE estimation quality, power control and the
//! asymptotic (many-antenna) SINR.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::assignment::PilotAssignment;
use crate::error::{Error, Result};
use crate::geometry::{CircularWindow, Point, PointSet};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Urban-macro NLOS path-loss parameters. Heights and widths in meters,
/// carrier in GHz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathlossParams<T> {
    pub street_width: T,
    pub ap_height: T,
    pub user_height: T,
    pub building_height: T,
    pub carrier_ghz: T,
}

impl<T: Scalar> Default for PathlossParams<T> {
    fn default() -> Self {
        PathlossParams {
            street_width: T::of(20.0),
            ap_height: T::of(40.0),
            user_height: T::of(1.5),
            building_height: T::of(5.0),
            carrier_ghz: T::of(0.45),
        }
    }
}

impl<T: Scalar> PathlossParams<T> {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("street_width", self.street_width),
            ("ap_height", self.ap_height),
            ("user_height", self.user_height),
            ("building_height", self.building_height),
            ("carrier_ghz", self.carrier_ghz),
        ];
        for (name, v) in fields {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::param(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Distance-independent part of the loss, in dB.
    pub fn offset_db(&self) -> T {
        let c = T::of;
        let lg = |x: T| x.log10();
        let ratio = self.building_height / self.ap_height;
        let ue = lg(c(11.75) * self.user_height);
        c(161.04) - c(7.1) * lg(self.street_width) + c(7.5) * lg(self.building_height)
            - (c(24.37) - c(3.7) * ratio * ratio) * lg(self.ap_height)
            - c(3.0) * self.slope_db()
            + c(20.0) * lg(self.carrier_ghz)
            - (c(3.2) * ue * ue - c(4.97))
    }

    /// Loss increase per decade of distance, in dB.
    pub fn slope_db(&self) -> T {
        T::of(43.42) - T::of(3.1) * self.ap_height.log10()
    }
}

/// Path loss in dB at distance `d` meters. Distances below 1 m are evaluated
/// at 1 m.
pub fn pathloss_db<T: Scalar>(d: T, params: &PathlossParams<T>) -> Result<T> {
    if !(d > T::zero()) || d.is_nan() {
        return Err(Error::Domain(format!("path loss needs d > 0, got {d}")));
    }
    Ok(pathloss_db_unchecked(d, params))
}

#[inline]
pub(crate) fn pathloss_db_unchecked<T: Scalar>(d: T, params: &PathlossParams<T>) -> T {
    let d = d.max(T::one());
    params.offset_db() + params.slope_db() * d.log10()
}

/// Linear large-scale gain `10^(-l(d)/10)`.
pub fn large_scale_gain<T: Scalar>(d: T, params: &PathlossParams<T>) -> Result<T> {
    pathloss_db(d, params).map(db_to_gain)
}

#[inline]
pub fn db_to_gain<T: Scalar>(loss_db: T) -> T {
    T::of(10.0).powf(-loss_db / T::of(10.0))
}

/// Precomputed gain evaluator; avoids recomputing the constant terms for
/// every RRH-user pair.
#[derive(Clone, Copy, Debug)]
pub struct GainModel<T> {
    offset_db: T,
    slope_db: T,
}

impl<T: Scalar> GainModel<T> {
    pub fn new(params: &PathlossParams<T>) -> Self {
        GainModel {
            offset_db: params.offset_db(),
            slope_db: params.slope_db(),
        }
    }

    #[inline]
    pub fn gain_at(&self, d: T) -> T {
        let d = d.max(T::one());
        db_to_gain(self.offset_db + self.slope_db * d.log10())
    }

    #[inline]
    pub fn gain(&self, a: &Point<T>, b: &Point<T>) -> T {
        self.gain_at(a.distance(b))
    }
}

/// Estimation quality at every RRH for member `target` of a co-pilot set.
/// `betas` is RRHs × set members.
pub fn gamma_for_set<T: Scalar>(betas: &Matrix<T>, target: usize, pilot_energy: T) -> Result<Vec<T>> {
    if betas.cols() == 0 {
        return Err(Error::param("co-pilot set", "must not be empty"));
    }
    if target >= betas.cols() {
        return Err(Error::param("target", format!("index {target} outside set of {}", betas.cols())));
    }
    if !(pilot_energy > T::zero()) {
        return Err(Error::param("pilot_energy", format!("must be > 0, got {pilot_energy}")));
    }
    Ok((0..betas.rows())
        .map(|m| {
            let row = betas.row(m);
            let load: T = row.iter().map(|&b| pilot_energy * b).sum();
            pilot_energy * row[target] * row[target] / (T::one() + load)
        })
        .collect())
}

/// Per-RRH power fractions for a co-pilot set: each RRH splits `1/P` of its
/// budget across the set in proportion to estimation quality.
pub fn power_control<T: Scalar>(gammas: &Matrix<T>, pilots: usize) -> Result<Matrix<T>> {
    if pilots == 0 {
        return Err(Error::param("pilots", "must be >= 1"));
    }
    let p = T::of_usize(pilots);
    let mut eta = Matrix::zeros(gammas.rows(), gammas.cols());
    for m in 0..gammas.rows() {
        let row = gammas.row(m);
        let total: T = row.iter().copied().sum();
        if !(total > T::zero()) {
            return Err(Error::Numerical(format!("RRH {m} sees zero estimation quality")));
        }
        for (k, &g) in row.iter().enumerate() {
            eta[(m, k)] = g / (p * total);
        }
    }
    Ok(eta)
}

/// Asymptotic SINR of member `target`. Interference from member `k` is
/// `(Σ_m √(η_mk γ_m,target))²`. A singleton set yields `+∞`.
pub fn asymptotic_sinr<T: Scalar>(gamma: &Matrix<T>, eta: &Matrix<T>, target: usize) -> T {
    let n = gamma.cols();
    let mut signal = T::zero();
    let mut interference = vec![T::zero(); n];
    for m in 0..gamma.rows() {
        let g = gamma[(m, target)];
        for (k, acc) in interference.iter_mut().enumerate() {
            let term = (eta[(m, k)] * g).sqrt();
            if k == target {
                signal += term;
            } else {
                *acc += term;
            }
        }
    }
    let denom: T = interference
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != target)
        .map(|(_, &a)| a * a)
        .sum();
    if denom > T::zero() {
        signal * signal / denom
    } else {
        T::infinity()
    }
}

/// Channel quantities for one co-pilot group (RRHs × members).
#[derive(Clone, Debug)]
pub struct GroupChannel<T> {
    pub beta: Matrix<T>,
    pub gamma: Matrix<T>,
    pub eta: Matrix<T>,
}

impl<T: Scalar> GroupChannel<T> {
    pub fn new(rrhs: &[Point<T>], members: &[Point<T>], gains: &GainModel<T>, pilot_energy: T, pilots: usize) -> Result<Self> {
        let beta = Matrix::from_fn(rrhs.len(), members.len(), |m, k| gains.gain(&rrhs[m], &members[k]));
        Self::from_beta(beta, pilot_energy, pilots)
    }

    pub fn from_beta(beta: Matrix<T>, pilot_energy: T, pilots: usize) -> Result<Self> {
        if !(pilot_energy > T::zero()) {
            return Err(Error::param("pilot_energy", format!("must be > 0, got {pilot_energy}")));
        }
        let mut gamma = Matrix::zeros(beta.rows(), beta.cols());
        for m in 0..beta.rows() {
            let row = beta.row(m);
            let load: T = row.iter().map(|&b| pilot_energy * b).sum();
            for (k, &b) in row.iter().enumerate() {
                gamma[(m, k)] = pilot_energy * b * b / (T::one() + load);
            }
        }
        let eta = power_control(&gamma, pilots)?;
        Ok(GroupChannel { beta, gamma, eta })
    }

    pub fn sinr(&self, member: usize) -> T {
        asymptotic_sinr(&self.gamma, &self.eta, member)
    }
}

/// Full channel state of a realization under a pilot assignment. `gamma` and
/// `eta` are zero for unassigned users.
#[derive(Clone, Debug)]
pub struct ChannelState<T> {
    pub beta: Matrix<T>,
    pub gamma: Matrix<T>,
    pub eta: Matrix<T>,
    pub pilot_energy: T,
    sinr: Vec<T>,
}

impl<T: Scalar> ChannelState<T> {
    pub fn compute(
        rrhs: &[Point<T>],
        users: &[Point<T>],
        assignment: &PilotAssignment<T>,
        params: &PathlossParams<T>,
        pilot_energy: T,
    ) -> Result<Self> {
        if assignment.len() != users.len() {
            return Err(Error::Data(format!(
                "assignment covers {} users, realization has {}",
                assignment.len(),
                users.len()
            )));
        }
        let gains = GainModel::new(params);
        let beta = Matrix::from_fn(rrhs.len(), users.len(), |m, k| gains.gain(&rrhs[m], &users[k]));
        let mut gamma = Matrix::zeros(rrhs.len(), users.len());
        let mut eta = Matrix::zeros(rrhs.len(), users.len());
        let mut sinr = vec![T::zero(); users.len()];
        for group in assignment.groups() {
            if group.is_empty() {
                continue;
            }
            let sub = Matrix::from_fn(rrhs.len(), group.len(), |m, j| beta[(m, group[j])]);
            let ch = GroupChannel::from_beta(sub, pilot_energy, assignment.pilot_count())?;
            for (j, &k) in group.iter().enumerate() {
                for m in 0..rrhs.len() {
                    gamma[(m, k)] = ch.gamma[(m, j)];
                    eta[(m, k)] = ch.eta[(m, j)];
                }
                sinr[k] = ch.sinr(j);
            }
        }
        Ok(ChannelState {
            beta,
            gamma,
            eta,
            pilot_energy,
            sinr,
        })
    }

    /// Uncapped SINR per user; zero for unassigned users.
    pub fn sinr(&self) -> &[T] {
        &self.sinr
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rrh", "user", "beta", "gamma", "eta"])?;
        for m in 0..self.beta.rows() {
            for k in 0..self.beta.cols() {
                w.write_record([
                    m.to_string(),
                    k.to_string(),
                    self.beta[(m, k)].to_string(),
                    self.gamma[(m, k)].to_string(),
                    self.eta[(m, k)].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Spectral efficiency settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeConfig<T> {
    pub pathloss: PathlossParams<T>,
    /// Product of pilot length and linear pilot SNR.
    pub pilot_energy: T,
    /// Ceiling applied to SINR before taking the log, in dB.
    pub sinr_cap_db: T,
}

impl<T: Scalar> SeConfig<T> {
    /// Pilot length equal to the pilot count and the given pilot SNR in dB.
    pub fn for_pilots(pilots: usize, pilot_snr_db: T) -> Self {
        SeConfig {
            pathloss: PathlossParams::default(),
            pilot_energy: T::of_usize(pilots) * T::of(10.0).powf(pilot_snr_db / T::of(10.0)),
            sinr_cap_db: T::of(40.0),
        }
    }

    #[inline]
    pub fn capped_se(&self, sinr: T) -> T {
        let cap = T::of(10.0).powf(self.sinr_cap_db / T::of(10.0));
        (T::one() + sinr.min(cap)).log2()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SinrReport<T> {
    /// Uncapped SINR; `+∞` for a user alone on its pilot, 0 if unassigned.
    pub sinr: Vec<T>,
    pub se: Vec<T>,
    pub assigned: Vec<bool>,
    /// Users counted in `sum_se`.
    pub measured: Vec<usize>,
    pub sum_se: T,
}

/// Per-user SE and the sum over users inside `measure` (all users if `None`).
pub fn se_metrics<T: Scalar>(
    rrhs: &PointSet<T>,
    users: &PointSet<T>,
    assignment: &PilotAssignment<T>,
    config: &SeConfig<T>,
    measure: Option<&CircularWindow<T>>,
) -> Result<SinrReport<T>> {
    let state = ChannelState::compute(rrhs.points(), users.points(), assignment, &config.pathloss, config.pilot_energy)?;
    Ok(report_from_sinr(state.sinr().to_vec(), users, assignment, config, measure))
}

pub(crate) fn report_from_sinr<T: Scalar>(
    sinr: Vec<T>,
    users: &PointSet<T>,
    assignment: &PilotAssignment<T>,
    config: &SeConfig<T>,
    measure: Option<&CircularWindow<T>>,
) -> SinrReport<T> {
    let assigned: Vec<bool> = (0..users.len()).map(|k| assignment.is_assigned(k)).collect();
    let se: Vec<T> = sinr
        .iter()
        .zip(&assigned)
        .map(|(&s, &a)| if a { config.capped_se(s) } else { T::zero() })
        .collect();
    let measured: Vec<usize> = (0..users.len())
        .filter(|&k| measure.is_none_or(|w| w.contains(&users.point(k))))
        .collect();
    let sum_se = measured.iter().map(|&k| se[k]).sum();
    SinrReport {
        sinr,
        se,
        assigned,
        measured,
        sum_se,
    }
}

/// SINR of a single user given the assignment; only its co-pilot group is
/// evaluated. Returns `None` when the user is unassigned.
pub fn user_sinr<T: Scalar>(
    rrhs: &[Point<T>],
    users: &[Point<T>],
    assignment: &PilotAssignment<T>,
    user: usize,
    config: &SeConfig<T>,
) -> Result<Option<T>> {
    let Some(pilot) = assignment.pilot(user) else {
        return Ok(None);
    };
    let group: Vec<usize> = (0..users.len()).filter(|&k| assignment.pilot(k) == Some(pilot)).collect();
    let pos = group.iter().position(|&k| k == user).expect("user is in its own group");
    let members: Vec<Point<T>> = group.iter().map(|&k| users[k]).collect();
    let gains = GainModel::new(&config.pathloss);
    let ch = GroupChannel::new(rrhs, &members, &gains, config.pilot_energy, assignment.pilot_count())?;
    Ok(Some(ch.sinr(pos)))
}
