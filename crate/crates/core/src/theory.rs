//! Analytic kinetics of random sequential adsorption of disks and the pilot
//! assignment probability built on it.
//!
//! Coverage is `θ = κρ` with `κ = πR²/4` the area of one disk of radius
//! `R/2`, where `R` is the inhibition radius.

use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Coverage fraction at the jamming limit.
pub const JAMMING_COVERAGE: f64 = 0.5474;

/// Area of the lens formed by two radius-`radius` disks with centers `r` apart.
pub fn circle_intersection_area<T: Scalar>(r: T, radius: T) -> Result<T> {
    if r < T::zero() || r.is_nan() {
        return Err(Error::Domain(format!("center distance must be >= 0, got {r}")));
    }
    let two_r = radius + radius;
    if r >= two_r {
        return Ok(T::zero());
    }
    let half = r / T::of(2.0);
    Ok(T::of(2.0) * radius * radius * (r / two_r).acos() - half * (two_r * two_r - r * r).sqrt())
}

/// Adaptive Simpson quadrature.
pub(crate) fn integrate<T: Scalar>(f: &impl Fn(T) -> T, a: T, b: T, tol: T) -> T {
    fn step<T: Scalar>(f: &impl Fn(T) -> T, a: T, b: T, fa: T, fm: T, fb: T, whole: T, tol: T, depth: u32) -> T {
        let two = T::of(2.0);
        let m = (a + b) / two;
        let (lm, rm) = ((a + m) / two, (m + b) / two);
        let (flm, frm) = (f(lm), f(rm));
        let six = T::of(6.0);
        let left = (m - a) / six * (fa + T::of(4.0) * flm + fm);
        let right = (b - m) / six * (fm + T::of(4.0) * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= T::of(15.0) * tol {
            return left + right + delta / T::of(15.0);
        }
        step(f, a, m, fa, flm, fm, left, tol / two, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / two, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let fm = f((a + b) / T::of(2.0));
    let whole = (b - a) / T::of(6.0) * (fa + T::of(4.0) * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Coefficients of the third-order low-coverage expansion
/// `Φ(θ) ≈ 1 + c1 θ + c2 θ² + c3 θ³`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesCoefficients<T> {
    pub c1: T,
    pub c2: T,
    pub c3: T,
}

/// Expansion coefficients from the lens-area integrals (unit inhibition
/// radius; the expansion in `θ` is scale free).
pub fn series_coefficients<T: Scalar>() -> SeriesCoefficients<T> {
    let one = T::one();
    let two = T::of(2.0);
    let pi = T::PI();
    let lens = |r: T| circle_intersection_area(r, one).unwrap_or(T::zero());
    let tol = T::epsilon().sqrt() * T::of(1e-4);
    let pair = integrate(&|r: T| two * pi * r * lens(r), one, two, tol);
    let triple = integrate(&|r: T| two * pi * r * lens(r) * lens(r), one, two, tol);
    let kappa = pi / T::of(4.0);
    let ring = pi / T::of(8.0) * (T::of(3.0).sqrt() * pi - T::of(14.0) / T::of(3.0));
    SeriesCoefficients {
        c1: -T::of(4.0),
        c2: pair / (two * kappa * kappa),
        c3: (triple / T::of(3.0) - ring) / (kappa * kappa * kappa),
    }
}

impl<T: Scalar> SeriesCoefficients<T> {
    pub fn evaluate(&self, theta: T) -> T {
        T::one() + theta * (self.c1 + theta * (self.c2 + theta * self.c3))
    }
}

/// Shape of the fitted available-area function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitForm {
    /// `(1 + b1 x + b2 x² + b3 x³)(1 − x)³`.
    #[default]
    CubedBinomial,
    /// `(1 + b1 x + b2 x² + b3 x³)(1 − x³)`, kept for comparison only.
    PrintedCubic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitCoefficients<T> {
    pub b1: T,
    pub b2: T,
    pub b3: T,
    pub form: FitForm,
    pub theta_inf: T,
}

/// Coefficients making the fit's Taylor expansion in `θ` agree with the
/// series through third order.
pub fn fit_coefficients<T: Scalar>() -> FitCoefficients<T> {
    fit_coefficients_for(FitForm::CubedBinomial)
}

pub fn fit_coefficients_for<T: Scalar>(form: FitForm) -> FitCoefficients<T> {
    let s = series_coefficients::<T>();
    let ti = T::of(JAMMING_COVERAGE);
    // Series coefficients rescaled to x = θ/θ∞.
    let (a1, a2, a3) = (s.c1 * ti, s.c2 * ti * ti, s.c3 * ti * ti * ti);
    let three = T::of(3.0);
    let (b1, b2, b3) = match form {
        FitForm::CubedBinomial => {
            // (1 − x)³ = 1 − 3x + 3x² − x³
            let b1 = a1 + three;
            let b2 = a2 + three * b1 - three;
            let b3 = a3 + three * b2 - three * b1 + T::one();
            (b1, b2, b3)
        }
        FitForm::PrintedCubic => (a1, a2, a3 + T::one()),
    };
    FitCoefficients {
        b1,
        b2,
        b3,
        form,
        theta_inf: ti,
    }
}

impl<T: Scalar> FitCoefficients<T> {
    /// Fitted available-area fraction; zero at and beyond jamming.
    #[inline]
    pub fn evaluate(&self, theta: T) -> T {
        let x = theta / self.theta_inf;
        if x >= T::one() {
            return T::zero();
        }
        let x = x.max(T::zero());
        let poly = T::one() + x * (self.b1 + x * (self.b2 + x * self.b3));
        let tail = match self.form {
            FitForm::CubedBinomial => {
                let y = T::one() - x;
                y * y * y
            }
            FitForm::PrintedCubic => T::one() - x * x * x,
        };
        poly * tail
    }
}

/// Fitted available-area fraction at coverage `theta`. Coverage above the
/// jamming limit returns 0 with a warning.
pub fn available_area_fraction<T: Scalar>(theta: T) -> Result<T> {
    if theta < T::zero() || theta.is_nan() {
        return Err(Error::Domain(format!("coverage must be >= 0, got {theta}")));
    }
    let fit = fit_coefficients::<T>();
    if theta > fit.theta_inf {
        warn!("coverage {theta} exceeds the jamming limit; available area clamped to 0");
    }
    Ok(fit.evaluate(theta))
}

/// Time scaling of the kinetics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// `dρ/dt = λ Φ(κρ)`: every early arrival is retained, `ρ ≈ λt`.
    #[default]
    Retention,
    /// `dρ/dt = (λ/κ) Φ(κρ)`, kept for comparison only.
    Printed,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KineticsOptions {
    pub normalization: Normalization,
    pub form: FitForm,
}

/// Coverage after dimensionless time `tau` of `dθ/dτ = Φ(θ)` from `θ(0) = theta0`.
fn advance<T: Scalar>(fit: &FitCoefficients<T>, theta0: T, tau: T) -> T {
    // Dormand-Prince 5(4) on a scalar autonomous equation.
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let rtol = T::of(1e-8).max(T::epsilon() * T::of(16.0));
    let atol = rtol * T::of(1e-6);
    let stop = T::of(1e-10);
    let f = |y: T| fit.evaluate(y);

    let mut y = theta0;
    let mut t = T::zero();
    let mut h = (tau * T::of(1e-3)).min(T::of(1e-3)).max(T::epsilon());
    let mut k = [T::zero(); 7];
    k[0] = f(y);
    while t < tau {
        if k[0] < stop {
            break;
        }
        h = h.min(tau - t);
        for s in 1..7 {
            let mut acc = T::zero();
            for (j, kj) in k.iter().enumerate().take(s) {
                acc += T::of(A[s - 1][j]) * *kj;
            }
            k[s] = f(y + h * acc);
        }
        // Stage 7 is the FSAL evaluation at the 5th-order solution.
        let y5 = y + h * (0..6).map(|j| T::of(A[5][j]) * k[j]).sum::<T>();
        let err = h * (0..7).map(|j| T::of(E[j]) * k[j]).sum::<T>();
        let scale = atol + rtol * y.abs().max(y5.abs());
        let ratio = (err / scale).abs();
        if ratio <= T::one() {
            t += h;
            y = y5.min(fit.theta_inf);
            k[0] = k[6];
        }
        let factor = if ratio > T::zero() {
            (T::of(0.9) * ratio.powf(T::of(-0.2))).max(T::of(0.2)).min(T::of(5.0))
        } else {
            T::of(5.0)
        };
        h *= factor;
        if h < T::epsilon() * (T::one() + t) {
            h = T::epsilon() * (T::one() + t);
        }
    }
    y
}

/// Dimensionless kinetics time for intensity `intensity` after time `t`.
fn kinetic_time<T: Scalar>(intensity: T, kappa: T, t: T, normalization: Normalization) -> T {
    match normalization {
        Normalization::Retention => kappa * intensity * t,
        Normalization::Printed => intensity * t,
    }
}

/// Tabulated RSA density curve `ρ(t)` for arrivals of intensity `intensity`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityModel<T> {
    pub inhibition_radius: T,
    pub kappa: T,
    pub theta_inf: T,
    pub fit: FitCoefficients<T>,
    pub intensity: T,
    pub options: KineticsOptions,
    /// `(t, ρ(t))` samples starting at `(0, 0)`.
    pub curve: Vec<(T, T)>,
}

impl<T: Scalar> DensityModel<T> {
    /// Retained density at time `t`, integrated directly rather than read off
    /// the table.
    pub fn density_at(&self, t: T) -> T {
        let tau = kinetic_time(self.intensity, self.kappa, t, self.options.normalization);
        advance(&self.fit, T::zero(), tau) / self.kappa
    }

    pub fn coverage_at(&self, t: T) -> T {
        self.density_at(t) * self.kappa
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# intensity={}", self.intensity)?;
        writeln!(out, "# R_inh={}", self.inhibition_radius)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "rho"])?;
        for (t, rho) in &self.curve {
            w.write_record([t.to_string(), rho.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrates the kinetics from `ρ(0) = 0`, tabulating every `step` up to `t_max`.
pub fn density_curve<T: Scalar>(intensity: T, radius: T, t_max: T, step: T) -> Result<DensityModel<T>> {
    density_curve_with(intensity, radius, t_max, step, KineticsOptions::default())
}

pub fn density_curve_with<T: Scalar>(
    intensity: T,
    radius: T,
    t_max: T,
    step: T,
    options: KineticsOptions,
) -> Result<DensityModel<T>> {
    if !(intensity >= T::zero()) || !intensity.is_finite() {
        return Err(Error::param("intensity", format!("must be finite and >= 0, got {intensity}")));
    }
    if !(radius > T::zero()) || !radius.is_finite() {
        return Err(Error::param("inhibition_radius", format!("must be finite and > 0, got {radius}")));
    }
    if !(step > T::zero()) {
        return Err(Error::param("step", format!("must be > 0, got {step}")));
    }
    if !(t_max >= T::zero()) || !t_max.is_finite() {
        return Err(Error::param("t_max", format!("must be finite and >= 0, got {t_max}")));
    }
    let kappa = T::PI() * radius * radius / T::of(4.0);
    let fit = fit_coefficients_for::<T>(options.form);
    let mut curve = vec![(T::zero(), T::zero())];
    let mut theta = T::zero();
    let mut t = T::zero();
    while t < t_max {
        let next = (t + step).min(t_max);
        let dtau = kinetic_time(intensity, kappa, next - t, options.normalization);
        theta = advance(&fit, theta, dtau);
        t = next;
        curve.push((t, theta / kappa));
    }
    Ok(DensityModel {
        inhibition_radius: radius,
        kappa,
        theta_inf: fit.theta_inf,
        fit,
        intensity,
        options,
        curve,
    })
}

/// Retained density after unit time for arrivals of intensity `intensity`.
pub fn retained_density<T: Scalar>(intensity: T, radius: T) -> Result<T> {
    let kappa = T::PI() * radius * radius / T::of(4.0);
    if !(radius > T::zero()) {
        return Err(Error::param("inhibition_radius", format!("must be > 0, got {radius}")));
    }
    if !(intensity >= T::zero()) {
        return Err(Error::param("intensity", format!("must be >= 0, got {intensity}")));
    }
    Ok(advance(&fit_coefficients::<T>(), T::zero(), kappa * intensity) / kappa)
}

/// Per-pilot densities of the pilot-by-pilot packing under the
/// Poisson-remainder approximation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequentialDensities<T> {
    /// Density packed onto each pilot, in pass order.
    pub per_pass: Vec<T>,
    /// Mean co-pilot density, the average of `per_pass`.
    pub per_pilot: T,
    /// Total assigned density, `P` times `per_pilot`.
    pub assigned: T,
}

pub fn sequential_densities<T: Scalar>(user_density: T, radius: T, pilots: usize) -> Result<SequentialDensities<T>> {
    if pilots == 0 {
        return Err(Error::param("pilots", "must be >= 1"));
    }
    let mut remaining = user_density;
    let mut per_pass = Vec::with_capacity(pilots);
    for _ in 0..pilots {
        let d = if remaining > T::zero() {
            retained_density(remaining, radius)?.min(remaining)
        } else {
            T::zero()
        };
        per_pass.push(d);
        remaining = (remaining - d).max(T::zero());
    }
    let assigned: T = per_pass.iter().copied().sum();
    Ok(SequentialDensities {
        per_pilot: assigned / T::of_usize(pilots),
        assigned,
        per_pass,
    })
}

/// `ln n!` by direct summation.
fn ln_factorial<T: Scalar>(n: usize) -> T {
    (2..=n).map(|k| T::of_usize(k).ln()).sum()
}

/// `P[N ≤ p]` for `N ~ Poisson(mean)`.
pub fn poisson_cdf<T: Scalar>(mean: T, p: usize) -> T {
    if mean <= T::zero() {
        return T::one();
    }
    let lm = mean.ln();
    let s: T = (0..=p)
        .map(|n| (T::of_usize(n) * lm - mean - ln_factorial::<T>(n)).exp())
        .sum();
    s.min(T::one())
}

/// `E[1/N | N > p]` for `N ~ Poisson(mean)`, summed exactly up to
/// `mean + 12√mean` (and at least 40 terms past `p`).
pub fn expected_inverse_count<T: Scalar>(mean: T, p: usize) -> Result<T> {
    if !(mean > T::zero()) || !mean.is_finite() {
        return Err(Error::param("mean", format!("must be finite and > 0, got {mean}")));
    }
    let m = mean.as_f64();
    let lo = p + 1;
    let hi = ((m + 12.0 * m.sqrt()).ceil() as usize).max(lo + 40);
    let mode = (m.floor() as usize).clamp(lo, hi);
    // Unnormalized weights relative to the mode; the normalization cancels.
    let mut num = T::zero();
    let mut den = T::zero();
    let mut w = T::one();
    for n in mode..=hi {
        if n > mode {
            w = w * mean / T::of_usize(n);
        }
        num += w / T::of_usize(n);
        den += w;
    }
    let mut w = T::one();
    for n in (lo..mode).rev() {
        w = w * T::of_usize(n + 1) / mean;
        if w < T::min_positive_value() {
            break;
        }
        num += w / T::of_usize(n);
        den += w;
    }
    Ok(num / den)
}

/// The conditional inverse moment in its printed closed form, which does not
/// equal the conditional expectation; kept for comparison only.
pub fn expected_inverse_count_printed<T: Scalar>(mean: T, p: usize) -> T {
    let head = poisson_cdf(mean, p);
    (mean - head) / (T::one() - head)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentProbabilityInputs<T> {
    pub user_density: T,
    pub inhibition_radius: T,
    pub pilots: usize,
    pub observation_radius: T,
}

/// Probability that the typical user gets a pilot:
/// `P[N ≤ P] + P[N > P] · (P λ_co π R_s²) · E[1/N | N > P]`, clamped to `[0, 1]`.
pub fn assignment_probability<T: Scalar>(inputs: &AssignmentProbabilityInputs<T>) -> Result<T> {
    let AssignmentProbabilityInputs {
        user_density,
        inhibition_radius,
        pilots,
        observation_radius,
    } = *inputs;
    if !(observation_radius > T::zero()) {
        return Err(Error::param("observation_radius", format!("must be > 0, got {observation_radius}")));
    }
    if observation_radius < T::of(3.0) * inhibition_radius {
        warn!("observation radius {observation_radius} is less than 3x the inhibition radius {inhibition_radius}");
    }
    let dens = sequential_densities(user_density, inhibition_radius, pilots)?;
    if user_density <= T::zero() {
        return Ok(T::one());
    }
    let area = T::PI() * observation_radius * observation_radius;
    let mean = user_density * area;
    let head = poisson_cdf(mean, pilots);
    let tail = T::one() - head;
    let inv = expected_inverse_count(mean, pilots)?;
    let prob = head + tail * dens.assigned * area * inv;
    Ok(prob.max(T::zero()).min(T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lens_area_cases() {
        assert_relative_eq!(circle_intersection_area(0.0, 3.0).unwrap(), std::f64::consts::PI * 9.0, max_relative = 1e-15);
        assert_eq!(circle_intersection_area(2.0, 1.0).unwrap(), 0.0);
        assert_eq!(circle_intersection_area(5.0, 1.0).unwrap(), 0.0);
        let expect = 2.0 * std::f64::consts::PI / 3.0 - 3f64.sqrt() / 2.0;
        assert_relative_eq!(circle_intersection_area(1.0, 1.0).unwrap(), expect, max_relative = 1e-14);
        assert!(circle_intersection_area(-1.0, 1.0).is_err());
    }

    #[test]
    fn lens_area_matches_grid_count() {
        // Midpoint-rule area of the intersection on a fine grid.
        let (r, d) = (1.0f64, 1.0f64);
        let n = 2000;
        let h = 2.0 / n as f64;
        let mut count = 0usize;
        for i in 0..n {
            for j in 0..n {
                let x = -1.0 + (i as f64 + 0.5) * h;
                let y = -1.0 + (j as f64 + 0.5) * h;
                if x * x + y * y <= r * r && (x - d).powi(2) + y * y <= r * r {
                    count += 1;
                }
            }
        }
        let grid = count as f64 * h * h;
        assert!((grid - circle_intersection_area(d, r).unwrap()).abs() < 2e-3);
    }

    #[test]
    fn series_coefficients_closed_forms() {
        let s = series_coefficients::<f64>();
        let pi = std::f64::consts::PI;
        assert_eq!(s.c1, -4.0);
        assert_relative_eq!(s.c2, 6.0 * 3f64.sqrt() / pi, max_relative = 1e-10);
        assert_relative_eq!(s.c3, 40.0 / (3f64.sqrt() * pi) - 176.0 / (3.0 * pi * pi), max_relative = 1e-9);
    }

    #[test]
    fn fit_endpoints_and_slope() {
        let fit = fit_coefficients::<f64>();
        assert_eq!(fit.evaluate(0.0), 1.0);
        assert_eq!(fit.evaluate(JAMMING_COVERAGE), 0.0);
        let h = 1e-6;
        let slope = (fit.evaluate(h) - fit.evaluate(0.0)) / h;
        assert!((slope + 4.0).abs() < 1e-4);
        assert_relative_eq!(fit.b1, 0.8104, max_relative = 1e-12);
    }

    #[test]
    fn fit_tracks_series_at_low_coverage() {
        let fit = fit_coefficients::<f64>();
        let s = series_coefficients::<f64>();
        for i in 0..=20 {
            let theta = 0.2 * i as f64 / 20.0;
            let (a, b) = (fit.evaluate(theta), s.evaluate(theta));
            assert!((a - b).abs() / b < 0.01, "theta={theta}: fit {a} series {b}");
        }
    }

    #[test]
    fn printed_cubic_form_matches_series_derivatives_too() {
        let fit = fit_coefficients_for::<f64>(FitForm::PrintedCubic);
        assert_eq!(fit.evaluate(0.0), 1.0);
        assert_eq!(fit.evaluate(JAMMING_COVERAGE), 0.0);
    }

    #[test]
    fn available_area_clamps_beyond_jamming() {
        assert_eq!(available_area_fraction(0.6).unwrap(), 0.0);
        assert_eq!(available_area_fraction(0.0).unwrap(), 1.0);
        assert!(available_area_fraction(-0.1).is_err());
    }

    #[test]
    fn zero_intensity_curve_is_flat() {
        let m = density_curve(0.0, 100.0, 2.0, 0.25).unwrap();
        assert!(m.curve.iter().all(|&(_, r)| r == 0.0));
    }

    #[test]
    fn bad_step_rejected() {
        assert!(density_curve(1e-4, 100.0, 1.0, 0.0).is_err());
        assert!(density_curve(-1e-4, 100.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn low_density_limit() {
        let r = 100.0;
        let kappa = std::f64::consts::PI * r * r / 4.0;
        let lambda = 1e-3 / kappa;
        let m = density_curve(lambda, r, 1.0, 1.0).unwrap();
        assert_relative_eq!(m.density_at(1.0), lambda, max_relative = 5e-3);
    }

    #[test]
    fn coverage_reference_points() {
        for (tau, theta) in [(0.1, 0.0832), (1.0, 0.3271), (10.0, 0.4825), (100.0, 0.5280), (1000.0, 0.5414)] {
            let got = advance(&fit_coefficients::<f64>(), 0.0, tau);
            assert!((got - theta).abs() < 1e-4, "tau={tau}: {got}");
        }
    }

    #[test]
    fn tabulated_curve_is_monotone_and_bounded() {
        let m = density_curve(1e-3, 200.0, 5.0, 0.1).unwrap();
        assert!(m.curve.windows(2).all(|w| w[1].1 >= w[0].1));
        assert!(m.curve.iter().all(|&(_, r)| r * m.kappa <= JAMMING_COVERAGE + 1e-12));
        let last = m.curve.last().unwrap();
        assert_relative_eq!(last.1, m.density_at(last.0), max_relative = 1e-7);
    }

    #[test]
    fn printed_normalization_differs() {
        let opts = KineticsOptions {
            normalization: Normalization::Printed,
            ..Default::default()
        };
        let a = density_curve_with(1e-4f64, 100.0, 1.0, 1.0, opts).unwrap();
        let b = density_curve(1e-4, 100.0, 1.0, 1.0).unwrap();
        assert!(a.density_at(1.0) < 0.01 * b.density_at(1.0));
    }

    #[test]
    fn single_pilot_sequential_is_retained_density() {
        let s = sequential_densities(1e-3, 200.0, 1).unwrap();
        assert_eq!(s.per_pilot, retained_density(1e-3, 200.0).unwrap());
    }

    #[test]
    fn sparse_users_split_evenly() {
        let s = sequential_densities(1e-9, 100.0, 4).unwrap();
        assert_relative_eq!(s.per_pilot, 1e-9 / 4.0, max_relative = 1e-4);
    }

    #[test]
    fn inverse_count_regression() {
        // Extended-precision reference for mean 1, conditioning on N > 0.
        let v = expected_inverse_count(1.0, 0).unwrap();
        assert_relative_eq!(v, 0.766_988_354_079_434_3, max_relative = 1e-14);
    }

    #[test]
    fn inverse_count_large_mean() {
        let v = expected_inverse_count(1e4f64, 3).unwrap();
        assert!((v * 1e4 - 1.0).abs() < 2e-3);
    }

    #[test]
    fn inverse_count_below_bound() {
        for p in [0usize, 1, 4, 16] {
            for mean in [0.1, 1.0, 7.0, 50.0] {
                assert!(expected_inverse_count(mean, p).unwrap() < 1.0 / (p as f64 + 1.0));
            }
        }
    }

    #[test]
    fn sparse_users_almost_surely_assigned() {
        let inputs = AssignmentProbabilityInputs {
            user_density: 0.1 * 4.0 / (std::f64::consts::PI * 600.0 * 600.0),
            inhibition_radius: 100.0,
            pilots: 4,
            observation_radius: 600.0,
        };
        assert!(assignment_probability(&inputs).unwrap() >= 0.99);
    }

    #[test]
    fn probability_monotone_in_pilots() {
        let mut prev = 0.0;
        for p in 1..=16 {
            let v = assignment_probability(&AssignmentProbabilityInputs {
                user_density: 1e-3,
                inhibition_radius: 200.0,
                pilots: p,
                observation_radius: 1500.0,
            })
            .unwrap();
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }
}
