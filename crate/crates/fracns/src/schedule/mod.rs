//! Frequency/amplitude schedule of the iteration, parameter admissibility,
//! energy profiles and their normalization.
//!
//! Values are reported in the unit-period convention (torus of side 1, times
//! in the same units). The computational torus has side 2π, so lengths and
//! times are multiplied by 2π on the grid and the viscosity by (2π)^{2γ−1};
//! see [`Units`].

use crate::error::ScheduleError;
use crate::ledger::{Ledger, LedgerLine};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

mod seed;
pub use seed::*;

pub const TWO_PI: f64 = 2.0 * PI;

/// Conversion between the unit-period convention and the 2π-periodic grid.
pub struct Units;

impl Units {
    pub fn length_to_grid(x: f64) -> f64 {
        TWO_PI * x
    }

    pub fn time_to_grid(t: f64) -> f64 {
        TWO_PI * t
    }

    pub fn time_from_grid(t: f64) -> f64 {
        t / TWO_PI
    }

    pub fn nu_to_grid(nu: f64, gamma: f64) -> f64 {
        nu * TWO_PI.powf(2.0 * gamma - 1.0)
    }

    /// Hölder seminorm of order s of a quantity with length dimension d,
    /// converted from grid units to unit-period units.
    pub fn seminorm_from_grid(value: f64, s: f64, d: f64) -> f64 {
        value * TWO_PI.powf(s - d)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationParams {
    pub a: f64,
    pub b: f64,
    pub beta: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub nu: f64,
    /// Geometric constant of the perturbation estimates, once computed.
    #[serde(default)]
    pub m_const: Option<f64>,
}

impl Default for IterationParams {
    /// a = 4, b = 5/4, β = 1/4, α = 0.01, γ = 0.2 and ν = δ₁^{1/2}.
    fn default() -> Self {
        let mut p = IterationParams { a: 4.0, b: 1.25, beta: 0.25, alpha: 0.01, gamma: 0.2, nu: 1.0, m_const: None };
        p.nu = p.rescaling_mu().unwrap_or(1.0);
        p
    }
}

impl IterationParams {
    pub fn validate(&self) -> Result<(), ScheduleError> {
        let bad = |s: String| Err(ScheduleError::Param(s));
        if !(self.a > 1.0) {
            return bad(format!("a = {} must exceed 1", self.a));
        }
        if !(self.b > 1.0) {
            return bad(format!("b = {} must exceed 1", self.b));
        }
        if !(self.beta > 0.0 && self.beta < 1.0 / 3.0) {
            return bad(format!("beta = {} must lie in (0, 1/3)", self.beta));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} must lie in (0, 1)", self.alpha));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0 / 3.0) {
            return bad(format!("gamma = {} must lie in (0, 1/3)", self.gamma));
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return bad(format!("nu = {} must lie in (0, 1]", self.nu));
        }
        Ok(())
    }

    /// μ = δ₁^{1/2}, the time-rescaling factor of the normalized problem.
    pub fn rescaling_mu(&self) -> Result<f64, ScheduleError> {
        Ok(delta(self, 1)?.sqrt())
    }

    /// Viscosity on the 2π-periodic grid.
    pub fn nu_grid(&self) -> f64 {
        Units::nu_to_grid(self.nu, self.gamma)
    }

    /// True when γ < β, the regime of Leray-Hopf solutions.
    pub fn gamma_below_beta(&self) -> bool {
        self.gamma < self.beta
    }
}

/// Largest q for which a^{b^q} stays an exactly representable integer.
pub fn max_feasible_level(a: f64, b: f64) -> u32 {
    let limit = 2f64.powi(53);
    let mut q = 0u32;
    while a.powf(b.powi(q as i32 + 1)) < limit && q < 1000 {
        q += 1;
    }
    q
}

/// Integer frequency ⌈a^{b^q}⌉ (the oscillation count per period on the grid).
pub fn frequency_count(params: &IterationParams, q: u32) -> Result<u64, ScheduleError> {
    let x = params.a.powf(params.b.powi(q as i32));
    if !x.is_finite() || x >= 2f64.powi(53) {
        return Err(ScheduleError::Overflow { q, max_q: max_feasible_level(params.a, params.b) });
    }
    Ok((x - 1e-12 * x).ceil().max(1.0) as u64)
}

pub fn lambda(params: &IterationParams, q: u32) -> Result<f64, ScheduleError> {
    Ok(TWO_PI * frequency_count(params, q)? as f64)
}

pub fn delta(params: &IterationParams, q: u32) -> Result<f64, ScheduleError> {
    Ok(lambda(params, q)?.powf(-2.0 * params.beta))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelValues {
    pub q: u32,
    pub lambda_q: f64,
    pub delta_q: f64,
    pub ell: f64,
    pub tau_q: f64,
    /// ⌈a^{b^q}⌉ and ⌈a^{b^{q+1}}⌉: integer frequencies on the 2π grid.
    pub freq_q: u64,
    pub freq_next: u64,
    pub lambda_next: f64,
    pub delta_next: f64,
    pub delta_next2: f64,
    pub ell_grid: f64,
    pub tau_grid: f64,
    pub ledger: Ledger,
}

pub fn level_values(params: &IterationParams, q: u32) -> Result<LevelValues, ScheduleError> {
    params.validate()?;
    let lq = lambda(params, q)?;
    let l1 = lambda(params, q + 1)?;
    let dq = delta(params, q)?;
    let d1 = delta(params, q + 1)?;
    let d2 = delta(params, q + 2)?;
    let al = params.alpha;
    let ell = d1.sqrt() / (dq.sqrt() * lq.powf(1.0 + 1.5 * al));
    let tau = ell.powf(2.0 * al) / (dq.sqrt() * lq);
    let ratio = lq / params.a.powf(params.b.powi(q as i32));
    let mut ledger = Ledger::default();
    ledger.push(LedgerLine::ge("freq_integer_ratio.lower", ratio, TWO_PI));
    ledger.push(LedgerLine::le("freq_integer_ratio.upper", ratio, 2.0 * TWO_PI));
    let amp = (dq / d1).powf(1.5);
    ledger.push(LedgerLine::le("amplitude_ratio.lower", lq.powf(3.0 * al), amp));
    ledger.push(LedgerLine::le("amplitude_ratio.upper", amp, l1 / lq));
    ledger.push(LedgerLine::le("ell_window.lower", lq.powf(-1.5), ell));
    ledger.push(LedgerLine::le("ell_window.upper", ell, 1.0 / lq));
    ledger.push(LedgerLine::ge("amplitude_frequency_product", d1 * dq.sqrt() * lq, 1.0));
    Ok(LevelValues {
        q,
        lambda_q: lq,
        delta_q: dq,
        ell,
        tau_q: tau,
        freq_q: frequency_count(params, q)?,
        freq_next: frequency_count(params, q + 1)?,
        lambda_next: l1,
        delta_next: d1,
        delta_next2: d2,
        ell_grid: Units::length_to_grid(ell),
        tau_grid: Units::time_to_grid(tau),
        ledger,
    })
}

/// Strict check of 1 < b < min{(1−β)/(2β), 4/3}; the margin is the distance to the nearest bound.
pub fn check_b_beta(params: &IterationParams) -> (bool, f64) {
    let upper = ((1.0 - params.beta) / (2.0 * params.beta)).min(4.0 / 3.0);
    let ok = params.b > 1.0 && params.b < upper;
    let margin = (params.b - 1.0).min(upper - params.b);
    (ok, margin)
}

/// Energy profile sampled on a uniform time grid, interpolated by a natural cubic spline.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EnergyProfile {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<f64>,
    /// Declared bound on |e'|.
    pub k_bound: f64,
    #[serde(skip)]
    second: Vec<f64>,
}

impl PartialEq for EnergyProfile {
    fn eq(&self, other: &Self) -> bool {
        self.t0 == other.t0 && self.dt == other.dt && self.samples == other.samples && self.k_bound == other.k_bound
    }
}

impl EnergyProfile {
    pub fn new(t0: f64, dt: f64, samples: Vec<f64>, k_bound: f64) -> Result<Self, ScheduleError> {
        if samples.len() < 2 || !(dt > 0.0) {
            return Err(ScheduleError::Param("profile needs at least two samples and dt > 0".into()));
        }
        let second = natural_spline_second_derivatives(dt, &samples);
        Ok(EnergyProfile { t0, dt, samples, k_bound, second })
    }

    /// Sample a closed-form profile on [t0, t1] with m intervals.
    pub fn from_fn<F: Fn(f64) -> f64>(t0: f64, t1: f64, m: usize, k_bound: f64, f: F) -> Result<Self, ScheduleError> {
        let dt = (t1 - t0) / m as f64;
        let samples = (0..=m).map(|j| f(t0 + j as f64 * dt)).collect();
        EnergyProfile::new(t0, dt, samples, k_bound)
    }

    pub fn constant(t0: f64, t1: f64, value: f64) -> Self {
        EnergyProfile::new(t0, t1 - t0, vec![value, value], 0.0).expect("two samples")
    }

    pub fn t1(&self) -> f64 {
        self.t0 + self.dt * (self.samples.len() - 1) as f64
    }

    fn ensure_spline(&self) -> std::borrow::Cow<'_, [f64]> {
        if self.second.len() == self.samples.len() {
            std::borrow::Cow::Borrowed(&self.second)
        } else {
            std::borrow::Cow::Owned(natural_spline_second_derivatives(self.dt, &self.samples))
        }
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let m = self.samples.len() - 1;
        let s = ((t - self.t0) / self.dt).clamp(0.0, m as f64);
        let j = (s.floor() as usize).min(m - 1);
        (j, s - j as f64)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let m2 = self.ensure_spline();
        let (j, u) = self.locate(t);
        let (y0, y1) = (self.samples[j], self.samples[j + 1]);
        let h2 = self.dt * self.dt;
        let a = 1.0 - u;
        a * y0 + u * y1 + ((a * a * a - a) * m2[j] + (u * u * u - u) * m2[j + 1]) * h2 / 6.0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let m2 = self.ensure_spline();
        let (j, u) = self.locate(t);
        let (y0, y1) = (self.samples[j], self.samples[j + 1]);
        let a = 1.0 - u;
        (y1 - y0) / self.dt + self.dt * (-(3.0 * a * a - 1.0) * m2[j] + (3.0 * u * u - 1.0) * m2[j + 1]) / 6.0
    }

    /// Extremes of e and e' on the interpolant, scanned at `per_interval` points per sample interval.
    pub fn extremes(&self, per_interval: usize) -> ProfileExtremes {
        let m = self.samples.len() - 1;
        let total = m * per_interval.max(1);
        let mut ex = ProfileExtremes {
            inf: f64::INFINITY,
            sup: f64::NEG_INFINITY,
            sup_derivative: f64::NEG_INFINITY,
            sup_abs_derivative: 0.0,
        };
        for s in 0..=total {
            let t = self.t0 + (self.t1() - self.t0) * s as f64 / total as f64;
            let e = self.eval(t);
            let d = self.derivative(t);
            ex.inf = ex.inf.min(e);
            ex.sup = ex.sup.max(e);
            ex.sup_derivative = ex.sup_derivative.max(d);
            ex.sup_abs_derivative = ex.sup_abs_derivative.max(d.abs());
        }
        ex
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ProfileExtremes {
    pub inf: f64,
    pub sup: f64,
    pub sup_derivative: f64,
    pub sup_abs_derivative: f64,
}

fn natural_spline_second_derivatives(h: f64, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // tridiagonal system for interior second derivatives (Thomas algorithm)
    let k = n - 2;
    let mut c = vec![0.0; k];
    let mut d = vec![0.0; k];
    for i in 0..k {
        let rhs = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]) / (h * h);
        let denom = if i == 0 { 4.0 } else { 4.0 - c[i - 1] };
        c[i] = 1.0 / denom;
        d[i] = if i == 0 { rhs / denom } else { (rhs - d[i - 1]) / denom };
    }
    for i in (0..k).rev() {
        m[i + 1] = if i == k - 1 { d[i] } else { d[i] - c[i] * m[i + 2] };
    }
    m
}

#[derive(Clone, Debug)]
pub struct NormalizedProfile {
    pub profile: EnergyProfile,
    pub mu: f64,
    /// Viscosity of the rescaled system.
    pub nu: f64,
    pub ledger: Ledger,
}

/// ẽ(t) = μ² e(μt) with μ = δ₁^{1/2}, applied exactly to the samples.
/// The input must satisfy 1/2 ≤ e ≤ 1 and sup|e'| ≤ K.
pub fn normalize_profile(e: &EnergyProfile, params: &IterationParams) -> Result<NormalizedProfile, ScheduleError> {
    let ex = e.extremes(16);
    let tol = 1e-12;
    if ex.inf < 0.5 - tol {
        return Err(ScheduleError::Profile { bound: "inf e >= 1/2", detail: format!("inf e = {}", ex.inf) });
    }
    if ex.sup > 1.0 + tol {
        return Err(ScheduleError::Profile { bound: "sup e <= 1", detail: format!("sup e = {}", ex.sup) });
    }
    if ex.sup_abs_derivative > e.k_bound * (1.0 + 1e-9) + tol {
        return Err(ScheduleError::Profile {
            bound: "sup |e'| <= K",
            detail: format!("sup |e'| = {} > K = {}", ex.sup_abs_derivative, e.k_bound),
        });
    }
    let d1 = delta(params, 1)?;
    let mu = d1.sqrt();
    let profile = EnergyProfile::new(
        e.t0 / mu,
        e.dt / mu,
        e.samples.iter().map(|v| mu * mu * v).collect(),
        mu * mu * mu * e.k_bound,
    )?;
    let nx = profile.extremes(16);
    let mut ledger = Ledger::default();
    ledger.push(LedgerLine::ge("normalized_energy.inf", nx.inf, d1 / 2.0 - tol));
    ledger.push(LedgerLine::le("normalized_energy.sup", nx.sup, d1 + tol));
    ledger.push(LedgerLine::le("normalized_energy.derivative", nx.sup_derivative, d1.powf(1.5) * e.k_bound + tol));
    ledger.push(LedgerLine::le("energy_time_derivative", nx.sup_abs_derivative, 1.0));
    Ok(NormalizedProfile { profile, mu, nu: mu, ledger })
}

/// Inverse of [`normalize_profile`]: e(t) = μ⁻² ẽ(t/μ).
pub fn denormalize_profile(e: &EnergyProfile, mu: f64) -> Result<EnergyProfile, ScheduleError> {
    EnergyProfile::new(
        e.t0 * mu,
        e.dt * mu,
        e.samples.iter().map(|v| v / (mu * mu)).collect(),
        e.k_bound / (mu * mu * mu),
    )
}

/// Profile expressed on the grid time axis (t_grid = 2π t).
pub fn profile_to_grid_time(e: &EnergyProfile) -> EnergyProfile {
    EnergyProfile::new(Units::time_to_grid(e.t0), Units::time_to_grid(e.dt), e.samples.clone(), e.k_bound / TWO_PI)
        .expect("valid profile")
}

#[derive(Clone, Debug, Serialize)]
pub struct DissipationGate {
    pub k: f64,
    pub c: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// The admissibility condition K − 1 > C K^{8/9}.
pub fn dissipation_gate(k: f64, c: f64) -> DissipationGate {
    let lhs = k - 1.0;
    let rhs = c * k.powf(8.0 / 9.0);
    DissipationGate { k, c, lhs, rhs, pass: lhs > rhs }
}

/// Smallest C with observed(K) ≤ C K^{8/9} over all observations.
pub fn fit_gate_constant(observations: &[(f64, f64)]) -> f64 {
    observations
        .iter()
        .filter(|(k, _)| *k > 0.0)
        .map(|(k, d)| d / k.powf(8.0 / 9.0))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_preset_level_zero() {
        let p = IterationParams::default();
        let lv = level_values(&p, 0).unwrap();
        assert!((lv.lambda_q - 8.0 * PI).abs() < 1e-12);
        assert!((lv.delta_q - (8.0 * PI).powf(-0.5)).abs() < 1e-14);
        assert_eq!(lv.freq_next, 6);
        assert!(lv.ledger.get("freq_integer_ratio.lower").unwrap().pass);
    }

    #[test]
    fn b_beta_examples() {
        let mut p = IterationParams::default();
        assert!(check_b_beta(&p).0);
        p.b = 4.0 / 3.0;
        assert!(!check_b_beta(&p).0);
        p.beta = 0.3;
        p.b = 1.2;
        assert!(!check_b_beta(&p).0);
    }

    #[test]
    fn overflow_reports_max_level() {
        let p = IterationParams { a: 1e6, b: 1.3, ..IterationParams::default() };
        match level_values(&p, 40) {
            Err(ScheduleError::Overflow { max_q, .. }) => assert!(max_q < 40),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn spline_reproduces_cubic_interior_and_linear_exactly() {
        let e = EnergyProfile::from_fn(0.0, 1.0, 10, 1.0, |t| 0.5 + 0.25 * t).unwrap();
        assert!((e.eval(0.37) - (0.5 + 0.25 * 0.37)).abs() < 1e-14);
        assert!((e.derivative(0.81) - 0.25).abs() < 1e-13);
    }

    #[test]
    fn constant_profile_normalizes_to_delta_one() {
        let p = IterationParams::default();
        let e = EnergyProfile::constant(0.0, 1.0, 1.0);
        let n = normalize_profile(&e, &p).unwrap();
        let d1 = delta(&p, 1).unwrap();
        assert!((n.profile.eval(0.3) - d1).abs() < 1e-15);
        assert_eq!(n.profile.derivative(0.3), 0.0);
    }

    #[test]
    fn normalization_rejects_low_energy() {
        let p = IterationParams::default();
        let e = EnergyProfile::constant(0.0, 1.0, 0.4);
        assert!(matches!(normalize_profile(&e, &p), Err(ScheduleError::Profile { .. })));
    }
}
