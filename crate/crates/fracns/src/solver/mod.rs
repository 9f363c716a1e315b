//! Smooth local-in-time solvers: the fractional Navier-Stokes integrator, the
//! nonlocal advection-diffusion integrator, backward flow maps and the
//! stability-estimate harness.
//!
//! Both integrators use the same scheme: the dissipative symbol ν|k|^{2γ} is
//! integrated exactly (integrating factor) and the remaining terms are advanced
//! by classical RK4 (Lawson's method).

mod advection;
mod flow;
mod fns;
pub mod harness;

pub use advection::{solve_advection_diffusion, AdvectionIntegrator, AdvectionSolution};
pub use flow::{det3, flow_map, trace_characteristic, FlowIntegrator, FlowMap, FlowQuality};
pub use fns::{solve_fns, wiener_gradient_norm, FnsIntegrator, FnsSolution};

use crate::error::SolverError;
use crate::spectral::{holder_norm, Grid, HolderOptions, PeriodicField, Space};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Rk4IntegratingFactor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Largest admissible step; each sample interval is split into equal substeps no larger.
    pub dt: f64,
    pub scheme: Scheme,
    pub horizon: f64,
    /// Apply the 2/3 truncation to the initial data and to every nonlinear product.
    pub dealias: bool,
    /// Advective Courant number: dt·max|v|/h must stay below it.
    pub cfl: f64,
    /// Constant c of the admissible horizon T ≤ c‖u₀‖_{1+α}^{-1}; `None` disables the guard.
    pub horizon_constant: Option<f64>,
    /// Hölder exponent α used by the horizon guard.
    pub alpha: f64,
    /// Abort when the gradient norm exceeds this multiple of its initial value.
    pub blowup_factor: f64,
    /// Spacing of the returned time series (defaults to dt when not positive).
    pub sample_interval: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-2,
            scheme: Scheme::Rk4IntegratingFactor,
            horizon: 1.0,
            dealias: true,
            cfl: 0.5,
            horizon_constant: Some(0.1),
            alpha: 0.01,
            blowup_factor: 10.0,
            sample_interval: 0.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SolverError::Config(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(SolverError::Config(format!("horizon = {} must be positive", self.horizon)));
        }
        if !(self.cfl > 0.0) {
            return Err(SolverError::Config(format!("cfl = {} must be positive", self.cfl)));
        }
        if !(self.blowup_factor > 1.0) {
            return Err(SolverError::Config(format!("blowup_factor = {} must exceed 1", self.blowup_factor)));
        }
        if let Some(c) = self.horizon_constant {
            if !(c > 0.0) {
                return Err(SolverError::Config(format!("horizon_constant = {c} must be positive")));
            }
        }
        Ok(())
    }

    pub fn output_spacing(&self) -> f64 {
        if self.sample_interval > 0.0 {
            self.sample_interval
        } else {
            self.dt
        }
    }

    /// Admissible horizon c‖u₀‖_{1+α}^{-1}, infinite for vanishing data or a disabled guard.
    pub fn admissible_horizon(&self, u0: &PeriodicField) -> Result<f64, SolverError> {
        let Some(c) = self.horizon_constant else {
            return Ok(f64::INFINITY);
        };
        let norm = holder_norm(u0, 1.0 + self.alpha, &HolderOptions::coarse())?;
        Ok(if norm > 0.0 { c / norm } else { f64::INFINITY })
    }

    pub fn check_horizon(&self, u0: &PeriodicField) -> Result<f64, SolverError> {
        let admissible = self.admissible_horizon(u0)?;
        if self.horizon > admissible {
            return Err(SolverError::Horizon { horizon: self.horizon, admissible });
        }
        Ok(admissible)
    }
}

/// Number of equal substeps of length at most `dt` covering `span`.
pub(crate) fn substeps(span: f64, dt: f64) -> usize {
    ((span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// Multiply every mode of a spectral field by a per-mode real factor.
pub(crate) fn scale_modes(f: &mut PeriodicField, factor: &[f64]) {
    debug_assert_eq!(f.space(), Space::Modes);
    for comp in f.comps_mut() {
        for (z, s) in comp.iter_mut().zip(factor) {
            *z *= *s;
        }
    }
}

/// Exact propagator e^{−h ν|k|^{2γ}} of the dissipative term, cached per step size.
pub(crate) struct IntegratingFactor {
    rate: Vec<f64>,
    h: f64,
    full: Vec<f64>,
    half: Vec<f64>,
}

impl IntegratingFactor {
    pub(crate) fn new(grid: Grid, nu: f64, gamma: f64) -> Self {
        let rate = (0..grid.len())
            .map(|idx| {
                let k = grid.wavevector(idx);
                let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
                if k2 == 0.0 {
                    0.0
                } else {
                    nu * k2.powf(gamma)
                }
            })
            .collect();
        IntegratingFactor { rate, h: f64::NAN, full: Vec::new(), half: Vec::new() }
    }

    fn prepare(&mut self, h: f64) {
        if self.h == h {
            return;
        }
        self.full = self.rate.iter().map(|r| (-r * h).exp()).collect();
        self.half = self.rate.iter().map(|r| (-r * h * 0.5).exp()).collect();
        self.h = h;
    }

    /// One Lawson RK4 step of u' = −Λu + N(t, u), with u and N in mode space.
    pub(crate) fn step<F>(&mut self, u: &PeriodicField, t: f64, h: f64, mut rhs: F) -> Result<PeriodicField, SolverError>
    where
        F: FnMut(f64, &PeriodicField) -> Result<PeriodicField, SolverError>,
    {
        self.prepare(h);
        let k1 = rhs(t, u)?;
        let mut u2 = u.axpy(0.5 * h, &k1)?;
        scale_modes(&mut u2, &self.half);
        let k2 = rhs(t + 0.5 * h, &u2)?;
        let mut eu_half = u.clone();
        scale_modes(&mut eu_half, &self.half);
        let u3 = eu_half.axpy(0.5 * h, &k2)?;
        let k3 = rhs(t + 0.5 * h, &u3)?;
        let mut ek3 = k3.clone();
        scale_modes(&mut ek3, &self.half);
        let mut u4 = eu_half.clone();
        scale_modes(&mut u4, &self.half);
        let u4 = u4.axpy(h, &ek3)?;
        let k4 = rhs(t + h, &u4)?;
        // u_{n+1} = E u + h/6 (E k1 + 2 E½ (k2 + k3) + k4)
        let mut acc = k2.add(&k3)?;
        scale_modes(&mut acc, &self.half);
        let mut head = u.axpy(h / 6.0, &k1)?;
        scale_modes(&mut head, &self.full);
        let out = head.axpy(h / 3.0, &acc)?.axpy(h / 6.0, &k4)?;
        Ok(out.with_real(u.is_real()))
    }
}

/// A field (velocity or forcing) available at arbitrary times within its window.
pub trait TimeField {
    fn at(&self, t: f64) -> Result<PeriodicField, SolverError>;
}

impl<F> TimeField for F
where
    F: Fn(f64) -> Result<PeriodicField, SolverError>,
{
    fn at(&self, t: f64) -> Result<PeriodicField, SolverError> {
        self(t)
    }
}

/// Time-independent field.
pub struct SteadyField(pub PeriodicField);

impl TimeField for SteadyField {
    fn at(&self, _t: f64) -> Result<PeriodicField, SolverError> {
        Ok(self.0.clone())
    }
}

/// Field sampled on a uniform time grid, interpolated by cubic Lagrange
/// polynomials through the four nearest samples (fewer near short series).
#[derive(Clone, Debug)]
pub struct SampledField {
    t0: f64,
    spacing: f64,
    samples: Vec<PeriodicField>,
}

impl SampledField {
    pub fn new(t0: f64, spacing: f64, samples: Vec<PeriodicField>) -> Result<Self, SolverError> {
        if samples.is_empty() || !(spacing > 0.0) {
            return Err(SolverError::Config("sampled velocity needs samples and a positive spacing".into()));
        }
        let samples = samples.into_iter().map(PeriodicField::into_modes).collect();
        Ok(SampledField { t0, spacing, samples })
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.spacing * (self.samples.len() - 1) as f64
    }

    pub fn samples(&self) -> &[PeriodicField] {
        &self.samples
    }

    /// Append the next sample and keep only the latest `keep` of them.
    pub fn push(&mut self, sample: PeriodicField, keep: usize) {
        self.samples.push(sample.into_modes());
        let excess = self.samples.len().saturating_sub(keep.max(1));
        if excess > 0 {
            self.samples.drain(..excess);
            self.t0 += excess as f64 * self.spacing;
        }
    }
}

/// Lagrange weights at position s (in sample units) over consecutive nodes starting at `first`.
pub(crate) fn lagrange_weights(s: f64, first: usize, count: usize) -> Vec<f64> {
    (0..count)
        .map(|a| {
            let xa = (first + a) as f64;
            (0..count)
                .filter(|&b| b != a)
                .map(|b| {
                    let xb = (first + b) as f64;
                    (s - xb) / (xa - xb)
                })
                .product()
        })
        .collect()
}

impl TimeField for SampledField {
    fn at(&self, t: f64) -> Result<PeriodicField, SolverError> {
        let (start, end) = (self.start(), self.end());
        let slack = 1e-9 * self.spacing;
        if t < start - slack || t > end + slack {
            return Err(SolverError::Window { t, start, end });
        }
        let m = self.samples.len();
        let s = ((t - self.t0) / self.spacing).clamp(0.0, (m - 1) as f64);
        let nearest = s.round();
        if (s - nearest).abs() < 1e-12 {
            return Ok(self.samples[nearest as usize].clone());
        }
        let count = m.min(4);
        let first = (s.floor() as isize - 1).clamp(0, (m - count) as isize) as usize;
        let w = lagrange_weights(s, first, count);
        let mut out = self.samples[first].scale(w[0]);
        for (a, wa) in w.iter().enumerate().skip(1) {
            out = out.axpy(*wa, &self.samples[first + a])?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Rank;

    #[test]
    fn substeps_cover_span() {
        assert_eq!(substeps(1.0, 0.25), 4);
        assert_eq!(substeps(1.0, 0.3), 4);
        assert_eq!(substeps(1e-3, 1.0), 1);
    }

    #[test]
    fn lagrange_weights_reproduce_cubics() {
        let w = lagrange_weights(2.3, 1, 4);
        let f = |x: f64| 1.0 - x + 0.5 * x * x * x;
        let v: f64 = (0..4).map(|a| w[a] * f((1 + a) as f64)).sum();
        assert!((v - f(2.3)).abs() < 1e-12);
    }

    #[test]
    fn sampled_velocity_interpolates_linear_in_time() {
        let g = Grid::two_thirds(8).unwrap();
        let base = PeriodicField::vector_fn(g, |x| [x[1].sin(), 0.0, 0.0]);
        let samples = (0..5).map(|j| base.scale(1.0 + 0.5 * j as f64)).collect();
        let sv = SampledField::new(0.0, 0.1, samples).unwrap();
        let v = sv.at(0.27).unwrap();
        assert!(v.sub(&base.scale(1.0 + 0.5 * 2.7)).unwrap().sup_norm() < 1e-12);
        assert!(matches!(sv.at(0.5), Err(SolverError::Window { .. })));
        assert_eq!(v.rank(), Rank::Vector);
    }

    #[test]
    fn config_validation() {
        let c = SolverConfig { dt: -1.0, ..SolverConfig::default() };
        assert!(c.validate().is_err());
        assert!(SolverConfig::default().validate().is_ok());
    }
}
