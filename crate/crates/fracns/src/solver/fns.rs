//! Fractional Navier-Stokes: ∂t v + P div(v⊗v) + ν(−Δ)^γ v = 0.

use super::{substeps, IntegratingFactor, SolverConfig};
use crate::error::SolverError;
use crate::operators::{leray, pressure_from_velocity};
use crate::spectral::{divergence, ik, PeriodicField, Rank, Space, SYM_PAIRS, ZERO};

/// Σ_k |k| |v̂_k| over all components; an upper bound for sup|∇v| used by the blow-up guard.
pub fn wiener_gradient_norm(v: &PeriodicField) -> f64 {
    let m = v.to_modes();
    let g = v.grid();
    let mut s = 0.0;
    for idx in 0..g.len() {
        let k = g.wavevector(idx);
        let kn = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
        if kn == 0.0 {
            continue;
        }
        for comp in m.comps() {
            s += kn * comp[idx].norm();
        }
    }
    s
}

/// −P div(v⊗v) in mode space, together with max|v| over the grid.
pub(crate) fn projected_nonlinearity(v: &PeriodicField, dealias: bool) -> Result<(PeriodicField, f64), SolverError> {
    let g = v.grid();
    let vals = v.values_real();
    let mut speed: f64 = 0.0;
    for p in 0..g.len() {
        speed = speed.max((vals[0][p] * vals[0][p] + vals[1][p] * vals[1][p] + vals[2][p] * vals[2][p]).sqrt());
    }
    let prod: Vec<Vec<f64>> = SYM_PAIRS
        .iter()
        .map(|&(a, b)| vals[a].iter().zip(&vals[b]).map(|(x, y)| x * y).collect())
        .collect();
    let m = PeriodicField::from_real_values(g, Rank::SymTensor, prod)?.into_modes();
    let mut out = PeriodicField::zeros(g, Rank::Vector, Space::Modes);
    {
        let comps = out.comps_mut();
        for idx in 0..g.len() {
            if dealias && !g.retained(idx) {
                continue;
            }
            let k = g.wavevector(idx);
            let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
            if k2 == 0.0 || g.touches_nyquist(idx) {
                continue;
            }
            let iks = [ik(&g, idx, 0), ik(&g, idx, 1), ik(&g, idx, 2)];
            let mut d = [ZERO; 3];
            for (a, da) in d.iter_mut().enumerate() {
                for (b, kb) in iks.iter().enumerate() {
                    *da += m.comp(crate::spectral::sym_index(a, b))[idx] * kb;
                }
            }
            let kd = (d[0] * k[0] as f64 + d[1] * k[1] as f64 + d[2] * k[2] as f64) / k2;
            for a in 0..3 {
                comps[a][idx] = -(d[a] - kd * k[a] as f64);
            }
        }
    }
    Ok((out, speed))
}

/// Stepwise integrator holding the current state; used directly by the gluing stage.
pub struct FnsIntegrator {
    t0: f64,
    t: f64,
    v: PeriodicField,
    config: SolverConfig,
    factor: IntegratingFactor,
    initial_gradient: f64,
    steps: usize,
}

impl FnsIntegrator {
    pub fn new(u0: &PeriodicField, nu: f64, gamma: f64, t0: f64, config: &SolverConfig) -> Result<Self, SolverError> {
        config.validate()?;
        if u0.rank() != Rank::Vector {
            return Err(SolverError::Config("initial velocity must be a vector field".into()));
        }
        let scale = 1.0 + u0.sup_norm();
        let div = divergence(u0)?.sup_norm();
        if div > 1e-10 * scale {
            return Err(SolverError::NotDivergenceFree(div));
        }
        config.check_horizon(u0)?;
        let mut v = leray(u0)?;
        if config.dealias {
            v = v.dealiased();
        }
        let g = u0.grid();
        Ok(FnsIntegrator {
            t0,
            t: t0,
            initial_gradient: wiener_gradient_norm(&v),
            v,
            config: config.clone(),
            factor: IntegratingFactor::new(g, nu, gamma),
            steps: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn start(&self) -> f64 {
        self.t0
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.config.horizon
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    /// Current velocity in mode space.
    pub fn velocity(&self) -> &PeriodicField {
        &self.v
    }

    pub fn pressure(&self) -> Result<PeriodicField, SolverError> {
        Ok(pressure_from_velocity(&self.v, None)?)
    }

    /// Advance to time t in equal substeps no longer than the configured dt.
    pub fn advance_to(&mut self, t: f64) -> Result<(), SolverError> {
        let slack = 1e-12 * (1.0 + self.end().abs());
        if t < self.t - slack || t > self.end() + slack {
            return Err(SolverError::Window { t, start: self.t, end: self.end() });
        }
        let span = t - self.t;
        if span <= slack {
            return Ok(());
        }
        let n = substeps(span, self.config.dt);
        let h = span / n as f64;
        let g = self.v.grid();
        let limit = self.config.cfl * g.spacing();
        let dealias = self.config.dealias;
        for j in 0..n {
            let ts = self.t + j as f64 * h;
            let mut first = true;
            let mut speed = 0.0;
            let next = self.factor.step(&self.v, ts, h, |_, u| {
                let (nl, s) = projected_nonlinearity(u, dealias)?;
                if first {
                    speed = s;
                    first = false;
                }
                Ok(nl)
            })?;
            if h * speed > limit {
                return Err(SolverError::Cfl { t: ts, dt: h, limit: limit / speed });
            }
            let grad = wiener_gradient_norm(&next);
            if !grad.is_finite() || (self.initial_gradient > 0.0 && grad > self.config.blowup_factor * self.initial_gradient) {
                return Err(SolverError::BlowUp { last_valid_time: ts });
            }
            self.v = next;
            self.steps += 1;
        }
        self.t = t;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FnsSolution {
    pub times: Vec<f64>,
    pub velocity: Vec<PeriodicField>,
    pub pressure: Vec<PeriodicField>,
}

/// Solve on [0, horizon], returning samples every `config.output_spacing()`.
pub fn solve_fns(u0: &PeriodicField, nu: f64, gamma: f64, config: &SolverConfig) -> Result<FnsSolution, SolverError> {
    let mut integ = FnsIntegrator::new(u0, nu, gamma, 0.0, config)?;
    let spacing = config.output_spacing();
    let count = substeps(config.horizon, spacing);
    let mut sol = FnsSolution { times: Vec::new(), velocity: Vec::new(), pressure: Vec::new() };
    for j in 0..=count {
        let t = config.horizon * j as f64 / count as f64;
        integ.advance_to(t)?;
        sol.times.push(t);
        sol.velocity.push(integ.velocity().clone());
        sol.pressure.push(integ.pressure()?);
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    fn cfg(dt: f64, horizon: f64) -> SolverConfig {
        SolverConfig { dt, horizon, horizon_constant: None, ..SolverConfig::default() }
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = Grid::two_thirds(8).unwrap();
        let u0 = PeriodicField::zeros(g, Rank::Vector, Space::Values);
        let s = solve_fns(&u0, 0.1, 0.3, &cfg(0.1, 0.5)).unwrap();
        assert!(s.velocity.iter().all(|v| v.sup_norm() == 0.0));
        assert!(s.pressure.iter().all(|p| p.sup_norm() == 0.0));
    }

    #[test]
    fn shear_decays_at_the_exact_rate() {
        let g = Grid::two_thirds(16).unwrap();
        let u0 = PeriodicField::vector_fn(g, |x| [x[1].sin(), 0.0, 0.0]);
        let nu = 0.3;
        let s = solve_fns(&u0, nu, 0.2, &cfg(0.05, 1.0)).unwrap();
        let last = s.velocity.last().unwrap();
        let exact = u0.scale((-nu * 1.0f64).exp());
        assert!(last.sub(&exact).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn rejects_compressible_data_and_long_horizons() {
        let g = Grid::two_thirds(8).unwrap();
        let u0 = PeriodicField::vector_fn(g, |x| [x[0].sin(), 0.0, 0.0]);
        assert!(matches!(FnsIntegrator::new(&u0, 0.1, 0.2, 0.0, &cfg(0.1, 1.0)), Err(SolverError::NotDivergenceFree(_))));
        let tg = PeriodicField::vector_fn(g, |x| [x[1].sin(), 0.0, 0.0]);
        let c = SolverConfig { horizon: 10.0, horizon_constant: Some(0.1), ..SolverConfig::default() };
        assert!(matches!(FnsIntegrator::new(&tg, 0.1, 0.2, 0.0, &c), Err(SolverError::Horizon { .. })));
    }

    #[test]
    fn cfl_violation_is_reported() {
        let g = Grid::two_thirds(16).unwrap();
        let u0 = PeriodicField::vector_fn(g, |x| [10.0 * x[1].sin(), 0.0, 0.0]);
        let c = cfg(1.0, 1.0);
        let mut it = FnsIntegrator::new(&u0, 0.0, 0.2, 0.0, &c).unwrap();
        assert!(matches!(it.advance_to(1.0), Err(SolverError::Cfl { .. })));
    }
}
