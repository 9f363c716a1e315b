//! Nonlocal advection-diffusion: u_t + (v·∇)u + ν(−Δ)^γ u = f for a given
//! velocity v and forcing f; u may be scalar or vector valued (componentwise).

use super::{substeps, IntegratingFactor, SolverConfig, TimeField};
use crate::error::SolverError;
use crate::spectral::{gradient, PeriodicField, Rank};

/// −(v·∇)u in mode space and max|v|.
pub(crate) fn advection_term(u: &PeriodicField, v: &PeriodicField, dealias: bool) -> Result<(PeriodicField, f64), SolverError> {
    let g = u.grid();
    let vv = v.values_real();
    let mut speed: f64 = 0.0;
    for p in 0..g.len() {
        speed = speed.max((vv[0][p] * vv[0][p] + vv[1][p] * vv[1][p] + vv[2][p] * vv[2][p]).sqrt());
    }
    let nc = u.rank().components();
    let mut out = Vec::with_capacity(nc);
    for c in 0..nc {
        let grad = gradient(&u.component(c))?.values_real();
        let mut s = vec![0.0; g.len()];
        for (p, sp) in s.iter_mut().enumerate() {
            *sp = -(vv[0][p] * grad[0][p] + vv[1][p] * grad[1][p] + vv[2][p] * grad[2][p]);
        }
        out.push(s);
    }
    let mut f = PeriodicField::from_real_values(g, u.rank(), out)?.into_modes();
    if dealias {
        f = f.dealiased();
    }
    Ok((f, speed))
}

pub struct AdvectionIntegrator<'a> {
    t0: f64,
    t: f64,
    u: PeriodicField,
    config: SolverConfig,
    factor: IntegratingFactor,
    velocity: &'a dyn TimeField,
    forcing: Option<&'a dyn TimeField>,
}

impl<'a> AdvectionIntegrator<'a> {
    pub fn new(
        u0: &PeriodicField,
        velocity: &'a dyn TimeField,
        forcing: Option<&'a dyn TimeField>,
        nu: f64,
        gamma: f64,
        t0: f64,
        config: &SolverConfig,
    ) -> Result<Self, SolverError> {
        config.validate()?;
        let g = u0.grid();
        Ok(AdvectionIntegrator {
            t0,
            t: t0,
            u: u0.to_modes(),
            config: config.clone(),
            factor: IntegratingFactor::new(g, nu, gamma),
            velocity,
            forcing,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn end(&self) -> f64 {
        self.t0 + self.config.horizon
    }

    pub fn state(&self) -> &PeriodicField {
        &self.u
    }

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
        let limit = self.config.cfl * self.u.grid().spacing();
        let dealias = self.config.dealias;
        let (velocity, forcing) = (self.velocity, self.forcing);
        for j in 0..n {
            let ts = self.t + j as f64 * h;
            let mut speed: f64 = 0.0;
            let next = self.factor.step(&self.u, ts, h, |s, u| {
                let v = velocity.at(s)?;
                let (mut rhs, sp) = advection_term(u, &v, dealias)?;
                speed = speed.max(sp);
                if let Some(f) = forcing {
                    rhs = rhs.add(&f.at(s)?)?;
                }
                Ok(rhs)
            })?;
            if h * speed > limit {
                return Err(SolverError::Cfl { t: ts, dt: h, limit: limit / speed });
            }
            self.u = next;
        }
        self.t = t;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AdvectionSolution {
    pub times: Vec<f64>,
    pub states: Vec<PeriodicField>,
}

/// Solve on [0, horizon], returning samples every `config.output_spacing()`.
pub fn solve_advection_diffusion(
    u0: &PeriodicField,
    velocity: &dyn TimeField,
    forcing: Option<&dyn TimeField>,
    nu: f64,
    gamma: f64,
    config: &SolverConfig,
) -> Result<AdvectionSolution, SolverError> {
    if u0.rank() == Rank::SymTensor {
        return Err(SolverError::Config("advected quantity must be scalar or vector".into()));
    }
    let mut it = AdvectionIntegrator::new(u0, velocity, forcing, nu, gamma, 0.0, config)?;
    let count = substeps(config.horizon, config.output_spacing());
    let mut sol = AdvectionSolution { times: Vec::new(), states: Vec::new() };
    for j in 0..=count {
        let t = config.horizon * j as f64 / count as f64;
        it.advance_to(t)?;
        sol.times.push(t);
        sol.states.push(it.state().clone());
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::SteadyField;
    use crate::spectral::Grid;

    fn cfg() -> SolverConfig {
        SolverConfig { dt: 0.02, horizon: 0.5, dealias: false, horizon_constant: None, ..SolverConfig::default() }
    }

    #[test]
    fn constants_are_preserved() {
        let g = Grid::two_thirds(8).unwrap();
        let u0 = PeriodicField::constant(g, Rank::Scalar, &[2.5]);
        let v = SteadyField(PeriodicField::vector_fn(g, |x| [x[1].sin(), x[2].cos(), 0.3]));
        let s = solve_advection_diffusion(&u0, &v, None, 0.2, 0.4, &cfg()).unwrap();
        for u in &s.states {
            assert!(u.sub(&u0).unwrap().sup_norm() < 1e-13);
        }
    }

    #[test]
    fn constant_velocity_translates() {
        let g = Grid::two_thirds(16).unwrap();
        let c = [0.4, -0.3, 0.2];
        let u0 = PeriodicField::scalar_fn(g, |x| (x[0] + 2.0 * x[1]).sin());
        let v = SteadyField(PeriodicField::constant(g, Rank::Vector, &c));
        let s = solve_advection_diffusion(&u0, &v, None, 0.0, 0.4, &cfg()).unwrap();
        let t = *s.times.last().unwrap();
        let exact = PeriodicField::scalar_fn(g, |x| (x[0] - c[0] * t + 2.0 * (x[1] - c[1] * t)).sin());
        assert!(s.states.last().unwrap().sub(&exact).unwrap().sup_norm() < 1e-8);
    }
}
