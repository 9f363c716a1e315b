//! Backward flow maps: (∂t + v·∇)Φ = 0 with Φ(x, t_a) = x.
//!
//! The periodic displacement ψ = Φ − id is transported on the grid,
//! ψ_t + (v·∇)ψ = −v, so ∇Φ = Id + ∇ψ comes from spectral derivatives of a
//! periodic field. Individual characteristics can be traced independently
//! with [`trace_characteristic`] for comparison.

use super::advection::advection_term;
use super::{substeps, IntegratingFactor, SolverConfig, TimeField};
use crate::error::SolverError;
use crate::spectral::{gradient, jacobian_values, PeriodicField, Rank, Space};
use serde::Serialize;

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct FlowQuality {
    pub min_det: f64,
    /// max |det ∇Φ − 1|
    pub det_defect: f64,
    /// max Frobenius norm of ∇Φ − Id
    pub gradient_deviation: f64,
}

impl FlowQuality {
    pub fn merge(self, other: FlowQuality) -> FlowQuality {
        FlowQuality {
            min_det: self.min_det.min(other.min_det),
            det_defect: self.det_defect.max(other.det_defect),
            gradient_deviation: self.gradient_deviation.max(other.gradient_deviation),
        }
    }

    pub fn of(psi: &PeriodicField) -> Result<FlowQuality, SolverError> {
        let jac = jacobian_values(psi)?;
        let g = psi.grid();
        let mut q = FlowQuality { min_det: f64::INFINITY, det_defect: 0.0, gradient_deviation: 0.0 };
        for p in 0..g.len() {
            let mut m = [[0.0; 3]; 3];
            let mut fro = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    let d = jac[a][b][p];
                    fro += d * d;
                    m[a][b] = d + if a == b { 1.0 } else { 0.0 };
                }
            }
            let det = det3(&m);
            q.min_det = q.min_det.min(det);
            q.det_defect = q.det_defect.max((det - 1.0).abs());
            q.gradient_deviation = q.gradient_deviation.max(fro.sqrt());
        }
        Ok(q)
    }
}

pub fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Stepwise transport of ψ = Φ − id; the velocity is supplied on every advance
/// so callers can stream it.
pub struct FlowIntegrator {
    anchor: f64,
    t: f64,
    psi: PeriodicField,
    config: SolverConfig,
    factor: IntegratingFactor,
}

impl FlowIntegrator {
    pub fn new(grid: crate::spectral::Grid, anchor: f64, config: &SolverConfig) -> Result<Self, SolverError> {
        config.validate()?;
        Ok(FlowIntegrator {
            anchor,
            t: anchor,
            psi: PeriodicField::zeros(grid, Rank::Vector, Space::Modes),
            config: config.clone(),
            factor: IntegratingFactor::new(grid, 0.0, 1.0),
        })
    }

    pub fn anchor(&self) -> f64 {
        self.anchor
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Φ − id at the current time, in mode space.
    pub fn displacement(&self) -> &PeriodicField {
        &self.psi
    }

    pub fn advance_to(&mut self, t: f64, velocity: &dyn TimeField) -> Result<(), SolverError> {
        let end = self.anchor + self.config.horizon;
        let slack = 1e-12 * (1.0 + end.abs());
        if t < self.t - slack || t > end + slack {
            return Err(SolverError::Window { t, start: self.t, end });
        }
        let span = t - self.t;
        if span <= slack {
            return Ok(());
        }
        let n = substeps(span, self.config.dt);
        let h = span / n as f64;
        let limit = self.config.cfl * self.psi.grid().spacing();
        let dealias = self.config.dealias;
        for j in 0..n {
            let ts = self.t + j as f64 * h;
            let mut speed: f64 = 0.0;
            let next = self.factor.step(&self.psi, ts, h, |s, psi| {
                let v = velocity.at(s)?.to_modes();
                let (adv, sp) = advection_term(psi, &v, dealias)?;
                speed = speed.max(sp);
                let mut v = v;
                if dealias {
                    v = v.dealiased();
                }
                Ok(adv.axpy(-1.0, &v)?)
            })?;
            if h * speed > limit {
                return Err(SolverError::Cfl { t: ts, dt: h, limit: limit / speed });
            }
            self.psi = next;
        }
        self.t = t;
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FlowMap {
    pub anchor: f64,
    pub times: Vec<f64>,
    pub phi_minus_id: Vec<PeriodicField>,
    pub quality: FlowQuality,
}

impl FlowMap {
    /// Largest transport residual ‖(∂t + v·∇)Φ‖₀ over interior samples, with a
    /// fourth-order centered difference in time.
    pub fn transport_residual(&self, velocity: &dyn TimeField) -> Result<f64, SolverError> {
        let m = self.times.len();
        if m < 5 {
            return Err(SolverError::Config("residual needs at least five samples".into()));
        }
        let h = self.times[1] - self.times[0];
        let mut worst: f64 = 0.0;
        for j in 2..m - 2 {
            let f = &self.phi_minus_id;
            let dt = f[j - 2]
                .scale(1.0 / 12.0)
                .axpy(-8.0 / 12.0, &f[j - 1])?
                .axpy(8.0 / 12.0, &f[j + 1])?
                .axpy(-1.0 / 12.0, &f[j + 2])?
                .scale(1.0 / h);
            let v = velocity.at(self.times[j])?;
            let vv = v.values_real();
            let dtv = dt.values_real();
            let g = v.grid();
            for c in 0..3 {
                let grad = gradient(&f[j].component(c))?.values_real();
                for p in 0..g.len() {
                    let r = dtv[c][p] + vv[0][p] * grad[0][p] + vv[1][p] * grad[1][p] + vv[2][p] * grad[2][p] + vv[c][p];
                    worst = worst.max(r.abs());
                }
            }
        }
        Ok(worst)
    }
}

/// Transport Φ − id from `anchor` over `config.horizon`, sampled every `config.output_spacing()`.
pub fn flow_map(
    grid: crate::spectral::Grid,
    velocity: &dyn TimeField,
    anchor: f64,
    config: &SolverConfig,
) -> Result<FlowMap, SolverError> {
    let mut it = FlowIntegrator::new(grid, anchor, config)?;
    let count = substeps(config.horizon, config.output_spacing());
    let mut map = FlowMap {
        anchor,
        times: Vec::new(),
        phi_minus_id: Vec::new(),
        quality: FlowQuality { min_det: 1.0, det_defect: 0.0, gradient_deviation: 0.0 },
    };
    for j in 0..=count {
        let t = anchor + config.horizon * j as f64 / count as f64;
        it.advance_to(t, velocity)?;
        map.quality = map.quality.merge(FlowQuality::of(it.displacement())?);
        map.times.push(t);
        map.phi_minus_id.push(it.displacement().clone());
    }
    Ok(map)
}

/// Follow the characteristic through (x, t) backwards to the anchor time with
/// `steps` RK4 steps of a pointwise velocity; returns the unwrapped foot point.
pub fn trace_characteristic<F>(velocity: F, x: [f64; 3], t: f64, anchor: f64, steps: usize) -> [f64; 3]
where
    F: Fn([f64; 3], f64) -> [f64; 3],
{
    let h = (anchor - t) / steps as f64;
    let mut y = x;
    let add = |a: [f64; 3], b: [f64; 3], s: f64| [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]];
    for j in 0..steps {
        let s = t + j as f64 * h;
        let k1 = velocity(y, s);
        let k2 = velocity(add(y, k1, 0.5 * h), s + 0.5 * h);
        let k3 = velocity(add(y, k2, 0.5 * h), s + 0.5 * h);
        let k4 = velocity(add(y, k3, h), s + h);
        for c in 0..3 {
            y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::SteadyField;
    use crate::spectral::Grid;

    fn cfg(horizon: f64) -> SolverConfig {
        SolverConfig { dt: 0.02, horizon, sample_interval: 0.05, horizon_constant: None, ..SolverConfig::default() }
    }

    #[test]
    fn zero_velocity_gives_identity() {
        let g = Grid::two_thirds(8).unwrap();
        let v = SteadyField(PeriodicField::zeros(g, Rank::Vector, Space::Values));
        let m = flow_map(g, &v, 0.0, &cfg(0.3)).unwrap();
        assert!(m.phi_minus_id.iter().all(|p| p.sup_norm() == 0.0));
        assert_eq!(m.quality.det_defect, 0.0);
    }

    #[test]
    fn constant_velocity_shifts_back() {
        let g = Grid::two_thirds(8).unwrap();
        let c = [0.3, -0.2, 0.1];
        let v = SteadyField(PeriodicField::constant(g, Rank::Vector, &c));
        let m = flow_map(g, &v, 0.5, &cfg(0.4)).unwrap();
        let t = *m.times.last().unwrap() - 0.5;
        let mean = m.phi_minus_id.last().unwrap().mean();
        for k in 0..3 {
            assert!((mean[k] + c[k] * t).abs() < 1e-13);
        }
    }

    #[test]
    fn characteristic_of_constant_flow() {
        let y = trace_characteristic(|_, _| [1.0, 0.0, -0.5], [0.1, 0.2, 0.3], 2.0, 1.0, 10);
        assert!((y[0] - (0.1 - 1.0)).abs() < 1e-14 && (y[2] - 0.8).abs() < 1e-14);
    }
}
