//! Gluing of exact local solutions.
//!
//! The times t_i = iτ split [0, T] into stress intervals
//! I_i = [t_{i+1} + τ/3, t_{i+1} + 2τ/3] and quiet intervals J_i between them.
//! Local solutions v_i start from v_ℓ(t_i) and are glued with a partition of
//! unity χ_i that equals 1 on J_i and switches over on I_i, so the glued
//! stress lives in the I_i only.

use crate::error::{GluingError, SpectralError};
use crate::ledger::{Ledger, LedgerLine};
use crate::operators::{biot_savart, inverse_divergence_unchecked};
use crate::schedule::{LevelValues, Units};
use crate::solver::{FnsIntegrator, SolverConfig};
use crate::spectral::{holder_seminorm_with, outer_self, traceless, HolderOptions, PeriodicField, Rank, Space};
use std::collections::BTreeMap;

/// Smooth monotone transition with S = 0 for s ≤ 0, S = 1 for s ≥ 1 and S(s) + S(1 − s) = 1.
pub fn transition(s: f64) -> f64 {
    let f = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        f(s) / (f(s) + f(1.0 - s))
    }
}

pub fn transition_derivative(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    let (a, b) = ((-1.0 / s).exp(), (-1.0 / (1.0 - s)).exp());
    let (da, db) = (a / (s * s), b / ((1.0 - s) * (1.0 - s)));
    (da * b + a * db) / ((a + b) * (a + b))
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct TimePartition {
    pub tau: f64,
    pub t_end: f64,
}

impl TimePartition {
    pub fn new(tau: f64, t_end: f64) -> Result<Self, GluingError> {
        if !(tau > 0.0 && tau.is_finite()) || !(t_end > 0.0 && t_end.is_finite()) {
            return Err(GluingError::Partition(format!("τ = {tau} and T = {t_end} must be positive")));
        }
        Ok(TimePartition { tau, t_end })
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.tau
    }

    /// Number of cutoffs χ_i whose support meets [0, T].
    pub fn count(&self) -> usize {
        let mut n = 1;
        while self.t(n) + self.tau / 3.0 < self.t_end {
            n += 1;
        }
        n
    }

    fn clip(&self, a: f64, b: f64) -> Option<(f64, f64)> {
        let (a, b) = (a.max(0.0), b.min(self.t_end));
        (a < b).then_some((a, b))
    }

    /// I_i ∩ [0, T].
    pub fn stress_interval(&self, i: usize) -> Option<(f64, f64)> {
        let s = self.t(i + 1);
        self.clip(s + self.tau / 3.0, s + 2.0 * self.tau / 3.0)
    }

    /// J_i ∩ [0, T].
    pub fn quiet_interval(&self, i: usize) -> Option<(f64, f64)> {
        let s = self.t(i + 1);
        let a = if i == 0 { 0.0 } else { s - self.tau / 3.0 };
        self.clip(a, s + self.tau / 3.0)
    }

    /// Lifetime [t_i, t_i + 2τ] of the local solution v_i.
    pub fn window(&self, i: usize) -> (f64, f64) {
        (self.t(i), self.t(i) + 2.0 * self.tau)
    }

    /// Closed support of χ_i.
    pub fn chi_support(&self, i: usize) -> (f64, f64) {
        let a = if i == 0 { f64::NEG_INFINITY } else { self.t(i) + self.tau / 3.0 };
        let b = if i + 1 == self.count() { f64::INFINITY } else { self.t(i + 1) + 2.0 * self.tau / 3.0 };
        (a, b)
    }

    pub fn chi(&self, i: usize, t: f64) -> f64 {
        self.chi_pair(i, t).0
    }

    pub fn dchi(&self, i: usize, t: f64) -> f64 {
        self.chi_pair(i, t).1
    }

    /// (χ_i(t), ∂_tχ_i(t)).
    fn chi_pair(&self, i: usize, t: f64) -> (f64, f64) {
        if i >= self.count() {
            return (0.0, 0.0);
        }
        let third = self.tau / 3.0;
        let mut value = 1.0;
        let mut slope = 0.0;
        if i > 0 {
            let s = (t - self.t(i) - third) / third;
            value *= transition(s);
            slope = transition_derivative(s) / third;
        }
        if i + 1 < self.count() {
            let s = (t - self.t(i + 1) - third) / third;
            let down = 1.0 - transition(s);
            let ddown = -transition_derivative(s) / third;
            slope = slope * down + value * ddown;
            value *= down;
        }
        (value, slope)
    }

    /// Indices with χ_i(t) ≠ 0 (at most two).
    pub fn active(&self, t: f64) -> Vec<usize> {
        (0..self.count()).filter(|&i| self.chi(i, t) != 0.0).collect()
    }

    /// Index i with t in the interior of I_i, if any.
    pub fn stress_index(&self, t: f64) -> Option<usize> {
        let a = self.active(t);
        (a.len() == 2).then(|| a[0])
    }
}

/// One time slice of the glued triple (v̄, p̄, R̊̄).
#[derive(Clone, Debug)]
pub struct GluedSample {
    pub t: f64,
    pub v: PeriodicField,
    pub p: PeriodicField,
    pub r: PeriodicField,
    /// (i, χ_i(t)) for the active cutoffs.
    pub chi: Vec<(usize, f64)>,
}

#[derive(Clone, Copy, Debug, Default, serde::Serialize, serde::Deserialize)]
pub struct GluingDiagnostics {
    pub samples: usize,
    /// max over samples in the middle third of some J_i of ‖R̊̄‖₀
    pub mid_quiet_stress: f64,
    pub max_stress: f64,
    pub max_trace: f64,
    pub max_divergence: f64,
    /// max |⨍|v̄|² − ⨍|v_ℓ|²|
    pub energy_drift: f64,
    /// max_i,t ‖v_i − v_ℓ‖_α (unit-period units)
    pub local_deviation: f64,
    /// max_i,t |⨍|v_i|² − ⨍|v_ℓ|²|
    pub local_energy_drift: f64,
    /// max ‖z_i − z_{i+1}‖_α with z = B v (unit-period units)
    pub potential_difference: f64,
    pub max_mean_mismatch: f64,
}

/// Streaming construction of the glued triple at nondecreasing times.
pub struct Gluer<'a> {
    partition: TimePartition,
    nu: f64,
    gamma: f64,
    alpha: f64,
    config: SolverConfig,
    initial: Box<dyn Fn(usize, f64) -> Result<PeriodicField, GluingError> + 'a>,
    active: BTreeMap<usize, FnsIntegrator>,
    launched: usize,
    last: f64,
    pub diagnostics: GluingDiagnostics,
}

impl<'a> Gluer<'a> {
    /// `initial(i, t_i)` supplies v_ℓ(t_i); `nu` is the grid viscosity.
    pub fn new<F>(partition: TimePartition, nu: f64, gamma: f64, alpha: f64, config: &SolverConfig, initial: F) -> Self
    where
        F: Fn(usize, f64) -> Result<PeriodicField, GluingError> + 'a,
    {
        let mut config = config.clone();
        config.horizon = 2.0 * partition.tau;
        Gluer {
            partition,
            nu,
            gamma,
            alpha,
            config,
            initial: Box::new(initial),
            active: BTreeMap::new(),
            launched: 0,
            last: f64::NEG_INFINITY,
            diagnostics: GluingDiagnostics::default(),
        }
    }

    pub fn partition(&self) -> &TimePartition {
        &self.partition
    }

    /// Current velocities of the live local solutions.
    pub fn local_velocities(&self) -> impl Iterator<Item = (usize, &PeriodicField)> {
        self.active.iter().map(|(i, it)| (*i, it.velocity()))
    }

    fn prepare(&mut self, t: f64) -> Result<(), GluingError> {
        if t < self.last - 1e-12 * (1.0 + t.abs()) {
            return Err(GluingError::Partition(format!("times must be nondecreasing ({t} after {})", self.last)));
        }
        self.last = t;
        let slack = 1e-12 * (1.0 + t.abs());
        while self.launched < self.partition.count() && self.partition.t(self.launched) <= t + slack {
            let i = self.launched;
            let ti = self.partition.t(i);
            let u0 = (self.initial)(i, ti)?;
            let it = FnsIntegrator::new(&u0, self.nu, self.gamma, ti, &self.config)
                .map_err(|source| GluingError::LocalSolve { index: i, source })?;
            self.active.insert(i, it);
            self.launched += 1;
        }
        let support_end = |i: usize| self.partition.chi_support(i).1;
        let finished: Vec<usize> = self.active.keys().copied().filter(|&i| support_end(i) < t - slack).collect();
        for i in finished {
            self.active.remove(&i);
        }
        for (&i, it) in self.active.iter_mut() {
            let target = t.min(it.end());
            it.advance_to(target).map_err(|source| GluingError::LocalSolve { index: i, source })?;
        }
        Ok(())
    }

    /// Glued triple at time t, optionally comparing with v_ℓ(t) for the diagnostics.
    pub fn sample(&mut self, t: f64, v_ell: Option<&PeriodicField>) -> Result<GluedSample, GluingError> {
        self.prepare(t)?;
        let act = self.partition.active(t);
        let chi: Vec<(usize, f64)> = act.iter().map(|&i| (i, self.partition.chi(i, t))).collect();
        let first = self.active.get(&act[0]).ok_or_else(|| GluingError::Partition(format!("v_{} is not live at t = {t}", act[0])))?;
        let g = first.velocity().grid();
        let (v, p, r) = if act.len() == 1 {
            let it = first;
            let r = PeriodicField::zeros(g, Rank::SymTensor, Space::Modes);
            (it.velocity().clone(), it.pressure()?, r)
        } else {
            let (i, j) = (act[0], act[1]);
            let (a, b) = (&self.active[&i], &self.active[&j]);
            let (c, dc) = (self.partition.chi(i, t), self.partition.dchi(i, t));
            let d = a.velocity().sub(b.velocity())?;
            let mean = d.mean();
            let mismatch = mean.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            self.diagnostics.max_mean_mismatch = self.diagnostics.max_mean_mismatch.max(mismatch);
            if mismatch > 1e-10 * (1.0 + a.velocity().sup_norm()) {
                return Err(GluingError::MeanMismatch(i, j, mismatch));
            }
            let v = a.velocity().scale(c).axpy(1.0 - c, b.velocity())?;
            let dd = outer_self(&d)?;
            let r = inverse_divergence_unchecked(&d).scale(dc).axpy(-c * (1.0 - c), &traceless(&dd)?)?;
            let d2 = d.mean_square();
            let mut sq = PeriodicField::zeros(g, Rank::Scalar, Space::Values);
            {
                let dv = d.values_real();
                let out = &mut sq.comps_mut()[0];
                for (p, o) in out.iter_mut().enumerate() {
                    let s = dv[0][p] * dv[0][p] + dv[1][p] * dv[1][p] + dv[2][p] * dv[2][p];
                    o.re = c * (1.0 - c) * (s - d2) / 3.0;
                }
            }
            let p = a.pressure()?.scale(c).axpy(1.0 - c, &b.pressure()?)?.add(&sq.to_modes())?;
            let zd = biot_savart(&d)?;
            let zn = zd.sup_norm() / Units::length_to_grid(1.0)
                + Units::seminorm_from_grid(holder_seminorm_with(&zd, self.alpha, &HolderOptions::coarse())?.value, self.alpha, 1.0);
            self.diagnostics.potential_difference = self.diagnostics.potential_difference.max(zn);
            (v, p, r)
        };
        let rs = r.sup_norm();
        let dg = &mut self.diagnostics;
        dg.samples += 1;
        dg.max_stress = dg.max_stress.max(rs);
        dg.max_trace = dg.max_trace.max(crate::spectral::trace(&r)?.sup_norm());
        dg.max_divergence = dg.max_divergence.max(crate::spectral::divergence(&v)?.sup_norm());
        for i in 0..self.partition.count() {
            if let Some((a, b)) = self.partition.quiet_interval(i) {
                let third = (b - a) / 3.0;
                if t >= a + third && t <= b - third {
                    dg.mid_quiet_stress = dg.mid_quiet_stress.max(rs);
                }
            }
        }
        if let Some(vl) = v_ell {
            let el = vl.mean_square();
            dg.energy_drift = dg.energy_drift.max((v.mean_square() - el).abs());
            for (_, it) in self.active.iter() {
                let diff = it.velocity().sub(vl)?;
                let dn = diff.sup_norm() + Units::seminorm_from_grid(
                    holder_seminorm_with(&diff, self.alpha, &HolderOptions::coarse())?.value,
                    self.alpha,
                    0.0,
                );
                self.diagnostics.local_deviation = self.diagnostics.local_deviation.max(dn);
                self.diagnostics.local_energy_drift =
                    self.diagnostics.local_energy_drift.max((it.velocity().mean_square() - el).abs());
            }
        }
        Ok(GluedSample { t, v, p, r, chi })
    }
}

/// CFL-like gate 2τ‖v_ℓ‖_{1+α} against ℓ^α (unit-period units).
pub fn cfl_gate(v_ell: &PeriodicField, lv: &LevelValues, alpha: f64) -> Result<LedgerLine, SpectralError> {
    let opts = HolderOptions::coarse();
    let s0 = v_ell.sup_norm();
    let s1 = holder_seminorm_with(v_ell, 1.0, &opts)?.value;
    let sa = holder_seminorm_with(v_ell, 1.0 + alpha, &opts)?.value;
    let norm_1_alpha = s0 + Units::seminorm_from_grid(s1, 1.0, 0.0) + Units::seminorm_from_grid(sa, 1.0 + alpha, 0.0);
    Ok(LedgerLine::le("gluing.cfl_gate", 2.0 * lv.tau_q * norm_1_alpha, lv.ell.powf(alpha)))
}

/// Ledger of the gluing estimates, with fitted constants for the implicit ones.
pub fn gluing_ledger(d: &GluingDiagnostics, lv: &LevelValues, alpha: f64) -> Ledger {
    let mut l = Ledger::default();
    l.push(LedgerLine::le("gluing.mid_quiet_stress", d.mid_quiet_stress, 1e-6));
    l.push(LedgerLine::le("gluing.trace", d.max_trace, 1e-10).hard());
    l.push(LedgerLine::le("gluing.divergence", d.max_divergence, 1e-10).hard());
    l.push(LedgerLine::le("gluing.energy_drift", d.energy_drift, lv.delta_next * lv.ell.powf(alpha)));
    l.push(LedgerLine::le("gluing.local_energy_drift", d.local_energy_drift, lv.delta_next * lv.ell.powf(alpha)));
    let scale = lv.tau_q * lv.delta_next * lv.ell.powf(-1.0 + alpha);
    l.push(
        LedgerLine::le("gluing.local_deviation", d.local_deviation, scale)
            .note(format!("fitted constant {:.3e}", d.local_deviation / scale)),
    );
    let zscale = lv.tau_q * lv.delta_next * lv.ell.powf(alpha);
    l.push(
        LedgerLine::le("gluing.potential_difference", d.potential_difference, zscale)
            .note(format!("fitted constant {:.3e}", d.potential_difference / zscale)),
    );
    l
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_is_symmetric_and_bounded() {
        for j in 0..=100 {
            let s = j as f64 / 100.0;
            assert!((transition(s) + transition(1.0 - s) - 1.0).abs() < 1e-15);
        }
        assert!((transition_derivative(0.5) - 2.0).abs() < 1e-14);
        let h = 1e-6;
        let fd = (transition(0.3 + h) - transition(0.3 - h)) / (2.0 * h);
        assert!((fd - transition_derivative(0.3)).abs() < 1e-8);
    }

    #[test]
    fn partition_of_unity_and_supports() {
        let p = TimePartition::new(0.5, 2.3).unwrap();
        assert_eq!(p.count(), 5);
        for j in 0..=2300 {
            let t = j as f64 * 1e-3;
            let s: f64 = (0..p.count()).map(|i| p.chi(i, t)).sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(p.active(t).len() <= 2);
            for i in 0..p.count().saturating_sub(2) {
                assert!(p.chi(i, t) * p.chi(i + 2, t) == 0.0);
            }
        }
        let (a, b) = p.quiet_interval(1).unwrap();
        assert_eq!(p.chi(1, 0.5 * (a + b)), 1.0);
        let (a, b) = p.stress_interval(1).unwrap();
        let m = 0.5 * (a + b);
        assert!((p.chi(1, m) + p.chi(2, m) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn short_horizon_has_single_cutoff() {
        let p = TimePartition::new(1.0, 0.8).unwrap();
        assert_eq!(p.count(), 1);
        assert_eq!(p.chi(0, 0.7), 1.0);
    }
}
