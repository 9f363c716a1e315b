//! Starting triples of the iteration: the trivial one, and the space-time
//! mollification of an Euler solution with the commutator stress
//! R̊_n = v_n⊗̊v_n − (v⊗̊v)_n + ν_n R(−Δ)^γ v_n.

use super::{level_values, EnergyProfile, IterationParams, Units};
use crate::error::ScheduleError;
use crate::ledger::{Ledger, LedgerLine};
use crate::operators::{fractional_laplacian, inverse_divergence_unchecked, pressure_from_velocity};
use crate::spectral::{bump, holder_seminorm_with, mollify, outer_self, traceless, HolderOptions, PeriodicField, Rank, Space};
use crate::state::{ReynoldsSeries, ReynoldsTriple, SeedKind};

/// Velocity samples of an Euler solution on a uniform time grid (grid units).
#[derive(Clone, Debug)]
pub struct EulerSeries {
    pub t0: f64,
    pub spacing: f64,
    pub velocity: Vec<PeriodicField>,
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct SeedScales {
    /// δ_n = a^{−b^{n+2}} in unit-period length and time.
    pub delta: f64,
    pub delta_grid: f64,
    /// ν_n = δ_n^{1+β'} in unit-period units and on the grid.
    pub nu: f64,
    pub nu_grid: f64,
    pub beta_prime: f64,
}

pub fn seed_scales(params: &IterationParams, n: u32, beta_prime: f64) -> SeedScales {
    let delta = params.a.powf(-params.b.powi(n as i32 + 2));
    let nu = delta.powf(1.0 + beta_prime);
    SeedScales {
        delta,
        delta_grid: Units::length_to_grid(delta),
        nu,
        nu_grid: Units::nu_to_grid(nu, params.gamma),
        beta_prime,
    }
}

#[derive(Clone, Debug)]
pub struct SeedTriple {
    pub kind: SeedKind,
    pub series: ReynoldsSeries,
    /// Energy profile attached to the seed (grid time), when the seed defines one.
    pub energy: Option<EnergyProfile>,
    /// Viscosity of the seed's equation on the grid.
    pub nu_grid: f64,
    pub ledger: Ledger,
    /// max_t ‖v_n⊗̊v_n − (v⊗̊v)_n‖₀
    pub commutator_norm: f64,
    /// max_t ‖ν_n R(−Δ)^γ v_n‖₀
    pub dissipative_norm: f64,
}

/// The trivial triple (0, 0, 0) sampled at `count` times.
pub fn zero_seed(grid: crate::spectral::Grid, t0: f64, spacing: f64, count: usize, nu_grid: f64) -> SeedTriple {
    let triples = (0..count).map(|j| ReynoldsTriple::zero(t0 + j as f64 * spacing, grid)).collect();
    SeedTriple {
        kind: SeedKind::ZeroSeed,
        series: ReynoldsSeries { t0, spacing, triples },
        energy: None,
        nu_grid,
        ledger: Ledger::default(),
        commutator_norm: 0.0,
        dissipative_norm: 0.0,
    }
}

/// Quadrature offsets (in samples) and weights of the time mollifier at scale `width`.
fn time_weights(spacing: f64, width: f64) -> Vec<(isize, f64)> {
    let reach = (width / spacing).floor() as isize;
    let mut w: Vec<(isize, f64)> = (-reach..=reach)
        .map(|j| (j, bump(j as f64 * spacing / width)))
        .filter(|(_, v)| *v > 0.0)
        .collect();
    let s: f64 = w.iter().map(|(_, v)| v).sum();
    for (_, v) in w.iter_mut() {
        *v /= s;
    }
    w
}

/// Dealiased v⊗v, matching the truncation of the Euler integrator.
fn truncated_outer(v: &PeriodicField) -> Result<PeriodicField, ScheduleError> {
    Ok(outer_self(v)?.dealiased())
}

/// Mollify an Euler solution in space and time at scale δ_n and build the
/// Navier-Stokes-Reynolds triple with viscosity ν_n, its energy profile
/// e_n = ⨍|v_n|² + δ_{n+1}λ_n^{−α}, and the inductive-estimate ledger at level n.
/// Output times are the Euler sample times whose full mollification window is available.
pub fn seed_from_euler_field(
    euler: &EulerSeries,
    params: &IterationParams,
    n: u32,
    beta_prime: f64,
) -> Result<SeedTriple, ScheduleError> {
    params.validate()?;
    if euler.velocity.is_empty() {
        return Err(ScheduleError::Param("empty Euler series".into()));
    }
    let sc = seed_scales(params, n, beta_prime);
    if euler.spacing > sc.delta_grid / 4.0 {
        return Err(ScheduleError::CoarseSampling { spacing: euler.spacing, scale: sc.delta_grid });
    }
    let weights = time_weights(euler.spacing, sc.delta_grid);
    let reach = weights.iter().map(|(j, _)| j.unsigned_abs()).max().unwrap_or(0);
    let m = euler.velocity.len();
    if m < 2 * reach + 1 {
        return Err(ScheduleError::Param(format!(
            "Euler series of {m} samples is shorter than the mollification window of {} samples",
            2 * reach + 1
        )));
    }
    let lv = level_values(params, n)?;
    let gap = lv.delta_next * lv.lambda_q.powf(-params.alpha);

    // space-mollified velocity and stress at every Euler sample
    let mut vs = Vec::with_capacity(m);
    let mut ms = Vec::with_capacity(m);
    for v in &euler.velocity {
        let v = v.to_modes();
        ms.push(mollify(&truncated_outer(&v)?, sc.delta_grid)?.field);
        vs.push(mollify(&v, sc.delta_grid)?.field);
    }

    let mut triples = Vec::new();
    let mut energy = Vec::new();
    let mut commutator_norm: f64 = 0.0;
    let mut dissipative_norm: f64 = 0.0;
    for c in reach..m - reach {
        let t = euler.t0 + c as f64 * euler.spacing;
        let g = vs[c].grid();
        let mut vn = PeriodicField::zeros(g, Rank::Vector, Space::Modes);
        let mut mn = PeriodicField::zeros(g, Rank::SymTensor, Space::Modes);
        for &(j, w) in &weights {
            let s = (c as isize + j) as usize;
            vn = vn.axpy(w, &vs[s])?;
            mn = mn.axpy(w, &ms[s])?;
        }
        let comm = traceless(&outer_self(&vn)?)?.sub(&traceless(&mn)?)?;
        let diss = inverse_divergence_unchecked(&fractional_laplacian(&vn, params.gamma)).scale(sc.nu_grid);
        commutator_norm = commutator_norm.max(comm.sup_norm());
        dissipative_norm = dissipative_norm.max(diss.sup_norm());
        let r = comm.add(&diss)?;
        let p = pressure_from_velocity(&vn, Some(&r))?;
        energy.push(vn.mean_square() + gap);
        triples.push(ReynoldsTriple { t, v: vn, p, r });
    }
    let t0 = triples[0].t;
    let k_bound = energy.windows(2).map(|w| ((w[1] - w[0]) / euler.spacing).abs()).fold(0.0, f64::max);
    let profile = if energy.len() >= 2 {
        Some(EnergyProfile::new(t0, euler.spacing, energy.clone(), k_bound * 1.5 + 1e-12)?)
    } else {
        None
    };
    let mut ledger = Ledger::default();
    for (j, tr) in triples.iter().enumerate() {
        ledger.extend(inductive_estimates(params, n, tr, energy[j], &format!("seed.t{j}"))?);
    }
    Ok(SeedTriple {
        kind: SeedKind::MollifiedEulerSeed,
        series: ReynoldsSeries { t0, spacing: euler.spacing, triples },
        energy: profile,
        nu_grid: sc.nu_grid,
        ledger,
        commutator_norm,
        dissipative_norm,
    })
}

/// Inductive estimates of a level-q triple at one time, against the prescribed energy e:
/// ‖R̊‖₀ ≤ δ_{q+1}λ_q^{−3α}, ‖v‖₀ ≤ 1 − δ_q^{1/2}, ‖v‖₁ ≤ Mδ_q^{1/2}λ_q (when M is known),
/// δ_{q+1}λ_q^{−α} ≤ e − ⨍|v|² ≤ δ_{q+1}.
pub fn inductive_estimates(
    params: &IterationParams,
    q: u32,
    triple: &ReynoldsTriple,
    e: f64,
    prefix: &str,
) -> Result<Ledger, ScheduleError> {
    let lv = level_values(params, q)?;
    let mut l = Ledger::default();
    let r0 = triple.r.sup_norm();
    let v0 = triple.v.sup_norm();
    l.push(LedgerLine::le(format!("{prefix}.stress"), r0, lv.delta_next * lv.lambda_q.powf(-3.0 * params.alpha)));
    l.push(LedgerLine::le(format!("{prefix}.velocity_sup"), v0, 1.0 - lv.delta_q.sqrt()));
    if let Some(mc) = params.m_const {
        let v1 = v0 + Units::seminorm_from_grid(holder_seminorm_with(&triple.v, 1.0, &HolderOptions::coarse())?.value, 1.0, 0.0);
        l.push(LedgerLine::le(format!("{prefix}.velocity_c1"), v1, mc * lv.delta_q.sqrt() * lv.lambda_q));
    }
    let gap = e - triple.v.mean_square();
    l.push(LedgerLine::ge(format!("{prefix}.energy_gap.lower"), gap, lv.delta_next * lv.lambda_q.powf(-params.alpha)));
    l.push(LedgerLine::le(format!("{prefix}.energy_gap.upper"), gap, lv.delta_next));
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    #[test]
    fn zero_euler_field_gives_zero_stress_and_floor_energy() {
        let p = IterationParams::default();
        let g = Grid::two_thirds(16).unwrap();
        let sc = seed_scales(&p, 0, 0.3);
        let spacing = sc.delta_grid / 8.0;
        let velocity = vec![PeriodicField::zeros(g, Rank::Vector, Space::Modes); 40];
        let s = seed_from_euler_field(&EulerSeries { t0: 0.0, spacing, velocity }, &p, 0, 0.3).unwrap();
        let lv = level_values(&p, 0).unwrap();
        let floor = lv.delta_next * lv.lambda_q.powf(-p.alpha);
        assert!(s.series.triples.iter().all(|t| t.r.sup_norm() == 0.0));
        assert!((s.energy.unwrap().eval(s.series.t0) - floor).abs() < 1e-15);
    }

    #[test]
    fn coarse_sampling_is_rejected() {
        let p = IterationParams::default();
        let g = Grid::two_thirds(8).unwrap();
        let sc = seed_scales(&p, 0, 0.3);
        let velocity = vec![PeriodicField::zeros(g, Rank::Vector, Space::Modes); 10];
        let e = EulerSeries { t0: 0.0, spacing: sc.delta_grid, velocity };
        assert!(matches!(seed_from_euler_field(&e, &p, 0, 0.3), Err(ScheduleError::CoarseSampling { .. })));
    }

    #[test]
    fn time_weights_are_normalized_and_symmetric() {
        let w = time_weights(0.1, 0.45);
        assert_eq!(w.len(), 9);
        assert!((w.iter().map(|x| x.1).sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(w[0].1, w[8].1);
    }
}
