//! Property suites for the operators, Mikado flows, local solver, stability
//! harness, Hölder/commutator/phase estimates and gluing. Each suite returns a
//! ledger whose lines carry the measured quantity and its tolerance.

use crate::error::{GluingError, MikadoError, SolverError, SpectralError};
use crate::gluing::{Gluer, TimePartition};
use crate::ledger::{Ledger, LedgerLine};
use crate::mikado::{compute_m, identity, sample_ball, MikadoFamily, Sym3};
use crate::operators::{biot_savart, fractional_laplacian, inverse_divergence, leray, stationary_phase_probe};
use crate::solver::harness::{stability_harness, HarnessCase};
use crate::solver::{solve_fns, FnsIntegrator, SolverConfig};
use crate::spectral::holder::{commutator_probe, holder_seminorm_with, HolderOptions};
use crate::spectral::{curl, divergence, outer_self, random_smooth_field, scalar_times, Grid, PeriodicField, Rank};
use crate::weak_form::WeakFormOracle;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Mikado(#[from] MikadoError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Gluing(#[from] GluingError),
}

#[derive(Clone, Debug)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub ledger: Ledger,
    pub seconds: f64,
}

impl SuiteOutcome {
    pub fn pass(&self) -> bool {
        self.ledger.all_pass()
    }
}

pub type Suite = fn(u64) -> Result<Ledger, VerifyError>;

/// Every suite with its name, in the order the CLI prints them.
pub const SUITES: [(&str, Suite); 6] = [
    ("operators", operator_identities),
    ("mikado", mikado_suite),
    ("solver", solver_suite),
    ("harness", harness_suite),
    ("appendix", appendix_suite),
    ("gluing", gluing_suite),
];

pub fn run_suite(name: &'static str, suite: Suite, seed: u64) -> Result<SuiteOutcome, VerifyError> {
    let start = Instant::now();
    let ledger = suite(seed)?;
    Ok(SuiteOutcome { name, ledger, seconds: start.elapsed().as_secs_f64() })
}

fn relative(err: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

fn unit_divergence_free(g: Grid, kmax: i64, decay: f64, seed: u64) -> Result<PeriodicField, SpectralError> {
    let u = leray(&random_smooth_field(g, Rank::Vector, kmax, decay, seed))?.without_mean();
    let s = u.sup_norm();
    Ok(u.scale(1.0 / s))
}

/// Least-squares slope of log y against log x.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Spectral multipliers: single modes, the semigroup law, the inverse
/// divergence and the Biot-Savart law.
pub fn operator_identities(seed: u64) -> Result<Ledger, VerifyError> {
    let g = Grid::two_thirds(16)?;
    let mut ledger = Ledger::default();

    let mut single: f64 = 0.0;
    for k in [[1i64, 0, 0], [0, 2, 1], [3, -1, 2], [-4, 4, 0], [5, 0, -5]] {
        let kf = k.map(|x| x as f64);
        let k2: f64 = kf.iter().map(|x| x * x).sum();
        let wave = PeriodicField::scalar_fn(g, |x| (kf[0] * x[0] + kf[1] * x[1] + kf[2] * x[2]).cos());
        for gamma in [0.1, 0.25, 0.5, 0.8, 1.0] {
            let got = fractional_laplacian(&wave, gamma);
            let err = got.sub(&wave.scale(k2.powf(gamma)))?.sup_norm();
            single = single.max(relative(err, k2.powf(gamma)));
        }
    }
    ledger.push(LedgerLine::le("fractional_laplacian.single_modes", single, 1e-12).hard());

    let f = random_smooth_field(g, Rank::Vector, 5, 1.0, seed);
    let mut semigroup: f64 = 0.0;
    for (a, b) in [(0.2, 0.3), (0.4, 0.6), (0.1, 0.85), (0.5, 0.5)] {
        let twice = fractional_laplacian(&fractional_laplacian(&f, a), b);
        let once = fractional_laplacian(&f, a + b);
        semigroup = semigroup.max(relative(twice.sub(&once)?.sup_norm(), once.sup_norm()));
    }
    ledger.push(LedgerLine::le("fractional_laplacian.semigroup", semigroup, 1e-12).hard());

    let (mut inverse, mut bs_curl, mut bs_div, mut projected): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for j in 0..5 {
        let f = random_smooth_field(g, Rank::Vector, 5, 1.0, seed.wrapping_add(1 + j)).without_mean();
        let r = inverse_divergence(&f)?.field;
        inverse = inverse.max(relative(divergence(&r)?.sub(&f)?.sup_norm(), f.sup_norm()));
        let p = leray(&f)?;
        projected = projected.max(relative(divergence(&p)?.sup_norm(), f.sup_norm()));
        let v = p.without_mean();
        let z = biot_savart(&v)?;
        bs_curl = bs_curl.max(relative(curl(&z)?.sub(&v)?.sup_norm(), v.sup_norm()));
        bs_div = bs_div.max(relative(divergence(&z)?.sup_norm(), z.sup_norm()));
    }
    ledger.push(LedgerLine::le("inverse_divergence.div_identity", inverse, 1e-10).hard());
    ledger.push(LedgerLine::le("leray.divergence", projected, 1e-12).hard());
    ledger.push(LedgerLine::le("biot_savart.curl_identity", bs_curl, 1e-10).hard());
    ledger.push(LedgerLine::le("biot_savart.divergence", bs_div, 1e-10).hard());
    Ok(ledger)
}

fn max_entry_diff(a: &Sym3, b: &Sym3) -> f64 {
    (0..9).map(|i| (a[i / 3][i % 3] - b[i / 3][i % 3]).abs()).fold(0.0, f64::max)
}

/// Mikado identities on 100 matrices of the ball B̄_{1/2}(Id), the
/// transversality a_k·k = 0 = C_k k and the |k|⁻⁴ decay constant.
pub fn mikado_suite(seed: u64) -> Result<Ledger, VerifyError> {
    let family = MikadoFamily::standard()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rs = vec![identity()];
    rs.extend((1..100).map(|_| sample_ball(&mut rng, 0.5)));

    // second moments of the pipes on a fine grid
    let fine = Grid::two_thirds(160)?;
    let gram = {
        let profiles = family.profile_values(fine);
        MikadoFamily::gram(&profiles)
    };
    let grid = Grid::two_thirds(48)?;
    let profiles = family.profile_values(grid);

    let (mut mean, mut div, mut div_outer, mut moment): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
    for r in &rs {
        let gamma = family.coefficients(r)?;
        moment = moment.max(max_entry_diff(&family.second_moment(&gamma, &gram), r));
        let w = family.assemble(&gamma, &profiles, grid)?;
        mean = mean.max(w.mean_norm());
        div = div.max(divergence(&w)?.sup_norm());
        div_outer = div_outer.max(divergence(&outer_self(&w)?)?.sup_norm());
    }
    let mut ledger = Ledger::default();
    ledger.push(LedgerLine::le("mikado.div_outer", div_outer, 1e-8).hard());
    ledger.push(LedgerLine::le("mikado.divergence", div, 1e-8).hard());
    ledger.push(LedgerLine::le("mikado.mean", mean, 1e-8).hard());
    ledger.push(LedgerLine::le("mikado.second_moment", moment, 1e-6).hard());

    let fd = family.fourier_data(16.0);
    let (mut ak, mut ck): (f64, f64) = (0.0, 0.0);
    for r in &rs {
        let gamma = family.coefficients(r)?;
        for mode in &fd.modes {
            let kf = mode.k.map(|x| x as f64);
            let a = fd.a_k(mode, &gamma);
            ak = ak.max((a[0] * kf[0] + a[1] * kf[1] + a[2] * kf[2]).norm());
            for row in fd.c_k(mode, &gamma) {
                ck = ck.max((row[0] * kf[0] + row[1] * kf[1] + row[2] * kf[2]).norm());
            }
        }
    }
    ledger.push(LedgerLine::le("mikado.a_k_dot_k", ak, 1e-10).hard());
    ledger.push(LedgerLine::le("mikado.c_k_times_k", ck, 1e-10).hard());
    let m_bar = fd.decay_constant(&family, &rs)?;
    let slope = fd.decay_exponent(&family, &rs)?;
    ledger.push(
        LedgerLine::lt("mikado.decay_constant", m_bar, f64::MAX)
            .hard()
            .note(format!("|a_k| |k|^4 <= M_bar for |k| <= {}; shell slope {slope:.2}", fd.k_max)),
    );
    let m = compute_m(m_bar, fd.k_max);
    ledger.push(LedgerLine::lt("mikado.m", m.m, f64::MAX).note("universal constant from M_bar and the lattice sum"));
    Ok(ledger)
}

fn taylor_green(g: Grid, amp: f64) -> PeriodicField {
    PeriodicField::vector_fn(g, |x| {
        [amp * x[0].sin() * x[1].cos() * x[2].cos(), -amp * x[0].cos() * x[1].sin() * x[2].cos(), 0.0]
    })
}

fn solver_config(dt: f64, horizon: f64) -> SolverConfig {
    SolverConfig { dt, horizon, horizon_constant: None, ..SolverConfig::default() }
}

/// Composite Simpson rule on an even number of intervals.
fn simpson(h: f64, f: &[f64]) -> f64 {
    let m = f.len() - 1;
    (0..=m)
        .map(|j| {
            let w = if j == 0 || j == m { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
            w * f[j]
        })
        .sum::<f64>()
        * h
        / 3.0
}

/// Shear closed form, the energy identity of a smooth solution and the
/// temporal order of the integrator.
pub fn solver_suite(_seed: u64) -> Result<Ledger, VerifyError> {
    let mut ledger = Ledger::default();

    let g = Grid::two_thirds(16)?;
    let u0 = PeriodicField::vector_fn(g, |x| [(2.0 * x[1]).sin(), 0.0, 0.0]);
    let (nu, gamma) = (0.2, 0.3);
    let s = solve_fns(&u0, nu, gamma, &SolverConfig { sample_interval: 0.25, ..solver_config(0.05, 1.0) })?;
    let mut shear: f64 = 0.0;
    for (t, v) in s.times.iter().zip(&s.velocity) {
        let exact = u0.scale((-nu * 4f64.powf(gamma) * t).exp());
        shear = shear.max(v.sub(&exact)?.sup_norm());
    }
    ledger.push(LedgerLine::le("solver.shear_closed_form", shear, 1e-8).hard());

    let g = Grid::two_thirds(32)?;
    let (nu, gamma, h) = (0.05, 0.3, 0.05);
    let s = solve_fns(&taylor_green(g, 1.0), nu, gamma, &SolverConfig { sample_interval: h, ..solver_config(0.025, 1.0) })?;
    let energy: Vec<f64> = s.velocity.iter().map(|v| 0.5 * v.mean_square()).collect();
    let rate: Vec<f64> = s.velocity.iter().map(|v| nu * fractional_laplacian(v, gamma / 2.0).mean_square()).collect();
    let m = energy.len() - 1;
    let defect = ((energy[0] - energy[m]) - simpson(h, &rate)).abs() / energy[0];
    ledger.push(LedgerLine::le("solver.energy_identity", defect, 1e-6).hard());

    let g = Grid::two_thirds(16)?;
    let u0 = taylor_green(g, 0.5);
    let run = |dt: f64| -> Result<PeriodicField, VerifyError> {
        let c = SolverConfig { cfl: 2.5, ..solver_config(dt, 1.0) };
        let mut it = FnsIntegrator::new(&u0, 0.1, 0.3, 0.0, &c)?;
        it.advance_to(1.0)?;
        Ok(it.velocity().clone())
    };
    let reference = run(0.01)?;
    let dts = [0.2, 0.1, 0.05];
    let errs = dts.iter().map(|&dt| Ok(run(dt)?.sub(&reference)?.sup_norm())).collect::<Result<Vec<f64>, VerifyError>>()?;
    let order = log_log_slope(&dts, &errs);
    ledger.push(LedgerLine::le("solver.order_deviation", (order - 4.0).abs(), 0.3).hard().note(format!("fitted order {order:.3}")));
    Ok(ledger)
}

/// Maximum principle and the transport estimates on 20 random cases, half of
/// them forced.
pub fn harness_suite(seed: u64) -> Result<Ledger, VerifyError> {
    let mut ledger = Ledger::default();
    for j in 0..20u64 {
        let case = HarnessCase::random(16, seed.wrapping_add(j), 0.4, j % 2 == 1)?;
        let report = stability_harness(&case)?;
        for mut line in report.ledger.lines {
            line.id = format!("case{j}.{}", line.id);
            line.hard = true;
            ledger.push(line);
        }
    }
    Ok(ledger)
}

/// Commutator scaling, stationary-phase decay and the Hölder product and
/// interpolation inequalities.
pub fn appendix_suite(seed: u64) -> Result<Ledger, VerifyError> {
    let mut ledger = Ledger::default();

    let g = Grid::two_thirds(64)?;
    let s = PeriodicField::scalar_fn(g, |x| x[0].sin());
    let ells = [0.8, 0.56, 0.4, 0.28, 0.2];
    let samples = commutator_probe(&s, &s, &ells)?;
    let norms: Vec<f64> = samples.iter().map(|c| c.norm).collect();
    let slope = log_log_slope(&ells, &norms);
    ledger.push(LedgerLine::ge("commutator.slope_low", slope, 1.8).hard());
    ledger.push(LedgerLine::le("commutator.slope_high", slope, 2.2).hard());
    let resolved = samples.iter().filter(|c| !c.under_resolved).count() as f64;
    ledger.push(LedgerLine::ge("commutator.resolved_scales", resolved, ells.len() as f64).hard());

    let g = Grid::two_thirds(96)?;
    let a = PeriodicField::scalar_fn(g, |x| 1.0 + 0.3 * (x[0] + x[1]).sin() + 0.2 * x[2].cos());
    let psi = PeriodicField::vector_fn(g, |x| {
        [0.3 * x[0].sin() * x[1].cos(), 0.2 * (x[1] + x[2]).sin(), 0.2 * x[0].cos()]
    });
    let ks: Vec<[i64; 3]> = [4, 8, 16, 32].iter().map(|&k| [k, 0, 0]).collect();
    let phase = stationary_phase_probe(&a, &psi, &ks, 0.5, &HolderOptions::coarse())?;
    let kn: Vec<f64> = ks.iter().map(|k| k[0] as f64).collect();
    let integrals: Vec<f64> = phase.iter().map(|p| p.integral.norm()).collect();
    let exponent = -log_log_slope(&kn, &integrals);
    ledger.push(LedgerLine::ge("stationary_phase.decay_exponent", exponent, 3.0).hard());

    let g = Grid::two_thirds(16)?;
    let opts = HolderOptions::default();
    let (mut product, mut interpolation): (f64, f64) = (0.0, 0.0);
    for j in 0..50u64 {
        let f = random_smooth_field(g, Rank::Scalar, 3, 1.0, seed.wrapping_add(2 * j));
        let h = random_smooth_field(g, Rank::Scalar, 3, 1.0, seed.wrapping_add(2 * j + 1));
        let fh = scalar_times(&f, &h)?;
        let r = 0.5;
        let lhs = holder_seminorm_with(&fh, r, &opts)?.value;
        let rhs = holder_seminorm_with(&f, r, &opts)?.value * h.sup_norm()
            + f.sup_norm() * holder_seminorm_with(&h, r, &opts)?.value;
        product = product.max(lhs / rhs);
        let (s, r) = (0.5, 1.0);
        let lhs = holder_seminorm_with(&f, s, &opts)?.value;
        let rhs = f.sup_norm().powf(1.0 - s / r) * holder_seminorm_with(&f, r, &opts)?.value.powf(s / r);
        interpolation = interpolation.max(lhs / rhs);
    }
    ledger.push(LedgerLine::le("holder.product_constant", product, 1.5).hard());
    ledger.push(LedgerLine::le("holder.interpolation_constant", interpolation, 1.5).hard());
    Ok(ledger)
}

/// Gluing of perturbed local solutions: the stress vanishes in the middle of
/// every quiet interval and the glued triple solves the equation weakly.
pub fn gluing_suite(seed: u64) -> Result<Ledger, VerifyError> {
    const NU: f64 = 0.05;
    const GAMMA: f64 = 0.4;
    const H: f64 = 0.01;
    let config = SolverConfig { dt: H, horizon: 1.0, horizon_constant: None, sample_interval: H, ..SolverConfig::default() };
    let g = Grid::two_thirds(24)?;
    let (tau, t_end) = (0.3, 0.9);
    let partition = TimePartition::new(tau, t_end)?;
    let reference = solve_fns(&unit_divergence_free(g, 3, 1.0, 11)?, NU, GAMMA, &config)?;
    let kick = unit_divergence_free(g, 4, 0.5, 12)?;
    let at = |t: f64| (t / H).round() as usize;
    let (refs, kick_ref) = (&reference, &kick);
    let mut gluer = Gluer::new(partition, NU, GAMMA, 0.1, &config, move |i, t| {
        Ok(refs.velocity[at(t)].axpy(0.05 * (i + 1) as f64, kick_ref)?)
    });
    let mut oracle = WeakFormOracle::new(g, 0.0, t_end, NU, GAMMA, 20, seed)?;
    for j in 0..=at(t_end) {
        let t = j as f64 * H;
        let s = gluer.sample(t, Some(&reference.velocity[j]))?;
        oracle.push(t, &s.v, &s.r)?;
    }
    let weak = oracle.finish();
    let d = gluer.diagnostics;
    let mut ledger = Ledger::default();
    ledger.push(LedgerLine::lt("gluing.mid_quiet_stress", d.mid_quiet_stress, 1e-6).hard());
    ledger.push(LedgerLine::lt("gluing.weak_residual", weak.max_relative, 1e-4).hard());
    ledger.push(LedgerLine::gt("gluing.stress_visible", d.max_stress, 1e-3).note("stress on the switch-over intervals"));
    ledger.push(LedgerLine::lt("gluing.trace", d.max_trace, 1e-10).hard());
    ledger.push(LedgerLine::lt("gluing.divergence", d.max_divergence, 1e-10).hard());
    Ok(ledger)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-2.5)).collect();
        assert!((log_log_slope(&x, &y) + 2.5).abs() < 1e-12);
    }

    #[test]
    fn simpson_is_exact_on_cubics() {
        let f: Vec<f64> = (0..=8).map(|j| (j as f64 * 0.25).powi(3)).collect();
        assert!((simpson(0.25, &f) - 4.0).abs() < 1e-14);
    }
}
