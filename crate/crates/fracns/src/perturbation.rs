//! Energy pumping and the oscillatory perturbation of one iteration step.
//!
//! Given the glued triple (v̄, p̄, R̊̄) and backward flows Φ_i of v̄, the step
//! adds w = (1/n) curl Σ_i ρ_i^{1/2} (∇Φ_i)ᵀ Σ_j Γ_j(R̃_i) S_j(nΦ_i), where
//! curl_ξ S_j is the j-th Mikado pipe, and collects everything that does not
//! cancel into R̊_{q+1} through the inverse divergence.

use crate::error::{MikadoError, PerturbationError};
use crate::gluing::{transition, transition_derivative};
use crate::mikado::{distance_to_identity, MikadoFamily, MikadoFourier, Sym3};
use crate::operators::{fractional_laplacian, inverse_divergence};
use crate::solver::FlowQuality;
use crate::spectral::{
    curl, divergence, jacobian_values, outer_self, sym_index, sym_outer, trace, Grid, PeriodicField, Rank, Space,
};
use crate::state::ReynoldsTriple;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Space-time cutoffs η_i(x, t).
///
/// η_i rises in J_i and falls in J_{i+1}. Inside J_{i+1} the hand-over from
/// η_i to η_{i+1} happens along the tilted surface t = t_{i+2} + σ sin x₁, with
/// a gap g between the supports and ramps of width r, so that at every time
/// some region of the torus carries a cutoff equal to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaCutoffs {
    pub tau: f64,
    pub t_end: f64,
    /// σ/τ
    pub tilt: f64,
    /// g/τ
    pub gap: f64,
    /// r/τ
    pub ramp: f64,
}

impl EtaCutoffs {
    pub fn new(tau: f64, t_end: f64) -> Result<Self, PerturbationError> {
        Self::with_shape(tau, t_end, 0.22, 0.02, 0.1)
    }

    pub fn with_shape(tau: f64, t_end: f64, tilt: f64, gap: f64, ramp: f64) -> Result<Self, PerturbationError> {
        let fits = gap > 0.0 && tilt > 0.5 * gap && ramp > 0.0 && tilt + 0.5 * gap + ramp <= 1.0 / 3.0 + 1e-12;
        if !(tau > 0.0 && t_end > 0.0) || !fits {
            return Err(PerturbationError::Cutoffs(format!(
                "τ = {tau}, T = {t_end}, tilt {tilt} + gap/2 {} + ramp {ramp} must not exceed 1/3",
                0.5 * gap
            )));
        }
        Ok(EtaCutoffs { tau, t_end, tilt, gap, ramp })
    }

    fn t(&self, i: usize) -> f64 {
        i as f64 * self.tau
    }

    /// Number of cutoffs whose support meets [0, T].
    pub fn count(&self) -> usize {
        let mut n = 1;
        while self.t(n + 1) - self.tau / 3.0 < self.t_end {
            n += 1;
        }
        n
    }

    /// Hand-over time between η_{i−1} and η_i at height x₁.
    fn split(&self, i: usize, x1: f64) -> f64 {
        self.t(i + 1) + self.tilt * self.tau * x1.sin()
    }

    /// η_i at (x₁, t); the cutoffs depend on x only through x₁.
    pub fn eta(&self, i: usize, x1: f64, t: f64) -> f64 {
        let (g, r) = (0.5 * self.gap * self.tau, self.ramp * self.tau);
        let mut v = 1.0;
        if i > 0 {
            v *= transition((t - self.split(i, x1) - g) / r);
        }
        if i + 1 < self.count() {
            v *= 1.0 - transition((t - (self.split(i + 1, x1) - g - r)) / r);
        }
        v
    }

    /// ∂_t η_i at (x₁, t).
    pub fn eta_dt(&self, i: usize, x1: f64, t: f64) -> f64 {
        let (g, r) = (0.5 * self.gap * self.tau, self.ramp * self.tau);
        let (mut up, mut dup) = (1.0, 0.0);
        if i > 0 {
            let s = (t - self.split(i, x1) - g) / r;
            up = transition(s);
            dup = transition_derivative(s) / r;
        }
        let (mut down, mut ddown) = (1.0, 0.0);
        if i + 1 < self.count() {
            let s = (t - (self.split(i + 1, x1) - g - r)) / r;
            down = 1.0 - transition(s);
            ddown = -transition_derivative(s) / r;
        }
        dup * down + up * ddown
    }

    /// Open time window outside of which η_i vanishes identically.
    pub fn support(&self, i: usize) -> (f64, f64) {
        let shift = (self.tilt - 0.5 * self.gap) * self.tau;
        let a = if i == 0 { f64::NEG_INFINITY } else { self.t(i + 1) - shift };
        let b = if i + 1 < self.count() { self.t(i + 2) + shift } else { f64::INFINITY };
        (a, b)
    }

    /// Indices whose η is not identically zero at time t.
    pub fn active(&self, t: f64) -> Vec<usize> {
        self.active_within(t, 0.0)
    }

    /// Indices whose η is not identically zero somewhere in (t − margin, t + margin).
    pub fn active_within(&self, t: f64, margin: f64) -> Vec<usize> {
        (0..self.count())
            .filter(|&i| {
                let (a, b) = self.support(i);
                t > a - margin && t < b + margin
            })
            .collect()
    }

    /// η_i on the grid.
    pub fn values(&self, i: usize, grid: Grid, t: f64) -> Vec<f64> {
        let row: Vec<f64> = (0..grid.n()).map(|a| self.eta(i, grid.point(grid.index(a, 0, 0))[0], t)).collect();
        (0..grid.len()).map(|p| row[grid.unindex(p)[0]]).collect()
    }

    /// η_i and ∂_tη_i along the grid's x₁ axis.
    fn rows(&self, i: usize, grid: Grid, t: f64) -> (Vec<f64>, Vec<f64>) {
        (0..grid.n())
            .map(|a| {
                let x1 = grid.point(grid.index(a, 0, 0))[0];
                (self.eta(i, x1, t), self.eta_dt(i, x1, t))
            })
            .unzip()
    }

    /// c_i = η_i/(Σ_j⨍η_j²)^{1/2} and its time derivative along the x₁ axis, for each i.
    pub fn coefficient_rows(&self, grid: Grid, t: f64, indices: &[usize]) -> Vec<(Vec<f64>, Vec<f64>)> {
        let n = grid.n() as f64;
        let mut mass = 0.0;
        let mut dmass = 0.0;
        for i in 0..self.count() {
            let (a, b) = self.support(i);
            if t <= a || t >= b {
                continue;
            }
            let (e, de) = self.rows(i, grid, t);
            mass += e.iter().map(|x| x * x).sum::<f64>() / n;
            dmass += e.iter().zip(&de).map(|(x, d)| 2.0 * x * d).sum::<f64>() / n;
        }
        indices
            .iter()
            .map(|&i| {
                let (e, de) = self.rows(i, grid, t);
                let c = e.iter().map(|x| x / mass.sqrt()).collect();
                let dc = e
                    .iter()
                    .zip(&de)
                    .map(|(x, d)| d / mass.sqrt() - 0.5 * x * dmass / mass.powf(1.5))
                    .collect();
                (c, dc)
            })
            .collect()
    }

    /// Σ_i ⨍η_i²(·, t), the grid average being exact for the x₁ profile.
    pub fn mass(&self, grid: Grid, t: f64) -> f64 {
        let n = grid.n();
        (0..self.count())
            .map(|i| (0..n).map(|a| self.eta(i, grid.point(grid.index(a, 0, 0))[0], t).powi(2)).sum::<f64>() / n as f64)
            .sum()
    }

    /// Smallest Σ_i ⨍η_i² over `samples` uniformly spaced times in [0, T].
    pub fn c0(&self, grid: Grid, samples: usize) -> f64 {
        (0..=samples)
            .map(|j| self.mass(grid, self.t_end * j as f64 / samples as f64))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerturbationConfig {
    /// Mikado modes kept, |k| ≤ k_max; `None` takes the largest value whose
    /// oscillation n|k|(1 + margin) stays inside the dealiased band.
    pub k_max: Option<f64>,
    pub margin: f64,
    /// Measure ‖b_{i,k}‖₀ at every call.
    pub coefficient_norms: bool,
    /// Cutoff shape in units of τ: amplitude of the x₁-dependent hand-over shift,
    /// width of the gap between consecutive cutoffs and width of each ramp.
    pub eta_tilt: f64,
    pub eta_gap: f64,
    pub eta_ramp: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            k_max: None,
            margin: 0.1,
            coefficient_norms: true,
            eta_tilt: 0.22,
            eta_gap: 0.02,
            eta_ramp: 0.1,
        }
    }
}

impl PerturbationConfig {
    pub fn cutoffs(&self, tau: f64, t_end: f64) -> Result<EtaCutoffs, PerturbationError> {
        EtaCutoffs::with_shape(tau, t_end, self.eta_tilt, self.eta_gap, self.eta_ramp)
    }

    pub fn resolve_k_max(&self, grid: Grid, freq: u64) -> f64 {
        self.k_max.unwrap_or(grid.cutoff() as f64 / (freq as f64 * (1.0 + self.margin)))
    }
}

struct Term {
    j: usize,
    coefficient: Complex64,
    /// û_j
    direction: [f64; 3],
    /// (k × û_j)/|k|²
    potential: [f64; 3],
}

struct HalfMode {
    k: [i64; 3],
    k4: f64,
    terms: Vec<Term>,
}

/// Diagnostics of one perturbation evaluation; maxima run over active i and grid points.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct PumpStats {
    pub max_ball_distance: f64,
    /// max_i ‖ρ_i‖₀
    pub max_rho_i: f64,
    /// max Frobenius norm of ∇Φ_i − Id on supp η_i
    pub max_flow_deviation: f64,
    /// max_{i,k} |k|⁴ ‖b_{i,k}‖₀, when measured
    pub max_scaled_coefficient: f64,
    /// max of n|k|‖∇Φ_i‖ over the retained modes
    pub max_local_frequency: f64,
}

impl PumpStats {
    pub fn merge(self, o: PumpStats) -> PumpStats {
        PumpStats {
            max_ball_distance: self.max_ball_distance.max(o.max_ball_distance),
            max_rho_i: self.max_rho_i.max(o.max_rho_i),
            max_flow_deviation: self.max_flow_deviation.max(o.max_flow_deviation),
            max_scaled_coefficient: self.max_scaled_coefficient.max(o.max_scaled_coefficient),
            max_local_frequency: self.max_local_frequency.max(o.max_local_frequency),
        }
    }
}

/// Inputs of one perturbation evaluation at time t.
pub struct PumpInput<'a> {
    pub t: f64,
    /// Glued stress R̊̄(t).
    pub stress: &'a PeriodicField,
    /// ⨍|v̄(t)|²
    pub glued_energy: f64,
    /// e(t)
    pub target_energy: f64,
    /// (i, Φ_i − id) for every i with η_i(·, t) ≢ 0.
    pub flows: Vec<(usize, &'a PeriodicField)>,
}

/// Potential of one cutoff index split as c_i(x₁, t) F_i(x, t): the cutoff
/// coefficient c_i = η_i/(Σ_j⨍η_j²)^{1/2} varies on the ramp scale and is known
/// in closed form, F_i = ρ_q^{1/2}(∇Φ_i)ᵀΣ_jΓ_j(R̃_i)S_j(nΦ_i) varies slowly.
#[derive(Clone, Debug)]
pub struct PotentialPart {
    pub i: usize,
    /// F_i as grid values, one vector per component.
    pub slow: Vec<Vec<f64>>,
    /// c_i along the x₁ axis.
    pub c: Vec<f64>,
    /// ∂_t c_i along the x₁ axis.
    pub dc: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct PerturbationSample {
    pub t: f64,
    pub rho_q: f64,
    /// Σ_j ⨍η_j²
    pub mass: f64,
    /// w_{q+1} in mode space.
    pub w: PeriodicField,
    /// Σ_i ρ_i as values.
    pub rho_sum: Vec<f64>,
    /// Σ_i η_i² as values.
    pub eta_sq_sum: Vec<f64>,
    pub stats: PumpStats,
    pub parts: Vec<PotentialPart>,
}

/// Everything that stays fixed during one step: Mikado data, frequency, cutoffs.
pub struct Perturber {
    pub family: MikadoFamily,
    pub fourier: MikadoFourier,
    pub freq: u64,
    pub k_max: f64,
    pub eta: EtaCutoffs,
    /// δ_{q+2}
    pub delta_next2: f64,
    grid: Grid,
    config: PerturbationConfig,
    half: Vec<HalfMode>,
    k_bound: i64,
}

impl Perturber {
    pub fn new(
        family: MikadoFamily,
        grid: Grid,
        freq: u64,
        eta: EtaCutoffs,
        delta_next2: f64,
        config: &PerturbationConfig,
    ) -> Result<Self, PerturbationError> {
        let k_max = config.resolve_k_max(grid, freq);
        if k_max < 1.0 {
            return Err(PerturbationError::Nyquist {
                freq: freq as f64 * (1.0 + config.margin),
                nyquist: grid.cutoff() as f64,
            });
        }
        let fourier = family.fourier_data(k_max);
        let mut half = Vec::new();
        for m in &fourier.modes {
            if m.k <= [0, 0, 0] {
                continue;
            }
            let kf = m.k.map(|x| x as f64);
            let k2 = kf[0] * kf[0] + kf[1] * kf[1] + kf[2] * kf[2];
            let terms = m
                .terms
                .iter()
                .map(|&(j, c, _)| {
                    let u = family.unit_direction(j);
                    let cross = [kf[1] * u[2] - kf[2] * u[1], kf[2] * u[0] - kf[0] * u[2], kf[0] * u[1] - kf[1] * u[0]];
                    Term { j, coefficient: c, direction: u, potential: cross.map(|x| x / k2) }
                })
                .collect();
            half.push(HalfMode { k: m.k, k4: k2 * k2, terms });
        }
        let k_bound = k_max.floor() as i64;
        Ok(Perturber { family, fourier, freq, k_max, eta, delta_next2, grid, config: config.clone(), half, k_bound })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// ρ_q(t) = (e − δ_{q+2}/2 − ⨍|v̄|²)/3.
    pub fn rho_q(&self, target_energy: f64, glued_energy: f64) -> f64 {
        (target_energy - 0.5 * self.delta_next2 - glued_energy) / 3.0
    }

    /// Conjugated stress R̃ = ∇Φ(Id − (mass/ρ_q) R̊̄)∇Φᵀ at one point, which equals
    /// ∇Φ R_{q,i} ∇Φᵀ/ρ_{q,i} wherever η_i ≠ 0.
    pub fn conjugated_stress(gradient: &[[f64; 3]; 3], stress: &Sym3, scale: f64) -> Sym3 {
        let mut m = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] = if a == b { 1.0 } else { 0.0 } - scale * stress[a][b];
            }
        }
        let mut gm = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                gm[a][b] = (0..3).map(|c| gradient[a][c] * m[c][b]).sum();
            }
        }
        let mut out = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                out[a][b] = (0..3).map(|c| gm[a][c] * gradient[b][c]).sum();
            }
        }
        out
    }

    /// Potential of w (before the curl) and, optionally, the principal part w_o,
    /// for one cutoff index at one time.
    fn potential(
        &self,
        input: &PumpInput,
        psi: &PeriodicField,
        stress: &[Vec<f64>],
        rho_q: f64,
        mass: f64,
        c_row: &[f64],
        principal: bool,
    ) -> Result<(Vec<Vec<f64>>, Option<Vec<Vec<f64>>>, Vec<f64>, PumpStats), PerturbationError> {
        let g = self.grid;
        let jac = jacobian_values(psi)?;
        let disp = psi.values_real();
        let n = self.freq as f64;
        let kb = self.k_bound as usize;
        let root = rho_q.sqrt();
        let scale = mass / rho_q;
        let mut pot = vec![vec![0.0; g.len()]; 3];
        let mut prin = principal.then(|| vec![vec![0.0; g.len()]; 3]);
        let mut rho = vec![0.0; g.len()];
        let mut stats = PumpStats::default();
        let mut powers = vec![[Complex64::new(0.0, 0.0); 3]; 2 * kb + 1];
        let max_k = self.half.iter().map(|m| m.k4.sqrt().sqrt()).fold(0.0, f64::max);
        // F_i is needed wherever a neighbouring sample has η_i ≠ 0, so it is formed at every point
        for p in 0..g.len() {
            let mut grad = [[0.0; 3]; 3];
            let mut dev = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    grad[a][b] = jac[a][b][p] + if a == b { 1.0 } else { 0.0 };
                    dev += jac[a][b][p] * jac[a][b][p];
                }
            }
            let dev = dev.sqrt();
            let local = n * max_k * (1.0 + dev);
            stats.max_flow_deviation = stats.max_flow_deviation.max(dev);
            stats.max_local_frequency = stats.max_local_frequency.max(local);
            if local > g.nyquist() as f64 {
                return Err(PerturbationError::Nyquist { freq: local, nyquist: g.nyquist() as f64 });
            }
            let mut r = [[0.0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    r[a][b] = stress[sym_index(a, b)][p];
                }
            }
            let rt = Self::conjugated_stress(&grad, &r, scale);
            let dist = distance_to_identity(&rt);
            stats.max_ball_distance = stats.max_ball_distance.max(dist);
            let gamma = match self.family.coefficients(&rt) {
                Ok(gm) => gm,
                Err(MikadoError::OutsideBall(d)) => {
                    return Err(PerturbationError::OutsideBall { t: input.t, point: g.unindex(p), distance: d })
                }
                Err(e) => return Err(e.into()),
            };
            let amp = c_row[g.unindex(p)[0]] * root;
            rho[p] = amp * amp;
            stats.max_rho_i = stats.max_rho_i.max(rho[p]);
            let x = g.point(p);
            for a in 0..3 {
                let base = Complex64::from_polar(1.0, n * (x[a] + disp[a][p]));
                let inv = base.conj();
                powers[kb][a] = Complex64::new(1.0, 0.0);
                for m in 1..=kb {
                    powers[kb + m][a] = powers[kb + m - 1][a] * base;
                    powers[kb - m][a] = powers[kb - m + 1][a] * inv;
                }
            }
            let mut s = [0.0; 3];
            let mut wv = [0.0; 3];
            for mode in &self.half {
                let k = mode.k;
                let phase = powers[(k[0] + self.k_bound) as usize][0]
                    * powers[(k[1] + self.k_bound) as usize][1]
                    * powers[(k[2] + self.k_bound) as usize][2];
                let mut b_k = [Complex64::new(0.0, 0.0); 3];
                for term in &mode.terms {
                    let z = term.coefficient * phase * gamma[term.j];
                    // 2 Re(i z) for the potential, 2 Re(z) for the pipe itself
                    let re_iz = -2.0 * z.im;
                    for c in 0..3 {
                        s[c] += re_iz * term.potential[c];
                    }
                    if prin.is_some() {
                        for c in 0..3 {
                            wv[c] += 2.0 * z.re * term.direction[c];
                        }
                    }
                    if self.config.coefficient_norms {
                        for c in 0..3 {
                            b_k[c] += term.coefficient * (gamma[term.j] * term.direction[c]);
                        }
                    }
                }
                if self.config.coefficient_norms {
                    let norm = b_k.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() * amp;
                    stats.max_scaled_coefficient = stats.max_scaled_coefficient.max(norm * mode.k4);
                }
            }
            for c in 0..3 {
                pot[c][p] = root * (0..3).map(|a| grad[a][c] * s[a]).sum::<f64>();
            }
            if let Some(pr) = prin.as_mut() {
                let inv = inverse3(&grad);
                for c in 0..3 {
                    pr[c][p] = amp * (0..3).map(|a| inv[c][a] * wv[a]).sum::<f64>();
                }
            }
        }
        Ok((pot, prin, rho, stats))
    }

    fn prepare(&self, input: &PumpInput) -> Result<(f64, f64, Vec<Vec<f64>>), PerturbationError> {
        let rho_q = self.rho_q(input.target_energy, input.glued_energy);
        if !(rho_q > 0.0) {
            return Err(PerturbationError::EnergyGap {
                t: input.t,
                gap: input.target_energy - input.glued_energy,
                need: 0.5 * self.delta_next2,
            });
        }
        let mass = self.eta.mass(self.grid, input.t);
        Ok((rho_q, mass, input.stress.values_real()))
    }

    /// w_{q+1}(t) together with Σρ_i, Ση_i² and the pointwise diagnostics.
    pub fn perturb(&self, input: &PumpInput) -> Result<PerturbationSample, PerturbationError> {
        let (w, _, sample) = self.evaluate(input, false)?;
        Ok(PerturbationSample { w, ..sample })
    }

    /// Like [`Perturber::perturb`], also returning the principal part w_o as values.
    pub fn perturb_with_principal(
        &self,
        input: &PumpInput,
    ) -> Result<(PerturbationSample, PeriodicField), PerturbationError> {
        let (w, prin, sample) = self.evaluate(input, true)?;
        Ok((PerturbationSample { w, ..sample }, prin.expect("principal part requested")))
    }

    fn evaluate(
        &self,
        input: &PumpInput,
        principal: bool,
    ) -> Result<(PeriodicField, Option<PeriodicField>, PerturbationSample), PerturbationError> {
        let g = self.grid;
        let (rho_q, mass, stress) = self.prepare(input)?;
        let mut pot = vec![vec![0.0; g.len()]; 3];
        let mut prin = principal.then(|| vec![vec![0.0; g.len()]; 3]);
        let mut rho_sum = vec![0.0; g.len()];
        let mut eta_sq_sum = vec![0.0; g.len()];
        let mut stats = PumpStats::default();
        let indices: Vec<usize> = input.flows.iter().map(|(i, _)| *i).collect();
        let rows = self.eta.coefficient_rows(g, input.t, &indices);
        let mut parts = Vec::with_capacity(indices.len());
        for (&(i, psi), (c_row, dc_row)) in input.flows.iter().zip(rows) {
            let eta = self.eta.values(i, g, input.t);
            for (s, e) in eta_sq_sum.iter_mut().zip(&eta) {
                *s += e * e;
            }
            let (slow, wi, rho, st) = self.potential(input, psi, &stress, rho_q, mass, &c_row, principal)?;
            stats = stats.merge(st);
            for c in 0..3 {
                for (p, (a, b)) in pot[c].iter_mut().zip(&slow[c]).enumerate() {
                    *a += c_row[g.unindex(p)[0]] * b;
                }
            }
            if let (Some(acc), Some(wi)) = (prin.as_mut(), wi) {
                for c in 0..3 {
                    for (a, b) in acc[c].iter_mut().zip(&wi[c]) {
                        *a += b;
                    }
                }
            }
            for (a, b) in rho_sum.iter_mut().zip(&rho) {
                *a += b;
            }
            parts.push(PotentialPart { i, slow, c: c_row, dc: dc_row });
        }
        let potential = PeriodicField::from_real_values(g, Rank::Vector, pot)?;
        let w = curl(&potential)?.scale(1.0 / self.freq as f64).dealiased();
        let principal = match prin {
            Some(p) => Some(PeriodicField::from_real_values(g, Rank::Vector, p)?),
            None => None,
        };
        let sample = PerturbationSample {
            t: input.t,
            rho_q,
            mass,
            w: PeriodicField::zeros(g, Rank::Vector, Space::Modes),
            rho_sum,
            eta_sq_sum,
            stats,
            parts,
        };
        Ok((w, principal, sample))
    }

    /// ∂_t w at window position `at` of five equally spaced samples:
    /// (1/n) curl Σ_i (∂_t c_i F_i + c_i ∂_t F_i), with ∂_t c_i exact and ∂_t F_i
    /// from the fourth-order stencil.
    pub fn time_derivative(
        &self,
        window: [&PerturbationSample; 5],
        at: usize,
        h: f64,
    ) -> Result<PeriodicField, PerturbationError> {
        let g = self.grid;
        let w = STENCILS[at];
        let centre = window[at];
        let mut acc = vec![vec![0.0; g.len()]; 3];
        for part in &centre.parts {
            if part.c.iter().chain(&part.dc).all(|x| *x == 0.0) {
                continue;
            }
            let mut slow: [&Vec<Vec<f64>>; 5] = [&part.slow; 5];
            for (m, sample) in window.iter().enumerate() {
                slow[m] = &sample
                    .parts
                    .iter()
                    .find(|q| q.i == part.i)
                    .ok_or_else(|| {
                        PerturbationError::Cutoffs(format!(
                            "cutoff {} is live at t = {} but its flow is missing at t = {}",
                            part.i, centre.t, sample.t
                        ))
                    })?
                    .slow;
            }
            for c in 0..3 {
                for p in 0..g.len() {
                    let row = g.unindex(p)[0];
                    let mut d = 0.0;
                    for m in 0..5 {
                        d += w[m] * slow[m][c][p];
                    }
                    acc[c][p] += part.dc[row] * part.slow[c][p] + part.c[row] * d / (12.0 * h);
                }
            }
        }
        let potential = PeriodicField::from_real_values(g, Rank::Vector, acc)?;
        Ok(curl(&potential)?.scale(1.0 / self.freq as f64).dealiased())
    }

    /// Corrector w_c = (1/n) Σ_{i,k} curl(ρ_i^{1/2}(∇Φ_i)ᵀ(ik × a_k(R̃_i))/|k|²) e^{ink·Φ_i},
    /// assembled mode by mode with spectral derivatives of the coefficient fields.
    /// Costly; meant for checking w = w_o + w_c on small grids.
    pub fn corrector(&self, input: &PumpInput) -> Result<PeriodicField, PerturbationError> {
        let g = self.grid;
        let (rho_q, mass, stress) = self.prepare(input)?;
        let n = self.freq as f64;
        let mut acc = vec![vec![Complex64::new(0.0, 0.0); g.len()]; 3];
        for &(i, psi) in &input.flows {
            let eta = self.eta.values(i, g, input.t);
            let jac = jacobian_values(psi)?;
            let disp = psi.values_real();
            let mut gammas = vec![[0.0; 9]; g.len()];
            let mut grads = vec![[[0.0; 3]; 3]; g.len()];
            for p in 0..g.len() {
                for a in 0..3 {
                    for b in 0..3 {
                        grads[p][a][b] = jac[a][b][p] + if a == b { 1.0 } else { 0.0 };
                    }
                }
                let mut r = [[0.0; 3]; 3];
                for a in 0..3 {
                    for b in 0..3 {
                        r[a][b] = stress[sym_index(a, b)][p];
                    }
                }
                let rt = Self::conjugated_stress(&grads[p], &r, mass / rho_q);
                gammas[p] = self.family.coefficients(&rt)?;
            }
            for mode in &self.fourier.modes {
                let kf = mode.k.map(|x| x as f64);
                let k2 = kf[0] * kf[0] + kf[1] * kf[1] + kf[2] * kf[2];
                let mut coef = vec![vec![Complex64::new(0.0, 0.0); g.len()]; 3];
                for p in 0..g.len() {
                    let a = self.fourier.a_k(mode, &gammas[p]);
                    let cross = [
                        kf[1] * a[2] - kf[2] * a[1],
                        kf[2] * a[0] - kf[0] * a[2],
                        kf[0] * a[1] - kf[1] * a[0],
                    ];
                    let amp = eta[p] * (rho_q / mass).sqrt();
                    for c in 0..3 {
                        let v: Complex64 = (0..3).map(|b| cross[b] * grads[p][b][c]).sum();
                        coef[c][p] = Complex64::new(0.0, amp / k2) * v;
                    }
                }
                let field = PeriodicField::from_complex(g, Rank::Vector, Space::Values, false, coef)?;
                let cv = curl(&field)?.to_values();
                for p in 0..g.len() {
                    let x = g.point(p);
                    let arg: f64 = (0..3).map(|c| kf[c] * (x[c] + disp[c][p])).sum::<f64>() * n;
                    let ph = Complex64::from_polar(1.0, arg);
                    for c in 0..3 {
                        acc[c][p] += cv.comp(c)[p] * ph / n;
                    }
                }
            }
        }
        let real = acc.into_iter().map(|c| c.into_iter().map(|z| z.re).collect()).collect();
        Ok(PeriodicField::from_real_values(g, Rank::Vector, real)?)
    }
}

fn inverse3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let det = crate::solver::det3(m);
    let c = |a: usize, b: usize| {
        let (r0, r1) = ((a + 1) % 3, (a + 2) % 3);
        let (c0, c1) = ((b + 1) % 3, (b + 2) % 3);
        m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
    };
    let mut out = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            out[a][b] = c(b, a) / det;
        }
    }
    out
}

/// Weights (times 12h) of the fourth-order first derivative at each of five samples.
const STENCILS: [[f64; 5]; 5] = [
    [-25.0, 48.0, -36.0, 16.0, -3.0],
    [-3.0, -10.0, 18.0, -6.0, 1.0],
    [1.0, -8.0, 0.0, 8.0, -1.0],
    [-1.0, 6.0, -18.0, 10.0, 3.0],
    [3.0, -16.0, 36.0, -48.0, 25.0],
];

/// Fourth-order derivative at position `at` (0..5) of five equally spaced samples.
pub fn five_point_derivative(samples: [&PeriodicField; 5], at: usize, h: f64) -> Result<PeriodicField, PerturbationError> {
    let w = STENCILS[at];
    let mut out = samples[0].to_modes().scale(w[0] / (12.0 * h));
    for a in 1..5 {
        if w[a] != 0.0 {
            out = out.axpy(w[a] / (12.0 * h), &samples[a].to_modes())?;
        }
    }
    Ok(out)
}

/// Glued triple at one time, as consumed by the assembly.
pub struct GluedSlice<'a> {
    pub v: &'a PeriodicField,
    pub p: &'a PeriodicField,
    pub r: &'a PeriodicField,
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct AssemblyStats {
    pub divergence: f64,
    pub trace_before_correction: f64,
    pub trace: f64,
    pub stress: f64,
    /// ‖ν R(−Δ)^γ w‖₀
    pub dissipative_stress: f64,
    pub removed_mean: f64,
}

/// New triple (v̄ + w, p̄ − Σρ_i + ρ_q, R̊^E + R̊^D) at one time.
///
/// R̊^E = R(∂t w + div(w⊗v̄ + v̄⊗w + w⊗w − R̄)) with R̄ = (Σρ_i)Id − (Ση_i²)R̊̄,
/// R̊^D = νR((−Δ)^γ w). Any trace left by R is moved into the pressure.
pub fn assemble_next(
    t: f64,
    glued: &GluedSlice,
    sample: &PerturbationSample,
    dw: &PeriodicField,
    nu: f64,
    gamma: f64,
) -> Result<(ReynoldsTriple, AssemblyStats), PerturbationError> {
    let g = glued.v.grid();
    let w = &sample.w;
    let mut m = sym_outer(w, glued.v)?.scale(2.0).add(&outer_self(w)?)?.into_values();
    {
        let rbar = glued.r.values_real();
        let comps = m.comps_mut();
        for (slot, &(a, b)) in crate::spectral::SYM_PAIRS.iter().enumerate() {
            for p in 0..g.len() {
                let mut rb = -sample.eta_sq_sum[p] * rbar[slot][p];
                if a == b {
                    rb += sample.rho_sum[p];
                }
                comps[slot][p].re -= rb;
            }
        }
    }
    let dissipative = fractional_laplacian(w, gamma).scale(nu);
    let f = dw.to_modes().add(&divergence(&m)?)?.add(&dissipative)?;
    let inv = inverse_divergence(&f)?;
    let mut r = inv.field.into_modes();
    let tr = trace(&r)?;
    let trace_before = tr.sup_norm();
    let third = tr.scale(1.0 / 3.0).to_modes();
    {
        let comps = r.comps_mut();
        for a in 0..3 {
            for (z, d) in comps[sym_index(a, a)].iter_mut().zip(third.comp(0)) {
                *z -= d;
            }
        }
    }
    let mut pressure = glued.p.to_values();
    {
        let comp = &mut pressure.comps_mut()[0];
        for p in 0..g.len() {
            comp[p].re += sample.rho_q - sample.rho_sum[p];
        }
    }
    let pressure = pressure.into_modes().axpy(-1.0, &third)?;
    let v = glued.v.to_modes().add(w)?;
    let stats = AssemblyStats {
        divergence: divergence(&v)?.sup_norm(),
        trace_before_correction: trace_before,
        trace: trace(&r)?.sup_norm(),
        stress: r.sup_norm(),
        dissipative_stress: crate::operators::inverse_divergence_unchecked(&dissipative).sup_norm(),
        removed_mean: inv.removed_mean,
    };
    Ok((ReynoldsTriple { t, v, p: pressure, r }, stats))
}

/// Worst flow quality over the given displacements.
pub fn flow_quality(flows: &[(usize, &PeriodicField)]) -> Result<FlowQuality, PerturbationError> {
    let mut q = FlowQuality { min_det: f64::INFINITY, det_defect: 0.0, gradient_deviation: 0.0 };
    for (_, psi) in flows {
        q = q.merge(FlowQuality::of(psi)?);
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eta_properties() {
        let e = EtaCutoffs::new(0.5, 2.3).unwrap();
        let g = Grid::two_thirds(16).unwrap();
        for j in 0..=460 {
            let t = j as f64 * 0.005;
            for x in 0..32 {
                let x1 = x as f64 * std::f64::consts::PI / 16.0;
                let vals: Vec<f64> = (0..e.count()).map(|i| e.eta(i, x1, t)).collect();
                assert!(vals.iter().all(|v| (0.0..=1.0).contains(v)));
                assert!(vals.iter().filter(|v| **v > 0.0).count() <= 1, "overlap at t = {t}");
            }
        }
        // η_i = 1 on I_i = [t_{i+1} + τ/3, t_{i+1} + 2τ/3]
        for i in 0..e.count() {
            for j in 0..=10 {
                let t = (i + 1) as f64 * 0.5 + 0.5 / 3.0 + j as f64 * 0.5 / 30.0;
                if t <= 2.3 {
                    assert_eq!(e.eta(i, 0.7, t), 1.0);
                }
            }
        }
        assert!(e.c0(g, 2000) > 0.1);
    }

    #[test]
    fn stencils_are_exact_on_quartics() {
        let g = Grid::two_thirds(8).unwrap();
        let base = PeriodicField::scalar_fn(g, |x| x[0].sin());
        let f = |t: f64| 1.0 + t - 2.0 * t * t + 0.5 * t.powi(3) - 0.25 * t.powi(4);
        let df = |t: f64| 1.0 - 4.0 * t + 1.5 * t * t - t.powi(3);
        let h = 0.1;
        let s: Vec<PeriodicField> = (0..5).map(|j| base.scale(f(0.3 + j as f64 * h))).collect();
        for at in 0..5 {
            let d = five_point_derivative([&s[0], &s[1], &s[2], &s[3], &s[4]], at, h).unwrap();
            let exact = base.scale(df(0.3 + at as f64 * h));
            assert!(d.sub(&exact).unwrap().sup_norm() < 1e-12, "{at}");
        }
    }

    #[test]
    fn inverse_of_shear() {
        let m = [[1.0, 0.3, 0.0], [0.0, 1.0, 0.0], [-0.2, 0.0, 1.0]];
        let inv = inverse3(&m);
        for a in 0..3 {
            for b in 0..3 {
                let v: f64 = (0..3).map(|c| m[a][c] * inv[c][b]).sum();
                assert!((v - if a == b { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
        }
    }
}
