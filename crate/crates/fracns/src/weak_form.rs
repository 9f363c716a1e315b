//! Distributional residual of a Navier-Stokes-Reynolds triple.
//!
//! For divergence-free test fields φ = θ(t)ψ(x) the pressure drops out and
//! ∫∫ −v·ψ θ' − (v⊗v):∇ψ θ + ν v·(−Δ)^γψ θ + R̊:∇ψ θ = 0.
//! Only the low modes of v, v⊗v and R̊ meet ψ, so each sample is reduced to
//! those modes on arrival and the time integrals are done at the end.

use crate::error::SpectralError;
use crate::gluing::transition;
use crate::operators::leray;
use crate::spectral::{outer_self, random_smooth_field, sym_index, Grid, PeriodicField, Rank};
use num_complex::Complex64;
use serde::Serialize;

/// Largest |k|∞ of the test fields.
pub const TEST_MODES: i64 = 4;

struct TestField {
    psi: Vec<[Complex64; 3]>,
    start: f64,
    end: f64,
}

impl TestField {
    /// Smooth bump in time on [start, end] and its derivative.
    fn theta(&self, t: f64) -> (f64, f64) {
        let w = self.end - self.start;
        let s = (t - self.start) / w;
        if s <= 0.0 || s >= 1.0 {
            return (0.0, 0.0);
        }
        let up = transition(2.0 * s);
        let down = transition(2.0 * (1.0 - s));
        let dup = crate::gluing::transition_derivative(2.0 * s) * 2.0 / w;
        let ddown = -crate::gluing::transition_derivative(2.0 * (1.0 - s)) * 2.0 / w;
        (up * down, dup * down + up * ddown)
    }
}

#[derive(Clone)]
struct Reduced {
    t: f64,
    v: Vec<[Complex64; 3]>,
    vv: Vec<[Complex64; 6]>,
    r: Vec<[Complex64; 6]>,
}

#[derive(Clone, Debug, Serialize)]
pub struct WeakFormReport {
    /// max over test fields of |Σ terms| / Σ|terms|, each term integrated in time first
    pub max_relative: f64,
    pub per_field: Vec<f64>,
    pub samples: usize,
}

pub struct WeakFormOracle {
    nu: f64,
    gamma: f64,
    modes: Vec<[i64; 3]>,
    fields: Vec<TestField>,
    samples: Vec<Reduced>,
}

impl WeakFormOracle {
    /// `count` random test fields with time bumps on the middle 80% of [t0, t1].
    pub fn new(grid: Grid, t0: f64, t1: f64, nu: f64, gamma: f64, count: usize, seed: u64) -> Result<Self, SpectralError> {
        let mut modes = Vec::new();
        for a in -TEST_MODES..=TEST_MODES {
            for b in -TEST_MODES..=TEST_MODES {
                for c in -TEST_MODES..=TEST_MODES {
                    modes.push([a, b, c]);
                }
            }
        }
        let span = t1 - t0;
        let mut fields = Vec::with_capacity(count);
        for m in 0..count {
            let psi = leray(&random_smooth_field(grid, Rank::Vector, TEST_MODES, 0.0, seed.wrapping_add(m as u64)))?;
            let coeffs = modes
                .iter()
                .map(|&k| {
                    let idx = grid.mode_index(k).expect("test modes fit the grid");
                    [psi.comp(0)[idx], psi.comp(1)[idx], psi.comp(2)[idx]]
                })
                .collect();
            fields.push(TestField { psi: coeffs, start: t0 + 0.1 * span, end: t0 + 0.9 * span });
        }
        Ok(WeakFormOracle { nu, gamma, modes, fields, samples: Vec::new() })
    }

    /// Record one sample of (v, R̊); samples must be uniformly spaced in time.
    pub fn push(&mut self, t: f64, v: &PeriodicField, r: &PeriodicField) -> Result<(), SpectralError> {
        let g = v.grid();
        let v = v.to_modes();
        let vv = outer_self(&v)?.into_modes();
        let r = r.to_modes();
        let mut red = Reduced { t, v: Vec::new(), vv: Vec::new(), r: Vec::new() };
        for &k in &self.modes {
            let idx = g.mode_index(k).expect("test modes fit the grid");
            red.v.push(std::array::from_fn(|c| v.comp(c)[idx]));
            red.vv.push(std::array::from_fn(|c| vv.comp(c)[idx]));
            red.r.push(std::array::from_fn(|c| r.comp(c)[idx]));
        }
        self.samples.push(red);
        Ok(())
    }

    pub fn samples(&self) -> usize {
        self.samples.len()
    }

    pub fn finish(&self) -> WeakFormReport {
        let mut per_field = Vec::with_capacity(self.fields.len());
        let m = self.samples.len();
        let h = if m > 1 { self.samples[1].t - self.samples[0].t } else { 0.0 };
        for f in &self.fields {
            let mut terms = [0.0f64; 4];
            for s in &self.samples {
                let (th, dth) = f.theta(s.t);
                if th == 0.0 && dth == 0.0 {
                    continue;
                }
                // ⨍ a·conj(b) summed over the retained modes; all fields are real so the sum is real
                let (mut vpsi, mut vvgrad, mut vfrac, mut rgrad) = (0.0, 0.0, 0.0, 0.0);
                for (n, k) in self.modes.iter().enumerate() {
                    let psi = f.psi[n];
                    let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
                    let k2 = kf[0] * kf[0] + kf[1] * kf[1] + kf[2] * kf[2];
                    let frac = if k2 > 0.0 { k2.powf(self.gamma) } else { 0.0 };
                    for a in 0..3 {
                        let vp = (s.v[n][a] * psi[a].conj()).re;
                        vpsi += vp;
                        vfrac += frac * vp;
                        for b in 0..3 {
                            // ∂_b ψ_a has coefficient i k_b ψ_a
                            let grad = Complex64::new(0.0, kf[b]) * psi[a];
                            let ab = sym_index(a, b);
                            vvgrad += (s.vv[n][ab] * grad.conj()).re;
                            rgrad += (s.r[n][ab] * grad.conj()).re;
                        }
                    }
                }
                let t = [-dth * vpsi, -th * vvgrad, self.nu * th * vfrac, th * rgrad];
                for c in 0..4 {
                    terms[c] += h * t[c];
                }
            }
            let total: f64 = terms.iter().sum();
            let scale: f64 = terms.iter().map(|x| x.abs()).sum();
            per_field.push(if scale > 0.0 { total.abs() / scale } else { 0.0 });
        }
        WeakFormReport {
            max_relative: per_field.iter().cloned().fold(0.0, f64::max),
            per_field,
            samples: m,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Space;

    #[test]
    fn steady_stokes_mode_balances_with_its_stress() {
        // v = sin(x₂) e₁ steady, ν(−Δ)^γ v = ν v = div R̊ with R̊ = ν R v: the weak form vanishes
        let g = Grid::two_thirds(16).unwrap();
        let (nu, gamma) = (0.3, 0.4);
        let v = PeriodicField::vector_fn(g, |x| [x[1].sin(), 0.0, 0.0]);
        let r = crate::operators::inverse_divergence(&v).unwrap().field.scale(nu);
        let mut o = WeakFormOracle::new(g, 0.0, 1.0, nu, gamma, 5, 3).unwrap();
        for j in 0..=100 {
            o.push(j as f64 * 0.01, &v, &r).unwrap();
        }
        let rep = o.finish();
        assert!(rep.max_relative < 1e-12, "{rep:?}");
        let zero = PeriodicField::zeros(g, Rank::SymTensor, Space::Modes);
        let mut o = WeakFormOracle::new(g, 0.0, 1.0, nu, gamma, 5, 3).unwrap();
        for j in 0..=100 {
            o.push(j as f64 * 0.01, &v, &zero).unwrap();
        }
        let rep = o.finish();
        assert!(rep.max_relative > 0.1, "{rep:?}");
    }
}
