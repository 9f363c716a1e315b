//! Solutions of the Navier-Stokes-Reynolds system
//! ∂t v + div(v⊗v) + ∇p + ν(−Δ)^γ v = div R̊, div v = 0.

use crate::error::SpectralError;
use crate::spectral::{divergence, trace, PeriodicField, Rank};
use serde::Serialize;

/// One time slice (v, p, R̊) of a Navier-Stokes-Reynolds solution.
#[derive(Clone, Debug)]
pub struct ReynoldsTriple {
    pub t: f64,
    pub v: PeriodicField,
    pub p: PeriodicField,
    pub r: PeriodicField,
}

impl ReynoldsTriple {
    pub fn zero(t: f64, grid: crate::spectral::Grid) -> Self {
        use crate::spectral::Space;
        ReynoldsTriple {
            t,
            v: PeriodicField::zeros(grid, Rank::Vector, Space::Modes),
            p: PeriodicField::zeros(grid, Rank::Scalar, Space::Modes),
            r: PeriodicField::zeros(grid, Rank::SymTensor, Space::Modes),
        }
    }

    /// sup|div v| and sup|tr R̊|.
    pub fn structure_defects(&self) -> Result<(f64, f64), SpectralError> {
        Ok((divergence(&self.v)?.sup_norm(), trace(&self.r)?.sup_norm()))
    }
}

/// Uniformly sampled Navier-Stokes-Reynolds solution.
#[derive(Clone, Debug)]
pub struct ReynoldsSeries {
    pub t0: f64,
    pub spacing: f64,
    pub triples: Vec<ReynoldsTriple>,
}

impl ReynoldsSeries {
    pub fn end(&self) -> f64 {
        self.t0 + self.spacing * (self.triples.len().saturating_sub(1)) as f64
    }

    pub fn times(&self) -> Vec<f64> {
        self.triples.iter().map(|s| s.t).collect()
    }

    /// Linear interpolation in time of (v, p, R̊).
    pub fn at(&self, t: f64) -> Result<ReynoldsTriple, SpectralError> {
        let m = self.triples.len();
        if m == 0 {
            return Err(SpectralError::Invalid("empty series".into()));
        }
        let s = ((t - self.t0) / self.spacing).clamp(0.0, (m - 1) as f64);
        let j = (s.floor() as usize).min(m.saturating_sub(2));
        if m == 1 {
            return Ok(ReynoldsTriple { t, ..self.triples[0].clone() });
        }
        let u = s - j as f64;
        let (a, b) = (&self.triples[j], &self.triples[j + 1]);
        let mix = |x: &PeriodicField, y: &PeriodicField| x.scale(1.0 - u).axpy(u, y);
        Ok(ReynoldsTriple { t, v: mix(&a.v, &b.v)?, p: mix(&a.p, &b.p)?, r: mix(&a.r, &b.r)? })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedKind {
    ZeroSeed,
    MollifiedEulerSeed,
}
