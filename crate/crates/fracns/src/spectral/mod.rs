//! Periodic fields on the torus [0, 2π)³: storage, transforms, differentiation,
//! dealiasing, mollification, Hölder estimators and snapshots.

pub mod calculus;
pub mod fft;
pub mod holder;
pub mod mollify;
pub mod snapshot;

pub use calculus::*;
pub use fft::Fft3;
pub use holder::{commutator_probe, holder_norm, holder_seminorm, holder_seminorm_with, CommutatorSample, HolderEstimate, HolderOptions};
pub use mollify::{bump, mollifier_multiplier, mollify, Mollified};

use crate::error::SpectralError;
use num_complex::Complex64;
use std::f64::consts::PI;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Collocation grid with n points per axis and a dealiasing fraction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    dealias: f64,
}

impl Grid {
    pub fn new(n: usize, dealias: f64) -> Result<Self, SpectralError> {
        if n < 8 || n % 2 != 0 {
            return Err(SpectralError::BadGridSize(n));
        }
        if !(dealias > 0.0 && dealias <= 1.0) {
            return Err(SpectralError::BadDealias(dealias));
        }
        Ok(Grid { n, dealias })
    }

    /// Grid with the standard two-thirds dealiasing rule.
    pub fn two_thirds(n: usize) -> Result<Self, SpectralError> {
        Grid::new(n, 2.0 / 3.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn dealias_fraction(&self) -> f64 {
        self.dealias
    }

    /// Largest retained |k_c| after dealiasing; the Nyquist mode is never retained.
    pub fn cutoff(&self) -> i64 {
        let c = (self.dealias * (self.n / 2) as f64 + 1e-9).floor() as i64;
        c.min(self.n as i64 / 2 - 1)
    }

    pub fn nyquist(&self) -> i64 {
        self.n as i64 / 2
    }

    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    #[inline]
    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.n / 2
    }

    #[inline]
    pub fn index(&self, i0: usize, i1: usize, i2: usize) -> usize {
        (i0 * self.n + i1) * self.n + i2
    }

    #[inline]
    pub fn unindex(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        let [a, b, c] = self.unindex(idx);
        [a as f64 * h, b as f64 * h, c as f64 * h]
    }

    #[inline]
    pub fn wavevector(&self, idx: usize) -> [i64; 3] {
        let [a, b, c] = self.unindex(idx);
        [self.wavenumber(a), self.wavenumber(b), self.wavenumber(c)]
    }

    /// Storage index of wavevector k, if it is representable without aliasing.
    pub fn mode_index(&self, k: [i64; 3]) -> Option<usize> {
        let h = self.n as i64 / 2;
        let mut ix = [0usize; 3];
        for c in 0..3 {
            if k[c] >= h || k[c] < -h {
                return None;
            }
            ix[c] = k[c].rem_euclid(self.n as i64) as usize;
        }
        Some(self.index(ix[0], ix[1], ix[2]))
    }

    /// Index of the mode -k for storage index idx.
    #[inline]
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let n = self.n;
        let [a, b, c] = self.unindex(idx);
        self.index((n - a) % n, (n - b) % n, (n - c) % n)
    }

    /// True when the mode lies inside the dealiasing box.
    #[inline]
    pub fn retained(&self, idx: usize) -> bool {
        let k = self.wavevector(idx);
        let c = self.cutoff();
        k.iter().all(|&x| x.abs() <= c)
    }

    /// True when any index of the mode is a Nyquist index.
    #[inline]
    pub fn touches_nyquist(&self, idx: usize) -> bool {
        self.unindex(idx).iter().any(|&i| self.is_nyquist(i))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rank {
    Scalar,
    Vector,
    /// Symmetric 3×3 tensor stored as (xx, xy, xz, yy, yz, zz).
    SymTensor,
}

impl Rank {
    pub fn components(self) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::Vector => 3,
            Rank::SymTensor => 6,
        }
    }

    /// Weight of each stored component in the Euclidean/Frobenius norm.
    pub fn norm_weights(self) -> &'static [f64] {
        match self {
            Rank::Scalar => &[1.0],
            Rank::Vector => &[1.0, 1.0, 1.0],
            Rank::SymTensor => &[1.0, 2.0, 2.0, 1.0, 2.0, 1.0],
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Rank::Scalar => 0,
            Rank::Vector => 1,
            Rank::SymTensor => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Rank> {
        match c {
            0 => Some(Rank::Scalar),
            1 => Some(Rank::Vector),
            2 => Some(Rank::SymTensor),
            _ => None,
        }
    }
}

/// Storage slot of tensor entry (a, b).
#[inline]
pub fn sym_index(a: usize, b: usize) -> usize {
    const T: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];
    T[a][b]
}

/// (row, column) of each stored symmetric-tensor slot.
pub const SYM_PAIRS: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Space {
    Values,
    Modes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    ToModes,
    ToValues,
}

/// A scalar, vector or symmetric-tensor field on the torus, held either as
/// collocation values or as Fourier coefficients (normalized so that the k = 0
/// coefficient is the mean).
#[derive(Clone, Debug)]
pub struct PeriodicField {
    grid: Grid,
    rank: Rank,
    space: Space,
    real: bool,
    comps: Vec<Vec<Complex64>>,
}

impl PeriodicField {
    pub fn zeros(grid: Grid, rank: Rank, space: Space) -> Self {
        PeriodicField {
            grid,
            rank,
            space,
            real: true,
            comps: vec![vec![ZERO; grid.len()]; rank.components()],
        }
    }

    pub fn from_complex(
        grid: Grid,
        rank: Rank,
        space: Space,
        real: bool,
        comps: Vec<Vec<Complex64>>,
    ) -> Result<Self, SpectralError> {
        if comps.len() != rank.components() {
            return Err(SpectralError::Dimension(format!(
                "{} components supplied for rank {:?}",
                comps.len(),
                rank
            )));
        }
        if let Some(c) = comps.iter().find(|c| c.len() != grid.len()) {
            return Err(SpectralError::Dimension(format!(
                "component of length {} on a grid of {} points",
                c.len(),
                grid.len()
            )));
        }
        Ok(PeriodicField { grid, rank, space, real, comps })
    }

    pub fn from_real_values(grid: Grid, rank: Rank, comps: Vec<Vec<f64>>) -> Result<Self, SpectralError> {
        let comps = comps
            .into_iter()
            .map(|c| c.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
            .collect();
        PeriodicField::from_complex(grid, rank, Space::Values, true, comps)
    }

    /// Sample a real field from a pointwise closure writing all components.
    pub fn from_fn<F>(grid: Grid, rank: Rank, f: F) -> Self
    where
        F: Fn([f64; 3], &mut [f64]),
    {
        let nc = rank.components();
        let mut comps = vec![vec![ZERO; grid.len()]; nc];
        let mut buf = vec![0.0; nc];
        for idx in 0..grid.len() {
            f(grid.point(idx), &mut buf);
            for c in 0..nc {
                comps[c][idx] = Complex64::new(buf[c], 0.0);
            }
        }
        PeriodicField { grid, rank, space: Space::Values, real: true, comps }
    }

    pub fn scalar_fn<F: Fn([f64; 3]) -> f64>(grid: Grid, f: F) -> Self {
        PeriodicField::from_fn(grid, Rank::Scalar, |x, out| out[0] = f(x))
    }

    pub fn vector_fn<F: Fn([f64; 3]) -> [f64; 3]>(grid: Grid, f: F) -> Self {
        PeriodicField::from_fn(grid, Rank::Vector, |x, out| out.copy_from_slice(&f(x)))
    }

    /// Constant field with the given component values.
    pub fn constant(grid: Grid, rank: Rank, value: &[f64]) -> Self {
        let comps = value
            .iter()
            .map(|&v| vec![Complex64::new(v, 0.0); grid.len()])
            .collect();
        PeriodicField { grid, rank, space: Space::Values, real: true, comps }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn space(&self) -> Space {
        self.space
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn comps(&self) -> &[Vec<Complex64>] {
        &self.comps
    }

    pub fn comp(&self, c: usize) -> &[Complex64] {
        &self.comps[c]
    }

    pub fn comps_mut(&mut self) -> &mut [Vec<Complex64>] {
        &mut self.comps
    }

    pub fn into_comps(self) -> Vec<Vec<Complex64>> {
        self.comps
    }

    /// Replace the reality flag (used after operations known to preserve or break it).
    pub fn with_real(mut self, real: bool) -> Self {
        self.real = real;
        self
    }

    pub fn transform(&self, direction: Direction) -> PeriodicField {
        match direction {
            Direction::ToModes => self.to_modes(),
            Direction::ToValues => self.to_values(),
        }
    }

    pub fn to_modes(&self) -> PeriodicField {
        self.clone().into_modes()
    }

    pub fn to_values(&self) -> PeriodicField {
        self.clone().into_values()
    }

    pub fn into_modes(mut self) -> PeriodicField {
        if self.space == Space::Modes {
            return self;
        }
        let plan = Fft3::plan(self.grid.n());
        if self.real {
            let nc = self.comps.len();
            let mut c = 0;
            while c < nc {
                if c + 1 < nc {
                    let a: Vec<f64> = self.comps[c].iter().map(|z| z.re).collect();
                    let b: Vec<f64> = self.comps[c + 1].iter().map(|z| z.re).collect();
                    let (fa, fb) = plan.forward_real_pair(&a, &b);
                    self.comps[c] = fa;
                    self.comps[c + 1] = fb;
                    c += 2;
                } else {
                    for z in self.comps[c].iter_mut() {
                        z.im = 0.0;
                    }
                    plan.forward(&mut self.comps[c]);
                    c += 1;
                }
            }
        } else {
            for comp in self.comps.iter_mut() {
                plan.forward(comp);
            }
        }
        self.space = Space::Modes;
        self
    }

    pub fn into_values(mut self) -> PeriodicField {
        if self.space == Space::Values {
            return self;
        }
        let plan = Fft3::plan(self.grid.n());
        if self.real {
            let nc = self.comps.len();
            let mut c = 0;
            while c < nc {
                if c + 1 < nc {
                    let (a, b) = plan.inverse_real_pair(&self.comps[c], &self.comps[c + 1]);
                    self.comps[c] = a.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
                    self.comps[c + 1] = b.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
                    c += 2;
                } else {
                    plan.inverse(&mut self.comps[c]);
                    for z in self.comps[c].iter_mut() {
                        z.im = 0.0;
                    }
                    c += 1;
                }
            }
        } else {
            for comp in self.comps.iter_mut() {
                plan.inverse(comp);
            }
        }
        self.space = Space::Values;
        self
    }

    /// Real parts of the collocation values of component c.
    pub fn real_values(&self, c: usize) -> Vec<f64> {
        match self.space {
            Space::Values => self.comps[c].iter().map(|z| z.re).collect(),
            Space::Modes => self.to_values().comps[c].iter().map(|z| z.re).collect(),
        }
    }

    /// All components as real collocation values.
    pub fn values_real(&self) -> Vec<Vec<f64>> {
        let v = self.to_values();
        v.comps.iter().map(|c| c.iter().map(|z| z.re).collect()).collect()
    }

    fn check_compatible(&self, other: &PeriodicField) -> Result<(), SpectralError> {
        if self.grid != other.grid || self.rank != other.rank {
            return Err(SpectralError::Dimension(format!(
                "{:?}/{} vs {:?}/{}",
                self.rank,
                self.grid.n(),
                other.rank,
                other.grid.n()
            )));
        }
        Ok(())
    }

    /// self + a * other, computed in the space of self.
    pub fn axpy(&self, a: f64, other: &PeriodicField) -> Result<PeriodicField, SpectralError> {
        self.check_compatible(other)?;
        let other = other.transform(match self.space {
            Space::Values => Direction::ToValues,
            Space::Modes => Direction::ToModes,
        });
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q * a).collect())
            .collect();
        Ok(PeriodicField {
            grid: self.grid,
            rank: self.rank,
            space: self.space,
            real: self.real && other.real,
            comps,
        })
    }

    pub fn add(&self, other: &PeriodicField) -> Result<PeriodicField, SpectralError> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &PeriodicField) -> Result<PeriodicField, SpectralError> {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, s: f64) -> PeriodicField {
        let mut out = self.clone();
        out.scale_in_place(s);
        out
    }

    pub fn scale_in_place(&mut self, s: f64) {
        for c in self.comps.iter_mut() {
            for z in c.iter_mut() {
                *z *= s;
            }
        }
    }

    /// Multiply every mode of every component by a scalar symbol m(k).
    pub fn apply_symbol<F: Fn([i64; 3]) -> Complex64>(&self, m: F) -> PeriodicField {
        let mut out = self.to_modes();
        let g = self.grid;
        for idx in 0..g.len() {
            let s = m(g.wavevector(idx));
            for c in out.comps.iter_mut() {
                c[idx] *= s;
            }
        }
        out
    }

    /// Extract component c as a scalar field.
    pub fn component(&self, c: usize) -> PeriodicField {
        PeriodicField {
            grid: self.grid,
            rank: Rank::Scalar,
            space: self.space,
            real: self.real,
            comps: vec![self.comps[c].clone()],
        }
    }

    /// Assemble a field of the given rank from scalar fields.
    pub fn assemble(rank: Rank, parts: &[PeriodicField]) -> Result<PeriodicField, SpectralError> {
        if parts.len() != rank.components() || parts.is_empty() {
            return Err(SpectralError::Dimension("wrong number of parts".into()));
        }
        let grid = parts[0].grid;
        let space = parts[0].space;
        let mut real = true;
        let mut comps = Vec::with_capacity(parts.len());
        for p in parts {
            if p.grid != grid || p.rank != Rank::Scalar {
                return Err(SpectralError::Dimension("parts must be scalars on one grid".into()));
            }
            real &= p.real;
            let p = if space == Space::Modes { p.to_modes() } else { p.to_values() };
            comps.push(p.comps[0].clone());
        }
        Ok(PeriodicField { grid, rank, space, real, comps })
    }

    /// Mean of each component.
    pub fn mean(&self) -> Vec<f64> {
        match self.space {
            Space::Modes => self.comps.iter().map(|c| c[0].re).collect(),
            Space::Values => {
                let n = self.grid.len() as f64;
                self.comps.iter().map(|c| c.iter().map(|z| z.re).sum::<f64>() / n).collect()
            }
        }
    }

    /// Largest absolute mean over components.
    pub fn mean_norm(&self) -> f64 {
        let w = self.rank.norm_weights();
        self.mean()
            .iter()
            .zip(w)
            .map(|(m, w)| w * m * m)
            .sum::<f64>()
            .sqrt()
    }

    /// Remove the mean of every component.
    pub fn without_mean(&self) -> PeriodicField {
        let mut out = self.to_modes();
        for c in out.comps.iter_mut() {
            c[0] = ZERO;
        }
        out
    }

    /// Discrete sup norm of the pointwise Euclidean (Frobenius for tensors) norm.
    pub fn sup_norm(&self) -> f64 {
        let v = self.to_values();
        let w = self.rank.norm_weights();
        let mut m: f64 = 0.0;
        for idx in 0..self.grid.len() {
            let mut s = 0.0;
            for (c, comp) in v.comps.iter().enumerate() {
                s += w[c] * comp[idx].norm_sqr();
            }
            m = m.max(s);
        }
        m.sqrt()
    }

    /// Sup norm on a grid refined by an integer factor via spectral interpolation.
    pub fn sup_norm_refined(&self, factor: usize) -> Result<f64, SpectralError> {
        if factor <= 1 {
            return Ok(self.sup_norm());
        }
        Ok(self.resample(self.grid.n() * factor)?.sup_norm())
    }

    /// Spectral interpolation onto an m³ grid (zero padding or truncation);
    /// Nyquist modes of the source are dropped.
    pub fn resample(&self, m: usize) -> Result<PeriodicField, SpectralError> {
        let target = Grid::new(m, self.grid.dealias_fraction())?;
        let src = self.to_modes();
        let mut out = PeriodicField::zeros(target, self.rank, Space::Modes);
        out.real = self.real;
        let g = self.grid;
        for idx in 0..g.len() {
            if g.touches_nyquist(idx) {
                continue;
            }
            if let Some(j) = target.mode_index(g.wavevector(idx)) {
                if target.touches_nyquist(j) {
                    continue;
                }
                for c in 0..out.comps.len() {
                    out.comps[c][j] = src.comps[c][idx];
                }
            }
        }
        Ok(out)
    }

    /// Grid mean of the pointwise squared norm.
    pub fn mean_square(&self) -> f64 {
        let v = self.to_values();
        let w = self.rank.norm_weights();
        let mut s = 0.0;
        for (c, comp) in v.comps.iter().enumerate() {
            s += w[c] * comp.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        s / self.grid.len() as f64
    }

    /// Sum of squared coefficient moduli (Parseval counterpart of `mean_square`).
    pub fn mode_energy(&self) -> f64 {
        let m = self.to_modes();
        let w = self.rank.norm_weights();
        m.comps
            .iter()
            .enumerate()
            .map(|(c, comp)| w[c] * comp.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum()
    }

    /// Largest deviation from conjugate symmetry of the coefficients.
    pub fn reality_defect(&self) -> f64 {
        let m = self.to_modes();
        let g = self.grid;
        let mut d: f64 = 0.0;
        for comp in &m.comps {
            for idx in 0..g.len() {
                if g.touches_nyquist(idx) {
                    continue;
                }
                let j = g.conjugate_index(idx);
                d = d.max((comp[idx] - comp[j].conj()).norm());
            }
        }
        d
    }

    /// Multiply mode k by (ik)^θ; Nyquist modes are dropped along axes of odd order.
    pub fn derivative(&self, theta: [u32; 3]) -> PeriodicField {
        let g = self.grid;
        let mut out = self.to_modes();
        let i = Complex64::new(0.0, 1.0);
        for idx in 0..g.len() {
            let ix = g.unindex(idx);
            let mut s = Complex64::new(1.0, 0.0);
            for c in 0..3 {
                if theta[c] == 0 {
                    continue;
                }
                if g.is_nyquist(ix[c]) && theta[c] % 2 == 1 {
                    s = ZERO;
                    break;
                }
                s *= (i * g.wavenumber(ix[c]) as f64).powu(theta[c]);
            }
            for comp in out.comps.iter_mut() {
                comp[idx] *= s;
            }
        }
        out
    }

    /// Zero every mode outside the dealiasing box.
    pub fn dealiased(&self) -> PeriodicField {
        let g = self.grid;
        let mut out = self.to_modes();
        for idx in 0..g.len() {
            if !g.retained(idx) {
                for comp in out.comps.iter_mut() {
                    comp[idx] = ZERO;
                }
            }
        }
        out
    }

    /// Zero the Nyquist planes only.
    pub fn without_nyquist(&self) -> PeriodicField {
        let g = self.grid;
        let mut out = self.to_modes();
        for idx in 0..g.len() {
            if g.touches_nyquist(idx) {
                for comp in out.comps.iter_mut() {
                    comp[idx] = ZERO;
                }
            }
        }
        out
    }

    /// Trigonometric interpolant of every component at an arbitrary point (real parts).
    pub fn eval_point(&self, x: [f64; 3]) -> Vec<f64> {
        let g = self.grid;
        let m = self.to_modes();
        let n = g.n();
        let phase: Vec<[Complex64; 3]> = (0..n)
            .map(|i| {
                let k = if g.is_nyquist(i) { 0 } else { g.wavenumber(i) };
                [0, 1, 2].map(|c| Complex64::from_polar(1.0, k as f64 * x[c]))
            })
            .collect();
        let mut out = vec![ZERO; m.comps.len()];
        for idx in 0..g.len() {
            if g.touches_nyquist(idx) {
                continue;
            }
            let ix = g.unindex(idx);
            let e = phase[ix[0]][0] * phase[ix[1]][1] * phase[ix[2]][2];
            for (o, comp) in out.iter_mut().zip(&m.comps) {
                *o += comp[idx] * e;
            }
        }
        out.iter().map(|z| z.re).collect()
    }

    /// Largest coefficient modulus among modes with |k|_∞ > kmax.
    pub fn max_mode_beyond(&self, kmax: i64) -> f64 {
        let g = self.grid;
        let m = self.to_modes();
        let mut out: f64 = 0.0;
        for idx in 0..g.len() {
            let k = g.wavevector(idx);
            if k.iter().any(|x| x.abs() > kmax) {
                for comp in &m.comps {
                    out = out.max(comp[idx].norm());
                }
            }
        }
        out
    }
}

/// Random real trigonometric polynomial with modes |k|_∞ ≤ kmax, zero mean,
/// coefficients uniform in the unit disc scaled by (1 + |k|²)^{-decay/2}.
pub fn random_smooth_field(grid: Grid, rank: Rank, kmax: i64, decay: f64, seed: u64) -> PeriodicField {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = PeriodicField::zeros(grid, rank, Space::Modes);
    let kmax = kmax.min(grid.nyquist() - 1);
    for a in -kmax..=kmax {
        for b in -kmax..=kmax {
            for c in -kmax..=kmax {
                let k = [a, b, c];
                // visit each conjugate pair once
                if (a, b, c) <= (0, 0, 0) {
                    continue;
                }
                let idx = grid.mode_index(k).expect("mode inside grid");
                let jdx = grid.mode_index([-a, -b, -c]).expect("mode inside grid");
                let w = (1.0 + (a * a + b * b + c * c) as f64).powf(-decay / 2.0);
                for comp in out.comps.iter_mut() {
                    let r: f64 = rng.gen::<f64>().sqrt();
                    let th: f64 = rng.gen::<f64>() * 2.0 * PI;
                    let z = Complex64::from_polar(w * r, th);
                    comp[idx] = z;
                    comp[jdx] = z.conj();
                }
            }
        }
    }
    out
}
