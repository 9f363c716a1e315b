//! Mikado flows: stationary pressureless Euler flows W(R, ξ) on the 2π-torus
//! made of disjoint straight periodic pipes, with ⨍W = 0 and ⨍W⊗W = R for
//! every symmetric R in the closed Frobenius ball B̄_{1/2}(Id).
//!
//! Pipe j runs along the integer direction k_j through the point p_j. Its
//! cross-section profile is the dipole φ_j(y) = c_j B(|y|/r)(y·e_j)/r with
//! B(s) = exp(−2/(1−s²)), where y is the displacement from the axis and e_j ⊥ k_j.
//! The dipole makes ⨍φ_j = 0 and c_j makes ⨍φ_j² = 1. Then
//! W(R, ξ) = Σ_j Γ_j(R) φ_j(ξ) k̂_j with Σ_j Γ_j(R)² k̂_j⊗k̂_j = R.

use crate::error::MikadoError;
use crate::spectral::{Grid, PeriodicField, Rank};
use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::num::NonZeroUsize;

pub type Sym3 = [[f64; 3]; 3];

/// Coordinate axes followed by the face diagonals of the three coordinate planes.
pub const DIRECTIONS: [[i64; 3]; 9] = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 1, 0],
    [1, -1, 0],
    [0, 1, 1],
    [0, 1, -1],
    [1, 0, 1],
    [1, 0, -1],
];

/// Dipole axis of each pipe (orthogonal to its direction).
const DIPOLE_AXES: [[f64; 3]; 9] = [
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 0.0, 1.0],
    [1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 1.0, 0.0],
];

/// Axis points in units of 2π/32, chosen so all pipes of radius 0.55 are disjoint.
const OFFSETS: [[u32; 3]; 9] = [
    [0, 23, 17],
    [22, 2, 6],
    [28, 17, 21],
    [10, 22, 23],
    [29, 0, 0],
    [3, 20, 6],
    [13, 23, 3],
    [31, 0, 24],
    [15, 9, 25],
];

/// Index pairs of the (+, −) diagonal pipes coupling coordinates (a, b).
const PAIRS: [((usize, usize), usize, usize); 3] = [((0, 1), 3, 4), ((1, 2), 5, 6), ((0, 2), 7, 8)];

const QUADRATURE_NODES: usize = 200;

pub fn identity() -> Sym3 {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

/// Frobenius distance ‖R − Id‖.
pub fn distance_to_identity(r: &Sym3) -> f64 {
    let mut s = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            let d = r[a][b] - if a == b { 1.0 } else { 0.0 };
            s += d * d;
        }
    }
    s.sqrt()
}

/// Symmetric matrix drawn uniformly from the closed Frobenius ball of the given radius around Id.
pub fn sample_ball<G: rand::Rng>(rng: &mut G, radius: f64) -> Sym3 {
    loop {
        let v: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-1.0..=1.0));
        let d = [[v[0], v[1], v[2]], [v[1], v[3], v[4]], [v[2], v[4], v[5]]];
        let mut r = identity();
        for a in 0..3 {
            for b in 0..3 {
                r[a][b] += radius * d[a][b];
            }
        }
        if distance_to_identity(&r) <= radius {
            return r;
        }
    }
}

pub fn cutoff_bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-2.0 / (1.0 - s * s)).exp()
    }
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

#[derive(Clone, Debug)]
pub struct MikadoFamily {
    pub directions: Vec<[i64; 3]>,
    pub dipole_axes: Vec<[f64; 3]>,
    pub offsets: Vec<[f64; 3]>,
    pub radius: f64,
    /// Regularization of the off-diagonal split, s_ab = (R_ab² + κ²)^{1/2}.
    pub kappa: f64,
    pub amplitudes: Vec<f64>,
    quadrature: std::sync::Arc<GaussLegendre>,
}

impl MikadoFamily {
    pub fn standard() -> Result<Self, MikadoError> {
        let offsets = OFFSETS
            .iter()
            .map(|o| [o[0] as f64 * PI / 16.0, o[1] as f64 * PI / 16.0, o[2] as f64 * PI / 16.0])
            .collect();
        Self::new(0.55, 0.2, offsets)
    }

    pub fn new(radius: f64, kappa: f64, offsets: Vec<[f64; 3]>) -> Result<Self, MikadoError> {
        let quadrature = GaussLegendre::new(NonZeroUsize::new(QUADRATURE_NODES).unwrap());
        let i3 = quadrature.integrate(0.0, 1.0, |s| cutoff_bump(s).powi(2) * s.powi(3));
        let amplitudes = DIRECTIONS
            .iter()
            .map(|k| (4.0 * PI / (norm([k[0] as f64, k[1] as f64, k[2] as f64]) * radius * radius * i3)).sqrt())
            .collect();
        let fam = MikadoFamily {
            directions: DIRECTIONS.to_vec(),
            dipole_axes: DIPOLE_AXES.to_vec(),
            offsets,
            radius,
            kappa,
            amplitudes,
            quadrature: std::sync::Arc::new(quadrature),
        };
        let (i, j, d) = fam.closest_pair();
        if d <= 2.0 * radius {
            return Err(MikadoError::Overlap(i, j, d, 2.0 * radius));
        }
        Ok(fam)
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn unit_direction(&self, j: usize) -> [f64; 3] {
        let k = self.directions[j];
        let v = [k[0] as f64, k[1] as f64, k[2] as f64];
        let n = norm(v);
        [v[0] / n, v[1] / n, v[2] / n]
    }

    /// Distance between the periodic axes of pipes i and j (non-parallel).
    pub fn axis_distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.directions[i], self.directions[j]);
        let n = [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
        let g = gcd(gcd(n[0], n[1]), n[2]) as f64;
        let nf = [n[0] as f64, n[1] as f64, n[2] as f64];
        let (p, q) = (self.offsets[i], self.offsets[j]);
        let s = (q[0] - p[0]) * nf[0] + (q[1] - p[1]) * nf[1] + (q[2] - p[2]) * nf[2];
        let period = 2.0 * PI * g;
        let r = s.rem_euclid(period);
        r.min(period - r) / norm(nf)
    }

    /// (i, j, distance) of the closest pair of pipe axes.
    pub fn closest_pair(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::INFINITY);
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let d = self.axis_distance(i, j);
                if d < best.2 {
                    best = (i, j, d);
                }
            }
        }
        best
    }

    /// Γ_j(R)² with Σ_j Γ_j² k̂_j⊗k̂_j = R.
    pub fn decompose(&self, r: &Sym3) -> Result<[f64; 9], MikadoError> {
        let dist = distance_to_identity(r);
        if dist > 0.5 + 1e-12 {
            return Err(MikadoError::OutsideBall(dist));
        }
        let mut g = [0.0; 9];
        let mut diag = [r[0][0], r[1][1], r[2][2]];
        for &((a, b), plus, minus) in &PAIRS {
            let rab = 0.5 * (r[a][b] + r[b][a]);
            let s = (rab * rab + self.kappa * self.kappa).sqrt();
            g[plus] = s + rab;
            g[minus] = s - rab;
            diag[a] -= s;
            diag[b] -= s;
        }
        g[..3].copy_from_slice(&diag);
        Ok(g)
    }

    /// Γ_j(R).
    pub fn coefficients(&self, r: &Sym3) -> Result<[f64; 9], MikadoError> {
        let mut g = self.decompose(r)?;
        for x in g.iter_mut() {
            *x = x.max(0.0).sqrt();
        }
        Ok(g)
    }

    /// Smallest displacement from the axis of pipe j to ξ, over all periodic copies.
    pub fn axis_displacement(&self, j: usize, xi: [f64; 3]) -> [f64; 3] {
        let u = self.unit_direction(j);
        let p = self.offsets[j];
        let mut d = [0.0; 3];
        for c in 0..3 {
            d[c] = (xi[c] - p[c] + PI).rem_euclid(2.0 * PI) - PI;
        }
        let mut best = [f64::INFINITY; 3];
        let mut best_n = f64::INFINITY;
        for m0 in -1..=1 {
            for m1 in -1..=1 {
                for m2 in -1..=1 {
                    let e = [d[0] + 2.0 * PI * m0 as f64, d[1] + 2.0 * PI * m1 as f64, d[2] + 2.0 * PI * m2 as f64];
                    let t = e[0] * u[0] + e[1] * u[1] + e[2] * u[2];
                    let y = [e[0] - t * u[0], e[1] - t * u[1], e[2] - t * u[2]];
                    let n = norm(y);
                    if n < best_n {
                        best_n = n;
                        best = y;
                    }
                }
            }
        }
        best
    }

    /// Profile φ_j(ξ).
    pub fn profile(&self, j: usize, xi: [f64; 3]) -> f64 {
        let y = self.axis_displacement(j, xi);
        let s = norm(y) / self.radius;
        if s >= 1.0 {
            return 0.0;
        }
        let e = self.dipole_axes[j];
        self.amplitudes[j] * cutoff_bump(s) * (y[0] * e[0] + y[1] * e[1] + y[2] * e[2]) / self.radius
    }

    /// W(R, ξ) at one point from the coefficients Γ_j(R).
    pub fn evaluate_at(&self, gamma: &[f64; 9], xi: [f64; 3]) -> [f64; 3] {
        let mut w = [0.0; 3];
        for j in 0..self.len() {
            let phi = self.profile(j, xi);
            if phi != 0.0 {
                let u = self.unit_direction(j);
                for c in 0..3 {
                    w[c] += gamma[j] * phi * u[c];
                }
            }
        }
        w
    }

    /// Grid values of every profile φ_j.
    pub fn profile_values(&self, grid: Grid) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|j| (0..grid.len()).map(|p| self.profile(j, grid.point(p))).collect())
            .collect()
    }

    /// W(R, ·) on the grid.
    pub fn evaluate_w(&self, r: &Sym3, grid: Grid) -> Result<PeriodicField, MikadoError> {
        let gamma = self.coefficients(r)?;
        Ok(self.assemble(&gamma, &self.profile_values(grid), grid)?)
    }

    /// Σ_j Γ_j φ_j k̂_j from precomputed profile values.
    pub fn assemble(&self, gamma: &[f64; 9], profiles: &[Vec<f64>], grid: Grid) -> Result<PeriodicField, MikadoError> {
        let mut comps = vec![vec![0.0; grid.len()]; 3];
        for (j, phi) in profiles.iter().enumerate() {
            let u = self.unit_direction(j);
            for c in 0..3 {
                let a = gamma[j] * u[c];
                if a != 0.0 {
                    for (o, f) in comps[c].iter_mut().zip(phi) {
                        *o += a * f;
                    }
                }
            }
        }
        Ok(PeriodicField::from_real_values(grid, Rank::Vector, comps)?)
    }

    /// Grid means G_jl = ⨍φ_jφ_l of the profiles.
    pub fn gram(profiles: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let m = profiles.len();
        let mut g = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in i..m {
                let s = profiles[i].iter().zip(&profiles[j]).map(|(a, b)| a * b).sum::<f64>() / profiles[i].len() as f64;
                g[i][j] = s;
                g[j][i] = s;
            }
        }
        g
    }

    /// ⨍W⊗W = Σ_jl Γ_jΓ_l G_jl k̂_j⊗k̂_l.
    pub fn second_moment(&self, gamma: &[f64; 9], gram: &[Vec<f64>]) -> Sym3 {
        let mut m = [[0.0; 3]; 3];
        for j in 0..self.len() {
            let uj = self.unit_direction(j);
            for l in 0..self.len() {
                let ul = self.unit_direction(l);
                let w = gamma[j] * gamma[l] * gram[j][l];
                for a in 0..3 {
                    for b in 0..3 {
                        m[a][b] += w * uj[a] * ul[b];
                    }
                }
            }
        }
        m
    }

    /// ∫₀¹ B(s)s²J₁(xs) ds.
    fn radial_first(&self, x: f64) -> f64 {
        self.quadrature.integrate(0.0, 1.0, |s| cutoff_bump(s) * s * s * puruspe::Jn(1, x * s))
    }

    /// (∫₀¹ B²s³J₀(xs) ds, ∫₀¹ B²s³J₂(xs) ds).
    fn radial_square(&self, x: f64) -> (f64, f64) {
        let b2 = |s: f64| cutoff_bump(s).powi(2) * s.powi(3);
        (
            self.quadrature.integrate(0.0, 1.0, |s| b2(s) * puruspe::Jn(0, x * s)),
            self.quadrature.integrate(0.0, 1.0, |s| b2(s) * puruspe::Jn(2, x * s)),
        )
    }

    fn in_plane(&self, j: usize, k: [i64; 3]) -> bool {
        let d = self.directions[j];
        d[0] * k[0] + d[1] * k[1] + d[2] * k[2] == 0
    }

    fn phase(&self, j: usize, k: [i64; 3]) -> Complex64 {
        let p = self.offsets[j];
        Complex64::from_polar(1.0, -(k[0] as f64 * p[0] + k[1] as f64 * p[1] + k[2] as f64 * p[2]))
    }

    /// Fourier coefficient ⨍φ_j e^{−ik·ξ} (zero unless k ⊥ k_j).
    pub fn profile_coefficient(&self, j: usize, k: [i64; 3]) -> Complex64 {
        if !self.in_plane(j, k) || k == [0, 0, 0] {
            return Complex64::new(0.0, 0.0);
        }
        let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
        let kn = norm(kf);
        self.profile_coefficient_with(j, k, self.radial_first(kn * self.radius))
    }

    fn profile_coefficient_with(&self, j: usize, k: [i64; 3], radial: f64) -> Complex64 {
        let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
        let kn = norm(kf);
        let e = self.dipole_axes[j];
        let ke = (kf[0] * e[0] + kf[1] * e[1] + kf[2] * e[2]) / kn;
        let kj = self.directions[j];
        let lj = norm([kj[0] as f64, kj[1] as f64, kj[2] as f64]);
        let r = self.radius;
        Complex64::new(0.0, -lj * self.amplitudes[j] * r * r * ke * radial / (2.0 * PI)) * self.phase(j, k)
    }

    fn square_coefficient_with(&self, j: usize, k: [i64; 3], radial: (f64, f64)) -> Complex64 {
        let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
        let kn = norm(kf);
        let e = self.dipole_axes[j];
        let ke = (kf[0] * e[0] + kf[1] * e[1] + kf[2] * e[2]) / kn;
        let cos2 = 2.0 * ke * ke - 1.0;
        let kj = self.directions[j];
        let lj = norm([kj[0] as f64, kj[1] as f64, kj[2] as f64]);
        let c = self.amplitudes[j];
        let r = self.radius;
        self.phase(j, k) * (lj * c * c * r * r / (4.0 * PI) * (radial.0 - cos2 * radial.1))
    }

    /// Fourier data of W and W⊗W for 0 < |k| ≤ k_max.
    pub fn fourier_data(&self, k_max: f64) -> MikadoFourier {
        let kb = k_max.floor() as i64;
        let mut first: HashMap<i64, f64> = HashMap::new();
        let mut square: HashMap<i64, (f64, f64)> = HashMap::new();
        let mut modes = Vec::new();
        for k0 in -kb..=kb {
            for k1 in -kb..=kb {
                for k2 in -kb..=kb {
                    let n2 = k0 * k0 + k1 * k1 + k2 * k2;
                    if n2 == 0 || n2 as f64 > k_max * k_max + 1e-9 {
                        continue;
                    }
                    let k = [k0, k1, k2];
                    let planes: Vec<usize> = (0..self.len()).filter(|&j| self.in_plane(j, k)).collect();
                    if planes.is_empty() {
                        continue;
                    }
                    let x = (n2 as f64).sqrt() * self.radius;
                    let h = *first.entry(n2).or_insert_with(|| self.radial_first(x));
                    let sq = *square.entry(n2).or_insert_with(|| self.radial_square(x));
                    let terms = planes
                        .iter()
                        .map(|&j| (j, self.profile_coefficient_with(j, k, h), self.square_coefficient_with(j, k, sq)))
                        .collect();
                    modes.push(MikadoMode { k, terms });
                }
            }
        }
        MikadoFourier { k_max, directions: (0..self.len()).map(|j| self.unit_direction(j)).collect(), modes }
    }
}

#[derive(Clone, Debug)]
pub struct MikadoMode {
    pub k: [i64; 3],
    /// (pipe index, ⨍φ_j e^{−ik·ξ}, ⨍φ_j² e^{−ik·ξ})
    pub terms: Vec<(usize, Complex64, Complex64)>,
}

/// Truncated Fourier expansions W(R, ξ) = Σ a_k(R)e^{ik·ξ} and
/// W⊗W = R + Σ C_k(R)e^{ik·ξ} over 0 < |k| ≤ k_max.
#[derive(Clone, Debug)]
pub struct MikadoFourier {
    pub k_max: f64,
    directions: Vec<[f64; 3]>,
    pub modes: Vec<MikadoMode>,
}

impl MikadoFourier {
    /// a_k(R) from Γ_j(R).
    pub fn a_k(&self, mode: &MikadoMode, gamma: &[f64; 9]) -> [Complex64; 3] {
        let mut a = [Complex64::new(0.0, 0.0); 3];
        for &(j, c, _) in &mode.terms {
            let u = self.directions[j];
            for d in 0..3 {
                a[d] += c * (gamma[j] * u[d]);
            }
        }
        a
    }

    /// C_k(R) from Γ_j(R).
    pub fn c_k(&self, mode: &MikadoMode, gamma: &[f64; 9]) -> [[Complex64; 3]; 3] {
        let mut m = [[Complex64::new(0.0, 0.0); 3]; 3];
        for &(j, _, d2) in &mode.terms {
            let u = self.directions[j];
            for a in 0..3 {
                for b in 0..3 {
                    m[a][b] += d2 * (gamma[j] * gamma[j] * u[a] * u[b]);
                }
            }
        }
        m
    }

    /// Σ_k a_k e^{ik·ξ} at one point.
    pub fn evaluate(&self, gamma: &[f64; 9], xi: [f64; 3]) -> [f64; 3] {
        let mut w = [0.0; 3];
        for mode in &self.modes {
            let a = self.a_k(mode, gamma);
            let ph = Complex64::from_polar(
                1.0,
                mode.k[0] as f64 * xi[0] + mode.k[1] as f64 * xi[1] + mode.k[2] as f64 * xi[2],
            );
            for c in 0..3 {
                w[c] += (a[c] * ph).re;
            }
        }
        w
    }

    /// sup over the given matrices and modes of |a_k(R)||k|⁴.
    pub fn decay_constant(&self, family: &MikadoFamily, samples: &[Sym3]) -> Result<f64, MikadoError> {
        let mut m: f64 = 0.0;
        for r in samples {
            let g = family.coefficients(r)?;
            for mode in &self.modes {
                let a = self.a_k(mode, &g);
                let n = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let k2 = (mode.k[0] * mode.k[0] + mode.k[1] * mode.k[1] + mode.k[2] * mode.k[2]) as f64;
                m = m.max(n * k2 * k2);
            }
        }
        Ok(m)
    }

    /// Least-squares slope of log max_R|a_k| against log|k| over integer shells.
    pub fn decay_exponent(&self, family: &MikadoFamily, samples: &[Sym3]) -> Result<f64, MikadoError> {
        let mut shells: HashMap<i64, f64> = HashMap::new();
        for r in samples {
            let g = family.coefficients(r)?;
            for mode in &self.modes {
                let a = self.a_k(mode, &g);
                let n = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                let k2 = mode.k[0] * mode.k[0] + mode.k[1] * mode.k[1] + mode.k[2] * mode.k[2];
                let e = shells.entry(k2).or_insert(0.0);
                *e = e.max(n);
            }
        }
        let pts: Vec<(f64, f64)> = shells
            .iter()
            .filter(|(_, v)| **v > 0.0)
            .map(|(k2, v)| (0.5 * (*k2 as f64).ln(), v.ln()))
            .collect();
        if pts.len() < 2 {
            return Ok(f64::NAN);
        }
        let m = pts.len() as f64;
        let (mx, my) = pts.iter().fold((0.0, 0.0), |s, p| (s.0 + p.0 / m, s.1 + p.1 / m));
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        Ok(sxy / sxx)
    }
}

/// ik×a/|k|², whose curl (ik×)·e^{ik·ξ} returns a e^{ik·ξ} when a·k = 0.
pub fn potential_coefficients(a: [Complex64; 3], k: [i64; 3]) -> Result<[Complex64; 3], MikadoError> {
    if k == [0, 0, 0] {
        return Err(MikadoError::ZeroMode);
    }
    let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
    let k2 = kf[0] * kf[0] + kf[1] * kf[1] + kf[2] * kf[2];
    let dot = a[0] * kf[0] + a[1] * kf[1] + a[2] * kf[2];
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max) * k2.sqrt();
    if dot.norm() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(MikadoError::NotOrthogonal(dot.norm()));
    }
    let i = Complex64::new(0.0, 1.0);
    Ok([
        i * (a[2] * kf[1] - a[1] * kf[2]) / k2,
        i * (a[0] * kf[2] - a[2] * kf[0]) / k2,
        i * (a[1] * kf[0] - a[0] * kf[1]) / k2,
    ])
}

#[derive(Clone, Copy, Debug, Serialize, serde::Deserialize)]
pub struct MConstant {
    pub m_bar: f64,
    /// Σ_{0<|k|≤k_max} |k|^{−4}
    pub lattice_sum: f64,
    /// Integral bound of Σ_{|k|>k_max} |k|^{−4}.
    pub tail: f64,
    pub m: f64,
}

/// M = 64 M̄ Σ_{k≠0} |k|^{−4}, with the lattice sum truncated at k_max plus its tail bound.
pub fn compute_m(m_bar: f64, k_max: f64) -> MConstant {
    let kb = k_max.floor() as i64;
    let mut sum = 0.0;
    for k0 in -kb..=kb {
        for k1 in -kb..=kb {
            for k2 in -kb..=kb {
                let n2 = (k0 * k0 + k1 * k1 + k2 * k2) as f64;
                if n2 > 0.0 && n2 <= k_max * k_max + 1e-9 {
                    sum += 1.0 / (n2 * n2);
                }
            }
        }
    }
    let tail = 4.0 * PI / (k_max - 3f64.sqrt() / 2.0);
    MConstant { m_bar, lattice_sum: sum, tail, m: 64.0 * m_bar * (sum + tail) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_family_is_disjoint() {
        let f = MikadoFamily::standard().unwrap();
        let (_, _, d) = f.closest_pair();
        assert!(d > 2.0 * f.radius, "{d}");
    }

    #[test]
    fn identity_split() {
        let f = MikadoFamily::standard().unwrap();
        let g = f.decompose(&identity()).unwrap();
        for j in 0..3 {
            assert!((g[j] - 0.6).abs() < 1e-15);
        }
        for j in 3..9 {
            assert!((g[j] - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn radial_integrals_match_reference_values() {
        let f = MikadoFamily::standard().unwrap();
        let i3 = f.quadrature.integrate(0.0, 1.0, |s| cutoff_bump(s).powi(2) * s.powi(3));
        assert!((i3 - 2.18434151824286494e-4).abs() < 1e-17);
        for (x, h) in [(0.55, 1.00577080644031698e-3), (2.0, 3.16322249379744116e-3), (5.0, 3.17835813691138066e-3), (12.0, -1.19215697804056422e-4)] {
            assert!((f.radial_first(x) - h).abs() < 1e-15, "{x}");
        }
        // ⨍φ_j² = 1 is the x = 0 value of the square coefficient
        let (a0, a2) = f.radial_square(0.0);
        assert!((a0 - i3).abs() < 1e-18 && a2 == 0.0);
    }

    #[test]
    fn outside_ball_is_rejected() {
        let f = MikadoFamily::standard().unwrap();
        let mut r = identity();
        r[0][0] = 1.6;
        assert!(matches!(f.decompose(&r), Err(MikadoError::OutsideBall(_))));
    }

    #[test]
    fn potential_of_unit_example() {
        let one = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.0, 0.0);
        let p = potential_coefficients([one, z, z], [0, 0, 1]).unwrap();
        assert_eq!(p, [z, Complex64::new(0.0, 1.0), z]);
        assert!(matches!(potential_coefficients([one, z, z], [0, 0, 0]), Err(MikadoError::ZeroMode)));
        assert!(matches!(potential_coefficients([one, z, z], [1, 0, 0]), Err(MikadoError::NotOrthogonal(_))));
    }

    #[test]
    fn m_on_small_shell() {
        // |k| ≤ 1: six unit vectors; |k|² = 2: twelve vectors contribute 1/4 each only when k_max ≥ √2
        let c = compute_m(1.0, 1.0);
        assert!((c.lattice_sum - 6.0).abs() < 1e-15);
        let c2 = compute_m(2.0, 2.0);
        let direct = 6.0 + 12.0 / 4.0 + 8.0 / 9.0 + 6.0 / 16.0;
        assert!((c2.lattice_sum - direct).abs() < 1e-14);
        assert!((c2.m - 128.0 * (direct + 4.0 * PI / (2.0 - 3f64.sqrt() / 2.0))).abs() < 1e-10);
    }
}
