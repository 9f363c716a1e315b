//! Discrete Hölder seminorm estimators.
//!
//! [f]_{m+α} is estimated as the maximum over |θ| = m of the largest difference
//! quotient |D^θ f(x) - D^θ f(y)| / |x - y|^α over sampled pairs of grid points.
//! The sample set is every grid-aligned displacement along the 13 lattice
//! directions (axes, face and body diagonals) up to half the period, plus a
//! batch of random point pairs. The result never exceeds the true seminorm of
//! the trigonometric interpolant.

use super::{mollify, PeriodicField, Rank};
use crate::error::SpectralError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Highest derivative order the estimator will compute.
pub const MAX_ORDER: usize = 4;

pub const DIRECTIONS: [[i64; 3]; 13] = [
    [1, 0, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 1, 0],
    [1, -1, 0],
    [0, 1, 1],
    [0, 1, -1],
    [1, 0, 1],
    [1, 0, -1],
    [1, 1, 1],
    [1, 1, -1],
    [1, -1, 1],
    [-1, 1, 1],
];

#[derive(Clone, Debug)]
pub struct HolderOptions {
    /// Number of lattice directions used (3 = axes only, 13 = full set).
    pub directions: usize,
    /// Use only dyadic multiples 1, 2, 4, ... instead of every multiple.
    pub dyadic: bool,
    pub random_pairs: usize,
    pub seed: u64,
}

impl Default for HolderOptions {
    fn default() -> Self {
        HolderOptions { directions: 13, dyadic: false, random_pairs: 64, seed: 0x5eed }
    }
}

impl HolderOptions {
    /// Cheaper sampling for large grids: axes and diagonals, dyadic multiples.
    pub fn coarse() -> Self {
        HolderOptions { directions: 13, dyadic: true, random_pairs: 64, seed: 0x5eed }
    }
}

#[derive(Clone, Debug)]
pub struct HolderEstimate {
    pub exponent: f64,
    pub value: f64,
    pub sampling_offsets: Vec<[i64; 3]>,
}

/// All multi-indices θ with |θ| = m.
pub fn multi_indices(m: usize) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for a in 0..=m {
        for b in 0..=(m - a) {
            out.push([a as u32, b as u32, (m - a - b) as u32]);
        }
    }
    out
}

fn offsets(n: usize, opts: &HolderOptions) -> Vec<[i64; 3]> {
    let half = (n / 2) as i64;
    let mut out = Vec::new();
    for d in DIRECTIONS.iter().take(opts.directions.min(13)) {
        let mut s = 1i64;
        while s <= half {
            out.push([d[0] * s, d[1] * s, d[2] * s]);
            s = if opts.dyadic { s * 2 } else { s + 1 };
        }
    }
    out
}

pub fn holder_seminorm(field: &PeriodicField, exponent: f64) -> Result<HolderEstimate, SpectralError> {
    holder_seminorm_with(field, exponent, &HolderOptions::default())
}

pub fn holder_seminorm_with(
    field: &PeriodicField,
    exponent: f64,
    opts: &HolderOptions,
) -> Result<HolderEstimate, SpectralError> {
    if !(exponent >= 0.0) || !exponent.is_finite() {
        return Err(SpectralError::Invalid(format!("exponent {exponent} must be nonnegative")));
    }
    let m = exponent.floor() as usize;
    if m > MAX_ORDER {
        return Err(SpectralError::Unresolvable { exponent, order: m, max: MAX_ORDER });
    }
    let alpha = exponent - m as f64;
    let g = field.grid();
    let n = g.n();
    let h = g.spacing();
    let weights = field.rank().norm_weights();
    let offs = if alpha > 0.0 { offsets(n, opts) } else { Vec::new() };
    let mut value: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let pairs: Vec<(usize, usize)> = (0..if alpha > 0.0 { opts.random_pairs } else { 0 })
        .map(|_| (rng.gen_range(0..g.len()), rng.gen_range(0..g.len())))
        .filter(|(a, b)| a != b)
        .collect();
    for theta in multi_indices(m) {
        let d = if m == 0 { field.values_real() } else { field.derivative(theta).values_real() };
        let norm_at = |p: usize, q: Option<usize>| -> f64 {
            let mut s = 0.0;
            for (c, comp) in d.iter().enumerate() {
                let v = match q {
                    Some(q) => comp[p] - comp[q],
                    None => comp[p],
                };
                s += weights[c] * v * v;
            }
            s.sqrt()
        };
        if alpha == 0.0 {
            for p in 0..g.len() {
                value = value.max(norm_at(p, None));
            }
            continue;
        }
        for off in &offs {
            let len = h * ((off[0] * off[0] + off[1] * off[1] + off[2] * off[2]) as f64).sqrt();
            let denom = len.powf(alpha);
            for p in 0..g.len() {
                let ix = g.unindex(p);
                let q = g.index(
                    (ix[0] as i64 + off[0]).rem_euclid(n as i64) as usize,
                    (ix[1] as i64 + off[1]).rem_euclid(n as i64) as usize,
                    (ix[2] as i64 + off[2]).rem_euclid(n as i64) as usize,
                );
                value = value.max(norm_at(p, Some(q)) / denom);
            }
        }
        for &(p, q) in &pairs {
            let (a, b) = (g.unindex(p), g.unindex(q));
            let mut d2 = 0.0;
            for c in 0..3 {
                let mut dd = (a[c] as i64 - b[c] as i64).rem_euclid(n as i64);
                if dd > n as i64 / 2 {
                    dd = n as i64 - dd;
                }
                d2 += (dd * dd) as f64;
            }
            let len = h * d2.sqrt();
            value = value.max(norm_at(p, Some(q)) / len.powf(alpha));
        }
    }
    Ok(HolderEstimate { exponent, value, sampling_offsets: offs })
}

/// ‖f‖_s = Σ_{j ≤ m} [f]_j + [f]_s for s = m + α (the second term only when α > 0).
pub fn holder_norm(field: &PeriodicField, s: f64, opts: &HolderOptions) -> Result<f64, SpectralError> {
    let m = s.floor() as usize;
    let mut total = 0.0;
    for j in 0..=m {
        total += holder_seminorm_with(field, j as f64, opts)?.value;
    }
    if s > m as f64 {
        total += holder_seminorm_with(field, s, opts)?.value;
    }
    Ok(total)
}

#[derive(Clone, Debug)]
pub struct CommutatorSample {
    pub ell: f64,
    pub norm: f64,
    pub under_resolved: bool,
}

/// ‖(f∗ψ_ℓ)(g∗ψ_ℓ) − (fg)∗ψ_ℓ‖₀ for each ℓ, for scalar fields f and g.
pub fn commutator_probe(
    f: &PeriodicField,
    g: &PeriodicField,
    ells: &[f64],
) -> Result<Vec<CommutatorSample>, SpectralError> {
    if f.rank() != Rank::Scalar || g.rank() != Rank::Scalar || f.grid() != g.grid() {
        return Err(SpectralError::Dimension("commutator probe expects scalar fields on one grid".into()));
    }
    if ells.windows(2).any(|w| w[1] >= w[0]) {
        return Err(SpectralError::Invalid("scales must be strictly decreasing".into()));
    }
    let fg = super::scalar_times(f, g)?;
    let mut out = Vec::with_capacity(ells.len());
    for &ell in ells {
        let mf = mollify(f, ell)?;
        let mg = mollify(g, ell)?;
        let mfg = mollify(&fg, ell)?;
        let prod = super::scalar_times(&mf.field, &mg.field)?;
        let norm = prod.sub(&mfg.field)?.sup_norm();
        out.push(CommutatorSample { ell, norm, under_resolved: mf.under_resolved });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    #[test]
    fn constant_has_zero_seminorm() {
        let g = Grid::two_thirds(8).unwrap();
        let f = PeriodicField::constant(g, Rank::Scalar, &[2.0]);
        assert_eq!(holder_seminorm(&f, 0.5).unwrap().value, 0.0);
    }

    #[test]
    fn exponent_zero_is_sup_norm() {
        let g = Grid::two_thirds(8).unwrap();
        let f = PeriodicField::vector_fn(g, |x| [x[0].sin(), x[1].cos() * 0.5, 0.1]);
        assert_eq!(holder_seminorm(&f, 0.0).unwrap().value, f.sup_norm());
    }

    #[test]
    fn sine_gradient_sup_is_one() {
        let g = Grid::two_thirds(16).unwrap();
        let f = PeriodicField::scalar_fn(g, |x| x[0].sin());
        let v = holder_seminorm(&f, 1.0).unwrap().value;
        assert!((v - 1.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn unresolvable_order_is_rejected() {
        let g = Grid::two_thirds(8).unwrap();
        let f = PeriodicField::scalar_fn(g, |x| x[0].sin());
        assert!(holder_seminorm(&f, 5.5).is_err());
        assert!(holder_seminorm(&f, -0.5).is_err());
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(0).len(), 1);
        assert_eq!(multi_indices(2).len(), 6);
        assert_eq!(multi_indices(4).len(), 15);
    }
}
