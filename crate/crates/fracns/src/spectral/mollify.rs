//! Convolution with the compactly supported bump ψ_ℓ(y) = c exp(-1/(1-|y/ℓ|²)).
//!
//! The kernel is sampled on the collocation grid (minimal periodic images),
//! normalized to unit discrete mass, and the periodic convolution is carried
//! out by multiplying coefficients with the kernel's discrete transform.

use super::{Fft3, Grid, PeriodicField};
use crate::error::SpectralError;
use num_complex::Complex64;

/// Radial profile of the standard bump on the unit ball.
pub fn bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

#[derive(Clone, Debug)]
pub struct Mollified {
    pub field: PeriodicField,
    /// Set when ℓ is below two grid spacings.
    pub under_resolved: bool,
}

/// Coefficient-space multiplier of the discretely sampled, unit-mass kernel at scale ell.
pub fn mollifier_multiplier(grid: Grid, ell: f64) -> Result<Vec<f64>, SpectralError> {
    if !(ell > 0.0) || !ell.is_finite() {
        return Err(SpectralError::Invalid(format!("mollification scale {ell} must be positive")));
    }
    let n = grid.n();
    let h = grid.spacing();
    let mut kernel = vec![Complex64::new(0.0, 0.0); grid.len()];
    let reach = ((ell / h).ceil() as usize).min(n / 2);
    let mut mass = 0.0;
    let wrap = |d: i64| d.rem_euclid(n as i64) as usize;
    for a in -(reach as i64)..=(reach as i64) {
        for b in -(reach as i64)..=(reach as i64) {
            for c in -(reach as i64)..=(reach as i64) {
                let r = h * ((a * a + b * b + c * c) as f64).sqrt() / ell;
                let v = bump(r);
                if v > 0.0 {
                    kernel[grid.index(wrap(a), wrap(b), wrap(c))] += v;
                    mass += v;
                }
            }
        }
    }
    if mass == 0.0 {
        // the support contains no grid point besides possibly none: identity
        kernel[0] = Complex64::new(1.0, 0.0);
        mass = 1.0;
    }
    for z in kernel.iter_mut() {
        *z /= mass;
    }
    // the forward transform includes 1/n³; the multiplier is the raw sum
    Fft3::plan(n).forward(&mut kernel);
    let scale = grid.len() as f64;
    Ok(kernel.into_iter().map(|z| z.re * scale).collect())
}

pub fn mollify(field: &PeriodicField, ell: f64) -> Result<Mollified, SpectralError> {
    let grid = field.grid();
    let mult = mollifier_multiplier(grid, ell)?;
    let mut out = field.to_modes();
    for comp in out.comps_mut() {
        for (z, m) in comp.iter_mut().zip(&mult) {
            *z *= *m;
        }
    }
    Ok(Mollified { field: out, under_resolved: ell < 2.0 * grid.spacing() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Rank;

    #[test]
    fn constant_is_preserved() {
        let g = Grid::two_thirds(16).unwrap();
        let f = PeriodicField::constant(g, Rank::Scalar, &[1.7]);
        let m = mollify(&f, 0.9).unwrap();
        assert!(!m.under_resolved);
        assert!(m.field.sub(&f).unwrap().sup_norm() < 1e-13);
    }

    #[test]
    fn small_scale_is_flagged() {
        let g = Grid::two_thirds(16).unwrap();
        let f = PeriodicField::scalar_fn(g, |x| x[0].sin());
        assert!(mollify(&f, 0.5).unwrap().under_resolved);
        assert!(mollify(&f, -1.0).is_err());
    }

    #[test]
    fn kernel_multiplier_is_real_even_and_bounded() {
        let g = Grid::two_thirds(16).unwrap();
        let m = mollifier_multiplier(g, 1.2).unwrap();
        assert!((m[0] - 1.0).abs() < 1e-14);
        assert!(m.iter().all(|v| v.abs() <= 1.0 + 1e-14));
    }
}
