//! Vector calculus and pointwise products built on spectral derivatives.

use super::{sym_index, Grid, PeriodicField, Rank, Space, SYM_PAIRS, ZERO};
use crate::error::SpectralError;
use num_complex::Complex64;

fn require(f: &PeriodicField, rank: Rank, what: &str) -> Result<(), SpectralError> {
    if f.rank() != rank {
        return Err(SpectralError::Dimension(format!("{what} expects {:?}, got {:?}", rank, f.rank())));
    }
    Ok(())
}

/// i k_c for axis c at storage index idx; zero on the Nyquist plane of that axis.
#[inline]
pub fn ik(g: &Grid, idx: usize, c: usize) -> Complex64 {
    let ix = g.unindex(idx)[c];
    if g.is_nyquist(ix) {
        ZERO
    } else {
        Complex64::new(0.0, g.wavenumber(ix) as f64)
    }
}

pub fn gradient(f: &PeriodicField) -> Result<PeriodicField, SpectralError> {
    require(f, Rank::Scalar, "gradient")?;
    let m = f.to_modes();
    let g = f.grid();
    let comps = (0..3)
        .map(|c| (0..g.len()).map(|idx| m.comp(0)[idx] * ik(&g, idx, c)).collect())
        .collect();
    PeriodicField::from_complex(g, Rank::Vector, Space::Modes, f.is_real(), comps)
}

/// Divergence of a vector field (scalar result) or of a symmetric tensor (vector result).
pub fn divergence(f: &PeriodicField) -> Result<PeriodicField, SpectralError> {
    let m = f.to_modes();
    let g = f.grid();
    match f.rank() {
        Rank::Vector => {
            let comp = (0..g.len())
                .map(|idx| (0..3).map(|c| m.comp(c)[idx] * ik(&g, idx, c)).sum())
                .collect();
            PeriodicField::from_complex(g, Rank::Scalar, Space::Modes, f.is_real(), vec![comp])
        }
        Rank::SymTensor => {
            let comps = (0..3)
                .map(|a| {
                    (0..g.len())
                        .map(|idx| (0..3).map(|b| m.comp(sym_index(a, b))[idx] * ik(&g, idx, b)).sum())
                        .collect()
                })
                .collect();
            PeriodicField::from_complex(g, Rank::Vector, Space::Modes, f.is_real(), comps)
        }
        Rank::Scalar => Err(SpectralError::Dimension("divergence of a scalar".into())),
    }
}

pub fn curl(f: &PeriodicField) -> Result<PeriodicField, SpectralError> {
    require(f, Rank::Vector, "curl")?;
    let m = f.to_modes();
    let g = f.grid();
    let mut comps = vec![vec![ZERO; g.len()]; 3];
    for idx in 0..g.len() {
        let k = [ik(&g, idx, 0), ik(&g, idx, 1), ik(&g, idx, 2)];
        let u = [m.comp(0)[idx], m.comp(1)[idx], m.comp(2)[idx]];
        comps[0][idx] = k[1] * u[2] - k[2] * u[1];
        comps[1][idx] = k[2] * u[0] - k[0] * u[2];
        comps[2][idx] = k[0] * u[1] - k[1] * u[0];
    }
    PeriodicField::from_complex(g, Rank::Vector, Space::Modes, f.is_real(), comps)
}

pub fn laplacian(f: &PeriodicField) -> PeriodicField {
    f.apply_symbol(|k| Complex64::new(-((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64), 0.0))
}

/// Gradient of each component of a vector field: entry [a][b] = ∂_b u_a, as values.
pub fn jacobian_values(u: &PeriodicField) -> Result<[[Vec<f64>; 3]; 3], SpectralError> {
    require(u, Rank::Vector, "jacobian")?;
    let mut out: [[Vec<f64>; 3]; 3] = Default::default();
    for a in 0..3 {
        let g = gradient(&u.component(a))?.values_real();
        for (b, comp) in g.into_iter().enumerate() {
            out[a][b] = comp;
        }
    }
    Ok(out)
}

fn values_of(f: &PeriodicField) -> Vec<Vec<f64>> {
    f.values_real()
}

/// Pointwise symmetric product ½(a⊗b + b⊗a) of two real vector fields.
pub fn sym_outer(a: &PeriodicField, b: &PeriodicField) -> Result<PeriodicField, SpectralError> {
    require(a, Rank::Vector, "sym_outer")?;
    require(b, Rank::Vector, "sym_outer")?;
    let (va, vb) = (values_of(a), values_of(b));
    let g = a.grid();
    let comps = SYM_PAIRS
        .iter()
        .map(|&(i, j)| {
            (0..g.len())
                .map(|p| 0.5 * (va[i][p] * vb[j][p] + va[j][p] * vb[i][p]))
                .collect()
        })
        .collect();
    PeriodicField::from_real_values(g, Rank::SymTensor, comps)
}

/// Pointwise u⊗u.
pub fn outer_self(u: &PeriodicField) -> Result<PeriodicField, SpectralError> {
    sym_outer(u, u)
}

/// Pointwise Euclidean inner product of two vector fields.
pub fn dot(a: &PeriodicField, b: &PeriodicField) -> Result<PeriodicField, SpectralError> {
    require(a, Rank::Vector, "dot")?;
    require(b, Rank::Vector, "dot")?;
    let (va, vb) = (values_of(a), values_of(b));
    let g = a.grid();
    let v = (0..g.len()).map(|p| (0..3).map(|c| va[c][p] * vb[c][p]).sum()).collect();
    PeriodicField::from_real_values(g, Rank::Scalar, vec![v])
}

/// Pointwise product of a scalar field with a field of any rank.
pub fn scalar_times(s: &PeriodicField, f: &PeriodicField) -> Result<PeriodicField, SpectralError> {
    require(s, Rank::Scalar, "scalar_times")?;
    if s.grid() != f.grid() {
        return Err(SpectralError::Dimension("grids differ".into()));
    }
    let vs = s.real_values(0);
    let vf = values_of(f);
    let comps = vf
        .into_iter()
        .map(|c| c.into_iter().zip(&vs).map(|(x, y)| x * y).collect())
        .collect();
    PeriodicField::from_real_values(f.grid(), f.rank(), comps)
}

pub fn trace(t: &PeriodicField) -> Result<PeriodicField, SpectralError> {
    require(t, Rank::SymTensor, "trace")?;
    let v = values_of(t);
    let g = t.grid();
    let tr = (0..g.len()).map(|p| v[0][p] + v[3][p] + v[5][p]).collect();
    PeriodicField::from_real_values(g, Rank::Scalar, vec![tr])
}

/// Trace-free part T - (tr T / 3) Id, computed in the space of T.
pub fn traceless(t: &PeriodicField) -> Result<PeriodicField, SpectralError> {
    require(t, Rank::SymTensor, "traceless")?;
    let mut out = t.clone();
    let g = t.grid();
    let comps = out.comps_mut();
    for p in 0..g.len() {
        let tr = (comps[0][p] + comps[3][p] + comps[5][p]) / 3.0;
        comps[0][p] -= tr;
        comps[3][p] -= tr;
        comps[5][p] -= tr;
    }
    Ok(out)
}

/// Symmetric tensor s·Id for a scalar field s.
pub fn identity_times(s: &PeriodicField) -> Result<PeriodicField, SpectralError> {
    require(s, Rank::Scalar, "identity_times")?;
    let v = s.to_values();
    let z = vec![ZERO; s.grid().len()];
    let d = v.comp(0).to_vec();
    PeriodicField::from_complex(
        s.grid(),
        Rank::SymTensor,
        Space::Values,
        s.is_real(),
        vec![d.clone(), z.clone(), z.clone(), d.clone(), z, d],
    )
}

/// Grid mean of the pointwise contraction A : B of two fields of equal rank.
pub fn mean_contraction(a: &PeriodicField, b: &PeriodicField) -> Result<f64, SpectralError> {
    if a.rank() != b.rank() || a.grid() != b.grid() {
        return Err(SpectralError::Dimension("contraction of mismatched fields".into()));
    }
    let (ma, mb) = (a.to_modes(), b.to_modes());
    let w = a.rank().norm_weights();
    let mut s = 0.0;
    for c in 0..w.len() {
        s += w[c]
            * ma.comp(c)
                .iter()
                .zip(mb.comp(c))
                .map(|(x, y)| (x * y.conj()).re)
                .sum::<f64>();
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn div_curl_and_curl_grad_vanish() {
        let g = Grid::two_thirds(16).unwrap();
        let u = PeriodicField::vector_fn(g, |x| {
            [(x[1] + 2.0 * x[2]).sin(), (x[0]).cos() * x[2].sin(), (x[0] - x[1]).cos()]
        });
        let c = curl(&u).unwrap();
        assert!(divergence(&c).unwrap().sup_norm() < 1e-12);
        let s = PeriodicField::scalar_fn(g, |x| (x[0] + x[1] + 3.0 * x[2]).sin());
        assert!(curl(&gradient(&s).unwrap()).unwrap().sup_norm() < 1e-11);
    }

    #[test]
    fn tensor_divergence_of_identity_times_scalar_is_gradient() {
        let g = Grid::two_thirds(16).unwrap();
        let s = PeriodicField::scalar_fn(g, |x| (2.0 * x[0] - x[2]).cos());
        let d = divergence(&identity_times(&s).unwrap()).unwrap();
        let e = gradient(&s).unwrap();
        assert!(d.sub(&e).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn traceless_part_has_zero_trace() {
        let g = Grid::two_thirds(8).unwrap();
        let u = PeriodicField::vector_fn(g, |x| [x[0].sin(), 1.0, x[1].cos()]);
        let t = traceless(&outer_self(&u).unwrap()).unwrap();
        assert!(trace(&t).unwrap().sup_norm() < 1e-14);
    }
}
