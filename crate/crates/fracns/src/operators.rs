//! Fourier-multiplier operators: fractional Laplacian, Poisson/pressure solve,
//! Leray projection, Biot-Savart, the inverse divergence, and probes for the
//! stationary-phase and Calderón-Zygmund bounds.
//!
//! Every inversion of the Laplacian sends the k = 0 mode to zero.

use crate::error::SpectralError;
use crate::spectral::{
    holder_seminorm_with, ik, outer_self, sym_index, HolderOptions, PeriodicField, Rank, Space, SYM_PAIRS, ZERO,
};
use num_complex::Complex64;

#[inline]
fn k2(k: [i64; 3]) -> f64 {
    (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64
}

/// Named Fourier multipliers with their rank signature and k = 0 convention.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Multiplier {
    /// |k|^{2γ}
    FractionalLaplacian(f64),
    /// -1/|k|²
    InverseLaplacian,
    /// Id - k⊗k/|k|²
    Leray,
    /// ik×·/|k|²
    BiotSavart,
    /// symmetric inverse divergence
    InverseDivergence,
    /// k_i k_j / |k|² acting on scalars (the operator ∂_i∂_jΔ⁻¹ with sign)
    SecondRiesz(usize, usize),
}

impl Multiplier {
    pub fn name(&self) -> String {
        match self {
            Multiplier::FractionalLaplacian(g) => format!("fractional_laplacian(gamma={g})"),
            Multiplier::InverseLaplacian => "inverse_laplacian".into(),
            Multiplier::Leray => "leray_projection".into(),
            Multiplier::BiotSavart => "biot_savart".into(),
            Multiplier::InverseDivergence => "inverse_divergence".into(),
            Multiplier::SecondRiesz(i, j) => format!("second_riesz({i},{j})"),
        }
    }

    pub fn input_rank(&self) -> Rank {
        match self {
            Multiplier::FractionalLaplacian(_) | Multiplier::InverseLaplacian => Rank::Scalar,
            Multiplier::SecondRiesz(..) => Rank::Scalar,
            _ => Rank::Vector,
        }
    }

    pub fn output_rank(&self) -> Rank {
        match self {
            Multiplier::InverseDivergence => Rank::SymTensor,
            other => other.input_rank(),
        }
    }

    pub fn zero_mode_convention(&self) -> &'static str {
        match self {
            Multiplier::Leray => "mean passes through unchanged",
            _ => "k = 0 mapped to 0",
        }
    }

    /// Apply the operator. Scalar multipliers accept any rank and act componentwise.
    pub fn apply(&self, f: &PeriodicField) -> Result<PeriodicField, SpectralError> {
        match *self {
            Multiplier::FractionalLaplacian(g) => Ok(fractional_laplacian(f, g)),
            Multiplier::InverseLaplacian => Ok(inverse_laplacian(f)),
            Multiplier::Leray => leray(f),
            Multiplier::BiotSavart => biot_savart(f),
            Multiplier::InverseDivergence => Ok(inverse_divergence(f)?.field),
            Multiplier::SecondRiesz(i, j) => Ok(second_riesz(f, i, j)),
        }
    }
}

/// (−Δ)^γ: mode k scaled by |k|^{2γ}; the mean is sent to zero.
pub fn fractional_laplacian(f: &PeriodicField, gamma: f64) -> PeriodicField {
    f.apply_symbol(|k| {
        let s = k2(k);
        if s == 0.0 {
            ZERO
        } else {
            Complex64::new(s.powf(gamma), 0.0)
        }
    })
}

/// Δ⁻¹ on mean-free fields.
pub fn inverse_laplacian(f: &PeriodicField) -> PeriodicField {
    f.apply_symbol(|k| {
        let s = k2(k);
        if s == 0.0 {
            ZERO
        } else {
            Complex64::new(-1.0 / s, 0.0)
        }
    })
}

/// ∂_i∂_jΔ⁻¹ (symbol k_i k_j/|k|²), a Calderón-Zygmund operator of order zero.
pub fn second_riesz(f: &PeriodicField, i: usize, j: usize) -> PeriodicField {
    f.apply_symbol(|k| {
        let s = k2(k);
        if s == 0.0 {
            ZERO
        } else {
            Complex64::new((k[i] * k[j]) as f64 / s, 0.0)
        }
    })
}

/// Zero-mean pressure solving Δp = div div M for a symmetric tensor M.
pub fn pressure_from_stress(m: &PeriodicField) -> Result<PeriodicField, SpectralError> {
    if m.rank() != Rank::SymTensor {
        return Err(SpectralError::Dimension("pressure solve expects a symmetric tensor".into()));
    }
    let g = m.grid();
    let mm = m.to_modes();
    let mut p = vec![ZERO; g.len()];
    for (idx, out) in p.iter_mut().enumerate() {
        let k = g.wavevector(idx);
        let s = k2(k);
        if s == 0.0 || g.touches_nyquist(idx) {
            continue;
        }
        let mut acc = ZERO;
        for a in 0..3 {
            for b in 0..3 {
                acc += mm.comp(sym_index(a, b))[idx] * (k[a] * k[b]) as f64;
            }
        }
        *out = acc / s;
    }
    PeriodicField::from_complex(g, Rank::Scalar, Space::Modes, m.is_real(), vec![p])
}

/// Pressure of the Navier-Stokes-Reynolds system: Δp = div div(−v⊗v + R̊), zero mean.
pub fn pressure_from_velocity(v: &PeriodicField, r: Option<&PeriodicField>) -> Result<PeriodicField, SpectralError> {
    let mut m = outer_self(v)?.scale(-1.0);
    if let Some(r) = r {
        m = m.add(r)?;
    }
    pressure_from_stress(&m)
}

/// Leray projection v − ∇Δ⁻¹ div v.
pub fn leray(v: &PeriodicField) -> Result<PeriodicField, SpectralError> {
    if v.rank() != Rank::Vector {
        return Err(SpectralError::Dimension("Leray projection expects a vector field".into()));
    }
    let g = v.grid();
    let mut out = v.to_modes();
    let comps = out.comps_mut();
    for idx in 0..g.len() {
        let k = g.wavevector(idx);
        let s = k2(k);
        if s == 0.0 {
            continue;
        }
        if g.touches_nyquist(idx) {
            for c in comps.iter_mut() {
                c[idx] = ZERO;
            }
            continue;
        }
        let kd: Complex64 = (0..3).map(|c| comps[c][idx] * k[c] as f64).sum::<Complex64>() / s;
        for c in 0..3 {
            comps[c][idx] -= kd * k[c] as f64;
        }
    }
    Ok(out)
}

/// z = (−Δ)⁻¹ curl v, so that div z = 0 and curl z = v − mean(v) for divergence-free v.
pub fn biot_savart(v: &PeriodicField) -> Result<PeriodicField, SpectralError> {
    if v.rank() != Rank::Vector {
        return Err(SpectralError::Dimension("Biot-Savart expects a vector field".into()));
    }
    let g = v.grid();
    let m = v.to_modes();
    let mut comps = vec![vec![ZERO; g.len()]; 3];
    for idx in 0..g.len() {
        let s = k2(g.wavevector(idx));
        if s == 0.0 {
            continue;
        }
        let k = [ik(&g, idx, 0), ik(&g, idx, 1), ik(&g, idx, 2)];
        let u = [m.comp(0)[idx], m.comp(1)[idx], m.comp(2)[idx]];
        comps[0][idx] = (k[1] * u[2] - k[2] * u[1]) / s;
        comps[1][idx] = (k[2] * u[0] - k[0] * u[2]) / s;
        comps[2][idx] = (k[0] * u[1] - k[1] * u[0]) / s;
    }
    PeriodicField::from_complex(g, Rank::Vector, Space::Modes, v.is_real(), comps)
}

#[derive(Clone, Debug)]
pub struct InverseDivergence {
    pub field: PeriodicField,
    /// Norm of the mean that was subtracted before inversion.
    pub removed_mean: f64,
    /// Sup norm of the trace of the output.
    pub trace_norm: f64,
}

/// Tolerance on the input mean, relative to 1 + ‖f‖₀.
pub const MEAN_TOLERANCE: f64 = 1e-9;

/// Symmetric R f with div(R f) = f for mean-free f. Inputs whose mean exceeds
/// the tolerance are rejected; smaller means are removed and recorded.
pub fn inverse_divergence(f: &PeriodicField) -> Result<InverseDivergence, SpectralError> {
    if f.rank() != Rank::Vector {
        return Err(SpectralError::Dimension("inverse divergence expects a vector field".into()));
    }
    let mean = f.mean_norm();
    if mean > MEAN_TOLERANCE * (1.0 + f.sup_norm()) {
        return Err(SpectralError::NonzeroMean(mean));
    }
    let field = inverse_divergence_unchecked(f);
    let trace_norm = crate::spectral::trace(&field)?.sup_norm();
    Ok(InverseDivergence { field, removed_mean: mean, trace_norm })
}

/// Inverse divergence applied after dropping the mean and the Nyquist planes.
pub fn inverse_divergence_unchecked(f: &PeriodicField) -> PeriodicField {
    let g = f.grid();
    let m = f.to_modes();
    let mut comps = vec![vec![ZERO; g.len()]; 6];
    let i = Complex64::new(0.0, 1.0);
    for idx in 0..g.len() {
        let k = g.wavevector(idx);
        let s = k2(k);
        if s == 0.0 || g.touches_nyquist(idx) {
            continue;
        }
        let u = [m.comp(0)[idx], m.comp(1)[idx], m.comp(2)[idx]];
        let kf: Complex64 = (0..3).map(|c| u[c] * k[c] as f64).sum();
        for (slot, &(a, b)) in SYM_PAIRS.iter().enumerate() {
            let (ka, kb) = (k[a] as f64, k[b] as f64);
            let mut v = i * 0.5 * ka * kb * kf / (s * s) - i * (u[b] * ka + u[a] * kb) / s;
            if a == b {
                v += i * 0.5 * kf / s;
            }
            comps[slot][idx] = v;
        }
    }
    PeriodicField::from_complex(g, Rank::SymTensor, Space::Modes, f.is_real(), comps)
        .expect("six components on the input grid")
}

#[derive(Clone, Debug)]
pub struct PhaseSample {
    pub k: [i64; 3],
    /// Grid mean of a·e^{ik·Φ}.
    pub integral: Complex64,
    /// Hölder-α estimate of R(a cos(k·Φ) ê − mean), ê ⟂ k.
    pub r_norm_alpha: f64,
}

/// Oscillatory integrals ⨍ a e^{ik·Φ} and ‖R(a cos(k·Φ) ê)‖_α for Φ = id + phi_minus_id.
pub fn stationary_phase_probe(
    a: &PeriodicField,
    phi_minus_id: &PeriodicField,
    ks: &[[i64; 3]],
    alpha: f64,
    opts: &HolderOptions,
) -> Result<Vec<PhaseSample>, SpectralError> {
    if a.rank() != Rank::Scalar || phi_minus_id.rank() != Rank::Vector || a.grid() != phi_minus_id.grid() {
        return Err(SpectralError::Dimension("phase probe expects a scalar amplitude and a vector map".into()));
    }
    let g = a.grid();
    let av = a.real_values(0);
    let psi = phi_minus_id.values_real();
    let jac = crate::spectral::jacobian_values(phi_minus_id)?;
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        // largest local wavenumber |∇(k·Φ)| over the grid
        let mut local: f64 = 0.0;
        for p in 0..g.len() {
            let mut s2 = 0.0;
            for c in 0..3 {
                let d: f64 = (0..3).map(|r| k[r] as f64 * (jac[r][c][p] + if r == c { 1.0 } else { 0.0 })).sum();
                s2 += d * d;
            }
            local = local.max(s2.sqrt());
        }
        if local >= g.nyquist() as f64 {
            return Err(SpectralError::Invalid(format!(
                "local wavenumber {local} of the phase reaches the grid Nyquist {}",
                g.nyquist()
            )));
        }
        let e = unit_normal(k);
        let mut integral = ZERO;
        let mut vec = vec![vec![0.0; g.len()]; 3];
        for p in 0..g.len() {
            let x = g.point(p);
            let ph: f64 = (0..3).map(|c| k[c] as f64 * (x[c] + psi[c][p])).sum();
            integral += Complex64::from_polar(av[p], ph);
            for c in 0..3 {
                vec[c][p] = av[p] * ph.cos() * e[c];
            }
        }
        integral /= g.len() as f64;
        let f = PeriodicField::from_real_values(g, Rank::Vector, vec)?.without_mean();
        let r = inverse_divergence_unchecked(&f);
        let r_norm_alpha = holder_seminorm_with(&r, alpha, opts)?.value;
        out.push(PhaseSample { k, integral, r_norm_alpha });
    }
    Ok(out)
}

fn unit_normal(k: [i64; 3]) -> [f64; 3] {
    let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
    let trial = if kf[0].abs() <= kf[1].abs() && kf[0].abs() <= kf[2].abs() {
        [1.0, 0.0, 0.0]
    } else if kf[1].abs() <= kf[2].abs() {
        [0.0, 1.0, 0.0]
    } else {
        [0.0, 0.0, 1.0]
    };
    let c = [
        kf[1] * trial[2] - kf[2] * trial[1],
        kf[2] * trial[0] - kf[0] * trial[2],
        kf[0] * trial[1] - kf[1] * trial[0],
    ];
    let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    if n == 0.0 {
        [1.0, 0.0, 0.0]
    } else {
        [c[0] / n, c[1] / n, c[2] / n]
    }
}

/// Ratio [∂_i∂_jΔ⁻¹ f]_α / [f]_α; bounded uniformly for Calderón-Zygmund operators.
pub fn calderon_zygmund_ratio(
    f: &PeriodicField,
    i: usize,
    j: usize,
    alpha: f64,
    opts: &HolderOptions,
) -> Result<f64, SpectralError> {
    let num = holder_seminorm_with(&second_riesz(&f.without_mean(), i, j), alpha, opts)?.value;
    let den = holder_seminorm_with(f, alpha, opts)?.value;
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{curl, divergence, Grid};

    fn grid(n: usize) -> Grid {
        Grid::two_thirds(n).unwrap()
    }

    #[test]
    fn fractional_laplacian_on_single_modes() {
        let g = grid(8);
        let f = PeriodicField::scalar_fn(g, |x| (2.0 * x[0]).cos());
        let out = fractional_laplacian(&f, 0.5);
        assert!(out.sub(&f.scale(2.0)).unwrap().sup_norm() < 1e-12);
        let h = PeriodicField::scalar_fn(g, |x| x[0].sin());
        assert!(fractional_laplacian(&h, 0.25).sub(&h).unwrap().sup_norm() < 1e-12);
    }

    #[test]
    fn pressure_of_shear_flow_is_zero() {
        let g = grid(8);
        let v = PeriodicField::vector_fn(g, |x| [x[1].sin(), 0.0, 0.0]);
        let p = pressure_from_velocity(&v, None).unwrap();
        assert!(p.sup_norm() < 1e-13);
    }

    #[test]
    fn biot_savart_of_single_mode() {
        let g = grid(8);
        let v = PeriodicField::vector_fn(g, |x| [0.0, 0.0, x[0].sin()]);
        let z = biot_savart(&v).unwrap();
        // curl (0,0,sin x1) = (0, -cos x1, 0) and (−Δ)⁻¹ leaves |k| = 1 modes unchanged
        let e = PeriodicField::vector_fn(g, |x| [0.0, -x[0].cos(), 0.0]);
        assert!(z.sub(&e).unwrap().sup_norm() < 1e-13);
        assert!(curl(&z).unwrap().sub(&v).unwrap().sup_norm() < 1e-13);
    }

    #[test]
    fn inverse_divergence_of_cosine() {
        let g = grid(8);
        let f = PeriodicField::vector_fn(g, |x| [x[2].cos(), 0.0, 0.0]);
        let r = inverse_divergence(&f).unwrap();
        assert!(divergence(&r.field).unwrap().sub(&f).unwrap().sup_norm() < 1e-13);
        assert!(r.trace_norm < 1e-13);
    }

    #[test]
    fn inverse_divergence_rejects_mean() {
        let g = grid(8);
        let f = PeriodicField::vector_fn(g, |x| [1.0 + x[2].cos(), 0.0, 0.0]);
        assert!(matches!(inverse_divergence(&f), Err(SpectralError::NonzeroMean(_))));
    }

    #[test]
    fn phase_integral_of_single_mode_amplitude() {
        let g = grid(16);
        let a = PeriodicField::scalar_fn(g, |x| 1.0 + 0.1 * x[0].sin());
        let zero = PeriodicField::zeros(g, Rank::Vector, Space::Values);
        let s = stationary_phase_probe(&a, &zero, &[[1, 0, 0], [2, 0, 0]], 0.5, &HolderOptions::coarse()).unwrap();
        assert!((s[0].integral.norm() - 0.05).abs() < 1e-12, "{}", s[0].integral);
        assert!(s[1].integral.norm() < 1e-12);
        assert!(stationary_phase_probe(&a, &zero, &[[8, 0, 0]], 0.5, &HolderOptions::coarse()).is_err());
    }
}
