//! Energy budget e_tot(t) = ½⨍|v|² + ∫₀ᵗ ν⨍|(−Δ)^{γ/2}v|² of a sampled velocity.

use crate::spectral::PeriodicField;
use serde::Serialize;

/// ν⨍|(−Δ)^{γ/2}v|², computed from the Fourier coefficients.
pub fn dissipation_rate(v: &PeriodicField, nu: f64, gamma: f64) -> f64 {
    let m = v.to_modes();
    let g = m.grid();
    let mut s = 0.0;
    for idx in 0..g.len() {
        let k = g.wavevector(idx);
        let k2 = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64;
        if k2 == 0.0 {
            continue;
        }
        let w = k2.powf(gamma);
        for c in m.comps() {
            s += w * c[idx].norm_sqr();
        }
    }
    nu * s
}

/// Running integral of uniformly spaced samples, fourth order in the spacing.
pub fn cumulative_integral(h: f64, f: &[f64]) -> Vec<f64> {
    let m = f.len();
    let mut out = vec![0.0; m];
    if m < 2 {
        return out;
    }
    for j in 0..m - 1 {
        let piece = if m < 4 {
            0.5 * (f[j] + f[j + 1])
        } else if j == 0 {
            (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3]) / 24.0
        } else if j == m - 2 {
            (9.0 * f[m - 1] + 19.0 * f[m - 2] - 5.0 * f[m - 3] + f[m - 4]) / 24.0
        } else {
            (-f[j - 1] + 13.0 * f[j] + 13.0 * f[j + 1] - f[j + 2]) / 24.0
        };
        out[j + 1] = out[j] + h * piece;
    }
    out
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct DissipationAudit {
    pub times: Vec<f64>,
    /// ⨍|v|²
    pub energy: Vec<f64>,
    pub dissipation_integral: Vec<f64>,
    pub e_tot: Vec<f64>,
    /// max_t |e_tot(t) − e_tot(0)| / e_tot(0)
    pub relative_drift: f64,
    /// max over sampled s < t of e_tot(t) − e_tot(s); the Leray-Hopf inequality
    /// between all sampled pairs holds iff this is ≤ 0
    pub max_increase: f64,
    /// Number of consecutive samples with e_tot increasing.
    pub increases: usize,
}

/// e_tot from ⨍|v|² and ν⨍|(−Δ)^{γ/2}v|² on uniformly spaced times.
pub fn dissipation_audit(times: &[f64], energy: &[f64], rate: &[f64]) -> DissipationAudit {
    let m = times.len();
    if m == 0 {
        return DissipationAudit::default();
    }
    let h = if m > 1 { times[1] - times[0] } else { 0.0 };
    let integral = cumulative_integral(h, rate);
    let e_tot: Vec<f64> = energy.iter().zip(&integral).map(|(e, d)| 0.5 * e + d).collect();
    let base = e_tot[0];
    let relative_drift = if base != 0.0 {
        e_tot.iter().map(|x| ((x - base) / base).abs()).fold(0.0, f64::max)
    } else {
        e_tot.iter().map(|x| x.abs()).fold(0.0, f64::max)
    };
    let mut running = f64::NEG_INFINITY;
    let mut max_increase = f64::NEG_INFINITY;
    for &x in &e_tot {
        if running > f64::NEG_INFINITY {
            max_increase = max_increase.max(x - running);
        }
        running = running.max(x);
    }
    if m == 1 {
        max_increase = 0.0;
    }
    let increases = e_tot.windows(2).filter(|w| w[1] > w[0]).count();
    DissipationAudit {
        times: times.to_vec(),
        energy: energy.to_vec(),
        dissipation_integral: integral,
        e_tot,
        relative_drift,
        max_increase,
        increases,
    }
}

/// Audit of a uniformly sampled velocity series.
pub fn audit_velocities(times: &[f64], velocity: &[PeriodicField], nu: f64, gamma: f64) -> DissipationAudit {
    let energy: Vec<f64> = velocity.iter().map(|v| v.mean_square()).collect();
    let rate: Vec<f64> = velocity.iter().map(|v| dissipation_rate(v, nu, gamma)).collect();
    dissipation_audit(times, &energy, &rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid;

    #[test]
    fn integral_is_exact_on_cubics() {
        let h = 0.1;
        let f: Vec<f64> = (0..12).map(|j| {
            let t = j as f64 * h;
            1.0 - t + 3.0 * t * t - t * t * t
        }).collect();
        let out = cumulative_integral(h, &f);
        for (j, v) in out.iter().enumerate() {
            let t = j as f64 * h;
            let exact = t - t * t / 2.0 + t * t * t - t.powi(4) / 4.0;
            assert!((v - exact).abs() < 1e-13, "{j}");
        }
    }

    #[test]
    fn zero_velocity_has_zero_budget() {
        let g = Grid::two_thirds(8).unwrap();
        let v = vec![PeriodicField::zeros(g, crate::spectral::Rank::Vector, crate::spectral::Space::Modes); 5];
        let a = audit_velocities(&[0.0, 0.1, 0.2, 0.3, 0.4], &v, 0.3, 0.4);
        assert!(a.e_tot.iter().all(|x| *x == 0.0));
        assert_eq!(a.increases, 0);
        assert!(a.max_increase <= 0.0);
    }

    #[test]
    fn rate_of_a_single_mode() {
        let g = Grid::two_thirds(16).unwrap();
        let v = PeriodicField::vector_fn(g, |x| [0.0, (2.0 * x[0]).sin(), 0.0]);
        let r = dissipation_rate(&v, 0.5, 0.3);
        assert!((r - 0.5 * 0.5 * 4f64.powf(0.3)).abs() < 1e-14);
    }
}
