use fracns::error::PerturbationError;
use fracns::mikado::MikadoFamily;
use fracns::perturbation::{
    assemble_next, EtaCutoffs, GluedSlice, PerturbationConfig, PerturbationSample, Perturber,
    PumpInput,
};
use fracns::spectral::{divergence, Grid, PeriodicField, Rank, Space, SYM_PAIRS};
use fracns::weak_form::WeakFormOracle;
use proptest::prelude::*;

fn perturber(n: usize, freq: u64, tau: f64, t_end: f64) -> Perturber {
    let g = Grid::two_thirds(n).unwrap();
    let eta = EtaCutoffs::new(tau, t_end).unwrap();
    Perturber::new(MikadoFamily::standard().unwrap(), g, freq, eta, 0.1, &PerturbationConfig::default()).unwrap()
}

fn constant_stress(g: Grid, m: [[f64; 3]; 3]) -> PeriodicField {
    let vals: Vec<f64> = SYM_PAIRS.iter().map(|&(a, b)| m[a][b]).collect();
    PeriodicField::constant(g, Rank::SymTensor, &vals)
}

fn zero_flow(g: Grid) -> PeriodicField {
    PeriodicField::zeros(g, Rank::Vector, Space::Modes)
}

/// Volume-preserving displacement: Φ(x) = x + ε(sin x₂, 0, cos x₁) has det ∇Φ = 1.
fn shear_flow(g: Grid, eps: f64) -> PeriodicField {
    PeriodicField::vector_fn(g, |x| [eps * x[1].sin(), 0.0, eps * x[0].cos()]).to_modes()
}

fn input<'a>(
    pert: &Perturber,
    t: f64,
    stress: &'a PeriodicField,
    flow: &'a PeriodicField,
    e: f64,
) -> PumpInput<'a> {
    let flows = pert.eta.active_within(t, 0.02).into_iter().map(|i| (i, flow)).collect();
    PumpInput { t, stress, glued_energy: 0.0, target_energy: e, flows }
}

#[test]
fn identity_flow_and_zero_stress_give_the_scaled_mikado_field() {
    let p = perturber(32, 2, 0.5, 1.5);
    let g = p.grid();
    // η_0 = 1 everywhere on [t_1 + τ/3, t_1 + 2τ/3]
    let t = 0.5 + 0.25;
    let stress = constant_stress(g, [[0.0; 3]; 3]);
    let flow = zero_flow(g);
    let inp = input(&p, t, &stress, &flow, 1.0);
    assert_eq!(inp.flows.len(), 1);
    let (s, principal) = p.perturb_with_principal(&inp).unwrap();
    let amp = (s.rho_q / s.mass).sqrt();
    let gamma = p.family.coefficients(&fracns::mikado::identity()).unwrap();
    let expected = PeriodicField::vector_fn(g, |x| {
        p.fourier.evaluate(&gamma, [2.0 * x[0], 2.0 * x[1], 2.0 * x[2]]).map(|c| c * amp)
    });
    assert!(principal.sub(&expected).unwrap().sup_norm() < 1e-12);
    let scale = expected.sup_norm();
    assert!(s.w.sub(&expected).unwrap().sup_norm() < 1e-8 * scale, "{}", s.w.sub(&expected).unwrap().sup_norm());
    assert!(s.w.mean_norm() < 1e-12);
    assert!(divergence(&s.w).unwrap().sup_norm() < 1e-8 * scale);
    assert!((s.rho_q - (1.0 - 0.05) / 3.0).abs() < 1e-15);
}

#[test]
fn perturbation_splits_into_principal_part_and_corrector() {
    // a gentle tilt keeps the cutoff gradient resolved on a 32³ grid
    let g = Grid::two_thirds(32).unwrap();
    let eta = EtaCutoffs::with_shape(0.5, 1.5, 0.05, 0.02, 0.25).unwrap();
    let p = Perturber::new(MikadoFamily::standard().unwrap(), g, 2, eta, 0.1, &PerturbationConfig::default()).unwrap();
    let flow = shear_flow(g, 0.05);
    let stress = PeriodicField::from_fn(g, Rank::SymTensor, |x, out| {
        let s = 0.02 * x[0].cos();
        out.copy_from_slice(&[s, 0.01, 0.0, -0.5 * s, 0.0, -0.5 * s]);
    });
    // inside a ramp of η so that the cutoff gradient enters the corrector
    for &t in &[0.75, 0.9, 0.95] {
        let inp = input(&p, t, &stress, &flow, 1.0);
        let (s, principal) = p.perturb_with_principal(&inp).unwrap();
        let corrector = p.corrector(&inp).unwrap();
        let sum = principal.add(&corrector).unwrap().dealiased();
        let err = s.w.sub(&sum).unwrap().sup_norm();
        assert!(err < 1e-6 * s.w.sup_norm(), "t = {t}: {err} vs {}", s.w.sup_norm());
        assert!(corrector.sup_norm() > 1e-4 * principal.sup_norm());
    }
}

#[test]
fn pumped_energy_matches_the_gap() {
    let p = perturber(16, 2, 0.5, 1.5);
    let g = p.grid();
    let stress = constant_stress(g, [[0.01, 0.0, 0.0], [0.0, -0.01, 0.0], [0.0, 0.0, 0.0]]);
    let flow = zero_flow(g);
    for j in 0..=30 {
        let t = j as f64 * 0.05;
        let s = p.perturb(&input(&p, t, &stress, &flow, 0.8)).unwrap();
        let mean_rho = s.rho_sum.iter().sum::<f64>() / g.len() as f64;
        assert!((mean_rho - s.rho_q).abs() < 1e-12 * s.rho_q, "t = {t}");
        let mean_eta = s.eta_sq_sum.iter().sum::<f64>() / g.len() as f64;
        assert!((mean_eta - s.mass).abs() < 1e-12);
    }
}

#[test]
fn errors_are_reported() {
    let p = perturber(16, 2, 0.5, 1.5);
    let g = p.grid();
    let flow = zero_flow(g);
    let small = constant_stress(g, [[0.0; 3]; 3]);
    let gap = p.perturb(&input(&p, 0.7, &small, &flow, 0.05)).unwrap_err();
    assert!(matches!(gap, PerturbationError::EnergyGap { .. }));
    let big = constant_stress(g, [[2.0, 0.0, 0.0], [0.0, -2.0, 0.0], [0.0, 0.0, 0.0]]);
    let ball = p.perturb(&input(&p, 0.7, &big, &flow, 1.0)).unwrap_err();
    assert!(matches!(ball, PerturbationError::OutsideBall { .. }));
    let twisted = shear_flow(g, 3.0);
    let nyq = p.perturb(&input(&p, 0.7, &small, &twisted, 1.0)).unwrap_err();
    assert!(matches!(nyq, PerturbationError::Nyquist { .. }));
    let hot = Perturber::new(
        MikadoFamily::standard().unwrap(),
        g,
        40,
        EtaCutoffs::new(0.5, 1.5).unwrap(),
        0.1,
        &PerturbationConfig::default(),
    );
    assert!(matches!(hot, Err(PerturbationError::Nyquist { .. })));
}

/// v̄ = 0 with R̊̄ = θ(t)A, A constant and θ supported on the stress intervals, is an
/// exact glued triple; the assembled (w, R̊₁) must then satisfy the equation weakly.
#[test]
fn assembled_triple_satisfies_the_equation_weakly() {
    let (tau, t_end, h) = (0.3, 0.9, 0.003);
    let (nu, gamma) = (0.05, 0.4);
    let p = perturber(16, 2, tau, t_end);
    let g = p.grid();
    let partition = fracns::gluing::TimePartition::new(tau, t_end).unwrap();
    let a = [[0.02, 0.01, 0.0], [0.01, -0.01, 0.0], [0.0, 0.0, -0.01]];
    let theta = |t: f64| {
        (0..partition.count())
            .filter_map(|i| partition.stress_interval(i))
            .map(|(s0, s1)| if t > s0 && t < s1 { (std::f64::consts::PI * (t - s0) / (s1 - s0)).sin().powi(2) } else { 0.0 })
            .sum::<f64>()
    };
    let flow = zero_flow(g);
    let zero_v = zero_flow(g);
    let zero_p = PeriodicField::zeros(g, Rank::Scalar, Space::Modes);
    let e = |t: f64| 1.0 - 0.1 * t;
    let steps = (t_end / h).round() as usize;
    let stresses: Vec<PeriodicField> =
        (0..=steps).map(|j| constant_stress(g, a).scale(theta(j as f64 * h))).collect();
    let samples: Vec<PerturbationSample> = (0..=steps)
        .map(|j| {
            let t = j as f64 * h;
            p.perturb(&input(&p, t, &stresses[j], &flow, e(t))).unwrap()
        })
        .collect();
    let mut oracle = WeakFormOracle::new(g, 0.0, t_end, nu, gamma, 12, 5).unwrap();
    let mut worst_trace: f64 = 0.0;
    for j in 0..=steps {
        let (start, at) = if j < 2 { (0, j) } else if j + 2 > steps { (steps - 4, j + 4 - steps) } else { (j - 2, 2) };
        let window: [&PerturbationSample; 5] = std::array::from_fn(|m| &samples[start + m]);
        let dw = p.time_derivative(window, at, h).unwrap();
        let glued = GluedSlice { v: &zero_v, p: &zero_p, r: &stresses[j] };
        let (next, stats) = assemble_next(j as f64 * h, &glued, &samples[j], &dw, nu, gamma).unwrap();
        worst_trace = worst_trace.max(stats.trace);
        oracle.push(j as f64 * h, &next.v, &next.r).unwrap();
    }
    let rep = oracle.finish();
    assert!(worst_trace < 1e-12);
    assert!(rep.max_relative < 1e-3, "{rep:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cutoffs_partition_time(tau in 0.05f64..3.0, periods in 1.0f64..6.0, frac in 0.0f64..1.0, x1 in 0.0f64..6.3) {
        let e = EtaCutoffs::new(tau, tau * periods).unwrap();
        let t = frac * tau * periods;
        let vals: Vec<f64> = (0..e.count()).map(|i| e.eta(i, x1, t)).collect();
        prop_assert!(vals.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(vals.iter().filter(|v| **v > 0.0).count() <= 1);
        for (i, v) in vals.iter().enumerate() {
            if *v > 0.0 {
                prop_assert!(e.active(t).contains(&i));
            }
        }
        let g = Grid::two_thirds(16).unwrap();
        prop_assert!(e.mass(g, t) > 0.1);
    }

    #[test]
    fn conjugated_stress_is_symmetric(eps in -0.3f64..0.3, s in -0.2f64..0.2) {
        let grad = [[1.0, eps, 0.0], [0.0, 1.0, 0.0], [-eps, 0.0, 1.0]];
        let r = [[s, 0.1 * s, 0.0], [0.1 * s, -s, 0.0], [0.0, 0.0, 0.0]];
        let m = Perturber::conjugated_stress(&grad, &r, 1.5);
        for a in 0..3 {
            for b in 0..3 {
                prop_assert!((m[a][b] - m[b][a]).abs() < 1e-14);
            }
        }
    }
}
