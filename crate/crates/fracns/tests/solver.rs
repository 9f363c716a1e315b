use fracns::operators::{fractional_laplacian, leray};
use fracns::solver::harness::{stability_harness, HarnessCase};
use fracns::solver::{flow_map, solve_fns, trace_characteristic, FnsIntegrator, SampledField, SolverConfig, SteadyField};
use fracns::spectral::{divergence, random_smooth_field, Grid, PeriodicField, Rank};

fn taylor_green(g: Grid, amp: f64) -> PeriodicField {
    PeriodicField::vector_fn(g, |x| {
        [amp * x[0].sin() * x[1].cos() * x[2].cos(), -amp * x[0].cos() * x[1].sin() * x[2].cos(), 0.0]
    })
}

fn unit(f: PeriodicField) -> PeriodicField {
    let s = f.sup_norm();
    f.scale(1.0 / s)
}

fn config(dt: f64, horizon: f64) -> SolverConfig {
    SolverConfig { dt, horizon, horizon_constant: None, ..SolverConfig::default() }
}

#[test]
fn shear_matches_closed_form_with_fractional_rate() {
    // |k| = 2 so the decay rate is ν 4^γ
    let g = Grid::two_thirds(16).unwrap();
    let u0 = PeriodicField::vector_fn(g, |x| [(2.0 * x[1]).sin(), 0.0, 0.0]);
    let (nu, gamma) = (0.2, 0.3);
    let s = solve_fns(&u0, nu, gamma, &SolverConfig { sample_interval: 0.25, ..config(0.05, 1.0) }).unwrap();
    for (t, v) in s.times.iter().zip(&s.velocity) {
        let exact = u0.scale((-nu * 4f64.powf(gamma) * t).exp());
        assert!(v.sub(&exact).unwrap().sup_norm() < 1e-8);
    }
}

#[test]
fn energy_identity_on_taylor_green() {
    let g = Grid::two_thirds(32).unwrap();
    let (nu, gamma) = (0.05, 0.3);
    let u0 = taylor_green(g, 1.0);
    let h = 0.05;
    let s = solve_fns(&u0, nu, gamma, &SolverConfig { sample_interval: h, ..config(0.025, 1.0) }).unwrap();
    let energy: Vec<f64> = s.velocity.iter().map(|v| 0.5 * v.mean_square()).collect();
    let dissipation: Vec<f64> = s
        .velocity
        .iter()
        .map(|v| nu * fractional_laplacian(v, gamma / 2.0).mean_square())
        .collect();
    let m = dissipation.len() - 1;
    let simpson: f64 = (0..=m)
        .map(|j| {
            let w = if j == 0 || j == m { 1.0 } else if j % 2 == 1 { 4.0 } else { 2.0 };
            w * dissipation[j]
        })
        .sum::<f64>()
        * h
        / 3.0;
    let lost = energy[0] - energy[m];
    let rel = (lost - simpson).abs() / energy[0];
    assert!(rel < 1e-6, "relative defect {rel}");
    assert!(s.velocity.iter().all(|v| divergence(v).unwrap().sup_norm() < 1e-10));
}

#[test]
fn inviscid_energy_and_mean_are_conserved() {
    let g = Grid::two_thirds(32).unwrap();
    let mean = PeriodicField::constant(g, Rank::Vector, &[0.1, -0.2, 0.05]);
    let u0 = taylor_green(g, 1.0).add(&mean).unwrap();
    let mut it = FnsIntegrator::new(&u0, 0.0, 0.3, 0.0, &config(0.02, 1.0)).unwrap();
    let e0 = it.velocity().mean_square();
    it.advance_to(1.0).unwrap();
    let e1 = it.velocity().mean_square();
    assert!((e1 - e0).abs() / e0 < 1e-5);
    let m = it.velocity().mean();
    assert!((m[0] - 0.1).abs() < 1e-15 && (m[1] + 0.2).abs() < 1e-15 && (m[2] - 0.05).abs() < 1e-15);
}

#[test]
fn temporal_order_is_four() {
    let g = Grid::two_thirds(16).unwrap();
    let u0 = taylor_green(g, 0.5);
    let run = |dt: f64| {
        let c = SolverConfig { cfl: 2.5, ..config(dt, 1.0) };
        let mut it = FnsIntegrator::new(&u0, 0.1, 0.3, 0.0, &c).unwrap();
        it.advance_to(1.0).unwrap();
        it.velocity().clone()
    };
    let reference = run(0.01);
    let dts = [0.2, 0.1, 0.05];
    let errs: Vec<f64> = dts.iter().map(|&dt| run(dt).sub(&reference).unwrap().sup_norm()).collect();
    let xs: Vec<f64> = dts.iter().map(|d: &f64| d.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / 3.0, ys.iter().sum::<f64>() / 3.0);
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
    assert!((slope - 4.0).abs() < 0.3, "slope {slope}, errors {errs:?}");
}

#[test]
fn flow_map_agrees_with_characteristics_and_preserves_volume() {
    let g = Grid::two_thirds(16).unwrap();
    let v0 = unit(leray(&random_smooth_field(g, Rank::Vector, 2, 2.0, 11)).unwrap()).scale(0.25);
    let v1 = unit(leray(&random_smooth_field(g, Rank::Vector, 2, 2.0, 12)).unwrap()).scale(0.25);
    let velocity = move |t: f64| v0.axpy(t, &v1).map_err(Into::into);
    let c = SolverConfig { dt: 0.005, horizon: 0.5, sample_interval: 0.025, dealias: false, ..config(0.005, 0.5) };
    let map = flow_map(g, &velocity, 0.0, &c).unwrap();
    assert!(map.quality.det_defect < 1e-5, "{:?}", map.quality);
    assert!(map.quality.gradient_deviation < 0.5);
    let residual = map.transport_residual(&velocity).unwrap();
    assert!(residual < 1e-6, "transport residual {residual}");

    let v_at = |x: [f64; 3], t: f64| {
        let v = velocity(t).unwrap().eval_point(x);
        [v[0], v[1], v[2]]
    };
    let last = map.phi_minus_id.last().unwrap();
    let t = *map.times.last().unwrap();
    for &idx in &[0usize, 777, 2049, 4000] {
        let x = g.point(idx);
        let foot = trace_characteristic(v_at, x, t, 0.0, 100);
        let psi = last.eval_point(x);
        for c in 0..3 {
            assert!((foot[c] - x[c] - psi[c]).abs() < 1e-6, "{c}: {} vs {}", foot[c] - x[c], psi[c]);
        }
    }
}

#[test]
fn sampled_velocity_drives_the_same_flow() {
    let g = Grid::two_thirds(16).unwrap();
    let v0 = unit(leray(&random_smooth_field(g, Rank::Vector, 2, 2.0, 5)).unwrap()).scale(0.3);
    let samples: Vec<_> = (0..=20).map(|j| v0.scale(1.0 + 0.05 * j as f64)).collect();
    let sampled = SampledField::new(0.0, 0.05, samples).unwrap();
    let exact = move |t: f64| Ok(v0.scale(1.0 + t));
    let c = SolverConfig { sample_interval: 0.05, dealias: false, ..config(0.01, 1.0) };
    let a = flow_map(g, &sampled, 0.0, &c).unwrap();
    let b = flow_map(g, &exact, 0.0, &c).unwrap();
    let d = a.phi_minus_id.last().unwrap().sub(b.phi_minus_id.last().unwrap()).unwrap().sup_norm();
    assert!(d < 1e-12, "{d}");
}

#[test]
fn steady_shear_flow_map_is_exact() {
    let g = Grid::two_thirds(16).unwrap();
    let v = SteadyField(PeriodicField::vector_fn(g, |x| [0.4 * x[1].sin(), 0.0, 0.0]));
    let c = SolverConfig { sample_interval: 0.1, ..config(0.01, 0.5) };
    let map = flow_map(g, &v, 0.0, &c).unwrap();
    let t = 0.5;
    let exact = PeriodicField::vector_fn(g, |x| [-0.4 * x[1].sin() * t, 0.0, 0.0]);
    assert!(map.phi_minus_id.last().unwrap().sub(&exact).unwrap().sup_norm() < 1e-10);
}

#[test]
fn maximum_principle_and_sup_bound_on_random_cases() {
    for seed in 0..20u64 {
        let case = HarnessCase::random(16, seed, 0.4, seed % 2 == 1).unwrap();
        let r = stability_harness(&case).unwrap();
        if let Some(o) = r.max_principle_overshoot {
            assert!(o <= 1e-8, "seed {seed}: overshoot {o}");
        }
        for line in &r.ledger.lines {
            assert!(line.pass, "seed {seed}: {} {} vs {}", line.id, line.lhs, line.rhs);
        }
    }
}

#[test]
fn higher_order_constant_is_reported() {
    let case = HarnessCase::random(16, 42, 0.4, false).unwrap();
    let r = stability_harness(&case).unwrap();
    let c = r.fitted_c.unwrap();
    assert!(c.is_finite() && c >= 0.0);
}
