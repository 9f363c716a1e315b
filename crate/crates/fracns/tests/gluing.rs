use fracns::gluing::{Gluer, TimePartition};
use fracns::operators::leray;
use fracns::solver::{solve_fns, SolverConfig};
use fracns::spectral::{random_smooth_field, Grid, PeriodicField, Rank};
use fracns::weak_form::WeakFormOracle;

const NU: f64 = 0.05;
const GAMMA: f64 = 0.4;
const H: f64 = 0.01;

fn config() -> SolverConfig {
    SolverConfig { dt: H, horizon: 1.0, horizon_constant: None, sample_interval: H, ..SolverConfig::default() }
}

fn initial(g: Grid) -> PeriodicField {
    let u = leray(&random_smooth_field(g, Rank::Vector, 3, 1.0, 11)).unwrap();
    let s = u.sup_norm();
    u.scale(1.0 / s)
}

fn run(perturb: f64) -> (fracns::gluing::GluingDiagnostics, Vec<f64>, f64, f64) {
    let g = Grid::two_thirds(24).unwrap();
    let partition = TimePartition::new(0.3, 0.9).unwrap();
    let reference = solve_fns(&initial(g), NU, GAMMA, &config()).unwrap();
    let kick = leray(&random_smooth_field(g, Rank::Vector, 4, 0.5, 12)).unwrap().without_mean();
    let kick = kick.scale(1.0 / kick.sup_norm());
    let at = |t: f64| (t / H).round() as usize;
    let refs = &reference;
    let kick_ref = &kick;
    let mut gluer = Gluer::new(partition, NU, GAMMA, 0.1, &config(), move |i, t| {
        Ok(refs.velocity[at(t)].axpy(perturb * (i + 1) as f64, kick_ref)?)
    });
    let mut oracle = WeakFormOracle::new(g, 0.0, 0.9, NU, GAMMA, 20, 99).unwrap();
    let mut deviation: Vec<f64> = Vec::new();
    let mut max_chi_slope: f64 = 0.0;
    for j in 0..=at(0.9) {
        let t = j as f64 * H;
        let s = gluer.sample(t, Some(&reference.velocity[j])).unwrap();
        deviation.push(s.v.sub(&reference.velocity[j]).unwrap().sup_norm());
        oracle.push(t, &s.v, &s.r).unwrap();
        for &(i, _) in &s.chi {
            max_chi_slope = max_chi_slope.max(partition.dchi(i, t).abs() * partition.tau);
        }
    }
    let report = oracle.finish();
    (gluer.diagnostics, deviation, report.max_relative, max_chi_slope)
}

#[test]
fn exact_input_reproduces_the_solution() {
    let (d, deviation, weak, _) = run(0.0);
    assert!(d.max_stress < 1e-10, "{}", d.max_stress);
    assert!(deviation.iter().all(|x| *x < 1e-10));
    assert!(d.local_deviation < 1e-8);
    assert!(weak < 1e-4, "{weak}");
}

#[test]
fn perturbed_input_localizes_the_stress() {
    let (d, _, weak, chi_slope) = run(0.05);
    assert!(d.max_stress > 1e-3, "stress should be visible on the switch-over intervals");
    assert!(d.mid_quiet_stress < 1e-6, "{}", d.mid_quiet_stress);
    assert!(d.max_trace < 1e-10, "{}", d.max_trace);
    assert!(d.max_divergence < 1e-10, "{}", d.max_divergence);
    assert!(d.max_mean_mismatch < 1e-10);
    assert!(weak < 1e-4, "{weak}");
    assert!(chi_slope <= 10.0, "{chi_slope}");
}

#[test]
fn chi_derivative_constant_is_uniform_in_tau() {
    for &tau in &[0.01, 0.1, 1.0, 7.0] {
        let p = TimePartition::new(tau, 5.0 * tau).unwrap();
        let worst = (0..=5000)
            .map(|j| {
                let t = j as f64 * tau / 1000.0;
                (0..p.count()).map(|i| p.dchi(i, t).abs()).fold(0.0, f64::max) * tau
            })
            .fold(0.0, f64::max);
        assert!(worst <= 10.0 && worst > 5.9, "{worst}");
    }
}
