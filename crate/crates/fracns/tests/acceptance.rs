//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness. A criterion that fails is reported, not turned into a process
//! failure; the exit code is nonzero only when a check could not run at all.

use fracns::ledger::Ledger;
use fracns::pipeline::audit::audit_velocities;
use fracns::pipeline::verify::{run_suite, SuiteOutcome, SUITES};
use fracns::pipeline::{compare_profiles, run, EulerSeedConfig, ProfileSpec, RunConfig, RunOptions, Scenario};
use fracns::solver::{solve_fns, SolverConfig};
use fracns::spectral::{Grid, PeriodicField};
use std::time::Instant;

const SEED: u64 = 20240917;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn error(e: impl std::fmt::Display) -> Verdict {
        Verdict { pass: false, detail: format!("error: {e}") }
    }

    fn errored(&self) -> bool {
        self.detail.starts_with("error:")
    }
}

fn report(index: usize, title: &str, seconds: f64, v: &Verdict) {
    let tag = if v.pass { "PASS" } else { "FAIL" };
    println!("{tag} criterion {index}: {title} ({seconds:.1} s) {}", v.detail);
}

fn failing(ledger: &Ledger) -> String {
    let ids: Vec<String> = ledger
        .lines
        .iter()
        .filter(|l| !l.pass)
        .map(|l| format!("{}={:.3e} vs {:.3e}", l.id, l.lhs, l.rhs))
        .collect();
    if ids.is_empty() {
        String::new()
    } else {
        format!("failing: {}", ids.join(", "))
    }
}

fn value(ledger: &Ledger, id: &str) -> f64 {
    ledger.get(id).map(|l| l.lhs).unwrap_or(f64::NAN)
}

fn suite_verdict(outcome: &SuiteOutcome, keys: &[&str]) -> Verdict {
    let shown: Vec<String> = keys.iter().map(|k| format!("{k}={:.3e}", value(&outcome.ledger, k))).collect();
    let mut detail = shown.join(" ");
    let f = failing(&outcome.ledger);
    if !f.is_empty() {
        detail = format!("{detail}; {f}");
    }
    Verdict { pass: outcome.pass(), detail }
}

fn suites() -> Vec<Verdict> {
    let keys: [&[&str]; 6] = [
        &["fractional_laplacian.single_modes", "inverse_divergence.div_identity", "biot_savart.curl_identity", "fractional_laplacian.semigroup"],
        &["mikado.div_outer", "mikado.divergence", "mikado.second_moment", "mikado.a_k_dot_k", "mikado.decay_constant"],
        &["solver.shear_closed_form", "solver.energy_identity", "solver.order_deviation"],
        &[],
        &["commutator.slope_low", "stationary_phase.decay_exponent", "holder.product_constant", "holder.interpolation_constant"],
        &["gluing.mid_quiet_stress", "gluing.weak_residual"],
    ];
    let titles = [
        "operator identities",
        "Mikado identities over 100 matrices",
        "local solver",
        "maximum principle and transport estimates on 20 cases",
        "commutator, stationary phase and Hölder inequalities",
        "gluing localizes the stress and solves the equation weakly",
    ];
    let mut out = Vec::new();
    for (j, ((name, suite), keys)) in SUITES.iter().zip(keys).enumerate() {
        let start = Instant::now();
        let v = match run_suite(name, *suite, SEED) {
            Ok(outcome) => {
                let mut v = suite_verdict(&outcome, keys);
                if *name == "harness" {
                    let violations = outcome.ledger.lines.iter().filter(|l| !l.pass).count();
                    v.detail = format!("{} checks, violations={violations} {}", outcome.ledger.lines.len(), v.detail);
                }
                v
            }
            Err(e) => Verdict::error(e),
        };
        report(j + 1, titles[j], start.elapsed().as_secs_f64(), &v);
        out.push(v);
    }
    out
}

/// One step of the default preset from the mollified Euler seed on 64³.
fn full_step() -> Verdict {
    let config = RunConfig {
        grid: 64,
        scenario: Scenario::MollifiedEulerSeed(EulerSeedConfig::default()),
        ..RunConfig::default()
    };
    let start = Instant::now();
    let outcome = match run(&config, &RunOptions::default()) {
        Ok(o) => o,
        Err(e) => return Verdict::error(e),
    };
    let seconds = start.elapsed().as_secs_f64();
    let level = &outcome.report.levels[0];
    let l = &level.ledger;
    let checks = [
        "step.divergence",
        "step.trace",
        "step.ball",
        "step.perturbation_sup",
        "step.weak_residual.next",
        "step.contraction",
    ];
    let mut pass = seconds <= 600.0;
    let mut parts = Vec::new();
    for id in checks {
        match l.get(id) {
            Some(line) => {
                pass &= line.pass;
                let mark = if line.pass { "" } else { " (fails)" };
                parts.push(format!("{id}={:.3e} vs {:.3e}{mark}", line.lhs, line.rhs));
            }
            None => {
                pass = false;
                parts.push(format!("{id} missing"));
            }
        }
    }
    parts.push(format!("runtime={seconds:.0}s vs 600s"));
    Verdict { pass, detail: parts.join(", ") }
}

fn determinism() -> Verdict {
    let mut config = RunConfig { grid: 24, ..RunConfig::default() };
    config.profile = Some(ProfileSpec::Constant { value: Some(0.16) });
    config.compare_profile = Some(ProfileSpec::Linear { start: 0.16, end: 0.09 });
    let cmp = match compare_profiles(&config) {
        Ok(c) => c,
        Err(e) => return Verdict::error(e),
    };
    let mut single = config.clone();
    single.compare_profile = None;
    let digests: Result<Vec<String>, _> = (0..2)
        .map(|_| run(&single, &RunOptions::default()).and_then(|o| o.report.digest()))
        .collect();
    let digests = match digests {
        Ok(d) => d,
        Err(e) => return Verdict::error(e),
    };
    let same_report = digests[0] == digests[1];
    Verdict {
        pass: cmp.identical_initial && same_report,
        detail: format!(
            "v1(.,0) digests equal={} (e(0)={} and {}), energy difference later={:.3e}, report digests equal={same_report}",
            cmp.identical_initial, cmp.e0_a, cmp.e0_b, cmp.max_energy_difference
        ),
    }
}

fn dissipation() -> Verdict {
    let g = Grid::two_thirds(32).expect("grid");
    let u0 = PeriodicField::vector_fn(g, |x| {
        [x[0].sin() * x[1].cos() * x[2].cos(), -x[0].cos() * x[1].sin() * x[2].cos(), 0.0]
    });
    let (nu, gamma) = (0.05, 0.3);
    let cfg = SolverConfig { dt: 0.025, horizon: 1.0, horizon_constant: None, sample_interval: 0.05, ..SolverConfig::default() };
    let smooth = match solve_fns(&u0, nu, gamma, &cfg) {
        Ok(s) => audit_velocities(&s.times, &s.velocity, nu, gamma),
        Err(e) => return Verdict::error(e),
    };
    // steepest decrease admitted by δ₁/2 ≤ e ≤ δ₁
    let mut config = RunConfig { grid: 24, ..RunConfig::default() };
    config.profile = Some(ProfileSpec::Linear { start: 0.16, end: 0.082 });
    let outcome = match run(&config, &RunOptions::default()) {
        Ok(o) => o,
        Err(e) => return Verdict::error(e),
    };
    let rows = &outcome.series[0].1;
    let increases = rows.windows(2).filter(|w| w[1].e_tot > w[0].e_tot).count();
    let worst = rows.windows(2).map(|w| w[1].e_tot - w[0].e_tot).fold(f64::NEG_INFINITY, f64::max);
    Verdict {
        pass: smooth.relative_drift < 1e-6 && increases == 0,
        detail: format!(
            "smooth e_tot drift={:.3e} vs 1e-6, decreasing profile: {increases} increasing steps of {}, largest step change={worst:.3e}",
            smooth.relative_drift,
            rows.len() - 1
        ),
    }
}

fn main() {
    let start = Instant::now();
    let mut verdicts = suites();
    let t = Instant::now();
    let v = full_step();
    report(7, "one convex-integration step at 64³", t.elapsed().as_secs_f64(), &v);
    verdicts.push(v);
    let t = Instant::now();
    let v = determinism();
    report(8, "determinism and profile independence", t.elapsed().as_secs_f64(), &v);
    verdicts.push(v);
    let t = Instant::now();
    let v = dissipation();
    report(9, "dissipation audit", t.elapsed().as_secs_f64(), &v);
    verdicts.push(v);
    let passed = verdicts.iter().filter(|v| v.pass).count();
    println!("{passed}/{} criteria passed in {:.0} s", verdicts.len(), start.elapsed().as_secs_f64());
    if verdicts.iter().any(Verdict::errored) {
        std::process::exit(1);
    }
}
