use fracns::mikado::*;
use fracns::spectral::{divergence, outer_self, Grid};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn samples(count: usize, seed: u64) -> Vec<Sym3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = vec![identity()];
    v.extend((1..count).map(|_| sample_ball(&mut rng, 0.5)));
    v
}

fn reconstruct(f: &MikadoFamily, g2: &[f64; 9]) -> Sym3 {
    let mut m = [[0.0; 3]; 3];
    for j in 0..9 {
        let u = f.unit_direction(j);
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] += g2[j] * u[a] * u[b];
            }
        }
    }
    m
}

fn max_diff(a: &Sym3, b: &Sym3) -> f64 {
    (0..9).map(|i| (a[i / 3][i % 3] - b[i / 3][i % 3]).abs()).fold(0.0, f64::max)
}

#[test]
fn decomposition_reconstructs_and_stays_positive() {
    let f = MikadoFamily::standard().unwrap();
    let mut min: f64 = f64::INFINITY;
    for r in samples(1000, 1) {
        let g2 = f.decompose(&r).unwrap();
        assert!(max_diff(&reconstruct(&f, &g2), &r) < 1e-10);
        min = min.min(g2.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    assert!(min > 0.0, "{min}");
}

#[test]
fn interior_matrix_reconstruction() {
    let f = MikadoFamily::standard().unwrap();
    let s = 0.3 / 2f64.sqrt();
    let mut r = identity();
    r[0][0] += s;
    r[1][1] -= s;
    r[0][1] = 0.1;
    r[1][0] = 0.1;
    let g2 = f.decompose(&r).unwrap();
    assert!(max_diff(&reconstruct(&f, &g2), &r) < 1e-12);
    let plus_minus = (g2[3] + g2[4]) / 2.0;
    assert!((g2[0] - (r[0][0] - plus_minus - (g2[7] + g2[8]) / 2.0)).abs() < 1e-14);
    assert!((g2[3] - g2[4] - 2.0 * r[0][1]).abs() < 1e-14);
}

#[test]
fn coefficients_are_smooth_in_r() {
    let f = MikadoFamily::standard().unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for r in samples(200, 2) {
        let base = f.coefficients(&r).unwrap();
        for (a, b) in [(0, 0), (0, 1), (1, 2), (2, 2)] {
            let mut s = r;
            // move towards the center so the shifted matrix stays in the ball
            let sign = if s[a][b] > if a == b { 1.0 } else { 0.0 } { -1.0 } else { 1.0 };
            s[a][b] += sign * h;
            s[b][a] = s[a][b];
            let g = f.coefficients(&s).unwrap();
            for j in 0..9 {
                worst = worst.max((g[j] - base[j]).abs() / h);
            }
        }
    }
    assert!(worst < 10.0, "{worst}");
}

#[test]
fn lemma_identities_on_sampled_matrices() {
    let f = MikadoFamily::standard().unwrap();
    let fine = Grid::two_thirds(160).unwrap();
    let profiles = f.profile_values(fine);
    let gram = MikadoFamily::gram(&profiles);
    for (j, p) in profiles.iter().enumerate() {
        assert!((p.iter().sum::<f64>() / p.len() as f64).abs() < 1e-12, "mean of pipe {j}");
    }
    drop(profiles);
    let coarse = Grid::two_thirds(64).unwrap();
    let cp = f.profile_values(coarse);
    let rs = samples(100, 3);
    for (idx, r) in rs.iter().enumerate() {
        let g = f.coefficients(r).unwrap();
        assert!(max_diff(&f.second_moment(&g, &gram), r) < 1e-6, "second moment at sample {idx}");
        if idx % 10 == 0 {
            let w = f.assemble(&g, &cp, coarse).unwrap();
            let m = w.mean();
            assert!(m.iter().all(|x| x.abs() < 1e-8));
            assert!(divergence(&w).unwrap().sup_norm() < 1e-8);
            assert!(divergence(&outer_self(&w).unwrap()).unwrap().sup_norm() < 1e-8);
        }
    }
}

#[test]
fn pipes_have_disjoint_supports_pointwise() {
    let f = MikadoFamily::standard().unwrap();
    let g = Grid::two_thirds(48).unwrap();
    let p = f.profile_values(g);
    for i in 0..g.len() {
        assert!(p.iter().filter(|v| v[i] != 0.0).count() <= 1);
    }
}

#[test]
fn analytic_fourier_data_matches_grid_transform() {
    let f = MikadoFamily::standard().unwrap();
    let g = Grid::two_thirds(128).unwrap();
    let p = f.profile_values(g);
    let fd = f.fourier_data(12.0);
    for r in samples(3, 4) {
        let gamma = f.coefficients(&r).unwrap();
        let w = f.assemble(&gamma, &p, g).unwrap().to_modes();
        let mut worst: f64 = 0.0;
        for m in &fd.modes {
            let a = fd.a_k(m, &gamma);
            let idx = g.mode_index(m.k).unwrap();
            for c in 0..3 {
                worst = worst.max((w.comp(c)[idx] - a[c]).norm());
            }
        }
        assert!(worst < 1e-5, "{worst}");
    }
}

#[test]
fn fourier_orthogonality_and_decay() {
    let f = MikadoFamily::standard().unwrap();
    let fd = f.fourier_data(16.0);
    let rs = samples(100, 5);
    for r in &rs {
        let g = f.coefficients(r).unwrap();
        for m in &fd.modes {
            let kf = m.k.map(|x| x as f64);
            let a = fd.a_k(m, &g);
            let dot = a[0] * kf[0] + a[1] * kf[1] + a[2] * kf[2];
            assert!(dot.norm() < 1e-10);
            let c = fd.c_k(m, &g);
            for row in c {
                assert!((row[0] * kf[0] + row[1] * kf[1] + row[2] * kf[2]).norm() < 1e-10);
            }
        }
    }
    // modes along a pipe direction only see the pipes whose plane contains them
    let along = fd.modes.iter().find(|m| m.k == [0, 0, 2]).unwrap();
    assert!(along.terms.iter().all(|(j, _, _)| f.directions[*j][2] == 0));
    let m_bar = fd.decay_constant(&f, &rs).unwrap();
    assert!(m_bar.is_finite() && m_bar > 0.0);
    assert!(fd.decay_exponent(&f, &rs).unwrap().is_finite());
    let m = compute_m(m_bar, fd.k_max);
    assert!((m.m / m_bar - 64.0 * (m.lattice_sum + m.tail)).abs() < 1e-9);
}

#[test]
fn truncated_series_is_within_its_tail() {
    let f = MikadoFamily::standard().unwrap();
    let short = f.fourier_data(16.0);
    let long = f.fourier_data(40.0);
    let gamma = f.coefficients(&identity()).unwrap();
    let tail: f64 = long
        .modes
        .iter()
        .filter(|m| m.k.iter().map(|x| x * x).sum::<i64>() > 256)
        .map(|m| long.a_k(m, &gamma).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .sum();
    for &xi in &[[0.1, 0.2, 0.3], [2.0, 4.5, 1.0], [5.5, 0.7, 3.3], [1.234, 2.345, 3.456]] {
        let exact = f.evaluate_at(&gamma, xi);
        let (s, l) = (short.evaluate(&gamma, xi), long.evaluate(&gamma, xi));
        let err = |v: [f64; 3]| (0..3).map(|c| (exact[c] - v[c]).powi(2)).sum::<f64>().sqrt();
        assert!(err(l) < 1e-2, "{}", err(l));
        assert!(err(s) <= tail + err(l), "{} vs {}", err(s), tail);
    }
}

proptest! {
    #[test]
    fn potential_curl_returns_the_coefficient(
        k in prop::array::uniform3(-6i64..=6),
        v in prop::array::uniform3(-1.0f64..1.0),
        w in prop::array::uniform3(-1.0f64..1.0),
    ) {
        prop_assume!(k != [0, 0, 0]);
        let kf = k.map(|x| x as f64);
        let k2 = kf.iter().map(|x| x * x).sum::<f64>();
        // project a random complex vector onto k^⊥
        let raw: [Complex64; 3] = std::array::from_fn(|c| Complex64::new(v[c], w[c]));
        let dot = raw[0] * kf[0] + raw[1] * kf[1] + raw[2] * kf[2];
        let a: [Complex64; 3] = std::array::from_fn(|c| raw[c] - dot * kf[c] / k2);
        let p = potential_coefficients(a, k).unwrap();
        let i = Complex64::new(0.0, 1.0);
        let curl = [
            i * (kf[1] * p[2] - kf[2] * p[1]),
            i * (kf[2] * p[0] - kf[0] * p[2]),
            i * (kf[0] * p[1] - kf[1] * p[0]),
        ];
        for c in 0..3 {
            prop_assert!((curl[c] - a[c]).norm() < 1e-14);
        }
    }

    #[test]
    fn decomposition_holds_in_the_ball(v in prop::array::uniform6(-1.0f64..1.0), t in 0.0f64..=1.0) {
        let f = MikadoFamily::standard().unwrap();
        let d = [[v[0], v[1], v[2]], [v[1], v[3], v[4]], [v[2], v[4], v[5]]];
        let n = (0..9).map(|i| d[i / 3][i % 3] * d[i / 3][i % 3]).sum::<f64>().sqrt();
        prop_assume!(n > 0.0);
        let mut r = identity();
        for a in 0..3 {
            for b in 0..3 {
                r[a][b] += 0.5 * t * d[a][b] / n;
            }
        }
        let g2 = f.decompose(&r).unwrap();
        prop_assert!(g2.iter().all(|x| *x > 0.0));
        prop_assert!(max_diff(&reconstruct(&f, &g2), &r) < 1e-10);
    }
}
