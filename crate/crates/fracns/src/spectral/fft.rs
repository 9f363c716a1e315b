//! Three-dimensional FFT on an n³ cube assembled from one-dimensional rustfft passes.
//!
//! Layout is row-major with the last axis contiguous: index = (i0 * n + i1) * n + i2.
//! The forward transform is scaled by 1/n³ so that the output holds Fourier
//! coefficients; the inverse transform is unscaled.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn cache() -> &'static Mutex<HashMap<usize, Arc<Fft3>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft3>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Fft3 {
    /// Shared plan for an n³ cube; plans are built once per size.
    pub fn plan(n: usize) -> Arc<Fft3> {
        let mut map = cache().lock().expect("fft plan cache poisoned");
        map.entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Arc::new(Fft3 {
                    n,
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                })
            })
            .clone()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
        let s = 1.0 / (self.n * self.n * self.n) as f64;
        for z in data.iter_mut() {
            *z *= s;
        }
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
    }

    fn run(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n, "buffer length does not match plan");
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        // last axis: contiguous rows
        fft.process_with_scratch(data, &mut scratch);
        let mut lines = vec![Complex64::new(0.0, 0.0); n * n];
        // middle axis: one n×n plane at a time
        for i0 in 0..n {
            let plane = &mut data[i0 * n * n..(i0 + 1) * n * n];
            for i1 in 0..n {
                for i2 in 0..n {
                    lines[i2 * n + i1] = plane[i1 * n + i2];
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            for i1 in 0..n {
                for i2 in 0..n {
                    plane[i1 * n + i2] = lines[i2 * n + i1];
                }
            }
        }
        // first axis: gather lines across planes for each i1
        for i1 in 0..n {
            for i0 in 0..n {
                let row = (i0 * n + i1) * n;
                for i2 in 0..n {
                    lines[i2 * n + i0] = data[row + i2];
                }
            }
            fft.process_with_scratch(&mut lines, &mut scratch);
            for i0 in 0..n {
                let row = (i0 * n + i1) * n;
                for i2 in 0..n {
                    data[row + i2] = lines[i2 * n + i0];
                }
            }
        }
    }

    /// Forward transform of two real arrays with one complex FFT.
    pub fn forward_real_pair(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.n;
        let mut z: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
        self.forward(&mut z);
        let len = n * n * n;
        let mut fa = vec![Complex64::new(0.0, 0.0); len];
        let mut fb = vec![Complex64::new(0.0, 0.0); len];
        for i0 in 0..n {
            let j0 = (n - i0) % n;
            for i1 in 0..n {
                let j1 = (n - i1) % n;
                for i2 in 0..n {
                    let j2 = (n - i2) % n;
                    let p = (i0 * n + i1) * n + i2;
                    let q = (j0 * n + j1) * n + j2;
                    let zc = z[q].conj();
                    fa[p] = (z[p] + zc) * 0.5;
                    fb[p] = (z[p] - zc) * Complex64::new(0.0, -0.5);
                }
            }
        }
        (fa, fb)
    }

    /// Inverse transform of two Hermitian spectra into two real arrays with one complex FFT.
    pub fn inverse_real_pair(&self, fa: &[Complex64], fb: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let i = Complex64::new(0.0, 1.0);
        let mut z: Vec<Complex64> = fa.iter().zip(fb).map(|(&x, &y)| x + i * y).collect();
        self.inverse(&mut z);
        (z.iter().map(|c| c.re).collect(), z.iter().map(|c| c.im).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(n: usize, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); n * n * n];
        let w = -2.0 * std::f64::consts::PI / n as f64;
        for k0 in 0..n {
            for k1 in 0..n {
                for k2 in 0..n {
                    let mut s = Complex64::new(0.0, 0.0);
                    for j0 in 0..n {
                        for j1 in 0..n {
                            for j2 in 0..n {
                                let ph = w * ((k0 * j0 + k1 * j1 + k2 * j2) % n) as f64;
                                s += x[(j0 * n + j1) * n + j2] * Complex64::from_polar(1.0, ph);
                            }
                        }
                    }
                    out[(k0 * n + k1) * n + k2] = s / (n * n * n) as f64;
                }
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft() {
        let n = 4;
        let x: Vec<Complex64> = (0..n * n * n)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect();
        let mut y = x.clone();
        Fft3::plan(n).forward(&mut y);
        let r = naive_dft(n, &x);
        for (a, b) in y.iter().zip(&r) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn real_pair_matches_separate_transforms() {
        let n = 8;
        let len = n * n * n;
        let a: Vec<f64> = (0..len).map(|i| (i as f64 * 0.3).sin()).collect();
        let b: Vec<f64> = (0..len).map(|i| (i as f64 * 0.7).cos() + 0.2).collect();
        let plan = Fft3::plan(n);
        let (fa, fb) = plan.forward_real_pair(&a, &b);
        let mut za: Vec<Complex64> = a.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        plan.forward(&mut za);
        for (x, y) in fa.iter().zip(&za) {
            assert!((x - y).norm() < 1e-14);
        }
        let (ra, rb) = plan.inverse_real_pair(&fa, &fb);
        for i in 0..len {
            assert!((ra[i] - a[i]).abs() < 1e-13 && (rb[i] - b[i]).abs() < 1e-13);
        }
    }
}
