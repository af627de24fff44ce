//! FFT-backed spectral operators on the periodic grid.
//!
//! Transforms are complex-to-complex along every resolved direction. Symbols
//! of the operators used by the solver are tabulated once per grid shape and
//! shared through a process-wide cache.
//!
//! Derivative conventions, with `k = 2π m` the angular wavenumber:
//! - pure second derivatives `∂_x²` use `−k²`, Nyquist mode included;
//! - first-derivative factors `∂_x` use `i k` with the Nyquist mode zeroed, so
//!   odd-order symbols stay conjugate-symmetric and map real data to real data.
//!
//! With `∂_{z_j} = ½(∂_{x_j} − i ∂_{y_j})`, the complex Hessian components are
//! `h11 = ¼(∂_{x1}² + ∂_{y1}²)`, `h22 = ¼(∂_{x2}² + ∂_{y2}²)` and
//! `h12 = ∂_{z1} ∂_{z̄2}`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::grid::Grid;

pub(crate) struct Spectral {
    shape: [usize; 4],
    len: usize,
    forward: [Option<Arc<dyn Fft<f64>>>; 4],
    inverse: [Option<Arc<dyn Fft<f64>>>; 4],
    /// Symbol of `h11 + i h22` (both real).
    pub diag: Vec<Complex64>,
    /// Symbol of `h12 = ∂1 ∂̄2`; `None` on split grids where it vanishes.
    pub mixed: Option<Vec<Complex64>>,
    /// Symbol of `h21 = ∂2 ∂̄1 = conj` partner of `h12`.
    pub mixed_conj: Option<Vec<Complex64>>,
    /// Symbols of `∂_{z1}` and `∂_{z2}`.
    pub dz: [Vec<Complex64>; 2],
    /// Real symbols of `h11` and `h22` separately.
    pub s11: Vec<f64>,
    pub s22: Vec<f64>,
}

fn cache() -> &'static Mutex<HashMap<[usize; 4], Arc<Spectral>>> {
    static CACHE: OnceLock<Mutex<HashMap<[usize; 4], Arc<Spectral>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl Spectral {
    pub fn for_grid(grid: &Grid) -> Arc<Spectral> {
        let shape = grid.shape();
        let mut map = cache().lock().expect("spectral cache poisoned");
        map.entry(shape)
            .or_insert_with(|| Arc::new(Spectral::build(shape)))
            .clone()
    }

    fn build(shape: [usize; 4]) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        let mut forward: [Option<Arc<dyn Fft<f64>>>; 4] = Default::default();
        let mut inverse: [Option<Arc<dyn Fft<f64>>>; 4] = Default::default();
        for d in 0..4 {
            if shape[d] > 1 {
                forward[d] = Some(planner.plan_fft_forward(shape[d]));
                inverse[d] = Some(planner.plan_fft_inverse(shape[d]));
            }
        }
        let len: usize = shape.iter().product();
        // Per-direction wavenumber tables.
        let k: Vec<Vec<f64>> = shape
            .iter()
            .map(|&n| {
                (0..n)
                    .map(|m| {
                        let signed = if m <= n / 2 { m as i64 } else { m as i64 - n as i64 };
                        let signed = if n > 1 && m == n / 2 { -(signed.abs()) } else { signed };
                        2.0 * PI * signed as f64
                    })
                    .collect()
            })
            .collect();
        let second = |d: usize, m: usize| -> f64 { -k[d][m] * k[d][m] };
        let first = |d: usize, m: usize| -> Complex64 {
            let n = shape[d];
            if n == 1 || (m == n / 2) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k[d][m])
            }
        };
        let i = Complex64::new(0.0, 1.0);
        let split = shape[2] == 1 && shape[3] == 1;
        let mut diag = Vec::with_capacity(len);
        let mut s11 = Vec::with_capacity(len);
        let mut s22 = Vec::with_capacity(len);
        let mut mixed = Vec::with_capacity(if split { 0 } else { len });
        let mut mixed_conj = Vec::with_capacity(if split { 0 } else { len });
        let mut dz1 = Vec::with_capacity(len);
        let mut dz2 = Vec::with_capacity(len);
        for a in 0..shape[0] {
            for b in 0..shape[1] {
                for c in 0..shape[2] {
                    for e in 0..shape[3] {
                        let h11 = 0.25 * (second(0, a) + second(1, b));
                        let h22 = 0.25 * (second(2, c) + second(3, e));
                        diag.push(Complex64::new(h11, h22));
                        s11.push(h11);
                        s22.push(h22);
                        let d1 = 0.5 * (first(0, a) - i * first(1, b));
                        let d1bar = 0.5 * (first(0, a) + i * first(1, b));
                        let d2 = 0.5 * (first(2, c) - i * first(3, e));
                        let d2bar = 0.5 * (first(2, c) + i * first(3, e));
                        dz1.push(d1);
                        dz2.push(d2);
                        if !split {
                            mixed.push(d1 * d2bar);
                            mixed_conj.push(d2 * d1bar);
                        }
                    }
                }
            }
        }
        Self {
            shape,
            len,
            forward,
            inverse,
            diag,
            mixed: (!split).then_some(mixed),
            mixed_conj: (!split).then_some(mixed_conj),
            dz: [dz1, dz2],
            s11,
            s22,
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// Inverse transform including the `1/len` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let s = 1.0 / self.len as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Option<Arc<dyn Fft<f64>>>; 4]) {
        debug_assert_eq!(data.len(), self.len);
        for d in 0..4 {
            let Some(plan) = &plans[d] else { continue };
            let n = self.shape[d];
            let stride: usize = self.shape[d + 1..].iter().product();
            let outer: usize = self.shape[..d].iter().product();
            let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            // Gather the `stride` interleaved lines of each outer block into a
            // contiguous buffer, transform them together, scatter back.
            let block = n * stride;
            let mut lines = vec![Complex64::new(0.0, 0.0); block];
            for o in 0..outer {
                let base = o * block;
                for j in 0..stride {
                    for m in 0..n {
                        lines[j * n + m] = data[base + m * stride + j];
                    }
                }
                plan.process_with_scratch(&mut lines, &mut scratch);
                for j in 0..stride {
                    for m in 0..n {
                        data[base + m * stride + j] = lines[j * n + m];
                    }
                }
            }
        }
    }

    pub fn to_spectrum(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Apply a symbol to a spectrum and return the inverse transform.
    pub fn apply(&self, spectrum: &[Complex64], symbol: &[Complex64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = spectrum.iter().zip(symbol).map(|(a, s)| a * s).collect();
        self.inverse(&mut buf);
        buf
    }
}
