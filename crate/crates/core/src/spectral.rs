//! Uniform periodic grids on the unit torus and Fourier differentiation.
//!
//! Wavenumbers follow the FFT order `0, 1, …, N/2−1, −N/2, …, −1`; the
//! Nyquist mode keeps the value `−N/2`.

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

#[derive(Clone)]
struct AxisPlan {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Row-major grid with the last axis fastest. Axes of size 1 are constant.
#[derive(Clone)]
pub struct GridShape {
    sizes: Vec<usize>,
    strides: Vec<usize>,
    plans: Vec<Option<AxisPlan>>,
}

impl fmt::Debug for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GridShape({:?})", self.sizes)
    }
}

impl PartialEq for GridShape {
    fn eq(&self, o: &Self) -> bool {
        self.sizes == o.sizes
    }
}

impl GridShape {
    pub fn new(sizes: &[usize]) -> Self {
        let n = sizes.len();
        let mut strides = vec![1; n];
        for a in (0..n.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * sizes[a + 1];
        }
        let mut planner = FftPlanner::new();
        let plans = sizes
            .iter()
            .map(|&s| (s > 1).then(|| AxisPlan { fwd: planner.plan_fft_forward(s), inv: planner.plan_fft_inverse(s) }))
            .collect();
        GridShape { sizes: sizes.to_vec(), strides, plans }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn ndim(&self) -> usize {
        self.sizes.len()
    }

    pub fn len(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        1.0 / self.len() as f64
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.ndim()];
        for a in 0..self.ndim() {
            out[a] = idx / self.strides[a];
            idx %= self.strides[a];
        }
        out
    }

    pub fn flat_index(&self, mi: &[usize]) -> usize {
        mi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx).iter().zip(&self.sizes).map(|(&i, &s)| i as f64 / s as f64).collect()
    }

    /// Wavenumber of FFT slot `j` on an axis of size `n`.
    pub fn wavenumber(j: usize, n: usize) -> i64 {
        if j < n.div_ceil(2) {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }

    /// Largest `|k|` a band-limited field may carry along `axis` without
    /// touching the Nyquist slot.
    pub fn max_wavenumber(&self, axis: usize) -> usize {
        (self.sizes[axis].max(1) - 1) / 2
    }

    /// Copies each line along `axis` into a contiguous buffer, one line per
    /// (outer index, inner offset) pair.
    fn gather(&self, data: &[C64], comps: usize, axis: usize) -> Vec<C64> {
        let n = self.sizes[axis];
        let inner = self.strides[axis] * comps;
        let outer = data.len() / (n * inner);
        let mut buf = vec![C64::new(0.0, 0.0); data.len()];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * n * inner + i;
                let line = (o * inner + i) * n;
                for j in 0..n {
                    buf[line + j] = data[base + j * inner];
                }
            }
        }
        buf
    }

    fn scatter(&self, buf: &[C64], comps: usize, axis: usize) -> Vec<C64> {
        let n = self.sizes[axis];
        let inner = self.strides[axis] * comps;
        let outer = buf.len() / (n * inner);
        let mut out = vec![C64::new(0.0, 0.0); buf.len()];
        for o in 0..outer {
            for i in 0..inner {
                let base = o * n * inner + i;
                let line = (o * inner + i) * n;
                for j in 0..n {
                    out[base + j * inner] = buf[line + j];
                }
            }
        }
        out
    }

    /// Applies the multiplier `mult(k)` to the Fourier coefficients along
    /// `axis` of an interleaved field with `comps` components per point.
    fn along_axis(&self, data: &[C64], comps: usize, axis: usize, mult: impl Fn(i64) -> C64) -> Vec<C64> {
        let n = self.sizes[axis];
        let Some(plan) = &self.plans[axis] else {
            let m0 = mult(0);
            return data.iter().map(|v| v * m0).collect();
        };
        let mut buf = self.gather(data, comps, axis);
        plan.fwd.process(&mut buf);
        let scale = 1.0 / n as f64;
        let factors: Vec<C64> = (0..n).map(|j| mult(Self::wavenumber(j, n)) * scale).collect();
        for line in buf.chunks_mut(n) {
            for (v, f) in line.iter_mut().zip(&factors) {
                *v *= f;
            }
        }
        plan.inv.process(&mut buf);
        self.scatter(&buf, comps, axis)
    }

    /// `∂/∂x_axis` of an interleaved complex field. Keeping the Nyquist
    /// multiplier makes the discrete derivative skew-Hermitian and injective
    /// off the constants.
    pub fn derivative(&self, data: &[C64], comps: usize, axis: usize) -> Vec<C64> {
        if self.sizes[axis] == 1 {
            return vec![C64::new(0.0, 0.0); data.len()];
        }
        self.along_axis(data, comps, axis, |k| C64::new(0.0, 2.0 * PI * k as f64))
    }

    /// Second derivative along one axis, with the Nyquist mode included.
    pub fn second_derivative(&self, data: &[C64], comps: usize, axis: usize) -> Vec<C64> {
        if self.sizes[axis] == 1 {
            return vec![C64::new(0.0, 0.0); data.len()];
        }
        self.along_axis(data, comps, axis, |k| C64::new(-(2.0 * PI * k as f64).powi(2), 0.0))
    }

    /// Real scalar field derivative.
    pub fn derivative_real(&self, data: &[f64], axis: usize) -> Vec<f64> {
        let c: Vec<C64> = data.iter().map(|&v| C64::new(v, 0.0)).collect();
        self.derivative(&c, 1, axis).iter().map(|v| v.re).collect()
    }

    /// Applies an arbitrary Fourier multiplier on the full grid, component
    /// by component: `m(k)` receives the wavenumber vector.
    pub fn fourier_multiplier(&self, data: &[C64], comps: usize, m: impl Fn(&[i64]) -> f64) -> Vec<C64> {
        // transform axis by axis, scale, transform back
        let mut buf = data.to_vec();
        for a in 0..self.ndim() {
            if let Some(plan) = &self.plans[a] {
                buf = self.transform(&buf, comps, a, &plan.fwd);
            }
        }
        let n = self.len();
        for idx in 0..n {
            let k: Vec<i64> = self.multi_index(idx).iter().zip(&self.sizes).map(|(&j, &s)| Self::wavenumber(j, s)).collect();
            let f = m(&k) / n as f64;
            for c in 0..comps {
                buf[idx * comps + c] *= f;
            }
        }
        for a in 0..self.ndim() {
            if let Some(plan) = &self.plans[a] {
                buf = self.transform(&buf, comps, a, &plan.inv);
            }
        }
        buf
    }

    /// Unnormalised forward transform over every axis, `Σ_x e^{−2πik·x} u(x)`
    /// per component, in FFT slot order.
    pub fn forward(&self, data: &[C64], comps: usize) -> Vec<C64> {
        let mut buf = data.to_vec();
        for a in 0..self.ndim() {
            if let Some(plan) = &self.plans[a] {
                buf = self.transform(&buf, comps, a, &plan.fwd);
            }
        }
        buf
    }

    /// Flat FFT slot of the wavenumber vector `k`.
    pub fn slot(&self, k: &[i64]) -> usize {
        let mi: Vec<usize> = k.iter().zip(&self.sizes).map(|(&k, &n)| k.rem_euclid(n as i64) as usize).collect();
        self.flat_index(&mi)
    }

    fn transform(&self, data: &[C64], comps: usize, axis: usize, fft: &Arc<dyn Fft<f64>>) -> Vec<C64> {
        let mut buf = self.gather(data, comps, axis);
        fft.process(&mut buf);
        self.scatter(&buf, comps, axis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumber_order() {
        let ks: Vec<i64> = (0..8).map(|j| GridShape::wavenumber(j, 8)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        let ks: Vec<i64> = (0..5).map(|j| GridShape::wavenumber(j, 5)).collect();
        assert_eq!(ks, vec![0, 1, 2, -2, -1]);
    }

    #[test]
    fn derivative_of_mixed_wave() {
        let g = GridShape::new(&[8, 1, 6]);
        let f = |x: &[f64]| (2.0 * PI * (x[0] - 2.0 * x[2])).sin();
        let df = |x: &[f64]| -4.0 * PI * (2.0 * PI * (x[0] - 2.0 * x[2])).cos();
        let data: Vec<f64> = (0..g.len()).map(|i| f(&g.coords(i))).collect();
        let d = g.derivative_real(&data, 2);
        for i in 0..g.len() {
            assert!((d[i] - df(&g.coords(i))).abs() < 1e-12);
        }
        assert!(g.derivative_real(&data, 1).iter().all(|v| *v == 0.0));
    }
}
