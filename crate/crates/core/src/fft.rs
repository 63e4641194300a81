//! Radix-2 complex FFT with precomputed twiddles, plus a row-column 2D variant.
//!
//! `forward` computes `X_k = Σ_n x_n e^{-2πi kn/N}`; `inverse` applies the
//! conjugate kernel and divides by `N`, so `inverse(forward(x)) = x`.

use alloc::vec::Vec;
use num_complex::Complex64;
use num_traits::Float;

use crate::error::{Error, Result};
use crate::math::{PI, is_power_of_two};

#[derive(Clone, Debug)]
pub struct FftPlan {
    n: usize,
    twiddles: Vec<Complex64>,
    rev: Vec<u32>,
}

impl FftPlan {
    pub fn new(n: usize) -> Result<Self> {
        if !is_power_of_two(n) {
            return Err(Error::Parameter(alloc::format!(
                "FFT length {n} is not a power of two"
            )));
        }
        let bits = n.trailing_zeros();
        let rev = (0..n as u32)
            .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (32 - bits) })
            .collect();
        // Twiddles evaluated directly per index to avoid recurrence drift.
        let twiddles = (0..n / 2)
            .map(|k| {
                let a = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(Float::cos(a), Float::sin(a))
            })
            .collect();
        Ok(Self { n, twiddles, rev })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
        let s = 1.0 / self.n as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    /// Inverse kernel without the `1/N` factor.
    pub fn inverse_unscaled(&self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    fn transform(&self, data: &mut [Complex64], conj: bool) {
        let n = self.n;
        assert_eq!(data.len(), n, "FFT input length mismatch");
        for i in 0..n {
            let j = self.rev[i] as usize;
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let half = len / 2;
            let stride = n / len;
            for start in (0..n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if conj {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }
}

/// Square 2D transform on row-major `n × n` data.
#[derive(Clone, Debug)]
pub struct Fft2 {
    plan: FftPlan,
}

impl Fft2 {
    pub fn new(n: usize) -> Result<Self> {
        Ok(Self { plan: FftPlan::new(n)? })
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, false);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, true);
    }

    fn apply(&self, data: &mut [Complex64], inv: bool) {
        let n = self.plan.len();
        assert_eq!(data.len(), n * n);
        let run = |v: &mut [Complex64]| {
            if inv { self.plan.inverse(v) } else { self.plan.forward(v) }
        };
        for row in data.chunks_mut(n) {
            run(row);
        }
        let mut col = alloc::vec![Complex64::new(0.0, 0.0); n];
        for c in 0..n {
            for r in 0..n {
                col[r] = data[r * n + c];
            }
            run(&mut col);
            for r in 0..n {
                data[r * n + c] = col[r];
            }
        }
    }
}

/// Signed frequency index of FFT bin `k` for length `n`.
#[inline]
pub fn signed_index(k: usize, n: usize) -> i64 {
    if k < n / 2 { k as i64 } else { k as i64 - n as i64 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let a = -2.0 * PI * (k * j % n) as f64 / n as f64;
                        v * Complex64::new(a.cos(), a.sin())
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft() {
        let x: Vec<Complex64> = (0..64)
            .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let mut y = x.clone();
        FftPlan::new(64).unwrap().forward(&mut y);
        let z = naive_dft(&x);
        for (a, b) in y.iter().zip(&z) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn round_trip() {
        let plan = FftPlan::new(256).unwrap();
        let x: Vec<Complex64> = (0..256).map(|i| Complex64::new(i as f64, -(i as f64).sqrt())).collect();
        let mut y = x.clone();
        plan.forward(&mut y);
        plan.inverse(&mut y);
        for (a, b) in y.iter().zip(&x) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn two_dimensional_plane_wave() {
        let n = 8;
        let f = Fft2::new(n).unwrap();
        let mut d = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                let a = 2.0 * PI * (2 * r + 3 * c) as f64 / n as f64;
                d[r * n + c] = Complex64::new(a.cos(), a.sin());
            }
        }
        f.forward(&mut d);
        for (i, v) in d.iter().enumerate() {
            let expect = if i == 2 * n + 3 { (n * n) as f64 } else { 0.0 };
            assert!((v.re - expect).abs() < 1e-9 && v.im.abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(FftPlan::new(48).is_err());
    }
}
