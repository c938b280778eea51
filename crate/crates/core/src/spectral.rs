//! FFT helpers: spectral differentiation and zero-padded linear convolution.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Derivative of a sampled function by multiplication with `ik` in Fourier
/// space. The samples are treated as one period, so the function must be
/// negligible at both ends of the grid. The Nyquist mode is dropped.
pub fn spectral_derivative(values: &[Complex64], dx: f64) -> Vec<Complex64> {
    let n = values.len();
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);

    let mut buf = values.to_vec();
    forward.process(&mut buf);
    let dk = 2.0 * PI / (n as f64 * dx);
    for (q, c) in buf.iter_mut().enumerate() {
        let signed = if q < n / 2 {
            q as f64
        } else if q == n / 2 {
            0.0
        } else {
            q as f64 - n as f64
        };
        *c *= Complex64::new(0.0, signed * dk / n as f64);
    }
    inverse.process(&mut buf);
    buf
}

/// Linear ("same"-mode) convolution of many equal-length real lines with one
/// symmetric kernel, via zero-padded FFTs. Samples outside a line count as 0.
pub struct LineConvolver {
    len: usize,
    half_width: usize,
    padded: usize,
    kernel_spectrum: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl LineConvolver {
    /// `kernel[m]` is the weight at offset `m − half_width`; its length must be
    /// `2·half_width + 1`.
    pub fn new(len: usize, kernel: &[f64]) -> Self {
        assert!(kernel.len() % 2 == 1, "kernel must have odd length");
        let half_width = kernel.len() / 2;
        let padded = (len + 2 * half_width).next_power_of_two();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(padded);
        let inverse = planner.plan_fft_inverse(padded);

        // kernel centred at index 0 with wrap-around for negative offsets
        let mut spectrum = vec![Complex64::new(0.0, 0.0); padded];
        for (m, &w) in kernel.iter().enumerate() {
            let offset = m as i64 - half_width as i64;
            let slot = offset.rem_euclid(padded as i64) as usize;
            spectrum[slot] = Complex64::new(w / padded as f64, 0.0);
        }
        forward.process(&mut spectrum);

        LineConvolver {
            len,
            half_width,
            padded,
            kernel_spectrum: spectrum,
            forward,
            inverse,
        }
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn convolve(&self, line: &[f64]) -> Vec<f64> {
        assert_eq!(line.len(), self.len);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.padded];
        for (b, &v) in buf.iter_mut().zip(line) {
            b.re = v;
        }
        self.forward.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_spectrum) {
            *b *= k;
        }
        self.inverse.process(&mut buf);
        buf[..self.len].iter().map(|c| c.re).collect()
    }
}

/// Samples of `exp(−(m·step)²/(2σ²))` for `|m| ≤ half_width`, where the
/// half-width reaches `cutoff_sigmas·σ`.
pub fn gaussian_kernel(step: f64, sigma: f64, cutoff_sigmas: f64) -> Vec<f64> {
    let half_width = (cutoff_sigmas * sigma / step).ceil() as i64;
    (-half_width..=half_width)
        .map(|m| {
            let u = m as f64 * step / sigma;
            (-0.5 * u * u).exp()
        })
        .collect()
}
