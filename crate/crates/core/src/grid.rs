//! Periodic vertical grid and unitary spectral calculus.
//!
//! The shear coordinate z lives on the torus [center - L, center + L) sampled
//! at n equispaced points (n a power of two, so FFTs stay fast and frequency
//! indices split evenly). The discrete transform is scaled to be unitary with
//! respect to the continuum inner products,
//!
//!   c_k = h / sqrt(2L) * sum_j f_j exp(-2 pi i j k / n),
//!   f_j = 1 / sqrt(2L) * sum_k c_k exp(+2 pi i j k / n),
//!
//! so Parseval holds exactly in the trapezoidal sense:
//!
//!   sum_k |c_k|^2 = h * sum_j |f_j|^2  ~  integral |f|^2 dz.
//!
//! Frequencies are xi_k = (pi / L) * m_k with m_k the signed FFT bin index
//! (0, 1, ..., n/2-1, -n/2, ..., -1). All spectral operations used by the
//! solver (d/dz, the translated derivative D = d/dz - i k t, resolvent
//! divisions) are diagonal in this basis, so the absolute position of the
//! grid enters only through the sample points themselves.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Equispaced periodic grid for the vertical coordinate.
#[derive(Debug, Clone)]
pub struct ZGrid {
    n: usize,
    half_length: f64,
    center: f64,
    h: f64,
    points: Vec<f64>,
    freqs: Vec<f64>,
}

impl ZGrid {
    /// Grid of `n` points covering `[-half_length, half_length)`.
    pub fn new(n: usize, half_length: f64) -> Result<Self> {
        Self::with_center(n, half_length, 0.0)
    }

    /// Grid of `n` points covering `[center - half_length, center + half_length)`.
    pub fn with_center(n: usize, half_length: f64, center: f64) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::BadGridSize(n));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::Config(format!(
                "grid half-length must be positive and finite, got {half_length}"
            )));
        }
        let h = 2.0 * half_length / n as f64;
        let points = (0..n)
            .map(|j| center - half_length + j as f64 * h)
            .collect();
        let freqs = (0..n)
            .map(|k| {
                let m = if k < n / 2 { k as i64 } else { k as i64 - n as i64 };
                std::f64::consts::PI / half_length * m as f64
            })
            .collect();
        Ok(Self {
            n,
            half_length,
            center,
            h,
            points,
            freqs,
        })
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.n
    }

    /// Always false; grids have at least 16 points.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing h = 2L / n.
    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Half-length L of the periodic cell.
    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    /// Center of the periodic cell.
    pub fn center(&self) -> f64 {
        self.center
    }

    /// Sample points z_j, ascending.
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Frequencies xi_k = (pi/L) m_k in FFT bin order.
    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    /// Largest frequency magnitude representable on the grid, pi/L * n/2.
    pub fn max_freq(&self) -> f64 {
        std::f64::consts::PI / self.half_length * (self.n / 2) as f64
    }

    /// Discrete L^2(dz) norm, sqrt(h sum |f_j|^2).
    pub fn norm(&self, f: &[Complex64]) -> f64 {
        (self.h * f.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Discrete weighted square norm, h sum w_j |f_j|^2.
    pub fn weighted_norm_sq(&self, weight: &[f64], f: &[Complex64]) -> f64 {
        self.h
            * weight
                .iter()
                .zip(f)
                .map(|(w, v)| w * v.norm_sqr())
                .sum::<f64>()
    }

    /// Checked weighted norm sqrt(h sum w_j |f_j|^2); weights must be >= 0.
    pub fn weighted_norm(&self, weight: &[f64], f: &[Complex64]) -> Result<f64> {
        if weight.len() != f.len() {
            return Err(Error::LengthMismatch {
                context: "weighted_norm",
                left: weight.len(),
                right: f.len(),
            });
        }
        if let Some((index, &value)) = weight.iter().enumerate().find(|(_, w)| **w < 0.0) {
            return Err(Error::NegativeWeight {
                context: "weighted_norm",
                index,
                value,
            });
        }
        Ok(self.weighted_norm_sq(weight, f).sqrt())
    }

    /// Discrete inner product h sum conj(f_j) g_j.
    pub fn inner(&self, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        f.iter()
            .zip(g)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.h
    }
}

/// FFT plans and scratch space for one grid size.
///
/// Wraps rustfft's unnormalized transforms with the unitary scaling described
/// in the module docs. All operations are in place over `Complex64` buffers of
/// the grid length.
pub struct SpectralOps {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    fwd_scale: f64,
    inv_scale: f64,
    freqs: Vec<f64>,
}

impl SpectralOps {
    /// Plan transforms for `grid`.
    pub fn new(grid: &ZGrid) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid.n);
        let inverse = planner.plan_fft_inverse(grid.n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        let sqrt_2l = (2.0 * grid.half_length).sqrt();
        SpectralOps {
            n: grid.n,
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
            fwd_scale: grid.h / sqrt_2l,
            inv_scale: 1.0 / sqrt_2l,
            freqs: grid.freqs.clone(),
        }
    }

    /// Buffer length the plans expect.
    pub fn len(&self) -> usize {
        self.n
    }

    /// Always false.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Frequencies in FFT bin order (same as [`ZGrid::freqs`]).
    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    /// Checked transform: physical samples -> spectral coefficients.
    pub fn dft(&mut self, values: &[Complex64]) -> Result<Vec<Complex64>> {
        if values.len() != self.n {
            return Err(Error::LengthMismatch {
                context: "dft",
                left: values.len(),
                right: self.n,
            });
        }
        let mut buf = values.to_vec();
        self.forward(&mut buf);
        Ok(buf)
    }

    /// Checked transform: spectral coefficients -> physical samples.
    pub fn idft(&mut self, coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
        if coeffs.len() != self.n {
            return Err(Error::LengthMismatch {
                context: "idft",
                left: coeffs.len(),
                right: self.n,
            });
        }
        let mut buf = coeffs.to_vec();
        self.inverse(&mut buf);
        Ok(buf)
    }

    /// Physical samples -> spectral coefficients, in place.
    pub fn forward(&mut self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n);
        self.forward.process_with_scratch(buf, &mut self.scratch);
        for v in buf.iter_mut() {
            *v *= self.fwd_scale;
        }
    }

    /// Spectral coefficients -> physical samples, in place.
    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.n);
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        for v in buf.iter_mut() {
            *v *= self.inv_scale;
        }
    }

    /// Multiply a spectral buffer by a function of the frequency.
    pub fn scale_spectrum(&self, buf: &mut [Complex64], mut m: impl FnMut(f64) -> Complex64) {
        for (v, &xi) in buf.iter_mut().zip(&self.freqs) {
            *v *= m(xi);
        }
    }

    /// Apply a Fourier multiplier to a physical buffer, in place:
    /// forward, multiply by m(xi), inverse.
    pub fn apply_multiplier(&mut self, buf: &mut [Complex64], m: impl FnMut(f64) -> Complex64) {
        self.forward(buf);
        self.scale_spectrum_mut(buf, m);
        self.inverse(buf);
    }

    fn scale_spectrum_mut(&mut self, buf: &mut [Complex64], mut m: impl FnMut(f64) -> Complex64) {
        for (v, &xi) in buf.iter_mut().zip(&self.freqs) {
            *v *= m(xi);
        }
    }

    /// Translated derivative D = d/dz - i k t applied to a physical buffer.
    pub fn d_translated(&mut self, buf: &mut [Complex64], kt: f64) {
        self.apply_multiplier(buf, |xi| Complex64::new(0.0, xi - kt));
    }

    /// Plain derivative d/dz applied to a physical buffer.
    pub fn d_dz(&mut self, buf: &mut [Complex64]) {
        self.d_translated(buf, 0.0);
    }

    /// Spectral square norm sum |c_k|^2 (equals the physical h sum |f|^2).
    pub fn spectrum_norm_sq(buf: &[Complex64]) -> f64 {
        buf.iter().map(|v| v.norm_sqr()).sum()
    }
}
