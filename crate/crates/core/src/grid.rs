//! Discretized periodic box `[0, L)^N` with full-spectrum FFT plumbing.
//!
//! Fourier convention: coefficients are mode amplitudes, i.e. for
//! `f(x) = exp(2*pi*i k.x / L)` the coefficient at lattice index `k` is 1.
//! The cycles frequency of mode `k` is `xi = k/L`; derivatives multiply
//! spectra by `2*pi*i*xi`, written here as `i*kappa` with the angular
//! wavenumber `kappa = 2*pi*k/L`. With the default `L = 2*pi`, `kappa`
//! is the integer wavenumber itself.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{CoreError, Result};

/// Immutable description of the discretized torus, shared by fields,
/// partitions and solvers. Construction validates everything once; all
/// later operations are pure.
pub struct PeriodicGrid {
    dim: usize,
    points_per_axis: usize,
    period: f64,
    /// Largest retained wavenumber under the 2/3 dealiasing rule.
    k_keep: i64,
    /// Signed angular wavenumber per axis index (same table for every
    /// axis), with the Nyquist entry zeroed for derivative use.
    kappa_deriv_axis: Vec<f64>,
    /// |kappa| at every lattice point.
    kappa_abs: Vec<f64>,
    /// true where every axis wavenumber satisfies |k| <= k_keep.
    dealias_mask: Vec<bool>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("dim", &self.dim)
            .field("points_per_axis", &self.points_per_axis)
            .field("period", &self.period)
            .field("k_keep", &self.k_keep)
            .finish()
    }
}

impl PeriodicGrid {
    pub fn new(dim: usize, points_per_axis: usize, period: f64) -> Result<Arc<Self>> {
        if !(1..=2).contains(&dim) {
            return Err(CoreError::Config(format!(
                "grid dimension must be 1 or 2, got {dim}"
            )));
        }
        if points_per_axis < 8 || !points_per_axis.is_power_of_two() {
            return Err(CoreError::Config(format!(
                "points per axis must be a power of two >= 8, got {points_per_axis}"
            )));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(CoreError::Config(format!("period must be positive, got {period}")));
        }
        let m = points_per_axis;
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);

        let kappa_axis: Vec<f64> = (0..m)
            .map(|i| 2.0 * std::f64::consts::PI * signed_index(i, m) as f64 / period)
            .collect();
        let mut kappa_deriv_axis = kappa_axis.clone();
        kappa_deriv_axis[m / 2] = 0.0;

        let n = m.pow(dim as u32);
        // 2/3-rule cutoff: quadratic products of fields band-limited to
        // k_keep are alias-free on the retained band (3*k_keep <= M-1).
        let k_keep = (m as i64) / 3;

        let mut kappa_abs = vec![0.0; n];
        let mut dealias_mask = vec![false; n];
        for idx in 0..n {
            let mut sq = 0.0;
            let mut keep = true;
            let mut rem = idx;
            for _ in 0..dim {
                let i = rem % m;
                rem /= m;
                let ka = kappa_axis[i];
                sq += ka * ka;
                keep &= signed_index(i, m).abs() <= k_keep;
            }
            kappa_abs[idx] = sq.sqrt();
            dealias_mask[idx] = keep;
        }

        Ok(Arc::new(Self {
            dim,
            points_per_axis,
            period,
            k_keep,
            kappa_deriv_axis,
            kappa_abs,
            dealias_mask,
            fwd,
            inv,
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Total number of lattice points.
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing along each axis.
    pub fn dx(&self) -> f64 {
        self.period / self.points_per_axis as f64
    }

    /// Volume of the box.
    pub fn volume(&self) -> f64 {
        self.period.powi(self.dim as i32)
    }

    /// Quadrature weight of a single lattice point.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    pub fn k_keep(&self) -> i64 {
        self.k_keep
    }

    /// Largest |kappa| over lattice points retained by the 2/3 rule.
    pub fn kappa_keep_max(&self) -> f64 {
        let per_axis = 2.0 * std::f64::consts::PI * self.k_keep as f64 / self.period;
        per_axis * (self.dim as f64).sqrt()
    }

    /// Smallest nonzero |kappa| on the lattice.
    pub fn kappa_min(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.period
    }

    /// Signed integer wavenumber along `axis` at flat index `idx`.
    pub fn wavenumber(&self, idx: usize, axis: usize) -> i64 {
        let m = self.points_per_axis;
        let i = match (self.dim, axis) {
            (1, 0) => idx % m,
            (2, 0) => idx / m,
            (2, 1) => idx % m,
            _ => panic!("axis {axis} out of range for dim {}", self.dim),
        };
        signed_index(i, m)
    }

    /// Angular wavenumber along `axis` at flat index `idx`, with the
    /// Nyquist index mapped to zero so that derivative spectra of real
    /// fields stay Hermitian.
    pub fn kappa_deriv(&self, idx: usize, axis: usize) -> f64 {
        let m = self.points_per_axis;
        let i = match (self.dim, axis) {
            (1, 0) => idx % m,
            (2, 0) => idx / m,
            (2, 1) => idx % m,
            _ => panic!("axis {axis} out of range for dim {}", self.dim),
        };
        self.kappa_deriv_axis[i]
    }

    pub fn kappa_abs(&self) -> &[f64] {
        &self.kappa_abs
    }

    pub fn dealias_mask(&self) -> &[bool] {
        &self.dealias_mask
    }

    /// Physical coordinates of lattice point `idx`.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let m = self.points_per_axis;
        let dx = self.dx();
        match self.dim {
            1 => [(idx % m) as f64 * dx, 0.0],
            _ => [(idx / m) as f64 * dx, (idx % m) as f64 * dx],
        }
    }

    /// Normalized forward transform: mode amplitudes.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        assert_eq!(values.len(), self.len());
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform_in_place(&mut buf, true);
        let scale = 1.0 / self.len() as f64;
        for c in &mut buf {
            *c *= scale;
        }
        buf
    }

    /// Inverse of [`forward`]: real grid values from mode amplitudes.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.len());
        let mut buf = coeffs.to_vec();
        self.transform_in_place(&mut buf, false);
        buf.into_iter().map(|c| c.re).collect()
    }

    fn transform_in_place(&self, buf: &mut [Complex64], forward: bool) {
        let m = self.points_per_axis;
        let plan = if forward { &self.fwd } else { &self.inv };
        match self.dim {
            1 => plan.process(buf),
            2 => {
                // rows (contiguous axis)
                for row in buf.chunks_exact_mut(m) {
                    plan.process(row);
                }
                // columns
                let mut scratch = vec![Complex64::default(); m];
                for j in 0..m {
                    for i in 0..m {
                        scratch[i] = buf[i * m + j];
                    }
                    plan.process(&mut scratch);
                    for i in 0..m {
                        buf[i * m + j] = scratch[i];
                    }
                }
            }
            _ => unreachable!(),
        }
    }
}

fn signed_index(i: usize, m: usize) -> i64 {
    if i < m / 2 {
        i as i64
    } else {
        i as i64 - m as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_configs() {
        assert!(PeriodicGrid::new(3, 64, 1.0).is_err());
        assert!(PeriodicGrid::new(1, 4, 1.0).is_err());
        assert!(PeriodicGrid::new(1, 48, 1.0).is_err());
        assert!(PeriodicGrid::new(1, 64, -1.0).is_err());
    }

    #[test]
    fn roundtrip_1d() {
        let g = PeriodicGrid::new(1, 64, 2.0 * std::f64::consts::PI).unwrap();
        let vals: Vec<f64> = (0..64)
            .map(|i| {
                let x = g.coords(i)[0];
                1.3 + (3.0 * x).sin() + 0.2 * (7.0 * x).cos()
            })
            .collect();
        let back = g.inverse(&g.forward(&vals));
        let num: f64 = vals.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = vals.iter().map(|a| a * a).sum();
        assert!((num / den).sqrt() < 1e-12);
    }

    #[test]
    fn roundtrip_2d_and_mode_amplitude() {
        let g = PeriodicGrid::new(2, 16, 2.0 * std::f64::consts::PI).unwrap();
        let vals: Vec<f64> = (0..g.len())
            .map(|i| {
                let [x, y] = g.coords(i);
                (2.0 * x).cos() * (3.0 * y).sin()
            })
            .collect();
        let coeffs = g.forward(&vals);
        // cos(2x) sin(3y) = sum of four modes with |amplitude| 1/4
        let mut hits = 0;
        for (idx, c) in coeffs.iter().enumerate() {
            if c.norm() > 1e-12 {
                hits += 1;
                assert_relative_eq!(c.norm(), 0.25, max_relative = 1e-12);
                assert_eq!(g.wavenumber(idx, 0).abs(), 2);
                assert_eq!(g.wavenumber(idx, 1).abs(), 3);
            }
        }
        assert_eq!(hits, 4);
        let back = g.inverse(&coeffs);
        for (a, b) in vals.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dealias_cutoff_matches_two_thirds_rule() {
        for m in [8usize, 64, 128, 256] {
            let g = PeriodicGrid::new(1, m, 1.0).unwrap();
            assert!(3 * g.k_keep() <= m as i64 - 1);
            assert!(3 * (g.k_keep() + 1) > m as i64 - 1);
        }
    }
}
