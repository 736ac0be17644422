//! Grid functions with paired physical/spectral representations.
//!
//! Fields are immutable after construction: both representations are
//! computed once and always consistent, so they can be shared freely
//! across threads.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{CoreError, Result};
use crate::grid::PeriodicGrid;

/// Real-valued grid function with cached spectral coefficients.
#[derive(Clone)]
pub struct ScalarField {
    grid: Arc<PeriodicGrid>,
    values: Vec<f64>,
    coeffs: Vec<Complex64>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "ScalarField(dim={}, M={}, linf={:.3e})",
            self.grid.dim(),
            self.grid.points_per_axis(),
            self.linf_norm()
        )
    }
}

impl ScalarField {
    pub fn from_values(grid: Arc<PeriodicGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(CoreError::Config(format!(
                "field length {} does not match grid ({} points)",
                values.len(),
                grid.len()
            )));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::Domain {
                index: idx,
                value: values[idx],
                message: "non-finite field value".into(),
            });
        }
        let coeffs = grid.forward(&values);
        Ok(Self { grid, values, coeffs })
    }

    pub fn from_coeffs(grid: Arc<PeriodicGrid>, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), grid.len());
        let values = grid.inverse(&coeffs);
        Self { grid, values, coeffs }
    }

    /// Sample a closure on the lattice. 1-D closures receive `(x, 0)`.
    pub fn from_fn(grid: Arc<PeriodicGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values: Vec<f64> = (0..grid.len())
            .map(|i| {
                let [x, y] = grid.coords(i);
                f(x, y)
            })
            .collect();
        let coeffs = grid.forward(&values);
        Self { grid, values, coeffs }
    }

    /// Pointwise values projected onto the 2/3-rule band; the standard way
    /// to build a field from a nonlinear pointwise expression.
    pub fn from_values_dealiased(grid: Arc<PeriodicGrid>, values: &[f64]) -> Self {
        let mut coeffs = grid.forward(values);
        for (c, keep) in coeffs.iter_mut().zip(grid.dealias_mask()) {
            if !keep {
                *c = Complex64::default();
            }
        }
        Self::from_coeffs(grid, coeffs)
    }

    pub fn zero(grid: Arc<PeriodicGrid>) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
            coeffs: vec![Complex64::default(); n],
        }
    }

    pub fn constant(grid: Arc<PeriodicGrid>, c: f64) -> Self {
        let n = grid.len();
        let mut coeffs = vec![Complex64::default(); n];
        coeffs[0] = Complex64::new(c, 0.0);
        Self {
            grid,
            values: vec![c; n],
            coeffs,
        }
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// Integral over the box (spectrally exact quadrature).
    pub fn integral(&self) -> f64 {
        self.mean() * self.grid.volume()
    }

    /// `L^2` norm of the box via Parseval.
    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        (sum * self.grid.volume()).sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Spectral derivative along `axis` (multiplication by `i*kappa`).
    pub fn derivative(&self, axis: usize) -> Self {
        let coeffs: Vec<Complex64> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, c)| c * Complex64::new(0.0, self.grid.kappa_deriv(idx, axis)))
            .collect();
        Self::from_coeffs(self.grid.clone(), coeffs)
    }

    pub fn gradient(&self) -> VectorField {
        VectorField {
            comps: (0..self.grid.dim()).map(|a| self.derivative(a)).collect(),
        }
    }

    /// Apply a real spectral multiplier sampled on the lattice.
    pub fn apply_multiplier(&self, mult: &[f64]) -> Self {
        assert_eq!(mult.len(), self.coeffs.len());
        let coeffs: Vec<Complex64> = self
            .coeffs
            .iter()
            .zip(mult)
            .map(|(c, &m)| c * m)
            .collect();
        Self::from_coeffs(self.grid.clone(), coeffs)
    }

    /// `L^2` norm of the multiplier-filtered field, computed spectrally
    /// without an inverse transform.
    pub fn filtered_l2(&self, mult: &[f64]) -> f64 {
        let sum: f64 = self
            .coeffs
            .iter()
            .zip(mult)
            .map(|(c, &m)| c.norm_sqr() * m * m)
            .sum();
        (sum * self.grid.volume()).sqrt()
    }

    /// Dealiased pointwise product (2/3 rule).
    pub fn mul_dealiased(&self, other: &Self) -> Self {
        let vals: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Self::from_values_dealiased(self.grid.clone(), &vals)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        let coeffs: Vec<Complex64> = self.coeffs.iter().map(|v| v * c).collect();
        let values: Vec<f64> = self.values.iter().map(|v| v * c).collect();
        Self {
            grid: self.grid.clone(),
            values,
            coeffs,
        }
    }

    fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert!(Arc::ptr_eq(&self.grid, &other.grid) || self.grid.len() == other.grid.len());
        let values: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        // linear combinations stay band-limited; transform directly
        let coeffs: Vec<Complex64> = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| Complex64::new(f(a.re, b.re), f(a.im, b.im)))
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
            coeffs,
        }
    }

    /// Relative L^2 distance, normalized by the first argument unless tiny.
    pub fn rel_l2_err(&self, other: &Self) -> f64 {
        let diff = self.sub(other).l2_norm();
        let base = self.l2_norm().max(1e-300);
        diff / base
    }
}

/// N-component grid function.
#[derive(Clone, Debug)]
pub struct VectorField {
    comps: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(comps: Vec<ScalarField>) -> Self {
        assert!(!comps.is_empty());
        Self { comps }
    }

    pub fn zero(grid: Arc<PeriodicGrid>) -> Self {
        let dim = grid.dim();
        Self {
            comps: (0..dim).map(|_| ScalarField::zero(grid.clone())).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comp(&self, j: usize) -> &ScalarField {
        &self.comps[j]
    }

    pub fn comps(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn divergence(&self) -> ScalarField {
        let mut out = self.comps[0].derivative(0);
        for (a, c) in self.comps.iter().enumerate().skip(1) {
            out = out.add(&c.derivative(a));
        }
        out
    }

    /// Pointwise Euclidean sup-norm over the grid.
    pub fn linf_norm(&self) -> f64 {
        let n = self.comps[0].values().len();
        let mut best: f64 = 0.0;
        for i in 0..n {
            let sq: f64 = self.comps.iter().map(|c| c.values()[i].powi(2)).sum();
            best = best.max(sq.sqrt());
        }
        best
    }
}

/// Deterministic spectral description of a random smooth function.
///
/// Coefficients are drawn per integer mode in a grid-independent order, so
/// the same spec realizes the same continuum function on any grid fine
/// enough to hold the band — the basis of every refinement-stability check.
#[derive(Clone, Copy, Debug)]
pub struct RandomFieldSpec {
    pub seed: u64,
    /// Euclidean band |k| in [k_min, k_max], integer wavenumbers.
    pub k_min: f64,
    pub k_max: f64,
    /// Spectral slope: coefficient scale (1+|k|^2)^(-decay/2).
    pub decay: f64,
    /// Target L^2 norm; spectral rescaling keeps the realization
    /// grid-independent.
    pub amplitude: f64,
}

impl RandomFieldSpec {
    pub fn realize(&self, grid: &Arc<PeriodicGrid>) -> Result<ScalarField> {
        if self.k_max > grid.k_keep() as f64 + 1e-9 {
            return Err(CoreError::Config(format!(
                "random band k_max={} exceeds resolved band k_keep={}",
                self.k_max,
                grid.k_keep()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let m = grid.points_per_axis() as i64;
        let kb = self.k_max.floor() as i64;
        let mut coeffs = vec![Complex64::default(); grid.len()];
        // canonical half-space order, independent of grid resolution
        let dim = grid.dim();
        let put = |coeffs: &mut Vec<Complex64>, k: [i64; 2], c: Complex64| {
            let idx = lattice_index(grid, k);
            coeffs[idx] = c;
            let kc = [-k[0], -k[1]];
            let idxc = lattice_index(grid, kc);
            coeffs[idxc] = c.conj();
        };
        let draw = |rng: &mut ChaCha8Rng, kk: f64| -> Complex64 {
            let g1: f64 = StandardNormal.sample(rng);
            let g2: f64 = StandardNormal.sample(rng);
            let scale = (1.0 + kk * kk).powf(-self.decay / 2.0);
            Complex64::new(g1, g2) * scale
        };
        match dim {
            1 => {
                for k in 1..=kb {
                    let kk = k as f64;
                    if kk < self.k_min || kk > self.k_max {
                        // keep the RNG stream aligned across bands
                        let _ = draw(&mut rng, kk);
                        continue;
                    }
                    let c = draw(&mut rng, kk);
                    put(&mut coeffs, [k, 0], c);
                }
            }
            2 => {
                // canonical modes: k0 > 0, or (k0 == 0 and k1 > 0)
                for k0 in 0..=kb {
                    for k1 in -kb..=kb {
                        if k0 == 0 && k1 <= 0 {
                            continue;
                        }
                        let kk = ((k0 * k0 + k1 * k1) as f64).sqrt();
                        if kk < self.k_min || kk > self.k_max || kk > kb as f64 {
                            let _ = draw(&mut rng, kk);
                            continue;
                        }
                        if k0.abs() >= m / 2 || k1.abs() >= m / 2 {
                            continue;
                        }
                        let c = draw(&mut rng, kk);
                        put(&mut coeffs, [k0, k1], c);
                    }
                }
            }
            _ => unreachable!(),
        }
        // L^2 normalization is a pure function of the coefficients, so the
        // same spec realizes the same continuum function on every grid.
        let norm_sq: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        let l2 = (norm_sq * grid.volume()).sqrt();
        if l2 == 0.0 {
            return Err(CoreError::Config(
                "random field spec produced the zero field (empty band?)".into(),
            ));
        }
        let scale = self.amplitude / l2;
        for c in &mut coeffs {
            *c *= scale;
        }
        Ok(ScalarField::from_coeffs(grid.clone(), coeffs))
    }
}

fn lattice_index(grid: &Arc<PeriodicGrid>, k: [i64; 2]) -> usize {
    let m = grid.points_per_axis() as i64;
    let wrap = |k: i64| -> usize { (((k % m) + m) % m) as usize };
    match grid.dim() {
        1 => wrap(k[0]),
        _ => wrap(k[0]) * grid.points_per_axis() + wrap(k[1]),
    }
}

/// A pure lattice mode `amp * sin(2*pi*k.x/L + phase)` along axis 0 (1-D)
/// or with the given wavevector (2-D).
pub fn mode_field(grid: &Arc<PeriodicGrid>, k: [i64; 2], amp: f64, phase: f64) -> ScalarField {
    let period = grid.period();
    ScalarField::from_fn(grid.clone(), |x, y| {
        let arg = 2.0 * std::f64::consts::PI * (k[0] as f64 * x + k[1] as f64 * y) / period + phase;
        amp * arg.sin()
    })
}
