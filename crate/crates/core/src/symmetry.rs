//! Entropy, entropy variables, the symmetric-form matrices of the damped
//! Euler system, and the compensating matrix of the stability condition,
//! with machine-precision identity checks.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::field::{ScalarField, VectorField};

/// States with density at or below this are treated as vacuum breaches.
pub const VACUUM_GUARD: f64 = 1e-10;

/// The gamma-law pressure `p(rho) = rho^gamma`, `gamma >= 1`, together with
/// the enthalpy-type primitive `h` normalized by `h(1) = 0`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PressureLaw {
    gamma: f64,
}

impl PressureLaw {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma >= 1.0) || !gamma.is_finite() {
            return Err(CoreError::Config(format!(
                "adiabatic exponent must satisfy gamma >= 1, got {gamma}"
            )));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn isothermal(&self) -> bool {
        (self.gamma - 1.0).abs() < 1e-12
    }

    pub fn p(&self, rho: f64) -> f64 {
        rho.powf(self.gamma)
    }

    pub fn p_prime(&self, rho: f64) -> f64 {
        self.gamma * rho.powf(self.gamma - 1.0)
    }

    pub fn p_second(&self, rho: f64) -> f64 {
        self.gamma * (self.gamma - 1.0) * rho.powf(self.gamma - 2.0)
    }

    /// `h'(rho) = int_1^rho p'(s)/s ds`, in closed form.
    pub fn h_prime(&self, rho: f64) -> f64 {
        if self.isothermal() {
            rho.ln()
        } else {
            self.gamma / (self.gamma - 1.0) * (rho.powf(self.gamma - 1.0) - 1.0)
        }
    }

    /// `h` with `h(1) = 0`.
    pub fn h(&self, rho: f64) -> f64 {
        if self.isothermal() {
            rho * rho.ln() - rho + 1.0
        } else {
            ((rho.powf(self.gamma) - 1.0) - self.gamma * (rho - 1.0)) / (self.gamma - 1.0)
        }
    }

    /// Closed-form inverse of `h'`; errors outside its range (vacuum side).
    pub fn h_prime_inv(&self, y: f64) -> Result<f64> {
        if self.isothermal() {
            return Ok(y.exp());
        }
        let base = 1.0 + (self.gamma - 1.0) * y / self.gamma;
        if base <= 0.0 {
            return Err(CoreError::Validation(format!(
                "h' inverse argument {y:.6e} below the vacuum limit {:.6e}",
                -self.gamma / (self.gamma - 1.0)
            )));
        }
        Ok(base.powf(1.0 / (self.gamma - 1.0)))
    }

    /// Safeguarded Newton/bisection inverse of `h'` bracketed on
    /// `[1e-8, 1e8]`; kept for pressure laws without a closed form.
    pub fn h_prime_inv_newton(&self, y: f64) -> Result<f64> {
        let (mut lo, mut hi) = (1e-8_f64, 1e8_f64);
        if y <= self.h_prime(lo) || y >= self.h_prime(hi) {
            return Err(CoreError::Validation(format!(
                "h' inverse argument {y:.6e} outside the bracket"
            )));
        }
        let mut x = 1.0_f64;
        for _ in 0..200 {
            let fx = self.h_prime(x) - y;
            if fx.abs() <= 1e-14 * (1.0 + y.abs()) {
                return Ok(x);
            }
            if fx > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let dfx = self.p_prime(x) / x;
            let newton = x - fx / dfx;
            x = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (hi - lo) < 1e-15 * x.abs() {
                break;
            }
        }
        Ok(x)
    }
}

/// The entropy variable `W = (W1, W2)` on the grid, with its reference.
#[derive(Clone, Debug)]
pub struct EntropyState {
    pub w1: ScalarField,
    pub w2: VectorField,
    pub rho_bar: f64,
    pub law: PressureLaw,
}

impl EntropyState {
    /// `W̄ = (h'(rho_bar), 0)`.
    pub fn w_bar(&self) -> f64 {
        self.law.h_prime(self.rho_bar)
    }
}

fn check_positive(rho: &ScalarField, what: &str) -> Result<()> {
    for (idx, &v) in rho.values().iter().enumerate() {
        if !(v > VACUUM_GUARD) {
            return Err(CoreError::Domain {
                index: idx,
                value: v,
                message: format!("{what} at/below the vacuum guard {VACUUM_GUARD:e}"),
            });
        }
    }
    Ok(())
}

/// `W = grad eta(rho, m) = (h'(rho) - |m|^2/(2 rho^2), m/rho)`.
pub fn to_entropy_vars(
    rho: &ScalarField,
    m: &VectorField,
    law: PressureLaw,
    rho_bar: f64,
) -> Result<EntropyState> {
    check_positive(rho, "density")?;
    let grid = rho.grid().clone();
    let n = grid.len();
    let mut w1 = vec![0.0; n];
    for i in 0..n {
        let r = rho.values()[i];
        let msq: f64 = m.comps().iter().map(|c| c.values()[i].powi(2)).sum();
        w1[i] = law.h_prime(r) - msq / (2.0 * r * r);
    }
    let w2 = VectorField::new(
        m.comps()
            .iter()
            .map(|c| {
                let vals: Vec<f64> = c
                    .values()
                    .iter()
                    .zip(rho.values())
                    .map(|(&mi, &r)| mi / r)
                    .collect();
                ScalarField::from_values(grid.clone(), vals)
            })
            .collect::<Result<Vec<_>>>()?,
    );
    Ok(EntropyState {
        w1: ScalarField::from_values(grid, w1)?,
        w2,
        rho_bar,
        law,
    })
}

/// Inverse map: `rho = (h')^{-1}(W1 + |W2|^2/2)`, `m = rho W2`.
pub fn from_entropy_vars(state: &EntropyState) -> Result<(ScalarField, VectorField)> {
    let grid = state.w1.grid().clone();
    let n = grid.len();
    let law = state.law;
    let mut rho = vec![0.0; n];
    for i in 0..n {
        let wsq: f64 = state.w2.comps().iter().map(|c| c.values()[i].powi(2)).sum();
        let y = state.w1.values()[i] + 0.5 * wsq;
        rho[i] = law.h_prime_inv(y).map_err(|_| CoreError::Domain {
            index: i,
            value: y,
            message: "entropy variable outside the range of h' (vacuum breach)".into(),
        })?;
        if rho[i] <= VACUUM_GUARD {
            return Err(CoreError::Domain {
                index: i,
                value: rho[i],
                message: "recovered density at/below the vacuum guard".into(),
            });
        }
    }
    let rho = ScalarField::from_values(grid.clone(), rho)?;
    let m = VectorField::new(
        state
            .w2
            .comps()
            .iter()
            .map(|c| {
                let vals: Vec<f64> = c
                    .values()
                    .iter()
                    .zip(rho.values())
                    .map(|(&w, &r)| r * w)
                    .collect();
                ScalarField::from_values(grid.clone(), vals)
            })
            .collect::<Result<Vec<_>>>()?,
    );
    Ok((rho, m))
}

/// The symmetric-form matrices evaluated at one state point.
#[derive(Clone, Debug)]
pub struct MatrixFamily {
    pub a0: DMatrix<f64>,
    pub a_j: Vec<DMatrix<f64>>,
    /// relaxation source `H(W) = p'(rho) (0, -W2/tau)`
    pub source: DVector<f64>,
    pub a0_i: DMatrix<f64>,
    pub a0_ii: DMatrix<f64>,
    pub aj_i: Vec<DMatrix<f64>>,
    pub aj_ii: Vec<DMatrix<f64>>,
    pub rho: f64,
}

/// Evaluate `A^0`, `A^j`, `H` and their block splits at the point
/// `W = (w1, w2)` in dimension `N = w2.len()`.
pub fn matrices_at(w1: f64, w2: &[f64], law: PressureLaw, tau: f64) -> Result<MatrixFamily> {
    let n = w2.len();
    assert!(n >= 1, "need at least one spatial dimension");
    let wsq: f64 = w2.iter().map(|v| v * v).sum();
    let rho = law.h_prime_inv(w1 + 0.5 * wsq)?;
    if rho <= VACUUM_GUARD {
        return Err(CoreError::Validation(format!(
            "state recovers density {rho:.3e} at/below the vacuum guard"
        )));
    }
    let pp = law.p_prime(rho);
    let d = n + 1;

    let mut a0_i = DMatrix::zeros(d, d);
    a0_i[(0, 0)] = 1.0;
    for i in 0..n {
        a0_i[(0, i + 1)] = w2[i];
        a0_i[(i + 1, 0)] = w2[i];
        for j in 0..n {
            a0_i[(i + 1, j + 1)] = w2[i] * w2[j];
        }
    }
    let mut a0_ii = DMatrix::zeros(d, d);
    for i in 0..n {
        a0_ii[(i + 1, i + 1)] = pp;
    }
    let a0 = &a0_i + &a0_ii;

    let mut aj_i = Vec::with_capacity(n);
    let mut aj_ii = Vec::with_capacity(n);
    let mut a_j = Vec::with_capacity(n);
    for j in 0..n {
        let w2j = w2[j];
        let mut mi = DMatrix::zeros(d, d);
        mi[(0, 0)] = w2j;
        for i in 0..n {
            mi[(0, i + 1)] = w2[i] * w2j;
            mi[(i + 1, 0)] = w2[i] * w2j;
            for l in 0..n {
                // symmetric evaluation order keeps A^j exactly symmetric
                mi[(i + 1, l + 1)] = (w2[i] * w2[l]) * w2j;
            }
        }
        let mut mii = DMatrix::zeros(d, d);
        for i in 0..n {
            mii[(0, i + 1)] += if i == j { pp } else { 0.0 };
            mii[(i + 1, 0)] += if i == j { pp } else { 0.0 };
            mii[(i + 1, i + 1)] += w2j * pp;
            for l in 0..n {
                // p'(rho) (W2 (x) e_j + e_j (x) W2)
                let mut v = 0.0;
                if l == j {
                    v += pp * w2[i];
                }
                if i == j {
                    v += pp * w2[l];
                }
                mii[(i + 1, l + 1)] += v;
            }
        }
        let m = &mi + &mii;
        aj_i.push(mi);
        aj_ii.push(mii);
        a_j.push(m);
    }

    let mut source = DVector::zeros(d);
    for i in 0..n {
        source[i + 1] = -pp * w2[i] / tau;
    }

    Ok(MatrixFamily {
        a0,
        a_j,
        source,
        a0_i,
        a0_ii,
        aj_i,
        aj_ii,
        rho,
    })
}

/// Whether `A^0(W)` is positive definite at this point (Cholesky succeeds);
/// guaranteed on `|W2|^2 < p'(rho)`.
pub fn a0_is_spd(family: &MatrixFamily) -> bool {
    family.a0.clone().cholesky().is_some()
}

/// The compensating matrix `K(xi)`: zero blocks on the diagonal,
/// `xi^T/(p'(rho_bar)|xi|)` upper right, `-xi/|xi|` lower left.
pub fn compensating_matrix(xi: &[f64], law: PressureLaw, rho_bar: f64) -> Result<DMatrix<f64>> {
    let n = xi.len();
    let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(CoreError::Validation("compensating matrix needs xi != 0".into()));
    }
    let pp_bar = law.p_prime(rho_bar);
    let d = n + 1;
    let mut k = DMatrix::zeros(d, d);
    for i in 0..n {
        k[(0, i + 1)] = xi[i] / (pp_bar * norm);
        k[(i + 1, 0)] = -xi[i] / norm;
    }
    Ok(k)
}

#[derive(Clone, Debug, Serialize)]
pub struct SkReport {
    pub dim: usize,
    pub gamma: f64,
    pub rho_bar: f64,
    pub xi: Vec<f64>,
    /// `max |K A^0(W̄) + (K A^0(W̄))^T|`
    pub skew_residual: f64,
    /// `max |K sum_j xi_j A^j(W̄) - diag(|xi|, -p'(rho_bar) xi (x) xi / |xi|)|`
    pub sk_residual: f64,
}

/// Check the two compensating-matrix identities at the reference state.
pub fn sk_identity_check(xi: &[f64], law: PressureLaw, rho_bar: f64) -> Result<SkReport> {
    let n = xi.len();
    let w_bar1 = law.h_prime(rho_bar);
    let fam = matrices_at(w_bar1, &vec![0.0; n], law, 1.0)?;
    let k = compensating_matrix(xi, law, rho_bar)?;

    let ka0 = &k * &fam.a0;
    let skew = &ka0 + ka0.transpose();
    let skew_residual = skew.iter().fold(0.0_f64, |m, v| m.max(v.abs()));

    let mut sum_aj = DMatrix::zeros(n + 1, n + 1);
    for (j, aj) in fam.a_j.iter().enumerate() {
        sum_aj += aj * xi[j];
    }
    let lhs = &k * sum_aj;
    let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let pp_bar = law.p_prime(rho_bar);
    let mut rhs = DMatrix::zeros(n + 1, n + 1);
    rhs[(0, 0)] = norm;
    for i in 0..n {
        for j in 0..n {
            rhs[(i + 1, j + 1)] = -pp_bar * xi[i] * xi[j] / norm;
        }
    }
    let sk_residual = (&lhs - &rhs).iter().fold(0.0_f64, |m, v| m.max(v.abs()));

    Ok(SkReport {
        dim: n,
        gamma: law.gamma(),
        rho_bar,
        xi: xi.to_vec(),
        skew_residual,
        sk_residual,
    })
}

/// Aggregated residuals of a random-direction sweep for one `(N, gamma)`.
#[derive(Clone, Debug, Serialize)]
pub struct SkSweepRow {
    pub dim: usize,
    pub gamma: f64,
    pub rho_bar: f64,
    pub directions: usize,
    pub max_skew_residual: f64,
    pub max_sk_residual: f64,
}

/// Run the compensating-matrix identity checks over random directions on
/// the unit sphere (plus the coordinate axes) for each `(N, gamma)`.
pub fn sk_direction_sweep(
    dims: &[usize],
    gammas: &[f64],
    rho_bar: f64,
    directions: usize,
    seed: u64,
) -> Result<Vec<SkSweepRow>> {
    use rand::{Rng, SeedableRng};
    let mut rows = Vec::new();
    for &n in dims {
        for &gamma in gammas {
            let law = PressureLaw::new(gamma)?;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut max_skew = 0.0_f64;
            let mut max_sk = 0.0_f64;
            let mut count = 0;
            // coordinate axes first, then random directions
            let mut xis: Vec<Vec<f64>> = (0..n)
                .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            while xis.len() < directions {
                let xi: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                if xi.iter().map(|v| v * v).sum::<f64>().sqrt() > 1e-3 {
                    xis.push(xi);
                }
            }
            for xi in &xis {
                let rep = sk_identity_check(xi, law, rho_bar)?;
                max_skew = max_skew.max(rep.skew_residual);
                max_sk = max_sk.max(rep.sk_residual);
                count += 1;
            }
            rows.push(SkSweepRow {
                dim: n,
                gamma,
                rho_bar,
                directions: count,
                max_skew_residual: max_skew,
                max_sk_residual: max_sk,
            });
        }
    }
    Ok(rows)
}

/// Pointwise entropy, entropy flux and their relative versions.
#[derive(Clone, Debug)]
pub struct EntropyFlux {
    pub eta: ScalarField,
    pub flux: VectorField,
    /// relative entropy `eta~ >= 0`, vanishing exactly at `(rho_bar, 0)`
    pub eta_rel: ScalarField,
    pub flux_rel: VectorField,
}

pub fn entropy_and_flux(
    rho: &ScalarField,
    m: &VectorField,
    law: PressureLaw,
    rho_bar: f64,
) -> Result<EntropyFlux> {
    check_positive(rho, "density")?;
    let grid = rho.grid().clone();
    let n = grid.len();
    let h_bar = law.h(rho_bar);
    let hp_bar = law.h_prime(rho_bar);

    let mut eta = vec![0.0; n];
    let mut eta_rel = vec![0.0; n];
    let mut flux = vec![vec![0.0; n]; m.dim()];
    let mut flux_rel = vec![vec![0.0; n]; m.dim()];
    for i in 0..n {
        let r = rho.values()[i];
        let msq: f64 = m.comps().iter().map(|c| c.values()[i].powi(2)).sum();
        eta[i] = msq / (2.0 * r) + law.h(r);
        eta_rel[i] = eta[i] - h_bar - hp_bar * (r - rho_bar);
        let q_scale = msq / (2.0 * r * r) + r * law.h_prime(r);
        for (j, fj) in flux.iter_mut().enumerate() {
            let mj = m.comp(j).values()[i];
            fj[i] = q_scale * mj / r;
            flux_rel[j][i] = fj[i] - hp_bar * mj;
        }
    }
    let flux = VectorField::new(
        flux.into_iter()
            .map(|v| ScalarField::from_values(grid.clone(), v))
            .collect::<Result<Vec<_>>>()?,
    );
    let flux_rel = VectorField::new(
        flux_rel
            .into_iter()
            .map(|v| ScalarField::from_values(grid.clone(), v))
            .collect::<Result<Vec<_>>>()?,
    );
    Ok(EntropyFlux {
        eta: ScalarField::from_values(grid.clone(), eta)?,
        flux,
        eta_rel: ScalarField::from_values(grid, eta_rel)?,
        flux_rel,
    })
}
