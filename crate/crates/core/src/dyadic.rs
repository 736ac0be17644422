//! FFT-backed Littlewood-Paley decomposition and Besov / Chemin-Lerner
//! norms on the periodic grid.
//!
//! The dyadic annuli live on the angular wavenumber `kappa = 2*pi*k/L`
//! (integer wavenumbers when `L = 2*pi`), so the block weight `2^{qs}` is
//! commensurate with the spectral Sobolev weight `(1+kappa^2)^{s/2}`.
//! Block multipliers are built by the quotient construction
//! `phi_q / sum_q' phi_q'`, which forces the partition of unity on every
//! nonzero lattice frequency regardless of the bump shape.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::field::ScalarField;
use crate::grid::PeriodicGrid;

/// Support of the base bump `phi_0`: the annulus `3/4 <= |kappa| <= 8/3`.
pub const ANNULUS_INNER: f64 = 0.75;
pub const ANNULUS_OUTER: f64 = 8.0 / 3.0;

/// Smooth even bump supported exactly on `[ANNULUS_INNER, ANNULUS_OUTER]`,
/// strictly positive inside: the standard `exp(-1/(1-t^2))` mollifier
/// rescaled onto the annulus.
pub fn phi0(t: f64) -> f64 {
    let t = t.abs();
    if t <= ANNULUS_INNER || t >= ANNULUS_OUTER {
        return 0.0;
    }
    let s = (2.0 * t - (ANNULUS_INNER + ANNULUS_OUTER)) / (ANNULUS_OUTER - ANNULUS_INNER);
    (-1.0 / (1.0 - s * s)).exp()
}

/// Lebesgue exponent for block norms; only the two the estimates use.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Lp {
    Two,
    Inf,
}

impl Lp {
    fn reciprocal(self) -> f64 {
        match self {
            Lp::Two => 0.5,
            Lp::Inf => 0.0,
        }
    }
}

/// Time exponent for Chemin-Lerner norms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TimeExp {
    One,
    Two,
    Inf,
}

impl TimeExp {
    pub fn as_f64(self) -> f64 {
        match self {
            TimeExp::One => 1.0,
            TimeExp::Two => 2.0,
            TimeExp::Inf => f64::INFINITY,
        }
    }
}

/// Sampled multiplier bank realizing the blocks `\dot Delta_q` and
/// `Delta_q` on one grid. Immutable and shareable.
pub struct DyadicPartition {
    grid: Arc<PeriodicGrid>,
    q_min: i32,
    q_max: i32,
    /// phi_hat[q - q_min][idx]
    phi_hat: Vec<Vec<f64>>,
    /// low-frequency multiplier for the inhomogeneous q = -1 block
    psi_hat: Vec<f64>,
}

impl DyadicPartition {
    /// Build the multiplier bank for `grid`.
    ///
    /// `q_max` is the largest block whose annulus meets the resolved
    /// (2/3-rule) frequencies; `q_min` the smallest whose annulus contains
    /// a nonzero lattice point. Construction fails unless at least three
    /// annuli fit entirely inside the resolved band.
    pub fn build(grid: Arc<PeriodicGrid>) -> Result<Self> {
        let kappa_min = grid.kappa_min();
        let kappa_res_max = grid.kappa_keep_max();

        let q_min = support_bounds(kappa_min).0;
        let q_max = support_bounds(kappa_res_max).1;

        // annuli entirely inside the per-axis kept band
        let kappa_keep_axis = 2.0 * std::f64::consts::PI * grid.k_keep() as f64 / grid.period();
        let full_blocks = (q_min..=q_max)
            .filter(|&q| ANNULUS_OUTER * pow2(q) <= kappa_keep_axis)
            .count();
        if full_blocks < 3 {
            return Err(CoreError::Config(format!(
                "grid too coarse: only {full_blocks} dyadic blocks fit inside the resolved band \
                 (need at least 3); increase points per axis"
            )));
        }

        let n = grid.len();
        let nblocks = (q_max - q_min + 1) as usize;
        let mut phi_hat = vec![vec![0.0; n]; nblocks];
        let mut psi_hat = vec![0.0; n];

        for idx in 0..n {
            let kappa = grid.kappa_abs()[idx];
            if kappa == 0.0 {
                psi_hat[idx] = 1.0;
                continue;
            }
            let (lo, hi) = contributing_range(kappa);
            let total: f64 = (lo..=hi).map(|q| phi0(kappa / pow2(q))).sum();
            debug_assert!(total > 0.0, "dyadic cover misses kappa={kappa}");
            let mut high_sum = 0.0;
            for q in lo..=hi {
                let v = phi0(kappa / pow2(q)) / total;
                if q >= 0 {
                    high_sum += v;
                }
                if (q_min..=q_max).contains(&q) {
                    phi_hat[(q - q_min) as usize][idx] = v;
                }
            }
            psi_hat[idx] = 1.0 - high_sum;
        }

        Ok(Self {
            grid,
            q_min,
            q_max,
            phi_hat,
            psi_hat,
        })
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        &self.grid
    }

    pub fn q_min(&self) -> i32 {
        self.q_min
    }

    pub fn q_max(&self) -> i32 {
        self.q_max
    }

    /// Sampled multiplier of the homogeneous block `q`, if stored.
    pub fn phi_multiplier(&self, q: i32) -> Option<&[f64]> {
        if (self.q_min..=self.q_max).contains(&q) {
            Some(&self.phi_hat[(q - self.q_min) as usize])
        } else {
            None
        }
    }

    pub fn psi_multiplier(&self) -> &[f64] {
        &self.psi_hat
    }

    /// Analytic multiplier value of block `q` at radial frequency `kappa`.
    pub fn phi_value(&self, q: i32, kappa: f64) -> f64 {
        if kappa == 0.0 {
            return 0.0;
        }
        let (lo, hi) = contributing_range(kappa);
        let total: f64 = (lo..=hi).map(|p| phi0(kappa / pow2(p))).sum();
        if total == 0.0 {
            0.0
        } else {
            phi0(kappa / pow2(q)) / total
        }
    }

    /// `\dot Delta_q f` (homogeneous = true) or `Delta_q f`.
    pub fn block(&self, f: &ScalarField, q: i32, homogeneous: bool) -> Result<ScalarField> {
        if homogeneous {
            match self.phi_multiplier(q) {
                Some(m) => Ok(f.apply_multiplier(m)),
                None => Err(CoreError::BlockRange {
                    q,
                    q_min: self.q_min,
                    q_max: self.q_max,
                }),
            }
        } else {
            match q {
                q if q <= -2 => Ok(ScalarField::zero(self.grid.clone())),
                -1 => Ok(f.apply_multiplier(&self.psi_hat)),
                q => match self.phi_multiplier(q) {
                    Some(m) => Ok(f.apply_multiplier(m)),
                    // beyond the resolved band the block of any
                    // band-limited field vanishes
                    None => Ok(ScalarField::zero(self.grid.clone())),
                },
            }
        }
    }

    /// `L^p` norm of one block; the `L^2` path is purely spectral.
    pub fn block_lp(&self, f: &ScalarField, q: i32, homogeneous: bool, p: Lp) -> Result<f64> {
        let mult: &[f64] = if homogeneous {
            self.phi_multiplier(q).ok_or(CoreError::BlockRange {
                q,
                q_min: self.q_min,
                q_max: self.q_max,
            })?
        } else if q == -1 {
            &self.psi_hat
        } else if q <= -2 {
            return Ok(0.0);
        } else {
            match self.phi_multiplier(q) {
                Some(m) => m,
                None => return Ok(0.0),
            }
        };
        Ok(match p {
            Lp::Two => f.filtered_l2(mult),
            Lp::Inf => f.apply_multiplier(mult).linf_norm(),
        })
    }

    /// Block indices entering a norm of the given flavor.
    pub fn block_range(&self, homogeneous: bool) -> std::ops::RangeInclusive<i32> {
        if homogeneous {
            self.q_min..=self.q_max
        } else {
            -1..=self.q_max
        }
    }

    /// `sum_{q >= -1} Delta_q f` compared against `f`, relative `L^2`.
    pub fn reconstruction_error(&self, f: &ScalarField) -> f64 {
        let mut acc = ScalarField::zero(self.grid.clone());
        for q in self.block_range(false) {
            acc = acc.add(&self.block(f, q, false).expect("inhomogeneous block"));
        }
        f.rel_l2_err(&acc)
    }
}

fn pow2(q: i32) -> f64 {
    (q as f64).exp2()
}

/// Integer block range that can contribute to radial frequency `kappa`,
/// padded by one on each side so boundary rounding never drops a term.
fn contributing_range(kappa: f64) -> (i32, i32) {
    debug_assert!(kappa > 0.0);
    let lo = (kappa / ANNULUS_OUTER).log2().floor() as i32 - 1;
    let hi = (kappa / ANNULUS_INNER).log2().ceil() as i32 + 1;
    (lo, hi)
}

/// Smallest and largest block whose bump is actually positive at `kappa`.
fn support_bounds(kappa: f64) -> (i32, i32) {
    let (lo, hi) = contributing_range(kappa);
    let active: Vec<i32> = (lo..=hi).filter(|&q| phi0(kappa / pow2(q)) > 0.0).collect();
    debug_assert!(!active.is_empty(), "no dyadic block covers kappa={kappa}");
    (active[0], *active.last().unwrap())
}

/// `l^r` norm of a nonnegative sequence, `r` in `[1, inf]`.
pub fn ell_r(values: &[f64], r: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    if r.is_infinite() {
        values.iter().fold(0.0_f64, |m, &v| m.max(v))
    } else if (r - 1.0).abs() < 1e-14 {
        values.iter().sum()
    } else if (r - 2.0).abs() < 1e-14 {
        values.iter().map(|v| v * v).sum::<f64>().sqrt()
    } else {
        values.iter().map(|v| v.powf(r)).sum::<f64>().powf(1.0 / r)
    }
}

fn validate_r(r: f64) -> Result<()> {
    if r.is_nan() || r < 1.0 {
        return Err(CoreError::Config(format!(
            "summation exponent r must lie in [1, inf], got {r}"
        )));
    }
    Ok(())
}

/// Besov norm with per-block detail.
#[derive(Clone, Debug, Serialize)]
pub struct BesovNorm {
    pub s: f64,
    pub p: Lp,
    pub r: f64,
    pub homogeneous: bool,
    pub value: f64,
    /// `(q, 2^{qs} ||block||_{L^p})`
    pub per_block: Vec<(i32, f64)>,
    /// Homogeneous norms omit the mean mode; its `L^p` size is reported.
    pub omitted_low_freq: Option<f64>,
}

/// `B^s_{p,r}` / `\dot B^s_{p,r}` norm of a field.
pub fn besov_norm(
    part: &DyadicPartition,
    f: &ScalarField,
    s: f64,
    p: Lp,
    r: f64,
    homogeneous: bool,
) -> Result<BesovNorm> {
    validate_r(r)?;
    let mut per_block = Vec::new();
    for q in part.block_range(homogeneous) {
        let norm = part.block_lp(f, q, homogeneous, p)?;
        per_block.push((q, pow2_qs(q, s) * norm));
    }
    let value = ell_r(&per_block.iter().map(|&(_, v)| v).collect::<Vec<_>>(), r);
    let omitted_low_freq = homogeneous.then(|| {
        let m = f.mean().abs();
        match p {
            Lp::Two => m * f.grid().volume().sqrt(),
            Lp::Inf => m,
        }
    });
    Ok(BesovNorm {
        s,
        p,
        r,
        homogeneous,
        value,
        per_block,
        omitted_low_freq,
    })
}

fn pow2_qs(q: i32, s: f64) -> f64 {
    (q as f64 * s).exp2()
}

/// Direct spectral Sobolev norm `(sum (1+|2 pi xi|^2)^s |f^|^2)^{1/2}`
/// (the weight is `(1+kappa^2)^s` in angular wavenumbers).
pub fn sobolev_norm(f: &ScalarField, s: f64) -> f64 {
    let sum: f64 = f
        .coeffs()
        .iter()
        .zip(f.grid().kappa_abs())
        .map(|(c, &k)| (1.0 + k * k).powf(s) * c.norm_sqr())
        .sum();
    (sum * f.grid().volume()).sqrt()
}

/// Time-sampled sequence of fields on one grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    times: Vec<f64>,
    fields: Vec<ScalarField>,
    pub meta: TrajectoryMeta,
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct TrajectoryMeta {
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    pub rho_bar: Option<f64>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, fields: Vec<ScalarField>, meta: TrajectoryMeta) -> Result<Self> {
        if times.is_empty() || times.len() != fields.len() {
            return Err(CoreError::Config(format!(
                "trajectory needs matching nonempty times/fields, got {} / {}",
                times.len(),
                fields.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::Config("trajectory times must strictly increase".into()));
        }
        let g0 = fields[0].grid();
        if fields.iter().any(|f| f.grid().len() != g0.len() || f.grid().dim() != g0.dim()) {
            return Err(CoreError::Config(
                "trajectory snapshots must share one grid".into(),
            ));
        }
        Ok(Self { times, fields, meta })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[ScalarField] {
        &self.fields
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Same snapshots with rescaled time stamps (slow time -> fast time).
    pub fn with_times_scaled(&self, factor: f64) -> Self {
        Self {
            times: self.times.iter().map(|t| t * factor).collect(),
            fields: self.fields.clone(),
            meta: self.meta,
        }
    }
}

/// Trapezoidal quadrature over the trajectory's time stamps.
pub fn trapezoid(times: &[f64], vals: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(vals.windows(2))
        .map(|(t, v)| (t[1] - t[0]) * (v[0] + v[1]) / 2.0)
        .sum()
}

fn time_norm(theta: TimeExp, times: &[f64], vals: &[f64]) -> f64 {
    match theta {
        TimeExp::Inf => vals.iter().fold(0.0_f64, |m, &v| m.max(v)),
        TimeExp::One => trapezoid(times, vals),
        TimeExp::Two => {
            let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
            trapezoid(times, &sq).max(0.0).sqrt()
        }
    }
}

/// Chemin-Lerner norm: the time norm is taken inside each block, then
/// `l^r` over blocks.
pub fn chemin_lerner_norm(
    part: &DyadicPartition,
    traj: &Trajectory,
    theta: TimeExp,
    s: f64,
    p: Lp,
    r: f64,
    homogeneous: bool,
) -> Result<BesovNorm> {
    validate_r(r)?;
    if theta != TimeExp::Inf && traj.len() < 2 {
        return Err(CoreError::Config(
            "time-integrated Chemin-Lerner norm needs at least 2 snapshots".into(),
        ));
    }
    let mut per_block = Vec::new();
    for q in part.block_range(homogeneous) {
        let series: Vec<f64> = traj
            .fields()
            .iter()
            .map(|f| part.block_lp(f, q, homogeneous, p))
            .collect::<Result<_>>()?;
        let tn = time_norm(theta, traj.times(), &series);
        per_block.push((q, pow2_qs(q, s) * tn));
    }
    let value = ell_r(&per_block.iter().map(|&(_, v)| v).collect::<Vec<_>>(), r);
    Ok(BesovNorm {
        s,
        p,
        r,
        homogeneous,
        value,
        per_block,
        omitted_low_freq: None,
    })
}

/// Plain `L^theta_T(L^p)` norm of a trajectory.
pub fn time_lp_norm(traj: &Trajectory, theta: TimeExp, p: Lp) -> Result<f64> {
    if theta != TimeExp::Inf && traj.len() < 2 {
        return Err(CoreError::Config(
            "time-integrated norm needs at least 2 snapshots".into(),
        ));
    }
    let series: Vec<f64> = traj
        .fields()
        .iter()
        .map(|f| match p {
            Lp::Two => f.l2_norm(),
            Lp::Inf => f.linf_norm(),
        })
        .collect();
    Ok(time_norm(theta, traj.times(), &series))
}

/// Plain `L^theta_T(B^s_{p,r})` norm (block sum inside, time norm outside).
pub fn time_besov_norm(
    part: &DyadicPartition,
    traj: &Trajectory,
    theta: TimeExp,
    s: f64,
    p: Lp,
    r: f64,
    homogeneous: bool,
) -> Result<f64> {
    if theta != TimeExp::Inf && traj.len() < 2 {
        return Err(CoreError::Config(
            "time-integrated norm needs at least 2 snapshots".into(),
        ));
    }
    let series: Vec<f64> = traj
        .fields()
        .iter()
        .map(|f| besov_norm(part, f, s, p, r, homogeneous).map(|b| b.value))
        .collect::<Result<_>>()?;
    Ok(time_norm(theta, traj.times(), &series))
}

/// Declared spectral support for Bernstein checks, in cycles frequency
/// `xi = kappa/(2 pi)` so a field at `|xi| = lambda` differentiates to
/// `2 pi lambda` times itself.
#[derive(Clone, Copy, Debug, Serialize)]
pub enum SpectralSupport {
    Ball { lambda: f64 },
    Annulus { lambda: f64, r1: f64, r2: f64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct BernsteinReport {
    pub k: usize,
    pub a: Lp,
    pub b: Lp,
    pub lambda: f64,
    /// `sup_{|alpha|=k} ||d^alpha f||_{L^b} / (lambda^{k+N(1/a-1/b)} ||f||_{L^a})`
    pub ratio: f64,
    /// For annulus support: `sup ||d^alpha f||_{L^a} / (lambda^k ||f||_{L^a})`,
    /// the quantity bracketed two-sided by the lemma.
    pub annulus_ratio: Option<f64>,
    /// Fraction of spectral energy outside the declared support.
    pub leakage: f64,
}

/// Numerical Bernstein-inequality ratios for a field of declared support.
pub fn bernstein_ratio(
    f: &ScalarField,
    k: usize,
    a: Lp,
    b: Lp,
    support: SpectralSupport,
) -> Result<BernsteinReport> {
    if a.reciprocal() < b.reciprocal() {
        return Err(CoreError::Config("Bernstein needs a <= b".into()));
    }
    let grid = f.grid();
    let n_dim = grid.dim();
    let two_pi = 2.0 * std::f64::consts::PI;
    let (lambda, lo, hi) = match support {
        SpectralSupport::Ball { lambda } => (lambda, 0.0, lambda),
        SpectralSupport::Annulus { lambda, r1, r2 } => (lambda, r1 * lambda, r2 * lambda),
    };
    if !(lambda > 0.0) {
        return Err(CoreError::Config("support scale lambda must be positive".into()));
    }
    let mut inside = 0.0;
    let mut outside = 0.0;
    for (c, &kap) in f.coeffs().iter().zip(grid.kappa_abs()) {
        let xi = kap / two_pi;
        let e = c.norm_sqr();
        if xi >= lo - 1e-12 && xi <= hi + 1e-12 {
            inside += e;
        } else {
            outside += e;
        }
    }
    let total = inside + outside;
    if total == 0.0 {
        return Err(CoreError::Validation("zero field in Bernstein check".into()));
    }
    let leakage = outside / total;
    if leakage > 1e-10 {
        return Err(CoreError::Validation(format!(
            "field not supported in the declared region: leakage {leakage:.3e} of energy"
        )));
    }

    let norm_a = lp_norm(f, a);
    let sup_b = sup_derivative_norm(f, k, b);
    let exponent = k as f64 + n_dim as f64 * (a.reciprocal() - b.reciprocal());
    let ratio = sup_b / (lambda.powf(exponent) * norm_a);

    let annulus_ratio = match support {
        SpectralSupport::Annulus { .. } => {
            let sup_a = sup_derivative_norm(f, k, a);
            Some(sup_a / (lambda.powi(k as i32) * norm_a))
        }
        SpectralSupport::Ball { .. } => None,
    };

    Ok(BernsteinReport {
        k,
        a,
        b,
        lambda,
        ratio,
        annulus_ratio,
        leakage,
    })
}

fn lp_norm(f: &ScalarField, p: Lp) -> f64 {
    match p {
        Lp::Two => f.l2_norm(),
        Lp::Inf => f.linf_norm(),
    }
}

/// `sup_{|alpha|=k} ||d^alpha f||_{L^p}`, derivatives spectral.
fn sup_derivative_norm(f: &ScalarField, k: usize, p: Lp) -> f64 {
    if k == 0 {
        return lp_norm(f, p);
    }
    let dim = f.grid().dim();
    let mut best: f64 = 0.0;
    if dim == 1 {
        let mut d = f.clone();
        for _ in 0..k {
            d = d.derivative(0);
        }
        best = lp_norm(&d, p);
    } else {
        for j in 0..=k {
            let mut d = f.clone();
            for _ in 0..(k - j) {
                d = d.derivative(0);
            }
            for _ in 0..j {
                d = d.derivative(1);
            }
            best = best.max(lp_norm(&d, p));
        }
    }
    best
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingReport {
    pub s: f64,
    pub s_tilde: f64,
    pub r: f64,
    pub r_tilde: f64,
    /// `||f||_{B^{s~}_{2,r~}} / ||f||_{B^{s}_{2,r}}`
    pub ratio: f64,
    /// true when the constant-free inequality (same s, larger r) applies
    pub constant_free: bool,
}

/// Embedding `B^s_{2,r} -> B^{s~}_{2,r~}` measured on one field.
pub fn embedding_check(
    part: &DyadicPartition,
    f: &ScalarField,
    s: f64,
    s_tilde: f64,
    r: f64,
    r_tilde: f64,
) -> Result<EmbeddingReport> {
    if s_tilde > s || r > r_tilde {
        return Err(CoreError::Config(
            "embedding check requires s~ <= s and r <= r~".into(),
        ));
    }
    let upper = besov_norm(part, f, s, Lp::Two, r, false)?.value;
    let lower = besov_norm(part, f, s_tilde, Lp::Two, r_tilde, false)?.value;
    let ratio = if upper == 0.0 { 0.0 } else { lower / upper };
    Ok(EmbeddingReport {
        s,
        s_tilde,
        r,
        r_tilde,
        ratio,
        constant_free: (s_tilde - s).abs() < 1e-14,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SpaceEquivalenceReport {
    pub plain_lp: f64,
    pub homogeneous: f64,
    pub inhomogeneous: f64,
    /// fitted constant with `inhom <= c_upper * (plain + hom)`
    pub c_upper: f64,
    /// fitted constant with `plain + hom <= c_lower * inhom`
    pub c_lower: f64,
    pub degenerate: bool,
}

/// Two-sided comparison behind `L^theta_T(L^p) ^ tilde-L^theta_T(homog) =
/// tilde-L^theta_T(inhomog)` (valid for `s > 0`, `theta >= r`).
pub fn space_equivalence_check(
    part: &DyadicPartition,
    traj: &Trajectory,
    theta: TimeExp,
    s: f64,
    p: Lp,
    r: f64,
) -> Result<SpaceEquivalenceReport> {
    if theta.as_f64() < r {
        return Err(CoreError::Config(format!(
            "space equivalence requires theta >= r (theta={}, r={r})",
            theta.as_f64()
        )));
    }
    if s <= 0.0 {
        return Err(CoreError::Config("space equivalence requires s > 0".into()));
    }
    let plain = time_lp_norm(traj, theta, p)?;
    let hom = chemin_lerner_norm(part, traj, theta, s, p, r, true)?.value;
    let inhom = chemin_lerner_norm(part, traj, theta, s, p, r, false)?.value;
    let sum = plain + hom;
    let degenerate = sum == 0.0 || inhom == 0.0;
    let (c_upper, c_lower) = if degenerate {
        (1.0, 1.0)
    } else {
        (inhom / sum, sum / inhom)
    };
    Ok(SpaceEquivalenceReport {
        plain_lp: plain,
        homogeneous: hom,
        inhomogeneous: inhom,
        c_upper,
        c_lower,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{mode_field, RandomFieldSpec};
    use approx::assert_relative_eq;

    const PI: f64 = std::f64::consts::PI;

    fn setup(m: usize) -> (Arc<PeriodicGrid>, DyadicPartition) {
        let g = PeriodicGrid::new(1, m, 2.0 * PI).unwrap();
        let p = DyadicPartition::build(g.clone()).unwrap();
        (g, p)
    }

    #[test]
    fn bump_support_and_positivity() {
        // paper pins supp phi_0 = [3/4, 8/3] with phi_0 > 0 inside
        assert_eq!(phi0(0.5), 0.0);
        assert_eq!(phi0(0.75), 0.0);
        assert_eq!(phi0(8.0 / 3.0), 0.0);
        assert_eq!(phi0(3.0), 0.0);
        assert!(phi0(1.0) > 0.0);
        assert!(phi0(2.0) > 0.0);
        assert_eq!(phi0(-1.0), phi0(1.0));
    }

    #[test]
    fn partition_of_unity_both_flavors() {
        for m in [64usize, 256] {
            let (g, part) = setup(m);
            for idx in 0..g.len() {
                if !g.dealias_mask()[idx] {
                    continue;
                }
                let kappa = g.kappa_abs()[idx];
                let hom_sum: f64 = (part.q_min()..=part.q_max())
                    .map(|q| part.phi_multiplier(q).unwrap()[idx])
                    .sum();
                let inhom_sum: f64 = part.psi_multiplier()[idx]
                    + (0..=part.q_max())
                        .filter_map(|q| part.phi_multiplier(q))
                        .map(|mult| mult[idx])
                        .sum::<f64>();
                if kappa > 0.0 {
                    assert!((hom_sum - 1.0).abs() < 1e-12, "hom sum at kappa={kappa}");
                }
                assert!((inhom_sum - 1.0).abs() < 1e-12, "inhom sum at kappa={kappa}");
            }
        }
    }

    #[test]
    fn dilation_identity_exact() {
        let (_, part) = setup(64);
        for q in [-1, 0, 1, 2] {
            for kappa in [0.9, 1.7, 3.3, 6.5, 13.0] {
                let direct = part.phi_value(q, kappa);
                let dilated = part.phi_value(0, kappa / pow2(q));
                assert_eq!(direct.to_bits(), dilated.to_bits());
            }
        }
    }

    #[test]
    fn too_coarse_grid_is_rejected() {
        let g = PeriodicGrid::new(1, 8, 2.0 * PI).unwrap();
        assert!(matches!(
            DyadicPartition::build(g),
            Err(CoreError::Config(_))
        ));
    }

    #[test]
    fn block_of_pure_mode() {
        // kappa = 12 lies in the interior-only region of block q = 3
        let (g, part) = setup(256);
        let f = mode_field(&g, [12, 0], 1.0, 0.3);
        let b3 = part.block(&f, 3, true).unwrap();
        assert!(f.rel_l2_err(&b3) < 1e-12);
        for q in [1, 5, 6] {
            assert!(part.block(&f, q, true).unwrap().l2_norm() < 1e-14);
        }
        // homogeneous block out of range errors
        assert!(matches!(
            part.block(&f, 99, true),
            Err(CoreError::BlockRange { .. })
        ));
    }

    #[test]
    fn constant_blocks() {
        let (g, part) = setup(64);
        let c = ScalarField::constant(g, 2.5);
        for q in part.block_range(true) {
            assert_eq!(part.block(&c, q, true).unwrap().l2_norm(), 0.0);
        }
        let psi_block = part.block(&c, -1, false).unwrap();
        assert!(psi_block.rel_l2_err(&c) < 1e-14);
        assert_eq!(part.block(&c, -5, false).unwrap().l2_norm(), 0.0);
    }

    #[test]
    fn almost_orthogonality_on_multiplier_supports() {
        let (g, part) = setup(256);
        for p in part.q_min()..=part.q_max() {
            for q in part.q_min()..=part.q_max() {
                if (p - q).abs() < 2 {
                    continue;
                }
                let mp = part.phi_multiplier(p).unwrap();
                let mq = part.phi_multiplier(q).unwrap();
                for i in 0..g.len() {
                    assert_eq!(mp[i] * mq[i], 0.0);
                }
            }
        }
    }

    #[test]
    fn besov_norm_pure_mode() {
        // single active block q0 = 1 via kappa = 3; L^2-normalized mode
        let (g, part) = setup(256);
        let f = mode_field(&g, [3, 0], 1.0, 0.0);
        let f = f.scale(1.0 / f.l2_norm());
        let b = besov_norm(&part, &f, 1.5, Lp::Two, 1.0, true).unwrap();
        assert_relative_eq!(b.value, 2.0_f64.powf(1.5), max_relative = 1e-12);
        let active: Vec<_> = b
            .per_block
            .iter()
            .filter(|&&(_, v)| v > 1e-10 * b.value)
            .collect();
        assert_eq!(active.len(), 1);
        assert_eq!(active[0].0, 1);
    }

    #[test]
    fn besov_norm_two_blocks_l1_vs_linf() {
        // kappa = 3 -> block 1, kappa = 12 -> block 3, equal block norms
        let (g, part) = setup(256);
        let f = mode_field(&g, [3, 0], 1.0, 0.0).add(&mode_field(&g, [12, 0], 1.0, 0.5));
        let b_norm = mode_field(&g, [3, 0], 1.0, 0.0).l2_norm();
        let l1 = besov_norm(&part, &f, 0.0, Lp::Two, 1.0, true).unwrap().value;
        let linf = besov_norm(&part, &f, 0.0, Lp::Two, f64::INFINITY, true)
            .unwrap()
            .value;
        assert_relative_eq!(l1, 2.0 * b_norm, max_relative = 1e-12);
        assert_relative_eq!(linf, b_norm, max_relative = 1e-12);
    }

    #[test]
    fn besov_norm_constant_homogeneous_is_zero() {
        let (g, part) = setup(64);
        let c = ScalarField::constant(g.clone(), 3.0);
        let b = besov_norm(&part, &c, 1.0, Lp::Two, 1.0, true).unwrap();
        assert_eq!(b.value, 0.0);
        // the omitted mean is reported
        let om = b.omitted_low_freq.unwrap();
        assert_relative_eq!(om, 3.0 * g.volume().sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn reconstruction_of_band_limited_field() {
        let (g, part) = setup(256);
        let spec = RandomFieldSpec {
            seed: 3,
            k_min: 0.0,
            k_max: 40.0,
            decay: 1.0,
            amplitude: 1.0,
        };
        let f = spec.realize(&g).unwrap().add(&ScalarField::constant(g, 0.7));
        assert!(part.reconstruction_error(&f) < 1e-10);
    }

    #[test]
    fn scaling_homogeneity_shifts_blocks() {
        let (g, part) = setup(256);
        let f = mode_field(&g, [3, 0], 1.0, 0.2).add(&mode_field(&g, [6, 0], 0.5, 0.9));
        let f2 = ScalarField::from_fn(g.clone(), |x, _| {
            (2.0 * 3.0 * x + 0.2).sin() + 0.5 * (2.0 * 6.0 * x + 0.9).sin()
        });
        let b = besov_norm(&part, &f, 0.0, Lp::Two, 1.0, true).unwrap();
        let b2 = besov_norm(&part, &f2, 0.0, Lp::Two, 1.0, true).unwrap();
        for &(q, v) in &b.per_block {
            if v < 1e-13 {
                continue;
            }
            let shifted = b2.per_block.iter().find(|&&(p, _)| p == q + 1).unwrap().1;
            assert_relative_eq!(v, shifted, max_relative = 1e-12);
        }
    }

    #[test]
    fn chemin_lerner_time_constant_equals_snapshot() {
        let (g, part) = setup(64);
        let f = mode_field(&g, [3, 0], 1.0, 0.0);
        let traj = Trajectory::new(
            vec![0.0, 0.5, 1.0],
            vec![f.clone(), f.clone(), f.clone()],
            TrajectoryMeta::default(),
        )
        .unwrap();
        let cl = chemin_lerner_norm(&part, &traj, TimeExp::Inf, 1.2, Lp::Two, 1.0, true).unwrap();
        let b = besov_norm(&part, &f, 1.2, Lp::Two, 1.0, true).unwrap();
        assert_relative_eq!(cl.value, b.value, max_relative = 1e-12);
    }

    #[test]
    fn chemin_lerner_separable_matches_trapezoid() {
        let (g, part) = setup(64);
        let f = mode_field(&g, [3, 0], 1.0, 0.0);
        let times: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let amps: Vec<f64> = times.iter().map(|t| 0.3 + t * t).collect();
        let fields: Vec<ScalarField> = amps.iter().map(|&a| f.scale(a)).collect();
        let traj = Trajectory::new(times.clone(), fields, TrajectoryMeta::default()).unwrap();
        let s = 0.8;
        let cl = chemin_lerner_norm(&part, &traj, TimeExp::Two, s, Lp::Two, 1.0, true).unwrap();
        // oracle: separable evaluation, same trapezoid rule
        let a_sq: Vec<f64> = amps.iter().map(|a| a * a).collect();
        let expect = 2.0_f64.powf(s) * f.l2_norm() * trapezoid(&times, &a_sq).sqrt();
        assert_relative_eq!(cl.value, expect, max_relative = 1e-12);
    }

    #[test]
    fn chemin_lerner_single_snapshot_rules() {
        let (g, part) = setup(64);
        let f = mode_field(&g, [3, 0], 1.0, 0.0);
        let traj = Trajectory::new(vec![0.0], vec![f], TrajectoryMeta::default()).unwrap();
        assert!(chemin_lerner_norm(&part, &traj, TimeExp::Inf, 1.0, Lp::Two, 1.0, true).is_ok());
        assert!(chemin_lerner_norm(&part, &traj, TimeExp::Two, 1.0, Lp::Two, 1.0, true).is_err());
    }

    #[test]
    fn minkowski_ordering_tilde_vs_plain() {
        // r = 1 <= theta = 2: tilde norm dominates the plain norm
        let (g, part) = setup(64);
        let spec = RandomFieldSpec {
            seed: 11,
            k_min: 1.0,
            k_max: 15.0,
            decay: 1.2,
            amplitude: 1.0,
        };
        let base = spec.realize(&g).unwrap();
        let times: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        let fields: Vec<ScalarField> = times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let other = RandomFieldSpec {
                    seed: 100 + i as u64,
                    ..spec
                }
                .realize(&g)
                .unwrap();
                base.scale((1.0 - t).max(0.2)).add(&other.scale(0.3 * t))
            })
            .collect();
        let traj = Trajectory::new(times, fields, TrajectoryMeta::default()).unwrap();
        let tilde = chemin_lerner_norm(&part, &traj, TimeExp::Two, 1.0, Lp::Two, 1.0, false)
            .unwrap()
            .value;
        let plain = time_besov_norm(&part, &traj, TimeExp::Two, 1.0, Lp::Two, 1.0, false).unwrap();
        assert!(tilde >= plain - 1e-12 * plain.max(1.0));
    }

    #[test]
    fn bernstein_single_mode_gives_two_pi() {
        let (g, _) = setup(256);
        // mode k=8: cycles frequency xi = 8/(2 pi), annulus-supported
        let f = mode_field(&g, [8, 0], 1.0, 0.1);
        let lambda = 8.0 / (2.0 * PI);
        let rep = bernstein_ratio(
            &f,
            1,
            Lp::Two,
            Lp::Two,
            SpectralSupport::Annulus {
                lambda,
                r1: 0.9,
                r2: 1.1,
            },
        )
        .unwrap();
        assert_relative_eq!(rep.ratio, 2.0 * PI, max_relative = 1e-12);
        assert_relative_eq!(rep.annulus_ratio.unwrap(), 2.0 * PI, max_relative = 1e-12);
    }

    #[test]
    fn bernstein_zeroth_order_is_one() {
        let (g, _) = setup(64);
        let f = mode_field(&g, [5, 0], 2.0, 0.0);
        let rep = bernstein_ratio(
            &f,
            0,
            Lp::Two,
            Lp::Two,
            SpectralSupport::Ball {
                lambda: 6.0 / (2.0 * PI),
            },
        )
        .unwrap();
        assert_eq!(rep.ratio, 1.0);
    }

    #[test]
    fn bernstein_rejects_leaky_support() {
        let (g, _) = setup(64);
        let f = mode_field(&g, [5, 0], 1.0, 0.0).add(&mode_field(&g, [15, 0], 0.5, 0.0));
        let res = bernstein_ratio(
            &f,
            1,
            Lp::Two,
            Lp::Two,
            SpectralSupport::Ball {
                lambda: 6.0 / (2.0 * PI),
            },
        );
        assert!(matches!(res, Err(CoreError::Validation(_))));
    }

    #[test]
    fn embedding_examples() {
        let (g, part) = setup(256);
        // same s, r=1 -> r~=2: constant-free inequality
        let spec = RandomFieldSpec {
            seed: 5,
            k_min: 1.0,
            k_max: 30.0,
            decay: 0.8,
            amplitude: 1.0,
        };
        let f = spec.realize(&g).unwrap();
        let rep = embedding_check(&part, &f, 1.0, 1.0, 1.0, 2.0).unwrap();
        assert!(rep.constant_free);
        assert!(rep.ratio <= 1.0 + 1e-12);

        // pure mode in block 3: ratio 2^{-3} for s=2 -> s~=1
        let f3 = mode_field(&g, [12, 0], 1.0, 0.0);
        let rep3 = embedding_check(&part, &f3, 2.0, 1.0, 1.0, 1.0).unwrap();
        assert_relative_eq!(rep3.ratio, 0.125, max_relative = 1e-12);
    }

    #[test]
    fn embedding_block_zero_ratio_one() {
        // a lattice mode inside the only-q region of block 0 needs a
        // non-2pi period: L = 2 pi / 1.4 puts kappa = 1.4 in block 0
        let g = PeriodicGrid::new(1, 64, 2.0 * PI / 1.4).unwrap();
        let part = DyadicPartition::build(g.clone()).unwrap();
        let f = mode_field(&g, [1, 0], 1.0, 0.0);
        let b = besov_norm(&part, &f, 0.0, Lp::Two, 1.0, true).unwrap();
        let active: Vec<_> = b.per_block.iter().filter(|&&(_, v)| v > 1e-13).collect();
        assert_eq!(active.len(), 1, "blocks: {:?}", b.per_block);
        assert_eq!(active[0].0, 0);
        let rep = embedding_check(&part, &f, 2.3, 0.7, 1.0, 1.0).unwrap();
        assert_relative_eq!(rep.ratio, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn space_equivalence_single_mode_and_zero() {
        let (g, part) = setup(64);
        let f = mode_field(&g, [3, 0], 1.0, 0.0);
        let times = vec![0.0, 0.5, 1.0];
        let traj = Trajectory::new(
            times.clone(),
            vec![f.clone(), f.clone(), f.clone()],
            TrajectoryMeta::default(),
        )
        .unwrap();
        let rep = space_equivalence_check(&part, &traj, TimeExp::Two, 1.0, Lp::Two, 1.0).unwrap();
        assert_relative_eq!(rep.homogeneous, rep.inhomogeneous, max_relative = 1e-12);

        let z = ScalarField::zero(g);
        let ztraj = Trajectory::new(
            times,
            vec![z.clone(), z.clone(), z],
            TrajectoryMeta::default(),
        )
        .unwrap();
        let zrep = space_equivalence_check(&part, &ztraj, TimeExp::Two, 1.0, Lp::Two, 1.0).unwrap();
        assert!(zrep.degenerate);
        assert_eq!(zrep.plain_lp, 0.0);
        assert_eq!(zrep.homogeneous, 0.0);
        assert_eq!(zrep.inhomogeneous, 0.0);
    }

    #[test]
    fn space_equivalence_requires_theta_ge_r() {
        let (g, part) = setup(64);
        let f = mode_field(&g, [3, 0], 1.0, 0.0);
        let traj = Trajectory::new(
            vec![0.0, 1.0],
            vec![f.clone(), f],
            TrajectoryMeta::default(),
        )
        .unwrap();
        assert!(space_equivalence_check(&part, &traj, TimeExp::One, 1.0, Lp::Two, 2.0).is_err());
    }
}
