//! Paraproduct / remainder operators and numerical verification of the
//! commutator estimates, block by block.
//!
//! On the torus the homogeneous low-pass `S_{q-1}` is completed by the
//! mean mode, and the remainder absorbs the mean-mean product, so the
//! Bony identity `fg = T_f g + T_g f + R(f,g)` is exact (up to roundoff)
//! for fields band-limited to the dealiased band.

use serde::Serialize;

use crate::dyadic::{besov_norm, ell_r, DyadicPartition, Lp};
use crate::error::{CoreError, Result};
use crate::field::{RandomFieldSpec, ScalarField};

/// Multiplier of `S_{q-1} = mean + sum_{q' <= q-2} \dot Delta_{q'}`.
fn low_pass_multiplier(part: &DyadicPartition, q: i32) -> Vec<f64> {
    let n = part.grid().len();
    let mut mult = vec![0.0; n];
    mult[0] = 1.0; // mean completion
    for q_prime in part.q_min()..=(q - 2).min(part.q_max()) {
        if let Some(phi) = part.phi_multiplier(q_prime) {
            for (m, &v) in mult.iter_mut().zip(phi) {
                *m += v;
            }
        }
    }
    mult
}

/// Paraproduct `T_f g = sum_q S_{q-1} f . \dot Delta_q g`, dealiased.
pub fn paraproduct(part: &DyadicPartition, f: &ScalarField, g: &ScalarField) -> ScalarField {
    let mut acc = ScalarField::zero(part.grid().clone());
    for q in part.q_min()..=part.q_max() {
        let low_f = f.apply_multiplier(&low_pass_multiplier(part, q));
        let block_g = part.block(g, q, true).expect("in-range block");
        acc = acc.add(&low_f.mul_dealiased(&block_g));
    }
    acc
}

/// Remainder `R(f,g) = sum_{|q-q'|<=1} \dot Delta_q f . \dot Delta_{q'} g`
/// plus the mean-mean product (low-frequency completion on the torus).
pub fn remainder(part: &DyadicPartition, f: &ScalarField, g: &ScalarField) -> ScalarField {
    let grid = part.grid().clone();
    let mut acc = ScalarField::constant(grid, f.mean() * g.mean());
    for q in part.q_min()..=part.q_max() {
        let fq = part.block(f, q, true).expect("in-range block");
        for q_prime in (q - 1).max(part.q_min())..=(q + 1).min(part.q_max()) {
            let gq = part.block(g, q_prime, true).expect("in-range block");
            acc = acc.add(&fq.mul_dealiased(&gq));
        }
    }
    acc
}

/// The full Bony split with its identity residual.
#[derive(Debug)]
pub struct BonySplit {
    pub t_fg: ScalarField,
    pub t_gf: ScalarField,
    pub r_fg: ScalarField,
    /// relative L^2 residual of `fg - T_f g - T_g f - R(f,g)`
    pub residual: f64,
}

pub fn bony_split(part: &DyadicPartition, f: &ScalarField, g: &ScalarField) -> BonySplit {
    let t_fg = paraproduct(part, f, g);
    let t_gf = paraproduct(part, g, f);
    let r_fg = remainder(part, f, g);
    let product = f.mul_dealiased(g);
    let sum = t_fg.add(&t_gf).add(&r_fg);
    let residual = product.rel_l2_err(&sum);
    BonySplit {
        t_fg,
        t_gf,
        r_fg,
        residual,
    }
}

/// `[f, Delta_q] g = f . Delta_q g - Delta_q (f g)`, dealiased products.
pub fn commutator(
    part: &DyadicPartition,
    f: &ScalarField,
    g: &ScalarField,
    q: i32,
    homogeneous: bool,
) -> Result<ScalarField> {
    let block_g = part.block(g, q, homogeneous)?;
    let first = f.mul_dealiased(&block_g);
    let product = f.mul_dealiased(g);
    let second = part.block(&product, q, homogeneous)?;
    Ok(first.sub(&second))
}

/// The five commutator terms of the decomposition
/// `[f, \dot Delta_q] g = K1 + K2 + K3 + K4 + K5`.
#[derive(Debug)]
pub struct TermDecomposition {
    pub terms: [ScalarField; 5],
    pub commutator: ScalarField,
    /// relative L^2 residual of `sum K_i - [f, \dot Delta_q] g`
    pub residual: f64,
}

pub fn term_decomposition(
    part: &DyadicPartition,
    f: &ScalarField,
    g: &ScalarField,
    q: i32,
) -> Result<TermDecomposition> {
    let block_g = part.block(g, q, true)?;

    // K1 = T_f(\dot Delta_q g) - \dot Delta_q(T_f g)
    let k1 = paraproduct(part, f, &block_g).sub(&part.block(&paraproduct(part, f, g), q, true)?);
    // K2 = R(f, \dot Delta_q g)
    let k2 = remainder(part, f, &block_g);
    // K3 = -\dot Delta_q R(f, g)
    let k3 = part.block(&remainder(part, f, g), q, true)?.scale(-1.0);
    // K4 = T_{\dot Delta_q g} f
    let k4 = paraproduct(part, &block_g, f);
    // K5 = -\dot Delta_q T_g f
    let k5 = part.block(&paraproduct(part, g, f), q, true)?.scale(-1.0);

    let comm = commutator(part, f, g, q, true)?;
    let sum = k1.add(&k2).add(&k3).add(&k4).add(&k5);
    let diff = comm.sub(&sum).l2_norm();
    let base = comm.l2_norm().max(f.l2_norm() * g.l2_norm()).max(1e-300);
    Ok(TermDecomposition {
        terms: [k1, k2, k3, k4, k5],
        commutator: comm,
        residual: diff / base,
    })
}

/// Per-block record of the commutator estimate with `C` and `c_q` set to 1.
#[derive(Clone, Debug, Serialize)]
pub struct CommutatorReport {
    pub q: i32,
    pub comm_norm: f64,
    /// `2^{-q(s+1)} (||grad f||_inf ||g||_{B^s} + ||g||_inf ||f||_{B^{s+1}})`
    pub bound_rhs: f64,
    /// `comm_norm / bound_rhs`; this is the extracted raw `c_q`
    pub ratio: f64,
    pub term_norms: Option<[f64; 5]>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairReport {
    pub pair: usize,
    pub reports: Vec<CommutatorReport>,
    /// `l^r` norm of the extracted `c_q` sequence
    pub cq_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CommutatorSuite {
    pub s: f64,
    pub r: f64,
    pub homogeneous: bool,
    pub pairs: Vec<PairReport>,
    /// sup over the family of the per-pair `l^r` norms
    pub sup_cq_norm: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct SuiteConfig {
    pub s: f64,
    pub r: f64,
    pub family_size: usize,
    pub seed: u64,
    pub homogeneous: bool,
    /// spectral band of the random pairs (integer wavenumbers)
    pub k_band: f64,
    pub decay: f64,
    /// also compute the K1..K5 norms per block
    pub with_terms: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            s: 1.5,
            r: 1.0,
            family_size: 30,
            seed: 2024,
            homogeneous: true,
            k_band: 40.0,
            decay: 1.8,
            with_terms: false,
        }
    }
}

/// Random-pair sweep of the estimate
/// `||[f, \dot Delta_q] g||_{L^2} <= C c_q 2^{-q(s+1)}
///  (||grad f||_inf ||g||_{\dot B^s_{2,r}} + ||g||_inf ||f||_{\dot B^{s+1}_{2,r}})`
/// with the Hoelder split `(p1, p2) = (inf, 2)`.
pub fn commutator_estimate_suite(
    part: &DyadicPartition,
    cfg: &SuiteConfig,
) -> Result<CommutatorSuite> {
    if cfg.s <= -1.0 {
        return Err(CoreError::Config(format!(
            "commutator estimate requires s > -1, got s={}",
            cfg.s
        )));
    }
    if cfg.k_band > part.grid().k_keep() as f64 {
        return Err(CoreError::Config(
            "suite band exceeds the resolved band of the grid".into(),
        ));
    }
    let mut pairs = Vec::with_capacity(cfg.family_size);
    for i in 0..cfg.family_size {
        let f = RandomFieldSpec {
            seed: cfg.seed.wrapping_add(2 * i as u64),
            k_min: 1.0,
            k_max: cfg.k_band,
            decay: cfg.decay,
            amplitude: 1.0,
        }
        .realize(part.grid())?;
        let g = RandomFieldSpec {
            seed: cfg.seed.wrapping_add(2 * i as u64 + 1),
            k_min: 1.0,
            k_max: cfg.k_band,
            decay: cfg.decay,
            amplitude: 1.0,
        }
        .realize(part.grid())?;
        pairs.push(pair_report(part, cfg, i, &f, &g)?);
    }
    let sup_cq_norm = pairs.iter().fold(0.0_f64, |m, p| m.max(p.cq_norm));
    Ok(CommutatorSuite {
        s: cfg.s,
        r: cfg.r,
        homogeneous: cfg.homogeneous,
        pairs,
        sup_cq_norm,
    })
}

fn pair_report(
    part: &DyadicPartition,
    cfg: &SuiteConfig,
    pair: usize,
    f: &ScalarField,
    g: &ScalarField,
) -> Result<PairReport> {
    let grad_f_inf = f.gradient().linf_norm();
    let g_inf = g.linf_norm();
    let g_bs = besov_norm(part, g, cfg.s, Lp::Two, cfg.r, cfg.homogeneous)?.value;
    let f_bs1 = besov_norm(part, f, cfg.s + 1.0, Lp::Two, cfg.r, cfg.homogeneous)?.value;
    let denom = grad_f_inf * g_bs + g_inf * f_bs1;

    let mut reports = Vec::new();
    for q in part.block_range(cfg.homogeneous) {
        let comm_norm = commutator(part, f, g, q, cfg.homogeneous)?.l2_norm();
        let weight = ((cfg.s + 1.0) * -(q as f64)).exp2();
        let bound_rhs = weight * denom;
        let ratio = if bound_rhs == 0.0 { 0.0 } else { comm_norm / bound_rhs };
        let term_norms = if cfg.with_terms && cfg.homogeneous {
            let dec = term_decomposition(part, f, g, q)?;
            Some([
                dec.terms[0].l2_norm(),
                dec.terms[1].l2_norm(),
                dec.terms[2].l2_norm(),
                dec.terms[3].l2_norm(),
                dec.terms[4].l2_norm(),
            ])
        } else {
            None
        };
        reports.push(CommutatorReport {
            q,
            comm_norm,
            bound_rhs,
            ratio,
            term_norms,
        });
    }
    let ratios: Vec<f64> = reports.iter().map(|r| r.ratio).collect();
    let cq_norm = ell_r(&ratios, cfg.r);
    Ok(PairReport {
        pair,
        reports,
        cq_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::mode_field;
    use crate::grid::PeriodicGrid;
    use std::sync::Arc;

    const PI: f64 = std::f64::consts::PI;

    fn setup(m: usize) -> (Arc<PeriodicGrid>, DyadicPartition) {
        let g = PeriodicGrid::new(1, m, 2.0 * PI).unwrap();
        let p = DyadicPartition::build(g.clone()).unwrap();
        (g, p)
    }

    fn random_pair(g: &Arc<PeriodicGrid>, seed: u64) -> (ScalarField, ScalarField) {
        let mk = |s| {
            RandomFieldSpec {
                seed: s,
                k_min: 0.0,
                k_max: 30.0,
                decay: 1.5,
                amplitude: 1.0,
            }
            .realize(g)
            .unwrap()
        };
        (mk(seed), mk(seed + 1))
    }

    #[test]
    fn paraproduct_constant_left() {
        let (g, part) = setup(128);
        let (_, f) = random_pair(&g, 9);
        let c = ScalarField::constant(g.clone(), 2.0);
        let t = paraproduct(&part, &c, &f);
        // T_c f = c (f - mean f)
        let expect = f.sub(&ScalarField::constant(g, f.mean())).scale(2.0);
        assert!(t.rel_l2_err(&expect) < 1e-12);
        // and T_f c = 0
        let (h, _) = random_pair(&part.grid().clone(), 17);
        let t2 = paraproduct(&part, &h, &ScalarField::constant(part.grid().clone(), 3.0));
        assert!(t2.l2_norm() < 1e-12);
    }

    #[test]
    fn bony_identity_random_pairs() {
        let (g, part) = setup(128);
        for seed in [1u64, 33, 65] {
            let (f, gg) = random_pair(&g, seed);
            let split = bony_split(&part, &f, &gg);
            assert!(split.residual < 1e-10, "residual {}", split.residual);
        }
    }

    #[test]
    fn remainder_of_separated_modes_vanishes() {
        let (g, part) = setup(256);
        // blocks 1 and 6: no interacting remainder pair
        let f = mode_field(&g, [3, 0], 1.0, 0.0);
        let h = mode_field(&g, [80, 0], 1.0, 0.4);
        let r = remainder(&part, &f, &h);
        assert!(r.l2_norm() < 1e-12);
    }

    #[test]
    fn remainder_identity_for_equal_modes() {
        let (g, part) = setup(128);
        let f = mode_field(&g, [5, 0], 1.0, 0.2);
        // R(f,f) = f^2 - 2 T_f f up to the identity residual
        let r = remainder(&part, &f, &f);
        let expect = f
            .mul_dealiased(&f)
            .sub(&paraproduct(&part, &f, &f).scale(2.0));
        assert!(r.rel_l2_err(&expect) < 1e-10);
    }

    #[test]
    fn commutator_with_constants() {
        let (g, part) = setup(128);
        let (f, _) = random_pair(&g, 5);
        let c = ScalarField::constant(g, 1.7);
        for q in [0, 2] {
            // multipliers commute with constants
            let comm_cf = commutator(&part, &c, &f, q, true).unwrap();
            assert!(comm_cf.l2_norm() < 1e-12);
            // constant g: [f, block] c = -c block(f); the estimate's second
            // term covers it since ||c||_inf ||f||_{B^{s+1}} > 0
            let comm_fc = commutator(&part, &f, &c, q, true).unwrap();
            let expect = part.block(&f, q, true).unwrap().scale(-1.7);
            assert!(comm_fc.sub(&expect).l2_norm() < 1e-12);
        }
    }

    #[test]
    fn commutator_support_of_mode_pair() {
        let (g, part) = setup(256);
        // slow mode in blocks 1/2, fast mode only in block 5; the product
        // frequencies 41 and 49 straddle the block-5 boundary
        let f = mode_field(&g, [4, 0], 1.0, 0.0);
        let h = mode_field(&g, [45, 0], 1.0, 0.3);
        let comm = commutator(&part, &f, &h, 5, true).unwrap();
        assert!(comm.l2_norm() > 1e-6);
        // energy concentrated in blocks 4..6
        let mut outside = 0.0;
        for q in part.block_range(true) {
            if !(4..=6).contains(&q) {
                outside += part.block_lp(&comm, q, true, Lp::Two).unwrap().powi(2);
            }
        }
        assert!(outside.sqrt() < 1e-10 * comm.l2_norm());
    }

    #[test]
    fn decomposition_sums_to_commutator() {
        let (g, part) = setup(128);
        let (f, gg) = random_pair(&g, 21);
        for q in [0, 2, 4] {
            let dec = term_decomposition(&part, &f, &gg, q).unwrap();
            assert!(dec.residual < 1e-10, "q={q}: residual {}", dec.residual);
            // triangle inequality on the exact decomposition
            let sum_norms: f64 = dec.terms.iter().map(|t| t.l2_norm()).sum();
            assert!(dec.commutator.l2_norm() <= sum_norms + 1e-10);
        }
    }

    #[test]
    fn low_frequency_f_leaves_only_k1() {
        let (g, part) = setup(256);
        let q = 5;
        // f lives in blocks <= 0, far below q
        let f = mode_field(&g, [1, 0], 1.0, 0.0).add(&mode_field(&g, [2, 0], 0.5, 0.7));
        let gg = RandomFieldSpec {
            seed: 3,
            k_min: 20.0,
            k_max: 80.0,
            decay: 1.0,
            amplitude: 1.0,
        }
        .realize(&g)
        .unwrap();
        let dec = term_decomposition(&part, &f, &gg, q).unwrap();
        let comm_norm = dec.commutator.l2_norm();
        for (i, t) in dec.terms.iter().enumerate().skip(1) {
            assert!(
                t.l2_norm() < 1e-10 * comm_norm.max(1.0),
                "K{} = {:.3e} not negligible",
                i + 1,
                t.l2_norm()
            );
        }
        assert!(dec.terms[0].rel_l2_err(&dec.commutator) < 1e-9);
    }

    #[test]
    fn commutator_of_lowpass_g_at_high_q_vanishes() {
        let (g, part) = setup(256);
        let f = mode_field(&g, [2, 0], 1.0, 0.0);
        let gg = mode_field(&g, [3, 0], 1.0, 0.1);
        let comm = commutator(&part, &f, &gg, 6, true).unwrap();
        assert!(comm.l2_norm() < 1e-12);
    }

    #[test]
    fn suite_runs_and_constant_f_gives_zero_ratios() {
        let (_, part) = setup(128);
        let cfg = SuiteConfig {
            family_size: 2,
            k_band: 30.0,
            ..Default::default()
        };
        let suite = commutator_estimate_suite(&part, &cfg).unwrap();
        assert!(suite.sup_cq_norm.is_finite());
        assert!(suite.sup_cq_norm > 0.0);

        // degenerate pair: constant f
        let g = part.grid().clone();
        let c = ScalarField::constant(g.clone(), 4.0);
        let (_, gg) = random_pair(&g, 77);
        let rep = pair_report(&part, &cfg, 0, &c, &gg).unwrap();
        for r in rep.reports {
            assert!(r.comm_norm < 1e-12);
        }
    }

    #[test]
    fn suite_rejects_s_below_minus_one() {
        let (_, part) = setup(128);
        let cfg = SuiteConfig {
            s: -1.5,
            ..Default::default()
        };
        assert!(commutator_estimate_suite(&part, &cfg).is_err());
    }

    #[test]
    fn k3_tail_stays_bounded_after_weighting() {
        // per-term check behind the s+1 > 0 requirement: the weighted
        // sequence 2^{q(s+1)} ||K3|| does not blow up in q
        let (g, part) = setup(256);
        let (f, gg) = random_pair(&g, 41);
        let s = 1.5;
        let mut weighted = Vec::new();
        for q in 1..=part.q_max() {
            let dec = term_decomposition(&part, &f, &gg, q).unwrap();
            let k3 = dec.terms[2].l2_norm();
            weighted.push(k3 * ((s + 1.0) * q as f64).exp2());
        }
        let head = weighted[0].max(weighted[1]);
        for (i, w) in weighted.iter().enumerate() {
            assert!(
                *w <= 50.0 * head,
                "q={} weighted K3 {w:.3e} vs head {head:.3e}",
                i + 1
            );
        }
    }

    #[test]
    fn inhomogeneous_commutator_includes_psi_block() {
        let (g, part) = setup(128);
        let (f, gg) = random_pair(&g, 55);
        let comm = commutator(&part, &f, &gg, -1, false).unwrap();
        assert!(comm.l2_norm().is_finite());
        // q <= -2 blocks are zero, so the commutator vanishes there
        let comm2 = commutator(&part, &f, &gg, -3, false).unwrap();
        assert!(comm2.l2_norm() < 1e-14);
    }
}
