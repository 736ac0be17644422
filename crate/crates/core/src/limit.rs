//! Tau-sweep harness: runs the damped Euler solver across a relaxation
//! ladder, compares the densities against the porous-medium solution at
//! identical slow times, fits the empirical convergence order, and audits
//! the tau-uniform energy inequality.

use rayon::prelude::*;
use serde::Serialize;

use crate::dyadic::{
    besov_norm, chemin_lerner_norm, DyadicPartition, Lp, TimeExp, Trajectory,
};
use crate::error::{CoreError, Result};
use crate::euler::{
    energy_functionals, initial_data_norm, initialize, solve, EnergyFunctionals, EulerRun,
    InitialData, SolverConfig,
};
use crate::field::ScalarField;
use crate::grid::PeriodicGrid;
use crate::pme::{pme_besov_bound, solve_pme, PmeConfig, PmeRun};
use crate::report::{fit_loglog, LinearFit};
use crate::symmetry::PressureLaw;

use std::sync::Arc;

/// Reference solution the sweep converges against.
#[derive(Clone, Debug, Serialize)]
pub enum ReferenceChoice {
    /// porous-medium solve with the shared initial density
    Pme { dt: f64 },
    /// an extra Euler member at a smaller relaxation time
    FinestEuler { tau: f64 },
}

#[derive(Clone)]
pub struct TauSweepConfig {
    pub grid: Arc<PeriodicGrid>,
    pub law: PressureLaw,
    pub rho_bar: f64,
    /// strictly decreasing relaxation times in (0, 1]
    pub tau_list: Vec<f64>,
    pub data: InitialData,
    pub sigma: f64,
    pub r: f64,
    /// comparison-space offset: errors measured in `B^{sigma-delta}_{2,r}`
    pub delta: f64,
    /// comparison times (nonnegative; zero rows are reported, not fitted)
    pub comparison_times: Vec<f64>,
    pub s_end: f64,
    pub cfl: f64,
    pub reference: ReferenceChoice,
}

impl TauSweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau_list.is_empty() {
            return Err(CoreError::Config("tau list must not be empty".into()));
        }
        if self
            .tau_list
            .iter()
            .any(|&t| !(t > 0.0 && t <= 1.0))
        {
            return Err(CoreError::Config("tau values must lie in (0, 1]".into()));
        }
        if self.tau_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CoreError::Config(
                "tau list must be strictly decreasing".into(),
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(CoreError::Config(format!(
                "delta must lie in (0,1), got {}",
                self.delta
            )));
        }
        if self
            .comparison_times
            .iter()
            .any(|&t| !(0.0..=self.s_end + 1e-12).contains(&t))
        {
            return Err(CoreError::Config(
                "comparison times must lie in [0, s_end]".into(),
            ));
        }
        Ok(())
    }

    fn member_config(&self, tau: f64) -> SolverConfig {
        SolverConfig {
            grid: self.grid.clone(),
            law: self.law,
            tau,
            rho_bar: self.rho_bar,
            s_end: self.s_end,
            cfl: self.cfl,
            snapshot_times: self.comparison_times.clone(),
            data: self.data.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorCurve {
    pub tau: f64,
    /// `(s, ||rho_tau(s) - reference(s)||_{B^{sigma-delta}_{2,r}})`
    pub errors: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MemberSummary {
    pub tau: f64,
    pub failed: Option<String>,
    pub functionals: EnergyFunctionals,
    /// `||(rho0 - rho_bar, m0)||_{B^sigma_{2,r}}`
    pub initial_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderFit {
    pub s: f64,
    pub fit: Option<LinearFit>,
}

#[derive(Debug)]
pub struct TauSweepResult {
    pub sigma: f64,
    pub r: f64,
    pub delta: f64,
    pub members: Vec<MemberSummary>,
    pub runs: Vec<EulerRun>,
    /// reference density at the comparison times
    pub reference: Vec<(f64, ScalarField)>,
    pub reference_label: String,
    pub pme_run: Option<PmeRun>,
    pub error_curves: Vec<ErrorCurve>,
    pub order_fits: Vec<OrderFit>,
}

fn reference_snapshots(
    config: &TauSweepConfig,
    rho0: &ScalarField,
) -> Result<(Vec<(f64, ScalarField)>, String, Option<PmeRun>)> {
    match &config.reference {
        ReferenceChoice::Pme { dt } => {
            let pme_config = PmeConfig {
                grid: config.grid.clone(),
                law: config.law,
                rho_bar: config.rho_bar,
                s_end: config.s_end,
                snapshot_times: config.comparison_times.clone(),
                dt: *dt,
            };
            let run = solve_pme(&pme_config, rho0)?;
            let snaps = config
                .comparison_times
                .iter()
                .map(|&s| {
                    run.at_time(s)
                        .cloned()
                        .map(|f| (s, f))
                        .ok_or_else(|| CoreError::Config(format!("missing reference at s={s}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((snaps, "pme".to_string(), Some(run)))
        }
        ReferenceChoice::FinestEuler { tau } => {
            let run = solve(&config.member_config(*tau))?;
            if let Some(f) = &run.failure {
                return Err(CoreError::Solver {
                    s: 0.0,
                    message: format!("reference Euler run failed: {f}"),
                });
            }
            let snaps = config
                .comparison_times
                .iter()
                .map(|&s| {
                    run.times
                        .iter()
                        .position(|&t| (t - s).abs() < 1e-9)
                        .map(|i| (s, run.states[i].rho.clone()))
                        .ok_or_else(|| CoreError::Config(format!("missing reference at s={s}")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((snaps, format!("euler tau={tau}"), None))
        }
    }
}

/// Run the full sweep: member solves (concurrent), error curves against
/// the reference, and per-time order fits; member failures are carried as
/// markers, not hard errors.
pub fn run_sweep(part: &DyadicPartition, config: &TauSweepConfig) -> Result<TauSweepResult> {
    config.validate()?;
    let rho0 = initialize(&config.member_config(config.tau_list[0]))?.rho;
    let (reference, reference_label, pme_run) = reference_snapshots(config, &rho0)?;

    let runs: Vec<Result<EulerRun>> = config
        .tau_list
        .par_iter()
        .map(|&tau| solve(&config.member_config(tau)))
        .collect();
    let mut members = Vec::new();
    let mut kept_runs = Vec::new();
    let mut error_curves = Vec::new();
    for (idx, run) in runs.into_iter().enumerate() {
        let run = run?;
        let tau = config.tau_list[idx];
        let failed = run.failure.clone();
        let functionals = energy_functionals(part, &run, config.sigma, config.r)?;
        let initial_norm = initial_data_norm(
            part,
            &run.states[0],
            tau,
            config.rho_bar,
            config.sigma,
            config.r,
        )?;
        let mut errors = Vec::new();
        if failed.is_none() {
            for (s, ref_rho) in &reference {
                let i = run
                    .times
                    .iter()
                    .position(|&t| (t - s).abs() < 1e-9)
                    .ok_or_else(|| CoreError::Config(format!("missing snapshot at s={s}")))?;
                let diff = run.states[i].rho.sub(ref_rho);
                let e = besov_norm(
                    part,
                    &diff,
                    config.sigma - config.delta,
                    Lp::Two,
                    config.r,
                    false,
                )?
                .value;
                errors.push((*s, e));
            }
        }
        members.push(MemberSummary {
            tau,
            failed,
            functionals,
            initial_norm,
        });
        error_curves.push(ErrorCurve { tau, errors });
        kept_runs.push(run);
    }

    // per-comparison-time order fit over the healthy members
    let mut order_fits = Vec::new();
    for (ti, (s, _)) in reference.iter().enumerate() {
        if *s <= 0.0 {
            order_fits.push(OrderFit { s: *s, fit: None });
            continue;
        }
        let mut taus = Vec::new();
        let mut errs = Vec::new();
        for (mi, curve) in error_curves.iter().enumerate() {
            if members[mi].failed.is_some() || curve.errors.len() <= ti {
                continue;
            }
            let e = curve.errors[ti].1;
            if e > 0.0 {
                taus.push(curve.tau);
                errs.push(e);
            }
        }
        order_fits.push(OrderFit {
            s: *s,
            fit: fit_loglog(&taus, &errs),
        });
    }

    Ok(TauSweepResult {
        sigma: config.sigma,
        r: config.r,
        delta: config.delta,
        members,
        runs: kept_runs,
        reference,
        reference_label,
        pme_run,
        error_curves,
        order_fits,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AuditRow {
    pub tau: f64,
    /// sup-in-fast-time term `||(rho - rho_bar, m)||_{tilde-L^inf(B^sigma)}`
    pub sup_term: f64,
    /// `||m/sqrt(tau)||_{tilde-L^2(B^sigma)}` in fast time
    pub momentum_term: f64,
    /// `||sqrt(tau)(grad rho, grad m)||_{tilde-L^2(B^{sigma-1})}` in fast time
    pub gradient_term: f64,
    pub lhs: f64,
    /// initial-data norm `||(rho0 - rho_bar, m0)||_{B^sigma}`
    pub rhs_norm: f64,
    pub ratio: f64,
    /// fast-time horizon `T_end = s_end / tau` of the run
    pub t_end: f64,
    /// nonlinear-inequality fitted constants
    pub c_nonlinear: f64,
    pub c_linearized: f64,
    pub degenerate: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyAudit {
    pub mu0: f64,
    pub rows: Vec<AuditRow>,
    /// fitted uniform constant: the max ratio over the ladder
    pub c0: f64,
    /// max/min ratio spread across tau (uniformity indicator)
    pub spread: f64,
    /// porous-medium bound `sup_s ||N - rho_bar||_{B^sigma} <= C0 * rhs`
    pub pme_ratio: Option<f64>,
    pub pme_within_c0: Option<bool>,
}

/// Audit the tau-uniform energy inequality on a finished sweep, with
/// `mu0` fixed to 1 and all time norms taken in the fast time `t = s/tau`.
pub fn energy_inequality_audit(
    part: &DyadicPartition,
    result: &TauSweepResult,
) -> Result<EnergyAudit> {
    let mu0 = 1.0;
    let mut rows = Vec::new();
    for (member, run) in result.members.iter().zip(&result.runs) {
        if member.failed.is_some() {
            continue;
        }
        let tau = member.tau;
        let grid = run.states[0].rho.grid().clone();
        let bar = ScalarField::constant(grid.clone(), run.rho_bar);
        let dim = grid.dim();

        // components in fast-time variables: rho - rho_bar and m = tau u
        let mut comps: Vec<Vec<ScalarField>> = Vec::new();
        comps.push(run.states.iter().map(|st| st.rho.sub(&bar)).collect());
        for j in 0..dim {
            comps.push(
                run.states
                    .iter()
                    .map(|st| st.u.comp(j).scale(tau))
                    .collect(),
            );
        }
        let fast = |fields: Vec<ScalarField>| -> Result<Trajectory> {
            Ok(run.component_trajectory(fields)?.with_times_scaled(1.0 / tau))
        };

        let mut sup_term = 0.0;
        for comp in &comps {
            sup_term += chemin_lerner_norm(
                part,
                &fast(comp.clone())?,
                TimeExp::Inf,
                result.sigma,
                Lp::Two,
                result.r,
                false,
            )?
            .value;
        }
        let mut momentum_term = 0.0;
        for comp in &comps[1..] {
            momentum_term += chemin_lerner_norm(
                part,
                &fast(comp.clone())?,
                TimeExp::Two,
                result.sigma,
                Lp::Two,
                result.r,
                false,
            )?
            .value;
        }
        momentum_term /= tau.sqrt();
        let mut gradient_term = 0.0;
        for comp in &comps {
            for axis in 0..dim {
                let grads: Vec<ScalarField> = comp.iter().map(|f| f.derivative(axis)).collect();
                gradient_term += chemin_lerner_norm(
                    part,
                    &fast(grads)?,
                    TimeExp::Two,
                    result.sigma - 1.0,
                    Lp::Two,
                    result.r,
                    false,
                )?
                .value;
            }
        }
        gradient_term *= tau.sqrt();

        let lhs = sup_term + mu0 * (momentum_term + gradient_term);
        let rhs_norm = member.initial_norm;
        let degenerate = rhs_norm < 1e-300;
        let ratio = if degenerate { 0.0 } else { lhs / rhs_norm };

        let f = &member.functionals;
        let shape = f.e0 + f.e.sqrt() * f.d_tau + f.e * f.d_tau;
        let c_nonlinear = if shape > 0.0 { (f.e + f.d_tau) / shape } else { 0.0 };
        let c_linearized = if f.e0 > 0.0 { (f.e + f.d_tau) / f.e0 } else { 0.0 };

        rows.push(AuditRow {
            tau,
            sup_term,
            momentum_term,
            gradient_term,
            lhs,
            rhs_norm,
            ratio,
            t_end: run.times.last().copied().unwrap_or(0.0) / tau,
            c_nonlinear,
            c_linearized,
            degenerate,
        });
    }
    let ratios: Vec<f64> = rows
        .iter()
        .filter(|r| !r.degenerate)
        .map(|r| r.ratio)
        .collect();
    let c0 = ratios.iter().fold(0.0_f64, |m, &v| m.max(v));
    let min_ratio = ratios.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let spread = if ratios.is_empty() || min_ratio == 0.0 {
        f64::NAN
    } else {
        c0 / min_ratio
    };

    let (pme_ratio, pme_within_c0) = match &result.pme_run {
        Some(run) => {
            let rep = pme_besov_bound(part, run, result.sigma, result.r)?;
            if rep.degenerate {
                (None, None)
            } else {
                (Some(rep.ratio), Some(rep.ratio <= c0))
            }
        }
        None => (None, None),
    };

    Ok(EnergyAudit {
        mu0,
        rows,
        c0,
        spread,
        pme_ratio,
        pme_within_c0,
    })
}

/// Plot-ready document: one CSV row per `(tau, s)` plus fitted orders.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceDocument {
    pub errors_csv: String,
    pub orders: serde_json::Value,
}

pub fn convergence_report(result: &TauSweepResult) -> ConvergenceDocument {
    let mut csv = String::from("tau,s,error\n");
    for curve in &result.error_curves {
        for (s, e) in &curve.errors {
            csv.push_str(&format!("{:.15e},{:.15e},{:.15e}\n", curve.tau, s, e));
        }
    }
    let orders: Vec<serde_json::Value> = result
        .order_fits
        .iter()
        .map(|of| match &of.fit {
            Some(fit) => serde_json::json!({
                "s": of.s,
                "order": fit.slope,
                "stderr": fit.slope_stderr,
                "ci_low": fit.ci_low,
                "ci_high": fit.ci_high,
                "n": fit.n,
            }),
            None => serde_json::json!({ "s": of.s, "order": null }),
        })
        .collect();
    ConvergenceDocument {
        errors_csv: csv,
        orders: serde_json::json!({
            "sigma": result.sigma,
            "r": result.r,
            "delta": result.delta,
            "reference": result.reference_label,
            "fits": orders,
        }),
    }
}
