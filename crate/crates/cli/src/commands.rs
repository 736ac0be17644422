//! One handler per subcommand. Every run writes a manifest (config hash,
//! version, seed) into the output directory before any data file, and all
//! data files are written atomically with fixed float formatting, so
//! identical config + seed reruns are byte-identical.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use relaxlab::bony;
use relaxlab::dyadic::{self, DyadicPartition, Lp};
use relaxlab::euler;
use relaxlab::field::ScalarField;
use relaxlab::io::{atomic_write, diagnostics_csv, write_fields};
use relaxlab::limit;
use relaxlab::pme;
use relaxlab::report::NormRecord;
use relaxlab::symmetry;
use relaxlab::CoreError;

use crate::config::{self, load};

/// Verify-style commands distinguish "math failed" (exit 2) from
/// operational errors (exit 1).
pub enum Outcome {
    Pass,
    Violation(String),
}

pub struct Ctx {
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub verbosity: u8,
}

impl Ctx {
    fn log(&self, msg: &str) {
        if self.verbosity > 0 {
            eprintln!("[relaxlab] {msg}");
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    version: &'a str,
    config_sha256: String,
    seed: Option<u64>,
}

fn write_manifest(ctx: &Ctx, subcommand: &str) -> anyhow::Result<()> {
    std::fs::create_dir_all(&ctx.out_dir)
        .with_context(|| format!("creating output directory {}", ctx.out_dir.display()))?;
    let bytes = std::fs::read(&ctx.config_path)
        .with_context(|| format!("reading config {}", ctx.config_path.display()))?;
    let digest = Sha256::digest(&bytes);
    let hash: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    let manifest = Manifest {
        subcommand,
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: hash,
        seed: ctx.seed,
    };
    write_json(ctx, "manifest.json", &manifest)
}

fn write_json<T: Serialize>(ctx: &Ctx, name: &str, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(&ctx.out(name), text.as_bytes())?;
    Ok(())
}

fn write_jsonl<T: Serialize>(ctx: &Ctx, name: &str, rows: &[T]) -> anyhow::Result<()> {
    let mut text = String::new();
    for row in rows {
        text.push_str(&serde_json::to_string(row)?);
        text.push('\n');
    }
    atomic_write(&ctx.out(name), text.as_bytes())?;
    Ok(())
}

pub fn lp_verify(ctx: &Ctx) -> anyhow::Result<Outcome> {
    let cfg: config::LpVerifyToml = load(&ctx.config_path)?;
    write_manifest(ctx, "lp-verify")?;
    let grid = cfg.grid.build()?;
    let part = DyadicPartition::build(grid.clone())?;
    ctx.log(&format!("partition blocks q in [{}, {}]", part.q_min(), part.q_max()));

    let mut max_hom = 0.0_f64;
    let mut max_inhom = 0.0_f64;
    for idx in 0..grid.len() {
        if !grid.dealias_mask()[idx] {
            continue;
        }
        let kappa = grid.kappa_abs()[idx];
        let hom: f64 = (part.q_min()..=part.q_max())
            .map(|q| part.phi_multiplier(q).unwrap()[idx])
            .sum();
        let inhom: f64 = part.psi_multiplier()[idx]
            + (0..=part.q_max())
                .filter_map(|q| part.phi_multiplier(q))
                .map(|m| m[idx])
                .sum::<f64>();
        if kappa > 0.0 {
            max_hom = max_hom.max((hom - 1.0).abs());
        }
        max_inhom = max_inhom.max((inhom - 1.0).abs());
    }
    let field = cfg.field.build(&grid, ctx.seed)?;
    let reconstruction_error = part.reconstruction_error(&field);

    #[derive(Serialize)]
    struct Report {
        q_min: i32,
        q_max: i32,
        max_homogeneous_residual: f64,
        max_inhomogeneous_residual: f64,
        reconstruction_error: f64,
        partition_tolerance: f64,
        reconstruction_tolerance: f64,
        pass: bool,
    }
    let pass = max_hom < cfg.partition_tolerance
        && max_inhom < cfg.partition_tolerance
        && reconstruction_error < cfg.reconstruction_tolerance;
    let report = Report {
        q_min: part.q_min(),
        q_max: part.q_max(),
        max_homogeneous_residual: max_hom,
        max_inhomogeneous_residual: max_inhom,
        reconstruction_error,
        partition_tolerance: cfg.partition_tolerance,
        reconstruction_tolerance: cfg.reconstruction_tolerance,
        pass,
    };
    write_json(ctx, "partition_report.json", &report)?;
    if pass {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::Violation(format!(
            "partition residuals {max_hom:.3e}/{max_inhom:.3e}, reconstruction {reconstruction_error:.3e}"
        )))
    }
}

pub fn norm(ctx: &Ctx) -> anyhow::Result<Outcome> {
    let cfg: config::NormToml = load(&ctx.config_path)?;
    write_manifest(ctx, "norm")?;
    let grid = cfg.grid.build()?;
    let field = cfg.field.build(&grid, ctx.seed)?;
    let record = match cfg.norm.kind.as_str() {
        "besov" => {
            let part = DyadicPartition::build(grid.clone())?;
            let b = dyadic::besov_norm(
                &part,
                &field,
                cfg.norm.s,
                cfg.norm.lp()?,
                cfg.norm.r,
                cfg.norm.homogeneous,
            )?;
            NormRecord::from_besov(
                "besov_norm",
                serde_json::json!({
                    "dim": grid.dim(),
                    "points_per_axis": grid.points_per_axis(),
                }),
                &b,
            )
        }
        "sobolev" => NormRecord {
            op: "sobolev_norm".into(),
            params: serde_json::json!({
                "s": cfg.norm.s,
                "dim": grid.dim(),
                "points_per_axis": grid.points_per_axis(),
            }),
            value: dyadic::sobolev_norm(&field, cfg.norm.s),
            per_block: Vec::new(),
        },
        other => anyhow::bail!("unknown norm kind {other:?} (use \"besov\" or \"sobolev\")"),
    };
    write_json(ctx, "norm.json", &record)?;
    Ok(Outcome::Pass)
}

pub fn bony_verify(ctx: &Ctx) -> anyhow::Result<Outcome> {
    let cfg: config::BonyVerifyToml = load(&ctx.config_path)?;
    write_manifest(ctx, "bony-verify")?;
    let grid = cfg.grid.build()?;
    let part = DyadicPartition::build(grid.clone())?;
    let seed = ctx.seed.unwrap_or(cfg.seed);

    #[derive(Serialize)]
    struct PairRow {
        pair: usize,
        bony_residual: f64,
        max_decomposition_residual: f64,
    }
    let blocks: Vec<i32> = cfg
        .blocks
        .clone()
        .unwrap_or_else(|| (part.q_min()..=part.q_max()).collect());
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..cfg.pairs {
        let mk = |s: u64| {
            relaxlab::field::RandomFieldSpec {
                seed: s,
                k_min: 1.0,
                k_max: cfg.k_band,
                decay: cfg.decay,
                amplitude: 1.0,
            }
            .realize(&grid)
        };
        let f = mk(seed.wrapping_add(2 * i as u64))?;
        let g = mk(seed.wrapping_add(2 * i as u64 + 1))?;
        let split = bony::bony_split(&part, &f, &g);
        let mut max_dec: f64 = 0.0;
        for &q in &blocks {
            let dec = bony::term_decomposition(&part, &f, &g, q)?;
            max_dec = max_dec.max(dec.residual);
        }
        worst = worst.max(split.residual).max(max_dec);
        rows.push(PairRow {
            pair: i,
            bony_residual: split.residual,
            max_decomposition_residual: max_dec,
        });
        ctx.log(&format!("pair {i}: residuals {:.3e} / {max_dec:.3e}", split.residual));
    }
    write_jsonl(ctx, "pairs.jsonl", &rows)?;
    #[derive(Serialize)]
    struct Report {
        pairs: usize,
        blocks: Vec<i32>,
        tolerance: f64,
        worst_residual: f64,
        pass: bool,
    }
    let pass = worst < cfg.tolerance;
    write_json(
        ctx,
        "bony_report.json",
        &Report {
            pairs: cfg.pairs,
            blocks,
            tolerance: cfg.tolerance,
            worst_residual: worst,
            pass,
        },
    )?;
    if pass {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::Violation(format!("worst residual {worst:.3e}")))
    }
}

pub fn commutator_suite(ctx: &Ctx) -> anyhow::Result<Outcome> {
    let cfg: config::CommutatorSuiteToml = load(&ctx.config_path)?;
    write_manifest(ctx, "commutator-suite")?;
    let grid = cfg.grid.build()?;
    let part = DyadicPartition::build(grid)?;
    let suite_cfg = bony::SuiteConfig {
        s: cfg.s,
        r: cfg.r,
        family_size: cfg.family_size,
        seed: ctx.seed.unwrap_or(cfg.seed),
        homogeneous: cfg.homogeneous,
        k_band: cfg.k_band,
        decay: cfg.decay,
        with_terms: cfg.with_terms,
    };
    let suite = bony::commutator_estimate_suite(&part, &suite_cfg)?;
    write_jsonl(ctx, "suite.jsonl", &suite.pairs)?;

    let mut csv = String::from("pair,q,comm_norm,bound_rhs,ratio,k1,k2,k3,k4,k5\n");
    let mut violation = None;
    for pair in &suite.pairs {
        for rep in &pair.reports {
            let terms = rep.term_norms.unwrap_or([f64::NAN; 5]);
            csv.push_str(&format!(
                "{},{},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e}\n",
                pair.pair, rep.q, rep.comm_norm, rep.bound_rhs, rep.ratio,
                terms[0], terms[1], terms[2], terms[3], terms[4]
            ));
            if let Some(t) = rep.term_norms {
                let sum: f64 = t.iter().sum();
                if rep.comm_norm > sum + 1e-10 {
                    violation = Some(format!(
                        "triangle inequality violated at pair {} q {}",
                        pair.pair, rep.q
                    ));
                }
            }
        }
    }
    atomic_write(&ctx.out("summary.csv"), csv.as_bytes())?;
    #[derive(Serialize)]
    struct Report {
        s: f64,
        r: f64,
        homogeneous: bool,
        family_size: usize,
        sup_cq_norm: f64,
    }
    write_json(
        ctx,
        "suite_report.json",
        &Report {
            s: suite.s,
            r: suite.r,
            homogeneous: suite.homogeneous,
            family_size: suite.pairs.len(),
            sup_cq_norm: suite.sup_cq_norm,
        },
    )?;
    match violation {
        Some(msg) => Ok(Outcome::Violation(msg)),
        None => Ok(Outcome::Pass),
    }
}

pub fn sk_verify(ctx: &Ctx) -> anyhow::Result<Outcome> {
    let cfg: config::SkVerifyToml = load(&ctx.config_path)?;
    write_manifest(ctx, "sk-verify")?;
    let rows = symmetry::sk_direction_sweep(
        &cfg.dims,
        &cfg.gammas,
        cfg.rho_bar,
        cfg.directions,
        ctx.seed.unwrap_or(cfg.seed),
    )?;
    write_jsonl(ctx, "sk_report.jsonl", &rows)?;
    let worst = rows
        .iter()
        .map(|r| r.max_skew_residual.max(r.max_sk_residual))
        .fold(0.0_f64, f64::max);
    #[derive(Serialize)]
    struct Report {
        tolerance: f64,
        worst_residual: f64,
        pass: bool,
    }
    let pass = worst < cfg.tolerance;
    write_json(
        ctx,
        "sk_report.json",
        &Report {
            tolerance: cfg.tolerance,
            worst_residual: worst,
            pass,
        },
    )?;
    if pass {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::Violation(format!(
            "compensating-matrix residual {worst:.3e} over tolerance {:.1e}",
            cfg.tolerance
        )))
    }
}

fn write_snapshots(
    ctx: &Ctx,
    times: &[f64],
    fields_at: impl Fn(usize) -> Vec<ScalarField>,
) -> anyhow::Result<()> {
    for (i, _s) in times.iter().enumerate() {
        let comps = fields_at(i);
        let refs: Vec<&ScalarField> = comps.iter().collect();
        write_fields(&ctx.out(&format!("snapshot_{i:03}.fld")), &refs)?;
    }
    Ok(())
}

pub fn solve_euler(ctx: &Ctx) -> anyhow::Result<Outcome> {
    let cfg: config::SolveEulerToml = load(&ctx.config_path)?;
    write_manifest(ctx, "solve-euler")?;
    let grid = cfg.grid.build()?;
    let config = euler::SolverConfig {
        grid: grid.clone(),
        law: cfg.law.build()?,
        tau: cfg.tau,
        rho_bar: cfg.rho_bar,
        s_end: cfg.s_end,
        cfl: cfg.cfl,
        snapshot_times: cfg.snapshot_times.clone(),
        data: cfg.data.build(ctx.seed),
    };
    let part = DyadicPartition::build(grid)?;
    let run = euler::solve(&config)?;
    let initial_norm = euler::initial_data_norm(
        &part,
        &run.states[0],
        run.tau,
        run.rho_bar,
        cfg.sigma,
        cfg.r,
    )?;
    atomic_write(
        &ctx.out("diagnostics.csv"),
        diagnostics_csv(&run.diagnostics).as_bytes(),
    )?;
    write_snapshots(ctx, &run.times, |i| {
        let st = &run.states[i];
        let mut comps = vec![st.rho.clone()];
        comps.extend(st.u.comps().iter().cloned());
        comps
    })?;
    #[derive(Serialize)]
    struct RunReport<'a> {
        tau: f64,
        gamma: f64,
        rho_bar: f64,
        sigma: f64,
        r: f64,
        initial_besov_norm: f64,
        snapshot_times: &'a [f64],
        caps: &'a [euler::StepCaps],
        failure: &'a Option<String>,
    }
    write_json(
        ctx,
        "run.json",
        &RunReport {
            tau: run.tau,
            gamma: run.law.gamma(),
            rho_bar: run.rho_bar,
            sigma: cfg.sigma,
            r: cfg.r,
            initial_besov_norm: initial_norm,
            snapshot_times: &run.times,
            caps: &run.caps,
            failure: &run.failure,
        },
    )?;
    match &run.failure {
        Some(msg) => Ok(Outcome::Violation(format!("solver failed: {msg}"))),
        None => Ok(Outcome::Pass),
    }
}

pub fn solve_pme(ctx: &Ctx) -> anyhow::Result<Outcome> {
    let cfg: config::SolvePmeToml = load(&ctx.config_path)?;
    write_manifest(ctx, "solve-pme")?;
    let grid = cfg.grid.build()?;
    let pme_config = pme::PmeConfig {
        grid: grid.clone(),
        law: cfg.law.build()?,
        rho_bar: cfg.rho_bar,
        s_end: cfg.s_end,
        snapshot_times: cfg.snapshot_times.clone(),
        dt: cfg.dt,
    };
    let data = config::DataToml {
        profile: cfg.profile.clone(),
        velocity: config::VelocityToml::Zero,
    }
    .build(ctx.seed);
    let n0 = euler::build_density(&grid, &data.profile, cfg.rho_bar)?;
    let run = match pme::solve_pme(&pme_config, &n0) {
        Ok(run) => run,
        Err(CoreError::Solver { s, message }) => {
            return Ok(Outcome::Violation(format!("solver failed at s={s}: {message}")));
        }
        Err(e) => return Err(e.into()),
    };
    let mut csv = String::from("s,mass,l2_sq_dist\n");
    for d in &run.diagnostics {
        csv.push_str(&format!("{:.15e},{:.15e},{:.15e}\n", d.s, d.mass, d.l2_sq_dist));
    }
    atomic_write(&ctx.out("diagnostics.csv"), csv.as_bytes())?;
    write_snapshots(ctx, &run.times, |i| vec![run.fields[i].clone()])?;
    #[derive(Serialize)]
    struct RunReport<'a> {
        gamma: f64,
        rho_bar: f64,
        dt: f64,
        snapshot_times: &'a [f64],
    }
    write_json(
        ctx,
        "run.json",
        &RunReport {
            gamma: run.gamma,
            rho_bar: run.rho_bar,
            dt: cfg.dt,
            snapshot_times: &run.times,
        },
    )?;
    Ok(Outcome::Pass)
}

fn run_sweep_common(
    ctx: &Ctx,
    cfg: &config::TauSweepToml,
) -> anyhow::Result<(DyadicPartition, limit::TauSweepResult)> {
    let grid = cfg.grid.build()?;
    let part = DyadicPartition::build(grid.clone())?;
    let config = limit::TauSweepConfig {
        grid,
        law: cfg.law.build()?,
        rho_bar: cfg.rho_bar,
        tau_list: cfg.tau_list.clone(),
        data: cfg.data.build(ctx.seed),
        sigma: cfg.sigma,
        r: cfg.r,
        delta: cfg.delta,
        comparison_times: cfg.comparison_times.clone(),
        s_end: cfg.s_end,
        cfl: cfg.cfl,
        reference: cfg.reference.build(),
    };
    ctx.log(&format!("running {} member solves", config.tau_list.len()));
    let result = limit::run_sweep(&part, &config)?;
    Ok((part, result))
}

pub fn tau_sweep(ctx: &Ctx) -> anyhow::Result<Outcome> {
    let cfg: config::TauSweepToml = load(&ctx.config_path)?;
    write_manifest(ctx, "tau-sweep")?;
    let (_, result) = run_sweep_common(ctx, &cfg)?;
    let doc = limit::convergence_report(&result);
    atomic_write(&ctx.out("errors.csv"), doc.errors_csv.as_bytes())?;
    let mut orders = serde_json::to_string_pretty(&doc.orders)?;
    orders.push('\n');
    atomic_write(&ctx.out("orders.json"), orders.as_bytes())?;
    write_json(ctx, "members.json", &result.members)?;
    let failed: Vec<&limit::MemberSummary> = result
        .members
        .iter()
        .filter(|m| m.failed.is_some())
        .collect();
    if failed.is_empty() {
        Ok(Outcome::Pass)
    } else {
        Ok(Outcome::Violation(format!(
            "{} member run(s) failed (markers in members.json)",
            failed.len()
        )))
    }
}

pub fn audit_energy(ctx: &Ctx) -> anyhow::Result<Outcome> {
    let cfg: config::TauSweepToml = load(&ctx.config_path)?;
    write_manifest(ctx, "audit-energy")?;
    let (part, result) = run_sweep_common(ctx, &cfg)?;
    let audit = limit::energy_inequality_audit(&part, &result)?;
    write_json(ctx, "energy_audit.json", &audit)?;
    write_json(ctx, "members.json", &result.members)?;
    if !audit.spread.is_finite() {
        return Ok(Outcome::Violation("audit degenerate (zero data?)".into()));
    }
    if audit.spread > cfg.spread_threshold {
        return Ok(Outcome::Violation(format!(
            "ratio spread {:.3} exceeds threshold {:.3}",
            audit.spread, cfg.spread_threshold
        )));
    }
    if audit.pme_within_c0 == Some(false) {
        return Ok(Outcome::Violation(
            "porous-medium bound exceeds the fitted uniform constant".into(),
        ));
    }
    Ok(Outcome::Pass)
}
