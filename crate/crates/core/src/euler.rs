//! Pseudo-spectral solver for the relaxed Euler system in slow time.
//!
//! State variables are `(rho, u)` with `u = rho v / tau` (the scaled
//! momentum), evolving
//!
//! ```text
//!   d_s rho = -div u
//!   d_s u   = -div(u (x) u / rho) - (u + grad p(rho)) / tau^2
//! ```
//!
//! by Strang splitting: the stiff relaxation-pressure sub-flow is linear
//! in `u` for frozen `rho` and solved exactly, which removes the `tau^-2`
//! stiffness from the explicit RK4 transport step. Tau sweeps then compare
//! states at identical slow times.

use std::sync::Arc;

use serde::Serialize;

use crate::dyadic::{
    besov_norm, chemin_lerner_norm, DyadicPartition, Lp, TimeExp, Trajectory, TrajectoryMeta,
};
use crate::error::{CoreError, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::PeriodicGrid;
use crate::symmetry::{entropy_and_flux, to_entropy_vars, EntropyState, PressureLaw, VACUUM_GUARD};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Density profile of the initial data.
#[derive(Clone, Debug, Serialize)]
pub enum DataProfile {
    Equilibrium,
    /// `rho0 = rho_bar + a sin(2 pi k x / L)`
    SingleMode { amplitude: f64, k: i64 },
    /// `rho0 = rho_bar (1 + a sum_{k<=K} c_k sin(2 pi k x/L + phase_k))`
    MultiMode { amplitude: f64, k_max: i64, seed: u64 },
}

/// Initial velocity preparation.
#[derive(Clone, Debug, Serialize)]
pub enum VelocityPrep {
    /// `v0 = -tau grad p(rho0) / rho0`, i.e. `u0 = -grad p(rho0)`:
    /// compatible with the limit dynamics, no initial layer.
    WellPrepared,
    /// `v0 = 0` (ill-prepared unless at equilibrium).
    Zero,
    /// gradient-type `v0 = a grad cos(2 pi k x / L)` (ill-prepared).
    Gradient { amplitude: f64, k: i64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct InitialData {
    pub profile: DataProfile,
    pub velocity: VelocityPrep,
}

#[derive(Clone)]
pub struct SolverConfig {
    pub grid: Arc<PeriodicGrid>,
    pub law: PressureLaw,
    pub tau: f64,
    pub rho_bar: f64,
    pub s_end: f64,
    /// CFL safety factor in (0, 1)
    pub cfl: f64,
    /// requested snapshot times; 0 and s_end are always included
    pub snapshot_times: Vec<f64>,
    pub data: InitialData,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(CoreError::Config(format!(
                "relaxation time must satisfy 0 < tau <= 1, got {}",
                self.tau
            )));
        }
        if !(self.s_end > 0.0) {
            return Err(CoreError::Config("final slow time must be positive".into()));
        }
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(CoreError::Config(format!(
                "CFL safety factor must lie in (0,1), got {}",
                self.cfl
            )));
        }
        if !(self.rho_bar > VACUUM_GUARD) {
            return Err(CoreError::Config("reference density must be positive".into()));
        }
        if self
            .snapshot_times
            .iter()
            .any(|&t| !(0.0..=self.s_end + 1e-12).contains(&t))
        {
            return Err(CoreError::Config(
                "snapshot times must lie in [0, s_end]".into(),
            ));
        }
        Ok(())
    }
}

/// `(rho, u)` at one slow time.
#[derive(Clone, Debug)]
pub struct EulerState {
    pub rho: ScalarField,
    pub u: VectorField,
    pub s: f64,
}

impl EulerState {
    /// Fast-time momentum `m = rho v = tau u`.
    pub fn momentum(&self, tau: f64) -> VectorField {
        VectorField::new(self.u.comps().iter().map(|c| c.scale(tau)).collect())
    }

    /// Entropy variables of this state.
    pub fn entropy_state(&self, law: PressureLaw, tau: f64, rho_bar: f64) -> Result<EntropyState> {
        to_entropy_vars(&self.rho, &self.momentum(tau), law, rho_bar)
    }

    pub fn total_mass(&self) -> f64 {
        self.rho.values().iter().sum::<f64>() * self.rho.grid().cell_volume()
    }
}

/// Per-step diagnostics, cumulative quantities included.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DiagnosticsRecord {
    pub s: f64,
    pub mass: f64,
    /// `int eta~ dx`
    pub rel_entropy: f64,
    /// `int_0^s int |u|^2/rho dx ds'` (trapezoid in s)
    pub dissipation: f64,
    /// `|Delta int eta~ + dissipation| / max(int eta~(0), dissipation)`
    pub balance_residual: f64,
    /// `sup |W - W̄|`
    pub sup_w: f64,
    /// `sup |grad W|`
    pub sup_grad_w: f64,
    /// `int_0^s ||grad W||_inf ds'` (the blow-up functional)
    pub blowup_integral: f64,
}

/// Time-step caps active on one segment of the run.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StepCaps {
    pub s: f64,
    pub cap_advective: f64,
    pub cap_acoustic: f64,
    pub ds: f64,
    pub n_steps: usize,
}

#[derive(Clone, Debug)]
pub struct EulerRun {
    pub tau: f64,
    pub law: PressureLaw,
    pub rho_bar: f64,
    pub times: Vec<f64>,
    pub states: Vec<EulerState>,
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub caps: Vec<StepCaps>,
    /// set when a step failed; the trajectory up to the failure is kept
    pub failure: Option<String>,
}

impl EulerRun {
    /// Entropy-variable snapshots `(W1, W2)`.
    pub fn w_snapshots(&self) -> Result<Vec<EntropyState>> {
        self.states
            .iter()
            .map(|st| st.entropy_state(self.law, self.tau, self.rho_bar))
            .collect()
    }

    /// Trajectory of the density perturbation `rho - rho_bar`.
    pub fn rho_perturbation_trajectory(&self) -> Result<Trajectory> {
        let grid = self.states[0].rho.grid().clone();
        let bar = ScalarField::constant(grid, self.rho_bar);
        Trajectory::new(
            self.times.clone(),
            self.states.iter().map(|st| st.rho.sub(&bar)).collect(),
            self.meta(),
        )
    }

    fn meta(&self) -> TrajectoryMeta {
        TrajectoryMeta {
            tau: Some(self.tau),
            gamma: Some(self.law.gamma()),
            rho_bar: Some(self.rho_bar),
        }
    }

    /// Scalar-component trajectory on this run's snapshot times.
    pub fn component_trajectory(&self, fields: Vec<ScalarField>) -> Result<Trajectory> {
        Trajectory::new(self.times.clone(), fields, self.meta())
    }
}

/// Density field of a data profile; shared with the porous-medium solver.
pub fn build_density(
    grid: &Arc<PeriodicGrid>,
    profile: &DataProfile,
    rho_bar: f64,
) -> Result<ScalarField> {
    let period = grid.period();
    let rho = match profile {
        DataProfile::Equilibrium => ScalarField::constant(grid.clone(), rho_bar),
        DataProfile::SingleMode { amplitude, k } => {
            let (a, k) = (*amplitude, *k as f64);
            ScalarField::from_fn(grid.clone(), move |x, _| {
                rho_bar + a * (2.0 * std::f64::consts::PI * k * x / period).sin()
            })
        }
        DataProfile::MultiMode {
            amplitude,
            k_max,
            seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let modes: Vec<(f64, f64, f64)> = (1..=*k_max)
                .map(|k| {
                    (
                        k as f64,
                        rng.random_range(0.3..1.0),
                        rng.random_range(0.0..2.0 * std::f64::consts::PI),
                    )
                })
                .collect();
            let a = *amplitude;
            ScalarField::from_fn(grid.clone(), move |x, _| {
                let sum: f64 = modes
                    .iter()
                    .map(|&(k, c, ph)| c * (2.0 * std::f64::consts::PI * k * x / period + ph).sin())
                    .sum();
                rho_bar * (1.0 + a * sum)
            })
        }
    };
    if rho.values().iter().any(|&v| v <= VACUUM_GUARD) {
        return Err(CoreError::Config(
            "initial density touches the vacuum guard".into(),
        ));
    }
    Ok(rho)
}

/// Build the initial state from the data descriptor.
pub fn initialize(config: &SolverConfig) -> Result<EulerState> {
    config.validate()?;
    let grid = &config.grid;
    let period = grid.period();
    let rho = build_density(grid, &config.data.profile, config.rho_bar)?;

    let u = match &config.data.velocity {
        VelocityPrep::WellPrepared => {
            // u0 = -grad p(rho0), independent of tau
            let gp = grad_pressure(&rho, config.law);
            VectorField::new(gp.comps().iter().map(|c| c.scale(-1.0)).collect())
        }
        VelocityPrep::Zero => VectorField::zero(grid.clone()),
        VelocityPrep::Gradient { amplitude, k } => {
            let (a, kk) = (*amplitude, *k as f64);
            let chi = ScalarField::from_fn(grid.clone(), move |x, _| {
                (2.0 * std::f64::consts::PI * kk * x / period).cos()
            });
            let v = chi.gradient();
            let tau = config.tau;
            VectorField::new(
                v.comps()
                    .iter()
                    .map(|c| {
                        let vals: Vec<f64> = c
                            .values()
                            .iter()
                            .zip(rho.values())
                            .map(|(&vi, &r)| a * vi * r / tau)
                            .collect();
                        ScalarField::from_values_dealiased(grid.clone(), &vals)
                    })
                    .collect(),
            )
        }
    };
    Ok(EulerState { rho, u, s: 0.0 })
}

/// `||(rho0 - rho_bar, m0)||_{B^sigma_{2,r}}` of a state (components
/// summed), reported alongside every run.
pub fn initial_data_norm(
    part: &DyadicPartition,
    state: &EulerState,
    tau: f64,
    rho_bar: f64,
    sigma: f64,
    r: f64,
) -> Result<f64> {
    let grid = state.rho.grid().clone();
    let pert = state.rho.sub(&ScalarField::constant(grid, rho_bar));
    let mut total = besov_norm(part, &pert, sigma, Lp::Two, r, false)?.value;
    for c in state.momentum(tau).comps() {
        total += besov_norm(part, c, sigma, Lp::Two, r, false)?.value;
    }
    Ok(total)
}

fn grad_pressure(rho: &ScalarField, law: PressureLaw) -> VectorField {
    let grid = rho.grid().clone();
    let p_vals: Vec<f64> = rho.values().iter().map(|&r| law.p(r)).collect();
    ScalarField::from_values_dealiased(grid, &p_vals).gradient()
}

/// Exact solution of the stiff sub-flow `d_s u = -(u + grad p)/tau^2`
/// over `delta` with `rho` frozen:
/// `u <- -grad p + (u + grad p) exp(-delta/tau^2)`.
pub fn relaxation_substep(
    state: &EulerState,
    delta: f64,
    config: &SolverConfig,
) -> EulerState {
    let gp = grad_pressure(&state.rho, config.law);
    let decay = (-delta / (config.tau * config.tau)).exp();
    let u = VectorField::new(
        state
            .u
            .comps()
            .iter()
            .zip(gp.comps())
            .map(|(ui, gi)| ui.add(gi).scale(decay).sub(gi))
            .collect(),
    );
    EulerState {
        rho: state.rho.clone(),
        u,
        s: state.s,
    }
}

/// Pressure-only variant (damping off): `u <- u - delta grad p / tau^2`.
/// Composes with the transport step into the undamped system; used by the
/// entropy-drift verification.
fn pressure_substep(state: &EulerState, delta: f64, config: &SolverConfig) -> EulerState {
    let gp = grad_pressure(&state.rho, config.law);
    let scale = delta / (config.tau * config.tau);
    let u = VectorField::new(
        state
            .u
            .comps()
            .iter()
            .zip(gp.comps())
            .map(|(ui, gi)| ui.sub(&gi.scale(scale)))
            .collect(),
    );
    EulerState {
        rho: state.rho.clone(),
        u,
        s: state.s,
    }
}

struct TransportRhs {
    drho: ScalarField,
    du: Vec<ScalarField>,
}

/// `d_s rho = -div u`, `d_s u = -div(u (x) u / rho)`, dealiased flux.
fn transport_rhs(rho: &ScalarField, u: &[ScalarField]) -> TransportRhs {
    let grid = rho.grid().clone();
    let dim = grid.dim();
    let n = grid.len();
    let u_vec = VectorField::new(u.to_vec());
    let drho = u_vec.divergence().scale(-1.0);

    // symmetric flux F_ij = u_i u_j / rho
    let mut flux: Vec<Vec<Option<ScalarField>>> = vec![vec![None; dim]; dim];
    for i in 0..dim {
        for j in i..dim {
            let mut vals = vec![0.0; n];
            for x in 0..n {
                vals[x] = u[i].values()[x] * u[j].values()[x] / rho.values()[x];
            }
            let f = ScalarField::from_values_dealiased(grid.clone(), &vals);
            if i != j {
                flux[j][i] = Some(f.clone());
            }
            flux[i][j] = Some(f);
        }
    }
    let du = (0..dim)
        .map(|i| {
            let mut acc = ScalarField::zero(grid.clone());
            for (j, fij) in flux[i].iter().enumerate() {
                acc = acc.add(&fij.as_ref().unwrap().derivative(j));
            }
            acc.scale(-1.0)
        })
        .collect();
    TransportRhs { drho, du }
}

fn axpy(
    base_rho: &ScalarField,
    base_u: &[ScalarField],
    k: &TransportRhs,
    h: f64,
) -> (ScalarField, Vec<ScalarField>) {
    let rho = base_rho.add(&k.drho.scale(h));
    let u = base_u
        .iter()
        .zip(&k.du)
        .map(|(ui, ki)| ui.add(&ki.scale(h)))
        .collect();
    (rho, u)
}

/// One classical RK4 step of the conservative transport part.
fn transport_step(state: &EulerState, ds: f64) -> EulerState {
    let rho0 = &state.rho;
    let u0: Vec<ScalarField> = state.u.comps().to_vec();
    let k1 = transport_rhs(rho0, &u0);
    let (r2, u2) = axpy(rho0, &u0, &k1, ds / 2.0);
    let k2 = transport_rhs(&r2, &u2);
    let (r3, u3) = axpy(rho0, &u0, &k2, ds / 2.0);
    let k3 = transport_rhs(&r3, &u3);
    let (r4, u4) = axpy(rho0, &u0, &k3, ds);
    let k4 = transport_rhs(&r4, &u4);

    let comb = |a: &ScalarField,
                k1: &ScalarField,
                k2: &ScalarField,
                k3: &ScalarField,
                k4: &ScalarField| {
        a.add(
            &k1.add(&k2.scale(2.0))
                .add(&k3.scale(2.0))
                .add(k4)
                .scale(ds / 6.0),
        )
    };
    let rho = comb(rho0, &k1.drho, &k2.drho, &k3.drho, &k4.drho);
    let u = VectorField::new(
        (0..u0.len())
            .map(|i| comb(&u0[i], &k1.du[i], &k2.du[i], &k3.du[i], &k4.du[i]))
            .collect(),
    );
    EulerState {
        rho,
        u,
        s: state.s + ds,
    }
}

/// Time-step caps: advective CFL for the transport part plus an acoustic
/// cap because pressure re-enters through the split.
pub fn step_caps(state: &EulerState, config: &SolverConfig) -> (f64, f64) {
    let dx = config.grid.dx();
    let n = state.rho.grid().len();
    let mut vmax: f64 = 0.0;
    let mut pmax: f64 = 0.0;
    for x in 0..n {
        let r = state.rho.values()[x];
        let speed_sq: f64 = state
            .u
            .comps()
            .iter()
            .map(|c| (c.values()[x] / r).powi(2))
            .sum();
        vmax = vmax.max(speed_sq.sqrt());
        pmax = pmax.max(config.law.p_prime(r));
    }
    let cap_adv = if vmax > 0.0 {
        config.cfl * dx / vmax
    } else {
        f64::INFINITY
    };
    let cap_ac = config.cfl * config.tau * dx / pmax.sqrt();
    (cap_adv, cap_ac)
}

fn post_step_checks(state: &EulerState) -> Result<()> {
    for (idx, &v) in state.rho.values().iter().enumerate() {
        if !v.is_finite() {
            return Err(CoreError::Solver {
                s: state.s,
                message: format!("non-finite density at grid point {idx}"),
            });
        }
        if v <= VACUUM_GUARD {
            return Err(CoreError::Solver {
                s: state.s,
                message: format!("vacuum breach at grid point {idx} (rho={v:.3e})"),
            });
        }
    }
    for c in state.u.comps() {
        if c.values().iter().any(|v| !v.is_finite()) {
            return Err(CoreError::Solver {
                s: state.s,
                message: "non-finite momentum".into(),
            });
        }
    }
    Ok(())
}

/// One Strang step `S(ds/2) T(ds) S(ds/2)`; errors if `ds` exceeds the caps.
pub fn step(state: &EulerState, ds: f64, config: &SolverConfig) -> Result<EulerState> {
    let (cap_adv, cap_ac) = step_caps(state, config);
    let cap = cap_adv.min(cap_ac);
    if ds > cap * (1.0 + 1e-9) {
        return Err(CoreError::Solver {
            s: state.s,
            message: format!("step {ds:.3e} exceeds the CFL cap {cap:.3e}"),
        });
    }
    let half = relaxation_substep(state, ds / 2.0, config);
    let moved = transport_step(&half, ds);
    let full = relaxation_substep(&moved, ds / 2.0, config);
    post_step_checks(&full)?;
    Ok(full)
}

/// Undamped variant of [`step`] (pressure kept, relaxation source off);
/// integrates the conservative system whose relative entropy is constant.
pub fn step_undamped(state: &EulerState, ds: f64, config: &SolverConfig) -> Result<EulerState> {
    let half = pressure_substep(state, ds / 2.0, config);
    let moved = transport_step(&half, ds);
    let full = pressure_substep(&moved, ds / 2.0, config);
    post_step_checks(&full)?;
    Ok(full)
}

struct DiagnosticsAccumulator {
    eta0: f64,
    dissipation: f64,
    blowup: f64,
    last_s: f64,
    last_diss_rate: f64,
    last_grad_w_inf: f64,
}

impl DiagnosticsAccumulator {
    fn measure(state: &EulerState, config: &SolverConfig) -> Result<(f64, f64, f64, f64, f64)> {
        let n = state.rho.grid().len();
        let cell = state.rho.grid().cell_volume();
        let mass = state.total_mass();
        let m = state.momentum(config.tau);
        let ef = entropy_and_flux(&state.rho, &m, config.law, config.rho_bar)?;
        let eta_int = ef.eta_rel.values().iter().sum::<f64>() * cell;
        // D(s) = int |u|^2 / rho dx
        let mut diss_rate = 0.0;
        for x in 0..n {
            let usq: f64 = state.u.comps().iter().map(|c| c.values()[x].powi(2)).sum();
            diss_rate += usq / state.rho.values()[x];
        }
        diss_rate *= cell;
        let w = state.entropy_state(config.law, config.tau, config.rho_bar)?;
        let w_bar = w.w_bar();
        let mut sup_w: f64 = 0.0;
        for x in 0..n {
            let mut sq = (w.w1.values()[x] - w_bar).powi(2);
            for c in w.w2.comps() {
                sq += c.values()[x].powi(2);
            }
            sup_w = sup_w.max(sq.sqrt());
        }
        let mut grads = vec![w.w1.gradient()];
        for c in w.w2.comps() {
            grads.push(c.gradient());
        }
        let mut sup_grad: f64 = 0.0;
        for x in 0..n {
            let sq: f64 = grads
                .iter()
                .flat_map(|g| g.comps())
                .map(|c| c.values()[x].powi(2))
                .sum();
            sup_grad = sup_grad.max(sq.sqrt());
        }
        Ok((mass, eta_int, diss_rate, sup_w, sup_grad))
    }

    fn record(&mut self, state: &EulerState, config: &SolverConfig) -> Result<DiagnosticsRecord> {
        let (mass, eta_int, diss_rate, sup_w, sup_grad) = Self::measure(state, config)?;
        let ds = state.s - self.last_s;
        if ds > 0.0 {
            self.dissipation += 0.5 * ds * (self.last_diss_rate + diss_rate);
            self.blowup += 0.5 * ds * (self.last_grad_w_inf + sup_grad);
        }
        self.last_s = state.s;
        self.last_diss_rate = diss_rate;
        self.last_grad_w_inf = sup_grad;
        let balance = (eta_int - self.eta0 + self.dissipation).abs()
            / self.eta0.max(self.dissipation).max(1e-300);
        Ok(DiagnosticsRecord {
            s: state.s,
            mass,
            rel_entropy: eta_int,
            dissipation: self.dissipation,
            balance_residual: balance,
            sup_w,
            sup_grad_w: sup_grad,
            blowup_integral: self.blowup,
        })
    }
}

/// Integrate to `s_end`, storing snapshots at the requested times and
/// per-step diagnostics. Step failures return the partial trajectory with
/// a failure marker.
pub fn solve(config: &SolverConfig) -> Result<EulerRun> {
    config.validate()?;
    let mut targets: Vec<f64> = config
        .snapshot_times
        .iter()
        .copied()
        .chain([0.0, config.s_end])
        .collect();
    targets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    targets.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let mut state = initialize(config)?;
    let mut run = EulerRun {
        tau: config.tau,
        law: config.law,
        rho_bar: config.rho_bar,
        times: vec![0.0],
        states: vec![state.clone()],
        diagnostics: Vec::new(),
        caps: Vec::new(),
        failure: None,
    };
    let (_, eta0, d0, _, g0) = DiagnosticsAccumulator::measure(&state, config)?;
    let mut acc = DiagnosticsAccumulator {
        eta0,
        dissipation: 0.0,
        blowup: 0.0,
        last_s: 0.0,
        last_diss_rate: d0,
        last_grad_w_inf: g0,
    };
    run.diagnostics.push(acc.record(&state, config)?);

    'outer: for w in targets.windows(2) {
        let (s0, s1) = (w[0], w[1]);
        if s1 - s0 < 1e-14 {
            continue;
        }
        let (cap_adv, cap_ac) = step_caps(&state, config);
        let cap = cap_adv.min(cap_ac);
        let n_steps = ((s1 - s0) / cap).ceil().max(1.0) as usize;
        let ds = (s1 - s0) / n_steps as f64;
        run.caps.push(StepCaps {
            s: s0,
            cap_advective: cap_adv,
            cap_acoustic: cap_ac,
            ds,
            n_steps,
        });
        for i in 0..n_steps {
            match step(&state, ds, config) {
                Ok(mut next) => {
                    // pin the time stamp to the segment grid
                    next.s = s0 + (i + 1) as f64 * ds;
                    state = next;
                    run.diagnostics.push(acc.record(&state, config)?);
                }
                Err(e) => {
                    run.failure = Some(e.to_string());
                    break 'outer;
                }
            }
        }
        run.times.push(state.s);
        run.states.push(state.clone());
    }
    Ok(run)
}

/// The three functionals of the energy method, all norms taken in the
/// solver's evolution time.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EnergyFunctionals {
    /// `E = ||W - W̄||` in tilde-L^inf(B^sigma_{2,r})
    pub e: f64,
    /// `E(0) = ||W(0) - W̄||_{B^sigma_{2,r}}`
    pub e0: f64,
    /// `tau^{-1/2} ||W2||_{tilde-L^2(B^sigma)} + tau^{1/2} ||grad W||_{tilde-L^2(B^{sigma-1})}`
    pub d_tau: f64,
    /// `S = sup_s (||W||_inf + ||grad W||_inf)`
    pub s_sup: f64,
}

/// Evaluate `E`, `D_tau`, `S` on a finished run. Multi-component norms are
/// the sums of the component norms.
pub fn energy_functionals(
    part: &DyadicPartition,
    run: &EulerRun,
    sigma: f64,
    r: f64,
) -> Result<EnergyFunctionals> {
    let w_snaps = run.w_snapshots()?;
    let grid = run.states[0].rho.grid().clone();
    let w_bar = ScalarField::constant(grid.clone(), w_snaps[0].w_bar());
    let dim = grid.dim();

    let w1_pert: Vec<ScalarField> = w_snaps.iter().map(|w| w.w1.sub(&w_bar)).collect();
    let w2: Vec<Vec<ScalarField>> = (0..dim)
        .map(|j| w_snaps.iter().map(|w| w.w2.comp(j).clone()).collect())
        .collect();

    let single = run.times.len() < 2;
    let mk = |fields: Vec<ScalarField>| run.component_trajectory(fields);

    // E: tilde-L^inf over (W1 - w_bar, W2)
    let mut e = chemin_lerner_norm(
        part,
        &mk(w1_pert.clone())?,
        TimeExp::Inf,
        sigma,
        Lp::Two,
        r,
        false,
    )?
    .value;
    for comp in &w2 {
        e += chemin_lerner_norm(part, &mk(comp.clone())?, TimeExp::Inf, sigma, Lp::Two, r, false)?
            .value;
    }

    // E(0)
    let mut e0 = besov_norm(part, &w1_pert[0], sigma, Lp::Two, r, false)?.value;
    for comp in &w2 {
        e0 += besov_norm(part, &comp[0], sigma, Lp::Two, r, false)?.value;
    }

    // D_tau (needs a time interval)
    let d_tau = if single {
        0.0
    } else {
        let mut d1 = 0.0;
        for comp in &w2 {
            d1 += chemin_lerner_norm(part, &mk(comp.clone())?, TimeExp::Two, sigma, Lp::Two, r, false)?
                .value;
        }
        let mut d2 = 0.0;
        let mut all_comps: Vec<&Vec<ScalarField>> = vec![&w1_pert];
        all_comps.extend(w2.iter());
        for comp in all_comps {
            for axis in 0..dim {
                let grads: Vec<ScalarField> = comp.iter().map(|f| f.derivative(axis)).collect();
                d2 += chemin_lerner_norm(
                    part,
                    &mk(grads)?,
                    TimeExp::Two,
                    sigma - 1.0,
                    Lp::Two,
                    r,
                    false,
                )?
                .value;
            }
        }
        d1 / run.tau.sqrt() + run.tau.sqrt() * d2
    };

    // S: pointwise Euclidean sups of W and grad W
    let mut s_sup: f64 = 0.0;
    for w in &w_snaps {
        let n = grid.len();
        let mut sup_w: f64 = 0.0;
        for x in 0..n {
            let mut sq = w.w1.values()[x].powi(2);
            for c in w.w2.comps() {
                sq += c.values()[x].powi(2);
            }
            sup_w = sup_w.max(sq.sqrt());
        }
        let mut grads = vec![w.w1.gradient()];
        for c in w.w2.comps() {
            grads.push(c.gradient());
        }
        let mut sup_g: f64 = 0.0;
        for x in 0..n {
            let sq: f64 = grads
                .iter()
                .flat_map(|g| g.comps())
                .map(|c| c.values()[x].powi(2))
                .sum();
            sup_g = sup_g.max(sq.sqrt());
        }
        s_sup = s_sup.max(sup_w + sup_g);
    }

    Ok(EnergyFunctionals { e, e0, d_tau, s_sup })
}
