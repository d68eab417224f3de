//! Coupled time stepping of one Brownian path.
//!
//! Every step draws one increment `ΔW_n` and feeds it to the full perturbation
//! `u`, the phase adaptation `C^m`, the OU speed `c₀^m` with its integral `C₀^m`,
//! the immediate-relaxation phase `C₀`, and the fluctuations `u₀^m` and `u₀`.
//! Diffusion is implicit (one shared tridiagonal factorisation), everything else
//! is explicit at the left endpoint.

use serde::Serialize;

use crate::analysis::norms::WeightedNormKit;
use crate::error::{Error, Result};
use crate::noise::{dot_trapezoid, IncrementStream, NoiseModel, PathSeed};
use crate::operator::FrozenOperator;
use crate::tridiag::TridiagonalLu;
use crate::wave_profile::{Frame, WaveProfile};

/// Parameters of one run. `m` is the primary relaxation rate; `extra_m` adds
/// further `(C^m, c₀^m, C₀^m, u₀^m)` branches driven by the same path.
#[derive(Debug, Clone, Serialize)]
pub struct ModelParams {
    pub nu: f64,
    pub b: f64,
    pub epsilon: f64,
    pub m: f64,
    pub t_final: f64,
    pub dt: f64,
    pub q_exp: f64,
    pub eta: Vec<f64>,
    pub extra_m: Vec<f64>,
    /// Each step sums this many base increments of length `dt / noise_aggregate`.
    pub noise_aggregate: usize,
    /// Re-project `u₀` onto the complement of `v̂_x(·+ct)` after every step.
    pub reproject_u0: bool,
    /// Integrate the phase ODE and the wave-speed diagnostic.
    pub track_phase: bool,
}

impl ModelParams {
    pub fn new(profile: &WaveProfile, epsilon: f64, m: f64, t_final: f64, dt: f64) -> Self {
        Self {
            nu: profile.nu(),
            b: profile.b(),
            epsilon,
            m,
            t_final,
            dt,
            q_exp: 0.1,
            eta: vec![0.0; profile.grid().len()],
            extra_m: Vec::new(),
            noise_aggregate: 1,
            reproject_u0: true,
            track_phase: true,
        }
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn m_values(&self) -> Vec<f64> {
        std::iter::once(self.m).chain(self.extra_m.iter().copied()).collect()
    }

    pub fn validate(&self, profile: &WaveProfile) -> Result<()> {
        let pos = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {v}")))
            }
        };
        pos("nu", self.nu)?;
        pos("b", self.b)?;
        pos("T", self.t_final)?;
        pos("dt", self.dt)?;
        for m in self.m_values() {
            pos("m", m)?;
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::param("epsilon", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.q_exp) {
            return Err(Error::param("q_exp", "must lie in [0, 1]"));
        }
        if self.noise_aggregate == 0 {
            return Err(Error::param("noise_aggregate", "must be at least 1"));
        }
        if self.nu != profile.nu() || self.b != profile.b() {
            return Err(Error::param("nu/b", "do not match the wave profile"));
        }
        let ratio = self.t_final / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::param("dt", "T must be an integer multiple of dt"));
        }
        profile.grid().check_len(&self.eta)?;
        let travel = profile.c().abs() * self.t_final;
        if travel > profile.shift_limit() {
            return Err(Error::DomainTooSmall(format!(
                "front travels {travel} but the trusted window is {}",
                profile.shift_limit()
            )));
        }
        Ok(())
    }
}

/// Running pathwise energy `sup_s ‖u(s)‖²_{1+ρ}` and `∫ ‖u(s)‖²_{H¹(1+ρ)} ds`.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct EnergyDiagnostic {
    pub sup_norm_sq: f64,
    pub integral_h1_sq: f64,
}

/// Hit times of `τ_{q,ε}` (perturbation) and `τ^∞_{q,ε}` (immediate phase).
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct StopFlags {
    pub stopped_q: Option<f64>,
    pub stopped_inf: Option<f64>,
}

/// Terms of the wave-speed SDE accumulated along the path (left-endpoint rule).
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct SpeedDiagnostic {
    pub cm_initial: f64,
    pub cm: f64,
    pub drift: f64,
    pub transport: f64,
    pub remainder: f64,
    pub noise: f64,
    pub discrepancy: f64,
    pub max_abs_discrepancy: f64,
}

impl SpeedDiagnostic {
    pub fn accumulated(&self) -> f64 {
        self.drift + self.transport + self.remainder + self.noise
    }
}

/// State of one relaxation rate `m`.
#[derive(Debug, Clone, Serialize)]
pub struct RelaxationBranch {
    pub m: f64,
    /// Phase adaptation `C^m`.
    pub cm: f64,
    /// OU speed `c₀^m`.
    pub c0m: f64,
    /// `C₀^m = ∫ c₀^m`.
    pub c0m_int: f64,
    pub u0m: Vec<f64>,
    /// Hit time of `τ^m_{q,ε}`.
    pub stopped_m: Option<f64>,
    pub speed: SpeedDiagnostic,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathState {
    pub t: f64,
    pub step: usize,
    pub u: Vec<f64>,
    pub c0: f64,
    pub u0: Vec<f64>,
    pub branches: Vec<RelaxationBranch>,
    pub energy: EnergyDiagnostic,
    pub stop: StopFlags,
}

impl PathState {
    pub fn primary(&self) -> &RelaxationBranch {
        &self.branches[0]
    }
    pub fn cm(&self) -> f64 {
        self.branches[0].cm
    }
    pub fn c0m(&self) -> f64 {
        self.branches[0].c0m
    }
    pub fn c0m_int(&self) -> f64 {
        self.branches[0].c0m_int
    }
    pub fn u0m(&self) -> &[f64] {
        &self.branches[0].u0m
    }
}

/// Scalar record of one branch at an output time.
#[derive(Debug, Clone, Serialize)]
pub struct BranchRecord {
    pub m: f64,
    pub cm: f64,
    pub c0m: f64,
    pub c0m_int: f64,
    pub speed_cm: f64,
    pub speed_discrepancy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub step: usize,
    pub c0: f64,
    pub u_h1: f64,
    pub branches: Vec<BranchRecord>,
    #[serde(skip)]
    pub fields: Option<SnapshotFields>,
}

#[derive(Debug, Clone)]
pub struct SnapshotFields {
    pub u: Vec<f64>,
    pub u0: Vec<f64>,
    pub u0m: Vec<Vec<f64>>,
}

/// Which times to record: every `every` steps (plus `t = 0` and `T`).
#[derive(Debug, Clone, Copy)]
pub struct OutputSpec {
    pub every: usize,
    pub fields: bool,
}

impl OutputSpec {
    /// Roughly `count` equally spaced outputs over `n_steps`.
    pub fn evenly(n_steps: usize, count: usize, fields: bool) -> Self {
        Self {
            every: (n_steps / count.max(1)).max(1),
            fields,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PathTrajectory {
    pub seed: PathSeed,
    pub snapshots: Vec<Snapshot>,
    pub energy: EnergyDiagnostic,
    pub stop: StopFlags,
    pub stopped_m: Vec<Option<f64>>,
    pub max_speed_discrepancy: Vec<f64>,
}

impl PathTrajectory {
    /// True if `τ_{q,ε}` or `τ^m_{q,ε}` of the primary branch fired before `T`.
    pub fn stopped_finite_m(&self) -> bool {
        self.stop.stopped_q.is_some() || self.stopped_m[0].is_some()
    }

    pub fn stopped_immediate(&self) -> bool {
        self.stop.stopped_q.is_some() || self.stop.stopped_inf.is_some()
    }
}

/// Per-run integrator holding the factorisation, frames and scratch buffers.
pub struct Stepper<'a> {
    profile: &'a WaveProfile,
    params: &'a ModelParams,
    kit: WeightedNormKit,
    lu: TridiagonalLu,
    now: Frame,
    next: Frame,
    phase: Frame,
    bfp: Vec<f64>,
    rhs: Vec<f64>,
    proj: Vec<f64>,
    eta_psi: f64,
}

fn check_finite(v: &[f64], field: &'static str, step: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::BlowUp { field, step })
    }
}

impl<'a> Stepper<'a> {
    pub fn new(profile: &'a WaveProfile, params: &'a ModelParams) -> Result<Self> {
        params.validate(profile)?;
        let g = profile.grid();
        let n = g.len();
        let lu = TridiagonalLu::implicit_diffusion(n - 2, params.nu, params.dt, g.dx());
        let now = profile.frame(0.0)?;
        let eta_psi = dot_trapezoid(g, &params.eta, profile.psi());
        Ok(Self {
            profile,
            params,
            kit: WeightedNormKit::new(profile),
            lu,
            next: now.clone(),
            phase: now.clone(),
            now,
            bfp: vec![0.0; n],
            rhs: vec![0.0; n],
            proj: vec![0.0; n],
            eta_psi,
        })
    }

    pub fn kit(&self) -> &WeightedNormKit {
        &self.kit
    }

    /// Frame `v̂(·+ct_n)`, `v̂_x(·+ct_n)`, `Ψ(·+ct_n)` of the current step.
    pub fn frame(&self) -> &Frame {
        &self.now
    }

    /// `u = εη`, `C^m = C₀^m = C₀ = 0`, `c₀^m = m⟨η,Ψ⟩`, `u₀^m = η`, `u₀ = Π₀η`.
    pub fn initial_state(&mut self) -> PathState {
        let p = self.params;
        let mut eta = p.eta.clone();
        let n = eta.len();
        eta[0] = 0.0;
        eta[n - 1] = 0.0;
        let mut u0 = eta.clone();
        project_out(&self.kit, &self.now, &mut u0);
        let branches = p
            .m_values()
            .into_iter()
            .map(|m| RelaxationBranch {
                m,
                cm: 0.0,
                c0m: m * self.eta_psi,
                c0m_int: 0.0,
                u0m: eta.clone(),
                stopped_m: None,
                speed: SpeedDiagnostic::default(),
            })
            .collect();
        let u: Vec<f64> = eta.iter().map(|v| p.epsilon * v).collect();
        let mut state = PathState {
            t: 0.0,
            step: 0,
            u,
            c0: 0.0,
            u0,
            branches,
            energy: EnergyDiagnostic::default(),
            stop: StopFlags::default(),
        };
        self.record_energy(&mut state, 0.0);
        self.check_stopping(&mut state);
        state
    }

    fn shift(&self, step: usize) -> f64 {
        self.profile.c() * step as f64 * self.params.dt
    }

    /// Semi-implicit Euler–Maruyama step of the full perturbation equation.
    pub fn step_full_spde(&mut self, state: &mut PathState, dw: &[f64]) -> Result<()> {
        let p = self.params;
        let f = self.profile.reaction();
        let n = state.u.len();
        for i in 1..n - 1 {
            self.rhs[i - 1] = state.u[i]
                + p.dt * p.b * f.increment(self.now.v[i], state.u[i])
                + p.epsilon * dw[i];
        }
        self.lu.solve_in_place(&mut self.rhs[..n - 2]);
        state.u[1..n - 1].copy_from_slice(&self.rhs[..n - 2]);
        check_finite(&state.u, "u", state.step)
    }

    /// `B(t, C) = ⟨u + v̂(·+ct) − v̂(·+ct+C), Ψ(·+ct+C)⟩`; evaluates the phase frame.
    fn phase_pairing(&mut self, u: &[f64], c: f64) -> Result<f64> {
        let s = self.now.shift;
        self.profile.frame_into(s + c, &mut self.phase)?;
        let g = self.profile.grid();
        let n = g.len();
        let mut acc = 0.0;
        for i in 0..n {
            let w = g.trapezoid_weight(i);
            acc += w * (u[i] + self.now.v[i] - self.phase.v[i]) * self.phase.psi[i];
        }
        Ok(acc)
    }

    /// Explicit Euler sub-steps of `Ċ^m = m B(t, C^m)` with `u` frozen at `t_n`.
    pub fn step_phase_ode(&mut self, state: &mut PathState, branch: usize) -> Result<()> {
        let dt = self.params.dt;
        let m = state.branches[branch].m;
        let n_sub = ((10.0 * m * dt).ceil() as usize).max(1);
        let h = dt / n_sub as f64;
        let mut c = state.branches[branch].cm;
        let u = std::mem::take(&mut state.u);
        let mut result = Ok(());
        for _ in 0..n_sub {
            match self.phase_pairing(&u, c) {
                Ok(b) => c += h * m * b,
                Err(e) => {
                    result = Err(e);
                    break;
                }
            }
        }
        state.u = u;
        result?;
        state.branches[branch].cm = c;
        Ok(())
    }

    /// Left-endpoint terms of the wave-speed SDE at `t_n`; also refreshes `c^m(t_n)`.
    pub fn wave_speed_diagnostic(
        &mut self,
        state: &mut PathState,
        branch: usize,
        dw: &[f64],
    ) -> Result<()> {
        let p = self.params;
        let b = state.branches[branch].m;
        let cm_val = state.branches[branch].cm;
        let u = std::mem::take(&mut state.u);
        let pairing = self.phase_pairing(&u, cm_val);
        let pairing = match pairing {
            Ok(v) => v,
            Err(e) => {
                state.u = u;
                return Err(e);
            }
        };
        let speed = b * pairing;
        let g = self.profile.grid();
        let f = self.profile.reaction();
        let (mut tr, mut rem, mut nz) = (0.0, 0.0, 0.0);
        for i in 0..g.len() {
            let w = g.trapezoid_weight(i);
            let um = u[i] + self.now.v[i] - self.phase.v[i];
            let vg = self.phase.v[i];
            let r = p.b * (f.increment(vg, um) - f.df(vg) * um);
            tr += w * um * self.phase.psi_x[i];
            rem += w * r * self.phase.psi[i];
            nz += w * self.phase.psi[i] * dw[i];
        }
        state.u = u;
        let d = &mut state.branches[branch].speed;
        if state.step == 0 {
            d.cm_initial = speed;
        }
        d.cm = speed;
        d.discrepancy = speed - d.cm_initial - d.accumulated();
        d.max_abs_discrepancy = d.max_abs_discrepancy.max(d.discrepancy.abs());
        d.drift += -b * speed * p.dt;
        d.transport += b * speed * tr * p.dt;
        d.remainder += b * rem * p.dt;
        d.noise += p.epsilon * b * nz;
        Ok(())
    }

    /// Exponential-integrator OU step; returns the exact step integral `ΔC₀^m`.
    pub fn step_ou_speed(&self, state: &mut PathState, branch: usize, xi: f64) -> f64 {
        let dt = self.params.dt;
        let br = &mut state.branches[branch];
        let m = br.m;
        // 1 − e^{−m dt} and (dt − (1 − e^{−m dt})/m) without cancellation.
        let one_minus = -(-m * dt).exp_m1();
        let tail = dt - one_minus / m;
        let rate = xi / dt;
        let increment = br.c0m * one_minus / m + rate * tail;
        br.c0m = (1.0 - one_minus) * br.c0m + one_minus * rate;
        br.c0m_int += increment;
        increment
    }

    /// `C₀ ← C₀ + ⟨Ψ(·+ct_n), ΔW_n⟩`, seeded with `⟨η, Ψ⟩` on the first step.
    pub fn step_immediate_phase(&self, state: &mut PathState, xi: f64) {
        if state.step == 0 {
            state.c0 += self.eta_psi;
        }
        state.c0 += xi;
    }

    /// Semi-implicit step of `u₀^m` with forcing `−ΔC₀^m v̂_x(·+ct_n)`.
    pub fn step_linearized_m(
        &mut self,
        state: &mut PathState,
        branch: usize,
        dc0m: f64,
        dw: &[f64],
    ) -> Result<()> {
        let n = dw.len();
        let dt = self.params.dt;
        let u = &mut state.branches[branch].u0m;
        for i in 1..n - 1 {
            self.rhs[i - 1] = u[i] + dt * self.bfp[i] * u[i] - dc0m * self.now.vx[i] + dw[i];
        }
        self.lu.solve_in_place(&mut self.rhs[..n - 2]);
        u[1..n - 1].copy_from_slice(&self.rhs[..n - 2]);
        check_finite(u, "u0m", state.step)
    }

    /// Semi-implicit step of `u₀` with projected noise `Π_{t_n} ΔW_n`.
    pub fn step_linearized_immediate(&mut self, state: &mut PathState, dw: &[f64]) -> Result<()> {
        let n = dw.len();
        let dt = self.params.dt;
        self.proj.copy_from_slice(dw);
        project_out(&self.kit, &self.now, &mut self.proj);
        let u = &mut state.u0;
        for i in 1..n - 1 {
            self.rhs[i - 1] = u[i] + dt * self.bfp[i] * u[i] + self.proj[i];
        }
        self.lu.solve_in_place(&mut self.rhs[..n - 2]);
        u[1..n - 1].copy_from_slice(&self.rhs[..n - 2]);
        check_finite(u, "u0", state.step)
    }

    fn record_energy(&self, state: &mut PathState, dt: f64) -> f64 {
        let sums = self.kit.sums(&state.u);
        let e = &mut state.energy;
        e.sup_norm_sq = e.sup_norm_sq.max(sums.one_plus_rho(1.0));
        e.integral_h1_sq += dt * sums.h1(1.0);
        sums.h1(self.kit.factor(self.shift(state.step))).sqrt()
    }

    /// Records stopping-time hits at the current time (no-op when `ε = 0`).
    pub fn check_stopping(&self, state: &mut PathState) {
        let p = self.params;
        if p.epsilon == 0.0 {
            return;
        }
        let shift = self.shift(state.step);
        let norm = self.kit.h1(&state.u, shift);
        let t = state.t;
        if state.stop.stopped_q.is_none() && norm >= p.epsilon.powf(1.0 - p.q_exp) {
            state.stop.stopped_q = Some(t);
        }
        let phase_bound = p.epsilon.powf(-p.q_exp);
        if state.stop.stopped_inf.is_none() && state.c0.abs() >= phase_bound {
            state.stop.stopped_inf = Some(t);
        }
        for br in &mut state.branches {
            if br.stopped_m.is_none() && br.c0m_int.abs() >= phase_bound {
                br.stopped_m = Some(t);
            }
        }
    }

    /// Advances every process by one step with the shared increment `dw`.
    pub fn step(&mut self, state: &mut PathState, dw: &[f64]) -> Result<()> {
        let n = dw.len();
        let f = self.profile.reaction();
        let b = self.params.b;
        for i in 0..n {
            self.bfp[i] = b * f.df(self.now.v[i]);
        }
        if self.params.track_phase {
            for k in 0..state.branches.len() {
                self.wave_speed_diagnostic(state, k, dw)?;
                self.step_phase_ode(state, k)?;
            }
        }
        self.step_full_spde(state, dw)?;
        let xi = dot_trapezoid(self.profile.grid(), &self.now.psi, dw);
        for k in 0..state.branches.len() {
            let dc = self.step_ou_speed(state, k, xi);
            self.step_linearized_m(state, k, dc, dw)?;
        }
        self.step_immediate_phase(state, xi);
        self.step_linearized_immediate(state, dw)?;

        state.step += 1;
        state.t = state.step as f64 * self.params.dt;
        self.profile.frame_into(self.shift(state.step), &mut self.next)?;
        std::mem::swap(&mut self.now, &mut self.next);
        if self.params.reproject_u0 {
            project_out(&self.kit, &self.now, &mut state.u0);
        }
        self.record_energy(state, self.params.dt);
        self.check_stopping(state);
        Ok(())
    }

    /// Refreshes the speed diagnostic at the current time without advancing.
    pub fn finish(&mut self, state: &mut PathState) -> Result<()> {
        if self.params.track_phase {
            let zero = vec![0.0; state.u.len()];
            for k in 0..state.branches.len() {
                let saved = state.branches[k].speed;
                self.wave_speed_diagnostic(state, k, &zero)?;
                // Keep the accumulated integrals at t_N (the call above added a zero-noise step).
                let d = &mut state.branches[k].speed;
                d.drift = saved.drift;
                d.transport = saved.transport;
                d.remainder = saved.remainder;
                d.noise = saved.noise;
            }
        }
        Ok(())
    }

    fn snapshot(&self, state: &PathState, fields: bool) -> Snapshot {
        Snapshot {
            t: state.t,
            step: state.step,
            c0: state.c0,
            u_h1: self.kit.h1(&state.u, self.shift(state.step)),
            branches: state
                .branches
                .iter()
                .map(|b| BranchRecord {
                    m: b.m,
                    cm: b.cm,
                    c0m: b.c0m,
                    c0m_int: b.c0m_int,
                    speed_cm: b.speed.cm,
                    speed_discrepancy: b.speed.discrepancy,
                })
                .collect(),
            fields: fields.then(|| SnapshotFields {
                u: state.u.clone(),
                u0: state.u0.clone(),
                u0m: state.branches.iter().map(|b| b.u0m.clone()).collect(),
            }),
        }
    }
}

/// `h ← h − (⟨h, v̂_x⟩_{ρ_t} / ⟨v̂_x, v̂_x⟩_{ρ_t}) v̂_x` for the frame's shift.
pub fn project_out(kit: &WeightedNormKit, frame: &Frame, h: &mut [f64]) {
    let g = kit.grid();
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..h.len() {
        let w = g.trapezoid_weight(i) * frame.rho[i];
        num += w * h[i] * frame.vx[i];
        den += w * frame.vx[i] * frame.vx[i];
    }
    let coef = num / den;
    for (v, x) in h.iter_mut().zip(&frame.vx) {
        *v -= coef * x;
    }
}

/// Runs one path and records snapshots.
pub fn run_path(
    params: &ModelParams,
    profile: &WaveProfile,
    noise: &NoiseModel,
    seed: PathSeed,
    outputs: OutputSpec,
) -> Result<PathTrajectory> {
    run_path_inner(params, profile, noise, seed, outputs).map_err(|e| Error::Path {
        path: seed.path_index,
        source: Box::new(e),
    })
}

fn run_path_inner(
    params: &ModelParams,
    profile: &WaveProfile,
    noise: &NoiseModel,
    seed: PathSeed,
    outputs: OutputSpec,
) -> Result<PathTrajectory> {
    if noise.grid() != profile.grid() {
        return Err(Error::GridMismatch {
            expected: profile.grid().len(),
            got: noise.grid().len(),
        });
    }
    let mut stepper = Stepper::new(profile, params)?;
    let mut stream = IncrementStream::new(noise, seed, params.dt, params.noise_aggregate)?;
    let mut state = stepper.initial_state();
    let n_steps = params.n_steps();
    let every = outputs.every.max(1);
    let mut snapshots = vec![stepper.snapshot(&state, outputs.fields)];
    let mut dw = vec![0.0; profile.grid().len()];
    for k in 0..n_steps {
        stream.next_into(&mut dw);
        stepper.step(&mut state, &dw)?;
        if (k + 1) % every == 0 || k + 1 == n_steps {
            if k + 1 == n_steps {
                stepper.finish(&mut state)?;
            }
            snapshots.push(stepper.snapshot(&state, outputs.fields));
        }
    }
    Ok(PathTrajectory {
        seed,
        snapshots,
        energy: state.energy,
        stop: state.stop,
        stopped_m: state.branches.iter().map(|b| b.stopped_m).collect(),
        max_speed_discrepancy: state
            .branches
            .iter()
            .map(|b| b.speed.max_abs_discrepancy)
            .collect(),
    })
}

/// Integrates the original equation `v_t = νv_xx + b f(v)` with `v(±L) ∈ {0, 1}`
/// from `v̂` and returns `(t, x_a(t))` where `x_a` is the level-`a` crossing.
pub fn track_front(
    profile: &WaveProfile,
    dt: f64,
    t_final: f64,
    every: usize,
) -> Result<Vec<(f64, f64)>> {
    let g = profile.grid();
    let n = g.len();
    let (nu, b) = (profile.nu(), profile.b());
    let f = profile.reaction();
    let level = f.a();
    let lu = TridiagonalLu::implicit_diffusion(n - 2, nu, dt, g.dx());
    let s = dt * nu / (g.dx() * g.dx());
    let mut v = profile.vhat().to_vec();
    v[0] = 0.0;
    v[n - 1] = 1.0;
    let n_steps = (t_final / dt).round() as usize;
    let mut rhs = vec![0.0; n - 2];
    let position = |v: &[f64]| {
        crate::wave_profile::level_crossing(g, v, level)
            .ok_or_else(|| Error::DomainTooSmall("front left the domain".into()))
    };
    let mut out = vec![(0.0, position(&v)?)];
    for k in 0..n_steps {
        for i in 1..n - 1 {
            rhs[i - 1] = v[i] + dt * b * f.f(v[i]);
        }
        rhs[n - 3] += s * v[n - 1];
        rhs[0] += s * v[0];
        lu.solve_in_place(&mut rhs);
        v[1..n - 1].copy_from_slice(&rhs);
        check_finite(&v, "v", k)?;
        if (k + 1) % every.max(1) == 0 || k + 1 == n_steps {
            out.push(((k + 1) as f64 * dt, position(&v)?));
        }
    }
    Ok(out)
}

/// Deterministic-or-noisy evolution of `u₀^#` in the frame moving with the wave:
/// `du = 𝓛^#_h u dt + Π ΔW^#` with `ΔW^#(y) = ΔW(y − cs)`, returning `‖u(t_j)‖²_ρ`
/// at `t = 0` and every `every` steps.
pub struct FrozenFrame<'a> {
    profile: &'a WaveProfile,
    noise: &'a NoiseModel,
    lu: TridiagonalLu,
    kit: WeightedNormKit,
    frame: Frame,
    dt: f64,
    sin_a: Vec<f64>,
    cos_a: Vec<f64>,
}

impl<'a> FrozenFrame<'a> {
    pub fn new(profile: &'a WaveProfile, noise: &'a NoiseModel, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::param("dt", "must be positive"));
        }
        let op = FrozenOperator::new(profile)?;
        let g = profile.grid();
        let n = g.len();
        let k = noise.modes_count();
        let norm = (1.0 / g.half_width()).sqrt();
        let mut sin_a = vec![0.0; k * n];
        let mut cos_a = vec![0.0; k * n];
        for j in 0..k {
            let w = noise.wavenumbers()[j];
            for i in 0..n {
                let arg = w * (g.x()[i] + g.half_width());
                sin_a[j * n + i] = norm * arg.sin();
                cos_a[j * n + i] = norm * arg.cos();
            }
        }
        Ok(Self {
            profile,
            noise,
            lu: op.implicit_euler(dt),
            kit: WeightedNormKit::new(profile),
            frame: profile.frame(0.0)?,
            dt,
            sin_a,
            cos_a,
        })
    }

    /// Translated increment `ΔW(y − shift)` (zero where `y − shift` leaves `[-L, L]`).
    pub fn translated_increment(&self, coeffs: &[f64], shift: f64, out: &mut [f64]) {
        let g = self.profile.grid();
        let n = g.len();
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, &beta) in coeffs.iter().enumerate() {
            let phase = self.noise.wavenumbers()[j] * shift;
            let (a, b) = (beta * phase.cos(), -beta * phase.sin());
            let s = &self.sin_a[j * n..(j + 1) * n];
            let c = &self.cos_a[j * n..(j + 1) * n];
            for i in 0..n {
                out[i] += a * s[i] + b * c[i];
            }
        }
        let l = g.half_width();
        for (o, &x) in out.iter_mut().zip(g.x()) {
            let y = x - shift;
            if !(-l..=l).contains(&y) {
                *o = 0.0;
            }
        }
        out[0] = 0.0;
        out[n - 1] = 0.0;
    }

    pub fn project(&self, h: &mut [f64]) {
        project_out(&self.kit, &self.frame, h);
    }

    pub fn rho_norm_sq(&self, h: &[f64]) -> f64 {
        self.kit.rho_sq(h, 0.0)
    }

    /// Runs one path from `Πη`.
    pub fn run(&self, eta: &[f64], seed: PathSeed, n_steps: usize, every: usize) -> Result<Vec<f64>> {
        let g = self.profile.grid();
        let n = g.len();
        g.check_len(eta)?;
        let mut u = eta.to_vec();
        u[0] = 0.0;
        u[n - 1] = 0.0;
        self.project(&mut u);
        let mut stream = IncrementStream::new(self.noise, seed, self.dt, 1)?;
        let mut dw = vec![0.0; n];
        let mut rhs = vec![0.0; n - 2];
        let mut out = vec![self.rho_norm_sq(&u)];
        let c = self.profile.c();
        for k in 0..n_steps {
            let shift = c * k as f64 * self.dt;
            let coeffs = stream.next_coefficients().to_vec();
            self.translated_increment(&coeffs, shift, &mut dw);
            self.project(&mut dw);
            for i in 1..n - 1 {
                rhs[i - 1] = u[i] + dw[i];
            }
            self.lu.solve_in_place(&mut rhs);
            u[1..n - 1].copy_from_slice(&rhs);
            self.project(&mut u);
            check_finite(&u, "u0#", k)?;
            if (k + 1) % every.max(1) == 0 || k + 1 == n_steps {
                out.push(self.rho_norm_sq(&u));
            }
        }
        Ok(out)
    }
}
