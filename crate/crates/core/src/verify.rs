//! Claim verification. Each claim runs one measurement from an
//! [`ExperimentConfig`] and compares it against fixed thresholds.
//!
//! Verdicts contain only numbers derived from the configuration and seeds (no
//! timings, no timestamps), so identical inputs give byte-identical reports.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::checks::{minimisation_check, orthogonality_check};
use crate::analysis::laws::{sample_immediate_phase, second_moment_bound, variance_law, MIN_PATHS};
use crate::analysis::scaling::scaling_study;
use crate::analysis::spectral::{contraction_check, random_test_vectors, spectral_gap_with, GapInequality};
use crate::analysis::stats::linear_fit;
use crate::config::ExperimentConfig;
use crate::dynamics::{run_path, track_front, OutputSpec};
use crate::error::{Error, Result};
use crate::noise::PathSeed;
use crate::operator::{kernel_residuals, FrozenOperator};
use crate::wave_profile::{nagumo_profile, solve_profile_bvp, BvpOptions, WaveProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Claim {
    Speed,
    Kernel,
    Contraction,
    Scaling,
    Variance,
    Moment,
    Ortho,
    Minimise,
    Relaxation,
}

impl Claim {
    pub const ALL: [Claim; 9] = [
        Claim::Speed,
        Claim::Kernel,
        Claim::Contraction,
        Claim::Scaling,
        Claim::Variance,
        Claim::Moment,
        Claim::Ortho,
        Claim::Minimise,
        Claim::Relaxation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Claim::Speed => "speed",
            Claim::Kernel => "kernel",
            Claim::Contraction => "contraction",
            Claim::Scaling => "scaling",
            Claim::Variance => "variance",
            Claim::Moment => "moment",
            Claim::Ortho => "ortho",
            Claim::Minimise => "minimise",
            Claim::Relaxation => "relaxation",
        }
    }

    /// The statement a claim checks.
    pub fn anchor(self) -> &'static str {
        match self {
            Claim::Speed => "the deterministic front propagates with speed c",
            Claim::Kernel => "the frozen-wave operator annihilates v̂_x and its adjoint annihilates Ψ",
            Claim::Contraction => "the frozen-wave semigroup contracts at rate κ on the ρ-orthogonal complement of v̂_x",
            Claim::Scaling => "v = v̂(·+ct+εC₀^m) + εu₀^m + εr^m with ‖εr^m‖ = O(ε^{2−2q}); same order for (C₀, u₀)",
            Claim::Variance => "Var C₀(t) grows like ∫⟨Ψ(·+cs), QΨ(·+cs)⟩ds",
            Claim::Moment => "E‖u₀^#(t)‖²_ρ ≤ 2e^{−2κt}‖η‖_ρ + (‖√Q‖²_HS/κ)(1 − e^{−2κt})",
            Claim::Ortho => "⟨u₀(t), v̂_x(·+ct)⟩_{ρ_t} = 0",
            Claim::Minimise => "a ↦ ‖v(t) − v̂(·+ct+εa)‖_{ρ_t} is locally minimal to order ε at a = C₀(t)",
            Claim::Relaxation => "sup_{δ≤t≤T} |C₀^m − C₀| → 0 as m → ∞",
        }
    }
}

impl fmt::Display for Claim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Claim {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Claim::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownClaim(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    InsufficientPower,
}

/// One thresholded measurement: passes when `lower ≤ measured ≤ upper`.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub passed: bool,
}

impl Check {
    pub fn within(name: &str, measured: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let passed = measured.is_finite()
            && lower.is_none_or(|l| measured >= l)
            && upper.is_none_or(|u| measured <= u);
        Self { name: name.into(), measured, lower, upper, passed }
    }

    pub fn at_most(name: &str, measured: f64, upper: f64) -> Self {
        Self::within(name, measured, None, Some(upper))
    }

    pub fn at_least(name: &str, measured: f64, lower: f64) -> Self {
        Self::within(name, measured, Some(lower), None)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub claim: Claim,
    pub anchor: &'static str,
    pub status: Status,
    pub checks: Vec<Check>,
    pub details: Value,
    pub config_hash: String,
    pub master_seed: u64,
    pub n_paths: usize,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

struct Outcome {
    checks: Vec<Check>,
    details: Value,
    underpowered: bool,
}

/// Runs `claim` against `cfg`.
pub fn verify(cfg: &ExperimentConfig, claim: Claim) -> Result<Verdict> {
    let out = match claim {
        Claim::Speed => speed(cfg)?,
        Claim::Kernel => kernel(cfg)?,
        Claim::Contraction => contraction(cfg)?,
        Claim::Scaling => scaling(cfg)?,
        Claim::Variance => variance(cfg)?,
        Claim::Moment => moment(cfg)?,
        Claim::Ortho => ortho(cfg)?,
        Claim::Minimise => minimise(cfg)?,
        Claim::Relaxation => relaxation(cfg)?,
    };
    let status = if out.underpowered {
        Status::InsufficientPower
    } else if out.checks.iter().all(|c| c.passed) {
        Status::Pass
    } else {
        Status::Fail
    };
    Ok(Verdict {
        claim,
        anchor: claim.anchor(),
        status,
        checks: out.checks,
        details: out.details,
        config_hash: cfg.hash(),
        master_seed: cfg.sweep.master_seed,
        n_paths: cfg.sweep.n_paths,
    })
}

fn every(n_steps: usize, cadence: usize) -> usize {
    (n_steps / cadence.max(1)).max(1)
}

fn speed(cfg: &ExperimentConfig) -> Result<Outcome> {
    let profile = cfg.build_profile()?;
    let r = &cfg.run;
    let n_steps = (r.t_final / r.dt).round() as usize;
    let track = track_front(&profile, r.dt, r.t_final, every(n_steps, cfg.outputs.cadence))?;
    // Skip the first tenth, where the discrete profile settles onto the discrete wave.
    let (t, x): (Vec<f64>, Vec<f64>) = track.iter().filter(|(t, _)| *t >= 0.1 * r.t_final).copied().unzip();
    let measured = -linear_fit(&t, &x).1;
    let c = profile.c();
    let check = if c.abs() > 1e-12 {
        Check::at_most("relative_speed_error", (measured - c).abs() / c.abs(), 0.01)
    } else {
        Check::at_most("absolute_speed", measured.abs(), 5e-3)
    };
    Ok(Outcome {
        checks: vec![check],
        details: json!({ "c": c, "measured_speed": measured, "front": track }),
        underpowered: false,
    })
}

fn profile_on(cfg: &ExperimentConfig, grid: &crate::grid::SpatialGrid) -> Result<WaveProfile> {
    let m = &cfg.model;
    match &m.polynomial {
        None => nagumo_profile(m.nu, m.b, m.a, grid),
        Some(_) => solve_profile_bvp(&cfg.reaction()?, m.nu, m.b, grid, BvpOptions::default()),
    }
}

fn kernel(cfg: &ExperimentConfig) -> Result<Outcome> {
    let coarse = cfg.build_profile()?;
    let fine = profile_on(cfg, &coarse.grid().refined())?;
    let (k0, a0) = kernel_residuals(&coarse)?;
    let (k1, a1) = kernel_residuals(&fine)?;
    let band = (Some(3.2), Some(4.8));
    Ok(Outcome {
        checks: vec![
            Check::within("kernel_ratio", k0 / k1, band.0, band.1),
            Check::within("adjoint_ratio", a0 / a1, band.0, band.1),
        ],
        details: json!({
            "dx": [coarse.grid().dx(), fine.grid().dx()],
            "kernel_residual": [k0, k1],
            "adjoint_residual": [a0, a1],
        }),
        underpowered: false,
    })
}

fn contraction(cfg: &ExperimentConfig) -> Result<Outcome> {
    let profile = cfg.build_profile()?;
    let seed = cfg.sweep.master_seed;
    let gap = spectral_gap_with(&profile, 1000, seed)?;
    // Independent test vectors for the certificate.
    let op = FrozenOperator::new(&profile)?;
    let ineq = GapInequality::new(&op, &profile);
    let violations = random_test_vectors(&profile, 1000, seed.wrapping_add(1))
        .iter()
        .filter(|u| {
            let (quad, norm, along) = ineq.terms(u);
            let rhs = -gap.kappa_hat * norm + gap.c_star_hat * along * along;
            quad > rhs + 1e-12 * (norm + along * along)
        })
        .count();
    let r = &cfg.run;
    let mut worst: f64 = 0.0;
    let mut rates = Vec::new();
    let mut first_violation = None;
    for u in random_test_vectors(&profile, 10, seed.wrapping_add(2)) {
        let rep = contraction_check(&profile, &gap, &u, r.dt, r.t_final, cfg.outputs.cadence, 0.05)?;
        worst = worst.max(rep.worst_bound_ratio);
        rates.push(rep.fitted_rate);
        first_violation = first_violation.or(rep.first_violation);
    }
    Ok(Outcome {
        checks: vec![
            Check::at_least("kappa_hat", gap.kappa_hat, f64::MIN_POSITIVE),
            Check::at_most("worst_decay_ratio", worst, 1.05),
            Check::at_most("certificate_violations", violations as f64, 0.0),
        ],
        details: json!({
            "gap": gap,
            "fitted_rates": rates,
            "first_violation": first_violation,
        }),
        underpowered: false,
    })
}

fn scaling(cfg: &ExperimentConfig) -> Result<Outcome> {
    let s = cfg.setup()?;
    let params = cfg.model_params(&s.profile)?;
    let rep = scaling_study(
        &s.profile,
        &s.noise,
        &params,
        &cfg.sweep.epsilons,
        &cfg.sweep.seeds(),
        cfg.outputs.cadence,
    )?;
    let primary = &rep.finite_m[0];
    let theory = 2.0 - 2.0 * params.q_exp;
    let fr = &primary.stop_fractions;
    let max_increase = fr.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let mut checks = vec![
        Check::at_least("median_slope", primary.median_slope, theory - 0.2),
        Check::at_most("stop_fraction_increase", max_increase, 0.0),
        Check::at_most("stop_fraction_smallest_eps", *fr.last().unwrap_or(&1.0), 0.05),
    ];
    // Limit decomposition against the fastest-relaxing branch (m = 1000 by default).
    let (k, _) = rep
        .m_values
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, &m)| if m > acc.1 { (i, m) } else { acc });
    checks.push(Check::at_most(
        "limit_slope_gap",
        (rep.immediate.median_slope - rep.finite_m[k].median_slope).abs(),
        0.1,
    ));
    Ok(Outcome {
        checks,
        details: json!({
            "theory_slope": theory,
            "limit_branch_m": rep.m_values[k],
            "report": rep,
        }),
        underpowered: false,
    })
}

fn variance(cfg: &ExperimentConfig) -> Result<Outcome> {
    let s = cfg.setup()?;
    let r = &cfg.run;
    let eta = r.eta.sample(&s.profile);
    let n_steps = (r.t_final / r.dt).round() as usize;
    let ens = sample_immediate_phase(
        &s.profile,
        &s.noise,
        Some(&eta),
        r.dt,
        r.t_final,
        every(n_steps, cfg.outputs.cadence),
        cfg.sweep.seeds(),
    )?;
    let rep = variance_law(&ens)?;
    Ok(Outcome {
        checks: vec![Check::at_most("slope_z_score", rep.z_score.abs(), 3.0)],
        underpowered: !rep.sufficient_power,
        details: json!({ "min_paths": MIN_PATHS, "report": rep }),
    })
}

fn moment(cfg: &ExperimentConfig) -> Result<Outcome> {
    let s = cfg.setup()?;
    let gap = spectral_gap_with(&s.profile, 1000, cfg.sweep.master_seed)?;
    let r = &cfg.run;
    let eta = r.eta.sample(&s.profile);
    let n_steps = (r.t_final / r.dt).round() as usize;
    let rep = second_moment_bound(
        &s.profile,
        &s.noise,
        gap.kappa_hat,
        &eta,
        r.dt,
        r.t_final,
        every(n_steps, cfg.outputs.cadence),
        cfg.sweep.seeds(),
    )?;
    Ok(Outcome {
        checks: vec![Check::at_most("worst_excess_over_bound", rep.worst_excess, 0.0)],
        underpowered: rep.n_paths < MIN_PATHS,
        details: json!({ "min_paths": MIN_PATHS, "report": rep }),
    })
}

fn ortho(cfg: &ExperimentConfig) -> Result<Outcome> {
    let s = cfg.setup()?;
    let seed = PathSeed::new(cfg.sweep.master_seed, 0);
    let mut params = cfg.model_params(&s.profile)?;
    params.track_phase = false;
    let n = params.n_steps();
    let traj = run_path(&params, &s.profile, &s.noise, seed, OutputSpec::evenly(n, cfg.outputs.cadence, true))?;
    let maintained = orthogonality_check(&traj, &s.profile)?;
    // Sensitivity: without maintenance the drift is first order in dt. Both runs
    // share the base increments of the finer step.
    let mut drift = Vec::new();
    for (dt, agg) in [(params.dt, 2 * params.noise_aggregate), (params.dt / 2.0, params.noise_aggregate)] {
        let mut p = params.clone();
        p.reproject_u0 = false;
        p.dt = dt;
        p.noise_aggregate = agg;
        let n = p.n_steps();
        let t = run_path(&p, &s.profile, &s.noise, seed, OutputSpec::evenly(n, cfg.outputs.cadence, true))?;
        drift.push(orthogonality_check(&t, &s.profile)?.max_relative);
    }
    Ok(Outcome {
        checks: vec![
            Check::at_most("max_relative_pairing", maintained.max_relative, 1e-8),
            Check::within("unmaintained_drift_ratio", drift[0] / drift[1], Some(1.6), Some(2.4)),
        ],
        details: json!({
            "reproject_u0": params.reproject_u0,
            "maintained": maintained,
            "unmaintained_drift": { "dt": [params.dt, params.dt / 2.0], "max_relative": drift },
        }),
        underpowered: false,
    })
}

fn minimise(cfg: &ExperimentConfig) -> Result<Outcome> {
    let s = cfg.setup()?;
    let seed = PathSeed::new(cfg.sweep.master_seed, 0);
    let base = cfg.model_params(&s.profile)?;
    let mut points = Vec::new();
    let mut stopped = 0usize;
    for &eps in &cfg.sweep.epsilons {
        let mut p = base.clone();
        p.epsilon = eps;
        p.track_phase = false;
        p.extra_m.clear();
        let n = p.n_steps();
        let traj = run_path(&p, &s.profile, &s.noise, seed, OutputSpec::evenly(n, 1, true))?;
        if traj.stopped_immediate() {
            stopped += 1;
        }
        let last = traj.snapshots.last().expect("final snapshot");
        points.push(minimisation_check(last, &s.profile, eps, 1e-3)?);
    }
    let firsts: Vec<f64> = points.iter().map(|p| p.first_over_eps2.abs()).collect();
    // Largest ratio |d₁(ε_{k+1})| / |d₁(ε_k)| along the decreasing sweep; < 1 ⇔ strictly decreasing.
    let worst_ratio = firsts.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    let last = points.last().expect("at least one epsilon");
    Ok(Outcome {
        checks: vec![
            Check::at_most("paths_stopped_before_t", stopped as f64, 0.0),
            Check::within("first_derivative_decrease_ratio", worst_ratio, None, Some(1.0 - 1e-12)),
            Check::at_most(
                "second_derivative_relative_error",
                (last.second_over_eps2 / last.reference - 1.0).abs(),
                0.10,
            ),
        ],
        details: json!({ "points": points }),
        underpowered: false,
    })
}

fn relaxation(cfg: &ExperimentConfig) -> Result<Outcome> {
    let s = cfg.setup()?;
    let mut params = cfg.model_params(&s.profile)?;
    params.track_phase = false;
    let n = params.n_steps();
    let seed = PathSeed::new(cfg.sweep.master_seed, 0);
    let traj = run_path(&params, &s.profile, &s.noise, seed, OutputSpec::evenly(n, cfg.outputs.cadence, false))?;
    let delta = cfg.run.delta;
    let window = || traj.snapshots.iter().filter(|s| s.t >= delta - 1e-12);
    let c0_sup = traj.snapshots.iter().map(|s| s.c0.abs()).fold(0.0, f64::max);
    let m_values = params.m_values();
    let mut order: Vec<usize> = (0..m_values.len()).collect();
    order.sort_by(|&i, &j| m_values[i].total_cmp(&m_values[j]));
    let sups: Vec<f64> = order
        .iter()
        .map(|&k| window().map(|s| (s.branches[k].c0m_int - s.c0).abs()).fold(0.0, f64::max))
        .collect();
    let worst_ratio = sups.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    let last = *sups.last().expect("at least one relaxation rate");
    Ok(Outcome {
        checks: vec![
            Check::within("sup_gap_decrease_ratio", worst_ratio, None, Some(1.0 - 1e-12)),
            Check::at_most("largest_m_gap_over_sup_c0", last / c0_sup, 0.05),
        ],
        details: json!({
            "m": order.iter().map(|&k| m_values[k]).collect::<Vec<_>>(),
            "sup_gap": sups,
            "sup_c0": c0_sup,
            "delta": delta,
        }),
        underpowered: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn claim_names_round_trip() {
        for c in Claim::ALL {
            assert_eq!(c.name().parse::<Claim>().unwrap(), c);
        }
        assert!(matches!("nonsense".parse::<Claim>(), Err(Error::UnknownClaim(_))));
    }

    #[test]
    fn check_bounds() {
        assert!(Check::within("x", 4.0, Some(3.2), Some(4.8)).passed);
        assert!(!Check::within("x", 5.0, Some(3.2), Some(4.8)).passed);
        assert!(!Check::at_most("x", f64::NAN, 1.0).passed);
    }
}
