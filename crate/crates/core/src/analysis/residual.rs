//! Residuals of the multiscale decomposition
//! `v(t) = v̂(·+ct+εC(t)) + εu_fl(t) + εr(t)` for `(C, u_fl) = (C₀^m, u₀^m)` or `(C₀, u₀)`.

use serde::Serialize;

use crate::analysis::norms::WeightedNormKit;
use crate::dynamics::PathTrajectory;
use crate::error::{Error, Result};
use crate::wave_profile::WaveProfile;

/// Which first-order pair to subtract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Decomposition {
    /// `(C₀^m, u₀^m)` of the given branch.
    FiniteM(usize),
    /// `(C₀, u₀)`.
    Immediate,
}

/// `‖ε r(t)‖_{H¹(1+ρ_t)}` at one output time.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ResidualPoint {
    pub t: f64,
    pub scaled_norm: f64,
}

/// `ε r(t)` on the grid.
pub fn scaled_residual(
    profile: &WaveProfile,
    epsilon: f64,
    t: f64,
    u: &[f64],
    phase: f64,
    fluctuation: &[f64],
) -> Result<Vec<f64>> {
    let s = profile.c() * t;
    let mut out = vec![0.0; u.len()];
    profile.shift_difference_into(s, s + epsilon * phase, &mut out)?;
    for ((o, &ui), &fi) in out.iter_mut().zip(u).zip(fluctuation) {
        *o += ui - epsilon * fi;
    }
    Ok(out)
}

fn residual_series(
    traj: &PathTrajectory,
    profile: &WaveProfile,
    epsilon: f64,
    which: Decomposition,
) -> Result<Vec<ResidualPoint>> {
    if !(epsilon > 0.0) {
        return Err(Error::param("epsilon", "residuals need ε > 0"));
    }
    let kit = WeightedNormKit::new(profile);
    traj.snapshots
        .iter()
        .map(|snap| {
            let fields = snap
                .fields
                .as_ref()
                .ok_or_else(|| Error::param("outputs", "trajectory has no field snapshots"))?;
            let (phase, fl) = match which {
                Decomposition::FiniteM(k) => (snap.branches[k].c0m_int, &fields.u0m[k]),
                Decomposition::Immediate => (snap.c0, &fields.u0),
            };
            let r = scaled_residual(profile, epsilon, snap.t, &fields.u, phase, fl)?;
            Ok(ResidualPoint {
                t: snap.t,
                scaled_norm: kit.h1(&r, profile.c() * snap.t),
            })
        })
        .collect()
}

/// `‖ε r^m(t)‖_{H¹(1+ρ_t)}` at each snapshot (divide by `ε` for `‖r^m‖`).
pub fn residual_finite_m(
    traj: &PathTrajectory,
    profile: &WaveProfile,
    epsilon: f64,
    branch: usize,
) -> Result<Vec<ResidualPoint>> {
    residual_series(traj, profile, epsilon, Decomposition::FiniteM(branch))
}

/// `‖ε r(t)‖_{H¹(1+ρ_t)}` for the immediate-relaxation pair `(C₀, u₀)`.
pub fn residual_immediate(
    traj: &PathTrajectory,
    profile: &WaveProfile,
    epsilon: f64,
) -> Result<Vec<ResidualPoint>> {
    residual_series(traj, profile, epsilon, Decomposition::Immediate)
}

pub fn sup_norm(series: &[ResidualPoint]) -> f64 {
    series.iter().map(|p| p.scaled_norm).fold(0.0, f64::max)
}
