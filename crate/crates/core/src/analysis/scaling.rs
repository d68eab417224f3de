//! Seed-coupled ε-sweeps of the decomposition residuals.

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::residual::{residual_finite_m, residual_immediate, sup_norm};
use crate::analysis::stats::{linear_fit, median, quantile};
use crate::dynamics::{run_path, ModelParams, OutputSpec, PathTrajectory};
use crate::error::{Error, Result};
use crate::noise::{NoiseModel, PathSeed};
use crate::wave_profile::WaveProfile;

/// Residual statistics for one decomposition across the sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    /// `residual_norms[e][p] = sup_t ‖ε r(t)‖_{H¹(1+ρ_t)}`.
    pub residual_norms: Vec<Vec<f64>>,
    /// `stopped[e][p]`.
    pub stopped: Vec<Vec<bool>>,
    pub stop_fractions: Vec<f64>,
    /// Per-path log-log slopes over the ε values where the path was not stopped
    /// (`None` with fewer than three such values).
    pub slopes: Vec<Option<f64>>,
    pub median_slope: f64,
    pub iqr: (f64, f64),
    /// ε values at which every path stopped.
    pub unusable: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingReport {
    pub epsilons: Vec<f64>,
    pub q_exp: f64,
    pub seeds: Vec<PathSeed>,
    /// One entry per relaxation rate of the base parameters (`m`, then `extra_m`).
    pub m_values: Vec<f64>,
    pub finite_m: Vec<SlopeFit>,
    pub immediate: SlopeFit,
}

fn fit(epsilons: &[f64], norms: Vec<Vec<f64>>, stopped: Vec<Vec<bool>>) -> SlopeFit {
    let n_paths = norms.first().map_or(0, |v| v.len());
    let stop_fractions = stopped
        .iter()
        .map(|s| s.iter().filter(|&&b| b).count() as f64 / n_paths.max(1) as f64)
        .collect();
    let slopes: Vec<Option<f64>> = (0..n_paths)
        .map(|p| {
            let (x, y): (Vec<f64>, Vec<f64>) = epsilons
                .iter()
                .enumerate()
                .filter(|&(e, _)| !stopped[e][p] && norms[e][p] > 0.0)
                .map(|(e, eps)| (eps.ln(), norms[e][p].ln()))
                .unzip();
            (x.len() >= 3).then(|| linear_fit(&x, &y).1)
        })
        .collect();
    let ok: Vec<f64> = slopes.iter().flatten().copied().collect();
    let unusable = epsilons
        .iter()
        .zip(&stopped)
        .filter(|(_, s)| !s.is_empty() && s.iter().all(|&b| b))
        .map(|(e, _)| *e)
        .collect();
    SlopeFit {
        residual_norms: norms,
        stopped,
        stop_fractions,
        median_slope: if ok.is_empty() { f64::NAN } else { median(&ok) },
        iqr: if ok.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (quantile(&ok, 0.25), quantile(&ok, 0.75))
        },
        slopes,
        unusable,
    }
}

/// Runs every `(ε, seed)` pair with `base` (whose `epsilon` is overridden) and
/// fits `log sup_t ‖εr‖` against `log ε` per path.
pub fn scaling_study(
    profile: &WaveProfile,
    noise: &NoiseModel,
    base: &ModelParams,
    epsilons: &[f64],
    seeds: &[PathSeed],
    outputs: usize,
) -> Result<ScalingReport> {
    if epsilons.len() < 3 {
        return Err(Error::param("sweep.epsilons", "need at least three values"));
    }
    if epsilons.windows(2).any(|w| w[1] >= w[0]) || epsilons.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::param("sweep.epsilons", "must be positive and strictly decreasing"));
    }
    let m_values = base.m_values();
    let jobs: Vec<(usize, usize)> = (0..epsilons.len())
        .flat_map(|e| (0..seeds.len()).map(move |p| (e, p)))
        .collect();
    // Per job: (finite-m sups, stopped per branch, immediate sup, immediate stopped).
    let results: Vec<(Vec<f64>, Vec<bool>, f64, bool)> = jobs
        .par_iter()
        .map(|&(e, p)| {
            let mut params = base.clone();
            params.epsilon = epsilons[e];
            let spec = OutputSpec::evenly(params.n_steps(), outputs, true);
            let traj = run_path(&params, profile, noise, seeds[p], spec)?;
            summarise(&traj, profile, epsilons[e], m_values.len())
        })
        .collect::<Result<_>>()?;
    let grid = |f: &dyn Fn(&(Vec<f64>, Vec<bool>, f64, bool)) -> (f64, bool)| {
        let mut norms = vec![vec![0.0; seeds.len()]; epsilons.len()];
        let mut stopped = vec![vec![false; seeds.len()]; epsilons.len()];
        for (&(e, p), r) in jobs.iter().zip(&results) {
            let (v, s) = f(r);
            norms[e][p] = v;
            stopped[e][p] = s;
        }
        fit(epsilons, norms, stopped)
    };
    let finite_m = (0..m_values.len())
        .map(|k| grid(&|r| (r.0[k], r.1[k])))
        .collect();
    let immediate = grid(&|r| (r.2, r.3));
    Ok(ScalingReport {
        epsilons: epsilons.to_vec(),
        q_exp: base.q_exp,
        seeds: seeds.to_vec(),
        m_values,
        finite_m,
        immediate,
    })
}

fn summarise(
    traj: &PathTrajectory,
    profile: &WaveProfile,
    epsilon: f64,
    branches: usize,
) -> Result<(Vec<f64>, Vec<bool>, f64, bool)> {
    let mut sups = Vec::with_capacity(branches);
    let mut stops = Vec::with_capacity(branches);
    for k in 0..branches {
        sups.push(sup_norm(&residual_finite_m(traj, profile, epsilon, k)?));
        stops.push(traj.stop.stopped_q.is_some() || traj.stopped_m[k].is_some());
    }
    let imm = sup_norm(&residual_immediate(traj, profile, epsilon)?);
    Ok((sups, stops, imm, traj.stopped_immediate()))
}
