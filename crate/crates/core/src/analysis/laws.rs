//! Monte Carlo laws for the immediate-relaxation processes: the diffusive
//! variance of `C₀` and the asymptotic second-moment bound of `u₀^#`.

use serde::Serialize;

use crate::analysis::stats::{fit_through_origin, mean, CompensatedSum};
use crate::dynamics::FrozenFrame;
use crate::error::{Error, Result};
use crate::noise::{dot_trapezoid, IncrementStream, NoiseModel, PathSeed};
use crate::wave_profile::{ProfileField, WaveProfile};

/// Below this many paths a Monte Carlo verdict is reported as underpowered.
pub const MIN_PATHS: usize = 100;

/// Time grid of a sampled phase ensemble.
#[derive(Debug, Clone, Serialize)]
pub struct PhaseEnsemble {
    pub times: Vec<f64>,
    /// `paths[p][j] = C₀(t_j)` for path `p`.
    pub paths: Vec<Vec<f64>>,
    /// Exact discrete `Var C₀(t_j) = Σ_{n<N_j} dt ⟨Ψ(·+ct_n), QΨ(·+ct_n)⟩`.
    pub predicted: Vec<f64>,
    /// Static approximation `⟨Ψ, QΨ⟩`.
    pub static_rate: f64,
}

/// Samples `C₀` on the same increments as the full path system, but only through
/// the pairings `⟨Ψ(·+ct_n), e_k⟩`, which are shared by all paths.
pub fn sample_immediate_phase(
    profile: &WaveProfile,
    noise: &NoiseModel,
    eta: Option<&[f64]>,
    dt: f64,
    t_final: f64,
    every: usize,
    seeds: impl IntoIterator<Item = PathSeed>,
) -> Result<PhaseEnsemble> {
    let n_steps = (t_final / dt).round() as usize;
    if n_steps == 0 || ((n_steps as f64) * dt - t_final).abs() > 1e-9 * t_final {
        return Err(Error::param("T", "must be a positive multiple of dt"));
    }
    let every = every.max(1);
    let c = profile.c();
    let q = noise.eigenvalues();
    let mut pairings = Vec::with_capacity(n_steps);
    for n in 0..n_steps {
        let shift = c * n as f64 * dt;
        let psi = if n > 0 && c == 0.0 {
            None
        } else {
            Some(profile.shifted(ProfileField::Psi, shift)?)
        };
        match psi {
            Some(p) => pairings.push(noise.project(&p)),
            None => pairings.push(pairings[0].clone()),
        }
    }
    let initial = match eta {
        Some(e) => dot_trapezoid(profile.grid(), e, profile.psi()),
        None => 0.0,
    };
    let mut times = vec![0.0];
    let mut predicted = vec![0.0];
    let mut acc = CompensatedSum::default();
    for (n, p) in pairings.iter().enumerate() {
        acc.add(dt * p.iter().zip(q).map(|(p, q)| q * p * p).sum::<f64>());
        if (n + 1) % every == 0 || n + 1 == n_steps {
            times.push((n + 1) as f64 * dt);
            predicted.push(acc.value());
        }
    }
    let mut paths = Vec::new();
    for seed in seeds {
        let mut stream = IncrementStream::new(noise, seed, dt, 1)?;
        let mut c0 = 0.0;
        let mut series = vec![0.0];
        for (n, p) in pairings.iter().enumerate() {
            let beta = stream.next_coefficients();
            if n == 0 {
                c0 += initial;
            }
            c0 += beta.iter().zip(p).map(|(b, p)| b * p).sum::<f64>();
            if (n + 1) % every == 0 || n + 1 == n_steps {
                series.push(c0);
            }
        }
        paths.push(series);
    }
    Ok(PhaseEnsemble {
        times,
        paths,
        predicted,
        static_rate: noise.quadratic_form(profile.psi()),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct VarianceReport {
    pub n_paths: usize,
    pub times: Vec<f64>,
    pub empirical: Vec<f64>,
    pub predicted: Vec<f64>,
    /// Regression slope of the empirical variance through the origin.
    pub slope: f64,
    pub slope_se: f64,
    /// Same regression applied to the exact prediction.
    pub predicted_slope: f64,
    pub static_rate: f64,
    /// `(slope − predicted_slope)/SE`.
    pub z_score: f64,
    /// `|predicted_slope − static_rate| / static_rate`.
    pub static_gap: f64,
    pub sufficient_power: bool,
}

impl VarianceReport {
    pub fn passes(&self, n_se: f64) -> bool {
        self.sufficient_power && self.z_score.abs() <= n_se
    }
}

/// Regresses `Var C₀(t)` on `t` through the origin. The standard error uses the
/// per-path influence of the slope estimator (delta method), so correlation of
/// one path's values across times is accounted for.
pub fn variance_law(ensemble: &PhaseEnsemble) -> Result<VarianceReport> {
    let n = ensemble.paths.len();
    if n < 2 {
        return Err(Error::param("paths", "need at least two paths"));
    }
    let (t, paths) = (&ensemble.times, &ensemble.paths);
    let means: Vec<f64> = (0..t.len())
        .map(|j| mean(&paths.iter().map(|p| p[j]).collect::<Vec<_>>()))
        .collect();
    let empirical: Vec<f64> = (0..t.len())
        .map(|j| {
            let mut s = CompensatedSum::default();
            for p in paths {
                s.add((p[j] - means[j]).powi(2));
            }
            s.value() / (n - 1) as f64
        })
        .collect();
    let tt: f64 = t.iter().map(|t| t * t).sum();
    let slope = fit_through_origin(t, &empirical);
    let influence: Vec<f64> = paths
        .iter()
        .map(|p| {
            (0..t.len())
                .map(|j| t[j] * ((p[j] - means[j]).powi(2) - empirical[j]))
                .sum::<f64>()
                / tt
        })
        .collect();
    let slope_se = (crate::analysis::stats::variance(&influence) / n as f64).sqrt();
    let predicted_slope = fit_through_origin(t, &ensemble.predicted);
    Ok(VarianceReport {
        n_paths: n,
        times: t.clone(),
        empirical,
        predicted: ensemble.predicted.clone(),
        slope,
        slope_se,
        predicted_slope,
        static_rate: ensemble.static_rate,
        z_score: if slope_se > 0.0 {
            (slope - predicted_slope) / slope_se
        } else {
            0.0
        },
        static_gap: if ensemble.static_rate > 0.0 {
            (predicted_slope - ensemble.static_rate).abs() / ensemble.static_rate
        } else {
            0.0
        },
        sufficient_power: n >= MIN_PATHS,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub n_paths: usize,
    pub kappa_hat: f64,
    pub eta_rho_norm: f64,
    pub hs_rho: f64,
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    pub bound: Vec<f64>,
    /// `max_t (mean − 3SE − bound)`; non-positive means the bound holds.
    pub worst_excess: f64,
    pub plateau_mean: f64,
    pub sufficient_power: bool,
}

impl MomentReport {
    pub fn passes(&self) -> bool {
        self.worst_excess <= 0.0
    }
}

/// `2e^{−2κt}‖η‖_ρ + (‖√Q‖²_HS/κ)(1 − e^{−2κt})`.
pub fn moment_bound(t: f64, kappa: f64, eta_rho_norm: f64, hs: f64) -> f64 {
    let decay = (-2.0 * kappa * t).exp();
    2.0 * decay * eta_rho_norm + hs / kappa * (1.0 - decay)
}

/// Frozen-frame Monte Carlo of `E‖u₀^#(t)‖²_ρ` against [`moment_bound`]. The
/// Hilbert–Schmidt norm is taken in `L²(ρ)`; translating the modes to the right
/// only lowers it when `c ≥ 0`, so the untranslated value bounds every step.
pub fn second_moment_bound(
    profile: &WaveProfile,
    noise: &NoiseModel,
    kappa_hat: f64,
    eta: &[f64],
    dt: f64,
    t_final: f64,
    every: usize,
    seeds: impl IntoIterator<Item = PathSeed>,
) -> Result<MomentReport> {
    let ff = FrozenFrame::new(profile, noise, dt)?;
    let n_steps = (t_final / dt).round() as usize;
    let every = every.max(1);
    let runs: Vec<Vec<f64>> = seeds
        .into_iter()
        .map(|s| ff.run(eta, s, n_steps, every))
        .collect::<Result<_>>()?;
    let n = runs.len();
    if n < 2 {
        return Err(Error::param("paths", "need at least two paths"));
    }
    let mut times = vec![0.0];
    times.extend((1..=n_steps).filter(|k| k % every == 0 || *k == n_steps).map(|k| k as f64 * dt));
    let eta_norm = ff.rho_norm_sq(eta).sqrt();
    let hs = noise.hs_weighted(profile.rho());
    let (mut means, mut ses, mut bounds) = (vec![], vec![], vec![]);
    let mut worst = f64::NEG_INFINITY;
    for (j, &t) in times.iter().enumerate() {
        let col: Vec<f64> = runs.iter().map(|r| r[j]).collect();
        let m = mean(&col);
        let se = crate::analysis::stats::standard_error(&col);
        let b = moment_bound(t, kappa_hat, eta_norm, hs);
        worst = worst.max(m - 3.0 * se - b);
        means.push(m);
        ses.push(se);
        bounds.push(b);
    }
    let tail = means.len() - means.len() / 4;
    Ok(MomentReport {
        n_paths: n,
        kappa_hat,
        eta_rho_norm: eta_norm,
        hs_rho: hs,
        plateau_mean: mean(&means[tail..]),
        times,
        mean: means,
        se: ses,
        bound: bounds,
        worst_excess: worst,
        sufficient_power: n >= MIN_PATHS,
    })
}
