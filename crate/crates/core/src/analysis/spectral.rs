//! Spectral gap of the frozen-wave operator on the `ρ`-orthogonal complement of
//! its kernel, and deterministic contraction runs.
//!
//! Everything is done in the symmetric coordinates `w = ρ_h^{1/2} u` of
//! [`FrozenOperator`], where `‖w‖² dx = ‖u‖²_{ρ_h}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::FrozenOperator;
use crate::tridiag::SymTridiagonal;
use crate::wave_profile::WaveProfile;

#[derive(Debug, Clone, Serialize)]
pub struct SpectralGap {
    /// `κ̂ = −λ₂`.
    pub kappa_hat: f64,
    /// Top eigenvalue `λ₁` (the discrete kernel direction, `O(dx²)`).
    pub lambda_top: f64,
    pub lambda_second: f64,
    /// `λ₁ + κ̂`: certifies the inequality for every vector w.r.t. the top eigenvector.
    pub c_star_certified: f64,
    /// Smallest constant making the inequality hold on the sampled test vectors.
    pub c_star_sampled: f64,
    /// `max(c_star_certified, c_star_sampled)`.
    pub c_star_hat: f64,
    /// Rayleigh quotient of `v̂_x` itself.
    pub rayleigh_vhat_x: f64,
    pub test_vectors: usize,
    #[serde(skip)]
    pub top_vector: Vec<f64>,
    #[serde(skip)]
    pub second_vector: Vec<f64>,
}

/// Smooth random test functions: low sine modes plus a random multiple of `v̂_x`.
pub fn random_test_vectors(profile: &WaveProfile, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let g = profile.grid();
    let l = g.half_width();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let modes = rng.random_range(1..=24usize);
            let coeffs: Vec<f64> = (0..modes)
                .map(|j| rng.random_range(-1.0..1.0) / (1.0 + j as f64))
                .collect();
            let along = rng.random_range(-3.0..3.0);
            let mut u: Vec<f64> = g
                .x()
                .iter()
                .zip(profile.vhat_x())
                .map(|(&x, &vx)| {
                    let arg = std::f64::consts::PI * (x + l) / (2.0 * l);
                    coeffs
                        .iter()
                        .enumerate()
                        .map(|(j, c)| c * ((j + 1) as f64 * arg).sin())
                        .sum::<f64>()
                        * (-(x / 8.0).powi(2)).exp()
                        + along * vx
                })
                .collect();
            let n = u.len();
            u[0] = 0.0;
            u[n - 1] = 0.0;
            u
        })
        .collect()
}

/// Quantities entering `⟨𝓛^#_h u, u⟩_ρ ≤ −κ‖u‖²_ρ + C⟨v̂_x, u⟩²_ρ` in symmetric coordinates.
pub struct GapInequality<'a> {
    op: &'a FrozenOperator,
    sym: SymTridiagonal,
    kernel: Vec<f64>,
    dx: f64,
}

impl<'a> GapInequality<'a> {
    pub fn new(op: &'a FrozenOperator, profile: &WaveProfile) -> Self {
        Self {
            sym: op.symmetric(),
            kernel: op.to_symmetric(profile.vhat_x()),
            dx: profile.grid().dx(),
            op,
        }
    }

    /// `(⟨𝓛u,u⟩_ρ, ‖u‖²_ρ, ⟨v̂_x,u⟩_ρ)`.
    pub fn terms(&self, u: &[f64]) -> (f64, f64, f64) {
        let w = self.op.to_symmetric(u);
        let sw = self.sym.matvec(&w);
        let quad: f64 = sw.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() * self.dx;
        let norm: f64 = w.iter().map(|a| a * a).sum::<f64>() * self.dx;
        let along: f64 = w.iter().zip(&self.kernel).map(|(a, b)| a * b).sum::<f64>() * self.dx;
        (quad, norm, along)
    }
}

pub fn spectral_gap(profile: &WaveProfile) -> Result<SpectralGap> {
    spectral_gap_with(profile, 1000, 0x5eed)
}

pub fn spectral_gap_with(profile: &WaveProfile, samples: usize, seed: u64) -> Result<SpectralGap> {
    let op = FrozenOperator::new(profile)?;
    let sym = op.symmetric();
    let l1 = sym.eigenvalue_from_top(0);
    let l2 = sym.eigenvalue_from_top(1);
    let kappa = -l2;
    if !(kappa > 0.0) {
        return Err(Error::DomainTooSmall(format!(
            "no spectral gap: second eigenvalue {l2} is non-negative"
        )));
    }
    let top = sym.eigenvector(l1);
    let second = sym.eigenvector(l2);
    let ineq = GapInequality::new(&op, profile);
    let (q, nrm, _) = ineq.terms(profile.vhat_x());
    let mut sampled: f64 = 0.0;
    for u in random_test_vectors(profile, samples, seed) {
        let (quad, norm, along) = ineq.terms(&u);
        let excess = quad + kappa * norm;
        if excess > 0.0 {
            sampled = sampled.max(excess / (along * along));
        }
    }
    let certified = l1 + kappa;
    Ok(SpectralGap {
        kappa_hat: kappa,
        lambda_top: l1,
        lambda_second: l2,
        c_star_certified: certified,
        c_star_sampled: sampled,
        c_star_hat: certified.max(sampled),
        rayleigh_vhat_x: q / nrm,
        test_vectors: samples,
        top_vector: top,
        second_vector: second,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ContractionReport {
    pub times: Vec<f64>,
    /// `‖u(t)‖_ρ / ‖u(0)‖_ρ`.
    pub ratios: Vec<f64>,
    /// `max_t ‖u(t)‖_ρ / (e^{−κ̂t}‖u(0)‖_ρ)`.
    pub worst_bound_ratio: f64,
    pub first_violation: Option<f64>,
    /// Decay exponent fitted to `log ‖u(t)‖_ρ` over the second half of the run.
    pub fitted_rate: f64,
}

/// Implicit-Euler evolution of `u̇ = 𝓛^#_h u` projected off the kernel each step.
pub fn contraction_check(
    profile: &WaveProfile,
    gap: &SpectralGap,
    u_init: &[f64],
    dt: f64,
    t_final: f64,
    outputs: usize,
    slack: f64,
) -> Result<ContractionReport> {
    let op = FrozenOperator::new(profile)?;
    profile.grid().check_len(u_init)?;
    let phi = &gap.top_vector;
    let project = |w: &mut [f64]| {
        let c: f64 = w.iter().zip(phi).map(|(a, b)| a * b).sum();
        w.iter_mut().zip(phi).for_each(|(a, b)| *a -= c * b);
    };
    let norm = |w: &[f64]| w.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut w = op.to_symmetric(u_init);
    project(&mut w);
    let n0 = norm(&w);
    if n0 == 0.0 {
        return Err(Error::param("u_init", "vanishes after projection"));
    }
    let lu = op.implicit_euler(dt);
    // Implicit Euler in original coordinates is the same map as in symmetric ones.
    let n_steps = (t_final / dt).round() as usize;
    let every = (n_steps / outputs.max(1)).max(1);
    let mut times = vec![0.0];
    let mut ratios = vec![1.0];
    let sqrt_rho: Vec<f64> = op.rho_h()[1..op.grid().len() - 1].iter().map(|r| r.sqrt()).collect();
    for k in 0..n_steps {
        // Solve in original coordinates: u = w / √ρ_h.
        let mut u: Vec<f64> = w.iter().zip(&sqrt_rho).map(|(a, s)| a / s).collect();
        lu.solve_in_place(&mut u);
        w = u.iter().zip(&sqrt_rho).map(|(a, s)| a * s).collect();
        project(&mut w);
        if (k + 1) % every == 0 || k + 1 == n_steps {
            times.push((k + 1) as f64 * dt);
            ratios.push(norm(&w) / n0);
        }
    }
    let mut worst: f64 = 0.0;
    let mut first_violation = None;
    for (&t, &r) in times.iter().zip(&ratios) {
        let q = r / (-gap.kappa_hat * t).exp();
        worst = worst.max(q);
        if q > 1.0 + slack && first_violation.is_none() {
            first_violation = Some(t);
        }
    }
    let half = times.len() / 2;
    let (_, slope) = super::stats::linear_fit(
        &times[half..],
        &ratios[half..].iter().map(|r| r.ln()).collect::<Vec<_>>(),
    );
    Ok(ContractionReport {
        times,
        ratios,
        worst_bound_ratio: worst,
        first_violation,
        fitted_rate: -slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpatialGrid;
    use crate::wave_profile::nagumo_profile;

    #[test]
    fn gap_is_positive_and_kernel_is_nearly_neutral() {
        let g = SpatialGrid::new(40.0, 1601).unwrap();
        let p = nagumo_profile(1.0, 2.0, 0.25, &g).unwrap();
        let gap = spectral_gap(&p).unwrap();
        assert!(gap.kappa_hat > 0.0);
        assert!(gap.lambda_top.abs() < 1e-3, "{}", gap.lambda_top);
        assert!(gap.rayleigh_vhat_x.abs() < 1e-3, "{}", gap.rayleigh_vhat_x);
    }

    #[test]
    fn second_eigenvector_decays_at_its_eigenvalue() {
        let g = SpatialGrid::new(20.0, 401).unwrap();
        let p = nagumo_profile(1.0, 2.0, 0.25, &g).unwrap();
        let gap = spectral_gap_with(&p, 10, 1).unwrap();
        let op = FrozenOperator::new(&p).unwrap();
        let u = op.from_symmetric(&gap.second_vector);
        let dt = 1e-3;
        let rep = contraction_check(&p, &gap, &u, dt, 2.0, 20, 0.05).unwrap();
        // Implicit Euler contracts by exactly 1/(1 + dt κ) per step along an eigenvector.
        let expected = (1.0 + dt * gap.kappa_hat).ln() / dt;
        assert!((rep.fitted_rate - expected).abs() < 1e-6 * expected, "{} {}", rep.fitted_rate, expected);
    }
}
